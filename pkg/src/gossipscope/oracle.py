"""Brute-force reference implementations for differential testing.

Nothing here is fast.  The ≈ relation is generated forwards from
``(ε, ε)`` by applying every rule until nothing new appears; the closure is
repeated boolean composition; formulas are evaluated by direct recursion
with no caching.  Sequences are enumerated independently of
:class:`gossipscope.universe.Universe` and matched to it by value.
"""

from __future__ import annotations

import itertools

import numpy as np

from .core import (
    Call,
    CallType,
    Observance,
    Privacy,
    affected,
    all_calls,
    apply_sequence,
    initial_situation,
    involved,
)
from .indist import PairBudgetExceeded, pair_budget
from .logic import And, Familiar, Formula, Know, Not, Or


def enumerate_sequences(n: int, bound: int) -> list[tuple[Call, ...]]:
    calls = all_calls(n)
    out: list[tuple[Call, ...]] = []
    for k in range(bound + 1):
        out.extend(itertools.product(calls, repeat=k))
    return out


class OracleUniverse:
    """Explicit list of sequences with a dict from sequence to position."""

    def __init__(self, n: int, bound: int, calltype: CallType):
        self.n = n
        self.bound = bound
        self.calltype = calltype
        self.seqs = enumerate_sequences(n, bound)
        self.pos = {s: i for i, s in enumerate(self.seqs)}
        init = initial_situation(n)
        self.situations = [apply_sequence(init, s, calltype.direction) for s in self.seqs]

    def __len__(self) -> int:
        return len(self.seqs)


def oracle_approx_table(u: OracleUniverse, a: int) -> np.ndarray:
    """Least set of pairs closed under the rules, restricted to the universe."""
    size = len(u)
    if size * size > pair_budget():
        raise PairBudgetExceeded(f"oracle table of {size * size} pairs exceeds the budget")
    ct = u.calltype
    calls = all_calls(u.n)
    outside = [c for c in calls if not involved(a, c)]
    inside = [c for c in calls if involved(a, c)]
    table = np.zeros((size, size), dtype=bool)
    table[0, 0] = True
    work = [((), ())]

    def add(x, y):
        i, j = u.pos.get(x), u.pos.get(y)
        if i is None or j is None or table[i, j]:
            return
        table[i, j] = True
        work.append((x, y))

    while work:
        x, y = work.pop()
        if ct.privacy is Privacy.P1:
            for c in outside:
                add(x + (c,), y + (c,))
        elif ct.privacy is Privacy.P2:
            for c in outside:
                for d in outside:
                    add(x + (c,), y + (d,))
        else:
            for c in outside:
                add(x + (c,), y)
                add(x, y + (c,))
        for c in inside:
            if not affected(a, c, ct.direction):
                add(x + (c,), y + (c,))
                continue
            sx, sy = u.situations[u.pos[x]], u.situations[u.pos[y]]
            if ct.observance is Observance.AFTER:
                ok = (sx.sets[a] | sx.sets[c.partner(a)]) == (sy.sets[a] | sy.sets[c.partner(a)])
            else:
                ok = sx.sets[c.partner(a)] == sy.sets[c.partner(a)]
            if ok:
                add(x + (c,), y + (c,))
    return table


def oracle_closure(t: np.ndarray) -> np.ndarray:
    """Reflexive-transitive closure by squaring until stable."""
    r = t | np.eye(len(t), dtype=bool)
    while True:
        f = r.astype(np.float32)
        nxt = (f @ f) > 0
        nxt |= r
        if np.array_equal(nxt, r):
            return r
        r = nxt


def oracle_partition(closure: np.ndarray) -> np.ndarray:
    """Class ids numbered in order of each class's smallest member."""
    labels = np.full(len(closure), -1, dtype=np.int64)
    k = 0
    for i in range(len(closure)):
        if labels[i] < 0:
            labels[closure[i]] = k
            k += 1
    return labels


def oracle_eval(phi: Formula, c: tuple[Call, ...], u: OracleUniverse, tables: dict[int, np.ndarray]) -> bool:
    """Direct recursive truth; ``tables[a]`` is agent a's closed relation."""
    if isinstance(phi, Familiar):
        return u.situations[u.pos[c]].familiar(phi.agent, phi.owner)
    if isinstance(phi, Not):
        return not oracle_eval(phi.sub, c, u, tables)
    if isinstance(phi, And):
        return oracle_eval(phi.left, c, u, tables) and oracle_eval(phi.right, c, u, tables)
    if isinstance(phi, Or):
        return oracle_eval(phi.left, c, u, tables) or oracle_eval(phi.right, c, u, tables)
    if isinstance(phi, Know):
        row = tables[phi.agent][u.pos[c]]
        return all(oracle_eval(phi.sub, u.seqs[j], u, tables) for j in range(len(u)) if row[j])
    raise TypeError(f"not a formula: {phi!r}")

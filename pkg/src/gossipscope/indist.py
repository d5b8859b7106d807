"""Indistinguishability of call sequences.

``approx`` decides the rule-generated relation ≈ for a single pair by
memoized recursion over prefix lengths.  ``build_equivalence_index`` builds
the closure ~ for every agent over a bounded universe using the table
kernels in :mod:`gossipscope.kernels`.
"""

from __future__ import annotations

import os
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from . import kernels
from .core import (
    Call,
    CallType,
    Direction,
    DomainError,
    Observance,
    Privacy,
    affected,
    format_sequence,
    involved,
    prefix_situations,
)
from .universe import Universe

DEFAULT_PAIR_BUDGET = 200_000_000


class PairBudgetExceeded(RuntimeError):
    """Raised when a table would exceed the configured pair budget."""


def pair_budget() -> int:
    raw = os.environ.get("GOSSIPSCOPE_PAIR_BUDGET")
    return int(float(raw)) if raw else DEFAULT_PAIR_BUDGET


def approx(c: Sequence[Call], d: Sequence[Call], a: int, calltype: CallType, n: int | None = None) -> bool:
    """Whether ``c ≈ d`` for agent ``a`` under ``calltype``.

    The recursion only ever visits pairs of prefixes of ``c`` and ``d``, so
    the memo is keyed on the two prefix lengths.
    """
    c, d = tuple(c), tuple(d)
    if n is None:
        n = 1 + max([a] + [max(x.caller, x.callee) for x in c + d])
        n = max(n, 3)
    direction = calltype.direction
    sc = prefix_situations(c, direction, n)
    sd = prefix_situations(d, direction, n)
    privacy = calltype.privacy
    memo: dict[tuple[int, int], bool] = {}

    def rel(i: int, j: int) -> bool:
        key = (i, j)
        if key in memo:
            return memo[key]
        result = False
        if i == 0 and j == 0:
            result = True
        else:
            ci = c[i - 1] if i else None
            cj = d[j - 1] if j else None
            if privacy is Privacy.P3:
                if ci is not None and not involved(a, ci) and rel(i - 1, j):
                    result = True
                elif cj is not None and not involved(a, cj) and rel(i, j - 1):
                    result = True
            elif ci is not None and cj is not None and not involved(a, ci) and not involved(a, cj):
                if privacy is Privacy.P2 or ci == cj:
                    result = rel(i - 1, j - 1)
            if not result and ci is not None and ci == cj and involved(a, ci):
                if not affected(a, ci, direction):
                    ok = True
                elif calltype.observance is Observance.AFTER:
                    ok = sc[i].sets[a] == sd[j].sets[a]
                else:
                    b = ci.partner(a)
                    ok = sc[i - 1].sets[b] == sd[j - 1].sets[b]
                result = ok and rel(i - 1, j - 1)
        memo[key] = result
        return result

    return rel(len(c), len(d))


def agent_call_arrays(u: Universe, a: int, direction: Direction):
    """Per-call flags for agent ``a``: involved, affected, and partner (``-1`` if outsider)."""
    inv = (u.callers == a) | (u.callees == a)
    if direction is Direction.PUSHPULL:
        aff = inv.copy()
    elif direction is Direction.PUSH:
        aff = u.callees == a
    else:
        aff = u.callers == a
    partner = np.where(u.callers == a, u.callees, np.where(u.callees == a, u.callers, -1))
    return inv, aff, partner


def agent_table(u: Universe, a: int, bucketed: bool = True, backend: str | None = None):
    """The ≈ table of agent ``a`` over ``u`` as ``(flat, buckets)``."""
    ct = u.calltype
    inv, aff, partner = agent_call_arrays(u, a, ct.direction)
    key = kernels.bucket_keys(u.offsets, u.parent, u.last, inv, int(ct.privacy), bucketed)
    bk = kernels.make_buckets(key)
    budget = pair_budget()
    if bk.pairs > budget:
        raise PairBudgetExceeded(
            f"{bk.pairs} pairs for agent {a} exceed the budget of {budget} "
            "(raise GOSSIPSCOPE_PAIR_BUDGET or lower the bound)"
        )
    sets = u.secret_sets(ct.direction)
    alpha_val = sets[:, a].copy()
    beta_val = np.zeros(u.size, dtype=np.uint64)
    has = u.last >= 0
    idx = np.flatnonzero(has)
    part = partner[u.last[idx]]
    ok = part >= 0
    beta_val[idx[ok]] = sets[u.parent[idx[ok]], part[ok]]
    observance = kernels.AFTER if ct.observance is Observance.AFTER else kernels.BEFORE
    flat = kernels.approx_table(u.parent, u.last, u.length, inv, aff, alpha_val, beta_val,
                                int(ct.privacy), observance, bk, backend)
    return flat, bk


def approx_matrix(u: Universe, a: int, bucketed: bool = True, backend: str | None = None) -> np.ndarray:
    """Dense ``(size, size)`` ≈ matrix; meant for small universes and tests."""
    flat, bk = agent_table(u, a, bucketed, backend)
    out = np.zeros((u.size, u.size), dtype=bool)
    for b in range(len(bk.size)):
        s = int(bk.size[b])
        mem = bk.members[bk.start[b] : bk.start[b + 1]]
        block = flat[bk.table_offset[b] : bk.table_offset[b] + s * s].reshape(s, s)
        out[np.ix_(mem, mem)] = block
    return out


@dataclass
class EquivalenceIndex:
    """Per-agent partition of a universe under ~ (bounded closure of ≈)."""

    universe: Universe
    labels: dict[int, np.ndarray]  # agent -> canonical class id per member
    _members_cache: dict = field(default_factory=dict, repr=False)

    @property
    def calltype(self) -> CallType:
        return self.universe.calltype

    @property
    def bound(self) -> int:
        return self.universe.bound

    def agents(self) -> list[int]:
        return sorted(self.labels)

    def label(self, a: int) -> np.ndarray:
        if a not in self.labels:
            raise DomainError(f"agent {a} is not indexed")
        return self.labels[a]

    def class_count(self, a: int) -> int:
        return int(self.label(a).max()) + 1

    def _resolve(self, c) -> int:
        if isinstance(c, (int, np.integer)):
            if not 0 <= c < self.universe.size:
                raise DomainError(f"index {c} outside the universe")
            return int(c)
        return self.universe.index(c)

    def class_members(self, a: int, class_id: int) -> np.ndarray:
        cache = self._members_cache.get(a)
        if cache is None:
            lab = self.label(a)
            order = np.argsort(lab, kind="stable")
            cuts = np.searchsorted(lab[order], np.arange(lab.max() + 2))
            cache = self._members_cache[a] = (order, cuts)
        order, cuts = cache
        return order[cuts[class_id] : cuts[class_id + 1]]

    def classes(self, a: int) -> list[np.ndarray]:
        return [self.class_members(a, k) for k in range(self.class_count(a))]

    def records(self, a: int | None = None) -> list[dict]:
        """Machine-readable class listing: one ``{agent, class_id, members}`` record per class."""
        agents = self.agents() if a is None else [a]
        d = self.calltype.direction
        out = []
        for x in agents:
            for k, mem in enumerate(self.classes(x)):
                out.append({
                    "agent": chr(ord("a") + x),
                    "class_id": k,
                    "bound": self.bound,
                    "members": [format_sequence(self.universe.sequence(int(i)), d) for i in mem],
                })
        return out


def build_equivalence_index(u: Universe, agents: Sequence[int] | None = None, bucketed: bool = True,
                            backend: str | None = None) -> EquivalenceIndex:
    """Partition ``u`` under ~ for each agent (all agents by default)."""
    if agents is None:
        agents = range(u.n_agents)
    labels = {}
    for a in agents:
        if not 0 <= a < u.n_agents:
            raise DomainError(f"agent {a} out of range")
        flat, bk = agent_table(u, a, bucketed, backend)
        labels[a] = kernels.closure_labels(flat, bk, u.size, backend)
    return EquivalenceIndex(u, labels)


def indistinguishable(c, d, a: int, idx: EquivalenceIndex) -> bool:
    i, j = idx._resolve(c), idx._resolve(d)
    lab = idx.label(a)
    return bool(lab[i] == lab[j])


def class_of(c, a: int, idx: EquivalenceIndex) -> list[tuple[Call, ...]]:
    """All members of the bounded universe in the ~ class of ``c`` for agent ``a``."""
    i = idx._resolve(c)
    mem = idx.class_members(a, int(idx.label(a)[i]))
    return [idx.universe.sequence(int(x)) for x in mem]

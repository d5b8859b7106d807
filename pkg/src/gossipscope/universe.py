"""Bounded universes of call sequences with canonical integer indexing.

Members are ordered by length, then lexicographically by call index, so the
parent (prefix) of member ``i`` always has a smaller index than ``i``.
"""

from __future__ import annotations

from functools import cached_property

import numpy as np

from .core import (
    Call,
    CallType,
    Direction,
    DomainError,
    all_calls,
    call_index,
    check_agent_count,
    format_sequence,
    parse_sequence,
)


def default_bound(n: int) -> int:
    return 4 if n == 3 else 3


class Universe:
    """All call sequences of length ``<= bound`` over ``n_agents`` agents."""

    def __init__(self, n_agents: int, bound: int, calltype: CallType | str):
        if isinstance(calltype, str):
            calltype = CallType.parse(calltype)
        check_agent_count(n_agents)
        if bound < 0:
            raise DomainError("bound must be non-negative")
        self.n_agents = n_agents
        self.bound = bound
        self.calltype = calltype
        self.calls = all_calls(n_agents)
        self.m = len(self.calls)
        sizes = [self.m**k for k in range(bound + 1)]
        self.offsets = np.concatenate([[0], np.cumsum(sizes)]).astype(np.int64)
        self.size = int(self.offsets[-1])

    def with_calltype(self, calltype: CallType) -> "Universe":
        u = Universe.__new__(Universe)
        u.__dict__.update(self.__dict__)
        u.calltype = calltype
        return u

    def __len__(self) -> int:
        return self.size

    def __repr__(self) -> str:
        return f"Universe(n={self.n_agents}, N={self.bound}, {self.calltype}, size={self.size})"

    @cached_property
    def length(self) -> np.ndarray:
        return np.repeat(np.arange(self.bound + 1), np.diff(self.offsets)).astype(np.int64)

    @cached_property
    def parent(self) -> np.ndarray:
        out = np.full(self.size, -1, dtype=np.int64)
        for k in range(1, self.bound + 1):
            lo, hi = self.offsets[k], self.offsets[k + 1]
            out[lo:hi] = self.offsets[k - 1] + np.arange(hi - lo) // self.m
        return out

    @cached_property
    def last(self) -> np.ndarray:
        out = np.full(self.size, -1, dtype=np.int64)
        for k in range(1, self.bound + 1):
            lo, hi = self.offsets[k], self.offsets[k + 1]
            out[lo:hi] = np.arange(hi - lo) % self.m
        return out

    @cached_property
    def callers(self) -> np.ndarray:
        return np.array([c.caller for c in self.calls], dtype=np.int64)

    @cached_property
    def callees(self) -> np.ndarray:
        return np.array([c.callee for c in self.calls], dtype=np.int64)

    def child(self, i, call_idx):
        """Index of member ``i`` extended by call ``call_idx`` (may exceed the bound)."""
        k = self.length[i]
        return self.offsets[k + 1] + (np.asarray(i) - self.offsets[k]) * self.m + call_idx

    def index(self, seq) -> int:
        if isinstance(seq, str):
            seq = parse_sequence(seq, self.n_agents)
        k = len(seq)
        if k > self.bound:
            raise DomainError(f"sequence of length {k} exceeds the bound N={self.bound}")
        pos = 0
        for c in seq:
            if max(c.caller, c.callee) >= self.n_agents:
                raise DomainError(f"call {c} mentions an agent outside the universe")
            pos = pos * self.m + call_index(c, self.n_agents)
        return int(self.offsets[k] + pos)

    def __contains__(self, seq) -> bool:
        try:
            self.index(seq)
        except DomainError:
            return False
        return True

    def sequence(self, i: int) -> tuple[Call, ...]:
        if not 0 <= i < self.size:
            raise DomainError(f"index {i} outside the universe")
        out = []
        while i > 0:
            out.append(self.calls[self.last[i]])
            i = self.parent[i]
        return tuple(reversed(out))

    def format(self, i: int, direction: Direction | None = None) -> str:
        d = self.calltype.direction if direction is None else direction
        return format_sequence(self.sequence(i), d)

    def members(self):
        for i in range(self.size):
            yield self.sequence(i)

    def secret_sets(self, direction: Direction | None = None) -> np.ndarray:
        """``(size, n)`` array: bit set of secrets of each agent after each member."""
        d = self.calltype.direction if direction is None else direction
        cache = self.__dict__.setdefault("_sets_cache", {})
        if d not in cache:
            cache[d] = self._compute_sets(d)
        return cache[d]

    def _compute_sets(self, d: Direction) -> np.ndarray:
        n = self.n_agents
        sets = np.zeros((self.size, n), dtype=np.uint64)
        sets[0] = np.left_shift(np.uint64(1), np.arange(n, dtype=np.uint64))
        for k in range(1, self.bound + 1):
            lo, hi = self.offsets[k], self.offsets[k + 1]
            rows = np.arange(lo, hi)
            par = self.parent[lo:hi]
            cur = sets[par].copy()
            x = self.callers[self.last[lo:hi]]
            y = self.callees[self.last[lo:hi]]
            union = cur[np.arange(hi - lo), x] | cur[np.arange(hi - lo), y]
            if d is not Direction.PULL:
                cur[np.arange(hi - lo), y] = union
            if d is not Direction.PUSH:
                cur[np.arange(hi - lo), x] = union
            sets[rows] = cur
        return sets

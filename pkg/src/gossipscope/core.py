"""Agents, calls, call types and the informational effect of calls.

Agents are integer indices ``0..n-1`` displayed as lowercase letters; the
secret of an agent is identified with its owner and displayed as the
uppercase letter.  Secret sets are bit sets (bit ``i`` is the secret of
agent ``i``).
"""

from __future__ import annotations

import enum
import itertools
import re
from dataclasses import dataclass
from typing import Iterable, Sequence

MIN_AGENTS = 3
MAX_DISPLAY_AGENTS = 26


class DomainError(ValueError):
    """An argument lies outside the model's domain (agent count, agent id, ...)."""


class Privacy(enum.IntEnum):
    P1 = 1
    P2 = 2
    P3 = 3

    def __str__(self) -> str:
        return f"p{self.value}"


class Direction(enum.Enum):
    PUSHPULL = "pushpull"
    PUSH = "push"
    PULL = "pull"

    @property
    def arrow(self) -> str:
        return _ARROWS[self]

    @property
    def symbol(self) -> str:
        return _SYMBOLS[self]

    def __str__(self) -> str:
        return self.value


class Observance(enum.Enum):
    AFTER = "after"
    BEFORE = "before"

    @property
    def symbol(self) -> str:
        return "α" if self is Observance.AFTER else "β"

    def __str__(self) -> str:
        return self.value


_ARROWS = {Direction.PUSHPULL: "<>", Direction.PUSH: ">", Direction.PULL: "<"}
_SYMBOLS = {Direction.PUSHPULL: "◇", Direction.PUSH: "▷", Direction.PULL: "◁"}


@dataclass(frozen=True, order=True)
class CallType:
    privacy: Privacy
    direction: Direction
    observance: Observance

    @classmethod
    def parse(cls, text: str) -> "CallType":
        """Parse ``"p3,pushpull,before"`` (whitespace ignored)."""
        parts = [p.strip().lower() for p in text.split(",")]
        if len(parts) != 3:
            raise DomainError(f"call type must look like 'p1,pushpull,after', got {text!r}")
        p, d, o = parts
        try:
            privacy = Privacy(int(p[1:])) if p.startswith("p") else Privacy(int(p))
            direction = Direction(d)
            observance = Observance(o)
        except ValueError:
            raise DomainError(f"unknown call type {text!r}") from None
        return cls(privacy, direction, observance)

    @property
    def tag(self) -> str:
        return f"{self.privacy},{self.direction},{self.observance}"

    @property
    def symbol(self) -> str:
        return f"({self.privacy},{self.direction.symbol},{self.observance.symbol})"

    def __str__(self) -> str:
        return self.tag


def all_calltypes() -> list[CallType]:
    """The 18 call types in a fixed order (privacy, direction, observance)."""
    return [CallType(p, d, o) for p in Privacy for d in Direction for o in Observance]


def agent_name(a: int) -> str:
    if not 0 <= a < MAX_DISPLAY_AGENTS:
        raise DomainError(f"agent {a} has no letter name")
    return chr(ord("a") + a)


def secret_name(a: int) -> str:
    return agent_name(a).upper()


def agent_id(letter: str, n: int | None = None) -> int:
    if len(letter) != 1 or not ("a" <= letter <= "z"):
        raise DomainError(f"agent must be a single lowercase letter, got {letter!r}")
    a = ord(letter) - ord("a")
    if n is not None and a >= n:
        raise DomainError(f"agent {letter!r} out of range for {n} agents")
    return a


def check_agent_count(n: int) -> None:
    if n < MIN_AGENTS:
        raise DomainError(f"at least {MIN_AGENTS} agents are required, got {n}")


@dataclass(frozen=True, order=True)
class Call:
    """An ordered caller/callee pair; the direction comes from the call type."""

    caller: int
    callee: int

    def __post_init__(self):
        if self.caller == self.callee:
            raise DomainError("an agent cannot call herself")
        if self.caller < 0 or self.callee < 0:
            raise DomainError("agent indices must be non-negative")

    def format(self, direction: Direction | None = Direction.PUSHPULL) -> str:
        arrow = direction.arrow if direction is not None else ""
        return f"{agent_name(self.caller)}{arrow}{agent_name(self.callee)}"

    def partner(self, a: int) -> int:
        if a == self.caller:
            return self.callee
        if a == self.callee:
            return self.caller
        raise DomainError(f"agent {a} is not involved in {self}")

    def __str__(self) -> str:
        return self.format()


CallSequence = tuple  # tuple[Call, ...]

_CALL_RE = re.compile(r"^([a-z])(<>|>|<)?([a-z])$")


def parse_call(text: str, n: int | None = None) -> tuple[Call, Direction | None]:
    """Parse ``a<>b``, ``a>b``, ``a<b`` or the bare form ``ab``."""
    token = "".join(text.split())
    m = _CALL_RE.match(token)
    if m is None:
        raise DomainError(f"malformed call {text!r}")
    x, arrow, y = m.groups()
    direction = None
    if arrow is not None:
        direction = {v: k for k, v in _ARROWS.items()}[arrow]
    return Call(agent_id(x, n), agent_id(y, n)), direction


def parse_sequence(text: str, n: int | None = None) -> tuple[Call, ...]:
    """Parse a ``;``-separated call sequence.  ``""`` and ``"ε"`` give the empty sequence."""
    return parse_sequence_with_direction(text, n)[0]


def parse_sequence_with_direction(text: str, n: int | None = None) -> tuple[tuple[Call, ...], Direction | None]:
    """Like :func:`parse_sequence` but also returns the (single) direction used in the notation.

    Bare calls (``ab``) carry no direction; mixing arrows is an error.
    """
    body = "".join(text.split())
    if body in ("", "ε", "eps", "epsilon"):
        return (), None
    calls = []
    seen: set[Direction] = set()
    for part in body.split(";"):
        if not part:
            continue
        call, d = parse_call(part, n)
        calls.append(call)
        if d is not None:
            seen.add(d)
    if len(seen) > 1:
        raise DomainError(f"sequence {text!r} mixes call directions")
    return tuple(calls), (seen.pop() if seen else None)


def format_sequence(seq: Sequence[Call], direction: Direction | None = Direction.PUSHPULL) -> str:
    if not seq:
        return "ε"
    return ";".join(c.format(direction) for c in seq)


@dataclass(frozen=True)
class GossipSituation:
    """Per-agent secret sets, each a bit set over secret owners."""

    sets: tuple[int, ...]

    @property
    def n(self) -> int:
        return len(self.sets)

    def secrets_of(self, a: int) -> frozenset[int]:
        q = self.sets[a]
        return frozenset(i for i in range(self.n) if q >> i & 1)

    def familiar(self, a: int, owner: int) -> bool:
        return bool(self.sets[a] >> owner & 1)

    def is_expert(self, a: int) -> bool:
        return self.sets[a] == (1 << self.n) - 1

    def all_experts(self) -> bool:
        return all(self.is_expert(a) for a in range(self.n))

    @classmethod
    def parse(cls, text: str) -> "GossipSituation":
        """Parse dotted notation such as ``AB.AB.C``."""
        parts = text.strip().split(".")
        sets = []
        for part in parts:
            q = 0
            for ch in part.strip():
                q |= 1 << (ord(ch.lower()) - ord("a"))
            sets.append(q)
        return cls(tuple(sets))

    def __str__(self) -> str:
        return ".".join(
            "".join(secret_name(i) for i in range(self.n) if q >> i & 1) for q in self.sets
        )


def initial_situation(n: int) -> GossipSituation:
    check_agent_count(n)
    return GossipSituation(tuple(1 << a for a in range(n)))


def involved(a: int, c: Call) -> bool:
    return a == c.caller or a == c.callee


def affected(a: int, c: Call, d: Direction) -> bool:
    """Whether ``a``'s secret set can change through ``c`` under direction ``d``."""
    if d is Direction.PUSHPULL:
        return involved(a, c)
    if d is Direction.PUSH:
        return a == c.callee
    return a == c.caller


def apply_call(s: GossipSituation, c: Call, d: Direction) -> GossipSituation:
    if max(c.caller, c.callee) >= s.n:
        raise DomainError(f"call {c} mentions an agent outside 0..{s.n - 1}")
    sets = list(s.sets)
    union = sets[c.caller] | sets[c.callee]
    if d is Direction.PUSHPULL:
        sets[c.caller] = sets[c.callee] = union
    elif d is Direction.PUSH:
        sets[c.callee] = union
    else:
        sets[c.caller] = union
    return GossipSituation(tuple(sets))


def apply_sequence(s: GossipSituation, seq: Iterable[Call], d: Direction) -> GossipSituation:
    for c in seq:
        s = apply_call(s, c, d)
    return s


def prefix_situations(seq: Sequence[Call], d: Direction, n: int) -> list[GossipSituation]:
    """Situations after each prefix of ``seq``: entry ``k`` is ``seq[:k](i)``."""
    out = [initial_situation(n)]
    for c in seq:
        out.append(apply_call(out[-1], c, d))
    return out


def all_calls(n: int) -> list[Call]:
    """All ``n(n-1)`` ordered calls, in caller-major order (the canonical call index)."""
    return [Call(x, y) for x, y in itertools.permutations(range(n), 2)]


def call_index(c: Call, n: int) -> int:
    return c.caller * (n - 1) + (c.callee if c.callee < c.caller else c.callee - 1)

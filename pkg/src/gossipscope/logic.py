"""The epistemic language: formulas, parsing, fragments and truth.

Grammar (whitespace ignored, precedence ``!`` > ``&`` > ``|``, binary
operators associate to the right)::

    phi := F[x,y] | K[x] phi | Exp[x] | !phi | phi & phi | phi | phi | (phi)

``F[x,y]`` says agent x is familiar with the secret of y.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Mapping

import numpy as np

from .core import DomainError, agent_name
from .indist import EquivalenceIndex, build_equivalence_index
from .universe import Universe


class Formula:
    __slots__ = ()

    def __and__(self, other: "Formula") -> "Formula":
        return And(self, other)

    def __or__(self, other: "Formula") -> "Formula":
        return Or(self, other)

    def __invert__(self) -> "Formula":
        return Not(self)

    def __str__(self) -> str:
        return format_formula(self)


@dataclass(frozen=True, slots=True)
class Familiar(Formula):
    agent: int
    owner: int


@dataclass(frozen=True, slots=True)
class Not(Formula):
    sub: Formula


@dataclass(frozen=True, slots=True)
class And(Formula):
    left: Formula
    right: Formula


@dataclass(frozen=True, slots=True)
class Or(Formula):
    left: Formula
    right: Formula


@dataclass(frozen=True, slots=True)
class Know(Formula):
    agent: int
    sub: Formula


def conj(parts) -> Formula:
    parts = list(parts)
    if not parts:
        raise ValueError("empty conjunction")
    out = parts[-1]
    for p in reversed(parts[:-1]):
        out = And(p, out)
    return out


def disj(parts) -> Formula:
    parts = list(parts)
    if not parts:
        raise ValueError("empty disjunction")
    out = parts[-1]
    for p in reversed(parts[:-1]):
        out = Or(p, out)
    return out


def khat(a: int, phi: Formula) -> Formula:
    """The dual modality ¬K¬, kept in that syntactic shape."""
    return Not(Know(a, Not(phi)))


def expert_formula(a: int, n: int) -> Formula:
    if not 0 <= a < n:
        raise DomainError(f"agent {a} out of range for {n} agents")
    return conj(Familiar(a, b) for b in range(n))


# ---------------------------------------------------------------------------
# parsing


class FormulaSyntaxError(ValueError):
    def __init__(self, message: str, text: str, pos: int):
        super().__init__(f"{message} at position {pos}: {text!r}")
        self.text = text
        self.pos = pos


class _Parser:
    def __init__(self, text: str, n: int | None, variables: Mapping[str, int] | None):
        self.text = text
        self.n = n
        self.variables = dict(variables or {})
        self.pos = 0

    def error(self, msg: str):
        raise FormulaSyntaxError(msg, self.text, self.pos)

    def skip(self):
        while self.pos < len(self.text) and self.text[self.pos].isspace():
            self.pos += 1

    def peek(self, s: str) -> bool:
        self.skip()
        return self.text.startswith(s, self.pos)

    def expect(self, s: str):
        if not self.peek(s):
            self.error(f"expected {s!r}")
        self.pos += len(s)

    def agent(self) -> int:
        self.skip()
        if self.pos >= len(self.text):
            self.error("expected an agent")
        ch = self.text[self.pos]
        if ch in self.variables:
            self.pos += 1
            return self.variables[ch]
        if not ("a" <= ch <= "z"):
            self.error(f"expected an agent letter, got {ch!r}")
        a = ord(ch) - ord("a")
        if self.n is not None and a >= self.n:
            self.error(f"agent {ch!r} is outside the {self.n} agents")
        self.pos += 1
        return a

    def parse(self) -> Formula:
        phi = self.disjunction()
        self.skip()
        if self.pos != len(self.text):
            self.error("unexpected trailing input")
        return phi

    def disjunction(self) -> Formula:
        left = self.conjunction()
        if self.peek("|"):
            self.pos += 1
            return Or(left, self.disjunction())
        return left

    def conjunction(self) -> Formula:
        left = self.unary()
        if self.peek("&"):
            self.pos += 1
            return And(left, self.conjunction())
        return left

    def unary(self) -> Formula:
        self.skip()
        if self.peek("!"):
            self.pos += 1
            return Not(self.unary())
        if self.peek("("):
            self.pos += 1
            phi = self.disjunction()
            self.expect(")")
            return phi
        if self.peek("K["):
            self.pos += 2
            a = self.agent()
            self.expect("]")
            return Know(a, self.unary())
        if self.peek("F["):
            self.pos += 2
            a = self.agent()
            self.expect(",")
            b = self.agent()
            self.expect("]")
            return Familiar(a, b)
        if self.peek("Exp["):
            self.pos += 4
            a = self.agent()
            self.expect("]")
            if self.n is None:
                self.error("Exp[...] needs the agent count")
            return expert_formula(a, self.n)
        self.error("expected a formula")


def parse_formula(text: str, n: int | None = None, variables: Mapping[str, int] | None = None) -> Formula:
    """Parse ``text``; ``variables`` maps uppercase placeholders (e.g. ``X``) to agents."""
    return _Parser(text, n, variables).parse()


_PREC = {Or: 1, And: 2}


def format_formula(phi: Formula) -> str:
    if isinstance(phi, Familiar):
        return f"F[{agent_name(phi.agent)},{agent_name(phi.owner)}]"
    if isinstance(phi, Not):
        return "!" + _wrap_unary(phi.sub)
    if isinstance(phi, Know):
        return f"K[{agent_name(phi.agent)}]" + _wrap_unary(phi.sub)
    if isinstance(phi, (And, Or)):
        op = "&" if isinstance(phi, And) else "|"
        left = format_formula(phi.left)
        if isinstance(phi.left, (And, Or)) and _PREC[type(phi.left)] <= _PREC[type(phi)]:
            left = f"({left})"
        right = format_formula(phi.right)
        if isinstance(phi.right, (And, Or)) and _PREC[type(phi.right)] < _PREC[type(phi)]:
            right = f"({right})"
        return f"{left}{op}{right}"
    raise TypeError(f"not a formula: {phi!r}")


def _wrap_unary(phi: Formula) -> str:
    s = format_formula(phi)
    return f"({s})" if isinstance(phi, (And, Or)) else s


# ---------------------------------------------------------------------------
# fragments


@dataclass(frozen=True)
class FragmentFlags:
    in_L1plus: bool
    in_L2plus: bool
    in_Lhat: bool


def _is_literal(phi: Formula) -> bool:
    return isinstance(phi, Familiar) or (isinstance(phi, Not) and isinstance(phi.sub, Familiar))


def _in_positive(phi: Formula, literals: bool) -> bool:
    if isinstance(phi, Familiar):
        return True
    if isinstance(phi, Not):
        return literals and isinstance(phi.sub, Familiar)
    if isinstance(phi, (And, Or)):
        return _in_positive(phi.left, literals) and _in_positive(phi.right, literals)
    if isinstance(phi, Know):
        return _in_positive(phi.sub, literals)
    return False


def in_lhat(phi: Formula) -> bool:
    if _is_literal(phi):
        return True
    if isinstance(phi, (And, Or)):
        return in_lhat(phi.left) and in_lhat(phi.right)
    if isinstance(phi, Not) and isinstance(phi.sub, Know) and isinstance(phi.sub.sub, Not):
        return in_lhat(phi.sub.sub.sub)
    return False


def fragment_of(phi: Formula) -> FragmentFlags:
    return FragmentFlags(
        in_L1plus=_in_positive(phi, literals=True),
        in_L2plus=_in_positive(phi, literals=False),
        in_Lhat=in_lhat(phi),
    )


def agents_of(phi: Formula) -> set[int]:
    if isinstance(phi, Familiar):
        return {phi.agent, phi.owner}
    if isinstance(phi, Not):
        return agents_of(phi.sub)
    if isinstance(phi, (And, Or)):
        return agents_of(phi.left) | agents_of(phi.right)
    if isinstance(phi, Know):
        return {phi.agent} | agents_of(phi.sub)
    raise TypeError(f"not a formula: {phi!r}")


def subformulas(phi: Formula):
    yield phi
    if isinstance(phi, (Not, Know)):
        yield from subformulas(phi.sub)
    elif isinstance(phi, (And, Or)):
        yield from subformulas(phi.left)
        yield from subformulas(phi.right)


# ---------------------------------------------------------------------------
# truth


@dataclass
class GossipModel:
    """A bounded universe with its equivalence index under one call type."""

    universe: Universe
    index: EquivalenceIndex
    _cache: dict = field(default_factory=dict, repr=False)

    @classmethod
    def build(cls, n: int, bound: int, calltype, backend: str | None = None) -> "GossipModel":
        u = Universe(n, bound, calltype)
        return cls(u, build_equivalence_index(u, backend=backend))

    @property
    def calltype(self):
        return self.universe.calltype

    @property
    def bound(self) -> int:
        return self.universe.bound

    @property
    def n_agents(self) -> int:
        return self.universe.n_agents

    def truth(self, phi: Formula, domain: np.ndarray | None = None) -> np.ndarray:
        """Truth value of ``phi`` at every member.

        With a boolean ``domain`` mask the knowledge clauses quantify only over
        members of the domain (the relativised model); values at members
        outside the domain carry no meaning.  Results are cached per
        subformula for the unrestricted model.
        """
        out_of_range = [x for x in agents_of(phi) if x >= self.n_agents]
        if out_of_range:
            raise DomainError(f"formula mentions agent {out_of_range[0]} outside {self.n_agents} agents")
        cache = self._cache if domain is None else {}
        return self._truth(phi, domain, cache)

    def _truth(self, phi, domain, cache) -> np.ndarray:
        hit = cache.get(phi)
        if hit is not None:
            return hit
        if isinstance(phi, Familiar):
            sets = self.universe.secret_sets()
            v = (sets[:, phi.agent] >> np.uint64(phi.owner)) & np.uint64(1) == 1
        elif isinstance(phi, Not):
            v = ~self._truth(phi.sub, domain, cache)
        elif isinstance(phi, And):
            v = self._truth(phi.left, domain, cache) & self._truth(phi.right, domain, cache)
        elif isinstance(phi, Or):
            v = self._truth(phi.left, domain, cache) | self._truth(phi.right, domain, cache)
        elif isinstance(phi, Know):
            sub = self._truth(phi.sub, domain, cache)
            lab = self.index.label(phi.agent)
            bad = ~sub if domain is None else (~sub & domain)
            counts = np.bincount(lab, weights=bad, minlength=int(lab.max()) + 1)
            v = counts[lab] == 0
        else:
            raise TypeError(f"not a formula: {phi!r}")
        cache[phi] = v
        return v

    def eval(self, phi: Formula, c, domain: np.ndarray | None = None) -> bool:
        i = c if isinstance(c, (int, np.integer)) else self.universe.index(c)
        if not 0 <= i < self.universe.size:
            raise DomainError(f"index {i} outside the universe")
        return bool(self.truth(phi, domain)[i])


def evaluate(phi: Formula, c, m: GossipModel) -> bool:
    """Truth of ``phi`` at sequence ``c`` in ``m`` (knowledge relative to m's bound)."""
    return m.eval(phi, c)

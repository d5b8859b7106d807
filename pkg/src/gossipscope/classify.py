"""Bounded verification of how the 18 indistinguishability relations compare.

``compare_types`` decides inclusion of the per-agent partitions exhaustively
over a bounded universe.  Non-inclusion is found by search, or else by the
fixture table of known separating pairs (evaluated at their own length).
``verify_preorder`` checks every one of the 153 pairs against the expected
Hasse diagrams for three agents and for more than three.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field

import numpy as np

from .core import CallType, Direction, DomainError, Observance, Privacy, all_calltypes, parse_sequence
from .indist import EquivalenceIndex, build_equivalence_index
from .logic import Familiar, Formula, GossipModel, Know, Not, Or, And, fragment_of, format_formula
from .universe import Universe

EQUAL = "Equal"
LEFT = "LeftStrictSubset"
RIGHT = "RightStrictSubset"
INCOMPARABLE = "Incomparable"

_SWAP = {EQUAL: EQUAL, LEFT: RIGHT, RIGHT: LEFT, INCOMPARABLE: INCOMPARABLE}

PD, PUSH, PULL = Direction.PUSHPULL, Direction.PUSH, Direction.PULL


def T(p: int, d: Direction, o: str) -> CallType:
    return CallType(Privacy(p), d, Observance(o))


def expand(pattern: str) -> list[CallType]:
    """Expand ``"p2,push|pull,*"`` style patterns into call types."""
    p, d, o = (x.strip() for x in pattern.split(","))
    ps = [Privacy(int(x[1:])) for x in p.split("|")] if p != "*" else list(Privacy)
    ds = [Direction(x) for x in d.split("|")] if d != "*" else list(Direction)
    os_ = [Observance(x) for x in o.split("|")] if o != "*" else list(Observance)
    return [CallType(a, b, c) for a in ps for b in ds for c in os_]


# ---------------------------------------------------------------------------
# expected preorders


@dataclass(frozen=True)
class ExpectedPreorder:
    n_agents: int
    arrows: frozenset  # (smaller, larger) pairs, including both directions of equalities
    _reach: dict = field(default_factory=dict, compare=False, repr=False)

    def leq(self, t1: CallType, t2: CallType) -> bool:
        if not self._reach:
            types = all_calltypes()
            reach = {t: {t} for t in types}
            changed = True
            while changed:
                changed = False
                for x, y in self.arrows:
                    for t in types:
                        if x in reach[t] and y not in reach[t]:
                            reach[t].add(y)
                            changed = True
            self._reach.update(reach)
        return t2 in self._reach[t1]

    def verdict(self, t1: CallType, t2: CallType) -> str:
        a, b = self.leq(t1, t2), self.leq(t2, t1)
        if a and b:
            return EQUAL
        if a:
            return LEFT
        if b:
            return RIGHT
        return INCOMPARABLE


def expected_preorder(n: int) -> ExpectedPreorder:
    """Hasse diagram for ``n`` agents (one shape for 3, another for more)."""
    if n < 3:
        raise DomainError("at least 3 agents")
    arrows = set()

    def eq(group):
        for x, y in itertools.permutations(group, 2):
            arrows.add((x, y))

    p1 = expand("p1,*,*")
    eq(p1)
    base = p1[0]
    A, B = "after", "before"
    if n == 3:
        eq(expand("p2,pushpull,*"))
        arrows |= {(base, T(2, PD, B)), (T(2, PD, B), T(3, PD, B)), (T(3, PD, B), T(3, PD, A))}
    else:
        arrows |= {
            (base, T(2, PD, B)), (T(2, PD, B), T(3, PD, B)), (T(3, PD, B), T(3, PD, A)),
            (T(2, PD, B), T(2, PD, A)), (T(2, PD, A), T(3, PD, A)),
        }
    for d in (PUSH, PULL):
        arrows |= {
            (base, T(2, d, B)), (T(2, d, B), T(3, d, B)), (T(2, d, B), T(2, d, A)),
            (T(3, d, B), T(3, d, A)), (T(2, d, A), T(3, d, A)),
        }
        if n == 3:
            arrows |= {(T(2, d, B), T(2, PD, B)), (T(2, d, A), T(2, PD, B))}
    return ExpectedPreorder(n, frozenset(arrows))


# ---------------------------------------------------------------------------
# witness fixtures


@dataclass(frozen=True)
class WitnessFixture:
    source: str
    seq_a: str
    seq_b: str
    related: tuple[CallType, ...]  # types under which the pair is indistinguishable for a
    unrelated: tuple[CallType, ...]
    min_agents: int = 3

    @property
    def length(self) -> int:
        return max(len(parse_sequence(self.seq_a)), len(parse_sequence(self.seq_b)))


def _fx(source, a, b, related, unrelated, min_agents=3):
    rel = tuple(t for s in related.split(";") for t in expand(s))
    unr = tuple(t for s in unrelated.split(";") for t in expand(s))
    return WitnessFixture(source, a, b, rel, unr, min_agents)


# Pairs of sequences that separate relations, always for agent a.  Calls are
# written bare; their direction is taken from the call type being tested.
WITNESSES: tuple[WitnessFixture, ...] = (
    _fx("W01", "bc", "cb", "p2,*,*", "p1,*,*"),
    _fx("W02", "bc", "", "p3,*,*", "p2,*,*"),
    _fx("W03", "ab;ac;bc;ab", "ab;ac;cd;ab", "p2,pushpull,after", "p2,pushpull,before", 4),
    _fx("W04", "ca;bc;ba", "ca;cb;ba", "p2,push,after", "p2,push,before"),
    _fx("W05", "ac;cb;ab", "ac;bc;ab", "p2,pull,after", "p2,pull,before"),
    _fx("W06", "cb;ca", "bc;ca", "p2,pushpull,*", "p2,push,*"),
    _fx("W07", "bc;ac", "cb;ac", "p2,pushpull,*", "p2,pull,*"),
    _fx("W08", "ac;ab", "ac;bc;ab", "p3,pushpull,after", "p3,pushpull,before"),
    _fx("W09", "ca;ba", "ca;cb;ba", "p3,push,after", "p3,push,before"),
    _fx("W10", "ac;ab", "ac;bc;ab", "p3,pull,after", "p3,pull,before"),
    _fx("W11", "bc;ca", "bd;ca", "p2,pull,*", "p2,pushpull,*", 4),
    _fx("W12", "bc;ac", "cb;ac", "p2,pushpull,*", "p2,pull,*"),
    _fx("W13", "cb;ac", "db;ac", "p2,push,*", "p2,pushpull,*", 4),
    _fx("W14", "cb;ca", "bc;ca", "p2,pushpull,*", "p2,push,*"),
    _fx("W15", "bc;ac", "cb;ac", "p2,push,*", "p2,pull,*"),
    _fx("W16", "cb;ca", "bc;ca", "p2,pull,*", "p2,push,*"),
    _fx("W17", "bc;ca", "ca", "p3,pull,*", "p3,pushpull,*"),
    _fx("W18", "cb;ac", "ac", "p3,push,*", "p3,pushpull,*"),
    _fx("W19", "bc;ac", "cb;ac", "p3,push,*", "p3,pull,*"),
    _fx("W20", "cb;ca", "bc;ca", "p3,pull,*", "p3,push,*"),
    _fx("W21", "bc;ac", "cb;ac", "p3,pushpull,*", "p3,pull,*"),
    _fx("W22", "cb;ca", "bc;ca", "p3,pushpull,*", "p3,push,*"),
    _fx("W23", "cb;ca", "bc;ca", "p2,pushpull,after", "p3,push,after"),
    _fx("W24", "bc;ac", "cb;ac", "p2,pushpull,after", "p3,pull,after"),
    _fx("W25", "bc", "", "p3,push|pull,after", "p2,pushpull,after"),
    _fx("W26", "cb;ab", "bc;ab", "p2,push,before", "p3,pull,after"),
    _fx("W27", "cb;ac", "db;ac", "p2,push,before", "p3,pushpull,after", 4),
    _fx("W28", "bc;ba", "cb;ba", "p2,pull,before", "p3,push,after"),
    _fx("W29", "bc;ca", "bd;ca", "p2,pull,before", "p3,pushpull,after", 4),
    _fx("W30", "cb;ca", "bc;ca", "p2,pushpull,before", "p3,push,after"),
    _fx("W31", "bc;ac", "cb;ac", "p2,pushpull,before", "p3,pull,after"),
    _fx("W32", "bc", "", "p3,*,after", "p2,*,before"),
    _fx("W33", "ab;ac;bc;ab", "ab;ac;cd;ab", "p2,pushpull,after", "p3,pushpull,before", 4),
    _fx("W34", "ca;bc;ba", "ca;cb;ba", "p2,push,after", "p3,push,before"),
    _fx("W35", "ac;cb;ab", "ac;bc;ab", "p2,pull,after", "p3,pull,before"),
    _fx("W36", "bc", "", "p3,push|pull,before", "p2,push|pull,after"),
)


class IndexCache:
    """Equivalence indices keyed by (n, bound, call type, agents)."""

    def __init__(self, backend: str | None = None):
        self.backend = backend
        self._store: dict = {}

    def get(self, n: int, bound: int, ct: CallType, agents=None) -> EquivalenceIndex:
        agents = tuple(range(n)) if agents is None else tuple(agents)
        key = (n, bound, ct, agents)
        if key not in self._store:
            # an index over more agents serves a request for fewer
            full = (n, bound, ct, tuple(range(n)))
            if full in self._store:
                return self._store[full]
            self._store[key] = build_equivalence_index(Universe(n, bound, ct), agents, backend=self.backend)
        return self._store[key]


def witness_related(fx: WitnessFixture, ct: CallType, n: int, bound: int | None = None,
                    cache: IndexCache | None = None) -> bool:
    """Whether the fixture's pair is indistinguishable for agent a under ``ct``."""
    if n < fx.min_agents:
        raise DomainError(f"{fx.source} needs at least {fx.min_agents} agents")
    cache = cache or IndexCache()
    bound = max(bound or 0, fx.length)
    idx = cache.get(n, bound, ct, (0,))
    u = idx.universe
    i, j = u.index(parse_sequence(fx.seq_a, n)), u.index(parse_sequence(fx.seq_b, n))
    lab = idx.label(0)
    return bool(lab[i] == lab[j])


@dataclass
class FixtureCheck:
    fixture: WitnessFixture
    calltype: CallType
    expected: bool
    observed: bool
    bound: int

    @property
    def ok(self) -> bool:
        return self.expected == self.observed


def check_fixtures(n: int, bound: int | None = None, cache: IndexCache | None = None,
                   fixtures=WITNESSES) -> list[FixtureCheck]:
    cache = cache or IndexCache()
    out = []
    for fx in fixtures:
        if n < fx.min_agents:
            continue
        b = max(bound or 0, fx.length)
        for ct, want in [(t, True) for t in fx.related] + [(t, False) for t in fx.unrelated]:
            out.append(FixtureCheck(fx, ct, want, witness_related(fx, ct, n, b, cache), b))
    return out


# ---------------------------------------------------------------------------
# comparison


@dataclass(frozen=True)
class Witness:
    agent: int
    seq_a: str
    seq_b: str
    related_under: CallType
    unrelated_under: CallType
    bound: int
    source: str = "search"

    def record(self) -> dict:
        return {
            "agent": chr(ord("a") + self.agent),
            "seqA": self.seq_a,
            "seqB": self.seq_b,
            "direction_of_failure": f"{self.related_under.tag} not included in {self.unrelated_under.tag}",
            "bound": self.bound,
            "source": self.source,
        }


@dataclass
class ComparisonResult:
    left: CallType
    right: CallType
    verdict: str
    bound: int
    witnesses: list[Witness]
    note: str = ""

    def swapped(self) -> "ComparisonResult":
        return ComparisonResult(self.right, self.left, _SWAP[self.verdict], self.bound, self.witnesses, self.note)

    def record(self) -> dict:
        return {
            "pair": [self.left.tag, self.right.tag],
            "verdict": self.verdict,
            "bound": self.bound,
            "witnesses": [w.record() for w in self.witnesses],
            "note": self.note,
        }


def inclusion_witness(i1: EquivalenceIndex, i2: EquivalenceIndex) -> Witness | None:
    """A pair related in ``i1`` but not in ``i2`` (None when ``i1 ⊆ i2`` at every agent)."""
    u = i1.universe
    for a in i1.agents():
        l1, l2 = i1.label(a), i2.label(a)
        # representative of each l1-class, then any member disagreeing with it on l2
        _, rep = np.unique(l1, return_index=True)
        bad = np.flatnonzero(l2 != l2[rep[l1]])
        if len(bad):
            j = int(bad[0])
            i = int(rep[l1[j]])
            d1 = i1.calltype.direction
            return Witness(a, u.format(i, d1), u.format(j, d1), i1.calltype, i2.calltype, u.bound)
    return None


def _fixture_witness(t1: CallType, t2: CallType, n: int, bound: int, cache: IndexCache) -> Witness | None:
    """A fixture pair related under ``t1`` and not under ``t2``, confirmed by evaluation."""
    for fx in WITNESSES:
        if n < fx.min_agents or t1 not in fx.related or t2 not in fx.unrelated:
            continue
        b = max(bound, fx.length)
        if witness_related(fx, t1, n, b, cache) and not witness_related(fx, t2, n, b, cache):
            return Witness(0, fx.seq_a or "ε", fx.seq_b or "ε", t1, t2, b, fx.source)
    return None


def compare_types(t1: CallType, t2: CallType, n: int, bound: int, cache: IndexCache | None = None,
                  use_fixtures: bool = True) -> ComparisonResult:
    """Compare ~ under two call types over all agents at the given bound."""
    if n < 3 or bound < 2:
        raise DomainError("compare_types needs n >= 3 and bound >= 2")
    t1, t2 = (CallType.parse(t) if isinstance(t, str) else t for t in (t1, t2))
    cache = cache or IndexCache()
    i1, i2 = cache.get(n, bound, t1), cache.get(n, bound, t2)
    w12 = inclusion_witness(i1, i2)
    w21 = inclusion_witness(i2, i1)
    note = ""
    if use_fixtures:
        if w12 is None:
            w12 = _fixture_witness(t1, t2, n, bound, cache)
        if w21 is None:
            w21 = _fixture_witness(t2, t1, n, bound, cache)
        if any(w is not None and w.source != "search" for w in (w12, w21)):
            note = f"separated only beyond bound {bound}; raise the bound to see it by search"
    if w12 is None and w21 is None:
        verdict = EQUAL
    elif w12 is None:
        verdict = LEFT
    elif w21 is None:
        verdict = RIGHT
    else:
        verdict = INCOMPARABLE
    return ComparisonResult(t1, t2, verdict, bound, [w for w in (w12, w21) if w is not None], note)


@dataclass
class PreorderReport:
    n_agents: int
    bound: int
    results: list[ComparisonResult]
    expected: dict  # (t1, t2) -> verdict
    fixtures: list[FixtureCheck]

    @property
    def deviations(self) -> list[ComparisonResult]:
        return [r for r in self.results if r.verdict != self.expected[(r.left, r.right)]]

    @property
    def fixture_failures(self) -> list[FixtureCheck]:
        return [f for f in self.fixtures if not f.ok]

    @property
    def ok(self) -> bool:
        return not self.deviations and not self.fixture_failures

    def record(self) -> dict:
        return {
            "agents": self.n_agents,
            "bound": self.bound,
            "pairs": len(self.results),
            "matches": len(self.results) - len(self.deviations),
            "deviations": [
                dict(r.record(), expected=self.expected[(r.left, r.right)]) for r in self.deviations
            ],
            "fixture_checks": len(self.fixtures),
            "fixture_failures": [
                {"source": f.fixture.source, "seqA": f.fixture.seq_a, "seqB": f.fixture.seq_b,
                 "calltype": f.calltype.tag, "expected": f.expected, "observed": f.observed}
                for f in self.fixture_failures
            ],
            "ok": self.ok,
        }


def verify_preorder(n: int, bound: int, cache: IndexCache | None = None) -> PreorderReport:
    """All 153 unordered pairs of call types against the expected diagram."""
    cache = cache or IndexCache()
    exp = expected_preorder(n)
    results, expected = [], {}
    for t1, t2 in itertools.combinations(all_calltypes(), 2):
        results.append(compare_types(t1, t2, n, bound, cache))
        expected[(t1, t2)] = exp.verdict(t1, t2)
    return PreorderReport(n, bound, results, expected, check_fixtures(n, bound, cache))


# ---------------------------------------------------------------------------
# preservation


L1PLUS = "L1plus"
L2PLUS = "L2plus"


def fragment_formulas(fragment: str, n: int, samples: int = 200, max_depth: int = 3,
                      seed: int = 0) -> list[Formula]:
    """Exhaustive small formulas of the fragment plus seeded random deeper ones.

    The exhaustive part is every atom (and negated atom for L1+), every
    ``K_x`` of those, every ``K_x`` of a disjunction or conjunction of two of
    them, and every ``K_y K_x`` of a base formula.
    """
    atoms = [Familiar(x, y) for x in range(n) for y in range(n)]
    base = atoms + ([Not(f) for f in atoms] if fragment == L1PLUS else [])
    out: list[Formula] = list(base)
    k1 = [Know(x, f) for x in range(n) for f in base]
    out += k1
    for f, g in itertools.combinations(base, 2):
        for x in range(n):
            out.append(Know(x, Or(f, g)))
            out.append(Know(x, And(f, g)))
    out += [Know(y, f) for y in range(n) for f in k1]
    rng = np.random.default_rng(seed)

    def rand(depth: int) -> Formula:
        r = rng.integers(4) if depth > 0 else 0
        if r == 0:
            return base[rng.integers(len(base))]
        if r == 1:
            return Know(int(rng.integers(n)), rand(depth - 1))
        op = And if r == 2 else Or
        return op(rand(depth - 1), rand(depth - 1))

    out += [rand(max_depth) for _ in range(samples)]
    return out


@dataclass
class PreservationReport:
    left: CallType
    right: CallType
    fragment: str
    bound: int
    formulas_checked: int
    violations: list[tuple[str, str]]  # (formula, sequence)
    precondition_failures: list[str]

    @property
    def ok(self) -> bool:
        return not self.violations and not self.precondition_failures


def check_preservation(t1: CallType, t2: CallType, fragment: str, n: int, bound: int, samples: int = 200,
                       seed: int = 0, formulas: list[Formula] | None = None,
                       models: tuple[GossipModel, GossipModel] | None = None) -> PreservationReport:
    """Look for a formula true under ``t2`` but false under ``t1`` at some bounded sequence."""
    if fragment not in (L1PLUS, L2PLUS):
        raise ValueError(f"unknown fragment {fragment!r}")
    pre = []
    if fragment == L1PLUS and t1.direction is not t2.direction:
        pre.append("L1plus preservation needs equal directions")
    if fragment == L2PLUS and t1.direction is not PD:
        pre.append("L2plus preservation needs the smaller type to be pushpull")
    if not expected_preorder(n).leq(t1, t2):
        pre.append(f"{t1.tag} is not included in {t2.tag} for {n} agents")
    if formulas is None:
        formulas = fragment_formulas(fragment, n, samples, seed=seed)
    flag = "in_L1plus" if fragment == L1PLUS else "in_L2plus"
    outside = [f for f in formulas if not getattr(fragment_of(f), flag)]
    if outside:
        pre.append(f"{len(outside)} formulas lie outside {fragment}, e.g. {format_formula(outside[0])}")
    m1, m2 = models or (GossipModel.build(n, bound, t1), GossipModel.build(n, bound, t2))
    violations = []
    for f in formulas:
        bad = np.flatnonzero(m2.truth(f) & ~m1.truth(f))
        if len(bad):
            violations.append((format_formula(f), m1.universe.format(int(bad[0]))))
    return PreservationReport(t1, t2, fragment, bound, len(formulas), violations, pre)

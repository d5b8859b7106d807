"""Guarded epistemic protocols and their computation trees.

A protocol is a set of ground instructions ``guard -> call``.  Sets of
sequences are boolean masks over a :class:`~gossipscope.universe.Universe`.
The naive tree evaluates guards in the full bounded model; the relativised
tree for a set X evaluates them in the model restricted to X, and the
fixpoint semantics is the greatest fixpoint of ``rho(X) = X & tree(X)``.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field

import numpy as np

from .core import (
    Call,
    CallType,
    Direction,
    DomainError,
    apply_sequence,
    call_index,
    check_agent_count,
    format_sequence,
    initial_situation,
)
from .logic import (
    And,
    Familiar,
    Formula,
    FormulaSyntaxError,
    GossipModel,
    Know,
    Not,
    Or,
    format_formula,
    in_lhat,
    parse_formula,
)
from .universe import Universe

NAIVE = "naive"
FIXPOINT = "fixpoint"


class GuardError(ValueError):
    """A guard is not of the shape the semantics requires."""


@dataclass(frozen=True)
class Instruction:
    guard: Formula
    call: Call

    def __str__(self) -> str:
        return f"{format_formula(self.guard)} -> {self.call}"


@dataclass(frozen=True)
class InstructionSchema:
    """Guard and call text over the placeholders X and Y."""

    guard: str
    direction: Direction = Direction.PUSHPULL
    variables: tuple[str, str] = ("X", "Y")

    def __post_init__(self):
        x, y = self.variables
        if x == y:
            raise ValueError("schema variables must be distinct")

    @classmethod
    def parse(cls, text: str) -> "InstructionSchema":
        """Parse ``"<guard> -> X<>Y"`` (or ``X>Y`` / ``X<Y``)."""
        if "->" not in text:
            raise ValueError(f"missing '->' in rule {text!r}")
        guard, _, call = text.rpartition("->")
        m = re.fullmatch(r"\s*([A-Z])\s*(<>|>|<)\s*([A-Z])\s*", call)
        if not m:
            raise ValueError(f"rule call must look like X<>Y, X>Y or X<Y, got {call.strip()!r}")
        x, arrow, y = m.groups()
        direction = {d.arrow: d for d in Direction}[arrow]
        return cls(guard.strip(), direction, (x, y))

    def ground(self, x: int, y: int, n: int) -> Instruction:
        vx, vy = self.variables
        guard = parse_formula(self.guard, n, {vx: x, vy: y})
        return Instruction(guard, Call(x, y))


@dataclass(frozen=True)
class Protocol:
    instructions: tuple[Instruction, ...]
    n_agents: int

    def __len__(self) -> int:
        return len(self.instructions)

    def __iter__(self):
        return iter(self.instructions)

    def guards_in_lhat(self) -> bool:
        return all(in_lhat(lhat_normal(i.guard)) for i in self.instructions)


def _caller_prefixed(phi: Formula, caller: int) -> bool:
    if isinstance(phi, Know):
        return phi.agent == caller
    if isinstance(phi, Not):
        return _caller_prefixed(phi.sub, caller)
    if isinstance(phi, (And, Or)):
        return _caller_prefixed(phi.left, caller) and _caller_prefixed(phi.right, caller)
    return False


def validate(p: Protocol) -> None:
    for ins in p.instructions:
        if not _caller_prefixed(ins.guard, ins.call.caller):
            raise GuardError(
                f"guard {format_formula(ins.guard)} of call {ins.call} is not a Boolean "
                f"combination of K[{ins.call.caller}]-formulas for its caller"
            )


def lhat_normal(phi: Formula) -> Formula:
    """Rewrite ``!K[a]psi`` as ``!K[a]!!psi`` so the dual modality is explicit."""
    if isinstance(phi, Not):
        if isinstance(phi.sub, Know):
            inner = phi.sub.sub
            body = inner.sub if isinstance(inner, Not) else Not(inner)
            return Not(Know(phi.sub.agent, Not(lhat_normal(body))))
        return Not(lhat_normal(phi.sub))
    if isinstance(phi, And):
        return And(lhat_normal(phi.left), lhat_normal(phi.right))
    if isinstance(phi, Or):
        return Or(lhat_normal(phi.left), lhat_normal(phi.right))
    if isinstance(phi, Know):
        return Know(phi.agent, lhat_normal(phi.sub))
    return phi


def instantiate(schema: InstructionSchema | str, n: int) -> Protocol:
    """One ground instruction per ordered pair of distinct agents."""
    check_agent_count(n)
    if isinstance(schema, str):
        schema = InstructionSchema.parse(schema)
    p = Protocol(tuple(schema.ground(x, y, n) for x in range(n) for y in range(n) if x != y), n)
    validate(p)
    return p


def combine(*protocols: Protocol) -> Protocol:
    ns = {p.n_agents for p in protocols}
    if len(ns) != 1:
        raise DomainError("protocols disagree on the number of agents")
    return Protocol(tuple(i for p in protocols for i in p.instructions), ns.pop())


def hear_my_secret(n: int) -> Protocol:
    """Call anyone who might not yet know your secret.

    The guard is kept in the dual form ``!K[X]!!F[Y,X]`` so it is literally
    in the existential fragment.
    """
    check_agent_count(n)
    ins = tuple(
        Instruction(Not(Know(x, Not(Not(Familiar(y, x))))), Call(x, y))
        for x in range(n) for y in range(n) if x != y
    )
    return Protocol(ins, n)


def schedule_2n_minus_4(n: int) -> tuple[Call, ...]:
    """The fixed optimal schedule for ``n >= 4`` agents."""
    if n < 4:
        raise DomainError("the 2n-4 schedule needs at least 4 agents")
    a, b, c, d = 0, 1, 2, 3
    spokes = tuple(Call(a, e) for e in range(4, n))
    return spokes + (Call(a, b), Call(c, d), Call(a, c), Call(b, d)) + spokes


def schedule_is_correct(n: int) -> bool:
    s = apply_sequence(initial_situation(n), schedule_2n_minus_4(n), Direction.PUSHPULL)
    return s.all_experts()


# ---------------------------------------------------------------------------
# trees


@dataclass
class ComputationTree:
    universe: Universe
    members: np.ndarray  # boolean mask
    terminal: np.ndarray  # members with no enabled instruction
    bound_limited: np.ndarray  # members at the bound with an enabled instruction

    @property
    def size(self) -> int:
        return int(self.members.sum())

    def __contains__(self, seq) -> bool:
        return seq in self.universe and bool(self.members[self.universe.index(seq)])

    def sequences(self, mask: np.ndarray | None = None) -> list[tuple[Call, ...]]:
        mask = self.members if mask is None else mask
        return [self.universe.sequence(int(i)) for i in np.flatnonzero(mask)]


def _call_columns(p: Protocol, u: Universe) -> list[int]:
    if p.n_agents != u.n_agents:
        raise DomainError(f"protocol for {p.n_agents} agents used with {u.n_agents}")
    return [call_index(i.call, u.n_agents) for i in p.instructions]


def _grow(p: Protocol, m: GossipModel, domain: np.ndarray | None) -> ComputationTree:
    """Tree grown from ε, extending members (inside ``domain``) whose guard holds."""
    u = m.universe
    cols = _call_columns(p, u)
    guards = [m.truth(i.guard, domain) for i in p.instructions]
    members = np.zeros(u.size, dtype=bool)
    members[0] = True
    enabled = np.zeros(u.size, dtype=bool)
    for k in range(u.bound + 1):
        lo, hi = int(u.offsets[k]), int(u.offsets[k + 1])
        live = members[lo:hi] if domain is None else members[lo:hi] & domain[lo:hi]
        rows = np.flatnonzero(live) + lo
        for g, col in zip(guards, cols):
            on = rows[g[rows]]
            enabled[on] = True
            if k < u.bound and len(on):
                members[u.child(on, col)] = True
    terminal = members & ~enabled
    limited = members & enabled & (u.length == u.bound)
    return ComputationTree(u, members, terminal, limited)


def computation_tree(p: Protocol, m: GossipModel) -> ComputationTree:
    """The naive tree: guards evaluated against the whole bounded model."""
    validate(p)
    return _grow(p, m, None)


def relativised_tree(p: Protocol, x: np.ndarray, m: GossipModel) -> np.ndarray:
    """Members compliant with ``p`` when knowledge ranges over ``x`` only."""
    x = np.asarray(x, dtype=bool)
    if x.shape != (m.universe.size,):
        raise DomainError("candidate set does not match the universe")
    return _grow(p, m, x).members


def rho(p: Protocol, x: np.ndarray, m: GossipModel) -> np.ndarray:
    return np.asarray(x, dtype=bool) & relativised_tree(p, x, m)


@dataclass
class Fixpoint:
    members: np.ndarray
    iterations: int


def greatest_fixpoint(p: Protocol, m: GossipModel) -> Fixpoint:
    """Iterate rho downward from the full universe until it stabilises."""
    validate(p)
    if not p.guards_in_lhat():
        raise GuardError("fixpoint semantics needs every guard in the existential fragment")
    x = np.ones(m.universe.size, dtype=bool)
    it = 0
    while True:
        nxt = rho(p, x, m)
        it += 1
        if np.array_equal(nxt, x):
            return Fixpoint(x, it)
        x = nxt


def compliant_tree(p: Protocol, m: GossipModel, semantics: str = NAIVE) -> ComputationTree:
    if semantics == NAIVE:
        return computation_tree(p, m)
    if semantics != FIXPOINT:
        raise ValueError(f"unknown semantics {semantics!r}")
    fx = greatest_fixpoint(p, m).members
    tree = _grow(p, m, fx)
    return ComputationTree(tree.universe, fx, tree.terminal & fx, tree.bound_limited & fx)


def compliant_calls(p: Protocol, m: GossipModel, seq, semantics: str = NAIVE) -> list[Call]:
    """Calls that may extend ``seq`` compliantly.

    Works at the bound too: an extension is compliant exactly when ``seq`` is
    a member and the instruction's guard holds there, so the extended
    sequence itself need not be in the universe.
    """
    u = m.universe
    if semantics == NAIVE:
        validate(p)
        domain = None
    elif semantics == FIXPOINT:
        domain = greatest_fixpoint(p, m).members
    else:
        raise ValueError(f"unknown semantics {semantics!r}")
    tree = _grow(p, m, domain)
    i = u.index(seq)
    if not tree.members[i] or (domain is not None and not domain[i]):
        return []
    out = []
    for ins in p.instructions:
        if m.eval(ins.guard, i, domain) and ins.call not in out:
            out.append(ins.call)
    return out


@dataclass
class Report:
    semantics: str
    bound: int
    size: int
    terminal_count: int
    all_expert: bool
    bound_limited: bool
    tree: ComputationTree = field(repr=False)

    def record(self) -> dict:
        return {
            "semantics": self.semantics,
            "bound": self.bound,
            "size": self.size,
            "terminal_count": self.terminal_count,
            "all_expert": self.all_expert,
            "bound_limited": self.bound_limited,
        }


def analyze(p: Protocol, m: GossipModel, semantics: str = NAIVE) -> Report:
    tree = compliant_tree(p, m, semantics)
    sets = m.universe.secret_sets()
    full = np.uint64((1 << m.n_agents) - 1)
    expert = np.all(sets == full, axis=1)
    term = tree.terminal
    return Report(
        semantics=semantics,
        bound=m.bound,
        size=tree.size,
        terminal_count=int(term.sum()),
        all_expert=bool(term.any() and np.all(expert[term])),
        bound_limited=bool(tree.bound_limited.any()),
        tree=tree,
    )


# ---------------------------------------------------------------------------
# protocol files


@dataclass
class ProtocolFile:
    n_agents: int
    calltype: CallType
    bound: int | None
    schemas: list[InstructionSchema]

    def protocol(self) -> Protocol:
        return combine(*(instantiate(s, self.n_agents) for s in self.schemas))


_RULE = re.compile(r"rule\s*\(\s*([A-Z])\s*,\s*([A-Z])\s*\)\s*:\s*(.*)")


def parse_protocol_file(text: str) -> ProtocolFile:
    n = calltype = bound = None
    schemas = []
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        try:
            if line.startswith("rule"):
                m = _RULE.fullmatch(line)
                if not m:
                    raise ValueError("expected 'rule (X,Y): guard -> call'")
                x, y, body = m.groups()
                s = InstructionSchema.parse(body)
                if s.variables != (x, y):
                    raise ValueError(f"call must use the declared variables {x},{y} in order")
                schemas.append(s)
                continue
            key, sep, value = line.partition(":")
            if not sep:
                raise ValueError(f"unrecognised line {line!r}")
            key, value = key.strip(), value.strip()
            if key == "agents":
                n = int(value)
            elif key == "calltype":
                calltype = CallType.parse(",".join(value.replace(",", " ").split()))
            elif key == "bound":
                bound = int(value)
            else:
                raise ValueError(f"unknown key {key!r}")
        except (FormulaSyntaxError, ValueError) as e:
            raise ValueError(f"line {lineno}: {e}") from e
    if n is None or calltype is None:
        raise ValueError("protocol file needs 'agents:' and 'calltype:' lines")
    for s in schemas:
        if s.direction is not calltype.direction:
            raise ValueError(f"rule call {s.direction.arrow} does not match the call type {calltype}")
    pf = ProtocolFile(n, calltype, bound, schemas)
    pf.protocol()  # validate guards now
    return pf


def format_tree_members(tree: ComputationTree, mask: np.ndarray | None = None) -> list[str]:
    d = tree.universe.calltype.direction
    return [format_sequence(s, d) for s in tree.sequences(mask)]


__all__ = [
    "ComputationTree", "Fixpoint", "GuardError", "Instruction", "InstructionSchema", "Protocol",
    "ProtocolFile", "Report", "analyze", "combine", "compliant_calls", "compliant_tree",
    "computation_tree", "format_tree_members", "greatest_fixpoint", "hear_my_secret", "instantiate",
    "lhat_normal", "parse_protocol_file", "relativised_tree", "rho",
    "schedule_2n_minus_4", "schedule_is_correct", "validate",
]

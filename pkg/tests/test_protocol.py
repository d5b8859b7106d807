import numpy as np
import pytest

from conftest import model
from gossipscope.core import Call, CallType, Direction, DomainError, all_calltypes, format_sequence, involved, parse_sequence
from gossipscope.logic import fragment_of, parse_formula
from gossipscope.protocol import (
    FIXPOINT,
    GuardError,
    InstructionSchema,
    Protocol,
    analyze,
    compliant_calls,
    computation_tree,
    greatest_fixpoint,
    hear_my_secret,
    instantiate,
    lhat_normal,
    parse_protocol_file,
    relativised_tree,
    rho,
    schedule_2n_minus_4,
    schedule_is_correct,
)

CT = CallType.parse
HMS = "!K[X]F[Y,X] -> X<>Y"


def test_instantiate_examples():
    assert len(instantiate(HMS, 3)) == 6
    assert len(instantiate("!K[X]F[Y,X] & K[X]F[X,Y] -> X>Y", 3)) == 6
    with pytest.raises(GuardError):
        instantiate("F[Y,X] -> X<>Y", 3)
    with pytest.raises(GuardError):
        instantiate("K[Y]F[Y,X] -> X<>Y", 3)
    with pytest.raises(ValueError):
        InstructionSchema.parse("!K[X]F[Y,X] -> X<>X")


def test_hear_my_secret_shape():
    p = hear_my_secret(3)
    assert len(p) == 6
    assert all(fragment_of(i.guard).in_Lhat for i in p)
    assert not fragment_of(instantiate(HMS, 3).instructions[0].guard).in_Lhat
    assert instantiate(HMS, 3).guards_in_lhat()
    m = model(3, 2, "p3,pushpull,after")
    assert all(m.eval(i.guard, ()) for i in p)
    # the schema's guard and the dual form agree everywhere
    for x, y in zip(instantiate(HMS, 3), p):
        assert x.call == y.call
        assert np.array_equal(m.truth(x.guard), m.truth(y.guard))


def test_lhat_normal():
    phi = parse_formula("!K[a]F[b,a] & (F[a,b] | !K[b]!F[c,a])")
    assert fragment_of(lhat_normal(phi)).in_Lhat
    assert not fragment_of(lhat_normal(parse_formula("K[a]F[b,a]"))).in_Lhat


def test_fixpoint_rejects_positive_knowledge_guards():
    p = instantiate("K[X]F[Y,X] -> X<>Y", 3)
    with pytest.raises(GuardError):
        greatest_fixpoint(p, model(3, 2, "p2,pushpull,after"))


def test_schedule():
    s = schedule_2n_minus_4(6)
    assert format_sequence(s, Direction.PUSHPULL) == "a<>e;a<>f;a<>b;c<>d;a<>c;b<>d;a<>e;a<>f"
    assert format_sequence(schedule_2n_minus_4(4), Direction.PUSHPULL) == "a<>b;c<>d;a<>c;b<>d"
    for n in range(4, 10):
        assert len(schedule_2n_minus_4(n)) == 2 * n - 4
        assert schedule_is_correct(n)
    with pytest.raises(DomainError):
        schedule_2n_minus_4(3)


def test_empty_protocol():
    m = model(3, 2, "p2,pushpull,after")
    p = Protocol((), 3)
    tree = computation_tree(p, m)
    assert tree.size == 1 and tree.terminal[0]
    assert greatest_fixpoint(p, m).members.sum() == 1
    rep = analyze(p, m)
    assert rep.terminal_count == 1 and not rep.all_expert and not rep.bound_limited


def test_tree_prefix_closed():
    m = model(3, 4, "p2,push,before")
    tree = computation_tree(instantiate("!K[X]F[Y,X] -> X>Y", 3), m)
    u = m.universe
    mem = np.flatnonzero(tree.members)
    assert tree.members[0]
    assert np.all(tree.members[u.parent[mem[1:]]])


def test_worked_example_four_agents():
    p = hear_my_secret(4)
    first, second = "a<>b;b<>c;b<>d", "a<>b;b<>c;c<>d;b<>d"
    cd = Call(2, 3)

    m1 = model(4, 4, "p1,pushpull,after")
    assert first in computation_tree(p, m1)
    assert parse_sequence(first + ";c<>d") not in computation_tree(p, m1)
    assert cd not in compliant_calls(p, m1, first)

    m2 = model(4, 4, "p2,pushpull,after")
    fx = greatest_fixpoint(p, m2).members
    assert cd in compliant_calls(p, m2, first, FIXPOINT)
    assert fx[m2.universe.index(second)]
    assert not any(c.caller == 0 for c in compliant_calls(p, m2, second, FIXPOINT))
    assert m2.universe.index(first + ";c<>d") in np.flatnonzero(relativised_tree(p, fx, m2))

    m3 = model(4, 4, "p3,pushpull,after")
    assert parse_sequence(first + ";c<>d") in computation_tree(p, m3)
    after_second = compliant_calls(p, m3, second, FIXPOINT)
    assert Call(0, 2) in after_second and Call(0, 3) in after_second
    # c already called d, so c knows d has its secret
    assert cd not in after_second


@pytest.mark.parametrize("ct", ["p2,pushpull,after", "p3,pull,before", "p2,push,after"])
def test_rho_basics_and_monotone(ct):
    m = model(3, 3, ct)
    p = hear_my_secret(3)
    u = m.universe
    eps = np.zeros(u.size, dtype=bool)
    eps[0] = True
    assert np.array_equal(rho(p, eps, m), eps)
    full = np.ones(u.size, dtype=bool)
    assert np.array_equal(rho(p, full, m), computation_tree(p, m).members)
    rng = np.random.default_rng(11)
    for _ in range(15):
        y = rng.random(u.size) < 0.7
        x = y & (rng.random(u.size) < 0.7)
        assert not np.any(rho(p, x, m) & ~rho(p, y, m))


@pytest.mark.parametrize("ct", all_calltypes(), ids=lambda t: t.tag)
def test_fixpoint_is_fixed(ct):
    m = model(3, 3, ct)
    p = hear_my_secret(3)
    fx = greatest_fixpoint(p, m).members
    assert np.array_equal(rho(p, fx, m), fx)
    assert np.all(relativised_tree(p, fx, m)[fx])
    if ct.privacy.value == 1:
        assert np.array_equal(fx, computation_tree(p, m).members)


def test_relativised_tree_on_epsilon():
    m = model(3, 2, "p3,pushpull,after")
    p = hear_my_secret(3)
    eps = np.zeros(m.universe.size, dtype=bool)
    eps[0] = True
    got = relativised_tree(p, eps, m)
    expected = {0} | {int(m.universe.child(0, i)) for i in range(6)}
    assert set(np.flatnonzero(got).tolist()) == expected


@pytest.mark.parametrize("ct", [t for t in all_calltypes() if t.privacy.value == 3], ids=lambda t: t.tag)
def test_p3_guards_ignore_outside_calls(ct):
    m = model(3, 3, ct)
    u = m.universe
    short = np.flatnonzero(u.length < u.bound)
    for ins in hear_my_secret(3):
        g = m.truth(ins.guard)
        for c in range(u.m):
            if not involved(ins.call.caller, u.calls[c]):
                assert np.array_equal(g[short], g[u.child(short, c)])


def test_analyze_hear_my_secret_three_agents():
    rep = analyze(hear_my_secret(3), model(3, 6, "p3,pushpull,after"))
    assert rep.all_expert and not rep.bound_limited and rep.terminal_count > 0
    assert set(rep.record()) == {"semantics", "bound", "size", "terminal_count", "all_expert", "bound_limited"}


def test_analyze_reports_bound_limit():
    rep = analyze(hear_my_secret(3), model(3, 2, "p3,pushpull,after"))
    assert rep.bound_limited and rep.terminal_count == 0 and not rep.all_expert


def test_protocol_file(tmp_path):
    text = """
    # ask around
    agents: 3
    calltype: p2 push before
    bound: 3
    rule (X,Y): !K[X]F[Y,X] -> X>Y
    rule (U,V): K[U]!F[V,U] | K[U]F[U,V] -> U>V
    """
    pf = parse_protocol_file(text)
    assert pf.n_agents == 3 and pf.bound == 3 and pf.calltype == CT("p2,push,before")
    assert len(pf.protocol()) == 12


@pytest.mark.parametrize("text", [
    "agents: 3\ncalltype: p2 pushpull after\nrule (X,Y): !K[X]F[Y,X] -> X>Y\n",
    "agents: 3\ncalltype: p2 pushpull after\nrule (X,Y): F[Y,X] -> X<>Y\n",
    "agents: 3\nrule (X,Y): !K[X]F[Y,X] -> X<>Y\n",
    "agents: 3\ncalltype: p2 pushpull after\nrule (X,Y): !K[X]F[Y,X -> X<>Y\n",
    "agents: 3\ncalltype: p2 pushpull after\ncolour: blue\n",
    "agents: 3\ncalltype: p2 pushpull after\nrule (X,Y): !K[X]F[Y,X] -> Y<>X\n",
])
def test_protocol_file_errors(text):
    with pytest.raises(ValueError):
        parse_protocol_file(text)

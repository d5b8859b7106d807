import numpy as np
import pytest

from gossipscope.core import CallType, all_calltypes, apply_sequence, initial_situation
from gossipscope.indist import build_equivalence_index
from gossipscope.kernels import canonical_labels
from gossipscope.logic import GossipModel, parse_formula
from gossipscope.oracle import (
    OracleUniverse,
    oracle_approx_table,
    oracle_closure,
    oracle_eval,
    oracle_partition,
)
from gossipscope.universe import Universe

CT = CallType.parse


def test_base_and_p1_identity():
    u = OracleUniverse(3, 2, CT("p1,pull,after"))
    t = oracle_approx_table(u, 0)
    assert t[0, 0]
    assert np.array_equal(t, np.eye(len(u), dtype=bool))


def test_closure_basics():
    empty = np.zeros((5, 5), dtype=bool)
    assert np.array_equal(oracle_closure(empty), np.eye(5, dtype=bool))
    t = np.zeros((4, 4), dtype=bool)
    t[0, 1] = t[1, 0] = t[1, 2] = t[2, 1] = True
    c = oracle_closure(t)
    assert c[0, 2] and not c[0, 3]
    assert np.array_equal(oracle_closure(c), c)


def test_familiar_clause_matches_situations():
    u = OracleUniverse(3, 2, CT("p2,push,after"))
    tables = {}
    for s in u.seqs[:20]:
        sit = apply_sequence(initial_situation(3), s, u.calltype.direction)
        for a in range(3):
            for b in range(3):
                assert oracle_eval(parse_formula(f"F[{'abc'[a]},{'abc'[b]}]"), s, u, tables) == sit.familiar(a, b)


BATTERY = ["F[a,b]", "K[a]F[c,b]", "K[b]F[a,c] & K[c]F[a,b]", "K[c](Exp[a]&Exp[b])", "!K[a]!F[b,a]",
           "K[a]K[c]F[b,c]", "K[b](F[a,c]|F[c,a])", "!K[c]F[a,b] | K[a]!F[b,c]"]


@pytest.mark.parametrize("ct", all_calltypes(), ids=lambda t: t.tag)
def test_partition_and_eval_agree(ct):
    ou = OracleUniverse(3, 3, ct)
    u = Universe(3, 3, ct)
    idx = build_equivalence_index(u)
    order = np.array([u.index(s) for s in ou.seqs])
    tables = {}
    for a in range(3):
        tables[a] = oracle_closure(oracle_approx_table(ou, a))
        assert np.array_equal(oracle_partition(tables[a]), canonical_labels(idx.label(a)[order]))
    m = GossipModel(u, idx)
    rng = np.random.default_rng(5)
    picks = rng.choice(len(ou), size=25, replace=False)
    for text in BATTERY:
        phi = parse_formula(text, 3)
        truth = m.truth(phi)[order]
        for j in picks:
            assert oracle_eval(phi, ou.seqs[j], ou, tables) == truth[j]

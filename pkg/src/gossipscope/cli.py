"""Command-line interface.

Exit status: 0 for a true answer or success, 1 for a false answer or
violations, 2 for usage and domain errors.  Every answer states the bound
it was computed at.
"""

from __future__ import annotations

import argparse
import json
import sys

from .classify import IndexCache, compare_types, verify_preorder
from .core import CallType, Direction, DomainError, agent_id, check_agent_count, format_sequence
from .core import parse_sequence_with_direction
from .indist import PairBudgetExceeded, build_equivalence_index
from .logic import FormulaSyntaxError, GossipModel, format_formula, parse_formula
from .protocol import GuardError, analyze, parse_protocol_file, schedule_2n_minus_4
from .universe import Universe, default_bound

EXIT_TRUE, EXIT_FALSE, EXIT_USAGE = 0, 1, 2


class UsageError(Exception):
    pass


def _calltype(text: str) -> CallType:
    try:
        return CallType.parse(text)
    except DomainError as e:
        raise argparse.ArgumentTypeError(str(e)) from None


def _bound(args) -> int:
    return args.bound if args.bound is not None else default_bound(args.agents)


def _sequence(text: str, n: int, direction: Direction):
    seq, used = parse_sequence_with_direction(text, n)
    if used is not None and used is not direction:
        raise UsageError(f"sequence {text!r} uses {used.arrow} calls but the call type is {direction}")
    return seq


def _emit(args, record: dict, lines: list[str]) -> None:
    if args.json:
        print(json.dumps(record, sort_keys=True))
    else:
        print("\n".join(lines))


def cmd_eval(args) -> int:
    n, ct, N = args.agents, args.calltype, _bound(args)
    phi = parse_formula(args.formula, n)
    seq = _sequence(args.seq, n, ct.direction)
    if args.oracle:
        from . import oracle

        u = oracle.OracleUniverse(n, N, ct)
        if seq not in u.pos:
            raise DomainError(f"sequence of length {len(seq)} exceeds the bound N={N}")
        tables = {a: oracle.oracle_closure(oracle.oracle_approx_table(u, a)) for a in range(n)}
        value = oracle.oracle_eval(phi, seq, u, tables)
    else:
        value = GossipModel.build(n, N, ct).eval(phi, seq)
    record = {"formula": format_formula(phi), "sequence": format_sequence(seq, ct.direction),
              "calltype": ct.tag, "agents": n, "bound": N, "value": value}
    _emit(args, record, [str(value).lower(), f"bound: N={N}"])
    return EXIT_TRUE if value else EXIT_FALSE


def cmd_indist(args) -> int:
    n, ct, N = args.agents, args.calltype, _bound(args)
    a = agent_id(args.agent, n)
    s1 = _sequence(args.seqA, n, ct.direction)
    s2 = _sequence(args.seqB, n, ct.direction)
    if args.oracle:
        from . import oracle

        u = oracle.OracleUniverse(n, N, ct)
        for s in (s1, s2):
            if s not in u.pos:
                raise DomainError(f"sequence of length {len(s)} exceeds the bound N={N}")
        lab = oracle.oracle_partition(oracle.oracle_closure(oracle.oracle_approx_table(u, a)))
        value = bool(lab[u.pos[s1]] == lab[u.pos[s2]])
    else:
        u = Universe(n, N, ct)
        lab = build_equivalence_index(u, [a]).label(a)
        value = bool(lab[u.index(s1)] == lab[u.index(s2)])
    record = {"agent": args.agent, "seqA": format_sequence(s1, ct.direction),
              "seqB": format_sequence(s2, ct.direction), "calltype": ct.tag, "agents": n, "bound": N,
              "value": value}
    _emit(args, record, [str(value).lower(), f"bound: N={N}"])
    return EXIT_TRUE if value else EXIT_FALSE


def cmd_classes(args) -> int:
    n, ct, N = args.agents, args.calltype, _bound(args)
    a = agent_id(args.agent, n)
    idx = build_equivalence_index(Universe(n, N, ct), [a])
    records = idx.records(a)
    if args.seq is not None:
        i = idx.universe.index(_sequence(args.seq, n, ct.direction))
        records = [records[int(idx.label(a)[i])]]
    if args.json:
        print(json.dumps({"calltype": ct.tag, "agents": n, "bound": N, "agent": args.agent,
                          "class_count": idx.class_count(a), "classes": records}, sort_keys=True))
    else:
        for r in records:
            print(f"{r['class_id']}: " + " | ".join(r["members"]))
        print(f"{idx.class_count(a)} classes for agent {args.agent}; bound: N={N}")
    return EXIT_TRUE


def cmd_compare(args) -> int:
    N = _bound(args)
    r = compare_types(args.left, args.right, args.agents, N)
    lines = [r.verdict]
    for w in r.witnesses:
        lines.append(f"  agent {chr(97 + w.agent)}: {w.seq_a} ~ {w.seq_b} under {w.related_under.tag}"
                     f" but not under {w.unrelated_under.tag} (bound {w.bound})")
    if r.note:
        lines.append(f"  note: {r.note}")
    lines.append(f"bound: N={N}")
    _emit(args, r.record(), lines)
    return EXIT_TRUE


def cmd_verify_preorder(args) -> int:
    N = _bound(args)
    rep = verify_preorder(args.agents, N, IndexCache())
    rec = rep.record()
    lines = [f"{rec['matches']}/{rec['pairs']} type pairs match the expected diagram for {args.agents} agents",
             f"{rec['fixture_checks'] - len(rec['fixture_failures'])}/{rec['fixture_checks']} witness checks hold"]
    for d in rec["deviations"]:
        lines.append(f"  deviation {d['pair'][0]} vs {d['pair'][1]}: got {d['verdict']}, expected {d['expected']}")
    for f in rec["fixture_failures"]:
        lines.append(f"  witness {f['source']} {f['seqA']} / {f['seqB']} under {f['calltype']}: "
                     f"expected {f['expected']}, got {f['observed']}")
    lines.append(f"bound: N={N}")
    _emit(args, rec, lines)
    return EXIT_TRUE if rep.ok else EXIT_FALSE


def cmd_protocol(args) -> int:
    with open(args.file, encoding="utf-8") as fh:
        pf = parse_protocol_file(fh.read())
    N = args.bound if args.bound is not None else (pf.bound if pf.bound is not None else default_bound(pf.n_agents))
    m = GossipModel.build(pf.n_agents, N, pf.calltype)
    rep = analyze(pf.protocol(), m, args.semantics)
    rec = rep.record()
    lines = [f"{k}: {str(v).lower() if isinstance(v, bool) else v}" for k, v in rec.items()]
    if rep.bound_limited:
        lines.append("termination undetermined at this bound")
    _emit(args, rec, lines)
    return EXIT_TRUE if rep.all_expert else EXIT_FALSE


def cmd_schedule(args) -> int:
    seq = schedule_2n_minus_4(args.agents)
    text = format_sequence(seq, Direction.PUSHPULL)
    _emit(args, {"agents": args.agents, "length": len(seq), "sequence": text}, [text])
    return EXIT_TRUE


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="gossipscope", description="Epistemic gossip model checker.")
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp, calltype=True, bound=True):
        sp.add_argument("--agents", type=int, required=True)
        if calltype:
            sp.add_argument("--calltype", type=_calltype, required=True,
                            help="e.g. p3,pushpull,before")
        if bound:
            sp.add_argument("--bound", type=int, default=None,
                            help="maximum sequence length (default 4 for 3 agents, else 3)")
        sp.add_argument("--json", action="store_true", help="print one machine-readable record")

    sp = sub.add_parser("eval", help="truth of a formula after a call sequence")
    common(sp)
    sp.add_argument("--seq", required=True)
    sp.add_argument("--formula", required=True)
    sp.add_argument("--oracle", action="store_true", help=argparse.SUPPRESS)
    sp.set_defaults(func=cmd_eval)

    sp = sub.add_parser("indist", help="whether an agent can tell two sequences apart")
    common(sp)
    sp.add_argument("--agent", required=True)
    sp.add_argument("--seqA", required=True)
    sp.add_argument("--seqB", required=True)
    sp.add_argument("--oracle", action="store_true", help=argparse.SUPPRESS)
    sp.set_defaults(func=cmd_indist)

    sp = sub.add_parser("classes", help="list an agent's indistinguishability classes")
    common(sp)
    sp.add_argument("--agent", required=True)
    sp.add_argument("--seq", default=None, help="only the class of this sequence")
    sp.set_defaults(func=cmd_classes)

    sp = sub.add_parser("compare", help="compare two call types")
    common(sp, calltype=False)
    sp.add_argument("--left", type=_calltype, required=True)
    sp.add_argument("--right", type=_calltype, required=True)
    sp.set_defaults(func=cmd_compare)

    sp = sub.add_parser("verify-preorder", help="check all 153 call type pairs")
    common(sp, calltype=False)
    sp.set_defaults(func=cmd_verify_preorder)

    sp = sub.add_parser("protocol", help="analyse a protocol file")
    sp.add_argument("file")
    sp.add_argument("--semantics", choices=["naive", "fixpoint"], default="naive")
    sp.add_argument("--bound", type=int, default=None, help="override the file's bound")
    sp.add_argument("--json", action="store_true")
    sp.set_defaults(func=cmd_protocol)

    sp = sub.add_parser("schedule", help="the fixed 2n-4 call schedule")
    sp.add_argument("--agents", type=int, required=True)
    sp.add_argument("--json", action="store_true")
    sp.set_defaults(func=cmd_schedule)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return EXIT_USAGE if e.code not in (0, None) else EXIT_TRUE
    try:
        if getattr(args, "agents", None) is not None and args.command != "schedule":
            check_agent_count(args.agents)
        return args.func(args)
    except (UsageError, DomainError, FormulaSyntaxError, GuardError, PairBudgetExceeded, ValueError, OSError) as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())

"""Command-line entry point.

Exit codes: 0 on success, 1 on validation or evidence errors, 2 on usage
errors (bad flags, unreadable files).
"""

from __future__ import annotations

import argparse
import sys
from typing import Sequence

from . import io
from .learning import DEFAULT_EPS, DEFAULT_VAR_FLOOR, learn_stream
from .model import (
    DEFAULT_MAX_CONFIGS,
    DEFAULT_STD_RATIO,
    CaseError,
    InvalidNetworkError,
    Network,
    NoisyMaxCpd,
    SizeLimitError,
    configurations,
    mean_cpt,
    expand_noisy_max,
    validate_network,
)
from .oracle import DEFAULT_JOINT_CAP, enumerate_joint, forward_sample, oracle_conditional
from .propagation import ZeroProbabilityError, propagate


class UsageError(Exception):
    pass


def _fmt(x: float) -> str:
    return format(float(x), ".17g")


def _load_net(path: str, validate: bool = True) -> Network:
    try:
        with open(path, encoding="utf-8") as fh:
            text = fh.read()
    except OSError as exc:
        raise UsageError(f"cannot read network {path!r}: {exc.strerror}") from None
    return io.parse_network(text, validate)


def _load_cases(path: str, net: Network):
    try:
        with open(path, encoding="utf-8") as fh:
            lines = fh.readlines()
    except OSError as exc:
        raise UsageError(f"cannot read cases {path!r}: {exc.strerror}") from None
    return list(io.iter_cases(lines, net))


def _query(args, net: Network) -> list[str]:
    if not args.query:
        return net.names
    names = [q.strip() for q in args.query.split(",") if q.strip()]
    for q in names:
        if q not in net.names:
            raise UsageError(f"unknown query variable {q!r}")
    return names


def _write(out, path: str | None):
    if path is None:
        sys.stdout.write(out)
    else:
        with open(path, "w", encoding="utf-8") as fh:
            fh.write(out)


def cmd_validate(args) -> int:
    net = _load_net(args.network, validate=False)
    rep = validate_network(net, args.std_ratio)
    lines = [f"error\t{e}" for e in rep.errors] + [f"warning\t{w}" for w in rep.warnings]
    _write("".join(line + "\n" for line in lines), args.out)
    return 0 if rep.ok else 1


def _marginal_rows(net, cases, query, solve) -> tuple[list[str], int]:
    rows = ["case\tvariable\tstate\tprobability"]
    status = 0
    for case in cases:
        try:
            marg = solve(case)
        except ZeroProbabilityError as exc:
            print(f"{case.id}: {exc}", file=sys.stderr)
            rows.append(f"{case.id}\t*\t*\terror")
            status = 1
            continue
        for q in query:
            for s, p in zip(net.variable(q).states, marg[q]):
                rows.append(f"{case.id}\t{q}\t{s}\t{_fmt(p)}")
    return rows, status


def cmd_infer(args) -> int:
    net = _load_net(args.network)
    cases = _load_cases(args.cases, net)
    query = _query(args, net)

    def solve(case):
        msgs = propagate(net, case, fast_max=not args.expand_max, max_configs=args.max_configs)
        return {q: msgs.marginal(q) for q in query}

    rows, status = _marginal_rows(net, cases, query, solve)
    _write("\n".join(rows) + "\n", args.out)
    return status


def cmd_oracle_infer(args) -> int:
    net = _load_net(args.network)
    cases = _load_cases(args.cases, net)
    query = _query(args, net)
    joint = enumerate_joint(net, cap=args.joint_cap, max_configs=args.max_configs)
    rows, status = _marginal_rows(net, cases, query, lambda c: oracle_conditional(joint, c))
    _write("\n".join(rows) + "\n", args.out)
    return status


def cmd_learn(args) -> int:
    net = _load_net(args.network)
    cases = _load_cases(args.cases, net)
    new_net, reports = learn_stream(
        net,
        cases,
        start_seq=args.start_seq,
        learning_rate=args.learning_rate,
        eps=args.eps,
        var_floor=args.var_floor,
        std_ratio=args.std_ratio,
    )
    io.save_network(new_net, args.out)
    if args.report:
        _write(io.write_report(reports), args.report)
    if args.figure:
        from .plotting import plot_learning

        plot_learning(net, reports, args.figure)
    rejected = [r for r in reports if r.error is not None]
    for r in rejected:
        print(f"case {r.case_id} rejected: {r.error}", file=sys.stderr)
    return 1 if rejected else 0


def cmd_expand(args) -> int:
    net = _load_net(args.network)
    if args.node not in net.names:
        raise UsageError(f"unknown node {args.node!r}")
    cpd = net.cpd(args.node)
    if isinstance(cpd, NoisyMaxCpd):
        table = expand_noisy_max(cpd, net, args.max_configs)
    else:
        table = mean_cpt(cpd)
    child = net.variable(args.node)
    rows = ["\t".join(list(cpd.parents) + [f"P({args.node}={s})" for s in child.states])]
    for u in configurations([net.cardinality(p) for p in cpd.parents]):
        states = [net.variable(p).states[s] for p, s in zip(cpd.parents, u)]
        rows.append("\t".join(states + [_fmt(p) for p in table[u]]))
    _write("\n".join(rows) + "\n", args.out)
    return 0


def cmd_sample(args) -> int:
    net = _load_net(args.network)
    if args.n < 0:
        raise UsageError("-n must be non-negative")
    if not 0 <= args.mask < 1:
        raise UsageError("--mask must lie in [0, 1)")
    cases = forward_sample(net, args.n, seed=args.seed, mask=args.mask)
    _write("".join(io.case_to_line(net, c) + "\n" for c in cases), args.out)
    return 0


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="gaussbn", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp, cases=False, out_required=False):
        sp.add_argument("network", help="network document (JSON)")
        if cases:
            sp.add_argument("cases", help="case stream (JSON lines)")
        sp.add_argument("--std-ratio", type=float, default=DEFAULT_STD_RATIO,
                        help="warn when std exceeds this fraction of min(mean, 1 - mean)")
        sp.add_argument("--max-configs", type=int, default=DEFAULT_MAX_CONFIGS,
                        help="cap on noisy-MAX table expansion")
        sp.add_argument("-o", "--out", required=out_required,
                        help="learned network path" if out_required else "output path (default: stdout)")

    sp = sub.add_parser("validate", help="check structure and parameters")
    common(sp)
    sp.set_defaults(func=cmd_validate)

    sp = sub.add_parser("infer", help="posterior marginals by message passing")
    common(sp, cases=True)
    sp.add_argument("--query", help="comma-separated variables (default: all)")
    sp.add_argument("--expand-max", action="store_true", help="propagate noisy-MAX families as full tables")
    sp.set_defaults(func=cmd_infer)

    sp = sub.add_parser("oracle-infer", help="posterior marginals by joint enumeration")
    common(sp, cases=True)
    sp.add_argument("--query", help="comma-separated variables (default: all)")
    sp.add_argument("--joint-cap", type=int, default=DEFAULT_JOINT_CAP)
    sp.set_defaults(func=cmd_oracle_infer)

    sp = sub.add_parser("learn", help="sequential parameter adjustment over a case stream")
    common(sp, cases=True, out_required=True)
    sp.add_argument("--report", help="learning report path (JSON lines)")
    sp.add_argument("--figure", help="render parameter trajectories to this image file")
    sp.add_argument("--learning-rate", type=float, default=1.0)
    sp.add_argument("--eps", type=float, default=DEFAULT_EPS)
    sp.add_argument("--var-floor", type=float, default=DEFAULT_VAR_FLOOR)
    sp.add_argument("--start-seq", type=int, default=0)
    sp.set_defaults(func=cmd_learn)

    sp = sub.add_parser("expand", help="print a family's table at parameter means")
    common(sp)
    sp.add_argument("--node", required=True)
    sp.set_defaults(func=cmd_expand)

    sp = sub.add_parser("sample", help="forward-sample cases at parameter means")
    common(sp)
    sp.add_argument("-n", type=int, required=True)
    sp.add_argument("--seed", type=int, default=None)
    sp.add_argument("--mask", type=float, default=0.0, help="probability of hiding each variable")
    sp.set_defaults(func=cmd_sample)
    return p


def run(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    lr = getattr(args, "learning_rate", None)
    if lr is not None and not 0 < lr <= 1:
        print("gaussbn: --learning-rate must lie in (0, 1]", file=sys.stderr)
        return 2
    try:
        return args.func(args)
    except UsageError as exc:
        print(f"gaussbn: {exc}", file=sys.stderr)
        return 2
    except io.NetworkFormatError as exc:
        for issue in exc.issues:
            print(f"error\t{issue}", file=sys.stderr)
        return 1
    except (InvalidNetworkError, CaseError, SizeLimitError, ZeroProbabilityError) as exc:
        print(f"gaussbn: {exc}", file=sys.stderr)
        return 1


def main() -> None:
    sys.exit(run())


if __name__ == "__main__":
    main()

"""Command-line entry point: ``generate``, ``spectral``, ``run``, ``audit``, ``reproduce``."""
from __future__ import annotations

import argparse
import sys

from .errors import ConfigError, DetlbError
from .fairness import FairnessReport
from .graphs import write_graph
from .harness import ExperimentConfig, emit_csv, parse_graph_spec, run
from .spectral import CSV_HEADER as SPECTRAL_HEADER
from .spectral import DENSE_LIMIT, spectral_summary


def _steps(v: str):
    return v if v == "auto" else int(v)


def _levels(v: str):
    return [int(c) for c in v.split(",") if c]


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="detlb", description=__doc__)
    sub = p.add_subparsers(dest="command", required=True)

    g = sub.add_parser("generate", help="write a balancing graph in text format")
    g.add_argument("--graph", required=True)
    g.add_argument("--loops", type=int, default=0)
    g.add_argument("-o", "--output", required=True)

    s = sub.add_parser("spectral", help="print n,d,d_loops,lambda2,mu,t_mu,T as CSV")
    s.add_argument("--graph", required=True)
    s.add_argument("--loops", type=int, default=0)
    s.add_argument("--K", type=int, default=1, help="initial discrepancy for T(K)")
    s.add_argument("--no-header", action="store_true")

    for name, helptext in (("run", "simulate and write the per-step metrics CSV"),
                           ("audit", "simulate and print the fairness report CSV")):
        r = sub.add_parser(name, help=helptext)
        r.add_argument("--graph", required=True)
        r.add_argument("--loops", type=int, default=0)
        r.add_argument("--balancer", required=True)
        r.add_argument("--load", required=True)
        r.add_argument("--steps", type=_steps, required=True)
        r.add_argument("--levels", type=_levels, default=None)
        r.add_argument("--seed", type=int, default=0)
        r.add_argument("-o", "--output", required=(name == "run"))

    x = sub.add_parser("reproduce", help="run a canned experiment battery")
    x.add_argument("experiment")
    x.add_argument("--quick", action="store_true", help="smaller instances")
    x.add_argument("-o", "--output")
    return p


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return _dispatch(args)
    except DetlbError as e:
        print(f"error: {e}", file=sys.stderr)
        return 2
    except OSError as e:
        print(f"error: {e}", file=sys.stderr)
        return 1


def _dispatch(args) -> int:
    if args.command == "generate":
        write_graph(parse_graph_spec(args.graph, args.loops), args.output)
        return 0
    if args.command == "spectral":
        g = parse_graph_spec(args.graph, args.loops)
        if g.n > DENSE_LIMIT:
            raise ConfigError(f"n={g.n} exceeds the dense spectral cap {DENSE_LIMIT}")
        summ = spectral_summary(g)
        if not args.no_header:
            print(SPECTRAL_HEADER)
        print(summ.csv_row(args.K))
        return 0
    if args.command in ("run", "audit"):
        cfg = ExperimentConfig(args.graph, args.loops, args.balancer, args.load, args.steps,
                               args.levels, args.seed, args.output)
        res = run(cfg, spectral=(args.steps == "auto" or args.command == "run"))
        if args.command == "run":
            emit_csv(res, args.output)
            return 0
        text = FairnessReport.CSV_HEADER + "\n"
        if res.fairness is not None:
            text += res.fairness.csv_row() + "\n"
        if args.output:
            with open(args.output, "w") as fh:
                fh.write(text)
        else:
            sys.stdout.write(text)
        return 0
    if args.command == "reproduce":
        from .experiments import reproduce
        rep = reproduce(args.experiment, "quick" if args.quick else "desk")
        text = rep.to_csv()
        if args.output:
            with open(args.output, "w") as fh:
                fh.write(text)
        else:
            sys.stdout.write(text)
        return 0 if rep.passed else 1
    raise AssertionError(args.command)


if __name__ == "__main__":
    sys.exit(main())

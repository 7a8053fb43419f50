"""Command-line entry point.

Subcommands:
  run <config>        execute an experiment config (CSV traces + summary JSON)
  spectrum <spec>     print spectral summary of a graph spec (gamma, lambdas,
                      default polynomial-acceleration degree)
  verify              run the dual verification suite on the default instance
  solve <config>      reference solution only (theta*, F(theta*))

Exit codes: 0 success, 1 validation/usage error, 2 runtime failure.
"""

from __future__ import annotations

import argparse
import json
import math
import os
import sys

from .exceptions import DvrLabError, ValidationError


class _Parser(argparse.ArgumentParser):
    """Argument errors (unknown subcommand, bad flags) exit 1 with usage text."""

    def error(self, message):
        self.print_usage(sys.stderr)
        print(f"{self.prog}: error: {message}", file=sys.stderr)
        raise SystemExit(1)


def _parser():
    p = _Parser(prog="dvrlab",
                description="decentralized optimization laboratory")
    sub = p.add_subparsers(dest="command")

    run_p = sub.add_parser("run", help="execute an experiment config")
    run_p.add_argument("config")
    spec_p = sub.add_parser("spectrum", help="spectral summary of a graph spec")
    spec_p.add_argument("graph_spec")
    sub.add_parser("verify", help="run the dual verification suite")
    solve_p = sub.add_parser("solve", help="compute the reference solution")
    solve_p.add_argument("config")

    for sp in (run_p, spec_p, solve_p):
        sp.add_argument("--seed", type=int, default=None)
        sp.add_argument("--out-dir", default=None)
        sp.add_argument("--format", choices=("csv", "json"), default="json")
    verify_p = sub.choices["verify"]
    verify_p.add_argument("--seed", type=int, default=0)
    verify_p.add_argument("--out-dir", default=None)
    verify_p.add_argument("--format", choices=("csv", "json"), default="json")
    return p


def _load_json(path, what):
    if not os.path.exists(path):
        raise ValidationError(f"{what} file not found: {path}")
    with open(path) as fh:
        try:
            return json.load(fh)
        except json.JSONDecodeError as exc:
            raise ValidationError(f"{path}: not valid JSON ({exc})") from None


def _cmd_run(args):
    from .harness import ExperimentConfig, run_experiment
    cfg = ExperimentConfig.from_file(args.config)
    if args.seed is not None:
        cfg.raw["seeds"] = [args.seed]
    summary = run_experiment(cfg, out_dir=args.out_dir)
    failed = [r for r in summary["runs"] if r["status"] != "ok"]
    out_dir = args.out_dir or cfg.out_dir
    print(f"wrote {len(summary['runs'])} traces to {out_dir} "
          f"({len(failed)} failed)")
    return 2 if failed else 0


def _cmd_spectrum(args):
    from .topology import build_graph, laplacian, load_edgelist
    spec = _load_json(args.graph_spec, "graph spec") \
        if args.graph_spec.endswith(".json") else None
    if spec is None:
        graph = load_edgelist(args.graph_spec)
    elif spec.get("kind") == "edgelist":
        graph = load_edgelist(spec["path"])
    else:
        seed = args.seed if args.seed is not None else spec.get("seed", 0)
        graph = build_graph(spec.get("kind", "grid"), spec["n"],
                            spec.get("params"), seed)
    gossip = laplacian(graph)
    info = {
        "n": graph.n,
        "edges": len(graph.edge_list),
        "gamma": gossip.gamma,
        "lambda_max": gossip.lambda_max,
        "lambda_min_plus": gossip.lambda_min_plus,
        "chebyshev_degree": max(1, math.ceil(1.0 / math.sqrt(gossip.gamma))),
    }
    _emit(info, args.format)
    return 0


def _cmd_verify(args):
    from .dual_oracle import report_json, verification_report
    report = verification_report(seed=args.seed)
    if args.format == "csv":
        print("name,bound,worst,pass")
        for c in report["checks"]:
            print(f"{c['name']},{c['bound']!r},{c['worst']!r},{c['pass']}")
    else:
        print(report_json(report))
    if args.out_dir:
        os.makedirs(args.out_dir, exist_ok=True)
        with open(os.path.join(args.out_dir, "verify.json"), "w") as fh:
            fh.write(report_json(report))
    return 0 if report["all_pass"] else 2


def _cmd_solve(args):
    from .harness import ExperimentConfig, build_from_config, reference_solution
    cfg = ExperimentConfig.from_file(args.config)
    problem, *_ = build_from_config(cfg)
    theta_star, f_star = reference_solution(problem)
    info = {"f_star": float(f_star), "theta_star": theta_star.tolist()}
    _emit(info, args.format)
    if args.out_dir:
        os.makedirs(args.out_dir, exist_ok=True)
        with open(os.path.join(args.out_dir, "solution.json"), "w") as fh:
            json.dump(info, fh, indent=2)
    return 0


def _emit(info, fmt):
    if fmt == "csv":
        keys = list(info)
        print(",".join(keys))
        print(",".join(_csv_cell(info[k]) for k in keys))
    else:
        print(json.dumps(info, indent=2, sort_keys=True))


def _csv_cell(v):
    if isinstance(v, float):
        return repr(float(v))
    if isinstance(v, list):
        return '"' + " ".join(repr(float(x)) for x in v) + '"'
    return str(v)


def main(argv=None):
    parser = _parser()
    args = parser.parse_args(argv)
    if args.command is None:
        parser.print_usage(sys.stderr)
        return 1
    handlers = {"run": _cmd_run, "spectrum": _cmd_spectrum,
                "verify": _cmd_verify, "solve": _cmd_solve}
    try:
        return handlers[args.command](args)
    except ValidationError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except DvrLabError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())

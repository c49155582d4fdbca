"""Command-line driver: compile a model to a QUBO artifact, solve an
artifact, run the hybrid decomposition, or run the benchmark suite.

Every run writes a manifest.json echoing the full effective configuration
into the output directory; report paths emit both delimited CSVs and rendered
PNG figures. Exit codes: 0 success, 2 parse error, 3 budget error,
4 infeasible, 5 solver error.

Set QUBOFORGE_LOG=debug|info|warning for logging verbosity.
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from fractions import Fraction
from pathlib import Path

from . import benders as bd
from . import bench as bn
from . import plots
from .binarize import BudgetError, InfeasibleConstraintError
from .compiler import CompileError, compile_model, read_artifact, write_artifact
from .model import ModelError, evaluate, parse_model
from .solvers import SolverError, decode, solve_exhaustive, solve_sa, trace_csv

EXIT_PARSE = 2
EXIT_BUDGET = 3
EXIT_INFEASIBLE = 4
EXIT_SOLVER = 5

log = logging.getLogger("quboforge")


class CliError(Exception):
    def __init__(self, message, code):
        super().__init__(message)
        self.code = code


def _setup_logging():
    level = os.environ.get("QUBOFORGE_LOG", "warning").upper()
    logging.basicConfig(level=getattr(logging, level, logging.WARNING),
                        format="%(levelname)s %(name)s: %(message)s")


def _outdir(args) -> Path:
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _manifest(out: Path, args, extra=None):
    doc = {k: (str(v) if isinstance(v, (Path, Fraction)) else v)
           for k, v in vars(args).items() if k != "func"}
    doc.update(extra or {})
    (out / "manifest.json").write_text(json.dumps(doc, indent=2, default=str) + "\n")


def _read_model(path):
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise CliError(f"parse: cannot read {path}: {exc}", EXIT_PARSE)
    try:
        return parse_model(text)
    except ModelError as exc:
        raise CliError(f"parse: {exc}", EXIT_PARSE)


def _penalty_arg(value):
    if value is None or value == "auto":
        return None
    try:
        return Fraction(value)
    except ValueError:
        raise CliError(f"parse: --penalty must be a number or 'auto', got {value!r}",
                       EXIT_PARSE)


def _compile(model, args):
    try:
        return compile_model(
            model,
            budget=args.budget,
            continuous_bits=args.continuous_bits,
            penalty=_penalty_arg(args.penalty),
        )
    except BudgetError as exc:
        raise CliError(f"budget: {exc}", EXIT_BUDGET)
    except InfeasibleConstraintError as exc:
        raise CliError(f"infeasible: {exc}", EXIT_INFEASIBLE)
    except CompileError as exc:
        raise CliError(f"compile: {exc}", EXIT_PARSE)


def cmd_compile(args) -> int:
    out = _outdir(args)
    model = _read_model(args.model)
    artifact = _compile(model, args)
    path = out / f"{model.name}.qubo"
    path.write_text(write_artifact(artifact))
    summary = {
        "model": model.name,
        "total_bits": artifact.total_bits,
        "non_slack_bits": artifact.non_slack_bits,
        "penalties": len(artifact.penalties),
        "artifact": str(path),
    }
    (out / "plan_summary.json").write_text(json.dumps(summary, indent=2) + "\n")
    _manifest(out, args, {"artifact": str(path)})
    print(f"compiled {model.name}: {artifact.total_bits} bits "
          f"({artifact.non_slack_bits} non-slack) -> {path}")
    return 0


def cmd_solve(args) -> int:
    out = _outdir(args)
    try:
        loaded = read_artifact(Path(args.artifact).read_text())
    except (OSError, CompileError, ValueError) as exc:
        raise CliError(f"parse: {exc}", EXIT_PARSE)
    try:
        if args.method == "exhaustive":
            res = solve_exhaustive(loaded.form)
        else:
            res = solve_sa(loaded.form, seed=args.seed, sweeps=args.sweeps,
                           restarts=args.restarts, record_trace=True)
    except SolverError as exc:
        raise CliError(f"solver: {exc}", EXIT_SOLVER)

    values = decode(loaded.plan, res.best)
    lines = [f"energy {res.energy}", f"method {res.method}",
             f"proven_optimal {res.proven_optimal}"]
    for name in sorted(values):
        lines.append(f"{name} {values[name]}")
    (out / "solution.txt").write_text("\n".join(lines) + "\n")
    if res.trace:
        (out / "trace.csv").write_text(trace_csv(res.trace))
        plots.plot_sa_trace(res.trace, out / "trace.png")
    _manifest(out, args, {"energy": str(res.energy)})
    print(f"energy {res.energy} ({res.method}"
          f"{', proven optimal' if res.proven_optimal else ''}) -> {out/'solution.txt'}")
    return 0


def cmd_benders(args) -> int:
    out = _outdir(args)
    model = _read_model(args.model)
    try:
        report = bd.run(
            model,
            tol=Fraction(args.tol).limit_denominator(10**15),
            max_iter=args.max_iter,
            master_solver=args.method,
            eta_bits=args.eta_bits,
            seed=args.seed,
            sa_sweeps=args.sweeps,
            sa_restarts=args.restarts,
        )
    except bd.BendersError as exc:
        raise CliError(f"solver: {exc}", EXIT_SOLVER)
    if report.status == "infeasible" or report.incumbent_cost is None:
        raise CliError(f"infeasible: no feasible solution found ({report.status})",
                       EXIT_INFEASIBLE)

    (out / "convergence.csv").write_text(bd.convergence_csv(report))
    plots.plot_convergence(report.history, out / "convergence.png")
    doc = {
        "status": report.status,
        "objective": float(report.incumbent_cost),
        "lower_bound": None if report.lb is None else float(report.lb),
        "gap": None if report.gap is None else float(report.gap),
        "iterations": report.iterations,
        "eta_step": float(report.eta_step),
        "cuts": len(report.cuts),
        "assignment": {
            **{k: str(v) for k, v in (report.incumbent_y or {}).items()},
            **{k: str(v) for k, v in (report.incumbent_x or {}).items()},
        },
    }
    (out / "report.json").write_text(json.dumps(doc, indent=2) + "\n")
    _manifest(out, args, {"status": report.status})
    print(f"{report.status}: objective {float(report.incumbent_cost):g}, "
          f"lb {float(report.lb) if report.lb is not None else 'n/a'}, "
          f"iters {report.iterations} -> {out/'report.json'}")
    return 0


def cmd_bench(args) -> int:
    out = _outdir(args)
    instances = []
    root = Path(args.instances)
    if not root.exists():
        raise CliError(f"parse: instance path {root} does not exist", EXIT_PARSE)
    paths = sorted(root.iterdir()) if root.is_dir() else [root]
    for p in paths:
        try:
            if p.suffix == ".json":
                instances.append((p.stem, parse_model(p.read_text())))
            elif p.suffix in (".txt", ".cap"):
                inst = bn.parse_orlib_cap(p.read_text(), name=p.stem)
                instances.append((p.stem, bn.cflp_to_milp(inst)))
        except (ModelError, bn.BenchError) as exc:
            raise CliError(f"parse: {p.name}: {exc}", EXIT_PARSE)
    if not instances:
        raise CliError(f"parse: no instances (.json/.txt/.cap) under {root}", EXIT_PARSE)

    reports = bn.run_suite(
        instances,
        config={
            "continuous_bits": args.continuous_bits,
            "seed": args.seed,
            "sweeps": args.sweeps,
            "restarts": args.restarts,
            "tol": Fraction(args.tol).limit_denominator(10**15),
            "max_iter": args.max_iter,
            "eta_bits": args.eta_bits,
        },
    )
    (out / "suite.csv").write_text(bn.suite_csv(reports))
    plots.plot_bench(reports, out / "suite.png")
    for r in reports:
        if r.trace:
            base = f"{r.instance}_{r.method}"
            (out / f"{base}_trace.csv").write_text(trace_csv(r.trace))
            plots.plot_sa_trace(r.trace, out / f"{base}_trace.png")
        if r.history:
            base = f"{r.instance}_{r.method}"
            fake = bd.BendersReport(
                status="", incumbent_y=None, incumbent_x=None, incumbent_cost=None,
                lb=None, gap=None, iterations=0, eta_step=Fraction(0),
                history=r.history, cuts=[], master_exact=True,
            )
            (out / f"{base}_convergence.csv").write_text(bd.convergence_csv(fake))
            plots.plot_convergence(r.history, out / f"{base}_convergence.png")
    _manifest(out, args, {"instances": [n for n, _ in instances]})
    errors = [r for r in reports if r.error]
    print(f"{len(reports)} runs ({len(errors)} errored) -> {out/'suite.csv'}")
    for r in errors:
        print(f"  {r.instance}/{r.method}: {r.error}", file=sys.stderr)
    return 0


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(
        prog="quboforge",
        description="MILP-to-QUBO compiler and hybrid decomposition solver",
    )
    sub = ap.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--out", default=".", help="output directory")
        p.add_argument("--seed", type=int, default=0)

    pc = sub.add_parser("compile", help="compile a model file to a QUBO artifact")
    pc.add_argument("model")
    pc.add_argument("--budget", type=int, default=None, help="hardware bit budget")
    pc.add_argument("--continuous-bits", type=int, default=4, dest="continuous_bits")
    pc.add_argument("--penalty", default="auto", help="global penalty weight or 'auto'")
    common(pc)
    pc.set_defaults(func=cmd_compile)

    ps = sub.add_parser("solve", help="solve a QUBO artifact file")
    ps.add_argument("artifact")
    ps.add_argument("--method", choices=("exhaustive", "sa"), default="exhaustive")
    ps.add_argument("--sweeps", type=int, default=1000)
    ps.add_argument("--restarts", type=int, default=2)
    common(ps)
    ps.set_defaults(func=cmd_solve)

    pb = sub.add_parser("benders", help="run the hybrid decomposition on a model file")
    pb.add_argument("model")
    pb.add_argument("--method", choices=("exhaustive", "sa"), default="exhaustive")
    pb.add_argument("--tol", default="1e-6")
    pb.add_argument("--max-iter", type=int, default=50, dest="max_iter")
    pb.add_argument("--eta-bits", type=int, default=10, dest="eta_bits")
    pb.add_argument("--sweeps", type=int, default=500)
    pb.add_argument("--restarts", type=int, default=2)
    common(pb)
    pb.set_defaults(func=cmd_benders)

    pn = sub.add_parser("bench", help="run the benchmark suite over an instance dir")
    pn.add_argument("instances", help="directory of .json models / .txt cap files")
    pn.add_argument("--continuous-bits", type=int, default=4, dest="continuous_bits")
    pn.add_argument("--sweeps", type=int, default=1000)
    pn.add_argument("--restarts", type=int, default=2)
    pn.add_argument("--tol", default="1e-6")
    pn.add_argument("--max-iter", type=int, default=50, dest="max_iter")
    pn.add_argument("--eta-bits", type=int, default=10, dest="eta_bits")
    common(pn)
    pn.set_defaults(func=cmd_bench)

    return ap


def main(argv=None) -> int:
    _setup_logging()
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except CliError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exc.code
    except (ModelError,) as exc:
        print(f"error: parse: {exc}", file=sys.stderr)
        return EXIT_PARSE
    except (BudgetError,) as exc:
        print(f"error: budget: {exc}", file=sys.stderr)
        return EXIT_BUDGET
    except (InfeasibleConstraintError,) as exc:
        print(f"error: infeasible: {exc}", file=sys.stderr)
        return EXIT_INFEASIBLE
    except (SolverError, bd.BendersError, bn.BenchError, CompileError) as exc:
        print(f"error: solver: {exc}", file=sys.stderr)
        return EXIT_SOLVER


if __name__ == "__main__":
    sys.exit(main())

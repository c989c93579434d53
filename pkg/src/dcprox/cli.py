"""Command-line surface: instance generation, solves, benchmarks, checks.

Subcommands::

    dcprox gen   --kind bc-private --n 20 --seed 1 [--cond 10] --out inst.json
    dcprox solve (--instance inst.json | --kind ... --n ... --seed ...)
                 [--solver bregman|euclidean] [--outer-tol ...] [--out r.json]
    dcprox bench --kinds bc-private,bc-common --sizes 20,50 --seeds 1:10
                 --out bench.csv
    dcprox check [--level fast|full]

Exit codes: 0 converged / success, 1 usage error, 2 solver failure,
3 invariant failure.  ``DCPROX_THREADS`` caps the benchmark worker pool.
Wall-clock fields in reports and the avg_runtime columns of the CSV are
the only non-deterministic outputs.
"""

from __future__ import annotations

import argparse
import collections
import csv
import importlib.resources
import json
import math
import os
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from pathlib import Path

import jsonschema
import numpy as np

from . import checks, diagnostics, problems
from .dca import DcaTrace, dca_solve
from .pdhg import PdhgConfig

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_SOLVER = 2
EXIT_INVARIANT = 3

REPORT_SCHEMA_VERSION = 1

#: Instance dimension above which the trace-identity diagnostic is skipped
#: for the block-coupled class (its conjugate is evaluated numerically).
IDENTITY_DIM_CAP = 800

CSV_COLUMNS = ["kind", "n", "variant", "avg_dca_iters", "avg_inner_iters",
               "avg_runtime_s", "avg_runtime_per_dca_iter_s", "avg_final_obj",
               "n_seeds", "n_failed"]


def _load_schema(name: str) -> dict:
    ref = importlib.resources.files("dcprox") / "schemas" / name
    return json.loads(ref.read_text())


def validate_report(doc: dict) -> None:
    jsonschema.validate(doc, _load_schema("solve_report.schema.json"))


def validate_instance_doc(doc: dict) -> None:
    jsonschema.validate(doc, _load_schema("instance.schema.json"))


@dataclass
class SolveSettings:
    solver: str = problems.VARIANT_BREGMAN
    outer_tol: float = 1e-8
    inner_tol: float = 1e-8
    max_outer: int = 100
    max_inner: int = 20000
    debug: bool = False
    diagnostics: bool = True

    def inner_cfg(self) -> PdhgConfig:
        return PdhgConfig(tol=self.inner_tol, max_iters=self.max_inner,
                          debug=self.debug)


def _total_dim(inst) -> int:
    if isinstance(inst, problems.BrascampLiebInstance):
        return sum(ni * (ni + 1) // 2 for ni in inst.block_dims)
    return inst.n * (inst.n + 1) // 2


def _trace_identity_error(inst, trace: DcaTrace) -> float | None:
    """Max conjugate-identity discrepancy over consecutive trace iterates."""
    if (isinstance(inst, problems.BrascampLiebInstance)
            and _total_dim(inst) > IDENTITY_DIM_CAP):
        return None
    hspec = diagnostics.h_conjugate_for(inst)
    if hspec is None:
        return None
    worst = 0.0
    pairs = list(zip(trace.iterates[:-1], trace.iterates[1:]))
    for a, b in pairs[: min(len(pairs), 8)]:
        if all(np.allclose(x, y) for x, y in zip(a, b)):
            continue
        worst = max(worst, diagnostics.check_bregman_identity(hspec, a, b))
    return worst


def _diagnostics_block(inst, prog, trace: DcaTrace,
                       settings: SolveSettings) -> dict | None:
    """Reference continuation + rate/PL/KKT diagnostics for a report."""
    if not settings.diagnostics or trace.status == "Failed":
        return None
    ref = dca_solve(prog, outer_tol=1e-12,
                    max_outer=min(10 * settings.max_outer, 1000),
                    inner_cfg=PdhgConfig(tol=max(settings.inner_tol * 1e-2, 1e-10),
                                         max_iters=10 * settings.max_inner),
                    start=trace.iterates[-1], warm=trace.final_state)
    f_star = min(min(ref.objectives), min(trace.objectives))
    out = {"f_star_hat": f_star, "mu_hat": None, "rate_bound": None,
           "rho_hat": None, "kkt_residual": None, "identity_max_error": None}
    try:
        pl = diagnostics.estimate_pl(trace, prog, f_star)
        out["mu_hat"] = pl.mu_hat if math.isfinite(pl.mu_hat) else None
        out["rate_bound"] = pl.rate_bound
    except diagnostics.InsufficientData:
        pass
    try:
        out["rho_hat"] = diagnostics.fit_rate(trace.objectives, f_star)
    except diagnostics.InsufficientData:
        pass
    if trace.y_hat is not None:
        x_lin = trace.iterates[-2] if len(trace.iterates) >= 2 else None
        out["kkt_residual"] = diagnostics.kkt_residual(
            prog, trace.iterates[-1], trace.y_hat, x_lin=x_lin)
    out["identity_max_error"] = _trace_identity_error(inst, trace)
    return out


def build_report(inst, trace: DcaTrace, settings: SolveSettings,
                 diag: dict | None, instance_path: str | None = None) -> dict:
    meta = inst.meta or {}
    rows = []
    for k in range(len(trace.inner_iters)):
        rows.append({
            "k": k + 1,
            "objective": trace.objectives[k + 1],
            "inner_iters": int(trace.inner_iters[k]),
            "inner_residual": float(trace.inner_residuals[k]),
            "inner_tol": float(trace.inner_tols[k]),
            "wall_ms": round(trace.wall_times[k] * 1000.0, 3),
        })
    report = {
        "schema_version": REPORT_SCHEMA_VERSION,
        "instance": {
            "kind": meta.get("kind"),
            "n": int(meta.get("n", _guess_n(inst))),
            "seed": meta.get("seed"),
            "cond": meta.get("cond"),
            "path": instance_path,
        },
        "config": {
            "solver": settings.solver,
            "outer_tol": settings.outer_tol,
            "inner_tol": settings.inner_tol,
            "max_outer": settings.max_outer,
            "max_inner": settings.max_inner,
        },
        "iterations": rows,
        "totals": {
            "outer_iters": len(rows),
            "total_inner_iters": int(sum(trace.inner_iters)),
            "total_wall_ms": round(sum(trace.wall_times) * 1000.0, 3),
            "initial_objective": trace.objectives[0],
            "final_objective": trace.objectives[-1],
        },
        "diagnostics": diag,
        "status": trace.status,
        "flags": list(trace.flags),
    }
    return report


def _guess_n(inst) -> int:
    return inst.n


def run_solve(inst, settings: SolveSettings,
              instance_path: str | None = None) -> dict:
    """Solve one instance and return a schema-valid report document."""
    prog = problems.build_program(inst, settings.solver)
    trace = dca_solve(prog, outer_tol=settings.outer_tol,
                      max_outer=settings.max_outer,
                      inner_cfg=settings.inner_cfg())
    diag = _diagnostics_block(inst, prog, trace, settings)
    report = build_report(inst, trace, settings, diag, instance_path)
    report["totals"]["feasibility_residual"] = float(
        prog.feasibility_residual(trace.iterates[-1]))
    validate_report(report)
    return report


def _dump_json(doc: dict, path: str | None) -> None:
    text = json.dumps(doc, indent=2, sort_keys=True) + "\n"
    if path is None or path == "-":
        sys.stdout.write(text)
    else:
        Path(path).write_text(text)


# ---------------------------------------------------------------------------
# benchmark harness


def _bench_cell(args) -> dict:
    kind, n, seed, cond, variant, settings_kw = args
    settings = SolveSettings(solver=variant, diagnostics=False, **settings_kw)
    inst = problems.gen_synthetic(kind, n, seed, cond)
    try:
        return run_solve(inst, settings)
    except Exception as exc:
        return {"status": "Failed", "error": f"{type(exc).__name__}: {exc}",
                "instance": {"kind": kind, "n": n, "seed": seed, "cond": cond},
                "config": {"solver": variant}}


def run_bench(kinds, sizes, seeds, variants, cond, settings_kw,
              out_csv: str, report_dir: str | None = None) -> list:
    """Grid of solves aggregated per (kind, n, variant) into a CSV table."""
    if not seeds:
        raise ValueError("seed list must not be empty")
    cells = [(kind, n, seed, cond, variant, settings_kw)
             for kind in kinds for n in sizes for variant in variants
             for seed in seeds]
    workers = int(os.environ.get("DCPROX_THREADS", "1") or "1")
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            reports = list(pool.map(_bench_cell, cells))
    else:
        reports = [_bench_cell(c) for c in cells]

    if report_dir is None:
        report_dir = str(Path(out_csv).with_suffix("")) + "_runs"
    Path(report_dir).mkdir(parents=True, exist_ok=True)
    for c, rep in zip(cells, reports):
        kind, n, seed, _, variant, _ = c
        name = f"{kind}_n{n}_seed{seed}_{variant}.json"
        _dump_json(rep, str(Path(report_dir) / name))

    groups = collections.defaultdict(list)
    for c, rep in zip(cells, reports):
        kind, n, _, _, variant, _ = c
        groups[(kind, n, variant)].append(rep)

    rows = []
    for kind in kinds:
        for n in sizes:
            for variant in variants:
                reps = groups[(kind, n, variant)]
                ok = [r for r in reps if r.get("status") in ("Converged", "Flagged",
                                                             "MaxIters")]
                n_failed = len(reps) - len(ok)
                if ok:
                    outer = [r["totals"]["outer_iters"] for r in ok]
                    inner_per = [r["totals"]["total_inner_iters"]
                                 / max(1, r["totals"]["outer_iters"]) for r in ok]
                    runtime = [r["totals"]["total_wall_ms"] / 1000.0 for r in ok]
                    per_iter = [rt / max(1, o) for rt, o in zip(runtime, outer)]
                    final = [r["totals"]["final_objective"] for r in ok]
                    row = {
                        "kind": kind, "n": n, "variant": variant,
                        "avg_dca_iters": float(np.mean(outer)),
                        "avg_inner_iters": float(np.mean(inner_per)),
                        "avg_runtime_s": float(np.mean(runtime)),
                        "avg_runtime_per_dca_iter_s": float(np.mean(per_iter)),
                        "avg_final_obj": float(np.mean(final)),
                        "n_seeds": len(reps), "n_failed": n_failed,
                    }
                else:
                    row = {"kind": kind, "n": n, "variant": variant,
                           "avg_dca_iters": "", "avg_inner_iters": "",
                           "avg_runtime_s": "", "avg_runtime_per_dca_iter_s": "",
                           "avg_final_obj": "", "n_seeds": len(reps),
                           "n_failed": n_failed}
                rows.append(row)

    with open(out_csv, "w", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=CSV_COLUMNS)
        writer.writeheader()
        writer.writerows(rows)
    return rows


# ---------------------------------------------------------------------------
# argument parsing


class _Parser(argparse.ArgumentParser):
    def error(self, message):  # usage errors exit 1, not argparse's 2
        self.print_usage(sys.stderr)
        raise SystemExit(EXIT_USAGE)


def _parse_seeds(text: str) -> list:
    if ":" in text:
        lo, hi = text.split(":", 1)
        return list(range(int(lo), int(hi) + 1))
    return [int(s) for s in text.split(",") if s]


def _build_parser() -> _Parser:
    parser = _Parser(prog="dcprox", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    gen = sub.add_parser("gen", help="generate a synthetic instance")
    gen.add_argument("--kind", required=True, choices=problems.KINDS)
    gen.add_argument("--n", type=int, required=True)
    gen.add_argument("--seed", type=int, required=True)
    gen.add_argument("--cond", type=float, default=10.0)
    gen.add_argument("--out", default=None)

    solve = sub.add_parser("solve", help="solve one instance and emit a report")
    solve.add_argument("--instance", default=None)
    solve.add_argument("--kind", choices=problems.KINDS)
    solve.add_argument("--n", type=int)
    solve.add_argument("--seed", type=int)
    solve.add_argument("--cond", type=float, default=10.0)
    solve.add_argument("--solver", choices=problems.VARIANTS,
                       default=problems.VARIANT_BREGMAN)
    solve.add_argument("--outer-tol", type=float, default=1e-8)
    solve.add_argument("--inner-tol", type=float, default=1e-8)
    solve.add_argument("--max-outer", type=int, default=100)
    solve.add_argument("--max-inner", type=int, default=20000)
    solve.add_argument("--debug", action="store_true")
    solve.add_argument("--no-diagnostics", action="store_true")
    solve.add_argument("--out", default=None)

    bench = sub.add_parser("bench", help="benchmark grid with CSV summary")
    bench.add_argument("--kinds", default=",".join(problems.KINDS))
    bench.add_argument("--sizes", default="20")
    bench.add_argument("--seeds", default="1:10")
    bench.add_argument("--solvers", default=",".join(problems.VARIANTS))
    bench.add_argument("--cond", type=float, default=10.0)
    bench.add_argument("--outer-tol", type=float, default=1e-8)
    bench.add_argument("--inner-tol", type=float, default=1e-8)
    bench.add_argument("--max-outer", type=int, default=100)
    bench.add_argument("--max-inner", type=int, default=20000)
    bench.add_argument("--out", required=True)
    bench.add_argument("--report-dir", default=None)

    check = sub.add_parser("check", help="run the invariant suites")
    check.add_argument("--level", choices=("fast", "full"), default="fast")
    return parser


def main(argv=None) -> int:
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code) if exc.code is not None else EXIT_OK

    if args.command == "gen":
        inst = problems.gen_synthetic(args.kind, args.n, args.seed, args.cond)
        doc = problems.instance_to_dict(inst)
        validate_instance_doc(doc)
        out = args.out or f"instance_{args.kind}_n{args.n}_seed{args.seed}.json"
        try:
            _dump_json(doc, out)
        except OSError as exc:
            print(f"error: cannot write {out}: {exc}", file=sys.stderr)
            return EXIT_USAGE
        return EXIT_OK

    if args.command == "solve":
        if args.instance is not None:
            try:
                inst = problems.load_instance(args.instance)
            except (OSError, ValueError) as exc:
                print(f"error: cannot load {args.instance}: {exc}", file=sys.stderr)
                return EXIT_USAGE
            path = args.instance
        else:
            if args.kind is None or args.n is None or args.seed is None:
                print("error: solve needs --instance or --kind/--n/--seed",
                      file=sys.stderr)
                return EXIT_USAGE
            inst = problems.gen_synthetic(args.kind, args.n, args.seed, args.cond)
            path = None
        settings = SolveSettings(
            solver=args.solver, outer_tol=args.outer_tol,
            inner_tol=args.inner_tol, max_outer=args.max_outer,
            max_inner=args.max_inner, debug=args.debug,
            diagnostics=not args.no_diagnostics)
        report = run_solve(inst, settings, instance_path=path)
        meta = inst.meta or {}
        out = args.out or (f"report_{meta.get('kind', 'instance')}"
                           f"_n{meta.get('n', inst.n)}"
                           f"_seed{meta.get('seed', 'x')}_{args.solver}.json")
        _dump_json(report, out)
        print(f"status: {report['status']}  final objective: "
              f"{report['totals']['final_objective']:.10g}", file=sys.stderr)
        return EXIT_OK if report["status"] == "Converged" else EXIT_SOLVER

    if args.command == "bench":
        kinds = [k for k in args.kinds.split(",") if k]
        for k in kinds:
            if k not in problems.KINDS:
                print(f"error: unknown kind {k!r}", file=sys.stderr)
                return EXIT_USAGE
        sizes = [int(s) for s in args.sizes.split(",") if s]
        seeds = _parse_seeds(args.seeds)
        variants = [v for v in args.solvers.split(",") if v]
        for v in variants:
            if v not in problems.VARIANTS:
                print(f"error: unknown solver variant {v!r}", file=sys.stderr)
                return EXIT_USAGE
        if not seeds:
            print("error: empty seed list", file=sys.stderr)
            return EXIT_USAGE
        settings_kw = dict(outer_tol=args.outer_tol, inner_tol=args.inner_tol,
                           max_outer=args.max_outer, max_inner=args.max_inner)
        rows = run_bench(kinds, sizes, seeds, variants, args.cond, settings_kw,
                         args.out, args.report_dir)
        failed = sum(r["n_failed"] for r in rows)
        print(f"wrote {args.out} ({len(rows)} rows, {failed} failed runs)",
              file=sys.stderr)
        return EXIT_OK if failed == 0 else EXIT_SOLVER

    if args.command == "check":
        failures = checks.run_checks(args.level)
        return EXIT_OK if failures == 0 else EXIT_INVARIANT

    return EXIT_USAGE


def entry() -> None:
    sys.exit(main())


if __name__ == "__main__":
    entry()

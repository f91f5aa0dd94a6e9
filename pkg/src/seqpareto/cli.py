"""``seqpareto`` command line: run, bench, metrics, gen-synth, doe.

Exit codes: 0 success, 1 runtime failure, 2 usage error.
"""

from __future__ import annotations

import argparse
import csv
import json
import logging
import os
import sys
from pathlib import Path

import numpy as np

from . import __version__, bench, doe
from .core import ObjectiveSpec, extract_pareto_front
from .data import (Family, csv_header, generate_synthetic_pool, ingest_csv, read_columns,
                   write_pool_csv)
from .errors import SeqParetoError
from .loop import DEFAULT_THRESHOLDS, RunConfig, prepare_pool, restore, run, save_checkpoint
from .metrics import CONVENTIONS, ObjectiveScaler, evaluate

EXIT_OK, EXIT_RUNTIME, EXIT_USAGE = 0, 1, 2
SEED_ENV = "SEQPARETO_SEED"

log = logging.getLogger("seqpareto")


class UsageError(Exception):
    """Flag combination that parses but cannot be honoured."""


def _default_seed() -> int:
    raw = os.environ.get(SEED_ENV)
    if raw is None or raw.strip() == "":
        return 0
    try:
        return int(raw)
    except ValueError:
        raise UsageError(f"{SEED_ENV}={raw!r} is not an integer") from None


def _csv_list(text: str) -> list[str]:
    items = [t.strip() for t in text.split(",") if t.strip()]
    if not items:
        raise argparse.ArgumentTypeError("expected a comma-separated list")
    return items


def _float_list(text: str) -> list[float]:
    try:
        return [float(t) for t in _csv_list(text)]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}") from None


def _positive(text: str) -> int:
    v = int(text)
    if v < 1:
        raise argparse.ArgumentTypeError(f"expected a positive integer, got {text}")
    return v


def _pool_flags(p: argparse.ArgumentParser) -> None:
    g = p.add_argument_group("candidate pool")
    g.add_argument("--pool", type=Path, help="CSV pool (needs --inputs and --objectives)")
    g.add_argument("--inputs", type=_csv_list, help="input column names, comma-separated")
    g.add_argument("--objectives", type=_csv_list, help="objective column names, comma-separated")
    g.add_argument("--synthetic", choices=[f.value for f in Family],
                   help="synthetic benchmark family (default: concave when --pool is absent)")
    g.add_argument("--n", type=int, default=402, help="synthetic pool size")
    g.add_argument("--d", type=int, default=7, help="synthetic input dimension")
    g.add_argument("--noise", type=float, default=0.01, help="synthetic relative noise level")
    g.add_argument("--pool-seed", type=int, default=0, help="synthetic pool seed")
    g.add_argument("--ref-point", type=_float_list,
                   help="HV reference point in original units (default: pool worst corner)")


def _load_pool(args, scenario: str):
    if args.pool is not None:
        if args.synthetic:
            raise UsageError("--pool and --synthetic are mutually exclusive")
        if not args.inputs or not args.objectives:
            raise UsageError("--pool needs --inputs and --objectives")
        if not args.pool.exists():
            raise UsageError(f"pool file {args.pool} does not exist")
        return ingest_csv(args.pool, args.inputs, args.objectives, scenario, args.ref_point)
    return generate_synthetic_pool(args.synthetic or "concave", n=args.n, d=args.d,
                                   noise=args.noise, seed=args.pool_seed, directions=scenario,
                                   reference_point=args.ref_point)


def _write_rows(path: Path, columns, rows) -> None:
    with path.open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(columns)
        for r in rows:
            w.writerow([repr(v) if isinstance(v, float) else v for v in r])


def _dump(path: Path, doc: dict) -> None:
    path.write_text(json.dumps(doc, indent=2, default=str) + "\n", encoding="utf-8")


def cmd_run(args) -> int:
    seed = args.seed if args.seed is not None else _default_seed()
    n_start = args.n_start if args.n_start is not None else (10 if args.resource_cap else 30)
    threshold = args.hv_threshold if args.hv_threshold is not None else DEFAULT_THRESHOLDS[args.scenario]
    if args.no_threshold:
        threshold = None
    cfg = RunConfig(n_start=n_start, n_iter=args.n_iter, q=args.q, hv_threshold=threshold,
                    stop_on=args.stop_on, mc_samples=args.mc_samples,
                    num_restarts=args.num_restarts, raw_samples=args.raw_samples, seed=seed,
                    scenario=args.scenario, resource_cap=args.resource_cap,
                    refit_every=args.refit_every)
    pool = _load_pool(args, args.scenario)
    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    state = None
    if args.resume is not None:
        state, _ = restore(args.resume, pool)
        cfg = state.config

    def progress(st):
        t = st.hv_trace[-1]
        log.info("iteration %d: %d points, hv=%.4f phv=%.4f", t.iteration, t.points_used, t.hv, t.phv)
        if args.checkpoint_every and st.iteration % args.checkpoint_every == 0:
            save_checkpoint(st, out / "checkpoint.json")

    state, report = run(pool, cfg, state=state, callback=progress)
    eff = prepare_pool(pool, cfg)
    save_checkpoint(state, out / "checkpoint.json")
    _write_rows(out / "hv_trace.csv", ["iteration", "points_used", "hv", "phv"],
                [(t.iteration, t.points_used, t.hv, t.phv) for t in state.hv_trace])
    front = state.front(eff)
    _write_rows(out / "front.csv", ["pool_index"] + eff.feature_names + eff.objective_names,
                [(int(i), *map(float, eff.raw_inputs[i]), *map(float, y))
                 for i, y in zip(front.indices, front.objectives)])
    report_doc = report.to_dict() | {
        "stop_reason": state.stop_reason, "iteration": state.iteration,
        "scenario": cfg.scenario, "reference_point": eff.spec.reference_point.tolist(),
        "pool_size": eff.n, "pool_digest": eff.digest, "source_digest": pool.digest,
        "config": cfg.to_dict(), "flags": _flags(args)}
    _dump(out / "metrics.json", report_doc)
    eff.manifest.write(out / "manifest.json")
    print(json.dumps({k: report_doc[k] for k in ("gd", "igd", "hv", "phv", "data_usage",
                                                 "points_used", "stop_reason")}))
    return EXIT_OK


def cmd_bench(args) -> int:
    seed = args.seed if args.seed is not None else _default_seed()
    cfg = bench.BenchConfig(
        studies=tuple(args.study or bench.STUDIES), algos=tuple(args.algo or bench.ALGOS),
        scenarios=tuple(args.scenario or ("max-max", "max-min")), n_seeds=args.seeds,
        base_seed=seed, n_start=args.n_start, n_iter=args.n_iter, budget=args.budget, q=args.q,
        mc_samples=args.mc_samples, num_restarts=args.num_restarts, raw_samples=args.raw_samples,
        refit_every=args.refit_every, doe_step=args.doe_step, uds_random=args.uds_random,
        nsga_pop=args.nsga_pop, nsga_generations=args.nsga_generations,
        convention=args.convention)
    if args.pool is not None:
        pools = {sc: _load_pool(args, sc) for sc in cfg.scenarios}
    else:
        pools = bench.default_pools(args.synthetic or "concave", args.n, args.d, args.noise,
                                    args.pool_seed, cfg.scenarios)

    def progress(done, total):
        log.info("bench: %d/%d tasks done", done, total)

    report = bench.run_bench(pools, cfg, jobs=args.jobs, flags=_flags(args), progress=progress)
    paths = report.write(args.out_dir)
    bench.load_report(args.out_dir)  # self-consistency check
    print(json.dumps({"files": {k: str(p) for k, p in paths.items()},
                      "checks": {k: v["bmsdm_better"] for k, v in report.checks.items()}}, indent=1))
    return EXIT_OK


def cmd_metrics(args) -> int:
    for name in ("front", "truth"):
        path = getattr(args, name)
        if not path.exists():
            raise UsageError(f"--{name} file {path} does not exist")
    columns = args.objectives or csv_header(args.front)
    spec = ObjectiveSpec.from_scenario(args.scenario) if args.directions is None else \
        ObjectiveSpec(tuple(args.directions))
    if spec.m != len(columns):
        raise UsageError(f"{len(columns)} objective columns but {spec.m} directions; "
                         "pass --objectives or --directions")
    front, _ = read_columns(args.front, columns)
    truth_all, _ = read_columns(args.truth, columns)
    if truth_all.shape[0] == 0:
        raise UsageError("truth file has no valid rows")
    spec = spec.with_reference(args.ref_point if args.ref_point is not None
                               else spec.worst_corner(truth_all))
    truth = extract_pareto_front(truth_all, spec).objectives
    scaler = ObjectiveScaler.from_objectives(truth_all, spec)
    n_pool = truth_all.shape[0] if args.pool_size is None else args.pool_size
    report = evaluate(front, truth, spec, scaler, min(max(front.shape[0], 1), n_pool), n_pool,
                      args.convention)
    doc = report.to_dict() | {"convention": args.convention, "objectives": columns,
                              "directions": [d.value for d in spec.directions],
                              "reference_point": spec.reference_point.tolist(),
                              "true_front_size": int(truth.shape[0])}
    text = json.dumps(doc, indent=2)
    if args.out:
        Path(args.out).write_text(text + "\n", encoding="utf-8")
    print(text)
    return EXIT_OK


def cmd_gen_synth(args) -> int:
    seed = args.seed if args.seed is not None else _default_seed()
    pool = generate_synthetic_pool(args.family, n=args.n, d=args.d, noise=args.noise, seed=seed,
                                   directions=args.scenario)
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    write_pool_csv(pool, out)
    manifest = out.with_name(out.stem + ".manifest.json")
    pool.manifest.write(manifest)
    print(json.dumps({"csv": str(out), "manifest": str(manifest), "digest": pool.digest,
                      "rows": pool.n, "true_front_size": len(pool.true_front)}))
    return EXIT_OK


def cmd_doe(args) -> int:
    seed = args.seed if args.seed is not None else _default_seed()
    design = doe.generate(doe.DoeRequest(args.method, args.n, args.d, seed,
                                         uds_random=args.uds_random))
    cols = [f"x{i + 1}" for i in range(args.d)]
    rows = [tuple(map(float, x)) for x in design]
    if args.pool is not None:
        pool = _load_pool(args, "max-max")
        if pool.d != args.d:
            raise UsageError(f"--d {args.d} does not match the pool's {pool.d} inputs")
        idx = doe.project_to_pool(design, pool.inputs, np.zeros(pool.n, dtype=bool))
        cols = cols + ["pool_index"]
        rows = [r + (int(i),) for r, i in zip(rows, idx)]
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    _write_rows(out, cols, rows)
    print(json.dumps({"csv": str(out), "method": doe.DoeMethod.parse(args.method).value,
                      "n": args.n, "d": args.d, "min_distance": doe.min_pairwise_distance(design)}))
    return EXIT_OK


def _flags(args) -> dict:
    return {k: (str(v) if isinstance(v, Path) else v) for k, v in vars(args).items()
            if k != "handler"}


def _acq_flags(p) -> None:
    p.add_argument("--q", type=_positive, default=1, help="batch size per iteration")
    p.add_argument("--mc-samples", type=int, default=32)
    p.add_argument("--num-restarts", type=int, default=10)
    p.add_argument("--raw-samples", type=int, default=402)
    p.add_argument("--seed", type=int, default=None, help=f"root seed (default ${SEED_ENV} or 0)")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="seqpareto", description="Sequential multi-objective search over finite candidate pools.")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    parser.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("run", help="run one campaign")
    _pool_flags(p)
    p.add_argument("--scenario", choices=sorted(DEFAULT_THRESHOLDS), default="max-max")
    p.add_argument("--n-start", type=int, default=None,
                   help="initial points (default 30, or 10 with --resource-cap)")
    p.add_argument("--n-iter", type=int, default=90)
    p.add_argument("--hv-threshold", type=float, default=None,
                   help="stopping threshold (default 0.95 max-max, 0.94 max-min)")
    p.add_argument("--no-threshold", action="store_true", help="run all n_iter iterations")
    p.add_argument("--stop-on", choices=["hv", "phv"], default="hv")
    _acq_flags(p)
    p.add_argument("--resource-cap", type=int, default=None, help="subsample the pool to this size")
    p.add_argument("--refit-every", type=_positive, default=1)
    p.add_argument("--resume", type=Path, default=None, help="checkpoint to continue from")
    p.add_argument("--checkpoint-every", type=int, default=0,
                   help="rewrite checkpoint.json every k iterations (0: only at the end)")
    p.add_argument("--out-dir", default="seqpareto_run")
    p.set_defaults(handler=cmd_run)

    p = sub.add_parser("bench", help="BMSDM vs LHS/UDS/SPM/NSGA-II studies")
    _pool_flags(p)
    p.add_argument("--study", action="append", choices=bench.STUDIES)
    p.add_argument("--algo", action="append", choices=bench.ALGOS)
    p.add_argument("--scenario", action="append", choices=sorted(DEFAULT_THRESHOLDS))
    p.add_argument("--seeds", type=_positive, default=25, help="number of seeds")
    p.add_argument("--n-start", type=int, default=10)
    p.add_argument("--n-iter", type=int, default=90, help="milestone horizon")
    p.add_argument("--budget", type=int, default=100, help="stability-study budget")
    _acq_flags(p)
    p.add_argument("--refit-every", type=_positive, default=5)
    p.add_argument("--doe-step", type=_positive, default=10, help="DoE budget sweep step")
    p.add_argument("--uds-random", action="store_true", help="UDS as i.i.d. uniform sampling")
    p.add_argument("--nsga-pop", type=int, default=100)
    p.add_argument("--nsga-generations", type=int, default=9)
    p.add_argument("--convention", choices=CONVENTIONS, default="paper")
    p.add_argument("--jobs", type=_positive, default=None, help="worker processes (default: CPUs)")
    p.add_argument("--out-dir", default="seqpareto_bench")
    p.set_defaults(handler=cmd_bench)

    p = sub.add_parser("metrics", help="score an external front against a pool's true front")
    p.add_argument("--front", type=Path, required=True, help="CSV of achieved objective vectors")
    p.add_argument("--truth", type=Path, required=True, help="CSV of the pool (or its front)")
    p.add_argument("--objectives", type=_csv_list, help="objective columns (default: front header)")
    p.add_argument("--scenario", choices=sorted(DEFAULT_THRESHOLDS), default="max-max")
    p.add_argument("--directions", type=_csv_list, help="per-objective max/min, overrides --scenario")
    p.add_argument("--ref-point", type=_float_list)
    p.add_argument("--convention", choices=CONVENTIONS, default="paper")
    p.add_argument("--pool-size", type=int, default=None, help="denominator for data usage")
    p.add_argument("--out", type=Path)
    p.set_defaults(handler=cmd_metrics)

    p = sub.add_parser("gen-synth", help="write a synthetic benchmark pool as CSV")
    p.add_argument("--family", choices=[f.value for f in Family], default="concave")
    p.add_argument("--n", type=int, default=402)
    p.add_argument("--d", type=int, default=7)
    p.add_argument("--noise", type=float, default=0.01)
    p.add_argument("--scenario", choices=sorted(DEFAULT_THRESHOLDS), default="max-max")
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--out", default="synthetic_pool.csv")
    p.set_defaults(handler=cmd_gen_synth)

    p = sub.add_parser("doe", help="write a space-filling design (optionally projected onto a pool)")
    p.add_argument("--method", choices=["lhs", "uds", "spm"], required=True)
    p.add_argument("--n", type=_positive, required=True)
    p.add_argument("--d", type=_positive, required=True)
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--uds-random", action="store_true")
    p.add_argument("--pool", type=Path)
    p.add_argument("--inputs", type=_csv_list)
    p.add_argument("--objectives", type=_csv_list)
    p.add_argument("--out", default="design.csv")
    p.set_defaults(handler=cmd_doe, synthetic=None, ref_point=None)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.handler(args)
    except UsageError as exc:
        print(f"seqpareto {args.command}: usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (SeqParetoError, ValueError, OSError, ArithmeticError, RuntimeError) as exc:
        print(f"seqpareto {args.command}: error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())

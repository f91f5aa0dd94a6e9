"""Head-to-head studies: BMSDM against space-filling designs and NSGA-II.

Every study writes long-format rows (one observation per row). Aggregates
(median and quartiles over seeds) are derived from those rows and checked
for consistency whenever a report is loaded back.
"""

from __future__ import annotations

import csv
import json
import math
import os
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from . import doe
from .baselines import NsgaConfig, nsga2_run
from .data import CandidatePool, generate_synthetic_pool
from .errors import DataError
from .loop import RunConfig, run
from .metrics import evaluate

STUDIES = ("data-usage", "milestones", "stability")
ALGOS = ("bmsdm", "lhs", "uds", "spm", "nsga2")
DOE_ALGOS = ("lhs", "uds", "spm")
METRICS = ("gd", "igd", "hv", "phv", "data_usage")
RUN_COLUMNS = ("study", "algo", "scenario", "seed", "iteration", "budget", "metric", "value",
               "wall_time")
AGG_COLUMNS = ("study", "algo", "scenario", "iteration", "metric", "n", "median", "q1", "q3")
REPORT_VERSION = 1

# PHV counts as 1 when within this distance (identical fronts give exactly 1)
PHV_ONE_TOL = 1e-12


@dataclass(frozen=True)
class BenchConfig:
    studies: tuple[str, ...] = STUDIES
    algos: tuple[str, ...] = ALGOS
    scenarios: tuple[str, ...] = ("max-max", "max-min")
    n_seeds: int = 25
    base_seed: int = 0
    n_start: int = 10
    n_iter: int = 90
    budget: int = 100
    q: int = 1
    mc_samples: int = 32
    num_restarts: int = 10
    raw_samples: int = 402
    refit_every: int = 5
    doe_step: int = 10
    uds_random: bool = False
    nsga_pop: int = 100
    nsga_generations: int = 9
    convention: str = "paper"

    def __post_init__(self):
        for name, allowed in (("studies", STUDIES), ("algos", ALGOS),
                              ("scenarios", ("max-max", "max-min"))):
            values = tuple(getattr(self, name))
            object.__setattr__(self, name, values)
            bad = [v for v in values if v not in allowed]
            if bad or not values:
                raise ValueError(f"{name}: unknown or empty selection {bad or values}")
        if self.n_seeds < 1 or self.doe_step < 1:
            raise ValueError("n_seeds and doe_step must be >= 1")
        if self.budget < self.n_start + 1:
            raise ValueError("budget must exceed n_start")

    @property
    def seeds(self) -> list[int]:
        return list(range(self.base_seed, self.base_seed + self.n_seeds))

    def milestones(self) -> list[int]:
        """Iterations at which the milestone study reports: first, 25%, 50%, last."""
        its = [1, math.ceil(0.25 * self.n_iter), math.ceil(0.5 * self.n_iter), self.n_iter]
        return sorted(set(i for i in its if i >= 1))

    def run_config(self, scenario: str, seed: int, pool_size: int) -> RunConfig:
        # one campaign serves every study: it runs until PHV reaches 1
        return RunConfig(n_start=self.n_start, n_iter=(pool_size - self.n_start) // self.q,
                         q=self.q, hv_threshold=1.0 - PHV_ONE_TOL, stop_on="phv",
                         mc_samples=self.mc_samples, num_restarts=self.num_restarts,
                         raw_samples=self.raw_samples, seed=seed, scenario=scenario,
                         refit_every=self.refit_every)

    def to_dict(self) -> dict:
        return asdict(self)


def _rows(study, algo, scenario, seed, iteration, budget, values: dict, wall: float) -> list[dict]:
    return [{"study": study, "algo": algo, "scenario": scenario, "seed": seed,
             "iteration": "" if iteration is None else iteration, "budget": budget,
             "metric": k, "value": float(v), "wall_time": wall} for k, v in values.items()]


def _metrics(pool: CandidatePool, idx, cfg: BenchConfig) -> dict:
    rep = evaluate(pool.objectives[list(idx)], pool.true_front.objectives, pool.spec,
                   pool.scaler, len(set(idx)), pool.n, cfg.convention)
    return {k: getattr(rep, k) for k in METRICS}


def _design(cache: dict, method: str, n: int, d: int, seed: int, uds_random: bool) -> np.ndarray:
    key = (method, n, d, seed)
    if key not in cache:
        cache[key] = doe.generate(doe.DoeRequest(method, n, d, seed, uds_random=uds_random))
    return cache[key]


def _projected(pool: CandidatePool, cache, method, n, seed, cfg: BenchConfig) -> list[int]:
    design = _design(cache, method, n, pool.d, seed, cfg.uds_random)
    return doe.project_to_pool(design, pool.inputs, np.zeros(pool.n, dtype=bool))


def _is_full(pool: CandidatePool, idx, cfg: BenchConfig) -> bool:
    return _metrics(pool, idx, cfg)["phv"] >= 1.0 - PHV_ONE_TOL


def _nondecreasing(values) -> bool:
    return bool(np.all(np.diff(np.asarray(values, dtype=float)) >= 0.0))


def _bmsdm(pool: CandidatePool, scenario: str, seed: int, cfg: BenchConfig) -> list[dict]:
    t0 = time.perf_counter()
    state, _ = run(pool, cfg.run_config(scenario, seed, pool.n))
    wall = time.perf_counter() - t0
    order = state.consumed
    monotone = float(_nondecreasing([t.hv for t in state.hv_trace]))
    rows = []
    if "data-usage" in cfg.studies:
        hit = next((t.points_used for t in state.hv_trace if t.phv >= 1.0 - PHV_ONE_TOL), pool.n)
        rows += _rows("data-usage", "bmsdm", scenario, seed, None, hit,
                      {"data_usage": hit / pool.n, "points_used": hit,
                       "trace_monotone": monotone}, wall)
    if "milestones" in cfg.studies:
        for it in cfg.milestones():
            k = min(cfg.n_start + it * cfg.q, len(order))
            rows += _rows("milestones", "bmsdm", scenario, seed, it, k,
                          _metrics(pool, order[:k], cfg), wall)
    if "stability" in cfg.studies:
        k = min(cfg.budget, len(order))
        rows += _rows("stability", "bmsdm", scenario, seed, None, k,
                      _metrics(pool, order[:k], cfg) | {"trace_monotone": monotone}, wall)
    return rows


def _doe(pool: CandidatePool, method: str, scenario: str, seed: int, cfg: BenchConfig,
         cache: dict) -> list[dict]:
    rows = []
    if "data-usage" in cfg.studies:
        t0 = time.perf_counter()
        budgets = list(range(cfg.doe_step, pool.n, cfg.doe_step)) + [pool.n]
        hit = next(b for b in budgets if _is_full(pool, _projected(pool, cache, method, b, seed, cfg), cfg))
        rows += _rows("data-usage", method, scenario, seed, None, hit,
                      {"data_usage": hit / pool.n, "points_used": hit}, time.perf_counter() - t0)
    if "milestones" in cfg.studies:
        for it in cfg.milestones():
            t0 = time.perf_counter()
            k = cfg.n_start + it * cfg.q
            idx = _projected(pool, cache, method, k, seed, cfg)
            rows += _rows("milestones", method, scenario, seed, it, k, _metrics(pool, idx, cfg),
                          time.perf_counter() - t0)
    if "stability" in cfg.studies:
        t0 = time.perf_counter()
        idx = _projected(pool, cache, method, cfg.budget, seed, cfg)
        rows += _rows("stability", method, scenario, seed, None, cfg.budget,
                      _metrics(pool, idx, cfg), time.perf_counter() - t0)
    return rows


def _nsga(pool: CandidatePool, scenario: str, seed: int, cfg: BenchConfig) -> list[dict]:
    if "stability" not in cfg.studies:
        return []
    t0 = time.perf_counter()
    ncfg = NsgaConfig.for_scenario(scenario, pop_size=cfg.nsga_pop,
                                   generations=cfg.nsga_generations, seed=seed)
    res = nsga2_run(pool, ncfg, convention=cfg.convention)
    values = {k: getattr(res.report, k) for k in METRICS}
    values["function_evaluations"] = res.function_evaluations
    values["trace_monotone"] = float(_nondecreasing(res.hv_history))
    return _rows("stability", "nsga2", scenario, seed, None, res.unique_evaluations, values,
                 time.perf_counter() - t0)


def run_task(pools: dict[str, CandidatePool], algo: str, seed: int, cfg: BenchConfig) -> list[dict]:
    """All selected studies for one (algo, seed), every scenario."""
    rows, cache = [], {}
    for scenario in cfg.scenarios:
        pool = pools[scenario].fresh()
        if algo == "bmsdm":
            rows += _bmsdm(pool, scenario, seed, cfg)
        elif algo == "nsga2":
            rows += _nsga(pool, scenario, seed, cfg)
        else:
            rows += _doe(pool, algo, scenario, seed, cfg, cache)
    return rows


def _task_entry(args):
    return run_task(*args)


def aggregate(rows: list[dict]) -> list[dict]:
    """Median and quartiles per (study, algo, scenario, iteration, metric)."""
    groups: dict[tuple, list[float]] = {}
    for r in rows:
        key = (r["study"], r["algo"], r["scenario"], str(r["iteration"]), r["metric"])
        groups.setdefault(key, []).append(float(r["value"]))
    out = []
    for key in sorted(groups, key=_agg_sort_key):
        v = np.array(groups[key])
        finite = v[np.isfinite(v)]
        q1, med, q3 = (np.percentile(finite, [25, 50, 75]) if finite.size else (math.nan,) * 3)
        out.append(dict(zip(AGG_COLUMNS, key + (v.size, float(med), float(q1), float(q3)))))
    return out


def _agg_sort_key(key):
    study, algo, scenario, iteration, metric = key
    return (STUDIES.index(study), ALGOS.index(algo), scenario,
            int(iteration) if iteration else -1, metric)


def directional_checks(aggs: list[dict]) -> dict:
    """Ordinal comparisons of BMSDM against each baseline, per scenario."""
    med = {(a["study"], a["algo"], a["scenario"], a["metric"]): a["median"]
           for a in aggs if a["iteration"] == ""}
    checks = {}
    for (study, algo, scenario, metric), value in med.items():
        if algo == "bmsdm" or (study, metric) not in (("data-usage", "data_usage"),
                                                       ("stability", "phv")):
            continue
        ours = med.get((study, "bmsdm", scenario, metric))
        if ours is None:
            continue
        better = ours < value if metric == "data_usage" else ours > value
        checks[f"{study}/{scenario}/bmsdm_vs_{algo}/{metric}"] = {
            "bmsdm": ours, algo: value, "bmsdm_better": bool(better)}
    for scenario in ("max-max", "max-min"):
        ours = med.get(("stability", "bmsdm", scenario, "phv"))
        if ours is not None:
            checks[f"stability/{scenario}/bmsdm_phv_above_0.90"] = {
                "bmsdm": ours, "bmsdm_better": bool(ours > 0.90)}
    return checks


@dataclass
class BenchReport:
    config: BenchConfig
    rows: list[dict]
    aggregates: list[dict]
    pool_digests: dict[str, str]
    wall_time: float = 0.0
    flags: dict = field(default_factory=dict)

    @property
    def checks(self) -> dict:
        return directional_checks(self.aggregates)

    def write(self, out_dir) -> dict[str, Path]:
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        paths = {"runs": out / "bench_runs.csv", "aggregates": out / "bench_aggregates.csv",
                 "report": out / "bench_report.json"}
        _write_csv(paths["runs"], RUN_COLUMNS, self.rows)
        _write_csv(paths["aggregates"], AGG_COLUMNS, self.aggregates)
        doc = {"version": REPORT_VERSION, "config": self.config.to_dict(), "flags": self.flags,
               "pool_digests": self.pool_digests, "wall_time": self.wall_time,
               "checks": self.checks, "files": {k: p.name for k, p in paths.items()}}
        paths["report"].write_text(json.dumps(doc, indent=2, default=str) + "\n", encoding="utf-8")
        return paths


def _write_csv(path: Path, columns, rows) -> None:
    with path.open("w", newline="", encoding="utf-8") as fh:
        w = csv.DictWriter(fh, fieldnames=list(columns), extrasaction="ignore")
        w.writeheader()
        for r in rows:
            w.writerow({k: repr(v) if isinstance(v, float) else v for k, v in r.items()})


def _read_csv(path: Path) -> list[dict]:
    with path.open(newline="", encoding="utf-8") as fh:
        return list(csv.DictReader(fh))


def load_report(out_dir) -> tuple[dict, list[dict], list[dict]]:
    """Read a written report and verify its aggregates against the raw rows."""
    out = Path(out_dir)
    doc = json.loads((out / "bench_report.json").read_text(encoding="utf-8"))
    rows = _read_csv(out / doc["files"]["runs"])
    aggs = _read_csv(out / doc["files"]["aggregates"])
    fresh = aggregate(rows)
    if len(fresh) != len(aggs):
        raise DataError("aggregate file does not match the per-run rows")
    for a, b in zip(fresh, aggs):
        for col in AGG_COLUMNS:
            x, y = a[col], b[col]
            if col in ("n", "median", "q1", "q3"):
                x, y = float(x), float(y)
                if not (x == y or (math.isnan(x) and math.isnan(y))):
                    raise DataError(f"aggregate {col} mismatch for {a}")
            elif str(x) != str(y):
                raise DataError(f"aggregate key mismatch: {a} vs {b}")
    return doc, rows, aggs


def default_pools(family="concave", n=402, d=7, noise=0.01, pool_seed=0,
                  scenarios=("max-max", "max-min")) -> dict[str, CandidatePool]:
    """One synthetic pool per scenario; max-min draws with ``pool_seed + 1``.

    Separate draws keep the two scenarios from being mirror images of one pool.
    """
    offset = {"max-max": 0, "max-min": 1}
    return {sc: generate_synthetic_pool(family, n=n, d=d, noise=noise, seed=pool_seed + offset[sc],
                                        directions=sc) for sc in scenarios}


def run_bench(pools: dict[str, CandidatePool], cfg: BenchConfig, jobs: int | None = None,
              flags: dict | None = None, progress=None) -> BenchReport:
    """Fan out (algo, seed) tasks; rows are assembled in (algo, seed) order."""
    missing = [s for s in cfg.scenarios if s not in pools]
    if missing:
        raise DataError(f"no pool for scenario(s) {missing}")
    for sc in cfg.scenarios:
        if pools[sc].spec.scenario != sc:
            pools = dict(pools)
            pools[sc] = pools[sc].with_spec(sc)
    tasks = [(pools, algo, seed, cfg) for algo in cfg.algos for seed in cfg.seeds]
    jobs = jobs or os.cpu_count() or 1
    t0 = time.perf_counter()
    results = []
    if jobs == 1:
        for t in tasks:
            results.append(run_task(*t))
            if progress:
                progress(len(results), len(tasks))
    else:
        with ProcessPoolExecutor(max_workers=jobs) as ex:
            for res in ex.map(_task_entry, tasks):
                results.append(res)
                if progress:
                    progress(len(results), len(tasks))
    rows = [r for res in results for r in res]
    return BenchReport(cfg, rows, aggregate(rows), {sc: pools[sc].digest for sc in cfg.scenarios},
                       time.perf_counter() - t0, flags or {})

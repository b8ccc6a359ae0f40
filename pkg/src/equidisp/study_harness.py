"""Monte-Carlo studies of the MLE and pseudo-likelihood estimators.

Replicate ``r`` (1-based) draws its sample from ``RandomStream(base_seed, r)``,
so results do not depend on how replicates are spread across workers.
Standard errors are the Monte-Carlo standard deviations of the converged
estimates and intervals are their 2.5% / 97.5% empirical quantiles.
"""

from __future__ import annotations

import csv
import io
import json
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Iterable, Optional, Sequence

import numpy as np

from .equidisp_model import EquiDispParams, normalize, sample
from .estimation import fit_mle, fit_pmle
from .numerics import RandomStream

__all__ = [
    "ESTIMATORS",
    "PARAMS",
    "CSV_FIELDS",
    "StudyConfig",
    "ParamSummary",
    "EstimatorSummary",
    "StudySummary",
    "EmptyAggregateError",
    "run_study",
    "summary_rows",
    "summary_table",
]

ESTIMATORS = ("MLE", "PMLE")
PARAMS = ("alpha", "beta", "gamma")
CSV_FIELDS = ("n", "estimator", "param", "mean", "sd", "ci_lo", "ci_hi", "attempted", "converged")

_FITTERS = {"MLE": fit_mle, "PMLE": fit_pmle}


class EmptyAggregateError(ValueError):
    """Every replicate failed for some estimator."""


@dataclass(frozen=True)
class StudyConfig:
    truth: EquiDispParams
    sample_size: int
    replicates: int
    base_seed: int = 0
    estimators: tuple[str, ...] = ESTIMATORS
    parallelism: int = 1

    def __post_init__(self):
        if self.replicates < 2:
            raise ValueError("replicates must be >= 2")
        if self.sample_size < 5:
            raise ValueError("sample_size must be >= 5")
        if not self.estimators:
            raise ValueError("at least one estimator is required")
        unknown = set(self.estimators) - set(ESTIMATORS)
        if unknown:
            raise ValueError(f"unknown estimators {sorted(unknown)}; choose from {ESTIMATORS}")
        if self.parallelism < 1:
            raise ValueError("parallelism must be >= 1")
        if not (0 <= self.base_seed < 2**64):
            raise ValueError("base_seed must be a 64-bit unsigned integer")


@dataclass(frozen=True)
class ParamSummary:
    mean: float
    sd: float
    ci_lo: float
    ci_hi: float


@dataclass(frozen=True)
class EstimatorSummary:
    params: dict[str, ParamSummary]
    n_attempted: int
    n_converged: int
    estimates: np.ndarray = field(repr=False, compare=False)


@dataclass(frozen=True)
class StudySummary:
    truth: EquiDispParams
    sample_size: int
    per_estimator: dict[str, EstimatorSummary]
    wall_time: float = field(default=0.0, compare=False)

    def __getitem__(self, estimator: str) -> EstimatorSummary:
        return self.per_estimator[estimator]


def _replicate(args) -> tuple[int, dict[str, Optional[tuple[float, float, float]]]]:
    r, model, n, seed, estimators = args
    s = sample(model, n, RandomStream(seed, r))
    out: dict[str, Optional[tuple[float, float, float]]] = {}
    for name in estimators:
        try:
            rep = _FITTERS[name](s)
        except (ArithmeticError, ValueError):
            out[name] = None
            continue
        out[name] = tuple(rep.estimates[p] for p in PARAMS) if rep.converged else None
    return r, out


def _aggregate(values: np.ndarray) -> dict[str, ParamSummary]:
    res = {}
    for j, p in enumerate(PARAMS):
        col = values[:, j]
        lo, hi = np.percentile(col, [2.5, 97.5])
        res[p] = ParamSummary(
            mean=float(col.mean()),
            sd=float(col.std(ddof=1)) if col.size > 1 else 0.0,
            ci_lo=float(lo),
            ci_hi=float(hi),
        )
    return res


def run_study(cfg: StudyConfig) -> StudySummary:
    """Simulate, fit and summarize ``cfg.replicates`` samples.

    Replicates whose fit fails or does not converge are counted and left out
    of the aggregates.

    Raises:
        EmptyAggregateError: no replicate converged for some estimator.
    """
    t0 = time.perf_counter()
    model = normalize(cfg.truth)
    jobs = [(r, model, cfg.sample_size, cfg.base_seed, cfg.estimators)
            for r in range(1, cfg.replicates + 1)]
    if cfg.parallelism > 1:
        with ProcessPoolExecutor(max_workers=cfg.parallelism) as pool:
            results = list(pool.map(_replicate, jobs, chunksize=max(1, len(jobs) // (4 * cfg.parallelism))))
    else:
        results = [_replicate(j) for j in jobs]
    results.sort(key=lambda t: t[0])

    per: dict[str, EstimatorSummary] = {}
    for name in cfg.estimators:
        ok = [res[name] for _, res in results if res[name] is not None]
        if not ok:
            raise EmptyAggregateError(f"no converged {name} fit in {cfg.replicates} replicates")
        values = np.array(ok, dtype=float)
        per[name] = EstimatorSummary(_aggregate(values), cfg.replicates, len(ok), values)
    return StudySummary(cfg.truth, cfg.sample_size, per, time.perf_counter() - t0)


def summary_rows(sums: Iterable[StudySummary]) -> list[dict]:
    rows = []
    for s in sums:
        for est, es in s.per_estimator.items():
            for p in PARAMS:
                ps = es.params[p]
                rows.append({
                    "n": s.sample_size, "estimator": est, "param": p,
                    "mean": ps.mean, "sd": ps.sd, "ci_lo": ps.ci_lo, "ci_hi": ps.ci_hi,
                    "attempted": es.n_attempted, "converged": es.n_converged,
                })
    return rows


def summary_table(sums: Sequence[StudySummary], format: str = "csv") -> str:
    """Render summaries as CSV (6 significant digits) or JSON (full precision)."""
    if not sums:
        raise ValueError("no summaries to render")
    rows = summary_rows(sums)
    if format == "json":
        return json.dumps(rows, indent=2)
    if format != "csv":
        raise ValueError(f"unknown format {format!r}")
    buf = io.StringIO()
    w = csv.DictWriter(buf, fieldnames=CSV_FIELDS, lineterminator="\n")
    w.writeheader()
    for row in rows:
        w.writerow({k: (f"{v:.6g}" if isinstance(v, float) else v) for k, v in row.items()})
    return buf.getvalue()

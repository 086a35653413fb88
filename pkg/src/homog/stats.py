"""Correlation between metric series, permutation significance and trial aggregation."""

from __future__ import annotations

import itertools
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Mapping, Sequence

import numpy as np
from scipy.stats import rankdata

from homog._backend import kernels
from homog.outcomes import MetricValue

# |permuted| counts as "at least as extreme" within this slack of |observed|
_TIE_SLACK = 1e-12


class UndefinedCorrelationError(ValueError):
    pass


def _series(x, y, min_len: int) -> tuple[np.ndarray, np.ndarray]:
    x = np.asarray(x, dtype=np.float64).ravel()
    y = np.asarray(y, dtype=np.float64).ravel()
    if x.shape != y.shape:
        raise ValueError(f"series lengths differ: {x.size} vs {y.size}")
    if x.size < min_len:
        raise ValueError(f"need at least {min_len} points, got {x.size}")
    if not (np.isfinite(x).all() and np.isfinite(y).all()):
        raise ValueError("series contain non-finite values")
    return x, y


def _unit(v: np.ndarray) -> np.ndarray:
    c = v - v.mean()
    norm = math.sqrt(float(np.dot(c, c)))
    if norm == 0:
        raise UndefinedCorrelationError("undefined correlation: constant series")
    return np.ascontiguousarray(c / norm)


def _corr(x: np.ndarray, y: np.ndarray) -> float:
    r = float(np.dot(_unit(x), _unit(y)))
    return min(1.0, max(-1.0, r))


def pearson(x, y) -> tuple[float, float]:
    """Sample Pearson correlation and its square."""
    x, y = _series(x, y, 2)
    r = _corr(x, y)
    return r, r * r


def spearman(x, y) -> float:
    """Pearson correlation of ranks, ties sharing their average rank."""
    x, y = _series(x, y, 2)
    return _corr(rankdata(x), rankdata(y))


def permutation_pvalue(x, y, statistic: str = "pearson", iterations: int = 10_000,
                       seed: int = 0, threads: int = 1) -> float:
    """Two-sided permutation p-value for a correlation.

    Permutation ``p`` shuffles ``y`` with a stream seeded from ``(seed, p)``, so
    the result depends only on the arguments, never on ``threads``.
    """
    if statistic not in ("pearson", "spearman"):
        raise ValueError(f"unknown statistic {statistic!r}")
    if iterations < 1:
        raise ValueError("iterations must be positive")
    x, y = _series(x, y, 3)
    if statistic == "spearman":
        x, y = rankdata(x), rankdata(y)
    ux, uy = _unit(x), _unit(y)
    observed = abs(float(np.dot(ux, uy)))
    seed64 = int(seed) % 2**64

    bounds = np.linspace(0, iterations, max(1, int(threads)) + 1).astype(int)
    spans = [(a, b) for a, b in zip(bounds[:-1], bounds[1:]) if b > a]

    def count(span):
        null = kernels.permuted_statistics(ux, uy, seed64, int(span[0]), int(span[1]))
        return int(np.count_nonzero(np.abs(null) >= observed - _TIE_SLACK))

    if len(spans) == 1:
        hits = count(spans[0])
    else:
        with ThreadPoolExecutor(len(spans)) as pool:
            hits = sum(pool.map(count, spans))
    return (1 + hits) / (1 + iterations)


@dataclass(frozen=True)
class PairCorrelation:
    first: str
    second: str
    pearson_r: float | None
    pearson_r2: float | None
    spearman_rho: float | None
    p_pearson: float | None
    p_spearman: float | None
    status: str = "defined"

    def significant(self, alpha: float, statistic: str = "pearson") -> bool:
        p = self.p_pearson if statistic == "pearson" else self.p_spearman
        return p is not None and p < alpha

    def as_dict(self) -> dict:
        return {
            "first": self.first,
            "second": self.second,
            "pearson_r": self.pearson_r,
            "pearson_r2": self.pearson_r2,
            "spearman_rho": self.spearman_rho,
            "p_pearson": self.p_pearson,
            "p_spearman": self.p_spearman,
            "pearson_sig_0.05": self.significant(0.05, "pearson"),
            "pearson_sig_0.001": self.significant(0.001, "pearson"),
            "spearman_sig_0.05": self.significant(0.05, "spearman"),
            "spearman_sig_0.001": self.significant(0.001, "spearman"),
            "status": self.status,
        }


@dataclass(frozen=True)
class CorrelationReport:
    pairs: tuple[PairCorrelation, ...]
    permutations: int
    seed: int

    def get(self, first: str, second: str) -> PairCorrelation:
        for pc in self.pairs:
            if {pc.first, pc.second} == {first, second}:
                return pc
        raise KeyError((first, second))

    def as_dict(self) -> dict:
        return {
            "permutations": self.permutations,
            "seed": self.seed,
            "pairs": [pc.as_dict() for pc in self.pairs],
        }


def correlate(series: Mapping[str, Sequence[float]], pairs="all", permutations: int = 10_000,
              seed: int = 0, threads: int = 1) -> CorrelationReport:
    """Pairwise Pearson/Spearman with permutation p-values across named series."""
    names = list(series)
    if pairs == "all":
        pairs = list(itertools.combinations(names, 2))
    out = []
    for a, b in pairs:
        x, y = series[a], series[b]
        try:
            r, r2 = pearson(x, y)
            rho = spearman(x, y)
            p_r = permutation_pvalue(x, y, "pearson", permutations, seed, threads)
            p_rho = permutation_pvalue(x, y, "spearman", permutations, seed, threads)
        except UndefinedCorrelationError as exc:
            out.append(PairCorrelation(a, b, None, None, None, None, None, f"undefined: {exc}"))
            continue
        out.append(PairCorrelation(a, b, r, r2, rho, p_r, p_rho))
    return CorrelationReport(tuple(out), permutations, seed)


@dataclass(frozen=True)
class TrialAggregate:
    """Mean and standard error over trials whose metric was defined."""

    mean: float | None
    stderr: float | None
    n_trials: int
    n_excluded: int = 0
    values: tuple = field(default=())

    @property
    def single(self) -> bool:
        return self.n_trials == 1

    def as_dict(self) -> dict:
        return {
            "mean": self.mean,
            "stderr": self.stderr,
            "n_trials": self.n_trials,
            "n_excluded": self.n_excluded,
            "single_trial": self.single,
            "values": list(self.values),
        }


def _defined(v) -> float | None:
    if isinstance(v, MetricValue):
        return v.value if v.is_defined else None
    if v is None:
        return None
    v = float(v)
    return v if math.isfinite(v) else None


def aggregate_trials(values) -> TrialAggregate:
    """Mean and standard error of the mean, skipping degenerate trials.

    A single defined value gets ``stderr`` 0.
    """
    values = list(values)
    if not values:
        raise ValueError("aggregate_trials needs at least one value")
    raw = [_defined(v) for v in values]
    kept = np.array([v for v in raw if v is not None], dtype=np.float64)
    excluded = len(raw) - kept.size
    if kept.size == 0:
        return TrialAggregate(None, None, 0, excluded, tuple(raw))
    n = int(kept.size)
    mean = math.fsum(kept) / n
    stderr = 0.0 if n == 1 else math.sqrt(math.fsum((kept - mean) ** 2) / (n - 1) / n)
    return TrialAggregate(mean, stderr, n, excluded, tuple(raw))

"""Fixed versus disjoint training-data sharing studies.

Under the *fixed* protocol every task model trains on the same ``n`` rows;
under *disjoint* each of the ``k`` task models gets its own ``n`` rows from a
single draw of ``k * n``. Error rates match in expectation, so any gap in
systemic failure comes from the shared sample.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from typing import Sequence

import numpy as np

from homog import metrics
from homog.models import TrainConfig, default_config, fit_model, predict
from homog.outcomes import MetricValue, OutcomeMatrix
from homog.stats import TrialAggregate, aggregate_trials

PROTOCOLS = ("fixed", "disjoint")


class StudyConfigError(ValueError):
    pass


@dataclass(frozen=True, eq=False)
class TabularDataset:
    """Rows shared by ``k`` binary tasks, with a train/test split."""

    features: np.ndarray
    task_labels: np.ndarray          # (N, k) of 0/1
    task_names: tuple[str, ...]
    train_idx: np.ndarray
    test_idx: np.ndarray
    groups: np.ndarray | None = None
    feature_names: tuple[str, ...] = ()

    def __post_init__(self):
        n = self.features.shape[0]
        if self.task_labels.shape != (n, len(self.task_names)):
            raise ValueError("task_labels must be (rows, tasks)")
        if not np.isin(self.task_labels, (0, 1)).all():
            raise ValueError("task labels must be binary")
        if self.groups is not None and len(self.groups) != n:
            raise ValueError("one group label per row required")
        both = np.concatenate([self.train_idx, self.test_idx])
        if both.size != n or np.unique(both).size != n:
            raise ValueError("train/test split must be disjoint and cover every row")

    @property
    def n_tasks(self) -> int:
        return len(self.task_names)

    @property
    def pool_size(self) -> int:
        return int(self.train_idx.size)


def split_indices(n_rows: int, seed: int, train_fraction: float = 0.8):
    if not 0 < train_fraction < 1:
        raise ValueError("train_fraction must be in (0, 1)")
    perm = np.random.default_rng(seed).permutation(n_rows)
    cut = int(round(train_fraction * n_rows))
    return np.sort(perm[:cut]), np.sort(perm[cut:])


def synthesize_dataset(n_rows: int = 2000, d: int = 12, k: int = 3, shared_signal: float = 0.7,
                       label_noise: float = 0.15, group_count: int = 5, seed: int = 0,
                       noise: str = "shared") -> TabularDataset:
    """Gaussian features with ``k`` linear tasks that partly share a direction.

    Task ``t`` labels ``1[(s * w_shared + (1 - s) * w_t) . x + b_t > 0]`` with
    ``b_t`` mixed the same way, then flipped with probability ``label_noise``.
    With ``noise="shared"`` one flip draw per row applies to all of that row's
    tasks (an individual atypical on every outcome); ``"independent"`` draws
    per task. Groups are quantile bins of the first feature.
    """
    if noise not in ("shared", "independent"):
        raise ValueError(f"noise must be 'shared' or 'independent', got {noise!r}")
    if not (0 <= shared_signal <= 1 and 0 <= label_noise <= 1):
        raise ValueError("shared_signal and label_noise must lie in [0, 1]")
    if n_rows < 10 or d < 1 or k < 1 or group_count < 1:
        raise ValueError("invalid dataset sizes")
    rng = np.random.default_rng(seed)
    X = rng.standard_normal((n_rows, d))
    w_shared = rng.standard_normal(d)
    w_task = rng.standard_normal((k, d))
    b_shared = rng.normal(scale=0.5)
    b_task = rng.normal(scale=0.5, size=k)
    W = shared_signal * w_shared + (1 - shared_signal) * w_task
    b = shared_signal * b_shared + (1 - shared_signal) * b_task
    labels = (X @ W.T + b > 0).astype(np.int64)
    if noise == "shared":
        flips = np.repeat(rng.random((n_rows, 1)) < label_noise, k, axis=1)
    else:
        flips = rng.random((n_rows, k)) < label_noise
    labels = labels ^ flips

    cuts = np.quantile(X[:, 0], np.linspace(0, 1, group_count + 1)[1:-1])
    groups = np.array([f"g{v}" for v in np.searchsorted(cuts, X[:, 0], side="right")], dtype=object)

    train, test = split_indices(n_rows, seed + 1)
    return TabularDataset(
        features=X,
        task_labels=labels,
        task_names=tuple(f"task{t}" for t in range(k)),
        train_idx=train,
        test_idx=test,
        groups=groups,
        feature_names=tuple(f"x{i}" for i in range(d)),
    )


def sample_fixed(pool_size: int, n: int, seed: int, k: int = 1) -> list[np.ndarray]:
    """One sample of ``n`` pool positions, repeated for each of ``k`` tasks."""
    if not 0 < n <= pool_size:
        raise StudyConfigError(f"fixed protocol needs 0 < n <= {pool_size}, got n={n}")
    idx = np.random.default_rng(seed).permutation(pool_size)[:n]
    return [idx.copy() for _ in range(k)]


def sample_disjoint(pool_size: int, n: int, k: int, seed: int) -> list[np.ndarray]:
    """``k`` pairwise-disjoint samples of ``n`` pool positions."""
    if n < 1 or k * n > pool_size:
        raise StudyConfigError(
            f"disjoint protocol needs k*n <= pool size: {k}*{n} = {k * n} > {pool_size}")
    idx = np.random.default_rng(seed).permutation(pool_size)[:k * n]
    return [block.copy() for block in idx.reshape(k, n)]


def derive_seed(*components: int) -> int:
    """Mix integer components into one 64-bit seed."""
    ss = np.random.SeedSequence([int(c) % 2**64 for c in components])
    return int(ss.generate_state(1, dtype=np.uint64)[0])


@dataclass(frozen=True, eq=False)
class TrialResult:
    protocol: str
    n: int
    matrix: OutcomeMatrix
    error_rates: dict[str, float]
    fallbacks: tuple[str, ...]
    data_seed: int
    train_seed: int
    sample_index: int = 0
    seed_index: int = 0
    metrics: dict[str, MetricValue] = field(default_factory=dict)

    @property
    def expected_systemic_rate(self) -> float:
        return math.prod(self.error_rates.values())

    @property
    def observed_systemic_rate(self) -> float:
        return metrics.systemic_failure_rate(self.matrix)

    def as_dict(self) -> dict:
        return {
            "protocol": self.protocol,
            "n": self.n,
            "sample_index": self.sample_index,
            "seed_index": self.seed_index,
            "data_seed": self.data_seed,
            "train_seed": self.train_seed,
            "error_rates": dict(self.error_rates),
            "expected_systemic_rate": self.expected_systemic_rate,
            "observed_systemic_rate": self.observed_systemic_rate,
            "metrics": {k: _metric_dict(v) for k, v in self.metrics.items()},
            "fallbacks": list(self.fallbacks),
            "failures": {
                dep: "".join(str(int(v)) for v in self.matrix.failures[:, i])
                for i, dep in enumerate(self.matrix.deployment_ids)
            },
        }


def _metric_dict(v: MetricValue) -> dict:
    out = {"value": v.value, "status": v.status}
    if v.warnings:
        out["warnings"] = list(v.warnings)
    if v.worst_group is not None:
        out["worst_group"] = v.worst_group
    return out


def run_trial(dataset: TabularDataset, protocol: str, n: int, model_family: str, seed: int,
              train_seed: int | None = None, config: TrainConfig | None = None) -> TrialResult:
    """Sample training rows, fit one model per task, score the shared test split.

    ``seed`` drives the data sample and ``train_seed`` (default ``seed``) the
    model initialization; a failure is a misclassification at threshold 0.5.
    """
    k = dataset.n_tasks
    if protocol == "fixed":
        picks = sample_fixed(dataset.pool_size, n, seed, k)
    elif protocol == "disjoint":
        picks = sample_disjoint(dataset.pool_size, n, k, seed)
    else:
        raise StudyConfigError(f"unknown protocol {protocol!r}")
    if train_seed is None:
        train_seed = seed
    if config is None:
        config = default_config(model_family)
    config = replace(config, seed=train_seed % 2**63)

    X_test = dataset.features[dataset.test_idx]
    failures = np.zeros((dataset.test_idx.size, k), dtype=np.int64)
    fallbacks = []
    for t, name in enumerate(dataset.task_names):
        rows = dataset.train_idx[picks[t]]
        model, fell_back = fit_model(model_family, dataset.features[rows],
                                     dataset.task_labels[rows, t], config)
        if fell_back:
            fallbacks.append(name)
        failures[:, t] = predict(model, X_test) != dataset.task_labels[dataset.test_idx, t]

    groups = None if dataset.groups is None else dataset.groups[dataset.test_idx]
    matrix = OutcomeMatrix.from_arrays(
        failures, groups=groups,
        individual_ids=[str(j) for j in dataset.test_idx],
        deployment_ids=dataset.task_names,
    )
    rates = dict(zip(dataset.task_names, (float(r) for r in failures.mean(axis=0))))
    return TrialResult(protocol, n, matrix, rates, tuple(fallbacks), seed, train_seed)


@dataclass(frozen=True)
class StudyConfig:
    protocols: tuple[str, ...] = PROTOCOLS
    train_sizes: tuple[int, ...] = (50, 100, 200, 400)
    n_data_samples: int = 5
    n_seeds_per_sample: int = 5
    model_family: str = "logreg"
    base_seed: int = 0
    train_config: TrainConfig | None = None

    def check(self, dataset: TabularDataset) -> None:
        if self.n_data_samples < 1 or self.n_seeds_per_sample < 1:
            raise StudyConfigError("trial counts must be at least 1")
        if self.model_family not in ("logreg", "mlp"):
            raise StudyConfigError(f"unknown model family {self.model_family!r}")
        pool, k = dataset.pool_size, dataset.n_tasks
        for p in self.protocols:
            if p not in PROTOCOLS:
                raise StudyConfigError(f"unknown protocol {p!r}")
            for n in self.train_sizes:
                if n < 1:
                    raise StudyConfigError(f"training size must be positive, got {n}")
                if p == "fixed" and n > pool:
                    raise StudyConfigError(f"fixed protocol: n={n} exceeds training pool {pool}")
                if p == "disjoint" and k * n > pool:
                    raise StudyConfigError(
                        f"disjoint protocol: k*n = {k}*{n} = {k * n} exceeds training pool {pool}")

    def as_dict(self) -> dict:
        return {
            "protocols": list(self.protocols),
            "train_sizes": list(self.train_sizes),
            "n_data_samples": self.n_data_samples,
            "n_seeds_per_sample": self.n_seeds_per_sample,
            "model_family": self.model_family,
            "base_seed": self.base_seed,
            "train_config": None if self.train_config is None else dict(self.train_config.__dict__),
        }


def trial_seeds(base_seed: int, n: int, sample_index: int, seed_index: int) -> tuple[int, int]:
    """``(data_seed, train_seed)`` for one trial; identical for both protocols."""
    return (derive_seed(base_seed, n, sample_index),
            derive_seed(base_seed, n, sample_index, seed_index))


def trial_metrics(matrix: OutcomeMatrix, error_rates: dict[str, float]) -> dict[str, MetricValue]:
    out = {
        "oh_individual": metrics.homogenization_individual(matrix),
        "observed_systemic_rate": MetricValue(metrics.systemic_failure_rate(matrix)),
        "expected_systemic_rate": MetricValue(math.prod(error_rates.values())),
        "mean_error_rate": MetricValue(math.fsum(error_rates.values()) / len(error_rates)),
    }
    if matrix.groups is not None:
        for w in metrics.GroupWeighting:
            out[f"oh_group_{w.value}"] = metrics.homogenization_group(matrix, w)
    for name, r in error_rates.items():
        out[f"error_rate:{name}"] = MetricValue(r)
    return out


@dataclass(frozen=True, eq=False)
class StudyResult:
    config: StudyConfig
    trials: tuple[TrialResult, ...]
    aggregates: dict[tuple[str, int, str], TrialAggregate]
    warnings: tuple[str, ...] = ()
    dataset_info: dict = field(default_factory=dict)

    def aggregate(self, protocol: str, n: int, metric: str) -> TrialAggregate:
        return self.aggregates[(protocol, n, metric)]

    def metric_names(self) -> list[str]:
        seen = []
        for (_, _, m) in self.aggregates:
            if m not in seen:
                seen.append(m)
        return seen

    def for_protocol(self, protocol: str) -> "StudyResult":
        return StudyResult(
            config=replace(self.config, protocols=(protocol,)),
            trials=tuple(t for t in self.trials if t.protocol == protocol),
            aggregates={key: a for key, a in self.aggregates.items() if key[0] == protocol},
            warnings=tuple(w for w in self.warnings if w.startswith(f"{protocol} ")),
            dataset_info=self.dataset_info,
        )

    def as_dict(self) -> dict:
        aggs = {}
        for (p, n, m), a in self.aggregates.items():
            aggs.setdefault(p, {}).setdefault(str(n), {})[m] = a.as_dict()
        return {
            "config": {**self.config.as_dict(), "dataset": self.dataset_info},
            "per_trial": [t.as_dict() for t in self.trials],
            "aggregates": aggs,
            "warnings": list(self.warnings),
        }


def run_study(dataset: TabularDataset, config: StudyConfig = StudyConfig(), threads: int = 1,
              dataset_info: dict | None = None) -> StudyResult:
    """Run every (protocol, n, sample, seed) trial and aggregate the metrics."""
    config.check(dataset)
    specs = []
    for p in config.protocols:
        for n in config.train_sizes:
            for s in range(config.n_data_samples):
                for r in range(config.n_seeds_per_sample):
                    specs.append((p, n, s, r))

    def one(spec):
        p, n, s, r = spec
        data_seed, train_seed = trial_seeds(config.base_seed, n, s, r)
        res = run_trial(dataset, p, n, config.model_family, data_seed, train_seed, config.train_config)
        return TrialResult(
            p, n, res.matrix, res.error_rates, res.fallbacks, data_seed, train_seed, s, r,
            trial_metrics(res.matrix, res.error_rates))

    if threads > 1:
        with ThreadPoolExecutor(threads) as pool:
            trials = list(pool.map(one, specs))
    else:
        trials = [one(s) for s in specs]

    aggregates = {}
    warnings = []
    for p in config.protocols:
        for n in config.train_sizes:
            group = [t for t in trials if t.protocol == p and t.n == n]
            names = list(group[0].metrics)
            for m in names:
                agg = aggregate_trials([t.metrics[m] for t in group])
                aggregates[(p, n, m)] = agg
                if agg.n_excluded:
                    warnings.append(f"{p} n={n}: {m} degenerate in {agg.n_excluded} of {len(group)} trials")
            n_fb = sum(len(t.fallbacks) for t in group)
            if n_fb:
                warnings.append(f"{p} n={n}: {n_fb} single-class training sets used a constant classifier")
            excluded = {w for t in group for v in t.metrics.values() for w in v.warnings}
            warnings.extend(f"{p} n={n}: {w}" for w in sorted(excluded))
    return StudyResult(config, tuple(trials), aggregates, tuple(warnings), dict(dataset_info or {}))


def mean_over(result: StudyResult, protocol: str, metric: str, sizes: Sequence[int] | None = None) -> list:
    sizes = result.config.train_sizes if sizes is None else sizes
    return [result.aggregate(protocol, n, metric).mean for n in sizes]

"""Outcome matrices: who was failed by which deployment.

An :class:`OutcomeMatrix` holds ``N`` individuals by ``k`` deployments of
binary failure indicators, with an optional interaction mask, group labels
and graded losses. Every metric in :mod:`homog.metrics` consumes one.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

DEFINED = "defined"
DEGENERATE = "degenerate-zero-over-zero"


class RecordError(ValueError):
    """Raised when long-format records cannot form a matrix."""


@dataclass(frozen=True)
class MetricValue:
    """A ratio metric together with whether it is defined.

    ``value`` is ``None`` exactly when ``status`` is degenerate (0/0).
    """

    value: float | None
    status: str = DEFINED
    warnings: tuple[str, ...] = ()
    worst_group: str | None = None

    @classmethod
    def ratio(cls, num: float, den: float, **kw) -> "MetricValue":
        if den == 0:
            return cls(None, DEGENERATE, **kw)
        return cls(num / den, DEFINED, **kw)

    @property
    def is_defined(self) -> bool:
        return self.status == DEFINED

    def __float__(self) -> float:
        if not self.is_defined:
            raise ValueError("metric is degenerate (0/0) and has no value")
        return float(self.value)


@dataclass(frozen=True)
class ValidationReport:
    violations: tuple[str, ...] = ()

    @property
    def ok(self) -> bool:
        return not self.violations

    def __bool__(self) -> bool:
        return self.ok

    def __iter__(self):
        return iter(self.violations)


def _frozen(a: np.ndarray) -> np.ndarray:
    a = np.ascontiguousarray(a)
    a.setflags(write=False)
    return a


@dataclass(frozen=True, eq=False)
class OutcomeMatrix:
    """Failure indicators for ``N`` individuals across ``k`` deployments.

    Build instances with :meth:`from_arrays` or :func:`from_long_records`;
    the constructor stores what it is given. Entries where ``mask`` is false
    are non-interactions and no metric reads them.
    """

    failures: np.ndarray
    mask: np.ndarray
    groups: np.ndarray | None = None
    losses: np.ndarray | None = None
    individual_ids: tuple[str, ...] = field(default=())
    deployment_ids: tuple[str, ...] = field(default=())

    @classmethod
    def from_arrays(
        cls,
        failures,
        mask=None,
        groups=None,
        losses=None,
        individual_ids: Sequence[str] | None = None,
        deployment_ids: Sequence[str] | None = None,
    ) -> "OutcomeMatrix":
        f = np.asarray(failures)
        if f.ndim == 1:
            f = f[:, None]
        if f.ndim != 2:
            raise ValueError(f"failures must be 2-d, got shape {f.shape}")
        n, k = f.shape
        f = f.astype(np.int64)

        if mask is None:
            m = np.ones((n, k), dtype=np.int64)
        else:
            m = np.asarray(mask).astype(np.int64)
            if m.shape != (n, k):
                raise ValueError(f"mask shape {m.shape} != failures shape {(n, k)}")

        g = None
        if groups is not None:
            g = np.asarray(groups, dtype=object)
            if g.ndim == 1:
                if g.shape[0] != n:
                    raise ValueError(f"{g.shape[0]} group labels for {n} individuals")
                g = np.repeat(g[:, None], k, axis=1)
            if g.shape != (n, k):
                raise ValueError(f"groups shape {g.shape} != failures shape {(n, k)}")
            g = np.vectorize(lambda v: None if v is None else str(v), otypes=[object])(g)

        ell = None
        if losses is not None:
            ell = np.asarray(losses, dtype=np.float64)
            if ell.ndim == 1:
                ell = ell[:, None]
            if ell.shape != (n, k):
                raise ValueError(f"losses shape {ell.shape} != failures shape {(n, k)}")

        ind = tuple(str(i) for i in individual_ids) if individual_ids is not None else tuple(
            str(j) for j in range(n))
        dep = tuple(str(i) for i in deployment_ids) if deployment_ids is not None else tuple(
            str(i) for i in range(k))
        if len(ind) != n or len(dep) != k:
            raise ValueError("id lists do not match matrix shape")

        return cls(
            failures=_frozen(f),
            mask=_frozen(m),
            groups=None if g is None else _frozen(g),
            losses=None if ell is None else _frozen(ell),
            individual_ids=ind,
            deployment_ids=dep,
        )

    @property
    def n_individuals(self) -> int:
        return self.failures.shape[0]

    @property
    def n_deployments(self) -> int:
        return self.failures.shape[1]

    @property
    def fully_observed(self) -> bool:
        return bool(np.all(self.mask == 1))

    def __eq__(self, other) -> bool:
        if not isinstance(other, OutcomeMatrix):
            return NotImplemented
        if self.failures.shape != other.failures.shape:
            return False
        if self.individual_ids != other.individual_ids or self.deployment_ids != other.deployment_ids:
            return False
        if not np.array_equal(self.mask, other.mask):
            return False
        seen = self.mask == 1
        if not np.array_equal(self.failures[seen], other.failures[seen]):
            return False
        for a, b in ((self.groups, other.groups), (self.losses, other.losses)):
            if (a is None) != (b is None):
                return False
            if a is not None and list(a[seen]) != list(b[seen]):
                return False
        return True

    __hash__ = None

    def group_labels(self) -> list[str]:
        """Sorted set of labels seen on interacted entries."""
        if self.groups is None:
            return []
        return sorted({g for g in self.groups[self.mask == 1] if g is not None})

    def to_long_records(self) -> list[tuple]:
        """``(individual, deployment, failure, group, loss)`` per interaction."""
        out = []
        for j, ind in enumerate(self.individual_ids):
            for i, dep in enumerate(self.deployment_ids):
                if not self.mask[j, i]:
                    continue
                g = None if self.groups is None else self.groups[j, i]
                ell = None if self.losses is None else float(self.losses[j, i])
                out.append((ind, dep, int(self.failures[j, i]), g, ell))
        return out


def _parse_flag(value, what: str) -> int:
    if isinstance(value, str):
        value = value.strip()
        if value not in ("0", "1"):
            raise RecordError(f"{what} must be 0 or 1, got {value!r}")
        return int(value)
    if isinstance(value, (bool, np.bool_)):
        return int(value)
    if isinstance(value, (int, np.integer)) and value in (0, 1):
        return int(value)
    if isinstance(value, float) and value in (0.0, 1.0):
        return int(value)
    raise RecordError(f"{what} must be 0 or 1, got {value!r}")


def from_long_records(records: Iterable[Sequence]) -> OutcomeMatrix:
    """Build a dense matrix from ``(individual, deployment, failure, [group, [loss, [interacted]]])``.

    Individuals and deployments are ordered lexicographically by id; pairs
    with no record become non-interactions (mask 0).
    """
    cells: dict[tuple[str, str], tuple[int, str | None, float | None, int]] = {}
    has_group = has_loss = False
    for rec in records:
        rec = tuple(rec)
        if not 3 <= len(rec) <= 6:
            raise RecordError(f"record needs 3 to 6 fields, got {len(rec)}: {rec!r}")
        ind, dep, fail = str(rec[0]), str(rec[1]), rec[2]
        group = rec[3] if len(rec) > 3 else None
        loss = rec[4] if len(rec) > 4 else None
        interacted = rec[5] if len(rec) > 5 else None
        key = (ind, dep)
        if key in cells:
            raise RecordError(f"duplicate record for individual {ind!r}, deployment {dep!r}")
        fail = _parse_flag(fail, "failure")
        if group is not None and group != "":
            group = str(group)
            has_group = True
        else:
            group = None
        if loss is not None and loss != "":
            try:
                loss = float(loss)
            except (TypeError, ValueError):
                raise RecordError(f"loss is not a number: {loss!r}") from None
            if not math.isfinite(loss) or loss < 0:
                raise RecordError(f"loss must be finite and non-negative, got {loss!r}")
            has_loss = True
        else:
            loss = None
        seen = 1 if interacted is None or interacted == "" else _parse_flag(interacted, "interacted")
        cells[key] = (fail, group, loss, seen)

    if not cells:
        raise RecordError("empty matrix: no records")

    inds = sorted({i for i, _ in cells})
    deps = sorted({d for _, d in cells})
    row = {v: j for j, v in enumerate(inds)}
    col = {v: i for i, v in enumerate(deps)}
    n, k = len(inds), len(deps)
    failures = np.zeros((n, k), dtype=np.int64)
    mask = np.zeros((n, k), dtype=np.int64)
    groups = np.full((n, k), None, dtype=object) if has_group else None
    losses = np.zeros((n, k), dtype=np.float64) if has_loss else None
    for (ind, dep), (fail, group, loss, seen) in cells.items():
        j, i = row[ind], col[dep]
        failures[j, i] = fail
        mask[j, i] = seen
        if groups is not None:
            groups[j, i] = group
        if losses is not None:
            losses[j, i] = np.nan if loss is None else loss
    return OutcomeMatrix.from_arrays(failures, mask, groups, losses, inds, deps)


def validate(matrix: OutcomeMatrix) -> ValidationReport:
    """List every violated invariant; an empty report means well-formed."""
    v = []
    f, m = matrix.failures, matrix.mask
    seen = m == 1
    if f.size == 0:
        v.append("empty matrix")
    if not np.isin(m, (0, 1)).all():
        v.append("mask entries outside {0,1}")
    if not np.isin(f[seen], (0, 1)).all():
        v.append("failure entries outside {0,1}")
    ind = matrix.individual_ids or tuple(str(j) for j in range(f.shape[0]))
    dep = matrix.deployment_ids or tuple(str(i) for i in range(f.shape[1] if f.ndim == 2 else 0))
    for j in np.flatnonzero(~seen.any(axis=1)):
        v.append(f"individual with no interactions: {ind[j]}")
    for i in np.flatnonzero(~seen.any(axis=0)):
        v.append(f"deployment with no interactions: {dep[i]}")
    if matrix.losses is not None:
        ell = matrix.losses[seen]
        if np.isnan(ell).any():
            v.append("missing loss on an interacted entry")
        if np.isinf(ell).any():
            v.append("non-finite loss")
        if (ell < 0).any():
            v.append("negative loss")
    if matrix.groups is not None:
        if any(g is None for g in matrix.groups[seen]):
            v.append("missing group label on an interacted entry")
    return ValidationReport(tuple(v))

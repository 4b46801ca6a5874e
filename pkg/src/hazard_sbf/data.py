"""Survival data containers, evaluation grids and dataset validation."""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

__all__ = [
    "CONSTANT",
    "OFFSET",
    "CovariateChannel",
    "SurvivalRecord",
    "DimensionGrid",
    "EvaluationGrid",
    "SurvivalDataset",
    "DatasetError",
    "validate_dataset",
]

logger = logging.getLogger(__name__)

CONSTANT = "const"
OFFSET = "offset"
_KINDS = (CONSTANT, OFFSET)


class DatasetError(ValueError):
    """Raised when survival data violate the model's invariants."""


@dataclass(frozen=True)
class CovariateChannel:
    """A covariate path ``Z(t)``.

    ``const`` channels are constant in time, ``offset`` channels follow a
    second time scale ``Z(t) = value + t`` (for example age at entry plus
    duration).
    """

    kind: str
    value: float

    def __post_init__(self):
        if self.kind not in _KINDS:
            raise ValueError(f"kind must be one of {_KINDS}, got {self.kind!r}")
        object.__setattr__(self, "value", float(self.value))

    @classmethod
    def constant(cls, value: float) -> "CovariateChannel":
        return cls(CONSTANT, value)

    @classmethod
    def offset(cls, offset: float) -> "CovariateChannel":
        return cls(OFFSET, offset)

    def at(self, t):
        if self.kind == CONSTANT:
            return np.full_like(np.asarray(t, dtype=float), self.value)
        return self.value + np.asarray(t, dtype=float)


@dataclass(frozen=True)
class SurvivalRecord:
    entry_time: float
    exit_time: float
    event: bool
    covariates: tuple[CovariateChannel, ...] = ()

    def __post_init__(self):
        object.__setattr__(self, "covariates", tuple(self.covariates))


@dataclass(frozen=True)
class DimensionGrid:
    """Equally spaced nodes on ``[lo, hi]``."""

    lo: float
    hi: float
    n_points: int

    def __post_init__(self):
        if not (np.isfinite(self.lo) and np.isfinite(self.hi)) or self.lo >= self.hi:
            raise ValueError(f"grid needs lo < hi, got [{self.lo}, {self.hi}]")
        if int(self.n_points) < 3:
            raise ValueError(f"grid needs at least 3 points, got {self.n_points}")
        object.__setattr__(self, "lo", float(self.lo))
        object.__setattr__(self, "hi", float(self.hi))
        object.__setattr__(self, "n_points", int(self.n_points))

    @property
    def step(self) -> float:
        return (self.hi - self.lo) / (self.n_points - 1)

    @property
    def nodes(self) -> np.ndarray:
        return np.linspace(self.lo, self.hi, self.n_points)

    @property
    def weights(self) -> np.ndarray:
        """Trapezoid quadrature weights; every x-integral in the package uses them."""
        w = np.full(self.n_points, self.step)
        w[0] = w[-1] = 0.5 * self.step
        return w

    def contains(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        slack = 1e-12 * (self.hi - self.lo)
        return (x >= self.lo - slack) & (x <= self.hi + slack)


@dataclass(frozen=True)
class EvaluationGrid:
    """Grids for time (dimension 0) and each covariate."""

    dims: tuple[DimensionGrid, ...]

    def __post_init__(self):
        dims = tuple(self.dims)
        if not dims:
            raise ValueError("an evaluation grid needs at least the time dimension")
        if dims[0].lo != 0.0:
            raise ValueError("the time dimension must start at 0")
        object.__setattr__(self, "dims", dims)

    @property
    def horizon(self) -> float:
        return self.dims[0].hi

    @property
    def d(self) -> int:
        return len(self.dims) - 1

    def __len__(self):
        return len(self.dims)

    def __getitem__(self, k) -> DimensionGrid:
        return self.dims[k]

    @classmethod
    def from_domains(cls, horizon, domains, n_points=51) -> "EvaluationGrid":
        domains = list(domains)
        sizes = np.broadcast_to(np.asarray(n_points, dtype=int), (len(domains) + 1,))
        dims = [DimensionGrid(0.0, horizon, sizes[0])]
        dims += [DimensionGrid(lo, hi, m) for (lo, hi), m in zip(domains, sizes[1:])]
        return cls(tuple(dims))

    @classmethod
    def from_dataset(cls, dataset: "SurvivalDataset", n_points=51, horizon=None,
                     domains=None) -> "EvaluationGrid":
        """Grid spanning the observed data unless domains are given explicitly."""
        if horizon is None:
            horizon = float(dataset.exit.max())
        if domains is None:
            domains = []
            for k in range(dataset.d):
                if dataset.kinds[k] == CONSTANT:
                    v = dataset.values[:, k]
                    domains.append((float(v.min()), float(v.max())))
                else:
                    a = dataset.values[:, k]
                    domains.append((float((a + dataset.entry).min()),
                                    float((a + np.minimum(dataset.exit, horizon)).max())))
        return cls.from_domains(horizon, domains, n_points)


def _frozen(a, dtype=float):
    a = np.array(a, dtype=dtype, copy=True)
    a.flags.writeable = False
    return a


@dataclass(frozen=True, eq=False)
class SurvivalDataset:
    """Column-oriented survival data.

    ``values[:, k]`` holds the constant value of a ``const`` covariate or
    the offset of an ``offset`` covariate, according to ``kinds[k]``.
    """

    entry: np.ndarray
    exit: np.ndarray
    event: np.ndarray
    values: np.ndarray
    kinds: tuple[str, ...]
    n_clipped: int = 0
    n_dropped: int = 0
    names: tuple[str, ...] = field(default=())

    def __post_init__(self):
        entry = _frozen(self.entry)
        exit_ = _frozen(self.exit)
        event = _frozen(self.event, dtype=bool)
        kinds = tuple(self.kinds)
        values = np.asarray(self.values, dtype=float)
        if values.ndim < 2 and values.size == entry.size * len(kinds):
            values = values.reshape(entry.size, len(kinds))
        values = _frozen(values)
        if not (entry.shape == exit_.shape == event.shape) or entry.ndim != 1:
            raise DatasetError("entry, exit and event must be 1-d arrays of equal length")
        if values.shape != (entry.shape[0], len(kinds)):
            raise DatasetError(
                f"covariate dimension mismatch: values have shape {values.shape}, "
                f"expected ({entry.shape[0]}, {len(kinds)})")
        for kind in kinds:
            if kind not in _KINDS:
                raise DatasetError(f"unknown covariate kind {kind!r}")
        names = tuple(self.names) or tuple(f"z{k + 1}" for k in range(len(kinds)))
        object.__setattr__(self, "entry", entry)
        object.__setattr__(self, "exit", exit_)
        object.__setattr__(self, "event", event)
        object.__setattr__(self, "values", values)
        object.__setattr__(self, "kinds", kinds)
        object.__setattr__(self, "names", names)

    @property
    def n(self) -> int:
        return self.entry.shape[0]

    @property
    def d(self) -> int:
        return len(self.kinds)

    @property
    def exposure(self) -> np.ndarray:
        return self.exit - self.entry

    @property
    def total_exposure(self) -> float:
        return float(np.sum(self.exposure))

    @property
    def total_events(self) -> int:
        return int(np.sum(self.event))

    def channel(self, k):
        """Return ``(moving, x)`` for dimension ``k`` (0 is time).

        Moving channels satisfy ``X_k(s) = x + s``; static ones ``X_k(s) = x``.
        """
        if k == 0:
            return True, np.zeros(self.n)
        if self.kinds[k - 1] == OFFSET:
            return True, self.values[:, k - 1]
        return False, self.values[:, k - 1]

    def covariate_at_exit(self, k) -> np.ndarray:
        moving, x = self.channel(k)
        return x + self.exit if moving else x

    def take(self, index) -> "SurvivalDataset":
        index = np.asarray(index)
        return SurvivalDataset(self.entry[index], self.exit[index], self.event[index],
                               self.values[index], self.kinds, names=self.names)

    @classmethod
    def from_records(cls, records: Sequence[SurvivalRecord]) -> "SurvivalDataset":
        records = list(records)
        if not records:
            raise DatasetError("empty dataset")
        d = len(records[0].covariates)
        kinds = tuple(c.kind for c in records[0].covariates)
        for i, r in enumerate(records):
            if len(r.covariates) != d:
                raise DatasetError(
                    f"covariate dimension mismatch in record {i}: "
                    f"{len(r.covariates)} channels, expected {d}")
            if tuple(c.kind for c in r.covariates) != kinds:
                raise DatasetError(f"record {i} mixes channel kinds within a column")
        return cls(
            entry=[r.entry_time for r in records],
            exit=[r.exit_time for r in records],
            event=[bool(r.event) for r in records],
            values=np.array([[c.value for c in r.covariates] for r in records],
                            dtype=float).reshape(len(records), d),
            kinds=kinds,
        )

    def to_records(self) -> list[SurvivalRecord]:
        return [
            SurvivalRecord(float(self.entry[i]), float(self.exit[i]), bool(self.event[i]),
                           tuple(CovariateChannel(kind, self.values[i, k])
                                 for k, kind in enumerate(self.kinds)))
            for i in range(self.n)
        ]


def validate_dataset(data: SurvivalDataset | Iterable[SurvivalRecord],
                     grid: EvaluationGrid) -> SurvivalDataset:
    """Check a dataset against ``grid`` and clip it to the study window.

    Exits beyond the horizon are censored at the horizon. At-risk time
    during which an ``offset`` covariate lies outside its domain is cut
    away (late entry at the lower end, censoring at the upper end).
    Records left with no exposure are dropped; the counts of clipped and
    dropped records are stored on the returned dataset.

    Raises
    ------
    DatasetError
        On an empty dataset, a record with ``entry >= exit`` or negative
        entry, a covariate dimension mismatch, or a constant covariate
        outside its grid domain.
    """
    if not isinstance(data, SurvivalDataset):
        data = SurvivalDataset.from_records(list(data))
    if data.n == 0:
        raise DatasetError("empty dataset")
    if data.d != grid.d:
        raise DatasetError(
            f"covariate dimension mismatch: dataset has {data.d} covariates, grid has {grid.d}")
    entry = np.array(data.entry)
    exit_ = np.array(data.exit)
    event = np.array(data.event)
    if not np.all(np.isfinite(entry) & np.isfinite(exit_)):
        raise DatasetError("entry and exit times must be finite")
    bad = np.flatnonzero(entry >= exit_)
    if bad.size:
        raise DatasetError(
            f"zero-length exposure: record {bad[0]} has entry {entry[bad[0]]} >= exit {exit_[bad[0]]}")
    if np.any(entry < 0):
        raise DatasetError(f"record {np.flatnonzero(entry < 0)[0]} has negative entry time")
    if not np.all(np.isfinite(data.values)):
        raise DatasetError("covariate values must be finite")

    clipped = np.zeros(data.n, dtype=bool)
    horizon = grid.horizon
    over = exit_ > horizon
    clipped |= over
    exit_ = np.where(over, horizon, exit_)
    event = event & ~over

    for k in range(data.d):
        dim = grid[k + 1]
        v = data.values[:, k]
        if data.kinds[k] == CONSTANT:
            outside = ~dim.contains(v)
            if outside.any():
                i = np.flatnonzero(outside)[0]
                raise DatasetError(
                    f"constant covariate {data.names[k]} of record {i} is {v[i]}, "
                    f"outside its domain [{dim.lo}, {dim.hi}]")
        else:
            late = entry < dim.lo - v
            early = exit_ > dim.hi - v
            clipped |= late | early
            entry = np.where(late, dim.lo - v, entry)
            exit_ = np.where(early, dim.hi - v, exit_)
            event = event & ~early

    keep = exit_ > entry
    n_dropped = int(np.sum(~keep))
    n_clipped = int(np.sum(clipped & keep))
    if not keep.any():
        raise DatasetError("empty dataset after clipping to the study window")
    if n_dropped or n_clipped:
        logger.info("validate_dataset: %d records clipped, %d dropped", n_clipped, n_dropped)
    return SurvivalDataset(entry[keep], exit_[keep], event[keep], data.values[keep],
                           data.kinds, n_clipped=n_clipped, n_dropped=n_dropped,
                           names=data.names)

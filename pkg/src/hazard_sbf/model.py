"""Fit configuration, fitted additive hazards and their evaluation."""

from __future__ import annotations

import enum
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .data import EvaluationGrid
from .kernel import KernelSpec

__all__ = ["Estimator", "Norming", "FitConfig", "AdditiveFit", "evaluate_fit"]


class Estimator(str, enum.Enum):
    LC_SBF = "LC-SBF"
    LL_SBF = "LL-SBF"
    LC_BF = "LC-BF"
    LL_BF = "LL-BF"

    @property
    def local_linear(self) -> bool:
        return self in (Estimator.LL_SBF, Estimator.LL_BF)

    @property
    def smooth(self) -> bool:
        return self in (Estimator.LC_SBF, Estimator.LL_SBF)

    @classmethod
    def parse(cls, value) -> "Estimator":
        if isinstance(value, cls):
            return value
        key = str(value).strip().upper().replace("_", "-")
        for member in cls:
            if member.value == key:
                return member
        raise ValueError(f"unknown estimator {value!r}; choose from {[m.value for m in cls]}")


class Norming(str, enum.Enum):
    EXPOSURE = "exposure"
    UNIFORM = "uniform"

    @classmethod
    def parse(cls, value) -> "Norming":
        if isinstance(value, cls):
            return value
        key = str(value).strip().lower()
        aliases = {"exposureweighted": "exposure", "exposure-weighted": "exposure"}
        key = aliases.get(key, key)
        for member in cls:
            if member.value == key:
                return member
        raise ValueError(f"unknown norming {value!r}; choose 'exposure' or 'uniform'")


@dataclass(frozen=True)
class FitConfig:
    """Settings shared by all four estimators.

    ``bandwidth`` is either a single value used for every dimension or one
    value per dimension (time first).
    """

    bandwidth: float | tuple[float, ...]
    estimator: Estimator = Estimator.LL_SBF
    kernel: KernelSpec = field(default_factory=KernelSpec)
    tolerance: float = 1e-4
    tol_offset: float = 1e-4
    max_iterations: int = 500
    norming: Norming = Norming.EXPOSURE
    quadrature_order: int = 16

    def __post_init__(self):
        object.__setattr__(self, "estimator", Estimator.parse(self.estimator))
        object.__setattr__(self, "norming", Norming.parse(self.norming))
        bw = self.bandwidth
        bw = (float(bw),) if np.ndim(bw) == 0 else tuple(float(b) for b in bw)
        if not all(b > 0 for b in bw):
            raise ValueError(f"bandwidth must be positive, got {self.bandwidth}")
        object.__setattr__(self, "bandwidth", bw[0] if len(bw) == 1 else bw)
        if not self.tolerance > 0:
            raise ValueError(f"tolerance must be positive, got {self.tolerance}")
        if not self.tol_offset >= 0:
            raise ValueError(f"tol_offset must be non-negative, got {self.tol_offset}")
        if int(self.max_iterations) < 1:
            raise ValueError(f"max_iterations must be >= 1, got {self.max_iterations}")
        if int(self.quadrature_order) < 1:
            raise ValueError(f"quadrature_order must be >= 1, got {self.quadrature_order}")

    def bandwidths(self, grid: EvaluationGrid) -> tuple[float, ...]:
        """Per-dimension bandwidths, checked against the grid domains."""
        if np.ndim(self.bandwidth) and len(self.bandwidth) != len(grid):
            raise ValueError(
                f"got {len(self.bandwidth)} bandwidths for {len(grid)} dimensions")
        bw = np.broadcast_to(np.asarray(self.bandwidth, dtype=float), (len(grid),))
        for k, (h, dim) in enumerate(zip(bw, grid.dims)):
            if not h < 0.5 * (dim.hi - dim.lo):
                raise ValueError(
                    f"bandwidth {h} for dimension {k} must be below half the domain "
                    f"width {(dim.hi - dim.lo) / 2}")
        return tuple(float(h) for h in bw)


@dataclass(frozen=True, eq=False)
class AdditiveFit:
    """A fitted additive hazard ``intercept + sum_k components[k](x_k)``.

    ``weights[k]`` is the centering weight on grid ``k`` (exposure or ones);
    each component integrates to zero against it. ``derivatives`` are the
    coefficients of ``(x - X)/h`` in the local expansion, i.e. minus the
    bandwidth times the slope.
    """

    intercept: float
    components: tuple[np.ndarray, ...]
    grid: EvaluationGrid
    weights: tuple[np.ndarray, ...]
    estimator: Estimator
    bandwidth: tuple[float, ...]
    derivatives: Optional[tuple[np.ndarray, ...]] = None
    iterations_used: int = 0
    converged: bool = True
    final_criterion: float = 0.0
    diverged: bool = False
    unsupported: tuple[np.ndarray, ...] = ()
    norming: Norming = Norming.EXPOSURE

    def __post_init__(self):
        comps = tuple(np.asarray(c, dtype=float) for c in self.components)
        if len(comps) != len(self.grid):
            raise ValueError("one component per grid dimension is required")
        for c, dim in zip(comps, self.grid.dims):
            if c.shape != (dim.n_points,):
                raise ValueError("component length does not match its grid")
        object.__setattr__(self, "components", comps)
        object.__setattr__(self, "weights", tuple(np.asarray(w, dtype=float) for w in self.weights))
        if self.derivatives is not None:
            object.__setattr__(self, "derivatives",
                               tuple(np.asarray(c, dtype=float) for c in self.derivatives))
        if not self.unsupported:
            object.__setattr__(self, "unsupported",
                               tuple(np.zeros(dim.n_points, dtype=bool) for dim in self.grid.dims))
        object.__setattr__(self, "estimator", Estimator.parse(self.estimator))
        object.__setattr__(self, "norming", Norming.parse(self.norming))

    @property
    def slopes(self) -> Optional[tuple[np.ndarray, ...]]:
        """Derivative curves per unit of ``x``."""
        if self.derivatives is None:
            return None
        return tuple(-dv / h for dv, h in zip(self.derivatives, self.bandwidth))

    def centering_residual(self, k) -> float:
        """Relative violation of the k-th identification constraint."""
        w = self.grid[k].weights * self.weights[k]
        return abs(float(np.sum(self.components[k] * w))) / float(np.sum(w))

    def component(self, k, x) -> np.ndarray:
        dim = self.grid[k]
        x = np.asarray(x, dtype=float)
        if not np.all(dim.contains(x)):
            raise ValueError(f"points outside [{dim.lo}, {dim.hi}] for dimension {k}")
        return np.interp(x, dim.nodes, self.components[k])

    def __call__(self, x):
        return evaluate_fit(self, x)


def evaluate_fit(fit: AdditiveFit, x) -> np.ndarray | float:
    """Hazard at points ``x = (t, z_1, ..., z_d)``; no extrapolation.

    Accepts a single point or an array of shape ``(m, d + 1)``.
    """
    pts = np.asarray(x, dtype=float)
    single = pts.ndim == 1
    pts = np.atleast_2d(pts)
    if pts.shape[1] != len(fit.grid):
        raise ValueError(f"points need {len(fit.grid)} coordinates, got {pts.shape[1]}")
    out = np.full(pts.shape[0], fit.intercept)
    for k in range(len(fit.grid)):
        out += fit.component(k, pts[:, k])
    return float(out[0]) if single else out


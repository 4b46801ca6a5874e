"""Synthetic additive-hazard survival data.

The hazard is ``s * exp(r t) + (a / sqrt(d)) * sum_k (-1)^(k+1) sin(pi z_k)``
with covariates ``2.5 / pi * arctan`` of equicorrelated Gaussians. Each
subject has its own random stream keyed by ``(seed, index)``.
"""

from __future__ import annotations

import hashlib
from dataclasses import asdict, dataclass, replace
from functools import lru_cache
from typing import Optional

import numpy as np

from .data import CONSTANT, EvaluationGrid, SurvivalDataset

__all__ = [
    "COVARIATE_BOUND",
    "SimConfig",
    "TrueHazard",
    "draw_covariates",
    "sample_survival_time",
    "invert_cumulative_hazard",
    "simulate_dataset",
    "default_horizon",
    "scenario_grid",
    "replication_seed",
]

COVARIATE_BOUND = 1.25
MAX_REJECTIONS = 100_000
_PILOT_SIZE = 20_000


@dataclass(frozen=True)
class SimConfig:
    """Scenario parameters.

    ``horizon=None`` means the 99th percentile of the observed exit time,
    estimated once per scenario by a pilot simulation.
    """

    n: int
    d: int
    rho: float = 0.5
    gompertz_rate: float = 0.01
    amplitude: float = 4.0
    censor_scale_divisor: float = 1.75
    horizon: Optional[float] = None
    seed: int = 0
    baseline_scale: float = 1.0

    def __post_init__(self):
        if int(self.n) < 1:
            raise ValueError(f"n must be >= 1, got {self.n}")
        if int(self.d) < 1:
            raise ValueError(f"d must be >= 1, got {self.d}")
        if not -1 < self.rho < 1:
            raise ValueError(f"rho must lie in (-1, 1), got {self.rho}")
        if self.d > 1 and self.rho < -1.0 / (self.d - 1):
            raise ValueError(f"rho={self.rho} gives no valid correlation matrix for d={self.d}")
        if not self.censor_scale_divisor > 0:
            raise ValueError(f"censor_scale_divisor must be positive, got {self.censor_scale_divisor}")
        if self.baseline_scale < 0 or self.amplitude < 0:
            raise ValueError("baseline_scale and amplitude must be non-negative")
        if self.amplitude == 0 and self.baseline_scale == 0:
            raise ValueError("the hazard is identically zero")
        if self.horizon is not None and not self.horizon > 0:
            raise ValueError(f"horizon must be positive, got {self.horizon}")
        if not 0 <= int(self.seed) < 2 ** 64:
            raise ValueError(f"seed must be a 64-bit unsigned integer, got {self.seed}")

    @property
    def truth(self) -> "TrueHazard":
        return TrueHazard(self.d, self.gompertz_rate, self.amplitude, self.baseline_scale)

    def resolved(self) -> "SimConfig":
        """Copy with the horizon filled in."""
        if self.horizon is not None:
            return self
        return replace(self, horizon=default_horizon(self))

    def digest(self) -> str:
        text = ";".join(f"{k}={v!r}" for k, v in sorted(asdict(self).items()))
        return hashlib.sha256(text.encode()).hexdigest()[:16]


@dataclass(frozen=True)
class TrueHazard:
    d: int
    gompertz_rate: float = 0.01
    amplitude: float = 4.0
    baseline_scale: float = 1.0

    @property
    def scale(self) -> float:
        return self.amplitude / np.sqrt(self.d)

    def baseline(self, t):
        return self.baseline_scale * np.exp(self.gompertz_rate * np.asarray(t, dtype=float))

    def component(self, k, z):
        """Covariate effect ``k`` (1-based), uncentered."""
        if not 1 <= k <= self.d:
            raise ValueError(f"component index must be in 1..{self.d}, got {k}")
        sign = 1.0 if k % 2 == 1 else -1.0
        return sign * self.scale * np.sin(np.pi * np.asarray(z, dtype=float))

    def covariate_effect(self, z):
        """``c(z)``, the sum of covariate effects; ``z`` has shape ``(..., d)``."""
        z = np.asarray(z, dtype=float)
        signs = np.where(np.arange(self.d) % 2 == 0, 1.0, -1.0)
        return self.scale * np.sum(signs * np.sin(np.pi * z), axis=-1)

    def hazard(self, t, z):
        return self.baseline(t) + self.covariate_effect(z)

    def cumulative(self, t, z):
        return self.covariate_effect(z) * np.asarray(t, dtype=float) + _baseline_cumulative(
            np.asarray(t, dtype=float), self.gompertz_rate, self.baseline_scale)


def _baseline_cumulative(t, rate, scale):
    if rate == 0:
        return scale * t
    return scale * np.expm1(rate * t) / rate


def _latent_gaussians(d, rho, rng):
    if rho >= 0:
        return np.sqrt(rho) * rng.standard_normal() + np.sqrt(1 - rho) * rng.standard_normal(d)
    cov = np.full((d, d), rho) + (1 - rho) * np.eye(d)
    return np.linalg.cholesky(cov) @ rng.standard_normal(d)


def draw_covariates(config: SimConfig, rng: np.random.Generator) -> np.ndarray:
    """One covariate vector, redrawn until the covariate effect is positive."""
    truth = config.truth
    for _ in range(MAX_REJECTIONS):
        z = 2.5 / np.pi * np.arctan(_latent_gaussians(config.d, config.rho, rng))
        if config.amplitude == 0 or truth.covariate_effect(z) > 0:
            return z
    raise RuntimeError(f"no admissible covariate vector after {MAX_REJECTIONS} draws")


def invert_cumulative_hazard(c, target, rate, scale, tol=1e-12):
    """Solve ``c t + scale (e^{rate t} - 1)/rate = target`` for ``t`` elementwise."""
    c = np.asarray(c, dtype=float)
    target = np.asarray(target, dtype=float)
    c, target = np.broadcast_arrays(c, target)

    def lam(t):
        return c * t + _baseline_cumulative(t, rate, scale)

    def dlam(t):
        return c + scale * np.exp(rate * t)

    lo = np.zeros(target.shape)
    hi = np.ones(target.shape)
    while True:
        short = lam(hi) < target
        if not short.any():
            break
        hi = np.where(short, 2 * hi, hi)
    for _ in range(60):
        mid = 0.5 * (lo + hi)
        below = lam(mid) < target
        lo = np.where(below, mid, lo)
        hi = np.where(below, hi, mid)
    t = 0.5 * (lo + hi)
    for _ in range(8):
        resid = lam(t) - target
        if np.all(np.abs(resid) <= tol * np.maximum(1.0, np.abs(target))):
            break
        t = np.clip(t - resid / dlam(t), lo, hi)
    return t


def sample_survival_time(z, config: SimConfig, rng: np.random.Generator) -> float:
    truth = config.truth
    target = -np.log(rng.uniform())
    return float(invert_cumulative_hazard(truth.covariate_effect(z), target,
                                          config.gompertz_rate, config.baseline_scale))


def _draw_subjects(config: SimConfig, seed: int, n: int):
    truth = config.truth
    z = np.empty((n, config.d))
    u = np.empty((n, 2))
    for i in range(n):
        rng = np.random.default_rng([int(seed), i])
        z[i] = draw_covariates(config, rng)
        u[i] = rng.uniform(size=2)
    c = truth.covariate_effect(z)
    t = invert_cumulative_hazard(c, -np.log(u[:, 0]), config.gompertz_rate, config.baseline_scale)
    t2 = invert_cumulative_hazard(c, -np.log(u[:, 1]), config.gompertz_rate, config.baseline_scale)
    return z, t, t2 / config.censor_scale_divisor


@lru_cache(maxsize=64)
def _pilot_horizon(d, rho, rate, amplitude, baseline_scale, divisor):
    cfg = SimConfig(n=_PILOT_SIZE, d=d, rho=rho, gompertz_rate=rate, amplitude=amplitude,
                    baseline_scale=baseline_scale, censor_scale_divisor=divisor, horizon=1.0)
    key = int.from_bytes(hashlib.sha256(repr((d, rho, rate, amplitude, baseline_scale, divisor))
                                        .encode()).digest()[:8], "little")
    _, t, cens = _draw_subjects(cfg, key, _PILOT_SIZE)
    return float(np.quantile(np.minimum(t, cens), 0.99))


def default_horizon(config: SimConfig) -> float:
    """99th percentile of the observed exit time ``min(T, C)``.

    Independent of ``config.seed`` and ``n``.
    """
    return _pilot_horizon(config.d, float(config.rho), float(config.gompertz_rate),
                          float(config.amplitude), float(config.baseline_scale),
                          float(config.censor_scale_divisor))


def simulate_dataset(config: SimConfig, seed: Optional[int] = None):
    """Draw one dataset; returns ``(dataset, truth)``.

    ``seed`` overrides ``config.seed``. Entry is 0; exits beyond the
    horizon are censored there.
    """
    config = config.resolved()
    seed = config.seed if seed is None else seed
    z, t, cens = _draw_subjects(config, seed, config.n)
    exit_ = np.minimum(np.minimum(t, cens), config.horizon)
    event = (t <= cens) & (t <= config.horizon)
    ds = SurvivalDataset(entry=np.zeros(config.n), exit=exit_, event=event, values=z,
                         kinds=(CONSTANT,) * config.d)
    return ds, config.truth


def scenario_grid(config: SimConfig, n_points: int = 51) -> EvaluationGrid:
    config = config.resolved()
    return EvaluationGrid.from_domains(
        config.horizon, [(-COVARIATE_BOUND, COVARIATE_BOUND)] * config.d, n_points=n_points)


def replication_seed(seed: int, rep: int) -> int:
    return int(np.random.SeedSequence([int(seed), int(rep)]).generate_state(1, np.uint64)[0])

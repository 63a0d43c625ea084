"""Langevin baselines: Euler-Maruyama for ``dX = -grad g(X)/2 dt + dB`` and slope fits."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

from .cloud import ParticleCloud, make_rng
from .scheme import ld_step_gaussian

__all__ = ["DEFAULT_SUBSTEPS", "DriftSpec", "euler_maruyama", "fitted_slope", "ld_step_gaussian", "ou_drift"]

DEFAULT_SUBSTEPS = 100


@dataclass(frozen=True)
class DriftSpec:
    """``grad_g`` maps an ``(n, d)`` array to ``grad g`` at each row, for ``rho = exp(-g)``."""

    grad_g: Callable[[np.ndarray], np.ndarray]
    tag: str = ""


def ou_drift(var: float = 1.0) -> DriftSpec:
    """Drift whose stationary law is ``N(0, var I)``: ``grad g(x) = x / var``."""
    return DriftSpec(lambda x: x / var, tag=f"ou(var={var:g})")


def euler_maruyama(
    drift: DriftSpec, start: ParticleCloud, duration: float, substeps: int = DEFAULT_SUBSTEPS, seed: int = 0
) -> ParticleCloud:
    """Advance every particle by ``duration`` in ``substeps`` equal Euler-Maruyama steps.

    Particle order is preserved, so row ``i`` of the output is the path of row
    ``i`` of ``start``. Noise is drawn step by step from one seeded stream.
    """
    if substeps < 1:
        raise ValueError(f"substeps must be >= 1, got {substeps}")
    if duration < 0:
        raise ValueError(f"duration must be non-negative, got {duration}")
    if duration == 0:
        return start
    h = duration / substeps
    rng = make_rng(seed)
    x = np.array(start.points, dtype=float)
    sqrt_h = np.sqrt(h)
    for _ in range(substeps):
        g = np.asarray(drift.grad_g(x), dtype=float).reshape(x.shape)
        bad = ~np.isfinite(g)
        if bad.any():
            idx = int(np.argmax(bad.any(axis=1)))
            raise FloatingPointError(f"drift {drift.tag or '<anonymous>'} is not finite at particle {idx}")
        x = x - 0.5 * h * g + sqrt_h * rng.standard_normal(x.shape)
    return ParticleCloud(x)


def fitted_slope(inputs, outputs) -> float:
    """Least-squares slope through the origin, ``sum(x y) / sum(x^2)``."""
    x = np.asarray(inputs, dtype=float).ravel()
    y = np.asarray(outputs, dtype=float).ravel()
    if x.shape != y.shape:
        raise ValueError(f"length mismatch: {x.size} inputs vs {y.size} outputs")
    if x.size < 2:
        raise ValueError("need at least two points")
    sxx = float(x @ x)
    if sxx == 0.0:
        raise ValueError("inputs are all zero; slope is undefined")
    return float(x @ y) / sxx

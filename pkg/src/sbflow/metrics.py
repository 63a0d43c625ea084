"""Distances and error summaries for scheme-vs-flow comparisons."""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Callable, Sequence

import numpy as np

from . import gaussian as G
from .cloud import MixtureSpec, ParticleCloud, sample_exact_heat
from .gaussian import Functional, GaussianState
from .scheme import FlowTrajectory, eval_at

__all__ = [
    "NOISE_MULTIPLIER",
    "ErrorReport",
    "GaussianReference",
    "HeatReference",
    "bootstrap_std",
    "compare_trajectories",
    "derive_seeds",
    "interpolant_sup_error",
    "noise_floor",
    "w2_empirical_1d",
]

NOISE_MULTIPLIER = 3.0


def _as_1d(c: ParticleCloud | np.ndarray) -> np.ndarray:
    pts = c.points if isinstance(c, ParticleCloud) else np.asarray(c, dtype=float)
    if pts.ndim == 2:
        if pts.shape[1] != 1:
            raise ValueError(f"w2_empirical_1d needs d = 1, got d = {pts.shape[1]}")
        pts = pts[:, 0]
    return pts


def w2_empirical_1d(a: ParticleCloud, b: ParticleCloud) -> float:
    """Exact W2 between uniform empirical measures on the line (monotone matching).

    For unequal sizes both quantile functions are read off on the midpoint grid
    ``(k + 1/2) / N`` with ``N = max(n_a, n_b)``.
    """
    xa, xb = np.sort(_as_1d(a)), np.sort(_as_1d(b))
    if xa.size != xb.size:
        size = max(xa.size, xb.size)
        u = (np.arange(size) + 0.5) / size
        xa = xa[np.minimum((u * xa.size).astype(int), xa.size - 1)]
        xb = xb[np.minimum((u * xb.size).astype(int), xb.size - 1)]
    return float(np.sqrt(np.mean((xa - xb) ** 2)))


def derive_seeds(seed: int, count: int) -> list[int]:
    """``count`` independent 63-bit seeds from one master seed."""
    state = np.random.SeedSequence(seed).generate_state(count, dtype=np.uint64)
    return [int(s >> np.uint64(1)) for s in state]


def noise_floor(spec: MixtureSpec, t: float, n: int, trials: int, seed: int) -> float:
    """Mean W2 between two independent ``n``-samples of the heat flow at ``t``."""
    if trials < 2:
        raise ValueError(f"trials must be >= 2, got {trials}")
    seeds = derive_seeds(seed, 2 * trials)
    vals = [
        w2_empirical_1d(sample_exact_heat(spec, t, n, seeds[2 * k]), sample_exact_heat(spec, t, n, seeds[2 * k + 1]))
        for k in range(trials)
    ]
    return float(np.mean(vals))


@dataclass
class ErrorReport:
    times: list[float]
    errors: list[float]
    noise_floor: list[float] | None = None
    seeds_used: list[int] = field(default_factory=list)
    multiplier: float = NOISE_MULTIPLIER

    def __post_init__(self) -> None:
        if len(self.times) != len(self.errors):
            raise ValueError("times and errors must have equal length")
        if self.noise_floor is not None and len(self.noise_floor) != len(self.times):
            raise ValueError("noise_floor must match times")

    @property
    def sup_error(self) -> float:
        return max(self.errors) if self.errors else 0.0

    def within_noise(self) -> bool:
        """Every error at most ``multiplier`` times its noise floor."""
        if self.noise_floor is None:
            raise ValueError("report has no noise floor")
        return all(e <= self.multiplier * nf for e, nf in zip(self.errors, self.noise_floor))

    def to_csv(self, path: str | Path | None = None) -> str:
        rows = ["time,w2,noise_floor"]
        nf = self.noise_floor or [float("nan")] * len(self.times)
        rows += [f"{t:.17g},{e:.17g},{f:.17g}" for t, e, f in zip(self.times, self.errors, nf)]
        text = "\n".join(rows) + "\n"
        if path is not None:
            Path(path).write_text(text)
        return text

    def to_json(self, path: str | Path | None = None) -> str:
        d = asdict(self)
        d["sup_error"] = self.sup_error
        text = json.dumps(d, indent=2, sort_keys=True) + "\n"
        if path is not None:
            Path(path).write_text(text)
        return text


@dataclass(frozen=True)
class HeatReference:
    """Exact heat flow from a mixture, compared by fresh samples (particle mode)."""

    spec: MixtureSpec
    seed: int
    n: int | None = None
    floor_trials: int = 0


@dataclass(frozen=True)
class GaussianReference:
    functional: Functional
    initial: GaussianState


def compare_trajectories(
    traj: FlowTrajectory, reference: HeatReference | GaussianReference, times: Sequence[float]
) -> ErrorReport:
    """W2 between the piecewise-constant scheme and the reference flow at ``times``."""
    times = [float(t) for t in times]
    first = traj.states[0]
    if isinstance(reference, GaussianReference):
        if not isinstance(first, GaussianState):
            raise TypeError("Gaussian reference needs a Gaussian-mode trajectory")
        errs = [G.w2_isotropic(eval_at(traj, t), G.exact_flow(reference.functional, reference.initial, t)) for t in times]
        return ErrorReport(times, errs)
    if not isinstance(first, ParticleCloud):
        raise TypeError("heat reference needs a particle-mode trajectory")
    seeds = derive_seeds(reference.seed, 2 * len(times))
    errs, floors = [], []
    for k, t in enumerate(times):
        cloud = eval_at(traj, t)
        n = reference.n or cloud.n
        errs.append(w2_empirical_1d(cloud, sample_exact_heat(reference.spec, t, n, seeds[2 * k])))
        if reference.floor_trials:
            floors.append(noise_floor(reference.spec, t, n, reference.floor_trials, seeds[2 * k + 1]))
    return ErrorReport(times, errs, floors or None, seeds)


def interpolant_sup_error(traj: FlowTrajectory, functional: Functional, initial: GaussianState | None = None) -> ErrorReport:
    """Supremum over ``[0, T]`` of W2 between the step interpolant and the exact Gaussian flow.

    On each piece ``[k eps, (k+1) eps)`` the exact variance is monotone, so the
    supremum is attained at the left end or approached at the right end; both
    are evaluated. The reported ``times`` list those endpoints.
    """
    initial = initial or traj.states[0]
    eps, T = traj.epsilon, traj.horizon
    times, errs = [], []
    for k, state in enumerate(traj.states):
        left = k * eps
        right = min((k + 1) * eps, T)
        for t in (left, right):
            times.append(t)
            errs.append(G.w2_isotropic(state, G.exact_flow(functional, initial, t)))
    return ErrorReport(times, errs)


def bootstrap_std(
    statistic: Callable[..., float], arrays: Sequence[np.ndarray], n_boot: int = 200, seed: int = 0
) -> float:
    """Standard deviation of ``statistic`` over row-resampled copies of ``arrays``."""
    arrays = [np.asarray(a) for a in arrays]
    n = arrays[0].shape[0]
    rng = np.random.Generator(np.random.PCG64(seed))
    vals = np.empty(n_boot)
    for b in range(n_boot):
        idx = rng.integers(0, n, n)
        vals[b] = statistic(*(a[idx] for a in arrays))
    return float(np.std(vals, ddof=1))

"""Step maps and trajectories for the bridge scheme and its explicit-Euler shadow.

A scheme step moves a measure by one temperature ``eps`` along a flow. The
bridge (SB) step for a velocity ``grad u`` picks a surrogate measure
``sigma ~ exp(2 theta u)`` with ``theta = +-1`` and pushes the current measure
through ``(1 - 1/theta) Id + (1/theta) b_sigma``, where ``b_sigma`` is the
barycentric projection of the equal-marginal bridge of ``sigma``:

* ``theta = -1``: ``x -> 2x - b_sigma(x)``
* ``theta = +1``: ``x -> b_sigma(x)``

On Gaussians everything is linear, so each step is a slope and an offset.
"""

from __future__ import annotations

import enum
import json
import math
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Callable, Sequence

import numpy as np

from . import gaussian as G
from .cloud import GENERATOR_ID, ParticleCloud
from .gaussian import Functional, GaussianState, Variant
from .sinkhorn import DEFAULT_MAX_ITER, DEFAULT_TOL, SinkhornError, barycentric_projection, solve_symmetric

__all__ = [
    "FlowTrajectory",
    "Method",
    "Mode",
    "SchemeConfig",
    "StabilityError",
    "StepFailure",
    "euler_step_gaussian",
    "euler_step_particles",
    "eval_at",
    "ld_step_gaussian",
    "n_steps",
    "run_scheme",
    "sb_step_gaussian",
    "sb_step_particles_heat",
    "sb_step_particles_reverse_heat",
]

ScoreFn = Callable[[np.ndarray, float], np.ndarray]


class StabilityError(ValueError):
    """A reverse-time (or oversized) step would collapse or invert the measure."""


class StepFailure(RuntimeError):
    """Wraps a failure raised while computing step ``step`` of a run."""

    def __init__(self, step: int, cause: Exception):
        super().__init__(f"step {step} failed: {cause}")
        self.step = step
        self.cause = cause


class Mode(str, enum.Enum):
    PARTICLE = "particle"
    GAUSSIAN = "gaussian"


class Method(str, enum.Enum):
    SB = "sb"
    EULER = "euler"
    LANGEVIN = "langevin"


def _floor_ratio(t: float, eps: float) -> int:
    """``floor(t / eps)`` that treats ``t = k * eps`` as exactly ``k`` despite rounding."""
    r = t / eps
    k = round(r)
    if abs(r - k) <= 1e-9 * max(1.0, abs(r)):
        return int(k)
    return math.floor(r)


def n_steps(horizon: float, epsilon: float) -> int:
    return _floor_ratio(horizon, epsilon)


# --------------------------------------------------------------------------- Gaussian steps


def _surrogate(state: GaussianState, variant: Variant) -> tuple[int, float, tuple[float, ...]] | None:
    """``(theta, surrogate var, surrogate mean)``; ``None`` when the velocity is a pure drift."""
    v, mu = state.var, state.mean
    if variant is Variant.ENTROPY:
        return -1, v, mu
    if variant is Variant.REVERSE_ENTROPY:
        return 1, v, mu
    if v == 1.0:
        return None
    # KL to N(0, I): sigma ~ rho e^g when var < 1, rho^-1 e^-g when var > 1.
    if v < 1.0:
        s, m = v / (1.0 - v), tuple(x / (1.0 - v) for x in mu)
        theta = -1 if variant is Variant.KL else 1
    else:
        s, m = v / (v - 1.0), tuple(-x / (v - 1.0) for x in mu)
        theta = 1 if variant is Variant.KL else -1
    return theta, s, m


def _linear_step(
    state: GaussianState, epsilon: float, f: Functional, slope_fn: Callable[[float, float], float]
) -> GaussianState:
    if not epsilon > 0:
        raise ValueError(f"epsilon must be positive, got {epsilon}")
    sur = _surrogate(state, f.variant)
    if sur is None:
        # var == 1 under a KL variant: the velocity is the constant -mu/2 (or +mu/2).
        sign = -1.0 if f.variant is Variant.KL else 1.0
        return state.with_(mean=[m * (1.0 + sign * 0.5 * epsilon) for m in state.mean])
    theta, s, m = sur
    c = slope_fn(s, epsilon)
    if theta == -1:
        slope = 2.0 - c
        mean = [2.0 * x - y - c * (x - y) for x, y in zip(state.mean, m)]
    else:
        slope = c
        mean = [y + c * (x - y) for x, y in zip(state.mean, m)]
    return GaussianState(tuple(mean), slope * slope * state.var)


def sb_step_gaussian(state: GaussianState, epsilon: float, f: Functional) -> GaussianState:
    """One bridge step on ``N(mu, var I)`` using the closed-form bridge slope ``c_eps``."""
    return _linear_step(state, epsilon, f, G.c_eps)


def _ou_slope(s: float, epsilon: float) -> float:
    return math.exp(-epsilon / (2.0 * s))


def ld_step_gaussian(
    state: GaussianState, epsilon: float, f: Functional | None = None
) -> GaussianState:
    """Same construction as :func:`sb_step_gaussian` but with the Langevin pair.

    The bridge slope is replaced by the OU conditional-expectation slope
    ``exp(-eps / (2 s))``. Defaults to the heat flow.
    """
    if epsilon == 0:
        return state
    return _linear_step(state, epsilon, f or Functional(Variant.ENTROPY), _ou_slope)


def euler_step_gaussian(state: GaussianState, epsilon: float, f: Functional) -> GaussianState:
    """Explicit Euler pushforward ``(Id + eps v)_# rho`` with the exact Gaussian velocity.

    Heat flow ``v = -grad log rho / 2``; KL flow ``v = -(grad log rho + x) / 2``;
    reverse variants negate ``v``.
    """
    if not epsilon > 0:
        raise ValueError(f"epsilon must be positive, got {epsilon}")
    v = state.var
    sign = -1.0 if f.variant.is_reverse else 1.0
    if f.variant.is_kl:
        slope = 1.0 + sign * epsilon * (1.0 - v) / (2.0 * v)
        mean = [m * (1.0 - sign * 0.5 * epsilon) for m in state.mean]
    else:
        slope = 1.0 + sign * epsilon / (2.0 * v)
        mean = list(state.mean)
    if not slope > 0:
        raise StabilityError(
            f"Euler step with eps={epsilon:g} at var={v:g} would fold the measure "
            f"(slope {slope:.3g}); need eps < {2.0 * v / abs(1.0 - v) if f.variant.is_kl else 2.0 * v:g}"
        )
    return GaussianState(tuple(mean), slope * slope * v)


# --------------------------------------------------------------------------- particle steps


def sb_step_particles_heat(
    cloud: ParticleCloud, epsilon: float, tol: float = DEFAULT_TOL, max_iter: int = DEFAULT_MAX_ITER
) -> ParticleCloud:
    """Heat-flow bridge step on an empirical measure: ``x_i -> 2 x_i - b(x_i)``."""
    sol = solve_symmetric(cloud, epsilon, tol, max_iter)
    return ParticleCloud(2.0 * cloud.points - barycentric_projection(sol))


def sb_step_particles_reverse_heat(
    cloud: ParticleCloud, epsilon: float, tol: float = DEFAULT_TOL, max_iter: int = DEFAULT_MAX_ITER
) -> ParticleCloud:
    """Reverse-heat bridge step: plain barycentric pushforward ``x_i -> b(x_i)``."""
    sol = solve_symmetric(cloud, epsilon, tol, max_iter)
    return ParticleCloud(barycentric_projection(sol))


def euler_step_particles(
    cloud: ParticleCloud, score: Callable[[np.ndarray], np.ndarray], epsilon: float, reverse: bool = False
) -> ParticleCloud:
    """``x_i -> x_i - (eps/2) score(x_i)``; the heat-flow Euler step with a known score.

    Only meaningful when the caller knows the density of the current cloud's
    law, e.g. for reference runs against an analytic flow.
    """
    pts = cloud.points
    s = np.asarray(score(pts), dtype=float).reshape(pts.shape)
    sign = 1.0 if reverse else -1.0
    return ParticleCloud(pts + sign * 0.5 * epsilon * s)


# --------------------------------------------------------------------------- runs


@dataclass(frozen=True)
class SchemeConfig:
    epsilon: float
    horizon: float
    functional: Functional
    mode: Mode = Mode.GAUSSIAN
    method: Method = Method.SB
    n: int = 500
    seed: int = 42
    tol: float = DEFAULT_TOL
    max_iter: int = DEFAULT_MAX_ITER

    def __post_init__(self) -> None:
        object.__setattr__(self, "mode", Mode(self.mode))
        object.__setattr__(self, "method", Method(self.method))
        if not self.epsilon > 0:
            raise ValueError(f"epsilon must be positive, got {self.epsilon}")
        if not self.horizon > 0:
            raise ValueError(f"horizon must be positive, got {self.horizon}")
        if n_steps(self.horizon, self.epsilon) < 1:
            raise ValueError(f"horizon {self.horizon} is shorter than one step of {self.epsilon}")
        if self.mode is Mode.PARTICLE:
            if self.functional.variant not in (Variant.ENTROPY, Variant.REVERSE_ENTROPY):
                raise ValueError("particle mode supports only the entropy and reverse-entropy flows")
            if self.method is Method.LANGEVIN:
                raise ValueError("the Langevin update needs the stationary density; use gaussian mode")
            if self.n < 1:
                raise ValueError(f"n must be >= 1, got {self.n}")

    @property
    def n_steps(self) -> int:
        return n_steps(self.horizon, self.epsilon)

    def to_dict(self) -> dict:
        d = asdict(self)
        d["functional"] = {"variant": self.functional.variant.value, "horizon": self.functional.horizon}
        d["mode"] = self.mode.value
        d["method"] = self.method.value
        d["n_steps"] = self.n_steps
        return d


@dataclass(frozen=True)
class FlowTrajectory:
    """States at times ``0, eps, ..., N eps``; read as a left-closed step function on ``[0, T]``."""

    epsilon: float
    horizon: float
    states: tuple
    config: SchemeConfig | None = field(default=None, compare=False)

    @property
    def times(self) -> np.ndarray:
        return self.epsilon * np.arange(len(self.states))

    def __len__(self) -> int:
        return len(self.states)

    def to_csv(self, path: str | Path | None = None) -> str:
        """``k,time,var`` rows (Gaussian trajectories)."""
        if not all(isinstance(s, GaussianState) for s in self.states):
            raise TypeError("CSV export of k,time,var needs Gaussian states; use write_run_dir for clouds")
        rows = ["k,time,var"]
        rows += [f"{k},{t:.17g},{s.var:.17g}" for k, (t, s) in enumerate(zip(self.times, self.states))]
        text = "\n".join(rows) + "\n"
        if path is not None:
            Path(path).write_text(text)
        return text

    def write_run_dir(self, out_dir: str | Path, extra: dict | None = None) -> Path:
        """Per-step cloud CSVs (or the Gaussian CSV) plus ``run.json`` metadata."""
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        if isinstance(self.states[0], ParticleCloud):
            for k, cloud in enumerate(self.states):
                cloud.to_csv(out / f"step_{k:05d}.csv")
        else:
            self.to_csv(out / "trajectory.csv")
        meta = {
            "config": self.config.to_dict() if self.config else None,
            "epsilon": self.epsilon,
            "horizon": self.horizon,
            "n_states": len(self.states),
            "generator": GENERATOR_ID,
            "seed": self.config.seed if self.config else None,
            "git_describe": git_describe(),
        }
        if extra:
            meta.update(extra)
        (out / "run.json").write_text(json.dumps(meta, indent=2, sort_keys=True) + "\n")
        return out


def git_describe() -> str:
    import subprocess

    try:
        res = subprocess.run(
            ["git", "describe", "--always", "--dirty", "--tags"],
            capture_output=True,
            text=True,
            timeout=5,
            cwd=Path(__file__).resolve().parent,
        )
    except (OSError, subprocess.SubprocessError):
        return "unknown"
    return res.stdout.strip() or "unknown"


def reverse_stability_bound(f: Functional, initial: GaussianState) -> float | None:
    """Largest admissible ``eps`` for a reverse run, or ``None`` if unconstrained.

    Reverse heat: the terminal variance ``var_0 - T``. Reverse KL from
    ``var_0 < 1``: ``4 s / (1 - s)`` with ``s`` the terminal variance.
    """
    if not f.variant.is_reverse:
        return None
    end = G.exact_flow(f, initial, f.horizon).var
    if f.variant is Variant.REVERSE_ENTROPY:
        return end
    if initial.var < 1.0:
        return 4.0 * end / (1.0 - end)
    return None


def _check_reverse(config: SchemeConfig, initial) -> None:
    f = config.functional
    if not f.variant.is_reverse:
        return
    if not math.isclose(f.horizon, config.horizon):
        raise ValueError("reverse functional horizon must equal the scheme horizon")
    if isinstance(initial, ParticleCloud):
        from .cloud import moments

        mean, var = moments(initial)
        initial = GaussianState(tuple(mean), var)
    try:
        bound = reverse_stability_bound(f, initial)
    except ValueError as exc:
        raise StabilityError(f"reverse flow is undefined on [0, {f.horizon}]: {exc}") from exc
    if bound is not None and not config.epsilon < bound:
        raise StabilityError(
            f"{f.variant.value} needs eps < {bound:.6g} (set by the terminal variance); got eps={config.epsilon:g}"
        )


def run_scheme(config: SchemeConfig, initial, score: ScoreFn | None = None) -> FlowTrajectory:
    """Apply the configured step ``floor(T/eps)`` times, keeping every state.

    ``score(points, t)`` is required only for particle-mode explicit Euler.
    Failures are re-raised as :class:`StepFailure` carrying the 1-based step index,
    except :class:`StabilityError` from the up-front reverse-run check.
    """
    eps, f = config.epsilon, config.functional
    if config.mode is Mode.GAUSSIAN and not isinstance(initial, GaussianState):
        raise TypeError("gaussian mode needs a GaussianState initial condition")
    if config.mode is Mode.PARTICLE and not isinstance(initial, ParticleCloud):
        raise TypeError("particle mode needs a ParticleCloud initial condition")
    _check_reverse(config, initial)

    if config.mode is Mode.GAUSSIAN:
        step_fn = {
            Method.SB: lambda s, k: sb_step_gaussian(s, eps, f),
            Method.EULER: lambda s, k: euler_step_gaussian(s, eps, f),
            Method.LANGEVIN: lambda s, k: ld_step_gaussian(s, eps, f),
        }[config.method]
    elif config.method is Method.SB:
        sb = sb_step_particles_reverse_heat if f.variant.is_reverse else sb_step_particles_heat
        step_fn = lambda s, k: sb(s, eps, config.tol, config.max_iter)  # noqa: E731
    else:
        if score is None:
            raise ValueError("particle-mode Euler needs the analytic score of the current law")
        step_fn = lambda s, k: euler_step_particles(  # noqa: E731
            s, lambda x: score(x, k * eps), eps, reverse=f.variant.is_reverse
        )

    states = [initial]
    for k in range(config.n_steps):
        try:
            states.append(step_fn(states[-1], k))
        except (SinkhornError, StabilityError, ValueError) as exc:
            raise StepFailure(k + 1, exc) from exc
    return FlowTrajectory(eps, config.horizon, tuple(states), config)


def eval_at(traj: FlowTrajectory, t: float):
    """Piecewise-constant interpolant: the state at index ``floor(t / eps)``."""
    if not 0.0 <= t <= traj.horizon * (1 + 1e-12):
        raise ValueError(f"t={t} outside [0, {traj.horizon}]")
    k = min(_floor_ratio(t, traj.epsilon), len(traj.states) - 1)
    return traj.states[k]


def gaussian_trajectory_vars(traj: FlowTrajectory) -> np.ndarray:
    return np.array([s.var for s in traj.states])


def exact_vars(f: Functional, initial: GaussianState, times: Sequence[float]) -> np.ndarray:
    return np.array([G.exact_flow(f, initial, float(t)).var for t in times])

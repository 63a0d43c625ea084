"""Particle clouds, isotropic Gaussian mixtures and exact heat-flow sampling."""

from __future__ import annotations

import io
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

__all__ = [
    "GENERATOR_ID",
    "Component",
    "MixtureSpec",
    "ParticleCloud",
    "bimodal_spec",
    "cloud_from_csv",
    "make_rng",
    "moments",
    "sample_exact_heat",
    "sample_mixture",
]

# Recorded in run metadata next to the seed.
GENERATOR_ID = "numpy.random.PCG64"


def make_rng(seed: int) -> np.random.Generator:
    return np.random.Generator(np.random.PCG64(seed))


@dataclass(frozen=True)
class ParticleCloud:
    """Uniformly weighted empirical measure: ``n`` points in ``R^d``.

    ``points`` is stored as a read-only ``(n, d)`` float64 array.
    """

    points: np.ndarray

    def __post_init__(self) -> None:
        pts = np.array(self.points, dtype=np.float64)
        if pts.ndim == 1:
            pts = pts[:, None]
        if pts.ndim != 2 or pts.shape[0] < 1 or pts.shape[1] < 1:
            raise ValueError(f"points must have shape (n, d) with n, d >= 1, got {pts.shape}")
        if not np.all(np.isfinite(pts)):
            raise ValueError("points must be finite")
        pts.setflags(write=False)
        object.__setattr__(self, "points", pts)

    @property
    def n(self) -> int:
        return self.points.shape[0]

    @property
    def dim(self) -> int:
        return self.points.shape[1]

    @property
    def weights(self) -> np.ndarray:
        return np.full(self.n, 1.0 / self.n)

    def to_csv(self, path: str | Path | None = None) -> str:
        """Serialize as ``dim,n`` header, its values, then one row per particle."""
        buf = io.StringIO()
        buf.write("dim,n\n")
        buf.write(f"{self.dim},{self.n}\n")
        np.savetxt(buf, self.points, delimiter=",", fmt="%.17g")
        text = buf.getvalue()
        if path is not None:
            Path(path).write_text(text)
        return text

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, ParticleCloud):
            return NotImplemented
        return self.points.shape == other.points.shape and np.array_equal(self.points, other.points)

    __hash__ = None  # type: ignore[assignment]


def cloud_from_csv(source: str | Path) -> ParticleCloud:
    """Inverse of :meth:`ParticleCloud.to_csv`; accepts a path or the CSV text."""
    text = source if isinstance(source, str) and "\n" in source else Path(source).read_text()
    lines = text.strip().splitlines()
    if len(lines) < 3 or lines[0].strip() != "dim,n":
        raise ValueError("expected 'dim,n' header followed by dimensions and particle rows")
    dim, n = (int(v) for v in lines[1].split(","))
    pts = np.loadtxt(lines[2:], delimiter=",", ndmin=2)
    if pts.shape != (n, dim):
        raise ValueError(f"header says ({n}, {dim}) but found {pts.shape}")
    return ParticleCloud(pts)


@dataclass(frozen=True)
class Component:
    weight: float
    mean: tuple[float, ...]
    var: float


@dataclass(frozen=True)
class MixtureSpec:
    """Mixture of isotropic Gaussians ``sum_k w_k N(m_k, v_k I_d)``."""

    components: tuple[Component, ...]

    def __post_init__(self) -> None:
        comps = tuple(self.components)
        if not comps:
            raise ValueError("mixture needs at least one component")
        dims = {len(c.mean) for c in comps}
        if len(dims) != 1 or 0 in dims:
            raise ValueError("all component means must share one dimension >= 1")
        for c in comps:
            if not c.weight > 0:
                raise ValueError(f"component weights must be positive, got {c.weight}")
            if not c.var > 0:
                raise ValueError(f"component variances must be positive, got {c.var}")
        total = sum(c.weight for c in comps)
        if abs(total - 1.0) > 1e-12:
            raise ValueError(f"component weights sum to {total!r}, not 1")
        object.__setattr__(self, "components", comps)

    @classmethod
    def of(cls, items: Iterable[tuple[float, float | Sequence[float], float]]) -> "MixtureSpec":
        """Build from ``(weight, mean, var)`` triples; scalar means mean ``d = 1``."""
        comps = []
        for w, m, v in items:
            mean = (float(m),) if np.isscalar(m) else tuple(float(x) for x in m)
            comps.append(Component(float(w), mean, float(v)))
        return cls(tuple(comps))

    @property
    def dim(self) -> int:
        return len(self.components[0].mean)

    @property
    def weights(self) -> np.ndarray:
        return np.array([c.weight for c in self.components])

    @property
    def means(self) -> np.ndarray:
        return np.array([c.mean for c in self.components])

    @property
    def variances(self) -> np.ndarray:
        return np.array([c.var for c in self.components])

    def inflate(self, t: float) -> "MixtureSpec":
        """Every component variance increased by ``t`` (heat flow run for time ``t``)."""
        if t < 0:
            raise ValueError(f"time must be non-negative, got {t}")
        return MixtureSpec(tuple(Component(c.weight, c.mean, c.var + t) for c in self.components))

    def density(self, x: np.ndarray) -> np.ndarray:
        """Density at 1-D points ``x``."""
        if self.dim != 1:
            raise ValueError("density is only provided for d = 1")
        x = np.asarray(x, dtype=float)[..., None]
        m, v, w = self.means[:, 0], self.variances, self.weights
        return np.sum(w * np.exp(-0.5 * (x - m) ** 2 / v) / np.sqrt(2 * np.pi * v), axis=-1)

    def score(self, x: np.ndarray) -> np.ndarray:
        """``grad log p`` at 1-D points ``x`` (log-domain responsibilities)."""
        if self.dim != 1:
            raise ValueError("score is only provided for d = 1")
        x = np.asarray(x, dtype=float)[..., None]
        m, v, w = self.means[:, 0], self.variances, self.weights
        logp = np.log(w) - 0.5 * (x - m) ** 2 / v - 0.5 * np.log(2 * np.pi * v)
        logp -= logp.max(axis=-1, keepdims=True)
        r = np.exp(logp)
        r /= r.sum(axis=-1, keepdims=True)
        return np.sum(r * (m - x) / v, axis=-1)

    def total_variance(self) -> float:
        """Per-coordinate variance of the mixture (law of total variance)."""
        w, m, v = self.weights, self.means, self.variances
        mu = w @ m
        spread = w @ np.sum((m - mu) ** 2, axis=1) / self.dim
        return float(w @ v + spread)


def bimodal_spec() -> MixtureSpec:
    """``0.5 N(-2, 1) + 0.5 N(2, 1)`` on the line."""
    return MixtureSpec.of([(0.5, -2.0, 1.0), (0.5, 2.0, 1.0)])


def sample_mixture(spec: MixtureSpec, n: int, seed: int) -> ParticleCloud:
    """Draw ``n`` i.i.d. points: categorical component label, then a Gaussian draw."""
    if n < 1:
        raise ValueError(f"n must be >= 1, got {n}")
    rng = make_rng(seed)
    labels = rng.choice(len(spec.components), size=n, p=spec.weights)
    z = rng.standard_normal((n, spec.dim))
    pts = spec.means[labels] + np.sqrt(spec.variances[labels])[:, None] * z
    return ParticleCloud(pts)


def sample_exact_heat(spec: MixtureSpec, t: float, n: int, seed: int) -> ParticleCloud:
    """Sample the heat flow ``d rho/dt = (1/2) Laplacian rho`` started at ``spec``, at time ``t``."""
    return sample_mixture(spec.inflate(t), n, seed)


def moments(cloud: ParticleCloud) -> tuple[np.ndarray, float]:
    """Empirical mean and per-coordinate population (1/n) variance."""
    pts = cloud.points
    mean = pts.mean(axis=0)
    var = float(np.mean(np.sum((pts - mean) ** 2, axis=1)) / cloud.dim)
    return mean, var

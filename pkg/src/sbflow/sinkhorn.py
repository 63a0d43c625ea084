"""Symmetric log-domain Sinkhorn for equal-marginal entropic OT on a particle cloud.

Conventions
-----------
The cost is ``c(x, y) = |x - y|^2 / 2`` and the regularizer is ``eps``, so the
Gibbs kernel is ``exp(-|x - y|^2 / (2 eps))``: the Gaussian heat kernel at time
``eps``. Libraries using the bare squared distance need ``2 * eps`` to match.

With uniform weights ``1/n`` and a single symmetric potential ``f`` the plan is

    pi_ij = exp((f_i + f_j - c_ij) / eps) / n^2

which is symmetric by construction. The potential is updated as
``f <- (f + T(f)) / 2`` where ``T`` is the soft-min (c-transform) step.
"""

from __future__ import annotations

import math
import os
from dataclasses import dataclass
from pathlib import Path

os.environ.setdefault("NUMBA_THREADING_LAYER", "workqueue")

import numba  # noqa: E402
import numpy as np  # noqa: E402

from .cloud import ParticleCloud  # noqa: E402

__all__ = [
    "DEFAULT_MAX_ITER",
    "DEFAULT_TOL",
    "SinkhornError",
    "SinkhornSolution",
    "barycentric_projection",
    "plan_matrix",
    "plan_row",
    "solve_symmetric",
]

DEFAULT_TOL = 1e-9
DEFAULT_MAX_ITER = 10_000


class SinkhornError(RuntimeError):
    """Raised when the solver exhausts its iteration budget."""

    def __init__(self, message: str, marginal_error: float, iterations: int):
        super().__init__(message)
        self.marginal_error = marginal_error
        self.iterations = iterations


# Terms whose log-weight sits this far below the row's diagonal term are
# dropped by the 1-D kernels. n * exp(-60) is far below one ulp of the row sum.
_LOG_CUTOFF = 60.0


@numba.njit(cache=True)
def _sqdist(x: np.ndarray, i: int, j: int) -> float:
    s = 0.0
    for k in range(x.shape[1]):
        diff = x[i, k] - x[j, k]
        s += diff * diff
    return s


@numba.njit(cache=True, parallel=True)
def _softmin_dense(x: np.ndarray, f: np.ndarray, eps: float) -> np.ndarray:
    """``T(f)_i = -eps * log( (1/n) sum_j exp((f_j - c_ij)/eps) )``.

    Rows are independent and each row is reduced sequentially, so the result
    does not depend on the thread count.
    """
    n = x.shape[0]
    out = np.empty(n)
    log_n = math.log(n)
    inv = 1.0 / eps
    for i in numba.prange(n):
        m = -np.inf
        for j in range(n):
            a = (f[j] - 0.5 * _sqdist(x, i, j)) * inv
            if a > m:
                m = a
        s = 0.0
        for j in range(n):
            s += math.exp((f[j] - 0.5 * _sqdist(x, i, j)) * inv - m)
        out[i] = -eps * (m + math.log(s) - log_n)
    return out


@numba.njit(cache=True, parallel=True)
def _weighted_mean_dense(x: np.ndarray, f: np.ndarray, eps: float) -> np.ndarray:
    """Row-normalized ``sum_j pi_ij x_j``; the ``f_i`` factor cancels."""
    n, d = x.shape
    out = np.empty((n, d))
    inv = 1.0 / eps
    for i in numba.prange(n):
        m = -np.inf
        for j in range(n):
            a = (f[j] - 0.5 * _sqdist(x, i, j)) * inv
            if a > m:
                m = a
        s = 0.0
        acc = np.zeros(d)
        for j in range(n):
            w = math.exp((f[j] - 0.5 * _sqdist(x, i, j)) * inv - m)
            s += w
            for k in range(d):
                acc[k] += w * x[j, k]
        for k in range(d):
            out[i, k] = acc[k] / s
    return out


@numba.njit(cache=True)
def _window(xs: np.ndarray, f: np.ndarray, fmax: float, eps: float, i: int):
    # (f_j - c_ij)/eps <= (fmax - c_ij)/eps, and the diagonal gives f_i/eps, so
    # every j with c_ij > fmax - f_i + cutoff * eps is negligible.
    r = math.sqrt(2.0 * (fmax - f[i] + _LOG_CUTOFF * eps))
    lo = np.searchsorted(xs, xs[i] - r, side="left")
    hi = np.searchsorted(xs, xs[i] + r, side="right")
    return lo, hi


@numba.njit(cache=True, parallel=True)
def _softmin_sorted(xs: np.ndarray, f: np.ndarray, eps: float) -> np.ndarray:
    """1-D :func:`_softmin_dense` on sorted points, restricted to the non-negligible window."""
    n = xs.shape[0]
    out = np.empty(n)
    log_n = math.log(n)
    inv = 1.0 / eps
    fmax = f.max()
    for i in numba.prange(n):
        lo, hi = _window(xs, f, fmax, eps, i)
        xi = xs[i]
        m = -np.inf
        for j in range(lo, hi):
            d = xi - xs[j]
            a = (f[j] - 0.5 * d * d) * inv
            if a > m:
                m = a
        s = 0.0
        for j in range(lo, hi):
            d = xi - xs[j]
            s += math.exp((f[j] - 0.5 * d * d) * inv - m)
        out[i] = -eps * (m + math.log(s) - log_n)
    return out


@numba.njit(cache=True, parallel=True)
def _weighted_mean_sorted(xs: np.ndarray, f: np.ndarray, eps: float) -> np.ndarray:
    n = xs.shape[0]
    out = np.empty(n)
    inv = 1.0 / eps
    fmax = f.max()
    for i in numba.prange(n):
        lo, hi = _window(xs, f, fmax, eps, i)
        xi = xs[i]
        m = -np.inf
        for j in range(lo, hi):
            d = xi - xs[j]
            a = (f[j] - 0.5 * d * d) * inv
            if a > m:
                m = a
        s = 0.0
        acc = 0.0
        for j in range(lo, hi):
            d = xi - xs[j]
            w = math.exp((f[j] - 0.5 * d * d) * inv - m)
            s += w
            acc += w * xs[j]
        out[i] = acc / s
    return out


class _Kernel:
    """Dispatches to the sorted 1-D kernels or the dense d-dimensional ones."""

    def __init__(self, points: np.ndarray):
        self.n, self.d = points.shape
        if self.d == 1:
            self.order = np.argsort(points[:, 0], kind="stable")
            self.xs = np.ascontiguousarray(points[self.order, 0])
        else:
            self.x = np.ascontiguousarray(points)

    def softmin(self, f: np.ndarray, eps: float) -> np.ndarray:
        if self.d == 1:
            out = np.empty(self.n)
            out[self.order] = _softmin_sorted(self.xs, np.ascontiguousarray(f[self.order]), eps)
            return out
        return _softmin_dense(self.x, f, eps)

    def weighted_mean(self, f: np.ndarray, eps: float) -> np.ndarray:
        if self.d == 1:
            out = np.empty((self.n, 1))
            out[self.order, 0] = _weighted_mean_sorted(self.xs, np.ascontiguousarray(f[self.order]), eps)
            return out
        return _weighted_mean_dense(self.x, f, eps)


@dataclass(frozen=True)
class SinkhornSolution:
    potential: np.ndarray
    epsilon: float
    iterations: int
    marginal_error: float
    cloud: ParticleCloud

    @property
    def n(self) -> int:
        return self.cloud.n

    def log_plan_row(self, i: int) -> np.ndarray:
        x = self.cloud.points
        f = self.potential
        c = 0.5 * np.sum((x - x[i]) ** 2, axis=1)
        return (f[i] + f - c) / self.epsilon - 2.0 * math.log(self.n)

    def potentials_csv(self, path: str | Path | None = None) -> str:
        lines = ["index,potential"]
        lines += [f"{i},{v:.17g}" for i, v in enumerate(self.potential)]
        text = "\n".join(lines) + "\n"
        if path is not None:
            Path(path).write_text(text)
        return text


def _row_error(f: np.ndarray, tf: np.ndarray, eps: float, n: int) -> float:
    # row_i = exp((f_i - T(f)_i)/eps) / n
    return float(np.max(np.abs(np.expm1((f - tf) / eps)))) / n


def solve_symmetric(
    cloud: ParticleCloud,
    epsilon: float,
    tol: float = DEFAULT_TOL,
    max_iter: int = DEFAULT_MAX_ITER,
) -> SinkhornSolution:
    """Solve the equal-marginal entropic OT problem on ``cloud`` at temperature ``epsilon``.

    Returns the first iterate whose max row-sum deviation from ``1/n`` is at
    most ``tol``. Raises :class:`SinkhornError` after ``max_iter`` updates.
    """
    if not epsilon > 0:
        raise ValueError(f"epsilon must be positive, got {epsilon}")
    if not tol > 0:
        raise ValueError(f"tol must be positive, got {tol}")
    kernel = _Kernel(cloud.points)
    n = cloud.n
    f = np.zeros(n)
    err = math.inf
    for it in range(max_iter + 1):
        tf = kernel.softmin(f, epsilon)
        err = _row_error(f, tf, epsilon, n)
        if err <= tol:
            f.setflags(write=False)
            return SinkhornSolution(f, float(epsilon), it, err, cloud)
        if it < max_iter:
            f = 0.5 * (f + tf)
    raise SinkhornError(
        f"Sinkhorn did not reach tol={tol:g} in {max_iter} iterations "
        f"(eps={epsilon:g}, n={n}, marginal error {err:.3e})",
        marginal_error=err,
        iterations=max_iter,
    )


def plan_row(sol: SinkhornSolution, i: int) -> np.ndarray:
    """Row ``i`` of the transport plan, exponentiated from its log-domain form."""
    if not 0 <= i < sol.n:
        raise IndexError(f"row index {i} out of range for n={sol.n}")
    return np.exp(sol.log_plan_row(i))


def plan_matrix(sol: SinkhornSolution) -> np.ndarray:
    """Full ``n x n`` plan. Quadratic memory; meant for small clouds and tests."""
    x = sol.cloud.points
    f = sol.potential
    c = 0.5 * np.sum((x[:, None, :] - x[None, :, :]) ** 2, axis=-1)
    return np.exp((f[:, None] + f[None, :] - c) / sol.epsilon - 2.0 * math.log(sol.n))


def barycentric_projection(sol: SinkhornSolution) -> np.ndarray:
    """``b(x_i) = sum_j pi_ij x_j / sum_j pi_ij`` with the actual row sums."""
    return _Kernel(sol.cloud.points).weighted_mean(np.asarray(sol.potential), sol.epsilon)

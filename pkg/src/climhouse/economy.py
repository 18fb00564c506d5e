"""Multisector Ornstein-Uhlenbeck productivity and its time integral.

The economy has ``I`` sectors.  ``Z`` solves ``dZ = -Gamma Z dt + Sigma dB``
and ``A`` integrates ``mu + varsigma * Z``.  Both have Gaussian conditional
laws; this module gives those laws in closed form (up to quadrature) and
simulates paths with an Euler-Maruyama scheme on a uniform grid.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import solve_continuous_lyapunov

from . import rng
from .numerics import adaptive_simpson, matrix_exponential, psd_sqrt, symmetrize

UPSILON_COND_LIMIT = 1e12


class NotHurwitzError(ValueError):
    """Raised when ``-Gamma`` has an eigenvalue with non-negative real part."""


class GridMismatchError(ValueError):
    pass


def _frozen(a, ndim: int, name: str) -> np.ndarray:
    arr = np.array(a, dtype=float)
    if arr.ndim != ndim:
        raise ValueError(f"{name} must be {ndim}-dimensional, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise ValueError(f"{name} has non-finite entries")
    arr.setflags(write=False)
    return arr


def gamma_spectrum(gamma: np.ndarray) -> np.ndarray:
    """Eigenvalues of ``Gamma`` sorted by decreasing real part."""
    ev = np.linalg.eigvals(np.asarray(gamma, dtype=float))
    return ev[np.argsort(-ev.real, kind="stable")]


def check_hurwitz(gamma: np.ndarray) -> None:
    """Raise :class:`NotHurwitzError` unless every eigenvalue of Gamma has positive real part."""
    ev = gamma_spectrum(gamma)
    bad = ev[ev.real <= 0.0]
    if bad.size:
        raise NotHurwitzError(
            f"-Gamma is not Hurwitz: Gamma has eigenvalue {bad[-1]:.6g} with non-positive real part"
        )


@dataclass(frozen=True)
class ProductivityParams:
    """Parameters of the I-sector productivity economy (rates per year).

    ``z0_mean``/``z0_cov`` give the law of the initial state; by default
    ``Z0 ~ N(0, Sigma Sigma^T)``.  Use :meth:`with_stationary_z0` to start
    from the stationary law instead.  ``check_stability=False`` skips the
    Hurwitz requirement on construction (a warning is emitted); quantities
    that need stationarity still refuse to run.
    """

    mu: np.ndarray
    gamma: np.ndarray
    sigma: np.ndarray
    varsigma: float = 1.0
    a0: np.ndarray | None = None
    z0_mean: np.ndarray | None = None
    z0_cov: np.ndarray | None = None
    check_stability: bool = field(default=True, compare=False)

    def __post_init__(self):
        mu = _frozen(self.mu, 1, "mu")
        n = mu.shape[0]
        if n < 1:
            raise ValueError("at least one sector is required")
        gamma = _frozen(self.gamma, 2, "gamma")
        sigma = _frozen(self.sigma, 2, "sigma")
        for name, m in (("gamma", gamma), ("sigma", sigma)):
            if m.shape != (n, n):
                raise ValueError(f"{name} must have shape ({n}, {n}), got {m.shape}")
        if not 0.0 < float(self.varsigma) <= 1.0:
            raise ValueError(f"varsigma must lie in (0, 1], got {self.varsigma}")
        if np.min(np.linalg.eigvalsh(sigma @ sigma.T)) <= 0.0:
            raise ValueError("sigma must be non-singular (sigma sigma^T positive definite)")
        if self.check_stability:
            check_hurwitz(gamma)
        else:
            ev = gamma_spectrum(gamma)
            if np.any(ev.real <= 0.0):
                warnings.warn(
                    "gamma is not Hurwitz-stable; stationary quantities are unavailable",
                    stacklevel=3,
                )
        a0 = _frozen(np.zeros(n) if self.a0 is None else self.a0, 1, "a0")
        z0_mean = _frozen(np.zeros(n) if self.z0_mean is None else self.z0_mean, 1, "z0_mean")
        z0_cov = _frozen(sigma @ sigma.T if self.z0_cov is None else self.z0_cov, 2, "z0_cov")
        if a0.shape != (n,) or z0_mean.shape != (n,) or z0_cov.shape != (n, n):
            raise ValueError("a0, z0_mean and z0_cov must match the number of sectors")
        if not np.allclose(z0_cov, z0_cov.T, atol=1e-10):
            raise ValueError("z0_cov must be symmetric")
        if np.min(np.linalg.eigvalsh(symmetrize(z0_cov))) < -1e-10:
            raise ValueError("z0_cov must be positive semi-definite")
        for name, value in (("mu", mu), ("gamma", gamma), ("sigma", sigma), ("a0", a0),
                            ("z0_mean", z0_mean), ("z0_cov", z0_cov)):
            object.__setattr__(self, name, value)
        object.__setattr__(self, "varsigma", float(self.varsigma))

    @property
    def n_sectors(self) -> int:
        return self.mu.shape[0]

    @property
    def noise_cov(self) -> np.ndarray:
        """``Sigma Sigma^T``."""
        return self.sigma @ self.sigma.T

    def with_stationary_z0(self) -> ProductivityParams:
        return ProductivityParams(
            self.mu, self.gamma, self.sigma, self.varsigma, self.a0,
            np.zeros(self.n_sectors), stationary_covariance(self),
        )


@dataclass(frozen=True)
class ConditionalGaussian:
    mean: np.ndarray
    cov: np.ndarray

    def __post_init__(self):
        cov = np.asarray(self.cov, dtype=float)
        scale = max(1.0, float(np.max(np.abs(cov)))) if cov.size else 1.0
        if not np.allclose(cov, cov.T, rtol=0.0, atol=1e-10 * scale):
            raise ValueError("conditional covariance is not symmetric")
        if cov.size and np.min(np.linalg.eigvalsh(cov)) < -1e-10 * scale:
            raise ValueError("conditional covariance is not positive semi-definite")


@dataclass(frozen=True)
class PathGrid:
    """A batch of paths sampled on the uniform grid ``t_start + k * dt``.

    ``values`` has shape ``(n_paths, n_steps + 1, dim)``.  ``increments``
    optionally holds the driving Brownian increments, shape
    ``(n_paths, n_steps, dim_noise)``.  Between nodes a path is held at its
    left node value.
    """

    t_start: float
    t_end: float
    n_steps: int
    values: np.ndarray
    increments: np.ndarray | None = None

    def __post_init__(self):
        if not self.t_end > self.t_start:
            raise ValueError("t_end must exceed t_start")
        if self.n_steps < 1:
            raise ValueError("n_steps must be positive")
        if self.values.ndim != 3 or self.values.shape[1] != self.n_steps + 1:
            raise ValueError(f"values must have shape (n_paths, {self.n_steps + 1}, dim)")
        if self.increments is not None and self.increments.shape[:2] != (self.n_paths, self.n_steps):
            raise ValueError("increments do not match the grid")

    @property
    def n_paths(self) -> int:
        return self.values.shape[0]

    @property
    def dt(self) -> float:
        return (self.t_end - self.t_start) / self.n_steps

    @property
    def times(self) -> np.ndarray:
        return self.t_start + self.dt * np.arange(self.n_steps + 1)

    def same_grid(self, other: PathGrid) -> bool:
        return (self.t_start, self.t_end, self.n_steps) == (other.t_start, other.t_end, other.n_steps)

    def node_index(self, t) -> np.ndarray:
        """Index ``k`` of the interval ``[u_k, u_{k+1})`` holding ``t`` (last node at ``t_end``)."""
        t = np.asarray(t, dtype=float)
        if np.any(t < self.t_start - 1e-12) or np.any(t > self.t_end + 1e-12):
            raise GridMismatchError(
                f"evaluation time outside the simulated grid [{self.t_start}, {self.t_end}]"
            )
        k = np.floor((t - self.t_start) / self.dt + 1e-9).astype(int)
        return np.clip(k, 0, self.n_steps)

    def at(self, t) -> np.ndarray:
        """Piecewise-constant value at time(s) ``t``; shape ``(n_paths, dim)`` for scalar ``t``."""
        return self.values[:, self.node_index(t)]

    def path(self, i: int) -> np.ndarray:
        return self.values[i]


def upsilon(params: ProductivityParams, h: float) -> np.ndarray:
    """``int_0^h exp(-Gamma s) ds``.

    Uses ``Gamma^{-1}(I - exp(-Gamma h))`` unless Gamma is badly conditioned,
    in which case the integrand is integrated numerically.
    """
    if h < 0:
        raise ValueError(f"h must be non-negative, got {h}")
    n = params.n_sectors
    if h == 0:
        return np.zeros((n, n))
    gamma = params.gamma
    if np.linalg.cond(gamma) > UPSILON_COND_LIMIT:
        return adaptive_simpson(lambda s: matrix_exponential(-gamma, s), 0.0, h, rtol=1e-12)
    return np.linalg.solve(gamma, np.eye(n) - matrix_exponential(-gamma, h))


def conditional_law_z(params: ProductivityParams, z_t, h: float, rtol: float = 1e-8) -> ConditionalGaussian:
    """Law of ``Z_{t+h}`` given ``Z_t = z_t``."""
    if h < 0:
        raise ValueError(f"h must be non-negative, got {h}")
    z_t = np.asarray(z_t, dtype=float)
    n = params.n_sectors
    if h == 0:
        return ConditionalGaussian(z_t.copy(), np.zeros((n, n)))
    mean = matrix_exponential(-params.gamma, h) @ z_t
    q = params.noise_cov

    def integrand(u):
        e = matrix_exponential(-params.gamma, u)
        return e @ q @ e.T

    cov = symmetrize(adaptive_simpson(integrand, 0.0, h, rtol=rtol))
    return ConditionalGaussian(mean, cov)


def conditional_law_a(params: ProductivityParams, a_t, z_t, h: float, rtol: float = 1e-8) -> ConditionalGaussian:
    """Law of ``A_{t+h}`` given ``(A_t, Z_t) = (a_t, z_t)``."""
    if h < 0:
        raise ValueError(f"h must be non-negative, got {h}")
    a_t = np.asarray(a_t, dtype=float)
    z_t = np.asarray(z_t, dtype=float)
    n = params.n_sectors
    if h == 0:
        return ConditionalGaussian(a_t.copy(), np.zeros((n, n)))
    mean = params.mu * h + params.varsigma * upsilon(params, h) @ z_t + a_t
    q = params.noise_cov

    def integrand(u):
        ups = upsilon(params, u)
        return ups @ q @ ups.T

    cov = params.varsigma**2 * symmetrize(adaptive_simpson(integrand, 0.0, h, rtol=rtol))
    return ConditionalGaussian(mean, cov)


def stationary_covariance(params: ProductivityParams) -> np.ndarray:
    """Solve ``Gamma S + S Gamma^T = Sigma Sigma^T``."""
    check_hurwitz(params.gamma)
    s = solve_continuous_lyapunov(params.gamma, params.noise_cov)
    return symmetrize(s)


def lyapunov_residual(params: ProductivityParams, s: np.ndarray) -> float:
    """Frobenius norm of ``Gamma S + S Gamma^T - Sigma Sigma^T``."""
    return float(np.linalg.norm(params.gamma @ s + s @ params.gamma.T - params.noise_cov))


def simulate_z(
    params: ProductivityParams,
    t_start: float,
    t_end: float,
    n_steps: int,
    n_paths: int,
    seed: int,
    z0=None,
) -> PathGrid:
    """Euler-Maruyama paths of Z on ``n_steps`` uniform steps over ``[t_start, t_end]``.

    Each path draws ``I`` normals for its initial state and then ``n_steps * I``
    normals for its increments, from its own stream; passing ``z0`` fixes the
    start but leaves the increments unchanged.  The returned grid carries the
    Brownian increments.
    """
    if n_steps < 1:
        raise ValueError(f"n_steps must be positive, got {n_steps}")
    if n_paths < 1:
        raise ValueError(f"n_paths must be positive, got {n_paths}")
    n = params.n_sectors
    dt = (t_end - t_start) / n_steps
    draws = rng.standard_normals(seed, n_paths, (n_steps + 1, n), stream=rng.ECONOMY)
    if z0 is None:
        start = params.z0_mean + draws[:, 0] @ psd_sqrt(params.z0_cov).T
    else:
        start = np.broadcast_to(np.asarray(z0, dtype=float), (n_paths, n))
    dbz = np.sqrt(dt) * draws[:, 1:]

    values = np.empty((n_paths, n_steps + 1, n))
    values[:, 0] = start
    drift = np.eye(n) - dt * params.gamma
    noise = dbz @ params.sigma.T
    z = values[:, 0]
    for k in range(1, n_steps + 1):
        z = z @ drift.T + noise[:, k - 1]
        values[:, k] = z
    return PathGrid(float(t_start), float(t_end), int(n_steps), values, dbz)


def integrated_productivity(params: ProductivityParams, z_paths: PathGrid, times, a0=None) -> np.ndarray:
    """``A`` at arbitrary ``times`` inside the grid, shape ``(n_paths, len(times), I)``.

    The piecewise-constant path is integrated exactly:
    ``A_t = a0 + mu (t - t_start) + varsigma * int_{t_start}^t Z_u du``.
    """
    if z_paths.values.shape[2] != params.n_sectors:
        raise GridMismatchError("z_paths dimension does not match the number of sectors")
    times = np.atleast_1d(np.asarray(times, dtype=float))
    k = z_paths.node_index(times)
    k = np.minimum(k, z_paths.n_steps - 1)
    dt = z_paths.dt
    z = z_paths.values
    cum = np.zeros((z_paths.n_paths, z_paths.n_steps + 1, params.n_sectors))
    cum[:, 1:] = dt * np.cumsum(z[:, :-1], axis=1)
    u_k = z_paths.t_start + dt * k
    integral = cum[:, k] + (times - u_k)[None, :, None] * z[:, k]
    base = params.a0 if a0 is None else np.asarray(a0, dtype=float)
    drift = base + (times - z_paths.t_start)[:, None] * params.mu
    return drift[None] + params.varsigma * integral


def simulate_a(params: ProductivityParams, z_paths: PathGrid, a0=None) -> PathGrid:
    """``A`` on the nodes of the Z grid, from the left-rectangle integral of Z."""
    values = integrated_productivity(params, z_paths, z_paths.times, a0)
    return PathGrid(z_paths.t_start, z_paths.t_end, z_paths.n_steps, values)

"""Estimation of the productivity and housing-index parameters from observed series."""

from __future__ import annotations

import logging
import math
import warnings
from dataclasses import dataclass

import numpy as np

from .data import TimeSeries
from .numerics import psd_sqrt

log = logging.getLogger(__name__)

HPI_MODES = ("raw", "rescaled", "detrended")


class EstimationError(ValueError):
    """An estimator's preconditions do not hold for the supplied data."""


@dataclass(frozen=True)
class ProductivityEstimate:
    """Estimated ``mu``, ``varsigma``, ``Gamma`` and ``Sigma``.

    ``z_hat`` is the standardised series and ``residuals`` the VAR(1)
    innovations (row ``m - 1`` belongs to the step ending at ``t_m``).  When the
    series is constant the VAR step is skipped: ``gamma_hat`` and friends are
    ``None`` and ``var_rejected`` says why.
    """

    mu_hat: np.ndarray
    varsigma_hat: float
    gamma_hat: np.ndarray | None
    sigma_hat: np.ndarray | None
    z_hat: TimeSeries | None
    residuals: np.ndarray | None
    var_rejected: str | None = None


@dataclass(frozen=True)
class HpiEstimate:
    varrho_hat: float
    vartheta_hat: float
    nu_hat: float
    sigma_bar_hat: float
    rho_hat: np.ndarray | None = None
    trend_origin: float = 0.0
    mode: str = "raw"
    rho_clamped: int = 0


@dataclass(frozen=True)
class RhoEstimate:
    rho: np.ndarray
    raw_norm: float
    clamped: bool


def fit_var1(z: np.ndarray, dt: float) -> tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
    """Intercept-free least squares of ``z_m`` on ``z_{m-1}``.

    Returns ``(B, Gamma, Sigma, residuals)`` with ``Gamma = (I - B) / dt`` and
    ``Sigma`` the symmetric PSD root of the residual covariance over ``dt``.
    """
    z = np.atleast_2d(np.asarray(z, dtype=float).T).T
    if dt <= 0:
        raise EstimationError("time step must be positive")
    x, y = z[:-1], z[1:]
    if np.linalg.matrix_rank(x) < x.shape[1]:
        # lstsq still returns the minimum-norm fit
        log.warning("VAR design matrix is rank deficient")
    coef, *_ = np.linalg.lstsq(x, y, rcond=None)
    b = coef.T
    resid = y - x @ coef
    n = z.shape[1]
    gamma = (np.eye(n) - b) / dt
    cov = resid.T @ resid / resid.shape[0]
    sigma = psd_sqrt(cov / dt)
    return b, gamma, sigma, resid


def estimate_productivity(theta: TimeSeries) -> ProductivityEstimate:
    """Mean, pooled scale and VAR(1) dynamics of a productivity series."""
    values = np.atleast_2d(theta.values.T).T
    n_obs, n = values.shape
    if n_obs - 1 < n + 2:
        raise EstimationError(f"need at least {n + 3} observations for {n} sectors, got {n_obs}")
    mu = values.mean(axis=0)
    centred = values - mu
    varsigma = math.sqrt(float(np.sum(centred * centred)) / (n_obs - 1))
    scale = max(1.0, float(np.max(np.abs(values))))
    if varsigma <= 1e-14 * scale:
        return ProductivityEstimate(mu, 0.0, None, None, None, None,
                                    var_rejected="series is constant (zero pooled variance)")
    z = centred / varsigma
    _, gamma, sigma, resid = fit_var1(z, theta.dt)
    return ProductivityEstimate(mu, varsigma, gamma, sigma, TimeSeries(theta.t0, theta.t1, z), resid)


def estimate_hpi_trend(k: TimeSeries) -> tuple[float, float]:
    """OLS of ``K`` on ``(t, 1)`` with ``t`` in years since the first observation."""
    t = k.times - k.t0
    design = np.column_stack([t, np.ones_like(t)])
    if np.ptp(t) == 0:
        raise EstimationError("degenerate trend design (all times equal)")
    (varrho, vartheta), *_ = np.linalg.lstsq(design, np.asarray(k.values, dtype=float), rcond=None)
    return float(varrho), float(vartheta)


def estimate_hpi_dynamics(k: TimeSeries, trend: tuple[float, float] | None = None, mode: str = "raw"):
    """Mean-reversion speed and volatility of the log index.

    ``raw`` applies the log-ratio and mean-squared-increment formulas to ``K``
    as given; ``rescaled`` divides both by the time step so they are per
    year; ``detrended`` applies the rescaled formulas to ``K - chi``.
    Returns ``(nu_hat, sigma_bar_hat)``.
    """
    if mode not in HPI_MODES:
        raise ValueError(f"unknown mode {mode!r}; expected one of {HPI_MODES}")
    values = np.asarray(k.values, dtype=float)
    if mode == "detrended":
        if trend is None:
            trend = estimate_hpi_trend(k)
        values = values - (trend[0] * (k.times - k.t0) + trend[1])
    prev, cur = values[:-1], values[1:]
    if np.all(cur == prev):
        # no movement at all (a constant index rebased to its last value is all zeros)
        return 0.0, 0.0
    num = float(prev @ prev)
    den = float(cur @ prev)
    if num <= 0 or den <= 0:
        raise EstimationError(
            f"mean-reversion estimate undefined: sum K_(m-1)^2 = {num:.6g}, sum K_m K_(m-1) = {den:.6g}"
        )
    nu = math.log(num / den)
    sig2 = float(np.mean((cur - prev) ** 2))
    if mode != "raw":
        nu /= k.dt
        sig2 /= k.dt
    return nu, math.sqrt(sig2)


def _align(k: TimeSeries, prod: ProductivityEstimate, atol: float = 1e-6):
    """Indices of HPI increments and productivity residuals ending at common times."""
    z = prod.z_hat
    if abs(z.dt - k.dt) > atol:
        raise EstimationError(f"series spacings differ ({k.dt} vs {z.dt})")
    k_ends = k.times[1:]
    z_ends = z.times[1:]
    ki, zi = [], []
    for i, t in enumerate(k_ends):
        j = np.flatnonzero(np.abs(z_ends - t) < atol)
        if j.size:
            ki.append(i)
            zi.append(int(j[0]))
    if len(ki) < 3:
        raise EstimationError("HPI and productivity series share fewer than 3 increments")
    return np.array(ki), np.array(zi)


def regress_rho(u_z: np.ndarray, u_bar: np.ndarray) -> np.ndarray:
    """``Cov(u_z, u_bar) Var(u_z)^{-1}`` from centred sample moments."""
    u_z = np.atleast_2d(np.asarray(u_z, dtype=float).T).T
    u_bar = np.asarray(u_bar, dtype=float)
    dz = u_z - u_z.mean(axis=0)
    db = u_bar - u_bar.mean()
    var = dz.T @ dz / dz.shape[0]
    cov = dz.T @ db / dz.shape[0]
    if np.linalg.cond(var) > 1e12:
        raise EstimationError("economy noise increments have a singular sample covariance")
    return np.linalg.solve(var, cov)


def estimate_rho(
    k: TimeSeries,
    trend: tuple[float, float],
    dynamics: tuple[float, float],
    prod: ProductivityEstimate,
) -> RhoEstimate:
    """Loadings of the housing noise on the economy noise.

    The housing increments are the HPI residuals after the estimated drift,
    divided by ``sigma_bar_hat``; the economy increments are ``Sigma^-1`` times
    the VAR innovations.  Increments are matched on their end dates.  A norm
    above one is scaled back to one with a warning.
    """
    nu, sigma_bar = dynamics
    varrho, vartheta = trend
    if sigma_bar <= 0:
        raise EstimationError("sigma_bar_hat is zero; housing noise is undefined")
    if prod.sigma_hat is None:
        raise EstimationError(f"productivity VAR unavailable: {prod.var_rejected}")
    dt = k.dt
    t_prev = k.times[:-1] - k.t0
    kv = np.asarray(k.values, dtype=float)
    drift = (varrho + nu * (varrho * t_prev + vartheta - kv[:-1])) * dt
    u_bar = (np.diff(kv) - drift) / sigma_bar
    if np.linalg.cond(prod.sigma_hat) > 1e12:
        raise EstimationError("Sigma_hat is singular; economy noise cannot be recovered")
    u_z = np.linalg.solve(prod.sigma_hat, prod.residuals.T).T
    ki, zi = _align(k, prod)
    rho = regress_rho(u_z[zi], u_bar[ki])
    norm = float(np.linalg.norm(rho))
    clamped = norm > 1.0
    if clamped:
        warnings.warn(f"|rho_hat| = {norm:.6g} exceeds 1; rescaled to unit norm", stacklevel=2)
        rho = rho / norm
    return RhoEstimate(rho, norm, clamped)


def calibrate_hpi(k: TimeSeries, prod: ProductivityEstimate | None = None, mode: str = "raw") -> HpiEstimate:
    """Trend, dynamics and (when the economy estimate is usable) the noise loadings."""
    trend = estimate_hpi_trend(k)
    nu, sigma_bar = estimate_hpi_dynamics(k, trend, mode)
    rho, clamps = None, 0
    if prod is not None and prod.sigma_hat is not None and sigma_bar > 0:
        est = estimate_rho(k, trend, (nu, sigma_bar), prod)
        rho, clamps = est.rho, int(est.clamped)
    return HpiEstimate(trend[0], trend[1], nu, sigma_bar, rho, k.t0, mode, clamps)

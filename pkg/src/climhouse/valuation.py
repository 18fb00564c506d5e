"""Dwelling values under a carbon-price transition.

An efficient dwelling is worth ``C_t = R * C0 * exp(K_t)`` where the log
housing index ``K`` mean-reverts to the linear trend ``chi_t = varrho t +
vartheta``.  An inefficient one (consumption ``alpha`` above the
market-neutral level ``alpha_star``) is worth ``C_t - R * X_t``, where ``X_t``
is the smallest achievable discounted cost of excess energy bills plus a
renovation at some date ``theta >= t``:

    H(theta) = c(alpha, alpha_star) e^{-r (theta - t)}
               + (alpha - alpha_star) int_t^theta f(delta_u) e^{-r (u - t)} du

Because the energy price is non-decreasing, ``H`` is minimised where the
energy price first reaches the annualised marginal renovation cost.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum

import numpy as np

from . import rng
from .economy import GridMismatchError, PathGrid
from .numerics import adaptive_simpson
from .scenarios import (
    CarbonScenario,
    EnergyPriceParams,
    RenovationCostParams,
    carbon_price,
    energy_price,
    renovation_cost,
)

DEFAULT_QUADRATURE_POINTS = 1024
BISECTION_TOL = 1e-9


@dataclass(frozen=True)
class HousingIndexParams:
    """Exponential-OU housing index; ``rho`` loads the index noise on the economy noise."""

    varrho: float
    vartheta: float
    nu: float
    sigma_bar: float
    rho: np.ndarray
    k0: float = 0.0

    def __post_init__(self):
        rho = np.array(self.rho, dtype=float, ndmin=1)
        if rho.ndim != 1:
            raise ValueError("rho must be a vector")
        if not self.nu > 0:
            raise ValueError(f"nu must be positive, got {self.nu}")
        if not self.sigma_bar >= 0:
            raise ValueError(f"sigma_bar must be non-negative, got {self.sigma_bar}")
        if np.linalg.norm(rho) > 1 + 1e-12:
            raise ValueError(f"|rho| must not exceed 1, got {np.linalg.norm(rho):.6g}")
        rho.setflags(write=False)
        object.__setattr__(self, "rho", rho)

    @property
    def rho_norm2(self) -> float:
        return min(1.0, float(self.rho @ self.rho))

    def chi(self, t):
        return self.varrho * np.asarray(t, dtype=float) + self.vartheta


@dataclass(frozen=True)
class Building:
    """One dwelling: price per m2 at the valuation origin, surface, efficiencies (kWh/m2/yr)."""

    name: str
    c0_price: float
    surface_r: float
    alpha: float
    alpha_star: float
    source: str = "electricity"
    rbar: float = 0.05

    def __post_init__(self):
        if not self.surface_r > 0:
            raise ValueError(f"building {self.name!r}: surface must be positive")
        if not self.rbar > 0:
            raise ValueError(f"building {self.name!r}: rbar must be positive")
        if not self.alpha >= self.alpha_star >= 0:
            raise ValueError(f"building {self.name!r}: need alpha >= alpha_star >= 0")

    @property
    def inefficiency(self) -> float:
        return self.alpha - self.alpha_star


class DecisionKind(str, Enum):
    NOW = "renovate_now"
    AT = "renovate_at"
    NEVER = "never"


@dataclass(frozen=True)
class RenovationDecision:
    kind: DecisionKind
    date: float | None = None

    def __post_init__(self):
        if (self.kind is DecisionKind.AT) != (self.date is not None):
            raise ValueError("a date is required exactly for renovate_at decisions")

    def stopping_time(self, t: float) -> float:
        """Renovation date seen from valuation time ``t`` (``inf`` for never)."""
        if self.kind is DecisionKind.NOW:
            return float(t)
        if self.kind is DecisionKind.NEVER:
            return math.inf
        return float(self.date)


@dataclass(frozen=True)
class LogNormalLaw:
    m: float | np.ndarray
    v: float

    def __post_init__(self):
        if self.v < 0:
            raise ValueError("log-variance must be non-negative")

    @property
    def mean(self):
        return np.exp(self.m + 0.5 * self.v)


# --- efficient dwelling -----------------------------------------------------


def log_index_paths(h: HousingIndexParams, z_paths: PathGrid, seed: int, origin: float | None = None) -> PathGrid:
    """Euler paths of the log index ``K`` driven by the economy's Brownian increments.

    ``origin`` is the calendar time at which ``K = k0`` (defaults to the grid
    start); the trend is evaluated in years since ``origin``.
    """
    if z_paths.increments is None:
        raise GridMismatchError("z_paths carries no Brownian increments")
    dbz = z_paths.increments
    if dbz.shape[2] != h.rho.shape[0]:
        raise GridMismatchError(
            f"rho has {h.rho.shape[0]} loadings but the economy has {dbz.shape[2]} sectors"
        )
    n_paths, n_steps = z_paths.n_paths, z_paths.n_steps
    dt = z_paths.dt
    origin = z_paths.t_start if origin is None else origin
    dw = np.sqrt(dt) * rng.standard_normals(seed, n_paths, (n_steps,), stream=rng.HOUSING)
    dbar = dbz @ h.rho + math.sqrt(1.0 - h.rho_norm2) * dw
    chi = h.chi(z_paths.times - origin)

    k = np.empty((n_paths, n_steps + 1))
    k[:, 0] = h.k0
    for j in range(1, n_steps + 1):
        prev = k[:, j - 1]
        k[:, j] = prev + (h.varrho + h.nu * (chi[j - 1] - prev)) * dt + h.sigma_bar * dbar[:, j - 1]
    return PathGrid(z_paths.t_start, z_paths.t_end, n_steps, k[:, :, None])


def efficient_value_paths(
    h: HousingIndexParams,
    building: Building,
    z_paths: PathGrid,
    seed: int,
    grid: tuple[float, float, int] | None = None,
    origin: float | None = None,
) -> PathGrid:
    """Paths of ``C_t = R * C0 * exp(K_t)`` in EUR on the economy grid."""
    if grid is not None and tuple(grid) != (z_paths.t_start, z_paths.t_end, z_paths.n_steps):
        raise GridMismatchError(f"requested grid {grid} differs from the economy grid")
    k = log_index_paths(h, z_paths, seed, origin)
    values = building.surface_r * building.c0_price * np.exp(k.values)
    return PathGrid(k.t_start, k.t_end, k.n_steps, values)


def conditional_price_law(
    h: HousingIndexParams,
    building: Building,
    t: float,
    T: float,
    bz_increments=None,
) -> LogNormalLaw:
    """Law of ``C_{t+T}`` given the economy noise up to ``t`` (times since the origin).

    ``bz_increments`` holds the Brownian increments on a uniform grid over
    ``[0, t]``, shape ``(n, I)`` or ``(n_paths, n, I)``; the stochastic integral
    is the left-point sum along it.
    """
    if t < 0 or T < 0:
        raise ValueError("t and T must be non-negative")
    nu, sb = h.nu, h.sigma_bar
    m = (math.log(building.surface_r * building.c0_price) + float(h.chi(t + T))
         - (h.vartheta - h.k0) * math.exp(-nu * (t + T)))
    if t > 0 and sb > 0 and np.any(h.rho != 0):
        if bz_increments is None:
            raise ValueError("the economy noise path up to t is required when t > 0")
        dbz = np.asarray(bz_increments, dtype=float)
        n = dbz.shape[-2]
        s_left = t / n * np.arange(n)
        weights = np.exp(-nu * (t + T - s_left))
        m = m + sb * np.einsum("...ki,k,i->...", dbz, weights, h.rho)
    r2 = h.rho_norm2
    v = (sb**2 * r2 * -math.expm1(-2 * nu * T) / (2 * nu)
         + sb**2 * (1 - r2) * -math.expm1(-2 * nu * (t + T)) / (2 * nu))
    return LogNormalLaw(m, v)


# --- renovation decision ----------------------------------------------------


def marginal_threshold(building: Building, costs: RenovationCostParams) -> float:
    """Energy price (EUR/kWh) at which renovating becomes worthwhile: ``rbar * c / (alpha - alpha_star)``."""
    gap = building.inefficiency
    if gap <= 0:
        raise ValueError(f"building {building.name!r} is already efficient; threshold undefined")
    return building.rbar * renovation_cost(costs, building.alpha, building.alpha_star) / gap


def _price_at(scenario: CarbonScenario, energy: EnergyPriceParams, s: float) -> float:
    return energy_price(energy, carbon_price(scenario, s))


def _bisect_crossing(g, lo: float, hi: float, tol: float = BISECTION_TOL) -> float:
    """Smallest ``s`` in ``(lo, hi]`` with ``g(s) >= 0`` for non-decreasing ``g``, ``g(lo) < 0 <= g(hi)``."""
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        if g(mid) >= 0:
            hi = mid
        else:
            lo = mid
    return hi


def optimal_renovation_date(
    building: Building,
    scenario: CarbonScenario,
    energy: EnergyPriceParams,
    costs: RenovationCostParams,
    t: float,
    method: str = "closed_form",
) -> RenovationDecision:
    """Optimal renovation decision seen from calendar time ``t``.

    ``method="closed_form"`` inverts the exponential carbon path directly and
    falls back to bisection if the inversion is unavailable or lands outside
    the window; ``method="bisection"`` always bisects.
    """
    if method not in ("closed_form", "bisection"):
        raise ValueError(f"unknown method {method!r}")
    if not math.isfinite(t):
        raise ValueError("valuation time must be finite")
    if building.inefficiency == 0:
        return RenovationDecision(DecisionKind.NEVER)
    tau = marginal_threshold(building, costs)

    if _price_at(scenario, energy, t) >= tau:
        return RenovationDecision(DecisionKind.NOW)
    t_star = scenario.t_end_transition
    if t >= t_star or _price_at(scenario, energy, t_star) < tau:
        return RenovationDecision(DecisionKind.NEVER)

    # The crossing lies in (max(t, t_start), t_star].
    lo = max(t, scenario.t_start_transition)
    theta = math.nan
    if method == "closed_form" and energy.f1 > 0 and scenario.eta_delta > 0:
        ratio = (tau - energy.f0) / (energy.f1 * scenario.p_carbon0)
        if ratio > 0:
            theta = scenario.t_start_transition + math.log(ratio) / scenario.eta_delta
    if not lo < theta <= t_star:
        if theta <= lo:
            return RenovationDecision(DecisionKind.NOW)
        theta = _bisect_crossing(lambda s: _price_at(scenario, energy, s) - tau, lo, t_star)
    return RenovationDecision(DecisionKind.AT, theta)


def discounted_energy_price(
    scenario: CarbonScenario,
    energy: EnergyPriceParams,
    rbar: float,
    t: float,
    a: float,
    b: float,
) -> float:
    """Exact ``int_a^b f(delta_u) e^{-rbar (u - t)} du`` for the piecewise-exponential carbon path (``b`` may be inf)."""
    if b <= a:
        return 0.0
    t0, t1 = scenario.t_start_transition, scenario.t_end_transition
    p0, eta = scenario.p_carbon0, scenario.eta_delta

    def disc(lo, hi):
        # int_lo^hi e^{-r(u-t)} du
        upper = 0.0 if math.isinf(hi) else math.exp(-rbar * (hi - t))
        return (math.exp(-rbar * (lo - t)) - upper) / rbar

    total = energy.f0 * disc(a, b)
    # carbon part: flat before t0, exponential on (t0, t1], flat after t1
    lo, hi = a, min(b, t0)
    if hi > lo:
        total += energy.f1 * p0 * disc(lo, hi)
    lo, hi = max(a, t0), min(b, t1)
    if hi > lo:
        k = eta - rbar
        start = p0 * math.exp(eta * (lo - t0) - rbar * (lo - t))
        span = hi - lo
        total += energy.f1 * start * (span if k == 0 else math.expm1(k * span) / k)
    lo, hi = max(a, t1), b
    if hi > lo:
        total += energy.f1 * scenario.plateau * disc(lo, hi)
    return total


def h_objective(
    building: Building,
    scenario: CarbonScenario,
    energy: EnergyPriceParams,
    costs: RenovationCostParams,
    t: float,
    theta: float,
) -> float:
    """Discounted cost (EUR/m2) of renovating at ``theta`` seen from ``t``; ``theta=inf`` means never."""
    if theta < t:
        raise ValueError("theta must not precede the valuation time")
    if building.inefficiency == 0:
        return 0.0
    r = building.rbar
    c = renovation_cost(costs, building.alpha, building.alpha_star)
    reno = 0.0 if math.isinf(theta) else c * math.exp(-r * (theta - t))
    return reno + building.inefficiency * discounted_energy_price(scenario, energy, r, t, t, theta)


def _energy_integral(scenario, energy, r, t, end, points, method):
    if end <= t:
        return 0.0
    if method == "exact":
        return discounted_energy_price(scenario, energy, r, t, t, end)

    def integrand(u):
        return _price_at(scenario, energy, u) * math.exp(-r * (u - t))

    if method == "simpson":
        return float(adaptive_simpson(integrand, t, end, rtol=1e-12))
    step = (end - t) / points
    nodes = t + step * np.arange(points)
    values = energy_price(energy, carbon_price(scenario, nodes)) * np.exp(-r * (nodes - t))
    return float(step * values.sum())


def transition_cost_x(
    building: Building,
    scenario: CarbonScenario,
    energy: EnergyPriceParams,
    costs: RenovationCostParams,
    t: float,
    quadrature_points: int = DEFAULT_QUADRATURE_POINTS,
    method: str = "rectangle",
    decision: RenovationDecision | None = None,
) -> float:
    """Per-m2 transition cost ``X_t`` (EUR/m2).

    The energy integral up to the renovation date uses ``quadrature_points``
    left-rectangle nodes (``method="rectangle"``), adaptive Simpson
    (``"simpson"``) or the closed form (``"exact"``).  When the dwelling is
    never renovated, the integral stops at the end of the transition and the
    flat tail is added in closed form.  A ``decision`` taken earlier may be
    supplied (frozen mode); a date already passed means renovating at ``t``.
    """
    if quadrature_points < 1:
        raise ValueError("quadrature_points must be positive")
    if method not in ("rectangle", "simpson", "exact"):
        raise ValueError(f"unknown quadrature method {method!r}")
    gap = building.inefficiency
    if gap == 0:
        return 0.0
    if decision is None:
        decision = optimal_renovation_date(building, scenario, energy, costs, t)
    r = building.rbar
    theta = max(decision.stopping_time(t), t)
    c = renovation_cost(costs, building.alpha, building.alpha_star)

    if math.isinf(theta):
        split = max(t, scenario.t_end_transition)
        head = _energy_integral(scenario, energy, r, t, split, quadrature_points, method)
        tail = _price_at(scenario, energy, split) * math.exp(-r * (split - t)) / r
        return gap * (head + tail)
    head = _energy_integral(scenario, energy, r, t, theta, quadrature_points, method)
    return c * math.exp(-r * (theta - t)) + gap * head


def climate_adjusted_value(efficient_value, building: Building, x: float):
    """``C_t - R * X_t``; may be negative."""
    if x < 0:
        raise ValueError("transition cost must be non-negative")
    return efficient_value - building.surface_r * x

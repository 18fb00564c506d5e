"""Deterministic carbon-price scenarios, energy prices and renovation costs."""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class CarbonScenario:
    """Carbon price (EUR/tCO2) flat at ``p_carbon0`` until ``t_start_transition``,
    growing at rate ``eta_delta`` per year until ``t_end_transition``, flat afterwards.
    Times are calendar years.
    """

    name: str
    t_start_transition: float
    t_end_transition: float
    p_carbon0: float
    eta_delta: float

    def __post_init__(self):
        if not self.t_end_transition > self.t_start_transition:
            raise ValueError(f"scenario {self.name!r}: t_end must exceed t_start")
        if not self.p_carbon0 > 0:
            raise ValueError(f"scenario {self.name!r}: p_carbon0 must be positive")
        if not self.eta_delta >= 0:
            raise ValueError(f"scenario {self.name!r}: eta_delta must be non-negative")

    @property
    def plateau(self) -> float:
        return carbon_price(self, self.t_end_transition)


def carbon_price(scenario: CarbonScenario, t):
    """Carbon price at calendar time(s) ``t``; the argument is clamped to the transition window."""
    s = np.clip(np.asarray(t, dtype=float), scenario.t_start_transition, scenario.t_end_transition)
    out = scenario.p_carbon0 * np.exp(scenario.eta_delta * (s - scenario.t_start_transition))
    return float(out) if out.ndim == 0 else out


@dataclass(frozen=True)
class EnergyPriceParams:
    """Linear energy price ``f1 * delta + f0`` in EUR/kWh for one energy source."""

    source: str
    f1: float
    f0: float

    def __post_init__(self):
        if not self.f1 >= 0:
            raise ValueError(f"energy source {self.source!r}: f1 must be non-negative")


def energy_price(p: EnergyPriceParams, delta):
    d = np.asarray(delta, dtype=float)
    if np.any(d < 0):
        raise ValueError("carbon price must be non-negative")
    out = p.f1 * d + p.f0
    return float(out) if out.ndim == 0 else out


@dataclass(frozen=True)
class EnergySource:
    """Configured energy source: either an explicit intercept ``f0`` or an anchor
    price ``p0`` reached at each scenario's initial carbon price
    (``f0 = p0 - f1 * p_carbon0``).
    """

    source: str
    f1: float
    f0: float | None = None
    p0: float | None = None

    def __post_init__(self):
        if (self.f0 is None) == (self.p0 is None):
            raise ValueError(f"energy source {self.source!r}: give exactly one of f0 or p0")

    def params_for(self, scenario: CarbonScenario) -> EnergyPriceParams:
        f0 = self.f0 if self.f0 is not None else self.p0 - self.f1 * scenario.p_carbon0
        return EnergyPriceParams(self.source, self.f1, f0)


def check_energy_nonnegative(p: EnergyPriceParams, scenario: CarbonScenario) -> bool:
    """Warn (and return False) if the energy price goes negative on the transition window.

    The price is non-decreasing in time, so the check at the window start suffices.
    """
    lowest = energy_price(p, carbon_price(scenario, scenario.t_start_transition))
    if lowest < 0:
        warnings.warn(
            f"energy price for {p.source!r} is negative ({lowest:.6g} EUR/kWh) "
            f"at the start of scenario {scenario.name!r}",
            stacklevel=2,
        )
        return False
    return True


@dataclass(frozen=True)
class RenovationCostParams:
    """Renovation cost ``c0 * |alpha - alpha_star| ** (1 + c1)`` in EUR/m2."""

    c0: float
    c1: float

    def __post_init__(self):
        if not self.c0 > 0:
            raise ValueError("renovation c0 must be positive")
        if not self.c1 >= -1:
            raise ValueError("renovation c1 must be >= -1")


def renovation_cost(p: RenovationCostParams, alpha: float, alpha_star: float) -> float:
    if alpha < 0 or alpha_star < 0:
        raise ValueError("energy efficiencies must be non-negative")
    return p.c0 * abs(alpha - alpha_star) ** (1.0 + p.c1)


# NGFS carbon price parameters for France, transition 2021-2030.
_NGFS = (
    ("Current Policies", 30.957, 0.01693),
    ("NDCs", 33.321, 0.07994),
    ("Divergent Net Zero", 32.963, 0.12893),
    ("Net Zero 2050", 34.315, 0.17935),
)


def scenario_library() -> list[CarbonScenario]:
    """The four built-in NGFS scenarios, from least to most stringent."""
    return [CarbonScenario(name, 2021.0, 2030.0, p0, eta) for name, p0, eta in _NGFS]

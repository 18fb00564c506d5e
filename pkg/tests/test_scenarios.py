import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from climhouse.scenarios import (
    CarbonScenario,
    EnergyPriceParams,
    EnergySource,
    RenovationCostParams,
    carbon_price,
    check_energy_nonnegative,
    energy_price,
    renovation_cost,
    scenario_library,
)

TABLE = {
    "Current Policies": (30.957, 0.01693),
    "NDCs": (33.321, 0.07994),
    "Divergent Net Zero": (32.963, 0.12893),
    "Net Zero 2050": (34.315, 0.17935),
}


@pytest.fixture
def net_zero():
    return CarbonScenario("Net Zero 2050", 2021.0, 2030.0, 34.315, 0.17935)


def test_carbon_price_at_start(net_zero):
    assert carbon_price(net_zero, 2021.0) == 34.315
    assert carbon_price(net_zero, 1990.0) == 34.315


def test_carbon_price_end_of_window(net_zero):
    assert carbon_price(net_zero, 2030.0) == pytest.approx(172.39, abs=5e-3)


def test_carbon_price_plateau(net_zero):
    assert carbon_price(net_zero, 2040.0) == carbon_price(net_zero, 2030.0)


def test_carbon_price_vectorised(net_zero):
    t = np.array([2000.0, 2025.0, 2050.0])
    got = carbon_price(net_zero, t)
    assert got.shape == (3,)
    assert got[1] == pytest.approx(34.315 * math.exp(0.17935 * 4), rel=1e-14)


@pytest.mark.parametrize(
    "kw",
    [
        dict(t_start_transition=2030.0, t_end_transition=2030.0),
        dict(p_carbon0=0.0),
        dict(eta_delta=-0.1),
    ],
)
def test_scenario_invariants(kw):
    base = dict(name="x", t_start_transition=2021.0, t_end_transition=2030.0, p_carbon0=30.0, eta_delta=0.1)
    base.update(kw)
    with pytest.raises(ValueError):
        CarbonScenario(**base)


def test_library_matches_table():
    lib = scenario_library()
    assert len(lib) == 4
    assert len({s.name for s in lib}) == 4
    for s in lib:
        assert (s.p_carbon0, s.eta_delta) == TABLE[s.name]
        assert (s.t_start_transition, s.t_end_transition) == (2021.0, 2030.0)


def test_energy_price_examples():
    assert energy_price(EnergyPriceParams("e", 0.01, 0.1), 50.0) == pytest.approx(0.6)
    assert energy_price(EnergyPriceParams("e", 0.3, -2.0), 0.0) == -2.0


def test_energy_anchor_reproduces_base_price():
    scn = scenario_library()[0]
    params = EnergySource("electricity", 0.55, p0=0.2161).params_for(scn)
    assert params.f0 < 0
    assert energy_price(params, scn.p_carbon0) == pytest.approx(0.2161, abs=1e-12)


def test_energy_rejects_negative_carbon_price():
    with pytest.raises(ValueError):
        energy_price(EnergyPriceParams("e", 0.01, 0.1), -1.0)


def test_energy_source_needs_exactly_one_intercept():
    with pytest.raises(ValueError):
        EnergySource("e", 0.1)
    with pytest.raises(ValueError):
        EnergySource("e", 0.1, f0=0.0, p0=0.2)


def test_negative_energy_price_warns():
    scn = scenario_library()[0]
    with pytest.warns(UserWarning, match="negative"):
        assert not check_energy_nonnegative(EnergyPriceParams("e", 0.001, -1.0), scn)
    assert check_energy_nonnegative(EnergySource("e", 0.55, p0=0.2161).params_for(scn), scn)


def test_renovation_cost_examples():
    p = RenovationCostParams(0.01, 0.1)
    assert renovation_cost(p, 70.0, 70.0) == 0.0
    # 0.01 * 250 ** 1.1 evaluated directly
    assert renovation_cost(p, 320.0, 70.0) == pytest.approx(4.342442, abs=1e-6)
    assert renovation_cost(p, 320.0, 70.0) == pytest.approx(4.3407, rel=1e-3)
    assert renovation_cost(RenovationCostParams(2.5, -1.0), 10.0, 3.0) == 2.5


def test_renovation_cost_symmetric_and_validated():
    p = RenovationCostParams(1.0, 0.2)
    assert renovation_cost(p, 3.0, 10.0) == renovation_cost(p, 10.0, 3.0)
    with pytest.raises(ValueError):
        renovation_cost(p, -1.0, 0.0)
    with pytest.raises(ValueError):
        RenovationCostParams(1.0, -1.5)


@pytest.mark.parametrize("scn", scenario_library(), ids=lambda s: s.name)
def test_carbon_price_monotone_and_continuous(scn):
    t = np.linspace(2010.0, 2045.0, 35_001)
    p = carbon_price(scn, t)
    assert np.all(np.diff(p) >= 0)
    # step of 1e-3 years: jumps bounded by the local growth
    assert np.max(np.abs(np.diff(p))) <= scn.plateau * scn.eta_delta * 1e-3 * 1.01


@settings(max_examples=100, deadline=None)
@given(
    st.floats(1.0, 100.0),
    st.floats(0.0, 0.5),
    st.floats(0.0, 1.0),
    st.floats(-1.0, 1.0),
    st.lists(st.floats(2000.0, 2050.0), min_size=2, max_size=20),
)
def test_energy_along_path_non_decreasing(p0, eta, f1, f0, times):
    scn = CarbonScenario("h", 2021.0, 2030.0, p0, eta)
    t = np.sort(np.array(times))
    f = energy_price(EnergyPriceParams("e", f1, f0), carbon_price(scn, t))
    assert np.all(np.diff(f) >= -1e-12 * np.abs(f).max())


@settings(max_examples=100, deadline=None)
@given(st.floats(0.01, 10.0), st.floats(-1.0, 2.0), st.floats(0.0, 500.0), st.floats(0.0, 500.0))
def test_renovation_cost_monotone_in_gap(c0, c1, gap1, gap2):
    p = RenovationCostParams(c0, c1)
    lo, hi = sorted((gap1, gap2))
    assert renovation_cost(p, lo, 0.0) <= renovation_cost(p, hi, 0.0) + 1e-12


def test_library_ordering_after_first_year():
    lib = scenario_library()
    for t in np.linspace(2022.0, 2040.0, 181):
        prices = [carbon_price(s, t) for s in lib]
        assert prices == sorted(prices), t

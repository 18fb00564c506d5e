"""Run configuration: YAML loading, validation with field-path diagnostics, serialisation."""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path
from typing import Any

import numpy as np
import yaml

from .calibration import HPI_MODES, calibrate_hpi, estimate_productivity
from .data import read_hpi_csv, read_productivity_csv
from .economy import ProductivityParams
from .harness import SweepSpec
from .scenarios import CarbonScenario, EnergySource, RenovationCostParams, scenario_library
from .valuation import Building, HousingIndexParams

BUILTIN_PREFIX = "builtin:"


class ConfigError(ValueError):
    """Invalid configuration; ``field`` is a dotted path into the config tree."""

    def __init__(self, field_path: str, message: str):
        self.field = field_path
        super().__init__(f"{field_path}: {message}" if field_path else message)


@dataclass
class SweepSettings:
    t_grid: list[float]
    paths: int = 1000
    seed: int = 0
    quadrature_points: int = 1024
    quadrature: str = "rectangle"
    steps_per_year: int = 12
    origin: float | None = None
    normalize: bool = False
    mode: str = "reoptimize"
    reference: str | None = None
    slowdown_from: float | None = None
    slowdown_to: float | None = None


@dataclass
class RunConfig:
    scenarios: list[CarbonScenario]
    energy: dict[str, EnergySource]
    costs: RenovationCostParams
    buildings: list[Building]
    sweep: SweepSettings
    economy: ProductivityParams | None = None
    economy_data: Path | None = None
    z0: str = "default"
    housing: HousingIndexParams | None = None
    housing_data: Path | None = None
    hpi_mode: str = "raw"
    output_dir: Path = Path("out")
    output_format: str = "csv"
    source: str = ""
    raw: dict = field(default_factory=dict, repr=False)

    @property
    def origin(self) -> float:
        if self.sweep.origin is not None:
            return self.sweep.origin
        return min(s.t_start_transition for s in self.scenarios)

    def scenario(self, name: str) -> CarbonScenario:
        for s in self.scenarios:
            if s.name == name:
                return s
        raise KeyError(f"unknown scenario {name!r}; available: {', '.join(s.name for s in self.scenarios)}")

    def building(self, name: str) -> Building:
        for b in self.buildings:
            if b.name == name:
                return b
        raise KeyError(f"unknown building {name!r}; available: {', '.join(b.name for b in self.buildings)}")

    def sweep_spec(self) -> SweepSpec:
        s = self.sweep
        return SweepSpec(
            self.scenarios, self.buildings, s.t_grid, s.paths, s.seed, self.energy, self.costs,
            s.quadrature_points, s.quadrature, s.steps_per_year, s.origin, s.normalize, s.mode, s.reference,
        )


# --- field access helpers ---------------------------------------------------


def _path(parent: str, key) -> str:
    if isinstance(key, int):
        return f"{parent}[{key}]"
    return f"{parent}.{key}" if parent else str(key)


def _mapping(value, where: str) -> dict:
    if not isinstance(value, dict):
        raise ConfigError(where, f"expected a mapping, got {type(value).__name__}")
    return value


def _number(d: dict, key: str, where: str, default=None, required=True) -> float:
    p = _path(where, key)
    if key not in d or d[key] is None:
        if required and default is None:
            raise ConfigError(p, "is required")
        return default
    value = d[key]
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ConfigError(p, f"expected a number, got {value!r}")
    if not math.isfinite(value):
        raise ConfigError(p, "must be finite")
    return float(value)


def _integer(d: dict, key: str, where: str, default: int, minimum: int = 0) -> int:
    p = _path(where, key)
    value = d.get(key, default)
    if isinstance(value, bool) or not isinstance(value, int):
        raise ConfigError(p, f"expected an integer, got {value!r}")
    if value < minimum:
        raise ConfigError(p, f"must be >= {minimum}")
    return value


def _string(d: dict, key: str, where: str, default=None, choices=None) -> str:
    p = _path(where, key)
    value = d.get(key, default)
    if value is None:
        raise ConfigError(p, "is required")
    if not isinstance(value, str):
        raise ConfigError(p, f"expected a string, got {value!r}")
    if choices is not None and value not in choices:
        raise ConfigError(p, f"must be one of {', '.join(choices)}, got {value!r}")
    return value


def _boolean(d: dict, key: str, where: str, default: bool) -> bool:
    value = d.get(key, default)
    if not isinstance(value, bool):
        raise ConfigError(_path(where, key), f"expected true or false, got {value!r}")
    return value


def _array(d: dict, key: str, where: str, ndim: int, required=True):
    p = _path(where, key)
    if key not in d or d[key] is None:
        if required:
            raise ConfigError(p, "is required")
        return None
    try:
        arr = np.array(d[key], dtype=float)
    except (TypeError, ValueError):
        raise ConfigError(p, "expected a numeric array") from None
    if arr.ndim != ndim:
        raise ConfigError(p, f"expected a {ndim}-D array, got {arr.ndim}-D")
    if not np.all(np.isfinite(arr)):
        raise ConfigError(p, "entries must be finite")
    return arr


def _unknown_keys(d: dict, allowed: set, where: str) -> None:
    extra = sorted(set(d) - allowed, key=str)
    if extra:
        raise ConfigError(_path(where, extra[0]), "unknown key")


def _build(where: str, factory, *args, **kwargs):
    """Run a domain constructor, mapping its ValueError onto the config path."""
    try:
        with warnings.catch_warnings():
            warnings.simplefilter("error", RuntimeWarning)
            return factory(*args, **kwargs)
    except ValueError as exc:
        raise ConfigError(where, str(exc)) from None


def _data_path(d: dict, where: str, base: Path) -> Path:
    p = _path(where, "data")
    value = d["data"]
    if not isinstance(value, str):
        raise ConfigError(p, f"expected a file path, got {value!r}")
    path = Path(value)
    if not path.is_absolute():
        path = base / path
    if not path.is_file():
        raise ConfigError(p, f"file not found: {path}")
    return path


# --- sections ---------------------------------------------------------------

_ECON_KEYS = {"mu", "gamma", "sigma", "varsigma", "a0", "z0", "check_stability", "data"}
_HOUSING_KEYS = {"varrho", "vartheta", "nu", "sigma_bar", "rho", "k0", "data", "mode"}


def _economy(d, base: Path):
    where = "economy"
    d = _mapping(d, where)
    _unknown_keys(d, _ECON_KEYS, where)
    z0 = _string(d, "z0", where, "default", ("default", "stationary"))
    inline = {"mu", "gamma", "sigma"} & set(d)
    if "data" in d:
        if inline:
            raise ConfigError(_path(where, sorted(inline)[0]), "give either data or inline parameters, not both")
        return None, _data_path(d, where, base), z0
    if not inline:
        raise ConfigError(where, "either data or inline parameters (mu, gamma, sigma) are required")
    mu = _array(d, "mu", where, 1)
    gamma = _array(d, "gamma", where, 2)
    sigma = _array(d, "sigma", where, 2)
    varsigma = _number(d, "varsigma", where, 1.0)
    a0 = _array(d, "a0", where, 1, required=False)
    check = _boolean(d, "check_stability", where, True)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        params = _build(where, ProductivityParams, mu, gamma, sigma, varsigma, a0, check_stability=check)
    if z0 == "stationary":
        params = _build(_path(where, "z0"), params.with_stationary_z0)
    return params, None, z0


def _housing(d, base: Path):
    where = "housing"
    d = _mapping(d, where)
    _unknown_keys(d, _HOUSING_KEYS, where)
    mode = _string(d, "mode", where, "raw", HPI_MODES)
    inline = {"varrho", "vartheta", "nu", "sigma_bar", "rho"} & set(d)
    if "data" in d:
        if inline:
            raise ConfigError(_path(where, sorted(inline)[0]), "give either data or inline parameters, not both")
        return None, _data_path(d, where, base), mode
    if not inline:
        raise ConfigError(where, "either data or inline parameters are required")
    h = _build(
        where, HousingIndexParams,
        _number(d, "varrho", where), _number(d, "vartheta", where), _number(d, "nu", where),
        _number(d, "sigma_bar", where), _array(d, "rho", where, 1), _number(d, "k0", where, 0.0),
    )
    return h, None, mode


def _scenarios(value) -> list[CarbonScenario]:
    where = "scenarios"
    if value == "builtin":
        return scenario_library()
    if not isinstance(value, list) or not value:
        raise ConfigError(where, "expected a non-empty list of scenarios or the string 'builtin'")
    out = []
    for i, item in enumerate(value):
        w = _path(where, i)
        item = _mapping(item, w)
        _unknown_keys(item, {"name", "t_start", "t_end", "p_carbon0", "eta_delta"}, w)
        out.append(_build(
            w, CarbonScenario, _string(item, "name", w), _number(item, "t_start", w),
            _number(item, "t_end", w), _number(item, "p_carbon0", w), _number(item, "eta_delta", w),
        ))
    names = [s.name for s in out]
    if len(set(names)) != len(names):
        raise ConfigError(where, "scenario names must be distinct")
    return out


def _energy(value) -> dict[str, EnergySource]:
    where = "energy"
    if not isinstance(value, list) or not value:
        raise ConfigError(where, "expected a non-empty list of energy sources")
    out = {}
    for i, item in enumerate(value):
        w = _path(where, i)
        item = _mapping(item, w)
        _unknown_keys(item, {"source", "f1", "f0", "p0"}, w)
        name = _string(item, "source", w)
        if name in out:
            raise ConfigError(_path(w, "source"), f"duplicate energy source {name!r}")
        if ("f0" in item) == ("p0" in item):
            raise ConfigError(w, "give exactly one of f0 or p0")
        f1 = _number(item, "f1", w)
        if f1 < 0:
            raise ConfigError(_path(w, "f1"), "must be non-negative")
        out[name] = _build(w, EnergySource, name, f1,
                           _number(item, "f0", w, required=False), _number(item, "p0", w, required=False))
    return out


def _costs(value) -> RenovationCostParams:
    where = "renovation"
    d = _mapping(value, where)
    _unknown_keys(d, {"c0", "c1"}, where)
    return _build(where, RenovationCostParams, _number(d, "c0", where), _number(d, "c1", where))


def _buildings(value, energy: dict) -> list[Building]:
    where = "buildings"
    if not isinstance(value, list) or not value:
        raise ConfigError(where, "expected a non-empty list of buildings")
    out = []
    for i, item in enumerate(value):
        w = _path(where, i)
        item = _mapping(item, w)
        _unknown_keys(item, {"name", "c0_price", "surface", "alpha", "alpha_star", "source", "rbar"}, w)
        source = _string(item, "source", w, "electricity")
        if source not in energy:
            raise ConfigError(_path(w, "source"), f"unknown energy source {source!r}")
        out.append(_build(
            w, Building, _string(item, "name", w), _number(item, "c0_price", w), _number(item, "surface", w),
            _number(item, "alpha", w), _number(item, "alpha_star", w), source, _number(item, "rbar", w, 0.05),
        ))
    names = [b.name for b in out]
    if len(set(names)) != len(names):
        raise ConfigError(where, "building names must be distinct")
    return out


def _t_grid(value, where: str) -> list[float]:
    if isinstance(value, dict):
        _unknown_keys(value, {"start", "stop", "step"}, where)
        start, stop = _number(value, "start", where), _number(value, "stop", where)
        step = _number(value, "step", where, 1.0)
        if step <= 0:
            raise ConfigError(_path(where, "step"), "must be positive")
        n = int(math.floor((stop - start) / step + 1e-9))
        return [start + k * step for k in range(n + 1)] if stop >= start else []
    if not isinstance(value, list):
        raise ConfigError(where, "expected a list of years or {start, stop, step}")
    grid = []
    for i, t in enumerate(value):
        if isinstance(t, bool) or not isinstance(t, (int, float)) or not math.isfinite(t):
            raise ConfigError(_path(where, i), f"expected a finite year, got {t!r}")
        grid.append(float(t))
    if any(b <= a for a, b in zip(grid, grid[1:])):
        raise ConfigError(where, "years must be strictly increasing")
    return grid


def _sweep(value, scenarios) -> SweepSettings:
    where = "sweep"
    d = _mapping(value if value is not None else {}, where)
    _unknown_keys(d, {"t_grid", "paths", "seed", "quadrature_points", "quadrature", "steps_per_year",
                      "origin", "normalize", "mode", "reference", "slowdown"}, where)
    t0 = min(s.t_start_transition for s in scenarios)
    grid = _t_grid(d.get("t_grid", {"start": t0, "stop": max(s.t_end_transition for s in scenarios)}),
                   _path(where, "t_grid"))
    origin = _number(d, "origin", where, required=False)
    start = origin if origin is not None else t0
    if grid and grid[0] < start:
        raise ConfigError(_path(where, "t_grid"), f"starts at {grid[0]}, before the origin {start}")
    reference = d.get("reference")
    names = [s.name for s in scenarios]
    if reference is not None and reference not in names:
        raise ConfigError(_path(where, "reference"), f"unknown scenario {reference!r}; available: {', '.join(names)}")
    s_from = s_to = None
    if "slowdown" in d:
        sw = _path(where, "slowdown")
        sd = _mapping(d["slowdown"], sw)
        _unknown_keys(sd, {"from", "to"}, sw)
        s_from, s_to = _number(sd, "from", sw), _number(sd, "to", sw)
        for key, t in (("from", s_from), ("to", s_to)):
            if t not in grid:
                raise ConfigError(_path(sw, key), f"{t} is not on the t_grid")
        if not s_to > s_from:
            raise ConfigError(_path(sw, "to"), "must exceed slowdown.from")
    seed = _integer(d, "seed", where, 0)
    return SweepSettings(
        t_grid=grid,
        paths=_integer(d, "paths", where, 1000, 1),
        seed=seed,
        quadrature_points=_integer(d, "quadrature_points", where, 1024, 1),
        quadrature=_string(d, "quadrature", where, "rectangle", ("rectangle", "simpson", "exact")),
        steps_per_year=_integer(d, "steps_per_year", where, 12, 1),
        origin=origin,
        normalize=_boolean(d, "normalize", where, False),
        mode=_string(d, "mode", where, "reoptimize", ("reoptimize", "frozen")),
        reference=reference,
        slowdown_from=s_from,
        slowdown_to=s_to,
    )


_TOP_KEYS = {"economy", "housing", "scenarios", "energy", "renovation", "buildings", "sweep", "output",
             "version", "slowdown_definition", "reference_scenario", "normalization", "calibration"}


def parse_config(doc: Any, base: Path = Path("."), source: str = "") -> RunConfig:
    """Validate a config tree; every problem raises :class:`ConfigError` naming the field."""
    doc = _mapping(doc, "")
    _unknown_keys(doc, _TOP_KEYS, "")
    for key in ("economy", "housing", "scenarios", "energy", "renovation", "buildings"):
        if key not in doc:
            raise ConfigError(key, "section is required")
    economy, economy_data, z0 = _economy(doc["economy"], base)
    housing, housing_data, hpi_mode = _housing(doc["housing"], base)
    scenarios = _scenarios(doc["scenarios"])
    energy = _energy(doc["energy"])
    costs = _costs(doc["renovation"])
    buildings = _buildings(doc["buildings"], energy)
    sweep = _sweep(doc.get("sweep"), scenarios)
    if economy is not None and housing is not None and economy.n_sectors != housing.rho.shape[0]:
        raise ConfigError("housing.rho", f"expected {economy.n_sectors} loadings, got {housing.rho.shape[0]}")
    out = _mapping(doc.get("output", {}) or {}, "output")
    _unknown_keys(out, {"directory", "format"}, "output")
    out_dir = Path(_string(out, "directory", "output", "out"))
    if not out_dir.is_absolute():
        out_dir = base / out_dir
    fmt = _string(out, "format", "output", "csv", ("csv",))
    return RunConfig(scenarios, energy, costs, buildings, sweep, economy, economy_data, z0, housing,
                     housing_data, hpi_mode, out_dir, fmt, source, doc)


def load_config(spec: str) -> RunConfig:
    """Load ``builtin:NAME`` or a YAML/JSON file path."""
    if spec.startswith(BUILTIN_PREFIX):
        name = spec[len(BUILTIN_PREFIX):]
        res = resources.files("climhouse") / "builtin" / f"{name}.yaml"
        if not res.is_file():
            available = sorted(p.name[:-5] for p in (resources.files("climhouse") / "builtin").iterdir()
                               if p.name.endswith(".yaml"))
            raise ConfigError("", f"unknown built-in config {name!r}; available: {', '.join(available)}")
        text, base = res.read_text(), Path.cwd()
    else:
        path = Path(spec)
        if not path.is_file():
            raise ConfigError("", f"config file not found: {path}")
        text, base = path.read_text(), path.resolve().parent
    try:
        doc = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        raise ConfigError("", f"{spec}: not valid YAML ({exc})") from None
    return parse_config(doc, base, spec)


# --- resolution and serialisation --------------------------------------------


def resolve_models(cfg: RunConfig) -> tuple[ProductivityParams, HousingIndexParams, dict]:
    """Inline parameters, calibrating from the referenced CSV files when needed.

    Returns the economy, the housing index and a report of any estimates.
    Estimated housing trends are shifted so ``chi`` is measured from the run origin.
    """
    report: dict = {}
    econ = cfg.economy
    prod = None
    if econ is None:
        series = read_productivity_csv(cfg.economy_data)
        prod = estimate_productivity(series)
        if prod.gamma_hat is None:
            raise ConfigError("economy.data", f"cannot calibrate: {prod.var_rejected}")
        varsigma = min(1.0, prod.varsigma_hat) if prod.varsigma_hat > 0 else 1.0
        if prod.varsigma_hat > 1:
            warnings.warn(f"estimated varsigma {prod.varsigma_hat:.6g} exceeds 1; capped at 1", stacklevel=2)
        econ = _build("economy.data", ProductivityParams, prod.mu_hat, prod.gamma_hat, prod.sigma_hat,
                      varsigma, check_stability=False)
        if cfg.z0 == "stationary":
            econ = _build("economy.z0", econ.with_stationary_z0)
        report["productivity"] = productivity_report(prod)
    h = cfg.housing
    if h is None:
        k = read_hpi_csv(cfg.housing_data)
        est = calibrate_hpi(k, prod, cfg.hpi_mode)
        rho = est.rho_hat if est.rho_hat is not None else np.zeros(econ.n_sectors)
        if est.rho_hat is None:
            warnings.warn("housing noise loadings not estimated (no productivity data); using rho = 0",
                          stacklevel=2)
        vartheta = est.vartheta_hat + est.varrho_hat * (cfg.origin - est.trend_origin)
        h = _build("housing.data", HousingIndexParams, est.varrho_hat, vartheta, max(est.nu_hat, 1e-12),
                   est.sigma_bar_hat, rho, 0.0)
        report["hpi"] = hpi_report(est)
    if h.rho.shape[0] != econ.n_sectors:
        raise ConfigError("housing.rho", f"expected {econ.n_sectors} loadings, got {h.rho.shape[0]}")
    return econ, h, report


def productivity_report(prod) -> dict:
    out = {"mu_hat": prod.mu_hat.tolist(), "varsigma_hat": prod.varsigma_hat}
    if prod.gamma_hat is None:
        out["var_rejected"] = prod.var_rejected
    else:
        out["gamma_hat"] = prod.gamma_hat.tolist()
        out["sigma_hat"] = prod.sigma_hat.tolist()
    return out


def hpi_report(est) -> dict:
    return {
        "varrho_hat": est.varrho_hat,
        "vartheta_hat": est.vartheta_hat,
        "trend_origin": est.trend_origin,
        "nu_hat": est.nu_hat,
        "sigma_bar_hat": est.sigma_bar_hat,
        "rho_hat": None if est.rho_hat is None else est.rho_hat.tolist(),
        "rho_clamp_events": est.rho_clamped,
        "mode": est.mode,
    }


def to_document(cfg: RunConfig, econ: ProductivityParams, h: HousingIndexParams) -> dict:
    """A fully inline config tree equivalent to ``cfg`` (loadable by :func:`parse_config`)."""
    s = cfg.sweep
    sweep = {
        "t_grid": list(s.t_grid), "paths": s.paths, "seed": s.seed,
        "quadrature_points": s.quadrature_points, "quadrature": s.quadrature,
        "steps_per_year": s.steps_per_year, "normalize": s.normalize, "mode": s.mode,
    }
    if s.origin is not None:
        sweep["origin"] = s.origin
    if s.reference is not None:
        sweep["reference"] = s.reference
    if s.slowdown_from is not None:
        sweep["slowdown"] = {"from": s.slowdown_from, "to": s.slowdown_to}
    energy = []
    for src in cfg.energy.values():
        item = {"source": src.source, "f1": src.f1}
        item["f0" if src.f0 is not None else "p0"] = src.f0 if src.f0 is not None else src.p0
        energy.append(item)
    economy = {
        "mu": econ.mu.tolist(), "gamma": econ.gamma.tolist(), "sigma": econ.sigma.tolist(),
        "varsigma": econ.varsigma, "a0": econ.a0.tolist(), "z0": cfg.z0,
        "check_stability": bool(np.all(np.linalg.eigvals(econ.gamma).real > 0)),
    }
    return {
        "economy": economy,
        "housing": {"varrho": h.varrho, "vartheta": h.vartheta, "nu": h.nu, "sigma_bar": h.sigma_bar,
                    "rho": h.rho.tolist(), "k0": h.k0},
        "scenarios": [{"name": sc.name, "t_start": sc.t_start_transition, "t_end": sc.t_end_transition,
                       "p_carbon0": sc.p_carbon0, "eta_delta": sc.eta_delta} for sc in cfg.scenarios],
        "energy": energy,
        "renovation": {"c0": cfg.costs.c0, "c1": cfg.costs.c1},
        "buildings": [{"name": b.name, "c0_price": b.c0_price, "surface": b.surface_r, "alpha": b.alpha,
                       "alpha_star": b.alpha_star, "source": b.source, "rbar": b.rbar} for b in cfg.buildings],
        "sweep": sweep,
        "output": {"directory": str(cfg.output_dir), "format": cfg.output_format},
    }

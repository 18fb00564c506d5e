"""Scenario sweeps: joint economy/housing simulation, climate-adjusted values and slowdowns."""

from __future__ import annotations

import csv
import json
import logging
import math
import os
import tempfile
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import __version__
from .economy import ProductivityParams, simulate_z
from .scenarios import CarbonScenario, EnergySource, RenovationCostParams, check_energy_nonnegative
from .valuation import (
    Building,
    HousingIndexParams,
    log_index_paths,
    optimal_renovation_date,
    transition_cost_x,
)

log = logging.getLogger(__name__)

COLUMNS = ("scenario", "building", "t", "mean", "ci_lo", "ci_hi", "x", "renovation_date", "slowdown")
Z_95 = 1.959963984540054
SLOWDOWN_DEFINITION = (
    "100 * (exp(g_s - g_ref) - 1), g = log(mean value at t / mean value at sweep start) / elapsed years"
)


@dataclass(frozen=True)
class SweepSpec:
    """What to sweep.  ``origin`` is the calendar year where the index starts at ``k0``
    (defaults to the earliest transition start)."""

    scenarios: list[CarbonScenario]
    buildings: list[Building]
    t_grid: list[float]
    n_paths: int
    seed: int
    energy: dict[str, EnergySource]
    costs: RenovationCostParams
    quadrature_points: int = 1024
    quadrature: str = "rectangle"
    steps_per_year: int = 12
    origin: float | None = None
    normalize: bool = False
    mode: str = "reoptimize"
    reference: str | None = None

    def __post_init__(self):
        if not self.scenarios:
            raise ValueError("at least one scenario is required")
        if not self.buildings:
            raise ValueError("at least one building is required")
        if self.n_paths < 1:
            raise ValueError("n_paths must be at least 1")
        if self.steps_per_year < 1:
            raise ValueError("steps_per_year must be at least 1")
        if self.mode not in ("reoptimize", "frozen"):
            raise ValueError(f"unknown mode {self.mode!r}")
        names = [s.name for s in self.scenarios]
        if len(set(names)) != len(names):
            raise ValueError("scenario names must be distinct")
        bnames = [b.name for b in self.buildings]
        if len(set(bnames)) != len(bnames):
            raise ValueError("building names must be distinct")
        for b in self.buildings:
            if b.source not in self.energy:
                raise ValueError(f"building {b.name!r} uses unknown energy source {b.source!r}")
        grid = [float(t) for t in self.t_grid]
        if any(b <= a for a, b in zip(grid, grid[1:])):
            raise ValueError("t_grid must be strictly increasing")
        if grid and grid[0] < self.start:
            raise ValueError(f"t_grid starts at {grid[0]}, before the origin {self.start}")
        if self.reference is not None and self.reference not in names:
            raise ValueError(f"reference scenario {self.reference!r} is not in the sweep")
        object.__setattr__(self, "t_grid", grid)

    @property
    def start(self) -> float:
        if self.origin is not None:
            return float(self.origin)
        return min(s.t_start_transition for s in self.scenarios)

    @property
    def reference_name(self) -> str:
        return self.reference if self.reference is not None else self.scenarios[0].name

    @property
    def normalization_building(self) -> Building:
        # minimum alpha, ties broken by listing order
        return min(self.buildings, key=lambda b: b.alpha)


@dataclass(frozen=True)
class SweepRow:
    scenario: str
    building: str
    t: float
    mean: float
    ci_lo: float
    ci_hi: float
    x: float
    renovation_date: float
    slowdown: float

    def as_tuple(self) -> tuple:
        return tuple(getattr(self, c) for c in COLUMNS)


@dataclass
class SweepResult:
    rows: list[SweepRow]
    reference: str
    scale: float = 1.0
    efficient_mean: dict = field(default_factory=dict)

    def row(self, scenario: str, building: str, t: float) -> SweepRow:
        for r in self.rows:
            if r.scenario == scenario and r.building == building and r.t == t:
                return r
        raise KeyError((scenario, building, t))

    @property
    def scenarios(self) -> list[str]:
        return list(dict.fromkeys(r.scenario for r in self.rows))

    @property
    def buildings(self) -> list[str]:
        return list(dict.fromkeys(r.building for r in self.rows))

    @property
    def times(self) -> list[float]:
        return sorted(set(r.t for r in self.rows))


def _mean_ci(samples: np.ndarray) -> tuple[float, float, float]:
    n = samples.shape[0]
    mean = float(samples.mean())
    if n < 2:
        return mean, mean, mean
    half = Z_95 * float(samples.std(ddof=1)) / math.sqrt(n)
    return mean, mean - half, mean + half


def _growth(v0: float, v1: float, years: float) -> float:
    if not (v0 > 0 and v1 > 0) or years <= 0:
        return math.nan
    return math.log(v1 / v0) / years


def _slowdown(g: float, g_ref: float) -> float:
    if math.isnan(g) or math.isnan(g_ref):
        return math.nan
    return 100.0 * math.expm1(g - g_ref)


def run_sweep(spec: SweepSpec, econ: ProductivityParams, hpi: HousingIndexParams) -> SweepResult:
    """Climate-adjusted values for every (scenario, building, t) of the spec.

    One set of log-index paths is simulated and shared by all buildings and
    scenarios; the transition cost is deterministic, so each value sample is
    the efficient value minus ``R * X``.
    """
    ref = spec.reference_name
    if not spec.t_grid:
        return SweepResult([], ref)
    start = spec.start
    horizon = spec.t_grid[-1]
    n_steps = max(1, int(math.ceil((horizon - start) * spec.steps_per_year - 1e-9)))
    t_end = start + n_steps / spec.steps_per_year if horizon > start else start + 1.0 / spec.steps_per_year
    z = simulate_z(econ, start, t_end, n_steps, spec.n_paths, spec.seed)
    k = log_index_paths(hpi, z, spec.seed, origin=start)
    k_at = k.at(np.array(spec.t_grid))[:, :, 0]  # (n_paths, n_t)
    growth_factor = np.exp(k_at)

    energies = {}
    for s in spec.scenarios:
        for src_name, src in spec.energy.items():
            p = src.params_for(s)
            check_energy_nonnegative(p, s)
            energies[s.name, src_name] = p

    scale = 1.0
    if spec.normalize:
        nb = spec.normalization_building
        ref_scn = next(s for s in spec.scenarios if s.name == ref)
        x0 = transition_cost_x(nb, ref_scn, energies[ref, nb.source], spec.costs, start,
                               spec.quadrature_points, spec.quadrature)
        scale = nb.surface_r * nb.c0_price * math.exp(hpi.k0) - nb.surface_r * x0
        if not scale > 0:
            raise ValueError("normalisation building has a non-positive value at the origin")

    means: dict[tuple[str, str], list[float]] = {}
    staged = []
    eff_mean = {}
    for b in spec.buildings:
        c_paths = b.surface_r * b.c0_price * growth_factor
        for j, t in enumerate(spec.t_grid):
            eff_mean[b.name, t] = float(c_paths[:, j].mean()) / scale
        for s in spec.scenarios:
            energy = energies[s.name, b.source]
            frozen = None
            if spec.mode == "frozen":
                frozen = optimal_renovation_date(b, s, energy, spec.costs, start)
            series = []
            for j, t in enumerate(spec.t_grid):
                decision = frozen if frozen is not None else optimal_renovation_date(b, s, energy, spec.costs, t)
                x = transition_cost_x(b, s, energy, spec.costs, t, spec.quadrature_points,
                                      spec.quadrature, decision=decision)
                values = (c_paths[:, j] - b.surface_r * x) / scale
                mean, lo, hi = _mean_ci(values)
                date = decision.stopping_time(start if frozen is not None else t)
                series.append(mean)
                staged.append((s.name, b.name, j, t, mean, lo, hi, x, date))
            means[s.name, b.name] = series

    t0 = spec.t_grid[0]
    rows = []
    for s_name, b_name, j, t, mean, lo, hi, x, date in staged:
        g = _growth(means[s_name, b_name][0], mean, t - t0)
        g_ref = _growth(means[ref, b_name][0], means[ref, b_name][j], t - t0)
        slow = 0.0 if s_name == ref and not math.isnan(g) else _slowdown(g, g_ref)
        rows.append(SweepRow(s_name, b_name, t, mean, lo, hi, x, date, slow))
    return SweepResult(rows, ref, scale, eff_mean)


def annual_slowdown(result: SweepResult, reference_scenario: str, t_from: float, t_to: float) -> dict:
    """Percent slowdown of the mean-value growth rate per (scenario, building) against the reference.

    Entries are NaN when a mean value is not positive.
    """
    if reference_scenario not in result.scenarios:
        raise KeyError(f"reference scenario {reference_scenario!r} not in result")
    if not t_to > t_from:
        raise ValueError("t_to must exceed t_from")
    out = {}
    for b in result.buildings:
        g_ref = _growth(result.row(reference_scenario, b, t_from).mean,
                        result.row(reference_scenario, b, t_to).mean, t_to - t_from)
        for s in result.scenarios:
            g = _growth(result.row(s, b, t_from).mean, result.row(s, b, t_to).mean, t_to - t_from)
            out[s, b] = 0.0 if s == reference_scenario and not math.isnan(g) else _slowdown(g, g_ref)
    return out


def _fmt(value) -> str:
    if isinstance(value, str):
        return value
    return "%.17g" % value


def emit_results(result: SweepResult, path, manifest: dict | None = None, fmt: str = "csv") -> tuple[Path, Path]:
    """Write ``results.csv`` and ``manifest.json`` into directory ``path``.

    Files are written to temporaries and renamed, so a failure leaves no
    partial output behind.
    """
    if fmt != "csv":
        raise ValueError(f"unsupported output format {fmt!r}")
    out = Path(path)
    try:
        out.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise OSError(f"{out}: cannot create output directory ({exc.strerror})") from exc
    csv_path = out / "results.csv"
    manifest_path = out / "manifest.json"
    doc = dict(manifest or {})
    doc.setdefault("version", __version__)
    doc["slowdown_definition"] = SLOWDOWN_DEFINITION
    doc["reference_scenario"] = result.reference
    doc["normalization"] = result.scale

    written = []
    try:
        for target, writer in ((csv_path, _write_csv), (manifest_path, _write_json)):
            fd, tmp = tempfile.mkstemp(dir=out, prefix="." + target.name, suffix=".tmp")
            with os.fdopen(fd, "w", newline="") as handle:
                writer(handle, result if writer is _write_csv else doc)
            written.append((tmp, target))
        for tmp, target in written:
            os.replace(tmp, target)
    except OSError as exc:
        for tmp, _ in written:
            if os.path.exists(tmp):
                os.remove(tmp)
        raise OSError(f"{out}: failed to write results ({exc})") from exc
    return csv_path, manifest_path


def _write_csv(handle, result: SweepResult) -> None:
    writer = csv.writer(handle, lineterminator="\n")
    writer.writerow(COLUMNS)
    for row in result.rows:
        writer.writerow([_fmt(v) for v in row.as_tuple()])


def _write_json(handle, doc: dict) -> None:
    json.dump(doc, handle, indent=2, sort_keys=True, default=_json_default)
    handle.write("\n")


def _json_default(obj):
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    if isinstance(obj, (np.floating, np.integer)):
        return obj.item()
    raise TypeError(f"cannot serialise {type(obj).__name__}")


def read_results(path) -> SweepResult:
    """Re-ingest a results CSV written by :func:`emit_results`."""
    path = Path(path)
    if path.is_dir():
        path = path / "results.csv"
    rows = []
    with open(path, newline="") as handle:
        reader = csv.reader(handle)
        header = next(reader, None)
        if header is None or tuple(header) != COLUMNS:
            raise ValueError(f"{path}:1: unexpected header {header}")
        for row in reader:
            if len(row) != len(COLUMNS):
                raise ValueError(f"{path}:{reader.line_num}: expected {len(COLUMNS)} columns")
            rows.append(SweepRow(row[0], row[1], *[float(v) for v in row[2:]]))
    reference = ""
    manifest = path.with_name("manifest.json")
    if manifest.exists():
        reference = json.loads(manifest.read_text()).get("reference_scenario", "")
    return SweepResult(rows, reference)

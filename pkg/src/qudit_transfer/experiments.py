"""Device presets, (g, Omega) sweeps and CSV / heatmap emission."""
from __future__ import annotations

import csv
import json
import logging
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path
from typing import Sequence

import numpy as np

from .dynamics import Diagnostics, IntegrationError, IntegratorOptions, evolve_master
from .model import ModelParams, mhz, per_us, to_mhz
from .protocol import compile_schedule, initial_state, target_state, uniform_coefficients

log = logging.getLogger(__name__)

# transmon values used for the published fidelity maps
PAPER_ANHARM_MHZ = (275.0, 309.0, 358.0)
PAPER_T_RELAX_US = (84.0, 41.0, 30.0, 22.0)
PAPER_T_PHI_US = (72.0, 32.0, 12.0, 2.0)
PAPER_T_CAVITY_US = 15.0
PAPER_OMEGA_C_MHZ = 4970.0
PAPER_G2_RATIO = 0.95

# (g/2pi, Omega/2pi) in MHz and the quoted fidelity at each optimum
PAPER_OPTIMA = {
    3: (5.4, 12.8, 0.996),
    4: (1.35, 17.00, 0.9696),
    5: (1.45, 16.00, 0.9032),
}


def preset_paper(d: int, g_mhz: float | None = None, omega_mhz: float | None = None,
                 n_max: int = 3) -> ModelParams:
    """Transmon/3D-cavity parameters, all spurious couplings on, g2 = 0.95 g1.

    Defaults to the quoted optimum (g, Omega) for ``d``.
    """
    if d not in PAPER_OPTIMA:
        raise ValueError(f"paper preset only covers d in {{3, 4, 5}}, got {d}; pass explicit parameters")
    g0, om0, _ = PAPER_OPTIMA[d]
    g = mhz(g0 if g_mhz is None else g_mhz)
    return ModelParams(
        d=d,
        g1=g,
        g2=PAPER_G2_RATIO * g,
        omega=mhz(om0 if omega_mhz is None else omega_mhz),
        anharm=tuple(mhz(a) for a in PAPER_ANHARM_MHZ[: d - 2]),
        kappa=per_us(PAPER_T_CAVITY_US),
        gamma_relax=tuple(per_us(t) for t in PAPER_T_RELAX_US[: d - 1]),
        gamma_phi=tuple(per_us(t) for t in PAPER_T_PHI_US[: d - 1]),
        omega_c=mhz(PAPER_OMEGA_C_MHZ),
        n_max=n_max,
        include_eps1=True,
        include_eps_l=True,
        include_cavity_during_pulse=True,
        rotating_phases=True,
    )


def preset_ideal(d: int, g_mhz: float, omega_mhz: float, n_max: int = 3,
                 anharm_mhz: Sequence[float] | None = None) -> ModelParams:
    """Equal couplings, no spurious terms, no decoherence."""
    if anharm_mhz is None:
        anharm_mhz = PAPER_ANHARM_MHZ[: d - 2] if d <= 5 else ()
    return ModelParams(
        d=d,
        g1=mhz(g_mhz),
        g2=mhz(g_mhz),
        omega=mhz(omega_mhz),
        anharm=tuple(mhz(a) for a in anharm_mhz),
        n_max=n_max,
    )


PRESETS = {"paper": preset_paper, "ideal": preset_ideal}


# --------------------------------------------------------------------------
# config files

_MHZ_KEYS = {"g1": "g1_mhz_over_2pi", "g2": "g2_mhz_over_2pi", "omega": "omega_mhz_over_2pi",
             "omega_c": "omega_c_mhz_over_2pi"}


def params_to_config(p: ModelParams) -> dict:
    """ModelParams as a config mapping with units in the key names."""
    return {
        "d": p.d,
        "g1_mhz_over_2pi": to_mhz(p.g1),
        "g2_mhz_over_2pi": to_mhz(p.g2),
        "omega_mhz_over_2pi": to_mhz(p.omega),
        "anharm_mhz_over_2pi": [to_mhz(a) for a in p.anharm],
        "kappa_inv_us": _lifetime(p.kappa),
        "t_relax_us": [_lifetime(g) for g in p.gamma_relax],
        "t_phi_us": [_lifetime(g) for g in p.gamma_phi],
        "omega_c_mhz_over_2pi": to_mhz(p.omega_c),
        "n_max": p.n_max,
        "include_eps1": p.include_eps1,
        "include_eps_l": p.include_eps_l,
        "include_cavity_during_pulse": p.include_cavity_during_pulse,
        "rotating_phases": p.rotating_phases,
    }


def _lifetime(rate: float):
    return None if rate == 0 else 1e6 / rate


def _rate(lifetime_us):
    return 0.0 if lifetime_us is None else per_us(lifetime_us)


def params_from_config(cfg: dict, base: ModelParams | None = None) -> ModelParams:
    """Build ModelParams from unit-annotated keys, overriding ``base`` where given.

    Lifetimes of ``null`` mean a zero rate.
    """
    out = {} if base is None else {f.name: getattr(base, f.name) for f in fields(ModelParams)}
    for name, key in _MHZ_KEYS.items():
        if key in cfg:
            out[name] = mhz(cfg[key])
    if "anharm_mhz_over_2pi" in cfg:
        out["anharm"] = tuple(mhz(a) for a in cfg["anharm_mhz_over_2pi"])
    if "kappa_inv_us" in cfg:
        out["kappa"] = _rate(cfg["kappa_inv_us"])
    if "t_relax_us" in cfg:
        out["gamma_relax"] = tuple(_rate(t) for t in cfg["t_relax_us"])
    if "t_phi_us" in cfg:
        out["gamma_phi"] = tuple(_rate(t) for t in cfg["t_phi_us"])
    for key in ("d", "n_max"):
        if key in cfg:
            out[key] = int(cfg[key])
    for key in ("include_eps1", "include_eps_l", "include_cavity_during_pulse", "rotating_phases"):
        if key in cfg:
            out[key] = bool(cfg[key])
    if "g2_ratio" in cfg:
        out["g2"] = float(cfg["g2_ratio"]) * out["g1"]
    return ModelParams(**out)


# --------------------------------------------------------------------------
# sweeps


@dataclass(frozen=True)
class SweepConfig:
    d: int
    g_grid: tuple[float, ...]  # g/2pi, MHz
    omega_grid: tuple[float, ...]  # Omega/2pi, MHz
    base: str = "paper"
    overrides: dict = field(default_factory=dict)
    input_state: tuple[complex, ...] | None = None
    parallel_workers: int = 1
    n_max: int = 3
    dt_scale: float = 1.0

    def __post_init__(self):
        for name in ("g_grid", "omega_grid"):
            grid = tuple(float(x) for x in getattr(self, name))
            if not grid:
                raise ValueError(f"{name} must be non-empty")
            if any(b <= a for a, b in zip(grid, grid[1:])):
                raise ValueError(f"{name} must be strictly increasing")
            object.__setattr__(self, name, grid)
        if self.base not in PRESETS:
            raise ValueError(f"unknown base preset {self.base!r}; choose from {sorted(PRESETS)}")
        if self.input_state is not None:
            c = tuple(complex(x) for x in self.input_state)
            if len(c) != self.d or abs(np.linalg.norm(c) - 1) > 1e-10:
                raise ValueError("input_state must be a normalized vector of length d")
            object.__setattr__(self, "input_state", c)
        if self.parallel_workers < 1:
            raise ValueError("parallel_workers must be >= 1")

    @property
    def coefficients(self) -> np.ndarray:
        if self.input_state is None:
            return uniform_coefficients(self.d)
        return np.asarray(self.input_state, dtype=complex)

    def params(self, g_mhz: float, omega_mhz: float) -> ModelParams:
        if self.base == "paper":
            p = preset_paper(self.d, g_mhz, omega_mhz, n_max=self.n_max)
        else:
            p = preset_ideal(self.d, g_mhz, omega_mhz, n_max=self.n_max)
        if self.overrides:
            p = params_from_config(self.overrides, base=p)
        return p

    @classmethod
    def from_dict(cls, data: dict) -> "SweepConfig":
        data = dict(data)
        if "input_state" in data and data["input_state"] is not None:
            data["input_state"] = tuple(_parse_complex(x) for x in data["input_state"])
        for key in ("g_grid", "omega_grid"):
            if isinstance(data.get(key), dict):
                spec = data[key]
                data[key] = tuple(np.linspace(spec["start"], spec["stop"], int(spec["num"])))
        return cls(**data)

    @classmethod
    def load(cls, path) -> "SweepConfig":
        return cls.from_dict(json.loads(Path(path).read_text()))


def _parse_complex(x) -> complex:
    if isinstance(x, (list, tuple)):
        return complex(float(x[0]), float(x[1]))
    return complex(x)


@dataclass
class SweepCell:
    g_mhz: float
    omega_mhz: float
    fidelity: float | None
    status: str
    diagnostics: Diagnostics | None = None
    message: str = ""


@dataclass
class SweepResult:
    d: int
    g_grid: tuple[float, ...]
    omega_grid: tuple[float, ...]
    cells: list[SweepCell]

    @property
    def failed(self) -> list[SweepCell]:
        return [c for c in self.cells if c.status != "ok"]

    @property
    def optimum(self) -> tuple[float, float, float]:
        ok = [c for c in self.cells if c.status == "ok"]
        if not ok:
            raise ValueError("no converged cells")
        best = max(ok, key=lambda c: c.fidelity)
        return best.g_mhz, best.omega_mhz, best.fidelity

    def fidelity_grid(self) -> np.ndarray:
        """Rows indexed by Omega, columns by g; NaN for failed cells."""
        grid = np.full((len(self.omega_grid), len(self.g_grid)), np.nan)
        for c in self.cells:
            if c.status == "ok":
                grid[self.omega_grid.index(c.omega_mhz), self.g_grid.index(c.g_mhz)] = c.fidelity
        return grid


def run_point(cfg: SweepConfig, g_mhz: float, omega_mhz: float) -> SweepCell:
    p = cfg.params(g_mhz, omega_mhz)
    c = cfg.coefficients
    schedule = compile_schedule(p.d, p.g1, p.omega)
    opts = IntegratorOptions(dt_scale=cfg.dt_scale)
    try:
        res = evolve_master(schedule, p, initial_state(p.d, c, p.n_max), opts,
                            target=target_state(p.d, c, p.n_max))
    except IntegrationError as exc:
        log.warning("cell g=%s omega=%s diverged: %s", g_mhz, omega_mhz, exc)
        return SweepCell(g_mhz, omega_mhz, None, "diverged", exc.diagnostics, str(exc))
    return SweepCell(g_mhz, omega_mhz, res.fidelity, "ok", res.diagnostics)


def _run_point_args(args):
    return run_point(*args)


def run_sweep(cfg: SweepConfig) -> SweepResult:
    """Evaluate every (g, Omega) cell; results are ordered g-major regardless of workers."""
    jobs = [(cfg, g, om) for g in cfg.g_grid for om in cfg.omega_grid]
    if cfg.parallel_workers == 1:
        cells = [_run_point_args(j) for j in jobs]
    else:
        with ProcessPoolExecutor(max_workers=cfg.parallel_workers) as pool:
            cells = list(pool.map(_run_point_args, jobs))
    return SweepResult(cfg.d, cfg.g_grid, cfg.omega_grid, cells)


# --------------------------------------------------------------------------
# output

CSV_COLUMNS = ("g_MHz", "omega_MHz", "fidelity", "status")


def _fmt(x: float) -> str:
    # shortest decimal that round-trips to the same double (at most 17 digits)
    return np.format_float_positional(float(x), unique=True, trim="-")


def emit_csv(result: SweepResult, path) -> Path:
    path = Path(path)
    with path.open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(CSV_COLUMNS)
        for c in result.cells:
            fid = "" if c.fidelity is None else _fmt(c.fidelity)
            w.writerow([_fmt(c.g_mhz), _fmt(c.omega_mhz), fid, c.status])
    return path


def read_csv(path, d: int = 0) -> SweepResult:
    cells = []
    with Path(path).open(newline="") as fh:
        reader = csv.DictReader(fh)
        if tuple(reader.fieldnames or ()) != CSV_COLUMNS:
            raise ValueError(f"unexpected CSV header {reader.fieldnames}")
        for row in reader:
            fid = float(row["fidelity"]) if row["fidelity"] else None
            cells.append(SweepCell(float(row["g_MHz"]), float(row["omega_MHz"]), fid, row["status"]))
    g_grid = tuple(sorted({c.g_mhz for c in cells}))
    om_grid = tuple(sorted({c.omega_mhz for c in cells}))
    return SweepResult(d, g_grid, om_grid, cells)


def emit_heatmap_data(result: SweepResult, path) -> Path:
    """Rectangular fidelity matrix: first row is the g axis, first column the Omega axis."""
    path = Path(path)
    grid = result.fidelity_grid()
    with path.open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["omega_MHz\\g_MHz", *(_fmt(g) for g in result.g_grid)])
        for om, row in zip(result.omega_grid, grid):
            w.writerow([_fmt(om), *("" if math.isnan(x) else _fmt(x) for x in row)])
    return path


def sweep_summary(result: SweepResult) -> dict:
    g, om, f = result.optimum
    return {
        "d": result.d,
        "cells": len(result.cells),
        "failed": len(result.failed),
        "optimum": {"g_mhz_over_2pi": g, "omega_mhz_over_2pi": om, "fidelity": f},
    }


def diagnostics_dict(diag: Diagnostics | None) -> dict:
    return {} if diag is None else asdict(diag)

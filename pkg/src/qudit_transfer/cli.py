"""Command line entry point: ``qudit-transfer {compile,simulate,sweep,verify}``."""
from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

import numpy as np

from .dynamics import IntegratorOptions, evolve_master, write_trajectory_csv
from .experiments import (
    PAPER_OPTIMA,
    SweepConfig,
    emit_csv,
    emit_heatmap_data,
    params_from_config,
    params_to_config,
    preset_ideal,
    preset_paper,
    run_sweep,
    sweep_summary,
    diagnostics_dict,
)
from .model import mhz
from .protocol import CavityInteraction, PulsePair, SinglePulse, compile_schedule, initial_state, target_state
from .protocol import uniform_coefficients
from .verify import run_checks

log = logging.getLogger("qudit_transfer")


def _on_off(value: str) -> bool:
    if value not in ("on", "off"):
        raise argparse.ArgumentTypeError("expected 'on' or 'off'")
    return value == "on"


def _default_point(d: int, g, omega):
    g0, om0, _ = PAPER_OPTIMA.get(d, (2.0, 20.0, None))
    return (g0 if g is None else g), (om0 if omega is None else omega)


def cmd_compile(args) -> int:
    g, om = _default_point(args.d, args.g_mhz, args.omega_mhz)
    sched = compile_schedule(args.d, mhz(g), mhz(om))
    if args.out:
        sched.save(args.out)
        log.info("wrote %s", args.out)
    for i, seg in enumerate(sched.segments):
        if isinstance(seg, CavityInteraction):
            desc = "cavity swap"
        elif isinstance(seg, PulsePair):
            desc = f"pulse pair  w_{seg.level - 1}{seg.level}  phases ({seg.phase1:+.4f}, {seg.phase2:+.4f})"
        elif isinstance(seg, SinglePulse):
            desc = f"pulse q{seg.qudit + 1}    w_{seg.level - 1}{seg.level}  phase {seg.phase:+.4f}"
        else:
            desc = "decouple cavity"
        print(f"{i:3d}  {seg.duration * 1e9:9.3f} ns  {desc}")
    print(f"total {sched.total_duration * 1e9:.3f} ns")
    return 0


def _simulation_params(args):
    cfg = json.loads(Path(args.config).read_text()) if args.config else {}
    d = args.d or cfg.get("d")
    if d is None:
        raise SystemExit("--d or a config with 'd' is required")
    preset = args.preset or cfg.get("preset", "paper")
    g, om = _default_point(d, args.g_mhz, args.omega_mhz)
    if args.g_mhz is None and "g1_mhz_over_2pi" in cfg:
        g = cfg["g1_mhz_over_2pi"]
    if args.omega_mhz is None and "omega_mhz_over_2pi" in cfg:
        om = cfg["omega_mhz_over_2pi"]
    if preset == "paper":
        p = preset_paper(d, g, om, n_max=args.n_max)
    else:
        p = preset_ideal(d, g, om, n_max=args.n_max)
    overrides = {k: v for k, v in cfg.items() if k not in ("preset", "input_state")}
    overrides.pop("g1_mhz_over_2pi", None)
    overrides.pop("omega_mhz_over_2pi", None)
    if overrides:
        p = params_from_config(overrides, base=p)
    if args.realism is not None:
        p = p.with_(include_eps1=args.realism, include_eps_l=args.realism, include_cavity_during_pulse=args.realism)
    if args.rates is False:
        p = p.noiseless()
    coeffs = cfg.get("input_state")
    c = uniform_coefficients(d) if coeffs is None else np.array([complex(*x) if isinstance(x, list) else complex(x)
                                                                   for x in coeffs])
    return p, c


def cmd_simulate(args) -> int:
    p, c = _simulation_params(args)
    sched = compile_schedule(p.d, p.g1, p.omega)
    opts = IntegratorOptions(record_trajectory=bool(args.trajectory), dt_scale=args.dt_scale)
    res = evolve_master(sched, p, initial_state(p.d, c, p.n_max), opts, target=target_state(p.d, c, p.n_max))
    if args.trajectory:
        write_trajectory_csv(res, p.space(), args.trajectory)
    out = {
        "params": params_to_config(p),
        "quality_factor": p.quality_factor,
        "duration_ns": sched.total_duration * 1e9,
        "fidelity": res.fidelity,
        "diagnostics": diagnostics_dict(res.diagnostics),
    }
    print(json.dumps(out, indent=2))
    return 0


def cmd_sweep(args) -> int:
    cfg = SweepConfig.load(args.config)
    if args.workers:
        cfg = SweepConfig(**{**cfg.__dict__, "parallel_workers": args.workers})
    result = run_sweep(cfg)
    emit_csv(result, args.out)
    if args.heatmap:
        emit_heatmap_data(result, args.heatmap)
    summary = sweep_summary(result) if len(result.failed) < len(result.cells) else {"failed": len(result.failed)}
    print(json.dumps(summary, indent=2))
    return 1 if result.failed else 0


def cmd_verify(args) -> int:
    checks = run_checks()
    for c in checks:
        print(c.line())
    return 0 if all(c.passed for c in checks) else 1


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="qudit-transfer", description=__doc__)
    ap.add_argument("-v", "--verbose", action="store_true")
    sub = ap.add_subparsers(dest="command", required=True)

    c = sub.add_parser("compile", help="print or export the pulse/cavity schedule")
    c.add_argument("--d", type=int, required=True)
    c.add_argument("--g-mhz", type=float, help="g/2pi in MHz")
    c.add_argument("--omega-mhz", type=float, help="Omega/2pi in MHz")
    c.add_argument("--out", help="write the schedule as JSON")
    c.set_defaults(func=cmd_compile)

    s = sub.add_parser("simulate", help="master-equation fidelity at one (g, Omega) point")
    s.add_argument("--d", type=int)
    s.add_argument("--g-mhz", type=float)
    s.add_argument("--omega-mhz", type=float)
    s.add_argument("--preset", choices=("paper", "ideal"))
    s.add_argument("--realism", type=_on_off, help="spurious couplings on/off")
    s.add_argument("--rates", type=_on_off, help="decoherence on/off")
    s.add_argument("--config", help="JSON config with unit-annotated keys")
    s.add_argument("--trajectory", help="CSV path for time-sampled populations and fidelity")
    s.add_argument("--n-max", type=int, default=3)
    s.add_argument("--dt-scale", type=float, default=1.0)
    s.set_defaults(func=cmd_simulate)

    w = sub.add_parser("sweep", help="fidelity over a (g, Omega) grid")
    w.add_argument("--config", required=True)
    w.add_argument("--out", required=True, help="CSV output path")
    w.add_argument("--heatmap", help="rectangular heatmap-data output path")
    w.add_argument("--workers", type=int)
    w.set_defaults(func=cmd_sweep)

    v = sub.add_parser("verify", help="run the oracle and invariant checks")
    v.set_defaults(func=cmd_verify)
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())

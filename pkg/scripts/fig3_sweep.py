"""Fidelity maps over (g, Omega) around each optimum.

    python scripts/fig3_sweep.py scripts/configs/d3_fig3.json [more configs] --outdir results

Writes ``<stem>.csv`` (long format) and ``<stem>_heatmap.csv`` (Omega rows x g
columns) per config and prints the grid optimum. The bundled configs are 7x7
grids; a d = 5 grid takes roughly an hour on one core.
"""
import argparse
import json
from pathlib import Path

from qudit_transfer.experiments import SweepConfig, emit_csv, emit_heatmap_data, run_sweep, sweep_summary


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("configs", nargs="+")
    ap.add_argument("--outdir", default="results")
    ap.add_argument("--workers", type=int, default=1)
    args = ap.parse_args()

    outdir = Path(args.outdir)
    outdir.mkdir(parents=True, exist_ok=True)
    for path in map(Path, args.configs):
        data = json.loads(path.read_text())
        data["parallel_workers"] = args.workers
        result = run_sweep(SweepConfig.from_dict(data))
        emit_csv(result, outdir / f"{path.stem}.csv")
        emit_heatmap_data(result, outdir / f"{path.stem}_heatmap.csv")
        summary = sweep_summary(result) if len(result.failed) < len(result.cells) else {"failed": len(result.failed)}
        print(path.stem, json.dumps(summary), flush=True)


if __name__ == "__main__":
    main()

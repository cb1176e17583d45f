"""The aggregation preset: a Gaussian cell bump sinking under gravity while it attracts itself.

Runs presets/aggregation.cfg into a scratch directory, then reads back the time
series and recomputes the sliding-window dissipation functional from the CSV.
"""
import json
import sys
import tempfile
from pathlib import Path

from ksstokes.config import load_config
from ksstokes.diagnostics import compute_tau, read_csv_series, sliding_I
from ksstokes.runner import run_simulation

preset = Path(__file__).resolve().parents[1] / "presets" / "aggregation.cfg"
out = Path(sys.argv[1]) if len(sys.argv) > 1 else Path(tempfile.mkdtemp(prefix="aggregation_"))
cfg = load_config(preset, {"output.dir": str(out), "output.snapshot_times": "0,2.5,5"})
summary = run_simulation(cfg, quiet=False)

keys = ("status", "verdict", "steps", "wall_time_s", "peak_linf_n", "peak_linf_u", "max_div_u",
        "mass_n_initial", "mass_n_final", "I_observed")
print(json.dumps({k: summary[k] for k in keys}, indent=2))

series = read_csv_series(out / "diagnostics.csv", "grad_np2_sq_2")
T = series[-1][0]
print(f"I(T) from the CSV with tau = {compute_tau(T):g}: {sliding_I(series, compute_tau(T), T):.6g}")
print(f"outputs in {out}")

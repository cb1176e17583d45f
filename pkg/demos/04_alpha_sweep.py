"""Sweep the sensitivity decay exponent and watch where aggregation stops.

Small exponents let the bump collapse (growth_triggered); larger ones keep it
bounded on the horizon. The full preset takes one to two minutes on one core; the
transition is a property of this resolution (a 32^2 grid smooths the bump enough
that nothing collapses).
"""
import tempfile
from pathlib import Path

from ksstokes.config import load_sweep
from ksstokes.runner import run_sweep

spec_path = Path(__file__).resolve().parents[1] / "presets" / "alpha_sweep.sweep"
out = Path(tempfile.mkdtemp(prefix="alpha_sweep_"))
spec = load_sweep(spec_path, out)

rows = run_sweep(spec)
print(f"{'alpha':>5}  {'verdict':<20} {'peak linf_n':>12} {'t_trigger':>10}")
for r in rows:
    t = f"{r['t_trigger']:.4g}" if r["t_trigger"] != "" else "-"
    print(f"{r['alpha']:>5g}  {r['verdict']:<20} {r['peak_linf_n']:>12.5g} {t:>10}")
print(f"table written to {out / 'sweep.csv'}")

"""Run orchestration: the step loop, sampling, output files, sweeps and the lemma campaign."""
from __future__ import annotations

import csv
import json
import logging
import math
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import replace
from pathlib import Path

import numpy as np

from . import odelemma
from .config import RunConfig, SweepSpec
from .diagnostics import (CsvSink, blowup_verdict, compute_tau, record_state, sliding_I,
                          testing_identity_residual, w1p_proxy_c)
from .errors import InsufficientData, KSSError, PositivityViolation, SolverFailure, TimeStepCollapse
from .fields import integrate, write_snapshot
from .model import build_initial_state
from .poisson import max_divergence
from .transport import advance

log = logging.getLogger(__name__)

EXIT_CODES = {"completed": 0, "growth_triggered": 2, "dt_collapsed": 3, "solver_failure": 4}


def _snapshot(state, out_dir, t_label):
    snap_dir = out_dir / "snapshots"
    snap_dir.mkdir(parents=True, exist_ok=True)
    for kind, obj in (("n", state.n), ("c", state.c), ("u", state.u), ("p", state.p)):
        write_snapshot(snap_dir / f"{kind}_t{t_label:.6g}.kssf", obj, kind, state.t)


def run_simulation(cfg: RunConfig, quiet=True, max_steps=None):
    """Integrate from 0 to ``cfg.t_end``; writes ``diagnostics.csv`` and ``summary.json``.

    Returns the summary dict. ``summary["status"]`` is one of ``completed``,
    ``growth_triggered``, ``dt_collapsed``, ``solver_failure``.
    """
    out = Path(cfg.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    diag = cfg.diag
    p_list = diag.p_list
    p_id = min(p_list)
    tau = diag.tau if diag.tau is not None else compute_tau(cfg.t_end)

    wall0 = time.perf_counter()
    state = build_initial_state(cfg.init, cfg.model, cfg.grid, cfg.seed, cfg.psolve)
    mass0 = integrate(state.n)
    c_mass0 = integrate(state.c)
    linf0 = float(state.n.values.max())
    growth_level = diag.blowup_growth_factor * linf0

    records = []
    peaks = {"linf_n": linf0, "linf_u": 0.0, "div_u": max_divergence(state.u)}
    peaks.update({f"w1p_c_{p:g}": w1p_proxy_c(state.c, p) for p in p_list})
    totals = {"clipped": 0, "min_n": float(state.n.values.min()), "min_c": float(state.c.values.min()),
              "max_c_mass_excess": 0.0}
    pending_snaps = list(cfg.snapshot_times)
    status, error, substep = "completed", None, None
    steps = 0

    sink = CsvSink(out / "diagnostics.csv", p_list)
    try:
        rec = record_state(state, p_list)
        records.append(rec)
        sink.write(rec)
        while pending_snaps and pending_snaps[0] <= 0.0:
            _snapshot(state, out, pending_snaps.pop(0))
        c_bound = max(mass0, c_mass0)
        while state.t < cfg.t_end * (1 - 1e-12):
            if max_steps is not None and steps >= max_steps:
                break
            t_stop = min(cfg.t_end, pending_snaps[0]) if pending_snaps else cfg.t_end
            prev = state
            try:
                state, rep = advance(state, cfg.model, cfg.step, cfg.psolve, t_stop=t_stop)
            except TimeStepCollapse as exc:
                status, error, substep = "dt_collapsed", str(exc), exc.substep
                rec = record_state(prev, p_list, dt_used=exc.dt)
                records.append(rec)
                sink.write(rec)
                break
            except (SolverFailure, PositivityViolation) as exc:
                status, error, substep = "solver_failure", str(exc), exc.substep
                break
            steps += 1
            totals["clipped"] += rep.clipped_n + rep.clipped_c
            linf = float(state.n.values.max())
            peaks["linf_n"] = max(peaks["linf_n"], linf)
            totals["min_n"] = min(totals["min_n"], float(state.n.values.min()))
            totals["min_c"] = min(totals["min_c"], float(state.c.values.min()))
            totals["max_c_mass_excess"] = max(totals["max_c_mass_excess"], integrate(state.c) - c_bound)
            if rep.stokes is not None:
                peaks["div_u"] = max(peaks["div_u"], rep.stokes.div_max_after)
            grown = linf0 > 0 and linf > growth_level
            sample = grown or steps % diag.sample_every == 0 or state.t >= cfg.t_end * (1 - 1e-12)
            if sample:
                resid = (testing_identity_residual(prev, state, cfg.model, p_id, rep.dt)
                         if diag.identity_residual else math.nan)
                its = rep.stokes.poisson_iterations if rep.stokes is not None else 0
                rec = record_state(state, p_list, dt_used=rep.dt, identity_residual=resid,
                                   poisson_iterations=its)
                records.append(rec)
                sink.write(rec)
                peaks["linf_u"] = max(peaks["linf_u"], rec.linf_u)
                for p in p_list:
                    peaks[f"w1p_c_{p:g}"] = max(peaks[f"w1p_c_{p:g}"], w1p_proxy_c(state.c, p))
            if pending_snaps and state.t >= pending_snaps[0] * (1 - 1e-12):
                _snapshot(state, out, pending_snaps.pop(0))
            if grown:
                status = "growth_triggered"
                break
            if not quiet and steps % 1000 == 0:
                log.info("t=%.5g dt=%.3e linf_n=%.5g", state.t, rep.dt, linf)
    finally:
        sink.close()

    verdict = blowup_verdict(records, diag, cfg.t_end)
    i_obs = {}
    for p in p_list:
        series = [(r.t, r.grad_np2_sq[p]) for r in records]
        try:
            i_obs[f"{p:g}"] = sliding_I(series, tau, records[-1].t)
        except InsufficientData:
            i_obs[f"{p:g}"] = None
    summary = {
        "status": status,
        "verdict": verdict.verdict,
        "trigger_time": verdict.trigger_time,
        "error": error,
        "failed_substep": substep,
        "alpha": cfg.model.alpha,
        "seed": cfg.seed,
        "steps": steps,
        "t_final": state.t,
        "t_end": cfg.t_end,
        "wall_time_s": time.perf_counter() - wall0,
        "tau": tau,
        "I_observed": i_obs,
        "peak_linf_n": peaks["linf_n"],
        "peak_linf_u": peaks["linf_u"],
        "peak_w1p_c": {k[6:]: v for k, v in peaks.items() if k.startswith("w1p_c_")},
        "max_div_u": peaks["div_u"],
        "mass_n_initial": mass0,
        "mass_n_final": integrate(state.n),
        "mass_c_initial": c_mass0,
        "max_c_mass_excess": totals["max_c_mass_excess"],
        "min_n": totals["min_n"],
        "min_c": totals["min_c"],
        "clipped_entries": totals["clipped"],
        "clip_fraction": totals["clipped"] / max(steps * cfg.grid.n_cells, 1),
        "samples": len(records),
    }
    (out / "summary.json").write_text(json.dumps(summary, indent=2, allow_nan=False, default=_json_default))
    return summary


def _json_default(obj):
    if isinstance(obj, (np.floating, np.integer)):
        return obj.item()
    raise TypeError(f"not serialisable: {type(obj)}")


SWEEP_COLUMNS = ("alpha", "seed", "status", "verdict", "peak_linf_n", "t_trigger", "I_observed")


def _sweep_one(cfg):
    try:
        s = run_simulation(cfg)
    except KSSError as exc:
        return {"alpha": cfg.model.alpha, "seed": cfg.seed, "status": "error", "verdict": "",
                "peak_linf_n": "", "t_trigger": "", "I_observed": "", "error": str(exc)}
    i_obs = s["I_observed"].get("2", next(iter(s["I_observed"].values())))
    return {"alpha": cfg.model.alpha, "seed": cfg.seed, "status": s["status"], "verdict": s["verdict"],
            "peak_linf_n": s["peak_linf_n"],
            "t_trigger": "" if s["trigger_time"] is None else s["trigger_time"],
            "I_observed": "" if i_obs is None else i_obs}


def sweep_configs(spec: SweepSpec):
    base = spec.base
    cfgs = []
    for alpha in spec.alpha_values:
        for seed in spec.replicate_seeds:
            cfgs.append(replace(base, model=replace(base.model, alpha=float(alpha)), seed=int(seed),
                                output_dir=Path(base.output_dir) / f"alpha_{alpha:g}_seed_{seed}"))
    return cfgs


def run_sweep(spec: SweepSpec, output_dir=None):
    """One run per ``(alpha, seed)``; writes ``sweep.csv`` and returns its rows."""
    out = Path(output_dir or spec.base.output_dir)
    if output_dir is not None:
        spec = replace(spec, base=replace(spec.base, output_dir=out))
    out.mkdir(parents=True, exist_ok=True)
    cfgs = sweep_configs(spec)
    if spec.workers > 1:
        with ProcessPoolExecutor(spec.workers) as pool:
            rows = list(pool.map(_sweep_one, cfgs))
    else:
        rows = [_sweep_one(c) for c in cfgs]
    with open(out / "sweep.csv", "w", newline="") as fh:
        w = csv.DictWriter(fh, fieldnames=SWEEP_COLUMNS, extrasaction="ignore")
        w.writeheader()
        for r in rows:
            w.writerow({k: (repr(v) if isinstance(v, float) else v) for k, v in r.items()})
    return rows


def run_lemma_campaign(n_cases, seed, output_dir=None, extra_cases=()):
    """Randomised verification of the ODE bound; writes ``lemma_campaign.jsonl`` when given a directory."""
    if n_cases < 1 and not extra_cases:
        raise ValueError("n_cases must be >= 1")
    path = None
    if output_dir is not None:
        Path(output_dir).mkdir(parents=True, exist_ok=True)
        path = Path(output_dir) / "lemma_campaign.jsonl"
    return odelemma.run_campaign(n_cases, seed, out_path=path, extra_cases=extra_cases)

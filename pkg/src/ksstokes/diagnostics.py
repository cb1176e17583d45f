"""Monitored functionals, the sliding-window dissipation functional and blow-up proxies."""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass

import numpy as np

from .errors import InsufficientData, InvalidParameter
from .fields import (ScalarField, cell_gradient_magnitude, face_average, face_diff, integrate,
                     lp_norm, vector_l2, vector_linf)
from .model import ModelParams, sensitivity
from .poisson import max_divergence

# relative slack when deciding whether a sample time lies inside [tau, T - tau]
_TIME_EPS = 1e-9


@dataclass(frozen=True)
class DiagnosticsConfig:
    p_list: tuple = (2.0, 4.0, 6.0)
    tau: float | None = None  # None: derived from the run horizon
    sample_every: int = 10
    blowup_growth_factor: float = 100.0
    blowup_dt_floor: float = 1e-9
    identity_residual: bool = True

    def __post_init__(self):
        p_list = tuple(float(p) for p in self.p_list)
        if not p_list or any(not p > 1 for p in p_list):
            raise InvalidParameter("every tracked exponent p must exceed 1")
        if self.tau is not None and not self.tau > 0:
            raise InvalidParameter("tau must be positive")
        if self.sample_every < 1:
            raise InvalidParameter("sample_every must be >= 1")
        if not self.blowup_growth_factor > 1:
            raise InvalidParameter("blowup_growth_factor must exceed 1")
        object.__setattr__(self, "p_list", p_list)


def p_label(p):
    return f"{p:g}"


def csv_columns(p_list):
    cols = ["t", "mass_n", "mass_c", "linf_n"]
    cols += [f"lp_n_{p_label(p)}" for p in p_list]
    cols += [f"grad_np2_sq_{p_label(p)}" for p in p_list]
    cols += [f"lp_grad_c_{p_label(p)}" for p in p_list]
    cols += ["linf_u", "l2_u", "div_u_max", "dt_used", "identity_residual", "poisson_iterations"]
    return cols


@dataclass
class DiagnosticsRecord:
    t: float
    mass_n: float
    mass_c: float
    linf_n: float
    lp_n: dict
    grad_np2_sq: dict
    lp_grad_c: dict
    linf_u: float
    l2_u: float
    div_u_max: float
    dt_used: float
    identity_residual: float = math.nan
    poisson_iterations: int = 0

    def row(self, p_list):
        vals = [self.t, self.mass_n, self.mass_c, self.linf_n]
        vals += [self.lp_n[p] for p in p_list]
        vals += [self.grad_np2_sq[p] for p in p_list]
        vals += [self.lp_grad_c[p] for p in p_list]
        vals += [self.linf_u, self.l2_u, self.div_u_max, self.dt_used, self.identity_residual,
                 self.poisson_iterations]
        return vals


def grad_np2_sq(n: ScalarField, p: float) -> float:
    """Discrete ``int |grad n^(p/2)|^2``: squared face differences times cell volume."""
    if not p > 1:
        raise InvalidParameter(f"p must exceed 1, got {p}")
    vals = n.values
    if np.any(vals < 0):
        raise InvalidParameter("grad_np2_sq needs a nonnegative density")
    w = vals if p == 2 else vals ** (0.5 * p)
    g = n.grid
    total = 0.0
    for d in range(g.dim):
        gd = face_diff(w, d, g.spacing[d], "neumann_zero")
        total += float(np.sum(gd * gd))
    return total * g.cell_volume


def w1p_proxy_c(c: ScalarField, p: float) -> float:
    """``||c||_p + || |grad c| ||_p``."""
    if not p >= 1:
        raise InvalidParameter(f"p must be >= 1, got {p}")
    return lp_norm(c, p) + lp_norm(cell_gradient_magnitude(c), p)


def compute_tau(t_horizon: float) -> float:
    if not t_horizon > 0:
        raise InvalidParameter("horizon must be positive")
    return min(1.0, 0.25 * t_horizon)


def _window_starts(times, tau, T):
    """Indices of samples usable as window starts: tau <= t <= T - tau and t + tau covered."""
    eps = _TIME_EPS * max(1.0, abs(T))
    last = times[-1]
    ok = (times >= tau - eps) & (times <= T - tau + eps) & (times + tau <= last + eps)
    return np.nonzero(ok)[0]


def window_integrals(series, tau, T):
    """Trapezoidal integrals over ``[t_i, t_i + tau]`` for every admissible start sample.

    Between samples the integrand is the linear interpolant, so a window end that falls
    between two samples closes with a partial trapezoid.
    """
    arr = np.asarray(series, dtype=float)
    if arr.ndim != 2 or arr.shape[1] != 2:
        raise InvalidParameter("series must be a sequence of (t, value) pairs")
    times, vals = arr[:, 0], arr[:, 1]
    if np.any(np.diff(times) < 0):
        raise InvalidParameter("series must be time-sorted")
    if not tau > 0:
        raise InvalidParameter("tau must be positive")
    starts = _window_starts(times, tau, T)
    if starts.size == 0:
        raise InsufficientData(f"series over [{times[0] if len(times) else 'empty'}, "
                               f"{times[-1] if len(times) else ''}] holds no window of length {tau} "
                               f"starting in [tau, T - tau] with T={T}")
    cum = np.concatenate([[0.0], np.cumsum(0.5 * (vals[1:] + vals[:-1]) * np.diff(times))])

    def cum_at(t):
        j = int(np.searchsorted(times, t, side="right")) - 1
        j = min(max(j, 0), len(times) - 1)
        if j == len(times) - 1 or t <= times[j]:
            return cum[j]
        dt = t - times[j]
        frac = dt / (times[j + 1] - times[j])
        v_t = vals[j] + frac * (vals[j + 1] - vals[j])
        return cum[j] + 0.5 * (vals[j] + v_t) * dt

    ends = np.minimum(times[starts] + tau, times[-1])
    return times[starts], np.array([cum_at(e) - cum[i] for i, e in zip(starts, ends)])


def sliding_I(series, tau: float, T: float) -> float:
    """``sup`` over window starts in ``[tau, T - tau]`` of the time integral over ``[t, t + tau]``."""
    _, ints = window_integrals(series, tau, T)
    return float(ints.max())


def _face_n(n_values, grid):
    return face_average(ScalarField(grid, n_values)).components


def identity_terms(n_values, c_values, grid, params: ModelParams, p: float):
    """Spatial parts of the L^p testing identity at one state: dissipation and cross term."""
    nf = _face_n(n_values, grid)
    diss = 0.0
    cross = 0.0
    for d in range(grid.dim):
        h = grid.spacing[d]
        gn = face_diff(n_values, d, h, "neumann_zero")
        gc = face_diff(c_values, d, h, "neumann_zero")
        nfd = nf[d]
        weight = np.maximum(nfd, 1e-12) ** (p - 2) if p != 2 else 1.0
        diss += float(np.sum(weight * gn * gn))
        cross += float(np.sum(nfd ** (p - 1) * sensitivity(nfd, params) * gn * gc))
    vol = grid.cell_volume
    return p * (p - 1) * diss * vol, p * (p - 1) * cross * vol


def testing_identity_residual(state_before, state_after, params: ModelParams, p: float, dt: float) -> float:
    """Relative residual of ``d/dt int n^p + p(p-1) int n^(p-2)|grad n|^2 = p(p-1) int n^(p-1) S(n) grad n . grad c``.

    The time derivative is the difference quotient over the step; spatial terms are
    evaluated at the average of the two states with face-averaged densities. The
    residual is normalised by ``|d/dt term| + |dissipation| + |cross term|`` so that it
    stays meaningful when the cross term vanishes (``S = 0``).
    """
    if not dt > 0:
        raise InvalidParameter("dt must be positive")
    g = state_before.grid
    vol = g.cell_volume
    nb, na = state_before.n.values, state_after.n.values
    ddt = (float(np.sum(na ** p)) - float(np.sum(nb ** p))) * vol / dt
    n_mid = 0.5 * (nb + na)
    c_mid = 0.5 * (state_before.c.values + state_after.c.values)
    diss, cross = identity_terms(n_mid, c_mid, g, params, p)
    scale = abs(ddt) + abs(diss) + abs(cross)
    if scale == 0.0:
        return 0.0
    return abs(ddt + diss - cross) / (scale + 1e-300)


testing_identity_residual.__test__ = False  # keep pytest from collecting it on import


def record_state(state, p_list, dt_used=0.0, identity_residual=math.nan, poisson_iterations=0):
    n, c = state.n, state.c
    return DiagnosticsRecord(
        t=state.t,
        mass_n=integrate(n),
        mass_c=integrate(c),
        linf_n=lp_norm(n, np.inf),
        lp_n={p: lp_norm(n, p) for p in p_list},
        grad_np2_sq={p: grad_np2_sq(n, p) for p in p_list},
        lp_grad_c={p: lp_norm(cell_gradient_magnitude(c), p) for p in p_list},
        linf_u=vector_linf(state.u),
        l2_u=vector_l2(state.u),
        div_u_max=max_divergence(state.u),
        dt_used=dt_used,
        identity_residual=identity_residual,
        poisson_iterations=poisson_iterations,
    )


@dataclass
class BlowupVerdict:
    verdict: str
    trigger_time: float | None
    peak_linf_n: float

    def __post_init__(self):
        if self.verdict not in ("bounded_on_horizon", "growth_triggered", "dt_collapsed"):
            raise InvalidParameter(f"unknown verdict {self.verdict!r}")
        if (self.trigger_time is None) != (self.verdict == "bounded_on_horizon"):
            raise InvalidParameter("trigger_time must be set exactly when growth or collapse was seen")


def blowup_verdict(records, cfg: DiagnosticsConfig, horizon: float) -> BlowupVerdict:
    """Classify a run from its samples.

    Growth: ``linf_n`` exceeds ``factor * linf_n(0)``. Collapse: the last sample carries a
    step below ``blowup_dt_floor`` (the runner records the rejected step on abort).
    A log that stops short of the horizon without either signal is reported as collapsed
    at its last time, since nothing else ends a run early.
    """
    if not records:
        raise InvalidParameter("need at least one record")
    peak = max(r.linf_n for r in records)
    threshold = cfg.blowup_growth_factor * records[0].linf_n
    for r in records:
        if r.linf_n > threshold:
            return BlowupVerdict("growth_triggered", r.t, peak)
    last = records[-1]
    if len(records) > 1 and last.dt_used < cfg.blowup_dt_floor:
        return BlowupVerdict("dt_collapsed", last.t, peak)
    if last.t < horizon * (1 - _TIME_EPS):
        return BlowupVerdict("dt_collapsed", last.t, peak)
    return BlowupVerdict("bounded_on_horizon", None, peak)


class CsvSink:
    """Line-buffered CSV writer; every row is flushed so an abort leaves a complete log."""

    def __init__(self, path, p_list):
        self.p_list = tuple(p_list)
        self._fh = open(path, "w", newline="")
        self._writer = csv.writer(self._fh)
        self._writer.writerow(csv_columns(self.p_list))
        self._fh.flush()

    def write(self, rec: DiagnosticsRecord):
        self._writer.writerow([repr(float(v)) if isinstance(v, float) else v for v in rec.row(self.p_list)])
        self._fh.flush()

    def close(self):
        self._fh.close()

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.close()


def read_csv_series(path, column):
    """``(t, value)`` pairs of one column from a diagnostics CSV."""
    with open(path, newline="") as fh:
        rows = list(csv.DictReader(fh))
    if not rows:
        raise InsufficientData(f"{path} has no samples")
    if column not in rows[0]:
        raise InvalidParameter(f"column {column!r} not in {path}")
    return [(float(r["t"]), float(r[column])) for r in rows]

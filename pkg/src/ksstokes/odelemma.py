"""Upper bounds for superlinearly damped differential inequalities with window-bounded forcing.

For ``y' + a y^gamma + g <= h`` on ``(t*, T)`` with nonnegative ``y, g, h`` and every
``tau``-window integral of ``h`` at most ``b``, the bound is ``y <= b + C`` and every
``tau``-window integral of ``g`` is at most ``2b + C``, where
``C = max(y(t*), ((gamma - 1) a tau)^(-1/(gamma - 1)))``.

:func:`verify_bound` integrates the saturated equation (equality, the extremal case)
with classical RK4 and checks both bounds.
"""
from __future__ import annotations

import json
from dataclasses import asdict, dataclass

import numpy as np

from .errors import InvalidParameter, LemmaViolation, MalformedCase


@dataclass(frozen=True)
class OdeBoundProblem:
    a: float
    b: float
    gamma: float
    tau: float
    t_star: float
    T: float
    y_start: float

    def __post_init__(self):
        if not self.a > 0:
            raise InvalidParameter(f"a must be > 0, got {self.a}")
        if not self.b > 0:
            raise InvalidParameter(f"b must be > 0, got {self.b}")
        if not self.gamma > 1:
            raise InvalidParameter(f"gamma must be > 1, got {self.gamma}")
        if not self.T > self.t_star:
            raise InvalidParameter("T must exceed t_star")
        if not 0 < self.tau < self.T - self.t_star:
            raise InvalidParameter(f"tau must lie in (0, T - t_star), got {self.tau}")
        if not self.y_start >= 0:
            raise InvalidParameter("y_start must be nonnegative")


@dataclass(frozen=True)
class OdeBoundResult:
    c_const: float
    y_bound: float
    g_window_bound: float


def lemma1_bound(prob: OdeBoundProblem) -> OdeBoundResult:
    decay_level = ((prob.gamma - 1.0) * prob.a * prob.tau) ** (-1.0 / (prob.gamma - 1.0))
    c = max(prob.y_start, decay_level)
    return OdeBoundResult(c, prob.b + c, 2.0 * prob.b + c)


def comparison_function(prob: OdeBoundProblem, h, t0, t):
    """Supersolution ``C1 (t - t0)^(-1/(gamma-1)) + int_{t0}^t h`` used in the proof (report overlay only)."""
    c1 = ((prob.gamma - 1.0) * prob.a) ** (-1.0 / (prob.gamma - 1.0))
    return c1 * (t - t0) ** (-1.0 / (prob.gamma - 1.0)) + h.integral(t0, t)


# --- forcing descriptors ------------------------------------------------------


class Constant:
    piecewise = True

    def __init__(self, value):
        self.value = float(value)

    def __call__(self, t):
        return self.value + 0.0 * np.asarray(t, dtype=float)

    def integral(self, t0, t1):
        return self.value * (np.asarray(t1, dtype=float) - t0)

    def breakpoints(self):
        return ()

    def to_dict(self):
        return {"kind": "constant", "value": self.value}


class PiecewiseConstant:
    """Value ``values[k]`` on ``[edges[k], edges[k+1])``; 0 outside ``[edges[0], edges[-1])``."""

    piecewise = True

    def __init__(self, edges, values):
        self.edges = np.asarray(edges, dtype=float)
        self.values = np.asarray(values, dtype=float)
        if self.edges.ndim != 1 or self.edges.size != self.values.size + 1:
            raise InvalidParameter("need len(edges) == len(values) + 1")
        if np.any(np.diff(self.edges) <= 0):
            raise InvalidParameter("edges must increase")
        self._cum = np.concatenate([[0.0], np.cumsum(self.values * np.diff(self.edges))])

    def __call__(self, t):
        t = np.asarray(t, dtype=float)
        k = np.searchsorted(self.edges, t, side="right") - 1
        inside = (k >= 0) & (k < self.values.size)
        out = np.where(inside, self.values[np.clip(k, 0, self.values.size - 1)], 0.0)
        return float(out) if out.ndim == 0 else out

    def _antiderivative(self, t):
        t = np.clip(np.asarray(t, dtype=float), self.edges[0], self.edges[-1])
        k = np.minimum(np.searchsorted(self.edges, t, side="right") - 1, self.values.size - 1)
        return self._cum[k] + self.values[k] * (t - self.edges[k])

    def integral(self, t0, t1):
        out = self._antiderivative(t1) - self._antiderivative(t0)
        return float(out) if np.ndim(out) == 0 else out

    def breakpoints(self):
        return tuple(self.edges)

    def to_dict(self):
        return {"kind": "piecewise_constant", "edges": self.edges.tolist(), "values": self.values.tolist()}


class Scaled:
    """``factor * base``; keeps exact integrals of the base descriptor."""

    def __init__(self, base, factor):
        self.base = base
        self.factor = float(factor)
        self.piecewise = getattr(base, "piecewise", False)

    def __call__(self, t):
        return self.factor * self.base(t)

    def integral(self, t0, t1):
        return self.factor * self.base.integral(t0, t1)

    def breakpoints(self):
        return self.base.breakpoints()

    def to_dict(self):
        return {"kind": "scaled", "factor": self.factor, "base": self.base.to_dict()}


def _integral(fn, t0, t1, n=200):
    if hasattr(fn, "integral"):
        return fn.integral(t0, t1)
    s = np.linspace(t0, t1, n + 1)
    return float(np.trapezoid(np.asarray(fn(s), dtype=float), s))


def max_window_integral(fn, t_star, T, tau, refine=100):
    """Largest ``int_t^{t+tau} fn`` over ``t in [t_star, T - tau]``.

    Starts are scanned on a grid ``refine`` times finer than ``tau``. For piecewise
    constant input the window integral is piecewise linear in ``t`` with kinks at the
    breakpoints and at breakpoints minus ``tau``, so those are added and the scan is exact.
    """
    n = max(int(np.ceil(refine * (T - tau - t_star) / tau)), 1)
    starts = set(np.linspace(t_star, T - tau, n + 1).tolist())
    for e in getattr(fn, "breakpoints", lambda: ())():
        for s in (e, e - tau):
            if t_star <= s <= T - tau:
                starts.add(float(s))
    starts = np.array(sorted(starts))
    if hasattr(fn, "integral"):
        return float(np.max(fn.integral(starts, starts + tau)))
    return max(_integral(fn, s, s + tau) for s in starts)


@dataclass
class VerificationReport:
    c_const: float
    y_bound: float
    g_window_bound: float
    y_max: float
    g_window_max: float
    eps_int: float
    y_slack: float
    g_slack: float
    verdict: str  # "ok"

    @property
    def max_slack(self):
        return min(self.y_slack, self.g_slack)


def _segments(prob, h, g, n_steps):
    """Integration sub-intervals split at forcing jumps, with steps shared out by length."""
    cuts = {prob.t_star, prob.T}
    for fn in (h, g):
        for e in getattr(fn, "breakpoints", lambda: ())():
            if prob.t_star < e < prob.T:
                cuts.add(float(e))
    cuts = sorted(cuts)
    length = prob.T - prob.t_star
    return [(lo, hi, max(int(round(n_steps * (hi - lo) / length)), 1)) for lo, hi in zip(cuts[:-1], cuts[1:])]


def _rk4_saturated(prob, h, g, n_steps):
    """Classical RK4 on the saturated equation.

    The nominal step is ``(T - t*)/n_steps``; it is shortened to ``0.5 / (a gamma y^(gamma-1))``
    while the damping term is stiff, so large initial values decay without overshoot.
    """
    a, gam = prob.a, prob.gamma
    y = float(prob.y_start)
    ts, ys = [prob.t_star], [y]
    for lo, hi, m in _segments(prob, h, g, n_steps):
        base = (hi - lo) / m
        if getattr(h, "piecewise", False) and getattr(g, "piecewise", False):
            mid = 0.5 * (lo + hi)
            level = float(h(mid)) - float(g(mid))

            def rhs(t, y):
                return -a * (y if y > 0.0 else 0.0) ** gam + level
        else:
            # stage times stay inside the segment so a jump at ``hi`` is not sampled
            top = hi - 1e-12 * (hi - lo)

            def rhs(t, y):
                t = min(t, top)
                return -a * (y if y > 0.0 else 0.0) ** gam - float(g(t)) + float(h(t))

        t = lo
        while t < hi - 1e-14 * (hi - lo):
            stiff = a * gam * (y if y > 0.0 else 0.0) ** (gam - 1.0)
            dt = min(base, 0.5 / stiff if stiff > 0 else base, hi - t)
            k1 = rhs(t, y)
            k2 = rhs(t + 0.5 * dt, y + 0.5 * dt * k1)
            k3 = rhs(t + 0.5 * dt, y + 0.5 * dt * k2)
            k4 = rhs(t + dt, y + dt * k3)
            y = y + dt / 6.0 * (k1 + 2 * k2 + 2 * k3 + k4)
            t = t + dt
            ts.append(t)
            ys.append(y)
    return np.array(ts), np.array(ys)


def verify_bound(prob: OdeBoundProblem, h, g=None, n_steps=4000) -> VerificationReport:
    """Integrate ``y' = -a y^gamma - g + h`` from ``y_start`` and check both bounds.

    Raises :class:`MalformedCase` if ``h`` or ``g`` is negative, if some window integral
    of ``h`` exceeds ``b``, or if the trajectory leaves ``y >= 0``; raises
    :class:`LemmaViolation` if a bound fails by more than ``1e-6 (1 + y_bound)``.
    """
    g = Constant(0.0) if g is None else g
    bound = lemma1_bound(prob)
    probe = np.linspace(prob.t_star, prob.T, 100 * max(int(np.ceil((prob.T - prob.t_star) / prob.tau)), 1) + 1)
    if np.any(np.asarray(h(probe)) < 0) or np.any(np.asarray(g(probe)) < 0):
        raise MalformedCase("h and g must be nonnegative")
    h_win = max_window_integral(h, prob.t_star, prob.T, prob.tau)
    if h_win > prob.b * (1 + 1e-12):
        raise MalformedCase(f"window integral of h is {h_win:.6g} > b = {prob.b:.6g}")
    ts, ys = _rk4_saturated(prob, h, g, n_steps)
    eps = 1e-6 * (1.0 + bound.y_bound)
    if ys.min() < -eps:
        raise MalformedCase("trajectory left y >= 0 (g too large for the saturated equation)")
    y_max = float(ys.max())
    g_max = max_window_integral(g, prob.t_star, prob.T, prob.tau)
    report = VerificationReport(bound.c_const, bound.y_bound, bound.g_window_bound, y_max, g_max, eps,
                                bound.y_bound - y_max, bound.g_window_bound - g_max, "ok")
    if y_max > bound.y_bound + eps:
        raise LemmaViolation(f"y reached {y_max:.9g} > bound {bound.y_bound:.9g}")
    if g_max > bound.g_window_bound + eps:
        raise LemmaViolation(f"g window integral {g_max:.9g} > bound {bound.g_window_bound:.9g}")
    return report


# short alias
verify_lemma1 = verify_bound


def random_case(rng, malformed=False):
    """One randomised admissible problem with piecewise-constant ``h`` and ``g = theta h``.

    ``malformed=True`` shrinks ``b`` below the true window maximum of ``h``.
    """
    a = float(rng.uniform(0.1, 5.0))
    gamma = float(rng.uniform(1.2, 4.0))
    t_star = float(rng.uniform(-1.0, 1.0))
    length = float(rng.uniform(1.0, 6.0))
    T = t_star + length
    tau = float(rng.uniform(0.05, 0.9)) * min(1.0, length / 2)
    y_start = float(rng.choice([0.0, rng.uniform(0, 3), rng.uniform(0, 50)]))
    pieces = int(rng.integers(1, 12))
    edges = np.sort(np.concatenate([[t_star, T], rng.uniform(t_star, T, pieces - 1)]))
    edges = np.unique(edges)
    values = rng.uniform(0, 10, edges.size - 1) * (rng.uniform(size=edges.size - 1) < 0.7)
    h = PiecewiseConstant(edges, values)
    h_win = max_window_integral(h, t_star, T, tau)
    if malformed:
        b = 0.5 * h_win if h_win > 0 else 1.0
        h = Scaled(h, 1.0) if h_win > 0 else Constant(2.0 / tau)
    else:
        b = max(h_win, 1e-3) * float(rng.uniform(1.0, 1.5))
    theta = float(rng.choice([0.0, rng.uniform(0.0, 1.0)]))
    g = Scaled(h, theta)
    prob = OdeBoundProblem(a, b, gamma, tau, t_star, T, y_start)
    return prob, h, g


def run_campaign(n_cases, seed, out_path=None, extra_cases=(), n_steps=4000):
    """Verify ``n_cases`` random problems (plus ``extra_cases`` of ``(prob, h, g)``).

    Returns a summary dict; with ``out_path`` each case is written as one JSON line.
    """
    if n_cases < 0:
        raise InvalidParameter("n_cases must be nonnegative")
    rng = np.random.default_rng(seed)
    cases = [random_case(rng) for _ in range(n_cases)] + list(extra_cases)
    summary = {"cases": len(cases), "ok": 0, "violations": 0, "rejected": 0, "min_slack": None}
    lines = []
    for i, (prob, h, g) in enumerate(cases):
        entry = {"case": i, "problem": asdict(prob), "h": h.to_dict(), "g": g.to_dict()}
        try:
            rep = verify_bound(prob, h, g, n_steps=n_steps)
        except MalformedCase as exc:
            summary["rejected"] += 1
            entry.update(verdict="rejected", reason=str(exc))
        except LemmaViolation as exc:
            summary["violations"] += 1
            entry.update(verdict="violation", reason=str(exc))
        else:
            summary["ok"] += 1
            slack = rep.max_slack
            ms = summary["min_slack"]
            summary["min_slack"] = slack if ms is None else min(ms, slack)
            entry.update(verdict="ok", max_slack=slack, y_max=rep.y_max, y_bound=rep.y_bound,
                         g_window_max=rep.g_window_max, g_window_bound=rep.g_window_bound)
        lines.append(entry)
    if out_path is not None:
        with open(out_path, "w") as fh:
            for entry in lines:
                fh.write(json.dumps(entry) + "\n")
    summary["entries"] = lines
    return summary

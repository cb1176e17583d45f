"""The ODE comparison bound, checked against integrated worst-case trajectories."""
import numpy as np

from ksstokes.odelemma import (Constant, OdeBoundProblem, PiecewiseConstant, lemma1_bound, run_campaign,
                               verify_bound)

# the constant is the larger of the start value and the decay level ((gamma-1) a tau)^(-1/(gamma-1))
for prob in (OdeBoundProblem(1, 1, 2, 1, 0, 3, 0), OdeBoundProblem(1, 1, 2, 1, 0, 3, 1e6),
             OdeBoundProblem(4, 2, 3, 0.5, 0, 3, 0)):
    r = lemma1_bound(prob)
    print(f"a={prob.a:g} gamma={prob.gamma:g} tau={prob.tau:g} y0={prob.y_start:g} b={prob.b:g} -> "
          f"C={r.c_const:g}, y bound {r.y_bound:g}, g-window bound {r.g_window_bound:g}")

# bursty forcing: every window of length tau carries at most b
prob = OdeBoundProblem(a=0.5, b=2.0, gamma=1.5, tau=0.5, t_star=0.0, T=6.0, y_start=3.0)
h = PiecewiseConstant(np.arange(0.0, 6.5, 0.5), [4.0, 0.0] * 6)
rep = verify_bound(prob, h, Constant(0.0))
print(f"bursty forcing: y max {rep.y_max:.4f} <= bound {rep.y_bound:.4f} (slack {rep.y_slack:.4f})")

summary = run_campaign(200, seed=1)
print(f"random campaign: {summary['ok']} ok, {summary['violations']} violations, "
      f"{summary['rejected']} rejected, smallest slack {summary['min_slack']:.4g}")

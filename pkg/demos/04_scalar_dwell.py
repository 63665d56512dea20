"""Phase from time spent in a potential.

The moving fluxon spends 2 time units inside a rectangle where V = 1.5;
the reference fluxon never enters. No force acts, yet gamma shifts by
V * dwell = 3.0 once the two meet again.
"""

from fluxonsim import DwellSchedule, default_region, run_scalar_ab

for v, dwell in ((1.5, 2.0), (0.0, 2.0), (0.5, 3.0)):
    res = run_scalar_ab(default_region(v), DwellSchedule(dwell=dwell), bath=100, seed=2)
    print(f"V={v} dwell={dwell}: target {res.target:.4f}  residual {res.residual:+.2e}  (tol {res.tolerance:.0e})")

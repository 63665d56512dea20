"""Two fluxons, a charge, and a random bath.

Fluxon 0 waits at (1, 0) while fluxon 1 winds round the source and comes
back. The bath scrambles the relative angle gamma along the way, yet once
the two meet again gamma has moved by exactly 2 pi n xi mod 2 pi.
"""

import numpy as np

from fluxonsim import run_two_fluxon_loop
from fluxonsim.geometry import wrap_positive

xi = 0.37

for n in (-1, 0, 1, 2):
    res = run_two_fluxon_loop(xi, n=n, bath=200, seed=11)
    print(f"n={n:+d}  N={res.N:+3d}  predicted={res.predicted:.6f}  residual={res.closure_residual:+.1e}")

# halfway round, gamma depends on the bath realization; at the end it does not
mids, ends = [], []
for seed in range(20):
    res = run_two_fluxon_loop(xi, n=1, bath=200, seed=seed, keep_trace=False)
    mids.append(res.gamma_mid)
    ends.append(res.delta_gamma)
print("gamma(T/2) mod 2pi:", np.round(wrap_positive(mids)[:8], 3))
print("gamma(T) mod 2pi:  ", np.round(wrap_positive(ends)[:8], 9))

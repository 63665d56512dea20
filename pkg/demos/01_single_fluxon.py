"""A lone fluxon going round a charge.

Without a bath the internal angle just follows the polar angle, scaled by
xi. After one counter-clockwise turn it has moved by 2 pi xi, whatever
the shape of the loop.
"""

import math

from fluxonsim import run_single_fluxon, star_loop

xi = 0.37

res = run_single_fluxon(xi)
print(f"circle: dphi = {res.delta_phi:.12f}, 2 pi xi = {2 * math.pi * xi:.12f}")

# an irregular loop, still wound once
res = run_single_fluxon(xi, star_loop(7, duration=2.0))
print(f"star:   dphi = {res.delta_phi:.12f}, winding = {res.n}")

# halfway round the trace is still just xi times the polar angle
tr = res.trace
mid = len(tr.times) // 2
print(f"t={tr.times[mid]:.2f}: phi = {tr.phi[mid, 0]:.6f}, xi*dtheta = {xi * (tr.theta[mid, 0] - tr.theta[0, 0]):.6f}")

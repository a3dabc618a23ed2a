"""Super-level sets of a vortex ring and their scale of sparseness.

A set is delta-sparse at scale r around x if it fills at most a fraction
delta of the ball B_r(x).  The scale of sparseness is the smallest r at
which that holds everywhere.  For a thin ring it sits near the core size.
"""
import math

from mkdiss.grid import GridSpec, RingConfig, gaussian_ring_vorticity
from mkdiss.harmonic import solve_M
from mkdiss.sparseness import (MODE_1D, MODE_3D, distribution_bound, sparseness_scale,
                               superlevel_mask)

grid = GridSpec(64, 4.0)
omega = gaussian_ring_vorticity(RingConfig(1.0, 0.2, 1.0), grid)
lam = solve_M().lam
print(f"lambda = 1/(2M) = {lam:.6f}, delta = 3/4")

sets = superlevel_mask(omega, lam)
print(f"threshold {sets.threshold:.3f}, union volume {sets.union.volume:.4f}")

for mode in (MODE_3D, MODE_1D):
    search = sparseness_scale(sets, 0.75, mode)
    print(f"{mode}: r_s = {search.scale:.4f} after {len(search.scanned)} probes"
          f" (grid spacing {grid.spacing:.4f}, core radius 0.2)")

# the super-level set never exceeds the Chebyshev bound
for level in (1.0, 4.0, 7.0):
    lhs, rhs, holds = distribution_bound(omega, level)
    print(f"|{{|w| > {level}}}| = {lhs:.4f} <= {rhs:.4f}: {holds}")

# lambda close to one keeps only the very top of the core
for l in (0.25, 0.5, 0.75, 0.95):
    s = superlevel_mask(omega, l)
    r = sparseness_scale(s, 0.75).scale
    print(f"lambda {l:.2f}: volume {s.union.volume:.4f}, r_s {r if r is None else round(r, 4)}")
print(f"(ball of radius r_s holds ~{4 / 3 * math.pi * (2 * grid.spacing) ** 3:.4f} at two cells)")

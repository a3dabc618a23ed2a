"""Mean oscillations, log-composite weights and the weighted bmo norm.

The sign function has mean oscillation exactly one on every cube centred
on its jump, at every size.  Dividing by a weight that goes to zero with
the scale therefore makes the weighted norm grow as finer cubes enter.
"""
import math

import numpy as np

from mkdiss.grid import GridSpec, RingConfig, gaussian_ring_vorticity
from mkdiss.oscillation import (WeightSpec, bmo_phi_norm, direction_field,
                                discontinuity_criterion, mean_oscillation, phi_eval)

grid = GridSpec(32, 1.0)
sgn = np.broadcast_to(np.sign(grid.mesh()[0]), (32,) * 3)
for m in (2, 4, 8, 16):
    r = m * grid.spacing
    print(f"cube side {r:.4f}: Omega(sgn) = {mean_oscillation(sgn, (0.0, 0.0, 0.0), r, grid):.6f}")

r = np.array([0.5, 1e-2, 1e-8, 1e-100])
for k in (1, 2, 3):
    print(f"phi_{k}({r.tolist()}) =", np.round(phi_eval(WeightSpec.log_composite(k), r), 4))

scales = [0.5, 0.25, 0.125, 0.0625]
for weight in (WeightSpec.constant(), WeightSpec.log_composite(1)):
    rep = bmo_phi_norm(sgn, weight, scales, grid=grid)
    print(f"{weight.describe():32s} sup part {rep.sup_part:.4f} at {rep.argmax_cube}")

# log weights are not integrable against dr/r, so discontinuous functions are allowed
for w in (WeightSpec.power(0.5), WeightSpec.log_composite(1)):
    res = discontinuity_criterion(w)
    print(f"{w.describe():32s} admits jumps: {res.admits_discontinuous}")

# direction of vorticity around a ring: nearly constant inside each core
ring = gaussian_ring_vorticity(RingConfig(1.0, 0.25, 1.0), GridSpec(32, 2 * math.pi))
xi = direction_field(ring, floor_fraction=1e-2)
rep = bmo_phi_norm(xi, WeightSpec.log_composite(1), [0.5, 0.4], stride=2, center_region="valid")
print(f"direction field: l1 part {rep.l1_part:.3f}, sup part {rep.sup_part:.3f},"
      f" skipped cubes {rep.skipped_cubes}")

"""Core size against analyticity radius, and the verdict on a short run.

Both scales go like max|omega|^(-1/2), so their ratio is fixed by the
initial Reynolds number.  The verdict compares the measured sparseness
scale with the analyticity radius at escape times.
"""
import math

from mkdiss.grid import GridSpec, MKConfig, RingConfig, mk_initial_configuration
from mkdiss.monitor import (formula_layer_check, predicted_sparseness_scale,
                            reynolds_threshold, tetration_crossover, criticality_verdict,
                            analyticity_radius)
from mkdiss.solver import RunConfig, evolve

for ratio in (1.0, 4 * math.pi, 100.0):
    out = formula_layer_check(ratio, 1.0, [1.0, 10.0, 100.0])
    print(f"Gamma/nu = {ratio:7.3f}: delta/rho = {out['delta_over_rho']:.4f},"
          f" subcritical {out['subcritical']}, spread {out['ratio_spread']:.1e}")
print("threshold at Gamma/nu = 100:", reynolds_threshold(1.0, 0.01))

nu = 0.01
for w in (1.0, 1e2, 1e4):
    rho = analyticity_radius(w, nu, mode="c3")
    print(f"|w| = {w:8.0f}: rho {rho:.2e}, predicted r_s k=0 {predicted_sparseness_scale(w, 0):.2e},"
          f" k=2 {predicted_sparseness_scale(w, 2):.2e}")

grid = GridSpec(32, 2 * math.pi)
omega0 = mk_initial_configuration(MKConfig(RingConfig(1.0, 0.3, 1.0), math.pi / 6, 0.45), grid)
timeline = evolve(omega0, RunConfig(n=32, nu=nu, t_final=0.5, snapshot_interval=0.1))
result = criticality_verdict(timeline, 1.0, nu)
print(f"verdict: {result.verdict} ({result.reason})")
for row in result.rows:
    print(f"t {row['t']:.1f}: max|w| {row['omega_linf']:.3f}, r_s {row['r_s_measured']:.3f},"
          f" rho {row['rho_s']:.3f}")

for k, top in ((1, 2.0), (2, 1.0), (4, 10.0)):
    t = tetration_crossover(k, top)
    print(f"height {k}, top {top}: {t.levels} levels fit, residual {t.residual:.6g},"
          f" {t.remaining} more to go")

"""Harmonic measure of slits on a diameter of the unit disc.

Among all subsets of the diameter with total length 2 alpha, the two
symmetric end pieces have the smallest harmonic measure at the centre.
That value has a closed form; the grid solver reproduces it and random
sets of the same length come out larger.
"""
import numpy as np

from mkdiss.harmonic import (SPARSE_COMPLEMENT_ALPHA, SlitSet, harmonic_measure_numeric,
                             harmonic_table, hmmp_bound, random_slit_set, solve_M, solynin_h)

print(f"{'alpha':>6} {'closed':>9} {'grid':>9} {'error':>8}")
for a, exact, num, err in harmonic_table([0.1, 0.25, 0.5, 0.75, 1.0], 256, method="direct"):
    print(f"{a:6.2f} {exact:9.6f} {num:9.6f} {err:8.1e}")

rng = np.random.default_rng(1)
alpha = 0.25
for _ in range(3):
    K = random_slit_set(alpha, rng, 256)
    v = harmonic_measure_numeric(K, 256, method="direct").value
    print(f"random set {np.round(K.intervals, 3).tolist()}: {v:.4f} >= {solynin_h(alpha):.4f}")

sol = solve_M()
print(f"sparse complement alpha = 1 - (3/4)^(1/3) = {SPARSE_COMPLEMENT_ALPHA:.6f}")
print(f"h* = {sol.h_star:.13f}, M = {sol.M:.14f}, lambda = {sol.lam:.15f}")
print(f"maximum principle bound at (1/2, M, h*) = {hmmp_bound(0.5, sol.M, sol.h_star):.15f}")

# a single slit touching the circle, same length as alpha = 0.25
one = SlitSet(((0.5, 1.0),))
print(f"one-sided slit [0.5, 1]: {harmonic_measure_numeric(one, 256, method='direct').value:.4f}")

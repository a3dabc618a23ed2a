"""Compiled inner loops."""
import numpy as np
from numba import njit


@njit(cache=True, fastmath={"reassoc", "contract"})
def cube_deviation(f, valid, means, counts, m, stride, min_count, out):
    """Mean Euclidean deviation from the cube mean for strided cube corners.

    ``f`` (C, n+m, n+m, n+m) and ``valid`` (n+m, n+m, n+m) are periodically
    padded so cubes never wrap; ``means`` (C, n, n, n) and ``counts``
    (n, n, n) hold cube means and valid counts indexed by the low corner.
    Cubes with fewer than ``min_count`` valid cells are left as NaN.
    """
    C = f.shape[0]
    n = counts.shape[0]
    mu = np.empty(C)
    for i0 in range(0, n, stride):
        for j0 in range(0, n, stride):
            for k0 in range(0, n, stride):
                cnt = counts[i0, j0, k0]
                if cnt < min_count or cnt == 0:
                    out[i0, j0, k0] = np.nan
                    continue
                for c in range(C):
                    mu[c] = means[c, i0, j0, k0]
                acc = 0.0
                if C == 1 and cnt == m * m * m:
                    # full cube: branch-free loop the compiler can vectorise
                    m0 = mu[0]
                    for i in range(i0, i0 + m):
                        for j in range(j0, j0 + m):
                            row = f[0, i, j, k0:k0 + m]
                            for k in range(m):
                                acc += abs(row[k] - m0)
                elif C == 1:
                    m0 = mu[0]
                    for i in range(i0, i0 + m):
                        for j in range(j0, j0 + m):
                            for k in range(k0, k0 + m):
                                if valid[i, j, k]:
                                    acc += abs(f[0, i, j, k] - m0)
                else:
                    for i in range(i0, i0 + m):
                        for j in range(j0, j0 + m):
                            for k in range(k0, k0 + m):
                                if valid[i, j, k]:
                                    s = 0.0
                                    for c in range(C):
                                        d = f[c, i, j, k] - mu[c]
                                        s += d * d
                                    acc += np.sqrt(s)
                out[i0, j0, k0] = acc / cnt


@njit(cache=True)
def sor_sweep(u, fixed, coef, omega):
    """One red-black SOR sweep of a 5-point Laplacian; returns max update.

    ``coef`` (4, ny, nx) holds the west/east/south/north neighbour weights.
    """
    ny, nx = u.shape
    maxdu = 0.0
    for color in range(2):
        for i in range(1, ny - 1):
            start = 1 + ((i + color) % 2)
            for j in range(start, nx - 1, 2):
                if fixed[i, j]:
                    continue
                cw = coef[0, i, j]
                ce = coef[1, i, j]
                cs = coef[2, i, j]
                cn = coef[3, i, j]
                new = (cw * u[i, j - 1] + ce * u[i, j + 1]
                       + cs * u[i - 1, j] + cn * u[i + 1, j]) / (cw + ce + cs + cn)
                du = omega * (new - u[i, j])
                u[i, j] += du
                if abs(du) > maxdu:
                    maxdu = abs(du)
    return maxdu

"""Harmonic measure of slits on the real diameter of the unit disc.

``h(0, D, K)`` is the value at the origin of the harmonic function on
``D \\ K`` equal to 1 on ``K`` and 0 on the unit circle.  For the symmetric
pair ``K_alpha = [-1, -1 + alpha] u [1 - alpha, 1]`` it has the closed form

    h = (2/pi) arcsin((1 - (1 - alpha)^2) / (1 + (1 - alpha)^2))

and ``K_alpha`` minimises ``h(0, D, K)`` among closed ``K`` of length
``2 alpha``.  General slit sets are handled by a finite-difference
Laplace solve.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np
import scipy.sparse
import scipy.sparse.linalg

from ._kernels import sor_sweep
from .errors import ConvergenceError, ParameterError

CLOSED_FORM = "closed_form"
GRID_LAPLACE = "grid_laplace"

#: length fraction left free by a 1D (3/4)^(1/3)-sparse diameter
SPARSE_COMPLEMENT_ALPHA = 1.0 - 0.75 ** (1.0 / 3.0)


@dataclass(frozen=True)
class SlitSet:
    intervals: tuple

    def __post_init__(self):
        ivs = tuple(sorted((float(a), float(b)) for a, b in self.intervals))
        if not ivs:
            raise ParameterError("slit set must contain at least one interval")
        for a, b in ivs:
            if not -1.0 <= a <= b <= 1.0:
                raise ParameterError(f"interval [{a}, {b}] is not inside [-1, 1]")
        for (_, b0), (a1, _) in zip(ivs, ivs[1:]):
            if a1 <= b0:
                raise ParameterError("intervals must be disjoint")
        object.__setattr__(self, "intervals", ivs)
        if not 0 < self.total_length <= 2:
            raise ParameterError("total length must lie in (0, 2]")

    @classmethod
    def symmetric(cls, alpha: float) -> "SlitSet":
        """``K_alpha``; for ``alpha = 1`` this is the whole diameter."""
        if not 0 < alpha <= 1:
            raise ParameterError("alpha must lie in (0, 1]")
        if alpha >= 1.0:
            return cls(((-1.0, 1.0),))
        return cls(((-1.0, -1.0 + alpha), (1.0 - alpha, 1.0)))

    @property
    def total_length(self) -> float:
        return sum(b - a for a, b in self.intervals)

    @property
    def alpha(self) -> float:
        return 0.5 * self.total_length

    def contains(self, x: float) -> bool:
        return any(a <= x <= b for a, b in self.intervals)


@dataclass(frozen=True)
class HmResult:
    value: float
    method: str
    grid_n: int = 0
    residual: float = 0.0
    iterations: int = 0


def solynin_h(alpha: float) -> float:
    """Closed-form ``h(0, D, K_alpha)`` for ``alpha`` in ``(0, 1]``."""
    if not 0 < alpha <= 1:
        raise ParameterError(f"alpha must lie in (0, 1], got {alpha}")
    q = (1.0 - alpha) ** 2
    return 2.0 / math.pi * math.asin((1.0 - q) / (1.0 + q))


class MSolution(NamedTuple):
    M: float
    h_star: float
    lam: float


def solve_M(h_star: float | None = None) -> MSolution:
    """Solve ``h/2 + (1 - h) M = 1`` for ``M`` and return ``lambda = 1/(2M)``.

    By default ``h`` is the extremal harmonic measure at the sparse
    complement ``alpha = 1 - (3/4)^(1/3)``.
    """
    h = solynin_h(SPARSE_COMPLEMENT_ALPHA) if h_star is None else float(h_star)
    if not 0 <= h < 1:
        raise ParameterError("h_star must lie in [0, 1)")
    M = (1.0 - 0.5 * h) / (1.0 - h)
    return MSolution(M, h, 1.0 / (2.0 * M))


def hmmp_bound(m: float, M_big: float, h: float) -> float:
    """Maximum-principle bound ``m h + M (1 - h)``."""
    if not 0 <= h <= 1:
        raise ParameterError(f"harmonic measure must lie in [0, 1], got {h}")
    if m > M_big:
        raise ParameterError("need m <= M")
    return m * h + M_big * (1.0 - h)


def _disc_problem(K: SlitSet, grid_n: int, boundary: str):
    h = 2.0 / grid_n
    x = -1.0 + h * np.arange(grid_n + 1)
    X, Y = np.meshgrid(x, x, indexing="xy")
    inside = X**2 + Y**2 < 1.0 - 1e-12
    u = np.zeros(X.shape)
    fixed = ~inside
    mid = grid_n // 2
    if boundary not in ("staircase", "shortley_weller"):
        raise ParameterError(f"unknown boundary treatment {boundary!r}")
    pad = 0.5 * h if boundary == "staircase" else 0.0
    slit = np.zeros(x.shape, bool)
    for a, b in K.intervals:
        slit |= (x >= a - pad - 1e-12) & (x <= b + pad + 1e-12)
    fixed[mid, slit] = True
    u[mid, slit] = 1.0
    if boundary == "staircase":
        return u, fixed, np.ones((4,) + X.shape), mid
    coef = _shortley_weller(X, Y, inside, h, K, mid)
    return u, fixed, coef, mid


def _shortley_weller(X, Y, inside, h, K, mid):
    # fractional arm lengths to the circle for nodes whose neighbour lies outside
    with np.errstate(invalid="ignore"):
        xc = np.sqrt(np.maximum(1.0 - Y**2, 0.0))
        yc = np.sqrt(np.maximum(1.0 - X**2, 0.0))
    theta = np.ones((4,) + X.shape)
    out_w = np.zeros_like(inside)
    out_e = np.zeros_like(inside)
    out_s = np.zeros_like(inside)
    out_n = np.zeros_like(inside)
    out_w[:, 1:] = ~inside[:, :-1]
    out_e[:, :-1] = ~inside[:, 1:]
    out_s[1:, :] = ~inside[:-1, :]
    out_n[:-1, :] = ~inside[1:, :]
    floor = 1e-3
    theta[0] = np.where(out_w, np.maximum((X + xc) / h, floor), 1.0)
    theta[1] = np.where(out_e, np.maximum((xc - X) / h, floor), 1.0)
    theta[2] = np.where(out_s, np.maximum((Y + yc) / h, floor), 1.0)
    theta[3] = np.where(out_n, np.maximum((yc - Y) / h, floor), 1.0)
    # slit tips: free axis nodes next to a pinned node see the tip at its true position
    x = X[mid]
    for a, b in K.intervals:
        west_of = (x < a) & (x + h > a) & (a > -1.0)
        east_of = (x > b) & (x - h < b) & (b < 1.0)
        theta[1, mid] = np.where(west_of, np.maximum((a - x) / h, floor), theta[1, mid])
        theta[0, mid] = np.where(east_of, np.maximum((x - b) / h, floor), theta[0, mid])
    theta = np.minimum(theta, 1.0)
    coef = np.empty_like(theta)
    coef[0] = 1.0 / (theta[0] * (theta[0] + theta[1]))
    coef[1] = 1.0 / (theta[1] * (theta[0] + theta[1]))
    coef[2] = 1.0 / (theta[2] * (theta[2] + theta[3]))
    coef[3] = 1.0 / (theta[3] * (theta[2] + theta[3]))
    return coef


def _check_resolution(K: SlitSet, grid_n: int):
    if grid_n < 128 or grid_n % 2:
        raise ParameterError("grid_n must be an even number >= 128")
    h = 2.0 / grid_n
    for a, b in K.intervals:
        if b - a < 2 * h - 1e-12:
            raise ParameterError(f"interval [{a}, {b}] spans fewer than 2 grid cells")


def harmonic_measure_numeric(K: SlitSet, grid_n: int = 512, tol: float = 1e-8,
                             max_iter: int | None = None, method: str = "sor",
                             boundary: str = "shortley_weller") -> HmResult:
    """``h(0, D, K)`` from a 5-point Laplace solve on a Cartesian grid.

    Nodes outside the open disc are held at 0 and nodes on ``K`` at 1.
    With ``boundary="shortley_weller"`` the stencil next to the circle and
    next to slit tips uses the true distance to the boundary.
    ``"staircase"`` is the first-order variant: the first exterior node acts
    as the circle and every axis node within half a cell of ``K`` is pinned.
    ``method="sor"`` iterates red-black SOR until the largest update is
    below ``tol``; ``method="direct"`` solves the same linear system with a
    sparse factorisation.
    """
    if K.contains(0.0):
        return HmResult(1.0, CLOSED_FORM)
    _check_resolution(K, grid_n)
    u, fixed, coef, mid = _disc_problem(K, grid_n, boundary)
    if method == "direct":
        return _direct(u, fixed, coef, mid, grid_n)
    if method != "sor":
        raise ParameterError(f"unknown method {method!r}")
    omega = 2.0 / (1.0 + math.sin(math.pi / grid_n))
    cap = max_iter if max_iter is not None else 50 * grid_n
    du = math.inf
    for it in range(1, cap + 1):
        du = sor_sweep(u, fixed, coef, omega)
        if du < tol:
            return HmResult(float(u[mid, mid]), GRID_LAPLACE, grid_n, du, it)
    raise ConvergenceError(f"SOR did not converge in {cap} sweeps (last update {du:.3g})", du)


def _direct(u, fixed, coef, mid, grid_n) -> HmResult:
    free = ~fixed
    idx = -np.ones(u.shape, np.int64)
    idx[free] = np.arange(int(free.sum()))
    rhs = np.zeros(int(free.sum()))
    fi, fj = np.nonzero(free)
    me = idx[fi, fj]
    rows, cols, vals = [me], [me], [coef[:, fi, fj].sum(axis=0)]
    for d, (di, dj) in enumerate(((0, -1), (0, 1), (-1, 0), (1, 0))):
        ni, nj = fi + di, fj + dj
        c = coef[d, fi, fj]
        nb_free = free[ni, nj]
        rows.append(me[nb_free])
        cols.append(idx[ni[nb_free], nj[nb_free]])
        vals.append(-c[nb_free])
        np.add.at(rhs, me[~nb_free], c[~nb_free] * u[ni[~nb_free], nj[~nb_free]])
    A = scipy.sparse.csr_matrix(
        (np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))),
        shape=(len(rhs), len(rhs)),
    )
    sol = scipy.sparse.linalg.spsolve(A.tocsc(), rhs)
    res = float(np.abs(A @ sol - rhs).max())
    return HmResult(float(sol[idx[mid, mid]]), GRID_LAPLACE, grid_n, res, 1)


def random_slit_set(alpha: float, rng: np.random.Generator, grid_n: int = 512,
                    max_pieces: int = 4) -> SlitSet:
    """Random union of up to ``max_pieces`` intervals of total length ``2 alpha``.

    Pieces are at least two cells long and the origin is kept outside.
    """
    h = 2.0 / grid_n
    total = 2.0 * alpha
    for _ in range(1000):
        k = int(rng.integers(1, max_pieces + 1))
        lengths = rng.dirichlet(np.ones(k)) * total
        if np.any(lengths < 3 * h):
            continue
        gaps = rng.dirichlet(np.ones(k + 1)) * (2.0 - total)
        if np.any(gaps[1:-1] < 2 * h):
            continue
        order = rng.permutation(k)
        lengths = lengths[order]
        pos = -1.0 + gaps[0]
        ivs = []
        for i in range(k):
            ivs.append((pos, pos + lengths[i]))
            pos += lengths[i] + gaps[i + 1]
        K = SlitSet(tuple(ivs))
        if not K.contains(0.0) and all(abs(a) > h and abs(b) > h for a, b in K.intervals):
            return K
    raise ParameterError(f"could not draw a slit set with alpha={alpha}")


def harmonic_table(alphas, grid_n: int = 512, method: str = "sor",
                   boundary: str = "shortley_weller") -> list:
    """Rows ``(alpha, closed_form, numeric, abs_error)`` for symmetric slits."""
    rows = []
    for a in alphas:
        exact = solynin_h(a)
        num = harmonic_measure_numeric(SlitSet.symmetric(a), grid_n, method=method,
                                       boundary=boundary).value
        rows.append((float(a), exact, num, abs(num - exact)))
    return rows

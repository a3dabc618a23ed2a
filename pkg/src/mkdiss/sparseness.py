"""Vorticity super-level sets and their local sparseness.

A set ``S`` is 3D ``delta``-sparse around ``x0`` at scale ``r`` when it
fills at most a fraction ``delta`` of the ball ``B_r(x0)``, and 1D sparse
when some diameter of that ball is filled at most to fraction ``delta``.
Both densities are evaluated for every grid centre at once by periodic FFT
convolution with a ball (or weighted segment) stencil.

A cell belongs to ``B_r(x0)`` iff its centre lies within ``r`` of ``x0``
in the periodic metric.
"""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from typing import NamedTuple, Optional

import numpy as np
import scipy.fft

from .errors import ParameterError, ReportingError
from .grid import GridSpec, VectorField3D, fft_workers
from .oscillation import WeightSpec, phi_of_level

MODE_3D = "3D"
MODE_1D = "1D"

# (component, sign) labels in the order used by ``maximal_component``
COMPONENTS = tuple((i, s) for i in range(3) for s in (+1, -1))


@dataclass(frozen=True, eq=False)
class LevelSetMask:
    grid: GridSpec
    occupancy: np.ndarray
    lam: float
    threshold: float
    component_tag: str = "union"

    @property
    def volume(self) -> float:
        return float(np.count_nonzero(self.occupancy)) * self.grid.cell_volume

    @property
    def empty(self) -> bool:
        return not self.occupancy.any()


@dataclass(frozen=True, eq=False)
class SuperLevelSets:
    """The six signed-component masks of one field plus their union.

    ``maximal_component[x]`` indexes :data:`COMPONENTS` and names the
    signed component achieving the max-norm of ``omega`` at ``x``.
    """

    grid: GridSpec
    lam: float
    threshold: float
    masks: dict
    union: LevelSetMask
    maximal_component: np.ndarray
    zero_field: bool = False

    def __getitem__(self, key) -> LevelSetMask:
        return self.masks[key]


def _tag(i, s):
    return f"{'xyz'[i]}{'+' if s > 0 else '-'}"


def superlevel_mask(omega: VectorField3D, lam: float) -> SuperLevelSets:
    """Masks ``{omega_i^{+-} > lam * ||omega||_inf}`` for all six signed components.

    ``omega_i^+ = max(omega_i, 0)`` and ``omega_i^- = max(-omega_i, 0)``.
    A zero field yields empty masks with ``zero_field`` set.
    """
    if not 0 < lam < 1:
        raise ParameterError(f"lambda must lie in (0, 1), got {lam}")
    grid = omega.grid
    data = omega.data
    linf = float(np.abs(data).max())
    zero = linf == 0.0
    threshold = lam * linf
    masks = {}
    for i, s in COMPONENTS:
        comp = s * data[i]
        occ = np.zeros(comp.shape, bool) if zero else comp > threshold
        masks[(i, s)] = LevelSetMask(grid, occ, lam, threshold, _tag(i, s))
    union = np.logical_or.reduce([m.occupancy for m in masks.values()])
    signed = np.concatenate([data, -data])  # order x+,y+,z+,x-,y-,z-
    best = np.argmax(signed, axis=0)
    # reorder to COMPONENTS order (x+,x-,y+,y-,z+,z-)
    remap = np.array([0, 2, 4, 1, 3, 5])
    maximal = remap[best].astype(np.int8)
    return SuperLevelSets(grid, lam, threshold, masks,
                          LevelSetMask(grid, union, lam, threshold, "union"), maximal, zero)


# --- stencils and convolution ------------------------------------------------

def ball_offsets(grid: GridSpec, r: float) -> np.ndarray:
    """Integer offsets ``o`` with ``|o| h <= r`` (cell centres in the ball)."""
    m = int(math.floor(r / grid.spacing + 1e-9))
    rng = np.arange(-m, m + 1)
    o = np.array(list(itertools.product(rng, rng, rng)))
    rr = (r / grid.spacing) ** 2 + 1e-9
    return o[(o**2).sum(axis=1) <= rr]


def _stencil(grid: GridSpec, offsets: np.ndarray, weights=None) -> np.ndarray:
    n = grid.n
    k = np.zeros((n, n, n))
    idx = tuple((offsets % n).T)
    w = np.ones(len(offsets)) if weights is None else weights
    np.add.at(k, idx, w)
    return k


def _correlate(mask: np.ndarray, kernel: np.ndarray) -> np.ndarray:
    """``out[x] = sum_o kernel[o] * mask[x + o]`` on the periodic grid."""
    w = fft_workers()
    n = mask.shape
    fm = scipy.fft.rfftn(mask.astype(np.float64), workers=w)
    fk = scipy.fft.rfftn(kernel, workers=w)
    return scipy.fft.irfftn(fm * np.conj(fk), s=n, workers=w)


def _check_radius(grid: GridSpec, r: float) -> None:
    if not 0 < r <= grid.box_length / 4 + 1e-12:
        raise ParameterError(f"scale r={r} must lie in (0, box_length/4 = {grid.box_length / 4}]")


def ball_counts(occupancy: np.ndarray, grid: GridSpec, r: float) -> np.ndarray:
    """Number of occupied cells in ``B_r(x)`` for every grid centre ``x``."""
    _check_radius(grid, r)
    off = ball_offsets(grid, r)
    return np.rint(_correlate(occupancy, _stencil(grid, off))).astype(np.int64), len(off)


@dataclass
class SparsenessReport:
    delta: float
    scale: float
    mode: str
    worst_center: tuple
    worst_density: float
    densities: Optional[np.ndarray] = field(default=None, repr=False)

    @property
    def sparse(self) -> bool:
        return self.worst_density <= self.delta


def _report(densities, delta, r, mode, keep):
    flat = int(np.argmax(densities))
    center = np.unravel_index(flat, densities.shape)
    return SparsenessReport(delta, r, mode, tuple(int(c) for c in center),
                            float(densities.flat[flat]), densities if keep else None)


def _check_delta(delta):
    if not 0 < delta < 1:
        raise ParameterError(f"delta must lie in (0, 1), got {delta}")


def density_3d(mask, r: float) -> np.ndarray:
    """Occupied fraction of ``B_r(x)`` for every centre.

    ``mask`` is a :class:`LevelSetMask` or a :class:`SuperLevelSets`; for the
    latter the density around ``x`` is taken for the component that is
    maximal at ``x``.
    """
    if isinstance(mask, SuperLevelSets):
        out = np.zeros(mask.maximal_component.shape)
        for idx, key in enumerate(COMPONENTS):
            sel = mask.maximal_component == idx
            if not sel.any():
                continue
            counts, size = ball_counts(mask.masks[key].occupancy, mask.grid, r)
            out[sel] = counts[sel] / size
        return out
    counts, size = ball_counts(mask.occupancy, mask.grid, r)
    return counts / size


def sparse_3d(mask, r: float, delta: float, keep_densities: bool = False) -> SparsenessReport:
    """3D sparseness of ``mask`` at scale ``r`` around every grid centre."""
    _check_delta(delta)
    return _report(density_3d(mask, r), delta, r, MODE_3D, keep_densities)


def lattice_directions() -> np.ndarray:
    """The 13 lattice directions: 3 axes, 6 face and 4 body diagonals."""
    dirs = [(1, 0, 0), (0, 1, 0), (0, 0, 1),
            (1, 1, 0), (1, -1, 0), (1, 0, 1), (1, 0, -1), (0, 1, 1), (0, 1, -1),
            (1, 1, 1), (1, 1, -1), (1, -1, 1), (-1, 1, 1)]
    d = np.array(dirs, dtype=float)
    return d / np.linalg.norm(d, axis=1, keepdims=True)


def fibonacci_directions(count: int) -> np.ndarray:
    """``count`` roughly uniform directions on the upper half sphere."""
    i = np.arange(count) + 0.5
    z = i / count
    phi = math.pi * (3 - math.sqrt(5)) * i
    s = np.sqrt(1 - z * z)
    return np.stack([s * np.cos(phi), s * np.sin(phi), z], axis=1)


def segment_stencil(grid: GridSpec, r: float, direction) -> tuple:
    """Offsets and trapezoid weights sampling the segment ``x0 + t*nu, |t| <= r``.

    Sample points are spaced at most half a cell apart and looked up at the
    nearest cell centre.
    """
    nu = np.asarray(direction, float)
    nu = nu / np.linalg.norm(nu)
    m = max(2, int(math.ceil(4 * r / grid.spacing)))
    t = np.linspace(-r, r, m + 1)
    w = np.ones(m + 1)
    w[0] = w[-1] = 0.5
    pts = t[:, None] * nu[None, :] / grid.spacing
    off = np.rint(pts).astype(np.int64)
    return off, w / w.sum()


def density_1d(mask, r: float, directions=None) -> np.ndarray:
    """Minimum over ``directions`` of the occupied segment fraction, per centre."""
    grid = mask.grid
    _check_radius(grid, r)
    dirs = lattice_directions() if directions is None else np.atleast_2d(directions)
    if len(dirs) == 0:
        raise ParameterError("direction set must be nonempty")
    occupancies = (
        {k: mask.masks[k].occupancy for k in COMPONENTS}
        if isinstance(mask, SuperLevelSets) else {None: mask.occupancy}
    )
    best = {}
    for key, occ in occupancies.items():
        fm = scipy.fft.rfftn(occ.astype(np.float64), workers=fft_workers())
        cur = None
        for d in dirs:
            off, w = segment_stencil(grid, r, d)
            fk = scipy.fft.rfftn(_stencil(grid, off, w), workers=fft_workers())
            frac = scipy.fft.irfftn(fm * np.conj(fk), s=occ.shape, workers=fft_workers())
            cur = frac if cur is None else np.minimum(cur, frac)
        best[key] = np.clip(cur, 0.0, 1.0)
    if isinstance(mask, SuperLevelSets):
        out = np.zeros(mask.maximal_component.shape)
        for idx, key in enumerate(COMPONENTS):
            sel = mask.maximal_component == idx
            out[sel] = best[key][sel]
        return out
    return best[None]


def sparse_1d(mask, r: float, delta: float, directions=None,
              keep_densities: bool = False) -> SparsenessReport:
    """1D sparseness: some sampled direction has segment fraction ``<= delta``."""
    _check_delta(delta)
    d = density_1d(mask, r, directions)
    # FFT round-off must not push an exact fraction over delta
    d = np.round(d, 12)
    return _report(d, delta, r, MODE_1D, keep_densities)


# --- scale of sparseness -------------------------------------------------------

@dataclass
class ScaleSearch:
    """Result of :func:`sparseness_scale`.

    ``scale`` is ``None`` when the set is not sparse at any scanned scale.
    ``scanned`` lists every ``(r, worst_density)`` evaluated.
    """

    scale: Optional[float]
    delta: float
    mode: str
    scanned: list
    nonmonotone: bool = False

    @property
    def found(self) -> bool:
        return self.scale is not None


NOT_SPARSE = None


def _worst(mask, r, mode, directions):
    if mode == MODE_3D:
        return float(density_3d(mask, r).max())
    if mode == MODE_1D:
        return float(np.round(density_1d(mask, r, directions), 12).max())
    raise ParameterError(f"unknown mode {mode!r}")


def _discrete_radii(grid: GridSpec, lo: float, hi: float) -> list:
    """Radii in ``(lo, hi]`` at which the discrete ball gains cells."""
    h = grid.spacing
    q_lo = int(math.floor((lo / h) ** 2 + 1e-9))
    q_hi = int(math.floor((hi / h) ** 2 + 1e-9))
    sums = set()
    m = int(math.isqrt(q_hi)) + 1
    for i in range(m + 1):
        for j in range(i, m + 1):
            for k in range(j, m + 1):
                q = i * i + j * j + k * k
                if q_lo < q <= q_hi:
                    sums.add(q)
    return [math.sqrt(q) * h for q in sorted(sums)]


def sparseness_scale(mask, delta: float, mode: str = MODE_3D, directions=None,
                     min_scale: Optional[float] = None) -> ScaleSearch:
    """Smallest stable scale of ``delta``-sparseness.

    Scans ``r_j = 2**-j * L/4`` downwards to ``min_scale`` (default one cell),
    then refines between the last sparse and first non-sparse dyadic scale by
    bisection and finally over the discrete ball radii.  The returned scale
    is the smallest ``r`` such that every scanned ``r' >= r`` is sparse;
    sparse scales below a non-sparse one are recorded as non-monotone.
    """
    _check_delta(delta)
    grid = mask.grid
    target = mask.union if isinstance(mask, SuperLevelSets) else mask
    if target.empty:
        raise ParameterError("mask is empty; sparseness scale is undefined")
    h = grid.spacing
    rmin = h if min_scale is None else min_scale
    scanned = []

    def probe(r):
        d = _worst(mask, r, mode, directions)
        scanned.append((r, d))
        return d <= delta

    top = grid.box_length / 4
    dyadic = []
    r = top
    while r >= rmin - 1e-12:
        dyadic.append(r)
        r /= 2
    ok = [probe(r) for r in dyadic]
    if not ok[0]:
        return ScaleSearch(NOT_SPARSE, delta, mode, scanned, nonmonotone=any(ok))
    first_bad = next((j for j, v in enumerate(ok) if not v), None)
    if first_bad is None:
        return ScaleSearch(dyadic[-1], delta, mode, scanned)
    nonmono = any(ok[first_bad:])
    lo, hi = dyadic[first_bad], dyadic[first_bad - 1]
    while hi - lo > h:
        mid = 0.5 * (lo + hi)
        if probe(mid):
            hi = mid
        else:
            lo = mid
    # finest refinement: walk the discrete radii downwards from hi
    best = hi
    for r in reversed(_discrete_radii(grid, lo, hi)):
        if r >= hi:
            continue
        if probe(r):
            best = r
        else:
            break
    return ScaleSearch(best, delta, mode, scanned, nonmono)


# --- distribution function bounds -----------------------------------------------

class ChebyshevCheck(NamedTuple):
    lhs: float
    rhs: float
    holds: bool


def distribution_bound(omega: VectorField3D, level: float) -> ChebyshevCheck:
    """Chebyshev check ``|{|omega| > M}| <= ||omega||_1 / M``.

    ``|omega|`` is the pointwise max-norm.  ``holds`` is decided without
    rounding: the sign of ``sum |omega| - count * M`` is exact under ``fsum``.
    """
    if not level > 0:
        raise ParameterError("level M must be positive")
    mag = omega.max_norm().ravel()
    dv = omega.grid.cell_volume
    count = int(np.count_nonzero(mag > level))
    lhs = count * dv
    rhs = math.fsum(mag) * dv / level
    slack = math.fsum(np.concatenate([mag, np.full(count, -float(level))]))
    return ChebyshevCheck(lhs, rhs, slack >= 0)


@dataclass
class VolumeDecayRow:
    t: float
    volume: float
    rhs_bound: float
    omega_linf: float
    volume_x_linf: float
    phi: float
    log_compensated: float


def volume_decay_series(timeline, lam: float, k: int, weight: Optional[WeightSpec] = None,
                        convention: str = "reciprocal") -> list:
    """Super-level set volumes and their compensated products over a run.

    For each snapshot: ``|V_t| = |{|omega| > lam ||omega||_inf}|``,
    ``|V_t| * ||omega||_inf`` and ``|V_t| * ||omega||_inf / phi_k``.  The log
    weight is evaluated at ``1/||omega||_inf`` (``convention="reciprocal"``)
    or at ``||omega||_inf`` (``"direct"``); both depend only on
    ``|log ||omega||_inf|`` and therefore agree.
    """
    if not 0 < lam < 1:
        raise ParameterError(f"lambda must lie in (0, 1), got {lam}")
    missing = [i for i, s in enumerate(timeline) if s.load() is None]
    if missing:
        raise ReportingError(f"snapshots without stored fields: {missing}")
    w = weight if weight is not None else WeightSpec.log_composite(k)
    rows = []
    for snap in timeline:
        omega = snap.load()
        linf = float(omega.max_norm().max())
        if linf == 0:
            rows.append(VolumeDecayRow(snap.time, 0.0, 0.0, 0.0, 0.0, float("nan"), float("nan")))
            continue
        vol, rhs, _ = distribution_bound(omega, lam * linf)
        phi = phi_of_level(w, linf, convention)
        rows.append(VolumeDecayRow(snap.time, vol, rhs, linf, vol * linf, phi, vol * linf / phi))
    return rows

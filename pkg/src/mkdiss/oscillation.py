"""Mean oscillations, weighted local bmo norms and log-composite weights.

Cubes ``I(x, r)`` have side length ``r``.  On the grid a cube of side
``r`` covers ``m = round(r / h)`` cells per axis and is indexed by its low
corner; its geometric centre is half a cube from that corner.  All cube
statistics wrap periodically.

The log-composite weights are ``phi_k(r) = 1 / log^k(a + |log r|)`` with
``log^k`` the k-fold composition.  With the default offset
``a = e^^k - log 2`` (``e^^k`` the height-k tower of e's) every nested
logarithm stays above 1 on ``(0, 1/2]``, ``phi_k(1/2) = 1`` and
``phi_k`` decreases to zero as ``r -> 0``.  Offset zero reproduces the
bare formula on its (small) positivity domain.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional, Union

import numpy as np
from scipy import integrate

from ._kernels import cube_deviation
from .errors import DomainError, ParameterError, ScaleTooSmallError
from .grid import GridSpec, VectorField3D

LOG2 = math.log(2.0)


def tower(k: int) -> float:
    """``e^^k``: 1, e, e^e, e^e^e, ...; ``inf`` once it overflows."""
    t = 1.0
    for _ in range(k):
        if t > 709.0:
            return math.inf
        t = math.exp(t)
    return t


def nested_log_above_tower(k: int, d):
    """``log^k(e^^k + d)`` for ``d > -1``, accurate even when ``e^^k`` overflows.

    Uses ``log(e^^j + d_j) = e^^(j-1) + log1p(d_j / e^^j)``.
    """
    d = np.asarray(d, dtype=float)
    for j in range(k, 0, -1):
        t = tower(j)
        d = np.zeros_like(d) if math.isinf(t) else np.log1p(d / t)
    return 1.0 + d


# --- weights -----------------------------------------------------------------

POWER = "power"
LOG_COMPOSITE = "log_composite"
CONSTANT = "constant"


@dataclass(frozen=True)
class WeightSpec:
    """A scale weight ``phi`` on ``(0, r_max]``.

    ``offset=None`` selects the default regularising offset for
    log-composite weights; a float selects ``phi = 1/log^k(offset + |log r|)``.
    """

    kind: str
    alpha: Optional[float] = None
    k: Optional[int] = None
    offset: Optional[float] = None
    r_max: float = 0.5

    def __post_init__(self):
        if self.kind == POWER:
            if self.alpha is None or not 0 < self.alpha <= 1:
                raise ParameterError("power weight needs 0 < alpha <= 1")
        elif self.kind == LOG_COMPOSITE:
            if self.k is None or int(self.k) != self.k or self.k < 0:
                raise ParameterError("log-composite weight needs an integer k >= 0")
            if self.offset is not None and self.offset < 0:
                raise ParameterError("offset must be non-negative")
        elif self.kind != CONSTANT:
            raise ParameterError(f"unknown weight kind {self.kind!r}")
        if not self.r_max > 0:
            raise ParameterError("r_max must be positive")

    @classmethod
    def power(cls, alpha: float, r_max: float = 0.5) -> "WeightSpec":
        return cls(POWER, alpha=alpha, r_max=r_max)

    @classmethod
    def constant(cls, r_max: float = 0.5) -> "WeightSpec":
        return cls(CONSTANT, r_max=r_max)

    @classmethod
    def log_composite(cls, k: int, offset: Optional[float] = None, r_max: float = 0.5) -> "WeightSpec":
        """``phi_k``; ``r_max`` is tightened to the positivity domain."""
        if offset is not None and offset == 0 and k >= 1:
            # log^k(|log r|) > 0  <=>  |log r| > e^^(k-1)
            t = tower(k - 1)
            r_max = min(r_max, 0.0 if math.isinf(t) else math.exp(-t))
        return cls(LOG_COMPOSITE, k=int(k), offset=offset, r_max=r_max)

    def describe(self) -> str:
        if self.kind == POWER:
            return f"power(alpha={self.alpha})"
        if self.kind == CONSTANT:
            return "constant"
        off = "default" if self.offset is None else f"{self.offset}"
        return f"log_composite(k={self.k}, offset={off})"


def _phi_from_abslog(weight: WeightSpec, s):
    """Evaluate a log-composite weight given ``s = |log r|``."""
    s = np.asarray(s, dtype=float)
    k = weight.k
    if weight.offset is None:
        return 1.0 / nested_log_above_tower(k, s - LOG2)
    x = weight.offset + s
    for _ in range(k):
        if np.any(x <= 0):
            raise DomainError("nested logarithm of a non-positive value")
        x = np.log(x)
    if np.any(x <= 0):
        raise DomainError("log-composite weight is not positive here")
    return 1.0 / x


def phi_eval(weight: WeightSpec, r):
    """``phi(r)`` for ``0 < r <= r_max``; raises :class:`DomainError` outside."""
    r_arr = np.asarray(r, dtype=float)
    if np.any(r_arr <= 0) or np.any(r_arr > weight.r_max * (1 + 1e-12)):
        raise DomainError(f"r={r} outside the weight domain (0, r_max={weight.r_max:.6g}]")
    if weight.kind == POWER:
        out = r_arr**weight.alpha
    elif weight.kind == CONSTANT:
        out = np.ones_like(r_arr)
    else:
        out = _phi_from_abslog(weight, np.abs(np.log(r_arr)))
    return float(out) if np.ndim(out) == 0 else out


def phi_of_level(weight: WeightSpec, level: float, convention: str = "reciprocal") -> float:
    """Weight applied to a vorticity level.

    ``"reciprocal"`` evaluates at ``1/level``, ``"direct"`` at ``level``.
    Log-composite weights only see ``|log level|`` so the two agree for them.
    """
    if not level > 0:
        raise ParameterError("level must be positive")
    if convention not in ("reciprocal", "direct"):
        raise ParameterError(f"unknown convention {convention!r}")
    arg = 1.0 / level if convention == "reciprocal" else level
    if weight.kind == POWER:
        return arg**weight.alpha
    if weight.kind == CONSTANT:
        return 1.0
    return float(_phi_from_abslog(weight, abs(math.log(arg))))


# --- discontinuity criterion -------------------------------------------------

@dataclass
class DiscontinuityResult:
    admits_discontinuous: bool
    integral_estimate: dict
    numeric: Optional[bool]
    symbolic: Optional[bool]
    growth_exponent: Optional[float]


def _symbolic_divergence(weight: WeightSpec) -> Optional[bool]:
    # int_0 phi(r)/r dr with s = log(1/r): int^inf phi(e^-s) ds
    if weight.kind == POWER:
        return False  # e^{-alpha s} is integrable
    if weight.kind == CONSTANT:
        return True
    return True  # 1/log^k(a+s) decays no faster than 1/s


def discontinuity_criterion(weight: WeightSpec, r0_values=None,
                            threshold: float = 1.05) -> DiscontinuityResult:
    """Decide whether ``int_0^{1/2} phi(r)/r dr`` diverges.

    The integral is evaluated on ``[r0, min(1/2, r_max)]`` for
    ``r0 = 1e-2, 1e-4, ..., 1e-16`` in the variable ``s = log(1/r)``.  The
    tail integrand ``phi(e^-s)`` is fitted to ``s^-p`` from the last two
    segments; ``p <= threshold`` is classified as divergent.  Power weights
    with ``alpha * 32 <= threshold`` are below the resolution of this fit.
    """
    if r0_values is None:
        r0_values = [10.0 ** (-2 * j) for j in range(1, 9)]
    top = min(0.5, weight.r_max)
    s_lo = -math.log(top) if top > 0 else math.inf
    s_pts = sorted(-math.log(r0) for r0 in r0_values if -math.log(r0) > s_lo)

    def integrand(s):
        if weight.kind == POWER:
            return math.exp(-weight.alpha * s)
        if weight.kind == CONSTANT:
            return 1.0
        return float(_phi_from_abslog(weight, s))

    estimates = {}
    seg_avg = []
    total = 0.0
    prev = s_lo
    for s in s_pts:
        piece, _ = integrate.quad(integrand, prev, s, epsabs=0.0, epsrel=1e-12, limit=200)
        total += piece
        estimates[math.exp(-s)] = total
        seg_avg.append(((prev * s) ** 0.5, piece / (s - prev)))
        prev = s
    numeric = None
    p = None
    if len(seg_avg) >= 2:
        (s1, g1), (s2, g2) = seg_avg[-2], seg_avg[-1]
        if g1 > 0 and g2 > 0:
            p = -(math.log(g2) - math.log(g1)) / (math.log(s2) - math.log(s1))
            numeric = p <= threshold
        else:
            numeric = False
    symbolic = _symbolic_divergence(weight)
    verdict = symbolic if symbolic is not None else bool(numeric)
    return DiscontinuityResult(verdict, estimates, numeric, symbolic, p)


# --- Orlicz-type modular -----------------------------------------------------

def young_log_factor(k: int, s):
    """``g_k(s) = log^k(e^^k + s)``; equals 1 at ``s = 0`` and grows like ``log^k s``."""
    return nested_log_above_tower(k, s)


def orlicz_modular(omega: VectorField3D, k: int) -> float:
    """``sum |omega| g_k(|omega|) h^3`` with ``|omega|`` the pointwise max-norm."""
    if k < 1:
        raise ParameterError("order k must be >= 1")
    mag = omega.max_norm()
    return float(np.sum(mag * young_log_factor(k, mag))) * omega.grid.cell_volume


# --- direction field and oscillations ------------------------------------------

@dataclass(frozen=True, eq=False)
class DirectionField:
    grid: GridSpec
    xi: np.ndarray
    valid_mask: np.ndarray
    zero_field: bool = False


def direction_field(omega: VectorField3D, floor_fraction: float = 1e-3) -> DirectionField:
    """Unit vorticity direction where ``|omega| >= floor_fraction * ||omega||_inf``."""
    if not 0 < floor_fraction < 1:
        raise ParameterError("floor_fraction must lie in (0, 1)")
    mag = omega.magnitude()
    linf = float(omega.max_norm().max())
    if linf == 0:
        return DirectionField(omega.grid, np.zeros_like(omega.data),
                              np.zeros(mag.shape, bool), zero_field=True)
    valid = mag >= floor_fraction * linf
    safe = np.where(valid, mag, 1.0)
    xi = np.where(valid, omega.data / safe, 0.0)
    return DirectionField(omega.grid, xi, valid)


FieldLike = Union[np.ndarray, VectorField3D, DirectionField]


def _as_components(f: FieldLike, grid: Optional[GridSpec]):
    """Return (grid, values (C,n,n,n), valid mask, is_direction)."""
    if isinstance(f, DirectionField):
        return f.grid, f.xi, f.valid_mask, True
    if isinstance(f, VectorField3D):
        return f.grid, f.data, np.ones(f.data.shape[1:], bool), False
    arr = np.asarray(f, dtype=float)
    if grid is None:
        raise ParameterError("a GridSpec is required for bare arrays")
    if arr.ndim == 3:
        arr = arr[None]
    try:
        arr = np.broadcast_to(arr, arr.shape[:1] + (grid.n,) * 3)
    except ValueError:
        raise ParameterError("array does not match the grid") from None
    return grid, arr, np.ones(arr.shape[1:], bool), False


def cells_per_side(grid: GridSpec, r: float) -> int:
    m = int(round(r / grid.spacing))
    if m < 2:
        raise ScaleTooSmallError(f"cube side r={r} spans {m} cell(s); need at least 2")
    if m > grid.n:
        raise ParameterError(f"cube side r={r} exceeds the box")
    return m


def _box_sums(a: np.ndarray, m: int) -> np.ndarray:
    """Periodic sums over m^3 boxes indexed by low corner, via a summed-volume table."""
    n = a.shape[-1]
    pad = [(0, 0)] * (a.ndim - 3) + [(0, m)] * 3
    p = np.pad(a, pad, mode="wrap")
    S = np.zeros(p.shape[:-3] + tuple(s + 1 for s in p.shape[-3:]))
    S[..., 1:, 1:, 1:] = p.cumsum(-1).cumsum(-2).cumsum(-3)
    i = slice(0, n)
    j = slice(m, n + m)
    return (S[..., j, j, j] - S[..., i, j, j] - S[..., j, i, j] - S[..., j, j, i]
            + S[..., i, i, j] + S[..., i, j, i] + S[..., j, i, i] - S[..., i, i, i])


def oscillation_map(f: FieldLike, m: int, stride: int = 1, grid: Optional[GridSpec] = None,
                    min_valid_fraction: float = 0.9) -> np.ndarray:
    """Mean oscillation of every strided cube with ``m`` cells per side.

    Entry ``[i, j, k]`` belongs to the cube whose low corner is that cell;
    entries off the stride, and direction-field cubes with fewer than
    ``min_valid_fraction`` valid cells, are NaN.  Cube means and valid counts
    come from summed-volume tables; the absolute deviations are accumulated
    per cube.
    """
    grid, vals, valid, is_dir = _as_components(f, grid)
    if m < 2:
        raise ScaleTooSmallError("cubes need at least 2 cells per side")
    vals = np.ascontiguousarray(vals, dtype=np.float64)
    vmask = valid.astype(np.float64)
    counts = np.rint(_box_sums(vmask, m))
    sums = _box_sums(vals * vmask, m)
    means = np.ascontiguousarray(sums / np.maximum(counts, 1.0))
    min_count = math.ceil(min_valid_fraction * m**3) if is_dir else m**3
    out = np.full(valid.shape, np.nan)
    pad = ((0, m),) * 3
    cube_deviation(np.pad(vals, ((0, 0),) + pad, mode="wrap"), np.pad(valid, pad, mode="wrap"),
                   means, np.ascontiguousarray(counts), m, int(stride), float(min_count), out)
    return out


def mean_oscillation(f: FieldLike, center, r: float, grid: Optional[GridSpec] = None) -> float:
    """``Omega(f, I(center, r))`` for one cube; NaN if too few valid cells.

    ``center`` is a physical point; the cube is the ``m``-cell block whose
    centre is nearest to it.
    """
    grid, vals, valid, is_dir = _as_components(f, grid)
    m = cells_per_side(grid, r)
    h = grid.spacing
    n = grid.n
    corner = [int(math.floor((c + 0.5 * grid.box_length) / h - 0.5 * m + 0.5)) % n
              for c in center]
    idx = [np.arange(c, c + m) % n for c in corner]
    block = vals[:, idx[0]][:, :, idx[1]][:, :, :, idx[2]]
    vblock = valid[idx[0]][:, idx[1]][:, :, idx[2]]
    cnt = int(vblock.sum())
    if cnt == 0 or (is_dir and cnt < 0.9 * m**3):
        return math.nan
    mean = block[:, vblock].mean(axis=1)
    dev = np.sqrt(((block[:, vblock] - mean[:, None]) ** 2).sum(axis=0))
    return float(dev.mean())


@dataclass
class BmoReport:
    l1_part: float
    sup_part: float
    argmax_cube: Optional[tuple]
    per_scale: list = field(default_factory=list)
    skipped_cubes: int = 0
    weight: str = ""

    @property
    def total(self) -> float:
        return self.l1_part + self.sup_part

    def to_dict(self) -> dict:
        return {
            "weight": self.weight,
            "l1_part": self.l1_part,
            "sup_part": self.sup_part,
            "total": self.total,
            "argmax_cube": None if self.argmax_cube is None else list(self.argmax_cube),
            "skipped_cubes": self.skipped_cubes,
            "per_scale": [dict(zip(("r", "max_oscillation", "phi", "ratio"), row))
                          for row in self.per_scale],
        }


def bmo_phi_norm(f: FieldLike, weight: WeightSpec, scales, stride: int = 1,
                 grid: Optional[GridSpec] = None, center_region: str = "all") -> BmoReport:
    """``||f||_1 + sup_{x, r} Omega(f, I(x, r)) / phi(r)`` over the given scales.

    Scales outside ``(0, r_max]`` or thinner than two cells are dropped;
    if none remain a :class:`DomainError` naming ``r_max`` is raised.
    ``center_region="valid"`` restricts direction-field cubes to those whose
    centre cell is valid.
    """
    if center_region not in ("all", "valid"):
        raise ParameterError(f"unknown center_region {center_region!r}")
    grid, vals, valid, is_dir = _as_components(f, grid)
    h = grid.spacing
    admissible = []
    for r in sorted(set(float(r) for r in scales), reverse=True):
        if not 0 < r <= weight.r_max * (1 + 1e-12):
            continue
        m = int(round(r / h))
        if 2 <= m <= grid.n:
            admissible.append((r, m))
    if not admissible:
        raise DomainError(
            f"no admissible scales: need 2h={2 * h:.4g} <= r <= r_max={weight.r_max:.4g}"
        )
    norms = np.sqrt((vals**2).sum(axis=0))
    l1 = float(np.sum(norms * valid)) * grid.cell_volume
    sup = 0.0
    arg = None
    rows = []
    skipped = 0
    src = DirectionField(grid, vals, valid) if is_dir else VectorField3D(grid, vals) if vals.shape[0] == 3 else vals[0]
    for r, m in admissible:
        osc = oscillation_map(src, m, stride, grid=grid)
        on_stride = np.zeros(osc.shape, bool)
        on_stride[::stride, ::stride, ::stride] = True
        if center_region == "valid":
            shifted = np.roll(valid, shift=(-(m // 2),) * 3, axis=(0, 1, 2))
            on_stride &= shifted
        sel = np.where(on_stride, osc, np.nan)
        skipped += int(np.count_nonzero(on_stride & np.isnan(osc)))
        phi = phi_eval(weight, r)
        if np.all(np.isnan(sel)):
            rows.append((r, math.nan, phi, math.nan))
            continue
        flat = int(np.nanargmax(sel))
        best = float(sel.flat[flat])
        ratio = best / phi
        rows.append((r, best, phi, ratio))
        if ratio > sup:
            sup = ratio
            corner = np.unravel_index(flat, sel.shape)
            centre = tuple(float(-0.5 * grid.box_length + (c + 0.5 * m) * h) for c in corner)
            arg = centre + (r,)
    return BmoReport(l1, sup, arg, rows, skipped, weight.describe())

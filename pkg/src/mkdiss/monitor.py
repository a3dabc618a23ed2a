"""Criticality layer: scale formulas, escape times and the r_s versus rho_s verdict.

The two competing length scales along a run are

* the scale of sparseness ``r_s`` of the vorticity super-level sets at
  ``lambda ||omega||_inf`` (measured on the fields), and
* the analyticity radius ``rho = nu^(1/2) / (c ||omega||_inf^(1/2))``.

Regularity follows if ``r_s <= rho_s`` at escape times approaching a
putative singular time.  The model prediction for the sparseness scale is
``r_s = c4 (phi_k(||omega||_inf) / ||omega||_inf)^(1/2)``; with ``k = 0``
there is no logarithmic gain and the ratio to ``rho`` is constant in time.
"""
from __future__ import annotations

import csv
import json
import math
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np

from .errors import DomainError, ParameterError, ReportingError
from .harmonic import solve_M
from .oscillation import WeightSpec, phi_of_level
from .sparseness import MODE_3D, sparseness_scale, superlevel_mask

SUBCRITICAL = "subcritical"
CRITICAL = "critical"
SUPERCRITICAL = "supercritical"
INCONCLUSIVE = "inconclusive"

FOUR_PI = 4.0 * math.pi


@dataclass(frozen=True)
class FrameworkConstants:
    c_star: float = 1.0
    c1_of_M: float = 1.0
    c2_of_M: float = 1.0
    c3: float = 1.0
    c4: float = 1.0

    def __post_init__(self):
        for name, value in asdict(self).items():
            if not (value > 0 and math.isfinite(value)):
                raise ParameterError(f"constant {name} must be positive, got {value}")


def _positive(**kw):
    for name, v in kw.items():
        if not v > 0:
            raise ParameterError(f"{name} must be positive, got {v}")


# --- formula layer ---------------------------------------------------------------

def core_scale(Gamma: float, omega_linf: float) -> float:
    """Core size ``delta = (Gamma / 4 pi)^(1/2) ||omega||_inf^(-1/2)``."""
    _positive(Gamma=Gamma, omega_linf=omega_linf)
    return math.sqrt(Gamma / FOUR_PI / omega_linf)


def amplification(delta0: float, delta_t: float) -> float:
    """Vorticity amplification ``delta0^2 / delta_t^2`` under core compression."""
    _positive(delta0=delta0, delta_t=delta_t)
    return (delta0 / delta_t) ** 2


def axial_vorticity(Gamma: float, delta0: float) -> float:
    """Initial axial vorticity ``Gamma / (4 pi delta0^2)``."""
    _positive(Gamma=Gamma, delta0=delta0)
    return Gamma / (FOUR_PI * delta0**2)


def analyticity_radius(omega_linf: float, nu: float,
                       constants: FrameworkConstants = FrameworkConstants(),
                       mode: str = "c_star") -> float:
    """``nu^(1/2) / (c ||omega||_inf^(1/2))`` with ``c = c_star`` or ``c3``."""
    _positive(omega_linf=omega_linf, nu=nu)
    if mode == "c_star":
        c = constants.c_star
    elif mode == "c3":
        c = constants.c3
    else:
        raise ParameterError(f"unknown mode {mode!r}")
    return math.sqrt(nu / omega_linf) / c


@dataclass(frozen=True)
class LocalExistence:
    T: float
    c2_of_M: float

    def radius_at(self, t: float) -> float:
        """Guaranteed analyticity width ``t^(1/2) / c2`` for ``0 < t <= T``."""
        if not 0 < t <= self.T:
            raise DomainError(f"t={t} outside (0, T={self.T:.6g}]")
        return math.sqrt(t) / self.c2_of_M


def local_existence(omega0_linf: float, nu: float,
                    constants: FrameworkConstants = FrameworkConstants()) -> LocalExistence:
    """Existence time ``nu / (c1 ||omega_0||_inf)`` and the analyticity width.

    The width at ``T`` is ``nu^(1/2) / (c2 c1^(1/2) ||omega_0||^(1/2))``, i.e.
    :func:`analyticity_radius` with ``c_star = c2 c1^(1/2)`` (``= c2^2`` when
    ``c1 = c2^2``).
    """
    _positive(omega0_linf=omega0_linf, nu=nu)
    return LocalExistence(nu / (constants.c1_of_M * omega0_linf), constants.c2_of_M)


def reynolds_threshold(Gamma: float, nu: float,
                       constants: FrameworkConstants = FrameworkConstants()) -> dict:
    """Whether ``Gamma / nu <= 4 pi / c_star^2`` (inclusive)."""
    _positive(Gamma=Gamma, nu=nu)
    ratio = Gamma / nu
    bound = FOUR_PI / constants.c_star**2
    return {"satisfied": bool(ratio <= bound), "ratio": ratio, "bound": bound}


def predicted_sparseness_scale(omega_linf: float, k: int = 0,
                               constants: FrameworkConstants = FrameworkConstants(),
                               convention: str = "reciprocal") -> float:
    """``c4 (phi_k(||omega||_inf) / ||omega||_inf)^(1/2)``; ``k = 0`` drops the log factor."""
    _positive(omega_linf=omega_linf)
    if k == 0:
        phi = 1.0
    else:
        phi = phi_of_level(WeightSpec.log_composite(k), omega_linf, convention)
    return constants.c4 * math.sqrt(phi / omega_linf)


def formula_layer_check(Gamma: float, nu: float, omega_linf_values,
                        constants: FrameworkConstants = FrameworkConstants()) -> dict:
    """Compare the core scale with the analyticity radius on the formula layer.

    Both scale like ``||omega||_inf^(-1/2)``, so ``delta / rho`` is the same at
    every level and ``rho >= delta`` reduces to ``Gamma / nu <= 4 pi / c_star^2``.
    The decision is taken on that reduced form; the per-level ratios are
    returned so the time independence can be inspected.
    """
    levels = [float(w) for w in omega_linf_values]
    if not levels:
        raise ParameterError("need at least one level")
    ratios = [core_scale(Gamma, w) / analyticity_radius(w, nu, constants) for w in levels]
    spread = (max(ratios) - min(ratios)) / max(ratios)
    squared = (Gamma / nu) * constants.c_star**2 / FOUR_PI
    subcritical = bool(Gamma / nu <= FOUR_PI / constants.c_star**2)
    thr = reynolds_threshold(Gamma, nu, constants)
    return {
        "delta_over_rho": ratios[0],
        "delta_over_rho_squared": squared,
        "ratio_spread": spread,
        "subcritical": subcritical,
        "matches_reynolds_threshold": subcritical == thr["satisfied"],
        "reynolds": thr,
    }


# --- escape times ------------------------------------------------------------------

def detect_escape_times(times, linf) -> list:
    """Indices ``j`` with ``linf[s] > linf[j]`` for every later sample ``s``.

    The last sample has no future and is never an escape time.
    """
    t = np.asarray(times, dtype=float)
    w = np.asarray(linf, dtype=float)
    if t.ndim != 1 or t.shape != w.shape or t.size == 0:
        raise ParameterError("need matching nonempty 1D series")
    if np.any(np.diff(t) <= 0):
        raise ParameterError("times must be strictly increasing")
    # suffix minimum over strictly later samples
    later_min = np.minimum.accumulate(w[::-1])[::-1]
    nxt = np.full(w.shape, -np.inf)
    nxt[:-1] = later_min[1:]
    return [int(j) for j in np.nonzero(nxt > w)[0] if j < w.size - 1]


# --- verdict -----------------------------------------------------------------------

ROW_COLUMNS = ("t", "omega_linf", "omega_l1", "escape", "r_s_measured", "rho_s",
               "r_s_predicted_reciprocal", "r_s_predicted_direct", "measured_over_rho",
               "predicted_over_rho", "nonmonotone")


@dataclass
class CriticalityTimeline:
    rows: list
    verdict: str
    reason: str
    parameters: dict
    formula_layer: dict = field(default_factory=dict)

    def column(self, name: str) -> np.ndarray:
        return np.array([np.nan if r[name] is None else r[name] for r in self.rows], dtype=float)

    def escape_rows(self) -> list:
        return [r for r in self.rows if r["escape"]]

    def to_dict(self) -> dict:
        series = {c: [r[c] for r in self.rows] for c in ROW_COLUMNS}
        return {"verdict": self.verdict, "reason": self.reason,
                "parameters": self.parameters, "formula_layer": self.formula_layer,
                "series": series}

    def write(self, directory) -> dict:
        """Write ``criticality.csv`` and ``verdict.json``; return their paths."""
        d = Path(directory)
        try:
            d.mkdir(parents=True, exist_ok=True)
            csv_path = d / "criticality.csv"
            with open(csv_path, "w", newline="") as fh:
                w = csv.writer(fh)
                for key, val in self.parameters.items():
                    fh.write(f"# {key} = {json.dumps(val)}\n")
                w.writerow(ROW_COLUMNS)
                for r in self.rows:
                    w.writerow(["" if r[c] is None else r[c] for c in ROW_COLUMNS])
            json_path = d / "verdict.json"
            json_path.write_text(json.dumps(self.to_dict(), indent=2, default=_json_default))
        except OSError as exc:
            raise ReportingError(f"cannot write criticality report: {exc}") from exc
        return {"csv": csv_path, "json": json_path}


def _json_default(o):
    if isinstance(o, (np.floating, np.integer)):
        return o.item()
    if isinstance(o, np.bool_):
        return bool(o)
    raise TypeError(f"cannot serialise {type(o)}")


def _classify(pairs) -> tuple:
    """Verdict from (measured r_s, rho_s) pairs at escape times."""
    if all(rs <= rho for rs, rho in pairs):
        return SUBCRITICAL, "measured r_s <= rho_s at every escape time"
    if all(0.5 * rho <= rs <= 2.0 * rho for rs, rho in pairs):
        return CRITICAL, "measured r_s within a factor 2 of rho_s at every escape time"
    return SUPERCRITICAL, "measured r_s exceeds rho_s by more than a factor 2 at some escape time"


def criticality_verdict(timeline, Gamma: float, nu: float,
                        constants: FrameworkConstants = FrameworkConstants(), k: int = 0,
                        delta: float = 0.75, lam: Optional[float] = None,
                        window: Optional[tuple] = None, mode: str = MODE_3D,
                        measure_all: bool = True) -> CriticalityTimeline:
    """Assemble the criticality timeline of a run and classify it.

    ``lam`` defaults to ``1/(2M)``.  The measured ``r_s`` is the scale of
    ``delta``-sparseness of the component super-level sets (pointwise
    maximal component) at ``lam ||omega||_inf``; ``rho_s`` uses ``c3``.
    Only escape times inside ``window`` (default: the whole run) enter the
    verdict.  ``measure_all=False`` skips the sparseness search at
    non-escape snapshots.
    """
    _positive(Gamma=Gamma, nu=nu)
    if lam is None:
        lam = solve_M().lam
    if not 0 < lam < 1:
        raise ParameterError("lambda must lie in (0, 1)")
    snaps = list(timeline)
    if not snaps:
        raise ParameterError("timeline is empty")
    times = np.array([s.time for s in snaps])
    linf = np.array([s.diagnostics["omega_linf"] for s in snaps])
    escapes = set(detect_escape_times(times, linf))
    lo, hi = window if window is not None else (-math.inf, math.inf)
    rows = []
    for j, snap in enumerate(snaps):
        w = float(linf[j])
        is_escape = j in escapes and lo <= snap.time <= hi
        rho = analyticity_radius(w, nu, constants, mode="c3") if w > 0 else None
        pred_r = predicted_sparseness_scale(w, k, constants, "reciprocal") if w > 0 else None
        pred_d = predicted_sparseness_scale(w, k, constants, "direct") if w > 0 else None
        rs = None
        nonmono = None
        if (measure_all or is_escape) and w > 0:
            omega = snap.load()
            if omega is None:
                raise ReportingError(f"snapshot at t={snap.time} has no stored field")
            search = sparseness_scale(superlevel_mask(omega, lam), delta, mode)
            rs = math.inf if search.scale is None else float(search.scale)
            nonmono = bool(search.nonmonotone)
        rows.append({
            "t": float(snap.time),
            "omega_linf": w,
            "omega_l1": float(snap.diagnostics["omega_l1"]),
            "escape": bool(is_escape),
            "r_s_measured": rs,
            "rho_s": rho,
            "r_s_predicted_reciprocal": pred_r,
            "r_s_predicted_direct": pred_d,
            "measured_over_rho": None if rs is None or rho is None else rs / rho,
            "predicted_over_rho": None if pred_r is None or rho is None else pred_r / rho,
            "nonmonotone": nonmono,
        })
    params = {
        "Gamma": Gamma, "nu": nu, "lambda": lam, "delta": delta, "k": k, "mode": mode,
        "window": None if window is None else list(window),
        "constants": asdict(constants),
    }
    formula = formula_layer_check(Gamma, nu, [w for w in linf if w > 0] or [1.0], constants)
    esc = [r for r in rows if r["escape"]]
    if not esc:
        return CriticalityTimeline(rows, INCONCLUSIVE,
                                   "no escape times in the growth window", params, formula)
    verdict, reason = _classify([(r["r_s_measured"], r["rho_s"]) for r in esc])
    return CriticalityTimeline(rows, verdict, reason, params, formula)


# --- tetration -----------------------------------------------------------------------

@dataclass(frozen=True)
class TetrationResult:
    """``exp^k(top)`` stored as ``exp^remaining(residual)``.

    ``levels`` exponentials were applied before the next one would overflow;
    ``value`` is the float when everything fits and ``inf`` otherwise.
    """

    height: int
    top: float
    levels: int
    residual: float

    @property
    def remaining(self) -> int:
        return self.height - self.levels

    @property
    def value(self) -> float:
        return self.residual if self.remaining == 0 else math.inf

    @property
    def log_value(self) -> float:
        """Natural log of the value when that still fits in a float."""
        if self.remaining == 0:
            return math.log(self.residual)
        if self.remaining == 1:
            return self.residual
        return math.inf


def tetration_crossover(k: int, base_re: float) -> TetrationResult:
    """Height-``k`` tower of ``e`` with ``base_re`` on top, without overflow."""
    if int(k) != k or k < 1:
        raise ParameterError("k must be an integer >= 1")
    _positive(base_re=base_re)
    x = float(base_re)
    levels = 0
    while levels < k:
        if x > 709.782712893384:
            break
        x = math.exp(x)
        levels += 1
    return TetrationResult(int(k), float(base_re), levels, x)

"""Pseudo-spectral Navier-Stokes integrator in vorticity form.

The evolved equation is ``d(omega)/dt = curl(u x omega) + nu * Laplacian(omega)``
with ``u`` recovered by Biot-Savart inversion.  Time stepping is classical
RK4; the viscous term is either absorbed in an integrating factor (default)
or treated explicitly.  Quadratic products are dealiased with the 2/3 rule.
"""
from __future__ import annotations

import csv
import json
import logging
import math
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np

from . import fieldio
from .errors import ConfigurationError, InstabilityError, ParameterError
from .grid import (
    GridSpec,
    VectorField3D,
    biot_savart_hat,
    curl_hat,
    div_hat,
    field_norms,
    forward,
    from_spectral,
    inverse,
    kinetic_energy,
    velocity_from_vorticity,
)

log = logging.getLogger(__name__)

INTEGRATING_FACTOR = "integrating_factor"
EXPLICIT = "explicit"


@dataclass(frozen=True, eq=False)
class SimState:
    time: float
    omega_hat: np.ndarray
    grid: GridSpec
    viscosity: float

    @classmethod
    def from_field(cls, omega: VectorField3D, viscosity: float, time: float = 0.0) -> "SimState":
        if viscosity < 0:
            raise ParameterError("viscosity must be non-negative")
        return cls(time, forward(omega.data), omega.grid, float(viscosity))

    def field(self) -> VectorField3D:
        return from_spectral(self.grid, self.omega_hat)

    def velocity(self) -> VectorField3D:
        return from_spectral(self.grid, biot_savart_hat(self.grid, self.omega_hat))

    def max_divergence(self) -> float:
        return float(np.abs(inverse(div_hat(self.grid, self.omega_hat), self.grid.n)).max())


def _nonlinear(grid: GridSpec, omega_hat: np.ndarray, dealias: bool) -> np.ndarray:
    """Spectral coefficients of curl(u x omega)."""
    if dealias:
        omega_hat = omega_hat * grid.dealias_mask
    n = grid.n
    u = inverse(biot_savart_hat(grid, omega_hat), n)
    w = inverse(omega_hat, n)
    # overflow here surfaces as InstabilityError at the end of the step
    with np.errstate(over="ignore", invalid="ignore"):
        cross = np.stack([
            u[1] * w[2] - u[2] * w[1],
            u[2] * w[0] - u[0] * w[2],
            u[0] * w[1] - u[1] * w[0],
        ])
    out = curl_hat(grid, forward(cross))
    if dealias:
        out *= grid.dealias_mask
    return out


def step(state: SimState, dt: float, *, dealias: bool = True,
         viscous: str = INTEGRATING_FACTOR) -> SimState:
    """Advance ``state`` by one RK4 step of size ``dt`` (negative allowed).

    Raises :class:`InstabilityError` if the result is not finite.
    """
    g = state.grid
    w = state.omega_hat
    nu = state.viscosity
    N = lambda a: _nonlinear(g, a, dealias)  # noqa: E731
    if viscous == INTEGRATING_FACTOR:
        e_half = np.exp(-nu * g.k_squared * (0.5 * dt))
        e_full = e_half * e_half
        k1 = N(w)
        k2 = N(e_half * (w + 0.5 * dt * k1))
        k3 = N(e_half * w + 0.5 * dt * k2)
        k4 = N(e_full * w + dt * e_half * k3)
        new = e_full * w + (dt / 6.0) * (e_full * k1 + 2.0 * e_half * (k2 + k3) + k4)
    elif viscous == EXPLICIT:
        lap = -nu * g.k_squared
        F = lambda a: N(a) + lap * a  # noqa: E731
        k1 = F(w)
        k2 = F(w + 0.5 * dt * k1)
        k3 = F(w + 0.5 * dt * k2)
        k4 = F(w + dt * k3)
        new = w + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
    else:
        raise ParameterError(f"unknown viscous scheme {viscous!r}")
    if not np.all(np.isfinite(new)):
        raise InstabilityError(
            f"non-finite vorticity after step of size dt={dt:.6g} at t={state.time:.6g}",
            dt=dt, time=state.time,
        )
    return SimState(state.time + dt, new, g, nu)


def cfl_dt(state: SimState, cfl: float = 0.5, dt_max: float = math.inf,
           viscous: str = INTEGRATING_FACTOR, eps: float = 1e-12) -> float:
    """Largest stable step: ``cfl * h / max|u|`` capped by ``dt_max``.

    With the explicit viscous scheme the diffusive limit ``h^2 / (6 nu)``
    also applies.
    """
    h = state.grid.spacing
    umax = float(np.abs(state.velocity().data).max())
    dt = dt_max
    if umax > eps:
        dt = min(dt, cfl * h / umax)
    if viscous == EXPLICIT and state.viscosity > 0:
        dt = min(dt, h * h / (6.0 * state.viscosity))
    return dt


def enstrophy_budget(state: SimState):
    """Return ``(production, dissipation)`` with ``dZ/dt = production - dissipation``.

    ``Z = 1/2 sum |omega|^2 h^3``; production is ``sum omega.S.omega h^3`` and
    dissipation ``nu * sum |grad omega|^2 h^3``.
    """
    g = state.grid
    n = g.n
    dv = g.cell_volume
    k = g.derivative_wavevector
    w_hat = state.omega_hat
    u_hat = biot_savart_hat(g, w_hat)
    w = inverse(w_hat, n)
    production = 0.0
    dissipation = 0.0
    for i in range(3):
        for j in range(3):
            # d_i u_j and d_i w_j
            du = inverse(1j * k[i] * u_hat[j], n)
            production += float(np.sum(w[i] * w[j] * du))
            dw = inverse(1j * k[i] * w_hat[j], n)
            dissipation += float(np.sum(dw * dw))
    return production * dv, state.viscosity * dissipation * dv


# --- runs -------------------------------------------------------------------

@dataclass
class RunConfig:
    n: int = 64
    box_length: float = 2 * math.pi
    nu: float = 0.01
    t_final: float = 1.0
    snapshot_interval: float = 0.1
    cfl: float = 0.5
    dealias: bool = True
    store_fields: bool = True
    output_dir: Optional[str] = None
    dt_max: Optional[float] = None
    viscous: str = INTEGRATING_FACTOR

    def __post_init__(self):
        if self.t_final < 0:
            raise ConfigurationError("t_final must be non-negative")
        if not self.snapshot_interval > 0:
            raise ConfigurationError("snapshot_interval must be positive")
        if not self.cfl > 0:
            raise ConfigurationError("cfl must be positive")
        if self.nu < 0:
            raise ConfigurationError("nu must be non-negative")
        if self.viscous not in (INTEGRATING_FACTOR, EXPLICIT):
            raise ConfigurationError(f"unknown viscous scheme {self.viscous!r}")


DIAGNOSTIC_COLUMNS = ("t", "energy", "enstrophy", "helicity", "omega_linf", "omega_l1")


def diagnostics(omega: VectorField3D) -> dict:
    norms = field_norms(omega)
    return {
        "energy": kinetic_energy(velocity_from_vorticity(omega)),
        "enstrophy": norms.enstrophy,
        "helicity": norms.helicity,
        "omega_linf": norms.linf,
        "omega_l1": norms.l1,
    }


@dataclass
class Snapshot:
    time: float
    omega: Optional[VectorField3D] = None
    path: Optional[str] = None
    diagnostics: dict = field(default_factory=dict)
    digest: Optional[str] = None

    def load(self) -> Optional[VectorField3D]:
        if self.omega is None and self.path is not None and Path(self.path).exists():
            self.omega = fieldio.read_field(self.path)
        return self.omega


@dataclass
class Timeline:
    snapshots: list = field(default_factory=list)
    config: dict = field(default_factory=dict)

    def append(self, snap: Snapshot) -> None:
        if self.snapshots and not snap.time > self.snapshots[-1].time:
            raise ParameterError("snapshot times must be strictly increasing")
        self.snapshots.append(snap)

    def __len__(self):
        return len(self.snapshots)

    def __iter__(self):
        return iter(self.snapshots)

    def __getitem__(self, i):
        return self.snapshots[i]

    @property
    def times(self) -> np.ndarray:
        return np.array([s.time for s in self.snapshots])

    def series(self, name: str) -> np.ndarray:
        return np.array([s.diagnostics[name] for s in self.snapshots])

    def write_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(DIAGNOSTIC_COLUMNS)
            for s in self.snapshots:
                w.writerow([repr(s.time)] + [repr(float(s.diagnostics[c])) for c in DIAGNOSTIC_COLUMNS[1:]])

    def save(self, directory) -> Path:
        """Write ``diagnostics.csv`` and the ``timeline.json`` index."""
        directory = Path(directory)
        directory.mkdir(parents=True, exist_ok=True)
        self.write_csv(directory / "diagnostics.csv")
        index = {
            "config": self.config,
            "snapshots": [
                {
                    "t": s.time,
                    "file": None if s.path is None else Path(s.path).name,
                    "sha256": s.digest,
                    "diagnostics": s.diagnostics,
                }
                for s in self.snapshots
            ],
        }
        path = directory / "timeline.json"
        path.write_text(json.dumps(index, indent=2))
        return path

    @classmethod
    def load(cls, directory) -> "Timeline":
        directory = Path(directory)
        index = json.loads((directory / "timeline.json").read_text())
        tl = cls(config=index.get("config", {}))
        for entry in index["snapshots"]:
            path = None if entry["file"] is None else str(directory / entry["file"])
            tl.append(Snapshot(entry["t"], None, path, entry["diagnostics"], entry.get("sha256")))
        return tl


def _record(timeline: Timeline, state: SimState, cfg: RunConfig, index: int) -> None:
    omega = state.field()
    snap = Snapshot(state.time, omega, diagnostics=diagnostics(omega))
    if cfg.store_fields and cfg.output_dir is not None:
        out = Path(cfg.output_dir)
        out.mkdir(parents=True, exist_ok=True)
        path = out / f"omega_{index:05d}.slf"
        snap.digest = fieldio.write_field(path, omega)
        snap.path = str(path)
    timeline.append(snap)


def evolve(initial: VectorField3D, cfg: RunConfig, t0: float = 0.0,
           index0: int = 0) -> Timeline:
    """Integrate from ``t0`` to ``cfg.t_final`` recording snapshots.

    Snapshots are taken at ``t0 + j * snapshot_interval`` and at the final
    time.  On instability the raised :class:`InstabilityError` carries the
    timeline recorded so far.
    """
    g = initial.grid
    if g.n != cfg.n or abs(g.box_length - cfg.box_length) > 1e-12 * cfg.box_length:
        raise ConfigurationError("initial field grid does not match run config")
    state = SimState.from_field(initial, cfg.nu, t0)
    scale = max(float(np.abs(initial.data).max()), 1e-300) / g.spacing
    if state.max_divergence() > 1e-8 * scale:
        raise ParameterError("initial vorticity is not divergence-free")

    cfg_dict = asdict(cfg)
    timeline = Timeline(config=cfg_dict)
    dt_max = cfg.dt_max if cfg.dt_max is not None else cfg.snapshot_interval
    _record(timeline, state, cfg, index0)
    index = index0
    tol = 1e-10 * max(1.0, abs(cfg.t_final))
    snap_no = 1
    while state.time < cfg.t_final - tol:
        target = min(t0 + snap_no * cfg.snapshot_interval, cfg.t_final)
        while state.time < target - tol:
            dt = cfl_dt(state, cfg.cfl, dt_max, cfg.viscous)
            dt = min(dt, target - state.time)
            try:
                state = step(state, dt, dealias=cfg.dealias, viscous=cfg.viscous)
            except InstabilityError as exc:
                exc.timeline = timeline
                raise
        state = SimState(target, state.omega_hat, g, state.viscosity)
        index += 1
        _record(timeline, state, cfg, index)
        log.info("t=%.4f omega_linf=%.6g", state.time, timeline[-1].diagnostics["omega_linf"])
        snap_no += 1
    return timeline

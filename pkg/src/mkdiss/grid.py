"""Periodic-box fields, spectral transforms and the two-ring initial data.

Grid points sit at cell centres ``x_j = -L/2 + (j + 1/2) h`` so the box is
``[-L/2, L/2)^3`` and no grid point lies on the coordinate planes through the
origin.  Vector data is stored with shape ``(3, n, n, n)`` and indexed as
``data[component, ix, iy, iz]``.

Spectral arrays use the real-FFT layout of :func:`scipy.fft.rfftn` over the
last three axes, so the ``z`` wavenumber axis has ``n // 2 + 1`` entries.
Odd derivatives drop the Nyquist modes, which keeps ``curl``/``div`` exact
adjoints on the retained modes.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np
import scipy.fft

from .errors import ConfigurationError, ParameterError

_WORKERS = 1


def set_threads(n: int) -> None:
    """Set the number of FFT worker threads used by every module."""
    global _WORKERS
    _WORKERS = max(1, int(n))


def fft_workers() -> int:
    return _WORKERS


@dataclass(frozen=True)
class GridSpec:
    n: int
    box_length: float = 2 * math.pi

    def __post_init__(self):
        n = int(self.n)
        if n < 8 or n & (n - 1):
            raise ParameterError(f"n must be a power of two >= 8, got {self.n}")
        if not self.box_length > 0:
            raise ParameterError(f"box_length must be positive, got {self.box_length}")
        object.__setattr__(self, "n", n)
        object.__setattr__(self, "box_length", float(self.box_length))

    @property
    def spacing(self) -> float:
        return self.box_length / self.n

    @property
    def cell_volume(self) -> float:
        return self.spacing**3

    @cached_property
    def coords(self) -> np.ndarray:
        """Cell-centre coordinates along one axis."""
        return -0.5 * self.box_length + (np.arange(self.n) + 0.5) * self.spacing

    def mesh(self):
        x = self.coords
        return np.meshgrid(x, x, x, indexing="ij", sparse=True)

    @cached_property
    def _k1d(self):
        k = 2 * np.pi * scipy.fft.fftfreq(self.n, d=self.spacing)
        kr = 2 * np.pi * scipy.fft.rfftfreq(self.n, d=self.spacing)
        return k, kr

    @cached_property
    def wavevector(self):
        """Wavenumbers (kx, ky, kz) broadcastable to the rfft layout."""
        k, kr = self._k1d
        return k[:, None, None], k[None, :, None], kr[None, None, :]

    @cached_property
    def derivative_wavevector(self):
        """Wavenumbers with the Nyquist entries zeroed (for odd derivatives)."""
        k, kr = (a.copy() for a in self._k1d)
        k[self.n // 2] = 0.0
        kr[-1] = 0.0
        return k[:, None, None], k[None, :, None], kr[None, None, :]

    @cached_property
    def k_squared(self) -> np.ndarray:
        kx, ky, kz = self.wavevector
        return kx**2 + ky**2 + kz**2

    @cached_property
    def dealias_mask(self) -> np.ndarray:
        """2/3-rule mask: keep modes with every |k_i| < n/3 (integer units)."""
        k, kr = self._k1d
        kmax = (2.0 / 3.0) * (self.n // 2) * (2 * np.pi / self.box_length)
        keep = np.abs(k) < kmax
        keep_r = np.abs(kr) < kmax
        return keep[:, None, None] & keep[None, :, None] & keep_r[None, None, :]

    def spectral_shape(self, ncomp: int = 3):
        return (ncomp, self.n, self.n, self.n // 2 + 1)


@dataclass(frozen=True, eq=False)
class VectorField3D:
    grid: GridSpec
    data: np.ndarray = field(repr=False)

    def __post_init__(self):
        data = np.array(self.data, dtype=np.float64, copy=True)
        n = self.grid.n
        if data.shape != (3, n, n, n):
            raise ParameterError(f"expected data of shape (3, {n}, {n}, {n}), got {data.shape}")
        if not np.all(np.isfinite(data)):
            raise ParameterError("vector field contains non-finite values")
        data.flags.writeable = False
        object.__setattr__(self, "data", data)

    @classmethod
    def zeros(cls, grid: GridSpec) -> "VectorField3D":
        return cls(grid, np.zeros((3, grid.n, grid.n, grid.n)))

    def _check_same_grid(self, other):
        if other.grid != self.grid:
            raise ParameterError("fields live on different grids")

    def __add__(self, other):
        self._check_same_grid(other)
        return VectorField3D(self.grid, self.data + other.data)

    def __sub__(self, other):
        self._check_same_grid(other)
        return VectorField3D(self.grid, self.data - other.data)

    def __neg__(self):
        return VectorField3D(self.grid, -self.data)

    def __mul__(self, c):
        return VectorField3D(self.grid, float(c) * self.data)

    __rmul__ = __mul__

    def magnitude(self) -> np.ndarray:
        """Euclidean length at every grid point."""
        return np.sqrt(np.einsum("i...,i...->...", self.data, self.data))

    def max_norm(self) -> np.ndarray:
        """Pointwise l-infinity norm of the 3-vector."""
        return np.abs(self.data).max(axis=0)


# --- spectral helpers -------------------------------------------------------

def forward(data: np.ndarray) -> np.ndarray:
    return scipy.fft.rfftn(data, axes=(-3, -2, -1), workers=_WORKERS)


def inverse(data_hat: np.ndarray, n: int) -> np.ndarray:
    return scipy.fft.irfftn(data_hat, s=(n, n, n), axes=(-3, -2, -1), workers=_WORKERS)


def to_spectral(f: VectorField3D) -> np.ndarray:
    return forward(f.data)


def from_spectral(grid: GridSpec, f_hat: np.ndarray) -> VectorField3D:
    return VectorField3D(grid, inverse(f_hat, grid.n))


def curl_hat(grid: GridSpec, f_hat: np.ndarray) -> np.ndarray:
    kx, ky, kz = grid.derivative_wavevector
    fx, fy, fz = f_hat
    return 1j * np.stack([ky * fz - kz * fy, kz * fx - kx * fz, kx * fy - ky * fx])


def div_hat(grid: GridSpec, f_hat: np.ndarray) -> np.ndarray:
    kx, ky, kz = grid.derivative_wavevector
    return 1j * (kx * f_hat[0] + ky * f_hat[1] + kz * f_hat[2])


def project_solenoidal(grid: GridSpec, f_hat: np.ndarray) -> np.ndarray:
    """Remove the gradient part, the mean and the Nyquist modes."""
    kx, ky, kz = grid.derivative_wavevector
    k2 = kx**2 + ky**2 + kz**2
    kdotf = kx * f_hat[0] + ky * f_hat[1] + kz * f_hat[2]
    with np.errstate(divide="ignore", invalid="ignore"):
        coef = np.where(k2 > 0, kdotf / np.where(k2 > 0, k2, 1.0), 0.0)
    out = np.stack([f_hat[0] - kx * coef, f_hat[1] - ky * coef, f_hat[2] - kz * coef])
    out[:, k2 == 0] = 0.0
    return out


def biot_savart_hat(grid: GridSpec, omega_hat: np.ndarray) -> np.ndarray:
    """Velocity coefficients u_hat = i k x omega_hat / |k|^2 (zero mean)."""
    kx, ky, kz = grid.derivative_wavevector
    k2 = kx**2 + ky**2 + kz**2
    inv_k2 = np.where(k2 > 0, 1.0 / np.where(k2 > 0, k2, 1.0), 0.0)
    return curl_hat(grid, omega_hat) * inv_k2


def curl(f: VectorField3D) -> VectorField3D:
    return from_spectral(f.grid, curl_hat(f.grid, to_spectral(f)))


def divergence(f: VectorField3D) -> np.ndarray:
    return inverse(div_hat(f.grid, to_spectral(f)), f.grid.n)


def velocity_from_vorticity(omega: VectorField3D) -> VectorField3D:
    """Invert ``curl u = omega`` on the periodic box.

    The mean and Nyquist modes of ``omega`` are discarded; for a field that
    has been through :func:`project_solenoidal` the returned velocity
    satisfies ``curl u = omega`` and ``div u = 0`` to round-off.
    """
    return from_spectral(omega.grid, biot_savart_hat(omega.grid, to_spectral(omega)))


def solenoidal(f: VectorField3D) -> VectorField3D:
    return from_spectral(f.grid, project_solenoidal(f.grid, to_spectral(f)))


# --- norms ------------------------------------------------------------------

@dataclass(frozen=True)
class FieldNorms:
    linf: float
    l1: float
    l2: float
    enstrophy: float
    helicity: float

    def as_tuple(self):
        return (self.linf, self.l1, self.l2, self.enstrophy, self.helicity)


def field_norms(omega: VectorField3D) -> FieldNorms:
    """Norms of a vorticity field.

    ``linf`` and ``l1`` use the pointwise max-norm of the 3-vector;
    ``l2`` and ``enstrophy = l2**2 / 2`` use the Euclidean length;
    ``helicity`` is the Riemann sum of ``u . omega``.
    """
    dv = omega.grid.cell_volume
    pointwise = omega.max_norm()
    sq = float(np.vdot(omega.data, omega.data)) * dv
    u = velocity_from_vorticity(omega)
    helicity = float(np.vdot(u.data, omega.data)) * dv
    return FieldNorms(
        linf=float(pointwise.max()),
        l1=math.fsum(pointwise.ravel()) * dv,
        l2=math.sqrt(sq),
        enstrophy=0.5 * sq,
        helicity=helicity,
    )


def kinetic_energy(u: VectorField3D) -> float:
    return 0.5 * float(np.vdot(u.data, u.data)) * u.grid.cell_volume


# --- ring initial data ------------------------------------------------------

@dataclass(frozen=True)
class RingConfig:
    radius: float = 1.0
    core_radius: float = 0.1
    circulation: float = 1.0
    center: tuple = (0.0, 0.0, 0.0)
    unit_normal: tuple = (0.0, 0.0, 1.0)

    def __post_init__(self):
        if not self.radius > 0:
            raise ConfigurationError("ring radius must be positive")
        if not 0 < self.core_radius < self.radius / 2:
            raise ConfigurationError("core_radius must lie in (0, radius/2)")
        nrm = np.asarray(self.unit_normal, dtype=float)
        if nrm.shape != (3,) or abs(np.linalg.norm(nrm) - 1.0) > 1e-9:
            raise ConfigurationError("unit_normal must be a unit 3-vector")
        object.__setattr__(self, "center", tuple(float(c) for c in self.center))
        object.__setattr__(self, "unit_normal", tuple(float(c) for c in nrm))

    @property
    def peak_vorticity(self) -> float:
        """Centreline value of the Gaussian core, Gamma / (pi a^2)."""
        return abs(self.circulation) / (math.pi * self.core_radius**2)

    def check_fits(self, grid: GridSpec) -> None:
        nrm = np.asarray(self.unit_normal)
        half = 0.5 * grid.box_length
        margin = 4.0 * self.core_radius
        for i in range(3):
            extent = self.radius * math.sqrt(max(0.0, 1.0 - nrm[i] ** 2))
            if abs(self.center[i]) + extent + margin > half:
                raise ConfigurationError(
                    f"ring does not fit in the box along axis {i}: "
                    f"needs {abs(self.center[i]) + extent + margin:.4g} <= {half:.4g}"
                )


@dataclass(frozen=True)
class MKConfig:
    """Two tilted counter-rotating rings, mirror images through ``x = 0``.

    ``inclination`` is the angle between each ring plane and the symmetry
    plane; ``separation`` is the distance between the two core centrelines
    at their closest points (the ring tops).
    """

    ring: RingConfig = field(default_factory=RingConfig)
    inclination: float = math.pi / 6
    separation: float = 0.4
    viscosity: float = 0.01

    def __post_init__(self):
        if not 0 <= self.inclination < math.pi / 2:
            raise ConfigurationError("inclination must lie in [0, pi/2)")
        if not self.separation > 0:
            raise ConfigurationError("separation must be positive")
        if self.viscosity < 0:
            raise ConfigurationError("viscosity must be non-negative")

    def rings(self):
        a = self.inclination
        r = self.ring
        cx = 0.5 * self.separation + r.radius * math.sin(a)
        # normals point along the direction of self-induced motion for
        # positive circulation, i.e. towards the symmetry plane
        first = RingConfig(r.radius, r.core_radius, r.circulation,
                           (cx, 0.0, 0.0), (-math.cos(a), 0.0, -math.sin(a)))
        second = RingConfig(r.radius, r.core_radius, -r.circulation,
                            (-cx, 0.0, 0.0), (-math.cos(a), 0.0, math.sin(a)))
        return first, second


def _ring_vorticity_raw(ring: RingConfig, grid: GridSpec) -> np.ndarray:
    L = grid.box_length
    x = grid.coords
    c = np.asarray(ring.center)
    nrm = np.asarray(ring.unit_normal)
    # minimum-image displacement from the ring centre
    d = [((x - c[i] + 0.5 * L) % L - 0.5 * L) for i in range(3)]
    dx, dy, dz = d[0][:, None, None], d[1][None, :, None], d[2][None, None, :]
    axial = dx * nrm[0] + dy * nrm[1] + dz * nrm[2]
    px, py, pz = dx - axial * nrm[0], dy - axial * nrm[1], dz - axial * nrm[2]
    rho = np.sqrt(px**2 + py**2 + pz**2)
    a = ring.core_radius
    amp = ring.circulation / (math.pi * a * a) * np.exp(-((rho - ring.radius) ** 2 + axial**2) / (a * a))
    inv_rho = np.where(rho > 0, 1.0 / np.where(rho > 0, rho, 1.0), 0.0)
    # tangent = normal x radial unit vector
    tx = (nrm[1] * pz - nrm[2] * py) * inv_rho
    ty = (nrm[2] * px - nrm[0] * pz) * inv_rho
    tz = (nrm[0] * py - nrm[1] * px) * inv_rho
    return np.stack([amp * tx, amp * ty, amp * tz])


def gaussian_ring_vorticity(ring: RingConfig, grid: GridSpec) -> VectorField3D:
    """Thin-core vortex ring with a Gaussian cross-section.

    The core profile is ``Gamma / (pi a^2) exp(-s^2 / a^2)`` where ``s`` is
    the distance to the centreline circle and ``a`` the core radius, so the
    flux through any cross-section is ``Gamma``.  The sampled field is made
    solenoidal by spectral projection.
    """
    ring.check_fits(grid)
    raw = _ring_vorticity_raw(ring, grid)
    return from_spectral(grid, project_solenoidal(grid, forward(raw)))


def mk_initial_configuration(cfg: MKConfig, grid: GridSpec) -> VectorField3D:
    """Superpose the two mirror-symmetric tilted rings of ``cfg``."""
    if cfg.separation < cfg.ring.core_radius:
        raise ConfigurationError(
            f"separation {cfg.separation} < core_radius {cfg.ring.core_radius}: "
            "cores overlap by more than half"
        )
    first, second = cfg.rings()
    first.check_fits(grid)
    second.check_fits(grid)
    raw = _ring_vorticity_raw(first, grid) + _ring_vorticity_raw(second, grid)
    return from_spectral(grid, project_solenoidal(grid, forward(raw)))


def mirror_reflect(omega: VectorField3D) -> VectorField3D:
    """Reflect a pseudovector field through the plane ``x = 0``."""
    d = omega.data[:, ::-1, :, :]
    return VectorField3D(omega.grid, np.stack([d[0], -d[1], -d[2]]))

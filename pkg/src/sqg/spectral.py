"""Fourier representation of fields on the periodic square [0, 2*pi)^2.

Conventions
-----------
* ``values[i, j]`` samples the field at ``(x1_i, x2_j) = (i, j) * 2*pi/N``;
  axis 0 is the x1 direction.
* ``coeffs = fft2(values)`` (unnormalised forward transform), so a constant
  field ``c`` has ``coeffs[0, 0] == c * N**2``.
* Wavenumbers are integers in ``[-N/2, N/2)`` in standard FFT order.
* The dealiased band is the disc ``|k| <= k_cut`` with
  ``k_cut = floor(dealias_fraction * N / 2)``.  The disc sits inside the
  usual 2/3-rule square, so quadratic products are still alias free, and it
  is isotropic, which keeps every Littlewood-Paley shell inside the band.
"""

from __future__ import annotations

import math
import struct
from dataclasses import dataclass
from functools import cached_property
from pathlib import Path

import numpy as np
import scipy.fft as sfft

TWO_PI = 2.0 * math.pi

SNAPSHOT_MAGIC = b"SQGF"
SNAPSHOT_VERSION = 1
# magic, version, N, reserved, step, time
_HEADER = struct.Struct("<4sIIIQd")
assert _HEADER.size == 32


class GridError(ValueError):
    """Raised for malformed grids or fields living on different grids."""


@dataclass(frozen=True)
class GridSpec:
    """An ``N x N`` periodic grid with period ``2*pi`` in both directions."""

    N: int
    dealias_fraction: float = 2.0 / 3.0

    def __post_init__(self):
        N = self.N
        if not isinstance(N, (int, np.integer)) or N < 16 or N & (N - 1):
            raise GridError(f"N must be a power of two >= 16, got {N!r}")
        if not 0.0 < self.dealias_fraction <= 1.0:
            raise GridError("dealias_fraction must lie in (0, 1]")
        if self.k_cut < 4:
            raise GridError(f"dealias cutoff {self.k_cut} < 4")

    @property
    def L(self) -> float:
        return TWO_PI

    @property
    def k_cut(self) -> int:
        return int(math.floor(self.dealias_fraction * self.N / 2 + 1e-12))

    @property
    def q_max(self) -> int:
        """Largest dyadic shell index whose block can be nonzero on the band."""
        return int(math.floor(math.log2(self.k_cut)))

    @property
    def cell_area(self) -> float:
        return (TWO_PI / self.N) ** 2

    @cached_property
    def wavenumbers(self) -> np.ndarray:
        return np.fft.fftfreq(self.N, d=1.0 / self.N)

    @cached_property
    def k1(self) -> np.ndarray:
        return np.broadcast_to(self.wavenumbers[:, None], (self.N, self.N))

    @cached_property
    def k2(self) -> np.ndarray:
        return np.broadcast_to(self.wavenumbers[None, :], (self.N, self.N))

    @cached_property
    def kmag(self) -> np.ndarray:
        return np.hypot(self.k1, self.k2)

    @cached_property
    def inv_kmag(self) -> np.ndarray:
        out = np.zeros((self.N, self.N))
        nz = self.kmag > 0
        out[nz] = 1.0 / self.kmag[nz]
        return out

    @cached_property
    def mask(self) -> np.ndarray:
        return self.kmag <= self.k_cut

    @cached_property
    def odd_k1(self) -> np.ndarray:
        # Nyquist row has no conjugate partner; odd multipliers must vanish there.
        k = self.k1.copy()
        k[self.N // 2, :] = 0.0
        return k

    @cached_property
    def odd_k2(self) -> np.ndarray:
        k = self.k2.copy()
        k[:, self.N // 2] = 0.0
        return k

    @cached_property
    def x(self) -> np.ndarray:
        return np.arange(self.N) * (TWO_PI / self.N)

    @cached_property
    def x1(self) -> np.ndarray:
        return np.broadcast_to(self.x[:, None], (self.N, self.N))

    @cached_property
    def x2(self) -> np.ndarray:
        return np.broadcast_to(self.x[None, :], (self.N, self.N))


def _frozen(a: np.ndarray) -> np.ndarray:
    a.flags.writeable = False
    return a


def _fft(values):
    return sfft.fft2(values)


def _ifft_real(coeffs):
    return sfft.ifft2(coeffs).real


class ScalarField:
    """Real scalar field with lazily paired grid values and Fourier coefficients.

    Instances are immutable; arithmetic returns new fields.
    """

    __slots__ = ("grid", "_values", "_coeffs")

    def __init__(self, grid: GridSpec, values=None, coeffs=None):
        if values is None and coeffs is None:
            raise ValueError("need values or coeffs")
        shape = (grid.N, grid.N)
        if values is not None:
            values = np.asarray(values, dtype=np.float64)
            if values.shape != shape:
                raise GridError(f"values shape {values.shape} != {shape}")
            values = _frozen(values.copy() if values.flags.writeable else values)
        if coeffs is not None:
            coeffs = np.asarray(coeffs, dtype=np.complex128)
            if coeffs.shape != shape:
                raise GridError(f"coeffs shape {coeffs.shape} != {shape}")
            coeffs = _frozen(coeffs.copy() if coeffs.flags.writeable else coeffs)
        self.grid = grid
        self._values = values
        self._coeffs = coeffs

    @classmethod
    def from_values(cls, grid, values):
        return cls(grid, values=values)

    @classmethod
    def from_coeffs(cls, grid, coeffs):
        return cls(grid, coeffs=coeffs)

    @classmethod
    def zeros(cls, grid):
        return cls(grid, values=np.zeros((grid.N, grid.N)), coeffs=np.zeros((grid.N, grid.N), complex))

    @property
    def values(self) -> np.ndarray:
        if self._values is None:
            self._values = _frozen(_ifft_real(self._coeffs))
        return self._values

    @property
    def coeffs(self) -> np.ndarray:
        if self._coeffs is None:
            self._coeffs = _frozen(_fft(self._values))
        return self._coeffs

    @property
    def mean(self) -> float:
        return float(self.coeffs[0, 0].real) / self.grid.N**2

    def _check(self, other):
        if other.grid != self.grid:
            raise GridError("fields live on different grids")

    def __add__(self, other):
        self._check(other)
        return ScalarField(self.grid, coeffs=self.coeffs + other.coeffs)

    def __sub__(self, other):
        self._check(other)
        return ScalarField(self.grid, coeffs=self.coeffs - other.coeffs)

    def __neg__(self):
        return ScalarField(self.grid, coeffs=-self.coeffs)

    def __mul__(self, c):
        if isinstance(c, ScalarField):
            return NotImplemented
        return ScalarField(self.grid, coeffs=self.coeffs * c)

    __rmul__ = __mul__

    def multiply(self, multiplier) -> "ScalarField":
        """Coefficient-wise Fourier multiplier."""
        return ScalarField(self.grid, coeffs=self.coeffs * multiplier)

    def __repr__(self):
        return f"ScalarField(N={self.grid.N})"


@dataclass(frozen=True)
class VectorField:
    u1: ScalarField
    u2: ScalarField

    def __post_init__(self):
        if self.u1.grid != self.u2.grid:
            raise GridError("vector components on different grids")

    @property
    def grid(self) -> GridSpec:
        return self.u1.grid

    @property
    def components(self):
        return (self.u1, self.u2)

    def __add__(self, other):
        return VectorField(self.u1 + other.u1, self.u2 + other.u2)

    def __sub__(self, other):
        return VectorField(self.u1 - other.u1, self.u2 - other.u2)

    def __mul__(self, c):
        return VectorField(self.u1 * c, self.u2 * c)

    __rmul__ = __mul__

    def multiply(self, multiplier) -> "VectorField":
        return VectorField(self.u1.multiply(multiplier), self.u2.multiply(multiplier))


# -- transforms -------------------------------------------------------------


def to_spectral(field: ScalarField) -> ScalarField:
    """Recompute the Fourier coefficients from the grid values."""
    values = field.values
    return ScalarField(field.grid, values=values, coeffs=_fft(values))


def to_physical(field: ScalarField) -> ScalarField:
    """Recompute the grid values from the Fourier coefficients."""
    coeffs = field.coeffs
    return ScalarField(field.grid, values=_ifft_real(coeffs), coeffs=coeffs)


def dealias(field: ScalarField) -> ScalarField:
    """Zero every coefficient outside the dealiased disc."""
    return ScalarField(field.grid, coeffs=np.where(field.grid.mask, field.coeffs, 0.0))


def canonical(field: ScalarField) -> ScalarField:
    """Round-trip through grid values and re-project onto the band.

    Used wherever a state is written as real samples, so that a state read
    back from disk is bitwise the state the writer continued with.
    """
    values = np.array(field.values)
    return dealias(ScalarField(field.grid, values=values))


def is_dealiased(field: ScalarField) -> bool:
    return not np.any(field.coeffs[~field.grid.mask])


def hermitian_defect(field: ScalarField) -> float:
    """max |c(-k) - conj(c(k))| over the grid, ignoring Nyquist rows."""
    c = field.coeffs
    flipped = np.roll(c[::-1, ::-1], 1, axis=(0, 1))
    d = np.abs(flipped - np.conj(c))
    n = field.grid.N // 2
    d[n, :] = 0.0
    d[:, n] = 0.0
    return float(d.max())


# -- operators --------------------------------------------------------------


def fractional_laplacian(theta: ScalarField, alpha: float) -> ScalarField:
    """Apply ``Lambda**alpha``, the multiplier ``|k|**alpha`` (zero at k=0)."""
    if not 0.0 < alpha <= 2.0:
        raise ValueError(f"alpha must lie in (0, 2], got {alpha}")
    return theta.multiply(theta.grid.kmag**alpha)


def gradient(theta: ScalarField) -> VectorField:
    g = theta.grid
    c = theta.coeffs
    return VectorField(
        ScalarField(g, coeffs=1j * g.odd_k1 * c),
        ScalarField(g, coeffs=1j * g.odd_k2 * c),
    )


def divergence(u: VectorField) -> ScalarField:
    g = u.grid
    return ScalarField(g, coeffs=1j * (g.odd_k1 * u.u1.coeffs + g.odd_k2 * u.u2.coeffs))


def riesz_perp(theta: ScalarField) -> VectorField:
    """Velocity ``u = R^perp theta = Lambda^{-1}(-d2 theta, d1 theta)``."""
    g = theta.grid
    w = theta.coeffs * g.inv_kmag
    return VectorField(
        ScalarField(g, coeffs=-1j * g.odd_k2 * w),
        ScalarField(g, coeffs=1j * g.odd_k1 * w),
    )


def product(a: ScalarField, b: ScalarField) -> ScalarField:
    """Dealiased pointwise product.

    Exact on the band when both factors are band limited.
    """
    a._check(b)
    g = a.grid
    c = _fft(a.values * b.values)
    return ScalarField(g, coeffs=np.where(g.mask, c, 0.0))


def scale_vector(u: VectorField, theta: ScalarField) -> VectorField:
    """Dealiased product ``u * theta`` of a vector and a scalar field."""
    return VectorField(product(u.u1, theta), product(u.u2, theta))


def advect(u: VectorField, theta: ScalarField) -> ScalarField:
    """Dealiased transport term ``u . grad(theta)``."""
    if u.grid != theta.grid:
        raise GridError("velocity and scalar live on different grids")
    g = theta.grid
    grad = gradient(theta)
    prod = u.u1.values * grad.u1.values + u.u2.values * grad.u2.values
    return ScalarField(g, coeffs=np.where(g.mask, _fft(prod), 0.0))


# -- quadrature -------------------------------------------------------------


def integrate(field_or_values, grid: GridSpec | None = None) -> float:
    """Uniform-grid quadrature of a field over the torus."""
    if isinstance(field_or_values, ScalarField):
        grid = field_or_values.grid
        values = field_or_values.values
    else:
        values = field_or_values
    return float(values.sum()) * grid.cell_area


def inner(a: ScalarField, b: ScalarField) -> float:
    """L2 inner product via Parseval (exact for real fields)."""
    a._check(b)
    N2 = a.grid.N ** 2
    s = np.vdot(a.coeffs, b.coeffs).real
    return float(s) * (TWO_PI**2) / N2**2


def vector_inner(u: VectorField, v: VectorField) -> float:
    return inner(u.u1, v.u1) + inner(u.u2, v.u2)


def lp_norm(theta: ScalarField, p: float) -> float:
    """Grid L^p norm, normalised so that ``||1||_p = (2*pi)**(2/p)``."""
    if not p >= 1.0:
        raise ValueError(f"p must lie in [1, inf], got {p}")
    a = np.abs(theta.values)
    if math.isinf(p):
        return float(a.max())
    if p == 2.0:
        return math.sqrt(float(np.dot(a.ravel(), a.ravel())) * theta.grid.cell_area)
    return (float(np.sum(a**p)) * theta.grid.cell_area) ** (1.0 / p)


def vector_lp_norm(u: VectorField, p: float) -> float:
    """L^p norm of the Euclidean magnitude of ``u``."""
    mag = np.hypot(u.u1.values, u.u2.values)
    g = u.grid
    if math.isinf(p):
        return float(mag.max())
    return (float(np.sum(mag**p)) * g.cell_area) ** (1.0 / p)


def upsample(theta: ScalarField, factor: int) -> ScalarField:
    """Zero-pad the spectrum of a band-limited field onto a finer grid.

    Grid sums on the fine grid integrate polynomial nonlinearities of the
    field exactly once ``factor * N`` exceeds their spectral degree.
    """
    if factor == 1:
        return theta
    g = theta.grid
    M = g.N * factor
    fine = GridSpec(M, g.dealias_fraction)
    c = np.zeros((M, M), complex)
    k = g.wavenumbers.astype(int)
    idx = np.mod(k, M)
    src = np.where(g.mask, theta.coeffs, 0.0)
    c[np.ix_(idx, idx)] = src * factor**2
    return ScalarField(fine, coeffs=c)


# -- snapshot files ---------------------------------------------------------


def write_snapshot(path, field: ScalarField, step: int = 0, time: float = 0.0) -> Path:
    """Write the binary snapshot format (see README for the layout)."""
    path = Path(path)
    header = _HEADER.pack(SNAPSHOT_MAGIC, SNAPSHOT_VERSION, field.grid.N, 0, int(step), float(time))
    body = np.ascontiguousarray(field.values, dtype="<f8").tobytes()
    path.write_bytes(header + body)
    return path


def read_snapshot(path, dealias_fraction: float = 2.0 / 3.0):
    """Read a snapshot; returns ``(field, step, time)``."""
    raw = Path(path).read_bytes()
    if len(raw) < _HEADER.size:
        raise GridError(f"{path}: truncated snapshot header")
    magic, version, N, _reserved, step, time = _HEADER.unpack_from(raw)
    if magic != SNAPSHOT_MAGIC:
        raise GridError(f"{path}: bad magic {magic!r}")
    if version != SNAPSHOT_VERSION:
        raise GridError(f"{path}: unsupported snapshot version {version}")
    expected = _HEADER.size + 8 * N * N
    if len(raw) != expected:
        raise GridError(f"{path}: expected {expected} bytes, found {len(raw)}")
    values = np.frombuffer(raw, dtype="<f8", offset=_HEADER.size).reshape(N, N).astype(np.float64)
    grid = GridSpec(int(N), dealias_fraction)
    return dealias(ScalarField(grid, values=values)), int(step), float(time)

"""Cell-centered grid fields on square footprints, with the discrete calculus
used everywhere else in the package.

Conventions, fixed once here so the other modules never re-derive them:

* A footprint is the closed square ``center + [-half_side, half_side]^2``.
  A grid of ``n`` cells per side has spacing ``h = 2 * half_side / n`` and the
  cell centers sit at ``center + (-half_side + (i + 1/2) h)`` per axis.
* Arrays are indexed ``values[iy, ix]`` with ``iy = 0`` the bottom row, so a
  flattened array is row-major from the bottom-left cell.
* First derivatives are centered in the interior with second-order one-sided
  stencils on the boundary ring (exact on affine functions); the Laplacian is
  the compact 5-point stencil in the interior with second-order one-sided
  second differences on the ring (exact on quadratics).
* Region membership is decided by cell center.

Field files ("UCPF") are a fixed little-endian layout: magic ``UCPF``,
u32 version (1), u64 n, f64 center_x, center_y, half_side, u8 dtype
(0 real, 1 complex), then the n*n f64 values (re/im interleaved when
complex) row-major from the bottom-left.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass

import numpy as np

UCPF_MAGIC = b"UCPF"
UCPF_VERSION = 1
_HEADER = struct.Struct("<4sIQdddB")


@dataclass(frozen=True)
class GridSpec:
    """Geometry of a cell-centered n-by-n grid on a square footprint."""

    center: complex
    half_side: float
    n: int

    def __post_init__(self):
        if self.n < 8:
            raise ValueError(f"grid too coarse: n = {self.n} < 8")
        if not (self.half_side > 0):
            raise ValueError(f"half_side must be positive, got {self.half_side}")

    @property
    def h(self) -> float:
        return 2.0 * self.half_side / self.n

    def axis(self) -> np.ndarray:
        """Cell-center offsets from the footprint center, shared by both axes."""
        return -self.half_side + (np.arange(self.n) + 0.5) * self.h

    def xs(self) -> np.ndarray:
        return self.center.real + self.axis()

    def ys(self) -> np.ndarray:
        return self.center.imag + self.axis()

    def meshes(self) -> tuple[np.ndarray, np.ndarray]:
        """(X, Y) cell-center coordinate arrays, indexed [iy, ix]."""
        return np.meshgrid(self.xs(), self.ys())

    def points(self) -> np.ndarray:
        """Complex cell centers as an (n, n) array."""
        X, Y = self.meshes()
        return X + 1j * Y

    def same_geometry(self, other: "GridSpec", tol: float = 1e-12) -> bool:
        return (
            self.n == other.n
            and abs(self.center - other.center) <= tol
            and abs(self.half_side - other.half_side) <= tol
        )


class _Field:
    """Shared storage/validation for the two field types."""

    _dtype: type = float

    def __init__(self, spec: GridSpec, values: np.ndarray):
        values = np.asarray(values, dtype=self._dtype)
        if values.shape != (spec.n, spec.n):
            raise ValueError(
                f"values shape {values.shape} does not match grid n = {spec.n}"
            )
        if not np.all(np.isfinite(values)):
            raise ValueError("field contains non-finite values")
        values = values.copy()
        values.setflags(write=False)
        self.spec = spec
        self.values = values

    def _check_compatible(self, other):
        if not self.spec.same_geometry(other.spec):
            raise ValueError("fields live on different grids")

    def __add__(self, other):
        if isinstance(other, _Field):
            self._check_compatible(other)
            return _wrap(self.spec, self.values + other.values)
        return _wrap(self.spec, self.values + other)

    __radd__ = __add__

    def __sub__(self, other):
        if isinstance(other, _Field):
            self._check_compatible(other)
            return _wrap(self.spec, self.values - other.values)
        return _wrap(self.spec, self.values - other)

    def __mul__(self, other):
        if isinstance(other, _Field):
            self._check_compatible(other)
            return _wrap(self.spec, self.values * other.values)
        return _wrap(self.spec, self.values * other)

    __rmul__ = __mul__

    def __neg__(self):
        return _wrap(self.spec, -self.values)


class RealField(_Field):
    _dtype = np.float64

    def abs(self) -> "RealField":
        return RealField(self.spec, np.abs(self.values))


class ComplexField(_Field):
    _dtype = np.complex128

    def abs(self) -> RealField:
        return RealField(self.spec, np.abs(self.values))

    def conj(self) -> "ComplexField":
        return ComplexField(self.spec, np.conj(self.values))

    @property
    def real(self) -> RealField:
        return RealField(self.spec, self.values.real)

    @property
    def imag(self) -> RealField:
        return RealField(self.spec, self.values.imag)


def _wrap(spec: GridSpec, values: np.ndarray):
    if np.iscomplexobj(values):
        return ComplexField(spec, values)
    return RealField(spec, values)


def field_from_function(spec: GridSpec, fn) -> RealField | ComplexField:
    """Sample ``fn(x, y)`` (vectorized) at the cell centers."""
    X, Y = spec.meshes()
    return _wrap(spec, np.asarray(fn(X, Y)))


# ---------------------------------------------------------------------------
# regions

@dataclass(frozen=True)
class Cube:
    center: complex
    half_side: float

    def mask(self, spec: GridSpec) -> np.ndarray:
        X, Y = spec.meshes()
        m = (np.abs(X - self.center.real) <= self.half_side) & (
            np.abs(Y - self.center.imag) <= self.half_side
        )
        if not m.any():
            raise ValueError("empty region: no cell centers inside cube")
        return m


@dataclass(frozen=True)
class Ball:
    center: complex
    radius: float

    def mask(self, spec: GridSpec) -> np.ndarray:
        X, Y = spec.meshes()
        m = (X - self.center.real) ** 2 + (Y - self.center.imag) ** 2 <= self.radius**2
        if not m.any():
            raise ValueError("empty region: no cell centers inside ball")
        return m


Region = Cube | Ball


# ---------------------------------------------------------------------------
# stencils (array level, per-axis spacing; the cauchy module reuses these on
# rectangular quadrature patches)

def d1_array(values: np.ndarray, h: float, axis: int) -> np.ndarray:
    """First derivative: centered interior, second-order one-sided edges."""
    return np.gradient(values, h, axis=axis, edge_order=2)


def d2_array(values: np.ndarray, h: float, axis: int) -> np.ndarray:
    """Second derivative: compact interior, second-order one-sided edges."""
    v = np.moveaxis(values, axis, 0)
    out = np.empty_like(v)
    out[1:-1] = (v[2:] - 2.0 * v[1:-1] + v[:-2]) / h**2
    out[0] = (2.0 * v[0] - 5.0 * v[1] + 4.0 * v[2] - v[3]) / h**2
    out[-1] = (2.0 * v[-1] - 5.0 * v[-2] + 4.0 * v[-3] - v[-4]) / h**2
    return np.moveaxis(out, 0, axis)


def dx(f: _Field):
    return _wrap(f.spec, d1_array(f.values, f.spec.h, axis=1))


def dy(f: _Field):
    return _wrap(f.spec, d1_array(f.values, f.spec.h, axis=0))


def dbar(f: _Field) -> ComplexField:
    """Wirtinger derivative (d/dx + i d/dy) / 2."""
    vals = 0.5 * (
        d1_array(f.values.astype(np.complex128), f.spec.h, axis=1)
        + 1j * d1_array(f.values.astype(np.complex128), f.spec.h, axis=0)
    )
    return ComplexField(f.spec, vals)


def dz(f: _Field) -> ComplexField:
    """Wirtinger derivative (d/dx - i d/dy) / 2."""
    vals = 0.5 * (
        d1_array(f.values.astype(np.complex128), f.spec.h, axis=1)
        - 1j * d1_array(f.values.astype(np.complex128), f.spec.h, axis=0)
    )
    return ComplexField(f.spec, vals)


def gradient(f: RealField) -> tuple[RealField, RealField]:
    return (
        RealField(f.spec, d1_array(f.values, f.spec.h, axis=1)),
        RealField(f.spec, d1_array(f.values, f.spec.h, axis=0)),
    )


def laplacian(f: _Field):
    h = f.spec.h
    return _wrap(f.spec, d2_array(f.values, h, axis=1) + d2_array(f.values, h, axis=0))


# ---------------------------------------------------------------------------
# norms

def _region_values(f: _Field, region: Region | None) -> np.ndarray:
    if region is None:
        return f.values
    return f.values[region.mask(f.spec)]


def sup_norm(f: _Field, region: Region | None = None) -> float:
    return float(np.max(np.abs(_region_values(f, region))))


def l2_sq(f: _Field, region: Region | None = None) -> float:
    """Cell-sum approximation of the squared L2 norm: h^2 * sum |f|^2."""
    vals = _region_values(f, region)
    return float(f.spec.h**2 * np.sum(np.abs(vals) ** 2))


def interior_mask(spec: GridSpec, margin: int = 2) -> np.ndarray:
    """Cells at least ``margin`` rows/columns away from the footprint edge."""
    if 2 * margin >= spec.n:
        raise ValueError("margin eats the whole grid")
    m = np.zeros((spec.n, spec.n), dtype=bool)
    m[margin : spec.n - margin, margin : spec.n - margin] = True
    return m


def boundary_ring_mask(spec: GridSpec) -> np.ndarray:
    m = np.ones((spec.n, spec.n), dtype=bool)
    m[1:-1, 1:-1] = False
    return m


def interior_sup(f: _Field, margin: int = 2) -> float:
    return float(np.max(np.abs(f.values[interior_mask(f.spec, margin)])))


# ---------------------------------------------------------------------------
# sampling

def bilinear_sample(f: _Field, points: np.ndarray) -> np.ndarray:
    """Bilinear interpolation of a field at complex points.

    Points must lie inside the convex hull of the cell centers (half a cell
    in from the footprint edge); anything outside raises.
    """
    spec = f.spec
    pts = np.asarray(points, dtype=np.complex128)
    fx = (pts.real - (spec.center.real - spec.half_side)) / spec.h - 0.5
    fy = (pts.imag - (spec.center.imag - spec.half_side)) / spec.h - 0.5
    eps = 1e-9
    if (
        fx.min() < -eps
        or fy.min() < -eps
        or fx.max() > spec.n - 1 + eps
        or fy.max() > spec.n - 1 + eps
    ):
        raise ValueError("sample points leave the cell-center hull of the grid")
    fx = np.clip(fx, 0.0, spec.n - 1)
    fy = np.clip(fy, 0.0, spec.n - 1)
    ix = np.minimum(fx.astype(int), spec.n - 2)
    iy = np.minimum(fy.astype(int), spec.n - 2)
    tx = fx - ix
    ty = fy - iy
    v = f.values
    out = (
        v[iy, ix] * (1 - tx) * (1 - ty)
        + v[iy, ix + 1] * tx * (1 - ty)
        + v[iy + 1, ix] * (1 - tx) * ty
        + v[iy + 1, ix + 1] * tx * ty
    )
    return out


def extract_square(f: _Field, half_side: float):
    """Largest centered sub-grid whose footprint fits in the given half-side.

    The extraction keeps whole cells, so the returned footprint half-side is
    a multiple of h/2 and never exceeds the request. Works only for centered
    symmetric extraction (m and n share parity by construction).
    """
    spec = f.spec
    m = int(np.floor(2.0 * half_side / spec.h))
    m = min(m, spec.n)
    if m % 2 != spec.n % 2:
        m -= 1
    if m < 8:
        raise ValueError("requested sub-grid too small")
    lo = (spec.n - m) // 2
    sub = GridSpec(spec.center, m * spec.h / 2.0, m)
    return _wrap(sub, f.values[lo : lo + m, lo : lo + m])


# ---------------------------------------------------------------------------
# binary i/o

def write_field(path, f: _Field) -> None:
    is_complex = isinstance(f, ComplexField)
    header = _HEADER.pack(
        UCPF_MAGIC,
        UCPF_VERSION,
        f.spec.n,
        f.spec.center.real,
        f.spec.center.imag,
        f.spec.half_side,
        1 if is_complex else 0,
    )
    if is_complex:
        flat = np.empty(2 * f.spec.n**2, dtype="<f8")
        flat[0::2] = f.values.real.ravel()
        flat[1::2] = f.values.imag.ravel()
    else:
        flat = f.values.ravel().astype("<f8")
    with open(path, "wb") as fh:
        fh.write(header)
        fh.write(flat.tobytes())


def read_field(path) -> RealField | ComplexField:
    with open(path, "rb") as fh:
        raw = fh.read()
    if len(raw) < _HEADER.size:
        raise ValueError("truncated field file: header incomplete")
    magic, version, n, cx, cy, half_side, dtype = _HEADER.unpack_from(raw)
    if magic != UCPF_MAGIC:
        raise ValueError(f"bad magic {magic!r}, expected {UCPF_MAGIC!r}")
    if version != UCPF_VERSION:
        raise ValueError(f"unsupported field file version {version}")
    if dtype not in (0, 1):
        raise ValueError(f"unknown dtype tag {dtype}")
    count = n * n * (2 if dtype else 1)
    payload = raw[_HEADER.size :]
    if len(payload) != 8 * count:
        raise ValueError(
            f"payload length {len(payload)} does not match n = {n} (dtype {dtype})"
        )
    flat = np.frombuffer(payload, dtype="<f8")
    spec = GridSpec(complex(cx, cy), half_side, int(n))
    if dtype:
        vals = (flat[0::2] + 1j * flat[1::2]).reshape(n, n)
        return ComplexField(spec, vals)
    return RealField(spec, flat.reshape(n, n))

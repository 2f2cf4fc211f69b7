"""Band-limited periodic fields on the torus [0, 2*pi)^3.

Fields are stored as real-to-complex Fourier coefficients (the last spatial
axis keeps only non-negative wavenumbers) for every sample of a uniform time
grid on [0, 1].  Coefficients are normalized so that

    f(x) = sum_k c_k exp(i k . x),

which makes the zero mode equal to the spatial mean.

A grid may carry a per-axis *stride* ``s``: the grid then represents fields
whose Fourier support lies on the sublattice ``s_1 Z x s_2 Z x s_3 Z``.  Such
a field is ``2*pi/s``-periodic and is sampled on one period cell only, so a
stride-``s`` grid with ``n`` points per axis resolves the same wavenumbers as a
full grid with ``s*n`` points while storing ``s^3`` times fewer values.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from functools import lru_cache
from typing import Sequence

import numpy as np
import scipy.fft as sfft

__all__ = [
    "Grid3",
    "TimeGrid",
    "SpectralField",
    "GridMismatchError",
    "set_workers",
    "zeros",
    "from_physical",
    "transform_to_spectral",
    "transform_to_physical",
    "derivative",
    "gradient",
    "divergence",
    "curl",
    "laplacian",
    "dealias",
    "pointwise_product",
    "dot",
    "time_derivative",
    "space_mean",
    "resample",
    "pointwise_magnitude",
    "sup_norm",
    "integral_of_square",
    "hermitian_defect",
]

_WORKERS = 1


def set_workers(n: int) -> None:
    """Set the number of threads used by the FFT backend."""
    global _WORKERS
    _WORKERS = max(1, int(n))


class GridMismatchError(ValueError):
    """Raised when fields on different grids are combined."""


def _triple(value, name: str) -> tuple[int, int, int]:
    if np.isscalar(value):
        out = (int(value),) * 3
    else:
        out = tuple(int(v) for v in value)
    if len(out) != 3:
        raise ValueError(f"{name} must be an integer or a triple")
    return out  # type: ignore[return-value]


@dataclass(frozen=True)
class Grid3:
    """Collocation grid for periodic fields.

    Parameters
    ----------
    modes_per_axis : int or triple of int
        Number of collocation points per axis (even, at least 8).
    dealias_fraction : Fraction
        Products retain modes with ``|m_i| <= dealias_fraction * n_i / 2``
        (``m`` counted in units of the stride).
    stride : int or triple of int
        Fundamental wavenumber per axis.
    """

    modes_per_axis: tuple[int, int, int]
    dealias_fraction: Fraction = Fraction(2, 3)
    stride: tuple[int, int, int] = (1, 1, 1)

    def __init__(self, modes_per_axis, dealias_fraction=Fraction(2, 3), stride=1):
        n = _triple(modes_per_axis, "modes_per_axis")
        s = _triple(stride, "stride")
        frac = Fraction(dealias_fraction).limit_denominator(10**6)
        for ni in n:
            if ni < 8 or ni % 2:
                raise ValueError(f"modes per axis must be even and >= 8, got {ni}")
        if any(si < 1 for si in s):
            raise ValueError("stride must be positive")
        if not 0 < frac <= 1:
            raise ValueError("dealias_fraction must lie in (0, 1]")
        object.__setattr__(self, "modes_per_axis", n)
        object.__setattr__(self, "dealias_fraction", frac)
        object.__setattr__(self, "stride", s)

    @property
    def shape(self) -> tuple[int, int, int]:
        return self.modes_per_axis

    @property
    def spectral_shape(self) -> tuple[int, int, int]:
        n1, n2, n3 = self.modes_per_axis
        return (n1, n2, n3 // 2 + 1)

    @property
    def isotropic(self) -> bool:
        n, s = self.modes_per_axis, self.stride
        return n[0] == n[1] == n[2] and s[0] == s[1] == s[2]

    @property
    def band(self) -> tuple[int, int, int]:
        """Largest retained index wavenumber per axis (stride units)."""
        return tuple(int(self.dealias_fraction * ni / 2) for ni in self.modes_per_axis)

    @property
    def resolved_wavenumber(self) -> tuple[int, int, int]:
        """Largest retained absolute wavenumber per axis."""
        return tuple(b * s for b, s in zip(self.band, self.stride))

    def index_wavenumbers(self) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """Integer wavenumbers in stride units, broadcastable to spectral_shape."""
        return _index_wavenumbers(self)

    def wavenumbers(self) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """Absolute integer wavenumbers, broadcastable to spectral_shape."""
        return _abs_wavenumbers(self)

    def retained_mask(self) -> np.ndarray:
        return _retained_mask(self)

    def coordinates(self) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """Physical sample coordinates, broadcastable to shape."""
        out = []
        for axis, (n, s) in enumerate(zip(self.modes_per_axis, self.stride)):
            x = 2.0 * np.pi * np.arange(n) / (n * s)
            shp = [1, 1, 1]
            shp[axis] = n
            out.append(x.reshape(shp))
        return tuple(out)  # type: ignore[return-value]

    def spacing(self) -> tuple[float, float, float]:
        return tuple(2.0 * np.pi / (n * s) for n, s in zip(self.modes_per_axis, self.stride))

    def holds_wavevector(self, k: Sequence[int], retained: bool = True) -> bool:
        """Whether the absolute wavevector ``k`` is representable on this grid."""
        for ki, n, s, b in zip(k, self.modes_per_axis, self.stride, self.band):
            if ki % s:
                return False
            m = abs(ki // s)
            if m > (b if retained else n // 2 - 1):
                return False
        return True

    def to_dict(self) -> dict:
        return {
            "modes_per_axis": list(self.modes_per_axis),
            "stride": list(self.stride),
            "dealias_fraction": [self.dealias_fraction.numerator, self.dealias_fraction.denominator],
        }

    @classmethod
    def from_dict(cls, d: dict) -> "Grid3":
        num, den = d.get("dealias_fraction", [2, 3])
        return cls(d["modes_per_axis"], Fraction(num, den), d.get("stride", 1))


@lru_cache(maxsize=64)
def _index_wavenumbers(grid: Grid3):
    n1, n2, n3 = grid.modes_per_axis
    m1 = np.fft.fftfreq(n1, 1.0 / n1).astype(np.int64).reshape(-1, 1, 1)
    m2 = np.fft.fftfreq(n2, 1.0 / n2).astype(np.int64).reshape(1, -1, 1)
    m3 = np.arange(n3 // 2 + 1, dtype=np.int64).reshape(1, 1, -1)
    for m in (m1, m2, m3):
        m.setflags(write=False)
    return m1, m2, m3


@lru_cache(maxsize=64)
def _abs_wavenumbers(grid: Grid3):
    out = []
    for m, s in zip(_index_wavenumbers(grid), grid.stride):
        k = m * s
        k.setflags(write=False)
        out.append(k)
    return tuple(out)


@lru_cache(maxsize=64)
def _retained_mask(grid: Grid3) -> np.ndarray:
    m1, m2, m3 = _index_wavenumbers(grid)
    b1, b2, b3 = grid.band
    mask = (np.abs(m1) <= b1) & (np.abs(m2) <= b2) & (np.abs(m3) <= b3)
    mask.setflags(write=False)
    return mask


@lru_cache(maxsize=64)
def _nyquist_factor(grid: Grid3, axis: int) -> np.ndarray:
    """1 everywhere except 0 on the Nyquist plane of ``axis``."""
    m = _index_wavenumbers(grid)[axis]
    n = grid.modes_per_axis[axis]
    fac = (np.abs(m) != n // 2).astype(float)
    fac.setflags(write=False)
    return fac


@lru_cache(maxsize=64)
def _k_squared(grid: Grid3) -> np.ndarray:
    k1, k2, k3 = _abs_wavenumbers(grid)
    ksq = (k1 * k1 + k2 * k2 + k3 * k3).astype(float)
    ksq.setflags(write=False)
    return ksq


@dataclass(frozen=True)
class TimeGrid:
    """Uniform samples ``t_i = i / (S - 1)`` of the unit time interval."""

    samples: int

    def __post_init__(self):
        if int(self.samples) < 2:
            raise ValueError("a time grid needs at least two samples")

    @property
    def times(self) -> np.ndarray:
        return np.linspace(0.0, 1.0, int(self.samples))

    @property
    def step(self) -> float:
        return 1.0 / (int(self.samples) - 1)


@dataclass(frozen=True, eq=False)
class SpectralField:
    """Immutable spectral field of rank 0 (scalar), 1 (vector) or 2 (matrix).

    ``coeffs`` has shape ``(S, *components, *grid.spectral_shape)`` where the
    component shape is ``()``, ``(3,)`` or ``(3, 3)``.
    """

    grid: Grid3
    time_grid: TimeGrid
    coeffs: np.ndarray
    solenoidal: bool = False
    symmetric: bool = False
    trace_free: bool = False

    def __post_init__(self):
        c = np.asarray(self.coeffs, dtype=np.complex128)
        rank = c.ndim - 4
        if rank not in (0, 1, 2):
            raise ValueError(f"unsupported coefficient array of dimension {c.ndim}")
        expected = (self.time_grid.samples,) + (3,) * rank + self.grid.spectral_shape
        if c.shape != expected:
            raise ValueError(f"coefficient shape {c.shape} does not match {expected}")
        if c.flags.writeable:
            c = c.view()
            c.setflags(write=False)
        object.__setattr__(self, "coeffs", c)

    @property
    def rank(self) -> int:
        return self.coeffs.ndim - 4

    @property
    def component_shape(self) -> tuple[int, ...]:
        return (3,) * self.rank

    def with_coeffs(self, coeffs: np.ndarray, **flags) -> "SpectralField":
        base = {"solenoidal": False, "symmetric": False, "trace_free": False}
        base.update(flags)
        return SpectralField(self.grid, self.time_grid, coeffs, **base)

    def component(self, *index: int) -> "SpectralField":
        c = self.coeffs[(slice(None),) + tuple(index)]
        return SpectralField(self.grid, self.time_grid, c)

    def _check_compatible(self, other: "SpectralField") -> None:
        _check_same(self, other)
        if self.rank != other.rank:
            raise ValueError("rank mismatch")

    def __add__(self, other: "SpectralField") -> "SpectralField":
        self._check_compatible(other)
        return self.with_coeffs(
            self.coeffs + other.coeffs,
            solenoidal=self.solenoidal and other.solenoidal,
            symmetric=self.symmetric and other.symmetric,
            trace_free=self.trace_free and other.trace_free,
        )

    def __sub__(self, other: "SpectralField") -> "SpectralField":
        return self + (-other)

    def __neg__(self) -> "SpectralField":
        return self.with_coeffs(
            -self.coeffs, solenoidal=self.solenoidal, symmetric=self.symmetric, trace_free=self.trace_free
        )

    def scale(self, factor) -> "SpectralField":
        """Multiply by a real scalar or by one real value per time sample."""
        fac = np.asarray(factor, dtype=float)
        if fac.ndim == 1:
            if fac.shape[0] != self.time_grid.samples:
                raise ValueError("per-time factor has the wrong length")
            fac = fac.reshape((-1,) + (1,) * (self.coeffs.ndim - 1))
        return self.with_coeffs(
            self.coeffs * fac, solenoidal=self.solenoidal, symmetric=self.symmetric, trace_free=self.trace_free
        )

    def __mul__(self, factor) -> "SpectralField":
        return self.scale(factor)

    __rmul__ = __mul__


def _check_same(f: SpectralField, g: SpectralField) -> None:
    if f.grid != g.grid or f.time_grid != g.time_grid:
        raise GridMismatchError("fields live on different grids")


def zeros(grid: Grid3, time_grid: TimeGrid, rank: int = 0, **flags) -> SpectralField:
    shape = (time_grid.samples,) + (3,) * rank + grid.spectral_shape
    return SpectralField(grid, time_grid, np.zeros(shape, dtype=np.complex128), **flags)


def _rfft(values: np.ndarray) -> np.ndarray:
    return sfft.rfftn(values, axes=(-3, -2, -1), norm="forward", workers=_WORKERS)


def _irfft(coeffs: np.ndarray, shape: tuple[int, int, int]) -> np.ndarray:
    return sfft.irfftn(coeffs, s=shape, axes=(-3, -2, -1), norm="forward", workers=_WORKERS)


def from_physical(values, grid: Grid3, time_grid: TimeGrid, **flags) -> SpectralField:
    """Transform physical samples of shape ``(S, *components, *grid.shape)``."""
    values = np.asarray(values, dtype=float)
    if values.shape[-3:] != grid.shape:
        raise ValueError(f"sample shape {values.shape} does not end with {grid.shape}")
    return SpectralField(grid, time_grid, _rfft(values), **flags)


transform_to_spectral = from_physical


def transform_to_physical(f: SpectralField, time_index: int | None = None) -> np.ndarray:
    """Physical samples with shape ``(S, *components, *grid.shape)``.

    With ``time_index`` only that sample is transformed and the leading axis
    is dropped.
    """
    if time_index is not None:
        return _irfft(f.coeffs[time_index], f.grid.shape)
    return _irfft(f.coeffs, f.grid.shape)


def _keep_flags(f: SpectralField) -> dict:
    return {"solenoidal": f.solenoidal, "symmetric": f.symmetric, "trace_free": f.trace_free}


def derivative(f: SpectralField, axis: int) -> SpectralField:
    """Spatial partial derivative along ``axis`` (0, 1 or 2)."""
    k = f.grid.wavenumbers()[axis] * _nyquist_factor(f.grid, axis)
    return f.with_coeffs(1j * k * f.coeffs, **_keep_flags(f))


def _ik(grid: Grid3) -> list[np.ndarray]:
    return [1j * grid.wavenumbers()[a] * _nyquist_factor(grid, a) for a in range(3)]


def gradient(f: SpectralField) -> SpectralField:
    """Gradient with the derivative index appended last: ``(grad v)_{ab} = d_b v_a``."""
    if f.rank > 1:
        raise ValueError("gradient supports scalar and vector fields")
    ik = _ik(f.grid)
    out = np.stack([ik[a] * f.coeffs for a in range(3)], axis=f.rank + 1)
    return f.with_coeffs(out)


def divergence(f: SpectralField) -> SpectralField:
    """Contract the last component index with the gradient."""
    if f.rank < 1:
        raise ValueError("divergence needs a vector or matrix field")
    ik = _ik(f.grid)
    out = sum(ik[b] * f.coeffs[(slice(None),) * f.rank + (b,)] for b in range(3))
    return f.with_coeffs(out)


def curl(v: SpectralField) -> SpectralField:
    if v.rank != 1:
        raise ValueError("curl needs a vector field")
    ik = _ik(v.grid)
    c = v.coeffs
    out = np.stack(
        [
            ik[1] * c[:, 2] - ik[2] * c[:, 1],
            ik[2] * c[:, 0] - ik[0] * c[:, 2],
            ik[0] * c[:, 1] - ik[1] * c[:, 0],
        ],
        axis=1,
    )
    return v.with_coeffs(out, solenoidal=True)


def laplacian(f: SpectralField) -> SpectralField:
    return f.with_coeffs(-_k_squared(f.grid) * f.coeffs, **_keep_flags(f))


def dealias(f: SpectralField) -> SpectralField:
    """Zero every mode outside the retained band."""
    return f.with_coeffs(f.coeffs * f.grid.retained_mask(), **_keep_flags(f))


def pointwise_product(f: SpectralField, g: SpectralField) -> SpectralField:
    """Dealiased pointwise product.

    Scalar times any field scales it; vector times vector gives the tensor
    product ``(f g^T)_{ab} = f_a g_b``.  Both inputs are truncated to the
    retained band, multiplied on the collocation grid and the result is
    truncated again, so the product is exact on the retained band.
    """
    _check_same(f, g)
    mask = f.grid.retained_mask()
    shape = f.grid.shape
    if f.rank == 0 or g.rank == 0:
        scal, other = (f, g) if f.rank == 0 else (g, f)
        s = _irfft(scal.coeffs * mask, shape)
        o = _irfft(other.coeffs * mask, shape)
        s = s.reshape(s.shape[:1] + (1,) * other.rank + s.shape[1:])
        return f.with_coeffs(_rfft(s * o) * mask, symmetric=other.symmetric and other.rank == 2)
    if f.rank == 1 and g.rank == 1:
        fp = _irfft(f.coeffs * mask, shape)
        same = g is f
        gp = fp if same else _irfft(g.coeffs * mask, shape)
        S = f.time_grid.samples
        out = np.empty((S, 3, 3) + f.grid.spectral_shape, dtype=np.complex128)
        for a in range(3):
            for b in range(3):
                if same and b < a:
                    out[:, a, b] = out[:, b, a]
                    continue
                out[:, a, b] = _rfft(fp[:, a] * gp[:, b]) * mask
        return f.with_coeffs(out, symmetric=same)
    raise ValueError(f"unsupported product of ranks {f.rank} and {g.rank}")


def dot(f: SpectralField, g: SpectralField) -> SpectralField:
    """Dealiased pointwise scalar product of two vector fields."""
    _check_same(f, g)
    if f.rank != 1 or g.rank != 1:
        raise ValueError("dot needs two vector fields")
    mask = f.grid.retained_mask()
    fp = _irfft(f.coeffs * mask, f.grid.shape)
    gp = fp if g is f else _irfft(g.coeffs * mask, f.grid.shape)
    return f.with_coeffs(_rfft(np.einsum("sa...,sa...->s...", fp, gp)) * mask)


def time_derivative(f: SpectralField) -> SpectralField:
    """Fourth-order finite-difference derivative in time.

    Centered five-point stencils are used in the interior and one-sided or
    skewed five-point stencils on the two samples nearest each endpoint, so
    polynomials of degree at most four are differentiated exactly.
    """
    S = f.time_grid.samples
    if S < 5:
        raise ValueError("time_derivative needs at least 5 time samples")
    c = f.coeffs
    h12 = 12.0 * f.time_grid.step
    out = np.empty_like(c)
    out[2 : S - 2] = (c[0 : S - 4] - 8.0 * c[1 : S - 3] + 8.0 * c[3 : S - 1] - c[4:S]) / h12
    out[0] = (-25.0 * c[0] + 48.0 * c[1] - 36.0 * c[2] + 16.0 * c[3] - 3.0 * c[4]) / h12
    out[1] = (-3.0 * c[0] - 10.0 * c[1] + 18.0 * c[2] - 6.0 * c[3] + c[4]) / h12
    out[S - 1] = (25.0 * c[S - 1] - 48.0 * c[S - 2] + 36.0 * c[S - 3] - 16.0 * c[S - 4] + 3.0 * c[S - 5]) / h12
    out[S - 2] = (3.0 * c[S - 1] + 10.0 * c[S - 2] - 18.0 * c[S - 3] + 6.0 * c[S - 4] - c[S - 5]) / h12
    return f.with_coeffs(out, **_keep_flags(f))


def space_mean(f: SpectralField) -> np.ndarray:
    """Spatial mean per time sample, shape ``(S, *components)``."""
    return f.coeffs[(Ellipsis, 0, 0, 0)].real.copy()


def resample(f: SpectralField, grid: Grid3) -> SpectralField:
    """Move a field to another grid without changing its absolute wavenumbers.

    Modes that do not exist on the target grid must be zero, otherwise a
    ``ValueError`` is raised.  Nyquist modes of the source are dropped.
    """
    if grid == f.grid:
        return f
    src = f.grid
    index = []
    for axis in range(3):
        n_src, s_src = src.modes_per_axis[axis], src.stride[axis]
        n_dst, s_dst = grid.modes_per_axis[axis], grid.stride[axis]
        if axis < 2:
            m_src = np.fft.fftfreq(n_src, 1.0 / n_src).astype(np.int64)
        else:
            m_src = np.arange(n_src // 2 + 1)
        k = m_src * s_src
        ok = (k % s_dst == 0) & (np.abs(m_src) < n_src // 2)
        m_dst = np.where(ok, k // s_dst, 0)
        ok &= np.abs(m_dst) < n_dst // 2
        dst_idx = np.where(m_dst >= 0, m_dst, m_dst + n_dst) if axis < 2 else m_dst
        index.append((np.nonzero(ok)[0], dst_idx[ok]))
    lead = (slice(None),) * (1 + f.rank)
    src_sel = f.coeffs[lead + np.ix_(index[0][0], index[1][0], index[2][0])]
    moved = np.abs(src_sel).sum()
    total = np.abs(f.coeffs).sum()
    if total - moved > 1e-13 * max(total, 1e-300) and total > 0:
        raise ValueError("field has content that the target grid cannot represent")
    out = np.zeros((f.time_grid.samples,) + f.component_shape + grid.spectral_shape, dtype=np.complex128)
    out[lead + np.ix_(index[0][1], index[1][1], index[2][1])] = src_sel
    return SpectralField(grid, f.time_grid, out, **_keep_flags(f))


def pointwise_magnitude(values: np.ndarray, rank: int) -> np.ndarray:
    """Absolute value, Euclidean norm or operator norm of physical samples.

    ``values`` has shape ``(S, *components, *grid)``; the result drops the
    component axes.
    """
    if rank == 0:
        return np.abs(values)
    if rank == 1:
        return np.sqrt(np.einsum("sa...,sa...->s...", values, values))
    mats = np.moveaxis(values, (1, 2), (-2, -1))
    sym = 0.5 * (mats + np.swapaxes(mats, -1, -2))
    if np.allclose(sym, mats, rtol=0, atol=1e-12 * max(np.abs(mats).max(), 1e-300)):
        return np.abs(np.linalg.eigvalsh(sym)).max(axis=-1)
    return np.linalg.norm(mats, ord=2, axis=(-2, -1))


_CHUNK = 1 << 20


def sup_norm(f: SpectralField, per_time: bool = False):
    """Maximum pointwise magnitude over the collocation samples.

    Works one time sample and one block of points at a time, so matrix
    fields on large grids do not need several full-size temporaries.
    """
    S = f.time_grid.samples
    per = np.zeros(S)
    for s in range(S):
        vals = transform_to_physical(f, time_index=s)
        flat = vals.reshape(f.component_shape + (-1,))
        for lo in range(0, flat.shape[-1], _CHUNK):
            block = flat[..., lo : lo + _CHUNK][None]
            per[s] = max(per[s], float(pointwise_magnitude(block, f.rank).max()))
    return per if per_time else float(per.max())


def integral_of_square(f: SpectralField) -> np.ndarray:
    """Per-time value of the integral of ``|f|^2`` over the torus."""
    npts = int(np.prod(f.grid.shape))
    out = np.empty(f.time_grid.samples)
    for s in range(f.time_grid.samples):
        vals = transform_to_physical(f, time_index=s).ravel()
        out[s] = (2.0 * np.pi) ** 3 * float(np.dot(vals, vals)) / npts
    return out


def hermitian_defect(f: SpectralField) -> float:
    """Largest violation of ``c(-k) = conj(c(k))`` on the self-conjugate planes."""
    n1, n2, n3 = f.grid.modes_per_axis
    worst = 0.0
    planes = [0] + ([n3 // 2] if n3 % 2 == 0 else [])
    i1 = (-np.arange(n1)) % n1
    i2 = (-np.arange(n2)) % n2
    for p in planes:
        c = f.coeffs[..., p]
        flipped = c[..., i1, :][..., i2]
        worst = max(worst, float(np.abs(c - np.conj(flipped)).max()))
    return worst

"""Exact Fourier-multiplier solution operators on the torus.

Every operator acts mode by mode, so identities such as ``div R v = v - mean v``
hold to rounding error rather than to a discretization error.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache
from typing import Callable

import numpy as np

from .spectral import Grid3, SpectralField, divergence

__all__ = [
    "MultiplierOp",
    "inverse_laplacian",
    "leray_Q",
    "leray_P",
    "inverse_divergence",
    "inverse_divergence_of_divergence",
    "INVERSE_LAPLACIAN",
    "LERAY_Q",
    "LERAY_P",
    "INVERSE_DIVERGENCE",
]


@lru_cache(maxsize=32)
def _inv_ksq(grid: Grid3) -> np.ndarray:
    k1, k2, k3 = grid.wavenumbers()
    ksq = (k1 * k1 + k2 * k2 + k3 * k3).astype(float)
    out = np.zeros_like(ksq)
    nz = ksq > 0
    out[nz] = 1.0 / ksq[nz]
    out.setflags(write=False)
    return out


@lru_cache(maxsize=32)
def _no_nyquist(grid: Grid3) -> np.ndarray:
    m1, m2, m3 = grid.index_wavenumbers()
    n1, n2, n3 = grid.modes_per_axis
    keep = (np.abs(m1) != n1 // 2) & (np.abs(m2) != n2 // 2) & (np.abs(m3) != n3 // 2)
    out = keep.astype(float)
    out.setflags(write=False)
    return out


def _kvec(grid: Grid3) -> list[np.ndarray]:
    return [k.astype(float) for k in grid.wavenumbers()]


def inverse_laplacian(f: SpectralField) -> SpectralField:
    """Mean-zero solution of ``Laplace(phi) = f - mean(f)``, componentwise."""
    return f.with_coeffs(-f.coeffs * _inv_ksq(f.grid), symmetric=f.symmetric, trace_free=f.trace_free)


def _q_coeffs(v: SpectralField) -> np.ndarray:
    k = _kvec(v.grid)
    inv = _inv_ksq(v.grid)
    c = v.coeffs
    kdotv = k[0] * c[:, 0] + k[1] * c[:, 1] + k[2] * c[:, 2]
    proj = kdotv * inv
    out = np.stack([k[a] * proj for a in range(3)], axis=1)
    out[:, :, 0, 0, 0] = c[:, :, 0, 0, 0]
    return out


def leray_Q(v: SpectralField) -> SpectralField:
    """Gradient part plus mean: ``Qv = grad(phi) + mean(v)`` with ``Laplace(phi) = div v``."""
    if v.rank != 1:
        raise ValueError("leray_Q needs a vector field")
    return v.with_coeffs(_q_coeffs(v))


def leray_P(v: SpectralField) -> SpectralField:
    """Projection onto mean-zero divergence-free fields, ``P = I - Q``."""
    if v.rank != 1:
        raise ValueError("leray_P needs a vector field")
    return v.with_coeffs(v.coeffs - _q_coeffs(v), solenoidal=True)


def _r_from_u(grid: Grid3, u: np.ndarray) -> np.ndarray:
    """Assemble the inverse-divergence matrix from ``u`` with ``Laplace(u) = v``."""
    k = _kvec(grid)
    inv = _inv_ksq(grid)
    kdotu = k[0] * u[:, 0] + k[1] * u[:, 1] + k[2] * u[:, 2]
    pu = [u[:, a] - k[a] * kdotu * inv for a in range(3)]
    S = u.shape[0]
    out = np.empty((S, 3, 3) + grid.spectral_shape, dtype=np.complex128)
    for a in range(3):
        for b in range(a, 3):
            entry = 0.25j * (k[b] * pu[a] + k[a] * pu[b]) + 0.75j * (k[b] * u[:, a] + k[a] * u[:, b])
            if a == b:
                entry = entry - 0.5j * kdotu
            out[:, a, b] = entry
            if b != a:
                out[:, b, a] = entry
    out *= _no_nyquist(grid)
    return out


def inverse_divergence(v: SpectralField) -> SpectralField:
    """Symmetric trace-free matrix field ``Rv`` with ``div(Rv) = v - mean(v)``.

    With ``u`` the mean-zero solution of ``Laplace(u) = v - mean(v)``,

    ``Rv = 1/4 (grad Pu + grad Pu^T) + 3/4 (grad u + grad u^T) - 1/2 (div u) Id``.
    """
    if v.rank != 1:
        raise ValueError("inverse_divergence needs a vector field")
    u = -v.coeffs * _inv_ksq(v.grid)
    return v.with_coeffs(_r_from_u(v.grid, u), symmetric=True, trace_free=True)


def inverse_divergence_of_divergence(A: SpectralField, project: bool = False) -> SpectralField:
    """Fused ``R(div A)``, or ``R(Q(div A))`` when ``project`` is true."""
    if A.rank != 2:
        raise ValueError("inverse_divergence_of_divergence needs a matrix field")
    d = divergence(A)
    if project:
        d = leray_Q(d)
    return inverse_divergence(d)


@dataclass(frozen=True)
class MultiplierOp:
    """A named Fourier multiplier.

    ``kernel(k)`` returns the complex matrix acting on the coefficient of the
    integer wavevector ``k``; ``apply`` acts on a whole field.
    """

    name: str
    kernel: Callable[[np.ndarray], np.ndarray]
    apply: Callable[[SpectralField], SpectralField]

    def __call__(self, f: SpectralField) -> SpectralField:
        return self.apply(f)


def _kernel_inverse_laplacian(k) -> np.ndarray:
    k = np.asarray(k, dtype=float)
    ksq = k @ k
    return np.array([[0.0 if ksq == 0 else -1.0 / ksq]], dtype=complex)


def _kernel_Q(k) -> np.ndarray:
    k = np.asarray(k, dtype=float)
    ksq = k @ k
    if ksq == 0:
        return np.eye(3, dtype=complex)
    return (np.outer(k, k) / ksq).astype(complex)


def _kernel_P(k) -> np.ndarray:
    return np.eye(3, dtype=complex) - _kernel_Q(k)


def _kernel_R(k) -> np.ndarray:
    """Matrix of shape (3, 3, 3) mapping a vector coefficient to a matrix coefficient."""
    k = np.asarray(k, dtype=float)
    ksq = k @ k
    out = np.zeros((3, 3, 3), dtype=complex)
    if ksq == 0:
        return out
    P = np.eye(3) - np.outer(k, k) / ksq
    for c in range(3):
        u = -np.eye(3)[c] / ksq
        pu = P @ u
        grad_pu = 1j * np.outer(pu, k)
        grad_u = 1j * np.outer(u, k)
        out[:, :, c] = 0.25 * (grad_pu + grad_pu.T) + 0.75 * (grad_u + grad_u.T) - 0.5j * (k @ u) * np.eye(3)
    return out


INVERSE_LAPLACIAN = MultiplierOp("inverse_laplacian", _kernel_inverse_laplacian, inverse_laplacian)
LERAY_Q = MultiplierOp("leray_Q", _kernel_Q, leray_Q)
LERAY_P = MultiplierOp("leray_P", _kernel_P, leray_P)
INVERSE_DIVERGENCE = MultiplierOp("inverse_divergence", _kernel_R, inverse_divergence)

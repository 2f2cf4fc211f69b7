"""Beltrami flows built from a single lattice shell ``{k in Z^3 : |k| = lambda0}``."""

from __future__ import annotations

from dataclasses import dataclass
from math import gcd, isqrt

import numpy as np

from .spectral import Grid3, SpectralField, TimeGrid

__all__ = [
    "EmptyShellError",
    "lattice_shell",
    "canonical",
    "BeltramiBasis",
    "BeltramiCoefficients",
    "build_basis",
    "random_coefficients",
    "assemble_flow",
    "mean_stress",
]


class EmptyShellError(ValueError):
    """Raised when a shell has no usable lattice points."""


def lattice_shell(lambda0: int) -> np.ndarray:
    """All integer vectors of Euclidean length ``lambda0``, lexicographically sorted."""
    r2 = int(lambda0) ** 2
    pts = []
    for a in range(-lambda0, lambda0 + 1):
        rem_a = r2 - a * a
        for b in range(-isqrt(rem_a), isqrt(rem_a) + 1):
            rem = rem_a - b * b
            c = isqrt(rem)
            if c * c == rem:
                pts.append((a, b, c))
                if c:
                    pts.append((a, b, -c))
    pts.sort()
    return np.array(pts, dtype=np.int64).reshape(-1, 3)


def canonical(k) -> tuple[int, int, int]:
    """Representative of ``{k, -k}`` whose first nonzero entry is positive."""
    k = tuple(int(x) for x in k)
    for x in k:
        if x:
            return k if x > 0 else tuple(-y for y in k)  # type: ignore[return-value]
    return k  # type: ignore[return-value]


def _amplitude_vector(k: tuple[int, int, int]) -> np.ndarray:
    kk = np.array(canonical(k), dtype=float)
    for axis in range(3):
        e = np.zeros(3)
        e[axis] = 1.0
        c = np.cross(kk, e)
        n = np.linalg.norm(c)
        if n > 0:
            return c / (n * np.sqrt(2.0))
    raise EmptyShellError("zero wavevector")


@dataclass(frozen=True, eq=False)
class BeltramiBasis:
    """Vectors ``A_k`` and ``B_k = A_k + i (k/|k|) x A_k`` for one shell.

    Rows of ``ks``, ``A`` and ``B`` are aligned.
    """

    lambda0: int
    ks: np.ndarray
    A: np.ndarray
    B: np.ndarray

    def __post_init__(self):
        index = {tuple(int(x) for x in k): i for i, k in enumerate(self.ks)}
        object.__setattr__(self, "_index", index)
        for arr in (self.ks, self.A, self.B):
            arr.setflags(write=False)

    def __len__(self) -> int:
        return len(self.ks)

    def index(self, k) -> int:
        return self._index[tuple(int(x) for x in k)]  # type: ignore[attr-defined]

    def opposite(self) -> np.ndarray:
        """Row index of ``-k`` for every row ``k``."""
        return np.array([self.index(-k) for k in self.ks])


def build_basis(lambda0: int) -> BeltramiBasis:
    """Deterministic Beltrami vectors on the shell of radius ``lambda0``."""
    lambda0 = int(lambda0)
    if lambda0 < 1:
        raise EmptyShellError("lambda0 must be a positive integer")
    ks = lattice_shell(lambda0)
    if len(ks) == 0:
        raise EmptyShellError(f"empty shell: no lattice points of norm {lambda0}")
    if not any(gcd(gcd(abs(int(a)), abs(int(b))), abs(int(c))) == 1 for a, b, c in ks):
        raise EmptyShellError(f"shell of radius {lambda0} has no primitive lattice points")
    A = np.array([_amplitude_vector(tuple(k)) for k in ks])
    khat = ks / float(lambda0)
    B = A + 1j * np.cross(khat, A)
    return BeltramiBasis(lambda0, ks, A, B)


@dataclass(frozen=True, eq=False)
class BeltramiCoefficients:
    """Amplitudes ``a_k`` aligned with the rows of a basis; ``a_{-k} = conj(a_k)``."""

    basis: BeltramiBasis
    a: np.ndarray

    def __post_init__(self):
        a = np.asarray(self.a, dtype=np.complex128)
        if a.shape[-1] != len(self.basis):
            raise ValueError("coefficient count does not match the shell")
        opp = self.basis.opposite()
        scale = max(float(np.abs(a).max(initial=0.0)), 1e-300)
        if np.abs(a[..., opp] - np.conj(a)).max(initial=0.0) > 1e-12 * scale:
            raise ValueError("coefficients violate the reality condition a_{-k} = conj(a_k)")
        a = a.copy()
        a.setflags(write=False)
        object.__setattr__(self, "a", a)


def random_coefficients(basis: BeltramiBasis, rng: np.random.Generator) -> BeltramiCoefficients:
    """Random complex amplitudes satisfying the reality condition."""
    a = np.zeros(len(basis), dtype=np.complex128)
    for i, k in enumerate(basis.ks):
        if canonical(k) == tuple(int(x) for x in k):
            a[i] = rng.standard_normal() + 1j * rng.standard_normal()
    opp = basis.opposite()
    for i, k in enumerate(basis.ks):
        if canonical(k) != tuple(int(x) for x in k):
            a[i] = np.conj(a[opp[i]])
    return BeltramiCoefficients(basis, a)


def assemble_flow(
    basis: BeltramiBasis,
    coeffs: BeltramiCoefficients,
    grid: Grid3,
    time_grid: TimeGrid = TimeGrid(2),
    scale: int = 1,
) -> SpectralField:
    """Spectral field of ``W(x) = sum_k a_k B_k exp(i scale k.x)``.

    ``coeffs.a`` may be one amplitude per wavevector (a stationary flow) or an
    array of shape ``(S, n)`` giving amplitudes per time sample.
    """
    S = time_grid.samples
    a = np.broadcast_to(coeffs.a, (S, len(basis)))
    out = np.zeros((S, 3) + grid.spectral_shape, dtype=np.complex128)
    n1, n2, _ = grid.modes_per_axis
    s1, s2, s3 = grid.stride
    for i, k in enumerate(basis.ks):
        kk = [int(x) * scale for x in k]
        if not grid.holds_wavevector(kk):
            raise ValueError(f"grid does not resolve the wavevector {tuple(kk)}")
        if kk[2] < 0:
            continue
        i1, i2, i3 = (kk[0] // s1) % n1, (kk[1] // s2) % n2, kk[2] // s3
        out[:, :, i1, i2, i3] += a[:, i, None] * basis.B[i][None, :]
    return SpectralField(grid, time_grid, out, solenoidal=True)


def mean_stress(basis: BeltramiBasis, coeffs: BeltramiCoefficients) -> np.ndarray:
    """Closed-form spatial mean of ``W (x) W``: ``1/2 sum |a_k|^2 (Id - khat khat^T)``."""
    khat = basis.ks / float(basis.lambda0)
    w = np.abs(coeffs.a) ** 2
    return 0.5 * (np.einsum("...n,n->...", w, np.ones(len(basis)))[..., None, None] * np.eye(3)
                  - np.einsum("...n,na,nb->...ab", w, khat, khat))

"""Velocity-space partition of unity and the associated phase functions.

Velocity space is covered by bumps ``phi(v - l)`` centred at the lattice
points ``l``.  Normalizing by ``psi = sum_m phi(v - m)^2`` gives functions
``alpha_l`` with ``sum_l alpha_l^2 = 1``.  Lattice points are grouped into
eight classes by the parities of their coordinates; within one class the
bumps have disjoint supports, so at every velocity each class has at most
one active lattice point.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

__all__ = ["smooth_step", "PhasePartition", "class_index", "CLASS_PARITIES"]

CLASS_PARITIES = np.array([[(j >> 0) & 1, (j >> 1) & 1, (j >> 2) & 1] for j in range(8)], dtype=np.int64)
"""Parity vector of class ``j``; class ``j`` holds the ``l`` with ``l mod 2 == CLASS_PARITIES[j]``."""


def class_index(l) -> int:
    """Class of the lattice point ``l``, an integer in ``0..7``."""
    l = np.asarray(l, dtype=np.int64)
    p = np.mod(l, 2)
    return int(p[..., 0] + 2 * p[..., 1] + 4 * p[..., 2])


def _ramp(s: np.ndarray) -> np.ndarray:
    out = np.zeros_like(s, dtype=float)
    pos = s > 0
    out[pos] = np.exp(-1.0 / s[pos])
    return out


def smooth_step(s) -> np.ndarray:
    """Smooth monotone step: 0 for ``s <= 0``, 1 for ``s >= 1``."""
    s = np.asarray(s, dtype=float)
    a = _ramp(s)
    b = _ramp(1.0 - s)
    return a / (a + b)


@dataclass(frozen=True)
class PhasePartition:
    """Partition of unity with bump radii ``c1 < c2`` and lattice scale ``mu``."""

    mu: int
    c1: float = 0.90
    c2: float = 0.95

    def __post_init__(self):
        if not np.sqrt(3.0) / 2.0 < self.c1 < self.c2 < 1.0:
            raise ValueError("need sqrt(3)/2 < c1 < c2 < 1")
        if int(self.mu) != self.mu or self.mu < 1:
            raise ValueError("mu must be a positive integer")

    def mollifier(self, v) -> np.ndarray:
        """Radial bump equal to 1 on the ball of radius c1, zero outside radius c2."""
        v = np.asarray(v, dtype=float)
        r2 = np.einsum("...a,...a->...", v, v)
        return smooth_step((self.c2**2 - r2) / (self.c2**2 - self.c1**2))

    def candidates(self, w) -> np.ndarray:
        """For points ``w`` (already scaled by mu), the unique possibly active
        lattice point of each class, shape ``(..., 8, 3)``."""
        w = np.asarray(w, dtype=float)
        base = np.floor(w).astype(np.int64)
        offs = np.mod(CLASS_PARITIES - base[..., None, :], 2)
        return base[..., None, :] + offs

    def class_amplitudes(self, v) -> tuple[np.ndarray, np.ndarray]:
        """``alpha_{l_j}(mu v)`` and ``l_j`` for the eight classes.

        Returns arrays of shapes ``(..., 8)`` and ``(..., 8, 3)``.  Any lattice
        point other than the eight candidates lies at distance at least 1 from
        ``mu v`` and therefore carries a zero bump.
        """
        w = self.mu * np.asarray(v, dtype=float)
        ls = self.candidates(w)
        bumps = self.mollifier(w[..., None, :] - ls)
        psi = np.einsum("...j,...j->...", bumps, bumps)
        return bumps / np.sqrt(psi)[..., None], ls

    def alpha(self, l, v) -> np.ndarray:
        """``alpha_l(v) = phi(v - l) / sqrt(psi(v))`` (no mu scaling)."""
        v = np.asarray(v, dtype=float)
        l = np.asarray(l, dtype=float)
        bumps = self.mollifier(v[..., None, :] - self.candidates(v))
        psi = np.einsum("...j,...j->...", bumps, bumps)
        return self.mollifier(v - l) / np.sqrt(psi)

    def phi(self, j: int, k, v, tau) -> np.ndarray:
        """Phase function ``sum_{l in C_j} alpha_l(mu v) exp(-i k.l tau / mu)``."""
        amp, ls = self.class_amplitudes(v)
        l = ls[..., j, :]
        kl = l @ np.asarray(k, dtype=float)
        return amp[..., j] * np.exp(-1j * kl * np.asarray(tau, dtype=float) / self.mu)

    def transport_defect(self, j: int, k, v, tau) -> np.ndarray:
        """``i k.(v - l/mu) phi`` with ``l`` the active point of class ``j``."""
        v = np.asarray(v, dtype=float)
        _, ls = self.class_amplitudes(v)
        l = ls[..., j, :]
        rel = (v - l / self.mu) @ np.asarray(k, dtype=float)
        return 1j * rel * self.phi(j, k, v, tau)

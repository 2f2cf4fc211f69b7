import numpy as np
import pytest

from cvxeuler.beltrami import (
    BeltramiCoefficients,
    EmptyShellError,
    assemble_flow,
    build_basis,
    canonical,
    lattice_shell,
    mean_stress,
    random_coefficients,
)
from cvxeuler.spectral import (
    Grid3,
    TimeGrid,
    curl,
    divergence,
    dot,
    gradient,
    pointwise_product,
    space_mean,
)


class TestShell:
    @pytest.mark.parametrize("lam0, count", [(1, 6), (3, 30), (5, 30), (9, 102)])
    def test_counts(self, lam0, count):
        # r_3(1) = 6, r_3(9) = 30, r_3(25) = 30, r_3(81) = 102
        assert len(lattice_shell(lam0)) == count

    def test_points_on_sphere_and_symmetric(self):
        ks = lattice_shell(5)
        assert np.all((ks**2).sum(axis=1) == 25)
        as_set = {tuple(k) for k in ks}
        assert all(tuple(-k) in as_set for k in ks)

    def test_canonical(self):
        assert canonical((0, -2, 1)) == (0, 2, -1)
        assert canonical((3, -4, 0)) == (3, -4, 0)


class TestBasis:
    def test_vectors(self):
        b = build_basis(5)
        khat = b.ks / 5.0
        assert np.allclose(np.einsum("na,na->n", b.A, khat), 0)
        assert np.allclose(np.linalg.norm(b.A, axis=1), 1 / np.sqrt(2))
        assert np.allclose(1j * np.cross(khat, b.B), b.B)

    def test_example_amplitude(self):
        b = build_basis(5)
        assert np.allclose(b.A[b.index((3, 4, 0))], [0, 0, -1 / np.sqrt(2)])

    def test_opposite_pairs_conjugate(self):
        b = build_basis(3)
        opp = b.opposite()
        assert np.allclose(b.B[opp], np.conj(b.B))

    def test_no_primitive_points(self):
        # every point of norm 2 is twice a unit vector
        with pytest.raises(EmptyShellError):
            build_basis(2)

    def test_empty_shell(self):
        with pytest.raises(EmptyShellError):
            build_basis(0)


class TestCoefficients:
    def test_reality_enforced(self):
        b = build_basis(1)
        a = np.zeros(len(b), dtype=complex)
        a[0] = 1.0
        with pytest.raises(ValueError):
            BeltramiCoefficients(b, a)


class TestFlows:
    @pytest.mark.parametrize("lam0", [1, 5])
    def test_identities(self, lam0, rng):
        b = build_basis(lam0)
        g = Grid3(8 * lam0 if lam0 > 1 else 8)
        c = random_coefficients(b, rng)
        W = assemble_flow(b, c, g)
        scale = np.abs(W.coeffs).max()
        assert np.abs(curl(W).coeffs - lam0 * W.coeffs).max() < 1e-12 * lam0 * scale
        assert np.abs(divergence(W).coeffs).max() < 1e-12 * lam0 * scale
        lhs = divergence(pointwise_product(W, W)).coeffs
        rhs = gradient(dot(W, W)).coeffs / 2
        assert np.abs(lhs - rhs).max() < 1e-12 * lam0 * scale**2
        assert np.abs(space_mean(pointwise_product(W, W))[0] - mean_stress(b, c)).max() < 1e-12 * scale**2

    def test_scaled_assembly_on_stride_grid(self, rng):
        b = build_basis(3)
        c = random_coefficients(b, rng)
        g = Grid3(24, stride=4)
        W = assemble_flow(b, c, g, TimeGrid(2), scale=4)
        assert np.abs(curl(W).coeffs - 12 * W.coeffs).max() < 1e-12 * np.abs(W.coeffs).max()

    def test_unresolved_raises(self, rng):
        b = build_basis(5)
        with pytest.raises(ValueError):
            assemble_flow(b, random_coefficients(b, rng), Grid3(8))

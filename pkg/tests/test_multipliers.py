import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from cvxeuler.multipliers import (
    INVERSE_DIVERGENCE,
    LERAY_P,
    LERAY_Q,
    inverse_divergence,
    inverse_divergence_of_divergence,
    inverse_laplacian,
    leray_P,
    leray_Q,
)
from cvxeuler.spectral import Grid3, TimeGrid, divergence, from_physical, laplacian, space_mean, transform_to_physical

from .conftest import random_field


def rel(a, b):
    return np.abs(a - b).max() / max(np.abs(b).max(), 1e-300)


class TestInverseLaplacian:
    def test_solves_poisson(self, grid16, rng):
        f = random_field(grid16, TimeGrid(2), 0, rng)
        u = inverse_laplacian(f)
        target = f.coeffs.copy()
        target[:, 0, 0, 0] = 0
        assert rel(laplacian(u).coeffs, target) < 1e-13
        assert np.abs(space_mean(u)).max() == 0


class TestLeray:
    @settings(max_examples=15, deadline=None)
    @given(seed=st.integers(0, 2**32 - 1))
    def test_projections(self, seed):
        rng = np.random.default_rng(seed)
        g = Grid3(12)
        v = random_field(g, TimeGrid(2), 1, rng)
        P, Q = leray_P(v), leray_Q(v)
        assert rel(P.coeffs + Q.coeffs, v.coeffs) < 1e-13
        assert rel(leray_P(P).coeffs, P.coeffs) < 1e-13
        assert np.abs(divergence(P).coeffs).max() < 1e-12 * np.abs(v.coeffs).max()
        assert np.abs(space_mean(P)).max() < 1e-15

    def test_q_keeps_mean(self, grid16):
        vals = np.ones((2, 3) + grid16.shape)
        v = from_physical(vals, grid16, TimeGrid(2))
        assert np.allclose(leray_Q(v).coeffs, v.coeffs)
        assert np.abs(leray_P(v).coeffs).max() < 1e-15


class TestInverseDivergence:
    @settings(max_examples=15, deadline=None)
    @given(seed=st.integers(0, 2**32 - 1))
    def test_right_inverse(self, seed):
        rng = np.random.default_rng(seed)
        g = Grid3(12)
        v = random_field(g, TimeGrid(2), 1, rng)
        R = inverse_divergence(v)
        target = v.coeffs.copy()
        target[:, :, 0, 0, 0] = 0
        assert rel(divergence(R).coeffs, target) < 1e-12
        vals = transform_to_physical(R)
        assert np.abs(vals - np.swapaxes(vals, 1, 2)).max() < 1e-13 * np.abs(vals).max()
        assert np.abs(vals[:, 0, 0] + vals[:, 1, 1] + vals[:, 2, 2]).max() < 1e-13 * np.abs(vals).max()

    def test_closed_form_single_mode(self):
        # v = (0, sin x1, 0) has u = -v and R v with R_12 = R_21 = -cos(x1)
        g = Grid3(16)
        x1, _, _ = g.coordinates()
        vals = np.zeros((2, 3) + g.shape)
        vals[:, 1] = np.sin(x1)
        R = transform_to_physical(inverse_divergence(from_physical(vals, g, TimeGrid(2))))
        assert np.allclose(R[0, 0, 1], np.broadcast_to(-np.cos(x1), g.shape), atol=1e-13)
        assert np.abs(R[0, 0, 0]).max() < 1e-13

    def test_fused_matches_composition(self, grid16, rng):
        A = random_field(grid16, TimeGrid(2), 2, rng)
        assert rel(inverse_divergence_of_divergence(A).coeffs, inverse_divergence(divergence(A)).coeffs) < 1e-15
        assert rel(
            inverse_divergence_of_divergence(A, project=True).coeffs,
            inverse_divergence(leray_Q(divergence(A))).coeffs,
        ) < 1e-15


class TestKernels:
    @pytest.mark.parametrize("op", [LERAY_P, LERAY_Q, INVERSE_DIVERGENCE])
    def test_conjugate_symmetry(self, op):
        k = np.array([2.0, -1.0, 3.0])
        assert np.allclose(op.kernel(-k), np.conj(op.kernel(k)))

    def test_p_kernel_projects(self):
        k = np.array([1.0, 2.0, 2.0])
        P = LERAY_P.kernel(k)
        assert np.allclose(P @ k, 0)
        assert np.allclose(P @ P, P)

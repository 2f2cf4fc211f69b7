import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from cvxeuler.partition import PhasePartition, class_index, smooth_step


class TestSmoothStep:
    def test_limits_and_monotone(self):
        s = np.linspace(-1, 2, 301)
        f = smooth_step(s)
        assert np.all(f[s <= 0] == 0) and np.all(f[s >= 1] == 1)
        assert np.all(np.diff(f) >= 0)
        assert smooth_step(0.5) == pytest.approx(0.5)


class TestPartition:
    def test_class_index(self):
        assert class_index((0, 0, 0)) == 0
        assert class_index((1, 0, 0)) == 1
        assert class_index((-1, 2, 3)) == 5

    def test_rejects_bad_radii(self):
        with pytest.raises(ValueError):
            PhasePartition(4, c1=0.8)
        with pytest.raises(ValueError):
            PhasePartition(0)

    @settings(max_examples=30, deadline=None)
    @given(mu=st.integers(1, 64), seed=st.integers(0, 2**32 - 1))
    def test_sum_of_squares_is_one(self, mu, seed):
        rng = np.random.default_rng(seed)
        v = rng.uniform(-3, 3, (500, 3))
        amp, ls = PhasePartition(mu).class_amplitudes(v)
        assert np.allclose((amp**2).sum(axis=-1), 1.0, atol=1e-14)
        for j in range(8):
            assert np.all([class_index(l) == j for l in ls[:50, j]])

    def test_other_lattice_points_inactive(self, rng):
        part = PhasePartition(1)
        w = rng.uniform(-2, 2, (2000, 3))
        cand = part.candidates(w)
        for off in [(2, 0, 0), (0, -2, 0), (0, 0, 2)]:
            # the same-class neighbours of each candidate are at distance >= 1
            other = cand + np.array(off)
            assert np.all(part.mollifier(w[:, None, :] - other) == 0)

    def test_phase_modulus(self, rng):
        part = PhasePartition(8)
        v = rng.uniform(-1, 1, (100, 3))
        total = sum(np.abs(part.phi(j, (9, 0, 0), v, 0.3)) ** 2 for j in range(8))
        assert np.allclose(total, 1.0)


class TestTransportDefect:
    def test_matches_material_derivative(self, rng):
        # phi(v, tau) with tau -> tau + h and v held fixed: d/dtau phi = -i k.l/mu phi.
        # The defect adds i k.v phi, so defect = d/dtau phi + i k.v phi.
        part = PhasePartition(4)
        k = np.array([1.0, 4.0, 8.0])
        v = rng.uniform(-1, 1, (50, 3))
        tau, h = 0.7, 1e-4
        d = (
            -part.phi(2, k, v, tau + 2 * h)
            + 8 * part.phi(2, k, v, tau + h)
            - 8 * part.phi(2, k, v, tau - h)
            + part.phi(2, k, v, tau - 2 * h)
        ) / (12 * h)
        expected = d + 1j * (v @ k) * part.phi(2, k, v, tau)
        assert np.abs(part.transport_defect(2, k, v, tau) - expected).max() < 1e-8

    def test_bounded_by_k_over_mu(self, rng):
        k = np.array([0.0, 0.0, 9.0])
        bounds = []
        for mu in (2, 4, 8, 16, 32):
            part = PhasePartition(mu)
            v = rng.uniform(-2, 2, (20000, 3))
            bounds.append(np.abs(part.transport_defect(0, k, v, 0.4)).max())
        slope = np.polyfit(np.log([2, 4, 8, 16, 32]), np.log(bounds), 1)[0]
        assert slope == pytest.approx(-1.0, abs=0.1)
        assert all(b <= 9 * np.sqrt(3) / mu for b, mu in zip(bounds, (2, 4, 8, 16, 32)))

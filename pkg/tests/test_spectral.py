import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from cvxeuler.spectral import (
    Grid3,
    SpectralField,
    TimeGrid,
    curl,
    dealias,
    derivative,
    divergence,
    dot,
    from_physical,
    gradient,
    hermitian_defect,
    integral_of_square,
    laplacian,
    pointwise_product,
    resample,
    space_mean,
    sup_norm,
    time_derivative,
    transform_to_physical,
    zeros,
)

from .conftest import random_field


def scalar(grid, func, samples=2):
    x1, x2, x3 = grid.coordinates()
    vals = np.broadcast_to(func(x1, x2, x3), grid.shape)
    return from_physical(np.broadcast_to(vals, (samples,) + grid.shape), grid, TimeGrid(samples))


class TestGrid:
    def test_rejects_odd_and_small(self):
        with pytest.raises(ValueError):
            Grid3(15)
        with pytest.raises(ValueError):
            Grid3(6)

    def test_band_two_thirds(self):
        assert Grid3(32).band == (10, 10, 10)
        assert Grid3(36, stride=8).resolved_wavenumber == (96, 96, 96)

    def test_holds_wavevector(self):
        g = Grid3(36, stride=4)
        assert g.holds_wavevector((48, -4, 0))
        assert not g.holds_wavevector((2, 0, 0))
        assert not g.holds_wavevector((52, 0, 0))

    def test_dict_round_trip(self):
        g = Grid3((24, 8, 10), stride=(1, 3, 3))
        assert Grid3.from_dict(g.to_dict()) == g

    def test_time_grid(self):
        assert TimeGrid(5).times.tolist() == [0.0, 0.25, 0.5, 0.75, 1.0]
        with pytest.raises(ValueError):
            TimeGrid(1)


class TestTransforms:
    def test_round_trip(self, grid16, rng):
        vals = rng.standard_normal((2, 3) + grid16.shape)
        f = from_physical(vals, grid16, TimeGrid(2))
        assert np.allclose(transform_to_physical(f), vals, atol=1e-13)

    def test_mean_is_zero_mode(self, grid16):
        f = scalar(grid16, lambda x, y, z: 2.5 + np.sin(x) * np.cos(2 * z))
        assert np.allclose(space_mean(f), 2.5, atol=1e-14)

    def test_real_fields_are_hermitian(self, grid16, rng):
        f = random_field(grid16, TimeGrid(2), 1, rng)
        assert hermitian_defect(f) < 1e-14

    def test_coefficients_read_only(self, grid16):
        f = zeros(grid16, TimeGrid(2), 1)
        with pytest.raises(ValueError):
            f.coeffs[0, 0, 0, 0, 0] = 1.0

    def test_shape_validation(self, grid16):
        with pytest.raises(ValueError):
            SpectralField(grid16, TimeGrid(2), np.zeros((2, 16, 16, 16)))


class TestCalculus:
    def test_derivative_of_mode(self):
        g = Grid3(16)
        f = scalar(g, lambda x, y, z: np.sin(3 * x) * np.cos(2 * y))
        d = transform_to_physical(derivative(f, 0))
        x, y, z = g.coordinates()
        assert np.allclose(d[0], np.broadcast_to(3 * np.cos(3 * x) * np.cos(2 * y), g.shape), atol=1e-12)

    def test_stride_grid_derivative(self):
        g = Grid3(12, stride=5)
        f = scalar(g, lambda x, y, z: np.sin(10 * x + 5 * z))
        d = transform_to_physical(derivative(f, 2))
        x, y, z = g.coordinates()
        assert np.allclose(d[0], np.broadcast_to(5 * np.cos(10 * x + 5 * z), g.shape), atol=1e-12)

    def test_laplacian_eigenvalue(self):
        g = Grid3(16)
        f = scalar(g, lambda x, y, z: np.cos(x + 2 * y - z))
        assert np.allclose(laplacian(f).coeffs, -6 * f.coeffs, atol=1e-14)

    def test_gradient_index_order(self):
        g = Grid3(16)
        x, y, z = g.coordinates()
        vals = np.zeros((2, 3) + g.shape)
        vals[:, 0] = np.sin(y)
        G = transform_to_physical(gradient(from_physical(vals, g, TimeGrid(2))))
        assert np.allclose(G[0, 0, 1], np.broadcast_to(np.cos(y), g.shape), atol=1e-12)
        assert np.abs(G[0, 1, 0]).max() < 1e-12

    @settings(max_examples=20, deadline=None)
    @given(seed=st.integers(0, 2**32 - 1))
    def test_div_curl_and_curl_grad_vanish(self, seed):
        rng = np.random.default_rng(seed)
        g = Grid3(12)
        v = random_field(g, TimeGrid(2), 1, rng)
        p = random_field(g, TimeGrid(2), 0, rng)
        assert np.abs(divergence(curl(v)).coeffs).max() < 1e-12
        assert np.abs(curl(gradient(p)).coeffs).max() < 1e-12


class TestProducts:
    def test_exact_product_of_modes(self):
        g = Grid3(24)
        f = scalar(g, lambda x, y, z: np.sin(3 * x))
        h = scalar(g, lambda x, y, z: np.cos(4 * x + y))
        prod = transform_to_physical(pointwise_product(f, h))
        x, y, z = g.coordinates()
        exact = np.broadcast_to(np.sin(3 * x) * np.cos(4 * x + y), g.shape)
        assert np.abs(prod[0] - exact).max() < 1e-12

    def test_product_with_one_is_truncation(self, grid16, rng):
        g = grid16
        vals = rng.standard_normal((2,) + g.shape)
        f = from_physical(vals, g, TimeGrid(2))
        one = scalar(g, lambda x, y, z: np.ones_like(x))
        assert np.allclose(pointwise_product(one, f).coeffs, dealias(f).coeffs, atol=1e-14)

    def test_tensor_layout_and_symmetry(self, grid16, rng):
        v = random_field(grid16, TimeGrid(2), 1, rng)
        w = random_field(grid16, TimeGrid(2), 1, rng)
        vw = pointwise_product(v, w)
        wv = pointwise_product(w, v)
        assert np.allclose(vw.coeffs, np.swapaxes(wv.coeffs, 1, 2), atol=1e-13)
        assert pointwise_product(v, v).symmetric

    def test_dot_matches_trace(self, grid16, rng):
        v = random_field(grid16, TimeGrid(2), 1, rng)
        vv = pointwise_product(v, v).coeffs
        assert np.allclose(dot(v, v).coeffs, vv[:, 0, 0] + vv[:, 1, 1] + vv[:, 2, 2], atol=1e-13)

    def test_commutative(self, grid16, rng):
        a = random_field(grid16, TimeGrid(2), 0, rng)
        b = random_field(grid16, TimeGrid(2), 0, rng)
        assert np.allclose(pointwise_product(a, b).coeffs, pointwise_product(b, a).coeffs, atol=1e-14)


class TestTimeDerivative:
    def test_exact_for_quartics(self, grid16):
        S = 7
        t = TimeGrid(S).times
        base = scalar(grid16, lambda x, y, z: np.sin(x)).coeffs[0]
        poly = 1 + t - 2 * t**2 + 3 * t**3 - t**4
        dpoly = 1 - 4 * t + 9 * t**2 - 4 * t**3
        f = SpectralField(grid16, TimeGrid(S), poly[:, None, None, None] * base)
        d = time_derivative(f).coeffs
        assert np.allclose(d, dpoly[:, None, None, None] * base, atol=1e-11)

    def test_fourth_order_convergence(self, grid16):
        base = scalar(grid16, lambda x, y, z: np.cos(y)).coeffs[0]
        errs = []
        for S in (9, 17, 33):
            t = TimeGrid(S).times
            f = SpectralField(grid16, TimeGrid(S), np.sin(3 * t)[:, None, None, None] * base)
            d = time_derivative(f).coeffs
            errs.append(np.abs(d - 3 * np.cos(3 * t)[:, None, None, None] * base).max())
        rates = [np.log2(errs[i] / errs[i + 1]) for i in range(2)]
        assert all(r > 3.5 for r in rates)

    def test_needs_five_samples(self, grid16):
        with pytest.raises(ValueError):
            time_derivative(zeros(grid16, TimeGrid(4)))


class TestNorms:
    def test_integral_of_square_of_sine(self, grid16):
        f = scalar(grid16, lambda x, y, z: np.sin(2 * x))
        assert np.allclose(integral_of_square(f), (2 * np.pi) ** 3 / 2, rtol=1e-13)

    def test_matrix_sup_is_operator_norm(self, grid16):
        vals = np.zeros((2, 3, 3) + grid16.shape)
        vals[:, 0, 0] = 1.0
        vals[:, 1, 1] = -3.0
        f = from_physical(vals, grid16, TimeGrid(2), symmetric=True)
        assert sup_norm(f) == pytest.approx(3.0, rel=1e-13)

    def test_per_time(self, grid16):
        vals = np.ones((3,) + grid16.shape) * np.array([1.0, -2.0, 0.5])[:, None, None, None]
        f = from_physical(vals, grid16, TimeGrid(3))
        assert np.allclose(sup_norm(f, per_time=True), [1.0, 2.0, 0.5])


class TestResample:
    def test_refine_and_back(self, rng):
        coarse = Grid3(12)
        fine = Grid3(24)
        f = random_field(coarse, TimeGrid(2), 1, rng)
        up = resample(f, fine)
        assert np.allclose(transform_to_physical(up)[:, :, ::2, ::2, ::2], transform_to_physical(f), atol=1e-13)
        assert np.allclose(resample(up, coarse).coeffs, f.coeffs, atol=1e-15)

    def test_stride_to_full(self):
        src = Grid3(12, stride=3)
        f = scalar(src, lambda x, y, z: np.cos(9 * x - 3 * y))
        full = resample(f, Grid3(40))
        x, y, z = Grid3(40).coordinates()
        exact = np.broadcast_to(np.cos(9 * x - 3 * y), (40, 40, 40))
        assert np.abs(transform_to_physical(full)[0] - exact).max() < 1e-12

    def test_lossy_resample_raises(self):
        f = scalar(Grid3(16), lambda x, y, z: np.sin(x))
        with pytest.raises(ValueError):
            resample(f, Grid3(8, stride=2))

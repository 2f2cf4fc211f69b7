"""Measurements: discrete Hölder norms, rate fits, oscillatory integrals,
Reynolds-stress decomposition, energy accounting and pressure recovery."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np
import scipy.fft as sfft

from .multipliers import inverse_divergence, inverse_laplacian
from .profile import EnergyProfile
from .spectral import (
    SpectralField,
    curl,
    derivative,
    divergence,
    dot,
    from_physical,
    gradient,
    integral_of_square,
    pointwise_product,
    space_mean,
    sup_norm,
    time_derivative,
    transform_to_physical,
)

__all__ = [
    "HOLDER_DIRECTIONS",
    "HolderReport",
    "holder_shifts",
    "holder_norm",
    "holder_seminorm",
    "product_constant",
    "interpolation_constant",
    "RateFit",
    "fit_rate",
    "predicted_exponent",
    "oscillatory_average_decay",
    "oscillatory_gradient_estimate",
    "reynolds_decomposition",
    "energy_report",
    "pressure_consistency",
]

TWO_PI_CUBED = (2.0 * np.pi) ** 3

HOLDER_DIRECTIONS = (
    (1, 0, 0), (0, 1, 0), (0, 0, 1),
    (1, 1, 0), (1, -1, 0), (1, 0, 1), (1, 0, -1), (0, 1, 1), (0, 1, -1),
    (1, 1, 1), (1, 1, -1), (1, -1, 1), (-1, 1, 1),
)
"""One direction out of each opposite pair of the 26-neighbour stencil."""


# ---------------------------------------------------------------------------
# Hölder norms


def holder_shifts(n: int) -> list[int]:
    """Index shifts ``round(2**(j/4))`` up to ``n // 2``, without repeats."""
    out: list[int] = []
    j = 0
    while True:
        s = int(round(2.0 ** (j / 4.0)))
        if s > n // 2:
            return out
        if not out or s != out[-1]:
            out.append(s)
        j += 1


def _derivative_stack(f: SpectralField, order: int) -> list[SpectralField]:
    if order == 0:
        return [f]
    if order == 1:
        return [derivative(f, a) for a in range(3)]
    if order == 2:
        return [derivative(derivative(f, a), b) for a in range(3) for b in range(a, 3)]
    raise ValueError("derivatives of order above 2 are not supported")


def _component_norm(values: np.ndarray, rank: int) -> np.ndarray:
    """Euclidean (Frobenius) norm over the component axes of ``(S, *comp, *grid)``."""
    if rank == 0:
        return np.abs(values)
    axes = tuple(range(1, 1 + rank))
    return np.sqrt(np.sum(values * values, axis=axes))


def holder_seminorm(f: SpectralField, alpha: float, time_index: int | None = None) -> float:
    """Discrete proxy of ``[f]_alpha`` for ``0 < alpha < 1``.

    The largest difference quotient ``|f(x + h) - f(x)| / |h|**alpha`` over
    all collocation points ``x`` and all shifts ``h`` along the 13 stencil
    directions with quarter-octave index lengths up to half a period cell.
    Differences of vector and matrix fields are measured in the Euclidean
    norm over components.
    """
    if not 0 < alpha < 1:
        raise ValueError("alpha must lie in (0, 1)")
    grid = f.grid
    dx = grid.spacing()
    samples = range(f.time_grid.samples) if time_index is None else [time_index]
    comps = list(np.ndindex(*f.component_shape))
    best = 0.0
    for s in samples:
        vals = transform_to_physical(f, time_index=s)
        for d in HOLDER_DIRECTIONS:
            active = [a for a in range(3) if d[a]]
            nmax = min(grid.modes_per_axis[a] for a in active)
            for step in holder_shifts(nmax):
                shift = tuple(-d[a] * step for a in range(3))
                sq = np.zeros(grid.shape)
                for c in comps:
                    comp = vals[c]
                    diff = np.roll(comp, shift, axis=(0, 1, 2))
                    diff -= comp
                    sq += diff * diff
                h = math.sqrt(sum((d[a] * step * dx[a]) ** 2 for a in range(3)))
                best = max(best, math.sqrt(float(sq.max())) / h**alpha)
    return best


def _sup_components(f: SpectralField, time_index: int | None) -> float:
    vals = transform_to_physical(f)
    if time_index is not None:
        vals = vals[time_index : time_index + 1]
    return float(_component_norm(vals, f.rank).max())


def _outer_energy_fraction(f: SpectralField) -> float:
    mask = f.grid.retained_mask()
    weight = np.ones(f.grid.spectral_shape)
    weight[..., 1:] = 2.0
    if f.grid.modes_per_axis[2] % 2 == 0:
        weight[..., -1] = 1.0
    power = np.abs(f.coeffs) ** 2 * weight
    total = float(power.sum())
    if total == 0:
        return 0.0
    return float((power * (1.0 - mask)).sum()) / total


@dataclass
class HolderReport:
    """Seminorms ``[f]_m`` (``m = 0, 1, 2``) and ``[f]_r`` of one field.

    ``seminorms`` maps the order (as a float) to the measured value; ``norm``
    is ``sum_{m <= r} [f]_m + [f]_r``.  ``underresolved`` flags fields with more
    than 1% of their spectral energy outside the retained band.
    """

    r: float
    seminorms: dict
    norm: float
    outer_energy_fraction: float
    underresolved: bool

    def to_dict(self) -> dict:
        return {
            "r": self.r,
            "seminorms": {f"{k:g}": v for k, v in self.seminorms.items()},
            "norm": self.norm,
            "outer_energy_fraction": self.outer_energy_fraction,
            "underresolved": self.underresolved,
        }


def holder_norm(f: SpectralField, r: float, time_index: int | None = None) -> HolderReport:
    """Discrete Hölder norm ``||f||_r`` for ``0 <= r < 3``.

    Integer-order seminorms use exact spectral derivatives (the largest
    component-norm over all partial derivatives of that order).  The
    fractional part applies :func:`holder_seminorm` to the derivatives of
    order ``floor(r)``.  Time samples are combined by taking the maximum,
    unless ``time_index`` selects one sample.
    """
    if not 0 <= r < 3:
        raise ValueError("r must lie in [0, 3)")
    m = int(math.floor(r))
    frac = r - m
    semis: dict = {0.0: sup_norm(f) if time_index is None else float(sup_norm(f, per_time=True)[time_index])}
    for order in range(1, m + 1):
        semis[float(order)] = max(_sup_components(g, time_index) for g in _derivative_stack(f, order))
    if frac > 0:
        semis[float(r)] = max(holder_seminorm(g, frac, time_index) for g in _derivative_stack(f, m))
    norm = sum(v for k, v in semis.items() if k <= m) + (semis[float(r)] if frac > 0 else 0.0)
    outer = _outer_energy_fraction(f)
    return HolderReport(float(r), semis, float(norm), outer, outer > 0.01)


def product_constant(f: SpectralField, g: SpectralField, r: float = 0.5) -> float:
    """Smallest ``C`` with ``[fg]_r <= C ([f]_r ||g||_0 + ||f||_0 [g]_r)`` for two scalar fields."""
    fg = pointwise_product(f, g)
    lhs = holder_seminorm(fg, r)
    rhs = holder_seminorm(f, r) * sup_norm(g) + sup_norm(f) * holder_seminorm(g, r)
    return lhs / rhs if rhs > 0 else 0.0


def interpolation_constant(f: SpectralField, s: float, r: float) -> float:
    """Smallest ``C`` with ``[f]_s <= C (eps**(r-s) [f]_r + eps**(-s) [f]_0)``
    at the ``eps`` minimizing the right side (``0 < s < r < 1``)."""
    if not 0 < s < r < 1:
        raise ValueError("need 0 < s < r < 1")
    fs = holder_seminorm(f, s)
    fr = holder_seminorm(f, r)
    f0 = sup_norm(f)
    if fr == 0 or f0 == 0:
        return 0.0
    eps = (s * f0 / ((r - s) * fr)) ** (1.0 / r)
    return fs / (eps ** (r - s) * fr + eps ** (-s) * f0)


# ---------------------------------------------------------------------------
# rate fits


@dataclass
class RateFit:
    """Least-squares line through ``(log x, log y)``."""

    abscissae: list
    ordinates: list
    slope: float
    intercept: float
    residual: float
    stderr: float
    regime: str = "fit"

    def to_dict(self) -> dict:
        return {
            "abscissae": [float(x) for x in self.abscissae],
            "ordinates": [float(y) for y in self.ordinates],
            "slope": self.slope,
            "intercept": self.intercept,
            "residual": self.residual,
            "stderr": self.stderr,
            "regime": self.regime,
        }


def fit_rate(x: Sequence[float], y: Sequence[float], min_points: int = 4) -> RateFit:
    """Fit ``log y = slope log x + intercept`` over all given points.

    ``residual`` is the root-mean-square deviation in ``log y``; ``stderr``
    the standard error of the slope.
    """
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if len(x) != len(y):
        raise ValueError("abscissae and ordinates differ in length")
    if len(x) < min_points:
        raise ValueError(f"a rate fit needs at least {min_points} points, got {len(x)}")
    if np.any(x <= 0) or np.any(y <= 0):
        raise ValueError("rate fits need positive data")
    lx, ly = np.log(x), np.log(y)
    A = np.stack([lx, np.ones_like(lx)], axis=1)
    (slope, intercept), *_ = np.linalg.lstsq(A, ly, rcond=None)
    res = ly - (slope * lx + intercept)
    rms = float(np.sqrt(np.mean(res**2)))
    dof = len(x) - 2
    sxx = float(np.sum((lx - lx.mean()) ** 2))
    stderr = float(np.sqrt(np.sum(res**2) / dof / sxx)) if dof > 0 and sxx > 0 else float("nan")
    return RateFit(x.tolist(), y.tolist(), float(slope), float(intercept), rms, stderr)


def predicted_exponent(lambdas: Sequence[float], bounds: Sequence[float]) -> float:
    """Log-log slope of a bound evaluated at the sampled parameters.

    With ``mu`` rounded to divisors of ``lambda`` a bound such as
    ``mu / lambda**(1 - alpha)`` is not an exact power of ``lambda``; its
    least-squares slope over the sweep is the exponent to compare against.
    """
    return fit_rate(lambdas, bounds, min_points=2).slope


# ---------------------------------------------------------------------------
# oscillatory integrals


def _mode_coefficient(a: SpectralField, wavevector: Sequence[int]) -> np.ndarray:
    """Coefficient of ``exp(i m.x)`` per time sample (zero if absent from the grid)."""
    grid = a.grid
    idx = []
    conj = False
    m = [int(x) for x in wavevector]
    if m[2] < 0:
        m = [-x for x in m]
        conj = True
    if not grid.holds_wavevector(m, retained=False):
        return np.zeros(a.time_grid.samples, dtype=np.complex128)
    for axis in range(3):
        n, s = grid.modes_per_axis[axis], grid.stride[axis]
        q = m[axis] // s
        if 2 * abs(q) == n:
            return np.zeros(a.time_grid.samples, dtype=np.complex128)
        idx.append(q % n if axis < 2 else q)
    c = a.coeffs[(slice(None),) + tuple(idx)]
    return np.conj(c) if conj else c


def oscillatory_average_decay(
    a: SpectralField, k: Sequence[int], lambdas: Sequence[int], zero_tol: float = 1e-14
) -> RateFit:
    """``|integral of a exp(i lambda k.x)|`` over the torus for each ``lambda``.

    The integral is ``(2 pi)^3`` times the coefficient of ``a`` at ``-lambda k``.
    If every value is below ``zero_tol`` times ``||a||_0`` the result is in the
    ``"exact-zero"`` regime (band-limited ``a`` past its bandwidth) and carries
    slope ``-inf``; otherwise zero values are dropped and the rest are fitted.
    """
    if a.rank != 0:
        raise ValueError("oscillatory_average_decay needs a scalar field")
    vals = []
    for lam in lambdas:
        c = _mode_coefficient(a, [-lam * int(x) for x in k])
        vals.append(TWO_PI_CUBED * float(np.abs(c).max()))
    scale = max(sup_norm(a), 1e-300)
    vals = np.asarray(vals)
    lams = np.asarray(lambdas, dtype=float)
    if np.all(vals <= zero_tol * scale):
        return RateFit(lams.tolist(), vals.tolist(), float("-inf"), float("nan"), 0.0, 0.0, "exact-zero")
    keep = vals > zero_tol * scale
    if keep.sum() < 4:
        return RateFit(lams.tolist(), vals.tolist(), float("-inf"), float("nan"), 0.0, 0.0, "exact-zero")
    fit = fit_rate(lams[keep], vals[keep])
    fit.abscissae, fit.ordinates = lams.tolist(), vals.tolist()
    if not np.all(keep):
        fit.regime = "partial-zero"
    return fit


def _modulate(a: SpectralField, wavevector: Sequence[int]) -> SpectralField:
    """``a(x) cos(m.x)`` computed on the collocation grid with exact phases."""
    grid = a.grid
    if not grid.holds_wavevector(list(wavevector)):
        raise ValueError(f"grid does not resolve the wavevector {tuple(wavevector)}")
    phase = np.zeros(grid.shape)
    for axis in range(3):
        n, s = grid.modes_per_axis[axis], grid.stride[axis]
        q = int(wavevector[axis]) // s
        shp = [1, 1, 1]
        shp[axis] = n
        phase = phase + (2.0 * np.pi * ((q * np.arange(n)) % n) / n).reshape(shp)
    vals = transform_to_physical(a) * np.cos(phase)
    return from_physical(vals, grid, a.time_grid)


def oscillatory_gradient_estimate(
    a: SpectralField, k: Sequence[int], lambdas: Sequence[int], alpha: float
) -> RateFit:
    """``||grad phi_lambda||_alpha`` for ``Laplace(phi) = a cos(lambda k.x) - mean``.

    The real part of the complex oscillation is used; a single complex mode
    and its real part have the same sup norm of the gradient.  The grid of
    ``a`` must resolve ``lambda k`` plus the bandwidth of ``a``.
    """
    vals = []
    for lam in lambdas:
        forcing = _modulate(a, [lam * int(x) for x in k])
        phi = inverse_laplacian(forcing)
        vals.append(holder_norm(gradient(phi), alpha).norm)
    vals = np.asarray(vals)
    lams = np.asarray(lambdas, dtype=float)
    if np.all(vals == 0):
        return RateFit(lams.tolist(), vals.tolist(), float("-inf"), float("nan"), 0.0, 0.0, "exact-zero")
    return fit_rate(lams, vals)


# ---------------------------------------------------------------------------
# Reynolds stress decomposition


def reynolds_decomposition(
    state,
    v1: SpectralField,
    p1: SpectralField,
    w_o: SpectralField,
    w_c: SpectralField,
    reference: SpectralField | None = None,
    alpha: float | None = None,
) -> dict:
    """Split the new Reynolds stress into transport, oscillation and error parts.

    With ``v``, ``p``, ``R`` the input state:

    * transport ``R(d_t w_o + div(w_o (x) v))``
    * oscillation ``R(div(w_o (x) w_o) - grad(|w_o|^2 / 2) + div R)``
    * error parts ``R(d_t w_c)``, ``R(div(v1 (x) w_c + w_c (x) v1 - w_c (x) w_c))``
      and ``R(div(v (x) w_o))``
    * ``anchor``: ``R(d_t v + div(v (x) v) + grad p - div R)``, which vanishes
      when the input is an exact discrete solution.

    Tensor products are ``(f (x) g)_{ab} = f_a g_b`` and divergence contracts
    the last index, so ``div(w_o (x) v)`` is the transport derivative
    ``(v . grad) w_o``.  The parts sum to ``R`` of the Euler-Reynolds argument of
    ``(v1, p1)``; the report gives each part's sup norm (and Hölder norm when
    ``alpha`` is set) and the relative residual of the sum against
    ``reference`` (the stage's new stress) when supplied.
    """
    v, p, Rring = state.v, state.p, state.Rring
    half_sq = dot(w_o, w_o).scale(0.5)
    parts = {
        "transport": inverse_divergence(time_derivative(w_o) + divergence(pointwise_product(w_o, v))),
        "oscillation": inverse_divergence(
            divergence(pointwise_product(w_o, w_o)) - gradient(half_sq) + divergence(Rring)
        ),
        "error_time_corrector": inverse_divergence(time_derivative(w_c)),
        "error_corrector": inverse_divergence(
            divergence(pointwise_product(v1, w_c) + pointwise_product(w_c, v1) - pointwise_product(w_c, w_c))
        ),
        "error_shear": inverse_divergence(divergence(pointwise_product(v, w_o))),
        "anchor": inverse_divergence(
            time_derivative(v) + divergence(pointwise_product(v, v)) + gradient(p) - divergence(Rring)
        ),
    }
    total = None
    for part in parts.values():
        total = part if total is None else total + part
    out: dict = {"parts": {}}
    for name, part in parts.items():
        entry = {"sup": sup_norm(part)}
        if alpha is not None:
            entry["holder"] = holder_norm(part, alpha).norm
        out["parts"][name] = entry
    out["sum_sup"] = sup_norm(total)
    if reference is not None:
        diff = np.abs(total.coeffs - reference.coeffs).max()
        scale = max(float(np.abs(reference.coeffs).max()), 1e-300)
        out["sum_residual"] = float(diff / scale)
        out["sum_residual_abs"] = float(diff)
    return out


# ---------------------------------------------------------------------------
# energy and pressure


def _time_derivative_1d(values: np.ndarray, step: float) -> np.ndarray:
    S = len(values)
    if S >= 5:
        c = values
        out = np.empty_like(c)
        h12 = 12.0 * step
        out[2 : S - 2] = (c[0 : S - 4] - 8.0 * c[1 : S - 3] + 8.0 * c[3 : S - 1] - c[4:S]) / h12
        out[0] = (-25.0 * c[0] + 48.0 * c[1] - 36.0 * c[2] + 16.0 * c[3] - 3.0 * c[4]) / h12
        out[1] = (-3.0 * c[0] - 10.0 * c[1] + 18.0 * c[2] - 6.0 * c[3] + c[4]) / h12
        out[S - 1] = (25.0 * c[S - 1] - 48.0 * c[S - 2] + 36.0 * c[S - 3] - 16.0 * c[S - 4] + 3.0 * c[S - 5]) / h12
        out[S - 2] = (3.0 * c[S - 1] + 10.0 * c[S - 2] - 18.0 * c[S - 3] + 6.0 * c[S - 4] - c[S - 5]) / h12
        return out
    return np.gradient(values, step)


def energy_report(v: SpectralField, profile: EnergyProfile, delta: float) -> dict:
    """Per-time energy table of a velocity at level ``delta``.

    Columns: the profile ``e``, the kinetic energy ``E = integral |v|^2``, the
    error ``e - E``, the band ``[3 delta/4, 5 delta/4] e`` that the error must
    lie in, the deviation ``|e (1 - delta) - E|`` from the band centre and
    ``dE/dt`` from fourth-order differences.
    """
    times = v.time_grid.times
    e = profile.value(times)
    E = integral_of_square(v)
    return {
        "t": times.tolist(),
        "e": e.tolist(),
        "energy": E.tolist(),
        "error": (e - E).tolist(),
        "band_lower": (0.75 * delta * e).tolist(),
        "band_upper": (1.25 * delta * e).tolist(),
        "deviation": np.abs(e * (1.0 - delta) - E).tolist(),
        "dE_dt": _time_derivative_1d(E, v.time_grid.step).tolist(),
        "in_band": bool(np.all((0.75 * delta * e <= e - E) & (e - E <= 1.25 * delta * e))),
    }


def pressure_consistency(v1: SpectralField, p1: SpectralField, Rring: SpectralField | None = None) -> dict:
    """Compare ``p1`` with the pressure recovered from ``v1`` alone.

    ``q`` solves ``-Laplace(q) = div div(v1 (x) v1)`` with zero mean.  For an
    exact Euler solution ``p1 - mean(p1) = q``; for an Euler-Reynolds state the
    difference is ``Laplace^{-1} div div R``, whose size is also reported when
    the stress ``Rring`` is given.
    """
    q = inverse_laplacian(divergence(divergence(pointwise_product(v1, v1)))).scale(-1.0)
    mean = space_mean(p1)
    pc = p1.coeffs.copy()
    pc[..., 0, 0, 0] -= mean
    diff = p1.with_coeffs(pc) - q
    out = {
        "residual_sup": sup_norm(diff),
        "residual_l2": float(np.sqrt(integral_of_square(diff).max())),
        "q_sup": sup_norm(q),
    }
    if Rring is not None:
        expected = inverse_laplacian(divergence(divergence(Rring)))
        out["stress_term_sup"] = sup_norm(expected)
        out["identity_residual"] = float(np.abs(diff.coeffs - expected.coeffs).max())
    return out


# ---------------------------------------------------------------------------
# frequency sweeps


def _self_interaction(w: SpectralField) -> SpectralField:
    """``div(w (x) w) - grad |w|^2 / 2`` on the retained band.

    Computed as ``w div w - w x curl w``, which needs only vector-sized
    temporaries.  Both forms agree exactly after truncation because all
    inputs are band-limited and the products are alias free.
    """
    mask = w.grid.retained_mask()
    w = w.with_coeffs(w.coeffs * mask)
    rot = curl(w)
    div = divergence(w)
    out = np.empty_like(w.coeffs)
    for s in range(w.time_grid.samples):
        wp = transform_to_physical(w, time_index=s)
        phys = wp * transform_to_physical(div, time_index=s)
        phys -= np.cross(wp, transform_to_physical(rot, time_index=s), axis=0)
        out[s] = sfft.rfftn(phys, axes=(-3, -2, -1), norm="forward") * mask
    return w.with_coeffs(out)


def shear_rate_sweep(
    lambdas: Sequence[int],
    system,
    profile: EnergyProfile,
    amplitude: float = 0.6,
    alpha: float = 0.05,
    beta: float = 0.4,
    grid_factor: int = 3,
    holder_time_index: int = 0,
) -> dict:
    """Perturbation norms of one stage on a steady shear over a frequency sweep.

    For each ``lambda`` the input is the shear state of
    :func:`cvxeuler.stage.shear_state` at level ``delta = 1``; ``mu`` is the
    divisor of ``lambda`` nearest ``lambda**beta``.  Because the input depends
    on ``x1`` only, the grid has unit stride along the first axis with
    ``grid_factor * lambda * lambda0`` points and stride ``lambda`` across,
    which holds every carrier exactly.  Measured per ``lambda``: ``||w_c||_0``,
    the energy deviation ``max_t |e (1 - delta/2) - integral |v1|^2|`` and the
    Hölder ``alpha``-norm of the oscillation part at one time sample.

    Returns the raw rows, the three fits and the exponents predicted by the
    bounds ``mu / lambda^(1-alpha)``, ``mu / lambda^(1-alpha)`` and
    ``mu^2 / lambda^(1-alpha)`` at the sampled ``(lambda, mu)``.
    """
    from .beltrami import build_basis
    from .partition import PhasePartition
    from .spectral import Grid3, TimeGrid
    from .stage import (
        StageParams,
        _fft_size,
        build_corrector,
        build_w_o,
        compute_stage_targets,
        nearest_divisor,
        shear_state,
    )

    basis = build_basis(system.lambda0)
    rows = []
    for lam in lambdas:
        mu = nearest_divisor(lam, lam**beta)
        n1 = _fft_size(grid_factor * lam * system.lambda0)
        n23 = _fft_size(grid_factor * system.lambda0 + 1)
        grid = Grid3((n1, n23, n23), stride=(1, lam, lam))
        tg = TimeGrid(2)
        state = shear_state(grid, tg, amplitude)
        params = StageParams(lam, mu, alpha, beta, grid, tg)
        targets = compute_stage_targets(state, profile, system)
        w_o = build_w_o(state, targets, system, PhasePartition(mu), basis, params)
        w_c = build_corrector(w_o)
        v1 = state.v + w_o + w_c
        e = targets.profile_values
        deviation = float(np.max(np.abs(e * (1.0 - state.delta / 2.0) - integral_of_square(v1))))
        osc = inverse_divergence(_self_interaction(w_o) + divergence(state.Rring))
        del v1
        rows.append(
            {
                "lambda": lam,
                "mu": mu,
                "grid": list(grid.modes_per_axis),
                "w_c": sup_norm(w_c),
                "w_o": sup_norm(w_o),
                "energy_deviation": deviation,
                "oscillation_sup": sup_norm(osc),
                "oscillation_holder": holder_norm(osc, alpha, time_index=holder_time_index).norm,
            }
        )
        del w_o, w_c, osc
    lam_arr = np.array([r["lambda"] for r in rows], dtype=float)
    mu_arr = np.array([r["mu"] for r in rows], dtype=float)
    bounds = {
        "w_c": mu_arr / lam_arr ** (1 - alpha),
        "energy_deviation": mu_arr / lam_arr ** (1 - alpha),
        "oscillation_holder": mu_arr**2 / lam_arr ** (1 - alpha),
    }
    fits = {}
    for name, bound in bounds.items():
        fit = fit_rate(lam_arr, [r[name] for r in rows])
        pred = predicted_exponent(lam_arr, bound)
        fits[name] = {
            "fit": fit.to_dict(),
            "predicted": pred,
            "relative_error": abs(fit.slope - pred) / abs(pred),
        }
    return {"rows": rows, "fits": fits, "alpha": alpha, "beta": beta, "amplitude": amplitude}

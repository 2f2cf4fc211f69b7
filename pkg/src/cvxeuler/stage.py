"""One iteration stage of the convex-integration scheme and the multi-stage driver.

A stage takes an Euler-Reynolds state ``(v, p, R)`` at level ``delta`` and
adds a highly oscillatory perturbation built from Beltrami flows at frequency
``lambda * lambda0``.  Its amplitudes are chosen so that the perturbation's
low-frequency stress cancels ``R``; the new stress is recovered exactly with
the inverse-divergence operator.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from typing import Callable, Sequence

import numpy as np

from .beltrami import BeltramiBasis, build_basis
from .geometry import DirectionSystem, compute_eta
from .multipliers import inverse_divergence, inverse_laplacian, leray_Q
from .partition import PhasePartition
from .profile import EnergyProfile
from .spectral import (
    Grid3,
    SpectralField,
    TimeGrid,
    dealias,
    divergence,
    dot,
    from_physical,
    gradient,
    integral_of_square,
    pointwise_product,
    resample,
    space_mean,
    sup_norm,
    time_derivative,
    transform_to_physical,
    zeros,
)

__all__ = [
    "StagePreconditionError",
    "ResolutionError",
    "ReynoldsMeanError",
    "EulerReynoldsState",
    "StageParams",
    "StageConstants",
    "StageTargets",
    "IterationConfig",
    "zero_state",
    "shear_state",
    "compute_stage_targets",
    "oscillation_amplitudes",
    "build_w_o",
    "build_corrector",
    "build_pressure",
    "euler_reynolds_argument",
    "build_reynolds",
    "reanchor",
    "recover_pressure",
    "run_stage",
    "choose_params",
    "nearest_divisor",
    "stage_grid",
    "calibrate_M",
    "run_iteration",
]

TWO_PI_CUBED = (2.0 * np.pi) ** 3
_SLAB_POINTS = 1 << 18


class StagePreconditionError(ValueError):
    """The input state violates the hypotheses of a stage."""

    def __init__(self, message: str, time_index: int | None = None):
        super().__init__(message)
        self.time_index = time_index


class ResolutionError(ValueError):
    """The grid cannot represent the oscillatory perturbation."""


class ReynoldsMeanError(ArithmeticError):
    """The argument of the inverse divergence has a non-negligible mean."""


@dataclass(frozen=True, eq=False)
class EulerReynoldsState:
    """``(v, p, R)`` solving the Euler-Reynolds system at level ``delta``."""

    v: SpectralField
    p: SpectralField
    Rring: SpectralField
    delta: float = 1.0
    stage_index: int = 0

    @property
    def grid(self) -> Grid3:
        return self.v.grid

    @property
    def time_grid(self) -> TimeGrid:
        return self.v.time_grid

    def on_grid(self, grid: Grid3) -> "EulerReynoldsState":
        return replace(
            self, v=resample(self.v, grid), p=resample(self.p, grid), Rring=resample(self.Rring, grid)
        )


def zero_state(grid: Grid3, time_grid: TimeGrid) -> EulerReynoldsState:
    return EulerReynoldsState(
        zeros(grid, time_grid, 1, solenoidal=True),
        zeros(grid, time_grid, 0),
        zeros(grid, time_grid, 2, symmetric=True, trace_free=True),
        1.0,
        0,
    )


def shear_state(grid: Grid3, time_grid: TimeGrid, amplitude: float, delta: float = 1.0) -> EulerReynoldsState:
    """Steady shear ``v = (0, 0, amplitude sin x1)`` with ``p = 0`` and ``R = 0``.

    It solves the Euler equations exactly, since ``v . grad v = 0``.
    """
    if grid.stride[0] != 1:
        raise ValueError("the shear profile needs unit stride along the first axis")
    x1 = grid.coordinates()[0]
    vals = np.zeros((time_grid.samples, 3) + grid.shape)
    vals[:, 2] = amplitude * np.sin(x1)
    v = dealias(from_physical(vals, grid, time_grid, solenoidal=True))
    return EulerReynoldsState(
        v,
        zeros(grid, time_grid, 0),
        zeros(grid, time_grid, 2, symmetric=True, trace_free=True),
        delta,
        0,
    )


@dataclass(frozen=True)
class StageParams:
    """Frequencies and grids of one stage.

    ``lam`` is the stage frequency, ``mu`` the partition scale; both and their
    ratio must be integers.  ``alpha < beta`` and ``alpha + 2 beta < 1``.
    """

    lam: int
    mu: int
    alpha: float
    beta: float
    grid: Grid3
    time_grid: TimeGrid

    def __post_init__(self):
        if self.lam < 1 or self.mu < 1 or self.lam % self.mu:
            raise ValueError(f"lambda={self.lam} and mu={self.mu} must be positive with mu dividing lambda")
        _check_exponents(self.alpha, self.beta)

    def to_dict(self) -> dict:
        return {
            "lambda": self.lam,
            "mu": self.mu,
            "alpha": self.alpha,
            "beta": self.beta,
            "grid": self.grid.to_dict(),
            "time_samples": self.time_grid.samples,
        }


def _check_exponents(alpha: float, beta: float) -> None:
    if not (0 < alpha < 1 and 0 < beta < 1):
        raise ValueError("alpha and beta must lie in (0, 1)")
    if not alpha < beta:
        raise ValueError(f"alpha={alpha} must be smaller than beta={beta}")
    if not alpha + 2 * beta < 1:
        raise ValueError(f"alpha + 2 beta = {alpha + 2 * beta} must be smaller than 1")


@dataclass(frozen=True)
class StageConstants:
    """Reynolds threshold ``eta`` and increment constant ``M > 1``."""

    eta: float
    M: float

    def __post_init__(self):
        if self.eta <= 0 or self.M <= 1:
            raise ValueError("need eta > 0 and M > 1")


@dataclass(frozen=True, eq=False)
class StageTargets:
    """Per-time energy share ``rho`` and the stress target ``R = rho Id - Rring``."""

    rho: np.ndarray
    Rfield: SpectralField
    energy: np.ndarray
    profile_values: np.ndarray


@dataclass
class IterationConfig:
    """Parameters of a multi-stage run.

    Frequencies are either listed in ``lambdas`` or generated from
    ``lambda_initial`` by multiplying with ``lambda_ratio`` at each stage.
    Grids use ``modes = grid_factor * (lambda / stride) * lambda0 + grid_margin``
    points per axis, rounded up to an FFT-friendly even size.
    """

    alpha: float = 0.05
    beta: float = 0.4
    stages: int = 1
    lambdas: Sequence[int] = ()
    lambda_initial: int = 16
    lambda_ratio: int = 2
    mus: Sequence[int] = ()
    grid_factor: float = 4.0
    grid_margin: int = 0
    time_samples: int = 9
    lattice_stride: bool = True
    decomposition: bool = True
    fd_check: bool = True
    mean_tolerance: float = 1e-9
    M: float | None = None
    M_probes: int = 64
    M_safety: float = 1.25
    seed: int = 0

    def __post_init__(self):
        _check_exponents(self.alpha, self.beta)
        if self.time_samples < 5:
            raise ValueError("at least 5 time samples are needed")

    def lam(self, stage_index: int) -> int:
        if self.lambdas:
            if stage_index >= len(self.lambdas):
                raise ValueError(f"the lambda schedule has no entry for stage {stage_index + 1}")
            return int(self.lambdas[stage_index])
        return int(self.lambda_initial) * int(self.lambda_ratio) ** stage_index


# ---------------------------------------------------------------------------
# stage construction


def compute_stage_targets(
    state: EulerReynoldsState, profile: EnergyProfile, system: DirectionSystem
) -> StageTargets:
    """Energy share ``rho(t)`` and stress target; checks the stage hypotheses.

    Raises :class:`StagePreconditionError` if the kinetic energy leaves the band
    ``[3 delta/4, 5 delta/4] e(t)`` for the energy gap, or if ``R / rho`` leaves
    the ball of radius ``r0`` around the identity.
    """
    times = state.time_grid.times
    e = profile.value(times)
    energy = integral_of_square(state.v)
    delta = state.delta
    gap = e - energy
    tol = 1e-12 * e
    for s in range(len(times)):
        if not (0.75 * delta * e[s] - tol[s] <= gap[s] <= 1.25 * delta * e[s] + tol[s]):
            raise StagePreconditionError(
                f"energy gap {gap[s]:.6g} at t={times[s]:.4g} (sample {s}) is outside "
                f"[{0.75 * delta * e[s]:.6g}, {1.25 * delta * e[s]:.6g}]",
                s,
            )
    rho = (e * (1.0 - delta / 2.0) - energy) / (3.0 * TWO_PI_CUBED)
    sup_r = sup_norm(state.Rring, per_time=True)
    for s in range(len(times)):
        if rho[s] <= 0 or sup_r[s] >= system.r0 * rho[s]:
            raise StagePreconditionError(
                f"|R/rho - Id| = {sup_r[s] / rho[s]:.6g} at t={times[s]:.4g} (sample {s}) "
                f"is not below r0 = {system.r0:.6g}",
                s,
            )
    eye = np.eye(3).reshape((1, 3, 3, 1, 1, 1))
    R = state.Rring.with_coeffs(
        rho.reshape(-1, 1, 1, 1, 1, 1) * eye * _delta_mode(state.grid) - state.Rring.coeffs, symmetric=True
    )
    return StageTargets(rho, R, energy, e)


def _delta_mode(grid: Grid3) -> np.ndarray:
    d = np.zeros(grid.spectral_shape)
    d[0, 0, 0] = 1.0
    return d


def _axis_phases(grid: Grid3, wavevector: Sequence[int]) -> list[np.ndarray]:
    """Per-axis factors of ``exp(i k.x)``, with exact integer phase reduction."""
    out = []
    for axis in range(3):
        n, s = grid.modes_per_axis[axis], grid.stride[axis]
        m = int(wavevector[axis]) // s
        shp = [1, 1, 1]
        shp[axis] = n
        out.append(np.exp(2j * np.pi * ((m * np.arange(n)) % n) / n).reshape(shp))
    return out


def oscillation_amplitudes(
    v_phys: np.ndarray,
    Rring_phys: np.ndarray,
    rho: float,
    tau: float,
    system: DirectionSystem,
    partition: PhasePartition,
):
    """Amplitudes ``a_k`` on the collocation grid at one time sample.

    ``v_phys`` has shape ``(3, *grid)`` and ``Rring_phys`` shape ``(3, 3, *grid)``.
    Yields ``(k, a_k)`` for one canonical representative per pair; the
    amplitude of ``-k`` is the complex conjugate.
    """
    v = np.moveaxis(v_phys, 0, -1)
    Rn = np.eye(3) - np.moveaxis(Rring_phys, (0, 1), (-2, -1)) / rho
    amp, ls = partition.class_amplitudes(v)
    root = math.sqrt(rho)
    for j in range(8):
        g = system.gamma_family(j, Rn, check=False)
        lj = ls[..., j, :]
        for n, k in enumerate(system.pairs(j)):
            kl = lj @ np.asarray(k, dtype=np.int64)
            phase = np.exp(-1j * (kl * (tau / partition.mu)))
            yield k, root * g[..., n] * amp[..., j] * phase


def build_w_o(
    state: EulerReynoldsState,
    targets: StageTargets,
    system: DirectionSystem,
    partition: PhasePartition,
    basis: BeltramiBasis,
    params: StageParams,
) -> SpectralField:
    """Principal perturbation ``w_o = sum_k a_k(x, t) B_k exp(i lambda k.x)``.

    Amplitudes are sampled on the collocation grid, modulated by the carrier
    and transformed; the result is truncated to the retained band.
    """
    grid = state.grid
    for k in basis.ks:
        if not grid.holds_wavevector([params.lam * int(x) for x in k]):
            raise ResolutionError(
                f"grid with {grid.modes_per_axis} points and stride {grid.stride} does not resolve "
                f"wavenumber {params.lam}*{tuple(int(x) for x in k)}"
            )
    vp = transform_to_physical(state.v)
    Rp = transform_to_physical(state.Rring)
    times = state.time_grid.times
    n1, n2, n3 = grid.shape
    slab = max(1, _SLAB_POINTS // (n2 * n3))
    phases = {}
    for j in range(8):
        for k in system.pairs(j):
            phases[k] = _axis_phases(grid, [params.lam * x for x in k])
    out = np.zeros((len(times), 3) + grid.shape)
    for s, t in enumerate(times):
        for lo in range(0, n1, slab):
            sl = slice(lo, min(lo + slab, n1))
            acc = out[s, :, sl]
            amps = oscillation_amplitudes(
                vp[s, :, sl], Rp[s, :, :, sl], targets.rho[s], params.lam * t, system, partition
            )
            for k, a in amps:
                p1, p2, p3 = phases[k]
                field_k = a * p1[sl] * p2 * p3
                B = basis.B[basis.index(k)]
                for c in range(3):
                    acc[c] += 2.0 * (B[c] * field_k).real
    return dealias(from_physical(out, grid, state.time_grid))


def build_corrector(w_o: SpectralField) -> SpectralField:
    """``w_c = -Q w_o``, so that ``w_o + w_c`` is divergence free with zero mean."""
    return -leray_Q(w_o)


def build_pressure(p: SpectralField, w_o: SpectralField) -> SpectralField:
    """``p_1 = p - |w_o|^2 / 2``."""
    return p - dot(w_o, w_o).scale(0.5)


def euler_reynolds_argument(v: SpectralField, p: SpectralField) -> SpectralField:
    """``d_t v + div(v (x) v) + grad p`` with dealiased products."""
    return time_derivative(v) + divergence(pointwise_product(v, v)) + gradient(p)


def build_reynolds(
    v1: SpectralField, p1: SpectralField, mean_tolerance: float = 1e-9
) -> tuple[SpectralField, dict]:
    """New Reynolds stress ``R(d_t v1 + div(v1 (x) v1) + grad p1)``.

    Returns the stress and a dictionary with the mean of the argument and the
    spectral residual ``|div R1 - (arg - mean arg)|``.
    """
    arg = euler_reynolds_argument(v1, p1)
    mean = space_mean(arg)
    scale = max(float(np.abs(arg.coeffs).max()), 1.0)
    mean_abs = float(np.abs(mean).max())
    if mean_abs > mean_tolerance * scale:
        raise ReynoldsMeanError(f"mean of the Euler-Reynolds argument is {mean_abs:.3e}")
    R1 = inverse_divergence(arg)
    resid = divergence(R1).coeffs - arg.coeffs
    resid[:, :, 0, 0, 0] = 0.0
    info = {
        "argument_mean": mean_abs,
        "spectral_residual": float(np.abs(resid).max()),
    }
    return R1, info


def recover_pressure(v: SpectralField, Rring: SpectralField, mean: np.ndarray | None = None) -> SpectralField:
    """Pressure of an Euler-Reynolds state from its velocity and stress.

    Taking the divergence of the equations gives
    ``Laplace p = div div(Rring - v (x) v)``; the spatial mean of ``p`` is free
    and is set to ``mean`` (one value per time sample, zero by default).
    """
    p = inverse_laplacian(divergence(divergence(Rring - pointwise_product(v, v))))
    if mean is None:
        return p
    c = p.coeffs.copy()
    c[:, 0, 0, 0] = mean
    return p.with_coeffs(c)


def reanchor(state: EulerReynoldsState, mean_tolerance: float = 1e-9) -> tuple[EulerReynoldsState, dict]:
    """Re-derive ``p`` and ``R`` of a state that was moved to a finer grid.

    Quadratic terms that were truncated on the coarse grid are resolved on
    the fine one, so the coarse pressure no longer balances them.  The
    pressure is recovered from ``v`` and ``R`` on the new grid (keeping its
    mean), then the stress is recomputed from ``(v, p)`` so the triple is an
    exact discrete Euler-Reynolds solution again.  Returns the new state and
    the sup-norm changes of the pressure and the stress.
    """
    p = recover_pressure(state.v, state.Rring, space_mean(state.p))
    R, _ = build_reynolds(state.v, p, mean_tolerance)
    change = {"pressure": sup_norm(p - state.p), "stress": sup_norm(R - state.Rring)}
    return replace(state, p=p, Rring=R), change


def _richardson_fd_error(v1: SpectralField) -> float | None:
    """Estimate of the time-differencing error carried into the new stress.

    Differences the 4th-order derivative on the given samples against the
    one obtained from every other sample; the error at step ``h`` is about
    ``1/15`` of that difference.
    """
    S = v1.time_grid.samples
    if S % 2 == 0 or (S + 1) // 2 < 5:
        return None
    coarse_t = TimeGrid((S + 1) // 2)
    coarse = SpectralField(v1.grid, coarse_t, v1.coeffs[::2])
    d_fine = time_derivative(v1).coeffs[::2]
    d_coarse = time_derivative(coarse).coeffs
    diff = SpectralField(v1.grid, coarse_t, (d_fine - d_coarse) / 15.0)
    return sup_norm(inverse_divergence(diff))


def _check(measured: float, bound: float) -> dict:
    return {"measured": float(measured), "bound": float(bound), "ok": bool(measured <= bound)}


def run_stage(
    state: EulerReynoldsState,
    profile: EnergyProfile,
    system: DirectionSystem,
    basis: BeltramiBasis,
    params: StageParams,
    constants: StageConstants,
    decomposition: bool = True,
    fd_check: bool = True,
    mean_tolerance: float = 1e-9,
) -> tuple[EulerReynoldsState, dict]:
    """Run one stage; returns the new state at level ``delta/2`` and a report.

    Precondition failures raise :class:`StagePreconditionError`; failed
    estimates on the output are recorded in the report.
    """
    report: dict = {"stage": state.stage_index + 1, "delta_in": state.delta, "delta_out": state.delta / 2.0}
    report["params"] = params.to_dict()
    report["constants"] = {"eta": constants.eta, "M": constants.M}
    if state.grid != params.grid:
        state = state.on_grid(params.grid)
        if state.stage_index > 0:
            state, change = reanchor(state, mean_tolerance)
            report["reanchor_change"] = change
    if state.time_grid != params.time_grid:
        raise StagePreconditionError("the state and the stage use different time grids")
    sup_r_in = sup_norm(state.Rring)
    report["precondition"] = {
        "reynolds": _check(sup_r_in, constants.eta * state.delta),
    }
    targets = compute_stage_targets(state, profile, system)
    partition = PhasePartition(params.mu)
    w_o = build_w_o(state, targets, system, partition, basis, params)
    w_c = build_corrector(w_o)
    v1 = (state.v + w_o + w_c).with_coeffs((state.v + w_o + w_c).coeffs, solenoidal=True)
    p1 = build_pressure(state.p, w_o)
    R1, rinfo = build_reynolds(v1, p1, mean_tolerance)
    delta1 = state.delta / 2.0

    times = state.time_grid.times
    e = targets.profile_values
    energy1 = integral_of_square(v1)
    gap = e - energy1
    band_lo, band_hi = 0.75 * delta1 * e, 1.25 * delta1 * e
    sup_r1 = sup_norm(R1)
    dv = sup_norm(v1 - state.v)
    dp = sup_norm(p1 - state.p)
    wo = sup_norm(w_o)
    checks = {
        "reynolds": _check(sup_r1, constants.eta * delta1),
        "energy_band": {
            "times": times.tolist(),
            "gap": gap.tolist(),
            "lower": band_lo.tolist(),
            "upper": band_hi.tolist(),
            "ok": bool(np.all((band_lo <= gap) & (gap <= band_hi))),
        },
        "velocity_increment": _check(dv, constants.M * math.sqrt(state.delta)),
        "pressure_increment": _check(dp, constants.M * state.delta),
        "w_o_bound": _check(wo, math.sqrt(constants.M * state.delta) / 2.0),
    }
    report["checks"] = checks
    report["success"] = all(c["ok"] for c in checks.values())
    report["norms"] = {
        "w_o": wo,
        "w_c": sup_norm(w_c),
        "Rring_in": sup_r_in,
        "Rring_out": sup_r1,
        "energy_deviation": float(np.max(np.abs(e * (1.0 - state.delta / 2.0) - energy1))),
    }
    report["rho"] = targets.rho.tolist()
    report["energy_in"] = targets.energy.tolist()
    report["energy_out"] = energy1.tolist()
    report["residuals"] = dict(rinfo)
    if fd_check:
        report["residuals"]["time_fd_estimate"] = _richardson_fd_error(v1)
    if decomposition:
        from .diagnostics import reynolds_decomposition

        report["decomposition"] = reynolds_decomposition(state, v1, p1, w_o, w_c, R1)
    new_state = EulerReynoldsState(v1, p1, R1, delta1, state.stage_index + 1)
    return new_state, report


# ---------------------------------------------------------------------------
# parameters


def nearest_divisor(lam: int, target: float) -> int:
    """Divisor of ``lam`` closest to ``target`` (ties go to the smaller one)."""
    divs = [d for d in range(1, lam + 1) if lam % d == 0] if lam < 10**6 else _pow2_divisors(lam)
    return min(divs, key=lambda d: (abs(d - target), d))


def _pow2_divisors(lam: int) -> list[int]:
    out, d = [], 1
    while lam % d == 0 and d <= lam:
        out.append(d)
        d *= 2
    return out


def _fft_size(n: float) -> int:
    """Smallest even 2-3-5-smooth integer at least ``n``."""
    m = max(8, int(math.ceil(n)))
    while True:
        if m % 2 == 0:
            r = m
            for p in (2, 3, 5):
                while r % p == 0:
                    r //= p
            if r == 1:
                return m
        m += 1


def stage_grid(lam: int, lambda0: int, config: IterationConfig, input_stride: int | None) -> Grid3:
    """Grid for a stage at frequency ``lam``.

    With ``lattice_stride`` the grid's stride is ``gcd(input_stride, lam)``
    (``lam`` itself for the zero initial state), which represents the state
    and all carriers exactly.
    """
    if config.lattice_stride:
        stride = lam if input_stride is None else math.gcd(int(input_stride), lam)
    else:
        stride = 1
    n = _fft_size(config.grid_factor * (lam // stride) * lambda0 + config.grid_margin)
    return Grid3(n, stride=stride)


def choose_params(
    delta: float, stage_index: int, config: IterationConfig, lambda0: int, input_grid: Grid3 | None = None
) -> StageParams:
    """Stage parameters from the schedule; ``mu`` is the divisor of lambda nearest ``lambda**beta``."""
    lam = config.lam(stage_index)
    if config.mus and stage_index < len(config.mus):
        mu = int(config.mus[stage_index])
    else:
        mu = nearest_divisor(lam, lam**config.beta)
    if lam % mu:
        raise ValueError(f"no divisor of lambda={lam} near {lam ** config.beta:.3g}; choose another lambda")
    stride = None if input_grid is None else input_grid.stride[0]
    grid = stage_grid(lam, lambda0, config, stride)
    return StageParams(lam, mu, config.alpha, config.beta, grid, TimeGrid(config.time_samples))


# ---------------------------------------------------------------------------
# constants


def calibrate_M(
    profile: EnergyProfile,
    system: DirectionSystem,
    basis: BeltramiBasis,
    probes: int = 64,
    seed: int = 0,
    safety: float = 1.25,
    margin: float = 0.01,
) -> tuple[float, dict]:
    """Increment constant ``M`` from probes of the normalized perturbation.

    For ``rho = 1`` the perturbation at a frozen point is a Beltrami flow with
    amplitudes ``gamma_k(R) phi_k(v, tau)``.  Its sup over the fast variable is
    probed for random ``R`` in the admissible ball (including the centre),
    random velocities and phases.  Since ``rho <= delta max(e) / (4 (2 pi)^3)``
    on the energy band, ``|w_o| <= sqrt(M delta)/2`` holds whenever
    ``M >= max(e) sup^2 / (2 pi)^3``; a safety factor covers the finite probe set.
    """
    rng = np.random.default_rng(seed)
    lambda0 = system.lambda0
    n = _fft_size(4 * lambda0)
    grid = Grid3(n)
    part = PhasePartition(1)
    sup = 0.0
    for trial in range(probes):
        if trial == 0:
            E = np.zeros((3, 3))
        else:
            E = rng.standard_normal((3, 3))
            E = E + E.T
            E *= (0.999 * system.r0 * rng.random() ** (1 / 6)) / np.abs(np.linalg.eigvalsh(E)).max()
        R = np.eye(3) + E
        w = rng.uniform(-1.0, 2.0, size=3)
        tau = rng.uniform(0.0, 2.0 * np.pi * 64)
        coeff = np.zeros((3,) + grid.spectral_shape, dtype=np.complex128)
        amp, ls = part.class_amplitudes(w)
        for j in range(8):
            g = system.gamma_family(j, R)
            for m, k in enumerate(system.pairs(j)):
                a = g[m] * amp[j] * np.exp(-1j * float(ls[j] @ np.asarray(k)) * tau)
                for kk, aa in ((k, a), (tuple(-x for x in k), np.conj(a))):
                    if kk[2] < 0:
                        continue
                    coeff[:, kk[0] % n, kk[1] % n, kk[2]] += aa * basis.B[basis.index(kk)]
        field_ = SpectralField(grid, TimeGrid(2), np.broadcast_to(coeff, (2,) + coeff.shape).copy())
        sup = max(sup, sup_norm(field_))
    M = max(1.0 + margin, safety * profile.maximum() * sup**2 / TWO_PI_CUBED)
    return M, {"probe_sup": sup, "probes": probes, "safety": safety}


# ---------------------------------------------------------------------------
# driver


def run_iteration(
    profile: EnergyProfile,
    config: IterationConfig,
    system: DirectionSystem,
    start: EulerReynoldsState | None = None,
    on_stage: Callable[[EulerReynoldsState, dict], None] | None = None,
    constants: StageConstants | None = None,
) -> tuple[EulerReynoldsState, list[dict]]:
    """Apply stages starting from the zero state (or ``start``).

    Stops after ``config.stages`` stages or at the first precondition
    failure, which is recorded as a report entry instead of being raised.
    """
    profile.validate()
    basis = build_basis(system.lambda0)
    if constants is None:
        eta = compute_eta(system, profile.minimum())
        M = config.M if config.M is not None else calibrate_M(
            profile, system, basis, config.M_probes, config.seed, config.M_safety
        )[0]
        constants = StageConstants(eta, M)
    state = start
    reports: list[dict] = []
    first = 0 if start is None else start.stage_index
    for n in range(first, config.stages):
        input_grid = None if state is None else state.grid
        delta = 1.0 if state is None else state.delta
        try:
            params = choose_params(delta, n, config, system.lambda0, input_grid)
        except ValueError as exc:
            reports.append({"stage": n + 1, "success": False, "failure": "parameters", "message": str(exc)})
            break
        if state is None:
            state = zero_state(params.grid, params.time_grid)
        prev = state
        try:
            state, report = run_stage(
                state,
                profile,
                system,
                basis,
                params,
                constants,
                decomposition=config.decomposition,
                fd_check=config.fd_check,
                mean_tolerance=config.mean_tolerance,
            )
        except (StagePreconditionError, ResolutionError, ReynoldsMeanError) as exc:
            reports.append(
                {
                    "stage": n + 1,
                    "success": False,
                    "failure": type(exc).__name__,
                    "message": str(exc),
                    "params": params.to_dict(),
                }
            )
            state = prev
            break
        report["cauchy"] = {
            "velocity": _check(sup_norm(state.v - resample(prev.v, state.grid)), constants.M * math.sqrt(prev.delta)),
            "pressure": _check(sup_norm(state.p - resample(prev.p, state.grid)), constants.M * prev.delta),
        }
        reports.append(report)
        if on_stage is not None:
            on_stage(state, report)
    if state is None:
        params = choose_params(1.0, 0, config, system.lambda0, None)
        state = zero_state(params.grid, params.time_grid)
    return state, reports

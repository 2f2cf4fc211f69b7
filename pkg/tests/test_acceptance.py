"""Acceptance suite: one test per criterion, numbered 1 to 10.

The terminal summary prints one PASS/FAIL line per criterion.  Expensive runs
(the stage builds, the dissipation exhibit and the rate sweep) are shared
through module fixtures.
"""

import json
import math
from pathlib import Path

import numpy as np
import pytest

from cvxeuler.beltrami import assemble_flow, build_basis, mean_stress, random_coefficients
from cvxeuler.cli import cmd_iterate
from cvxeuler.diagnostics import fit_rate, shear_rate_sweep
from cvxeuler.geometry import find_direction_system, projection_matrix
from cvxeuler.multipliers import inverse_divergence, leray_P, leray_Q
from cvxeuler.partition import PhasePartition
from cvxeuler.profile import EnergyProfile
from cvxeuler.snapshot import read_snapshot
from cvxeuler.spectral import (
    Grid3,
    TimeGrid,
    divergence,
    dot,
    gradient,
    curl,
    integral_of_square,
    pointwise_product,
    space_mean,
    sup_norm,
    transform_to_physical,
)
from cvxeuler.stage import EulerReynoldsState, build_reynolds, reanchor, zero_state

from .conftest import random_field


def _ini(profile, lambdas, beta, stages, samples=5, decomposition=True):
    return (
        f"[run]\nenergy_profile = {profile}\nstages = {stages}\n\n"
        f"[scheme]\nalpha = 0.05\nbeta = {beta}\nlambdas = {', '.join(map(str, lambdas))}\n\n"
        f"[grid]\ntime_samples = {samples}\n\n"
        f"[checks]\ndecomposition = {str(decomposition).lower()}\nM_probes = 8\n"
    )


def _run(base: Path, name: str, text: str) -> Path:
    cfg = base / f"{name}.ini"
    cfg.write_text(text)
    return cmd_iterate(cfg, base / name)


def _report(run: Path, stage: int) -> dict:
    return json.loads((run / f"stage_{stage:03d}" / "report.json").read_text())


def _state(run: Path, stage: int) -> EulerReynoldsState:
    d = run / f"stage_{stage:03d}"
    info = json.loads((d / "state.json").read_text())
    return EulerReynoldsState(
        read_snapshot(d / "v.cvxf"),
        read_snapshot(d / "p.cvxf"),
        read_snapshot(d / "R.cvxf"),
        info["delta"],
        info["stage_index"],
    )


@pytest.fixture(scope="module")
def stage_run(tmp_path_factory):
    """Two stages at lambda = 32 then 64; beta = 0.45 puts mu = 8 at lambda = 64."""
    return _run(tmp_path_factory.mktemp("c6"), "run", _ini("40", [32, 64], 0.45, 2))


@pytest.fixture(scope="module")
def dissipative_run(tmp_path_factory):
    text = _ini("1 - t/2", [2**17, 2**18], 0.15, 2, samples=9)
    return _run(tmp_path_factory.mktemp("c9"), "run", text)


class TestOperators:
    def test_c1_operator_identities(self, rng):
        grid = Grid3(32)
        worst = {}
        for _ in range(20):
            # each of the 50 time samples is an independent random field
            v = random_field(grid, TimeGrid(50), 1, rng)
            scale = np.abs(v.coeffs).max()
            Pv, Qv = leray_P(v), leray_Q(v)
            R = inverse_divergence(v)
            mean = space_mean(v)[:, :, None, None, None]
            shifted = v.coeffs.copy()
            shifted[:, :, 0, 0, 0] -= mean[:, :, 0, 0, 0]
            Rc = R.coeffs
            checks = {
                "div_R": np.abs(divergence(R).coeffs - shifted).max(),
                "P_plus_Q": np.abs(Pv.coeffs + Qv.coeffs - v.coeffs).max(),
                "P_idempotent": np.abs(leray_P(Pv).coeffs - Pv.coeffs).max(),
                "div_P": np.abs(divergence(Pv).coeffs).max(),
                "R_symmetric": np.abs(Rc - np.swapaxes(Rc, 1, 2)).max(),
                "R_trace_free": np.abs(np.einsum("taa...->t...", Rc)).max(),
            }
            for key, value in checks.items():
                worst[key] = max(worst.get(key, 0.0), value / scale)
        assert max(worst.values()) <= 1e-12, worst


class TestBeltrami:
    @pytest.mark.parametrize("lam0", [1, 5])
    def test_c2_beltrami_identities(self, lam0, rng):
        basis = build_basis(lam0)
        grid = Grid3(8 * lam0 if lam0 > 1 else 8)
        npts = np.prod(grid.shape)
        for _ in range(100):
            coeffs = random_coefficients(basis, rng)
            W = assemble_flow(basis, coeffs, grid)
            s = np.abs(W.coeffs).max()
            assert np.abs(curl(W).coeffs - lam0 * W.coeffs).max() <= 1e-12 * lam0 * s
            assert np.abs(divergence(W).coeffs).max() <= 1e-12 * lam0 * s
            lhs = divergence(pointwise_product(W, W)).coeffs
            assert np.abs(lhs - gradient(dot(W, W)).coeffs / 2).max() <= 1e-12 * lam0 * s**2
            # the point average of a product of band-limited fields is its exact mean
            vals = transform_to_physical(W, time_index=0).reshape(3, -1)
            average = vals @ vals.T / npts
            assert np.abs(average - mean_stress(basis, coeffs)).max() <= 1e-12 * max(1.0, s**2)


class TestGeometry:
    def test_c3_geometric_lemma(self, rng):
        system = find_direction_system(10)
        assert system.lambda0 <= 10
        sizes = system.family_sizes()
        assert max(sizes) <= 98
        seen = set()
        for fam in system.families:
            keys = {tuple(k) for k in fam}
            assert all(tuple(-x for x in k) in keys for k in keys)
            assert not keys & seen
            seen |= keys
        worst = 0.0
        for j in range(8):
            E = rng.standard_normal((1000, 3, 3))
            E = E + np.swapaxes(E, 1, 2)
            radius = 0.999 * system.r0 * rng.random(1000) ** (1 / 6)
            E *= (radius / np.abs(np.linalg.eigvalsh(E)).max(axis=-1))[:, None, None]
            R = np.eye(3) + E
            g = system.gamma_family(j, R)
            rebuilt = np.zeros_like(R)
            for m, k in enumerate(system.pairs(j)):
                # gamma is even in k: the pair {k, -k} contributes twice
                for kk in (k, tuple(-x for x in k)):
                    rebuilt += 0.5 * g[:, m, None, None] ** 2 * projection_matrix(kk)
            worst = max(worst, np.abs(rebuilt - R).max())
        assert worst <= 1e-10


class TestPartition:
    def test_c4_partition_and_transport_defect(self, rng):
        part = PhasePartition(8)
        v = rng.uniform(-3, 3, (10**5, 3))
        tau = rng.uniform(0, 100, 10**5)
        k = np.array([2.0, -4.0, 7.0])
        total = sum(np.abs(part.phi(j, k, v, tau)) ** 2 for j in range(8))
        assert np.abs(total - 1).max() <= 1e-12
        mus = [4, 8, 16, 32]
        sups = []
        for mu in mus:
            p = PhasePartition(mu)
            sups.append(max(np.abs(p.transport_defect(j, k, v, tau)).max() for j in range(8)))
        slope = fit_rate(mus, sups).slope
        assert -1.1 <= slope <= -0.9, slope


class TestFixedPoint:
    @pytest.mark.parametrize("lam0", [1, 5])
    def test_c5_beltrami_is_stationary(self, lam0, rng):
        basis = build_basis(lam0)
        W = assemble_flow(basis, random_coefficients(basis, rng), Grid3(max(8, 8 * lam0)), TimeGrid(16))
        R, _ = build_reynolds(W, dot(W, W).scale(-0.5))
        assert sup_norm(R) <= 1e-10


class TestStage:
    def test_c6_decomposition_identity(self, stage_run):
        report = _report(stage_run, 2)
        params = report["params"]
        assert (params["lambda"], params["mu"]) == (64, 8)
        n = params["grid"]["modes_per_axis"][0] * params["grid"]["stride"][0]
        assert n >= 4 * 64 * 9
        assert report["decomposition"]["sum_residual"] <= 1e-10

    def test_c7_rate_regression(self, system):
        sweep = shear_rate_sweep([16, 32, 64, 128], system, EnergyProfile("200"), alpha=0.05, beta=0.4)
        errors = {name: fit["relative_error"] for name, fit in sweep["fits"].items()}
        slopes = {name: (fit["fit"]["slope"], fit["predicted"]) for name, fit in sweep["fits"].items()}
        print("slopes (measured, predicted):", slopes)
        assert all(err <= 0.2 for err in errors.values()), slopes

    def test_c8_stage_contract(self, stage_run, dissipative_run):
        checked = 0
        for run in (stage_run, dissipative_run):
            manifest = json.loads((run / "manifest.json").read_text())
            M = manifest["constants"]["M"]
            profile = EnergyProfile(manifest["config"]["energy_profile"])
            for stage in (1, 2):
                if not _report(run, stage)["success"]:
                    continue
                new = _state(run, stage)
                if stage == 1:
                    old = zero_state(new.grid, new.time_grid)
                else:
                    old = _state(run, stage - 1).on_grid(new.grid)
                    old, _ = reanchor(old)
                e = profile(new.time_grid.times)
                gap = e - integral_of_square(new.v)
                assert np.all(0.75 * new.delta * e <= gap) and np.all(gap <= 1.25 * new.delta * e)
                assert sup_norm(new.v - old.v) <= M * math.sqrt(old.delta)
                assert sup_norm(new.p - old.p) <= M * old.delta
                checked += 1
        assert checked >= 2

    def test_c9_dissipation(self, dissipative_run):
        reports = [_report(dissipative_run, s) for s in (1, 2)]
        n = len(reports)
        final = _state(dissipative_run, n)
        energy = integral_of_square(final.v)
        e = EnergyProfile("1 - t/2")(final.time_grid.times)
        assert np.all(np.diff(energy) < 0)
        assert np.all(np.abs(e - energy) < 1.25 * e / 2**n)


class TestDeterminism:
    def test_c10_bit_identical_runs(self, tmp_path):
        text = _ini("40", [16], 0.4, 1)
        first = _run(tmp_path, "a", text)
        second = _run(tmp_path, "b", text)
        files = sorted(p.relative_to(first) for p in first.rglob("*") if p.is_file())
        assert files == sorted(p.relative_to(second) for p in second.rglob("*") if p.is_file())
        for rel in files:
            assert (first / rel).read_bytes() == (second / rel).read_bytes(), rel

"""Iterative solvers: configs, stationary updates, Krylov methods, reports."""

import json

import numpy as np
import pytest

import prefine
from prefine import (
    DivergenceError,
    Method,
    PeriodicSystem,
    Preconditioner,
    SolveReport,
    SolverConfig,
    decide_finetune,
    empirical_convergence_rate,
    relative_residual,
    solve,
)
from prefine.solvers import _Operator, _ic0_inverse

from oracles import (
    damped_jacobi_step,
    dense_system,
    gauss_seidel_step,
    jacobi_step,
    random_model,
    sor_step,
)

import scipy.sparse as sp


def random_spd(rng, m=10):
    b = rng.standard_normal((m, m))
    return b @ b.T + m * np.eye(m)


def synthetic_report(history, tol=1e-12):
    return SolveReport(
        method=Method.JACOBI,
        tol=tol,
        iterations=len(history) - 1,
        residual_history=tuple(history),
        converged=False,
        wall_time=0.0,
        initial_residual=history[0],
    )


@pytest.fixture(scope="module")
def elastic():
    model = random_model(np.random.default_rng(99), 4)
    system = PeriodicSystem(model)
    dense_k, loads, _ = dense_system(model)
    exact = np.linalg.lstsq(dense_k, loads[0], rcond=None)[0]
    return system, dense_k, exact


class TestSolverConfig:
    def test_defaults(self):
        cfg = SolverConfig()
        assert cfg.method is Method.PCG
        assert cfg.tol == 1e-8
        assert cfg.max_iters == 10_000
        assert cfg.damping == 1.0
        assert cfg.relaxation == 1.0
        assert cfg.preconditioner is Preconditioner.JACOBI_DIAG
        assert cfg.tol_fine is None

    def test_string_coercion(self):
        cfg = SolverConfig(method="sor", preconditioner="ic0")
        assert cfg.method is Method.SOR
        assert cfg.preconditioner is Preconditioner.INCOMPLETE_CHOLESKY0

    @pytest.mark.parametrize(
        "kwargs",
        [
            {"tol": 0.0},
            {"tol": -1e-8},
            {"max_iters": 0},
            {"damping": 0.0},
            {"damping": 1.2},
            {"relaxation": 0.0},
            {"relaxation": 2.0},
            {"tol_fine": 0.0},
            {"method": "newton"},
            {"preconditioner": "ilu"},
        ],
    )
    def test_rejects_bad_values(self, kwargs):
        with pytest.raises(ValueError):
            SolverConfig(**kwargs)


class TestRelativeResidual:
    def test_zero_guess_is_one(self, elastic):
        system, _, _ = elastic
        x = np.zeros_like(system.load[0])
        assert relative_residual(system, x, system.load[0]) == 1.0

    def test_exact_solution_is_tiny(self, elastic):
        system, _, exact = elastic
        assert relative_residual(system, exact, system.load[0]) < 1e-12

    def test_matches_dense_arithmetic(self, elastic):
        system, dense_k, _ = elastic
        rng = np.random.default_rng(5)
        f = system.load[0]
        x = rng.standard_normal(f.shape)
        expected = np.linalg.norm(f - dense_k @ x) / np.linalg.norm(f)
        assert relative_residual(system, x, f) == pytest.approx(expected, rel=1e-12)

    def test_zero_rhs_falls_back_to_absolute(self):
        a = np.diag([2.0, 3.0, 4.0])
        x = np.ones(3)
        assert relative_residual(a, x, np.zeros(3)) == pytest.approx(
            np.linalg.norm(a @ x), rel=1e-14
        )


class TestStationaryAgainstTextbook:
    CASES = [
        ("jacobi", {}, lambda a, b, x: jacobi_step(a, b, x)),
        (
            "damped_jacobi",
            {"damping": 0.7},
            lambda a, b, x: damped_jacobi_step(a, b, x, 0.7),
        ),
        ("gauss_seidel", {}, lambda a, b, x: gauss_seidel_step(a, b, x)),
        ("sor", {"relaxation": 1.3}, lambda a, b, x: sor_step(a, b, x, 1.3)),
    ]

    @pytest.mark.parametrize("method,extra,step", CASES, ids=[c[0] for c in CASES])
    def test_iterates_match(self, method, extra, step):
        rng = np.random.default_rng(11)
        for _ in range(3):
            a = random_spd(rng)
            b = rng.standard_normal(10)
            ref = np.zeros(10)
            for sweeps in range(1, 6):
                ref = step(a, b, ref)
                cfg = SolverConfig(method=method, tol=1e-30, max_iters=sweeps, **extra)
                x, report = solve(a, b, cfg)
                assert report.iterations == sweeps
                np.testing.assert_allclose(x, ref, rtol=0, atol=1e-12)

    def test_sor_unit_relaxation_equals_gauss_seidel(self):
        rng = np.random.default_rng(21)
        for _ in range(10):
            a = random_spd(rng)
            b = rng.standard_normal(10)
            x_gs, _ = solve(a, b, SolverConfig(method="gauss_seidel", tol=1e-30, max_iters=5))
            x_sor, _ = solve(
                a, b, SolverConfig(method="sor", relaxation=1.0, tol=1e-30, max_iters=5)
            )
            np.testing.assert_allclose(x_sor, x_gs, rtol=0, atol=1e-12)

    def test_unit_damping_equals_jacobi(self):
        rng = np.random.default_rng(22)
        for _ in range(10):
            a = random_spd(rng)
            b = rng.standard_normal(10)
            x_j, _ = solve(a, b, SolverConfig(method="jacobi", tol=1e-30, max_iters=5))
            x_d, _ = solve(
                a, b, SolverConfig(method="damped_jacobi", damping=1.0, tol=1e-30, max_iters=5)
            )
            np.testing.assert_allclose(x_d, x_j, rtol=0, atol=1e-12)

    def test_zero_diagonal_rejected(self):
        a = np.array([[0.0, 1.0], [1.0, 2.0]])
        with pytest.raises(ValueError, match="nonzero diagonal"):
            solve(a, np.ones(2), SolverConfig(method="jacobi", tol=1e-30, max_iters=3))


class TestSolve:
    def test_jacobi_exact_on_diagonal_system(self):
        a = np.diag([2.0, 5.0, 9.0, 1.5])
        b = np.array([4.0, 10.0, 27.0, 3.0])
        x, report = solve(a, b, SolverConfig(method="jacobi", tol=1e-14, max_iters=10))
        assert report.converged
        assert report.iterations == 1
        np.testing.assert_allclose(x, b / np.diag(a), rtol=1e-14)

    def test_pcg_matches_dense_solution(self, elastic):
        system, _, exact = elastic
        f = system.load[0]
        x, report = solve(system, f, SolverConfig(method="pcg", tol=1e-12))
        assert report.converged
        assert relative_residual(system, x, f) < 1e-12
        np.testing.assert_allclose(x, exact, rtol=0, atol=1e-8 * np.linalg.norm(exact))

    @pytest.mark.parametrize(
        "method", ["jacobi", "damped_jacobi", "gauss_seidel", "sor", "cg", "pcg"]
    )
    def test_exact_start_returns_immediately(self, method):
        rng = np.random.default_rng(31)
        a = random_spd(rng, 12)
        x_true = rng.standard_normal(12)
        b = a @ x_true
        x, report = solve(a, b, SolverConfig(method=method, tol=1e-10), X0=x_true)
        assert report.iterations == 0
        assert report.converged
        np.testing.assert_allclose(x, x_true, rtol=0, atol=0)

    def test_zero_rhs_converges_without_work(self, elastic):
        system, _, _ = elastic
        f = np.zeros_like(system.load[0])
        x, report = solve(system, f, SolverConfig(method="pcg", tol=1e-8))
        assert report.converged
        assert report.iterations == 0
        assert report.initial_residual == 0.0
        assert not x.any()

    def test_cg_finite_termination(self):
        rng = np.random.default_rng(7)
        for m in (10, 30, 50):
            a = random_spd(rng, m)
            b = rng.standard_normal(m)
            _, report = solve(a, b, SolverConfig(method="cg", tol=1e-12, max_iters=2 * m))
            assert report.converged
            assert report.iterations <= m

    def test_rejects_bad_shapes(self):
        rng = np.random.default_rng(1)
        a = random_spd(rng, 8)
        b = rng.standard_normal(8)
        with pytest.raises(ValueError, match="f must have"):
            solve(a, np.ones(5), SolverConfig())
        with pytest.raises(ValueError, match="X0 must have"):
            solve(a, b, SolverConfig(), X0=np.ones(5))


class TestWarmStart:
    def test_scaled_exact_start_is_monotone(self, elastic):
        system, _, exact = elastic
        f = system.load[0]
        iters = []
        for t in (0.0, 0.5, 0.9, 1.0):
            _, report = solve(system, f, SolverConfig(method="pcg", tol=1e-8), X0=t * exact)
            iters.append(report.iterations)
        assert iters == sorted(iters, reverse=True)
        assert iters[-1] == 0
        assert iters[1] < iters[0] or iters[2] < iters[0]

    def test_benefit_shrinks_at_tighter_tolerance(self, elastic):
        # a good start pays off most when the stop threshold is loose
        system, _, exact = elastic
        f = system.load[0]
        ratios = {}
        for tol in (1e-3, 1e-10):
            _, cold = solve(system, f, SolverConfig(method="pcg", tol=tol))
            _, warm = solve(system, f, SolverConfig(method="pcg", tol=tol), X0=0.9 * exact)
            ratios[tol] = warm.iterations / cold.iterations
        assert ratios[1e-3] < ratios[1e-10]


class TestDivergence:
    def test_jacobi_diverges_on_dominated_offdiagonal(self):
        a = 0.1 * np.eye(12) + np.ones((12, 12))
        b = np.ones(12)
        with pytest.raises(DivergenceError) as excinfo:
            solve(a, b, SolverConfig(method="jacobi", tol=1e-10, max_iters=500))
        report = excinfo.value.report
        assert not report.converged
        assert len(report.residual_history) == report.iterations + 1
        assert report.residual_history[-1] > 1e5 * report.residual_history[0]

    def test_jacobi_diverges_on_heterogeneous_operator(self, elastic):
        # the undamped point method is unstable on this operator class
        system, _, _ = elastic
        with pytest.raises(DivergenceError):
            solve(system, system.load[0], SolverConfig(method="jacobi", tol=1e-10, max_iters=500))

    def test_cg_rejects_indefinite_matrix(self):
        a = np.diag([1.0, -1.0])
        with pytest.raises(DivergenceError, match="curvature"):
            solve(a, np.array([0.0, 1.0]), SolverConfig(method="cg", tol=1e-12))


class TestEmpiricalConvergenceRate:
    def test_geometric_history(self):
        report = synthetic_report([0.5**k for k in range(12)])
        assert empirical_convergence_rate(report) == pytest.approx(np.log(2.0), abs=1e-6)

    def test_stalled_history_rates_zero(self):
        report = synthetic_report([1.0] * 12)
        assert empirical_convergence_rate(report) == 0.0

    def test_needs_enough_entries(self):
        with pytest.raises(ValueError, match="at least 10"):
            empirical_convergence_rate(synthetic_report([1.0] * 5))

    def test_stable_across_window_length(self, elastic):
        # damped sweeps converge where the undamped method diverges; the
        # fitted rate should not depend much on how long we watch
        system, _, _ = elastic
        f = system.load[0]
        rates = []
        for max_iters in (60, 240):
            cfg = SolverConfig(method="damped_jacobi", damping=0.5, tol=1e-30, max_iters=max_iters)
            _, report = solve(system, f, cfg)
            rates.append(empirical_convergence_rate(report))
        assert rates[0] > 0
        assert rates[1] > 0
        assert abs(rates[0] - rates[1]) <= 0.2 * abs(rates[1])


class TestPreconditioners:
    def test_ic0_beats_diagonal_scaling(self, elastic):
        system, _, _ = elastic
        f = system.load[0]
        _, diag = solve(
            system, f, SolverConfig(method="pcg", preconditioner="jacobi_diag", tol=1e-10)
        )
        _, ic0 = solve(system, f, SolverConfig(method="pcg", preconditioner="ic0", tol=1e-10))
        assert not ic0.preconditioner_fallback
        assert ic0.preconditioner is Preconditioner.INCOMPLETE_CHOLESKY0
        assert ic0.iterations < diag.iterations

    def test_preconditioners_agree_on_solution(self, elastic):
        system, _, exact = elastic
        f = system.load[0]
        solutions = []
        for name in ("none", "jacobi_diag", "ic0"):
            x, report = solve(
                system, f, SolverConfig(method="pcg", preconditioner=name, tol=1e-12)
            )
            assert report.converged
            solutions.append(x)
        scale = np.linalg.norm(exact)
        for x in solutions:
            np.testing.assert_allclose(x, exact, rtol=0, atol=1e-8 * scale)

    def test_matrix_free_limit_falls_back(self):
        occupancy = np.ones((33, 33, 33), dtype=bool)
        model = prefine.VoxelModel(33, occupancy, 0.3, 1.0)
        system = PeriodicSystem(model)
        cfg = SolverConfig(method="pcg", preconditioner="ic0", tol=1e-30, max_iters=2)
        with pytest.warns(UserWarning, match="explicit assembly"):
            _, report = solve(system, system.load[0], cfg)
        assert report.preconditioner_fallback
        assert report.preconditioner is Preconditioner.JACOBI_DIAG
        assert not report.converged

    def test_ic0_full_pattern_is_exact(self):
        rng = np.random.default_rng(3)
        b = rng.standard_normal((6, 6))
        a = b @ b.T + 6 * np.eye(6)
        apply_inverse = _ic0_inverse(_Operator(sp.csr_matrix(a)))
        v = rng.standard_normal(6)
        np.testing.assert_allclose(
            apply_inverse(v), np.linalg.solve(a, v), rtol=0, atol=1e-12
        )

    def test_ic0_breaks_down_on_indefinite_matrix(self):
        a = np.array([[1.0, 2.0], [2.0, 1.0]])
        assert _ic0_inverse(_Operator(sp.csr_matrix(a))) is None


class TestDecideFinetune:
    def test_exact_solution_skips(self, elastic):
        system, _, exact = elastic
        assert decide_finetune(system, exact, system.load[0], 1e-8) is False

    def test_poor_guess_triggers(self, elastic):
        system, _, _ = elastic
        x = np.zeros_like(system.load[0])
        assert decide_finetune(system, x, system.load[0], 1e-8) is True

    def test_threshold_is_the_tolerance(self, elastic):
        system, _, exact = elastic
        f = system.load[0]
        residual = relative_residual(system, 0.999 * exact, f)
        assert decide_finetune(system, 0.999 * exact, f, residual * 0.5) is True
        assert decide_finetune(system, 0.999 * exact, f, residual * 2.0) is False


class TestSolveReport:
    def test_history_invariants(self, elastic):
        system, _, _ = elastic
        f = system.load[0]
        _, report = solve(system, f, SolverConfig(method="pcg", tol=1e-8))
        assert report.residual_history[0] == report.initial_residual == 1.0
        assert report.iterations == len(report.residual_history) - 1
        assert report.converged
        assert report.residual_history[-1] < report.tol

    def test_json_round_trip(self, elastic):
        system, _, _ = elastic
        _, report = solve(system, system.load[0], SolverConfig(method="pcg", tol=1e-8))
        payload = report.to_json_dict()
        assert payload["method"] == "pcg"
        assert payload["preconditioner"] == "jacobi_diag"
        assert payload["converged"] is True
        assert payload["iterations"] == report.iterations
        assert payload["initial_residual"] == 1.0
        assert payload["preconditioner_fallback"] is False
        assert payload["wall_time_s"] >= 0.0
        decoded = json.loads(json.dumps(payload))
        assert decoded["residual_history"] == list(report.residual_history)

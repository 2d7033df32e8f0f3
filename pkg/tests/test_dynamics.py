import math

import numpy as np
import pytest

from sparselv import (
    IntegrationError,
    assemble,
    convergence_rate,
    general_regular_pattern,
    integrate_lv,
    jacobian_spectrum,
    lv_field,
    solve_feasibility,
    stability_certificate,
)
from _helpers import off_diagonal_2x2, zero_matrix


class TestLvField:
    def test_zero_at_equilibrium(self):
        np.testing.assert_array_equal(lv_field(zero_matrix(4), np.ones(4)), np.zeros(4))

    def test_logistic_value(self):
        M = zero_matrix(1)
        assert lv_field(M, np.array([0.25]))[0] == pytest.approx(0.25 * 0.75)


class TestIntegrateLv:
    def test_logistic_closed_form(self):
        # decoupled species follow x(t) = 1 / (1 + e^-t) from x0 = 1/2
        M = zero_matrix(3)
        tr = integrate_lv(M, np.full(3, 0.5), 5.0, rel_tol=1e-10, abs_tol=1e-12)
        expected = 1.0 / (1.0 + math.exp(-5.0))
        np.testing.assert_allclose(tr.final_state, expected, rtol=1e-8)
        assert expected == pytest.approx(0.993307149, abs=1e-9)

    def test_equilibrium_is_fixed(self):
        tr = integrate_lv(zero_matrix(4), np.ones(4), 10.0)
        np.testing.assert_allclose(tr.final_state, np.ones(4), atol=1e-8)
        assert tr.converged

    def test_positivity_preserved(self):
        p = general_regular_pattern(60, 6, rng_seed=3)
        M = assemble(p, alpha=math.sqrt(math.log(60)), seed=4)
        tr = integrate_lv(M, np.full(60, 0.5), 40.0)
        assert tr.min_series.min() > -1e-9

    def test_matches_linear_solution(self):
        # feasible regime: trajectory settles on the solution of x = 1 + Mx
        p = general_regular_pattern(50, 5, rng_seed=7)
        M = assemble(p, alpha=6.0, seed=8)
        rep = solve_feasibility(M)
        assert rep.feasible
        tr = integrate_lv(M, np.full(50, 0.5), 60.0, rel_tol=1e-10, abs_tol=1e-12)
        np.testing.assert_allclose(tr.final_state, rep.x, atol=1e-7)

    def test_snapshots_and_distance(self):
        M = zero_matrix(2)
        ref = np.ones(2)
        tr = integrate_lv(
            M, np.full(2, 0.5), 4.0, snapshot_times=(2.0,), reference=ref
        )
        assert 2.0 in tr.snapshots
        np.testing.assert_allclose(
            tr.snapshots[2.0], 1.0 / (1.0 + math.exp(-2.0)), rtol=1e-6
        )
        assert tr.distance_series.shape == tr.times.shape
        assert tr.distance_series[-1] < tr.distance_series[0]
        header, rows = tr.series_rows()
        assert header == ["t", "min", "max", "mean", "dist"]
        assert len(rows[0]) == 5

    def test_blowup_raises_with_partial_record(self):
        # strong mutualism: finite-time blowup must abort, not return junk
        M = off_diagonal_2x2(5.0)
        with pytest.raises(IntegrationError) as exc_info:
            integrate_lv(M, np.array([2.0, 2.0]), 50.0)
        assert exc_info.value.record is not None

    def test_input_validation(self):
        M = zero_matrix(3)
        with pytest.raises(ValueError):
            integrate_lv(M, np.ones(4), 1.0)
        with pytest.raises(ValueError):
            integrate_lv(M, np.array([1.0, 0.0, 1.0]), 1.0)
        with pytest.raises(ValueError):
            integrate_lv(M, np.ones(3), 0.0)
        with pytest.raises(ValueError):
            integrate_lv(M, np.ones(3), 1.0, snapshot_times=(2.0,))


class TestJacobianSpectrum:
    def test_zero_matrix_at_one(self):
        rep = jacobian_spectrum(zero_matrix(5), np.ones(5))
        np.testing.assert_allclose(np.sort(rep.eigenvalues.real), -np.ones(5))
        assert rep.max_real_part == pytest.approx(-1.0)
        assert rep.localization_error == pytest.approx(0.0, abs=1e-12)

    def test_analytic_2x2(self):
        M = off_diagonal_2x2(0.3)
        x = np.full(2, 1.0 / 0.7)
        rep = jacobian_spectrum(M, x)
        got = np.sort(rep.eigenvalues.real)
        np.testing.assert_allclose(got, [-1.3 / 0.7, -0.7 / 0.7], rtol=1e-12)
        assert rep.localization_error == pytest.approx(3.0 / 7.0, rel=1e-10)

    def test_matches_dense_oracle(self):
        p = general_regular_pattern(30, 4, rng_seed=5)
        M = assemble(p, alpha=5.0, seed=6)
        x = solve_feasibility(M).x
        rep = jacobian_spectrum(M, x)
        oracle = np.linalg.eigvals(np.diag(x) @ (-np.eye(30) + M.dense()))
        np.testing.assert_allclose(
            np.sort_complex(rep.eigenvalues), np.sort_complex(oracle), atol=1e-10
        )

    def test_spectrum_conjugate_symmetric(self):
        p = general_regular_pattern(20, 3, rng_seed=9)
        M = assemble(p, alpha=4.0, seed=10)
        rep = jacobian_spectrum(M, solve_feasibility(M).x)
        ev = rep.eigenvalues
        np.testing.assert_allclose(
            np.sort_complex(ev), np.sort_complex(ev.conj()), atol=1e-10
        )

    def test_validation(self):
        M = zero_matrix(3)
        with pytest.raises(ValueError):
            jacobian_spectrum(M, np.array([1.0, -1.0, 1.0]))
        with pytest.raises(ValueError):
            jacobian_spectrum(M, np.ones(3), dense_limit=2)


class TestStabilityCertificate:
    def test_zero_matrix(self):
        cert = stability_certificate(zero_matrix(4))
        assert cert.vl_stable_proxy and cert.sym_max_eig == 0.0

    def test_symmetric_2x2(self):
        # M + M^T = [[0, 0.6], [0.6, 0]] has top eigenvalue 0.6 < 2
        cert = stability_certificate(off_diagonal_2x2(0.3))
        assert cert.sym_max_eig == pytest.approx(0.6, rel=1e-8)
        assert cert.vl_stable_proxy

    def test_unstable_proxy(self):
        cert = stability_certificate(off_diagonal_2x2(1.5))
        assert cert.sym_max_eig == pytest.approx(3.0, rel=1e-8)
        assert not cert.vl_stable_proxy

    def test_matches_eigvalsh(self):
        for seed in range(4):
            p = general_regular_pattern(40, 5, rng_seed=seed)
            M = assemble(p, alpha=2.0, seed=20 + seed)
            cert = stability_certificate(M)
            S = M.dense() + M.dense().T
            exact = float(np.linalg.eigvalsh(S)[-1])
            assert cert.sym_max_eig == pytest.approx(exact, rel=1e-7, abs=1e-9)


class TestConvergenceRate:
    def test_logistic_rate_near_minus_one(self):
        M = zero_matrix(2)
        tr = integrate_lv(
            M, np.full(2, 1.5), 10.0, rel_tol=1e-12, abs_tol=1e-13,
            reference=np.ones(2),
        )
        rate = convergence_rate(tr)
        assert rate == pytest.approx(-1.0, abs=0.05)

    def test_sentinel_when_at_precision(self):
        M = zero_matrix(2)
        tr = integrate_lv(
            M, np.full(2, 1.0 + 1e-3), 100.0, reference=np.ones(2)
        )
        # floor raised to the integrator noise level for default tolerances
        assert convergence_rate(tr, floor=1e-7) is None

    def test_kept_states_route(self):
        M = zero_matrix(2)
        tr = integrate_lv(M, np.full(2, 1.5), 8.0, rel_tol=1e-12,
                          abs_tol=1e-13, keep_states=True)
        rate = convergence_rate(tr, x_star=np.ones(2))
        assert rate == pytest.approx(-1.0, abs=0.05)

    def test_missing_inputs(self):
        tr = integrate_lv(zero_matrix(2), np.full(2, 0.5), 1.0)
        with pytest.raises(ValueError):
            convergence_rate(tr)

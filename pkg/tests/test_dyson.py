import math

import numpy as np
import pytest

from dplr.dyson import (
    TailSample,
    TimeGrid,
    _advance_adaptive,
    collect_gap_samples,
    coupled_gap_run,
    eigenvalue_sde_path,
    eigenvector_flow_path,
    fit_tail_exponent,
    matrix_diffusion_path,
    matrix_diffusion_terminals,
    sde_terminal_ensemble,
)
from dplr.errors import (
    InsufficientTailData,
    InvalidInput,
    NoGaps,
    StiffnessFailure,
)
from dplr.harness import ks_critical, ks_statistic
from dplr.hermitian import eigh
from dplr.randmat import NoiseEnsemble, RngStream


class TestTimeGrid:
    def test_dt_and_times(self):
        grid = TimeGrid(0.0, 1.0, 4)
        assert grid.dt == 0.25
        assert np.allclose(grid.times(), [0.0, 0.25, 0.5, 0.75, 1.0])

    @pytest.mark.parametrize("args", [(-1.0, 1.0, 4), (0.0, 0.0, 4), (0.0, 1.0, 0)])
    def test_invalid(self, args):
        with pytest.raises(InvalidInput):
            TimeGrid(*args)


class TestMatrixDiffusion:
    def test_zero_noise_keeps_spectrum(self):
        m = np.diag([3.0, 1.0, -2.0]).astype(complex)
        traj = matrix_diffusion_path(m, TimeGrid(0.0, 1.0, 10), "gue", RngStream(1, 0), noise_scale=0.0)
        for row in traj.eigenvalues:
            assert np.allclose(row, [3.0, 1.0, -2.0], atol=1e-12)

    def test_rows_sorted(self):
        traj = matrix_diffusion_path(
            np.zeros((4, 4), dtype=complex), TimeGrid(0.0, 1.0, 20), "gue", RngStream(2, 0)
        )
        assert np.all(np.diff(traj.eigenvalues, axis=1) <= 0.0)

    def test_scalar_variance_grows_linearly(self):
        # d=1: the single eigenvalue is a Brownian motion of variance 4t
        t = 0.7
        vals = matrix_diffusion_terminals(np.zeros((1, 1), dtype=complex), t, "goe", seed=3, n_trials=100_000)
        assert np.var(vals[:, 0]) == pytest.approx(4.0 * t, rel=0.05)

    def test_terminal_matches_definitional_sample(self):
        # at t=1 from M=0 the path is one noise draw
        from dplr.randmat import sample_noise

        traj = matrix_diffusion_path(
            np.zeros((3, 3), dtype=complex), TimeGrid(0.0, 1.0, 1), "gue", RngStream(4, 9)
        )
        expected = np.linalg.eigvalsh(sample_noise(3, "gue", RngStream(4, 9)))[::-1]
        assert np.allclose(traj.eigenvalues[-1], expected, atol=1e-12)

    def test_scaled_time_exchangeability(self):
        # gaps at time 4 are distributed as 2x the gaps at time 1
        m = np.zeros((2, 2), dtype=complex)
        a = matrix_diffusion_terminals(m, 4.0, "gue", seed=33, n_trials=4000)
        b = matrix_diffusion_terminals(m, 1.0, "gue", seed=32, n_trials=4000)
        stat = ks_statistic(a[:, 0] - a[:, 1], 2.0 * (b[:, 0] - b[:, 1]))
        assert stat < ks_critical(4000, 4000, alpha=0.01)

    def test_keep_vectors_unitary(self):
        traj = matrix_diffusion_path(
            np.diag([2.0, 0.0]).astype(complex), TimeGrid(0.0, 0.5, 5), "gue", RngStream(5, 0),
            keep_vectors=True,
        )
        for u in traj.eigenvectors:
            assert np.linalg.norm(u.conj().T @ u - np.eye(2)) <= 1e-9


class TestEigenvalueSde:
    def test_d1_is_brownian_motion(self):
        grid = TimeGrid(0.0, 1.0, 100)
        vals = np.array(
            [eigenvalue_sde_path([0.0], 1, grid, RngStream(6, t)).terminal()[0] for t in range(5000)]
        )
        assert np.mean(vals) == pytest.approx(0.0, abs=0.1)
        assert np.var(vals) == pytest.approx(4.0, rel=0.1)

    def test_zero_noise_drift_direction(self):
        # repulsion drift for the noise convention used here: 2*beta/gap per
        # neighbor, so gamma0=(1,-1) at beta=2 moves by (+2, -2) per unit time
        grid = TimeGrid(0.0, 1e-6, 1)
        traj = eigenvalue_sde_path([1.0, -1.0], 2, grid, RngStream(0, 0), noise_scale=0.0)
        step = (traj.eigenvalues[1] - traj.eigenvalues[0]) / grid.dt
        assert np.allclose(step, [2.0, -2.0], atol=1e-6)

    def test_zero_noise_consumes_no_randomness(self):
        grid = TimeGrid(0.0, 0.1, 10)
        rng = RngStream(7, 0)
        eigenvalue_sde_path([2.0, -2.0], 2, grid, rng, noise_scale=0.0)
        after = rng.normals(3)
        assert np.array_equal(after, RngStream(7, 0).normals(3))

    def test_output_sorted_and_reproducible(self):
        grid = TimeGrid(0.0, 0.5, 200)
        a = eigenvalue_sde_path([4.0, 1.0, -1.0, -4.0], 2, grid, RngStream(8, 3))
        b = eigenvalue_sde_path([4.0, 1.0, -1.0, -4.0], 2, grid, RngStream(8, 3))
        assert np.array_equal(a.eigenvalues, b.eigenvalues)
        assert np.all(np.diff(a.eigenvalues, axis=1) < 0.0)

    def test_invalid_initial_conditions(self):
        grid = TimeGrid(0.0, 1.0, 10)
        with pytest.raises(InvalidInput):
            eigenvalue_sde_path([1.0, 1.0, 0.0], 2, grid, RngStream(0, 0))
        with pytest.raises(InvalidInput):
            eigenvalue_sde_path([0.0, 1.0], 2, grid, RngStream(0, 0))
        with pytest.raises(InvalidInput):
            eigenvalue_sde_path([1.0, -1.0], 3, grid, RngStream(0, 0))

    def test_coincident_start_needs_noise(self):
        with pytest.raises(InvalidInput):
            eigenvalue_sde_path([0.0, 0.0], 2, TimeGrid(0.0, 1.0, 10), RngStream(0, 0), noise_scale=0.0)

    def test_ensemble_matches_single_paths(self):
        grid = TimeGrid(0.0, 0.3, 100)
        gamma0 = [5.0, 2.0, -2.0, -5.0]
        ens = sde_terminal_ensemble(gamma0, 2, grid, seed=9, n_trials=3)
        for m in range(3):
            single = eigenvalue_sde_path(gamma0, 2, grid, RngStream(9, m))
            assert np.array_equal(ens[m], single.terminal())

    def test_coincident_start_equilibrium_gap(self):
        # from (0,0) the time-1 gap matches the matrix-diffusion gap (KS)
        grid = TimeGrid(0.0, 1.0, 1000)
        sde = sde_terminal_ensemble(np.zeros(2), 2, grid, seed=31, n_trials=4000)
        mat = matrix_diffusion_terminals(np.zeros((2, 2), dtype=complex), 1.0, "gue", seed=32, n_trials=4000)
        stat = ks_statistic(sde[:, 0] - sde[:, 1], mat[:, 0] - mat[:, 1])
        assert stat < ks_critical(4000, 4000, alpha=0.01)

    def test_stiffness_failure_reports_location(self):
        # crafted increment large enough that no halving depth can keep order
        gamma = np.array([1e-4, 0.0])
        with pytest.raises(StiffnessFailure) as err:
            _advance_adaptive(
                gamma, 0.5, 1e-3, np.array([-1000.0, 1000.0]), 2.0, 1.0, RngStream(10, 0), 0, 0, 0
            )
        assert err.value.indices == (0,)
        assert err.value.time >= 0.5


class TestEigenvectorFlow:
    def test_zero_noise_vectors_constant(self):
        dec = eigh(np.diag([3.0, 1.0, -2.0]))
        traj = eigenvector_flow_path(dec, 2, TimeGrid(0.0, 1.0, 1000), RngStream(11, 0), noise_scale=0.0)
        assert np.max(np.abs(traj.eigenvectors[-1] - traj.eigenvectors[0])) <= 1e-6

    def test_stored_unitarity_defect(self):
        dec = eigh(np.diag([3.0, 1.0, -2.0]))
        traj = eigenvector_flow_path(dec, 2, TimeGrid(0.0, 1.0, 500), RngStream(12, 0))
        for s in range(0, 501, 50):
            u = traj.eigenvectors[s]
            assert np.linalg.norm(u.conj().T @ u - np.eye(3)) <= 1e-6

    def test_short_time_continuity_slope(self):
        # E[Re<u_i(0), u_i(t)>] ~= 1 - beta * sum_j gap_ij^-2 * t for small t
        gamma0 = np.array([2.0, 0.0, -2.0])
        dec0 = eigh(np.diag(gamma0))
        t_small, beta, trials = 0.01, 2, 1500
        grid = TimeGrid(0.0, t_small, 10)
        acc = np.zeros(3)
        for m in range(trials):
            traj = eigenvector_flow_path(dec0, beta, grid, RngStream(123, m))
            for i in range(3):
                acc[i] += np.real(np.vdot(dec0.vectors[:, i], traj.eigenvectors[-1][:, i]))
        emp_slope = (1.0 - acc / trials) / t_small
        pred = np.array(
            [beta * sum(1.0 / (gamma0[i] - gamma0[j]) ** 2 for j in range(3) if j != i) for i in range(3)]
        )
        assert np.all(np.abs(emp_slope - pred) <= 0.2 * pred)

    def test_requires_strict_gaps(self):
        with pytest.raises(InvalidInput):
            eigenvector_flow_path(eigh(np.eye(2)), 2, TimeGrid(0.0, 1.0, 10), RngStream(0, 0))


class TestCoupledGapRun:
    GRID = TimeGrid(0.0, 1.0, 1000)
    XI0 = np.array([1.5, 0.5, -0.5, -1.5])
    GAMMA0 = np.array([3.0, 1.0, -1.0, -3.0])

    def test_identical_initial_conditions_bitwise(self):
        report = coupled_gap_run(self.GAMMA0, self.GAMMA0, 2, self.GRID, RngStream(13, 0))
        assert report.max_violation == 0.0
        assert report.first_crossing_time is None
        assert np.all(report.violations == 0.0)

    def test_zero_noise_strict_domination(self):
        report = coupled_gap_run(self.XI0, self.GAMMA0, 2, self.GRID, RngStream(13, 1), noise_scale=0.0)
        assert report.max_violation == 0.0

    def test_violation_within_discretization_tolerance(self):
        tol = 5.0 * math.sqrt(self.GRID.dt)
        worst = 0.0
        for r in range(20):
            report = coupled_gap_run(self.XI0, self.GAMMA0, 2, self.GRID, RngStream(99, r))
            worst = max(worst, report.max_violation)
        assert worst <= tol

    def test_initial_domination_enforced(self):
        with pytest.raises(InvalidInput):
            coupled_gap_run(self.GAMMA0, self.XI0, 2, self.GRID, RngStream(0, 0))

    def test_warm_started_zero_path_dominated(self):
        # dominated path starting at (0, 0) warm-starts, then stays below
        tol = 5.0 * math.sqrt(self.GRID.dt)
        worst = 0.0
        for r in range(20):
            report = coupled_gap_run(
                np.zeros(2), np.array([1.0, -1.0]), 2, self.GRID, RngStream(202, r)
            )
            worst = max(worst, report.max_violation)
        assert worst <= tol

    def test_equal_coincident_starts_identical(self):
        report = coupled_gap_run(np.zeros(3), np.zeros(3), 2, self.GRID, RngStream(4, 1))
        assert report.max_violation == 0.0

    def test_non_neighbor_scaled_gap_monotonicity(self):
        # P(gamma_i - gamma_j <= (j-i) * s * sqrt(t) / sqrt(d)) decreasing in j-i
        d, i, n = 8, 2, 4000
        vals = matrix_diffusion_terminals(np.zeros((d, d), dtype=complex), 1.0, "gue", seed=55, n_trials=n)
        for s in (1.0, 2.0, 3.0):
            probs = []
            for j in range(i + 1, d + 1):
                thr = (j - i) * s / math.sqrt(d)
                probs.append(float(np.mean(vals[:, i - 1] - vals[:, j - 1] <= thr)))
            assert all(probs[a] >= probs[a + 1] for a in range(len(probs) - 1))


class TestGapSamples:
    def test_counts_and_positivity(self):
        sample = collect_gap_samples(4, "gue", 2, 1000, RngStream(14, 0))
        assert sample.scaled_gaps.shape == (1000,)
        assert np.all(sample.scaled_gaps >= 0.0)
        assert sample.n_trials == 1000 and sample.gap_index == 2

    def test_no_gaps_for_scalar(self):
        with pytest.raises(NoGaps):
            collect_gap_samples(1, "gue", 1, 1000, RngStream(0, 0))

    def test_index_validation(self):
        with pytest.raises(InvalidInput):
            collect_gap_samples(4, "gue", 4, 1000, RngStream(0, 0))

    def test_minimum_trials(self):
        with pytest.raises(InvalidInput):
            collect_gap_samples(4, "gue", 1, 999, RngStream(0, 0))


class TestTailFit:
    def _synthetic(self, n, power, seed):
        u = RngStream(seed, 0).uniforms(n)
        return TailSample(2, NoiseEnsemble.GUE, 1, n, u ** (1.0 / power))

    def test_cubic_synthetic(self):
        fit = fit_tail_exponent(self._synthetic(200_000, 3.0, 1))
        assert fit.fitted_exponent == pytest.approx(3.0, abs=0.05)
        assert fit.stderr < 0.01

    def test_quadratic_synthetic(self):
        fit = fit_tail_exponent(self._synthetic(200_000, 2.0, 1))
        assert fit.fitted_exponent == pytest.approx(2.0, abs=0.05)

    def test_window_inside_support(self):
        fit = fit_tail_exponent(self._synthetic(50_000, 3.0, 2))
        lo, hi = fit.fit_window
        gaps = fit.scaled_gaps
        assert gaps.min() <= lo <= hi <= gaps.max()

    def test_insufficient_data(self):
        sample = TailSample(2, NoiseEnsemble.GUE, 1, 100, np.linspace(0.1, 1.0, 100))
        with pytest.raises(InsufficientTailData):
            fit_tail_exponent(sample)

    def test_gue_bulk_exponent_small_run(self):
        # reduced-size version of the acceptance criterion
        sample = collect_gap_samples(8, "gue", 4, 5000, RngStream(16, 0))
        fit = fit_tail_exponent(sample)
        assert 2.2 <= fit.fitted_exponent <= 3.8

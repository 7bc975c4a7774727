"""Acceptance suite: one test per release criterion, each printing a
PASS/FAIL line (run with ``pytest tests/test_acceptance.py -v -s``).

Every tolerance is fixed here, not configurable; runtime budgets are
asserted alongside the numerical checks.
"""

import math
import time

import numpy as np
import pytest

from dplr.bounds import classical_locations, subspace_utility_bound
from dplr.dyson import (
    TimeGrid,
    collect_gap_samples,
    coupled_gap_run,
    fit_tail_exponent,
    matrix_diffusion_terminals,
    sde_terminal_ensemble,
)
from dplr.harness import (
    ExperimentConfig,
    VERIFY_CHECKS,
    ks_critical,
    ks_statistic,
    run_utility_campaign,
    verify_suite,
)
from dplr.hermitian import eigh, rank_k_truncate
from dplr.mechanism import privacy_time
from dplr.randmat import RngStream, sample_noise_batch


class _Criterion:
    def __init__(self, number, label, budget_s):
        self.number = number
        self.label = label
        self.budget_s = budget_s
        self.t0 = None

    def __enter__(self):
        self.t0 = time.perf_counter()
        return self

    def __exit__(self, exc_type, exc, tb):
        elapsed = time.perf_counter() - self.t0
        status = "PASS" if exc_type is None else "FAIL"
        print(f"CRITERION {self.number:02d} {self.label}: {status} ({elapsed:.1f} s)")
        if exc_type is None:
            assert elapsed < self.budget_s, (
                f"criterion {self.number} exceeded its {self.budget_s} s budget: {elapsed:.1f} s"
            )
        return False


def _random_hermitian(d, rng, scale=1.0):
    a = rng.normals((d, d)) + 1j * rng.normals((d, d))
    return scale * (a + a.conj().T) / 2.0


def test_criterion_01_eigensolver_contract():
    with _Criterion(1, "eigensolver contract", 10.0):
        rng = RngStream(101, 0)
        for trial in range(1000):
            d = 2 + trial % 15
            scale = 10.0 ** (trial % 5 - 2)
            m = _random_hermitian(d, rng, scale)
            dec = eigh(m)
            tol = 1e-9 * max(1.0, np.linalg.norm(m))
            assert np.linalg.norm(dec.reconstruct() - m) <= tol
            assert np.linalg.norm(dec.vectors.conj().T @ dec.vectors - np.eye(d)) <= 1e-9
            assert np.all(np.diff(dec.values) <= 0.0)


def test_criterion_02_eckart_young_oracle():
    with _Criterion(2, "Eckart-Young oracle", 5.0):
        rng = RngStream(102, 0)
        for trial in range(50):
            d = 2 + trial % 5
            k = 1 + trial % d
            g = _random_hermitian(d, rng)
            m = g @ g.conj().T
            base = np.linalg.norm(m - rank_k_truncate(eigh(m), k).entries)
            for _ in range(200):
                q = np.linalg.qr(rng.normals((d, k)) + 1j * rng.normals((d, k)))[0]
                z = (q * rng.normals(k)) @ q.conj().T
                assert base <= np.linalg.norm(m - z) + 1e-9


def test_criterion_03_privacy_calibration():
    with _Criterion(3, "privacy calibration", 30.0):
        params = privacy_time(1.0, 0.05)
        assert abs(params.T - 6.437751649736401) <= 1e-9
        T = params.T
        block = math.sqrt(T) * sample_noise_batch(100_000, 2, "gue", RngStream(103, 0))
        assert abs(np.var(block[:, 0, 0].real) - 4.0 * T) <= 0.05 * 4.0 * T
        assert abs(np.var(block[:, 0, 1].real) - 2.0 * T) <= 0.05 * 2.0 * T
        assert abs(np.var(block[:, 0, 1].imag) - 2.0 * T) <= 0.05 * 2.0 * T


def test_criterion_04_gap_tail_exponents():
    with _Criterion(4, "GUE/GOE tail exponents", 180.0):
        gue = fit_tail_exponent(collect_gap_samples(8, "gue", 4, 20_000, RngStream(104, 0)))
        assert 2.5 <= gue.fitted_exponent <= 3.5, f"GUE exponent {gue.fitted_exponent}"
        goe = fit_tail_exponent(collect_gap_samples(8, "goe", 4, 20_000, RngStream(104, 1)))
        assert 1.6 <= goe.fitted_exponent <= 2.4, f"GOE exponent {goe.fitted_exponent}"


def test_criterion_05_sde_matrix_equivalence():
    with _Criterion(5, "SDE vs matrix-diffusion KS", 300.0):
        gamma0 = np.array([6.0, 2.0, -2.0, -6.0])
        grid = TimeGrid(0.0, 1.0, 1000)
        n = 5000
        sde = sde_terminal_ensemble(gamma0, 2, grid, seed=11, n_trials=n)
        mat = matrix_diffusion_terminals(
            np.diag(gamma0).astype(np.complex128), 1.0, "gue", seed=12, n_trials=n
        )
        crit = ks_critical(n, n, alpha=0.01)
        for j in range(4):
            stat = ks_statistic(sde[:, j], mat[:, j])
            assert stat < crit, f"coordinate {j}: KS {stat:.4f} >= {crit:.4f}"


def test_criterion_06_coupled_gap_domination():
    with _Criterion(6, "coupled gap domination", 120.0):
        grid = TimeGrid(0.0, 1.0, 1000)
        xi0 = np.array([1.5, 0.5, -0.5, -1.5])
        gamma0 = np.array([3.0, 1.0, -1.0, -3.0])
        tol = 5.0 * math.sqrt(grid.dt)
        worst = 0.0
        for r in range(100):
            report = coupled_gap_run(xi0, gamma0, 2, grid, RngStream(99, r))
            worst = max(worst, report.max_violation)
        assert worst <= tol, f"max violation {worst:.4f} > {tol:.4f}"


def test_criterion_07_classical_locations():
    with _Criterion(7, "classical locations and gap sandwich", 10.0):
        for d in (16, 64, 256):
            cs = classical_locations(d)
            assert np.max(cs.residuals()) <= 1e-10
            gaps = cs.gaps()
            i = np.arange(1, d + 1, dtype=np.float64)
            local = np.minimum(i, d - i + 1) ** (-1.0 / 3.0)
            lo = d ** (-1.0 / 6.0) * local
            hi = 2.0 * math.pi * d ** (-1.0 / 6.0) * local
            assert np.all(gaps >= lo) and np.all(gaps <= hi)


def test_criterion_08_utility_rate_tightness():
    with _Criterion(8, "utility rate tightness", 120.0):
        base = dict(
            kind="utility", d=32, k=2, trials=100, T_override=1.0, ensemble="gue",
            family="two_block", scale=500.0, seed=77,
        )
        rms = {}
        for c in (2.0, 1.0):
            report = run_utility_campaign(ExperimentConfig(**{**base, "gap_ratio": c}))
            rms[c] = report.rms["hat_frob"]
        ratio = rms[2.0] / (math.sqrt(2 * 32) * 2.0 * 1.0)
        assert 0.1 <= ratio <= 10.0, f"empirical/theory ratio {ratio:.3f}"
        assert rms[2.0] > rms[1.0], f"rate not monotone in gap ratio: {rms}"


@pytest.mark.filterwarnings("ignore::dplr.errors.GapAssumptionWarning")
def test_criterion_09_weaker_metric_gap_freedom():
    # the 1e-6 gap violates the gap assumption by design; the campaign
    # warns and proceeds, which is exactly the behavior under test
    with _Criterion(9, "weaker-metric gap freedom", 120.0):
        k, d, T = 4, 32, 1.0
        scale = 10.0
        cfg = ExperimentConfig(
            kind="utility", d=d, k=k, trials=100, T_override=T, ensemble="gue",
            family="two_block", gap_ratio=scale / 1e-6, scale=scale, seed=78,
        )
        report = run_utility_campaign(cfg)
        spectrum = report.spectrum
        assert spectrum[k - 1] - spectrum[k] == pytest.approx(1e-6, rel=1e-6)
        weak_rms = report.rms["weak_frob_sq"]
        assert weak_rms <= 20.0 * math.sqrt(k * d * T), f"sqrt(mean weak) {weak_rms:.2f}"
        # the strong metric may blow up at a degenerate gap; recorded only
        print(f"  strong_frob rms at 1e-6 gap (recorded): {report.rms['strong_frob']:.2f}")


def test_criterion_10_subspace_bound_dominance():
    with _Criterion(10, "subspace bound dominance", 5.0):
        rng = RngStream(110, 0)
        T = 1.0
        for _ in range(200):
            d = 4 + int(rng.uniforms(()) * 13)
            k = 1 + int(rng.uniforms(()) * (d - 1))
            spectrum = np.sort(rng.uniforms(d))[::-1] * 10.0
            spectrum[:k] += 4.0 * math.sqrt(T * d) + spectrum[k] - spectrum[k - 1]
            gap = spectrum[k - 1] - spectrum[k]
            bound = subspace_utility_bound(spectrum, k, T)
            assert bound <= math.sqrt(k) * math.sqrt(d) / gap * math.sqrt(T) + 1e-9


def test_criterion_11_verify_suite_and_negative_controls():
    with _Criterion(11, "verify suite green + fault isolation", 600.0):
        result = verify_suite(seed=0)
        assert result["passed"], {
            name: c["passed"] for name, c in result["checks"].items()
        }
        for fault in VERIFY_CHECKS:
            controlled = verify_suite(seed=0, inject_fault=fault, quick=True)
            reds = [n for n, c in controlled["checks"].items() if not c["passed"]]
            assert reds == [fault], f"fault {fault} turned red: {reds}"

"""Deterministic experiment runner: Monte Carlo campaigns, verification
suite, and CSV/JSON reporting.

Every report file starts with ``#`` metadata lines (version, timestamp,
seed, stream derivation, config); the non-comment body is byte-identical
across runs with the same config and seed.
"""

from __future__ import annotations

import dataclasses
import json
import math
import subprocess
import time
import warnings
from dataclasses import dataclass, field
from datetime import datetime, timezone
from pathlib import Path

import numpy as np

from . import __version__
from .bounds import (
    PolylogFactor,
    classical_locations,
    covariance_utility_bound,
    rigidity_envelope,
    subspace_utility_bound,
    weaker_metric_bound,
)
from .dyson import (
    TimeGrid,
    collect_gap_samples,
    coupled_gap_run,
    fit_tail_exponent,
    matrix_diffusion_terminals,
    sde_terminal_ensemble,
)
from .errors import DegenerateGap, GapAssumptionWarning, InvalidInput, InvalidRank
from .hermitian import eigh, rank_k_truncate, spectral_norm, top_k_projector
from .mechanism import (
    FIELD_ORDER,
    PrivacyParams,
    complex_gaussian_mechanism,
    privacy_time,
    real_gaussian_mechanism,
)
from .randmat import (
    NoiseEnsemble,
    RngStream,
    _mix64,
    sample_noise_batch,
    semicircle_normalization,
)
from .spectra import SpectrumFamily, generate_spectrum, matrix_with_spectrum


def version_string() -> str:
    """Package version, annotated with `git describe` output when available."""
    base = f"dplr {__version__}"
    try:
        desc = subprocess.run(
            ["git", "describe", "--always", "--dirty", "--tags"],
            capture_output=True,
            text=True,
            timeout=2.0,
            cwd=Path(__file__).resolve().parent,
        )
        if desc.returncode == 0 and desc.stdout.strip():
            return f"{base} ({desc.stdout.strip()})"
    except (OSError, subprocess.SubprocessError):
        pass
    return base


def _fmt(x) -> str:
    if isinstance(x, (bool, np.bool_)):
        return "true" if x else "false"
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    if isinstance(x, str):
        return x
    return f"{float(x):.17g}"


def header_lines(seed: int, config: dict | None = None, extra: dict | None = None) -> list:
    lines = [
        f"# {version_string()}",
        f"# generated: {datetime.now(timezone.utc).isoformat()}",
        f"# seed: {seed}",
        "# streams: Philox4x64 keyed by splitmix64(seed, stream_id); "
        "normals via inverse CDF on 53-bit uniforms",
    ]
    if config is not None:
        lines.append(f"# config: {json.dumps(config, sort_keys=True)}")
    for key, value in (extra or {}).items():
        lines.append(f"# {key}: {value}")
    return lines


def write_csv(path, headers: list, columns: list, rows: list, footers: list | None = None):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w") as fh:
        for line in headers:
            fh.write(line + "\n")
        fh.write(",".join(columns) + "\n")
        for row in rows:
            fh.write(",".join(_fmt(x) for x in row) + "\n")
        for row in footers or ():
            fh.write(",".join(_fmt(x) for x in row) + "\n")


def ks_statistic(a, b) -> float:
    """Two-sample Kolmogorov-Smirnov statistic."""
    a = np.sort(np.asarray(a, dtype=np.float64))
    b = np.sort(np.asarray(b, dtype=np.float64))
    pooled = np.concatenate([a, b])
    cdf_a = np.searchsorted(a, pooled, side="right") / a.size
    cdf_b = np.searchsorted(b, pooled, side="right") / b.size
    return float(np.max(np.abs(cdf_a - cdf_b)))


def ks_critical(n: int, m: int, alpha: float = 0.01) -> float:
    """Asymptotic two-sample KS critical value c(alpha)*sqrt((n+m)/(n*m))."""
    return math.sqrt(-math.log(alpha / 2.0) / 2.0) * math.sqrt((n + m) / (n * m))


@dataclass
class ExperimentConfig:
    """Configuration for one experiment run (JSON-serializable).

    For noise calibration exactly one of (epsilon, delta) or T_override must
    be supplied for kinds that add noise.
    """

    kind: str
    d: int = 8
    k: int = 1
    trials: int = 100
    epsilon: float | None = None
    delta: float | None = None
    T_override: float | None = None
    ensemble: str = "gue"
    family: str = "two_block"
    gap_ratio: float = 1.0
    scale: float = 1.0
    custom_spectrum: list = field(default_factory=list)
    basis: str = "random"
    gap_index: int = 1
    polylog_L: float = 1.0
    require_gap: bool = False
    dbm_mode: str = "matrix"
    t0: float = 0.0
    t_end: float = 1.0
    steps: int = 1000
    gamma0: list = field(default_factory=list)
    xi0: list = field(default_factory=list)
    seed: int = 0
    output: str | None = None

    KINDS = ("utility", "gaps", "dbm", "rigidity", "verify")

    def __post_init__(self):
        if self.kind not in self.KINDS:
            raise InvalidInput(f"kind must be one of {self.KINDS}, got {self.kind!r}")
        if self.trials < 1:
            raise InvalidInput(f"trials must be >= 1, got {self.trials}")
        if self.kind == "utility":
            has_budget = self.epsilon is not None and self.delta is not None
            has_override = self.T_override is not None
            if has_budget == has_override:
                raise InvalidInput(
                    "supply exactly one of (epsilon, delta) or T_override"
                )

    def privacy(self) -> PrivacyParams:
        if self.T_override is not None:
            return PrivacyParams.with_noise_time(self.T_override)
        if self.epsilon is None or self.delta is None:
            raise InvalidInput("no privacy budget or T override in config")
        return privacy_time(self.epsilon, self.delta)

    def spectrum_family(self) -> SpectrumFamily:
        return SpectrumFamily(
            self.family, c=self.gap_ratio, scale=self.scale,
            values=tuple(self.custom_spectrum),
        )

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)

    @classmethod
    def from_json(cls, path) -> "ExperimentConfig":
        with open(path) as fh:
            data = json.load(fh)
        return cls(**data)


UTILITY_COLUMNS = ("trial", "hat_frob") + FIELD_ORDER + ("gap_assumption",)


@dataclass(frozen=True)
class UtilityReport:
    config: dict
    spectrum: np.ndarray
    T: float
    columns: tuple
    rows: list
    rms: dict
    theory: dict
    ratio: dict


def run_utility_campaign(config: ExperimentConfig) -> UtilityReport:
    """Monte Carlo over mechanism runs on a fixed spectrum family.

    Each trial draws a fresh random eigenbasis (or keeps the matrix diagonal
    per config), runs the selected mechanism, and records the utility
    metrics plus ``hat_frob``, the Frobenius distance between the noised and
    non-private rank-k truncations that the covariance bound controls.
    Footer rows report the RMS of each metric, the matching theory bound
    (leading mode, constant 1, explicit polylog), and their ratio.
    """
    params = config.privacy()
    spectrum = generate_spectrum(config.spectrum_family(), config.d, config.k)
    ens = NoiseEnsemble.parse(config.ensemble)
    mechanism = complex_gaussian_mechanism if ens is NoiseEnsemble.GUE else real_gaussian_mechanism
    rows = []
    acc = {name: [] for name in UTILITY_COLUMNS[1:-1]}
    gap_warned = False
    for trial in range(config.trials):
        stream = RngStream(config.seed, trial)
        basis_rng = stream.substream(1) if config.basis == "random" else None
        m = matrix_with_spectrum(spectrum, basis_rng)
        result = mechanism(m, config.k, params, stream.substream(2), psd_check="skip")
        if not result.gap_assumption_holds:
            if config.require_gap:
                raise InvalidInput(f"gap assumption violated at trial {trial}")
            if not gap_warned:
                warnings.warn(
                    "gap assumption violated; campaign proceeds with flags recorded",
                    GapAssumptionWarning,
                    stacklevel=2,
                )
                gap_warned = True
        m_k = rank_k_truncate(eigh(m), config.k).entries
        m_hat_k = rank_k_truncate(eigh(result.M_hat), config.k).entries
        hat_frob = float(np.linalg.norm(m_hat_k - m_k))
        metrics = result.metrics.as_dict()
        row = [trial, hat_frob] + [metrics[name] for name in FIELD_ORDER]
        row.append(bool(result.gap_assumption_holds))
        rows.append(row)
        acc["hat_frob"].append(hat_frob)
        for name in FIELD_ORDER:
            acc[name].append(metrics[name])

    rms = {}
    for name, values in acc.items():
        arr = np.asarray(values)
        if name == "weak_frob_sq":
            rms[name] = float(math.sqrt(max(float(np.mean(arr)), 0.0)))
        else:
            rms[name] = float(math.sqrt(np.mean(arr**2)))

    polylog = PolylogFactor(config.d, config.polylog_L)
    theory = {}
    gap = spectrum[config.k - 1] - spectrum[config.k] if config.k < config.d else spectrum[-1]
    if gap > 0:
        cov = covariance_utility_bound(spectrum, config.k, config.d, params.T, polylog)
        theory["hat_frob"] = cov
        theory["strong_frob"] = 2.0 * cov
        try:
            theory["subspace_frob"] = subspace_utility_bound(spectrum, config.k, params.T)
        except (DegenerateGap, InvalidRank):
            pass
    theory["weak_frob_sq"] = weaker_metric_bound(config.k, config.d, params.T, polylog)
    ratio = {
        name: rms[name] / theory[name]
        for name in theory
        if theory[name] > 0
    }
    return UtilityReport(
        config.to_dict(), spectrum, params.T, UTILITY_COLUMNS, rows, rms, theory, ratio
    )


def write_utility_report(report: UtilityReport, path):
    footers = []
    for label, values in (("rms", report.rms), ("theory", report.theory), ("ratio", report.ratio)):
        row = [label] + [
            _fmt(values[name]) if name in values else ""
            for name in report.columns[1:-1]
        ] + [""]
        footers.append(row)
    write_csv(
        path,
        header_lines(
            report.config["seed"],
            report.config,
            extra={
                "noise_time_T": _fmt(report.T),
                "spectrum": " ".join(_fmt(v) for v in report.spectrum),
                "footer_rows": "rms,theory,ratio (theory: leading mode, constant 1, polylog explicit)",
            },
        ),
        list(report.columns),
        report.rows,
        footers,
    )


@dataclass(frozen=True)
class GapReport:
    config: dict
    sample: object


def run_gap_campaign(config: ExperimentConfig) -> GapReport:
    rng = RngStream(config.seed, 0)
    sample = collect_gap_samples(
        config.d, config.ensemble, config.gap_index, config.trials, rng
    )
    return GapReport(config.to_dict(), fit_tail_exponent(sample))


def write_gap_report(report: GapReport, path):
    s = report.sample
    write_csv(
        path,
        header_lines(
            report.config["seed"],
            report.config,
            extra={
                "fitted_exponent": _fmt(s.fitted_exponent),
                "stderr": _fmt(s.stderr),
                "fit_window": f"{_fmt(s.fit_window[0])} {_fmt(s.fit_window[1])}",
                "n_fit_points": s.n_fit_points,
            },
        ),
        ["scaled_gap"],
        [[g] for g in s.scaled_gaps],
    )


@dataclass(frozen=True)
class RigidityReport:
    config: dict
    max_ratios: np.ndarray
    argmax_indices: np.ndarray
    median_max_ratio: float
    classical_residual: float


def run_rigidity_check(config: ExperimentConfig) -> RigidityReport:
    """Per-trial max_j |eta_j - omega_j| / envelope_j for noise spectra
    normalized to the semicircle scale (eigenvalues divided by sqrt(2*beta))."""
    ens = NoiseEnsemble.parse(config.ensemble)
    classical = classical_locations(config.d)
    envelope = rigidity_envelope(config.d, config.polylog_L)
    omegas = classical.omegas[: config.d]
    norm = semicircle_normalization(ens)
    rng = RngStream(config.seed, 0)
    max_ratios = np.empty(config.trials)
    argmax = np.empty(config.trials, dtype=np.int64)
    batch = 256
    done = 0
    while done < config.trials:
        n = min(batch, config.trials - done)
        block = sample_noise_batch(n, config.d, ens, rng)
        vals = np.linalg.eigvalsh(block)[:, ::-1] / norm
        ratios = np.abs(vals - omegas) / envelope
        max_ratios[done : done + n] = np.max(ratios, axis=1)
        argmax[done : done + n] = np.argmax(ratios, axis=1) + 1
        done += n
    return RigidityReport(
        config.to_dict(),
        max_ratios,
        argmax,
        float(np.median(max_ratios)),
        float(np.max(classical.residuals())),
    )


def write_rigidity_report(report: RigidityReport, path):
    write_csv(
        path,
        header_lines(
            report.config["seed"],
            report.config,
            extra={
                "median_max_ratio": _fmt(report.median_max_ratio),
                "classical_residual_max": _fmt(report.classical_residual),
                "spectrum_normalization": "eigenvalues divided by sqrt(2*beta)",
            },
        ),
        ["trial", "max_ratio", "argmax_index"],
        [
            [t, report.max_ratios[t], int(report.argmax_indices[t])]
            for t in range(report.max_ratios.shape[0])
        ],
    )


# ---------------------------------------------------------------------------
# Verification suite
# ---------------------------------------------------------------------------

VERIFY_CHECKS = (
    "eckart_young",
    "weyl",
    "sin_theta",
    "moment_calibration",
    "ks_sde_vs_matrix",
    "coupled_gap",
    "classical_sandwich",
)


def _check_stream(seed: int, name: str) -> RngStream:
    sid = _mix64(sum(ord(c) << (8 * (i % 8)) for i, c in enumerate(name)) & ((1 << 64) - 1))
    return RngStream(seed, sid)


def _random_hermitian(d: int, rng: RngStream) -> np.ndarray:
    a = rng.normals((d, d)) + 1j * rng.normals((d, d))
    return (a + a.conj().T) / 2.0


def _check_eckart_young(rng: RngStream, fault: bool, quick: bool) -> dict:
    # PSD inputs: there the algebraic top-k truncation is the magnitude
    # truncation, which is Frobenius-optimal among all rank-<=k matrices
    n_mats = 10 if quick else 20
    n_cand = 50 if quick else 100
    worst = -np.inf
    for _ in range(n_mats):
        d = 2 + int(rng.uniforms(()) * 5)
        k = min(d, 1 + int(rng.uniforms(()) * d))
        g = _random_hermitian(d, rng)
        m = g @ g.conj().T
        dec = eigh(m)
        if fault:
            # negative control: keep the k *smallest* eigenvalues instead
            kept = np.zeros_like(dec.values)
            kept[d - k :] = dec.values[d - k :]
            trunc = (dec.vectors * kept) @ dec.vectors.conj().T
        else:
            trunc = rank_k_truncate(dec, k).entries
        base = np.linalg.norm(m - trunc)
        for _ in range(n_cand):
            q = np.linalg.qr(rng.normals((d, k)) + 1j * rng.normals((d, k)))[0]
            z = (q * rng.normals(k)) @ q.conj().T
            worst = max(worst, base - np.linalg.norm(m - z))
    return {"passed": bool(worst <= 1e-9), "detail": {"max_excess": float(worst)}}


def _check_weyl(rng: RngStream, fault: bool, quick: bool) -> dict:
    trials = 15 if quick else 30
    worst = 0.0
    ok = True
    for _ in range(trials):
        d = 2 + int(rng.uniforms(()) * 7)
        a = _random_hermitian(d, rng)
        b = _random_hermitian(d, rng)
        sa = np.linalg.eigvalsh(a)[::-1]
        sb = np.linalg.eigvalsh(b)[::-1]
        ssum = np.linalg.eigvalsh(a + b)[::-1]
        for i in range(1, d + 1):
            lo, hi = sa[i - 1] + sb[-1], sa[i - 1] + sb[0]
            if fault:
                c, w = (lo + hi) / 2.0, hi - lo
                lo, hi = c - 0.05 * w, c + 0.05 * w
            excess = max(lo - ssum[i - 1], ssum[i - 1] - hi)
            worst = max(worst, float(excess))
            ok = ok and excess <= 1e-9
    return {"passed": bool(ok), "detail": {"max_excess": worst}}


def _check_sin_theta(rng: RngStream, fault: bool, quick: bool) -> dict:
    trials = 8 if quick else 15
    ok = True
    worst = -np.inf
    for t in range(trials):
        d = 4 + int(rng.uniforms(()) * 5)
        k = 1 + int(rng.uniforms(()) * (d - 1))
        gap = 2.0 + float(rng.uniforms(()))
        vals = np.sort(rng.uniforms(d))[::-1]
        vals[:k] += gap + vals[k] - vals[k - 1]
        m = np.diag(vals)
        if t == 0:
            # adversarial direction: noise aligned with the k / k+1 rotation
            e = np.zeros((d, d))
            e[k - 1, k] = e[k, k - 1] = 0.2 * gap
        else:
            e = 0.1 * gap * np.real(_random_hermitian(d, rng)) / math.sqrt(d)
        e_norm = spectral_norm(e)
        sep = vals[k - 1] - vals[k] - e_norm
        if sep <= 0:
            continue
        if fault:
            sep *= 10.0
        p = top_k_projector(eigh(m), k).entries
        p_hat = top_k_projector(eigh(m + e), k).entries
        excess = spectral_norm(p_hat - p) - (e_norm / sep)
        worst = max(worst, float(excess))
        ok = ok and excess <= 1e-9
    return {"passed": bool(ok), "detail": {"max_excess": float(worst)}}


def _check_moment_calibration(rng: RngStream, fault: bool, quick: bool) -> dict:
    n = 20_000 if quick else 100_000
    scale = 1.0 / math.sqrt(2.0) if fault else 1.0
    detail = {}
    ok = True
    for ens in (NoiseEnsemble.GUE, NoiseEnsemble.GOE):
        block = scale * sample_noise_batch(n, 2, ens, rng)
        diag_var = float(np.var(block[:, 0, 0].real))
        off_re = float(np.var(block[:, 0, 1].real))
        off_im = float(np.var(block[:, 0, 1].imag))
        targets = {"diag": (diag_var, 4.0), "off_re": (off_re, 2.0)}
        if ens is NoiseEnsemble.GUE:
            targets["off_im"] = (off_im, 2.0)
        else:
            targets["off_im_zero"] = (off_im, 0.0)
        for label, (got, want) in targets.items():
            if want == 0.0:
                good = got == 0.0
            else:
                good = abs(got - want) <= 0.05 * want
            ok = ok and good
            detail[f"{ens.value}_{label}"] = got
    return {"passed": bool(ok), "detail": detail}


def _check_ks(rng: RngStream, fault: bool, quick: bool) -> dict:
    n = 1000 if quick else 5000
    d = 4
    gamma0 = np.array([6.0, 2.0, -2.0, -6.0])
    grid = TimeGrid(0.0, 1.0, 200 if quick else 1000)
    sde = sde_terminal_ensemble(gamma0, 2, grid, rng.seed, n, stream_base=rng.stream_id)
    t_matrix = 1.44 if fault else 1.0
    matrix = matrix_diffusion_terminals(
        np.diag(gamma0).astype(np.complex128),
        t_matrix,
        NoiseEnsemble.GUE,
        rng.seed,
        n,
        stream_base=_mix64(rng.stream_id ^ 0xA5A5),
    )
    crit = ks_critical(n, n, alpha=0.01)
    stats = [ks_statistic(sde[:, j], matrix[:, j]) for j in range(d)]
    return {
        "passed": bool(max(stats) < crit),
        "detail": {"ks_per_coordinate": stats, "critical_1pct": crit},
    }


def _check_coupled(rng: RngStream, fault: bool, quick: bool) -> dict:
    runs = 8 if quick else 20
    grid = TimeGrid(0.0, 1.0, 1000)
    xi0 = np.array([1.5, 0.5, -0.5, -1.5])
    gamma0 = np.array([3.0, 1.0, -1.0, -3.0])
    tol = 5.0 * math.sqrt(grid.dt)
    worst = 0.0
    for r in range(runs):
        stream = rng.substream(r)
        if fault:
            # negative control: break the coupling with independent noise
            from .dyson import eigenvalue_sde_path

            a = eigenvalue_sde_path(xi0, 2, grid, stream.substream(1))
            b = eigenvalue_sde_path(gamma0, 2, grid, stream.substream(2))
            viol = np.max(-np.diff(a.eigenvalues, axis=1) + np.diff(b.eigenvalues, axis=1))
            worst = max(worst, float(viol))
        else:
            report = coupled_gap_run(xi0, gamma0, 2, grid, stream)
            worst = max(worst, report.max_violation)
    return {"passed": bool(worst <= tol), "detail": {"max_violation": worst, "tolerance": tol}}


def _check_sandwich(rng: RngStream, fault: bool, quick: bool) -> dict:
    ok = True
    detail = {}
    for d in (16, 64, 256):
        classical = classical_locations(d)
        resid = float(np.max(classical.residuals()))
        gaps = classical.gaps()
        i = np.arange(1, d + 1, dtype=np.float64)
        exponent = -1.0 if fault else -1.0 / 3.0
        local = np.minimum(i, d - i + 1) ** exponent
        lo = d ** (-1.0 / 6.0) * local
        hi = 2.0 * math.pi * d ** (-1.0 / 6.0) * local
        inside = bool(np.all(gaps >= lo) and np.all(gaps <= hi))
        ok = ok and inside and resid <= 1e-10
        detail[f"d={d}"] = {"residual": resid, "gaps_inside": inside}
    return {"passed": bool(ok), "detail": detail}


_CHECK_FUNCS = {
    "eckart_young": _check_eckart_young,
    "weyl": _check_weyl,
    "sin_theta": _check_sin_theta,
    "moment_calibration": _check_moment_calibration,
    "ks_sde_vs_matrix": _check_ks,
    "coupled_gap": _check_coupled,
    "classical_sandwich": _check_sandwich,
}


def verify_suite(seed: int = 0, inject_fault: str | None = None, quick: bool = False) -> dict:
    """Run the full invariant battery and return machine-readable results.

    ``inject_fault`` names one check to sabotage (negative control); all
    other checks run untouched.
    """
    if inject_fault is not None and inject_fault not in _CHECK_FUNCS:
        raise InvalidInput(
            f"unknown check {inject_fault!r}; choose from {sorted(_CHECK_FUNCS)}"
        )
    checks = {}
    for name in VERIFY_CHECKS:
        stream = _check_stream(seed, name)
        t0 = time.perf_counter()
        result = _CHECK_FUNCS[name](stream, fault=(inject_fault == name), quick=quick)
        result["wall_time_s"] = time.perf_counter() - t0
        result["seed"] = {"seed": stream.seed, "stream_id": stream.stream_id}
        result["fault_injected"] = inject_fault == name
        checks[name] = result
    return {
        "version": version_string(),
        "seed": seed,
        "quick": quick,
        "passed": all(c["passed"] for c in checks.values()),
        "checks": checks,
    }


def run_experiment(config: ExperimentConfig) -> dict:
    """Dispatch a config to its campaign; writes the output file if requested.

    Returns a JSON-serializable summary.
    """
    if config.kind == "utility":
        report = run_utility_campaign(config)
        if config.output:
            write_utility_report(report, config.output)
        return {"kind": "utility", "rms": report.rms, "theory": report.theory, "ratio": report.ratio}
    if config.kind == "gaps":
        report = run_gap_campaign(config)
        if config.output:
            write_gap_report(report, config.output)
        s = report.sample
        return {
            "kind": "gaps",
            "fitted_exponent": s.fitted_exponent,
            "stderr": s.stderr,
            "fit_window": list(s.fit_window),
            "n_fit_points": s.n_fit_points,
        }
    if config.kind == "rigidity":
        report = run_rigidity_check(config)
        if config.output:
            write_rigidity_report(report, config.output)
        return {
            "kind": "rigidity",
            "median_max_ratio": report.median_max_ratio,
            "classical_residual_max": report.classical_residual,
        }
    if config.kind == "verify":
        result = verify_suite(config.seed)
        if config.output:
            Path(config.output).parent.mkdir(parents=True, exist_ok=True)
            with open(config.output, "w") as fh:
                json.dump(result, fh, indent=2, sort_keys=True)
        return result
    return _run_dbm_experiment(config)


def _write_trajectory_csv(path, traj, seed, config):
    d = traj.eigenvalues.shape[1]
    write_csv(
        path,
        header_lines(seed, config),
        ["time"] + [f"eig{i}" for i in range(1, d + 1)],
        [[t] + list(traj.eigenvalues[s]) for s, t in enumerate(traj.times)],
    )


def _run_dbm_experiment(config: ExperimentConfig) -> dict:
    from .dyson import (
        coupled_gap_run,
        eigenvalue_sde_path,
        eigenvector_flow_path,
        matrix_diffusion_path,
    )
    from .hermitian import eigh

    grid = TimeGrid(config.t0, config.t_end, config.steps)
    rng = RngStream(config.seed, 0)
    beta = NoiseEnsemble.parse(config.ensemble).beta
    gamma0 = np.asarray(config.gamma0, dtype=np.float64)
    if config.dbm_mode == "coupled":
        report = coupled_gap_run(np.asarray(config.xi0, dtype=np.float64), gamma0, beta, grid, rng)
        if config.output:
            write_csv(
                config.output,
                header_lines(config.seed, config.to_dict()),
                ["time", "violation"],
                [[t, v] for t, v in zip(report.times, report.violations)],
            )
        return {
            "kind": "dbm",
            "mode": "coupled",
            "max_violation": report.max_violation,
            "first_crossing_time": report.first_crossing_time,
        }
    if config.dbm_mode == "matrix":
        m = np.diag(gamma0).astype(np.complex128) if gamma0.size else np.zeros(
            (config.d, config.d), dtype=np.complex128
        )
        traj = matrix_diffusion_path(m, grid, config.ensemble, rng)
    elif config.dbm_mode == "sde":
        if not gamma0.size:
            raise InvalidInput("sde mode needs gamma0")
        traj = eigenvalue_sde_path(gamma0, beta, grid, rng)
    elif config.dbm_mode == "flow":
        if not gamma0.size:
            raise InvalidInput("flow mode needs gamma0")
        traj = eigenvector_flow_path(eigh(np.diag(gamma0)), beta, grid, rng)
    else:
        raise InvalidInput(f"unknown dbm mode {config.dbm_mode!r}")
    if config.output:
        _write_trajectory_csv(config.output, traj, config.seed, config.to_dict())
    return {
        "kind": "dbm",
        "mode": config.dbm_mode,
        "terminal_eigenvalues": [float(x) for x in traj.eigenvalues[-1]],
    }

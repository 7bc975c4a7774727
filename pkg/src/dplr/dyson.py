"""Eigenvalue and eigenvector diffusions of a Hermitian matrix under
additive Brownian noise, plus gap-statistics collection with tail-exponent
fitting.

The matrix process is Phi(t) = M + B(t) with B = W + W* (entry convention of
:mod:`dplr.randmat`: diagonal variance 4t, off-diagonal second moment 4t for
the unitary class and 2t for the orthogonal class).  Under this convention
the eigenvalues solve

    d gamma_i = dB_ii + 2*beta * sum_{j != i} dt / (gamma_i - gamma_j)

and the eigenvectors solve the matching first-order flow driven by the
off-diagonal increments.  The repulsion coefficient 2*beta (not beta) is
forced by the noise normalization: in the 2x2 unitary case the gap is
exactly sqrt(8) times a 3-dimensional Bessel process, which requires drift
8/gap, and the same second-order perturbation argument gives 2*beta in
general.  Conventions that write the drift as beta/gap pair it with
diagonal variance 2*dt, i.e. the process of B(t)/sqrt(2).

Paths are integrated by Euler-Maruyama with diagonal-noise variance 4*dt
per particle inherited from the B = W + W* convention.

Near-collisions are handled by recursive local step halving: the proposed
step is rejected whenever it would break the strict ordering or whenever
the repulsion drift alone would move some gap by more than half its size
(explicit Euler overshoots the 1/gap singularity otherwise).  The Brownian
increment is split with a bridge, so refinement preserves the underlying
path and coupled runs stay coupled; both halves are retried, down to a
floor of dt * 2**-20.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np

from .errors import (
    InsufficientTailData,
    InvalidInput,
    NoGaps,
    StiffnessFailure,
)
from .randmat import (
    NoiseEnsemble,
    RngStream,
    ensemble_for_beta,
    sample_noise,
    sample_noise_batch,
)

MAX_HALVING_DEPTH = 20


@dataclass(frozen=True)
class TimeGrid:
    """Uniform time grid t0 = t_0 < ... < t_steps = t_end."""

    t0: float
    t_end: float
    steps: int

    def __post_init__(self):
        if self.t0 < 0 or self.t_end <= self.t0 or self.steps < 1:
            raise InvalidInput(
                f"need 0 <= t0 < t_end and steps >= 1, got {self.t0}, {self.t_end}, {self.steps}"
            )

    @property
    def dt(self) -> float:
        return (self.t_end - self.t0) / self.steps

    def times(self) -> np.ndarray:
        return self.t0 + self.dt * np.arange(self.steps + 1)


@dataclass(frozen=True)
class TrajectorySet:
    """Time grid plus per-time sorted eigenvalues (and optional eigenvectors)."""

    grid: TimeGrid
    beta: int
    eigenvalues: np.ndarray
    eigenvectors: np.ndarray | None = None
    max_unitarity_defect: float = 0.0

    def __post_init__(self):
        self.eigenvalues.setflags(write=False)
        if self.eigenvectors is not None:
            self.eigenvectors.setflags(write=False)

    @property
    def times(self) -> np.ndarray:
        return self.grid.times()

    def terminal(self) -> np.ndarray:
        return np.array(self.eigenvalues[-1])


@dataclass(frozen=True)
class TailSample:
    """Scaled neighbor-gap samples (eta_i - eta_{i+1}) * sqrt(d) with an
    optional fitted log-log CDF exponent."""

    d: int
    ensemble: NoiseEnsemble
    gap_index: int
    n_trials: int
    scaled_gaps: np.ndarray
    fitted_exponent: float | None = None
    fit_window: tuple | None = None
    stderr: float | None = None
    n_fit_points: int = 0

    def __post_init__(self):
        self.scaled_gaps.setflags(write=False)


@dataclass(frozen=True)
class CoupledGapReport:
    """Result of a coupled two-path run: per-time worst gap-domination
    violation and the first time (if any) it became positive."""

    times: np.ndarray
    violations: np.ndarray
    max_violation: float
    first_crossing_time: float | None

    def __post_init__(self):
        self.times.setflags(write=False)
        self.violations.setflags(write=False)


def _node_key(step: int, depth: int, pos: int) -> int:
    # <= 2**20 positions per step at the deepest level; keys stay below 2**63
    return ((step + 1) << 26) | ((depth & 0x3F) << 20) | (pos & 0xFFFFF)


def _drift(gamma: np.ndarray, beta: float) -> np.ndarray:
    diffs = gamma[:, None] - gamma[None, :]
    np.fill_diagonal(diffs, np.inf)
    return 2.0 * beta * np.sum(1.0 / diffs, axis=1)


def _drift_batch(gamma: np.ndarray, beta: float) -> np.ndarray:
    diffs = gamma[:, :, None] - gamma[:, None, :]
    d = gamma.shape[1]
    idx = np.arange(d)
    diffs[:, idx, idx] = np.inf
    return 2.0 * beta * np.sum(1.0 / diffs, axis=2)


def _ordered(gamma: np.ndarray) -> bool:
    return bool(np.all(np.diff(gamma) < 0.0))


DRIFT_GAP_FRACTION = 0.5


def _step_acceptable(gamma: np.ndarray, drift: np.ndarray, h: float, prop: np.ndarray) -> bool:
    if not _ordered(prop):
        return False
    gaps = -np.diff(gamma)
    return bool(np.all(np.abs(np.diff(drift)) * h <= DRIFT_GAP_FRACTION * gaps))


def _advance_adaptive(
    gamma: np.ndarray,
    t: float,
    h: float,
    incr: np.ndarray,
    beta: float,
    scale: float,
    rng: RngStream,
    step_index: int,
    depth: int,
    pos: int,
) -> np.ndarray:
    """Advance one path over [t, t + h] given its Brownian increment for the
    interval, splitting the increment with a bridge whenever the Euler
    proposal breaks the ordering."""
    drift = _drift(gamma, beta)
    prop = gamma + drift * h + incr
    if _step_acceptable(gamma, drift, h, prop):
        return prop
    if depth >= MAX_HALVING_DEPTH:
        # at the floor the drift-fraction criterion degrades gracefully and
        # a crossing whose overlap is within the local noise scale is a
        # linearization artifact: resolve it by reflection (the eigenvalue
        # process is the sorted diffusion).  Larger overlaps mean the
        # integrator genuinely broke down.
        if _ordered(prop):
            return prop
        overlap = float(np.max(np.diff(prop)))
        if overlap <= 20.0 * scale * math.sqrt(8.0 * h) + 1e-300:
            return np.sort(prop)[::-1]
        bad = np.flatnonzero(np.diff(prop) >= 0.0)
        raise StiffnessFailure(t, [int(b) for b in bad])
    z = rng.substream(_node_key(step_index, depth, pos)).normals(gamma.shape[0])
    left = incr / 2.0 + scale * math.sqrt(h) * z
    mid = _advance_adaptive(
        gamma, t, h / 2.0, left, beta, scale, rng, step_index, depth + 1, 2 * pos
    )
    return _advance_adaptive(
        mid, t + h / 2.0, h / 2.0, incr - left, beta, scale, rng, step_index, depth + 1, 2 * pos + 1
    )


def _diag_increments(rng: RngStream, steps: int, d: int, dt: float, scale: float) -> np.ndarray:
    """Top-level diagonal Brownian increments dB_ii, variance 4*dt each."""
    if scale == 0.0:
        return np.zeros((steps, d))
    return 2.0 * scale * math.sqrt(dt) * rng.normals((steps, d))


def _warm_start(gamma0: np.ndarray, dt: float, beta: int, scale: float, rng: RngStream) -> np.ndarray:
    """One exact matrix-diffusion step from a coincident start: the drift is
    singular there, so the first grid step samples Phi(dt) directly."""
    d = gamma0.shape[0]
    ens = ensemble_for_beta(beta)
    incr = scale * math.sqrt(dt) * sample_noise(d, ens, rng)
    vals = np.linalg.eigvalsh(np.diag(gamma0.astype(np.complex128)) + incr)
    return vals[::-1].copy()


def _validate_gamma0(gamma0: np.ndarray) -> str:
    if gamma0.ndim != 1 or gamma0.shape[0] < 1:
        raise InvalidInput("initial eigenvalues must be a 1-d vector")
    if not np.all(np.isfinite(gamma0)):
        raise InvalidInput("initial eigenvalues must be finite")
    if np.all(gamma0 == gamma0[0]):
        return "coincident"
    if np.all(np.diff(gamma0) < 0.0):
        return "strict"
    raise InvalidInput(
        "initial eigenvalues must be strictly decreasing or all equal"
    )


def eigenvalue_sde_path(
    gamma0,
    beta: int,
    grid: TimeGrid,
    rng: RngStream,
    noise_scale: float = 1.0,
) -> TrajectorySet:
    """Euler-Maruyama path of the eigenvalue system on the given grid.

    A coincident start (all entries equal) is handled by replacing the first
    grid step with one exact matrix-diffusion draw.  ``noise_scale = 0``
    integrates the deterministic repulsion ODE (testing hook) and consumes no
    randomness.
    """
    gamma = np.array(gamma0, dtype=np.float64)
    kind = _validate_gamma0(gamma)
    if beta not in (1, 2):
        raise InvalidInput(f"beta must be 1 or 2, got {beta}")
    d = gamma.shape[0]
    steps, dt = grid.steps, grid.dt
    out = np.empty((steps + 1, d))
    out[0] = gamma
    start = 0
    if kind == "coincident":
        if d > 1 and noise_scale == 0.0:
            raise InvalidInput("coincident start requires noise (singular drift)")
        if d > 1:
            gamma = _warm_start(gamma, dt, beta, noise_scale, rng)
            out[1] = gamma
            start = 1
    incr = _diag_increments(rng, steps - start, d, dt, noise_scale)
    if d == 1:
        # scalar case: pure Brownian motion, no repulsion
        out[start + 1 :, 0] = gamma[0] + np.cumsum(incr[:, 0])
        return TrajectorySet(grid, beta, out)
    t = grid.t0 + start * dt
    for s in range(start, steps):
        gamma = _advance_adaptive(
            gamma, t, dt, incr[s - start], beta, noise_scale, rng, s, 0, 0
        )
        t += dt
        out[s + 1] = np.sort(gamma)[::-1]
        gamma = out[s + 1].copy()
    return TrajectorySet(grid, beta, out)


def sde_terminal_ensemble(
    gamma0,
    beta: int,
    grid: TimeGrid,
    seed: int,
    n_trials: int,
    stream_base: int = 0,
    noise_scale: float = 1.0,
    batch: int = 1024,
) -> np.ndarray:
    """Terminal eigenvalues of ``n_trials`` independent SDE paths, one
    RngStream per trial (stream ids ``stream_base + trial``).

    Vectorizes the common no-collision fast path across trials and falls
    back to the per-path adaptive integrator for the rare steps that break
    ordering.  Identical in law (and in the all-fast-path case identical
    bitwise) to looping :func:`eigenvalue_sde_path` over trials.
    """
    gamma_init = np.array(gamma0, dtype=np.float64)
    kind = _validate_gamma0(gamma_init)
    d = gamma_init.shape[0]
    steps, dt = grid.steps, grid.dt
    out = np.empty((n_trials, d))
    for lo in range(0, n_trials, batch):
        hi = min(lo + batch, n_trials)
        n = hi - lo
        rngs = [RngStream(seed, stream_base + m) for m in range(lo, hi)]
        gamma = np.tile(gamma_init, (n, 1))
        start = 0
        if kind == "coincident" and d > 1:
            for m, r in enumerate(rngs):
                gamma[m] = _warm_start(gamma_init, dt, beta, noise_scale, r)
            start = 1
        incr = np.empty((n, steps - start, d))
        for m, r in enumerate(rngs):
            incr[m] = _diag_increments(r, steps - start, d, dt, noise_scale)
        t = grid.t0 + start * dt
        for s in range(start, steps):
            drift = _drift_batch(gamma, beta)
            prop = gamma + drift * dt + incr[:, s - start]
            fine = np.all(np.diff(prop, axis=1) < 0.0, axis=1) & np.all(
                np.abs(np.diff(drift, axis=1)) * dt
                <= DRIFT_GAP_FRACTION * -np.diff(gamma, axis=1),
                axis=1,
            )
            bad = np.flatnonzero(~fine)
            for m in bad:
                prop[m] = _advance_adaptive(
                    gamma[m], t, dt, incr[m, s - start], beta, noise_scale, rngs[m], s, 0, 0
                )
            gamma = prop
            t += dt
        out[lo:hi] = -np.sort(-gamma, axis=1)
    return out


def matrix_diffusion_path(
    m,
    grid: TimeGrid,
    ensemble,
    rng: RngStream,
    noise_scale: float = 1.0,
    keep_vectors: bool = False,
) -> TrajectorySet:
    """Exact-in-distribution matrix diffusion: accumulate Hermitian Brownian
    increments on the grid and eigendecompose at every grid time.

    The increment process starts at zero at the first grid time, i.e. the
    path begins exactly at the input matrix.
    """
    from .hermitian import HermitianMatrix, eigh

    a = m.entries if isinstance(m, HermitianMatrix) else np.asarray(m, dtype=np.complex128)
    ens = NoiseEnsemble.parse(ensemble)
    d = a.shape[0]
    steps, dt = grid.steps, grid.dt
    vals = np.empty((steps + 1, d))
    vecs = np.empty((steps + 1, d, d), dtype=np.complex128) if keep_vectors else None
    acc = np.zeros_like(a)
    for s in range(steps + 1):
        if s > 0 and noise_scale != 0.0:
            acc = acc + noise_scale * math.sqrt(dt) * sample_noise(d, ens, rng)
        if keep_vectors:
            dec = eigh(HermitianMatrix(a + acc, tol=np.inf))
            vals[s], vecs[s] = dec.values, dec.vectors
        else:
            vals[s] = np.linalg.eigvalsh(a + acc)[::-1]
    return TrajectorySet(grid, ens.beta, vals, vecs)


def matrix_diffusion_terminals(
    m,
    t: float,
    ensemble,
    seed: int,
    n_trials: int,
    stream_base: int = 0,
    batch: int = 2048,
) -> np.ndarray:
    """Terminal eigenvalues of n independent matrix diffusions run to time t
    (single exact draw per trial; one stream per trial)."""
    from .hermitian import HermitianMatrix

    a = m.entries if isinstance(m, HermitianMatrix) else np.asarray(m, dtype=np.complex128)
    ens = NoiseEnsemble.parse(ensemble)
    d = a.shape[0]
    out = np.empty((n_trials, d))
    for lo in range(0, n_trials, batch):
        hi = min(lo + batch, n_trials)
        block = np.empty((hi - lo, d, d), dtype=np.complex128)
        for m_idx in range(lo, hi):
            rng = RngStream(seed, stream_base + m_idx)
            block[m_idx - lo] = a + math.sqrt(t) * sample_noise(d, ens, rng)
        out[lo:hi] = np.linalg.eigvalsh(block)[:, ::-1]
    return out


def _mgs(u: np.ndarray) -> np.ndarray:
    """Modified Gram-Schmidt re-orthonormalization of the columns, in order."""
    q = np.array(u)
    d = q.shape[1]
    for j in range(d):
        for i in range(j):
            q[:, j] -= (q[:, i].conj() @ q[:, j]) * q[:, i]
        q[:, j] /= np.linalg.norm(q[:, j])
    return q


def _unitarity_defect(u: np.ndarray) -> float:
    d = u.shape[1]
    return float(np.linalg.norm(u.conj().T @ u - np.eye(d)))


def eigenvector_flow_path(
    decomp0,
    beta: int,
    grid: TimeGrid,
    rng: RngStream,
    noise_scale: float = 1.0,
) -> TrajectorySet:
    """Joint Euler-Maruyama of the eigenvalue system and the eigenvector flow
    with shared Brownian increments (diagonal drives the eigenvalues,
    off-diagonal drives the vectors).

    Columns are re-orthonormalized after every step; the largest defect
    observed before re-orthonormalization is reported on the trajectory.
    """
    gamma = np.array(decomp0.values, dtype=np.float64)
    u = np.array(decomp0.vectors, dtype=np.complex128)
    if not np.all(np.diff(gamma) < 0.0):
        raise InvalidInput("initial gaps must be strictly positive")
    if beta not in (1, 2):
        raise InvalidInput(f"beta must be 1 or 2, got {beta}")
    ens = ensemble_for_beta(beta)
    d = gamma.shape[0]
    steps, dt = grid.steps, grid.dt
    vals = np.empty((steps + 1, d))
    vecs = np.empty((steps + 1, d, d), dtype=np.complex128)
    vals[0], vecs[0] = gamma, u
    max_defect = _unitarity_defect(u)
    sqdt = math.sqrt(dt)
    idx = np.arange(d)
    t = grid.t0
    for s in range(steps):
        db = (
            noise_scale * sqdt * sample_noise(d, ens, rng)
            if noise_scale != 0.0
            else np.zeros((d, d), dtype=np.complex128)
        )
        diffs = gamma[:, None] - gamma[None, :]
        diffs[idx, idx] = np.inf
        inv = 1.0 / diffs
        coeff = db * inv
        # norm-preserving compensator: E|dB_ij|^2 = 2*beta*dt per off-diagonal
        coeff[idx, idx] = -beta * dt * np.sum(inv**2, axis=1)
        new_gamma = gamma + 2.0 * beta * np.sum(inv, axis=1) * dt + np.real(np.diag(db))
        if not _ordered(new_gamma):
            new_gamma = _advance_adaptive(
                gamma, t, dt, np.real(np.diag(db)), beta, noise_scale, rng, s, 0, 0
            )
        u = u + u @ coeff.T
        max_defect = max(max_defect, _unitarity_defect(u))
        u = _mgs(u)
        order = np.argsort(-new_gamma, kind="stable")
        gamma = new_gamma[order]
        u = u[:, order]
        t += dt
        vals[s + 1], vecs[s + 1] = gamma, u
    return TrajectorySet(grid, beta, vals, vecs, max_unitarity_defect=max_defect)


def coupled_gap_run(
    xi0,
    gamma0,
    beta: int,
    grid: TimeGrid,
    rng: RngStream,
    noise_scale: float = 1.0,
) -> CoupledGapReport:
    """Run two eigenvalue paths driven by the same diagonal Brownian
    increments and report how far the initially-dominated path's gaps ever
    exceed the dominating path's gaps.

    Requires xi gaps <= gamma gaps index-wise at the start.  A coincident
    initial vector (all entries equal, e.g. the all-zero start) is
    warm-started with one exact matrix-diffusion step before coupling.  In
    the continuum the domination is preserved exactly; any positive
    violation measures discretization (or warm-start) error.
    """
    xi = np.array(xi0, dtype=np.float64)
    gamma = np.array(gamma0, dtype=np.float64)
    if xi.shape != gamma.shape:
        raise InvalidInput("xi0 and gamma0 must have equal length")
    kinds = {name: _validate_gamma0(g) for name, g in (("xi0", xi), ("gamma0", gamma))}
    if np.any(-np.diff(xi) > -np.diff(gamma)):
        raise InvalidInput("initial xi gaps must not exceed gamma gaps")
    d = xi.shape[0]
    steps, dt = grid.steps, grid.dt
    identical = bool(np.array_equal(xi, gamma))
    # a coincident start is warm-started with one exact matrix-diffusion
    # step; the draw comes from a role-keyed substream so the shared
    # diagonal increments stay aligned between the two paths
    start = 0
    if d > 1 and (kinds["xi0"] == "coincident" or kinds["gamma0"] == "coincident"):
        if noise_scale == 0.0:
            raise InvalidInput("coincident start requires noise (singular drift)")
        start = 1
        if kinds["xi0"] == "coincident":
            xi = _warm_start(xi, dt, beta, noise_scale, rng.substream(0x5741524D))
        if kinds["gamma0"] == "coincident":
            key = 0x5741524D if identical else 0x5741524E
            gamma = _warm_start(gamma, dt, beta, noise_scale, rng.substream(key))
    incr = _diag_increments(rng, steps, d, dt, noise_scale)
    times = grid.times()
    violations = np.empty(steps + 1)
    violations[0] = float(np.max(-np.diff(xi) + np.diff(gamma)))
    t = grid.t0
    for s in range(steps):
        if s == 0 and start == 1:
            # warm-start step: any strict path still takes its shared-noise step
            if kinds["xi0"] != "coincident":
                xi = _advance_adaptive(xi, t, dt, incr[s], beta, noise_scale, rng, s, 0, 0)
            if kinds["gamma0"] != "coincident":
                gamma = _advance_adaptive(gamma, t, dt, incr[s], beta, noise_scale, rng, s, 0, 0)
        else:
            xi = _advance_adaptive(xi, t, dt, incr[s], beta, noise_scale, rng, s, 0, 0)
            gamma = _advance_adaptive(gamma, t, dt, incr[s], beta, noise_scale, rng, s, 0, 0)
        t += dt
        violations[s + 1] = float(np.max(-np.diff(xi) + np.diff(gamma)))
    max_violation = float(np.max(violations))
    crossing = np.flatnonzero(violations > 0.0)
    first = float(times[crossing[0]]) if crossing.size else None
    return CoupledGapReport(times, violations, max(max_violation, 0.0), first)


def collect_gap_samples(
    d: int,
    ensemble,
    i: int,
    n_trials: int,
    rng: RngStream,
    batch: int = 2048,
) -> TailSample:
    """Scaled i-th neighbor gaps of n independent noise draws."""
    if d == 1:
        raise NoGaps("a 1x1 matrix has no eigenvalue gaps")
    if not 1 <= i < d:
        raise InvalidInput(f"gap index must lie in 1..{d - 1}, got {i}")
    if n_trials < 1000:
        raise InvalidInput(f"need at least 1000 trials, got {n_trials}")
    ens = NoiseEnsemble.parse(ensemble)
    gaps = np.empty(n_trials)
    for lo in range(0, n_trials, batch):
        hi = min(lo + batch, n_trials)
        block = sample_noise_batch(hi - lo, d, ens, rng)
        vals = np.linalg.eigvalsh(block)[:, ::-1]
        gaps[lo:hi] = vals[:, i - 1] - vals[:, i]
    return TailSample(d, ens, i, n_trials, gaps * math.sqrt(d))


def fit_tail_exponent(sample: TailSample) -> TailSample:
    """Least-squares slope of log empirical CDF against log gap size over the
    window where the CDF lies in [max(10/n, 1e-4), 0.1].

    Below the window the empirical CDF is noise-dominated; above it the
    power-law regime ends.
    """
    gaps = np.sort(sample.scaled_gaps)
    n = gaps.shape[0]
    cdf = np.arange(1, n + 1) / n
    lo, hi = max(10.0 / n, 1e-4), 0.1
    mask = (cdf >= lo) & (cdf <= hi) & (gaps > 0.0)
    if int(np.sum(mask)) < 50:
        raise InsufficientTailData(
            f"only {int(np.sum(mask))} samples inside the CDF window [{lo:.2g}, {hi:.2g}]"
        )
    x = np.log(gaps[mask])
    y = np.log(cdf[mask])
    xc = x - x.mean()
    slope = float(np.dot(xc, y) / np.dot(xc, xc))
    intercept = float(y.mean() - slope * x.mean())
    resid = y - (intercept + slope * x)
    dof = max(x.size - 2, 1)
    stderr = float(math.sqrt(np.dot(resid, resid) / dof / np.dot(xc, xc)))
    return replace(
        sample,
        fitted_exponent=slope,
        fit_window=(float(gaps[mask][0]), float(gaps[mask][-1])),
        stderr=stderr,
        n_fit_points=int(x.size),
    )

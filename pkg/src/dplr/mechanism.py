"""Private low-rank covariance approximation mechanisms and utility metrics.

The main mechanism perturbs a real symmetric PSD matrix with complex
Hermitian Gaussian noise scaled by sqrt(T), truncates the perturbed matrix to
rank k, and returns the closest real rank-<=k matrix.  The noise time T is
calibrated as T = 2*ln(1.25/delta)/epsilon**2 (natural log), the standard
Gaussian-mechanism calibration for unit-norm data rows; the complex variant
inherits the (epsilon, delta) guarantee because it post-processes the real
one.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np

from .errors import (
    InvalidInput,
    InvalidPrivacyBudget,
    InvalidRank,
    NonPsdWarning,
    RowNormViolation,
)
from .hermitian import (
    EigenDecomposition,
    HermitianMatrix,
    eigh,
    rank_k_truncate,
    spectral_norm,
    top_k_projector,
)
from .randmat import NoiseEnsemble, RngStream, sample_noise

PSD_TOL_FACTOR = 1e-9
ROW_NORM_TOL = 1e-12


@dataclass(frozen=True)
class PrivacyParams:
    """(epsilon, delta) budget and the derived noise time T.

    ``calibrated`` distinguishes parameters produced by :func:`privacy_time`
    from the T-override test hook, which carries no privacy guarantee.
    """

    epsilon: float
    delta: float
    T: float
    calibrated: bool = True

    def __post_init__(self):
        if self.calibrated:
            expected = 2.0 * math.log(1.25 / self.delta) / self.epsilon**2
            if not math.isclose(self.T, expected, rel_tol=0, abs_tol=0):
                raise InvalidPrivacyBudget("T does not match 2*ln(1.25/delta)/eps^2")
        if self.T < 0:
            raise InvalidPrivacyBudget(f"noise time must be >= 0, got {self.T}")

    @classmethod
    def with_noise_time(cls, T: float) -> "PrivacyParams":
        """Test hook: fix T directly, bypassing calibration.  NOT PRIVATE."""
        return cls(epsilon=math.inf, delta=0.0, T=float(T), calibrated=False)


def privacy_time(epsilon: float, delta: float) -> PrivacyParams:
    """Calibrate the noise time T = 2*ln(1.25/delta)/epsilon**2."""
    if not (epsilon > 0 and math.isfinite(epsilon)):
        raise InvalidPrivacyBudget(f"epsilon must be finite and > 0, got {epsilon}")
    if not (0.0 < delta < 1.0):
        raise InvalidPrivacyBudget(f"delta must lie in (0, 1), got {delta}")
    return PrivacyParams(epsilon, delta, 2.0 * math.log(1.25 / delta) / epsilon**2)


def check_gap_assumption(spectrum, k: int, T: float) -> bool:
    """True iff sigma_k - sigma_{k+1} >= 4*sqrt(T*d) (boundary inclusive).

    Callers replicating the private-mechanism guarantee should pass 2*T for a
    budget calibrated by :func:`privacy_time`; the mechanisms below do so.
    """
    vals = np.asarray(spectrum, dtype=np.float64)
    d = vals.shape[0]
    if not 1 <= k < d:
        raise InvalidRank(f"k must lie in 1..{d - 1}, got {k}")
    if np.any(np.diff(vals) > 1e-12):
        raise InvalidInput("spectrum must be sorted non-increasing")
    return bool(vals[k - 1] - vals[k] >= 4.0 * math.sqrt(T * d))


@dataclass(frozen=True)
class UtilityMetrics:
    """Distances between the mechanism output and the non-private target.

    strong_frob     ||Y - M_k||_F
    weak_frob_sq    ||Mhat_k - M||_F^2 - ||M_k - M||_F^2
    weak_frob_diff  ||Y - M||_F - ||M_k - M||_F
    subspace_frob   ||P_hat - P||_F for the top-k eigenprojectors
    subspace_spec   same in spectral norm
    inner_product   <M, P - P_hat> (Frobenius inner product)
    """

    strong_frob: float
    weak_frob_sq: float
    weak_frob_diff: float
    subspace_frob: float
    subspace_spec: float
    inner_product: float

    def as_dict(self) -> dict:
        return {
            "strong_frob": self.strong_frob,
            "weak_frob_sq": self.weak_frob_sq,
            "weak_frob_diff": self.weak_frob_diff,
            "subspace_frob": self.subspace_frob,
            "subspace_spec": self.subspace_spec,
            "inner_product": self.inner_product,
        }


FIELD_ORDER = (
    "strong_frob",
    "weak_frob_sq",
    "weak_frob_diff",
    "subspace_frob",
    "subspace_spec",
    "inner_product",
)


@dataclass(frozen=True)
class MechanismResult:
    """Output of one mechanism run: the private matrix Y, the noised matrix,
    its spectrum, the utility metrics, and the gap-assumption flag."""

    Y: np.ndarray
    M_hat: HermitianMatrix
    spectrum_hat: np.ndarray
    metrics: UtilityMetrics
    gap_assumption_holds: bool

    def __post_init__(self):
        self.Y.setflags(write=False)
        self.spectrum_hat.setflags(write=False)


@dataclass(frozen=True)
class DataMatrix:
    """Row-clipped data matrix; every stored row has Euclidean norm <= 1."""

    rows: np.ndarray
    clip_applied: bool

    @classmethod
    def from_rows(cls, rows, clip: bool) -> "DataMatrix":
        a = np.array(rows, dtype=np.float64)
        if a.ndim != 2 or a.shape[0] == 0:
            raise InvalidInput(f"expected a nonempty 2-d row set, got shape {a.shape}")
        if not np.all(np.isfinite(a)):
            raise InvalidInput("rows contain non-finite entries")
        norms = np.linalg.norm(a, axis=1)
        over = norms > 1.0 + ROW_NORM_TOL
        clipped = False
        if np.any(over):
            if not clip:
                raise RowNormViolation(
                    f"{int(np.sum(over))} row(s) exceed unit norm and clip=False"
                )
            a[over] /= norms[over, None]
            clipped = True
        a.setflags(write=False)
        return cls(a, clipped)


def covariance_from_rows(rows, clip: bool = True) -> HermitianMatrix:
    """Gram matrix A^T A of the (possibly clipped) unit-norm rows."""
    data = rows if isinstance(rows, DataMatrix) else DataMatrix.from_rows(rows, clip)
    return HermitianMatrix(data.rows.T @ data.rows, tol=np.inf)


def neighbor_perturb(m, u, v) -> HermitianMatrix:
    """Swap one data row: M - u u^T + v v^T with ||u||, ||v|| <= 1."""
    a = m.entries if isinstance(m, HermitianMatrix) else np.asarray(m, dtype=np.float64)
    uu = np.asarray(u, dtype=np.float64)
    vv = np.asarray(v, dtype=np.float64)
    for name, x in (("u", uu), ("v", vv)):
        if np.linalg.norm(x) > 1.0 + ROW_NORM_TOL:
            raise RowNormViolation(f"||{name}|| = {np.linalg.norm(x):.6g} exceeds 1")
    return HermitianMatrix(a - np.outer(uu, uu) + np.outer(vv, vv), tol=np.inf)


def _check_psd(m: np.ndarray, spectrum: np.ndarray, psd_check: str):
    if psd_check == "skip":
        return
    floor = -PSD_TOL_FACTOR * max(1.0, float(np.linalg.norm(m)))
    if spectrum[-1] < floor:
        msg = f"input matrix is not PSD: min eigenvalue {spectrum[-1]:.3e} < {floor:.3e}"
        if psd_check == "warn":
            warnings.warn(msg, NonPsdWarning, stacklevel=3)
        else:
            raise InvalidInput(msg)


def _closest_real_rank_k(m_hat_k: np.ndarray, k: int) -> np.ndarray:
    """argmin over real symmetric rank-<=k matrices of the Frobenius distance
    to the (complex Hermitian) rank-k matrix: truncate its real part to the k
    largest-magnitude eigenvalues.

    The bare real part can have rank up to 2k, so the extra truncation is
    what actually enforces the rank budget.
    """
    s = (m_hat_k.real + m_hat_k.real.T) / 2.0
    vals, vecs = np.linalg.eigh(s)
    keep = np.argsort(-np.abs(vals), kind="stable")[:k]
    kept = np.zeros_like(vals)
    kept[keep] = vals[keep]
    return (vecs * kept) @ vecs.T


def _gap_flag(values: np.ndarray, k: int, T: float) -> bool:
    if k >= values.shape[0]:
        return True
    return check_gap_assumption(values, k, 2.0 * T)


def _utility(
    m: np.ndarray,
    dec: EigenDecomposition,
    m_k: np.ndarray,
    dec_hat: EigenDecomposition,
    m_hat_k: np.ndarray,
    y: np.ndarray,
    k: int,
) -> UtilityMetrics:
    p = dec.top_vectors(k) @ dec.top_vectors(k).conj().T
    p_hat = dec_hat.top_vectors(k) @ dec_hat.top_vectors(k).conj().T
    base = float(np.linalg.norm(m_k - m))
    return UtilityMetrics(
        strong_frob=float(np.linalg.norm(y - m_k)),
        weak_frob_sq=float(np.linalg.norm(m_hat_k - m) ** 2 - base**2),
        weak_frob_diff=float(np.linalg.norm(y - m) - base),
        subspace_frob=float(np.linalg.norm(p_hat - p)),
        subspace_spec=spectral_norm(p_hat - p),
        inner_product=float(np.real(np.trace(m.conj().T @ (p - p_hat)))),
    )


def _run_mechanism(
    m, k: int, params: PrivacyParams, rng: RngStream, ensemble: NoiseEnsemble, psd_check: str
) -> MechanismResult:
    a = m.entries if isinstance(m, HermitianMatrix) else as_real_symmetric(m)
    d = a.shape[0]
    if not 1 <= k <= d:
        raise InvalidRank(f"k must lie in 1..{d}, got {k}")
    dec = eigh(a)
    _check_psd(a, dec.values, psd_check)
    m_k = rank_k_truncate(dec, k).entries

    noise = sample_noise(d, ensemble, rng)
    m_hat = HermitianMatrix(a + math.sqrt(params.T) * noise, tol=np.inf)
    dec_hat = eigh(m_hat)
    m_hat_k = rank_k_truncate(dec_hat, k).entries

    if ensemble is NoiseEnsemble.GUE:
        y = _closest_real_rank_k(m_hat_k, k)
    else:
        y = np.array(m_hat_k.real)

    metrics = _utility(a, dec, m_k, dec_hat, m_hat_k, y, k)
    return MechanismResult(
        Y=y,
        M_hat=m_hat,
        spectrum_hat=np.array(dec_hat.values),
        metrics=metrics,
        gap_assumption_holds=_gap_flag(dec.values, k, params.T),
    )


def as_real_symmetric(m) -> np.ndarray:
    a = np.asarray(m, dtype=np.float64)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise InvalidInput(f"expected a square matrix, got shape {a.shape}")
    if not np.all(np.isfinite(a)):
        raise InvalidInput("matrix has non-finite entries")
    if np.max(np.abs(a - a.T)) > 1e-12:
        raise InvalidInput("matrix is not symmetric")
    return (a + a.T) / 2.0


def complex_gaussian_mechanism(
    m, k: int, params: PrivacyParams, rng: RngStream, psd_check: str = "strict"
) -> MechanismResult:
    """Perturb with complex Hermitian Gaussian noise, truncate to rank k, and
    return the closest real rank-<=k matrix.

    Draw order is W1 then W2, so with a fresh stream the W1 draw coincides
    with the one :func:`real_gaussian_mechanism` would consume (the complex
    mechanism is a post-processing of the real one).
    """
    return _run_mechanism(m, k, params, rng, NoiseEnsemble.GUE, psd_check)


def real_gaussian_mechanism(
    m, k: int, params: PrivacyParams, rng: RngStream, psd_check: str = "strict"
) -> MechanismResult:
    """Baseline real Gaussian mechanism: perturb with W1 + W1^T noise and
    truncate to rank k (output already real)."""
    return _run_mechanism(m, k, params, rng, NoiseEnsemble.GOE, psd_check)


def subspace_mechanism(
    m, k: int, params: PrivacyParams, ensemble, rng: RngStream, psd_check: str = "skip"
) -> HermitianMatrix:
    """Private rank-k subspace recovery: projector onto the top-k eigenvectors
    of the noised matrix.  Works with either real or complex noise."""
    ens = NoiseEnsemble.parse(ensemble)
    a = m.entries if isinstance(m, HermitianMatrix) else as_real_symmetric(m)
    d = a.shape[0]
    if not 1 <= k < d:
        raise InvalidRank(f"k must lie in 1..{d - 1}, got {k}")
    if psd_check != "skip":
        _check_psd(a, eigh(a).values, psd_check)
    noise = sample_noise(d, ens, rng)
    m_hat = HermitianMatrix(a + math.sqrt(params.T) * noise, tol=np.inf)
    return top_k_projector(eigh(m_hat), k)

"""Dense complex Hermitian matrices: eigendecomposition, truncation, norms,
and the classical deterministic perturbation checkers (Weyl interval,
sin-theta ratio).

All operations are pure; every returned matrix and decomposition is
immutable (ndarray writeable flags cleared), so values can be shared freely
across threads.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import DegenerateGap, DegenerateGapWarning, InvalidInput, InvalidRank

HERMITICITY_TOL = 1e-12
ORTHONORMALITY_TOL = 1e-9
RECONSTRUCTION_TOL = 1e-9


def _freeze(a: np.ndarray) -> np.ndarray:
    a.setflags(write=False)
    return a


def as_hermitian_array(entries, tol: float = HERMITICITY_TOL) -> np.ndarray:
    """Validate a square array as Hermitian within ``tol`` and symmetrize it
    exactly as (A + A*)/2.  Returns a fresh complex128 array."""
    a = np.array(entries, dtype=np.complex128)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise InvalidInput(f"expected a square matrix, got shape {a.shape}")
    if not np.all(np.isfinite(a.real)) or not np.all(np.isfinite(a.imag)):
        raise InvalidInput("matrix has non-finite entries")
    defect = np.max(np.abs(a - a.conj().T)) if a.size else 0.0
    if defect > tol:
        raise InvalidInput(
            f"matrix is not Hermitian: max |A - A*| = {defect:.3e} > {tol:.1e}"
        )
    return (a + a.conj().T) / 2.0


class HermitianMatrix:
    """Immutable dense Hermitian matrix.

    Construction enforces conjugate symmetry within an absolute tolerance of
    1e-12 and then symmetrizes exactly, which in particular zeroes the
    imaginary part of the diagonal.
    """

    __slots__ = ("entries",)

    def __init__(self, entries, tol: float = HERMITICITY_TOL):
        object.__setattr__(self, "entries", _freeze(as_hermitian_array(entries, tol)))

    def __setattr__(self, name, value):
        raise AttributeError("HermitianMatrix is immutable")

    @property
    def dim(self) -> int:
        return self.entries.shape[0]

    @property
    def is_real(self) -> bool:
        return bool(np.all(self.entries.imag == 0.0))

    def real_part(self) -> np.ndarray:
        return np.array(self.entries.real)

    def __array__(self, dtype=None, copy=None):
        return np.asarray(self.entries, dtype=dtype)

    def __repr__(self):
        return f"HermitianMatrix(dim={self.dim})"

    @classmethod
    def identity(cls, d: int) -> "HermitianMatrix":
        return cls(np.eye(d))

    @classmethod
    def from_diag(cls, values) -> "HermitianMatrix":
        return cls(np.diag(np.asarray(values, dtype=np.float64)))


def _coerce(m) -> np.ndarray:
    if isinstance(m, HermitianMatrix):
        return m.entries
    return as_hermitian_array(m)


@dataclass(frozen=True)
class EigenDecomposition:
    """Eigenvalues sorted non-increasing plus the matching unitary eigenvectors.

    Column j of ``vectors`` is the unit eigenvector of ``values[j]``.
    """

    values: np.ndarray
    vectors: np.ndarray

    def __post_init__(self):
        _freeze(self.values)
        _freeze(self.vectors)

    @property
    def dim(self) -> int:
        return self.values.shape[0]

    def reconstruct(self) -> np.ndarray:
        return (self.vectors * self.values) @ self.vectors.conj().T

    def top_vectors(self, k: int) -> np.ndarray:
        return np.array(self.vectors[:, :k])


@dataclass(frozen=True)
class SpectrumSlice:
    """Top-k eigenvalues and the gap at the cut.

    When k = d the gap falls back to sigma_d (a zero (d+1)-th eigenvalue is
    assumed, matching the PSD setting) and ``zero_tail_convention`` is set.
    """

    k: int
    values: np.ndarray
    gap: float
    zero_tail_convention: bool = False


def spectrum_slice(values, k: int) -> SpectrumSlice:
    vals = np.asarray(values, dtype=np.float64)
    d = vals.shape[0]
    if not 1 <= k <= d:
        raise InvalidRank(f"k must lie in 1..{d}, got {k}")
    if np.any(np.diff(vals) > 1e-12):
        raise InvalidInput("spectrum is not sorted non-increasing")
    if k == d:
        return SpectrumSlice(k, np.array(vals[:k]), float(vals[-1]), True)
    return SpectrumSlice(k, np.array(vals[:k]), float(vals[k - 1] - vals[k]))


def _fix_phases(vectors: np.ndarray, tol: float = 1e-12) -> np.ndarray:
    """Deterministic phase convention: rotate each column so its first
    component of magnitude > tol becomes real and positive."""
    v = np.array(vectors)
    d = v.shape[1]
    for j in range(d):
        col = v[:, j]
        nz = np.flatnonzero(np.abs(col) > tol)
        if nz.size == 0:
            continue
        pivot = col[nz[0]]
        v[:, j] = col * (pivot.conjugate() / abs(pivot))
        v[nz[0], j] = abs(pivot) + 0j
    return v


def eigh(m) -> EigenDecomposition:
    """Full eigendecomposition with values sorted non-increasing.

    Deterministic given bit-identical input: ties are broken by the
    underlying solver's stable order and each eigenvector's phase is fixed so
    its first nonzero component is real and positive.
    """
    a = _coerce(m)
    vals, vecs = np.linalg.eigh(a)
    order = np.argsort(-vals, kind="stable")
    vals = np.ascontiguousarray(vals[order])
    vecs = _fix_phases(np.ascontiguousarray(vecs[:, order]))
    return EigenDecomposition(vals, vecs)


def _as_decomposition(m) -> EigenDecomposition:
    return m if isinstance(m, EigenDecomposition) else eigh(m)


def _check_rank(k: int, d: int):
    if not 1 <= int(k) <= d:
        raise InvalidRank(f"rank k must lie in 1..{d}, got {k}")


def _warn_if_degenerate(values: np.ndarray, k: int, what: str):
    d = values.shape[0]
    if k < d and values[k - 1] - values[k] <= 0.0:
        warnings.warn(
            f"{what} computed at zero eigenvalue gap (k={k}); result is not unique",
            DegenerateGapWarning,
            stacklevel=3,
        )


def rank_k_truncate(decomp, k: int) -> HermitianMatrix:
    """Keep the k algebraically largest eigenvalues, zero the rest.

    For PSD inputs (the covariance setting) this is the Frobenius-optimal
    rank-<=k approximation; for indefinite inputs the algebraic top-k can
    differ from the optimal magnitude truncation.
    """
    dec = _as_decomposition(decomp)
    _check_rank(k, dec.dim)
    _warn_if_degenerate(dec.values, k, "rank-k truncation")
    kept = np.zeros_like(dec.values)
    kept[:k] = dec.values[:k]
    return HermitianMatrix((dec.vectors * kept) @ dec.vectors.conj().T, tol=np.inf)


def top_k_projector(decomp, k: int) -> HermitianMatrix:
    """Orthogonal projector onto the span of the top-k eigenvectors."""
    dec = _as_decomposition(decomp)
    _check_rank(k, dec.dim)
    _warn_if_degenerate(dec.values, k, "top-k projector")
    vk = dec.vectors[:, :k]
    return HermitianMatrix(vk @ vk.conj().T, tol=np.inf)


def frobenius_norm(a) -> float:
    arr = a.entries if isinstance(a, HermitianMatrix) else np.asarray(a)
    return float(np.linalg.norm(arr))


def frobenius_distance(a, b) -> float:
    x = a.entries if isinstance(a, HermitianMatrix) else np.asarray(a)
    y = b.entries if isinstance(b, HermitianMatrix) else np.asarray(b)
    if x.shape != y.shape:
        raise InvalidInput(f"shape mismatch: {x.shape} vs {y.shape}")
    return float(np.linalg.norm(x - y))


def spectral_norm(a) -> float:
    """Largest absolute eigenvalue of a Hermitian input."""
    arr = _coerce(a)
    return float(np.max(np.abs(np.linalg.eigvalsh(arr)))) if arr.size else 0.0


def weyl_interval(spec_a, spec_b, i: int) -> tuple:
    """Interval guaranteed to contain the i-th (1-indexed, descending)
    eigenvalue of A + B given the sorted spectra of A and B:
    [sigma_i(A) + sigma_d(B), sigma_i(A) + sigma_1(B)]."""
    sa = np.asarray(spec_a, dtype=np.float64)
    sb = np.asarray(spec_b, dtype=np.float64)
    if sa.shape != sb.shape or sa.ndim != 1:
        raise InvalidInput("spectra must be 1-d and of equal length")
    d = sa.shape[0]
    if not 1 <= i <= d:
        raise InvalidInput(f"index must lie in 1..{d}, got {i}")
    if np.any(np.diff(sa) > 1e-12) or np.any(np.diff(sb) > 1e-12):
        raise InvalidInput("spectra must be sorted non-increasing")
    return (float(sa[i - 1] + sb[-1]), float(sa[i - 1] + sb[0]))


def sin_theta_bound(perturbation_norm: float, delta_sep: float) -> float:
    """Davis-Kahan style subspace-rotation bound: perturbation / separation."""
    if delta_sep <= 0:
        raise DegenerateGap(f"separation must be positive, got {delta_sep}")
    if perturbation_norm < 0:
        raise InvalidInput("perturbation norm must be non-negative")
    return float(perturbation_norm) / float(delta_sep)


# Matrix file format: <name>_re.csv (+ optional <name>_im.csv), row-major,
# no header, %.17g cells; a missing _im file means zero imaginary part.


def _strip_prefix(name) -> Path:
    p = Path(name)
    s = str(p)
    for suffix in ("_re.csv", "_im.csv"):
        if s.endswith(suffix):
            return Path(s[: -len(suffix)])
    return p


def write_matrix(name, m) -> list:
    """Write a matrix as <name>_re.csv and, when complex, <name>_im.csv."""
    arr = m.entries if isinstance(m, HermitianMatrix) else np.asarray(m, dtype=np.complex128)
    prefix = _strip_prefix(name)
    prefix.parent.mkdir(parents=True, exist_ok=True)
    paths = [Path(f"{prefix}_re.csv")]
    np.savetxt(paths[0], arr.real, fmt="%.17g", delimiter=",")
    if np.any(arr.imag != 0.0):
        paths.append(Path(f"{prefix}_im.csv"))
        np.savetxt(paths[1], arr.imag, fmt="%.17g", delimiter=",")
    return paths


def read_matrix(name) -> HermitianMatrix:
    """Read a matrix written by :func:`write_matrix`; accepts the bare prefix
    or either CSV path."""
    prefix = _strip_prefix(name)
    re_path = Path(f"{prefix}_re.csv")
    if not re_path.exists():
        raise InvalidInput(f"missing matrix file {re_path}")
    re = np.atleast_2d(np.loadtxt(re_path, delimiter=",", ndmin=2))
    im_path = Path(f"{prefix}_im.csv")
    if im_path.exists():
        im = np.atleast_2d(np.loadtxt(im_path, delimiter=",", ndmin=2))
        if im.shape != re.shape:
            raise InvalidInput("real/imaginary parts have mismatched shapes")
        return HermitianMatrix(re + 1j * im)
    return HermitianMatrix(re.astype(np.complex128))

"""Closed-form evaluators for the utility, gap, and concentration bounds,
plus semicircle quantiles and the rigidity envelope they calibrate against.

Asymptotic-notation constants are never invented here: leading-order bound
evaluators take an explicit ``constant`` argument (default 1) and the
polylog factor separately, so experiment reports can present empirical/theory
ratios instead of asserting absolute constants.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np
from scipy.optimize import brentq

from .errors import (
    DegenerateGap,
    DegenerateGapWarning,
    InvalidInput,
    InvalidRank,
    LargeSpectrumWarning,
)


@dataclass(frozen=True)
class PolylogFactor:
    """(log d)**(L * log log d) with natural logs; defined as 1 for d <= 3
    where log log d is non-positive or undefined."""

    d: int
    L: float = 1.0

    @property
    def value(self) -> float:
        if self.d <= 3:
            return 1.0
        return float(math.log(self.d) ** (self.L * math.log(math.log(self.d))))


def semicircle_density(x: float):
    """Semicircle density (1/2pi) * sqrt(max(4 - x^2, 0)); supported on [-2, 2]."""
    xx = np.asarray(x, dtype=np.float64)
    out = np.sqrt(np.maximum(4.0 - xx**2, 0.0)) / (2.0 * math.pi)
    return float(out) if np.isscalar(x) or out.ndim == 0 else out


def semicircle_tail(x: float) -> float:
    """Closed-form integral of the semicircle density over [x, 2]."""
    x = min(2.0, max(-2.0, float(x)))
    return 0.5 - x * math.sqrt(4.0 - x * x) / (4.0 * math.pi) - math.asin(x / 2.0) / math.pi


@dataclass(frozen=True)
class ClassicalSpectrum:
    """Deterministic semicircle quantiles on the [-2 sqrt(d), 2 sqrt(d)] scale.

    Entry i-1 solves d * integral_{omega_i / sqrt d}^{inf} rho = i - 1; a
    final entry -2 sqrt(d) is appended so the vector has length d + 1 and is
    symmetric about zero.
    """

    d: int
    omegas: np.ndarray

    def __post_init__(self):
        self.omegas.setflags(write=False)

    def residuals(self) -> np.ndarray:
        """|d * tail(omega_i / sqrt d) - (i - 1)| for i = 1..d (closed form)."""
        i = np.arange(1, self.d + 1)
        tails = np.array([semicircle_tail(w / math.sqrt(self.d)) for w in self.omegas[:-1]])
        return np.abs(self.d * tails - (i - 1))

    def gaps(self) -> np.ndarray:
        return -np.diff(self.omegas)


def classical_locations(d: int) -> ClassicalSpectrum:
    """Solve the semicircle quantile equation for every index by bracketed
    root finding, to residual <= 1e-12 on the d * integral scale."""
    if d < 1:
        raise InvalidInput(f"d must be >= 1, got {d}")
    sqd = math.sqrt(d)
    omegas = np.empty(d + 1, dtype=np.float64)
    omegas[0] = 2.0 * sqd
    for i in range(2, d + 1):
        target = (i - 1) / d

        def f(x, t=target):
            return semicircle_tail(x) - t

        x = brentq(f, -2.0, 2.0, xtol=1e-15, rtol=8.9e-16, maxiter=200)
        omegas[i - 1] = x * sqd
    omegas[d] = -2.0 * sqd
    return ClassicalSpectrum(d, omegas)


def rigidity_envelope(d: int, L: float = 1.0) -> np.ndarray:
    """Per-index deviation envelope polylog(d) * min(j, d-j+1)^(-1/3) * d^(-1/6)."""
    if d < 4:
        raise InvalidInput(f"d must be >= 4, got {d}")
    j = np.arange(1, d + 1, dtype=np.float64)
    local = np.minimum(j, d - j + 1) ** (-1.0 / 3.0)
    return PolylogFactor(d, L).value * local * d ** (-1.0 / 6.0)


SIGMA1_EXPONENT_CAP = 50


def _warn_if_huge(sigma1: float, d: int):
    if d >= 2 and sigma1 > float(d) ** SIGMA1_EXPONENT_CAP:
        warnings.warn(
            f"top eigenvalue {sigma1:.3g} exceeds d**{SIGMA1_EXPONENT_CAP}; the bound "
            "derivations assume it does not (proof artifact, result still computed)",
            LargeSpectrumWarning,
            stacklevel=3,
        )


def covariance_utility_bound(
    spectrum,
    k: int,
    d: int,
    T: float,
    polylog: PolylogFactor | None = None,
    constant: float = 1.0,
    mode: str = "leading",
) -> float:
    """Right-hand side of the rank-k covariance utility bound.

    leading mode:  constant * sqrt(k d) * sigma_k/(sigma_k - sigma_{k+1})
                   * sqrt(T) * polylog
    explicit mode: sqrt(1e6 * b^2 * k d T * (sigma_k/gap)^2 * log^3 d
                   * log(sigma_1 + T)) with b the polylog factor.

    With k = d the gap falls back to sigma_d (zero tail convention) and a
    degenerate-gap warning is the caller's responsibility.
    """
    vals = np.asarray(spectrum, dtype=np.float64)
    if vals.shape[0] != d:
        raise InvalidInput("spectrum length must equal d")
    if not 1 <= k <= d:
        raise InvalidRank(f"k must lie in 1..{d}, got {k}")
    sigma_k = float(vals[k - 1])
    if k < d:
        gap = float(vals[k - 1] - vals[k])
    else:
        gap = float(vals[-1])
        warnings.warn(
            "k = d: using sigma_d as the gap (zero tail convention)",
            DegenerateGapWarning,
            stacklevel=2,
        )
    if gap <= 0:
        raise DegenerateGap(f"eigenvalue gap at k={k} must be positive, got {gap}")
    _warn_if_huge(float(vals[0]), d)
    b = (polylog or PolylogFactor(d)).value
    ratio = sigma_k / gap
    if mode == "leading":
        return constant * math.sqrt(k * d) * ratio * math.sqrt(T) * b
    if mode == "explicit":
        if d < 2:
            raise InvalidInput("explicit mode needs d >= 2 (log d > 0)")
        return math.sqrt(
            1e6 * b**2 * k * d * T * ratio**2 * math.log(d) ** 3 * math.log(vals[0] + T)
        )
    raise InvalidInput(f"mode must be 'leading' or 'explicit', got {mode!r}")


def subspace_utility_bound(spectrum, k: int, T: float) -> float:
    """sqrt(sum_{i<=k<j} 1/(sigma_i - sigma_j)^2) * sqrt(T); the asymptotic
    polylog factor is deliberately not attached (expose it separately)."""
    vals = np.asarray(spectrum, dtype=np.float64)
    d = vals.shape[0]
    if not 1 <= k < d:
        raise InvalidRank(f"k must lie in 1..{d - 1}, got {k}")
    top = vals[:k, None]
    bottom = vals[None, k:]
    diffs = top - bottom
    if np.any(diffs <= 0):
        raise DegenerateGap("spectrum must be strictly separated across the cut")
    return float(math.sqrt(np.sum(1.0 / diffs**2)) * math.sqrt(T))


def gap_bound_rhs(s: float, beta: int, d: int) -> float:
    """Tail bound s**(beta+1) + d**(-1000) for the scaled neighbor gap.

    The d**(-1000) term is kept for fidelity; in double precision it is
    ~9.3e-302 for d = 2 and underflows to exactly 0 for d >= 3.
    """
    if s <= 0:
        raise InvalidInput(f"s must be positive, got {s}")
    if beta not in (1, 2):
        raise InvalidInput(f"beta must be 1 or 2, got {beta}")
    return float(s) ** (beta + 1) + float(d) ** (-1000.0)


def gap_threshold(s: float, d: int, polylog: PolylogFactor | None = None) -> float:
    """Gap size s / (b * sqrt(d)) the tail bound refers to."""
    if s <= 0:
        raise InvalidInput(f"s must be positive, got {s}")
    b = (polylog or PolylogFactor(d)).value
    return float(s) / (b * math.sqrt(d))


def spectral_sup_tail(alpha: float) -> float:
    """Probability bound min(1, 2*sqrt(pi)*exp(-alpha^2/2)) for the running
    maximum of the noise spectral norm exceeding its threshold."""
    if alpha <= 0:
        return 1.0
    return min(1.0, 2.0 * math.sqrt(math.pi) * math.exp(-0.5 * alpha**2))


def spectral_sup_threshold(T: float, d: int, alpha: float) -> float:
    """Threshold sqrt(T) * (sqrt(d) + alpha) the tail bound refers to."""
    if T < 0 or d < 1 or alpha < 0:
        raise InvalidInput("need T >= 0, d >= 1, alpha >= 0")
    return math.sqrt(T) * (math.sqrt(d) + alpha)


def weaker_metric_bound(
    k: int,
    d: int,
    T: float,
    polylog: PolylogFactor | None = None,
    constant: float = 1.0,
) -> float:
    """Gap-free bound constant * sqrt(k d T) * polylog on the square root of
    the excess squared residual of the noised truncation."""
    if k < 1 or d < 1 or T < 0:
        raise InvalidInput("need k, d >= 1 and T >= 0")
    b = (polylog or PolylogFactor(d)).value
    return constant * math.sqrt(k * d * T) * b

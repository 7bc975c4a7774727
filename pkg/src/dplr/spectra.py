"""Spectrum family generators and seeded random bases for experiments."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import InvalidInput, InvalidSpectrum
from .randmat import RngStream


@dataclass(frozen=True)
class SpectrumFamily:
    """Named family of non-negative, non-increasing spectra.

    two_block: sigma_1..k = scale, sigma_{k+1}..d = scale * (1 - 1/c), so the
               signal-to-gap ratio sigma_k / (sigma_k - sigma_{k+1}) equals c.
    linear:    sigma_i = (d - i) * c * sqrt(d).
    custom:    explicit values, validated and sorted.
    """

    family: str
    c: float = 1.0
    scale: float = 1.0
    values: tuple = field(default=())

    def __post_init__(self):
        if self.family not in ("two_block", "linear", "custom"):
            raise InvalidInput(f"unknown spectrum family {self.family!r}")


def generate_spectrum(family: SpectrumFamily, d: int, k: int) -> np.ndarray:
    """Materialize the family at dimension d (rank parameter k is only used
    by two_block)."""
    if d < 1:
        raise InvalidInput(f"d must be >= 1, got {d}")
    if family.family == "two_block":
        if family.c < 1.0:
            raise InvalidSpectrum(f"two_block needs gap ratio c >= 1, got {family.c}")
        if not 1 <= k <= d:
            raise InvalidInput(f"k must lie in 1..{d}, got {k}")
        if family.scale < 0:
            raise InvalidSpectrum("two_block scale must be non-negative")
        out = np.full(d, family.scale * (1.0 - 1.0 / family.c))
        out[:k] = family.scale
        return out
    if family.family == "linear":
        if family.c < 0:
            raise InvalidSpectrum("linear slope c must be non-negative")
        i = np.arange(1, d + 1, dtype=np.float64)
        return (d - i) * family.c * np.sqrt(d)
    vals = np.sort(np.asarray(family.values, dtype=np.float64))[::-1]
    if vals.shape[0] != d:
        raise InvalidInput(f"custom spectrum has length {vals.shape[0]}, expected {d}")
    if np.any(vals < 0):
        raise InvalidSpectrum("custom spectrum has negative entries")
    return vals.copy()


def random_orthogonal(d: int, rng: RngStream) -> np.ndarray:
    """Haar-distributed orthogonal matrix: QR of a Gaussian matrix with the
    sign of R's diagonal fixed, so the draw is basis-deterministic."""
    q, r = np.linalg.qr(rng.normals((d, d)))
    signs = np.sign(np.diag(r))
    signs[signs == 0.0] = 1.0
    return q * signs


def matrix_with_spectrum(spectrum, rng: RngStream | None = None) -> np.ndarray:
    """Real symmetric matrix V diag(spectrum) V^T with a seeded random
    orthogonal V (or diagonal when rng is None)."""
    vals = np.asarray(spectrum, dtype=np.float64)
    if rng is None:
        return np.diag(vals)
    v = random_orthogonal(vals.shape[0], rng)
    m = (v * vals) @ v.T
    return (m + m.T) / 2.0

"""Seeded sampling of GUE/GOE matrices and Hermitian Brownian increments.

Entry-variance convention used throughout the package: a sample is
``A = (W1 + i*W2) + (W1 + i*W2)*`` (unitary ensemble) or ``A = W1 + W1^T``
(orthogonal ensemble) with all ``W`` entries iid standard normal.  Hence
diagonal entries have variance 4 and each off-diagonal real/imaginary part
has variance 2.  Some references normalise to unit off-diagonal variance;
helpers that compare against semicircle quantiles must rescale by
``1/sqrt(2*beta)`` (see :func:`semicircle_normalization`).
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum

import numpy as np
from scipy.special import ndtri

from .errors import InvalidInput

_MASK64 = (1 << 64) - 1
_TWO53 = float(1 << 53)


def _mix64(x: int) -> int:
    """splitmix64 finalizer; a documented, platform-independent 64-bit hash."""
    x = (x + 0x9E3779B97F4A7C15) & _MASK64
    x = ((x ^ (x >> 30)) * 0xBF58476D1CE4E5B9) & _MASK64
    x = ((x ^ (x >> 27)) * 0x94D049BB133111EB) & _MASK64
    return x ^ (x >> 31)


class NoiseEnsemble(Enum):
    """Which symmetry class the noise matrix belongs to.

    GUE (complex Hermitian) has Dyson index beta = 2, GOE (real symmetric)
    has beta = 1; the index propagates into every downstream gap statistic.
    """

    GUE = "gue"
    GOE = "goe"

    @property
    def beta(self) -> int:
        return 2 if self is NoiseEnsemble.GUE else 1

    @classmethod
    def parse(cls, name) -> "NoiseEnsemble":
        if isinstance(name, NoiseEnsemble):
            return name
        try:
            return cls(str(name).lower())
        except ValueError:
            raise InvalidInput(f"unknown ensemble {name!r}; expected 'gue' or 'goe'")


def ensemble_for_beta(beta: int) -> NoiseEnsemble:
    if beta == 2:
        return NoiseEnsemble.GUE
    if beta == 1:
        return NoiseEnsemble.GOE
    raise InvalidInput(f"beta must be 1 or 2, got {beta}")


def semicircle_normalization(ensemble: NoiseEnsemble) -> float:
    """Factor that maps a raw sample spectrum onto the [-2 sqrt(d), 2 sqrt(d)]
    semicircle scale: divide eigenvalues by sqrt(2*beta) (2 for GUE, sqrt(2)
    for GOE)."""
    return float(np.sqrt(2.0 * ensemble.beta))


@dataclass
class RngStream:
    """Counter-based random stream keyed by (seed, stream_id).

    Backed by numpy's Philox4x64 bit generator with key
    ``[mix64(seed), mix64(seed ^ mix64(stream_id))]`` where ``mix64`` is the
    splitmix64 finalizer.  Distinct (seed, stream_id) pairs give independent,
    replayable streams on every platform.  Normal variates are produced by
    inverse CDF: ``ndtri((n + 0.5) / 2**53)`` on 53-bit uniforms, so fixtures
    do not depend on numpy's ziggurat tables.
    """

    seed: int
    stream_id: int = 0

    def __post_init__(self):
        self.seed = int(self.seed) & _MASK64
        self.stream_id = int(self.stream_id) & _MASK64
        key = np.array(
            [_mix64(self.seed), _mix64(self.seed ^ _mix64(self.stream_id))],
            dtype=np.uint64,
        )
        self._gen = np.random.Generator(np.random.Philox(counter=0, key=key))
        self._log = None

    def substream(self, index: int) -> "RngStream":
        """Independent child stream; used for per-trial / per-node derivation."""
        return RngStream(self.seed, _mix64(self.stream_id ^ _mix64(index)))

    def enable_log(self):
        """Record every normal draw (testing aid for draw-sequence checks)."""
        self._log = []
        return self

    @property
    def draw_log(self):
        return self._log

    def uniforms(self, shape) -> np.ndarray:
        ints = self._gen.integers(0, 1 << 53, size=shape, dtype=np.uint64)
        return (ints.astype(np.float64) + 0.5) / _TWO53

    def normals(self, shape) -> np.ndarray:
        z = ndtri(self.uniforms(shape))
        if self._log is not None:
            self._log.append(np.array(z, copy=True))
        return z


def _standard_noise(d: int, ensemble: NoiseEnsemble, rng: RngStream) -> np.ndarray:
    if ensemble is NoiseEnsemble.GUE:
        w1 = rng.normals((d, d))
        w2 = rng.normals((d, d))
        g = w1 + 1j * w2
        return g + g.conj().T
    w1 = rng.normals((d, d))
    return (w1 + w1.T).astype(np.complex128)


def sample_noise(d: int, ensemble, rng: RngStream) -> np.ndarray:
    """One draw from the GUE/GOE noise ensemble (diag var 4, off-diag parts var 2).

    Returns a complex Hermitian d x d array; the GOE case has exactly zero
    imaginary part.  Hermiticity is exact by construction.
    """
    if d < 1:
        raise InvalidInput(f"dimension must be >= 1, got {d}")
    return _standard_noise(int(d), NoiseEnsemble.parse(ensemble), rng)


def sample_noise_batch(n: int, d: int, ensemble, rng: RngStream) -> np.ndarray:
    """Stacked draws, shape (n, d, d); identical marginals to sample_noise.

    The n draws consume the stream in the same entry order as n sequential
    sample_noise calls would.
    """
    if d < 1:
        raise InvalidInput(f"dimension must be >= 1, got {d}")
    ensemble = NoiseEnsemble.parse(ensemble)
    if ensemble is NoiseEnsemble.GUE:
        out = np.empty((n, d, d), dtype=np.complex128)
        for t in range(n):
            w1 = rng.normals((d, d))
            w2 = rng.normals((d, d))
            g = w1 + 1j * w2
            out[t] = g + g.conj().T
        return out
    out = np.empty((n, d, d), dtype=np.complex128)
    for t in range(n):
        w1 = rng.normals((d, d))
        out[t] = w1 + w1.T
    return out


def brownian_increment(d: int, dt: float, ensemble, rng: RngStream) -> np.ndarray:
    """Hermitian Brownian increment over a time step dt.

    Distributed as sqrt(dt) times a fresh noise draw, so increments over a
    partition of [0, t] sum to a matrix distributed like the full-time value.
    """
    if dt <= 0:
        raise InvalidInput(f"dt must be positive, got {dt}")
    return np.sqrt(dt) * sample_noise(d, ensemble, rng)

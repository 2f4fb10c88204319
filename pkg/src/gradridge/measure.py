"""Gaussian input measures and deterministic counter-based sampling.

Draws are produced from Philox blocks keyed by (seed, stream_id), converted to
normals with the Box-Muller transform. Both pieces are exact integer/float64
arithmetic with no platform-dependent tables, so a stream replays bit-for-bit
on any host, regardless of thread count or of what other streams were doing in
between. The block counter advances per call, making the whole draw history a
pure function of (seed, stream_id, call sizes).
"""

from __future__ import annotations

import numpy as np

from .errors import DimensionMismatch, NotPositiveDefinite, RankOutOfRange
from .linalg import SpdMatrix, cholesky, sym_eig
from .projector import (
    ORTH_EUCLIDEAN,
    ORTH_SIGMA_INVERSE,
    RankRProjector,
    euclidean_projector,
    require_sigma_orthogonal,
)

__all__ = [
    "SampleStream",
    "GaussianMeasure",
    "sample",
    "kl_projector",
    "conditioned_resample",
    "squared_exponential_covariance",
]

_MASK64 = (1 << 64) - 1


def _mix64(a, b):
    """splitmix64 finalizer over a combined word; derives child stream ids."""
    z = (a * 0x9E3779B97F4A7C15 + b + 0x632BE59BD9B4E019) & _MASK64
    z ^= z >> 30
    z = (z * 0xBF58476D1CE4E5B9) & _MASK64
    z ^= z >> 27
    z = (z * 0x94D049BB133111EB) & _MASK64
    z ^= z >> 31
    return z


class SampleStream:
    """Counter-based source of standard normal draws.

    Identified by (seed, stream_id); ``counter`` records consumed Philox
    blocks and advances with each call. Substreams derived with ``substream``
    are statistically independent and may be consumed in any order relative
    to the parent or to each other.
    """

    __slots__ = ("seed", "stream_id", "counter")

    def __init__(self, seed, stream_id=0, counter=0):
        self.seed = int(seed) & _MASK64
        self.stream_id = int(stream_id) & _MASK64
        self.counter = int(counter)

    def __repr__(self):
        return f"SampleStream(seed={self.seed}, stream_id={self.stream_id}, counter={self.counter})"

    def substream(self, tag):
        """Independent child stream; deterministic in (stream_id, tag)."""
        return SampleStream(self.seed, _mix64(self.stream_id, int(tag)))

    def standard_normal(self, count):
        """The next ``count`` independent N(0, 1) draws."""
        count = int(count)
        if count < 0:
            raise ValueError("count must be nonnegative")
        if count == 0:
            return np.empty(0)
        pairs = (count + 1) // 2
        words = 2 * pairs
        blocks = (words + 3) // 4
        key = np.array([self.seed, self.stream_id], dtype=np.uint64)
        bits = np.random.Philox(counter=self.counter, key=key)
        raw = bits.random_raw(words)
        self.counter += blocks
        # 53-bit mantissas shifted into (0, 1]; u1 = 1 maps to radius 0.
        u = ((raw >> np.uint64(11)).astype(np.float64) + 1.0) * (2.0 ** -53)
        radius = np.sqrt(-2.0 * np.log(u[0::2]))
        angle = (2.0 * np.pi) * u[1::2]
        out = np.empty(words)
        out[0::2] = radius * np.cos(angle)
        out[1::2] = radius * np.sin(angle)
        return out[:count]

    def normal_matrix(self, rows, cols):
        return self.standard_normal(rows * cols).reshape(rows, cols)


class GaussianMeasure:
    """N(mean, cov) with the lower Cholesky factor of cov kept for sampling.

    The covariance must be strictly positive definite; the factorization runs
    at construction so a bad covariance fails fast.
    """

    __slots__ = ("mean", "cov", "sampler_factor", "_kl_cache")

    def __init__(self, mean, cov):
        if not isinstance(cov, SpdMatrix):
            cov = SpdMatrix(cov)
        mean = np.asarray(mean, dtype=float).reshape(-1)
        if mean.shape[0] != cov.dim:
            raise DimensionMismatch(
                f"mean has dim {mean.shape[0]} but covariance is {cov.dim}x{cov.dim}"
            )
        mean = mean.copy()
        mean.setflags(write=False)
        self.mean = mean
        self.cov = cov
        self.sampler_factor = cholesky(cov)
        self._kl_cache = None

    @classmethod
    def standard(cls, dim):
        return cls(np.zeros(dim), SpdMatrix.identity(dim))

    @property
    def dim(self):
        return self.cov.dim

    @property
    def is_standard(self):
        return bool(
            np.all(self.mean == 0.0) and np.array_equal(self.cov.entries, np.eye(self.dim))
        )

    @property
    def has_diagonal_cov(self):
        c = self.cov.entries
        return bool(np.count_nonzero(c - np.diag(np.diag(c))) == 0)

    def _kl_eig(self):
        # Write-once cache; the measure is immutable so this is thread-safe
        # in the same sense as the Cholesky cache.
        if self._kl_cache is None:
            self._kl_cache = sym_eig(self.cov.entries)
        return self._kl_cache


def sample(mu, stream, count):
    """``count`` independent draws of mu as rows: m + L z with z ~ N(0, I)."""
    count = int(count)
    if count < 0:
        raise ValueError("count must be nonnegative")
    z = stream.normal_matrix(count, mu.dim)
    return mu.mean + z @ mu.sampler_factor.T


def kl_projector(mu, rank):
    """Euclidean-orthogonal projector onto the leading rank-``rank`` eigenspace
    of the covariance — the truncation a Karhunen-Loeve expansion keeps.

    Flagged sigma-inverse as well when the covariance is diagonal, since the
    eigenbasis is then a coordinate basis.
    """
    if not 1 <= rank <= mu.dim:
        raise RankOutOfRange(f"rank {rank} outside [1, {mu.dim}]")
    _, vecs = mu._kl_eig()
    extra = (ORTH_SIGMA_INVERSE,) if mu.has_diagonal_cov else ()
    return euclidean_projector(vecs[:, :rank], extra_flags=extra)


def conditioned_resample(mu, p, x, stream, count):
    """Draws P x + (I - P) Y_i with Y_i ~ mu.

    This is the sampling form of conditioning on the sigma-algebra of P: the
    component of x in the range of P is frozen, the complement is redrawn.
    Requires a sigma-inverse-orthogonal projector; for any other P the result
    would not be the conditional law.
    """
    require_sigma_orthogonal(p)
    x = np.asarray(x, dtype=float).reshape(-1)
    if x.shape[0] != mu.dim:
        raise DimensionMismatch(f"point has dim {x.shape[0]}, measure has {mu.dim}")
    y = sample(mu, stream, count)
    frozen = p.matrix @ x
    # grouped so P = I returns x bit-exactly: y - y P^T is exactly zero there
    return frozen + (y - y @ p.matrix.T)


def squared_exponential_covariance(points, lengthscale, nugget=0.0):
    """Squared-exponential kernel matrix exp(-|s - t|^2 / lengthscale^2) over a
    list of points, plus an optional diagonal nugget."""
    pts = np.asarray(points, dtype=float)
    if pts.ndim == 1:
        pts = pts[:, None]
    if lengthscale <= 0:
        raise ValueError("lengthscale must be positive")
    sq = np.sum(pts * pts, axis=1)
    d2 = sq[:, None] + sq[None, :] - 2.0 * (pts @ pts.T)
    np.maximum(d2, 0.0, out=d2)
    k = np.exp(-d2 / (lengthscale * lengthscale))
    if nugget:
        k[np.diag_indices_from(k)] += nugget
    return SpdMatrix(k)

"""Dense symmetric linear algebra kernels.

Hand-rolled Cholesky and cyclic-Jacobi eigendecomposition in float64, plus the
generalized symmetric-definite eigenproblem reduced through the Cholesky factor
of the covariance. Matrices here are a few hundred rows at most, so everything
stays dense and the quadratically convergent Jacobi sweep is accurate enough to
serve as the single eigensolver of the package.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import (
    DimensionMismatch,
    NegativeTrace,
    NoConvergence,
    NotPositiveDefinite,
    NotPositiveSemidefinite,
)

__all__ = [
    "SpdMatrix",
    "GeneralizedEigenPairs",
    "cholesky",
    "sym_eig",
    "generalized_eig",
    "trace_quadratic",
    "save_matrix_text",
    "load_matrix_text",
]


def _as_square(a):
    m = np.asarray(a, dtype=float)
    if m.ndim != 2 or m.shape[0] != m.shape[1]:
        raise DimensionMismatch(f"expected a square matrix, got shape {m.shape}")
    if m.shape[0] < 1:
        raise DimensionMismatch("matrix must have at least one row")
    return m


class SpdMatrix:
    """Symmetric matrix wrapper with a write-once Cholesky cache.

    Construction symmetrizes the input as (A + A^T)/2, so ``entries`` is exactly
    symmetric and read-only afterwards. Positive definiteness is not checked
    here; it surfaces when a Cholesky factor is first requested. The factor is
    cached on first success and never recomputed, which makes instances safe to
    share between worker threads.
    """

    __slots__ = ("dim", "entries", "_chol")

    def __init__(self, entries):
        m = _as_square(entries)
        sym = 0.5 * (m + m.T)
        sym.setflags(write=False)
        self.dim = sym.shape[0]
        self.entries = sym
        self._chol = None

    def __repr__(self):
        return f"SpdMatrix(dim={self.dim})"

    @classmethod
    def identity(cls, dim):
        return cls(np.eye(dim))

    @classmethod
    def diagonal(cls, values):
        return cls(np.diag(np.asarray(values, dtype=float)))


def _entries(a):
    return a.entries if isinstance(a, SpdMatrix) else 0.5 * (_as_square(a) + _as_square(a).T)


def cholesky(a):
    """Lower-triangular L with L @ L.T equal to ``a``.

    ``a`` may be an SpdMatrix (the factor is cached on it) or a plain array.
    A pivot at or below dim * 1e-14 * max(diag) raises NotPositiveDefinite
    carrying the 0-based pivot index.
    """
    holder = None
    if isinstance(a, SpdMatrix):
        if a._chol is not None:
            return a._chol
        holder = a
        m = a.entries
    else:
        m = _entries(a)
    d = m.shape[0]
    tol = d * 1e-14 * max(float(np.max(np.diag(m))), 0.0)
    low = np.zeros((d, d))
    for j in range(d):
        pivot = m[j, j] - low[j, :j] @ low[j, :j]
        if pivot <= tol:
            raise NotPositiveDefinite(j)
        ljj = np.sqrt(pivot)
        low[j, j] = ljj
        if j + 1 < d:
            low[j + 1:, j] = (m[j + 1:, j] - low[j + 1:, :j] @ low[j, :j]) / ljj
    low.setflags(write=False)
    if holder is not None:
        holder._chol = low
    return low


def sym_eig(a, max_sweeps=100):
    """Eigendecomposition of a symmetric matrix by cyclic Jacobi rotations.

    Returns ``(values, vectors)`` with eigenvalues sorted descending (stable
    order among ties) and orthonormal eigenvectors in the columns of
    ``vectors``. Sweeps stop once the off-diagonal Frobenius norm falls below
    1e-12 times the Frobenius norm of the input; NoConvergence is raised after
    ``max_sweeps`` full sweeps, which no finite symmetric input reaches in
    practice.
    """
    m = _entries(a)
    d = m.shape[0]
    if d == 1:
        return np.array([float(m[0, 0])]), np.ones((1, 1))
    ref = float(np.linalg.norm(m, "fro"))
    vecs = np.eye(d)
    work = m.copy()
    if ref > 0.0:
        tol = 1e-12 * ref
        # Rotations below this leave the off-diagonal norm under tol even if
        # every remaining entry sits exactly at the threshold.
        skip = 0.1 * tol / d
        sweeps = 0
        while True:
            # Summed from the entries themselves: the subtraction form
            # total - diagonal cancels catastrophically near convergence.
            off = work.copy()
            np.fill_diagonal(off, 0.0)
            off_sq = float(np.sum(off * off))
            if off_sq <= tol * tol:
                break
            if sweeps >= max_sweeps:
                raise NoConvergence(sweeps)
            for p in range(d - 1):
                for q in range(p + 1, d):
                    apq = work[p, q]
                    if abs(apq) <= skip:
                        continue
                    app = work[p, p]
                    aqq = work[q, q]
                    theta = 0.5 * (aqq - app) / apq
                    if theta >= 0.0:
                        t = 1.0 / (theta + np.sqrt(1.0 + theta * theta))
                    else:
                        t = -1.0 / (-theta + np.sqrt(1.0 + theta * theta))
                    c = 1.0 / np.sqrt(1.0 + t * t)
                    s = t * c
                    col_p = work[:, p].copy()
                    col_q = work[:, q].copy()
                    work[:, p] = c * col_p - s * col_q
                    work[:, q] = s * col_p + c * col_q
                    row_p = work[p, :].copy()
                    row_q = work[q, :].copy()
                    work[p, :] = c * row_p - s * row_q
                    work[q, :] = s * row_p + c * row_q
                    work[p, p] = app - t * apq
                    work[q, q] = aqq + t * apq
                    work[p, q] = 0.0
                    work[q, p] = 0.0
                    vcol_p = vecs[:, p].copy()
                    vcol_q = vecs[:, q].copy()
                    vecs[:, p] = c * vcol_p - s * vcol_q
                    vecs[:, q] = s * vcol_p + c * vcol_q
            sweeps += 1
    values = np.diag(work).copy()
    order = np.argsort(-values, kind="stable")
    return values[order], vecs[:, order]


@dataclass(frozen=True)
class GeneralizedEigenPairs:
    """Eigenpairs of H v = lambda Sigma^{-1} v.

    ``values`` are sorted descending and nonnegative after round-off clamping;
    column i of ``vectors`` is normalized to v^T Sigma^{-1} v = 1.
    """

    values: np.ndarray
    vectors: np.ndarray

    @property
    def dim(self):
        return self.values.shape[0]


def generalized_eig(h, sigma):
    """Solve H v = lambda Sigma^{-1} v for SPD Sigma and symmetric PSD H.

    With Sigma = L L^T the problem reduces to the ordinary symmetric
    eigenproblem L^T H L w = lambda w and v = L w; Sigma^{-1} is never formed.
    Eigenvalues in [-1e-10 * lambda_max, 0) are clamped to zero; anything more
    negative raises NotPositiveSemidefinite.
    """
    hm = _entries(h)
    lowt = cholesky(sigma)
    if hm.shape[0] != lowt.shape[0]:
        raise DimensionMismatch(
            f"H is {hm.shape[0]}x{hm.shape[0]} but Sigma is {lowt.shape[0]}x{lowt.shape[0]}"
        )
    reduced = lowt.T @ hm @ lowt
    values, w = sym_eig(reduced)
    lam_max = max(float(values[0]), 0.0)
    clamp = 1e-10 * lam_max
    if float(values[-1]) < -clamp:
        raise NotPositiveSemidefinite(
            f"generalized eigenvalue {values[-1]:.3e} below -1e-10 * lambda_max"
        )
    values = np.where(values < 0.0, 0.0, values)
    vectors = lowt @ w
    return GeneralizedEigenPairs(values=values, vectors=vectors)


def trace_quadratic(sigma, h, p):
    """trace(Sigma (I - P^T) H (I - P)) for a projector P.

    This is the residual gradient energy left outside the range of P. Tiny
    negative round-off (above -1e-10 * ||Sigma||_F * ||H||_F) is clamped to
    zero; anything below that threshold raises NegativeTrace.
    """
    sm = _entries(sigma)
    hm = _entries(h)
    pm = p.matrix if hasattr(p, "matrix") else np.asarray(p, dtype=float)
    d = sm.shape[0]
    if hm.shape[0] != d or pm.shape != (d, d):
        raise DimensionMismatch("sigma, h and p must share one square dimension")
    resid = np.eye(d) - pm
    inner = resid.T @ hm @ resid
    value = float(np.sum(sm * inner))
    floor = -1e-10 * float(np.linalg.norm(sm, "fro")) * float(np.linalg.norm(hm, "fro"))
    if value < floor:
        raise NegativeTrace(f"trace {value:.3e} below round-off floor {floor:.3e}")
    return max(value, 0.0)


def save_matrix_text(path, matrix):
    """Plain-text matrix dump: a dimension line, then one row per line.

    Square matrices write a single integer on the first line; rectangular ones
    write ``rows cols``. Entries use repr floats, so a round-trip through
    load_matrix_text is bit-exact.
    """
    m = np.asarray(matrix, dtype=float)
    if m.ndim != 2:
        raise DimensionMismatch(f"expected a 2-d array, got shape {m.shape}")
    rows, cols = m.shape
    head = f"{rows}" if rows == cols else f"{rows} {cols}"
    with open(path, "w", encoding="ascii") as fh:
        fh.write(head + "\n")
        for i in range(rows):
            fh.write(" ".join(repr(float(x)) for x in m[i]) + "\n")
    return path


def load_matrix_text(path):
    """Read a matrix written by save_matrix_text."""
    with open(path, "r", encoding="ascii") as fh:
        head = fh.readline().split()
        if len(head) == 1:
            rows = cols = int(head[0])
        elif len(head) == 2:
            rows, cols = int(head[0]), int(head[1])
        else:
            raise DimensionMismatch("bad header line in matrix file")
        out = np.empty((rows, cols))
        for i in range(rows):
            parts = fh.readline().split()
            if len(parts) != cols:
                raise DimensionMismatch(f"row {i} has {len(parts)} entries, expected {cols}")
            out[i] = [float(x) for x in parts]
    return out

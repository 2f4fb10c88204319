"""Vector-valued model interface and the analytical test models.

A model is a function f: R^d -> R^n with a Jacobian and an SPD metric on the
output space. The three analytical families (linear maps, scalar quadratic
forms, separable sine sums) come with closed-form conditional-expectation
errors under Gaussian measures, which is what makes them useful: every Monte
Carlo estimator in the package can be checked against them exactly.
"""

from __future__ import annotations

import numpy as np

from .errors import (
    DimensionMismatch,
    IndexOutOfRange,
    NonStandardMeasure,
    NotSigmaOrthogonal,
)
from .linalg import SpdMatrix, cholesky, sym_eig

__all__ = [
    "VectorValuedModel",
    "LinearModel",
    "QuadraticFormModel",
    "SumOfSinesModel",
    "finite_diff_jacobian",
    "linear_cond_exp_error",
    "quadratic_cond_exp_error",
    "sines_cond_exp_error",
    "sines_bound",
    "exact_conditional_expectation",
]


class VectorValuedModel:
    """Base interface: eval, jacobian, dimensions, output metric.

    ``eval_batch``/``jacobian_batch`` have loop fallbacks; subclasses override
    them with vectorized versions when cheap. ``lipschitz_constant`` is None
    unless the subclass knows a global Lipschitz constant in the output-metric
    norm.
    """

    input_dim = None
    output_dim = None
    lipschitz_constant = None

    @property
    def output_metric(self):
        raise NotImplementedError

    def eval(self, x):
        raise NotImplementedError

    def jacobian(self, x):
        raise NotImplementedError

    def eval_batch(self, xs):
        xs = np.asarray(xs, dtype=float)
        return np.stack([self.eval(x) for x in xs])

    def jacobian_batch(self, xs):
        xs = np.asarray(xs, dtype=float)
        return np.stack([self.jacobian(x) for x in xs])

    def _check_point(self, x):
        x = np.asarray(x, dtype=float).reshape(-1)
        if x.shape[0] != self.input_dim:
            raise DimensionMismatch(f"point has dim {x.shape[0]}, model takes {self.input_dim}")
        return x


class LinearModel(VectorValuedModel):
    """f(x) = F x with constant Jacobian F and metric R on the output.

    The Lipschitz constant in the metric norm is the largest singular value of
    R^{1/2} F, computed once at construction.
    """

    def __init__(self, matrix, output_metric=None):
        f = np.atleast_2d(np.asarray(matrix, dtype=float))
        self.matrix = f
        self.output_dim, self.input_dim = f.shape
        if output_metric is None:
            output_metric = SpdMatrix.identity(self.output_dim)
        elif not isinstance(output_metric, SpdMatrix):
            output_metric = SpdMatrix(output_metric)
        if output_metric.dim != self.output_dim:
            raise DimensionMismatch("output metric dimension does not match rows of F")
        self._metric = output_metric
        h = f.T @ output_metric.entries @ f
        top = sym_eig(h)[0][0]
        self.lipschitz_constant = float(np.sqrt(max(top, 0.0)))

    @property
    def output_metric(self):
        return self._metric

    def gradient_gram(self):
        """F^T R F — the exact gradient second moment, sample-free."""
        return SpdMatrix(self.matrix.T @ self._metric.entries @ self.matrix)

    def eval(self, x):
        return self.matrix @ self._check_point(x)

    def jacobian(self, x):
        self._check_point(x)
        return self.matrix.copy()

    def eval_batch(self, xs):
        return np.asarray(xs, dtype=float) @ self.matrix.T

    def jacobian_batch(self, xs):
        xs = np.asarray(xs, dtype=float)
        return np.broadcast_to(self.matrix, (xs.shape[0],) + self.matrix.shape).copy()


class QuadraticFormModel(VectorValuedModel):
    """Scalar quadratic form f(x) = x^T A x / 2 with symmetric A."""

    output_dim = 1

    def __init__(self, matrix):
        a = np.asarray(matrix, dtype=float)
        if a.ndim != 2 or a.shape[0] != a.shape[1]:
            raise DimensionMismatch(f"A must be square, got {a.shape}")
        self.matrix = 0.5 * (a + a.T)
        self.input_dim = a.shape[0]
        self._metric = SpdMatrix.identity(1)

    @property
    def output_metric(self):
        return self._metric

    def eval(self, x):
        x = self._check_point(x)
        return np.array([0.5 * float(x @ self.matrix @ x)])

    def jacobian(self, x):
        x = self._check_point(x)
        return (self.matrix @ x)[None, :]

    def eval_batch(self, xs):
        xs = np.asarray(xs, dtype=float)
        return (0.5 * np.einsum("ki,ij,kj->k", xs, self.matrix, xs))[:, None]

    def jacobian_batch(self, xs):
        xs = np.asarray(xs, dtype=float)
        return (xs @ self.matrix)[:, None, :]


class SumOfSinesModel(VectorValuedModel):
    """Separable scalar model f(x) = sum_i a_i sin(w_i x_i).

    The gradient norm sup is reached at x = 0, so |a * w|_2 is the exact
    Lipschitz constant.
    """

    output_dim = 1

    def __init__(self, amplitudes, frequencies):
        a = np.asarray(amplitudes, dtype=float).reshape(-1)
        w = np.asarray(frequencies, dtype=float).reshape(-1)
        if a.shape != w.shape:
            raise DimensionMismatch("amplitudes and frequencies differ in length")
        self.amplitudes = a
        self.frequencies = w
        self.input_dim = a.shape[0]
        self._metric = SpdMatrix.identity(1)
        self.lipschitz_constant = float(np.linalg.norm(a * w))

    @property
    def output_metric(self):
        return self._metric

    def eval(self, x):
        x = self._check_point(x)
        return np.array([float(np.sum(self.amplitudes * np.sin(self.frequencies * x)))])

    def jacobian(self, x):
        x = self._check_point(x)
        return (self.amplitudes * self.frequencies * np.cos(self.frequencies * x))[None, :]

    def eval_batch(self, xs):
        xs = np.asarray(xs, dtype=float)
        return np.sum(self.amplitudes * np.sin(self.frequencies * xs), axis=1)[:, None]

    def jacobian_batch(self, xs):
        xs = np.asarray(xs, dtype=float)
        return (self.amplitudes * self.frequencies * np.cos(self.frequencies * xs))[:, None, :]

    def eval_batch(self, xs):
        xs = np.asarray(xs, dtype=float)
        return np.sum(self.amplitudes * np.sin(self.frequencies * xs), axis=1)[:, None]

    def jacobian_batch(self, xs):
        xs = np.asarray(xs, dtype=float)
        return (self.amplitudes * self.frequencies * np.cos(self.frequencies * xs))[:, None, :]


def finite_diff_jacobian(model, x, step=None):
    """Central-difference Jacobian, the reference every adjoint is checked
    against. Step defaults to 1e-5 * (1 + max|x_i|)."""
    x = np.asarray(x, dtype=float).reshape(-1)
    if step is None:
        step = 1e-5 * (1.0 + (float(np.max(np.abs(x))) if x.size else 0.0))
    out = np.empty((model.output_dim, x.shape[0]))
    for i in range(x.shape[0]):
        hi = x.copy()
        lo = x.copy()
        hi[i] += step
        lo[i] -= step
        out[:, i] = (model.eval(hi) - model.eval(lo)) / (2.0 * step)
    return out


def _check_tau(tau, dim):
    idx = sorted({int(i) for i in tau})
    if idx and (idx[0] < 1 or idx[-1] > dim):
        raise IndexOutOfRange(f"indices {idx} outside 1..{dim}")
    return idx


def _require_standard(mu):
    if not mu.is_standard:
        raise NonStandardMeasure("closed form requires the standard normal measure")


def linear_cond_exp_error(model, mu, p):
    """Exact squared conditional-expectation error of a linear model.

    For f = F x and a sigma-inverse-orthogonal P, the error is the Gaussian
    second moment |F (I - P)(X - m)|_R^2, evaluated here as the squared
    Frobenius norm of R^{1/2} F (I - P) L with L the covariance factor. The
    trace form trace(Sigma (I-P)^T F^T R F (I-P)) is the same number through a
    different float path, which is exactly what makes this usable as an oracle
    against the trace-based bound.
    """
    if not getattr(p, "is_sigma_orthogonal", False):
        raise NotSigmaOrthogonal("closed form is valid for sigma-inverse-orthogonal projectors")
    r_v = model.output_metric
    vals, vecs = sym_eig(r_v.entries)
    root = vecs @ np.diag(np.sqrt(np.maximum(vals, 0.0))) @ vecs.T
    low = cholesky(mu.cov)
    resid = np.eye(model.input_dim) - p.matrix
    core = root @ model.matrix @ resid @ low
    return float(np.sum(core * core))


def quadratic_cond_exp_error(model, mu, p):
    """Exact squared error |A - P A P|_F^2 / 2 for the quadratic form under
    N(0, I) and a symmetric idempotent P."""
    _require_standard(mu)
    pm = p.matrix if hasattr(p, "matrix") else np.asarray(p, dtype=float)
    if np.linalg.norm(pm - pm.T, "fro") > 1e-9 * max(1.0, np.linalg.norm(pm, "fro")):
        raise NotSigmaOrthogonal("quadratic closed form needs a symmetric projector")
    a = model.matrix
    diff = a - pm @ a @ pm
    return 0.5 * float(np.sum(diff * diff))


def sines_cond_exp_error(model, mu, tau):
    """Exact squared error for the sine sum conditioned on the coordinates in
    ``tau`` (1-based): sum over the complement of a_i^2 (1 - exp(-2 w_i^2)) / 2."""
    _require_standard(mu)
    idx = _check_tau(tau, model.input_dim)
    keep = np.zeros(model.input_dim, dtype=bool)
    keep[[i - 1 for i in idx]] = True
    a = model.amplitudes[~keep]
    w = model.frequencies[~keep]
    return 0.5 * float(np.sum(a * a * (1.0 - np.exp(-2.0 * w * w))))


def sines_bound(model, mu, tau):
    """Exact residual gradient energy for the sine sum and a coordinate
    projector: sum over the complement of a_i^2 w_i^2 (1 + exp(-2 w_i^2)) / 2."""
    _require_standard(mu)
    idx = _check_tau(tau, model.input_dim)
    keep = np.zeros(model.input_dim, dtype=bool)
    keep[[i - 1 for i in idx]] = True
    a = model.amplitudes[~keep]
    w = model.frequencies[~keep]
    return 0.5 * float(np.sum(a * a * w * w * (1.0 + np.exp(-2.0 * w * w))))


class _ExactProfile:
    """Callable wrapper for an exact conditional expectation x -> g(x)."""

    def __init__(self, fn, input_dim, output_dim):
        self._fn = fn
        self.input_dim = input_dim
        self.output_dim = output_dim

    def eval(self, x):
        return self._fn(np.asarray(x, dtype=float).reshape(1, -1))[0]

    def eval_batch(self, xs):
        return self._fn(np.asarray(xs, dtype=float))


def exact_conditional_expectation(model, mu, p):
    """The exact profile x -> E[f(P x + (I - P) Y)], Y ~ mu, where available.

    Linear models admit it for any sigma-inverse-orthogonal projector; the
    quadratic form under N(0, I) for symmetric projectors. Used to isolate the
    profile-sampling error of the ridge constructor in tests and diagnostics.
    """
    if isinstance(model, LinearModel):
        if not getattr(p, "is_sigma_orthogonal", False):
            raise NotSigmaOrthogonal("exact profile needs a sigma-inverse-orthogonal projector")
        f = model.matrix
        shift = f @ (np.eye(model.input_dim) - p.matrix) @ mu.mean
        fp = f @ p.matrix

        def profile(xs):
            return xs @ fp.T + shift

        return _ExactProfile(profile, model.input_dim, model.output_dim)
    if isinstance(model, QuadraticFormModel):
        _require_standard(mu)
        pm = p.matrix
        if np.linalg.norm(pm - pm.T, "fro") > 1e-9 * max(1.0, np.linalg.norm(pm, "fro")):
            raise NotSigmaOrthogonal("quadratic profile needs a symmetric projector")
        a = model.matrix
        pap = pm.T @ a @ pm
        resid = np.eye(model.input_dim) - pm
        const = 0.5 * float(np.trace(resid.T @ a @ resid))

        def profile(xs):
            return (0.5 * np.einsum("ki,ij,kj->k", xs, pap, xs) + const)[:, None]

        return _ExactProfile(profile, model.input_dim, 1)
    if isinstance(model, SumOfSinesModel):
        _require_standard(mu)
        pm = p.matrix
        diag = np.diag(pm)
        if np.count_nonzero(pm - np.diag(diag)) or not np.all(np.isin(diag, (0.0, 1.0))):
            raise NotSigmaOrthogonal("sine profile needs a coordinate projector")
        keep = diag.astype(bool)
        a = model.amplitudes
        w = model.frequencies

        def profile(xs):
            terms = a * np.sin(w * xs) * keep
            return np.sum(terms, axis=1)[:, None]

        return _ExactProfile(profile, model.input_dim, 1)
    raise TypeError(f"no exact conditional expectation for {type(model).__name__}")

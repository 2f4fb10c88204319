"""Steady diffusion on the unit square as a concrete high-dimensional model.

The conductivity field is piecewise constant, one log-value per cell of a
regular quadrilateral grid, so the parameter vector lives in R^(g*g). The
solve uses bilinear (Q1) elements; the per-cell constant conductivity makes
one-point quadrature of the weighted stiffness exact, so each cell contributes
its conductivity times the reference stiffness block. Dirichlet data
u = s1 + s2 is imposed by lifting, which keeps the interior system symmetric
positive definite. Jacobians come from one adjoint solve per output component
against the factorization of the same interior matrix.

Three observation scenarios map the solution field to the model output: the
full nodal field in the discrete H^1 metric, the restriction to a centered
subdomain in the same metric, and a weighted pair of point values.
"""

from __future__ import annotations

import warnings

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .errors import (
    DimensionMismatch,
    InputClampedWarning,
    NotPositiveDefinite,
    NuggetEscalationWarning,
    SolverFailure,
)
from .linalg import SpdMatrix, cholesky
from .measure import squared_exponential_covariance
from .models import VectorValuedModel

__all__ = [
    "Mesh2D",
    "DiffusionModel",
    "build_field_covariance",
    "mode_field_export",
    "SCENARIOS",
    "SUBDOMAIN_BOUNDS",
    "POINT_A",
    "POINT_B",
]

SCENARIOS = ("full_field", "subdomain", "point_pair")
SUBDOMAIN_BOUNDS = (0.35, 0.65)
POINT_A = (0.2, 0.8)
POINT_B = (0.8, 0.2)

# Reference Q1 blocks on a square cell, corner order SW, SE, NE, NW. The
# stiffness block is independent of the cell size in 2-d; the mass block
# carries the cell area.
_K1 = np.array(
    [
        [4.0, -1.0, -2.0, -1.0],
        [-1.0, 4.0, -1.0, -2.0],
        [-2.0, -1.0, 4.0, -1.0],
        [-1.0, -2.0, -1.0, 4.0],
    ]
) / 6.0
_M1 = np.array(
    [
        [4.0, 2.0, 1.0, 2.0],
        [2.0, 4.0, 2.0, 1.0],
        [1.0, 2.0, 4.0, 2.0],
        [2.0, 1.0, 2.0, 4.0],
    ]
) / 36.0

LOG_CONDUCTIVITY_LIMIT = 40.0
DIRECT_SOLVE_MAX_G = 16


class Mesh2D:
    """Regular g-by-g grid of square cells on the unit square.

    Nodes are numbered row-major from the origin, cells likewise; each cell
    knows its four corner nodes in SW, SE, NE, NW order.
    """

    def __init__(self, cells_per_side):
        g = int(cells_per_side)
        if g < 2:
            raise DimensionMismatch("need at least 2 cells per side for interior nodes")
        self.cells_per_side = g
        self.h = 1.0 / g
        side = g + 1
        ix, iy = np.meshgrid(np.arange(side), np.arange(side))
        self.nodes = np.column_stack([ix.ravel() * self.h, iy.ravel() * self.h])
        cx, cy = np.meshgrid(np.arange(g), np.arange(g))
        cx = cx.ravel()
        cy = cy.ravel()
        sw = cy * side + cx
        self.cell_nodes = np.column_stack([sw, sw + 1, sw + side + 1, sw + side])
        self.cell_centers = np.column_stack([(cx + 0.5) * self.h, (cy + 0.5) * self.h])
        on_edge = (
            (ix.ravel() == 0) | (ix.ravel() == g) | (iy.ravel() == 0) | (iy.ravel() == g)
        )
        self.boundary_mask = on_edge
        self.interior = np.where(~on_edge)[0]
        self.boundary = np.where(on_edge)[0]

    @property
    def n_nodes(self):
        return self.nodes.shape[0]

    @property
    def n_cells(self):
        return self.cell_nodes.shape[0]

    def cell_areas(self):
        return np.full(self.n_cells, self.h * self.h)

    def interpolation_weights(self, point):
        """Node indices and bilinear weights of the cell containing ``point``."""
        s = np.asarray(point, dtype=float)
        if s.shape != (2,) or np.any(s < 0.0) or np.any(s > 1.0):
            raise DimensionMismatch(f"point {s} outside the unit square")
        g = self.cells_per_side
        cx = min(int(s[0] * g), g - 1)
        cy = min(int(s[1] * g), g - 1)
        xi = s[0] * g - cx
        eta = s[1] * g - cy
        cell = cy * g + cx
        weights = np.array(
            [(1 - xi) * (1 - eta), xi * (1 - eta), xi * eta, (1 - xi) * eta]
        )
        return self.cell_nodes[cell], weights


def _clamped_log_conductivity(x):
    limit = LOG_CONDUCTIVITY_LIMIT
    if np.any(np.abs(x) > limit):
        warnings.warn(
            f"log-conductivity clamped to [-{limit:g}, {limit:g}]",
            InputClampedWarning,
            stacklevel=3,
        )
        x = np.clip(x, -limit, limit)
    return x


class DiffusionModel(VectorValuedModel):
    """x -> observation of the diffusion solve with conductivity exp(x).

    ``scenario`` picks the observation operator and output metric:

    - ``full_field``: every nodal value, discrete H^1 (mass + stiffness) metric;
    - ``subdomain``: nodal values on cells centered in the middle box, same
      metric restricted there;
    - ``point_pair``: interpolated values at two fixed points, diagonal metric
      diag(alpha, beta).

    Each call assembles and factors its own system; instances hold only
    immutable precomputed structure and are safe to share across threads.
    """

    def __init__(self, mesh, scenario="full_field", alpha=1.0, beta=1.0):
        if isinstance(mesh, int):
            mesh = Mesh2D(mesh)
        if scenario not in SCENARIOS:
            raise ValueError(f"unknown scenario {scenario!r}, pick one of {SCENARIOS}")
        self.mesh = mesh
        self.scenario = scenario
        self.input_dim = mesh.n_cells
        self.lipschitz_constant = None

        nn = mesh.n_nodes
        cells = mesh.cell_nodes
        # COO scatter pattern for the stiffness: 16 entries per cell.
        self._rows = np.repeat(cells, 4, axis=1).ravel()
        self._cols = np.tile(cells, (1, 4)).ravel()
        self._boundary_values = mesh.nodes[:, 0] + mesh.nodes[:, 1]

        if scenario == "full_field":
            out_nodes = np.arange(nn)
            metric = self._h1_metric(np.arange(mesh.n_cells), out_nodes)
        elif scenario == "subdomain":
            lo, hi = SUBDOMAIN_BOUNDS
            centers = mesh.cell_centers
            inside = np.where(
                (centers[:, 0] >= lo) & (centers[:, 0] <= hi)
                & (centers[:, 1] >= lo) & (centers[:, 1] <= hi)
            )[0]
            if inside.size == 0:
                raise DimensionMismatch("subdomain contains no cell centers at this resolution")
            out_nodes = np.unique(cells[inside].ravel())
            metric = self._h1_metric(inside, out_nodes)
        else:
            nodes_a, w_a = mesh.interpolation_weights(POINT_A)
            nodes_b, w_b = mesh.interpolation_weights(POINT_B)
            if alpha <= 0 or beta <= 0:
                raise ValueError("point weights alpha, beta must be positive")
            obs = np.zeros((2, nn))
            obs[0, nodes_a] = w_a
            obs[1, nodes_b] = w_b
            self._observation = obs
            self._metric = SpdMatrix.diagonal([alpha, beta])
            self.output_dim = 2
            self._finish_init()
            return

        obs = np.zeros((out_nodes.size, nn))
        obs[np.arange(out_nodes.size), out_nodes] = 1.0
        self._observation = obs
        self._metric = metric
        self.output_dim = out_nodes.size
        self._finish_init()

    def _finish_init(self):
        mesh = self.mesh
        self._obs_interior_t = self._observation[:, mesh.interior].T.copy()
        self.point_weights = (
            (self._metric.entries[0, 0], self._metric.entries[1, 1])
            if self.scenario == "point_pair"
            else None
        )

    def _h1_metric(self, cell_ids, out_nodes):
        """Mass plus stiffness Gram matrix over the given cells, restricted to
        the nodes they touch."""
        mesh = self.mesh
        nn = mesh.n_nodes
        block = _M1 * (mesh.h * mesh.h) + _K1
        gram = np.zeros((nn, nn))
        for c in cell_ids:
            idx = mesh.cell_nodes[c]
            gram[np.ix_(idx, idx)] += block
        return SpdMatrix(gram[np.ix_(out_nodes, out_nodes)])

    @property
    def output_metric(self):
        return self._metric

    def _assemble(self, x):
        x = self._check_point(x)
        kappa = np.exp(_clamped_log_conductivity(x))
        data = (kappa[:, None, None] * _K1).ravel()
        nn = self.mesh.n_nodes
        full = sp.coo_matrix((data, (self._rows, self._cols)), shape=(nn, nn)).tocsr()
        interior = self.mesh.interior
        boundary = self.mesh.boundary
        a_ii = full[interior][:, interior].tocsc()
        rhs = -full[interior][:, boundary] @ self._boundary_values[boundary]
        return kappa, a_ii, rhs

    def _interior_solver(self, a_ii):
        if self.mesh.cells_per_side <= DIRECT_SOLVE_MAX_G:
            lu = spla.splu(a_ii)
            return lu.solve
        diag = a_ii.diagonal()
        precond = spla.LinearOperator(a_ii.shape, matvec=lambda v: v / diag)

        def solve(b):
            b = np.asarray(b, dtype=float)
            if b.ndim == 1:
                out, info = spla.cg(a_ii, b, rtol=1e-12, atol=0.0, M=precond)
                if info != 0:
                    raise SolverFailure(float("nan"), f"CG did not converge (info={info})")
                return out
            cols = [solve(b[:, j]) for j in range(b.shape[1])]
            return np.column_stack(cols)

        return solve

    def solve_field(self, x):
        """Full nodal solution vector, boundary values included."""
        _, a_ii, rhs = self._assemble(x)
        solve = self._interior_solver(a_ii)
        u_i = solve(rhs)
        resid = float(np.linalg.norm(a_ii @ u_i - rhs))
        if resid > 1e-10 * (float(np.linalg.norm(rhs)) + 1e-30):
            raise SolverFailure(resid)
        u = self._boundary_values.copy()
        u[self.mesh.interior] = u_i
        return u

    def eval(self, x):
        return self._observation @ self.solve_field(x)

    def jacobian(self, x):
        """Adjoint Jacobian: one factorization, one solve per output row.

        Row j of the Jacobian is -kappa_c * lambda_j^T S_c u per cell c, with
        S_c the unit stiffness scatter of the cell and lambda_j the adjoint
        solution for output j extended by zero to the boundary. The Dirichlet
        lift enters through the boundary entries of u.
        """
        kappa, a_ii, rhs = self._assemble(x)
        solve = self._interior_solver(a_ii)
        u_i = solve(rhs)
        resid = float(np.linalg.norm(a_ii @ u_i - rhs))
        if resid > 1e-10 * (float(np.linalg.norm(rhs)) + 1e-30):
            raise SolverFailure(resid)
        u = self._boundary_values.copy()
        u[self.mesh.interior] = u_i

        lam_i = solve(self._obs_interior_t)  # (n_interior, n_out)
        lam = np.zeros((self.mesh.n_nodes, self.output_dim))
        lam[self.mesh.interior] = lam_i

        cells = self.mesh.cell_nodes
        u_cells = u[cells]                      # (n_cells, 4)
        w = u_cells @ _K1.T                     # S_c u restricted to the cell
        lam_cells = lam[cells]                  # (n_cells, 4, n_out)
        jac_t = -kappa[:, None] * np.einsum("cap,ca->cp", lam_cells, w)
        return jac_t.T


def build_field_covariance(mesh, lengthscale=0.15):
    """Squared-exponential covariance over cell centers, with the smallest
    diagonal nugget (starting at 1e-10, escalating tenfold up to 1e-6) that
    lets the Cholesky factorization succeed."""
    base = squared_exponential_covariance(mesh.cell_centers, lengthscale).entries
    nugget = 1e-10
    while True:
        cov = SpdMatrix(base + nugget * np.eye(base.shape[0]))
        try:
            cholesky(cov)
            return cov
        except NotPositiveDefinite:
            nugget *= 10.0
            if nugget > 1e-6:
                raise
            warnings.warn(
                f"covariance nugget escalated to {nugget:g}",
                NuggetEscalationWarning,
                stacklevel=2,
            )


def mode_field_export(mesh, values, path):
    """Write a cell-indexed vector as (cell_center_x, cell_center_y, value)
    CSV rows for plotting."""
    v = np.asarray(values, dtype=float).reshape(-1)
    if v.shape[0] != mesh.n_cells:
        raise DimensionMismatch(f"vector length {v.shape[0]} != cell count {mesh.n_cells}")
    with open(path, "w", encoding="ascii") as fh:
        fh.write("cell_center_x,cell_center_y,value\n")
        for (cx, cy), val in zip(mesh.cell_centers, v):
            fh.write(f"{float(cx)!r},{float(cy)!r},{float(val)!r}\n")
    return path

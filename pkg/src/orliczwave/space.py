"""Galerkin spaces on the unit interval and unit square.

Three homogeneous-Dirichlet spaces share one interface: P1 finite elements on
a uniform interval mesh, P1 elements on a structured triangulation of the
square (each grid cell split along the same diagonal), and the orthonormal
sine basis sqrt(2) sin(k pi x) on the interval.

The nonlinear stress terms are integrated exactly for P1 spaces (gradients
are cell constants) and by composite Gauss quadrature for the sine basis.
Both paths share the same algebra: a list of per-component "gradient tables"
G_a mapping coefficients to gradient samples, plus positive weights, so that

    residual_j = sum_a G_a^T (w * sigma_a(grad u)),
    jacobian   = sum_ab G_a^T diag(w * Dsigma_ab) G_b,
    potential  = sum   w * phi(grad u),

and the residual is exactly the gradient of the potential in coefficients.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .nfunction import NFunctionSpec, UnsupportedSpecError
from .orlicz import CellField

__all__ = [
    "SpaceHandle",
    "P1IntervalSpace",
    "P1SquareSpace",
    "SineSpectralSpace",
    "build_space",
    "Field",
    "gradient_per_cell",
    "sampled_gradient",
    "nonlinear_residual",
    "nonlinear_jacobian",
    "discrete_potential",
    "l2_project",
    "l2_norm",
    "h1_seminorm",
    "l2_error",
    "hr_dual_norm",
    "field_to_csv",
    "grid_dump",
]

_GAUSS_X, _GAUSS_W = np.polynomial.legendre.leggauss(4)

# Degree-4 rule on the reference triangle: weights sum to one, points given
# barycentrically (distinct coordinate cycled through all three slots).
_TRI_W = np.array([0.223381589678011] * 3 + [0.109951743655322] * 3)
_TRI_BARY = np.array([
    [0.108103018168070, 0.445948490915965, 0.445948490915965],
    [0.445948490915965, 0.108103018168070, 0.445948490915965],
    [0.445948490915965, 0.445948490915965, 0.108103018168070],
    [0.816847572980459, 0.091576213509771, 0.091576213509771],
    [0.091576213509771, 0.816847572980459, 0.091576213509771],
    [0.091576213509771, 0.091576213509771, 0.816847572980459],
])


class SpaceHandle:
    """Common state for the three discrete spaces.

    Attributes
    ----------
    kind : str
        "fem1d", "fem2d" or "spectral1d".
    dim : int
        Ambient dimension of the domain (1 or 2).
    ndof : int
        Number of unknown coefficients (Dirichlet rows eliminated).
    n_cells : int
        Cells carrying the exact piecewise-constant gradient (FEM), or
        quadrature points standing in for cells in the spectral case.
    cell_measures : ndarray
        Positive measures of those cells; they sum to the domain measure.
    """

    kind: str = ""

    def __init__(self):
        self._mass = None
        self._stiffness = None
        self._mass_solve = None

    # Subclasses fill these in.
    dim: int
    ndof: int
    n_cells: int
    cell_measures: np.ndarray
    domain_measure: float

    def _assemble_mass(self):
        raise NotImplementedError

    def _assemble_stiffness(self):
        raise NotImplementedError

    def mass(self):
        if self._mass is None:
            self._mass = self._assemble_mass().tocsc()
        return self._mass

    def stiffness(self):
        if self._stiffness is None:
            self._stiffness = self._assemble_stiffness().tocsc()
        return self._stiffness

    def mass_solve(self, rhs: np.ndarray) -> np.ndarray:
        if self._mass_solve is None:
            self._mass_solve = spla.factorized(self.mass())
        return self._mass_solve(rhs)

    # Quadrature used for data terms (loads, projections, error norms).
    quad_points: np.ndarray   # (nq, dim)
    quad_weights: np.ndarray  # (nq,)

    def basis_at_quad(self):
        """(nq, ndof) operator taking coefficients to point values."""
        raise NotImplementedError

    def gradient_tables(self):
        """Per-component gradient operators and their weights.

        Returns (tables, weights): tables is a list of dim operators of shape
        (n_cells, ndof); weights equals cell_measures.
        """
        raise NotImplementedError

    def load_vector(self, fn) -> np.ndarray:
        """Assemble (fn, basis_j) for a callback fn(points) -> values."""
        values = np.asarray(fn(self.quad_points), dtype=float).reshape(-1)
        if values.shape != (self.quad_points.shape[0],):
            raise ValueError("sampler must return one value per quadrature point")
        return self.basis_at_quad().T @ (self.quad_weights * values)

    def zero_coefficients(self) -> np.ndarray:
        return np.zeros(self.ndof)

    def dof_coordinates(self) -> np.ndarray:
        raise NotImplementedError


@dataclass(frozen=True)
class Field:
    """Coefficient vector bound to its space."""

    space: SpaceHandle
    coefficients: np.ndarray

    def __post_init__(self):
        coeffs = np.asarray(self.coefficients, dtype=float)
        if coeffs.shape != (self.space.ndof,):
            raise ValueError(f"expected {self.space.ndof} coefficients, got {coeffs.shape}")
        object.__setattr__(self, "coefficients", coeffs)


class P1IntervalSpace(SpaceHandle):
    """Piecewise-linear elements on a uniform mesh of (0, 1)."""

    kind = "fem1d"

    def __init__(self, n_cells: int):
        super().__init__()
        if n_cells < 2:
            raise ValueError("need at least 2 cells for one interior node")
        self.dim = 1
        self.n_cells = int(n_cells)
        self.ndof = self.n_cells - 1
        self.h = 1.0 / self.n_cells
        self.nodes = np.linspace(0.0, 1.0, self.n_cells + 1)
        self.cell_measures = np.full(self.n_cells, self.h)
        self.domain_measure = 1.0
        self._build_tables()

    def _build_tables(self):
        n, m, h = self.n_cells, self.ndof, self.h
        # Gradient of u_h on cell c: (node value right - left) / h.
        rows, cols, vals = [], [], []
        for c in range(n):
            if c + 1 <= n - 1:           # right node interior
                rows.append(c); cols.append(c); vals.append(1.0 / h)
            if c >= 1:                   # left node interior
                rows.append(c); cols.append(c - 1); vals.append(-1.0 / h)
        self._grad = sp.csr_matrix((vals, (rows, cols)), shape=(n, m))

        # 4-point Gauss per cell for data terms.
        left = self.nodes[:-1]
        local = 0.5 * (1.0 + _GAUSS_X)              # on (0, 1)
        pts = (left[:, None] + h * local[None, :]).ravel()
        self.quad_points = pts[:, None]
        self.quad_weights = np.tile(0.5 * h * _GAUSS_W, n)

        rows, cols, vals = [], [], []
        for c in range(n):
            for q in range(4):
                gq = c * 4 + q
                s = local[q]
                if c + 1 <= n - 1:
                    rows.append(gq); cols.append(c); vals.append(s)
                if c >= 1:
                    rows.append(gq); cols.append(c - 1); vals.append(1.0 - s)
        self._basis = sp.csr_matrix((vals, (rows, cols)), shape=(4 * n, m))

    def _assemble_mass(self):
        h, m = self.h, self.ndof
        main = np.full(m, 2.0 * h / 3.0)
        off = np.full(m - 1, h / 6.0)
        return sp.diags([off, main, off], [-1, 0, 1])

    def _assemble_stiffness(self):
        h, m = self.h, self.ndof
        main = np.full(m, 2.0 / h)
        off = np.full(m - 1, -1.0 / h)
        return sp.diags([off, main, off], [-1, 0, 1])

    def basis_at_quad(self):
        return self._basis

    def gradient_tables(self):
        return [self._grad], self.cell_measures

    def dof_coordinates(self) -> np.ndarray:
        return self.nodes[1:-1][:, None]


class P1SquareSpace(SpaceHandle):
    """P1 elements on the unit square, each grid cell split along one diagonal."""

    kind = "fem2d"

    def __init__(self, nx: int, ny: int):
        super().__init__()
        if nx < 2 or ny < 2:
            raise ValueError("need nx, ny >= 2 for at least one interior node")
        self.dim = 2
        self.nx, self.ny = int(nx), int(ny)
        self.hx, self.hy = 1.0 / nx, 1.0 / ny
        self.ndof = (nx - 1) * (ny - 1)
        self.n_cells = 2 * nx * ny
        self.cell_measures = np.full(self.n_cells, 0.5 * self.hx * self.hy)
        self.domain_measure = 1.0
        self._build_mesh()
        self._build_tables()

    def _node_dof(self, i, j):
        if 1 <= i <= self.nx - 1 and 1 <= j <= self.ny - 1:
            return (j - 1) * (self.nx - 1) + (i - 1)
        return -1

    def _build_mesh(self):
        nx, ny = self.nx, self.ny
        xs = np.linspace(0.0, 1.0, nx + 1)
        ys = np.linspace(0.0, 1.0, ny + 1)
        node_xy = np.array([(x, y) for y in ys for x in xs])
        nid = lambda i, j: j * (nx + 1) + i
        tris = []
        for j in range(ny):
            for i in range(nx):
                n00, n10 = nid(i, j), nid(i + 1, j)
                n01, n11 = nid(i, j + 1), nid(i + 1, j + 1)
                tris.append((n00, n10, n11))   # lower; diagonal from n00 to n11
                tris.append((n00, n11, n01))   # upper
        self._node_xy = node_xy
        self._tris = np.array(tris)
        dof_of_node = np.full(node_xy.shape[0], -1, dtype=int)
        for j in range(1, ny):
            for i in range(1, nx):
                dof_of_node[nid(i, j)] = self._node_dof(i, j)
        self._dof_of_node = dof_of_node

        # Shape-function gradients per triangle (constant): solve the affine
        # interpolation explicitly through the signed-area formula.
        p = node_xy[self._tris]                 # (n_tri, 3, 2)
        x, y = p[:, :, 0], p[:, :, 1]
        det = ((x[:, 1] - x[:, 0]) * (y[:, 2] - y[:, 0])
               - (x[:, 2] - x[:, 0]) * (y[:, 1] - y[:, 0]))
        gb = np.empty((p.shape[0], 3, 2))
        gb[:, 0, 0] = (y[:, 1] - y[:, 2]) / det
        gb[:, 0, 1] = (x[:, 2] - x[:, 1]) / det
        gb[:, 1, 0] = (y[:, 2] - y[:, 0]) / det
        gb[:, 1, 1] = (x[:, 0] - x[:, 2]) / det
        gb[:, 2, 0] = (y[:, 0] - y[:, 1]) / det
        gb[:, 2, 1] = (x[:, 1] - x[:, 0]) / det
        self._shape_grads = gb
        self._areas = 0.5 * np.abs(det)

    def _build_tables(self):
        n_tri = self._tris.shape[0]
        m = self.ndof
        grads = []
        for a in range(2):
            rows, cols, vals = [], [], []
            for t in range(n_tri):
                for v in range(3):
                    dof = self._dof_of_node[self._tris[t, v]]
                    if dof >= 0:
                        rows.append(t); cols.append(dof)
                        vals.append(self._shape_grads[t, v, a])
            grads.append(sp.csr_matrix((vals, (rows, cols)), shape=(n_tri, m)))
        self._grads = grads

        p = self._node_xy[self._tris]           # (n_tri, 3, 2)
        pts = np.einsum("qv,tvd->tqd", _TRI_BARY, p).reshape(-1, 2)
        self.quad_points = pts
        self.quad_weights = (self._areas[:, None] * _TRI_W[None, :]).ravel()

        rows, cols, vals = [], [], []
        for t in range(n_tri):
            for q in range(6):
                gq = t * 6 + q
                for v in range(3):
                    dof = self._dof_of_node[self._tris[t, v]]
                    if dof >= 0:
                        rows.append(gq); cols.append(dof)
                        vals.append(_TRI_BARY[q, v])
        self._basis = sp.csr_matrix((vals, (rows, cols)), shape=(6 * n_tri, m))

    def _element_matrices(self):
        ref_mass = (np.ones((3, 3)) + np.eye(3)) / 12.0
        for t in range(self._tris.shape[0]):
            area = self._areas[t]
            gb = self._shape_grads[t]
            yield t, area * ref_mass, area * (gb @ gb.T)

    def _assemble(self, which: str):
        rows, cols, vals = [], [], []
        for t, m_el, k_el in self._element_matrices():
            el = m_el if which == "mass" else k_el
            dofs = self._dof_of_node[self._tris[t]]
            for a in range(3):
                if dofs[a] < 0:
                    continue
                for b in range(3):
                    if dofs[b] < 0:
                        continue
                    rows.append(dofs[a]); cols.append(dofs[b]); vals.append(el[a, b])
        return sp.csr_matrix((vals, (rows, cols)), shape=(self.ndof, self.ndof))

    def _assemble_mass(self):
        return self._assemble("mass")

    def _assemble_stiffness(self):
        return self._assemble("stiffness")

    def basis_at_quad(self):
        return self._basis

    def gradient_tables(self):
        return self._grads, self.cell_measures

    def dof_coordinates(self) -> np.ndarray:
        coords = np.empty((self.ndof, 2))
        for j in range(1, self.ny):
            for i in range(1, self.nx):
                coords[self._node_dof(i, j)] = (i * self.hx, j * self.hy)
        return coords


class SineSpectralSpace(SpaceHandle):
    """Orthonormal basis sqrt(2) sin(k pi x), k = 1..m, on (0, 1).

    Mass is the identity and stiffness the diagonal of (k pi)^2.  Nonlinear
    terms are integrated by 4-point Gauss on 1024 uniform subintervals, which
    also serve as the "cells" reported to the Orlicz layer.
    """

    kind = "spectral1d"

    _SUBINTERVALS = 1024

    def __init__(self, n_modes: int):
        super().__init__()
        if n_modes < 1:
            raise ValueError("need at least one mode")
        self.dim = 1
        self.ndof = int(n_modes)
        self.wavenumbers = np.pi * np.arange(1, n_modes + 1)
        self.domain_measure = 1.0

        edges = np.linspace(0.0, 1.0, self._SUBINTERVALS + 1)
        width = edges[1] - edges[0]
        local = 0.5 * (1.0 + _GAUSS_X)
        pts = (edges[:-1, None] + width * local[None, :]).ravel()
        self.quad_points = pts[:, None]
        self.quad_weights = np.tile(0.5 * width * _GAUSS_W, self._SUBINTERVALS)
        self.n_cells = pts.size
        self.cell_measures = self.quad_weights

        arg = pts[:, None] * self.wavenumbers[None, :]
        self._basis = np.sqrt(2.0) * np.sin(arg)
        self._grad = np.sqrt(2.0) * self.wavenumbers[None, :] * np.cos(arg)

    def _assemble_mass(self):
        return sp.identity(self.ndof, format="csc")

    def _assemble_stiffness(self):
        return sp.diags(self.wavenumbers ** 2).tocsc()

    def mass_solve(self, rhs: np.ndarray) -> np.ndarray:
        return rhs

    def basis_at_quad(self):
        return self._basis

    def gradient_tables(self):
        return [self._grad], self.quad_weights

    def dof_coordinates(self) -> np.ndarray:
        raise UnsupportedSpecError("spectral modes have no nodal coordinates")


def build_space(kind: str, resolution) -> SpaceHandle:
    """Factory used by the command-line driver.

    resolution is the cell count (fem1d), the mode count (spectral1d), or a
    pair (nx, ny) / single int for fem2d.
    """
    if kind == "fem1d":
        return P1IntervalSpace(int(resolution))
    if kind == "fem2d":
        if np.isscalar(resolution):
            return P1SquareSpace(int(resolution), int(resolution))
        nx, ny = resolution
        return P1SquareSpace(int(nx), int(ny))
    if kind == "spectral1d":
        return SineSpectralSpace(int(resolution))
    raise ValueError(f"unknown space kind {kind!r}")


# -- gradient fields ---------------------------------------------------------

def _gradient_stack(space: SpaceHandle, coeffs: np.ndarray) -> np.ndarray:
    tables, _ = space.gradient_tables()
    return np.column_stack([t @ coeffs for t in tables])


def gradient_per_cell(u: Field) -> CellField:
    """Exact cellwise gradient of a P1 field.

    Raises for the spectral space, whose gradient is not piecewise constant;
    use `sampled_gradient` there.
    """
    if u.space.kind == "spectral1d":
        raise UnsupportedSpecError("gradient_per_cell needs a P1 space; "
                                   "use sampled_gradient for spectral fields")
    return CellField(_gradient_stack(u.space, u.coefficients), u.space.cell_measures)


def sampled_gradient(u: Field) -> CellField:
    """Gradient sampled on the space's quadrature support.

    Exact for P1 spaces (identical to gradient_per_cell); a quadrature proxy
    with the Gauss weights as cell measures for the spectral space.
    """
    return CellField(_gradient_stack(u.space, u.coefficients),
                     np.asarray(u.space.gradient_tables()[1]))


# -- nonlinear stress terms ---------------------------------------------------

def _check_spec_dim(spec: NFunctionSpec, space: SpaceHandle):
    if spec.dim != space.dim:
        raise ValueError(f"potential acts on R^{spec.dim} but space gradients "
                         f"live in R^{space.dim}")


def nonlinear_residual(spec: NFunctionSpec, u: Field) -> np.ndarray:
    """B(u)_j = integral sigma(grad u_h) . grad basis_j."""
    space = u.space
    _check_spec_dim(spec, space)
    tables, w = space.gradient_tables()
    sig = spec.stress(_gradient_stack(space, u.coefficients))
    out = np.zeros(space.ndof)
    for a, table in enumerate(tables):
        out += table.T @ (w * sig[:, a])
    return out


def nonlinear_jacobian(spec: NFunctionSpec, u: Field):
    """Derivative of `nonlinear_residual` in the coefficients.

    Sparse for P1 spaces, dense for the spectral basis.  Symmetric positive
    semidefinite whenever the potential is convex.
    """
    space = u.space
    _check_spec_dim(spec, space)
    tables, w = space.gradient_tables()
    curv = spec.stress_jacobian(_gradient_stack(space, u.coefficients))
    dense = not sp.issparse(tables[0])
    out = None
    for a, ta in enumerate(tables):
        for b, tb in enumerate(tables):
            coeff = w * curv[:, a, b]
            if dense:
                term = ta.T @ (coeff[:, None] * tb)
            else:
                term = ta.T @ sp.diags(coeff) @ tb
            out = term if out is None else out + term
    return out


def discrete_potential(spec: NFunctionSpec, u: Field) -> float:
    """Potential energy integral of grad u_h; exact for P1 spaces."""
    space = u.space
    _check_spec_dim(spec, space)
    _, w = space.gradient_tables()
    return float(w @ spec.evaluate(_gradient_stack(space, u.coefficients)))


# -- projections, norms, errors ----------------------------------------------

def l2_project(space: SpaceHandle, fn) -> Field:
    """L^2-orthogonal projection of a point callback onto the space."""
    return Field(space, space.mass_solve(space.load_vector(fn)))


def l2_norm(u: Field) -> float:
    c = u.coefficients
    return float(np.sqrt(max(c @ (u.space.mass() @ c), 0.0)))


def h1_seminorm(u: Field) -> float:
    c = u.coefficients
    return float(np.sqrt(max(c @ (u.space.stiffness() @ c), 0.0)))


def l2_error(u: Field, fn) -> float:
    """Quadrature L^2 distance between the discrete field and a callback."""
    space = u.space
    diff = space.basis_at_quad() @ u.coefficients \
        - np.asarray(fn(space.quad_points), dtype=float).reshape(-1)
    return float(np.sqrt(space.quad_weights @ diff ** 2))


def hr_dual_norm(w_field: Field, r: int = 2) -> float:
    """Norm of an L^2 field as a functional on H^r intersect H^1_0.

    Only the sine basis diagonalizes every derivative pairing, so this is
    restricted to spectral fields: with weights W_k = sum_{j<=r} (k pi)^(2j)
    the dual norm of sum c_k e_k is sqrt(sum c_k^2 / W_k).
    """
    space = w_field.space
    if space.kind != "spectral1d":
        raise UnsupportedSpecError("dual norms are available on the spectral space only")
    if r < 1:
        raise ValueError("need r >= 1")
    powers = np.arange(r + 1)
    weights = np.sum(space.wavenumbers[:, None] ** (2 * powers[None, :]), axis=1)
    return float(np.sqrt(np.sum(w_field.coefficients ** 2 / weights)))


# -- exports -------------------------------------------------------------------

def field_to_csv(u: Field, path) -> None:
    """Dof table: coordinates and value for P1, mode and coefficient for sine."""
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        if u.space.kind == "spectral1d":
            writer.writerow(["mode", "wavenumber", "coefficient"])
            for k, (omega, c) in enumerate(zip(u.space.wavenumbers, u.coefficients), 1):
                writer.writerow([str(k), f"{omega:.17g}", f"{c:.17g}"])
            return
        coords = u.space.dof_coordinates()
        writer.writerow(["x", "value"] if u.space.dim == 1 else ["x", "y", "value"])
        for xy, c in zip(coords, u.coefficients):
            writer.writerow([f"{v:.17g}" for v in xy] + [f"{c:.17g}"])


def grid_dump(u: Field, path) -> None:
    """Structured-grid text dump (x y value) for 2D fields, boundary included."""
    space = u.space
    if space.kind != "fem2d":
        raise UnsupportedSpecError("grid dumps are for fem2d fields")
    with open(path, "w") as fh:
        for j in range(space.ny + 1):
            for i in range(space.nx + 1):
                dof = space._node_dof(i, j)
                value = u.coefficients[dof] if dof >= 0 else 0.0
                fh.write(f"{i * space.hx:.17g} {j * space.hy:.17g} {value:.17g}\n")
            fh.write("\n")

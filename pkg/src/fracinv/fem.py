"""Piecewise-linear finite element kernels.

Two nodal spaces live on every mesh: V_h (all vertices, used for the
diffusion coefficient) and X_h (interior vertices, zero on the boundary,
used for the state).  Mass and stiffness matrices are assembled exactly:
the coefficient enters the stiffness through its vertex average per cell,
which is exact for a piecewise-linear coefficient against the cellwise
constant gradients of P1 basis functions.  Data integrals use 2-point
Gauss (1D) / 3-point edge-midpoint (2D) quadrature.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

from . import linalg
from .errors import InvalidCoefficientError
from .mesh import Mesh, cell_measures

VH = "vh"
XH = "xh"

# reference quadrature: (barycentric coordinates, weights), exact for quadratics
_QUAD_1D = (np.array([[0.5 + 0.5 / np.sqrt(3.0), 0.5 - 0.5 / np.sqrt(3.0)],
                      [0.5 - 0.5 / np.sqrt(3.0), 0.5 + 0.5 / np.sqrt(3.0)]]),
            np.array([0.5, 0.5]))
_QUAD_2D = (np.array([[0.5, 0.5, 0.0],
                      [0.0, 0.5, 0.5],
                      [0.5, 0.0, 0.5]]),
            np.array([1.0, 1.0, 1.0]) / 3.0)


@dataclass(frozen=True, eq=False)
class Field:
    """Nodal coefficient vector over V_h (all vertices) or X_h (interior)."""

    mesh: Mesh
    space: str
    values: np.ndarray

    def __post_init__(self):
        if self.space not in (VH, XH):
            raise ValueError(f"unknown space {self.space!r}")
        vals = np.ascontiguousarray(self.values, dtype=float)
        object.__setattr__(self, "values", vals)
        if vals.shape != (n_dofs(self.mesh, self.space),):
            raise ValueError(
                f"value length {vals.shape} does not match {self.space} dof count")

    def extend(self) -> np.ndarray:
        """Values on all vertices; X_h fields get zeros on the boundary."""
        if self.space == VH:
            return self.values
        full = np.zeros(self.mesh.n_vertices)
        full[self.mesh.interior] = self.values
        return full


def n_dofs(mesh: Mesh, space: str) -> int:
    return mesh.n_vertices if space == VH else len(mesh.interior)


def zero_field(mesh: Mesh, space: str) -> Field:
    return Field(mesh, space, np.zeros(n_dofs(mesh, space)))


def _dof_map(mesh, space):
    """Vertex index -> dof index, -1 for vertices outside the space."""
    if space == VH:
        return np.arange(mesh.n_vertices)
    idx = np.full(mesh.n_vertices, -1, dtype=np.int64)
    idx[mesh.interior] = np.arange(len(mesh.interior))
    return idx


def _cell_basis_gradients(mesh):
    """Gradients of the nodal basis functions per cell, shape (n_cells, nloc, dim)."""
    meas = cell_measures(mesh)
    if mesh.dim == 1:
        grads = np.empty((mesh.n_cells, 2, 1))
        grads[:, 0, 0] = -1.0 / meas
        grads[:, 1, 0] = 1.0 / meas
        return grads
    p = mesh.vertices[mesh.cells]  # (n_c, 3, 2)
    grads = np.empty((mesh.n_cells, 3, 2))
    for i in range(3):
        j, k = (i + 1) % 3, (i + 2) % 3
        grads[:, i, 0] = p[:, j, 1] - p[:, k, 1]
        grads[:, i, 1] = p[:, k, 0] - p[:, j, 0]
    grads /= (2.0 * meas)[:, None, None]
    return grads


def _assemble(mesh, space, local):
    """Scatter per-cell local matrices (n_cells, nloc, nloc) into CSR."""
    dof = _dof_map(mesh, space)
    nloc = mesh.dim + 1
    rows = np.repeat(dof[mesh.cells], nloc, axis=1).ravel()
    cols = np.tile(dof[mesh.cells], (1, nloc)).ravel()
    vals = local.ravel()
    keep = (rows >= 0) & (cols >= 0)
    n = n_dofs(mesh, space)
    mat = sp.coo_matrix((vals[keep], (rows[keep], cols[keep])), shape=(n, n))
    return mat.tocsr()


def assemble_mass(mesh: Mesh, space: str) -> sp.csr_matrix:
    """Mass matrix M_ij = integral of phi_i phi_j over the mesh."""
    meas = cell_measures(mesh)
    if mesh.dim == 1:
        ref = np.array([[2.0, 1.0], [1.0, 2.0]]) / 6.0
    else:
        ref = np.array([[2.0, 1.0, 1.0], [1.0, 2.0, 1.0], [1.0, 1.0, 2.0]]) / 12.0
    local = meas[:, None, None] * ref
    return _assemble(mesh, space, local)


def assemble_stiffness(mesh: Mesh, space: str, q: Field) -> sp.csr_matrix:
    """Stiffness matrix K_ij = integral of q grad(phi_i) . grad(phi_j).

    The coefficient ``q`` must be a V_h field on the same mesh with
    strictly positive nodal values.
    """
    if q.mesh is not mesh or q.space != VH:
        raise ValueError("coefficient must be a V_h field on the same mesh")
    qmin = q.values.min()
    if qmin <= 0.0:
        raise InvalidCoefficientError(f"coefficient must be positive, min is {qmin:.3g}")
    return _stiffness_with_coeff(mesh, space, q.values)


def _stiffness_with_coeff(mesh, space, coeff_values):
    """Stiffness assembly without the positivity check (for search directions)."""
    meas = cell_measures(mesh)
    grads = _cell_basis_gradients(mesh)
    coeff = coeff_values[mesh.cells].mean(axis=1)
    local = np.einsum("c,c,cid,cjd->cij", coeff, meas, grads, grads)
    return _assemble(mesh, space, local)


def interpolate(mesh: Mesh, space: str, f) -> Field:
    """Lagrange nodal interpolation: evaluate ``f`` at the space's vertices."""
    vals = _eval_at(f, mesh.vertices)
    if space == XH:
        vals = vals[mesh.interior]
    return Field(mesh, space, vals)


def _eval_at(f, points):
    if np.isscalar(f):
        return np.full(len(points), float(f))
    coords = [points[:, k] for k in range(points.shape[1])]
    vals = np.asarray(f(*coords), dtype=float)
    if vals.ndim == 0:
        vals = np.full(len(points), float(vals))
    return vals


def load_vector(mesh: Mesh, space: str, f) -> np.ndarray:
    """Dual vector b_i = integral of f phi_i, by per-cell Gauss quadrature.

    ``f`` may be a callable of the coordinates, a scalar, or a Field on
    the same mesh (evaluated through its P1 representation, which makes
    the quadrature exact).
    """
    lam, w = _QUAD_1D if mesh.dim == 1 else _QUAD_2D
    pts_phys = np.einsum("ql,cld->cqd", lam, mesh.vertices[mesh.cells])
    if isinstance(f, Field):
        if f.mesh is not mesh:
            raise ValueError("field is on a different mesh")
        nodal = f.extend()
        fvals = np.einsum("ql,cl->cq", lam, nodal[mesh.cells])
    else:
        flat = pts_phys.reshape(-1, mesh.dim)
        fvals = _eval_at(f, flat).reshape(pts_phys.shape[:2])
    meas = cell_measures(mesh)
    # contribution of cell c to its local vertex l: |c| * sum_q w_q f(x_q) lam_l(x_q)
    contrib = np.einsum("c,q,cq,ql->cl", meas, w, fvals, lam)
    dof = _dof_map(mesh, space)
    out = np.zeros(n_dofs(mesh, space) + 1)
    np.add.at(out, dof[mesh.cells].ravel() + 1, contrib.ravel())
    return out[1:]  # slot 0 swallowed contributions of dropped boundary dofs


def l2_project(mesh: Mesh, f) -> Field:
    """L2 projection onto X_h: solve M x = (f, phi_i)."""
    m = assemble_mass(mesh, XH)
    b = load_vector(mesh, XH, f)
    x = linalg.factorize(m).solve(b)
    return Field(mesh, XH, x)


def norm_l2(v: Field) -> float:
    """L2 norm via the mass matrix of the field's space."""
    m = assemble_mass(v.mesh, v.space)
    return float(np.sqrt(max(v.values @ (m @ v.values), 0.0)))


def seminorm_h1(v: Field) -> float:
    """H1 seminorm via the unit-coefficient stiffness matrix."""
    k = _stiffness_with_coeff(v.mesh, v.space, np.ones(v.mesh.n_vertices))
    return float(np.sqrt(max(v.values @ (k @ v.values), 0.0)))


def norm_linf(v: Field) -> float:
    """Max absolute nodal value (exact for P1)."""
    if v.values.size == 0:
        return 0.0
    return float(np.abs(v.values).max())


def seminorm_w1inf(v: Field) -> float:
    """Max over cells of |grad v| (gradients are cellwise constant)."""
    g = cell_gradient(v)
    return float(np.linalg.norm(g, axis=1).max())


def cell_gradient(v: Field) -> np.ndarray:
    """Cellwise constant gradient of a field, shape (n_cells, dim)."""
    grads = _cell_basis_gradients(v.mesh)
    nodal = v.extend()
    return np.einsum("cl,cld->cd", nodal[v.mesh.cells], grads)


def cell_average_load(mesh: Mesh, cellwise: np.ndarray) -> np.ndarray:
    """V_h dual vector of a cellwise constant function: b_i = sum |c|/(dim+1) w_c."""
    meas = cell_measures(mesh)
    w = meas * cellwise / (mesh.dim + 1)
    out = np.zeros(mesh.n_vertices)
    np.add.at(out, mesh.cells.ravel(), np.repeat(w, mesh.dim + 1))
    return out


def grad_dot(a: Field, b: Field) -> Field:
    """L2 projection onto V_h of the cellwise function grad(a) . grad(b)."""
    if a.mesh is not b.mesh:
        raise ValueError("fields live on different meshes")
    mesh = a.mesh
    c = np.einsum("cd,cd->c", cell_gradient(a), cell_gradient(b))
    rhs = cell_average_load(mesh, c)
    m = assemble_mass(mesh, VH)
    x = linalg.factorize(m).solve(rhs)
    return Field(mesh, VH, x)


def evaluate_at_points(v: Field, points: np.ndarray) -> np.ndarray:
    """Evaluate the P1 function at arbitrary points.

    Points marginally outside the mesh (e.g. in the sliver between the
    disk and its inscribed polygon) are evaluated in the nearest cell
    with clipped barycentric coordinates.
    """
    mesh = v.mesh
    nodal = v.extend()
    points = np.atleast_2d(np.asarray(points, dtype=float))
    if mesh.dim == 1:
        x = mesh.vertices[:, 0]
        order = np.argsort(x)
        return np.interp(points[:, 0], x[order], nodal[order])
    p0 = mesh.vertices[mesh.cells[:, 0]]
    e1 = mesh.vertices[mesh.cells[:, 1]] - p0
    e2 = mesh.vertices[mesh.cells[:, 2]] - p0
    det = e1[:, 0] * e2[:, 1] - e1[:, 1] * e2[:, 0]
    out = np.empty(len(points))
    for i, pt in enumerate(points):
        r = pt - p0
        l1 = (r[:, 0] * e2[:, 1] - r[:, 1] * e2[:, 0]) / det
        l2 = (e1[:, 0] * r[:, 1] - e1[:, 1] * r[:, 0]) / det
        l0 = 1.0 - l1 - l2
        c = int(np.argmax(np.minimum(l0, np.minimum(l1, l2))))
        lam = np.clip([l0[c], l1[c], l2[c]], 0.0, None)
        lam /= lam.sum()
        out[i] = lam @ nodal[mesh.cells[c]]
    return out


def save_field(field: Field, path, name="field", mesh_file="") -> None:
    """Write a field dump: header comments plus one 'vertex_index value' per line."""
    mesh = field.mesh
    idx = np.arange(mesh.n_vertices) if field.space == VH else mesh.interior
    with open(path, "w") as fh:
        fh.write(f"# field {name}\n# mesh {mesh_file}\n# space {field.space}\n")
        for i, val in zip(idx, field.values):
            fh.write(f"{i} {val:.17g}\n")


def load_field(path, mesh: Mesh) -> Field:
    """Read a field dump written by :func:`save_field`."""
    space = None
    pairs = []
    with open(path) as fh:
        for raw in fh:
            line = raw.strip()
            if line.startswith("#"):
                parts = line[1:].split()
                if len(parts) == 2 and parts[0] == "space":
                    space = parts[1]
                continue
            if line:
                i, val = line.split()
                pairs.append((int(i), float(val)))
    if space not in (VH, XH):
        raise ValueError(f"field dump {path} lacks a valid '# space' header")
    idx = np.arange(mesh.n_vertices) if space == VH else mesh.interior
    if len(pairs) != len(idx) or any(i != j for (i, _), j in zip(pairs, idx)):
        raise ValueError(f"field dump {path} does not match the mesh dof layout")
    return Field(mesh, space, np.array([val for _, val in pairs]))

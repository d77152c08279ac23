"""Broken tensor-product polynomial spaces on box meshes.

The local basis is the orthonormal tensor-product Legendre (modal) basis on
the reference cell [-1, 1]^dim, so element mass matrices are diagonal.
Local dofs are ordered lexicographically in the 1D mode indices with the
x mode running fastest; a vector space stores its components contiguously
per element: dof = (elem * n_components + comp) * n_loc + loc.
"""

from dataclasses import dataclass
from functools import lru_cache

import numpy as np


def legendre_table(n_max, x):
    """Values and derivatives of Legendre polynomials P_0..P_n_max at x.

    Returns two arrays of shape (n_max + 1, len(x)).
    """
    x = np.asarray(x, dtype=float)
    vals = np.zeros((n_max + 1,) + x.shape)
    ders = np.zeros_like(vals)
    vals[0] = 1.0
    if n_max >= 1:
        vals[1] = x
        ders[1] = 1.0
    for n in range(1, n_max):
        vals[n + 1] = ((2 * n + 1) * x * vals[n] - n * vals[n - 1]) / (n + 1)
        ders[n + 1] = ders[n - 1] + (2 * n + 1) * vals[n]
    return vals, ders


def orthonormal_legendre(n_max, x):
    """Legendre basis scaled to unit L2 norm on [-1, 1]."""
    vals, ders = legendre_table(n_max, x)
    scale = np.sqrt((2 * np.arange(n_max + 1) + 1) / 2.0)
    return vals * scale[:, None], ders * scale[:, None]


@dataclass(frozen=True)
class QuadratureRule:
    """Tensor Gauss-Legendre rule on the reference cell [-1, 1]^dim."""

    points: np.ndarray   # (n_q, dim)
    weights: np.ndarray  # (n_q,)
    exactness_degree: int

    @property
    def n_points(self):
        return self.weights.size


def gauss_rule(dim, n_1d):
    x1, w1 = np.polynomial.legendre.leggauss(n_1d)
    grids = np.meshgrid(*([x1] * dim), indexing="ij")
    pts = np.stack([g.reshape(-1, order="F") for g in grids], axis=1)
    wgrids = np.meshgrid(*([w1] * dim), indexing="ij")
    wts = np.ones(pts.shape[0])
    for g in wgrids:
        wts = wts * g.reshape(-1, order="F")
    return QuadratureRule(pts, wts, 2 * n_1d - 1)


def quad_points_1d(n_1d):
    return np.polynomial.legendre.leggauss(n_1d)


class RefTabulation:
    """Basis values/derivatives at reference volume and face quadrature points.

    Face tabulations are keyed by (axis, side) where side is -1 for the face
    at xi_axis = -1 and +1 for xi_axis = +1.  All tangential directions use
    the same 1D Gauss points in ascending axis order, so matching quadrature
    points on the two sides of a shared face line up index by index.
    """

    def __init__(self, dim, degree, n_1d):
        self.dim = dim
        self.degree = degree
        self.n_1d = n_1d
        self.n_loc = (degree + 1) ** dim
        self.volume = gauss_rule(dim, n_1d)
        self.phi, self.dphi = self._tabulate(self.volume.points)
        self.face = gauss_rule(dim - 1, n_1d) if dim > 1 else QuadratureRule(
            np.zeros((1, 0)), np.ones(1), np.inf)
        self.phi_face = {}
        self.dphi_face = {}
        for axis in range(dim):
            for side in (-1, 1):
                pts = self._face_points(axis, side)
                vals, ders = self._tabulate(pts)
                self.phi_face[axis, side] = vals
                self.dphi_face[axis, side] = ders

    def _face_points(self, axis, side):
        n_f = self.face.n_points
        pts = np.empty((n_f, self.dim))
        tang = [a for a in range(self.dim) if a != axis]
        pts[:, tang] = self.face.points
        pts[:, axis] = float(side)
        return pts

    def _tabulate(self, points):
        """Basis values (n_loc, n_q) and reference gradients (dim, n_loc, n_q)."""
        n_q = points.shape[0]
        vals1 = []
        ders1 = []
        for a in range(self.dim):
            v, d = orthonormal_legendre(self.degree, points[:, a])
            vals1.append(v)
            ders1.append(d)
        modes = self._mode_table()
        phi = np.ones((self.n_loc, n_q))
        dphi = np.ones((self.dim, self.n_loc, n_q))
        for a in range(self.dim):
            phi *= vals1[a][modes[:, a]]
            for b in range(self.dim):
                dphi[b] *= ders1[a][modes[:, a]] if a == b else vals1[a][modes[:, a]]
        return phi, dphi

    def _mode_table(self):
        k = self.degree
        grids = np.meshgrid(*([np.arange(k + 1)] * self.dim), indexing="ij")
        return np.stack([g.reshape(-1, order="F") for g in grids], axis=1)


@lru_cache(maxsize=None)
def ref_tabulation(dim, degree, n_1d):
    return RefTabulation(dim, degree, n_1d)


def default_quad_order(degree):
    # integrates Q_{2k+2} exactly (2*n_1d - 1 >= 2k + 2)
    return max(degree + 2, 2 * degree, 2)


class DgSpace:
    """Broken Q_k space (scalar or vector valued) over a box mesh."""

    def __init__(self, mesh, degree, n_components=1):
        if degree < 0:
            raise ValueError("degree must be >= 0")
        self.mesh = mesh
        self.degree = degree
        self.n_components = n_components
        self.tab = ref_tabulation(mesh.dim, degree, default_quad_order(degree))
        self.n_loc = self.tab.n_loc
        self.dofs_per_element = n_components * self.n_loc
        self.total_dofs = mesh.n_elements * self.dofs_per_element
        # geometry factors (uniform grid)
        self.det_j = float(np.prod(mesh.element_lengths / 2.0))
        self.grad_scale = 2.0 / mesh.element_lengths  # d/dx_a = grad_scale[a] * d/dxi_a
        self.face_det_j = np.array([
            np.prod(np.delete(mesh.element_lengths, a)) / 2 ** (mesh.dim - 1)
            for a in range(mesh.dim)
        ])

    @property
    def quadrature(self):
        return self.tab.volume

    def zeros(self):
        return FieldCoeffs(self, np.zeros(self.total_dofs))

    def dof_array(self, values):
        """View of a flat coefficient vector as (n_elem, n_comp, n_loc)."""
        return values.reshape(self.mesh.n_elements, self.n_components, self.n_loc)

    def quad_points_phys(self):
        """Physical coordinates of all volume quadrature points, (n_elem, n_q, dim)."""
        mesh = self.mesh
        ref = self.tab.volume.points
        return (mesh.element_lower[:, None, :]
                + (ref[None, :, :] + 1.0) * (mesh.element_lengths / 2.0))

    def face_points_phys(self, faces, axis, side):
        """Physical coordinates of face quadrature points for given elements.

        ``faces`` are element indices, ``side`` is -1/+1 in reference coords.
        Returns (n_faces, n_qf, dim).
        """
        mesh = self.mesh
        pts = self.tab._face_points(axis, side)
        return (mesh.element_lower[faces][:, None, :]
                + (pts[None, :, :] + 1.0) * (mesh.element_lengths / 2.0))

    def integration_weights(self):
        """Physical quadrature weights, shape (n_q,)."""
        return self.tab.volume.weights * self.det_j


class FieldCoeffs:
    """Coefficient vector of a discrete field on a DgSpace."""

    def __init__(self, space, values):
        values = np.asarray(values, dtype=float)
        if values.shape != (space.total_dofs,):
            raise ValueError(
                f"coefficient vector has length {values.size}, "
                f"space has {space.total_dofs} dofs")
        self.space = space
        self.values = values

    def copy(self):
        return FieldCoeffs(self.space, self.values.copy())

    def by_element(self):
        return self.space.dof_array(self.values)

    def at_volume_quad(self):
        """Field values at all volume quadrature points.

        Returns (n_elem, n_q) for scalar spaces, (n_elem, n_comp, n_q) else.
        """
        coeffs = self.by_element()
        vals = np.einsum("ecl,lq->ecq", coeffs, self.space.tab.phi)
        return vals[:, 0, :] if self.space.n_components == 1 else vals

    def grad_at_volume_quad(self):
        """Physical gradients at volume quadrature points.

        Returns (n_elem, dim, n_q) for scalars, (n_elem, n_comp, dim, n_q) else.
        """
        sp = self.space
        coeffs = self.by_element()
        grads = np.einsum("ecl,alq->ecaq", coeffs, sp.tab.dphi)
        grads *= sp.grad_scale[None, None, :, None]
        return grads[:, 0, :, :] if sp.n_components == 1 else grads

    def trace(self, elems, axis, side, component=None):
        """Traces at face quadrature points of the (axis, side) face.

        Returns (n_faces, n_qf) if the space is scalar or a component is
        given, otherwise (n_faces, n_comp, n_qf).
        """
        sp = self.space
        coeffs = self.by_element()[elems]
        vals = np.einsum("ecl,lq->ecq", coeffs, sp.tab.phi_face[axis, side])
        if sp.n_components == 1:
            return vals[:, 0, :]
        if component is not None:
            return vals[:, component, :]
        return vals

    def normal_deriv_trace(self, elems, axis, side):
        """d(field)/dx_axis traces at face quad points (same shapes as trace)."""
        sp = self.space
        coeffs = self.by_element()[elems]
        vals = np.einsum("ecl,lq->ecq", coeffs, sp.tab.dphi_face[axis, side][axis])
        vals = vals * sp.grad_scale[axis]
        return vals[:, 0, :] if sp.n_components == 1 else vals


def evaluate(field, element, ref_point):
    """Evaluate a field inside one element at a reference-cell point."""
    sp = field.space
    n_elem = sp.mesh.n_elements
    if not 0 <= element < n_elem:
        raise IndexError(f"element index {element} out of range [0, {n_elem})")
    pt = np.atleast_2d(np.asarray(ref_point, dtype=float))
    phi, _ = sp.tab._tabulate(pt)
    coeffs = field.by_element()[element]
    out = coeffs @ phi[:, 0]
    return float(out[0]) if sp.n_components == 1 else out


def _eval_callable(f, pts, n_components):
    """Evaluate a user callable at points of shape (..., dim)."""
    flat = pts.reshape(-1, pts.shape[-1])
    vals = np.asarray(f(flat), dtype=float)
    if n_components == 1:
        return vals.reshape(pts.shape[:-1])
    return vals.reshape(pts.shape[:-1] + (n_components,))


def l2_project(space, f):
    """L2 projection of a callable onto the space.

    ``f`` maps an (n, dim) array of points to (n,) values (or (n, n_comp)
    for vector spaces).
    """
    pts = space.quad_points_phys()
    vals = _eval_callable(f, pts, space.n_components)
    if space.n_components == 1:
        vals = vals[:, None, :] if vals.ndim == 2 else vals
        vals = vals.reshape(space.mesh.n_elements, 1, -1)
    else:
        vals = np.moveaxis(vals, -1, 1)  # (n_elem, n_comp, n_q)
    w = space.tab.volume.weights
    rhs = np.einsum("q,lq,ecq->ecl", w, space.tab.phi, vals) * space.det_j
    m_loc = local_mass_matrix(space)
    coeffs = np.linalg.solve(m_loc, rhs.reshape(-1, space.n_loc).T).T
    return FieldCoeffs(space, coeffs.reshape(-1))


def local_mass_matrix(space):
    """Element mass matrix (n_loc, n_loc); diagonal for the modal basis."""
    w = space.tab.volume.weights
    m = np.einsum("q,iq,jq->ij", w, space.tab.phi, space.tab.phi) * space.det_j
    if abs(np.linalg.det(m)) < 1e-300:
        raise RuntimeError("singular local mass matrix")
    return m


def interpolate_constant(space, value):
    """Discrete field equal to a constant (or per-element constants).

    ``value`` may be a scalar or an array of length n_elements (scalar
    spaces only).
    """
    const_mode = space.tab.phi[0, 0]  # basis 0 is constant on the cell
    coeffs = np.zeros((space.mesh.n_elements, space.n_components, space.n_loc))
    coeffs[:, :, 0] = np.asarray(value, dtype=float).reshape(-1, 1) / const_mode
    return FieldCoeffs(space, coeffs.reshape(-1))


def mean_weight_vector(space):
    """Vector w with w . coeffs = integral of the field over the domain."""
    w = space.tab.volume.weights
    per_loc = (space.tab.phi @ w) * space.det_j  # (n_loc,)
    out = np.zeros((space.mesh.n_elements, space.n_components, space.n_loc))
    out[:, :, :] = per_loc
    return out.reshape(-1)


def elliptic_project(space, f, grad_f, adiff, solver=None):
    """Projection orthogonal in the SIPG energy form, with a mean constraint.

    Satisfies a(P f - f, chi) = 0 for all discrete chi and (P f - f, 1) = 0,
    where ``adiff`` is the assembled SIPG matrix on ``space``.  ``grad_f``
    maps (n, dim) points to (n, dim) gradients.
    """
    from . import linalg

    mesh = space.mesh
    pts = space.quad_points_phys()
    w = space.tab.volume.weights

    # rhs(chi) = sum_E (grad f, grad chi) - sum_interior ({grad f . n}, [chi])
    gvals = _eval_callable(grad_f, pts, mesh.dim)  # (n_elem, n_q, dim)
    gvals = np.moveaxis(gvals, -1, 1)              # (n_elem, dim, n_q)
    dphi_phys = space.tab.dphi * space.grad_scale[:, None, None]
    rhs = np.einsum("q,eaq,alq->el", w, gvals, dphi_phys) * space.det_j

    faces = mesh.interior_faces
    wf = space.tab.face.weights
    for a in range(mesh.dim):
        sel = faces.axis == a
        if not np.any(sel):
            continue
        left = faces.left[sel]
        right = faces.right[sel]
        fpts = space.face_points_phys(left, a, +1)
        gf = _eval_callable(grad_f, fpts, mesh.dim)[..., a]  # (n_f, n_qf)
        jac = space.face_det_j[a]
        # [chi] = chi_left - chi_right
        tl = space.tab.phi_face[a, +1]
        tr = space.tab.phi_face[a, -1]
        contrib_l = np.einsum("q,fq,lq->fl", wf, gf, tl) * jac
        contrib_r = np.einsum("q,fq,lq->fl", wf, gf, tr) * jac
        np.subtract.at(rhs, left, contrib_l)
        np.add.at(rhs, right, contrib_r)

    rhs = rhs.reshape(-1)
    fvals = _eval_callable(f, pts, 1)
    integral_f = float(np.einsum("q,eq->", w, fvals) * space.det_j)
    weight = mean_weight_vector(space)
    if solver is not None:
        x = solver(rhs, integral_f)
    else:
        spec = linalg.LinearSolveSpec(mean_constraint=(weight, integral_f))
        x = linalg.solve(adiff, rhs, spec)
    return FieldCoeffs(space, x)

"""Assembly of the interior-penalty dG forms.

Conventions (matching the mesh orientation contract): on an interior face
shared by elements L (lower index) and R, the face normal is +e_axis and
points from L into R, the jump is [w] = w_L - w_R and the average is
{w} = (w_L + w_R)/2.  On boundary faces jump and average coincide with the
interior trace.  All penalty terms scale with sigma / h using the global
mesh size h (maximum element diagonal).
"""

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

from .space import DgSpace, FieldCoeffs, local_mass_matrix, ref_tabulation

UPWIND_TOL = 1e-14  # inflow set: {w}.n_E < -UPWIND_TOL


@dataclass
class PenaltyConfig:
    """Penalty parameters of the scheme, all >= 1.

    sigma_tilde_ch   : scalar SIPG form on the degree-k phase-field space
    sigma_tilde_ellip: scalar SIPG form on the degree-(k-1) pressure space
    sigma_int        : vector SIPG form, interior faces
    sigma_bdy        : vector SIPG form, boundary faces
    """

    sigma_tilde_ch: float = 2.0
    sigma_tilde_ellip: float = 4.0
    sigma_int: float = 8.0
    sigma_bdy: float = 16.0

    def __post_init__(self):
        for name in ("sigma_tilde_ch", "sigma_tilde_ellip", "sigma_int", "sigma_bdy"):
            if getattr(self, name) < 1.0:
                raise ValueError(f"penalty {name} must be >= 1")


def recommended_penalties(degree):
    """Penalty values certified coercive and projection-stable on box meshes.

    With the global-diagonal h in the penalty terms, the sharp coercivity
    threshold of the scalar SIPG form sits in (1, 2] for degree 1, (4, 5]
    for degree 2 and (8, 10] for degree 3 (measured spectrally on refined
    meshes), and the pressure-correction stability requires the degree-(k-1)
    penalty to dominate the sampled lift constant.  These choices keep a
    safety margin above both limits.
    """
    table = {
        1: PenaltyConfig(2.0, 4.0, 8.0, 16.0),
        2: PenaltyConfig(6.0, 8.0, 64.0, 128.0),
        3: PenaltyConfig(12.0, 12.0, 128.0, 256.0),
    }
    if degree not in table:
        return PenaltyConfig(4.0 * degree ** 2, 4.0 * degree ** 2,
                             16.0 * degree ** 2, 32.0 * degree ** 2)
    return table[degree]


class Triplets:
    def __init__(self, shape):
        self.shape = shape
        self._rows = []
        self._cols = []
        self._vals = []

    def add(self, rows, cols, vals):
        rows, cols, vals = np.broadcast_arrays(rows, cols, vals)
        self._rows.append(rows.ravel())
        self._cols.append(cols.ravel())
        self._vals.append(vals.ravel())

    def tocsr(self):
        if not self._rows:
            return sp.csr_matrix(self.shape)
        rows = np.concatenate(self._rows)
        cols = np.concatenate(self._cols)
        vals = np.concatenate(self._vals)
        return sp.coo_matrix((vals, (rows, cols)), shape=self.shape).tocsr()


def _dofs(space, elems, comp=0):
    """Dof indices (n_elems, n_loc) for one component."""
    base = (np.asarray(elems) * space.n_components + comp) * space.n_loc
    return base[:, None] + np.arange(space.n_loc)[None, :]


def _add_face_block(tri, row_dofs, col_dofs, block):
    """Scatter per-face blocks: block (n_f, n_loc, n_loc) or (n_loc, n_loc)."""
    rows = row_dofs[:, :, None]
    cols = col_dofs[:, None, :]
    tri.add(np.broadcast_to(rows, block.shape) if block.ndim == 3 else rows,
            np.broadcast_to(cols, block.shape) if block.ndim == 3 else cols,
            block)


def _interior_by_axis(mesh):
    faces = mesh.interior_faces
    for a in range(mesh.dim):
        sel = np.flatnonzero(faces.axis == a)
        if sel.size:
            yield a, faces.left[sel], faces.right[sel]


def _boundary_by_axis(mesh):
    faces = mesh.boundary_faces
    for a in range(mesh.dim):
        for side in (0, 1):
            sel = np.flatnonzero((faces.axis == a) & (faces.side == side))
            if sel.size:
                yield a, side, faces.elem[sel]


# ---------------------------------------------------------------------------
# mass matrices and simple loads


def assemble_mass(space):
    """Global mass matrix (block diagonal; diagonal for the modal basis)."""
    tri = Triplets((space.total_dofs, space.total_dofs))
    m_loc = local_mass_matrix(space)
    elems = np.arange(space.mesh.n_elements)
    for comp in range(space.n_components):
        dofs = _dofs(space, elems, comp)
        _add_face_block(tri, dofs, dofs, np.broadcast_to(m_loc, (elems.size,) + m_loc.shape))
    return tri.tocsr()


def mass_solve(space, rhs):
    """Apply the inverse mass matrix to a load vector (element-local solves)."""
    m_loc = local_mass_matrix(space)
    flat = rhs.reshape(-1, space.n_loc)
    return np.linalg.solve(m_loc, flat.T).T.reshape(rhs.shape)


def assemble_weighted_mass(space, weight_at_quad):
    """Mass matrix weighted by a function given at volume quadrature points.

    ``weight_at_quad`` has shape (n_elements, n_q); the same scalar weight is
    applied to every component.
    """
    tri = Triplets((space.total_dofs, space.total_dofs))
    w = space.tab.volume.weights
    blocks = np.einsum("q,eq,iq,jq->eij", w, weight_at_quad,
                       space.tab.phi, space.tab.phi) * space.det_j
    elems = np.arange(space.mesh.n_elements)
    for comp in range(space.n_components):
        dofs = _dofs(space, elems, comp)
        _add_face_block(tri, dofs, dofs, blocks)
    return tri.tocsr()


def volume_load(space, values_at_quad):
    """Load vector l_i = (f, phi_i) from values at volume quadrature points.

    ``values_at_quad``: (n_elem, n_q) for scalar spaces, (n_elem, n_comp, n_q)
    for vector spaces.
    """
    w = space.tab.volume.weights
    if space.n_components == 1:
        vals = values_at_quad[:, None, :]
    else:
        vals = values_at_quad
    load = np.einsum("q,ecq,lq->ecl", w, vals, space.tab.phi) * space.det_j
    return load.reshape(-1)


def boundary_load(space, data):
    """Load vector l_i = sum_bdy (g, phi_i)_e from boundary-face data.

    ``data`` maps (points (n, dim), normals (n, dim)) -> (n,) values for
    scalar spaces or (n, n_comp) for vector spaces.
    """
    load = np.zeros((space.mesh.n_elements, space.n_components, space.n_loc))
    wf = space.tab.face.weights
    for a, side, elems in _boundary_by_axis(space.mesh):
        sref = -1 if side == 0 else +1
        pts = space.face_points_phys(elems, a, sref)
        normals = np.zeros_like(pts)
        normals[:, :, a] = -1.0 if side == 0 else 1.0
        flat_pts = pts.reshape(-1, space.mesh.dim)
        flat_nrm = normals.reshape(-1, space.mesh.dim)
        gv = np.asarray(data(flat_pts, flat_nrm), dtype=float)
        jac = space.face_det_j[a]
        t = space.tab.phi_face[a, sref]
        if space.n_components == 1:
            gv = gv.reshape(elems.size, 1, wf.size)
        else:
            gv = np.moveaxis(gv.reshape(elems.size, wf.size, -1), -1, 1)
        contrib = np.einsum("q,ecq,lq->ecl", wf, gv, t) * jac
        np.add.at(load, elems, contrib)
    return load.reshape(-1)


def mean_vector(space):
    """w with w . coeffs = (field, 1); same as space.mean_weight_vector."""
    from .space import mean_weight_vector
    return mean_weight_vector(space)


# ---------------------------------------------------------------------------
# SIPG stiffness (scalar pattern, expanded per component)


def _sipg_volume_block(space):
    tab = space.tab
    gs = space.grad_scale
    w = tab.volume.weights
    block = np.zeros((space.n_loc, space.n_loc))
    for a in range(space.mesh.dim):
        block += gs[a] ** 2 * np.einsum("q,iq,jq->ij", w, tab.dphi[a], tab.dphi[a])
    return block * space.det_j


def _face_traces(space, axis):
    """Traces and normal-derivative traces of the local basis on both sides."""
    tab = space.tab
    gs = space.grad_scale[axis]
    t_minus = tab.phi_face[axis, +1]   # left element, its upper face
    t_plus = tab.phi_face[axis, -1]    # right element, its lower face
    g_minus = tab.dphi_face[axis, +1][axis] * gs
    g_plus = tab.dphi_face[axis, -1][axis] * gs
    return t_minus, t_plus, g_minus, g_plus


def _sipg_interior_blocks(space, axis, penalty_over_h, with_consistency=True):
    """The four coupling blocks of one interior face, keyed (row_side, col_side)."""
    wf = space.tab.face.weights * space.face_det_j[axis]
    t_m, t_p, g_m, g_p = _face_traces(space, axis)
    sides = {+1: (t_m, g_m, 1.0), -1: (t_p, g_p, -1.0)}
    blocks = {}
    for s_row, (t_r, g_r, sgn_r) in sides.items():
        for s_col, (t_c, g_c, sgn_c) in sides.items():
            b = penalty_over_h * sgn_r * sgn_c * np.einsum("q,iq,jq->ij", wf, t_r, t_c)
            if with_consistency:
                b -= 0.5 * sgn_r * np.einsum("q,iq,jq->ij", wf, t_r, g_c)
                b -= 0.5 * sgn_c * np.einsum("q,iq,jq->ij", wf, g_r, t_c)
            blocks[s_row, s_col] = b
    return blocks


def _sipg_boundary_block(space, axis, side, penalty_over_h, with_consistency=True):
    wf = space.tab.face.weights * space.face_det_j[axis]
    sref = -1 if side == 0 else +1
    t = space.tab.phi_face[axis, sref]
    g = space.tab.dphi_face[axis, sref][axis] * space.grad_scale[axis] * float(sref)
    b = penalty_over_h * np.einsum("q,iq,jq->ij", wf, t, t)
    if with_consistency:
        b -= np.einsum("q,iq,jq->ij", wf, t, g)
        b -= np.einsum("q,iq,jq->ij", wf, g, t)
    return b


def _assemble_sipg(space, penalty_int, penalty_bdy=None, include_boundary=False,
                   volume=True, consistency=True, penalty=True):
    mesh = space.mesh
    h = mesh.h
    tri = Triplets((space.total_dofs, space.total_dofs))
    comps = range(space.n_components)

    if volume:
        vol = _sipg_volume_block(space)
        elems = np.arange(mesh.n_elements)
        for comp in comps:
            dofs = _dofs(space, elems, comp)
            _add_face_block(tri, dofs, dofs, np.broadcast_to(vol, (elems.size,) + vol.shape))

    pen_i = (penalty_int / h) if penalty else 0.0
    for a, left, right in _interior_by_axis(mesh):
        blocks = _sipg_interior_blocks(space, a, pen_i, with_consistency=consistency)
        for comp in comps:
            dl = _dofs(space, left, comp)
            dr = _dofs(space, right, comp)
            _add_face_block(tri, dl, dl, np.broadcast_to(blocks[1, 1], (left.size,) + blocks[1, 1].shape))
            _add_face_block(tri, dl, dr, np.broadcast_to(blocks[1, -1], (left.size,) + blocks[1, -1].shape))
            _add_face_block(tri, dr, dl, np.broadcast_to(blocks[-1, 1], (left.size,) + blocks[-1, 1].shape))
            _add_face_block(tri, dr, dr, np.broadcast_to(blocks[-1, -1], (left.size,) + blocks[-1, -1].shape))

    if include_boundary:
        pen_b = ((penalty_bdy if penalty_bdy is not None else penalty_int) / h) if penalty else 0.0
        for a, side, elems in _boundary_by_axis(mesh):
            block = _sipg_boundary_block(space, a, side, pen_b, with_consistency=consistency)
            for comp in comps:
                dofs = _dofs(space, elems, comp)
                _add_face_block(tri, dofs, dofs, np.broadcast_to(block, (elems.size,) + block.shape))

    return tri.tocsr()


def assemble_a_diff(space, penalty):
    """Scalar SIPG stiffness, interior faces only (Neumann consistent)."""
    if space.n_components != 1:
        raise ValueError("a_diff acts on scalar spaces")
    if penalty < 1.0:
        raise ValueError("penalty must be >= 1")
    return _assemble_sipg(space, penalty)


def assemble_a_D(space, sigma_int, sigma_bdy):
    """Vector SIPG stiffness with weakly imposed zero boundary trace."""
    if sigma_int < 1.0 or sigma_bdy < 1.0:
        raise ValueError("penalties must be >= 1")
    return _assemble_sipg(space, sigma_int, sigma_bdy, include_boundary=True)


def assemble_broken_gradient(space):
    """Matrix of sum_E (grad u, grad v)_E (no face terms)."""
    return _assemble_sipg(space, 0.0, include_boundary=False,
                          consistency=False, penalty=False)


def assemble_jump_penalty(space, penalty_int, penalty_bdy=None,
                          include_boundary=False):
    """Matrix of sum_faces (sigma/h) ([u], [v])_e (no volume/consistency terms)."""
    return _assemble_sipg(space, penalty_int, penalty_bdy,
                          include_boundary=include_boundary,
                          volume=False, consistency=False)


def dirichlet_rhs_a_D(space, g, sigma_bdy):
    """Nitsche right-hand side of a_D for boundary datum g.

    ``g`` maps points (n, dim) to vector values (n, dim).  For g = 0 the
    result is the zero vector.
    """
    mesh = space.mesh
    h = mesh.h
    wf = space.tab.face.weights
    load = np.zeros((mesh.n_elements, space.n_components, space.n_loc))
    for a, side, elems in _boundary_by_axis(mesh):
        sref = -1 if side == 0 else +1
        pts = space.face_points_phys(elems, a, sref)
        gv = np.asarray(g(pts.reshape(-1, mesh.dim)), dtype=float)
        gv = np.moveaxis(gv.reshape(elems.size, wf.size, -1), -1, 1)  # (n_f, comp, q)
        t = space.tab.phi_face[a, sref]
        gn = space.tab.dphi_face[a, sref][a] * space.grad_scale[a] * float(sref)
        jac = space.face_det_j[a]
        contrib = (sigma_bdy / h) * np.einsum("q,ecq,lq->ecl", wf, gv, t) * jac
        contrib -= np.einsum("q,ecq,lq->ecl", wf, gv, gn) * jac
        np.add.at(load, elems, contrib)
    return load.reshape(-1)


# ---------------------------------------------------------------------------
# pressure coupling b_P and lift operators


def _cross_tab(space, degree):
    """Tabulation of a degree-``degree`` basis at ``space``'s quad points."""
    return ref_tabulation(space.mesh.dim, degree, space.tab.n_1d)


def assemble_divergence(vec_space, p_space):
    """Matrix of sum_E (div theta, q)_E with rows = q dofs, cols = theta dofs."""
    mesh = vec_space.mesh
    ptab = _cross_tab(vec_space, p_space.degree)
    tri = Triplets((p_space.total_dofs, vec_space.total_dofs))
    w = vec_space.tab.volume.weights
    elems = np.arange(mesh.n_elements)
    rows = _dofs(p_space, elems)
    for c in range(mesh.dim):
        block = vec_space.grad_scale[c] * np.einsum(
            "q,iq,jq->ij", w, ptab.phi, vec_space.tab.dphi[c]) * vec_space.det_j
        cols = _dofs(vec_space, elems, c)
        _add_face_block(tri, rows, cols, np.broadcast_to(block, (elems.size,) + block.shape))
    return tri.tocsr()


def assemble_lift_r_form(vec_space, p_space):
    """Matrix of sum_{interior+boundary} ({q}, [theta . n])_e.

    Rows = q dofs, cols = theta dofs; this is the face part of b_P and the
    right-hand side of the R lift definition.
    """
    mesh = vec_space.mesh
    ptab = _cross_tab(vec_space, p_space.degree)
    tri = Triplets((p_space.total_dofs, vec_space.total_dofs))
    wf = vec_space.tab.face.weights
    for a, left, right in _interior_by_axis(mesh):
        jac = vec_space.face_det_j[a]
        tq_m, tq_p = ptab.phi_face[a, +1], ptab.phi_face[a, -1]
        tv_m, tv_p = vec_space.tab.phi_face[a, +1], vec_space.tab.phi_face[a, -1]
        for (tq, rows_e, sq) in ((tq_m, left, 1.0), (tq_p, right, 1.0)):
            for (tv, cols_e, sv) in ((tv_m, left, 1.0), (tv_p, right, -1.0)):
                block = 0.5 * sv * np.einsum("q,iq,jq->ij", wf, tq, tv) * jac
                _add_face_block(tri, _dofs(p_space, rows_e),
                                _dofs(vec_space, cols_e, a),
                                np.broadcast_to(block, (rows_e.size,) + block.shape))
    for a, side, elems in _boundary_by_axis(mesh):
        sref = -1 if side == 0 else +1
        jac = vec_space.face_det_j[a]
        tq = ptab.phi_face[a, sref]
        tv = vec_space.tab.phi_face[a, sref]
        block = float(sref) * np.einsum("q,iq,jq->ij", wf, tq, tv) * jac
        _add_face_block(tri, _dofs(p_space, elems), _dofs(vec_space, elems, a),
                        np.broadcast_to(block, (elems.size,) + block.shape))
    return tri.tocsr()


def assemble_lift_g_form(vec_space, p_space):
    """Matrix of sum_{interior} ({theta . n}, [q])_e.

    Rows = theta dofs, cols = q dofs; right-hand side of the G lift.
    """
    mesh = vec_space.mesh
    ptab = _cross_tab(vec_space, p_space.degree)
    tri = Triplets((vec_space.total_dofs, p_space.total_dofs))
    wf = vec_space.tab.face.weights
    for a, left, right in _interior_by_axis(mesh):
        jac = vec_space.face_det_j[a]
        tq_m, tq_p = ptab.phi_face[a, +1], ptab.phi_face[a, -1]
        tv_m, tv_p = vec_space.tab.phi_face[a, +1], vec_space.tab.phi_face[a, -1]
        for (tv, rows_e) in ((tv_m, left), (tv_p, right)):
            for (tq, cols_e, sq) in ((tq_m, left, 1.0), (tq_p, right, -1.0)):
                block = 0.5 * sq * np.einsum("q,iq,jq->ij", wf, tv, tq) * jac
                _add_face_block(tri, _dofs(vec_space, rows_e, a),
                                _dofs(p_space, cols_e),
                                np.broadcast_to(block, (rows_e.size,) + block.shape))
    return tri.tocsr()


def assemble_b_P(vec_space, p_space):
    """b_P via divergence and face averages: rows = q dofs, cols = theta dofs."""
    return (assemble_divergence(vec_space, p_space)
            - assemble_lift_r_form(vec_space, p_space)).tocsr()


def assemble_b_P_ibp(vec_space, p_space):
    """b_P in integrated-by-parts form (gradient of q plus interior jumps)."""
    mesh = vec_space.mesh
    ptab = _cross_tab(vec_space, p_space.degree)
    tri = Triplets((p_space.total_dofs, vec_space.total_dofs))
    w = vec_space.tab.volume.weights
    elems = np.arange(mesh.n_elements)
    rows = _dofs(p_space, elems)
    for c in range(mesh.dim):
        block = -vec_space.grad_scale[c] * np.einsum(
            "q,iq,jq->ij", w, ptab.dphi[c], vec_space.tab.phi) * vec_space.det_j
        _add_face_block(tri, rows, _dofs(vec_space, elems, c),
                        np.broadcast_to(block, (elems.size,) + block.shape))
    lift_g = assemble_lift_g_form(vec_space, p_space)
    return (tri.tocsr() + lift_g.T).tocsr()


def lift_operator_matrices(vec_space, p_space):
    """Explicit lift operators (R_h, G_h) as sparse coefficient maps.

    R_h maps theta coefficients to M_h^{k-1} coefficients, G_h maps q
    coefficients to vector-space coefficients.
    """
    f_r = assemble_lift_r_form(vec_space, p_space)
    f_g = assemble_lift_g_form(vec_space, p_space)
    minv_p = _block_diag_inverse_mass(p_space)
    minv_v = _block_diag_inverse_mass(vec_space)
    return (minv_p @ f_r).tocsr(), (minv_v @ f_g).tocsr()


def _block_diag_inverse_mass(space):
    m_inv = np.linalg.inv(local_mass_matrix(space))
    n_blocks = space.mesh.n_elements * space.n_components
    return sp.block_diag([m_inv] * n_blocks, format="csr")


# ---------------------------------------------------------------------------
# advection forms


def a_adv_load(c, v):
    """Load vector chi -> a_adv(c, v, chi) over the scalar space of c."""
    space = c.space
    vspace = v.space
    mesh = space.mesh
    w = space.tab.volume.weights
    cvals = c.at_volume_quad()                       # (n_elem, n_q)
    vtab = _cross_tab(space, vspace.degree)
    vcoef = v.by_element()
    vvals = np.einsum("ecl,lq->ecq", vcoef, vtab.phi)  # (n_elem, dim, n_q)
    load = np.zeros((mesh.n_elements, 1, space.n_loc))
    for a in range(mesh.dim):
        load[:, 0, :] -= space.grad_scale[a] * np.einsum(
            "q,eq,eq,lq->el", w, cvals, vvals[:, a, :], space.tab.dphi[a]) * space.det_j
    wf = space.tab.face.weights
    for a, left, right in _interior_by_axis(mesh):
        jac = space.face_det_j[a]
        cbar = 0.5 * (c.trace(left, a, +1) + c.trace(right, a, -1))
        v_l = np.einsum("el,lq->eq", vcoef[left][:, a, :], vtab.phi_face[a, +1])
        v_r = np.einsum("el,lq->eq", vcoef[right][:, a, :], vtab.phi_face[a, -1])
        vbar = 0.5 * (v_l + v_r)
        weight = wf[None, :] * cbar * vbar * jac
        t_m = space.tab.phi_face[a, +1]
        t_p = space.tab.phi_face[a, -1]
        np.add.at(load[:, 0, :], left, np.einsum("fq,lq->fl", weight, t_m))
        np.subtract.at(load[:, 0, :], right, np.einsum("fq,lq->fl", weight, t_p))
    return load.reshape(-1)


def a_adv(c, v, chi):
    """Trilinear advection form a_adv(c, v, chi) for discrete fields."""
    return float(a_adv_load(c, v) @ chi.values)


def b_I(c, mu, theta):
    """Interface coupling b_I(c, mu, theta) = a_adv(c, theta, mu)."""
    return a_adv(c, theta, mu)


def b_I_load(c, mu, vec_space):
    """Load vector theta -> b_I(c, mu, theta) over the velocity space."""
    mesh = vec_space.mesh
    w = vec_space.tab.volume.weights
    stab = _cross_tab(vec_space, c.space.degree)
    ccoef = c.by_element()[:, 0, :]
    mcoef = mu.by_element()[:, 0, :]
    cvals = np.einsum("el,lq->eq", ccoef, stab.phi)
    load = np.zeros((mesh.n_elements, mesh.dim, vec_space.n_loc))
    for a in range(mesh.dim):
        dmu = np.einsum("el,lq->eq", mcoef, stab.dphi[a]) * vec_space.grad_scale[a]
        load[:, a, :] -= np.einsum("q,eq,eq,lq->el", w, cvals, dmu,
                                   vec_space.tab.phi) * vec_space.det_j
    wf = vec_space.tab.face.weights
    for a, left, right in _interior_by_axis(mesh):
        jac = vec_space.face_det_j[a]
        c_l = np.einsum("el,lq->eq", ccoef[left], stab.phi_face[a, +1])
        c_r = np.einsum("el,lq->eq", ccoef[right], stab.phi_face[a, -1])
        mu_l = np.einsum("el,lq->eq", mcoef[left], stab.phi_face[a, +1])
        mu_r = np.einsum("el,lq->eq", mcoef[right], stab.phi_face[a, -1])
        weight = wf[None, :] * 0.5 * (c_l + c_r) * (mu_l - mu_r) * jac
        t_m = vec_space.tab.phi_face[a, +1]
        t_p = vec_space.tab.phi_face[a, -1]
        np.add.at(load[:, a, :], left, 0.5 * np.einsum("fq,lq->fl", weight, t_m))
        np.add.at(load[:, a, :], right, 0.5 * np.einsum("fq,lq->fl", weight, t_p))
    return load.reshape(-1)


# ---------------------------------------------------------------------------
# upwind convection a_C


def _scalar_dofs(n_loc, elems):
    return np.asarray(elems)[:, None] * n_loc + np.arange(n_loc)[None, :]


def assemble_a_C_scalar(w_field, v_field, g=None):
    """Scalar-pattern matrix of the upwind convection form plus boundary load.

    The form acts identically on every velocity component, so its matrix is
    block diagonal with one shared scalar block; this assembles that block
    (over n_elements * n_loc dofs).  The returned load vector lives on the
    full vector space and carries the inflow contribution of the exterior
    Dirichlet trace ``g`` (zero when g is None).
    """
    space = w_field.space
    mesh = space.mesh
    dim = mesh.dim
    n_loc = space.n_loc
    n_scalar = mesh.n_elements * n_loc
    tri = Triplets((n_scalar, n_scalar))
    rhs = np.zeros((mesh.n_elements, dim, n_loc))
    w = space.tab.volume.weights
    phi = space.tab.phi
    dphi = space.tab.dphi

    vvals = v_field.at_volume_quad()       # (n_elem, dim, n_q)
    grads = v_field.grad_at_volume_quad()  # (n_elem, comp, dim, n_q)
    div_v = np.einsum("eaaq->eq", grads)

    # volume: (v . grad z) . theta  +  1/2 (div v) z . theta
    blocks = 0.5 * np.einsum("q,eq,jq,iq->eij", w, div_v, phi, phi) * space.det_j
    for a in range(dim):
        blocks += space.grad_scale[a] * np.einsum(
            "q,eq,jq,iq->eij", w, vvals[:, a, :], dphi[a], phi) * space.det_j
    elems = np.arange(mesh.n_elements)
    dofs = _scalar_dofs(n_loc, elems)
    _add_face_block(tri, dofs, dofs, blocks)

    wf = space.tab.face.weights
    for a, left, right in _interior_by_axis(mesh):
        jac = space.face_det_j[a]
        t_m = space.tab.phi_face[a, +1]
        t_p = space.tab.phi_face[a, -1]
        w_l = w_field.trace(left, a, +1, component=a)
        w_r = w_field.trace(right, a, -1, component=a)
        v_l = v_field.trace(left, a, +1, component=a)
        v_r = v_field.trace(right, a, -1, component=a)
        wbar = 0.5 * (w_l + w_r)
        vbar = 0.5 * (v_l + v_r)
        jump_v = v_l - v_r

        # upwind term on the left element side (n_E = +e_a) and right side
        mask_l = (wbar < -UPWIND_TOL).astype(float)
        wgt_l = wf[None, :] * np.abs(vbar) * mask_l * jac
        bll = np.einsum("fq,iq,jq->fij", wgt_l, t_m, t_m)
        blr = -np.einsum("fq,iq,jq->fij", wgt_l, t_m, t_p)
        mask_r = (wbar > UPWIND_TOL).astype(float)
        wgt_r = wf[None, :] * np.abs(vbar) * mask_r * jac
        brr = np.einsum("fq,iq,jq->fij", wgt_r, t_p, t_p)
        brl = -np.einsum("fq,iq,jq->fij", wgt_r, t_p, t_m)
        # -1/2 [v . n] {z . theta}
        wgt_j = -0.25 * wf[None, :] * jump_v * jac
        bll += np.einsum("fq,iq,jq->fij", wgt_j, t_m, t_m)
        brr += np.einsum("fq,iq,jq->fij", wgt_j, t_p, t_p)
        dl = _scalar_dofs(n_loc, left)
        dr = _scalar_dofs(n_loc, right)
        _add_face_block(tri, dl, dl, bll)
        _add_face_block(tri, dl, dr, blr)
        _add_face_block(tri, dr, dr, brr)
        _add_face_block(tri, dr, dl, brl)

    for a, side, elems_b in _boundary_by_axis(mesh):
        sref = -1 if side == 0 else +1
        sgn = float(sref)
        jac = space.face_det_j[a]
        t = space.tab.phi_face[a, sref]
        w_n = sgn * w_field.trace(elems_b, a, sref, component=a)
        v_n = sgn * v_field.trace(elems_b, a, sref, component=a)
        mask = (w_n < -UPWIND_TOL).astype(float)
        wgt_up = wf[None, :] * np.abs(v_n) * mask * jac
        wgt_jmp = -0.5 * wf[None, :] * v_n * jac
        block = np.einsum("fq,iq,jq->fij", wgt_up + wgt_jmp, t, t)
        dofs = _scalar_dofs(n_loc, elems_b)
        _add_face_block(tri, dofs, dofs, block)
        if g is not None:
            pts = space.face_points_phys(elems_b, a, sref)
            gv = np.asarray(g(pts.reshape(-1, dim)), dtype=float)
            gv = np.moveaxis(gv.reshape(elems_b.size, wf.size, dim), -1, 1)
            contrib = np.einsum("fq,fcq,lq->fcl", wgt_up, gv, t)
            np.add.at(rhs, elems_b, contrib)

    return tri.tocsr(), rhs.reshape(-1)


def expand_scalar_pattern(scalar_mat, space):
    """Expand a shared per-component scalar block to the vector dof layout."""
    coo = scalar_mat.tocoo()
    n_loc = space.n_loc
    ncomp = space.n_components
    e_r, l_r = coo.row // n_loc, coo.row % n_loc
    e_c, l_c = coo.col // n_loc, coo.col % n_loc
    rows, cols, vals = [], [], []
    for comp in range(ncomp):
        rows.append((e_r * ncomp + comp) * n_loc + l_r)
        cols.append((e_c * ncomp + comp) * n_loc + l_c)
        vals.append(coo.data)
    return sp.coo_matrix((np.concatenate(vals),
                          (np.concatenate(rows), np.concatenate(cols))),
                         shape=(space.total_dofs, space.total_dofs)).tocsr()


def assemble_a_C(w_field, v_field, g=None):
    """Matrix and boundary load of the upwind convection form.

    Realizes z, theta -> a_C(w, v, z, theta) for fixed advecting fields: the
    volume convection term, the inflow upwind penalty weighted by |{v}.n|,
    the div(v)/2 stabilization and the normal-jump face term.  The inflow
    part of each element boundary is classified pointwise at quadrature
    points by {w}.n_E < -UPWIND_TOL.  ``g`` (optional) is the exterior
    Dirichlet trace on boundary faces; its inflow contribution is returned
    as a right-hand-side load vector.
    """
    scalar_mat, rhs = assemble_a_C_scalar(w_field, v_field, g)
    return expand_scalar_pattern(scalar_mat, w_field.space), rhs


# ---------------------------------------------------------------------------
# bundled constant matrices of the scheme


@dataclass
class AssembledForms:
    """All constant matrices the time stepper needs."""

    mass_k: sp.csr_matrix
    mass_vec: sp.csr_matrix
    mass_km1: sp.csr_matrix
    a_diff_k: sp.csr_matrix
    a_diff_km1: sp.csr_matrix
    a_d: sp.csr_matrix
    b_p: sp.csr_matrix
    lift_r_form: sp.csr_matrix
    lift_g_form: sp.csr_matrix
    grad_k: sp.csr_matrix       # broken gradient part of a_diff_k
    pen_k: sp.csr_matrix        # jump penalty part of a_diff_k
    grad_km1: sp.csr_matrix
    pen_km1: sp.csr_matrix
    grad_vec: sp.csr_matrix
    pen_vec: sp.csr_matrix      # interior + boundary jumps, sigma_int/sigma_bdy


def assemble_forms(scalar_k, vec_k, scalar_km1, penalties):
    """Assemble every constant matrix of the scheme on the given spaces."""
    p = penalties
    return AssembledForms(
        mass_k=assemble_mass(scalar_k),
        mass_vec=assemble_mass(vec_k),
        mass_km1=assemble_mass(scalar_km1),
        a_diff_k=assemble_a_diff(scalar_k, p.sigma_tilde_ch),
        a_diff_km1=assemble_a_diff(scalar_km1, p.sigma_tilde_ellip),
        a_d=assemble_a_D(vec_k, p.sigma_int, p.sigma_bdy),
        b_p=assemble_b_P(vec_k, scalar_km1),
        lift_r_form=assemble_lift_r_form(vec_k, scalar_km1),
        lift_g_form=assemble_lift_g_form(vec_k, scalar_km1),
        grad_k=assemble_broken_gradient(scalar_k),
        pen_k=assemble_jump_penalty(scalar_k, p.sigma_tilde_ch),
        grad_km1=assemble_broken_gradient(scalar_km1),
        pen_km1=assemble_jump_penalty(scalar_km1, p.sigma_tilde_ellip),
        grad_vec=assemble_broken_gradient(vec_k),
        pen_vec=assemble_jump_penalty(vec_k, p.sigma_int, p.sigma_bdy,
                                      include_boundary=True),
    )

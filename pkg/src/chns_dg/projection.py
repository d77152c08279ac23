"""Stages 2-4 of the time step: intermediate velocity, pressure correction,
and the pressure/velocity updates.

The intermediate-velocity operator couples velocity components only through
identical diagonal blocks (mass, upwind convection and the componentwise
vector SIPG all act per component), so one scalar factorization is shared by
all components.  The Poisson operator for the pressure correction is
constant in time and factorized once with its zero-mean constraint.
"""

from dataclasses import dataclass

import numpy as np

from . import forms, linalg
from .space import FieldCoeffs, mean_weight_vector


@dataclass
class ProjectionReport:
    velocity_residual: float
    poisson_residual: float


class NavierStokesProjection:
    def __init__(self, vec_space, p_space, scalar_space, bundle, mu_s, tau,
                 sigma_chi, sigma_int, sigma_bdy):
        self.vec_space = vec_space
        self.p_space = p_space
        self.scalar_space = scalar_space
        self.forms = bundle
        self.mu_s = mu_s
        self.tau = tau
        self.sigma_chi = sigma_chi
        self.sigma_bdy = sigma_bdy
        # scalar pattern of the velocity operator (per-component blocks agree)
        self._mass_scalar = forms.assemble_mass(scalar_space)
        self._a_d_scalar = forms._assemble_sipg(scalar_space, sigma_int, sigma_bdy,
                                                include_boundary=True)
        self._minv_p = forms._block_diag_inverse_mass(p_space)
        self._minv_v = forms._block_diag_inverse_mass(vec_space)
        weight = mean_weight_vector(p_space)
        self.p_weight = weight
        self._poisson_solve = linalg.factorized(bundle.a_diff_km1, weight)
        # only the convection block drifts step to step, so one factorized
        # operator preconditions the velocity solves of many steps
        self._velocity_solver = linalg.ReusableSolver()

    # -- stage 2: intermediate velocity --------------------------------------

    def velocity_step(self, u_prev, p_prev, c_prev, mu_new, forcing_u=None,
                      g_bdy=None):
        """Solve the convection-diffusion problem for the tentative velocity.

        ``forcing_u`` is an assembled load vector; ``g_bdy`` the Dirichlet
        boundary datum (callable on points) entering through the Nitsche and
        upwind liftings.
        """
        vs = self.vec_space
        conv_scalar, upwind_rhs = forms.assemble_a_C_scalar(u_prev, u_prev, g_bdy)
        op = (self._mass_scalar / self.tau + conv_scalar
              + self.mu_s * self._a_d_scalar).tocsc()
        rhs = self.forms.mass_vec @ u_prev.values / self.tau
        rhs += self.forms.b_p.T @ p_prev.values
        rhs += forms.b_I_load(c_prev, mu_new, vs)
        rhs += upwind_rhs
        if forcing_u is not None:
            rhs += forcing_u
        if g_bdy is not None:
            rhs += self.mu_s * forms.dirichlet_rhs_a_D(vs, g_bdy, self.sigma_bdy)

        rhs_by_comp = vs.dof_array(rhs)
        sol = np.empty_like(rhs_by_comp)
        for comp in range(vs.n_components):
            sol[:, comp, :] = self._velocity_solver.solve(
                op, rhs_by_comp[:, comp, :].reshape(-1)).reshape(-1, vs.n_loc)
        v = FieldCoeffs(vs, sol.reshape(-1))
        res = self._velocity_residual(op, v, rhs_by_comp)
        return v, res

    def _velocity_residual(self, op, v, rhs_by_comp):
        vals = self.vec_space.dof_array(v.values)
        res = 0.0
        for comp in range(self.vec_space.n_components):
            b = rhs_by_comp[:, comp, :].reshape(-1)
            r = op @ vals[:, comp, :].reshape(-1) - b
            scale = max(1.0, float(np.linalg.norm(b)))
            res = max(res, float(np.linalg.norm(r)) / scale)
        return res

    # -- stage 3: pressure-correction Poisson solve ---------------------------

    def pressure_poisson_step(self, v_new):
        rhs = -(self.forms.b_p @ v_new.values) / self.tau
        phi = self._poisson_solve(rhs, 0.0)
        return FieldCoeffs(self.p_space, phi)

    # -- stage 4: updates ------------------------------------------------------

    def pressure_update(self, p_prev, phi_new, v_new):
        """New pressure and the increment of the divergence accumulator."""
        s_inc = self.sigma_chi * self.mu_s * (
            self._minv_p @ (self.forms.b_p @ v_new.values))
        p_new = FieldCoeffs(self.p_space, p_prev.values + phi_new.values - s_inc)
        return p_new, s_inc

    def velocity_update(self, v_new, phi_new):
        u = v_new.values + self.tau * (
            self._minv_v @ (self.forms.b_p.T @ phi_new.values))
        return FieldCoeffs(self.vec_space, u)

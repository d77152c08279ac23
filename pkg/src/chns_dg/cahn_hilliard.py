"""Convex-split Newton solver for the coupled phase-field stage.

Each time step solves the nonlinear block system

    M (c - c_prev)/tau + A mu + adv(c_prev, u_prev) = f_c
    (c^3 - c_prev, .) + kappa A c - M mu            = f_mu

for (c, mu) on the degree-k scalar space, where A is the SIPG stiffness and
only the convex part of the potential is implicit.  The Newton update is
computed through the Schur complement in c (the modal mass matrix is block
diagonal, so eliminating mu is exact and halves the factorization size).
"""

from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp

from . import potential
from .forms import a_adv_load, assemble_weighted_mass, volume_load
from .space import FieldCoeffs, interpolate_constant, mean_weight_vector


class NewtonError(RuntimeError):
    def __init__(self, message, residual_history, last_iterate=None):
        super().__init__(message)
        self.residual_history = residual_history
        self.last_iterate = last_iterate


@dataclass
class NewtonConfig:
    abs_tolerance: float = 1e-11
    max_iterations: int = 50
    max_halvings: int = 20

    def __post_init__(self):
        if self.abs_tolerance <= 0:
            raise ValueError("abs_tolerance must be positive")


@dataclass
class NewtonReport:
    iterations: int
    residual: float
    residual_history: list = field(default_factory=list)
    converged: bool = True


class CahnHilliardStep:
    """Stage-one solver bound to a scalar space and assembled matrices."""

    def __init__(self, space, a_diff, mass, kappa, tau, newton=None):
        self.space = space
        self.a_diff = a_diff.tocsr()
        self.mass = mass.tocsr()
        self.kappa = kappa
        self.tau = tau
        self.newton = newton or NewtonConfig()
        self.weight = mean_weight_vector(space)
        self.ones = interpolate_constant(space, 1.0).values
        self.volume = float(self.weight @ self.ones)
        # mass matrix is block diagonal with identical blocks; its exact
        # inverse makes the Schur elimination of mu exact
        from .forms import _block_diag_inverse_mass
        from .linalg import ReusableSolver
        self._m_inv = _block_diag_inverse_mass(space)
        self._a_minv = (self.a_diff @ self._m_inv).tocsr()
        self._a_minv_a = (self._a_minv @ self.a_diff).tocsr()
        # the Schur operator drifts O(tau) per step, so one factorization
        # preconditions many Newton directions; 1e-9 directions keep the
        # inexact-Newton contraction well below the residual tolerance
        self._schur_solver = ReusableSolver(rtol=1e-9)

    # -- residual -----------------------------------------------------------

    def nonlinear_load(self, c_vals_at_quad):
        """(phi_plus'(c_h), test) evaluated by quadrature."""
        return volume_load(self.space, c_vals_at_quad ** 3)

    def residual(self, c, mu, c_prev, adv, forcing_c=None, forcing_mu=None):
        """Block residual (r_mass, r_chem) as one concatenated vector.

        ``adv`` is the assembled advection load of the previous state and the
        ``forcing_*`` arguments are optional assembled load vectors for the
        two equations.
        """
        r1 = (self.mass @ (c.values - c_prev.values)) / self.tau
        r1 += self.a_diff @ mu.values
        r1 += adv
        if forcing_c is not None:
            r1 -= forcing_c
        r2 = self.nonlinear_load(c.at_volume_quad())
        r2 -= self.mass @ c_prev.values
        r2 += self.kappa * (self.a_diff @ c.values)
        r2 -= self.mass @ mu.values
        if forcing_mu is not None:
            r2 -= forcing_mu
        return np.concatenate([r1, r2])

    def jacobian_weight_matrix(self, c):
        """W(3 c_h^2): mass matrix weighted by the implicit second derivative."""
        return assemble_weighted_mass(self.space,
                                      potential.phi_plus_second(c.at_volume_quad()))

    def jacobian(self, c):
        """Full 2x2 block Jacobian (for tests; the solver uses the Schur form)."""
        w = self.jacobian_weight_matrix(c)
        return sp.bmat([
            [self.mass / self.tau, self.a_diff],
            [w + self.kappa * self.a_diff, -self.mass],
        ], format="csr")

    # -- Newton loop ----------------------------------------------------------

    def _newton_direction(self, c, r1, r2):
        w = self.jacobian_weight_matrix(c)
        schur = (self.mass / self.tau + self._a_minv @ w
                 + self.kappa * self._a_minv_a).tocsr()
        rhs = -r1 - self._a_minv @ r2
        dc = self._schur_solver.solve(schur, rhs)
        dmu = self._m_inv @ ((w + self.kappa * self.a_diff) @ dc + r2)
        return dc, dmu

    def step(self, c_prev, u_prev=None, forcing_c=None, forcing_mu=None,
             mu_prev=None, initial_guess=None):
        """Advance the phase field by one time step.

        Returns (c_new, mu_new, NewtonReport).  ``initial_guess`` overrides
        the default start (c_prev, mu_prev); Newton failure raises
        NewtonError carrying the residual history.
        """
        space = self.space
        if u_prev is not None and np.any(u_prev.values):
            adv = a_adv_load(c_prev, u_prev)
        else:
            adv = np.zeros(space.total_dofs)

        if initial_guess is not None:
            c, mu = initial_guess[0].copy(), initial_guess[1].copy()
        else:
            c = c_prev.copy()
            mu = mu_prev.copy() if mu_prev is not None else self.mu_from_c(c_prev, forcing_mu)

        cfg = self.newton
        res = self.residual(c, mu, c_prev, adv, forcing_c, forcing_mu)
        norm = float(np.abs(res).max())
        history = [norm]
        iterations = 0
        n = space.total_dofs
        while norm > cfg.abs_tolerance:
            if iterations >= cfg.max_iterations:
                raise NewtonError(
                    f"Newton did not converge in {cfg.max_iterations} iterations "
                    f"(residual {norm:.3e})", history, (c, mu))
            dc, dmu = self._newton_direction(c, res[:n], res[n:])
            alpha = 1.0
            for halving in range(cfg.max_halvings + 1):
                c_try = FieldCoeffs(space, c.values + alpha * dc)
                mu_try = FieldCoeffs(space, mu.values + alpha * dmu)
                res_try = self.residual(c_try, mu_try, c_prev, adv,
                                        forcing_c, forcing_mu)
                norm_try = float(np.abs(res_try).max())
                if norm_try < norm or norm_try <= cfg.abs_tolerance:
                    break
                alpha *= 0.5
            else:
                raise NewtonError(
                    f"Newton line search stalled (residual {norm:.3e})",
                    history, (c, mu))
            c, mu, res, norm = c_try, mu_try, res_try, norm_try
            history.append(norm)
            iterations += 1

        self._repair_mass(c, c_prev, forcing_c)
        return c, mu, NewtonReport(iterations, norm, history)

    def mu_from_c(self, c, forcing_mu=None):
        """Solve the potential equation once for mu at fixed c = c_prev."""
        rhs = self.nonlinear_load(c.at_volume_quad())
        rhs -= self.mass @ c.values
        rhs += self.kappa * (self.a_diff @ c.values)
        if forcing_mu is not None:
            rhs -= forcing_mu
        return FieldCoeffs(self.space, self._m_inv @ rhs)

    def _repair_mass(self, c, c_prev, forcing_c):
        # the mass equation is linear, so exactly solved iterates conserve
        # mass up to factorization roundoff; pin it to the discrete target
        target = float(self.weight @ c_prev.values)
        if forcing_c is not None:
            target += self.tau * float(forcing_c @ self.ones)
        drift = target - float(self.weight @ c.values)
        c.values += (drift / self.volume) * self.ones


def ch_residual(space, a_diff, mass, c, mu, c_prev, u_prev, kappa, tau,
                forcing_c=None, forcing_mu=None):
    """Standalone residual of the phase-field stage (test surface)."""
    solver = CahnHilliardStep(space, a_diff, mass, kappa, tau)
    adv = (a_adv_load(c_prev, u_prev) if u_prev is not None
           else np.zeros(space.total_dofs))
    return solver.residual(c, mu, c_prev, adv, forcing_c, forcing_mu)

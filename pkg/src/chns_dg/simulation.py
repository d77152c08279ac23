"""Time-loop orchestration: initialization, the four-stage step sequence,
and whole-run drivers with per-step diagnostics."""

from dataclasses import dataclass, field, replace

import numpy as np

from . import diagnostics, forms
from .cahn_hilliard import CahnHilliardStep, NewtonConfig
from .forms import PenaltyConfig
from .projection import NavierStokesProjection
from .space import (DgSpace, FieldCoeffs, elliptic_project, interpolate_constant,
                    l2_project)


@dataclass
class SchemeParams:
    """Physical and discretization parameters of the scheme."""

    kappa: float
    mu_s: float
    tau: float
    degree: int = 1
    sigma_chi: float = 1.0 / 12.0
    penalties: PenaltyConfig = field(default_factory=PenaltyConfig)
    t_end: float | None = None

    def __post_init__(self):
        if self.kappa <= 0 or self.mu_s <= 0 or self.tau <= 0:
            raise ValueError("kappa, mu_s and tau must be positive")
        if self.degree < 1:
            raise ValueError("polynomial degree must be >= 1")
        if self.sigma_chi <= 0:
            raise ValueError("sigma_chi must be positive")

    @property
    def n_steps(self):
        if self.t_end is None:
            raise ValueError("t_end not set")
        return int(round(self.t_end / self.tau))


@dataclass
class SimState:
    """Coefficient state after step n (t is always recomputed as n*tau)."""

    n: int
    t: float
    c: FieldCoeffs
    mu: FieldCoeffs
    u: FieldCoeffs
    v: FieldCoeffs
    p: FieldCoeffs
    phi: FieldCoeffs
    s_acc: FieldCoeffs   # accumulated divergence functional
    zeta: FieldCoeffs    # p + s_acc


@dataclass
class Forcing:
    """Manufactured right-hand-side data; every entry is optional.

    f_c(t, x) and f_u(t, x) are volume sources of the phase and momentum
    equations; g_u(t, x) the Dirichlet velocity trace; flux_c(t, x, n) and
    flux_mu(t, x, n) the Neumann data grad(c).n and grad(mu).n entering the
    two phase-stage equations when the exact solution has nonzero boundary
    fluxes.
    """

    f_c: callable = None
    f_u: callable = None
    g_u: callable = None
    flux_c: callable = None
    flux_mu: callable = None


@dataclass
class StepInfo:
    newton_iterations: int
    newton_residual: float
    velocity_residual: float


class Simulation:
    """Spaces, assembled operators and the four-stage step sequence."""

    def __init__(self, mesh, params, newton=None):
        limit = 1.0 / (4.0 * mesh.dim)
        if params.sigma_chi > limit:
            raise ValueError(
                f"sigma_chi = {params.sigma_chi} exceeds 1/(4 dim) = {limit}")
        self.mesh = mesh
        self.params = params
        k = params.degree
        self.scalar_space = DgSpace(mesh, k)
        self.vector_space = DgSpace(mesh, k, n_components=mesh.dim)
        self.pressure_space = DgSpace(mesh, k - 1)
        self.forms = forms.assemble_forms(self.scalar_space, self.vector_space,
                                          self.pressure_space, params.penalties)
        self.ch = CahnHilliardStep(self.scalar_space, self.forms.a_diff_k,
                                   self.forms.mass_k, params.kappa, params.tau,
                                   newton or NewtonConfig())
        self.ns = NavierStokesProjection(
            self.vector_space, self.pressure_space, self.scalar_space,
            self.forms, params.mu_s, params.tau, params.sigma_chi,
            params.penalties.sigma_int, params.penalties.sigma_bdy)
        self._prev_c = None  # (step, c values, mu values) for extrapolation

    # -- initialization -----------------------------------------------------

    def initialize(self, c0, u0, grad_c0=None):
        """Project initial data: c by the constrained energy projection,
        u by L2 projection; pressure quantities start at zero.

        ``grad_c0`` feeds the projection's right-hand side; when omitted it
        is approximated by central differences of ``c0``.
        """
        if grad_c0 is None:
            grad_c0 = _fd_gradient(c0, self.mesh.dim)
        c = elliptic_project(self.scalar_space, c0, grad_c0, self.forms.a_diff_k)
        u = l2_project(self.vector_space, u0)
        return self._fresh_state(c, u)

    def initialize_spinodal(self, seed):
        """Elementwise-constant random +-1 phase field, fluid at rest."""
        rng = np.random.default_rng(np.uint64(seed))
        values = rng.integers(0, 2, self.mesh.n_elements) * 2.0 - 1.0
        c = interpolate_constant(self.scalar_space, values)
        u = self.vector_space.zeros()
        return self._fresh_state(c, u)

    def _fresh_state(self, c, u):
        mu = self.ch.mu_from_c(c)
        zero_p = self.pressure_space.zeros()
        return SimState(n=0, t=0.0, c=c, mu=mu, u=u, v=u.copy(),
                        p=zero_p, phi=self.pressure_space.zeros(),
                        s_acc=self.pressure_space.zeros(),
                        zeta=self.pressure_space.zeros())

    # -- stepping -------------------------------------------------------------

    def _stage_loads(self, t_new, forcing):
        f_c_load = f_mu_load = f_u_load = g_bdy = None
        if forcing is None:
            return f_c_load, f_mu_load, f_u_load, g_bdy
        sc, vec = self.scalar_space, self.vector_space
        if forcing.f_c is not None:
            pts = sc.quad_points_phys()
            vals = forcing.f_c(t_new, pts.reshape(-1, self.mesh.dim))
            f_c_load = forms.volume_load(sc, np.asarray(vals).reshape(pts.shape[:2]))
        if forcing.flux_mu is not None:
            data = lambda p, n: forcing.flux_mu(t_new, p, n)
            extra = forms.boundary_load(sc, data)
            f_c_load = extra if f_c_load is None else f_c_load + extra
        if forcing.flux_c is not None:
            data = lambda p, n: forcing.flux_c(t_new, p, n)
            f_mu_load = self.params.kappa * forms.boundary_load(sc, data)
        if forcing.f_u is not None:
            pts = vec.quad_points_phys()
            vals = np.asarray(forcing.f_u(t_new, pts.reshape(-1, self.mesh.dim)))
            vals = np.moveaxis(vals.reshape(pts.shape[0], -1, self.mesh.dim), -1, 1)
            f_u_load = forms.volume_load(vec, vals)
        if forcing.g_u is not None:
            g_bdy = lambda p: forcing.g_u(t_new, p)
        return f_c_load, f_mu_load, f_u_load, g_bdy

    def advance(self, state, forcing=None):
        """One full time step; returns (new_state, StepInfo)."""
        t_new = (state.n + 1) * self.params.tau
        f_c_load, f_mu_load, f_u_load, g_bdy = self._stage_loads(t_new, forcing)

        guess = None
        if self._prev_c is not None and self._prev_c[0] == state.n - 1:
            # linear extrapolation of (c, mu) cuts one Newton iteration once
            # the dynamics smooth out; the converged solution is unchanged
            c_ex = FieldCoeffs(self.scalar_space,
                               2.0 * state.c.values - self._prev_c[1])
            mu_ex = FieldCoeffs(self.scalar_space,
                                2.0 * state.mu.values - self._prev_c[2])
            guess = (c_ex, mu_ex)
        try:
            c_new, mu_new, report = self.ch.step(
                state.c, state.u, forcing_c=f_c_load, forcing_mu=f_mu_load,
                mu_prev=state.mu, initial_guess=guess)
        except Exception as exc:
            raise StageError("phase-field", state.n + 1, exc) from exc
        self._prev_c = (state.n, state.c.values.copy(), state.mu.values.copy())

        try:
            v_new, v_res = self.ns.velocity_step(
                state.u, state.p, state.c, mu_new, forcing_u=f_u_load,
                g_bdy=g_bdy)
            phi_new = self.ns.pressure_poisson_step(v_new)
            p_new, s_inc = self.ns.pressure_update(state.p, phi_new, v_new)
            u_new = self.ns.velocity_update(v_new, phi_new)
        except Exception as exc:
            raise StageError("projection", state.n + 1, exc) from exc

        s_new = FieldCoeffs(self.pressure_space, state.s_acc.values + s_inc)
        zeta_new = FieldCoeffs(self.pressure_space, p_new.values + s_new.values)
        new_state = SimState(n=state.n + 1, t=t_new, c=c_new, mu=mu_new,
                             u=u_new, v=v_new, p=p_new, phi=phi_new,
                             s_acc=s_new, zeta=zeta_new)
        info = StepInfo(report.iterations, report.residual, v_res)
        return new_state, info

    def record(self, state, info=None, prev_state=None):
        """Diagnostics record for a state (dissipation terms need prev_state)."""
        f_h = diagnostics.discrete_energy(state.c, state.u, self.forms.a_diff_k,
                                          self.forms.mass_vec, self.params.kappa)
        e_mod = diagnostics.modified_energy(state, self.forms, self.params)
        decrease, bound, ok = 0.0, 0.0, True
        mu_dg = v_dg = 0.0
        if prev_state is not None:
            decrease, bound, ok = diagnostics.dissipation_check(
                prev_state, state, self.forms, self.params)
            mu_dg = diagnostics.dg_seminorm(state.mu.values, self.forms.grad_k,
                                            self.forms.pen_k)
            v_dg = diagnostics.dg_seminorm(state.v.values, self.forms.grad_vec,
                                           self.forms.pen_vec)
        return diagnostics.DiagnosticsRecord(
            step=state.n, time=state.t,
            mass=diagnostics.mass(state.c),
            energy=f_h, modified_energy=e_mod,
            dissipation_decrease=decrease, dissipation_bound=bound,
            dissipation_ok=ok, dg_seminorm_mu=mu_dg, dg_norm_v=v_dg,
            newton_iterations=info.newton_iterations if info else 0,
            solver_residuals={
                "newton": info.newton_residual,
                "velocity": info.velocity_residual,
            } if info else {})

    def run(self, state, n_steps, forcing=None, observers=()):
        """Advance n_steps; returns the final state and diagnostics records.

        Observers are called as observer(step, state, record) after each
        step and must not mutate the state.  On a stage failure the records
        collected so far are attached to the raised StageError.
        """
        records = [self.record(state)]
        try:
            for _ in range(n_steps):
                prev = state
                state, info = self.advance(state, forcing)
                rec = self.record(state, info, prev)
                records.append(rec)
                for obs in observers:
                    obs(state.n, state, rec)
        except StageError as exc:
            exc.records = records
            raise
        return state, records


class StageError(RuntimeError):
    def __init__(self, stage, step, cause):
        super().__init__(f"stage '{stage}' failed at step {step}: {cause}")
        self.stage = stage
        self.step = step
        self.records = []


def _fd_gradient(f, dim, step=1e-6):
    def grad(pts):
        out = np.empty_like(pts)
        for a in range(dim):
            d = np.zeros(dim)
            d[a] = step
            out[:, a] = (np.asarray(f(pts + d)) - np.asarray(f(pts - d))) / (2 * step)
        return out
    return grad


def manufactured_forcing(sol, with_dirichlet=None):
    """Forcing bundle for a manufactured solution object.

    ``with_dirichlet`` defaults to True in 3D (the Beltrami velocity has a
    nonzero trace) and False in 2D (zero-trace velocity).
    """
    if with_dirichlet is None:
        with_dirichlet = sol.dim == 3
    return Forcing(
        f_c=sol.f_c,
        f_u=sol.f_u,
        g_u=(sol.u if with_dirichlet else None),
        flux_c=sol.flux_c,
        flux_mu=sol.flux_mu,
    )

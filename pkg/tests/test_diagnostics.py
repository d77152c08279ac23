import numpy as np
import pytest

from chns_dg import diagnostics, forms, potential
from chns_dg.forms import PenaltyConfig
from chns_dg.mesh import unit_square_mesh
from chns_dg.simulation import SchemeParams, Simulation
from chns_dg.space import (DgSpace, FieldCoeffs, interpolate_constant,
                           l2_project)


@pytest.fixture
def spaces():
    mesh = unit_square_mesh(4)
    return (DgSpace(mesh, 1), DgSpace(mesh, 1, n_components=2), DgSpace(mesh, 0))


class TestMass:
    def test_constant_one(self, spaces):
        scal, _, _ = spaces
        assert np.isclose(diagnostics.mass(interpolate_constant(scal, 1.0)), 1.0)

    def test_constant_minus_one(self, spaces):
        scal, _, _ = spaces
        assert np.isclose(diagnostics.mass(interpolate_constant(scal, -1.0)), -1.0)

    def test_zero_mean_sine(self, spaces):
        scal, _, _ = spaces
        field = l2_project(scal, lambda x: np.sin(2 * np.pi * x[:, 0])
                           * np.sin(2 * np.pi * x[:, 1]))
        assert abs(diagnostics.mass(field)) < 1e-12


class TestDiscreteEnergy:
    def test_pure_phase_zero(self, spaces):
        scal, vec, _ = spaces
        a = forms.assemble_a_diff(scal, 2.0)
        mv = forms.assemble_mass(vec)
        e = diagnostics.discrete_energy(interpolate_constant(scal, 1.0),
                                        vec.zeros(), a, mv, kappa=1e-2)
        assert abs(e) < 1e-13

    def test_symmetric_mixture_quarter(self, spaces):
        scal, vec, _ = spaces
        a = forms.assemble_a_diff(scal, 2.0)
        mv = forms.assemble_mass(vec)
        e = diagnostics.discrete_energy(interpolate_constant(scal, 0.0),
                                        vec.zeros(), a, mv, kappa=1e-2)
        assert np.isclose(e, 0.25)  # |domain| * phi(0)

    def test_matches_term_by_term_oracle(self, spaces):
        scal, vec, _ = spaces
        a = forms.assemble_a_diff(scal, 2.0)
        mv = forms.assemble_mass(vec)
        rng = np.random.default_rng(0)
        c = FieldCoeffs(scal, rng.standard_normal(scal.total_dofs))
        u = FieldCoeffs(vec, rng.standard_normal(vec.total_dofs))
        kappa = 0.3
        got = diagnostics.discrete_energy(c, u, a, mv, kappa)
        # oracle: independent quadrature loops
        w = scal.integration_weights()
        chem = float(np.einsum("q,eq->", w, potential.phi(c.at_volume_quad())))
        uu = u.at_volume_quad()
        kin = 0.5 * float(np.einsum("q,ecq->", w, uu ** 2))
        inter = 0.5 * kappa * float(c.values @ (a @ c.values))
        assert abs(got - (kin + chem + inter)) < 1e-12 * max(1.0, abs(got))

    def test_spinodal_energy_is_pure_jump_penalty(self):
        mesh = unit_square_mesh(16)
        params = SchemeParams(kappa=1e-4, mu_s=1.0, tau=1e-3)
        sim = Simulation(mesh, params)
        state = sim.initialize_spinodal(seed=8)
        f_h = diagnostics.discrete_energy(state.c, state.u, sim.forms.a_diff_k,
                                          sim.forms.mass_vec, params.kappa)
        expected = 0.5 * params.kappa * float(
            state.c.values @ (sim.forms.a_diff_k @ state.c.values))
        assert f_h >= 0.0
        assert np.isclose(f_h, expected, rtol=1e-12)


class TestModifiedEnergy:
    def test_initial_state_equals_f_h(self):
        mesh = unit_square_mesh(8)
        params = SchemeParams(kappa=1e-4, mu_s=1.0, tau=1e-3)
        sim = Simulation(mesh, params)
        state = sim.initialize_spinodal(seed=4)
        f_h = diagnostics.discrete_energy(state.c, state.u, sim.forms.a_diff_k,
                                          sim.forms.mass_vec, params.kappa)
        e = diagnostics.modified_energy(state, sim.forms, params)
        assert np.isclose(e, f_h)

    def test_stationary_step_unchanged(self):
        mesh = unit_square_mesh(4)
        params = SchemeParams(kappa=1e-2, mu_s=1.0, tau=1e-2)
        sim = Simulation(mesh, params)
        state = sim.initialize(lambda x: np.full(x.shape[0], 0.4),
                               lambda x: np.zeros_like(x),
                               grad_c0=lambda x: np.zeros_like(x))
        e0 = diagnostics.modified_energy(state, sim.forms, params)
        state, _ = sim.advance(state)
        e1 = diagnostics.modified_energy(state, sim.forms, params)
        assert abs(e1 - e0) < 1e-12


class TestDissipationCheck:
    def test_stationary_zero_decrease(self):
        mesh = unit_square_mesh(4)
        params = SchemeParams(kappa=1e-2, mu_s=1.0, tau=1e-2)
        sim = Simulation(mesh, params)
        state = sim.initialize(lambda x: np.full(x.shape[0], 0.4),
                               lambda x: np.zeros_like(x),
                               grad_c0=lambda x: np.zeros_like(x))
        new, _ = sim.advance(state)
        dec, bound, ok = diagnostics.dissipation_check(state, new, sim.forms, params)
        assert ok
        assert abs(dec) < 1e-12
        assert bound <= 0.0

    def test_spinodal_first_step_satisfied(self):
        mesh = unit_square_mesh(16)
        params = SchemeParams(kappa=1e-4, mu_s=1.0, tau=1e-3)
        sim = Simulation(mesh, params)
        state = sim.initialize_spinodal(seed=12)
        new, _ = sim.advance(state)
        dec, bound, ok = diagnostics.dissipation_check(state, new, sim.forms, params)
        assert ok
        assert dec <= bound + 1e-9  # the proved bound itself holds here

    def test_detector_reports_boolean_for_huge_tau(self):
        # an absurd time step may break monotonicity; the check must report,
        # not raise
        mesh = unit_square_mesh(8)
        params = SchemeParams(kappa=1e-4, mu_s=1.0, tau=10.0)
        sim = Simulation(mesh, params)
        state = sim.initialize_spinodal(seed=13)
        try:
            new, _ = sim.advance(state)
        except Exception:
            pytest.skip("nonlinear solver refused the absurd step")
        dec, bound, ok = diagnostics.dissipation_check(state, new, sim.forms, params)
        assert ok in (True, False)


class TestErrorNorms:
    def test_projected_polynomial_error_tiny(self, spaces):
        scal, _, _ = spaces
        f = lambda x: x[:, 0] * x[:, 1] + 0.5
        field = l2_project(scal, f)
        err, _ = diagnostics.error_norms(field, f)
        assert err < 1e-12

    def test_constant_offset_error(self, spaces):
        scal, _, _ = spaces
        f = lambda x: x[:, 0] * x[:, 1]  # in the space, projected exactly
        field = l2_project(scal, lambda x: f(x) + 1.0)
        err, _ = diagnostics.error_norms(field, f)
        # the error is exactly the constant 1, so err = sqrt(|domain|)
        assert abs(err - 1.0) < 1e-12

    def test_dg_error_includes_jumps(self, spaces):
        scal, _, _ = spaces
        rng = np.random.default_rng(1)
        field = FieldCoeffs(scal, rng.standard_normal(scal.total_dofs))
        zero = lambda x: np.zeros(x.shape[0])
        zero_grad = lambda x: np.zeros_like(x)
        l2, dg = diagnostics.error_norms(field, zero, zero_grad, sigma_tilde=2.0)
        grad = forms.assemble_broken_gradient(scal)
        pen = forms.assemble_jump_penalty(scal, 2.0)
        expected = np.sqrt(float(field.values @ ((grad + pen) @ field.values)))
        assert np.isclose(dg, expected, rtol=1e-12)

    def test_vector_error(self, spaces):
        _, vec, _ = spaces
        f = lambda x: np.stack([x[:, 0], -x[:, 1]], axis=-1)
        field = l2_project(vec, f)
        err, _ = diagnostics.error_norms(field, f)
        assert err < 1e-12

import math
import os

import numpy as np
import pytest

from chns_dg import cli
from chns_dg.mesh import unit_square_mesh
from chns_dg.space import DgSpace, interpolate_constant, l2_project
from chns_dg.vtk_io import read_vtk_cell_count, write_vtk


def write_config(path, **overrides):
    lines = ["# test configuration"]
    for key, value in overrides.items():
        lines.append(f"{key} = {value}")
    path.write_text("\n".join(lines) + "\n")
    return str(path)


class TestConfigParsing:
    def test_defaults_and_overrides(self, tmp_path):
        cfg = cli.parse_config(write_config(tmp_path / "a.cfg",
                                            problem="stationary", tau=0.01,
                                            T=0.05, cells_per_axis=4))
        assert cfg["problem"] == "stationary"
        assert cfg["tau"] == 0.01
        assert cfg["kappa"] == 1e-4  # default survives

    def test_comments_and_blank_lines(self, tmp_path):
        p = tmp_path / "b.cfg"
        p.write_text("\n# full-line comment\nkappa = 0.5  # trailing\n\n")
        assert cli.parse_config(str(p))["kappa"] == 0.5

    def test_unknown_key_reports_line(self, tmp_path):
        p = tmp_path / "c.cfg"
        p.write_text("kappa = 1.0\nbogus = 3\n")
        with pytest.raises(cli.ConfigError, match=r"c.cfg:2"):
            cli.parse_config(str(p))

    def test_bad_value_reports_line(self, tmp_path):
        p = tmp_path / "d.cfg"
        p.write_text("tau = fast\n")
        with pytest.raises(cli.ConfigError, match=r"d.cfg:1"):
            cli.parse_config(str(p))

    def test_sigma_chi_range(self, tmp_path):
        p = write_config(tmp_path / "e.cfg", sigma_chi=0.2, dim=2)
        with pytest.raises(cli.ConfigError, match="sigma_chi"):
            cli.parse_config(p)

    def test_problem_fixes_dim(self, tmp_path):
        cfg = cli.parse_config(write_config(tmp_path / "f.cfg",
                                            problem="manufactured-3d", dim=2,
                                            kappa=1.0))
        assert cfg["dim"] == 3


class TestRunCommand:
    def test_stationary_constant_mass_column(self, tmp_path):
        cfg = write_config(tmp_path / "run.cfg", problem="stationary",
                           cells_per_axis=4, tau=0.01, T=0.1, kappa=0.01,
                           c0_mean=0.3, output=str(tmp_path / "out"))
        assert cli.main(["run", "--config", cfg]) == 0
        lines = (tmp_path / "out" / "timeseries.csv").read_text().splitlines()
        assert lines[0] == cli.TIMESERIES_HEADER
        masses = [float(row.split(",")[2]) for row in lines[1:]]
        assert len(masses) == 11
        assert max(abs(m - masses[0]) for m in masses) < 1e-12
        assert (tmp_path / "out" / "config.echo").exists()

    def test_spinodal_determinism_byte_identical(self, tmp_path):
        cfg = write_config(tmp_path / "sp.cfg", problem="spinodal",
                           cells_per_axis=8, tau=1e-3, T=5e-3, seed=77)
        assert cli.main(["run", "--config", cfg, "--output",
                         str(tmp_path / "o1")]) == 0
        assert cli.main(["run", "--config", cfg, "--output",
                         str(tmp_path / "o2")]) == 0
        b1 = (tmp_path / "o1" / "timeseries.csv").read_bytes()
        b2 = (tmp_path / "o2" / "timeseries.csv").read_bytes()
        assert b1 == b2

    def test_seed_flag_changes_run(self, tmp_path):
        cfg = write_config(tmp_path / "sp2.cfg", problem="spinodal",
                           cells_per_axis=8, tau=1e-3, T=2e-3, seed=1)
        cli.main(["run", "--config", cfg, "--output", str(tmp_path / "s1")])
        cli.main(["run", "--config", cfg, "--seed", "2", "--output",
                  str(tmp_path / "s2")])
        b1 = (tmp_path / "s1" / "timeseries.csv").read_bytes()
        b2 = (tmp_path / "s2" / "timeseries.csv").read_bytes()
        assert b1 != b2

    def test_manufactured_final_row_carries_errors(self, tmp_path):
        cfg = write_config(tmp_path / "m.cfg", problem="manufactured-2d",
                           cells_per_axis=4, tau=1e-3, T=3e-3, kappa=1.0,
                           sigma_tilde_ch=2.0, sigma_tilde_ellip=4.0)
        out = tmp_path / "mout"
        assert cli.main(["run", "--config", cfg, "--output", str(out)]) == 0
        lines = (out / "timeseries.csv").read_text().splitlines()
        assert lines[0] == cli.TIMESERIES_HEADER + cli.ERROR_COLUMNS
        last = lines[-1].split(",")
        errs = [float(v) for v in last[-3:]]
        assert all(np.isfinite(errs)) and all(e > 0 for e in errs)
        middle = lines[2].split(",")
        assert middle[-3:] == ["", "", ""]
        # errors must agree with a direct diagnostics evaluation
        from chns_dg import diagnostics
        from chns_dg.manufactured import ManufacturedSolution2D
        from chns_dg.mesh import build_structured_mesh
        from chns_dg.simulation import Simulation, manufactured_forcing
        mesh = build_structured_mesh([(0, 1), (0, 1)], 4)
        params = cli.scheme_params(cli.parse_config(cfg))
        sim = Simulation(mesh, params)
        sol = ManufacturedSolution2D(kappa=1.0, mu_s=1.0)
        state = sim.initialize(lambda x: sol.c(0.0, x), lambda x: sol.u(0.0, x),
                               grad_c0=lambda x: sol.grad_c(0.0, x))
        state, _ = sim.run(state, 3, forcing=manufactured_forcing(sol))
        ec, _ = diagnostics.error_norms(state.c, lambda x: sol.c(state.t, x))
        assert abs(ec - errs[0]) < 1e-12 * max(1.0, ec)

    def test_missing_config_is_error_exit(self, tmp_path):
        rc = cli.main(["run", "--config", str(tmp_path / "nope.cfg")])
        assert rc != 0

    def test_snapshots_written(self, tmp_path):
        cfg = write_config(tmp_path / "v.cfg", problem="spinodal",
                           cells_per_axis=4, tau=1e-3, T=2e-3,
                           snapshot_every=1)
        out = tmp_path / "vout"
        assert cli.main(["run", "--config", cfg, "--output", str(out)]) == 0
        snaps = sorted(out.glob("snapshot_*.vtk"))
        assert len(snaps) == 3  # steps 0, 1, 2


class TestConvergenceCommand:
    def test_rate_formula_identical_errors(self):
        rows = cli.convergence_rates([0.5, 0.25], [[1e-3, 1e-3]])
        assert rows[0][2] is None
        assert abs(rows[1][2] - 0.0) < 1e-14

    def test_rate_formula_ratio_four(self):
        rows = cli.convergence_rates([0.5, 0.25], [[4e-2, 1e-2]])
        assert abs(rows[1][2] - 2.0) < 1e-12

    def test_requires_manufactured_problem(self, tmp_path):
        cfg = write_config(tmp_path / "c.cfg", problem="spinodal")
        rc = cli.main(["convergence", "--config", cfg, "--levels", "2,4"])
        assert rc == 2

    def test_small_convergence_run_writes_table(self, tmp_path):
        cfg = write_config(tmp_path / "conv.cfg", problem="manufactured-2d",
                           tau=2e-3, T=6e-3, kappa=1.0,
                           sigma_tilde_ch=2.0, sigma_tilde_ellip=4.0)
        out = tmp_path / "conv"
        rc = cli.main(["convergence", "--config", cfg, "--levels", "2,4",
                       "--output", str(out)])
        assert rc == 0
        lines = (out / "rates.csv").read_text().splitlines()
        assert lines[0] == "h,err_c,rate_c,err_u,rate_u,err_p,rate_p"
        assert len(lines) == 3
        first = lines[1].split(",")
        assert first[2] == ""  # no rate on the first level
        second = lines[2].split(",")
        assert all(tok != "" for tok in second)


class TestVtk:
    def test_constant_field_written_as_ones(self, tmp_path):
        mesh = unit_square_mesh(3)
        space = DgSpace(mesh, 1)
        field = interpolate_constant(space, 1.0)
        path = tmp_path / "c.vtk"
        write_vtk(str(path), mesh, scalars={"c": field})
        text = path.read_text()
        assert "SCALARS c float 1" in text
        idx = text.index("LOOKUP_TABLE default")
        values = text[idx:].splitlines()[1:1 + mesh.n_elements]
        assert all(float(v) == 1.0 for v in values)

    def test_round_trip_cell_count(self, tmp_path):
        mesh = unit_square_mesh(4)
        space = DgSpace(mesh, 1)
        path = tmp_path / "m.vtk"
        write_vtk(str(path), mesh, scalars={"c": space.zeros()})
        assert read_vtk_cell_count(str(path)) == mesh.n_elements

    def test_3d_hexahedra_and_vectors(self, tmp_path):
        from chns_dg.mesh import unit_cube_mesh
        mesh = unit_cube_mesh(2)
        vec = DgSpace(mesh, 1, n_components=3)
        field = l2_project(vec, lambda x: x)
        path = tmp_path / "h.vtk"
        write_vtk(str(path), mesh, vectors={"u": field})
        text = path.read_text()
        assert "CELL_TYPES 8" in text
        assert "VECTORS u float" in text
        assert read_vtk_cell_count(str(path)) == 8

    def test_cell_means_of_linear_field(self):
        mesh = unit_square_mesh(2)
        space = DgSpace(mesh, 1)
        field = l2_project(space, lambda x: x[:, 0])
        from chns_dg.vtk_io import cell_means
        means = cell_means(field)
        assert np.allclose(sorted(means), [0.25, 0.25, 0.75, 0.75])

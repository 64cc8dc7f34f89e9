"""Configuration parsing, presets, run artifacts and the CLI."""

import json
import math
import os

import numpy as np
import pytest

from pairspace.cli import main
from pairspace.config import (ConfigError, RunConfig, parse_config,
                              serialize_config)
from pairspace.observables import DensityMap
from pairspace.presets import get_preset, preset_catalog
from pairspace.runio import (RunManifest, read_density_map, read_slab,
                             sha256_file, write_density_map,
                             write_marginal_csv, write_slab)


class TestConfigParsing:
    def test_empty_text_gives_defaults(self):
        assert parse_config("") == RunConfig()

    def test_round_trip_is_exact(self):
        cfg = parse_config(
            "mode = compare\n"
            "field.epsilon = 0.25\n"
            "field.phi_rad = 1.5707963267948966\n"
            "grid.n_qx = 96\n"
            "grid.alpha_q = 0.5\n"
            "stepper.rel_tol = 1e-6\n"
            "dhw.snapshot_times_inv_m = -10.0, 0.0, 10.0\n"
            "traj.toggle_s_dzb = false\n"
            "traj.z_min_inv_m = auto\n"
            "traj.bandwidth_px_m = 0.05\n"
        )
        assert cfg.mode == "compare"
        assert cfg.field.epsilon == 0.25
        assert cfg.grid.n_qx == 96
        assert cfg.window.snapshot_times == (-10.0, 0.0, 10.0)
        assert cfg.traj.toggles.enable_S_dzB is False
        assert cfg.traj.z_min is None
        assert parse_config(serialize_config(cfg)) == cfg

    def test_defaults_round_trip(self):
        assert parse_config(serialize_config(RunConfig())) == RunConfig()

    def test_comments_and_blank_lines_ignored(self):
        cfg = parse_config("# a comment\n\nfield.epsilon = 0.1  # inline\n")
        assert cfg.field.epsilon == 0.1

    def test_unknown_key_reports_line(self):
        with pytest.raises(ConfigError, match="line 2.*unknown key"):
            parse_config("mode = dhw\nfield.banana = 3\n")

    def test_bad_value_reports_position(self):
        with pytest.raises(ConfigError, match="line 1.*cannot parse"):
            parse_config("field.epsilon = one-half\n")

    def test_missing_equals_rejected(self):
        with pytest.raises(ConfigError, match="key = value"):
            parse_config("just some words\n")

    def test_invalid_physics_rejected(self):
        with pytest.raises(ConfigError):
            parse_config("field.tau_inv_m = -3\n")
        with pytest.raises(ConfigError):
            parse_config("mode = banana\n")
        with pytest.raises(ConfigError):
            parse_config("grid.n_z = 13\n")


class TestPresets:
    def test_catalog_is_valid_and_round_trips(self):
        cat = preset_catalog()
        assert len(cat) >= 10
        for name, cfg in cat.items():
            assert parse_config(serialize_config(cfg)) == cfg

    def test_paper_and_desk_scales_exist(self):
        cat = preset_catalog()
        paper = [n for n in cat if n.startswith("paper_")]
        desk = [n for n in cat if n.startswith("desk_")]
        assert paper and desk
        # desk variants shrink the grid, never the field strength
        assert cat["desk_fig6_top"].grid.n_z < cat["paper_fig6_top"].grid.n_z
        assert (cat["desk_fig6_top"].field.epsilon
                == cat["paper_fig6_top"].field.epsilon)

    def test_quarter_phase_presets(self):
        cfg = get_preset("desk_cep_phi1_2pi")
        assert cfg.field.phi == pytest.approx(math.pi / 2)
        assert cfg.field.tau == 10.0

    def test_unknown_preset(self):
        with pytest.raises(KeyError, match="available"):
            get_preset("nope")


class TestRunIO:
    def test_slab_round_trip(self, tmp_path):
        vals = np.arange(24.0).reshape(2, 3, 4)
        path = str(tmp_path / "cube")
        files = write_slab(path, vals, ("a", "b", "c"),
                           coords=[np.arange(2.0), np.arange(3.0),
                                   np.arange(4.0)],
                           meta={"k": 1})
        assert sorted(os.path.basename(f) for f in files) == [
            "cube.f64", "cube.json"]
        got, sidecar = read_slab(path)
        np.testing.assert_array_equal(got, vals)
        assert sidecar["axes"] == ["a", "b", "c"]
        assert sidecar["meta"] == {"k": 1}

    def test_non_finite_refused(self, tmp_path):
        with pytest.raises(ValueError, match="non-finite"):
            write_slab(str(tmp_path / "bad"), np.array([np.inf]), ("x",))

    def test_density_map_round_trip(self, tmp_path):
        dm = DensityMap(np.ones((3, 4)),
                        (("p_x", np.linspace(-1, 1, 3)),
                         ("p_z", np.linspace(-1, 1, 4))), "a note")
        path = str(tmp_path / "dm")
        write_density_map(path, dm)
        back = read_density_map(path)
        np.testing.assert_array_equal(back.values, dm.values)
        assert back.axis_names == ("p_x", "p_z")
        assert back.note == "a note"

    def test_marginal_csv(self, tmp_path):
        dm = DensityMap(np.array([1.5, 2.5]), (("p_x", np.array([0.0, 1.0])),))
        path = str(tmp_path / "m.csv")
        write_marginal_csv(path, dm)
        lines = open(path).read().splitlines()
        assert lines[0] == "p_x,value"
        assert [float(x) for x in lines[1].split(",")] == [0.0, 1.5]

    def test_manifest_checksums(self, tmp_path):
        path = str(tmp_path / "data")
        files = write_slab(path, np.zeros(4), ("x",))
        man = RunManifest(config_text="mode = dhw", code_version="0",
                          mode="dhw")
        man.add_files(files)
        mpath = man.write(str(tmp_path))
        payload = json.loads(open(mpath).read())
        assert payload["files"]["data.f64"] == sha256_file(path + ".f64")
        assert payload["mode"] == "dhw"


class TestCli:
    def test_help_exits_clean(self, capsys):
        assert main(["--help"]) == 0
        assert "pairspace" in capsys.readouterr().out

    def test_presets_listing(self, capsys):
        assert main(["presets"]) == 0
        out = capsys.readouterr().out
        assert "desk_qkt_compare" in out

    def test_run_requires_exactly_one_source(self, capsys):
        assert main(["run"]) == 1
        assert main(["run", "--config", "a", "--preset", "b"]) == 1

    def test_unknown_preset_is_validation_error(self, capsys):
        assert main(["run", "--preset", "nope"]) == 2

    def test_bad_config_file_is_validation_error(self, tmp_path, capsys):
        p = tmp_path / "bad.cfg"
        p.write_text("field.epsilon = squid\n")
        assert main(["run", "--config", str(p)]) == 2

    def test_validate_echoes_round_trip(self, tmp_path, capsys):
        p = tmp_path / "ok.cfg"
        p.write_text("mode = qkt\nfield.epsilon = 0.2\n")
        assert main(["validate", "--config", str(p)]) == 0
        out = capsys.readouterr().out
        assert "mode = qkt" in out
        assert "field.epsilon = 0.2" in out

    def test_qkt_run_writes_artifacts(self, tmp_path, capsys):
        p = tmp_path / "run.cfg"
        p.write_text(
            "mode = qkt\n"
            f"output_dir = {tmp_path / 'out'}\n"
            "field.epsilon = 0.1\n"
            "field.tau_inv_m = 3.0\n"
            "field.omega_m = 0.7\n"
            "qkt.t_start_inv_m = -12\n"
            "qkt.t_end_inv_m = 12\n"
            "qkt.n_px = 16\n"
        )
        assert main(["run", "--config", str(p)]) == 0
        out_dir = tmp_path / "out"
        manifest = json.loads((out_dir / "manifest.json").read_text())
        assert manifest["mode"] == "qkt"
        assert manifest["metrics"]["bloch_residual_max"] < 1e-10
        assert (out_dir / "qkt_spectrum.csv").exists()

    def test_diff_spectra(self, tmp_path, capsys):
        a = tmp_path / "a.csv"
        b = tmp_path / "b.csv"
        a.write_text("p_x,value\n0.0,1.0\n1.0,2.0\n")
        b.write_text("p_x,value\n0.0,1.0\n1.0,2.0\n")
        assert main(["diff-spectra", str(a), str(b)]) == 0
        out = capsys.readouterr().out
        assert "l1_relative = 0" in out

    def test_version_flag(self, capsys):
        assert main(["--version"]) == 0

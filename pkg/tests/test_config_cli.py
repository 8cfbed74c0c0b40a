import json

import pytest

from dceprobe import __version__
from dceprobe.cli import main
from dceprobe.config import (
    ExperimentConfig,
    Table,
    dump_config,
    embedded_config,
    load_config,
    parse_config,
    render,
    write_output,
)
from dceprobe.errors import ConfigError


class TestConfig:
    def test_empty_gives_defaults(self):
        cfg = parse_config("")
        assert cfg == ExperimentConfig()
        assert (cfg.epsilon * cfg.eta, cfg.g, cfg.delta) == (pytest.approx(2e-3), 5e-4, 0.0)
        assert cfg.mcs == 1000.0

    def test_none_path_gives_defaults(self):
        assert load_config(None) == ExperimentConfig()

    def test_values_and_int_to_float(self):
        cfg = parse_config('epsilon = 2e-3\nfock_dim = 50\nreset_mode = "atom-extraction"\nomega0_per_mcs = 500\n')
        assert cfg.epsilon == 2e-3 and cfg.fock_dim == 50 and cfg.reset_mode == "atom-extraction"
        assert isinstance(cfg.omega0_per_mcs, float)

    def test_eta_follows_omega0(self):
        assert parse_config("omega0 = 2.0").eta == 4.0
        assert parse_config("omega0 = 2.0\neta = 3.0").eta == 3.0

    def test_duplicate_key_named(self):
        with pytest.raises(ConfigError, match="seed"):
            parse_config("seed = 1\nepsilon = 1e-3\nseed = 2\n")

    def test_unknown_key(self):
        with pytest.raises(ConfigError, match="frobnicate"):
            parse_config("frobnicate = 1")

    @pytest.mark.parametrize("text", ['fock_dim = 4.5', 'epsilon = "big"', 'seed = true', 'format = 3'])
    def test_type_mismatch(self, text):
        with pytest.raises(ConfigError):
            parse_config(text)

    def test_tables_rejected(self):
        with pytest.raises(ConfigError):
            parse_config("[drive]\nepsilon = 1e-3\n")

    @pytest.mark.parametrize("text", ["mc_atoms = 0", "fock_dim = 1", "format = 'xml'", "theta_points = 8",
                                      "epsilon = 1.5", "seed = -1"])
    def test_invalid_values(self, text):
        with pytest.raises(ConfigError):
            parse_config(text)

    def test_syntax_error(self):
        with pytest.raises(ConfigError):
            parse_config("seed = = 3")

    def test_missing_file(self, tmp_path):
        with pytest.raises(ConfigError):
            load_config(tmp_path / "nope.toml")

    def test_round_trip(self, tmp_path):
        cfg = ExperimentConfig(seed=77, fock_dim=48, reset_mode="atom-extraction", theta_x=0.25)
        assert load_config(dump_config(cfg, tmp_path / "c.toml")) == cfg

    def test_derived_objects(self):
        cfg = ExperimentConfig(mc_atoms=123, seed=9)
        rc = cfg.run_config()
        assert rc.atoms_per_point == 123 and rc.seed == 9 and rc.generation_duration == 1000.0
        assert cfg.drive().resonant and cfg.atom().g == 5e-4


class TestOutput:
    cfg = ExperimentConfig()
    table = Table(["tau", "p"], [[0.0, 1.0], [0.1, 0.990025]])

    def test_csv_layout(self):
        text = render(self.table, self.cfg, "csv")
        lines = text.split("\n")
        assert lines[0] == f"# dceprobe {__version__}"
        assert lines[1].startswith("# config: ")
        assert lines[2] == "tau,p" and lines[4] == "0.1,0.990025" and text.endswith("\n")

    def test_json_layout(self):
        data = json.loads(render(self.table, self.cfg, "json"))
        assert data["artifact"] == "dceprobe" and data["version"] == __version__
        assert data["columns"] == ["tau", "p"] and data["rows"][1] == [0.1, 0.990025]
        summary = json.loads(render({"a": 1.5, "ok": True}, self.cfg, "json"))
        assert summary["summary"] == {"a": 1.5, "ok": True}

    @pytest.mark.parametrize("fmt", ["csv", "json"])
    def test_embedded_config_recovers(self, tmp_path, fmt):
        cfg = ExperimentConfig(seed=5, band=0.03)
        path = write_output(self.table, tmp_path / "out", cfg, fmt)
        assert path.suffix == f".{fmt}"
        assert embedded_config(path) == cfg

    def test_unwritable(self, tmp_path):
        blocker = tmp_path / "file"
        blocker.write_text("x")
        with pytest.raises(ConfigError):
            write_output(self.table, blocker / "sub" / "out", self.cfg)


def write_cfg(tmp_path, text):
    p = tmp_path / "cfg.toml"
    p.write_text(text)
    return str(p)


class TestCli:
    def test_eq27_passes(self, tmp_path, capsys):
        assert main(["eq27", "--out", str(tmp_path)]) == 0
        out = capsys.readouterr().out
        assert "mean_n" in out and "mean_X2" in out
        assert (tmp_path / "eq27.csv").exists()

    def test_eq27_acceptance_failure(self, tmp_path):
        cfg = write_cfg(tmp_path, "expect_n = 0.5\n")
        assert main(["eq27", "--config", cfg, "--out", str(tmp_path), "--quiet"]) == 1

    def test_config_errors(self, tmp_path):
        assert main(["mc", "--config", write_cfg(tmp_path, "mc_atoms = 0\n"), "--quiet"]) == 2
        assert main(["eq27", "--config", write_cfg(tmp_path, "seed = 1\nseed = 2\n"), "--quiet"]) == 2
        assert main(["eq27", "--config", str(tmp_path / "missing.toml"), "--quiet"]) == 2

    def test_numerical_failure(self, tmp_path):
        assert main(["eq27", "--fock-dim", "4", "--out", str(tmp_path), "--quiet"]) == 3

    def test_fig2(self, tmp_path):
        assert main(["fig2", "--out", str(tmp_path), "--format", "json", "--quiet"]) == 0
        data = json.loads((tmp_path / "fig2.json").read_text())
        first = dict(zip(data["columns"], data["rows"][0]))
        assert first["tau"] == 0.0
        assert first["p1_exact"] == pytest.approx(1.0) and first["p1_rot_exact"] == pytest.approx(0.5)
        assert first["p2_rot_exact"] == pytest.approx(0.25)
        assert data["config"]["format"] == "json"

    def test_scan_modes(self, tmp_path):
        for mode in ("kraus", "exact"):
            cfg = write_cfg(tmp_path, f'scan_variant = "rotated-2atom"\nscan_mode = "{mode}"\ntau_points = 5\n')
            assert main(["scan", "--config", cfg, "--out", str(tmp_path / mode), "--quiet"]) == 0
            text = (tmp_path / mode / "scan_estimate.csv").read_text()
            value = float(next(line.split(",")[1] for line in text.splitlines() if line.startswith("mean_Q2,")))
            assert value == pytest.approx(0.18, abs=0.02)

    def test_mc_bit_identical(self, tmp_path):
        # the output directory is part of the embedded config, so both runs write to the same place
        cfg = write_cfg(tmp_path, "mc_atoms = 2000\n")
        out = tmp_path / "run"
        snapshots = []
        for _ in range(2):
            assert main(["mc", "--config", cfg, "--seed", "31", "--out", str(out), "--quiet"]) == 0
            snapshots.append({p.name: p.read_bytes() for p in out.iterdir()})
        assert sorted(snapshots[0]) == ["mc_clicks_X.csv", "mc_clicks_X2.csv", "mc_clicks_n.csv", "mc_estimates.csv"]
        assert snapshots[0] == snapshots[1]
        assert embedded_config(out / "mc_estimates.csv").seed == 31

    def test_mc_default_scale(self, tmp_path):
        assert main(["mc", "--out", str(tmp_path), "--quiet"]) == 0
        rows = dict(line.split(",", 1) for line in (tmp_path / "mc_estimates.csv").read_text().splitlines()
                    if not line.startswith("#"))
        n, se = float(rows["n_sampled"]), float(rows["n_std_err"])
        assert abs(n - 0.2716) <= 3 * se

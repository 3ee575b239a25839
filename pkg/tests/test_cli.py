"""End-to-end tests for the experiment harness."""

import json
import os

import numpy as np
import pytest

from strictsaddle import cli, ica
from strictsaddle.cli import ICA_RECORD_EVERY, main, parse_config_file, trailing_window_stats

FAST = ["--d", "3", "--iters", "200", "--eta", "0.05", "--record-every", "50"]


def read_manifest(out_dir):
    with open(os.path.join(out_dir, "manifest.json")) as fh:
        return json.load(fh)


def strip_elapsed(path):
    """Trace CSV lines with the wall-clock column removed."""
    lines = path.read_text().strip().split("\n")
    assert lines[0] == "iter,f,grad_norm,recon_error,elapsed_ms"
    return [line.rsplit(",", 1)[0] for line in lines]


class TestConfigHandling:
    def test_config_file_parsing(self, tmp_path):
        path = tmp_path / "run.cfg"
        path.write_text("# comment\n d = 5 \n\neta=0.3  # trailing\nseeds=2,7,9\n")
        data = parse_config_file(path)
        assert data == {"d": "5", "eta": "0.3", "seeds": "2,7,9"}

    def test_flags_override_config_file(self, tmp_path):
        cfg = tmp_path / "run.cfg"
        cfg.write_text("eta=0.5\nd=6\niters=50\nnoise=0\n")
        out = tmp_path / "out"
        rc = main(["decompose", "--config", str(cfg), "--eta", "0.02",
                   "--out", str(out), "--record-every", "25"])
        assert rc == 0
        manifest = read_manifest(out)
        assert manifest["config"]["eta"] == 0.02
        assert manifest["config"]["d"] == 6

    def test_seed_list_from_config_file(self, tmp_path):
        cfg = tmp_path / "run.cfg"
        cfg.write_text("seeds=3,9\n")
        out = tmp_path / "out"
        rc = main(["decompose", "--config", str(cfg), "--out", str(out), *FAST])
        assert rc == 0
        manifest = read_manifest(out)
        assert manifest["seeds"] == [3, 9]
        assert "seed3.csv" in manifest["outputs"]
        assert "seed9.csv" in manifest["outputs"]

    def test_seed_count_flag(self, tmp_path):
        out = tmp_path / "out"
        rc = main(["decompose", "--seed", "5", "--seeds", "2", "--out", str(out), *FAST])
        assert rc == 0
        assert read_manifest(out)["seeds"] == [5, 6]

    def test_env_var_sets_output_root(self, tmp_path, monkeypatch):
        monkeypatch.setenv(cli.ENV_OUT, str(tmp_path / "results"))
        rc = main(["decompose", *FAST])
        assert rc == 0
        assert (tmp_path / "results" / "decompose" / "summary.csv").exists()

    def test_existing_dir_needs_overwrite(self, tmp_path, capsys):
        out = tmp_path / "out"
        assert main(["decompose", "--out", str(out), *FAST]) == 0
        assert main(["decompose", "--out", str(out), *FAST]) == 2
        assert "overwrite" in capsys.readouterr().err
        assert main(["decompose", "--out", str(out), "--overwrite", *FAST]) == 0

    @pytest.mark.parametrize("argv,needle", [
        (["decompose", "--iters", "0"], "iterations"),
        (["decompose", "--sampler", "ica", "--objective", "maxeig"], "correlation"),
        (["escape", "--trials", "0"], "trials"),
    ])
    def test_validation_errors_exit_2(self, tmp_path, capsys, argv, needle):
        rc = main(argv + ["--out", str(tmp_path / "out")])
        assert rc == 2
        assert needle in capsys.readouterr().err

    def test_bad_config_key_exits_2(self, tmp_path, capsys):
        cfg = tmp_path / "run.cfg"
        cfg.write_text("objective=banana\n")
        rc = main(["decompose", "--config", str(cfg), "--out", str(tmp_path / "out")])
        assert rc == 2
        assert "objective" in capsys.readouterr().err

    def test_trailing_window_stats(self):
        mean, spread = trailing_window_stats([10.0, 10.0, 10.0, 10.0, 2.0, 4.0, 3.0, 3.0, 2.0, 4.0])
        np.testing.assert_allclose(mean, 3.0)
        np.testing.assert_allclose(spread, 2.0)
        mean_one, spread_one = trailing_window_stats([7.0], fraction=0.2)
        assert (mean_one, spread_one) == (7.0, 0.0)


class TestDecompose:
    def test_outputs_and_summary_schema(self, tmp_path):
        out = tmp_path / "out"
        rc = main(["decompose", "--seeds", "2", "--out", str(out), *FAST])
        assert rc == 0
        lines = (out / "summary.csv").read_text().strip().split("\n")
        assert lines[0] == "seed,final_f,final_grad_norm,final_recon_error,n_steps,diverged"
        assert len(lines) == 3
        for row in lines[1:]:
            seed, f, g, err, n_steps, diverged = row.split(",")
            float(f), float(g), float(err)
            assert int(n_steps) == 200
            assert diverged == "0"

    def test_manifest_lists_every_file(self, tmp_path):
        out = tmp_path / "out"
        main(["decompose", "--seeds", "2", "--out", str(out), *FAST])
        manifest = read_manifest(out)
        on_disk = sorted(p.name for p in out.iterdir() if p.name != "manifest.json")
        assert manifest["outputs"] == on_disk
        assert manifest["command"] == "decompose"
        assert manifest["config"]["d"] == 3

    def test_rerun_is_deterministic_up_to_wall_clock(self, tmp_path):
        out_a, out_b = tmp_path / "a", tmp_path / "b"
        for out in (out_a, out_b):
            assert main(["decompose", "--seed", "3", "--out", str(out), *FAST]) == 0
        assert strip_elapsed(out_a / "seed3.csv") == strip_elapsed(out_b / "seed3.csv")
        assert (out_a / "summary.csv").read_text() == (out_b / "summary.csv").read_text()

    def test_converges_on_easy_problem(self, tmp_path):
        out = tmp_path / "out"
        rc = main(["decompose", "--d", "2", "--iters", "2000", "--eta", "0.05",
                   "--noise", "0.5", "--record-every", "500", "--out", str(out)])
        assert rc == 0
        last = (out / "summary.csv").read_text().strip().split("\n")[-1]
        final_err = float(last.split(",")[3])
        assert final_err < 0.5


class TestIca:
    def test_outputs_and_default_stride(self, tmp_path):
        out = tmp_path / "out"
        rc = main(["ica", "--d", "3", "--iters", "300", "--eta", "0.05",
                   "--batch", "20", "--out", str(out)])
        assert rc == 0
        manifest = read_manifest(out)
        assert manifest["config"]["record_every"] == ICA_RECORD_EVERY
        assert manifest["outputs"] == ["seed0-constant.csv", "seed0-invt.csv", "summary.csv"]
        lines = (out / "summary.csv").read_text().strip().split("\n")
        assert lines[0] == ("seed,plateau_mean,plateau_range,final_error_constant,"
                            "final_error_invt,improved,diverged")
        seed, pm, pr, ec, ei, improved, diverged = lines[1].split(",")
        assert seed == "0"
        assert float(pm) > 0 and float(pr) >= 0
        assert improved in ("0", "1") and diverged == "0"

    def test_stride_flag_overrides_default(self, tmp_path):
        out = tmp_path / "out"
        main(["ica", "--d", "3", "--iters", "100", "--eta", "0.05", "--batch", "10",
              "--record-every", "25", "--out", str(out)])
        assert read_manifest(out)["config"]["record_every"] == 25
        trace = (out / "seed0-constant.csv").read_text().strip().split("\n")
        assert len(trace) == 1 + 5  # header + records at 0,25,50,75,100


class TestVerify:
    def test_passes_without_output_dir(self, tmp_path, monkeypatch, capsys):
        monkeypatch.chdir(tmp_path)
        rc = main(["verify", "--d", "3", "--seed", "7"])
        assert rc == 0
        assert not (tmp_path / "runs").exists()
        stdout = capsys.readouterr().out
        assert "checks passed" in stdout
        assert "FAIL" not in stdout

    def test_writes_report_when_asked(self, tmp_path):
        out = tmp_path / "out"
        rc = main(["verify", "--d", "3", "--seed", "7", "--out", str(out)])
        assert rc == 0
        report = (out / "verify_report.txt").read_text()
        assert report.count("PASS") == len(report.strip().split("\n"))
        assert read_manifest(out)["outputs"] == ["verify_report.txt"]

    def test_detects_injected_estimator_fault(self, tmp_path, monkeypatch, capsys):
        """A sign-flipped stochastic gradient must fail the battery."""
        true_grad = ica.ica_stochastic_gradient
        monkeypatch.setattr(ica, "ica_stochastic_gradient", lambda U, y: -true_grad(U, y))
        monkeypatch.chdir(tmp_path)
        rc = main(["verify", "--d", "3", "--seed", "7"])
        assert rc == 1
        assert "FAIL" in capsys.readouterr().out


class TestEscapeCommand:
    def test_escape_csv(self, tmp_path):
        out = tmp_path / "out"
        rc = main(["escape", "--d", "4", "--trials", "5", "--iters", "2000",
                   "--eta", "0.02", "--noise", "1", "--out", str(out)])
        assert rc == 0
        lines = (out / "escape.csv").read_text().strip().split("\n")
        assert lines[0] == "trial,steps,f_decrease"
        assert len(lines) == 6
        for row in lines[1:]:
            trial, steps, dec = row.split(",")
            assert int(steps) >= 1 or int(steps) == -1
            float(dec)
        assert read_manifest(out)["outputs"] == ["escape.csv"]

    def test_noise_free_runs_never_escape(self, tmp_path):
        out = tmp_path / "out"
        rc = main(["escape", "--d", "4", "--trials", "3", "--iters", "200",
                   "--eta", "0.02", "--noise", "0", "--out", str(out)])
        assert rc == 0
        rows = (out / "escape.csv").read_text().strip().split("\n")[1:]
        assert all(row.split(",")[1] == "-1" for row in rows)


class TestMinimaCommand:
    def test_minima_csv(self, tmp_path):
        out = tmp_path / "out"
        rc = main(["minima", "--d", "2", "--objective", "correlation", "--starts", "30",
                   "--iters", "800", "--eta", "0.05", "--noise", "0.5",
                   "--record-every", "800", "--out", str(out)])
        assert rc == 0
        lines = (out / "minima.csv").read_text().strip().split("\n")
        assert lines[0].startswith("min_eig,hits,w0")
        assert 1 <= len(lines) - 1 <= 8
        hits = sum(int(row.split(",")[1]) for row in lines[1:])
        assert hits <= 30

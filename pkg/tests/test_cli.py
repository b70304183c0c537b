import json
import subprocess
import sys

from hullreplay.cli import main

CONFIG = """
stream:
  generate: {num_timestamps: 3, train_per_batch: 6, test_per_batch: 3, latent_dim: 6, id_dims: 2}
policies: [{kind: lower}, {kind: er_rand, capacity: 2}]
id_dims: [0, 1]
seeds: [0]
"""


class TestCli:
    def test_gen_then_run(self, tmp_path, capsys):
        stream = tmp_path / "s.jsonl"
        assert main(["gen", "--out", str(stream), "--timestamps", "3", "--train", "6", "--test", "3", "--dim", "6", "--id-dims", "2"]) == 0
        assert stream.exists()
        out = tmp_path / "run"
        code = main(["run", "--stream", str(stream), "--policy", "er_hull", "--buffer-size", "2",
                     "--ransac-n", "20", "--seed", "1", "--out", str(out), "--id-dims", "0,1"])
        assert code == 0
        assert (out / "summary.csv").exists()
        assert "ER-Hull-2" in capsys.readouterr().out

    def test_compare(self, tmp_path):
        cfg = tmp_path / "c.yaml"
        cfg.write_text(CONFIG)
        assert main(["compare", str(cfg), "--out", str(tmp_path / "res")]) == 0
        assert (tmp_path / "res" / "curves.csv").exists()

    def test_error_record(self, tmp_path, capsys):
        bad = tmp_path / "bad.jsonl"
        bad.write_text("")
        assert main(["run", "--stream", str(bad), "--policy", "lower", "--out", str(tmp_path)]) != 0
        record = json.loads(capsys.readouterr().err.strip())
        assert record["error"] == "parse_error" and record["message"]

    def test_invalid_config_record(self, tmp_path, capsys):
        cfg = tmp_path / "c.yaml"
        cfg.write_text("policies: []\n")
        assert main(["compare", str(cfg)]) != 0
        assert json.loads(capsys.readouterr().err)["error"] == "validation_error"

    def test_oracle_subprocess(self):
        proc = subprocess.run(
            [sys.executable, "-m", "hullreplay", "oracle", "--hull-cases", "20", "--hull-er-cases", "5"],
            capture_output=True, text=True,
        )
        assert proc.returncode == 0, proc.stderr
        assert proc.stdout.count("[PASS]") == 2

    def test_missing_file_record(self, tmp_path, capsys):
        assert main(["compare", str(tmp_path / "nope.yaml")]) != 0
        assert json.loads(capsys.readouterr().err)["error"] == "io_error"

import json

import pytest
from click.testing import CliRunner

from cpad.cli import main


@pytest.fixture
def runner():
    return CliRunner()


class TestEncodeCommand:
    def test_prints_27_values(self, runner):
        r = runner.invoke(main, ["encode", "--iso", "400", "--shutter", "30", "--fnum", "2.0"])
        assert r.exit_code == 0, r.output
        values = json.loads(r.output)
        assert len(values) == 27
        assert all(0.0 <= v <= 1.0 for v in values)

    def test_endpoint_values(self, runner):
        r = runner.invoke(main, ["encode", "--iso", "50", "--shutter", "0.1", "--fnum", "1.0"])
        values = json.loads(r.output)
        assert values[0] == 0.0 and values[9] == 0.0 and values[18] == 0.0

    def test_device_path(self, runner):
        r = runner.invoke(main, ["encode", "--iso", "800", "--shutter", "100", "--device", "2"])
        assert r.exit_code == 0, r.output
        values = json.loads(r.output)
        # zero embedding rows squash to 0.5
        assert values[18:27] == [0.5] * 9

    def test_ranges_file(self, runner, tmp_path):
        ranges = tmp_path / "ranges.json"
        ranges.write_text(json.dumps({"iso": [100, 1600], "shutter": [1, 100], "fnum": [1, 8]}))
        r = runner.invoke(
            main,
            ["encode", "--iso", "1600", "--shutter", "100", "--fnum", "8", "--ranges", str(ranges)],
        )
        values = json.loads(r.output)
        assert values[0] == 1.0 and values[9] == 1.0 and values[18] == 1.0

    def test_conflicting_params_fail(self, runner):
        r = runner.invoke(main, ["encode", "--iso", "100", "--shutter", "30", "--fnum", "2", "--device", "0"])
        assert r.exit_code != 0


class TestSynthCommand:
    def test_writes_layout(self, runner, tmp_path):
        out = tmp_path / "data"
        r = runner.invoke(main, ["synth", "--n", "4", "--patch", "16", "--seed", "3", "--out", str(out)])
        assert r.exit_code == 0, r.output
        assert sorted(p.name for p in (out / "clean").iterdir()) == [f"{i:05d}.png" for i in range(4)]
        assert sorted(p.name for p in (out / "noisy").iterdir()) == [f"{i:05d}.png" for i in range(4)]
        lines = (out / "meta.jsonl").read_text().strip().split("\n")
        assert len(lines) == 4
        rec = json.loads(lines[0])
        assert {"index", "iso", "shutter_speed", "f_number", "lambda_read", "lambda_shot", "seed"} <= set(rec)

    def test_deterministic(self, runner, tmp_path):
        a, b = tmp_path / "a", tmp_path / "b"
        for out in (a, b):
            r = runner.invoke(main, ["synth", "--n", "2", "--patch", "16", "--seed", "9", "--out", str(out)])
            assert r.exit_code == 0
        for sub in ("clean", "noisy"):
            for i in range(2):
                pa = (a / sub / f"{i:05d}.png").read_bytes()
                pb = (b / sub / f"{i:05d}.png").read_bytes()
                assert pa == pb
        assert (a / "meta.jsonl").read_text() == (b / "meta.jsonl").read_text()


class TestTrainEvalSweepCommands:
    @pytest.fixture
    def data_dir(self, runner, tmp_path):
        out = tmp_path / "data"
        r = runner.invoke(main, ["synth", "--n", "12", "--patch", "16", "--seed", "5", "--out", str(out)])
        assert r.exit_code == 0
        return out

    def test_train_then_eval_then_sweep(self, runner, tmp_path, data_dir):
        cfg = tmp_path / "cfg.json"
        cfg.write_text(
            json.dumps(
                {
                    "preset": "desk",
                    "iters": 4,
                    "patch": 16,
                    "stride": 16,
                    "width": 4,
                    "enc_blocks": [1, 1, 1],
                    "bottom_blocks": 1,
                    "val_interval": 2,
                }
            )
        )
        ckpt_dir = tmp_path / "run"
        r = runner.invoke(
            main,
            ["train", "--config", str(cfg), "--data", str(data_dir), "--out", str(ckpt_dir)],
        )
        assert r.exit_code == 0, r.output
        ckpt = ckpt_dir / "checkpoint_final.cpad"
        assert ckpt.exists()
        assert (ckpt_dir / "metrics.jsonl").exists()
        assert (ckpt_dir / "loss_curve.png").exists()

        report = tmp_path / "report.json"
        r = runner.invoke(
            main, ["eval", "--ckpt", str(ckpt), "--data", str(data_dir), "--out", str(report)]
        )
        assert r.exit_code == 0, r.output
        body = json.loads(report.read_text())
        assert "aggregates" in body and "per_image" in body
        assert (tmp_path / "report.csv").exists()
        assert (tmp_path / "metrics_vs_iso.png").exists()

        img_path = data_dir / "noisy" / "00000.png"
        sweep_dir = tmp_path / "sweepout"
        r = runner.invoke(
            main,
            [
                "sweep",
                "--ckpt", str(ckpt),
                "--image", str(img_path),
                "--axis", "iso",
                "--grid", "100,1600",
                "--out", str(sweep_dir),
            ],
        )
        assert r.exit_code == 0, r.output
        assert (sweep_dir / "records.json").exists()
        assert (sweep_dir / "records.csv").exists()
        assert (sweep_dir / "sweep_metrics.png").exists()
        pngs = list(sweep_dir.glob("iso_*.png"))
        assert len(pngs) == 2
        records = json.loads((sweep_dir / "records.json").read_text())
        assert [rec["value"] for rec in records] == [100.0, 1600.0]

    def test_train_baseline_flag(self, runner, tmp_path, data_dir):
        cfg = tmp_path / "cfg.json"
        cfg.write_text(json.dumps({"iters": 2, "patch": 16, "stride": 16, "width": 4}))
        ckpt_dir = tmp_path / "base_run"
        r = runner.invoke(
            main,
            ["train", "--config", str(cfg), "--data", str(data_dir), "--out", str(ckpt_dir), "--baseline"],
        )
        assert r.exit_code == 0, r.output
        from cpad.net import load_checkpoint

        model, _ = load_checkpoint(ckpt_dir / "checkpoint_final.cpad")
        assert model.config.conditioned is False

    def test_unknown_config_field_rejected(self, runner, tmp_path, data_dir):
        cfg = tmp_path / "cfg.json"
        cfg.write_text(json.dumps({"iters": 2, "nonsense": 1}))
        r = runner.invoke(
            main, ["train", "--config", str(cfg), "--data", str(data_dir), "--out", str(tmp_path / "x")]
        )
        assert r.exit_code != 0
        assert "nonsense" in r.output


class TestGradcheckCommand:
    def test_runs_and_passes(self, runner):
        r = runner.invoke(main, ["gradcheck", "--net-sample", "2"])
        assert r.exit_code == 0, r.output
        assert "all" in r.output and "passed" in r.output

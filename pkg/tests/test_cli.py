import json

import pytest
from click.testing import CliRunner

from sparsetrack.cli import main


@pytest.fixture()
def runner():
    return CliRunner()


def simulate(runner, out_dir, kind="separated", frames=60, seed=0):
    res = runner.invoke(main, ["simulate", "--kind", kind, "--frames",
                               str(frames), "--seed", str(seed),
                               "--out", str(out_dir)])
    assert res.exit_code == 0, res.output
    return out_dir / "scans.jsonl", out_dir / "truth.jsonl"


class TestSimulate:
    def test_default_crossings_frame_count(self, runner, tmp_path):
        res = runner.invoke(main, ["simulate", "--kind", "crossings",
                                   "--out", str(tmp_path)])
        assert res.exit_code == 0
        n = sum(1 for _ in open(tmp_path / "scans.jsonl"))
        assert n == 1708

    def test_byte_identical_reruns(self, runner, tmp_path):
        a, b = tmp_path / "a", tmp_path / "b"
        for d in (a, b):
            res = runner.invoke(main, ["simulate", "--kind", "moderate",
                                       "--frames", "120", "--seed", "5",
                                       "--out", str(d)])
            assert res.exit_code == 0
        assert (a / "scans.jsonl").read_bytes() == (b / "scans.jsonl").read_bytes()
        assert (a / "truth.jsonl").read_bytes() == (b / "truth.jsonl").read_bytes()

    def test_invalid_kind_usage_error(self, runner, tmp_path):
        res = runner.invoke(main, ["simulate", "--kind", "swarm",
                                   "--out", str(tmp_path)])
        assert res.exit_code == 2


class TestDetect:
    def test_preset_with_report(self, runner, tmp_path):
        scans, truth = simulate(runner, tmp_path)
        out = tmp_path / "dets.jsonl"
        res = runner.invoke(main, ["detect", "--scans", str(scans),
                                   "--preset", "MR", "--truth", str(truth),
                                   "--out", str(out)])
        assert res.exit_code == 0, res.output
        report = json.loads((tmp_path / "dets.report.json").read_text())
        for key in ("tp", "fp", "fn", "precision", "recall", "f1",
                    "rmse", "det_pct"):
            assert key in report

    def test_empty_scan_file(self, runner, tmp_path):
        scans = tmp_path / "scans.jsonl"
        scans.write_text("")
        out = tmp_path / "dets.jsonl"
        res = runner.invoke(main, ["detect", "--scans", str(scans),
                                   "--preset", "O", "--out", str(out)])
        assert res.exit_code == 0
        assert out.read_text() == ""

    def test_permissive_preset_fp_ordering(self, runner, tmp_path):
        scans, truth = simulate(runner, tmp_path, frames=150, seed=2)
        fps = {}
        for preset in ("A", "B"):
            out = tmp_path / f"dets_{preset}.jsonl"
            res = runner.invoke(main, ["detect", "--scans", str(scans),
                                       "--preset", preset, "--truth",
                                       str(truth), "--out", str(out)])
            assert res.exit_code == 0, res.output
            fps[preset] = json.loads(
                (tmp_path / f"dets_{preset}.report.json").read_text())["fp"]
        assert fps["B"] >= fps["A"]

    def test_preset_and_config_mutually_exclusive(self, runner, tmp_path):
        scans, _ = simulate(runner, tmp_path)
        cfg = tmp_path / "cfg.json"
        cfg.write_text("{}")
        res = runner.invoke(main, ["detect", "--scans", str(scans),
                                   "--preset", "O", "--config", str(cfg),
                                   "--out", str(tmp_path / "o.jsonl")])
        assert res.exit_code == 2
        res = runner.invoke(main, ["detect", "--scans", str(scans),
                                   "--out", str(tmp_path / "o.jsonl")])
        assert res.exit_code == 2

    def test_missing_scan_file_data_error(self, runner, tmp_path):
        res = runner.invoke(main, ["detect", "--scans",
                                   str(tmp_path / "nope.jsonl"),
                                   "--preset", "O",
                                   "--out", str(tmp_path / "o.jsonl")])
        assert res.exit_code == 3

    def test_malformed_scan_file_data_error(self, runner, tmp_path):
        scans = tmp_path / "scans.jsonl"
        scans.write_text("this is not json\n")
        res = runner.invoke(main, ["detect", "--scans", str(scans),
                                   "--preset", "O",
                                   "--out", str(tmp_path / "o.jsonl")])
        assert res.exit_code == 3

    def test_config_file(self, runner, tmp_path):
        scans, _ = simulate(runner, tmp_path)
        cfg = tmp_path / "cfg.json"
        cfg.write_text(json.dumps({"eps0": 0.5, "min_pts": 1}))
        res = runner.invoke(main, ["detect", "--scans", str(scans),
                                   "--config", str(cfg),
                                   "--out", str(tmp_path / "o.jsonl")])
        assert res.exit_code == 0, res.output

    def test_invalid_config_data_error(self, runner, tmp_path):
        scans, _ = simulate(runner, tmp_path)
        cfg = tmp_path / "cfg.json"
        cfg.write_text(json.dumps({"eps0": -1.0}))
        res = runner.invoke(main, ["detect", "--scans", str(scans),
                                   "--config", str(cfg),
                                   "--out", str(tmp_path / "o.jsonl")])
        assert res.exit_code == 3


class TestTrack:
    def test_both_modes_share_gt_total(self, runner, tmp_path):
        scans, truth = simulate(runner, tmp_path, frames=200, seed=4)
        totals = {}
        for mode in ("hungarian", "jpda"):
            out = tmp_path / f"log_{mode}.jsonl"
            res = runner.invoke(main, ["track", "--scans", str(scans),
                                       "--preset", "B_s", "--truth",
                                       str(truth), "--association", mode,
                                       "--out", str(out)])
            assert res.exit_code == 0, res.output
            totals[mode] = json.loads(
                (tmp_path / f"log_{mode}.report.json").read_text())["gt_total"]
        assert totals["hungarian"] == totals["jpda"]

    def test_perfect_measurements_mota_one(self, runner, tmp_path):
        import numpy as np
        from sparsetrack import io as stio
        from sparsetrack.core import Measurement
        from sparsetrack.simulator import Scenario, gen_trajectories
        sc = Scenario(kind="separated", n_frames=120, seed=1)
        gt = gen_trajectories(sc)
        frames = [(float(gt.t[k]),
                   [Measurement(t=float(gt.t[k]), position=gt.positions[k, i],
                                support=2) for i in range(2)])
                  for k in range(sc.n_frames)]
        meas_path = tmp_path / "meas.jsonl"
        truth_path = tmp_path / "truth.jsonl"
        stio.write_measurement_frames(frames, meas_path)
        stio.write_ground_truth(gt, truth_path)
        out = tmp_path / "log.jsonl"
        res = runner.invoke(main, ["track", "--measurements", str(meas_path),
                                   "--truth", str(truth_path),
                                   "--out", str(out)])
        assert res.exit_code == 0, res.output
        report = json.loads(res.output.strip().splitlines()[-1])
        # tentative warm-up costs a few frames of FN; everything after is clean
        assert report["mota"] > 0.95
        assert report["id_switches"] == 0

    def test_track_deterministic(self, runner, tmp_path):
        scans, truth = simulate(runner, tmp_path, frames=150, seed=6)
        outs = []
        for name in ("l1.jsonl", "l2.jsonl"):
            out = tmp_path / name
            res = runner.invoke(main, ["track", "--scans", str(scans),
                                       "--preset", "B_s", "--truth",
                                       str(truth), "--out", str(out)])
            assert res.exit_code == 0, res.output
            outs.append(out.read_bytes())
        assert outs[0] == outs[1]

    def test_scans_xor_measurements(self, runner, tmp_path):
        scans, truth = simulate(runner, tmp_path)
        res = runner.invoke(main, ["track", "--truth", str(truth),
                                   "--out", str(tmp_path / "o.jsonl")])
        assert res.exit_code == 2

    def test_misaligned_truth_data_error(self, runner, tmp_path):
        scans, truth = simulate(runner, tmp_path, frames=60)
        _, truth_other = simulate(runner, tmp_path / "other", frames=50)
        res = runner.invoke(main, ["track", "--scans", str(scans),
                                   "--preset", "B_s",
                                   "--truth", str(truth_other),
                                   "--out", str(tmp_path / "o.jsonl")])
        assert res.exit_code == 3


class TestSweep:
    def test_grid_monotone(self, runner, tmp_path):
        scans, truth = simulate(runner, tmp_path, frames=150, seed=8)
        out = tmp_path / "sweep.json"
        res = runner.invoke(main, ["sweep", "--scans", str(scans),
                                   "--truth", str(truth), "--preset", "O",
                                   "--min-pts", "1,2,3,4",
                                   "--out", str(out)])
        assert res.exit_code == 0, res.output
        rows = json.loads(out.read_text())
        assert [r["min_pts"] for r in rows] == [1, 2, 3, 4]
        pcts = [r["det_pct"] for r in rows]
        assert all(a >= b for a, b in zip(pcts, pcts[1:]))

    def test_single_point_grid_matches_detect(self, runner, tmp_path):
        scans, truth = simulate(runner, tmp_path, frames=100, seed=9)
        out = tmp_path / "sweep.json"
        res = runner.invoke(main, ["sweep", "--scans", str(scans),
                                   "--truth", str(truth), "--preset", "O",
                                   "--min-pts", "2", "--out", str(out)])
        assert res.exit_code == 0, res.output
        row = json.loads(out.read_text())[0]
        det_out = tmp_path / "dets.jsonl"
        res = runner.invoke(main, ["detect", "--scans", str(scans),
                                   "--preset", "O", "--truth", str(truth),
                                   "--out", str(det_out)])
        assert res.exit_code == 0, res.output
        report = json.loads((tmp_path / "dets.report.json").read_text())
        for key in ("tp", "fp", "fn", "det_pct"):
            assert row[key] == report[key]

    def test_empty_grid_usage_error(self, runner, tmp_path):
        scans, truth = simulate(runner, tmp_path)
        res = runner.invoke(main, ["sweep", "--scans", str(scans),
                                   "--truth", str(truth), "--preset", "O",
                                   "--min-pts", ",",
                                   "--out", str(tmp_path / "s.json")])
        assert res.exit_code == 2


class TestEvaluate:
    def test_frame_log_evaluation_matches_track_report(self, runner, tmp_path):
        scans, truth = simulate(runner, tmp_path, frames=150, seed=10)
        log = tmp_path / "log.jsonl"
        res = runner.invoke(main, ["track", "--scans", str(scans),
                                   "--preset", "B_s", "--truth", str(truth),
                                   "--out", str(log)])
        assert res.exit_code == 0, res.output
        track_report = json.loads((tmp_path / "log.report.json").read_text())
        out = tmp_path / "eval.json"
        res = runner.invoke(main, ["evaluate", "--frame-log", str(log),
                                   "--truth", str(truth), "--out", str(out)])
        assert res.exit_code == 0, res.output
        assert json.loads(out.read_text()) == track_report

    def test_detections_evaluation(self, runner, tmp_path):
        scans, truth = simulate(runner, tmp_path, frames=100, seed=11)
        dets = tmp_path / "dets.jsonl"
        res = runner.invoke(main, ["detect", "--scans", str(scans),
                                   "--preset", "B_s", "--out", str(dets)])
        assert res.exit_code == 0, res.output
        out = tmp_path / "eval.json"
        res = runner.invoke(main, ["evaluate", "--detections", str(dets),
                                   "--truth", str(truth), "--out", str(out)])
        assert res.exit_code == 0, res.output
        report = json.loads(out.read_text())
        assert report["tp"] + report["fn"] > 0

    def test_exactly_one_input_required(self, runner, tmp_path):
        _, truth = simulate(runner, tmp_path)
        res = runner.invoke(main, ["evaluate", "--truth", str(truth),
                                   "--out", str(tmp_path / "e.json")])
        assert res.exit_code == 2

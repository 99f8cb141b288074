"""Extractor conformance: files parse in the scheduling toolkit and survive
the full calibrate -> plan -> run cycle through its CLI."""

import json
import subprocess
import sys

import numpy as np
import pytest

from trajextract import ExtractionConfig, ExtractionError, extract

from cacheplan import load_trajectory


def run_cacheplan(*argv):
    proc = subprocess.run(
        [sys.executable, "-m", "cacheplan.cli", *map(str, argv)],
        capture_output=True,
        text=True,
    )
    return proc.returncode, proc.stdout, proc.stderr


class TestContracts:
    def test_one_prompt_one_file_with_count_contract(self, tmp_path):
        paths = extract(
            ExtractionConfig(model="tiny-mlp", prompts=["a red cube"], total_steps=10,
                             out_dir=tmp_path)
        )
        assert len(paths) == 1
        traj, meta = load_trajectory(paths[0])
        assert traj.total_steps == 10
        assert traj.features.shape[0] == 11
        assert meta["model"] == "tiny-mlp" and meta["prompt"] == "a red cube"

    def test_sentinel_duplicates_last_feature(self, tmp_path):
        paths = extract(
            ExtractionConfig(model="tiny-unet", prompts=["x"], total_steps=8,
                             out_dir=tmp_path)
        )
        traj, _ = load_trajectory(paths[0])
        assert np.array_equal(traj.at(0), traj.at(1))

    def test_round_trip_through_primary_reader(self, tmp_path):
        paths = extract(
            ExtractionConfig(model="tiny-unet", prompts=["a", "b", "c"], total_steps=6,
                             out_dir=tmp_path)
        )
        assert len(paths) == 3
        for path in paths:
            traj, _ = load_trajectory(path)
            assert np.all(np.isfinite(traj.features))

    def test_fixed_seed_is_deterministic(self, tmp_path):
        a = extract(ExtractionConfig(model="tiny-mlp", prompts=["p"], total_steps=6,
                                     out_dir=tmp_path / "a", seed=3))
        b = extract(ExtractionConfig(model="tiny-mlp", prompts=["p"], total_steps=6,
                                     out_dir=tmp_path / "b", seed=3))
        assert a[0].read_bytes() == b[0].read_bytes()

    def test_pooling_caps_dimension(self, tmp_path):
        pooled = extract(ExtractionConfig(model="tiny-unet", prompts=["p"], total_steps=4,
                                          out_dir=tmp_path / "pooled", pool_cap=16))
        flat = extract(ExtractionConfig(model="tiny-unet", prompts=["p"], total_steps=4,
                                        out_dir=tmp_path / "flat", pool_cap=100000))
        assert load_trajectory(pooled[0])[0].dim == 4      # per-channel means
        assert load_trajectory(flat[0])[0].dim == 4 * 8 * 8

    def test_unknown_model_fails(self, tmp_path):
        with pytest.raises(ExtractionError, match="unknown model"):
            extract(ExtractionConfig(model="mega-unet", prompts=["p"], out_dir=tmp_path))

    def test_bad_hook_target_fails(self, tmp_path, monkeypatch):
        import dataclasses

        from trajextract import PIPELINES

        broken = dataclasses.replace(PIPELINES["tiny-mlp"], hook_target="no_such_layer")
        monkeypatch.setitem(PIPELINES, "tiny-mlp", broken)
        with pytest.raises(ExtractionError, match="hook target"):
            extract(ExtractionConfig(model="tiny-mlp", prompts=["p"], out_dir=tmp_path))


class TestCli:
    def test_extract_cli_and_full_primary_cycle(self, tmp_path):
        prompts = tmp_path / "prompts.txt"
        prompts.write_text("a photo of a dog\na photo of a cat\nan empty street\n")
        out_dir = tmp_path / "trajs"
        proc = subprocess.run(
            [sys.executable, "-m", "trajextract.cli", "extract", "--model", "tiny-mlp",
             "--prompts", str(prompts), "-T", "12", "--out", str(out_dir)],
            capture_output=True,
            text=True,
        )
        assert proc.returncode == 0, proc.stderr
        files = sorted(out_dir.glob("*.dptj"))
        assert len(files) == 3

        pact = tmp_path / "pact.dpct"
        rc, _, err = run_cacheplan("build-pact", "--traj-dir", out_dir, "-O", 2, "--out", pact)
        assert rc == 0, err
        sched = tmp_path / "sched.json"
        rc, _, err = run_cacheplan("plan", "--pact", pact, "-K", 5, "-M", 3,
                                   "--solver", "exact", "--out", sched)
        assert rc == 0, err
        produced = tmp_path / "run.dptj"
        rc, _, err = run_cacheplan("run", "--traj", files[0], "--schedule", sched,
                                   "-O", 2, "--out", produced)
        assert rc == 0, err
        sidecar = json.loads((tmp_path / "run.dptj.json").read_text())
        assert sidecar["invocation_count"] == 5
        report = tmp_path / "report.json"
        rc, _, err = run_cacheplan("eval", "--traj", files[0], "--schedule", sched,
                                   "--pact", pact, "--out", report)
        assert rc == 0, err
        assert json.loads(report.read_text())["invocation_ratio"] == 12 / 5

    def test_missing_prompts_file_is_error(self, tmp_path):
        proc = subprocess.run(
            [sys.executable, "-m", "trajextract.cli", "extract", "--model", "tiny-mlp",
             "--prompts", str(tmp_path / "nope.txt"), "--out", str(tmp_path)],
            capture_output=True,
            text=True,
        )
        assert proc.returncode != 0

import json
from pathlib import Path

import pytest

from anthroscan.cli import run
from anthroscan.evaluation import make_synthetic_manifest, save_manifest


def _run(capsys, *argv):
    code = run(list(argv))
    out = capsys.readouterr()
    return code, out.out, out.err


@pytest.fixture()
def manifest_path(tmp_path):
    records = make_synthetic_manifest(30, seed=21)
    path = tmp_path / "manifest.jsonl"
    save_manifest(records, path)
    return path


class TestUsage:
    def test_no_arguments_is_usage_error(self, capsys):
        code, _, err = _run(capsys)
        assert code == 2
        assert "usage" in err.lower()

    def test_unknown_flag_is_usage_error(self, capsys):
        code, _, err = _run(capsys, "estimate", "--nonsense")
        assert code == 2

    def test_unknown_subcommand(self, capsys):
        code, _, _ = _run(capsys, "frobnicate")
        assert code == 2


class TestEstimate:
    def test_prints_golden_response(self, capsys, fixtures_dir, tmp_path):
        code, out, _ = _run(capsys, "estimate",
                            "--image", str(fixtures_dir / "person_00.png"),
                            "--age", "25", "--gender", "male",
                            "--config", str(fixtures_dir / "config.json"),
                            "--out-dir", str(tmp_path / "a"))
        assert code == 0
        golden = (fixtures_dir / "golden_response.json").read_bytes()
        assert out.strip().encode() == golden
        assert (tmp_path / "a" / "response.json").read_bytes() == golden
        manifest = json.loads((tmp_path / "a" / "run-manifest.json").read_text())
        assert manifest["command"] == "estimate"
        assert "image" in manifest["inputs"]

    def test_byte_identical_across_runs(self, capsys, fixtures_dir, tmp_path):
        args = ["estimate", "--image", str(fixtures_dir / "person_03.png"),
                "--age", "33", "--gender", "female",
                "--config", str(fixtures_dir / "config.json")]
        code1, _, _ = _run(capsys, *args, "--out-dir", str(tmp_path / "r1"))
        code2, _, _ = _run(capsys, *args, "--out-dir", str(tmp_path / "r2"))
        assert code1 == code2 == 0
        assert ((tmp_path / "r1" / "response.json").read_bytes()
                == (tmp_path / "r2" / "response.json").read_bytes())

    def test_missing_image_is_data_error(self, capsys, fixtures_dir, tmp_path):
        code, _, err = _run(capsys, "estimate", "--image", "/nope/missing.png",
                            "--age", "25", "--gender", "male",
                            "--config", str(fixtures_dir / "config.json"),
                            "--out-dir", str(tmp_path / "x"))
        assert code == 3

    def test_bad_gender_is_validation_error(self, capsys, fixtures_dir, tmp_path):
        code, _, err = _run(capsys, "estimate",
                            "--image", str(fixtures_dir / "person_00.png"),
                            "--age", "25", "--gender", "alien",
                            "--config", str(fixtures_dir / "config.json"),
                            "--out-dir", str(tmp_path / "x"))
        assert code == 2
        assert "validation" in err


class TestPreprocessHeightReconstructEmbed:
    def test_preprocess_outputs(self, capsys, fixtures_dir, tmp_path):
        code, out, _ = _run(capsys, "preprocess",
                            "--image", str(fixtures_dir / "person_01.png"),
                            "--out-dir", str(tmp_path / "p"))
        assert code == 0
        assert (tmp_path / "p" / "face.png").exists()
        assert (tmp_path / "p" / "body.png").exists()
        stats = json.loads(out)
        assert stats["mask_pixels"] > 0

    def test_height_calibrate_then_estimate(self, capsys, fixtures_dir, tmp_path):
        calib = tmp_path / "cal.json"
        code, out, _ = _run(capsys, "height",
                            "--image", str(fixtures_dir / "person_00.png"),
                            "--calibration", str(calib),
                            "--calibrate-height-cm", "172.0",
                            "--out-dir", str(tmp_path / "h1"))
        assert code == 0
        assert calib.exists()
        code, out, _ = _run(capsys, "height",
                            "--image", str(fixtures_dir / "person_00.png"),
                            "--calibration", str(calib),
                            "--out-dir", str(tmp_path / "h2"))
        assert code == 0
        result = json.loads(out)
        assert result["height_cm"] == pytest.approx(172.0, abs=1e-6)

    def test_reconstruct_writes_mesh_and_cloud(self, capsys, fixtures_dir, tmp_path):
        code, out, _ = _run(capsys, "reconstruct",
                            "--image", str(fixtures_dir / "person_02.png"),
                            "--points", "512",
                            "--out-dir", str(tmp_path / "r"))
        assert code == 0
        from anthroscan.mesh import load_mesh, load_point_cloud
        mesh = load_mesh(tmp_path / "r" / "mesh.off")
        cloud = load_point_cloud(tmp_path / "r" / "cloud.xyz")
        assert mesh.is_watertight()
        assert len(cloud) == 512

    def test_embed_all_modalities(self, capsys, fixtures_dir, tmp_path):
        import numpy as np
        for modality in ("face", "body", "cloud"):
            code, out, _ = _run(capsys, "embed",
                                "--image", str(fixtures_dir / "person_02.png"),
                                "--modality", modality,
                                "--out-dir", str(tmp_path / modality))
            assert code == 0
            vec = np.loadtxt(tmp_path / modality / "embedding.txt")
            assert vec.shape == (512,)

    def test_blank_image_no_subject_exit_code(self, capsys, tmp_path, blank_image):
        from anthroscan.images import save_image
        path = tmp_path / "blank.png"
        save_image(blank_image, path)
        code, _, err = _run(capsys, "preprocess", "--image", str(path),
                            "--out-dir", str(tmp_path / "o"))
        assert code == 3
        assert "segmentation" in err


class TestTrainEvaluate:
    def test_train_then_evaluate(self, capsys, manifest_path, tmp_path):
        code, out, _ = _run(capsys, "train", "--manifest", str(manifest_path),
                            "--epochs", "8", "--seed", "3",
                            "--out-dir", str(tmp_path / "t"))
        assert code == 0
        params_path = tmp_path / "t" / "params.bin"
        assert params_path.exists()
        assert (tmp_path / "t" / "training-log.jsonl").exists()

        code, out, _ = _run(capsys, "evaluate", "--manifest", str(manifest_path),
                            "--params", str(params_path), "--split", "test",
                            "--out-dir", str(tmp_path / "e"))
        assert code == 0
        header = out.splitlines()[0]
        for col in ("mae", "rmse", "r2"):
            assert col in header.split(",")

    def test_train_deterministic_artifacts(self, capsys, manifest_path, tmp_path):
        for d in ("t1", "t2"):
            code, _, _ = _run(capsys, "train", "--manifest", str(manifest_path),
                              "--epochs", "4", "--seed", "9",
                              "--out-dir", str(tmp_path / d))
            assert code == 0
        assert ((tmp_path / "t1" / "params.bin").read_bytes()
                == (tmp_path / "t2" / "params.bin").read_bytes())
        assert ((tmp_path / "t1" / "training-log.jsonl").read_bytes()
                == (tmp_path / "t2" / "training-log.jsonl").read_bytes())

    def test_evaluate_group_by_device(self, capsys, tmp_path):
        # every device needs >= 2 varied test records for a defined r2
        from anthroscan.evaluation import SubjectRecord
        records = []
        for i in range(24):
            records.append(SubjectRecord(
                record_id=f"g{i}", gender="male" if i % 2 else "female",
                age_years=30.0, true_weight_kg=50.0 + 2 * i,
                true_height_cm=160.0 + i,
                split="train" if i < 12 else "test",
                device_tag=("phone-a", "phone-b", "laptop")[i % 3]))
        path = tmp_path / "grouped.jsonl"
        save_manifest(records, path)
        code, _, _ = _run(capsys, "train", "--manifest", str(path),
                          "--epochs", "4", "--out-dir", str(tmp_path / "t"))
        assert code == 0
        code, out, _ = _run(capsys, "evaluate", "--manifest", str(path),
                            "--params", str(tmp_path / "t" / "params.bin"),
                            "--split", "test", "--group-by", "device_tag",
                            "--out-dir", str(tmp_path / "g"))
        assert code == 0
        assert "label_device_tag" in out.splitlines()[0]
        assert len(out.strip().splitlines()) == 4

    def test_evaluate_with_height_metrics(self, capsys, fixtures_dir, tmp_path):
        code, _, _ = _run(capsys, "train",
                          "--manifest", str(fixtures_dir / "manifest.jsonl"),
                          "--epochs", "4", "--out-dir", str(tmp_path / "t"))
        assert code == 0
        code, out, _ = _run(capsys, "evaluate",
                            "--manifest", str(fixtures_dir / "manifest.jsonl"),
                            "--params", str(tmp_path / "t" / "params.bin"),
                            "--split", "test",
                            "--calibration", str(fixtures_dir / "calibration.json"),
                            "--image-root", str(fixtures_dir),
                            "--out-dir", str(tmp_path / "e"))
        assert code == 0
        header = out.splitlines()[0].split(",")
        assert "height_mae" in header and "height_r2" in header
        row = dict(zip(header, out.splitlines()[1].split(",")))
        assert float(row["height_mae"]) < 1.0  # ppm path is near-exact on fixtures

    def test_corrupt_params_is_data_error(self, capsys, manifest_path, tmp_path):
        bad = tmp_path / "bad.bin"
        bad.write_bytes(b"garbage")
        code, _, err = _run(capsys, "evaluate", "--manifest", str(manifest_path),
                            "--params", str(bad), "--out-dir", str(tmp_path / "e"))
        assert code == 3


class TestExperiments:
    def test_ablate_masks(self, capsys, manifest_path, tmp_path):
        code, out, _ = _run(capsys, "ablate", "--manifest", str(manifest_path),
                            "--masks", "FF,BF,ALL", "--epochs", "3",
                            "--out-dir", str(tmp_path / "a"))
        assert code == 0
        lines = out.strip().splitlines()
        assert len(lines) == 4  # header + 3 masks
        assert (tmp_path / "a" / "ablation.csv").exists()

    def test_lighting_sweep_csv(self, capsys, tmp_path, fixtures_dir):
        # manifest pointing at fixture images
        from anthroscan.evaluation import load_manifest
        code, _, _ = _run(capsys, "train",
                          "--manifest", str(fixtures_dir / "manifest.jsonl"),
                          "--epochs", "6", "--out-dir", str(tmp_path / "t"))
        assert code == 0
        code, out, _ = _run(capsys, "lighting-sweep",
                            "--manifest", str(fixtures_dir / "manifest.jsonl"),
                            "--params", str(tmp_path / "t" / "params.bin"),
                            "--split", "test", "--gammas", "0.5,1.0,2.0",
                            "--image-root", str(fixtures_dir),
                            "--out-dir", str(tmp_path / "l"))
        assert code == 0
        lines = out.strip().splitlines()
        assert lines[0] == "gamma,mae,rmse,r2"
        assert len(lines) == 4

    def test_plot_data_correlation(self, capsys, tmp_path, manifest_path):
        code, _, _ = _run(capsys, "train", "--manifest", str(manifest_path),
                          "--epochs", "3", "--out-dir", str(tmp_path / "t"))
        assert code == 0
        code, out, _ = _run(capsys, "plot-data", "--kind", "correlation",
                            "--manifest", str(manifest_path),
                            "--params", str(tmp_path / "t" / "params.bin"),
                            "--masks", "FF,ALL",
                            "--out-dir", str(tmp_path / "pd"))
        assert code == 0
        pairs = (tmp_path / "pd" / "correlation-FF.csv").read_text().splitlines()
        assert pairs[0] == "record_id,true_weight_kg,pred_weight_kg"
        assert len(pairs) > 1

    def test_run_manifest_written_for_every_command(self, capsys, manifest_path, tmp_path):
        code, _, _ = _run(capsys, "train", "--manifest", str(manifest_path),
                          "--epochs", "2", "--out-dir", str(tmp_path / "t"))
        assert code == 0
        manifest = json.loads((tmp_path / "t" / "run-manifest.json").read_text())
        assert manifest["package_version"]
        assert manifest["seed"] == 0
        assert manifest["outputs"] == ["params.bin", "training-log.jsonl"]

"""Deterministic desk-scale fixture generation.

Renders synthetic "person" images (blob figures on black), derives a
coherent world model (true heights, weights tied to silhouette width),
calibrates ppm from the first subject, trains fusion params on the
pipeline's own serve-time features, and writes everything a demo or test
needs: images, sidecar annotations, manifest, calibration registry,
params, config and a golden response.
"""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np

from . import __version__, fusion
from .config import PipelineConfig
from .detectors import MaskGeometryDetector
from .embeddings import ExtractorDescriptor, ImageStatsExtractor
from .evaluation import SubjectRecord, save_manifest
from .geometry import align_face, crop_mask, tight_crop
from .height import CalibrationRegistry, calibrate_ppm
from .images import RgbImage, save_image
from .mesh import EllipsoidReconstructor, normalize_point_cloud, sample_point_cloud
from .pipeline import Pipeline, canonical_json_bytes

CANVAS_W, CANVAS_H = 360, 480
TRUE_PPM = 2.4  # world camera geometry: pixels per centimetre

# (true_height_cm, bmi, shirt_brightness) per synthetic subject
SUBJECT_TABLE = [
    (172.0, 23.0, 150), (158.0, 17.2, 120), (181.0, 27.5, 180),
    (165.0, 21.0, 140), (176.0, 30.5, 200), (152.0, 16.4, 110),
    (169.0, 24.5, 160), (187.0, 22.0, 130), (161.0, 19.5, 170),
    (174.0, 26.0, 190), (155.0, 18.0, 125), (183.0, 25.0, 145),
    (167.0, 17.8, 135), (179.0, 28.5, 175),
]


def render_person(height_px: int, torso_half_w: int, shirt: int = 150,
                  canvas=(CANVAS_H, CANVAS_W)) -> RgbImage:
    """Blob figure: circle head, rectangle torso/arms/legs, black background."""
    h, w = canvas
    px = np.zeros((h, w, 3), dtype=np.uint8)
    cx = w // 2
    y_feet = h - 20
    y_top = y_feet - height_px + 1
    head_r = max(height_px // 14, 4)
    skin = (224, 180, 150)
    pants = (60, 70, max(130, shirt - 40))

    yy, xx = np.mgrid[0:h, 0:w]
    head_cy = y_top + head_r
    px[(yy - head_cy) ** 2 + (xx - cx) ** 2 <= head_r ** 2] = skin

    torso_top = y_top + 2 * head_r
    torso_bot = y_top + int(height_px * 0.55)
    px[torso_top:torso_bot, cx - torso_half_w:cx + torso_half_w] = (90, 120, shirt)
    arm_w = max(torso_half_w // 3, 3)
    arm_bot = y_top + int(height_px * 0.48)
    px[torso_top:arm_bot, cx - torso_half_w - arm_w:cx - torso_half_w] = (90, 120, shirt)
    px[torso_top:arm_bot, cx + torso_half_w:cx + torso_half_w + arm_w] = (90, 120, shirt)

    leg_w = max(int(torso_half_w * 0.6), 3)
    gap = max(torso_half_w // 4, 2)
    px[torso_bot:y_feet + 1, cx - gap - leg_w:cx - gap] = pants
    px[torso_bot:y_feet + 1, cx + gap:cx + gap + leg_w] = pants
    return RgbImage(px)


def subject_image(height_cm: float, bmi: float, shirt: int) -> RgbImage:
    height_px = int(round(height_cm * TRUE_PPM))
    torso_half_w = int(round(height_px * (0.050 + 0.0032 * bmi)))
    return render_person(height_px, torso_half_w, shirt)


def serve_features(image: RgbImage, config: PipelineConfig) -> fusion.SubjectFeatures:
    """SubjectFeatures exactly as the serving pipeline computes them."""
    detector = MaskGeometryDetector(config.mask_threshold)
    mask = detector.subject_mask(image)
    landmarks = detector.face_landmarks(image, mask)
    face = align_face(image, landmarks, out_size=config.align_size)
    body = tight_crop(image, mask, margin=config.body_margin)
    mesh = EllipsoidReconstructor(config.mask_threshold).reconstruct(image, mask)
    cloud = normalize_point_cloud(sample_point_cloud(mesh, config.cloud_points,
                                                     config.cloud_seed))
    extract = {
        m: ImageStatsExtractor(ExtractorDescriptor(m, "synthetic-image-stats"),
                               config.provider_seed)
        for m in ("face", "body", "cloud")
    }
    return fusion.SubjectFeatures(
        extract["face"].extract(face), extract["body"].extract(body),
        extract["cloud"].extract(cloud), "male", 170.0, 30.0)


def make_fixture_set(out_dir, train_epochs: int = 400) -> dict:
    """Generate the full committed fixture set; returns a summary dict."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    config = PipelineConfig(base_dir=out, params_path="params.bin",
                            calibration_path="calibration.json")

    records = []
    datasets = []
    for i, (height_cm, bmi, shirt) in enumerate(SUBJECT_TABLE):
        image = subject_image(height_cm, bmi, shirt)
        name = f"person_{i:02d}.png"
        save_image(image, out / name)
        weight = bmi * (height_cm / 100.0) ** 2
        gender = "male" if i % 2 == 0 else "female"
        base = serve_features(image, config)
        features = fusion.SubjectFeatures(base.z_face, base.z_body, base.z_cloud,
                                          gender, height_cm, 20.0 + (i * 3) % 40)
        datasets.append((features, weight))
        records.append(SubjectRecord(
            record_id=f"fixture-{i:02d}", gender=gender,
            age_years=20.0 + (i * 3) % 40, true_weight_kg=weight,
            true_height_cm=height_cm, image_path=name,
            subject_id=f"subject-{i:02d}",
            split="train" if i < 10 else "test",
            device_tag=("phone-a", "phone-b", "laptop")[i % 3],
            pose_tag="frontal"))
    save_manifest(records, out / "manifest.jsonl")

    # ppm calibration from subject 0's mask crop and known height.
    image0 = subject_image(*SUBJECT_TABLE[0])
    detector = MaskGeometryDetector(config.mask_threshold)
    mask0 = crop_mask(detector.subject_mask(image0))
    registry = CalibrationRegistry()
    registry.register(calibrate_ppm(mask0, SUBJECT_TABLE[0][0], device_id="default"))
    registry.register(calibrate_ppm(mask0, SUBJECT_TABLE[0][0], device_id="phone-a"))
    registry.save(out / "calibration.json")

    train_config = fusion.TrainingConfig(learning_rate=3e-3, epochs=train_epochs,
                                         batch_size=8, ridge_lambda=1e-3, seed=11)
    params, log = fusion.fit(datasets[:10], train_config)
    fusion.save_params_file(params, out / "params.bin")
    (out / "training-log.jsonl").write_text(log.to_jsonl())

    (out / "config.json").write_text(json.dumps({
        "params_path": "params.bin",
        "calibration_path": "calibration.json",
        "store_dir": "store",
    }, indent=2, sort_keys=True) + "\n")

    # Sidecar annotations for subject 0, from the detector itself.
    landmarks = detector.face_landmarks(image0)
    keypoints = detector.body_keypoints(image0)
    lm_lines = [f"{i} {p[0]:.3f} {p[1]:.3f} 1.0" for i, p in enumerate(landmarks.points)]
    (out / "person_00.landmarks.txt").write_text("\n".join(lm_lines) + "\n")
    kp_lines = [f"{i} {p[0]:.3f} {p[1]:.3f} {c:.2f}"
                for i, (p, c) in enumerate(zip(keypoints.points, keypoints.confidence))]
    (out / "person_00.keypoints.txt").write_text("\n".join(kp_lines) + "\n")

    # Golden embedding vectors for subject 0, one flat text file per
    # modality, tagged with the producing descriptor digest.
    emb_dir = out / "embeddings"
    emb_dir.mkdir(exist_ok=True)
    golden_features = serve_features(subject_image(*SUBJECT_TABLE[0]), config)
    for modality, vector in (("face", golden_features.z_face),
                             ("body", golden_features.z_body),
                             ("cloud", golden_features.z_cloud)):
        digest = ExtractorDescriptor(modality, "synthetic-image-stats").digest
        header = f"descriptor_digest: {digest}"
        np.savetxt(emb_dir / f"person_00.{modality}.txt", vector.values,
                   fmt="%.17g", header=header)

    pipeline = Pipeline.from_config(PipelineConfig.from_file(out / "config.json"))
    golden = pipeline.estimate((out / "person_00.png").read_bytes(), 25.0, "male")
    (out / "golden_response.json").write_bytes(canonical_json_bytes(golden))

    final = [r for r in log.records if "train_mae" in r][-1]
    test_preds = [fusion.predict_weight(f, params) for f, _ in datasets[10:]]
    test_true = [t for _, t in datasets[10:]]
    test_mae = float(np.mean(np.abs(np.array(test_preds) - np.array(test_true))))
    return {
        "subjects": len(SUBJECT_TABLE),
        "train_mae": final["train_mae"],
        "test_mae": test_mae,
        "golden_weight_kg": golden["weight_kg"],
        "golden_height_cm": golden["height_cm"],
        "package_version": __version__,
    }

"""Full single-image estimation pipeline, shared by the CLI and the service.

Stages: decode -> segment -> face alignment -> crops -> height ->
reconstruct -> sample -> embed x3 -> fuse/regress -> health metrics.
Every stage failure carries the stage name; responses are canonical JSON
so identical inputs always produce byte-identical output.
"""

from __future__ import annotations

import hashlib
import json

import numpy as np

from . import __version__
from .config import PipelineConfig
from .detectors import MaskGeometryDetector
from .embeddings import ExtractorDescriptor, ImageStatsExtractor
from .errors import ConfigurationError, ParameterError
from .fusion import (FusionModelParams, assemble_input, forward, fuse,
                     gender_one_hot, load_params_file, params_digest)
from .geometry import align_face, crop_mask, tight_crop
from .health import ACTIVITY_FACTORS, build_health_report
from .height import CalibrationRegistry, estimate_height
from .images import RgbImage, load_image
from .mesh import EllipsoidReconstructor, normalize_point_cloud, sample_point_cloud

EXTRACTOR_PROVIDERS = {
    "synthetic-image-stats": lambda modality, seed: ImageStatsExtractor(
        ExtractorDescriptor(modality, "synthetic-image-stats"), seed),
}

DETECTOR_PROVIDERS = {
    "mask-geometry": lambda cfg: MaskGeometryDetector(cfg.mask_threshold),
}

RECONSTRUCTOR_PROVIDERS = {
    "synthetic-ellipsoid": lambda cfg: EllipsoidReconstructor(cfg.mask_threshold),
}


def canonical_json(obj) -> str:
    """Stable serialization: sorted keys, compact separators."""
    return json.dumps(obj, sort_keys=True, separators=(",", ":"), ensure_ascii=False)


def canonical_json_bytes(obj) -> bytes:
    return canonical_json(obj).encode("utf-8")


def _round6(value: float) -> float:
    return round(float(value), 6)


class Pipeline:
    """Loaded, immutable pipeline state; estimate() is safe to call concurrently."""

    def __init__(self, config: PipelineConfig, params: FusionModelParams,
                 calibrations: CalibrationRegistry):
        self.config = config
        self.params = params
        self.calibrations = calibrations
        self.params_digest = params_digest(params)

        def pick(registry, name, kind):
            if name not in registry:
                raise ConfigurationError(f"unknown {kind} provider {name!r}")
            return registry[name]

        self.detector = pick(DETECTOR_PROVIDERS, config.providers["detector"],
                             "detector")(config)
        self.reconstructor = pick(RECONSTRUCTOR_PROVIDERS,
                                  config.providers["reconstructor"],
                                  "reconstructor")(config)
        self.extractors = {
            m: pick(EXTRACTOR_PROVIDERS, config.providers[m], "extractor")(
                m, config.provider_seed)
            for m in ("face", "body", "cloud")
        }

    @classmethod
    def from_config(cls, config: PipelineConfig) -> "Pipeline":
        if not config.params_path:
            raise ConfigurationError("config has no params_path; train a model first")
        params = load_params_file(config.resolve(config.params_path))
        if config.calibration_path:
            calibrations = CalibrationRegistry.load(config.resolve(config.calibration_path))
        else:
            raise ConfigurationError("config has no calibration_path")
        return cls(config, params, calibrations)

    def provider_digests(self) -> dict:
        return {m: self.extractors[m].descriptor.digest for m in ("face", "body", "cloud")}

    def estimate(self, image, age_years: float, gender: str,
                 device_id: str | None = None) -> dict:
        """Run the full pipeline and return the response payload."""
        if isinstance(image, (bytes, bytearray)):
            image = load_image(bytes(image))  # stage "decode" on failure
        if not isinstance(image, RgbImage):
            raise ParameterError("image must be raw bytes or an RgbImage", stage="decode")
        if not np.isfinite(age_years) or age_years <= 0:
            raise ParameterError(f"age must be positive, got {age_years}")
        gender_one_hot(gender)

        mask = self.detector.subject_mask(image)
        landmarks = self.detector.face_landmarks(image, mask)
        face_crop = align_face(image, landmarks, out_size=self.config.align_size)
        body_crop = tight_crop(image, mask, margin=self.config.body_margin)
        subject_mask_crop = crop_mask(mask, margin=0)

        calibration = self.calibrations.get_or_default(device_id,
                                                       self.config.default_device)
        height_cm = estimate_height(subject_mask_crop, calibration)

        mesh = self.reconstructor.reconstruct(image, mask)
        cloud = normalize_point_cloud(sample_point_cloud(
            mesh, self.config.cloud_points, self.config.cloud_seed))

        z_face = self.extractors["face"].extract(face_crop)
        z_body = self.extractors["body"].extract(body_crop)
        z_cloud = self.extractors["cloud"].extract(cloud)

        fused = fuse(z_face, z_body, z_cloud, self.params)
        weight_kg = forward(assemble_input(fused, gender, height_cm), self.params)
        report = build_health_report(max(weight_kg, 1.0), height_cm, age_years, gender)

        request_fields = {
            "image_digest": hashlib.sha256(image.pixels.tobytes()).hexdigest(),
            "age_years": _round6(age_years),
            "gender": gender,
            "device_id": device_id or self.config.default_device,
        }
        record_id = hashlib.sha256(canonical_json_bytes(
            {**request_fields, "params": self.params_digest,
             "version": __version__})).hexdigest()[:16]
        return {
            "record_id": record_id,
            "height_cm": _round6(height_cm),
            "weight_kg": _round6(weight_kg),
            "health": {
                "bmi": _round6(report.bmi),
                "bmr": _round6(report.bmr),
                "active_bmr": _round6(report.active_bmr),
                "bfp": _round6(report.bfp),
                "ideal_weight_kg": _round6(report.ideal_weight_kg),
                "classification": report.classification,
                "obesity_flag": report.obesity_flag,
            },
            "age_years": _round6(age_years),
            "gender": gender,
            "device_id": device_id or self.config.default_device,
            "pipeline_version": __version__,
            "params_digest": self.params_digest,
            "provider_digests": self.provider_digests(),
        }

    def plan_for_response(self, response: dict, diet_type: str, weeks: int,
                          activity_level: str = "sedentary") -> dict:
        """Nutrition plan derived from a stored estimate response."""
        if activity_level not in ACTIVITY_FACTORS:
            raise ParameterError(
                f"activity_level must be one of {sorted(ACTIVITY_FACTORS)}")
        from .health import HealthReport, nutrition_plan
        h = response["health"]
        report = HealthReport(h["bmi"], h["bmr"], h["active_bmr"], h["bfp"],
                              h["ideal_weight_kg"], h["classification"],
                              h.get("obesity_flag", False))
        plan = nutrition_plan(report, response["weight_kg"], diet_type, weeks,
                              activity_level)
        payload = plan.to_dict()
        payload["record_id"] = response["record_id"]
        payload["activity_level"] = activity_level
        payload["daily_calorie_target"] = _round6(payload["daily_calorie_target"])
        payload["weekly_weights_kg"] = [_round6(w) for w in payload["weekly_weights_kg"]]
        return payload

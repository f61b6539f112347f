"""Dataset ingestion, metrics, and the experiment battery.

Manifests are line-delimited JSON, one subject record per line. The
experiment battery mirrors the production protocol at desk scale:
architecture-combination sweeps, pairwise feature-mask combinations,
lighting sweeps through a gamma-degradation knob, grouped device
evaluation, and held-out malnutrition classification.
"""

from __future__ import annotations

import json
import logging
import math
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from . import fusion, health
from .embeddings import (EMBEDDING_DIM, EmbeddingVector, RecordSignalExtractor,
                         SignalEncoding, SYNTHETIC_PROFILES, WEIGHT_SCALE,
                         profile_descriptor, synthetic_embed)
from .errors import ConfigurationError, DataError, IngestionError, ParameterError
from .images import apply_gamma, load_image

log = logging.getLogger(__name__)

MANIFEST_SCHEMA_VERSION = 1
SPLITS = ("train", "val", "test", "heldout")

# Feature-mask shorthand: FF facial, BF body, DF 3-D features.
FEATURE_MASKS = {
    "FF": (True, False, False),
    "BF": (False, True, False),
    "DF": (False, False, True),
    "FF+BF": (True, True, False),
    "FF+DF": (True, False, True),
    "BF+DF": (False, True, True),
    "ALL": (True, True, True),
}


@dataclass(frozen=True)
class SubjectRecord:
    record_id: str
    gender: str
    age_years: float
    true_weight_kg: float
    true_height_cm: float | None = None
    image_path: str = ""
    subject_id: str = ""
    split: str = "train"
    device_tag: str = ""
    pose_tag: str = ""

    def __post_init__(self):
        if self.gender not in ("male", "female"):
            raise IngestionError(f"record {self.record_id}: bad gender {self.gender!r}")
        if self.split not in SPLITS:
            raise IngestionError(f"record {self.record_id}: bad split {self.split!r}")
        if not (math.isfinite(self.age_years) and self.age_years > 0):
            raise IngestionError(f"record {self.record_id}: age must be positive")
        if not (math.isfinite(self.true_weight_kg) and self.true_weight_kg > 0):
            raise IngestionError(f"record {self.record_id}: weight must be positive")
        if self.true_height_cm is not None and not (
                math.isfinite(self.true_height_cm) and self.true_height_cm > 0):
            raise IngestionError(f"record {self.record_id}: height must be positive")

    def to_dict(self) -> dict:
        return {
            "schema_version": MANIFEST_SCHEMA_VERSION,
            "record_id": self.record_id,
            "gender": self.gender,
            "age_years": self.age_years,
            "true_weight_kg": self.true_weight_kg,
            "true_height_cm": self.true_height_cm,
            "image_path": self.image_path,
            "subject_id": self.subject_id,
            "split": self.split,
            "device_tag": self.device_tag,
            "pose_tag": self.pose_tag,
        }


def load_manifest(path) -> list:
    """Parse and validate a JSONL manifest; duplicate record_ids are rejected."""
    records = []
    seen = set()
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise IngestionError(f"cannot read manifest {path}: {exc}") from exc
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line:
            continue
        try:
            obj = json.loads(line)
        except json.JSONDecodeError as exc:
            raise IngestionError(f"{path}:{lineno}: invalid JSON: {exc}", line=lineno) from exc
        version = obj.pop("schema_version", MANIFEST_SCHEMA_VERSION)
        if version != MANIFEST_SCHEMA_VERSION:
            raise IngestionError(
                f"{path}:{lineno}: unsupported schema_version {version}", line=lineno)
        try:
            record = SubjectRecord(**obj)
        except (TypeError, IngestionError) as exc:
            raise IngestionError(f"{path}:{lineno}: {exc}", line=lineno) from exc
        if record.record_id in seen:
            raise IngestionError(
                f"{path}:{lineno}: duplicate record_id {record.record_id!r}", line=lineno)
        seen.add(record.record_id)
        records.append(record)
    counts = split_counts(records)
    log.info("loaded %d records from %s (%s)", len(records), path,
             ", ".join(f"{k}: {v}" for k, v in counts.items()) or "empty")
    return records


def save_manifest(records, path) -> None:
    lines = [json.dumps(r.to_dict(), sort_keys=True) for r in records]
    Path(path).write_text("\n".join(lines) + ("\n" if lines else ""))


def split_counts(records) -> dict:
    counts: dict = {}
    for r in records:
        counts[r.split] = counts.get(r.split, 0) + 1
    return dict(sorted(counts.items()))


def by_split(records, split: str) -> list:
    return [r for r in records if r.split == split]


# --- metrics ---------------------------------------------------------------

def regression_metrics(pred, true):
    """(mae, rmse, r2) with r2 = 1 - SS_res / SS_tot."""
    p = np.asarray(pred, dtype=np.float64)
    t = np.asarray(true, dtype=np.float64)
    if p.shape != t.shape:
        raise ParameterError(f"length mismatch: {p.shape} vs {t.shape}")
    if p.size == 0:
        raise ParameterError("metrics need at least one sample")
    err = p - t
    mae = float(np.mean(np.abs(err)))
    rmse = float(np.sqrt(np.mean(err ** 2)))
    ss_tot = float(np.sum((t - t.mean()) ** 2))
    if ss_tot == 0.0:
        raise ParameterError("r2 undefined: targets have zero variance")
    r2 = 1.0 - float(np.sum(err ** 2)) / ss_tot
    return mae, rmse, r2


@dataclass(frozen=True)
class ConfusionCounts:
    """Counts over the malnourished (positive) class."""

    tp: int
    fp: int
    fn: int
    tn: int

    def __post_init__(self):
        for name in ("tp", "fp", "fn", "tn"):
            if getattr(self, name) < 0:
                raise ParameterError(f"{name} must be >= 0")

    @property
    def total(self) -> int:
        return self.tp + self.fp + self.fn + self.tn


@dataclass(frozen=True)
class ConfusionMetrics:
    """None marks a metric whose denominator was zero."""

    accuracy: float
    precision: float | None
    recall: float | None
    f1: float | None


def confusion_metrics(counts: ConfusionCounts) -> ConfusionMetrics:
    if counts.total == 0:
        raise ParameterError("confusion metrics need at least one sample")
    accuracy = (counts.tp + counts.tn) / counts.total
    precision = counts.tp / (counts.tp + counts.fp) if counts.tp + counts.fp else None
    recall = counts.tp / (counts.tp + counts.fn) if counts.tp + counts.fn else None
    if precision and recall:
        f1 = 2 * precision * recall / (precision + recall)
    elif precision == 0 or recall == 0:
        f1 = 0.0
    else:
        f1 = None
    return ConfusionMetrics(accuracy, precision, recall, f1)


def malnutrition_confusion(records, predicted_weights) -> ConfusionCounts:
    """Screening confusion over held-out records with known height."""
    if len(records) != len(predicted_weights):
        raise ParameterError("records and predictions must align")
    tp = fp = fn = tn = 0
    for record, pred_w in zip(records, predicted_weights):
        if record.true_height_cm is None:
            raise DataError(f"record {record.record_id} lacks true height")
        truth = health.classify_malnutrition(
            health.bmi(record.true_weight_kg, record.true_height_cm))
        pred = health.classify_malnutrition(
            health.bmi(max(pred_w, 1e-6), record.true_height_cm))
        if truth == "malnourished" and pred == "malnourished":
            tp += 1
        elif truth == "malnourished":
            fn += 1
        elif pred == "malnourished":
            fp += 1
        else:
            tn += 1
    return ConfusionCounts(tp, fp, fn, tn)


@dataclass(frozen=True)
class EvalReport:
    mae: float
    rmse: float
    r2: float
    n: int
    labels: dict = field(default_factory=dict)
    height_mae: float | None = None
    height_rmse: float | None = None
    height_r2: float | None = None

    def __post_init__(self):
        if not (self.rmse >= self.mae >= 0.0):
            raise DataError(f"metric invariant violated: rmse {self.rmse} < mae {self.mae}")
        if self.r2 > 1.0 + 1e-12:
            raise DataError(f"r2 must be <= 1, got {self.r2}")
        if self.height_mae is not None and not (self.height_rmse >= self.height_mae >= 0.0):
            raise DataError("height metric invariant violated")

    def to_dict(self) -> dict:
        out = {"mae": self.mae, "rmse": self.rmse, "r2": self.r2, "n": self.n,
               **{f"label_{k}": v for k, v in sorted(self.labels.items())}}
        if self.height_mae is not None:
            out.update(height_mae=self.height_mae, height_rmse=self.height_rmse,
                       height_r2=self.height_r2)
        return out


def reports_to_jsonl(reports) -> str:
    return "".join(json.dumps(r.to_dict(), sort_keys=True) + "\n" for r in reports)


def reports_to_csv(reports) -> str:
    if not reports:
        return ""
    keys = sorted({k for r in reports for k in r.to_dict()})
    lines = [",".join(keys)]
    for r in reports:
        d = r.to_dict()
        lines.append(",".join(_csv_cell(d.get(k)) for k in keys))
    return "\n".join(lines) + "\n"


def _csv_cell(v) -> str:
    if v is None:
        return ""
    if isinstance(v, float):
        return repr(v)
    return str(v)


# --- synthetic features ------------------------------------------------------

DEFAULT_ARCHITECTURES = {"face": "vggface-sim", "body": "xception-sim",
                         "cloud": "pointnet-sim"}


def record_signal(record: SubjectRecord) -> SignalEncoding:
    height = record.true_height_cm if record.true_height_cm is not None else 165.0
    adiposity = health.bmi(record.true_weight_kg, height) / 30.0
    return SignalEncoding(weight_kg=record.true_weight_kg, height_cm=height,
                          adiposity=adiposity)


def make_extractors(architectures=None, seed: int = 0, sensitivity: float = 4.0) -> dict:
    """RecordSignalExtractor per modality; unknown names fail before training."""
    arch = {**DEFAULT_ARCHITECTURES, **(architectures or {})}
    extractors = {}
    for modality, name in arch.items():
        if modality not in SYNTHETIC_PROFILES:
            raise ConfigurationError(f"unknown modality {modality!r}")
        if name not in SYNTHETIC_PROFILES[modality]:
            raise ConfigurationError(
                f"no provider {name!r} registered for modality {modality!r}")
        extractors[modality] = RecordSignalExtractor(
            profile_descriptor(modality, name), seed=seed, sensitivity=sensitivity)
    return extractors


_ZERO_EMBEDDING = {m: EmbeddingVector(np.zeros(EMBEDDING_DIM), m)
                   for m in ("face", "body", "cloud")}


def record_features(record: SubjectRecord, extractors: dict,
                    feature_mask=(True, True, True),
                    degradation: float = 0.0) -> fusion.SubjectFeatures:
    """SubjectFeatures for one record; masked modalities become zero vectors."""
    signal = record_signal(record)
    vectors = {}
    for keep, modality in zip(feature_mask, ("face", "body", "cloud")):
        if keep:
            vectors[modality] = extractors[modality].extract(
                record.record_id, signal, degradation)
        else:
            vectors[modality] = _ZERO_EMBEDDING[modality]
    height = record.true_height_cm if record.true_height_cm is not None else 165.0
    return fusion.SubjectFeatures(vectors["face"], vectors["body"], vectors["cloud"],
                                  record.gender, height, record.age_years)


def build_dataset(records, extractors, feature_mask=(True, True, True),
                  degradations=None) -> list:
    """[(SubjectFeatures, true_weight_kg)] for the given records."""
    degradations = degradations if degradations is not None else [0.0] * len(records)
    return [(record_features(r, extractors, feature_mask, d), r.true_weight_kg)
            for r, d in zip(records, degradations)]


def predict_weights(records, params, extractors, feature_mask=(True, True, True),
                    degradations=None) -> np.ndarray:
    degradations = degradations if degradations is not None else [0.0] * len(records)
    return np.array([
        fusion.predict_weight(record_features(r, extractors, feature_mask, d), params)
        for r, d in zip(records, degradations)
    ])


def evaluate_records(records, params, extractors, feature_mask=(True, True, True),
                     degradations=None, labels=None) -> EvalReport:
    preds = predict_weights(records, params, extractors, feature_mask, degradations)
    true = np.array([r.true_weight_kg for r in records])
    mae, rmse, r2 = regression_metrics(preds, true)
    return EvalReport(mae, rmse, r2, len(records), labels or {})


def predicted_heights(records, calibration, image_root="") -> np.ndarray:
    """Height per record via the ppm path on each record's image."""
    from .detectors import MaskGeometryDetector
    from .geometry import crop_mask
    from .height import estimate_height
    root = Path(image_root) if image_root else None
    detector = MaskGeometryDetector()
    out = []
    for r in records:
        if not r.image_path:
            raise DataError(f"record {r.record_id} has no image_path")
        path = (root / r.image_path) if root else Path(r.image_path)
        mask = detector.subject_mask(load_image(path))
        out.append(estimate_height(crop_mask(mask), calibration))
    return np.array(out)


def with_height_metrics(report: EvalReport, records, calibration,
                        image_root="") -> EvalReport:
    """Attach ppm height metrics for records that carry ground-truth height."""
    with_truth = [r for r in records if r.true_height_cm is not None and r.image_path]
    if len(with_truth) < 2:
        return report
    preds = predicted_heights(with_truth, calibration, image_root)
    true = np.array([r.true_height_cm for r in with_truth])
    h_mae, h_rmse, h_r2 = regression_metrics(preds, true)
    return replace(report, height_mae=h_mae, height_rmse=h_rmse, height_r2=h_r2)


def evaluate_by_group(records, params, extractors, key: str = "device_tag") -> dict:
    """One report per distinct record tag, e.g. per capture device."""
    groups: dict = {}
    for r in records:
        groups.setdefault(getattr(r, key), []).append(r)
    return {
        tag: evaluate_records(rs, params, extractors, labels={key: tag})
        for tag, rs in sorted(groups.items())
    }


def feature_importance(params: fusion.FusionModelParams):
    """(w_F, w_B, w_R): softmax of the stored fusion logits."""
    w = fusion.fusion_weights(params)
    return float(w[0]), float(w[1]), float(w[2])


# --- experiment battery ------------------------------------------------------

def architecture_grid(face_fes=None, body_fes=None, cloud_fes=None) -> list:
    """All face x body x cloud provider combinations, as ablation cells."""
    faces = face_fes or sorted(SYNTHETIC_PROFILES["face"])
    bodies = body_fes or sorted(SYNTHETIC_PROFILES["body"])
    clouds = cloud_fes or sorted(SYNTHETIC_PROFILES["cloud"])
    return [{"face": f, "body": b, "cloud": c}
            for f in faces for b in bodies for c in clouds]


def run_ablation(records, config: fusion.TrainingConfig, grid=None,
                 feature_masks=None, train_split: str = "train",
                 eval_split: str = "test", seed: int = 0) -> list:
    """Train + evaluate one model per grid cell / feature mask.

    Every cell uses the same training config and seed, so tables are
    reproducible byte for byte. Provider names are validated before any
    training starts.
    """
    train_records = by_split(records, train_split)
    eval_records = by_split(records, eval_split)
    if not train_records or not eval_records:
        raise ParameterError(
            f"need records in both {train_split!r} and {eval_split!r} splits")
    cells = []
    if grid:
        for arch in grid:
            cells.append((arch, "ALL"))
    if feature_masks:
        for mask_name in feature_masks:
            if mask_name not in FEATURE_MASKS:
                raise ConfigurationError(f"unknown feature mask {mask_name!r}")
            cells.append((dict(DEFAULT_ARCHITECTURES), mask_name))
    if not cells:
        cells = [(dict(DEFAULT_ARCHITECTURES), "ALL")]
    # Fail fast on unknown providers for every cell.
    extractor_sets = [make_extractors(arch, seed=seed) for arch, _ in cells]

    reports = []
    for (arch, mask_name), extractors in zip(cells, extractor_sets):
        mask = FEATURE_MASKS[mask_name]
        train_set = build_dataset(train_records, extractors, mask)
        params, _ = fusion.fit(train_set, config, modality_mask=mask)
        labels = {"face_fe": arch["face"], "body_fe": arch["body"],
                  "cloud_fe": arch["cloud"], "feature_mask": mask_name,
                  "gamma": 1.0}
        reports.append(evaluate_records(eval_records, params, extractors, mask,
                                        labels=labels))
    return reports


def brightness_deviation(image, gamma: float) -> float:
    """Mean-intensity shift of the gamma-corrected image, in [0, 1]."""
    corrupted = apply_gamma(image, gamma)
    return abs(corrupted.mean_intensity() - image.mean_intensity()) / 255.0


def lighting_sweep(records, gammas, params, extractors, image_root="") -> list:
    """[(gamma, EvalReport)]; the gamma=1 entry is bitwise the clean baseline."""
    for g in gammas:
        if not (math.isfinite(g) and g > 0):
            raise ParameterError(f"gamma must be positive, got {g}")
    root = Path(image_root) if image_root else None
    images = []
    for r in records:
        if not r.image_path:
            raise DataError(f"record {r.record_id} has no image_path for lighting sweep")
        path = (root / r.image_path) if root else Path(r.image_path)
        images.append(load_image(path))
    results = []
    for g in gammas:
        degradations = [brightness_deviation(img, g) for img in images]
        labels = {"face_fe": extractors["face"].descriptor.provider_name,
                  "body_fe": extractors["body"].descriptor.provider_name,
                  "cloud_fe": extractors["cloud"].descriptor.provider_name,
                  "feature_mask": "ALL", "gamma": float(g)}
        results.append((float(g), evaluate_records(records, params, extractors,
                                                   degradations=degradations,
                                                   labels=labels)))
    return results


# --- synthetic data generators ----------------------------------------------

def make_synthetic_manifest(n: int, seed: int = 0, devices=("phone-a", "phone-b", "laptop"),
                            heldout_fraction: float = 0.0,
                            malnourished_fraction: float = 0.25) -> list:
    """Plausible subject records at desk scale.

    Weight follows a BMI draw against an independent height, so the
    manifest carries both healthy and malnourished subjects.
    """
    if n < 1:
        raise ParameterError("manifest size must be >= 1")
    rng = np.random.default_rng(seed)
    records = []
    n_heldout = int(round(n * heldout_fraction))
    for i in range(n):
        gender = "male" if rng.random() < 0.5 else "female"
        height = float(rng.uniform(150.0, 192.0))
        if rng.random() < malnourished_fraction:
            bmi_draw = float(rng.uniform(15.0, 18.2))
        else:
            bmi_draw = float(rng.uniform(18.8, 31.0))
        weight = bmi_draw * (height / 100.0) ** 2
        if i < n_heldout:
            split = "heldout"
        else:
            u = rng.random()
            split = "train" if u < 0.7 else ("val" if u < 0.85 else "test")
        records.append(SubjectRecord(
            record_id=f"syn-{seed}-{i:04d}",
            gender=gender,
            age_years=float(rng.uniform(18.0, 60.0)),
            true_weight_kg=weight,
            true_height_cm=height,
            subject_id=f"subject-{i:04d}",
            split=split,
            device_tag=devices[i % len(devices)],
            pose_tag=f"pose-{i % 3}",
        ))
    return records


def linear_signal_dataset(n: int = 200, seed: int = 0) -> list:
    """Training-oracle dataset: the target is affine in one z_face coordinate.

    z_face carries the only signal (its weight coordinate is set from the
    target); z_body and z_cloud are pure noise, and height/gender are
    drawn independently of the target so no other input is predictive.
    """
    if n < 2:
        raise ParameterError("dataset needs at least 2 samples")
    rng = np.random.default_rng(seed)
    data = []
    for i in range(n):
        u = rng.random()
        weight = 40.0 + 60.0 * u
        z_face = synthetic_embed(f"oracle-face-{i}", seed, modality="face").values.copy()
        z_face[0] = WEIGHT_SCALE * weight
        z_body = synthetic_embed(f"oracle-body-{i}", seed, modality="body")
        z_cloud = synthetic_embed(f"oracle-cloud-{i}", seed, modality="cloud")
        features = fusion.SubjectFeatures(
            EmbeddingVector(z_face, "face"), z_body, z_cloud,
            gender="male" if i % 2 == 0 else "female",
            height_cm=float(150.0 + 40.0 * rng.random()),
            age_years=30.0,
        )
        data.append((features, weight))
    return data


def with_split(record: SubjectRecord, split: str) -> SubjectRecord:
    return replace(record, split=split)

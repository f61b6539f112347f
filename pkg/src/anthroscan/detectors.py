"""Detection data types and injectable detector providers.

The real system puts pretrained networks (landmark detector, keypoint
net, segmenter) behind these contracts. Everything here is deterministic:
a threshold segmenter, a mask-geometry landmark/keypoint synthesizer, and
a sidecar-annotation reader for hand-labelled fixtures.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import NoSubjectError, ParameterError, ProviderError
from .images import RgbImage

N_FACE_LANDMARKS = 68
N_BODY_KEYPOINTS = 18

# Indices into the 68-point layout used downstream for alignment.
LEFT_INNER_EYE = 39
RIGHT_INNER_EYE = 42
BOTTOM_LIP = 57


@dataclass(frozen=True)
class FaceLandmarks:
    """68 ordered pixel coordinates plus an overall detection confidence."""

    points: np.ndarray = field(repr=False)  # (68, 2) float64, (x, y)
    detection_confidence: float = 1.0

    def __post_init__(self):
        pts = np.asarray(self.points, dtype=np.float64)
        if pts.shape != (N_FACE_LANDMARKS, 2):
            raise ParameterError(f"expected {N_FACE_LANDMARKS} landmarks, got shape {pts.shape}")
        if not np.all(np.isfinite(pts)):
            raise ParameterError("landmarks must be finite")
        if not 0.0 <= self.detection_confidence <= 1.0:
            raise ParameterError("detection_confidence must lie in [0, 1]")
        object.__setattr__(self, "points", pts)

    def require_inside(self, width: int, height: int) -> None:
        x, y = self.points[:, 0], self.points[:, 1]
        if x.min() < 0 or y.min() < 0 or x.max() > width - 1 or y.max() > height - 1:
            raise ParameterError("landmarks fall outside image bounds")


@dataclass(frozen=True)
class BodyKeypoints:
    """18 optional pixel coordinates; absent slots are NaN with confidence 0."""

    points: np.ndarray = field(repr=False)       # (18, 2) float64, NaN when absent
    confidence: np.ndarray = field(repr=False)   # (18,) float64 in [0, 1]

    def __post_init__(self):
        pts = np.asarray(self.points, dtype=np.float64)
        conf = np.asarray(self.confidence, dtype=np.float64)
        if pts.shape != (N_BODY_KEYPOINTS, 2):
            raise ParameterError(f"expected {N_BODY_KEYPOINTS} keypoint slots, got shape {pts.shape}")
        if conf.shape != (N_BODY_KEYPOINTS,):
            raise ParameterError("confidence must have one entry per keypoint")
        if np.nanmin(conf) < 0 or np.nanmax(conf) > 1:
            raise ParameterError("keypoint confidence must lie in [0, 1]")
        object.__setattr__(self, "points", pts)
        object.__setattr__(self, "confidence", conf)

    @property
    def present(self) -> np.ndarray:
        return np.all(np.isfinite(self.points), axis=1)


@dataclass(frozen=True)
class BinaryMask:
    """Per-pixel subject mask; True marks the subject."""

    bits: np.ndarray = field(repr=False)  # (H, W) bool

    def __post_init__(self):
        bits = np.asarray(self.bits)
        if bits.ndim != 2:
            raise ParameterError(f"mask must be 2-D, got shape {bits.shape}")
        object.__setattr__(self, "bits", bits.astype(bool))

    @property
    def width(self) -> int:
        return self.bits.shape[1]

    @property
    def height(self) -> int:
        return self.bits.shape[0]

    def any_subject(self) -> bool:
        return bool(self.bits.any())

    def bounding_box(self):
        """(x0, y0, x1, y1) inclusive bounds of True pixels."""
        if not self.any_subject():
            raise NoSubjectError("mask has no subject pixels")
        ys, xs = np.nonzero(self.bits)
        return int(xs.min()), int(ys.min()), int(xs.max()), int(ys.max())


def threshold_mask(image: RgbImage, threshold: int = 8) -> BinaryMask:
    """Segment the subject as everything brighter than the (dark) background.

    Stand-in for a learned segmenter; fixtures and demos render subjects on
    near-black backgrounds.
    """
    return BinaryMask(np.any(image.pixels > threshold, axis=2))


def mask_geometry_landmarks(mask: BinaryMask) -> FaceLandmarks:
    """Synthesize a plausible 68-point layout from subject-mask geometry.

    The head is taken as the top seventh of the mask bounding box; eyes,
    lip and the remaining points are placed at fixed fractions of the head
    box. Deterministic; only the alignment anchors (inner eyes, bottom
    lip) are consumed downstream.
    """
    x0, y0, x1, y1 = mask.bounding_box()
    bh = y1 - y0 + 1
    head_h = max(bh / 7.0, 2.0)
    head_top = float(y0)
    # Head width from the mask rows inside the head region.
    head_rows = mask.bits[int(y0):int(y0 + head_h) + 1]
    cols = np.nonzero(head_rows.any(axis=0))[0]
    if cols.size == 0:
        cols = np.array([x0, x1])
    hx0, hx1 = float(cols.min()), float(cols.max())
    hw = max(hx1 - hx0, 2.0)
    cx = (hx0 + hx1) / 2.0

    pts = np.zeros((N_FACE_LANDMARKS, 2))
    # Jaw 0-16 along the lower head ellipse, brows/nose/eyes/mouth at
    # conventional fractions. Positions only need to be stable and inside
    # the head box.
    t = np.linspace(np.pi, 2 * np.pi, 17)
    pts[0:17, 0] = cx + (hw / 2) * np.cos(t)
    pts[0:17, 1] = head_top + head_h * (0.55 - 0.45 * np.sin(t))
    for i in range(17, 27):  # brows
        pts[i] = (hx0 + hw * (0.2 + 0.6 * (i - 17) / 9.0), head_top + head_h * 0.30)
    for i in range(27, 36):  # nose
        pts[i] = (cx, head_top + head_h * (0.35 + 0.25 * (i - 27) / 8.0))
    for i in range(36, 42):  # right-of-image eye (subject left)
        pts[i] = (hx0 + hw * (0.25 + 0.05 * (i - 36)), head_top + head_h * 0.40)
    for i in range(42, 48):  # other eye
        pts[i] = (hx0 + hw * (0.60 + 0.05 * (i - 42)), head_top + head_h * 0.40)
    for i in range(48, 68):  # mouth
        pts[i] = (hx0 + hw * (0.30 + 0.40 * ((i - 48) % 10) / 9.0),
                  head_top + head_h * (0.68 if i < 58 else 0.72))
    pts[LEFT_INNER_EYE] = (cx - hw * 0.15, head_top + head_h * 0.40)
    pts[RIGHT_INNER_EYE] = (cx + hw * 0.15, head_top + head_h * 0.40)
    pts[BOTTOM_LIP] = (cx, head_top + head_h * 0.72)

    pts[:, 0] = np.clip(pts[:, 0], 0, mask.width - 1)
    pts[:, 1] = np.clip(pts[:, 1], 0, mask.height - 1)
    return FaceLandmarks(pts, detection_confidence=1.0)


def mask_geometry_keypoints(mask: BinaryMask) -> BodyKeypoints:
    """Synthesize the 18 skeleton keypoints at body-proportion fractions."""
    x0, y0, x1, y1 = mask.bounding_box()
    w, h = x1 - x0 + 1, y1 - y0 + 1

    def at(fx, fy):
        return (x0 + fx * (w - 1), y0 + fy * (h - 1))

    # nose, neck, shoulders, elbows, wrists, hips, knees, ankles, eyes, ears
    fractions = [
        (0.50, 0.06), (0.50, 0.16), (0.35, 0.18), (0.30, 0.32), (0.28, 0.45),
        (0.65, 0.18), (0.70, 0.32), (0.72, 0.45), (0.42, 0.52), (0.41, 0.73),
        (0.40, 0.95), (0.58, 0.52), (0.59, 0.73), (0.60, 0.95), (0.46, 0.05),
        (0.54, 0.05), (0.43, 0.07), (0.57, 0.07),
    ]
    pts = np.array([at(fx, fy) for fx, fy in fractions])
    pts[:, 0] = np.clip(pts[:, 0], 0, mask.width - 1)
    pts[:, 1] = np.clip(pts[:, 1], 0, mask.height - 1)
    return BodyKeypoints(pts, np.ones(N_BODY_KEYPOINTS))


def _parse_indexed_lines(path: Path, n_slots: int):
    pts = np.full((n_slots, 2), np.nan)
    conf = np.zeros(n_slots)
    for lineno, raw in enumerate(path.read_text().splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        parts = line.split()
        if len(parts) != 4:
            raise ProviderError(f"{path}:{lineno}: expected 'index x y confidence', got {raw!r}")
        try:
            idx = int(parts[0])
            x, y, c = float(parts[1]), float(parts[2]), float(parts[3])
        except ValueError as exc:
            raise ProviderError(f"{path}:{lineno}: {exc}") from exc
        if not 0 <= idx < n_slots:
            raise ProviderError(f"{path}:{lineno}: index {idx} out of range 0..{n_slots - 1}")
        pts[idx] = (x, y)
        conf[idx] = c
    return pts, conf


class SidecarAnnotationProvider:
    """Reads fixture annotations from text files next to each image.

    ``photo.png`` is annotated by ``photo.landmarks.txt`` (68 lines) and
    ``photo.keypoints.txt`` (up to 18 lines), each line ``index x y confidence``.
    """

    def __init__(self, image_path):
        self.image_path = Path(image_path)

    def _sidecar(self, suffix: str) -> Path:
        p = self.image_path.with_suffix("." + suffix)
        if not p.exists():
            raise ProviderError(f"missing sidecar annotation file {p}")
        return p

    def face_landmarks(self, image: RgbImage) -> FaceLandmarks:
        pts, conf = _parse_indexed_lines(self._sidecar("landmarks.txt"), N_FACE_LANDMARKS)
        if not np.all(np.isfinite(pts)):
            missing = np.nonzero(~np.all(np.isfinite(pts), axis=1))[0]
            raise ProviderError(f"landmark sidecar incomplete, missing indices {missing.tolist()}")
        return FaceLandmarks(pts, detection_confidence=float(conf.mean()))

    def body_keypoints(self, image: RgbImage) -> BodyKeypoints:
        pts, conf = _parse_indexed_lines(self._sidecar("keypoints.txt"), N_BODY_KEYPOINTS)
        return BodyKeypoints(pts, conf)


class MaskGeometryDetector:
    """Detector provider deriving landmarks/keypoints from the subject mask."""

    name = "mask-geometry"

    def __init__(self, threshold: int = 8):
        self.threshold = threshold

    def subject_mask(self, image: RgbImage) -> BinaryMask:
        mask = threshold_mask(image, self.threshold)
        if not mask.any_subject():
            raise NoSubjectError("no subject pixels above background threshold")
        return mask

    def face_landmarks(self, image: RgbImage, mask: BinaryMask | None = None) -> FaceLandmarks:
        return mask_geometry_landmarks(mask if mask is not None else self.subject_mask(image))

    def body_keypoints(self, image: RgbImage, mask: BinaryMask | None = None) -> BodyKeypoints:
        return mask_geometry_keypoints(mask if mask is not None else self.subject_mask(image))

"""Pixel-per-metric calibration and height prediction.

A known-height subject at a fixed capture geometry calibrates a
pixels-per-centimetre ratio; new subjects at the same geometry are then
measured by dividing their crop pixel height by that ratio. An optional
camera model removes lens distortion first.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .detectors import BinaryMask
from .errors import ConfigurationError, FormatError, ParameterError
from .geometry import _bilinear_sample
from .images import RgbImage

DEFAULT_SETUP_NOTE = "camera 1.0 m above ground, subject 1.5 m from lens, lens parallel to subject"


def _crop_pixel_height(crop) -> int:
    if isinstance(crop, (RgbImage, BinaryMask)):
        return crop.height
    if isinstance(crop, (int, np.integer)):
        return int(crop)
    raise ParameterError(f"unsupported crop type {type(crop).__name__}")


@dataclass(frozen=True)
class PpmCalibration:
    """Pixels per centimetre for one capture setup."""

    ppm: float
    device_id: str = "default"
    setup_note: str = DEFAULT_SETUP_NOTE

    def __post_init__(self):
        if not np.isfinite(self.ppm) or self.ppm <= 0:
            raise ParameterError(f"ppm must be positive and finite, got {self.ppm}")


def calibrate_ppm(crop, true_height_cm: float, device_id: str = "default",
                  setup_note: str = DEFAULT_SETUP_NOTE) -> PpmCalibration:
    """ppm = crop pixel height / true subject height (cm)."""
    if not np.isfinite(true_height_cm) or true_height_cm <= 0:
        raise ParameterError(f"true height must be positive, got {true_height_cm}")
    px = _crop_pixel_height(crop)
    if px < 1:
        raise ParameterError("crop pixel height must be at least 1")
    return PpmCalibration(px / true_height_cm, device_id, setup_note)


def estimate_height(crop, calibration: PpmCalibration) -> float:
    """Predicted height in cm: crop pixel height / ppm."""
    if calibration is None:
        raise ConfigurationError("no ppm calibration available for height estimation")
    px = _crop_pixel_height(crop)
    if px < 1:
        raise ParameterError("crop pixel height must be at least 1")
    return px / calibration.ppm


class CalibrationRegistry:
    """device_id -> PpmCalibration table, persisted as a JSON file."""

    def __init__(self, entries=None):
        self._entries: dict[str, dict] = dict(entries or {})

    def register(self, calibration: PpmCalibration, created_at: str = "") -> None:
        self._entries[calibration.device_id] = {
            "ppm": float(calibration.ppm),
            "setup_note": calibration.setup_note,
            "created_at": created_at,
        }

    def get(self, device_id: str) -> PpmCalibration:
        if device_id not in self._entries:
            raise ConfigurationError(f"no calibration registered for device {device_id!r}")
        e = self._entries[device_id]
        return PpmCalibration(e["ppm"], device_id, e.get("setup_note", ""))

    def get_or_default(self, device_id, default_device: str = "default") -> PpmCalibration:
        if device_id and device_id in self._entries:
            return self.get(device_id)
        return self.get(default_device)

    def device_ids(self):
        return sorted(self._entries)

    def save(self, path) -> None:
        Path(path).write_text(json.dumps(self._entries, indent=2, sort_keys=True) + "\n")

    @classmethod
    def load(cls, path) -> "CalibrationRegistry":
        try:
            data = json.loads(Path(path).read_text())
        except (OSError, json.JSONDecodeError) as exc:
            raise FormatError(f"cannot read calibration registry {path}: {exc}") from exc
        if not isinstance(data, dict):
            raise FormatError("calibration registry must be a JSON object")
        for device, entry in data.items():
            if "ppm" not in entry:
                raise FormatError(f"calibration entry {device!r} missing ppm")
            PpmCalibration(entry["ppm"], device, entry.get("setup_note", ""))
        return cls(data)


@dataclass(frozen=True)
class CameraModel:
    """Pinhole intrinsics plus radial (k1, k2, k3) and tangential (p1, p2) terms."""

    intrinsics: np.ndarray = field(repr=False)   # (3, 3)
    distortion: np.ndarray = field(repr=False)   # (k1, k2, p1, p2[, k3])

    def __post_init__(self):
        k = np.asarray(self.intrinsics, dtype=np.float64)
        d = np.asarray(self.distortion, dtype=np.float64).ravel()
        if k.shape != (3, 3):
            raise ParameterError("intrinsics must be a 3x3 matrix")
        if k[0, 0] <= 0 or k[1, 1] <= 0:
            raise ParameterError("focal lengths must be positive")
        if d.size not in (4, 5):
            raise ParameterError("distortion must have 4 or 5 coefficients (k1,k2,p1,p2[,k3])")
        if d.size == 4:
            d = np.append(d, 0.0)
        object.__setattr__(self, "intrinsics", k)
        object.__setattr__(self, "distortion", d)

    def distort_normalized(self, xn: np.ndarray, yn: np.ndarray):
        """Forward distortion model on normalized image coordinates."""
        k1, k2, p1, p2, k3 = self.distortion
        r2 = xn * xn + yn * yn
        radial = 1.0 + k1 * r2 + k2 * r2 * r2 + k3 * r2 ** 3
        xd = xn * radial + 2 * p1 * xn * yn + p2 * (r2 + 2 * xn * xn)
        yd = yn * radial + p1 * (r2 + 2 * yn * yn) + 2 * p2 * xn * yn
        return xd, yd


def undistort(image: RgbImage, camera: CameraModel) -> RgbImage:
    """Resample the image so straight world lines become straight pixels.

    Each undistorted output pixel is pushed through the forward distortion
    model to find its source sample. With all-zero coefficients the
    mapping is the identity and the output equals the input exactly.
    """
    k = camera.intrinsics
    cx_pt, cy_pt = k[0, 2], k[1, 2]
    if not (0 <= cx_pt <= image.width - 1 and 0 <= cy_pt <= image.height - 1):
        raise ParameterError("principal point lies outside the image")
    if not np.any(camera.distortion):
        return RgbImage(image.pixels.copy())
    fx, fy = k[0, 0], k[1, 1]
    ox, oy = np.meshgrid(np.arange(image.width, dtype=np.float64),
                         np.arange(image.height, dtype=np.float64))
    xn = (ox - cx_pt) / fx
    yn = (oy - cy_pt) / fy
    xd, yd = camera.distort_normalized(xn, yn)
    sx = xd * fx + cx_pt
    sy = yd * fy + cy_pt
    return RgbImage(_bilinear_sample(image.pixels, sx, sy))

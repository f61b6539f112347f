"""8-bit RGB image container, PNG I/O, and gamma-based lighting simulation."""

from __future__ import annotations

import io
from dataclasses import dataclass, field

import numpy as np
from PIL import Image, UnidentifiedImageError

from .errors import ParameterError


@dataclass(frozen=True)
class RgbImage:
    """Row-major 3-channel uint8 image. ``pixels`` has shape (height, width, 3)."""

    pixels: np.ndarray = field(repr=False)

    def __post_init__(self):
        px = np.asarray(self.pixels)
        if px.ndim != 3 or px.shape[2] != 3:
            raise ParameterError(f"expected (H, W, 3) pixel array, got shape {px.shape}")
        if px.shape[0] < 1 or px.shape[1] < 1:
            raise ParameterError("image must be at least 1x1")
        if px.dtype != np.uint8:
            if np.issubdtype(px.dtype, np.floating) or np.issubdtype(px.dtype, np.integer):
                if px.min() < 0 or px.max() > 255:
                    raise ParameterError("channel values must lie in [0, 255]")
                px = px.astype(np.uint8)
            else:
                raise ParameterError(f"unsupported pixel dtype {px.dtype}")
        object.__setattr__(self, "pixels", px)

    @property
    def width(self) -> int:
        return self.pixels.shape[1]

    @property
    def height(self) -> int:
        return self.pixels.shape[0]

    def mean_intensity(self) -> float:
        """Mean over all channels, in [0, 255]."""
        return float(self.pixels.mean())

    def __eq__(self, other):
        return isinstance(other, RgbImage) and np.array_equal(self.pixels, other.pixels)


def load_image(source) -> RgbImage:
    """Read a raster image (path or bytes) into an RgbImage.

    Raises ParameterError when the payload is not a decodable image.
    """
    try:
        if isinstance(source, (bytes, bytearray)):
            img = Image.open(io.BytesIO(source))
        else:
            img = Image.open(source)
        return RgbImage(np.asarray(img.convert("RGB")))
    except (UnidentifiedImageError, OSError, ValueError) as exc:
        raise ParameterError(f"cannot decode image: {exc}", stage="decode") from exc


def save_image(image: RgbImage, path) -> None:
    Image.fromarray(image.pixels, mode="RGB").save(path)


def encode_png(image: RgbImage) -> bytes:
    buf = io.BytesIO()
    Image.fromarray(image.pixels, mode="RGB").save(buf, format="PNG")
    return buf.getvalue()


# Direction of the power law: the default reads gamma > 1 as brighter
# (exponent 1/gamma); "darken_above_one" inverts the reading.
GAMMA_CONVENTIONS = ("brighten_above_one", "darken_above_one")


def gamma_lut(gamma: float, convention: str = "brighten_above_one") -> np.ndarray:
    """256-entry lookup table for v -> 255*(v/255)^(1/gamma).

    Under the default convention gamma > 1 brightens; gamma = 1 is the
    identity either way.
    """
    if not np.isfinite(gamma) or gamma <= 0:
        raise ParameterError(f"gamma must be positive, got {gamma}")
    if convention not in GAMMA_CONVENTIONS:
        raise ParameterError(f"gamma convention must be one of {GAMMA_CONVENTIONS}")
    exponent = 1.0 / gamma if convention == "brighten_above_one" else gamma
    v = np.arange(256, dtype=np.float64)
    out = 255.0 * np.power(v / 255.0, exponent)
    return np.rint(out).astype(np.uint8)


def apply_gamma(image: RgbImage, gamma: float,
                convention: str = "brighten_above_one") -> RgbImage:
    """Simulate a lighting change by power-law intensity remapping."""
    if gamma == 1.0 and convention in GAMMA_CONVENTIONS:
        return RgbImage(image.pixels.copy())
    return RgbImage(gamma_lut(gamma, convention)[image.pixels])

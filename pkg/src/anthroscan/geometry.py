"""Deterministic image-space preprocessing.

Keypoint confidence-map rendering, exact 3-point affine solving,
landmark-driven face alignment with bilinear resampling, and mask-based
tight cropping. All functions are pure.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .detectors import BOTTOM_LIP, LEFT_INNER_EYE, RIGHT_INNER_EYE, BinaryMask, FaceLandmarks
from .errors import GeometryError, NoSubjectError, ParameterError
from .images import RgbImage

# Peak spread for confidence maps, in pixels at the reference resolution.
DEFAULT_SIGMA = 8.0
SIGMA_REFERENCE_SIZE = 368

# Canonical alignment anchors (fractions of the output crop): inner eyes
# and bottom lip.
ALIGNMENT_TEMPLATE = np.array([
    [0.35, 0.40],
    [0.65, 0.40],
    [0.50, 0.75],
])


def default_sigma(width: int, height: int) -> float:
    """Spread scaled linearly with image size from the reference resolution."""
    return DEFAULT_SIGMA * max(width, height) / SIGMA_REFERENCE_SIZE


@dataclass(frozen=True)
class ConfidenceMap:
    """Gaussian-peaked per-pixel keypoint likelihood."""

    values: np.ndarray = field(repr=False)  # (H, W) float64 in (0, 1]
    sigma: float = DEFAULT_SIGMA
    keypoint_index: int = 0

    @property
    def width(self) -> int:
        return self.values.shape[1]

    @property
    def height(self) -> int:
        return self.values.shape[0]

    def argmax_pixel(self):
        """(x, y) of the maximum value."""
        flat = int(np.argmax(self.values))
        return flat % self.width, flat // self.width


def render_confidence_map(keypoint, width: int, height: int, sigma: float,
                          keypoint_index: int = 0) -> ConfidenceMap:
    """Render exp(-||p - keypoint||^2 / sigma^2) over a width x height grid.

    The peak value 1.0 is attained where a pixel coincides with the
    keypoint; values are strictly positive everywhere.
    """
    if not np.isfinite(sigma) or sigma <= 0:
        raise ParameterError(f"sigma must be positive, got {sigma}")
    kx, ky = float(keypoint[0]), float(keypoint[1])
    if not (0 <= kx <= width - 1 and 0 <= ky <= height - 1):
        raise GeometryError(f"keypoint ({kx}, {ky}) outside image bounds {width}x{height}")
    xs = np.arange(width, dtype=np.float64) - kx
    ys = np.arange(height, dtype=np.float64) - ky
    sq = ys[:, None] ** 2 + xs[None, :] ** 2
    return ConfidenceMap(np.exp(-sq / (sigma * sigma)), sigma, keypoint_index)


@dataclass(frozen=True)
class AffineTransform:
    """2x3 matrix: linear part plus translation, mapping (x, y) column points."""

    matrix: np.ndarray = field(repr=False)

    def __post_init__(self):
        m = np.asarray(self.matrix, dtype=np.float64)
        if m.shape != (2, 3):
            raise ParameterError(f"affine matrix must be 2x3, got {m.shape}")
        if abs(np.linalg.det(m[:, :2])) <= 1e-12:
            raise GeometryError("affine linear part is singular")
        object.__setattr__(self, "matrix", m)

    def apply(self, points) -> np.ndarray:
        pts = np.atleast_2d(np.asarray(points, dtype=np.float64))
        return pts @ self.matrix[:, :2].T + self.matrix[:, 2]

    def inverse(self) -> "AffineTransform":
        a = self.matrix[:, :2]
        t = self.matrix[:, 2]
        a_inv = np.linalg.inv(a)
        return AffineTransform(np.column_stack([a_inv, -a_inv @ t]))


def _triangle_area(pts: np.ndarray) -> float:
    (x1, y1), (x2, y2), (x3, y3) = pts
    return abs((x2 - x1) * (y3 - y1) - (x3 - x1) * (y2 - y1)) / 2.0


def solve_affine(src, dst) -> AffineTransform:
    """Exact affine transform taking three source points to three targets.

    Affine maps preserve collinearity, parallelism and ratios of distances
    along a line, so three non-collinear correspondences pin it down.
    """
    src = np.asarray(src, dtype=np.float64)
    dst = np.asarray(dst, dtype=np.float64)
    if src.shape != (3, 2) or dst.shape != (3, 2):
        raise ParameterError("solve_affine needs exactly 3 source and 3 target points")
    if _triangle_area(src) <= 1e-9:
        raise GeometryError("source points are collinear")
    m = np.column_stack([src, np.ones(3)])
    # Row i of the affine matrix solves m @ row_i = dst[:, i].
    coeff = np.linalg.solve(m, dst)  # (3, 2): columns are (a, b, t) per axis
    return AffineTransform(coeff.T)


def warp_affine(image: RgbImage, transform: AffineTransform, out_width: int,
                out_height: int) -> RgbImage:
    """Resample through the transform with bilinear interpolation.

    Output pixel o samples the input at transform^-1(o); samples outside
    the source are black.
    """
    inv = transform.inverse().matrix
    ox, oy = np.meshgrid(np.arange(out_width, dtype=np.float64),
                         np.arange(out_height, dtype=np.float64))
    sx = inv[0, 0] * ox + inv[0, 1] * oy + inv[0, 2]
    sy = inv[1, 0] * ox + inv[1, 1] * oy + inv[1, 2]
    return RgbImage(_bilinear_sample(image.pixels, sx, sy))


def _bilinear_sample(pixels: np.ndarray, sx: np.ndarray, sy: np.ndarray) -> np.ndarray:
    """Sample (H, W, 3) uint8 pixels at float coordinate grids; outside is 0."""
    h, w = pixels.shape[:2]
    x0 = np.floor(sx)
    y0 = np.floor(sy)
    fx = sx - x0
    fy = sy - y0
    x0 = x0.astype(np.int64)
    y0 = y0.astype(np.int64)

    def gather(xi, yi):
        valid = (xi >= 0) & (xi < w) & (yi >= 0) & (yi < h)
        xi_c = np.clip(xi, 0, w - 1)
        yi_c = np.clip(yi, 0, h - 1)
        vals = pixels[yi_c, xi_c].astype(np.float64)
        vals[~valid] = 0.0
        return vals

    fx3 = fx[..., None]
    fy3 = fy[..., None]
    out = (gather(x0, y0) * (1 - fx3) * (1 - fy3)
           + gather(x0 + 1, y0) * fx3 * (1 - fy3)
           + gather(x0, y0 + 1) * (1 - fx3) * fy3
           + gather(x0 + 1, y0 + 1) * fx3 * fy3)
    return np.rint(out).astype(np.uint8)


def alignment_template(out_size: int) -> np.ndarray:
    return ALIGNMENT_TEMPLATE * out_size


def align_face(image: RgbImage, landmarks: FaceLandmarks, template=None,
               out_size: int = 160) -> RgbImage:
    """Warp so the inner eyes and bottom lip land on the template anchors.

    Returns an out_size x out_size crop.
    """
    landmarks.require_inside(image.width, image.height)
    tpl = alignment_template(out_size) if template is None else np.asarray(template, dtype=np.float64)
    if tpl.shape != (3, 2):
        raise ParameterError("template must be 3 points")
    if _triangle_area(tpl) <= 1e-9:
        raise GeometryError("template points are collinear")
    anchors = landmarks.points[[LEFT_INNER_EYE, RIGHT_INNER_EYE, BOTTOM_LIP]]
    transform = solve_affine(anchors, tpl)
    return warp_affine(image, transform, out_size, out_size)


def tight_crop(image: RgbImage, mask: BinaryMask, margin: int = 0) -> RgbImage:
    """Crop to the mask bounding box grown by margin; background goes black."""
    if margin < 0:
        raise ParameterError("margin must be non-negative")
    if (mask.height, mask.width) != (image.height, image.width):
        raise ParameterError("mask dimensions must match the image")
    if not mask.any_subject():
        raise NoSubjectError("cannot crop: mask has no subject pixels")
    x0, y0, x1, y1 = mask.bounding_box()
    x0 = max(x0 - margin, 0)
    y0 = max(y0 - margin, 0)
    x1 = min(x1 + margin, image.width - 1)
    y1 = min(y1 + margin, image.height - 1)
    region = image.pixels[y0:y1 + 1, x0:x1 + 1].copy()
    region[~mask.bits[y0:y1 + 1, x0:x1 + 1]] = 0
    return RgbImage(region)


def crop_mask(mask: BinaryMask, margin: int = 0) -> BinaryMask:
    """The mask restricted to its own (margin-grown, clamped) bounding box."""
    if margin < 0:
        raise ParameterError("margin must be non-negative")
    x0, y0, x1, y1 = mask.bounding_box()
    x0 = max(x0 - margin, 0)
    y0 = max(y0 - margin, 0)
    x1 = min(x1 + margin, mask.width - 1)
    y1 = min(y1 + margin, mask.height - 1)
    return BinaryMask(mask.bits[y0:y1 + 1, x0:x1 + 1].copy())

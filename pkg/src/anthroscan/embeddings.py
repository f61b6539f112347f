"""512-dimensional unimodal feature extraction behind a uniform contract.

Real face/body/point-cloud networks plug in as adapters; the shipped
providers are deterministic synthetic stand-ins. ``synthetic_embed`` is
the shared core: unit-norm seeded-hash noise plus a fixed linear encoding
of a (weight, height, adiposity) signal in coordinates 0..2, which makes
the signal linearly recoverable by downstream regressors.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass, field

import numpy as np

from .errors import ContractError, DataError, ParameterError
from .images import RgbImage
from .mesh import PointCloud

EMBEDDING_DIM = 512
MODALITIES = ("face", "body", "cloud")

# Linear signal encoding used by all synthetic providers.
WEIGHT_COORD, HEIGHT_COORD, ADIPOSITY_COORD = 0, 1, 2
WEIGHT_SCALE = 0.05   # per kg
HEIGHT_SCALE = 0.02   # per cm
ADIPOSITY_SCALE = 1.0


@dataclass(frozen=True)
class EmbeddingVector:
    values: np.ndarray = field(repr=False)  # (512,) float64
    modality: str = "face"

    def __post_init__(self):
        v = np.asarray(self.values, dtype=np.float64)
        if v.shape != (EMBEDDING_DIM,):
            raise DataError(f"embedding must have exactly {EMBEDDING_DIM} values, got {v.shape}")
        if not np.all(np.isfinite(v)):
            raise DataError("embedding contains non-finite values")
        if self.modality not in MODALITIES:
            raise ParameterError(f"unknown modality {self.modality!r}")
        object.__setattr__(self, "values", v)


@dataclass(frozen=True)
class ExtractorDescriptor:
    """Identifies one extractor build; digest is stable across runs."""

    modality: str
    provider_name: str
    version: str = "1"

    def __post_init__(self):
        if self.modality not in MODALITIES:
            raise ParameterError(f"unknown modality {self.modality!r}")

    @property
    def digest(self) -> str:
        payload = f"{self.modality}|{self.provider_name}|{self.version}".encode()
        return hashlib.sha256(payload).hexdigest()[:16]


@dataclass(frozen=True)
class SignalEncoding:
    """Scalar signal a synthetic extractor plants into its embedding."""

    weight_kg: float = 0.0
    height_cm: float = 0.0
    adiposity: float = 0.0

    def __post_init__(self):
        for name in ("weight_kg", "height_cm", "adiposity"):
            if not np.isfinite(getattr(self, name)):
                raise ParameterError(f"signal component {name} must be finite")


def _seeded_rng(seed: int, key: bytes) -> np.random.Generator:
    digest = hashlib.sha256(seed.to_bytes(16, "little", signed=True) + key).digest()
    return np.random.default_rng(int.from_bytes(digest[:8], "little"))


def synthetic_embed(key, seed: int, signal: SignalEncoding = SignalEncoding(),
                    modality: str = "face", noise_scale: float = 1.0,
                    signal_gain: float = 1.0) -> EmbeddingVector:
    """Unit-norm seeded noise plus the linear signal encoding.

    ``key`` is any payload identity (bytes or str); the same (key, seed)
    always produces the same vector.
    """
    if isinstance(key, str):
        key = key.encode()
    rng = _seeded_rng(seed, bytes(key))
    noise = rng.standard_normal(EMBEDDING_DIM)
    noise /= np.linalg.norm(noise)
    vec = noise * noise_scale
    vec[WEIGHT_COORD] += signal_gain * WEIGHT_SCALE * signal.weight_kg
    vec[HEIGHT_COORD] += signal_gain * HEIGHT_SCALE * signal.height_cm
    vec[ADIPOSITY_COORD] += signal_gain * ADIPOSITY_SCALE * signal.adiposity
    return EmbeddingVector(vec, modality)


def _image_key(image: RgbImage) -> bytes:
    return hashlib.sha256(image.pixels.tobytes()
                          + image.pixels.shape[1].to_bytes(4, "little")).digest()


def _cloud_key(cloud: PointCloud) -> bytes:
    return hashlib.sha256(np.round(cloud.points, 9).tobytes()).digest()


class ImageStatsExtractor:
    """Serve-time synthetic provider: perceives simple geometry statistics.

    The planted signal is derived from the input itself (subject fill
    fraction, crop proportions, brightness), so estimates react to the
    subject's silhouette the way a real extractor would react to body
    shape, while staying fully deterministic.
    """

    def __init__(self, descriptor: ExtractorDescriptor, seed: int = 0):
        self.descriptor = descriptor
        self.seed = seed

    def _signal_from_image(self, image: RgbImage) -> SignalEncoding:
        px = image.pixels
        fill = float(np.any(px > 8, axis=2).mean())
        aspect = image.width / image.height
        brightness = float(px.mean()) / 255.0
        # fill and aspect together track silhouette girth
        return SignalEncoding(weight_kg=fill * 60.0 + aspect * 100.0,
                              height_cm=100.0 + 100.0 / (1.0 + aspect),
                              adiposity=brightness)

    def _signal_from_cloud(self, cloud: PointCloud) -> SignalEncoding:
        lo = cloud.points.min(axis=0)
        hi = cloud.points.max(axis=0)
        extent = hi - lo
        volume = float(np.prod(np.maximum(extent, 1e-9)))
        return SignalEncoding(weight_kg=volume * 60.0,
                              height_cm=float(extent[1]) * 100.0,
                              adiposity=float(extent[0] / max(extent[1], 1e-9)))

    def extract(self, payload) -> EmbeddingVector:
        modality = self.descriptor.modality
        if modality in ("face", "body"):
            if not isinstance(payload, RgbImage):
                raise ContractError(
                    f"{modality} extractor expects an image, got {type(payload).__name__}")
            key = _image_key(payload)
            signal = self._signal_from_image(payload)
        elif modality == "cloud":
            if not isinstance(payload, PointCloud):
                raise ContractError(
                    f"cloud extractor expects a point cloud, got {type(payload).__name__}")
            key = _cloud_key(payload)
            signal = self._signal_from_cloud(payload)
        else:  # pragma: no cover - descriptor validates modality
            raise ContractError(f"unsupported modality {modality!r}")
        return synthetic_embed(key + self.descriptor.digest.encode(), self.seed,
                               signal, modality)


# Synthetic stand-ins for the architecture grid. signal_gain / noise_scale
# differentiate providers deterministically so sweep tables have distinct,
# reproducible rows.
SYNTHETIC_PROFILES = {
    "face": {
        "vggface-sim": (1.00, 1.00),
        "facenet-sim": (0.85, 1.20),
    },
    "body": {
        "xception-sim": (1.00, 1.00),
        "resnet152-sim": (0.85, 1.25),
    },
    "cloud": {
        "pointnet-sim": (1.00, 1.00),
        "dgcnn-sim": (0.70, 1.40),
        "gbnet-sim": (0.85, 1.20),
    },
}


def profile_descriptor(modality: str, provider_name: str) -> ExtractorDescriptor:
    if modality not in SYNTHETIC_PROFILES or provider_name not in SYNTHETIC_PROFILES[modality]:
        raise ParameterError(f"no synthetic profile {provider_name!r} for modality {modality!r}")
    return ExtractorDescriptor(modality, provider_name)


class RecordSignalExtractor:
    """Harness-side synthetic provider fed with ground-truth subject signal.

    Emits the signal-bearing embedding for a record key, optionally
    degraded: ``degradation`` adds deterministic noise scaled by its
    magnitude (the brightness-sensitivity knob used by lighting sweeps).
    Degradation 0 is bitwise the clean embedding.
    """

    def __init__(self, descriptor: ExtractorDescriptor, seed: int = 0,
                 sensitivity: float = 4.0):
        self.descriptor = descriptor
        self.seed = seed
        self.sensitivity = sensitivity
        gain, noise = SYNTHETIC_PROFILES.get(descriptor.modality, {}).get(
            descriptor.provider_name, (1.0, 1.0))
        self.signal_gain = gain
        self.noise_scale = noise

    def extract(self, record_key: str, signal: SignalEncoding,
                degradation: float = 0.0) -> EmbeddingVector:
        base = synthetic_embed(
            f"{record_key}|{self.descriptor.digest}", self.seed, signal,
            self.descriptor.modality, self.noise_scale, self.signal_gain)
        if degradation == 0.0:
            return base
        if degradation < 0 or not np.isfinite(degradation):
            raise ParameterError(f"degradation must be finite and >= 0, got {degradation}")
        corruption = synthetic_embed(
            f"degrade|{record_key}|{self.descriptor.digest}", self.seed,
            SignalEncoding(), self.descriptor.modality)
        vec = base.values + self.sensitivity * degradation * corruption.values
        return EmbeddingVector(vec, self.descriptor.modality)

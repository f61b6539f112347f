"""Learnable-weight multi-modal fusion with an MLP regression head.

Three 512-dim modality embeddings are combined as a convex combination
whose weights are the softmax of three trainable logits, concatenated
with a gender one-hot and height in metres (515 inputs), then passed
through a 512-512-256-1 rectifier MLP whose final layer carries a ridge
penalty. Training is plain numpy: manual backprop + Adam, fully
deterministic for a fixed seed.
"""

from __future__ import annotations

import hashlib
import json
import struct
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .embeddings import EMBEDDING_DIM, EmbeddingVector
from .errors import (DataError, FormatError, NumericError, ParameterError,
                     TrainingError)

GENDERS = ("male", "female")
DEFAULT_HIDDEN = (512, 512, 256)
EXTRA_INPUTS = 3  # gender one-hot (2) + height in metres (1)
PARAMS_MAGIC = b"ASFUSE01"
PARAMS_FORMAT_VERSION = 1


def gender_one_hot(gender: str) -> np.ndarray:
    if gender not in GENDERS:
        raise ParameterError(f"gender must be one of {GENDERS}, got {gender!r}")
    return np.array([1.0, 0.0]) if gender == "male" else np.array([0.0, 1.0])


@dataclass(frozen=True)
class SubjectFeatures:
    """Per-subject fusion inputs. Ablated modalities carry zero vectors."""

    z_face: EmbeddingVector
    z_body: EmbeddingVector
    z_cloud: EmbeddingVector
    gender: str
    height_cm: float
    age_years: float = 0.0

    def __post_init__(self):
        gender_one_hot(self.gender)
        if not np.isfinite(self.height_cm) or self.height_cm <= 0:
            raise ParameterError(f"height must be positive, got {self.height_cm}")


@dataclass
class FusionModelParams:
    """Fusion logits plus MLP layer weights. Mutated only while training."""

    weight_logits: np.ndarray                 # (3,)
    weights: list = field(repr=False)         # W[i] with shape (in_i, out_i)
    biases: list = field(repr=False)          # b[i] with shape (out_i,)
    ridge_lambda: float = 1e-3
    seed: int = 0
    modality_mask: tuple = (True, True, True)
    normalize_embeddings: bool = False        # unit-norm inputs before fusing

    @property
    def embed_dim(self) -> int:
        return self.weights[0].shape[0] - EXTRA_INPUTS

    @property
    def layer_shapes(self):
        return [w.shape for w in self.weights]

    def copy(self) -> "FusionModelParams":
        return FusionModelParams(self.weight_logits.copy(),
                                 [w.copy() for w in self.weights],
                                 [b.copy() for b in self.biases],
                                 self.ridge_lambda, self.seed,
                                 tuple(self.modality_mask),
                                 self.normalize_embeddings)

    def validate(self) -> None:
        if self.weight_logits.shape != (3,) or not np.all(np.isfinite(self.weight_logits)):
            raise ParameterError("weight_logits must be 3 finite reals")
        if len(self.weights) != len(self.biases) or not self.weights:
            raise ParameterError("weights/biases layer lists are inconsistent")
        prev = None
        for i, (w, b) in enumerate(zip(self.weights, self.biases)):
            if w.ndim != 2 or b.shape != (w.shape[1],):
                raise ParameterError(f"layer {i} has inconsistent shapes {w.shape}/{b.shape}")
            if prev is not None and w.shape[0] != prev:
                raise ParameterError(f"layer {i} input {w.shape[0]} != previous output {prev}")
            if not (np.all(np.isfinite(w)) and np.all(np.isfinite(b))):
                raise ParameterError(f"layer {i} contains non-finite parameters")
            prev = w.shape[1]
        if self.weights[-1].shape[1] != 1:
            raise ParameterError("output layer must have width 1")
        if self.ridge_lambda < 0:
            raise ParameterError("ridge_lambda must be >= 0")
        if not any(self.modality_mask):
            raise ParameterError("at least one modality must stay unmasked")


def init_params(seed: int = 0, embed_dim: int = EMBEDDING_DIM,
                hidden=DEFAULT_HIDDEN, ridge_lambda: float = 1e-3,
                modality_mask=(True, True, True)) -> FusionModelParams:
    """He-initialised weights, zero biases, equal fusion logits."""
    rng = np.random.default_rng(seed)
    dims = [embed_dim + EXTRA_INPUTS, *hidden, 1]
    weights, biases = [], []
    for d_in, d_out in zip(dims[:-1], dims[1:]):
        weights.append(rng.standard_normal((d_in, d_out)) * np.sqrt(2.0 / d_in))
        biases.append(np.zeros(d_out))
    params = FusionModelParams(np.zeros(3), weights, biases, ridge_lambda, seed,
                               tuple(bool(m) for m in modality_mask))
    params.validate()
    return params


def fusion_weights(params: FusionModelParams) -> np.ndarray:
    """softmax over the unmasked logits; masked modalities get exactly 0."""
    mask = np.asarray(params.modality_mask, dtype=bool)
    logits = np.where(mask, params.weight_logits, -np.inf)
    shifted = logits - logits[mask].max()
    exp = np.where(mask, np.exp(shifted), 0.0)
    return exp / exp.sum()


def unit_norm(values: np.ndarray) -> np.ndarray:
    norm = float(np.linalg.norm(values))
    return values / norm if norm > 0 else values


def fuse(z_face: EmbeddingVector, z_body: EmbeddingVector, z_cloud: EmbeddingVector,
         params: FusionModelParams) -> np.ndarray:
    """Convex combination of the three embeddings under the learned weights."""
    w = fusion_weights(params)
    stack = []
    for z, modality in ((z_face, "face"), (z_body, "body"), (z_cloud, "cloud")):
        if z.modality != modality:
            raise DataError(f"expected {modality} embedding, got {z.modality}")
        stack.append(unit_norm(z.values) if params.normalize_embeddings else z.values)
    return w[0] * stack[0] + w[1] * stack[1] + w[2] * stack[2]


def assemble_input(fused: np.ndarray, gender: str, height_cm: float) -> np.ndarray:
    """[fused || gender one-hot || height in metres]."""
    fused = np.asarray(fused, dtype=np.float64)
    if not np.isfinite(height_cm) or height_cm <= 0:
        raise ParameterError(f"height must be positive, got {height_cm}")
    return np.concatenate([fused, gender_one_hot(gender), [height_cm / 100.0]])


def _forward_cache(x: np.ndarray, params: FusionModelParams):
    """Activations for every layer; relu on all but the last."""
    h = x
    pre, post = [], [x]
    n = len(params.weights)
    for i, (w, b) in enumerate(zip(params.weights, params.biases)):
        a = h @ w + b
        pre.append(a)
        h = np.maximum(a, 0.0) if i < n - 1 else a
        post.append(h)
    return pre, post


def forward_batch(x: np.ndarray, params: FusionModelParams) -> np.ndarray:
    """Predicted weight (kg) for a (B, D) input batch."""
    x = np.atleast_2d(np.asarray(x, dtype=np.float64))
    if x.shape[1] != params.weights[0].shape[0]:
        raise ParameterError(
            f"input width {x.shape[1]} != model input {params.weights[0].shape[0]}")
    _, post = _forward_cache(x, params)
    out = post[-1][:, 0]
    if not np.all(np.isfinite(out)):
        raise NumericError("non-finite value in MLP forward pass")
    return out


def forward(x: np.ndarray, params: FusionModelParams) -> float:
    """Predicted weight for a single assembled input vector."""
    return float(forward_batch(np.asarray(x)[None, :], params)[0])


def predict_weight(features: SubjectFeatures, params: FusionModelParams) -> float:
    fused = fuse(features.z_face, features.z_body, features.z_cloud, params)
    return forward(assemble_input(fused, features.gender, features.height_cm), params)


def loss(predictions, targets, params: FusionModelParams) -> float:
    """Mean squared error plus the ridge penalty on the output layer."""
    p = np.asarray(predictions, dtype=np.float64)
    t = np.asarray(targets, dtype=np.float64)
    if p.size == 0 or t.size == 0:
        raise ParameterError("loss needs a non-empty batch")
    if p.shape != t.shape:
        raise ParameterError(f"predictions {p.shape} and targets {t.shape} differ")
    mse = float(np.mean((p - t) ** 2))
    return mse + params.ridge_lambda * float(np.sum(params.weights[-1] ** 2))


def loss_and_grads(params: FusionModelParams, z_stack: np.ndarray,
                   gender_onehot: np.ndarray, height_m: np.ndarray,
                   targets: np.ndarray, ridge_scope: str = "output"):
    """Loss plus analytic gradients for every parameter.

    z_stack: (3, B, E) modality embeddings; gender_onehot: (B, 2);
    height_m: (B,); targets: (B,). ridge_scope "output" penalizes the
    final layer only; "all" regularizes every weight matrix. Returns
    (loss, grad_logits, grad_ws, grad_bs).
    """
    if ridge_scope not in ("output", "all"):
        raise ParameterError(f"ridge_scope must be 'output' or 'all', got {ridge_scope!r}")
    w = fusion_weights(params)
    fused = np.einsum("j,jbe->be", w, z_stack)
    x = np.concatenate([fused, gender_onehot, height_m[:, None]], axis=1)
    pre, post = _forward_cache(x, params)
    preds = post[-1][:, 0]
    batch = len(targets)
    residual = preds - targets
    n = len(params.weights)
    penalized = range(n) if ridge_scope == "all" else (n - 1,)
    total = float(np.mean(residual ** 2)) + params.ridge_lambda * float(
        sum(np.sum(params.weights[i] ** 2) for i in penalized))

    grad_ws = [None] * n
    grad_bs = [None] * n
    delta = (2.0 * residual / batch)[:, None]  # d loss / d output pre-activation
    for i in range(n - 1, -1, -1):
        grad_ws[i] = post[i].T @ delta
        grad_bs[i] = delta.sum(axis=0)
        if i in penalized:
            grad_ws[i] = grad_ws[i] + 2.0 * params.ridge_lambda * params.weights[i]
        if i > 0:
            delta = (delta @ params.weights[i].T) * (pre[i - 1] > 0)
    d_x = delta @ params.weights[0].T
    d_fused = d_x[:, :z_stack.shape[2]]
    d_w = np.einsum("be,jbe->j", d_fused, z_stack)
    # Softmax jacobian; masked logits stay frozen.
    mask = np.asarray(params.modality_mask, dtype=float)
    grad_logits = w * (d_w - float(np.dot(w, d_w))) * mask
    return total, grad_logits, grad_ws, grad_bs


@dataclass(frozen=True)
class TrainingConfig:
    learning_rate: float = 1e-3
    epochs: int = 200
    batch_size: int = 32
    ridge_lambda: float = 1e-3
    seed: int = 0
    early_stop_patience: int = 20
    ridge_scope: str = "output"          # or "all": regularize every layer
    normalize_embeddings: bool = False   # L2-normalize each embedding before fusing

    def __post_init__(self):
        if not np.isfinite(self.learning_rate) or self.learning_rate <= 0:
            raise ParameterError("learning_rate must be positive")
        if self.epochs < 1:
            raise ParameterError("epochs must be >= 1")
        if self.batch_size < 1:
            raise ParameterError("batch_size must be >= 1")
        if self.early_stop_patience < 1:
            raise ParameterError("early_stop_patience must be >= 1")
        if self.ridge_scope not in ("output", "all"):
            raise ParameterError("ridge_scope must be 'output' or 'all'")


@dataclass
class TrainingLog:
    """Per-epoch training history; serializable as line-delimited JSON."""

    records: list = field(default_factory=list)
    height_source: str = "ground_truth"

    def append(self, epoch: int, train_mae: float, val_mae: float, w: np.ndarray):
        self.records.append({
            "epoch": epoch,
            "train_mae": float(train_mae),
            "val_mae": float(val_mae),
            "w_F": float(w[0]),
            "w_B": float(w[1]),
            "w_R": float(w[2]),
        })

    def to_jsonl(self) -> str:
        return "".join(json.dumps(r, sort_keys=True) + "\n" for r in self.records)


class _Adam:
    def __init__(self, shapes, lr, beta1=0.9, beta2=0.999, eps=1e-8):
        self.lr, self.beta1, self.beta2, self.eps = lr, beta1, beta2, eps
        self.m = [np.zeros(s) for s in shapes]
        self.v = [np.zeros(s) for s in shapes]
        self.t = 0

    def step(self, values, grads):
        self.t += 1
        b1, b2 = self.beta1, self.beta2
        out = []
        for i, (val, g) in enumerate(zip(values, grads)):
            self.m[i] = b1 * self.m[i] + (1 - b1) * g
            self.v[i] = b2 * self.v[i] + (1 - b2) * g * g
            m_hat = self.m[i] / (1 - b1 ** self.t)
            v_hat = self.v[i] / (1 - b2 ** self.t)
            out.append(val - self.lr * m_hat / (np.sqrt(v_hat) + self.eps))
        return out


def _assemble_tensors(dataset, normalize_embeddings: bool = False):
    def maybe(values):
        return unit_norm(values) if normalize_embeddings else values

    z_stack = np.stack([
        np.stack([maybe(f.z_face.values) for f, _ in dataset]),
        np.stack([maybe(f.z_body.values) for f, _ in dataset]),
        np.stack([maybe(f.z_cloud.values) for f, _ in dataset]),
    ])
    genders = np.stack([gender_one_hot(f.gender) for f, _ in dataset])
    heights = np.array([f.height_cm / 100.0 for f, _ in dataset])
    targets = np.array([float(t) for _, t in dataset])
    return z_stack, genders, heights, targets


def fit(dataset, config: TrainingConfig, val_dataset=None, on_step=None,
        modality_mask=(True, True, True)):
    """Train fusion + MLP params by Adam on minibatches.

    Returns (params, TrainingLog). Deterministic for a fixed config.seed.
    Targets are standardized internally; the standardization is folded
    back into the output layer, so the returned params predict kilograms.
    ``on_step`` (if given) is called with the params after every optimizer
    step.
    """
    if len(dataset) < 2:
        raise ParameterError("training needs at least 2 samples")
    z_stack, genders, heights, targets = _assemble_tensors(
        dataset, config.normalize_embeddings)
    embed_dim = z_stack.shape[2]
    params = init_params(config.seed, embed_dim, ridge_lambda=config.ridge_lambda,
                         modality_mask=modality_mask)
    params.normalize_embeddings = config.normalize_embeddings

    t_mean = float(targets.mean())
    t_std = float(targets.std())
    if t_std <= 0:
        t_std = 1.0
    targets_std = (targets - t_mean) / t_std

    if val_dataset:
        vz, vg, vh, vt = _assemble_tensors(val_dataset, config.normalize_embeddings)
    rng = np.random.default_rng(config.seed)
    opt = _Adam([params.weight_logits.shape] + [w.shape for w in params.weights]
                + [b.shape for b in params.biases], config.learning_rate)
    n = len(dataset)
    n_layers = len(params.weights)
    log = TrainingLog()
    best_metric = np.inf
    best_params = None
    best_epoch = 0
    stale = 0

    def predict_std(zs, gs, hs):
        w = fusion_weights(params)
        fused = np.einsum("j,jbe->be", w, zs)
        x = np.concatenate([fused, gs, hs[:, None]], axis=1)
        _, post = _forward_cache(x, params)
        return post[-1][:, 0]

    for epoch in range(1, config.epochs + 1):
        order = rng.permutation(n)
        for start in range(0, n, config.batch_size):
            idx = order[start:start + config.batch_size]
            total, g_logits, g_ws, g_bs = loss_and_grads(
                params, z_stack[:, idx], genders[idx], heights[idx],
                targets_std[idx], config.ridge_scope)
            if not np.isfinite(total):
                raise TrainingError(
                    f"training diverged at epoch {epoch}: loss={total!r}, "
                    f"lr={config.learning_rate}, batch={config.batch_size}")
            updated = opt.step([params.weight_logits, *params.weights, *params.biases],
                               [g_logits, *g_ws, *g_bs])
            params.weight_logits = updated[0]
            params.weights = updated[1:1 + n_layers]
            params.biases = updated[1 + n_layers:]
            if on_step is not None:
                on_step(params)

        train_pred = predict_std(z_stack, genders, heights) * t_std + t_mean
        train_mae = float(np.mean(np.abs(train_pred - targets)))
        if val_dataset:
            val_pred = predict_std(vz, vg, vh) * t_std + t_mean
            val_mae = float(np.mean(np.abs(val_pred - vt)))
        else:
            val_mae = train_mae
        log.append(epoch, train_mae, val_mae, fusion_weights(params))

        if val_mae < best_metric - 1e-12:
            best_metric = val_mae
            best_params = params.copy()
            best_epoch = epoch
            stale = 0
        else:
            stale += 1
            if val_dataset and stale >= config.early_stop_patience:
                break

    if best_params is not None:
        params = best_params
    # Fold target standardization into the output layer.
    params.weights[-1] = params.weights[-1] * t_std
    params.biases[-1] = params.biases[-1] * t_std + t_mean
    params.validate()
    log.records.append({"best_epoch": best_epoch, "target_mean": t_mean,
                        "target_std": t_std, "height_source": log.height_source,
                        "ridge_scope": config.ridge_scope,
                        "normalize_embeddings": config.normalize_embeddings})
    return params, log


# --- persistence ----------------------------------------------------------

def save_params(params: FusionModelParams) -> bytes:
    """Self-describing little-endian binary; weights stored as float32."""
    params.validate()
    head = bytearray()
    head += PARAMS_MAGIC
    head += struct.pack("<I", PARAMS_FORMAT_VERSION)
    head += struct.pack("<q", params.seed)
    head += struct.pack("<d", params.ridge_lambda)
    head += struct.pack("<3B", *(1 if m else 0 for m in params.modality_mask))
    head += struct.pack("<B", 1 if params.normalize_embeddings else 0)
    head += struct.pack("<I", len(params.weights))
    for w in params.weights:
        head += struct.pack("<II", w.shape[0], w.shape[1])
    body = bytearray()
    body += np.asarray(params.weight_logits, dtype="<f4").tobytes()
    for w, b in zip(params.weights, params.biases):
        body += np.ascontiguousarray(w, dtype="<f4").tobytes()
        body += np.asarray(b, dtype="<f4").tobytes()
    payload = bytes(head + body)
    return payload + hashlib.sha256(payload).digest()


def load_params(blob: bytes) -> FusionModelParams:
    """Inverse of save_params; raises FormatError on any corruption."""
    if len(blob) < len(PARAMS_MAGIC) + 4 + 32:
        raise FormatError("parameter file truncated: shorter than fixed header")
    if blob[:8] != PARAMS_MAGIC:
        raise FormatError(f"not a fusion parameter file (magic {blob[:8]!r})")
    payload, digest = blob[:-32], blob[-32:]
    if hashlib.sha256(payload).digest() != digest:
        raise FormatError("parameter file corrupt: integrity digest mismatch")
    off = 8
    (version,) = struct.unpack_from("<I", payload, off)
    off += 4
    if version != PARAMS_FORMAT_VERSION:
        raise FormatError(
            f"unsupported parameter format version: expected {PARAMS_FORMAT_VERSION}, found {version}")
    (seed,) = struct.unpack_from("<q", payload, off)
    off += 8
    (ridge_lambda,) = struct.unpack_from("<d", payload, off)
    off += 8
    mask = tuple(bool(b) for b in struct.unpack_from("<3B", payload, off))
    off += 3
    (normalize_flag,) = struct.unpack_from("<B", payload, off)
    off += 1
    (n_layers,) = struct.unpack_from("<I", payload, off)
    off += 4
    shapes = []
    for _ in range(n_layers):
        shapes.append(struct.unpack_from("<II", payload, off))
        off += 8
    try:
        logits = np.frombuffer(payload, dtype="<f4", count=3, offset=off).astype(np.float64)
        off += 12
        weights, biases = [], []
        for d_in, d_out in shapes:
            w = np.frombuffer(payload, dtype="<f4", count=d_in * d_out, offset=off)
            off += 4 * d_in * d_out
            b = np.frombuffer(payload, dtype="<f4", count=d_out, offset=off)
            off += 4 * d_out
            weights.append(w.reshape(d_in, d_out).astype(np.float64))
            biases.append(b.astype(np.float64))
    except ValueError as exc:
        raise FormatError(f"parameter file truncated: {exc}") from exc
    if off != len(payload):
        raise FormatError("parameter file has trailing or missing bytes")
    params = FusionModelParams(logits, weights, biases, ridge_lambda, seed, mask,
                               bool(normalize_flag))
    params.validate()
    return params


def params_digest(params: FusionModelParams) -> str:
    return hashlib.sha256(save_params(params)).hexdigest()[:16]


def save_params_file(params: FusionModelParams, path) -> None:
    Path(path).write_bytes(save_params(params))


def load_params_file(path) -> FusionModelParams:
    try:
        blob = Path(path).read_bytes()
    except OSError as exc:
        raise FormatError(f"cannot read parameter file {path}: {exc}") from exc
    return load_params(blob)

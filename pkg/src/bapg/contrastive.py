"""One-hidden-layer frame encoder trained with a hard-negative triplet loss."""

from __future__ import annotations

import logging
from dataclasses import dataclass, fields

import numpy as np

from .core import (
    NORM_EPS,
    EmbeddingSequence,
    FrameFeatureSequence,
    ValidationError,
    check_finite,
)
from .io import fmt, parse_header
from .sample_pool import draw_triplet

logger = logging.getLogger(__name__)

LOSS_MODES = ("standard", "literal")
OPTIMIZERS = ("sgd", "adam")
ADAM_BETAS = (0.9, 0.999)
ADAM_EPS = 1e-8


@dataclass
class EncoderParams:
    W1: np.ndarray  # (h, d)
    b1: np.ndarray  # (h,)
    W2: np.ndarray  # (e, h)
    b2: np.ndarray  # (e,)

    def __post_init__(self):
        for f in fields(self):
            setattr(self, f.name, np.asarray(getattr(self, f.name), dtype=np.float64))
        h, d = self.W1.shape
        e = self.W2.shape[0]
        if self.b1.shape != (h,) or self.W2.shape != (e, h) or self.b2.shape != (e,):
            raise ValidationError(
                f"inconsistent encoder shapes W1{self.W1.shape} b1{self.b1.shape} "
                f"W2{self.W2.shape} b2{self.b2.shape}"
            )
        for f in fields(self):
            check_finite(np.atleast_2d(getattr(self, f.name)), f.name)

    @property
    def dims(self) -> tuple[int, int, int]:
        h, d = self.W1.shape
        return d, h, self.W2.shape[0]

    def tensors(self) -> dict[str, np.ndarray]:
        return {f.name: getattr(self, f.name) for f in fields(self)}

    def copy(self) -> "EncoderParams":
        return EncoderParams(**{k: v.copy() for k, v in self.tensors().items()})


@dataclass(frozen=True)
class TrainConfig:
    learning_rate: float = 0.1
    epochs: int = 50
    batch_size: int = 32
    margin: float = 1.0
    loss_mode: str = "standard"
    seed: int = 0
    weight_decay: float = 4e-4
    hidden_dim: int = 32
    embed_dim: int = 16
    optimizer: str = "sgd"

    def __post_init__(self):
        if not self.learning_rate >= 0:
            raise ValidationError("learning_rate must be >= 0")
        if self.epochs < 1 or self.batch_size < 1:
            raise ValidationError("epochs and batch_size must be >= 1")
        if self.margin < 0:
            raise ValidationError("margin must be >= 0")
        if self.loss_mode not in LOSS_MODES:
            raise ValidationError(f"loss_mode must be one of {LOSS_MODES}")
        if self.weight_decay < 0:
            raise ValidationError("weight_decay must be >= 0")
        if self.optimizer not in OPTIMIZERS:
            raise ValidationError(f"optimizer must be one of {OPTIMIZERS}")


def init_params(d: int, h: int = 32, e: int = 16, seed: int = 0) -> EncoderParams:
    """Uniform init in [-1/sqrt(fan_in), 1/sqrt(fan_in)]."""
    rng = np.random.default_rng(seed)
    s1 = 1.0 / np.sqrt(d)
    s2 = 1.0 / np.sqrt(h)
    return EncoderParams(
        W1=rng.uniform(-s1, s1, (h, d)),
        b1=rng.uniform(-s1, s1, h),
        W2=rng.uniform(-s2, s2, (e, h)),
        b2=rng.uniform(-s2, s2, e),
    )


def _forward(X: np.ndarray, params: EncoderParams):
    hidden = np.tanh(X @ params.W1.T + params.b1)
    u = hidden @ params.W2.T + params.b2
    r = np.linalg.norm(u, axis=1, keepdims=True)
    return u / (r + NORM_EPS), (X, hidden, u, r)


def _backward(dx: np.ndarray, cache, params: EncoderParams) -> dict[str, np.ndarray]:
    X, hidden, u, r = cache
    denom = r + NORM_EPS
    # d(u / (|u| + eps)) / du, with the r == 0 case contributing only the first term
    radial = np.divide((u * dx).sum(axis=1, keepdims=True), r * denom**2,
                       out=np.zeros_like(r), where=r > 0)
    du = dx / denom - u * radial
    dz = (du @ params.W2) * (1.0 - hidden**2)
    return {"W1": dz.T @ X, "b1": dz.sum(axis=0), "W2": du.T @ hidden, "b2": du.sum(axis=0)}


def encode_batch(X, params: EncoderParams) -> np.ndarray:
    X = np.atleast_2d(np.asarray(X, dtype=np.float64))
    if X.shape[1] != params.W1.shape[1]:
        raise ValidationError(f"raw feature dim {X.shape[1]} != encoder input dim {params.W1.shape[1]}")
    return _forward(X, params)[0]


def encode(raw, params: EncoderParams) -> np.ndarray:
    raw = np.asarray(raw, dtype=np.float64)
    if raw.ndim != 1:
        raise ValidationError("encode takes a single raw feature vector")
    return encode_batch(raw[None, :], params)[0]


def embed_sequence(seq: FrameFeatureSequence, params: EncoderParams) -> EmbeddingSequence:
    return EmbeddingSequence(seq.video_id, seq.interval_seconds, encode_batch(seq.features, params))


def triplet_loss(s_ap, s_an, margin: float = 1.0, mode: str = "standard"):
    """Margin loss on one (or an array of) triplet similarities.

    ``literal``: ``max(s_an - margin, 0) - s_ap``.
    ``standard``: ``max(margin + s_an - s_ap, 0)``.
    """
    s_ap = np.asarray(s_ap, dtype=np.float64)
    s_an = np.asarray(s_an, dtype=np.float64)
    if np.any(np.abs(s_ap) > 1 + 1e-9) or np.any(np.abs(s_an) > 1 + 1e-9):
        raise ValidationError("similarities must lie in [-1, 1]")
    if mode == "literal":
        out = np.maximum(s_an - margin, 0.0) - s_ap
    elif mode == "standard":
        out = np.maximum(margin + s_an - s_ap, 0.0)
    else:
        raise ValidationError(f"unknown loss mode {mode!r}")
    return float(out) if out.ndim == 0 else out


def batch_loss_and_gradients(A, P, N, params: EncoderParams, margin: float, mode: str):
    """Mean triplet loss over a batch and its gradient w.r.t. every parameter.

    The hinge subgradient at the kink is taken as 0.
    """
    A, P, N = (np.atleast_2d(np.asarray(v, dtype=np.float64)) for v in (A, P, N))
    B = A.shape[0]
    x, cache = _forward(np.vstack([A, P, N]), params)
    xa, xp, xn = x[:B], x[B:2 * B], x[2 * B:]
    s_ap = (xa * xp).sum(axis=1)
    s_an = (xa * xn).sum(axis=1)
    if mode == "standard":
        active = (margin + s_an - s_ap) > 0
        losses = np.where(active, margin + s_an - s_ap, 0.0)
        g_ap = np.where(active, -1.0, 0.0)
        g_an = np.where(active, 1.0, 0.0)
    elif mode == "literal":
        active = (s_an - margin) > 0
        losses = np.where(active, s_an - margin, 0.0) - s_ap
        g_ap = -np.ones(B)
        g_an = np.where(active, 1.0, 0.0)
    else:
        raise ValidationError(f"unknown loss mode {mode!r}")
    g_ap, g_an = g_ap[:, None] / B, g_an[:, None] / B
    dxa = g_ap * xp + g_an * xn
    dxp = g_ap * xa
    dxn = g_an * xa
    grads = _backward(np.vstack([dxa, dxp, dxn]), cache, params)
    return float(losses.mean()), EncoderParams(**grads)


def loss_gradients(anchor, positive, negative, params: EncoderParams, margin: float = 1.0,
                   mode: str = "standard") -> EncoderParams:
    """Gradient of the triplet loss for one (anchor, positive, negative) raw triplet."""
    return batch_loss_and_gradients(anchor, positive, negative, params, margin, mode)[1]


def triplet_similarities(A, P, N, params: EncoderParams | None = None):
    """Cosine s(anchor, positive) and s(anchor, negative), on raw vectors when ``params`` is None."""
    A, P, N = (np.atleast_2d(np.asarray(v, dtype=np.float64)) for v in (A, P, N))
    if params is None:
        A, P, N = (v / np.linalg.norm(v, axis=1, keepdims=True) for v in (A, P, N))
    else:
        A, P, N = (encode_batch(v, params) for v in (A, P, N))
    return (A * P).sum(axis=1), (A * N).sum(axis=1)


@dataclass
class TrainResult:
    params: EncoderParams
    loss_trace: list[float]
    initial_params: EncoderParams


def train_encoder(dataset, cfg: TrainConfig, init: EncoderParams | None = None) -> TrainResult:
    """Mini-batch gradient descent with weight decay on hard-negative triplets.

    ``dataset`` is a sequence of ``(FrameFeatureSequence, SamplePools)``. Each
    epoch draws one triplet per positive frame of every trainable instance
    (so every ground-truth frame acts as an anchor once in expectation), in
    a seeded random order.
    """
    dataset = list(dataset)
    slots = []
    for v, (seq, pools) in enumerate(dataset):
        if seq.video_id != pools.video_id:
            raise ValidationError(f"features {seq.video_id} paired with pools {pools.video_id}")
        for n in pools.trainable():
            slots.extend([(v, n)] * len(pools.positives[n]))
    if not slots:
        raise ValidationError("no instance has >= 2 positives and >= 1 hard negative; nothing to train on")
    d = dataset[0][0].dim
    params = init.copy() if init is not None else init_params(d, cfg.hidden_dim, cfg.embed_dim, cfg.seed)
    initial = params.copy()
    rng = np.random.default_rng(cfg.seed)
    slots = np.array(slots)
    trace = []
    moments = {k: (np.zeros_like(v), np.zeros_like(v)) for k, v in params.tensors().items()}
    step = 0
    for epoch in range(cfg.epochs):
        order = slots[rng.permutation(len(slots))]
        epoch_loss = 0.0
        for start in range(0, len(order), cfg.batch_size):
            batch = order[start:start + cfg.batch_size]
            trips = [draw_triplet(dataset[v][1], n, rng) for v, n in batch]
            feats = [dataset[v][0].features for v, _ in batch]
            A = np.array([f[t.anchor] for f, t in zip(feats, trips)])
            P = np.array([f[t.positive] for f, t in zip(feats, trips)])
            N = np.array([f[t.hard_negative] for f, t in zip(feats, trips)])
            loss, grads = batch_loss_and_gradients(A, P, N, params, cfg.margin, cfg.loss_mode)
            epoch_loss += loss * len(batch)
            step += 1
            for name, g in grads.tensors().items():
                w = getattr(params, name)
                g = g + cfg.weight_decay * w
                if cfg.optimizer == "adam":
                    b1, b2 = ADAM_BETAS
                    m1, m2 = moments[name]
                    m1 *= b1
                    m1 += (1 - b1) * g
                    m2 *= b2
                    m2 += (1 - b2) * g * g
                    g = (m1 / (1 - b1**step)) / (np.sqrt(m2 / (1 - b2**step)) + ADAM_EPS)
                w -= cfg.learning_rate * g
        trace.append(epoch_loss / len(order))
        logger.debug("epoch %d loss %.6f", epoch + 1, trace[-1])
    return TrainResult(params, trace, initial)


def format_params(params: EncoderParams) -> str:
    d, h, e = params.dims
    lines = [f"# d={d} h={h} e={e}"]
    for name, arr in params.tensors().items():
        lines.append(name)
        lines.append(" ".join(fmt(v) for v in arr.ravel()))
    return "\n".join(lines) + "\n"


def parse_params(text: str) -> EncoderParams:
    lines = [ln.strip() for ln in text.splitlines() if ln.strip()]
    head = parse_header(lines[0])
    d, h, e = int(head["d"]), int(head["h"]), int(head["e"])
    shapes = {"W1": (h, d), "b1": (h,), "W2": (e, h), "b2": (e,)}
    out = {}
    it = iter(lines[1:])
    for name in it:
        if name not in shapes:
            raise ValidationError(f"unexpected encoder section {name!r}")
        vals = np.array([float(v) for v in next(it, "").split()])
        if vals.size != int(np.prod(shapes[name])):
            raise ValidationError(f"section {name}: expected {int(np.prod(shapes[name]))} values, got {vals.size}")
        out[name] = vals.reshape(shapes[name])
    missing = set(shapes) - set(out)
    if missing:
        raise ValidationError(f"encoder file missing sections {sorted(missing)}")
    return EncoderParams(**out)

"""Shared numeric types and similarity computations."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

# slack for comparing frame timestamps (i * T) against annotation times
TIME_EPS = 1e-9
NORM_EPS = 1e-12


class ValidationError(ValueError):
    """Raised when an input violates a documented precondition."""


class DegenerateInputError(ValidationError):
    """Raised for inputs where the requested quantity is undefined."""


@dataclass(frozen=True)
class FrameFeatureSequence:
    """Raw per-frame features of one video, frame ``i`` taken at ``i * interval``."""

    video_id: str
    interval_seconds: float
    features: np.ndarray

    def __post_init__(self):
        feats = np.asarray(self.features, dtype=np.float64)
        if feats.ndim != 2 or feats.shape[0] < 1 or feats.shape[1] < 1:
            raise ValidationError(f"{self.video_id}: features must be a non-empty l x d matrix")
        if not self.interval_seconds > 0:
            raise ValidationError(f"{self.video_id}: interval must be positive")
        check_finite(feats, self.video_id)
        object.__setattr__(self, "features", feats)

    @property
    def num_frames(self) -> int:
        return self.features.shape[0]

    @property
    def dim(self) -> int:
        return self.features.shape[1]

    def timestamps(self) -> np.ndarray:
        return np.arange(self.num_frames) * self.interval_seconds


@dataclass(frozen=True)
class EmbeddingSequence:
    video_id: str
    interval_seconds: float
    embeddings: np.ndarray

    def __post_init__(self):
        emb = np.asarray(self.embeddings, dtype=np.float64)
        if emb.ndim != 2 or emb.shape[0] < 1:
            raise ValidationError(f"{self.video_id}: embeddings must be a non-empty matrix")
        check_finite(emb, self.video_id)
        norms = np.linalg.norm(emb, axis=1)
        bad = np.flatnonzero(np.abs(norms - 1.0) > 1e-6)
        if bad.size:
            raise ValidationError(f"{self.video_id}: row {bad[0]} is not unit norm ({norms[bad[0]]!r})")
        object.__setattr__(self, "embeddings", emb)

    @property
    def num_frames(self) -> int:
        return self.embeddings.shape[0]


@dataclass(frozen=True)
class SimilarityMatrix:
    video_id: str
    values: np.ndarray
    interval_seconds: float

    def __post_init__(self):
        vals = np.asarray(self.values, dtype=np.float64)
        if vals.ndim != 2 or vals.shape[0] != vals.shape[1] or vals.shape[0] < 1:
            raise ValidationError(f"{self.video_id}: similarity matrix must be square and non-empty")
        check_finite(vals, self.video_id)
        if not np.allclose(vals, vals.T, rtol=0, atol=1e-9):
            raise ValidationError(f"{self.video_id}: similarity matrix is not symmetric")
        if not np.allclose(np.diag(vals), 1.0, rtol=0, atol=1e-9):
            raise ValidationError(f"{self.video_id}: similarity diagonal must be 1")
        if np.abs(vals).max() > 1 + 1e-9:
            raise ValidationError(f"{self.video_id}: similarity entries must lie in [-1, 1]")
        object.__setattr__(self, "values", vals)

    @property
    def num_frames(self) -> int:
        return self.values.shape[0]


@dataclass(frozen=True)
class ActionInstance:
    t_s: float
    t_e: float
    label: str


@dataclass(frozen=True)
class VideoAnnotation:
    """Ground-truth action instances of one video.

    Instances must be sorted by start time and pairwise disjoint; touching
    endpoints are allowed.
    """

    video_id: str
    duration_seconds: float
    instances: tuple[ActionInstance, ...] = field(default_factory=tuple)

    def __post_init__(self):
        if not self.duration_seconds > 0:
            raise ValidationError(f"{self.video_id}: duration must be positive")
        insts = tuple(self.instances)
        for n, inst in enumerate(insts):
            if not (0 <= inst.t_s < inst.t_e <= self.duration_seconds + TIME_EPS):
                raise ValidationError(
                    f"{self.video_id}: instance {n} [{inst.t_s}, {inst.t_e}] outside [0, {self.duration_seconds}]"
                )
            if n and inst.t_s < insts[n - 1].t_s:
                raise ValidationError(f"{self.video_id}: instances not sorted by start (instance {n})")
            if n and inst.t_s < insts[n - 1].t_e:
                raise ValidationError(f"{self.video_id}: instance {n} overlaps instance {n - 1}")
        object.__setattr__(self, "instances", insts)


def check_finite(arr: np.ndarray, video_id: str = "") -> None:
    bad = ~np.isfinite(arr)
    if bad.any():
        row = int(np.argwhere(bad)[0][0])
        raise ValidationError(f"{video_id}: non-finite value in row {row}")


def cosine_similarity(a, b) -> float:
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.shape != b.shape or a.ndim != 1 or a.size < 1:
        raise ValidationError(f"cosine_similarity needs equal-length vectors, got {a.shape} and {b.shape}")
    na = np.linalg.norm(a)
    nb = np.linalg.norm(b)
    if na == 0 or nb == 0:
        raise DegenerateInputError("cosine similarity is undefined for a zero-norm vector")
    return float(np.clip(a @ b / (na * nb), -1.0, 1.0))


def build_similarity_matrix(emb: EmbeddingSequence) -> SimilarityMatrix:
    """Pairwise cosine similarities of all frames of a video."""
    x = np.asarray(emb.embeddings, dtype=np.float64)
    check_finite(x, emb.video_id)
    x = x / np.linalg.norm(x, axis=1, keepdims=True)
    s = x @ x.T
    s = 0.5 * (s + s.T)
    np.clip(s, -1.0, 1.0, out=s)
    np.fill_diagonal(s, 1.0)
    return SimilarityMatrix(emb.video_id, s, emb.interval_seconds)


def num_samples(duration_seconds: float, interval_seconds: float) -> int:
    if not (duration_seconds > 0 and interval_seconds > 0):
        raise ValidationError("duration and interval must be positive")
    return max(1, math.ceil(duration_seconds / interval_seconds - TIME_EPS))


def uniform_sample_times(duration_seconds: float, interval_seconds: float) -> np.ndarray:
    """Timestamps ``0, T, 2T, ...`` strictly below the duration."""
    return np.arange(num_samples(duration_seconds, interval_seconds)) * interval_seconds


def time_to_index(t: float, interval_seconds: float, length: int) -> int:
    """Frame (or feature row) holding time ``t``; clamped to ``[0, length - 1]``."""
    i = math.floor(t / interval_seconds + TIME_EPS)
    return min(max(i, 0), length - 1)


def l2_normalize(x: np.ndarray) -> np.ndarray:
    x = np.asarray(x, dtype=np.float64)
    return x / (np.linalg.norm(x, axis=-1, keepdims=True) + NORM_EPS)

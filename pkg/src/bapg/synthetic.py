"""Synthetic videos with planted actions flanked by look-alike warm-up/cool-down phases.

Every frame is ``concat(background, semantic) + noise``. The background part
is one random vector per video, shared by all frames, so in raw feature space
every frame of a video looks alike. Only the low-energy semantic part tells
an action (class prototype) from its warm-up/cool-down (a fresh random vector
per instance) and from plain background (zero).
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .core import ActionInstance, FrameFeatureSequence, ValidationError, VideoAnnotation
from .io import atomic_write_text, format_annotations, write_features


class PlacementError(ValidationError):
    pass


@dataclass(frozen=True)
class SynthConfig:
    num_videos: int = 50
    duration_range: tuple[float, float] = (60.0, 120.0)
    interval: float = 1.0
    actions_range: tuple[int, int] = (1, 3)
    action_length_range: tuple[float, float] = (5.0, 15.0)
    hard_length_range: tuple[float, float] = (2.0, 4.0)
    background_dim: int = 32
    semantic_dim: int = 8
    background_scale: float = 1.0
    semantic_scale: float = 0.3
    noise_scale: float = 0.05
    num_classes: int = 5
    seed: int = 0

    def __post_init__(self):
        if self.num_videos < 0:
            raise ValidationError("num_videos must be >= 0")
        if not self.interval > 0:
            raise ValidationError("interval must be positive")
        for name in ("duration_range", "actions_range", "action_length_range", "hard_length_range"):
            lo, hi = getattr(self, name)
            if lo > hi or lo < 0:
                raise ValidationError(f"{name} must be a non-empty, non-negative range")
        if self.duration_range[0] <= 0 or self.action_length_range[0] <= 0:
            raise ValidationError("durations must be positive")
        if self.background_dim < 1 or self.semantic_dim < 1 or self.num_classes < 1:
            raise ValidationError("dimensions and num_classes must be >= 1")
        if min(self.background_scale, self.semantic_scale, self.noise_scale) < 0:
            raise ValidationError("scales must be non-negative")

    @property
    def dim(self) -> int:
        return self.background_dim + self.semantic_dim


def _frames(range_seconds, interval) -> tuple[int, int]:
    lo = math.ceil(range_seconds[0] / interval - 1e-9)
    hi = math.floor(range_seconds[1] / interval + 1e-9)
    if hi < lo:
        raise ValidationError(f"range {range_seconds} s holds no whole frame at interval {interval}")
    return lo, hi


def class_prototypes(cfg: SynthConfig) -> np.ndarray:
    rng = np.random.default_rng(np.random.SeedSequence([cfg.seed, 2**31]))
    return rng.normal(0.0, cfg.semantic_scale, (cfg.num_classes, cfg.semantic_dim))


def video_seed(cfg: SynthConfig, video_index: int) -> int:
    return int(np.random.SeedSequence([cfg.seed, video_index]).generate_state(1)[0])


def generate_video(cfg: SynthConfig, video_index: int, prototypes=None):
    """One synthetic video as ``(FrameFeatureSequence, VideoAnnotation, layout)``.

    ``layout`` is a per-frame int array: 0 background, 1 hard phase, 2 action.
    """
    if prototypes is None:
        prototypes = class_prototypes(cfg)
    rng = np.random.default_rng(video_seed(cfg, video_index))
    T = cfg.interval
    l = int(rng.integers(*_frames(cfg.duration_range, T), endpoint=True))
    k = int(rng.integers(cfg.actions_range[0], cfg.actions_range[1], endpoint=True))
    a_lo, a_hi = _frames(cfg.action_length_range, T)
    h_lo, h_hi = _frames(cfg.hard_length_range, T)
    a_lo = max(a_lo, 1)
    a_hi = max(a_hi, 1)
    if k * (a_lo + 1 + 2 * h_lo) > l:
        raise PlacementError(
            f"video {video_index}: {k} actions need at least {k * (a_lo + 1 + 2 * h_lo)} frames, video has {l}"
        )
    for _ in range(1000):
        act_len = rng.integers(a_lo, a_hi, size=k, endpoint=True)
        hard_len = rng.integers(h_lo, h_hi, size=(k, 2), endpoint=True)
        free = l - int(act_len.sum() + k + hard_len.sum())
        if free >= 0:
            break
    else:
        raise PlacementError(f"video {video_index}: could not fit {k} actions into {l} frames")
    cuts = np.sort(rng.integers(0, free, size=k, endpoint=True))
    gaps = np.diff(np.concatenate([[0], cuts]))

    d_b, d_s = cfg.background_dim, cfg.semantic_dim
    background = rng.normal(0.0, cfg.background_scale, d_b)
    semantic = np.zeros((l, d_s))
    layout = np.zeros(l, dtype=np.int8)
    labels = rng.integers(cfg.num_classes, size=k)
    instances = []
    pos = 0
    for n in range(k):
        pos += int(gaps[n])
        hard_vec = rng.normal(0.0, cfg.semantic_scale, d_s)
        left, right = int(hard_len[n, 0]), int(hard_len[n, 1])
        s = pos + left
        # frames s..e inclusive carry the action: every frame stamped inside [t_s, t_e]
        e = s + int(act_len[n])
        semantic[pos:s] = hard_vec
        semantic[s:e + 1] = prototypes[labels[n]]
        semantic[e + 1:e + 1 + right] = hard_vec
        layout[pos:s] = 1
        layout[s:e + 1] = 2
        layout[e + 1:e + 1 + right] = 1
        instances.append(ActionInstance(s * T, e * T, f"class{int(labels[n])}"))
        pos = e + 1 + right
    noise = rng.normal(0.0, cfg.noise_scale, (l, d_b + d_s))
    raw = np.hstack([np.broadcast_to(background, (l, d_b)), semantic]) + noise
    vid = f"video_{video_index:04d}"
    return (
        FrameFeatureSequence(vid, T, raw),
        VideoAnnotation(vid, l * T, tuple(instances)),
        layout,
    )


def format_manifest(rows) -> str:
    return "".join(f"{vid} {seed} {l} {k}\n" for vid, seed, l, k in rows)


def generate_dataset(cfg: SynthConfig, out_dir=None):
    """Generate ``cfg.num_videos`` videos; optionally write them under ``out_dir``.

    Layout written: ``features/<video_id>.txt``, ``annotations.txt`` and
    ``manifest.txt``. Returns ``(videos, manifest_text)`` where ``videos`` is a
    list of ``(FrameFeatureSequence, VideoAnnotation)``.
    """
    protos = class_prototypes(cfg)
    videos, rows = [], []
    for i in range(cfg.num_videos):
        seq, ann, _ = generate_video(cfg, i, protos)
        videos.append((seq, ann))
        rows.append((seq.video_id, video_seed(cfg, i), seq.num_frames, len(ann.instances)))
    manifest = format_manifest(rows)
    if out_dir is not None:
        out_dir = Path(out_dir)
        try:
            for seq, _ in videos:
                write_features(out_dir / "features" / f"{seq.video_id}.txt", seq)
            if videos:
                atomic_write_text(out_dir / "annotations.txt", format_annotations(a for _, a in videos))
            atomic_write_text(out_dir / "manifest.txt", manifest)
        except OSError as exc:
            raise OSError(f"failed writing synthetic dataset to {exc.filename or out_dir}: {exc.strerror}") from exc
    return videos, manifest

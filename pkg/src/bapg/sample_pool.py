"""Positive / hard-negative / easy-negative frame pools and triplet draws."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .core import TIME_EPS, ValidationError, VideoAnnotation

DEFAULT_HARD_WINDOW = 3.0


class InsufficientPoolError(ValidationError):
    pass


@dataclass(frozen=True)
class SamplePools:
    video_id: str
    num_frames: int
    positives: tuple[tuple[int, ...], ...]
    hard_negatives: tuple[tuple[int, ...], ...]
    easy_negatives: tuple[int, ...]
    # instance indices whose positive pool came out empty
    warnings: tuple[int, ...] = field(default_factory=tuple)

    def trainable(self) -> list[int]:
        return [n for n, (p, h) in enumerate(zip(self.positives, self.hard_negatives))
                if len(p) >= 2 and len(h) >= 1]


@dataclass(frozen=True)
class Triplet:
    video_id: str
    anchor: int
    positive: int
    hard_negative: int


def label_clips(ann: VideoAnnotation, num_frames: int, interval_seconds: float,
                hard_window_seconds: float = DEFAULT_HARD_WINDOW) -> SamplePools:
    """Split the frames of one video into sample pools.

    A frame whose timestamp lies in the closed span ``[t_s, t_e]`` of an
    instance is positive for that instance. A background frame no further
    than ``hard_window_seconds`` before a start or after an end is a hard
    negative of the nearest such instance (ties go to the earlier one).
    Everything else is an easy negative. ``math.inf`` makes the whole
    adjacent background clip hard.
    """
    if num_frames < 1 or not interval_seconds > 0:
        raise ValidationError("need at least one frame and a positive interval")
    if hard_window_seconds < 0:
        raise ValidationError("hard window must be non-negative")
    n_inst = len(ann.instances)
    pos: list[list[int]] = [[] for _ in range(n_inst)]
    hard: list[list[int]] = [[] for _ in range(n_inst)]
    easy: list[int] = []
    for i in range(num_frames):
        t = i * interval_seconds
        owner = None
        best = math.inf
        for n, inst in enumerate(ann.instances):
            if inst.t_s - TIME_EPS <= t <= inst.t_e + TIME_EPS:
                owner = n
                break
            gap = inst.t_s - t if t < inst.t_s else t - inst.t_e
            if gap <= hard_window_seconds + TIME_EPS and gap < best:
                best, owner = gap, ~n
        if owner is None:
            easy.append(i)
        elif owner >= 0:
            pos[owner].append(i)
        else:
            hard[~owner].append(i)
    return SamplePools(
        ann.video_id,
        num_frames,
        tuple(map(tuple, pos)),
        tuple(map(tuple, hard)),
        tuple(easy),
        tuple(n for n in range(n_inst) if not pos[n]),
    )


def draw_triplet(pools: SamplePools, instance_index: int, rng: np.random.Generator) -> Triplet:
    pos = pools.positives[instance_index]
    hard = pools.hard_negatives[instance_index]
    if len(pos) < 2 or len(hard) < 1:
        raise InsufficientPoolError(
            f"{pools.video_id}: instance {instance_index} has {len(pos)} positives and "
            f"{len(hard)} hard negatives (need >= 2 and >= 1)"
        )
    a, p = rng.choice(len(pos), size=2, replace=False)
    hn = rng.integers(len(hard))
    return Triplet(pools.video_id, pos[a], pos[p], hard[hn])


def format_pools(pools_list) -> str:
    lines = []
    for pools in pools_list:
        vid = pools.video_id
        for n, idx in enumerate(pools.positives):
            lines.append(" ".join([vid, str(n), "pos", *map(str, idx)]))
        for n, idx in enumerate(pools.hard_negatives):
            lines.append(" ".join([vid, str(n), "hard", *map(str, idx)]))
        lines.append(" ".join([vid, "-1", "easy", *map(str, pools.easy_negatives)]))
    return "\n".join(lines) + "\n" if lines else ""


def parse_pools(text: str, num_frames: dict[str, int]) -> list[SamplePools]:
    """Inverse of :func:`format_pools`; ``num_frames`` maps video id to frame count."""
    acc: dict[str, dict] = {}
    for lineno, line in enumerate(text.splitlines(), 1):
        parts = line.split()
        if not parts:
            continue
        if len(parts) < 3 or parts[2] not in ("pos", "hard", "easy"):
            raise ValidationError(f"pools line {lineno}: expected '<video_id> <instance_idx> <kind> <frames...>'")
        vid, n, kind = parts[0], int(parts[1]), parts[2]
        frames = tuple(int(x) for x in parts[3:])
        rec = acc.setdefault(vid, {"pos": {}, "hard": {}, "easy": ()})
        if kind == "easy":
            rec["easy"] = frames
        else:
            rec[kind][n] = frames
    out = []
    for vid, rec in acc.items():
        n_inst = max([*rec["pos"], *rec["hard"], -1]) + 1
        pos = tuple(rec["pos"].get(n, ()) for n in range(n_inst))
        hard = tuple(rec["hard"].get(n, ()) for n in range(n_inst))
        out.append(SamplePools(vid, num_frames[vid], pos, hard, rec["easy"],
                               tuple(n for n in range(n_inst) if not pos[n])))
    return out

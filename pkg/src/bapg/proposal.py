"""Multi-scale proposals from change-point sets, and proposal-refined video features."""

from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np

from .core import SimilarityMatrix, ValidationError, check_finite, time_to_index
from .io import fmt
from .tsc import PrefixTable, Segmentation, build_prefix_table, optimal_change_points

logger = logging.getLogger(__name__)

DEFAULT_ALPHA = 0.5
DEFAULT_TOP_K = 10


@dataclass(frozen=True)
class Proposal:
    video_id: str
    t_s: float
    t_e: float
    score: float
    source_m: int

    def __post_init__(self):
        if not (0 <= self.t_s < self.t_e):
            raise ValidationError(f"{self.video_id}: proposal needs 0 <= t_s < t_e, got [{self.t_s}, {self.t_e}]")
        if not np.isfinite(self.score):
            raise ValidationError(f"{self.video_id}: proposal score must be finite")


@dataclass(frozen=True)
class FeatureSequence:
    """Video-level feature rows, row ``i`` covering ``[i * stride, (i + 1) * stride)``."""

    video_id: str
    stride_seconds: float
    rows: np.ndarray

    def __post_init__(self):
        rows = np.asarray(self.rows, dtype=np.float64)
        if rows.ndim != 2 or rows.shape[0] < 1:
            raise ValidationError(f"{self.video_id}: feature sequence needs at least one row")
        if not self.stride_seconds > 0:
            raise ValidationError(f"{self.video_id}: stride must be positive")
        check_finite(rows, self.video_id)
        object.__setattr__(self, "rows", rows)

    def __len__(self):
        return self.rows.shape[0]


def sort_proposals(proposals) -> list[Proposal]:
    # descending score; ties resolved by position so output order is reproducible
    return sorted(proposals, key=lambda p: (-p.score, p.video_id, p.t_s, p.t_e, p.source_m))


def score_proposal(S: SimilarityMatrix, a: int, b: int, table: PrefixTable | None = None) -> float:
    """Mean similarity over the block ``[a, b] x [a, b]`` (inclusive)."""
    l = S.num_frames
    if not (0 <= a <= b < l):
        raise ValidationError(f"segment [{a}, {b}] out of range for {l} frames")
    if table is None:
        table = build_prefix_table(S)
    n = b - a + 1
    return float(np.clip(table.block_sum(a, b) / (n * n), -1.0, 1.0))


def proposals_from_segmentations(S: SimilarityMatrix, segmentations, table: PrefixTable | None = None) -> list[Proposal]:
    """Turn every segment of every segmentation into a scored proposal.

    Exact duplicate intervals keep the highest score (then the smallest
    ``source_m``). Sorted by descending score.
    """
    if table is None:
        table = build_prefix_table(S)
    T = S.interval_seconds
    best: dict[tuple[int, int], Proposal] = {}
    for seg in segmentations:
        for a, b in seg.segments():
            p = Proposal(S.video_id, a * T, b * T, score_proposal(S, a, b - 1, table), seg.m)
            cur = best.get((a, b))
            if cur is None or (p.score, -p.source_m) > (cur.score, -cur.source_m):
                best[a, b] = p
    return sort_proposals(best.values())


def segment_all(S: SimilarityMatrix, m_values, table: PrefixTable | None = None,
                min_length: int = 1) -> list[Segmentation]:
    m_values = sorted(set(int(m) for m in m_values))
    if not m_values:
        raise ValidationError("m_values must not be empty")
    if table is None:
        table = build_prefix_table(S)
    return [optimal_change_points(S, m, table, min_length) for m in m_values]


def generate_proposals(S: SimilarityMatrix, m_values, min_length: int = 1) -> list[Proposal]:
    table = build_prefix_table(S)
    return proposals_from_segmentations(S, segment_all(S, m_values, table, min_length), table)


def map_time_to_feature_index(t: float, stride_seconds: float, length: int) -> int:
    if t < 0:
        raise ValidationError(f"negative timestamp {t}")
    if t > (length + 1) * stride_seconds:
        logger.warning("timestamp %.6g s is more than one stride past the %d-row feature", t, length)
    return time_to_index(t, stride_seconds, length)


def truncate_features(F_v: FeatureSequence, p: Proposal) -> FeatureSequence:
    """Rows ``map(t_s) .. map(t_e)`` (inclusive) of the video-level feature."""
    n = len(F_v)
    a = map_time_to_feature_index(p.t_s, F_v.stride_seconds, n)
    b = map_time_to_feature_index(p.t_e, F_v.stride_seconds, n)
    if a > b:
        raise ValidationError(f"{p.video_id}: proposal [{p.t_s}, {p.t_e}] maps to empty row range {a}..{b}")
    return FeatureSequence(F_v.video_id, F_v.stride_seconds, F_v.rows[a:b + 1])


def refine_features(F_v: FeatureSequence, proposals, top_k: int = DEFAULT_TOP_K,
                    alpha: float = DEFAULT_ALPHA) -> FeatureSequence:
    """Add ``alpha`` times each top-scored proposal's mean feature to the rows it spans.

    Proposal means are all taken from the unrefined ``F_v``, so overlapping
    proposals contribute independently of order. Rows outside every selected
    proposal are returned untouched.
    """
    if top_k < 0:
        raise ValidationError("top_k must be >= 0")
    selected = [p for p in sort_proposals(proposals) if p.video_id == F_v.video_id][:top_k]
    out = F_v.rows.copy()
    n = len(F_v)
    for p in selected:
        a = map_time_to_feature_index(p.t_s, F_v.stride_seconds, n)
        b = map_time_to_feature_index(p.t_e, F_v.stride_seconds, n)
        if a > b:
            raise ValidationError(f"{p.video_id}: proposal [{p.t_s}, {p.t_e}] maps to empty row range")
        out[a:b + 1] += alpha * F_v.rows[a:b + 1].mean(axis=0)
    return FeatureSequence(F_v.video_id, F_v.stride_seconds, out)


def format_proposals(proposals) -> str:
    return "".join(
        f"{p.video_id} {fmt(p.t_s)} {fmt(p.t_e)} {fmt(p.score)} {p.source_m}\n" for p in proposals
    )


def parse_proposals(text: str, path="") -> list[Proposal]:
    out = []
    for lineno, line in enumerate(text.splitlines(), 1):
        parts = line.split()
        if not parts or parts[0].startswith("#"):
            continue
        if len(parts) != 5:
            raise ValidationError(f"{path}:{lineno}: expected '<video_id> <t_s> <t_e> <score> <source_m>'")
        try:
            out.append(Proposal(parts[0], float(parts[1]), float(parts[2]), float(parts[3]), int(parts[4])))
        except ValueError as exc:
            raise ValidationError(f"{path}:{lineno}: {exc}") from exc
    return out

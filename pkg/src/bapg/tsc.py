"""Temporal similarity clustering: exact change-point segmentation of a similarity matrix.

A segment ``[a, b]`` (inclusive frame indices) costs its kernel scatter::

    V(a, b) = sum_{i=a..b} S[i, i] - (1 / (b - a + 1)) * sum_{i, j=a..b} S[i, j]

which is the squared distance of the segment's embeddings to their mean, so
it is zero for a perfectly homogeneous segment. With ``m`` change points the
frames split into ``m + 1`` half-open segments ``[0, c1), [c1, c2), ...,
[cm, l)``; :func:`optimal_change_points` finds the split minimizing total
cost exactly.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass

import numpy as np

from .core import SimilarityMatrix, ValidationError
from .io import fmt

# costs closer than this count as ties (broken towards the lexicographically
# smallest change-point list)
TIE_TOL = 1e-10

BRUTE_FORCE_MAX_FRAMES = 20
BRUTE_FORCE_MAX_SUBSETS = 10**6


@dataclass(frozen=True)
class PrefixTable:
    """Summed-area table of S and running sums of its diagonal."""

    P: np.ndarray  # (l+1, l+1), P[i, j] = sum S[:i, :j]
    D: np.ndarray  # (l+1,),     D[i] = sum diag(S)[:i]

    @property
    def num_frames(self) -> int:
        return self.D.size - 1

    def block_sum(self, a: int, b: int, c: int | None = None, d: int | None = None) -> float:
        """Sum of ``S[a:b+1, c:d+1]`` (defaults to the square block ``[a, b] x [a, b]``)."""
        if c is None:
            c, d = a, b
        P = self.P
        return float(P[b + 1, d + 1] - P[a, d + 1] - P[b + 1, c] + P[a, c])

    def diag_sum(self, a: int, b: int) -> float:
        return float(self.D[b + 1] - self.D[a])


@dataclass(frozen=True)
class Segmentation:
    video_id: str
    num_frames: int
    change_points: tuple[int, ...]
    total_cost: float
    segment_costs: tuple[float, ...]

    @property
    def m(self) -> int:
        return len(self.change_points)

    def segments(self) -> list[tuple[int, int]]:
        """Half-open ``(start, stop)`` frame ranges."""
        edges = [0, *self.change_points, self.num_frames]
        return list(zip(edges[:-1], edges[1:]))


def build_prefix_table(S) -> PrefixTable:
    vals = S.values if isinstance(S, SimilarityMatrix) else np.asarray(S, dtype=np.float64)
    l = vals.shape[0]
    P = np.zeros((l + 1, l + 1))
    P[1:, 1:] = vals.cumsum(axis=0).cumsum(axis=1)
    D = np.concatenate([[0.0], np.cumsum(np.diag(vals))])
    return PrefixTable(P, D)


def segment_cost(table: PrefixTable, a: int, b: int) -> float:
    l = table.num_frames
    if not (0 <= a <= b < l):
        raise ValidationError(f"segment [{a}, {b}] out of range for {l} frames")
    return table.diag_sum(a, b) - table.block_sum(a, b) / (b - a + 1)


def cost_matrix(table: PrefixTable) -> np.ndarray:
    """``C[a, b] = V(a, b)`` for all ``a <= b``; ``inf`` below the diagonal."""
    l = table.num_frames
    P, D = table.P, table.D
    a = np.arange(l)[:, None]
    b = np.arange(l)[None, :]
    bb = np.minimum(np.maximum(a, b), l - 1)
    block = P[bb + 1, bb + 1] - P[a, bb + 1] - P[bb + 1, a] + P[a, a]
    with np.errstate(divide="ignore", invalid="ignore"):
        C = D[bb + 1] - D[a] - block / (bb - a + 1)
    return np.where(b >= a, C, np.inf)


def _check_m(m: int, l: int, min_length: int = 1) -> None:
    if min_length < 1:
        raise ValidationError(f"min_length must be >= 1, got {min_length}")
    if not (0 <= m <= l - 1):
        raise ValidationError(f"change-point count m={m} must lie in [0, {l - 1}] for {l} frames")
    if (m + 1) * min_length > l:
        raise ValidationError(
            f"m={m} change points with segments of >= {min_length} frames need {(m + 1) * min_length} frames, have {l}"
        )


def _make(S: SimilarityMatrix, table: PrefixTable, cps) -> Segmentation:
    l = S.num_frames
    edges = [0, *cps, l]
    costs = tuple(segment_cost(table, s, e - 1) for s, e in zip(edges[:-1], edges[1:]))
    return Segmentation(S.video_id, l, tuple(int(c) for c in cps), math.fsum(costs), costs)


def optimal_change_points(S: SimilarityMatrix, m: int, table: PrefixTable | None = None,
                          min_length: int = 1) -> Segmentation:
    """Exact minimum-scatter segmentation with exactly ``m`` change points.

    Runs the segmental dynamic program over suffixes: ``R[k][t]`` is the best
    cost of splitting frames ``[t, l)`` with ``k`` change points, so
    ``R[k][t] = min_{u > t} V(t, u - 1) + R[k-1][u]``. Walking forward from
    frame 0 and taking the smallest ``u`` that attains each minimum yields the
    lexicographically smallest optimal change-point list. ``O(m l^2)``.

    ``min_length`` restricts the search to segmentations whose segments all
    span at least that many frames.
    """
    l = S.num_frames
    _check_m(m, l, min_length)
    if table is None:
        table = build_prefix_table(S)
    C = cost_matrix(table)
    L = min_length
    # R[k, t]; infeasible suffixes (fewer than (k + 1) * L frames) stay inf
    R = np.full((m + 1, l + 1), np.inf)
    R[0, :l - L + 1] = C[:l - L + 1, l - 1]

    def candidates(k, t):
        # first segment [t, u - 1] with u in [t + L, l - k * L]
        return C[t, t + L - 1:l - k * L] + R[k - 1, t + L:l - k * L + 1]

    for k in range(1, m + 1):
        for t in range(l - (k + 1) * L + 1):
            R[k, t] = candidates(k, t).min()
    cps = []
    t = 0
    for k in range(m, 0, -1):
        cand = candidates(k, t)
        best = cand.min()
        u = t + L + int(np.flatnonzero(cand <= best + TIE_TOL * max(1.0, abs(best)))[0])
        cps.append(u)
        t = u
    return _make(S, table, cps)


def brute_force_change_points(S: SimilarityMatrix, m: int, min_length: int = 1) -> Segmentation:
    """Exhaustive search over all ``m``-subsets of interior boundaries (test oracle)."""
    l = S.num_frames
    _check_m(m, l, min_length)
    n_subsets = math.comb(l - 1, m)
    if l > BRUTE_FORCE_MAX_FRAMES or n_subsets > BRUTE_FORCE_MAX_SUBSETS:
        raise ValidationError(
            f"brute force refused: l={l}, C({l - 1}, {m})={n_subsets} exceeds guard "
            f"(l <= {BRUTE_FORCE_MAX_FRAMES}, subsets <= {BRUTE_FORCE_MAX_SUBSETS})"
        )
    vals = S.values
    costs = {}

    def naive(a, b):
        # direct double sum, independent of the prefix table
        if (a, b) not in costs:
            block = vals[a:b + 1, a:b + 1]
            costs[a, b] = float(np.trace(block) - block.sum() / (b - a + 1))
        return costs[a, b]

    totals = []
    # combinations() yields subsets in lexicographic order
    for cps in itertools.combinations(range(1, l), m):
        edges = (0, *cps, l)
        if min(e - s for s, e in zip(edges[:-1], edges[1:])) < min_length:
            continue
        totals.append((math.fsum(naive(s, e - 1) for s, e in zip(edges[:-1], edges[1:])), cps))
    best = min(t for t, _ in totals)
    cps = next(c for t, c in totals if t <= best + TIE_TOL * max(1.0, abs(best)))
    edges = (0, *cps, l)
    seg_costs = tuple(naive(s, e - 1) for s, e in zip(edges[:-1], edges[1:]))
    return Segmentation(S.video_id, l, cps, math.fsum(seg_costs), seg_costs)


def format_segmentation(seg: Segmentation) -> str:
    return f"{seg.video_id} m={seg.m} cost={fmt(seg.total_cost)} cps={','.join(map(str, seg.change_points))}"


def parse_segmentation(line: str, num_frames: int) -> tuple[str, int, float, tuple[int, ...]]:
    parts = line.split()
    if len(parts) != 4 or not parts[1].startswith("m=") or not parts[2].startswith("cost=") \
            or not parts[3].startswith("cps="):
        raise ValidationError(f"malformed segmentation line {line!r}")
    m = int(parts[1][2:])
    cps_text = parts[3][4:]
    cps = tuple(int(c) for c in cps_text.split(",")) if cps_text else ()
    if len(cps) != m or list(cps) != sorted(set(cps)) or any(not 0 < c < num_frames for c in cps):
        raise ValidationError(f"inconsistent change points in {line!r}")
    return parts[0], m, float(parts[2][5:]), cps

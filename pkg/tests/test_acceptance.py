"""Acceptance criteria 1-8, each at its stated tolerance.

Every criterion prints one ``[criterion N] PASS|FAIL ...`` line. Run with
``pytest tests/test_acceptance.py`` or ``python3 tests/test_acceptance.py``.
"""

import itertools
import sys
import time
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))

from bapg.cli import main
from bapg.contrastive import TrainConfig, train_encoder, triplet_similarities
from bapg.core import SimilarityMatrix
from bapg.evaluation import (
    Detection,
    average_recall,
    boundary_error,
    detection_average_precision,
    interpolated_ap,
    temporal_iou,
)
from bapg.io import parse_matrix, read_annotations
from bapg.proposal import Proposal, generate_proposals, parse_proposals
from bapg.sample_pool import label_clips
from bapg.synthetic import SynthConfig, generate_dataset
from bapg.tsc import brute_force_change_points, build_prefix_table, optimal_change_points

from conftest import ACCEPTANCE_LINES, finite_difference_mismatches, gram_similarity, random_triplet_config
from test_evaluation import ap_oracle

T_DEFAULT = 1.0


def report(n, ok, detail):
    line = f"[criterion {n}] {'PASS' if ok else 'FAIL'} {detail}"
    ACCEPTANCE_LINES.append(line)
    print(line, flush=True)
    return ok


def run_pipeline(out):
    assert main(["pipeline", "--out", str(out), "-q"]) == 0
    return out


@pytest.fixture(scope="module")
def pipeline_run(tmp_path_factory):
    out = tmp_path_factory.mktemp("pipeline_a")
    t0 = time.perf_counter()
    run_pipeline(out)
    return out, time.perf_counter() - t0


# ------------------------------------------------------------------ 1

def criterion_1():
    rng = np.random.default_rng(1)
    t0 = time.perf_counter()
    cases = mismatches = 0
    worst = 0.0
    for _ in range(60):
        l = int(rng.integers(2, 15))
        m = int(rng.integers(0, min(4, l - 1) + 1))
        S = gram_similarity(rng, l, int(rng.integers(2, 6)))
        dp, bf = optimal_change_points(S, m), brute_force_change_points(S, m)
        cases += 1
        worst = max(worst, abs(dp.total_cost - bf.total_cost))
        if dp.change_points != bf.change_points or abs(dp.total_cost - bf.total_cost) > 1e-9:
            mismatches += 1
    elapsed = time.perf_counter() - t0
    ok = mismatches == 0 and cases >= 50 and elapsed < 5.0
    return report(1, ok, f"DP vs exhaustive oracle: {cases} cases, {mismatches} mismatches, "
                         f"max |dcost|={worst:.2e}, {elapsed:.2f}s (< 5s)")


# ------------------------------------------------------------------ 2

def criterion_2():
    bad = 0
    total = 0
    for mode, seed in (("standard", 2), ("literal", 3)):
        rng = np.random.default_rng(seed)
        for _ in range(100):
            params, trip, margin = random_triplet_config(rng, mode)
            bad += bool(finite_difference_mismatches(params, trip, margin, mode, step=1e-5, rtol=1e-5, atol=1e-7))
            total += 1
    return report(2, bad == 0, f"gradient vs central differences (step 1e-5, 1e-5 rel / 1e-7 abs): "
                               f"{total - bad}/{total} configurations pass (100 per loss mode)")


# ------------------------------------------------------------------ 3

def criterion_3():
    rng = np.random.default_rng(4)
    worst = 0.0
    for _ in range(20):
        l = int(rng.integers(5, 41))
        S = gram_similarity(rng, l, int(rng.integers(2, 8)))
        table = build_prefix_table(S)
        for _ in range(200):
            a, b = sorted(rng.integers(0, l, size=2))
            c, d = sorted(rng.integers(0, l, size=2))
            naive = 0.0
            for i in range(a, b + 1):
                for j in range(c, d + 1):
                    naive += S.values[i, j]
            worst = max(worst, abs(table.block_sum(a, b, c, d) - naive))
    return report(3, worst <= 1e-9, f"prefix-table block sums: 20 matrices x 200 queries, max error {worst:.2e} (<= 1e-9)")


# ------------------------------------------------------------------ 4

def separation(videos, params):
    """Mean s(a, p) - mean s(a, hn) over every anchor/positive and anchor/hard pair of held-out instances."""
    ap, an = [], []
    for seq, pools in videos:
        X = seq.features
        for n in pools.trainable():
            pos, hard = pools.positives[n], pools.hard_negatives[n]
            pairs = [(a, p) for a, p in itertools.permutations(pos, 2)]
            A = X[[a for a, _ in pairs]]
            P = X[[p for _, p in pairs]]
            s_ap, _ = triplet_similarities(A, P, P, params)
            ap.extend(s_ap)
            hp = list(itertools.product(pos, hard))
            A = X[[a for a, _ in hp]]
            N = X[[h for _, h in hp]]
            _, s_an = triplet_similarities(A, N, N, params)
            an.extend(s_an)
    return float(np.mean(ap) - np.mean(an))


def criterion_4():
    t0 = time.perf_counter()
    videos, _ = generate_dataset(SynthConfig())
    data = [(s, label_clips(a, s.num_frames, s.interval_seconds)) for s, a in videos]
    n_train = int(0.8 * len(data))
    cfg = TrainConfig()
    res = train_encoder(data[:n_train], cfg)
    held = data[n_train:]
    learned = separation(held, res.params)
    raw = separation(held, None)
    elapsed = time.perf_counter() - t0
    ok = cfg.loss_mode == "standard" and learned >= 0.2 and raw <= 0.05 and elapsed < 60
    return report(4, ok, f"held-out separation after training {learned:.3f} (>= 0.2), raw features {raw:.3f} "
                         f"(<= 0.05), {len(held)} held-out videos, {elapsed:.1f}s (< 60s)")


# ------------------------------------------------------------------ 5

def _split(out):
    return {v: part for v, part in (ln.split() for ln in (out / "pools" / "split.txt").read_text().splitlines())}


def criterion_5(out, elapsed):
    anns = read_annotations(out / "synth" / "annotations.txt")
    props = parse_proposals((out / "propose" / "proposals.txt").read_text())
    split = _split(out)
    lines = []
    ok = elapsed < 120
    for name, gt in (("held-out", [a for a in anns if split[a.video_id] == "test"]), ("all videos", anns)):
        be = boundary_error(props, gt, 0.5, top_n=10)
        rec = average_recall(props, gt, 0.7, top_n=10)
        good = be is not None and max(be) <= 2 * T_DEFAULT and rec >= 0.9
        ok = ok and good
        be_txt = "no matches" if be is None else f"start {be[0]:.3f}s end {be[1]:.3f}s"
        lines.append(f"{name}: boundary error {be_txt} (<= {2 * T_DEFAULT:g}s), recall@10 tIoU 0.7 {rec:.3f} (>= 0.9)")
    return report(5, ok, "; ".join(lines) + f"; pipeline {elapsed:.1f}s (< 120s)")


# ------------------------------------------------------------------ 6

def criterion_6(out):
    anns = read_annotations(out / "synth" / "annotations.txt")
    mats = []
    for p in sorted((out / "simmat").glob("video_*.txt")):
        vid, interval, values = parse_matrix(p.read_text(), p)
        mats.append(SimilarityMatrix(vid, values, interval))
    recalls = []
    for ms in ({2}, {2, 3}, {2, 3, 4}):
        props = [p for S in mats for p in generate_proposals(S, ms)]
        recalls.append(average_recall(props, anns, 0.7))
    ok = all(a <= b for a, b in zip(recalls, recalls[1:]))
    txt = " -> ".join(f"{r:.3f}" for r in recalls)
    return report(6, ok, f"recall at tIoU 0.7 for m_values {{2}} -> {{2,3}} -> {{2,3,4}}: {txt} (non-decreasing)")


# ------------------------------------------------------------------ 7

def _random_interval(rng, lo=0.0, hi=100.0):
    a, b = np.sort(rng.uniform(lo, hi, 2))
    return (float(a), float(b) if b > a else float(a) + 1.0)


def _random_gt(rng, vid, k):
    from bapg.core import ActionInstance, VideoAnnotation
    cuts = np.sort(rng.choice(np.arange(1, 200), size=2 * k, replace=False)).astype(float)
    return VideoAnnotation(vid, 200.0, tuple(ActionInstance(cuts[2 * i], cuts[2 * i + 1], f"c{i % 2}")
                                             for i in range(k)))


def criterion_7():
    rng = np.random.default_rng(7)
    failures = {"tiou": 0, "ap": 0, "recall": 0}
    n_cases = 1000
    for _ in range(n_cases):
        a, b = _random_interval(rng), _random_interval(rng)
        v = temporal_iou(a, b)
        disjoint = min(a[1], b[1]) <= max(a[0], b[0])
        if not (v == temporal_iou(b, a) and 0 <= v <= 1 and temporal_iou(a, a) == 1.0
                and (v == 0.0) == disjoint and (v == 1.0) == (a == b)):
            failures["tiou"] += 1
    for _ in range(n_cases):
        gts = [_random_gt(rng, f"v{i}", int(rng.integers(1, 4))) for i in range(3)]
        dets = []
        for g in gts:
            for inst in g.instances:
                for _ in range(int(rng.integers(0, 3))):
                    jitter = rng.normal(0, 3, 2)
                    s, e = sorted(inst_span + j for inst_span, j in zip((inst.t_s, inst.t_e), jitter))
                    if e - s > 0.1:
                        dets.append(Detection(g.video_id, s, e, inst.label if rng.random() < 0.8 else "c9",
                                              float(rng.uniform())))
            for _ in range(int(rng.integers(0, 3))):
                s, e = _random_interval(rng, 0, 200)
                dets.append(Detection(g.video_id, s, e, f"c{int(rng.integers(2))}", float(rng.uniform())))
        th1, th2 = np.sort(rng.uniform(0.05, 1.0, 2))
        r1, r2 = detection_average_precision(dets, gts, th1), detection_average_precision(dets, gts, th2)
        # strictly monotone score transform must not change AP
        warped = [Detection(d.video_id, d.t_s, d.t_e, d.label, np.exp(3 * d.score) - 7) for d in dets]
        rw = detection_average_precision(warped, gts, th1)
        ok = 0 <= r1.mean_ap <= 1 and r2.mean_ap <= r1.mean_ap + 1e-12 and abs(rw.mean_ap - r1.mean_ap) <= 1e-12
        tp = (rng.random(int(rng.integers(0, 25))) < 0.5).astype(float)
        num_gt = int(tp.sum()) + int(rng.integers(1, 5))
        ok = ok and abs(interpolated_ap(tp, num_gt) - ap_oracle(tp, num_gt)) <= 1e-12
        failures["ap"] += not ok
    for _ in range(n_cases):
        gts = [_random_gt(rng, f"v{i}", int(rng.integers(1, 5))) for i in range(3)]
        props = []
        for g in gts:
            for _ in range(int(rng.integers(0, 15))):
                s, e = _random_interval(rng, 0, 200)
                props.append(Proposal(g.video_id, s, e, float(rng.uniform()), 0))
            for inst in g.instances:
                if rng.random() < 0.6:
                    d = rng.normal(0, 2, 2)
                    s, e = max(0.0, inst.t_s + d[0]), inst.t_e + d[1]
                    if e > s:
                        props.append(Proposal(g.video_id, s, e, float(rng.uniform()), 1))
        th1, th2 = np.sort(rng.uniform(0.5, 1.0, 2))
        n1, n2 = sorted(rng.integers(1, 20, 2))
        vals = [average_recall(props, gts, th1, n1), average_recall(props, gts, th1, n2),
                average_recall(props, gts, th2, n2)]
        warped = [Proposal(p.video_id, p.t_s, p.t_e, 5 * p.score + 2, p.source_m) for p in props]
        ok = (all(0 <= x <= 1 for x in vals) and vals[0] <= vals[1] and vals[2] <= vals[1]
              and average_recall(warped, gts, th1, n1) == vals[0])
        failures["recall"] += not ok
    ok = not any(failures.values())
    txt = ", ".join(f"{k} {n_cases - v}/{n_cases}" for k, v in failures.items())
    return report(7, ok, f"metric property suite (random cases passing): {txt}")


# ------------------------------------------------------------------ 8

def criterion_8(out_a, out_b):
    same = {}
    for f in ("propose/proposals.txt", "eval/report.txt"):
        same[f] = (out_a / f).read_bytes() == (out_b / f).read_bytes()
    every = sorted(p.relative_to(out_a) for p in out_a.rglob("*") if p.is_file())
    all_same = all((out_a / p).read_bytes() == (out_b / p).read_bytes() for p in every)
    ok = all(same.values())
    return report(8, ok, "two pipeline runs, same config and seed: " + ", ".join(
        f"{f} {'identical' if v else 'DIFFERENT'}" for f, v in same.items())
        + f"; all {len(every)} artifacts {'identical' if all_same else 'not identical'}")


# ------------------------------------------------------------------ pytest entry points

class TestAcceptance:
    def test_criterion_1_dp_matches_oracle(self):
        assert criterion_1()

    def test_criterion_2_gradients(self):
        assert criterion_2()

    def test_criterion_3_prefix_table(self):
        assert criterion_3()

    def test_criterion_4_hard_negative_separation(self):
        assert criterion_4()

    def test_criterion_5_boundary_recovery(self, pipeline_run):
        assert criterion_5(*pipeline_run)

    def test_criterion_6_change_point_ablation(self, pipeline_run):
        assert criterion_6(pipeline_run[0])

    def test_criterion_7_metric_properties(self):
        assert criterion_7()

    def test_criterion_8_determinism(self, pipeline_run, tmp_path):
        assert criterion_8(pipeline_run[0], run_pipeline(tmp_path / "pipeline_b"))


if __name__ == "__main__":
    import tempfile

    results = [criterion_1(), criterion_2(), criterion_3(), criterion_4()]
    with tempfile.TemporaryDirectory() as tmp:
        t0 = time.perf_counter()
        a = run_pipeline(Path(tmp) / "a")
        results += [criterion_5(a, time.perf_counter() - t0), criterion_6(a), criterion_7(),
                    criterion_8(a, run_pipeline(Path(tmp) / "b"))]
    sys.exit(0 if all(results) else 1)

"""``bapg`` command line: one subcommand per pipeline stage, plus ``pipeline`` for all of them.

Artifacts live under ``out_dir``::

    synth/     features/<vid>.txt, annotations.txt, manifest.txt
    pools/     pools.txt, split.txt
    model/     encoder.txt, loss_trace.txt
    embed/     <vid>.txt
    simmat/    <vid>.txt
    segment/   segmentations.txt
    propose/   proposals.txt
    refine/    <vid>.txt
    eval/      report.txt

Each stage directory also gets ``provenance.txt`` (config hash, seed and the
sha256 of every input file). Exit codes: 0 ok, 1 other failure, 2 config
error, 3 missing upstream artifact, 4 validation error.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import logging
import os
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .config import ConfigError, PipelineConfig, parse_config
from .contrastive import embed_sequence, format_params, parse_params, train_encoder
from .core import EmbeddingSequence, SimilarityMatrix, ValidationError, build_similarity_matrix
from .evaluation import (
    boundary_error,
    evaluate_over_thresholds,
    format_report,
    parse_detections,
)
from .io import atomic_write_text, fmt, format_matrix, parse_matrix, read_annotations, read_features
from .proposal import (
    FeatureSequence,
    format_proposals,
    parse_proposals,
    proposals_from_segmentations,
    refine_features,
    segment_all,
    sort_proposals,
)
from .sample_pool import format_pools, label_clips, parse_pools
from .synthetic import generate_dataset
from .tsc import Segmentation, build_prefix_table, format_segmentation, parse_segmentation

logger = logging.getLogger("bapg")

EXIT_OK = 0
EXIT_OTHER = 1
EXIT_CONFIG = 2
EXIT_MISSING = 3
EXIT_VALIDATION = 4

STAGES = ("synth", "pools", "train", "embed", "simmat", "segment", "propose", "refine", "eval")


class MissingArtifactError(FileNotFoundError):
    pass


class UsageError(Exception):
    pass


# ---------------------------------------------------------------- helpers

def _sha256(path: Path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


def _require(path: Path) -> Path:
    if not path.exists():
        raise MissingArtifactError(f"missing upstream artifact {path}")
    return path


def _list_matrices(directory: Path) -> list[Path]:
    _require(directory)
    files = sorted(p for p in directory.glob("*.txt") if p.name != "provenance.txt")
    if not files:
        raise MissingArtifactError(f"no artifacts in {directory}")
    return files


class Run:
    """Resolved config plus path layout for one invocation."""

    def __init__(self, cfg: PipelineConfig):
        self.cfg = cfg
        self.out = Path(cfg.out_dir)

    @property
    def data_dir(self) -> Path:
        return Path(self.cfg.input_dir) if self.cfg.input_dir else self.out / "synth"

    def stage_dir(self, name) -> Path:
        return self.out / ("model" if name == "train" else name)

    def rel(self, path: Path) -> str:
        try:
            return Path(os.path.relpath(path, self.out)).as_posix()
        except ValueError:
            return str(path)

    def write_provenance(self, stage: str, inputs) -> None:
        lines = [
            f"stage={stage}",
            f"package_version={__version__}",
            f"config_sha256={self.cfg.digest()}",
            f"seed={self.cfg.seed}",
        ]
        for p in sorted(set(Path(p) for p in inputs), key=self.rel):
            lines.append(f"input {self.rel(p)} sha256={_sha256(p)}")
        atomic_write_text(self.stage_dir(stage) / "provenance.txt", "\n".join(lines) + "\n")

    # -- loaders ------------------------------------------------------
    def features(self):
        files = _list_matrices(self.data_dir / "features")
        return [read_features(p) for p in files], files

    def annotations(self):
        path = _require(self.data_dir / "annotations.txt")
        return {a.video_id: a for a in read_annotations(path)}, path

    def split(self):
        path = _require(self.out / "pools" / "split.txt")
        out = {}
        for line in path.read_text(encoding="utf-8").splitlines():
            if line.strip():
                vid, part = line.split()
                out[vid] = part
        return out, path

    def matrices(self, stage):
        files = _list_matrices(self.out / stage)
        return [(p, *parse_matrix(p.read_text(encoding="utf-8"), p)) for p in files], files


# ---------------------------------------------------------------- stages

def stage_synth(run: Run, args) -> None:
    videos, _ = generate_dataset(run.cfg.synth, run.out / "synth")
    run.write_provenance("synth", [])
    logger.info("synth: %d videos -> %s", len(videos), run.out / "synth")


def stage_pools(run: Run, args) -> None:
    seqs, feat_files = run.features()
    anns, ann_file = run.annotations()
    pools, split = [], []
    n_train = max(1, int(np.floor(len(seqs) * run.cfg.train_fraction + 1e-9)))
    for i, seq in enumerate(seqs):
        if seq.video_id not in anns:
            raise ValidationError(f"video {seq.video_id} has features but no annotation header")
        p = label_clips(anns[seq.video_id], seq.num_frames, seq.interval_seconds, run.cfg.hard_window)
        for n in p.warnings:
            logger.warning("%s: instance %d has no positive frame", seq.video_id, n)
        pools.append(p)
        split.append(f"{seq.video_id} {'train' if i < n_train else 'test'}")
    d = run.stage_dir("pools")
    atomic_write_text(d / "pools.txt", format_pools(pools))
    atomic_write_text(d / "split.txt", "\n".join(split) + "\n")
    run.write_provenance("pools", [*feat_files, ann_file])
    logger.info("pools: %d videos, %d train", len(seqs), n_train)


def stage_train(run: Run, args) -> None:
    seqs, feat_files = run.features()
    pools_file = _require(run.out / "pools" / "pools.txt")
    split, split_file = run.split()
    pools = {p.video_id: p for p in parse_pools(pools_file.read_text(encoding="utf-8"),
                                                {s.video_id: s.num_frames for s in seqs})}
    data = [(s, pools[s.video_id]) for s in seqs if split.get(s.video_id) == "train"]
    result = train_encoder(data, run.cfg.train)
    d = run.stage_dir("train")
    atomic_write_text(d / "encoder.txt", format_params(result.params))
    atomic_write_text(d / "loss_trace.txt", "".join(f"{i + 1} {fmt(v)}\n" for i, v in enumerate(result.loss_trace)))
    run.write_provenance("train", [*feat_files, pools_file, split_file])
    logger.info("train: %d videos, final loss %.4f", len(data), result.loss_trace[-1])


def stage_embed(run: Run, args) -> None:
    seqs, feat_files = run.features()
    enc_file = _require(run.out / "model" / "encoder.txt")
    params = parse_params(enc_file.read_text(encoding="utf-8"))
    d = run.stage_dir("embed")
    for seq in seqs:
        emb = embed_sequence(seq, params)
        atomic_write_text(d / f"{seq.video_id}.txt", format_matrix(seq.video_id, seq.interval_seconds, emb.embeddings))
    run.write_provenance("embed", [*feat_files, enc_file])
    logger.info("embed: %d videos", len(seqs))


def stage_simmat(run: Run, args) -> None:
    items, files = run.matrices("embed")
    d = run.stage_dir("simmat")
    for _, vid, interval, values in items:
        S = build_similarity_matrix(EmbeddingSequence(vid, interval, values))
        atomic_write_text(d / f"{vid}.txt", format_matrix(vid, interval, S.values))
    run.write_provenance("simmat", files)
    logger.info("simmat: %d videos", len(items))


def _similarities(run: Run):
    items, files = run.matrices("simmat")
    return [SimilarityMatrix(vid, values, interval) for _, vid, interval, values in items], files


def stage_segment(run: Run, args) -> None:
    mats, files = _similarities(run)
    lines = []
    for S in mats:
        try:
            segs = segment_all(S, run.cfg.m_values, min_length=run.cfg.min_segment_frames)
        except ValidationError as exc:
            raise ValidationError(f"{S.video_id}: {exc}") from exc
        lines.extend(format_segmentation(s) for s in segs)
    atomic_write_text(run.stage_dir("segment") / "segmentations.txt", "\n".join(lines) + "\n" if lines else "")
    run.write_provenance("segment", files)
    logger.info("segment: %d videos x %d change-point sets", len(mats), len(set(run.cfg.m_values)))


def stage_propose(run: Run, args) -> None:
    mats, files = _similarities(run)
    seg_file = _require(run.out / "segment" / "segmentations.txt")
    by_video: dict[str, list[str]] = {}
    for line in seg_file.read_text(encoding="utf-8").splitlines():
        if line.strip():
            by_video.setdefault(line.split()[0], []).append(line)
    proposals = []
    for S in mats:
        if S.video_id not in by_video:
            raise MissingArtifactError(f"{seg_file} has no segmentation for {S.video_id}")
        segs = []
        for line in by_video[S.video_id]:
            vid, _, cost, cps = parse_segmentation(line, S.num_frames)
            segs.append(Segmentation(vid, S.num_frames, cps, cost, ()))
        proposals.extend(proposals_from_segmentations(S, segs, build_prefix_table(S)))
    atomic_write_text(run.stage_dir("propose") / "proposals.txt", format_proposals(sort_proposals(proposals)))
    run.write_provenance("propose", [*files, seg_file])
    logger.info("propose: %d proposals", len(proposals))


def stage_refine(run: Run, args) -> None:
    seqs, feat_files = run.features()
    prop_file = _require(run.out / "propose" / "proposals.txt")
    proposals = parse_proposals(prop_file.read_text(encoding="utf-8"), prop_file)
    d = run.stage_dir("refine")
    for seq in seqs:
        F_v = FeatureSequence(seq.video_id, seq.interval_seconds, seq.features)
        out = refine_features(F_v, proposals, run.cfg.top_k, run.cfg.alpha)
        atomic_write_text(d / f"{seq.video_id}.txt", format_matrix(seq.video_id, seq.interval_seconds, out.rows))
    run.write_provenance("refine", [*feat_files, prop_file])
    logger.info("refine: %d videos, top_k=%d alpha=%g", len(seqs), run.cfg.top_k, run.cfg.alpha)


def _named_paths(items):
    out = []
    for item in items:
        name, sep, path = str(item).partition("=")
        out.append((name, Path(path)) if sep else (str(item), Path(item)))
    return out


def stage_eval(run: Run, args) -> None:
    cfg = run.cfg
    anns, ann_file = run.annotations()
    inputs = [ann_file]
    if cfg.eval_split == "test":
        split, split_file = run.split()
        inputs.append(split_file)
        gt = [anns[v] for v in sorted(anns) if split.get(v) == "test"]
    else:
        gt = [anns[v] for v in sorted(anns)]
    keep = {a.video_id for a in gt}
    sections = []
    rows = []
    bounds = []
    for name, path in _named_paths(getattr(args, "proposals", None)
                                   or [f"BAPG={run.out / 'propose' / 'proposals.txt'}"]):
        props = [p for p in parse_proposals(_require(path).read_text(encoding="utf-8"), path) if p.video_id in keep]
        inputs.append(path)
        rows.append((name, evaluate_over_thresholds(props, gt, cfg.thresholds, top_n=cfg.top_n, metric="recall")))
        be = boundary_error(props, gt, cfg.boundary_threshold, top_n=cfg.top_n)
        bounds.append(f"{name} " + ("no_matches" if be is None else f"start={fmt(be[0])} end={fmt(be[1])}"))
    num_gt = rows[0][1].num_gt
    sections.append(f"# recall@{cfg.top_n} split={cfg.eval_split} videos={len(gt)} gt={num_gt}\n" + format_report(rows))
    sections.append(f"# boundary_error tiou={fmt(cfg.boundary_threshold)} top_n={cfg.top_n}\n" + "\n".join(bounds) + "\n")
    det_rows = []
    for name, path in _named_paths(getattr(args, "detections", None) or []):
        dets = [d for d in parse_detections(_require(path).read_text(encoding="utf-8"), path) if d.video_id in keep]
        inputs.append(path)
        det_rows.append((name, evaluate_over_thresholds(dets, gt, cfg.thresholds, metric="mAP")))
    if det_rows:
        sections.append("# mAP\n" + format_report(det_rows))
    report = "\n".join(sections)
    atomic_write_text(run.stage_dir("eval") / "report.txt", report)
    run.write_provenance("eval", inputs)
    sys.stdout.write(report)


STAGE_FUNCS = {name: globals()[f"stage_{name}"] for name in STAGES}


def run_subcommand(name: str, cfg: PipelineConfig, args=None) -> None:
    run = Run(cfg)
    if name == "pipeline":
        for stage in STAGES:
            if stage == "synth" and cfg.input_dir:
                continue
            STAGE_FUNCS[stage](run, args)
    elif name in STAGE_FUNCS:
        STAGE_FUNCS[name](run, args)
    else:
        raise UsageError(f"unknown subcommand {name!r}")


# ---------------------------------------------------------------- entry point

class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", type=Path, help="flat key = value config file")
    common.add_argument("--seed", type=int, help="override the global seed")
    common.add_argument("--set", dest="overrides", action="append", default=[], metavar="KEY=VALUE",
                        help="override one config key (repeatable)")
    common.add_argument("--out", help="output directory (overrides out_dir)")
    common.add_argument("-q", "--quiet", action="store_true", help="only report errors")

    parser = _Parser(prog="bapg", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"bapg {__version__}")
    sub = parser.add_subparsers(dest="command", metavar="COMMAND", parser_class=_Parser)
    helps = {
        "synth": "generate the synthetic dataset",
        "pools": "build sample pools and the train/test split",
        "train": "train the frame encoder",
        "embed": "embed every video with the trained encoder",
        "simmat": "build per-video similarity matrices",
        "segment": "optimal change points for every m in m_values",
        "propose": "score and merge segments into proposals",
        "refine": "proposal-refined video features",
        "eval": "recall, boundary error and optional mAP tables",
        "pipeline": "run every stage in order",
    }
    for name, text in helps.items():
        p = sub.add_parser(name, parents=[common], help=text)
        if name == "eval":
            p.add_argument("--proposals", action="append", metavar="[NAME=]PATH",
                           help="proposal file to evaluate (repeatable, one table row each)")
            p.add_argument("--detections", action="append", metavar="[NAME=]PATH",
                           help="detection file for mAP (repeatable)")
    return parser


def load_config(args) -> PipelineConfig:
    text = ""
    if args.config is not None:
        try:
            text = args.config.read_text(encoding="utf-8")
        except OSError as exc:
            raise ConfigError(f"cannot read config file {args.config}: {exc.strerror}") from exc
    overrides = list(args.overrides)
    if args.seed is not None:
        overrides.append(f"seed={args.seed}")
    if args.out is not None:
        overrides.append(f"out_dir={args.out}")
    return parse_config(text, overrides)


def _fail(kind: str, code: int, exc) -> int:
    msg = " ".join(str(exc).split())
    sys.stderr.write(f"bapg: error kind={kind} exit={code} message={json.dumps(msg)}\n")
    return code


def main(argv=None) -> int:
    try:
        args = build_parser().parse_args(argv)
        if args.command is None:
            raise UsageError("a subcommand is required")
        logging.basicConfig(level=logging.WARNING if args.quiet else logging.INFO,
                            format="%(name)s: %(message)s", stream=sys.stderr, force=True)
        cfg = load_config(args)
        run_subcommand(args.command, cfg, args)
    except UsageError as exc:
        return _fail("usage", EXIT_OTHER, exc)
    except ConfigError as exc:
        return _fail("config", EXIT_CONFIG, exc)
    except MissingArtifactError as exc:
        return _fail("missing_artifact", EXIT_MISSING, exc)
    except ValidationError as exc:
        return _fail("validation", EXIT_VALIDATION, exc)
    except Exception as exc:  # noqa: BLE001
        return _fail(type(exc).__name__, EXIT_OTHER, exc)
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())

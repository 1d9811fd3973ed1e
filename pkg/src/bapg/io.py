"""Text file formats for features, embeddings and annotations."""

from __future__ import annotations

import os
import tempfile
from pathlib import Path

import numpy as np

from .core import (
    ActionInstance,
    FrameFeatureSequence,
    ValidationError,
    VideoAnnotation,
)


def fmt(x: float) -> str:
    # 17 significant digits round-trips any float64 exactly
    return format(float(x), ".17g")


def atomic_write_text(path, text: str) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def parse_header(line: str, path="") -> dict[str, str]:
    if not line.startswith("#"):
        raise ValidationError(f"{path}: expected a '# key=value' header, got {line.strip()!r}")
    out = {}
    for tok in line[1:].split():
        key, sep, val = tok.partition("=")
        if not sep:
            raise ValidationError(f"{path}: malformed header token {tok!r}")
        out[key] = val
    return out


def format_matrix(video_id: str, interval: float, values: np.ndarray) -> str:
    values = np.asarray(values, dtype=np.float64)
    l, d = values.shape
    lines = [f"# video={video_id} frames={l} dim={d} interval={fmt(interval)}"]
    lines.extend(" ".join(fmt(v) for v in row) for row in values)
    return "\n".join(lines) + "\n"


def parse_matrix(text: str, path="") -> tuple[str, float, np.ndarray]:
    lines = [ln for ln in text.splitlines() if ln.strip()]
    if not lines:
        raise ValidationError(f"{path}: empty matrix file")
    head = parse_header(lines[0], path)
    try:
        video_id = head["video"]
        l, d = int(head["frames"]), int(head["dim"])
        interval = float(head["interval"])
    except (KeyError, ValueError) as exc:
        raise ValidationError(f"{path}: bad header {lines[0]!r}") from exc
    rows = lines[1:]
    if len(rows) != l:
        raise ValidationError(f"{path}: header says {l} frames, found {len(rows)} rows")
    try:
        values = np.array([[float(v) for v in row.split()] for row in rows], dtype=np.float64)
    except ValueError as exc:
        raise ValidationError(f"{path}: non-numeric entry") from exc
    if values.shape != (l, d):
        raise ValidationError(f"{path}: expected {l}x{d} values, got {values.shape}")
    return video_id, interval, values


def write_features(path, seq: FrameFeatureSequence) -> None:
    atomic_write_text(path, format_matrix(seq.video_id, seq.interval_seconds, seq.features))


def read_features(path) -> FrameFeatureSequence:
    video_id, interval, values = parse_matrix(Path(path).read_text(encoding="utf-8"), path)
    return FrameFeatureSequence(video_id, interval, values)


def format_annotations(anns) -> str:
    lines = []
    for ann in anns:
        lines.append(f"# video={ann.video_id} duration={fmt(ann.duration_seconds)}")
        for inst in ann.instances:
            lines.append(f"{ann.video_id} {fmt(inst.t_s)} {fmt(inst.t_e)} {inst.label}")
    return "\n".join(lines) + "\n" if lines else ""


def parse_annotations(text: str, path="") -> list[VideoAnnotation]:
    """Parse one or more videos' annotations; instances may follow their header in any order."""
    durations: dict[str, float] = {}
    instances: dict[str, list[ActionInstance]] = {}
    for lineno, line in enumerate(text.splitlines(), 1):
        if not line.strip():
            continue
        if line.startswith("#"):
            head = parse_header(line, f"{path}:{lineno}")
            if "video" not in head or "duration" not in head:
                raise ValidationError(f"{path}:{lineno}: header needs video= and duration=")
            durations[head["video"]] = float(head["duration"])
            instances.setdefault(head["video"], [])
            continue
        parts = line.split()
        if len(parts) != 4:
            raise ValidationError(f"{path}:{lineno}: expected '<video_id> <t_s> <t_e> <label>'")
        vid, ts, te, label = parts
        try:
            instances.setdefault(vid, []).append(ActionInstance(float(ts), float(te), label))
        except ValueError as exc:
            raise ValidationError(f"{path}:{lineno}: bad timestamp") from exc
    out = []
    for vid, insts in instances.items():
        if vid not in durations:
            raise ValidationError(f"{path}: video {vid} has instances but no duration header")
        insts = sorted(insts, key=lambda a: (a.t_s, a.t_e))
        out.append(VideoAnnotation(vid, durations[vid], tuple(insts)))
    return out


def write_annotations(path, anns) -> None:
    atomic_write_text(path, format_annotations(anns))


def read_annotations(path) -> list[VideoAnnotation]:
    return parse_annotations(Path(path).read_text(encoding="utf-8"), path)

"""Flat ``key = value`` pipeline configuration."""

from __future__ import annotations

import hashlib
from dataclasses import dataclass

from .contrastive import LOSS_MODES, OPTIMIZERS, TrainConfig
from .evaluation import THUMOS_THRESHOLDS
from .synthetic import SynthConfig


class ConfigError(ValueError):
    def __init__(self, message, key=None, line=None):
        self.key = key
        self.line = line
        where = []
        if key is not None:
            where.append(f"key={key}")
        if line is not None:
            where.append(f"line={line}")
        super().__init__(" ".join([*where, message]) if where else message)


def _int_list(text):
    return tuple(int(v) for v in text.split(",") if v.strip())


def _float_list(text):
    return tuple(float(v) for v in text.split(",") if v.strip())


# key -> (parser, default, check, constraint text)
_SCHEMA = {
    "out_dir": (str, "bapg_out", None, ""),
    "input_dir": (str, "", None, ""),
    "seed": (int, 0, lambda v: v >= 0, ">= 0"),
    # synthetic data
    "num_videos": (int, 50, lambda v: v >= 0, ">= 0"),
    "duration_min": (float, 60.0, lambda v: v > 0, "> 0"),
    "duration_max": (float, 120.0, lambda v: v > 0, "> 0"),
    "interval": (float, 1.0, lambda v: v > 0, "> 0"),
    "actions_min": (int, 1, lambda v: v >= 0, ">= 0"),
    "actions_max": (int, 3, lambda v: v >= 0, ">= 0"),
    "action_length_min": (float, 5.0, lambda v: v > 0, "> 0"),
    "action_length_max": (float, 15.0, lambda v: v > 0, "> 0"),
    "hard_length_min": (float, 2.0, lambda v: v >= 0, ">= 0"),
    "hard_length_max": (float, 4.0, lambda v: v >= 0, ">= 0"),
    "background_dim": (int, 32, lambda v: v >= 1, ">= 1"),
    "semantic_dim": (int, 8, lambda v: v >= 1, ">= 1"),
    "background_scale": (float, 1.0, lambda v: v >= 0, ">= 0"),
    "semantic_scale": (float, 0.3, lambda v: v >= 0, ">= 0"),
    "noise_scale": (float, 0.05, lambda v: v >= 0, ">= 0"),
    "num_classes": (int, 5, lambda v: v >= 1, ">= 1"),
    # sample pools / split
    "hard_window": (float, 3.0, lambda v: v >= 0, ">= 0"),
    "train_fraction": (float, 0.8, lambda v: 0 < v <= 1, "in (0, 1]"),
    # encoder training
    "learning_rate": (float, 0.1, lambda v: v >= 0, ">= 0"),
    "epochs": (int, 50, lambda v: v >= 1, ">= 1"),
    "batch_size": (int, 32, lambda v: v >= 1, ">= 1"),
    "margin": (float, 1.0, lambda v: v >= 0, ">= 0"),
    "loss_mode": (str, "standard", lambda v: v in LOSS_MODES, f"one of {', '.join(LOSS_MODES)}"),
    "optimizer": (str, "sgd", lambda v: v in OPTIMIZERS, f"one of {', '.join(OPTIMIZERS)}"),
    "weight_decay": (float, 4e-4, lambda v: v >= 0, ">= 0"),
    "hidden_dim": (int, 32, lambda v: v >= 1, ">= 1"),
    "embed_dim": (int, 16, lambda v: v >= 1, ">= 1"),
    # segmentation / proposals
    "m_values": (_int_list, (4, 6, 8), lambda v: len(v) > 0 and min(v) >= 0, "non-empty list of ints >= 0"),
    "min_segment_frames": (int, 3, lambda v: v >= 1, ">= 1"),
    "top_k": (int, 10, lambda v: v >= 0, ">= 0"),
    "alpha": (float, 0.5, None, ""),
    # evaluation
    "thresholds": (_float_list, THUMOS_THRESHOLDS, lambda v: len(v) > 0 and all(0 < t <= 1 for t in v),
                   "non-empty list in (0, 1]"),
    "top_n": (int, 10, lambda v: v >= 1, ">= 1"),
    "boundary_threshold": (float, 0.5, lambda v: 0 < v <= 1, "in (0, 1]"),
    "eval_split": (str, "test", lambda v: v in ("test", "all"), "one of test, all"),
}

KEYS = tuple(_SCHEMA)


@dataclass(frozen=True)
class PipelineConfig:
    values: dict

    def __getattr__(self, name):
        try:
            return self.__dict__["values"][name]
        except KeyError:
            raise AttributeError(name) from None

    @property
    def synth(self) -> SynthConfig:
        v = self.values
        return SynthConfig(
            num_videos=v["num_videos"],
            duration_range=(v["duration_min"], v["duration_max"]),
            interval=v["interval"],
            actions_range=(v["actions_min"], v["actions_max"]),
            action_length_range=(v["action_length_min"], v["action_length_max"]),
            hard_length_range=(v["hard_length_min"], v["hard_length_max"]),
            background_dim=v["background_dim"],
            semantic_dim=v["semantic_dim"],
            background_scale=v["background_scale"],
            semantic_scale=v["semantic_scale"],
            noise_scale=v["noise_scale"],
            num_classes=v["num_classes"],
            seed=v["seed"],
        )

    @property
    def train(self) -> TrainConfig:
        v = self.values
        return TrainConfig(
            learning_rate=v["learning_rate"],
            epochs=v["epochs"],
            batch_size=v["batch_size"],
            margin=v["margin"],
            loss_mode=v["loss_mode"],
            seed=v["seed"],
            weight_decay=v["weight_decay"],
            hidden_dim=v["hidden_dim"],
            embed_dim=v["embed_dim"],
            optimizer=v["optimizer"],
        )

    def render(self) -> str:
        lines = []
        for key in KEYS:
            val = self.values[key]
            if isinstance(val, tuple):
                val = ",".join(repr(x) for x in val)
            lines.append(f"{key} = {val}")
        return "\n".join(lines) + "\n"

    def digest(self) -> str:
        # out_dir does not change results, so it stays out of the hash
        text = "\n".join(ln for ln in self.render().splitlines() if not ln.startswith("out_dir "))
        return hashlib.sha256(text.encode()).hexdigest()


def _coerce(key, raw, line):
    parser, _, check, constraint = _SCHEMA[key]
    try:
        val = parser(raw.strip())
    except ValueError:
        raise ConfigError(f"cannot parse {raw.strip()!r} as {getattr(parser, '__name__', 'value')}", key, line) from None
    if check is not None and not check(val):
        raise ConfigError(f"value {raw.strip()!r} violates constraint {constraint}", key, line)
    return val


def _pairs(text):
    for lineno, line in enumerate(text.splitlines(), 1):
        body = line.split("#", 1)[0].strip()
        if not body:
            continue
        key, sep, raw = body.partition("=")
        if not sep:
            raise ConfigError(f"expected 'key = value', got {body!r}", None, lineno)
        yield key.strip(), raw, lineno


def parse_config(text: str = "", overrides=()) -> PipelineConfig:
    """Parse config text, then apply ``key=value`` overrides; unset keys take defaults.

    Unknown keys, duplicates, unparsable values and out-of-range values raise
    :class:`ConfigError` naming the key and line (``--set`` for overrides).
    """
    values = {k: entry[1] for k, entry in _SCHEMA.items()}
    seen = set()
    for key, raw, lineno in _pairs(text):
        if key not in _SCHEMA:
            raise ConfigError("unknown key", key, lineno)
        if key in seen:
            raise ConfigError("duplicate key", key, lineno)
        seen.add(key)
        values[key] = _coerce(key, raw, lineno)
    for item in overrides:
        key, sep, raw = item.partition("=")
        key = key.strip()
        if not sep:
            raise ConfigError(f"override {item!r} is not key=value", None, "--set")
        if key not in _SCHEMA:
            raise ConfigError("unknown key", key, "--set")
        values[key] = _coerce(key, raw, "--set")
    for lo, hi in (("duration_min", "duration_max"), ("actions_min", "actions_max"),
                   ("action_length_min", "action_length_max"), ("hard_length_min", "hard_length_max")):
        if values[lo] > values[hi]:
            raise ConfigError(f"must not exceed {hi}={values[hi]}", lo, None)
    return PipelineConfig(values)

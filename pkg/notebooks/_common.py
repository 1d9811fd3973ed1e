"""Shared setup for the demo scripts: generate, train, embed."""

import numpy as np

from bapg.contrastive import TrainConfig, embed_sequence, train_encoder
from bapg.core import build_similarity_matrix
from bapg.sample_pool import label_clips
from bapg.synthetic import SynthConfig, generate_dataset


def trained_similarities(synth=SynthConfig(), train=TrainConfig(), train_fraction=0.8):
    """Train on the first part of the videos; return (similarity matrices, annotations, test ids)."""
    videos, _ = generate_dataset(synth)
    data = [(s, label_clips(a, s.num_frames, s.interval_seconds)) for s, a in videos]
    n_train = int(np.floor(len(data) * train_fraction))
    params = train_encoder(data[:n_train], train).params
    mats = [build_similarity_matrix(embed_sequence(s, params)) for s, _ in videos]
    anns = [a for _, a in videos]
    test_ids = {s.video_id for s, _ in videos[n_train:]}
    return mats, anns, test_ids

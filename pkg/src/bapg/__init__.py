"""Boundary-aware temporal action proposals: contrastive frame embeddings, exact change-point segmentation, proposal scoring and tIoU evaluation."""

__version__ = "0.1.0"

from .core import (  # noqa: E402
    ActionInstance,
    DegenerateInputError,
    EmbeddingSequence,
    FrameFeatureSequence,
    SimilarityMatrix,
    ValidationError,
    VideoAnnotation,
    build_similarity_matrix,
    cosine_similarity,
    uniform_sample_times,
)
from .contrastive import EncoderParams, TrainConfig, encode, train_encoder, triplet_loss  # noqa: E402
from .evaluation import (  # noqa: E402
    average_recall,
    boundary_error,
    detection_average_precision,
    evaluate_over_thresholds,
    temporal_iou,
)
from .proposal import Proposal, generate_proposals, refine_features  # noqa: E402
from .sample_pool import SamplePools, draw_triplet, label_clips  # noqa: E402
from .synthetic import SynthConfig, generate_dataset, generate_video  # noqa: E402
from .tsc import build_prefix_table, optimal_change_points, segment_cost  # noqa: E402

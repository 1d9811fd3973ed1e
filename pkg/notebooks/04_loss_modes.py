# %% [markdown]
# # Literal versus standard triplet loss
#
# With cosine similarity bounded by 1 and a margin of 1, the literal form
# `max(s_an - margin, 0) - s_ap` never penalizes the hard negative. It only
# pulls positives together. The standard hinge `max(margin + s_an - s_ap, 0)`
# also pushes hard negatives away.

# %%
import itertools

import numpy as np

from bapg.contrastive import TrainConfig, train_encoder, triplet_similarities
from bapg.sample_pool import label_clips
from bapg.synthetic import SynthConfig, generate_dataset

videos, _ = generate_dataset(SynthConfig())
data = [(s, label_clips(a, s.num_frames, s.interval_seconds)) for s, a in videos]
train, held = data[:40], data[40:]


def mean_sims(params):
    ap, an = [], []
    for seq, pools in held:
        for n in pools.trainable():
            pos, hard = pools.positives[n], pools.hard_negatives[n]
            for a, p in itertools.permutations(pos, 2):
                ap.append(triplet_similarities(seq.features[a], seq.features[p], seq.features[p], params)[0][0])
            for a, h in itertools.product(pos, hard):
                an.append(triplet_similarities(seq.features[a], seq.features[h], seq.features[h], params)[1][0])
    return np.mean(ap), np.mean(an)


print(f"{'encoder':<10} {'s(a,p)':>8} {'s(a,hn)':>8} {'gap':>7}")
s_ap, s_an = mean_sims(None)
print(f"{'raw':<10} {s_ap:8.3f} {s_an:8.3f} {s_ap - s_an:7.3f}")
for mode in ("literal", "standard"):
    params = train_encoder(train, TrainConfig(loss_mode=mode)).params
    s_ap, s_an = mean_sims(params)
    print(f"{mode:<10} {s_ap:8.3f} {s_an:8.3f} {s_ap - s_an:7.3f}")

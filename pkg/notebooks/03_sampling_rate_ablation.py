# %% [markdown]
# # Sampling rate: one frame per second versus ten
#
# The same synthetic videos are sampled every 1 s and every 0.1 s. The
# minimum segment length is held at 3 s in both cases, so the comparison
# isolates boundary resolution. Finer sampling costs about 10x more
# training slots and 100x larger similarity matrices.

# %%
import time

from _common import trained_similarities

from bapg.contrastive import TrainConfig
from bapg.evaluation import boundary_error, evaluate_over_thresholds, format_report
from bapg.proposal import generate_proposals
from bapg.synthetic import SynthConfig

rows, bounds = [], []
for T, epochs in ((1.0, 50), (0.1, 10)):
    t0 = time.perf_counter()
    mats, anns, test_ids = trained_similarities(SynthConfig(num_videos=20, interval=T), TrainConfig(epochs=epochs))
    min_len = round(3.0 / T)
    props = [p for S in mats for p in generate_proposals(S, {4, 6, 8}, min_length=min_len)]
    gt = [a for a in anns if a.video_id in test_ids]
    rows.append((f"T={T:g}s", evaluate_over_thresholds(props, gt, top_n=10)))
    be = boundary_error(props, gt, 0.5, top_n=10)
    bounds.append(f"T={T:g}s  boundary error start {be[0]:.2f}s end {be[1]:.2f}s  ({time.perf_counter() - t0:.1f}s)")

print(format_report(rows))
print("\n".join(bounds))

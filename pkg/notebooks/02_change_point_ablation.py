# %% [markdown]
# # Effect of the change-point sets
#
# Each row segments the learned similarity matrices with a different set of
# change-point counts and reports proposal recall at every tIoU threshold.
# Denser sets split videos more finely, which mostly helps at high tIoU.

# %%
from _common import trained_similarities

from bapg.evaluation import evaluate_over_thresholds, format_report
from bapg.proposal import generate_proposals

mats, anns, _ = trained_similarities()

# %%
rows = []
for ms in ({2}, {2, 3}, {2, 3, 4}, {4, 6, 8}, {10, 15, 20}):
    props = [p for S in mats for p in generate_proposals(S, ms)]
    name = "m=" + ",".join(map(str, sorted(ms)))
    rows.append((name + " all", evaluate_over_thresholds(props, anns)))
    rows.append((name + " @10", evaluate_over_thresholds(props, anns, top_n=10)))
print(format_report(rows))

# %% [markdown]
# Without a top-n cut, adding scales can only add candidate intervals, so the
# "all" rows never decrease. With a per-video budget of 10, more scales also
# add more near-duplicate short segments that compete for the budget.
# Requiring segments of at least three frames removes those. The densest set
# is capped at 10 so that 11 segments of 3 frames fit the shortest video.

# %%
rows = []
for ms in ({2, 3, 4}, {4, 6, 8}, {6, 8, 10}):
    props = [p for S in mats for p in generate_proposals(S, ms, min_length=3)]
    rows.append(("m=" + ",".join(map(str, sorted(ms))) + " L>=3 @10",
                 evaluate_over_thresholds(props, anns, top_n=10)))
print(format_report(rows))

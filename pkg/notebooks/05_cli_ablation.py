# %% [markdown]
# # Change-point ablation through the command line
#
# One full pipeline run, then the `segment` and `propose` stages re-run for
# other change-point sets into sibling directories. `eval` takes every
# proposal file at once and prints them side by side.

# %%
import shutil
import subprocess
import sys
import tempfile
from pathlib import Path


def bapg(*args):
    subprocess.run([sys.executable, "-m", "bapg.cli", *args, "-q"], check=True)


root = Path(tempfile.mkdtemp(prefix="bapg_ablation_"))
base = root / "base"
bapg("pipeline", "--out", str(base))

# %%
files = []
for ms in ("2", "2,3", "2,3,4", "4,6,8"):
    out = root / f"m_{ms.replace(',', '_')}"
    shutil.copytree(base, out, ignore=shutil.ignore_patterns("segment", "propose", "refine", "eval"))
    settings = ["--set", f"m_values={ms}", "--set", "min_segment_frames=1"]
    bapg("segment", "--out", str(out), *settings)
    bapg("propose", "--out", str(out), *settings)
    files += ["--proposals", f"m{{{ms}}}={out / 'propose' / 'proposals.txt'}"]

# %%
bapg("eval", "--out", str(base), "--set", "eval_split=all", *files)
shutil.rmtree(root)

"""Drive the full command-line pipeline end to end in a temp directory.

The same stages are available as `dppseq <subcommand>` from a shell; this
script calls the entry point in-process so the demo is self-contained.
"""

import tempfile
from pathlib import Path

from dppseq.cli import main
from dppseq.data import write_interactions
from dppseq.synthetic import make_synthetic_log

workdir = Path(tempfile.mkdtemp(prefix="dppseq_demo_"))
dataset = workdir / "interactions.csv"
write_interactions(
    dataset, make_synthetic_log(n_users=40, n_items=60, n_categories=6, seq_len=14, seed=0)
)

config = workdir / "config.txt"
config.write_text(
    f"""\
dataset={dataset}
out={workdir / 'out'}
T=2
k_core=2
kernel_dim=8
kernel_epochs=10
kernel_lr=0.01
scorer_dim=8
scorer_lr=0.3
max_epochs=10
losses=ce,cdsl
seed=7
"""
)

base = ["--config", str(config)]
for stage in (
    ["prepare"],
    ["gen-sets"],
    ["train-kernel"],
    ["train", "--loss", "ce"],
    ["train", "--loss", "cdsl"],
    ["evaluate", "--loss", "ce"],
    ["evaluate", "--loss", "cdsl"],
    ["report"],
):
    print(f"\n$ dppseq --config config.txt {' '.join(stage)}")
    code = main(base + stage)
    assert code == 0, f"stage {stage} exited {code}"

print("\nfinal report:")
print((workdir / "out" / "report.csv").read_text())
print(f"artifacts in {workdir / 'out'}")

# Whole pipeline through the command line: collect all four tasks, then build the report.
# Everything is offline: scripted agents answer the same prompts a chat model would see.
import sys
import tempfile
from pathlib import Path

from persona_gauge.cli import main

root = Path(sys.argv[1]) if len(sys.argv) > 1 else Path(tempfile.mkdtemp(prefix="persona_gauge_"))
runs = root / "runs"
config = root / "demo.yaml"
config.write_text("""\
master_seed: 11
personas: [ENFJ, INFJ, ESTP, ISTP]
task_params:
  adaptability: {repeats: 2}
  bandit: {blocks: 50}
""")

assert main(["run", "all", "--config", str(config), "--out", str(runs)]) == 0
run = next(d for d in runs.iterdir() if d.is_dir())
assert main(["report", str(run)]) == 0
print("\nsummary tables:", sorted(p.name for p in (run / "summary").iterdir()))
print((run / "summary" / "ee_fits.csv").read_text())
print((run / "summary" / "sd3_scores.csv").read_text())

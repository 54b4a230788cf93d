"""Drive a run from a config, write the metric CSV and audit the result.

The same flow is available on the command line:
    detlb run --graph random:64:4:1 --loops 4 --balancer rotor-router \\
        --load point:4096 --steps auto -o run.csv
    detlb reproduce thm4 --quick
"""
import tempfile
from pathlib import Path

from detlb import ExperimentConfig, emit_csv, read_csv, run
from detlb.experiments import reproduce

cfg = ExperimentConfig(graph="random:64:4:1", d_loops=4, balancer="rotor-router",
                       load="point:4096", steps="auto", levels=[0, 4, 16])
res = run(cfg)
print(f"steps={res.steps} mu={res.spectral.mu:.4f} final discrepancy="
      f"{int(res.series.column('discrepancy')[-1])} fairness gap={res.fairness.delta_observed}")

with tempfile.TemporaryDirectory() as tmp:
    path = Path(tmp) / "run.csv"
    emit_csv(res, path)
    back = read_csv(path)
    print(f"csv rows={len(back.rows)} columns={back.columns[:6]}...")

print(reproduce("thm5", "quick").to_csv(), end="")

"""Isolation-forest ramp-up benchmark on synthetic crimp-like features.

Trains on growing numbers of normal samples, grid-searches the
contamination threshold per size, and prints the learning curve next to a
fixed instruction-driven benchmark line.

Run:  python demos/iforest_rampup.py
"""

import numpy as np

from promptinspect import ForestParams
from promptinspect.harness import ramp_up
from promptinspect.iforest import CONTAMINATION_GRID
from promptinspect.metrics import Metrics

rng = np.random.default_rng(7)

# slope / area features: normals tight, two defect families off-axis
normal = np.column_stack([rng.normal(0.50, 0.01, 260), rng.normal(3000, 40, 260)])
steep = np.column_stack([rng.normal(0.72, 0.015, 60), rng.normal(3000, 40, 60)])
weak = np.column_stack([rng.normal(0.50, 0.01, 60), rng.normal(2400, 40, 60)])
features = np.vstack([normal, steep, weak])
labels = np.array([0] * 260 + [1] * 120)

sizes = [5, 10, 20, 40, 80, 120, 160, 200]
points = ramp_up(features, labels, sizes, ForestParams(rng_seed=3), CONTAMINATION_GRID, rng_seed=11)

# a fixed reference line, the kind an instruction-driven detector produces
# from three reference samples regardless of training-set size
benchmark = Metrics(precision=1.0, recall=0.92, f1=2 * 0.92 / 1.92)

print(f"{'train n':>8} {'C':>5} {'precision':>10} {'recall':>8} {'F1':>8}")
for p in points:
    m = p.metrics
    print(
        f"{p.train_size:8d} {p.chosen_c:5.2f} {m.precision * 100:9.1f}% "
        f"{m.recall * 100:7.1f}% {m.f1 * 100:7.1f}%"
    )
print("-" * 44)
print(
    f"{'few-shot':>8} {'-':>5} {benchmark.precision * 100:9.1f}% "
    f"{benchmark.recall * 100:7.1f}% {benchmark.f1 * 100:7.1f}%   (fixed overlay)"
)
crossing = next((p.train_size for p in points if p.metrics.f1 >= benchmark.f1), None)
if crossing:
    print(f"\nforest first matches the overlay F1 at {crossing} training samples")
else:
    print("\nforest never matches the overlay F1 in this size range")

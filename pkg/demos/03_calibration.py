"""
Removing the truncation bias from the aggregate
===============================================

"""
import numpy as np

from apes.budgets import sample_budgets
from apes.pipeline import GradientBatch, aggregate, calibrate, expected_aggregate, perturb_rows

C, n, reps = 1.0, 200, 5_000
budgets = sample_budgets("Uniform2", n, seed=1)

# the expected aggregate F(g) is monotone but strongly flattened
grid = np.linspace(-C, C, 9)
print(np.c_[grid, expected_aggregate(grid, budgets, C)])

# every column is one round where all users hold the same clean value g
for g in (0.0, 0.3, 0.5, 0.9):
    rngs = [np.random.default_rng([7, i]) for i in range(n)]
    noisy = perturb_rows(np.full((n, reps), g), budgets, C, rngs)
    agg = aggregate(GradientBatch(noisy, budgets, C))
    cal = calibrate(agg, budgets, C)
    print(f"g={g:.1f}  raw mean {agg.mean():+.4f}  calibrated mean {cal.mean():+.4f}")

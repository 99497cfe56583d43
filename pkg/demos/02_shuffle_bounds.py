"""
Central privacy after shuffling heterogeneous budgets
=====================================================

"""
import numpy as np

from apes import accountant
from apes.budgets import PRESETS, sample_budgets
from apes.errors import InsufficientEchoMassError

delta_s = 1e-8

# echo probabilities between two users; equal budgets give exp(-eps)
print(accountant.echo_prob(0.5, 1.0), accountant.echo_prob(1.0, 0.5), np.exp(-0.5))

# with equal budgets the new bound and the max-budget baseline coincide
same = np.full(10_000, 0.5)
print("equal budgets:",
      accountant.eon_central_bound(same, delta_s).eps_central,
      accountant.fmt_max_baseline(same, delta_s).eps_central)

# heterogeneous budgets are where they differ
print(f"{'preset':>10} {'n':>7} {'echo mass':>10} {'eon':>8} {'fmt-max':>8}")
for name in PRESETS:
    for n in (1_000, 10_000, 100_000):
        eps = sample_budgets(name, n, seed=0)
        try:
            eon = accountant.eon_central_bound(eps, delta_s)
            fmt = accountant.fmt_max_baseline(eps, delta_s)
            print(f"{name:>10} {n:7d} {eon.echo_mass:10.1f} {eon.eps_central:8.4f} {fmt.eps_central:8.4f}")
        except InsufficientEchoMassError as exc:
            print(f"{name:>10} {n:7d} {exc.echo_mass:10.1f}   too few users")

# per-dimension guarantees compose into a user-level one
eps = sample_budgets("Uniform2", 10_000, seed=0)
bound = accountant.eon_central_bound(eps, delta_s)
d = 7850
for b in (d, d // 5):
    # if 2*b*delta_c already exceeds the target there is nothing left to split
    rest = 3.6e-5 - 2 * b * bound.delta_central
    dp = rest if rest > 0 else 3.6e-5
    out = accountant.user_level_composition(bound.eps_central, bound.delta_central, b, dp)
    print(f"b={b}: eps_uc={out.eps_user:.2f} delta_uc={out.delta_user:.2e}")

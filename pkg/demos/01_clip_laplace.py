"""
Clip-Laplace: a Laplace mechanism that never leaves [-C, C]
===========================================================

"""
import numpy as np

from apes.clip_laplace import ClipLaplaceParams, clap_mean, clap_sample, clap_second_moment

# one user, one coordinate, clipped to C = 1 and perturbed with budget 1
C, eps = 1.0, 1.0
p = ClipLaplaceParams.for_budget(0.5, eps, C)
print(p, "scale =", p.scale)

rng = np.random.default_rng(0)
x = clap_sample(p, rng, size=100_000)
print("support:", x.min(), x.max())

# the output is biased towards zero; the mean has a closed form
print("sample mean", x.mean(), " closed form", clap_mean(p))

# classic Laplace with the same scale has variance 2*lambda^2, far larger
print("E[(Z - c)^2]", clap_second_moment(p), " laplace", 2 * p.scale**2)

# bias and spread over a range of budgets
print(f"{'eps':>6} {'mean(0.5)':>10} {'m2':>8} {'laplace var':>12}")
for e in (0.05, 0.1, 0.5, 1.0, 3.0):
    q = ClipLaplaceParams.for_budget(0.5, e, C)
    print(f"{e:6.2f} {clap_mean(q):10.4f} {clap_second_moment(q):8.4f} {2 * q.scale**2:12.1f}")

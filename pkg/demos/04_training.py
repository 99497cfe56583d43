"""
Six ways to train the same federated model
==========================================

Synthetic 10-class data, 200 users with 20 samples each, Uniform2 budgets.
"""
import numpy as np

from apes.budgets import sample_budgets
from apes.data import synth_classification
from apes.fl_sim import Framework, TrainConfig, n_params, privacy_report, train

n_users = 200
ds = synth_classification(n_users * 20 + 2000, 78, 10, seed=0, noise=2.0)
train_set, test_set = ds.subset(slice(0, n_users * 20)), ds.subset(slice(n_users * 20, None))
d = n_params(78, 10)
budgets = sample_budgets("Uniform2", n_users, seed=0)
print("d =", d, " budgets in", budgets.min(), budgets.max())

results = {}
for fw in Framework:
    cfg = TrainConfig(framework=fw, epochs=20, n_users=n_users, master_seed=0)
    results[fw] = train(cfg, train_set, test_set, budgets=budgets)
    print(f"{fw.value:>12}  acc {results[fw].final_accuracy:.3f}  {results[fw].privacy.note}")

# accuracy per epoch for the two extremes and the calibrated shuffle
for fw in (Framework.NON_PRIVATE, Framework.APES, Framework.LDP_MIN):
    print(fw.value, np.round([m.test_accuracy for m in results[fw].metrics], 2))

# 200 users are too few for the shuffle bound; the accountant says so
# instead of reporting a number. With 10^4 users it applies:
big = sample_budgets("Uniform2", 10_000, seed=0)
for fw in (Framework.UNIS, Framework.APES, Framework.S_APES):
    rep = privacy_report(TrainConfig(framework=fw, n_users=10_000), big, d)
    print(f"{fw.value:>8}  eps_c {rep.eps_central:.4f}  eps_uc {rep.eps_user:.2f}")

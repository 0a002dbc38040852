"""
EDMD and JDMD on a few cartpole trajectories
============================================

Fit both learners to the same short dataset recorded on a cartpole with
Coulomb friction, then compare their projected Jacobians with those of the
true plant at held-out states.
"""

# %%
import numpy as np

from jdmd import experiments as ex
from jdmd.config import ExperimentConfig
from jdmd.regression import FitConfig, fit_edmd, fit_jdmd

config = ExperimentConfig(mu=0.3, num_train_trajectories=3, num_test_trajectories=5)
task = ex.build_task(config)
train = ex.collect_training_data(config, task=task)
tests = ex.collect_test_data(config, task=task)
print("training samples:", train.num_samples)

# %%
lifting = ex.canonical_lifting(config, train)
edmd = fit_edmd(train, lifting, FitConfig(lam=1e-4))
jdmd = fit_jdmd(train, lifting, task.nominal, FitConfig(alpha=0.01, lam=1e-4))

# %%
# Jacobian error at the test states, and the nominal model for reference.
x = np.concatenate([t.states[:-1] for t in tests.trajectories])
u = np.concatenate([t.controls for t in tests.trajectories])
for name, model in (("nominal", task.nominal), ("edmd", edmd), ("jdmd", jdmd)):
    print(f"{name:8s} Jacobian error {ex.jacobian_error(model, task.true_plant, x, u):.3f}")

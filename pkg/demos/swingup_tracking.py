"""
Swing-up reference and time-varying LQR tracking
================================================

Generate a swing-up with iLQR on the nominal model, then track it on the
true plant with a controller linearized about the reference. Friction makes
the nominal controller fail to hold the pole upright; a JDMD model trained
on four noisy rollouts recovers.
"""

# %%
import numpy as np

from jdmd import experiments as ex
from jdmd.config import load_config

config = load_config("configs/friction_sweep.toml", mu=0.2)
task = ex.build_task(config)
ref = task.reference
print(f"{ref.T} steps at {config.sample_rate_hz:g} Hz, final state {np.round(ref.states[-1], 3)}")

# %%
x0 = task.sample_initial_conditions(ex.rng_for(config, 2), 10)
nominal = ex.evaluate_model(task.nominal, task, x0)
print("nominal: success rate", nominal.success_rate,
      " median error", round(float(np.median(nominal.tracking_error)), 4))

# %%
data = ex.collect_training_data(config, 4, task)
model, lam = ex.train("jdmd", data, task)
learned = ex.evaluate_model(model, task, x0)
print(f"jdmd (N=4, lambda={lam:g}): success rate", learned.success_rate,
      " median error", round(float(np.median(learned.tracking_error)), 4))

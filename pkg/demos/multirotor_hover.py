"""
Planar multirotor hover with drag
=================================

The same pipeline on a two-rotor planar vehicle whose true model has linear
drag and about 5% parameter error. Models use the 21-dimensional embedding.
"""

# %%
import numpy as np

from jdmd import experiments as ex
from jdmd.config import load_config

config = load_config("configs/multirotor.toml")
task = ex.build_task(config)
x0 = task.sample_initial_conditions(ex.rng_for(config, 2), 10)
data = ex.collect_training_data(config, task=task)

# %%
for name in ("nominal", "edmd", "jdmd"):
    model = task.nominal if name == "nominal" else ex.train(name, data, task)[0]
    ev = ex.evaluate_model(model, task, x0)
    print(f"{name:8s} success {ev.success_rate:.1f}  "
          f"median tracking error {np.median(ev.tracking_error):.3f}")

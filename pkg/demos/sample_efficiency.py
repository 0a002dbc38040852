"""
Tracking error versus number of training trajectories
=====================================================

Median and 5-95% tracking error for EDMD and JDMD on the swing-up. JDMD is
near its best with two or three trajectories; EDMD needs many more.
"""

# %%
from jdmd import experiments as ex
from jdmd.config import load_config

config = load_config("configs/sample_efficiency.toml", sweep_seeds=1)
config = config.replace(sample_grid=(2, 3, 10, 20))

# %%
print("learner   N   median     q05     q95  success")
for r in ex.sample_efficiency_sweep(config):
    print(f"{r['learner']:7s} {r['n']:3d}  {r['median']:7.4f} {r['q05']:7.4f} "
          f"{r['q95']:7.4f}  {r['success_rate']:.2f}")

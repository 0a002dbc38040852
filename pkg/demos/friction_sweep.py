"""
Training-set size needed under increasing friction
==================================================

A shortened version of the friction sweep: for each friction coefficient,
find the smallest number of training trajectories that lets EDMD and JDMD
stabilize every test start. The full sweep is
``jdmd sweep-friction --config configs/friction_sweep.toml --out runs/friction``.
"""

# %%
from jdmd import experiments as ex
from jdmd.config import load_config

config = load_config("configs/friction_sweep.toml", num_test_trajectories=5,
                     num_validation_trajectories=3)
config = config.replace(mu_grid=(0.1, 0.3), n_grid=tuple(range(1, 11)), sample_grid=(2, 10))

# %%
# With five test starts instead of ten the thresholds come out lower than in
# the full run, which is stricter.
print("  mu  nominal  edmd  jdmd")
for r in ex.friction_sweep(config):
    print(f"{r['mu']:4.1f}  {'pass' if r['nominal'] else 'fail':7s}  "
          f"{r['edmd'] or '>10':>4}  {r['jdmd'] or '>10':>4}")

"""
Open-loop, closed-loop and Jacobian errors
==========================================

EDMD trained on 20 trajectories against JDMD trained on 3. Open-loop
prediction over the whole swing-up can diverge for either model (reported as
``inf``), while JDMD tracks better in closed loop and matches the true
Jacobians more closely.
"""

# %%
import numpy as np

from jdmd import experiments as ex
from jdmd.config import load_config

config = load_config("configs/histograms.toml")
report = ex.error_histograms(config)

# %%
for name, rep in report["learners"].items():
    agg = rep["aggregates"]
    ol = np.array(rep["per_trajectory"]["open_loop_error"], dtype=float)
    print(f"{name}: N={rep['metadata']['n_train']}  "
          f"tracking {agg['tracking_error']['median']:.4f}  "
          f"jacobian {agg['jacobian_error']['median']:.3f}  "
          f"open-loop finite on {np.isfinite(ol).mean():.0%} of tests")

# %%
h = report["histograms"]["jacobian_error"]
print("Jacobian error bins:", np.round(h["edges"], 2))
print("  edmd", h["edmd"])
print("  jdmd", h["jdmd"])

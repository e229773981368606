# %% [markdown]
# # What random arrivals cost
#
# Platoon and Poisson traffic with the same mean spacing deliver the same
# RF energy on average. The difference in throughput and bits per joule at
# each model's own best harvest distance is the price of not knowing when the
# next vehicle will come.

# %%
from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt
import numpy as np

from roadharvest.scenario import build_scenario
from roadharvest.sweep import SweepSpec, price_of_uncertainty

OUT = Path(__file__).with_name("figures")
OUT.mkdir(exist_ok=True)

# %%
base = build_scenario(S=2000.0)
spacings = np.arange(10.0, 101.0, 10.0)
pts = (20e-6, 60e-6, 100e-6)
spec = SweepSpec(base, ell=tuple(float(v) for v in range(1, 16)), Pt=pts)
rows = price_of_uncertainty(spec, spacings)

# %%
fig, axes = plt.subplots(1, 2, figsize=(9, 3.5))
for pt in pts:
    sel = [r for r in rows if abs(r.Pt_uW - pt * 1e6) < 1e-9]
    d = [r.mean_dv_m for r in sel]
    axes[0].plot(d, [100 * r.theta_gain for r in sel], marker="o", ms=3, label=f"Pt = {pt * 1e6:g} uW")
    axes[1].plot(d, [100 * r.upsilon_gain for r in sel], marker="o", ms=3)
axes[0].set_ylabel("platoon throughput gain [%]")
axes[1].set_ylabel("platoon efficiency gain [%]")
for ax in axes:
    ax.set_xlabel("mean vehicle spacing [m]")
axes[0].legend(fontsize=8)
fig.tight_layout()
fig.savefig(OUT / "price_of_uncertainty.png", dpi=120)

# %%
top = max(rows, key=lambda r: r.upsilon_gain)
print(f"largest efficiency gain {100 * top.upsilon_gain:.1f}% at {top.mean_dv_m:g} m, Pt={top.Pt_uW:g} uW")

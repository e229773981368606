# %% [markdown]
# # Black-out probability and the throughput trade-off
#
# With regular traffic a black-out is a cycle whose longest silent stretch
# (no packet decoded) exceeds an age threshold. Widening the harvest zone
# fills the battery but lengthens the silent harvest phase itself, so the
# probability has an interior minimum.

# %%
from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt

from roadharvest.scenario import Platoon, build_scenario
from roadharvest.sweep import SweepSpec, run_sweep, tradeoff_table

OUT = Path(__file__).with_name("figures")
OUT.mkdir(exist_ok=True)

# %%
base = build_scenario(traffic=Platoon(50.0))
ells = tuple(float(v) for v in range(1, 11))
pts = (20e-6, 40e-6, 60e-6, 80e-6, 100e-6)
rows = run_sweep(SweepSpec(base, ell=ells, Pt=pts, outputs=("theta", "pbo"), Qs=2.0))

# %%
fig, ax = plt.subplots(figsize=(6, 4))
for pt in pts:
    sel = [r for r in rows if abs(r.Pt_uW - pt * 1e6) < 1e-9]
    ax.semilogy([r.ell_m for r in sel], [max(r.P_BO_analytic, 1e-8) for r in sel], marker="o", ms=3,
                label=f"Pt = {pt * 1e6:g} uW")
ax.set_xlabel("harvest half-width ell [m]")
ax.set_ylabel("black-out probability")
ax.legend(fontsize=8)
fig.tight_layout()
fig.savefig(OUT / "blackout_vs_ell.png", dpi=120)

# %% [markdown]
# Best throughput subject to a black-out bound of 1e-3, over a small grid of
# transmit powers and packet sizes.

# %%
spec = SweepSpec(base, ell=ells, Pt=(40e-6, 60e-6, 80e-6), S=(1000.0, 2000.0, 3000.0), Qs=2.0)
res = tradeoff_table(spec, 1e-3)
if res.feasible:
    b = res.best
    print(f"best feasible: ell={b.ell_m:g} m, Pt={b.Pt_uW:g} uW, S={b.S_bit:g} bit, "
          f"theta={b.theta_kbit_s:.3f} kbit/s, P_BO={b.P_BO_analytic:.2e}")
    print(f"throughput given up for the bound: {100 * res.throughput_loss:.1f}%")
else:
    print("no grid point meets the bound")

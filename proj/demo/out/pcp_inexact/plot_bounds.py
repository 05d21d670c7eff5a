# Plots observed residuals against their bound curves from bounds.csv.
import csv
import sys

import matplotlib.pyplot as plt

path = sys.argv[1] if len(sys.argv) > 1 else "bounds.csv"
with open(path) as f:
    rows = list(csv.DictReader(f))
k = [int(r["k"]) + 1 for r in rows]
fig, ax = plt.subplots(1, 2, figsize=(10, 4))
for observed, bound, axis in [("e_norm", "bound_pointwise", ax[0]), ("ebar_norm", "bound_ergodic", ax[0]),
                              ("g_residual", "bound_certificate_pw", ax[1]),
                              ("gbar_residual", "bound_certificate_erg", ax[1])]:
    axis.loglog(k, [float(r[observed]) for r in rows], label=observed)
    axis.loglog(k, [float(r[bound]) for r in rows], "--", label=bound)
for axis in ax:
    axis.set_xlabel("k + 1")
    axis.legend()
fig.tight_layout()
fig.savefig(path.rsplit(".", 1)[0] + ".png", dpi=150)

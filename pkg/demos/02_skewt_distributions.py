"""The skew-t margin: density shapes and a simulation cross-check.

The observation at one site, index and year is
    location + |z| * skew + s * e,     s^2 ~ IG(a/2, a/2),  z, e ~ N(0, 1),
so positive skew pushes the right tail out and small a fattens both tails.
This script draws the density for a few (skew, a) pairs and overlays a
histogram of draws from the same recipe.
"""

import os

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt
import numpy as np

from skewtproc import SkewTParams, skewt_logpdf_uni

HERE = os.path.dirname(os.path.abspath(__file__))

grid = np.linspace(-6.0, 9.0, 600)

fig, axes = plt.subplots(1, 2, figsize=(10, 4), sharey=True)

# left: skew sweep at a fixed tail
for lam in (0.0, 1.0, 2.5):
    par = SkewTParams(0.0, 1.0, lam, 6.0)
    axes[0].plot(grid, np.exp(skewt_logpdf_uni(grid, par)), label=f"skew {lam}")
axes[0].set_title("tail a = 6")
axes[0].legend()

# right: tail sweep at a fixed skew
for a in (3.0, 6.0, 30.0):
    par = SkewTParams(0.0, 1.0, 1.5, a)
    axes[1].plot(grid, np.exp(skewt_logpdf_uni(grid, par)), label=f"a {a:g}")
axes[1].set_title("skew 1.5")
axes[1].legend()

# simulation overlay on the right panel, same recipe as the model
rng = np.random.default_rng(1)
n = 200_000
a, lam = 6.0, 1.5
s = np.sqrt((a / 2.0) / rng.gamma(a / 2.0, 1.0, n))
draws = s * (lam * np.abs(rng.standard_normal(n)) + rng.standard_normal(n))
axes[1].hist(draws, bins=160, range=(-6, 9), density=True, alpha=0.25, color="k")

out = os.path.join(HERE, "02_skewt_densities.png")
fig.tight_layout()
fig.savefig(out, dpi=120)
print("wrote", out)

# numbers to go with the picture: the right tail responds to skew much
# more than the left one
for lam in (0.0, 1.0, 2.5):
    par = SkewTParams(0.0, 1.0, lam, 6.0)
    dens = np.exp(skewt_logpdf_uni(grid, par))
    cdf = np.cumsum(dens) * (grid[1] - grid[0])
    q95 = grid[np.searchsorted(cdf, 0.95)]
    q05 = grid[np.searchsorted(cdf, 0.05)]
    print(f"skew {lam:3.1f}: 5% ~ {q05:+.2f}   95% ~ {q95:+.2f}")

# and the draws really follow the density (coarse check)
dens = np.exp(skewt_logpdf_uni(grid, SkewTParams(0.0, 1.0, 1.5, 6.0)))
hist, edges = np.histogram(draws, bins=60, range=(-4, 7), density=True)
mids = 0.5 * (edges[1:] + edges[:-1])
interp = np.interp(mids, grid, dens)
print("max |histogram - density|:", float(np.abs(hist - interp).max()))

"""Critical values and the standardizing map.

Each stream gets a ladder of 2K critical values.  The ladder is built from
Wald's SPRT approximations at a sequence of fractional error levels, and
a piecewise-linear map puts every stream's statistic on the same integer
scale so that streams with different tests can be ranked together.

Run with ``python3 demos/01_critical_values.py``.
"""

# %%
import numpy as np

from seqbh import (
    WaldConfig,
    build_full_standardizer,
    fractional_levels,
    sbh_wald_ladder,
    wald_ab,
)

# %% [markdown]
# With a single stream the ladder is just the SPRT's pair of boundaries.

# %%
single = sbh_wald_ladder(WaldConfig(alpha=0.05, beta=0.2, K=1))
print("K=1 ladder:", single.lower, single.upper)
print("Wald boundaries:", wald_ab(0.05, 0.2))

# %% [markdown]
# For K streams the s-th rung uses levels alpha_s and beta_s that shrink as
# more hypotheses have already been decided.  Lower values rise with s
# while upper values fall, so later boundaries are easier to cross.

# %%
cfg = WaldConfig(alpha=0.05, beta=0.2, K=5)
ladder = sbh_wald_ladder(cfg)
print(f"{'s':>2} {'alpha_s':>9} {'beta_s':>9} {'A_s':>9} {'B_s':>9}")
for s in range(1, cfg.K + 1):
    a_s, b_s = fractional_levels(cfg, s)
    print(f"{s:>2} {a_s:9.5f} {b_s:9.5f} {ladder.lower[s-1]:9.4f} {ladder.upper[s-1]:9.4f}")

# %% [markdown]
# The standardizer sends A_s to -(K-s+1) and B_s to K-s+1.  Statistics
# inside (A_K, B_K) land in (-1, 1); outside the outermost rungs it moves
# with unit slope.

# %%
phi = build_full_standardizer(ladder)
print("phi(A_s):", phi(ladder.lower))
print("phi(B_s):", phi(ladder.upper))
grid = np.linspace(ladder.lower[0] - 1, ladder.upper[0] + 1, 9)
for x, z in zip(grid, phi(grid)):
    print(f"  raw {x:7.3f} -> standardized {z:7.3f}")

# %% [markdown]
# A continuous statistic overshoots its boundary.  Pulling the boundaries
# inward by rho = 0.583 compensates.  That is the setting the correlated
# normal experiments use.

# %%
inward = sbh_wald_ladder(WaldConfig(0.05, 0.2, 5, rho=0.583, overshoot="inward"))
print("inward-corrected A:", np.round(inward.lower, 4))
print("inward-corrected B:", np.round(inward.upper, 4))

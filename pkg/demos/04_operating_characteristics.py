"""Monte Carlo operating characteristics against the fixed-sample baseline.

Estimates FDR, FNR and the expected total sample size of the sequential
procedure for a few scenarios and compares them with the fixed-sample
Benjamini-Hochberg procedure.  The replication count is kept small so the
script finishes quickly.  The bundled configs run the full tables through
``seqbh simulate table1``.

Run with ``python3 demos/04_operating_characteristics.py``.
"""

# %%
from seqbh import ExperimentConfig, StreamModelSpec, fixed_sample_bh, run_monte_carlo
from seqbh.config import load_json, parse_simulation_config

# %% [markdown]
# The baseline alone: step-up BH on a vector of p-values.

# %%
print("BH rejections:", sorted(fixed_sample_bh([0.001, 0.02, 0.03, 0.5, 0.8], alpha=0.05)))

# %% [markdown]
# Ten independent Bernoulli streams, half of them null.  The fixed-sample
# baseline uses 77 observations per stream.

# %%
cfg = ExperimentConfig(
    model=StreamModelSpec("bernoulli", (0.4,) * 5 + (0.6,) * 5),
    null=0.4,
    alt=0.6,
    replications=2000,
    seed=1,
    fbh_n=77,
    name="K=10, K0=5",
)
rep = run_monte_carlo(cfg)
print(f"{rep.name}: FDR {rep.fdr_hat:.4f} ({rep.fdr_se:.4f}) vs bound {rep.bound_fdr:.3f}")
print(f"          FNR {rep.fnr_hat:.4f} ({rep.fnr_se:.4f}) vs bound {rep.bound_fnr:.3f}")
print(f"          EN {rep.en_hat:.1f} vs fixed {rep.fbh_total_n}: {rep.savings_vs_fbh:.1f}% saved")
print(f"          baseline FDR {rep.fbh_fdr:.4f}, FNR {rep.fbh_fnr:.4f}")

# %% [markdown]
# Correlated normal streams from the bundled table config, at reduced size.

# %%
for cfg in parse_simulation_config(load_json("table2"), {"replications": 1000})[:4]:
    rep = run_monte_carlo(cfg)
    print(
        f"{cfg.name:<22} FDR {rep.fdr_hat:.4f}  FNR {rep.fnr_hat:.4f}  "
        f"EN {rep.en_hat:5.1f}  savings {rep.savings_vs_fbh:5.1f}%"
    )

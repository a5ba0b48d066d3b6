"""Running the sequential procedure on a handful of streams.

Five Bernoulli streams are tested for p <= 0.4 against p >= 0.6.  Two of
them truly have p = 0.6.  Each stream's log-likelihood ratio is
standardized and the procedure decides streams in stages, accepting from
the bottom of the ranking and rejecting from the top.

Run with ``python3 demos/02_sequential_procedure.py``.
"""

# %%
import numpy as np

from seqbh import (
    LLRAccumulator,
    ProcedureRunner,
    SimpleTestSpec,
    WaldConfig,
    run_procedure,
    sbh_wald_ladder,
)
from seqbh.procedure import REJECTIVE
from seqbh.statistics import rejective_llr_ladder

rng = np.random.default_rng(2024)
p_true = np.array([0.4, 0.4, 0.6, 0.4, 0.6])
K = p_true.size
spec = SimpleTestSpec.bernoulli(0.4, 0.6)
ladder = sbh_wald_ladder(WaldConfig(0.05, 0.2, K))
data = (rng.random((5000, K)) < p_true).astype(float)

# %% [markdown]
# `run_procedure` takes one iterable of statistic values per stream.
# Decided streams stop drawing data, so their sample sizes freeze.

# %%
suppliers = [LLRAccumulator(spec).supply(data[:, k]) for k in range(K)]
result = run_procedure(suppliers, [ladder] * K)
for d in result.decisions:
    print(f"stage {d.stage}: stream {d.stream} (p={p_true[d.stream]}) {d.verdict} at n={d.sample_size}")
print("per-stream sample sizes:", result.per_stream_n, "total:", result.total_n)

# %% [markdown]
# The same run driven by hand, one observation at a time.  This form suits
# data that arrives incrementally.

# %%
runner = ProcedureRunner([ladder] * K)
accs = [LLRAccumulator(spec) for _ in range(K)]
n = 0
while not runner.terminal:
    n += 1
    for k in runner.state.active:
        accs[k].update(data[n - 1, k])
    outcome = runner.observe(n, {k: accs[k].value for k in runner.state.active})
    if outcome.kind == "decide":
        print(f"n={n}: accepted {sorted(outcome.accepted)}, rejected {sorted(outcome.rejected)}")

# %% [markdown]
# Group-sequential monitoring only looks at the boundaries every m
# observations.  The rejective variant never accepts early.  Streams still
# open at the truncation point are accepted there.

# %%
suppliers = [LLRAccumulator(spec).supply(data[:, k]) for k in range(K)]
grouped = run_procedure(suppliers, [ladder] * K, schedule=range(10, 5001, 10))
print("group size 10, total n:", grouped.total_n)

suppliers = [LLRAccumulator(spec).supply(data[:, k]) for k in range(K)]
rejective = run_procedure(
    suppliers, [rejective_llr_ladder(0.05, K)] * K, variant=REJECTIVE, truncation=200
)
for d in rejective.decisions:
    print(f"rejective: stream {d.stream} {d.verdict} at n={d.sample_size}")

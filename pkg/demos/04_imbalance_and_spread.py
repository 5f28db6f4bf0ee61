"""Measuring how balanced and how spread out a selection is."""

# %%
from cbda import (
    BudgetSchedule,
    ClassDistribution,
    DatasetShape,
    ScenarioConfig,
    imbalance_report,
    imbalance_score,
    run_loop,
    selection_histogram,
)
from cbda.metrics import selected_fractions

# %% The score is 0 for a uniform class mix and 1 when a single class takes everything.
for p in ([0.25] * 4, [0.75, 0.25], [0.6, 0.2, 0.1, 0.07, 0.03], [0, 1, 0]):
    print(p, round(imbalance_score(ClassDistribution(p)), 5))

# %%
cfg = ScenarioConfig(DatasetShape(100, 64, 64, 5), (0.6, 0.2, 0.1, 0.07, 0.03), seed=1)
sched = BudgetSchedule(0.05, 5, num_classes=5)
for strategy in ("RA", "DA"):
    _, store = run_loop(cfg, sched, strategy)
    rep = imbalance_report(store)
    frac = selected_fractions(store)
    print(f"{strategy}  max/min class ratio {rep.max_min_ratio:.1f}")
    print(f"    per-image fraction min {frac.min():.4f} max {frac.max():.4f} variance {frac.var():.2e}")

# %% Every fraction here is below 0.1, so bin over [0, 0.1] to see the shape.
counts, _ = selection_histogram(store, num_bins=100)
print("DA images per 0.01 bin:", counts[:10].tolist())

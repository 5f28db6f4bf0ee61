"""A full acquisition loop on a skewed synthetic scenario.

The surrogate model gets less noisy every round. Plain dynamic acquisition
follows the dominant class, while the class-balanced variant steers the
budget towards rare classes.
"""

# %%
from cbda import BudgetSchedule, DatasetShape, ScenarioConfig, run_loop

cfg = ScenarioConfig(DatasetShape(100, 64, 64, 5), class_frequencies=(0.6, 0.2, 0.1, 0.07, 0.03), seed=0)
sched = BudgetSchedule(0.05, 5, num_classes=5)

# %%
for strategy in ("RA", "DA", "CBRA", "CBDA"):
    report, store = run_loop(cfg, sched, strategy, "entropy")
    fin = report.final
    print(f"{strategy:5} imbalance={fin.imbalance_score:.4f} counts={fin.cumulative_counts}")

# %% Round by round weights for the balanced run.
report, _ = run_loop(cfg, sched, "CBDA")
for rec in report.iterations:
    print(rec.iteration, f"noise={rec.noise_level:.2f}", [round(w, 3) for w in rec.weights])

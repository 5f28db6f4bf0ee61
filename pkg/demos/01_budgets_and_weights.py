"""Class budgets and the weights they induce.

A labelling campaign spends a fraction of all pixels spread evenly over a
fixed number of rounds. Each class gets a share of that spend according to a
goal distribution. Classes that already used their share are down-weighted.
"""

# %%
import numpy as np

from cbda import BudgetSchedule, ClassStats, DatasetShape, class_budgets, class_weight

shape = DatasetShape(num_images=100, height=64, width=64, num_classes=5)
sched = BudgetSchedule(budget_fraction=0.05, num_al_iterations=5, num_classes=5)
print("pixels in the pool:", shape.total_pixels)

# %% Cumulative per-class budgets grow linearly with the round index.
for i in range(1, 6):
    print(i, sched.cumulative_target(shape, i), np.round(class_budgets(shape, sched, i), 1))

# %% Weight is 1 for an untouched class and bottoms out at epsilon once the budget is spent.
budget = 819.2
for used in (0, 200, 409.6, 800, 819.2, 2000):
    print(f"used={used:7}  weight={class_weight(used, budget):.6f}")

# %% A skewed history: class 0 hogged the first round.
stats = ClassStats.empty(5)
stats.update(np.array([3000, 700, 300, 76, 20]), iteration=1)
print("weights before round 2:", np.round(stats.weights(shape, sched, 2), 4))

"""Per-image versus global pixel selection.

Region acquisition takes the same number of pixels from every image.
Dynamic acquisition ranks every pixel in the pool at once, so images full of
uncertain pixels receive more of the budget.
"""

# %%
import numpy as np

from cbda import ActiveLabelStore, ScoreStack, select_dynamic, select_region

rng = np.random.default_rng(3)
# image 0 is much more uncertain than the others
scores = rng.random((4, 16, 16))
scores[0] += 0.5
stack = ScoreStack.from_arrays(scores)

# %%
region = select_region(stack, per_image_budget=16, store=None)
dynamic = select_dynamic(stack, budget=64, store=None)
print("region  per image:", region.per_image_counts)
print("dynamic per image:", dynamic.per_image_counts)

# %% Committing picks to a store removes them from later rounds.
gt = rng.integers(0, 3, (4, 16, 16))
store = ActiveLabelStore(4, 16, 16, 3)
first = select_dynamic(stack, 64, store, gt, al_iteration=1)
second = select_dynamic(stack, 64, store, gt, al_iteration=2)
print("overlap between rounds:", len(first.as_set() & second.as_set()))
print("labelled so far:", len(store))

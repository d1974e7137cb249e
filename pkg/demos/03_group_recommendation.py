# %% [markdown]
# # Accuracy and privacy on the MovieLens desk subset
#
# Train on 80% of the ratings of the 200 most active users over the 400 most
# rated movies, predict the held-out 20% with item-based CF, and compare
# plaintext against the two concealment stages.  One seed keeps this quick;
# the CLI sweeps run the full grids.

# %%
from pathlib import Path

from collabpriv.core_model import load_movielens, split_holdout
from collabpriv.cta import ConcealmentParams
from collabpriv.evs import HilbertParams, build_group_profile
from collabpriv.pipeline import Split, conceal_all, evaluate_mae, evs_cell, group_privacy, plain_group

DATA = Path(__file__).resolve().parents[1] / "data" / "ml-100k"
ds = load_movielens(DATA / "u.data", DATA / "u.item").subset(200, 400)
train, test = split_holdout(ds, 0.2, seed=0)
split = Split(train, test)
plain = plain_group(train)
print(f"{len(train)} training and {len(test)} test ratings")
print(f"plaintext MAE {evaluate_mae(plain, test):.4f}")

# %%
for d in (100, 300, 500):
    key, concealed = conceal_all(train, ConcealmentParams(d, 0.5), seed=0)
    group = build_group_profile(concealed, key, train.m)
    print(f"CTA d={d}: MAE {evaluate_mae(group, test):.4f}, VI {group_privacy(plain, group, 0):.3f}")

# %% [markdown]
# EVS on top of CTA at d=500.

# %%
for order, step in [(3, 10), (9, 10), (9, 80)]:
    row = evs_cell(split, ConcealmentParams(500, 0.5), HilbertParams(order, step), seed=0, group=group)
    print(f"EVS order {order}, step {step}: MAE {row['mae']:.4f}, VI {row['vi']:.3f}")

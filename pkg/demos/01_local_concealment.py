# %% [markdown]
# # Local concealment of one MovieLens profile
#
# A participant never ships raw ratings.  Each rated movie becomes a point
# (19 genre flags plus the rating squeezed into [0, 1]).  The points are
# clustered, every cluster is pushed into a random high-dimensional frame,
# and the frame is rotated.  Everyone in the session shares the key, so the
# super-peer can read the group back in the original coordinates.

# %%
from pathlib import Path

import numpy as np
from scipy.spatial.distance import pdist

from collabpriv.core_model import load_movielens, points_matrix, profile_points
from collabpriv.cta import ConcealmentParams, SessionKey, conceal_local, readout

DATA = Path(__file__).resolve().parents[1] / "data" / "ml-100k"
ds = load_movielens(DATA / "u.data", DATA / "u.item")
profile = ds.profiles()[196]
x = points_matrix(profile_points(profile, ds.features))
print(f"user 196 rated {len(profile)} movies, points live in {x.shape[1]} dimensions")

# %% [markdown]
# Without noise the transform is an isometry inside each cluster.

# %%
key = SessionKey.from_seed(42)
clean = conceal_local(profile, ds.features, ConcealmentParams(d_dim=200, noise_sigma0=0.0), key, seed=0)
for label in np.unique(clean.labels):
    idx = np.flatnonzero(clean.labels == label)
    if len(idx) > 2:
        err = np.max(np.abs(pdist(clean.vectors[idx]) - pdist(x[idx])))
        print(f"cluster {label:2d}: {len(idx):2d} points, worst distance change {err:.1e}")

# %% [markdown]
# With noise, the key holder's readout error shrinks as the target dimension
# grows, because the fixed noise energy is spread over more coordinates and
# only m of them survive the readout.

# %%
for d in (100, 300, 600):
    noisy = conceal_local(profile, ds.features, ConcealmentParams(d, noise_sigma0=0.5), key, seed=0)
    back = readout(noisy, key, ds.m)
    print(f"d={d}: mean |readout - raw| = {np.abs(back - x).mean():.4f}")

# %% [markdown]
# A guessed key gives back garbage.

# %%
wrong = readout(noisy, SessionKey.from_seed(7), ds.m)
print(f"wrong key: mean |readout - raw| = {np.abs(wrong - x).mean():.4f}")

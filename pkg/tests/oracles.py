"""Slow, independent reference implementations used only by the tests.

Everything here is written against the textbook formulas with plain Python
loops and dicts, sharing no code with the package.
"""
import itertools
import math
from collections import Counter


def adjusted_cosine(ratings, a, b):
    """``ratings``: {member: {item: value}}."""
    means = {u: sum(r.values()) / len(r) for u, r in ratings.items() if r}
    co = [u for u, r in ratings.items() if a in r and b in r]
    if len(co) < 2:
        return None
    num = sum((ratings[u][a] - means[u]) * (ratings[u][b] - means[u]) for u in co)
    da = math.sqrt(sum((ratings[u][a] - means[u]) ** 2 for u in co))
    db = math.sqrt(sum((ratings[u][b] - means[u]) ** 2 for u in co))
    if da == 0 or db == 0:
        return None
    return max(-1.0, min(1.0, num / (da * db)))


def predict(ratings, target, K):
    items = sorted({i for r in ratings.values() for i in r})
    holders = {i: [r[i] for r in ratings.values() if i in r] for i in items}
    item_rating = {i: sum(v) / len(v) for i, v in holders.items()}
    every = [v for r in ratings.values() for v in r.values()]
    cands = []
    for j in items:
        if j == target:
            continue
        s = adjusted_cosine(ratings, target, j)
        if s is not None and s > 0:
            cands.append((j, s))
    cands.sort(key=lambda t: (-round(t[1], 12), t[0]))
    chosen = cands[:K]
    if not chosen:
        p = sum(every) / len(every)
    else:
        p = math.fsum(s * item_rating[j] for j, s in chosen) / math.fsum(abs(s) for _, s in chosen)
    return min(5.0, max(1.0, p))


def recommend(ratings, top_n, K):
    members = list(ratings)
    items = sorted({i for r in ratings.values() for i in r})
    out = [(i, predict(ratings, i, K)) for i in items if not all(i in ratings[u] for u in members)]
    out.sort(key=lambda t: (-round(t[1], 12), t[0]))
    return out[:top_n]


def entropy(labels):
    n = len(labels)
    return -sum(c / n * math.log(c / n) for c in Counter(labels).values())


def vi(a, b):
    """VI = H(A) + H(B) - 2 I(A;B), with I from the contingency table."""
    n = len(a)
    joint = Counter(zip(a, b))
    ca, cb = Counter(a), Counter(b)
    mi = sum(c / n * math.log((c / n) / ((ca[x] / n) * (cb[y] / n))) for (x, y), c in joint.items())
    return entropy(a) + entropy(b) - 2 * mi


def best_two_partition(points):
    """Exhaustive minimum within-cluster SSE over all 2-partitions."""
    n = len(points)

    def sse(idx):
        if not idx:
            return 0.0
        dim = len(points[0])
        c = [sum(points[i][d] for i in idx) / len(idx) for d in range(dim)]
        return sum(sum((points[i][d] - c[d]) ** 2 for d in range(dim)) for i in idx)

    best = None
    for mask in range(1, 2 ** (n - 1)):
        left = [i for i in range(n) if mask >> i & 1]
        right = [i for i in range(n) if not mask >> i & 1]
        cost = sse(left) + sse(right)
        if best is None or cost < best[0]:
            best = (cost, frozenset(left), frozenset(right))
    return {best[1], best[2]}


def hilbert_2d_order1():
    """The order-1 curve in 2-D traced by hand: a U through the four cells."""
    return {(0, 0): 0, (0, 1): 1, (1, 1): 2, (1, 0): 3}


def all_cells(order, m):
    return itertools.product(range(2 ** order), repeat=m)

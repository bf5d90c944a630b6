"""Random rating matrices for tests, benchmarks and demos."""

from __future__ import annotations

import numpy as np

from .model import SparseRatings, from_arrays


def random_instance(rng, n_raters: int, n_items: int, density: float = 0.5,
                    levels=None) -> SparseRatings:
    """Random sparse ratings in which every rater and every item has at least
    one evaluation.

    Values are uniform on [0, 1], or drawn from ``levels`` when given.
    """
    mask = rng.random((n_raters, n_items)) < density
    for i in np.flatnonzero(~mask.any(axis=1)):
        mask[i, rng.integers(n_items)] = True
    for j in np.flatnonzero(~mask.any(axis=0)):
        mask[rng.integers(n_raters), j] = True
    rows, cols = np.nonzero(mask)
    if levels is None:
        vals = rng.random(rows.size)
    else:
        vals = rng.choice(np.asarray(levels, dtype=float), rows.size)
    return from_arrays(rows, cols, vals, n_raters, n_items)


def movielens_like(seed: int = 0, n_raters: int = 943, n_items: int = 1682,
                   n_ratings: int = 100_000, min_per_rater: int = 20) -> SparseRatings:
    """A stand-in with the shape of the MovieLens 100k ratings.

    Rater activity and item popularity are heavy tailed, every rater has at
    least ``min_per_rater`` ratings, and the 1-5 stars come from item quality
    plus rater bias plus noise, thresholded so the star histogram is close to
    the real one (about 6/11/27/34/22 percent). Values are returned
    normalized, with scale ``(1, 5)``.
    """
    rng = np.random.default_rng(seed)
    activity = rng.lognormal(0.0, 1.1, n_raters)
    cap = n_items // 2
    extra = n_ratings - min_per_rater * n_raters
    counts = min_per_rater + np.minimum(np.floor(extra * activity / activity.sum()).astype(int),
                                        cap - min_per_rater)
    while counts.sum() < n_ratings:
        i = rng.integers(n_raters)
        counts[i] += counts[i] < cap
    popularity = (np.exp(-np.arange(n_items) / 250.0) + 0.004)[rng.permutation(n_items)]
    p = popularity / popularity.sum()
    chosen = [rng.choice(n_items, size=c, replace=False, p=p) for c in counts]
    # Every item gets at least one rating: hand unrated items to the most active raters.
    rated = np.zeros(n_items, dtype=bool)
    for items in chosen:
        rated[items] = True
    busiest = np.argsort(-counts)
    for k, j in enumerate(np.flatnonzero(~rated)):
        items = chosen[busiest[k % n_raters]]
        items[(k // n_raters) % items.size] = j
    rows = np.concatenate([np.full(c, i) for i, c in enumerate(counts)])
    cols = np.concatenate(chosen)
    # Popular items tend to be better liked.
    quality = rng.normal(0.0, 0.45, n_items) + 0.35 * np.log(popularity / popularity.mean())
    bias = rng.normal(0.0, 0.4, n_raters)
    latent = quality[cols] + bias[rows] + rng.normal(0.0, 0.8, rows.size)
    cuts = np.quantile(latent, [0.061, 0.175, 0.446, 0.788])
    stars = 1 + np.searchsorted(cuts, latent)
    return from_arrays(rows, cols, (stars - 1) / 4.0, n_raters, n_items, (1.0, 5.0))

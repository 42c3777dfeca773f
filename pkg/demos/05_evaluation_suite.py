#!/usr/bin/env python3
# The analysis toolkit on a worked example: confusion matrix, mean ordinal
# distance of the misclassifications, marginal-homogeneity significance
# between two models, accuracy by length quartile, and perturbation-based
# modality attribution.

import numpy as np

from nwqm.evaluation import (accuracy, confusion, mean_ordinal_distance,
                             modality_attribution, quartile_report,
                             stuart_maxwell)

rng = np.random.default_rng(0)

# simulate two models on 300 pages: model A is better and makes near-miss
# mistakes, model B errs further from the truth
labels = rng.integers(0, 6, size=300)
preds_a = labels.copy()
flip_a = rng.random(300) < 0.25
preds_a[flip_a] = np.clip(labels[flip_a] + rng.choice([-1, 1], flip_a.sum()), 0, 5)
preds_b = labels.copy()
flip_b = rng.random(300) < 0.45
preds_b[flip_b] = rng.integers(0, 6, size=flip_b.sum())

print(f"accuracy: model A {accuracy(list(preds_a), list(labels)):.3f}, "
      f"model B {accuracy(list(preds_b), list(labels)):.3f}")

matrix = confusion(list(preds_a), list(labels))
print("\nmodel A confusion matrix (rows true Stub..FA):")
print(matrix.to_csv())

# ordinal miss distance: how far wrong predictions land, per true class
dist_a = mean_ordinal_distance(list(preds_a), list(labels))
dist_b = mean_ordinal_distance(list(preds_b), list(labels))
print("mean |ordinal error| of the misclassifications:")
print("  model A:", np.round(dist_a, 3))
print("  model B:", np.round(dist_b, 3))

# are the two models' marginal class distributions the same?
stat, df, p = stuart_maxwell(list(preds_a), list(preds_b))
print(f"\nmarginal homogeneity: chi2={stat:.2f}, df={df}, p={p:.2e}")

# accuracy by article-length quartile, shortest quartile first
lengths = rng.integers(100, 5000, size=300).tolist()
quartiles = quartile_report(lengths, list(preds_a), list(labels))
print("\nper-quartile accuracy (model A):")
print(quartiles.to_csv())

# attribution: mask features, fit a local surrogate, average |weight| per
# modality block; here the head leans on the talk block by construction
page_dim = 8
head_w = np.zeros((3 * page_dim, 6))
head_w[page_dim:2 * page_dim] = rng.normal(size=(page_dim, 6))
head_w[:page_dim] = 0.3 * rng.normal(size=(page_dim, 6))


def head(x):
    z = x @ head_w
    z -= z.max()
    e = np.exp(z)
    return e / e.sum()


features = [rng.normal(size=3 * page_dim) for _ in range(12)]
blocks = [("text", 0, page_dim), ("talk", page_dim, 2 * page_dim),
          ("image", 2 * page_dim, 3 * page_dim)]
report = modality_attribution(head, features, blocks, n_samples=2000, seed=0)
print("mean contribution per modality, grouped by predicted class:")
print(report.to_csv())

"""Evaluation suite: accuracy, confusion matrix, per-class mean ordinal
distance of misclassifications, the Stuart-Maxwell marginal-homogeneity
test, quartile-by-length accuracy, and perturbation-based modality
attribution of the classifier head.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass
from typing import Callable, Dict, Optional, Sequence, Tuple

import numpy as np
from scipy.special import gammaincc

from .dump_ingest import CLASS_NAMES

N_CLASSES = 6

# Published full-scale accuracies (percent) for context; they need the
# 33K-page corpus and pretrained encoders, so desk-scale runs never
# reproduce them. Kept as reference values for report collation.
REFERENCE_ACCURACY = {
    "ORES": 43.21,
    "doc2vec wRF": 44.01,
    "doc2vec wLR": 49.33,
    "bilstm+": 54.5,
    "H-LSTM": 53.05,
    "M-biLSTM": 58.47,
    "DocBERT": 57.66,
    "DocBERT-wT": 59.87,
    "HAN": 56.35,
    "HAN-wT": 57.48,
    "NwQM": 63.23,
    "NwQM-w/oI": 59.95,
    "NwQM-w/oT": 62.37,
    "NwQM-w/oTI": 59.10,
    "Talk": 37.95,
    "Inception V3": 52.96,
}


def accuracy(preds: Sequence[int], labels: Sequence[int]) -> float:
    if len(preds) != len(labels):
        raise ValueError(f"length mismatch: {len(preds)} predictions, {len(labels)} labels")
    if not preds:
        raise ValueError("cannot compute accuracy of zero predictions")
    return sum(int(p == l) for p, l in zip(preds, labels)) / len(preds)


@dataclass
class ConfusionMatrix:
    counts: np.ndarray  # (6, 6) rows = true, columns = predicted, Stub..FA

    @property
    def total(self) -> int:
        return int(self.counts.sum())

    def accuracy(self) -> float:
        return float(np.trace(self.counts)) / self.total

    def row_support(self) -> np.ndarray:
        return self.counts.sum(axis=1)

    def to_csv(self) -> str:
        lines = ["true\\pred," + ",".join(CLASS_NAMES)]
        for i, name in enumerate(CLASS_NAMES):
            lines.append(name + "," + ",".join(str(int(c)) for c in self.counts[i]))
        return "\n".join(lines) + "\n"


def confusion(preds: Sequence[int], labels: Sequence[int],
              n_classes: int = N_CLASSES) -> ConfusionMatrix:
    counts = np.zeros((n_classes, n_classes), dtype=np.int64)
    for p, l in zip(preds, labels):
        counts[l, p] += 1
    return ConfusionMatrix(counts=counts)


def mean_ordinal_distance(preds: Sequence[int], labels: Sequence[int],
                          n_classes: int = N_CLASSES) -> np.ndarray:
    """Per true class, mean |ordinal error| over the misclassified examples.

    A class with no errors reports 0 by convention.
    """
    sums = np.zeros(n_classes)
    errs = np.zeros(n_classes)
    for p, l in zip(preds, labels):
        if p != l:
            sums[l] += abs(p - l)
            errs[l] += 1
    out = np.zeros(n_classes)
    nonzero = errs > 0
    out[nonzero] = sums[nonzero] / errs[nonzero]
    return out


def chi_square_sf(statistic: float, df: int) -> float:
    """Upper tail of the chi-square distribution via the regularized
    incomplete gamma function."""
    if df <= 0:
        return 1.0
    return float(gammaincc(df / 2.0, statistic / 2.0))


def paired_table(preds_a: Sequence[int], preds_b: Sequence[int],
                 n_classes: int = N_CLASSES) -> np.ndarray:
    if len(preds_a) != len(preds_b):
        raise ValueError("paired predictions must have equal length")
    table = np.zeros((n_classes, n_classes), dtype=np.int64)
    for a, b in zip(preds_a, preds_b):
        table[a, b] += 1
    return table


def stuart_maxwell_from_table(table: np.ndarray) -> Tuple[float, int, float]:
    """Marginal homogeneity statistic for a K x K paired table.

    d_i = row_i - col_i over the first K-1 categories; S_ii = row_i + col_i
    - 2 N_ii and S_ij = -(N_ij + N_ji). The statistic is d' S^-1 d with a
    pseudo-inverse (and reduced degrees of freedom) when S is singular.
    """
    table = np.asarray(table, dtype=np.float64)
    k = table.shape[0]
    if table.shape != (k, k) or k < 2:
        raise ValueError(f"need a square table of size >= 2, got {table.shape}")
    rows = table.sum(axis=1)[:-1]
    cols = table.sum(axis=0)[:-1]
    d = rows - cols
    sub = table[:-1, :-1]
    cov = -(sub + sub.T)
    np.fill_diagonal(cov, rows + cols - 2 * np.diag(sub))
    df = k - 1
    if np.allclose(d, 0.0):
        return 0.0, df, 1.0
    try:
        solved = np.linalg.solve(cov, d)
    except np.linalg.LinAlgError:
        solved = np.linalg.pinv(cov) @ d
        df = int(np.linalg.matrix_rank(cov))
    statistic = float(d @ solved)
    return statistic, df, chi_square_sf(statistic, df)


def stuart_maxwell(preds_a: Sequence[int], preds_b: Sequence[int],
                   n_classes: int = N_CLASSES) -> Tuple[float, int, float]:
    """Stuart-Maxwell test on two models' paired predictions.

    Returns (chi-square statistic, degrees of freedom, p-value). For K = 2
    this reduces to McNemar's (b - c)^2 / (b + c).
    """
    return stuart_maxwell_from_table(paired_table(preds_a, preds_b, n_classes))


@dataclass
class QuartileReport:
    """Accuracy per quartile of a length variable; Q1 holds the shortest
    items and quartile sizes differ by at most one."""

    accuracy: np.ndarray  # (4, n_classes), NaN where a class is absent
    support: np.ndarray  # (4, n_classes) int
    overall: np.ndarray  # (4,) accuracy per quartile

    def to_csv(self) -> str:
        lines = ["quartile," + ",".join(CLASS_NAMES) + ",overall"]
        for q in range(4):
            cells = []
            for c in range(self.accuracy.shape[1]):
                cells.append("" if np.isnan(self.accuracy[q, c])
                             else f"{self.accuracy[q, c]:.4f}")
            lines.append(f"Q{q + 1}," + ",".join(cells) + f",{self.overall[q]:.4f}")
        return "\n".join(lines) + "\n"


def quartile_report(lengths: Sequence[float], preds: Sequence[int],
                    labels: Sequence[int], n_classes: int = N_CLASSES) -> QuartileReport:
    n = len(lengths)
    if not (n == len(preds) == len(labels)):
        raise ValueError("lengths, preds and labels must have equal length")
    if n < 4:
        raise ValueError(f"need at least 4 examples for quartiles, got {n}")
    order = sorted(range(n), key=lambda i: (lengths[i], i))  # stable by index
    sizes = [n // 4 + (1 if q < n % 4 else 0) for q in range(4)]
    acc = np.full((4, n_classes), np.nan)
    support = np.zeros((4, n_classes), dtype=np.int64)
    overall = np.zeros(4)
    start = 0
    for q, size in enumerate(sizes):
        members = order[start:start + size]
        start += size
        hits = np.zeros(n_classes)
        for i in members:
            support[q, labels[i]] += 1
            if preds[i] == labels[i]:
                hits[labels[i]] += 1
        present = support[q] > 0
        acc[q, present] = hits[present] / support[q, present]
        overall[q] = sum(int(preds[i] == labels[i]) for i in members) / max(size, 1)
    return QuartileReport(accuracy=acc, support=support, overall=overall)


# ---------------------------------------------------------------------------
# perturbation-based attribution of the classifier head

@dataclass
class PageAttribution:
    weights: np.ndarray  # per-feature surrogate weights
    selected: np.ndarray  # indices of the top-k features by |weight|
    predicted_class: int


def attribute_page(head: Callable[[np.ndarray], np.ndarray], features: np.ndarray,
                   n_samples: int, rng: np.random.Generator, top_k: int = 500,
                   kernel_width: Optional[float] = None,
                   ridge: float = 1e-3) -> PageAttribution:
    """Fit a local linear surrogate to the head around one feature vector.

    Binary masks zero out individual features; the surrogate is local, so
    the design holds the full mask, every leave-one-out mask, and random
    masks within one kernel width of the instance, weighted by an
    exponential kernel on the mask's Hamming distance from the full vector.
    A ridge-regularised weighted least squares then recovers per-feature
    weights for the probability of the predicted class. Features that are
    exactly zero cannot change under the zero baseline, so their weight is
    identically zero.
    """
    x = np.asarray(features, dtype=np.float64)
    d = x.size
    if kernel_width is None:
        kernel_width = 0.75 * np.sqrt(d)
    if n_samples < d:
        warnings.warn(
            f"attribution surrogate is under-determined ({n_samples} samples for "
            f"{d} features); ridge regularisation applies", RuntimeWarning)
    predicted = int(np.argmax(head(x)))
    active = np.flatnonzero(x != 0.0)
    weights = np.zeros(d)
    if active.size:
        m = active.size
        k_max = min(m, int(np.ceil(kernel_width)))
        rows = [np.ones(m)]
        for j in range(m):
            anchor = np.ones(m)
            anchor[j] = 0.0
            rows.append(anchor)
        while len(rows) < n_samples:
            row = np.ones(m)
            k = int(rng.integers(0, k_max + 1))
            row[rng.choice(m, size=k, replace=False)] = 0.0
            rows.append(row)
        masks = np.stack(rows[:n_samples])
        responses = np.empty(n_samples)
        for i in range(n_samples):
            perturbed = np.zeros(d)
            perturbed[active] = x[active] * masks[i]
            responses[i] = head(perturbed)[predicted]
        hamming = active.size - masks.sum(axis=1)
        sample_w = np.exp(-(hamming ** 2) / (kernel_width ** 2))
        design = np.column_stack([np.ones(n_samples), masks])
        wd = design * sample_w[:, None]
        gram = design.T @ wd
        gram[np.arange(1, gram.shape[0]), np.arange(1, gram.shape[0])] += ridge
        beta = np.linalg.solve(gram, wd.T @ responses)
        weights[active] = beta[1:]
    return PageAttribution(weights=weights, selected=_top_k(weights, top_k),
                           predicted_class=predicted)


def _top_k(weights: np.ndarray, k: int) -> np.ndarray:
    magnitude = np.abs(weights)
    order = sorted(range(weights.size), key=lambda i: (-magnitude[i], i))
    return np.asarray(order[: min(k, weights.size)], dtype=np.intp)


MODALITY_NAMES = ("text", "talk", "image")


@dataclass
class AttributionReport:
    """Mean contribution score per class and modality, with page counts."""

    scores: np.ndarray  # (n_classes, 3) mean |weight| over selected features
    counts: np.ndarray  # (n_classes,) pages aggregated per class
    group_by: str = "predicted"

    def to_csv(self) -> str:
        lines = ["class," + ",".join(MODALITY_NAMES) + ",pages"]
        for c, name in enumerate(CLASS_NAMES):
            cells = ",".join(f"{s:.6g}" for s in self.scores[c])
            lines.append(f"{name},{cells},{int(self.counts[c])}")
        return "\n".join(lines) + "\n"


def modality_attribution(head: Callable[[np.ndarray], np.ndarray],
                         feature_vectors: Sequence[np.ndarray],
                         blocks: Sequence[Tuple[str, int, int]],
                         n_samples: int, seed: int, top_k: int = 500,
                         labels: Optional[Sequence[int]] = None,
                         group_by: str = "predicted",
                         n_classes: int = N_CLASSES,
                         ridge: float = 1e-3) -> AttributionReport:
    """Aggregate per-page attributions into class x modality mean scores.

    ``blocks`` names the feature ranges of each modality. Pages group by
    predicted class (default) or true class when labels are given. Per-page
    seeds derive from the master seed, so results are reproducible and
    independent of evaluation order.
    """
    if group_by not in ("predicted", "true"):
        raise ValueError(f"group_by must be 'predicted' or 'true', not {group_by!r}")
    if group_by == "true" and labels is None:
        raise ValueError("grouping by true class needs labels")
    sums = np.zeros((n_classes, len(blocks)))
    counts = np.zeros(n_classes, dtype=np.int64)
    for page_index, features in enumerate(feature_vectors):
        rng = np.random.Generator(np.random.PCG64(np.random.SeedSequence((seed, page_index))))
        page = attribute_page(head, features, n_samples, rng, top_k=top_k, ridge=ridge)
        group = page.predicted_class if group_by == "predicted" else int(labels[page_index])
        selected = set(page.selected.tolist())
        for b, (_, start, stop) in enumerate(blocks):
            chosen = [i for i in range(start, stop) if i in selected]
            if chosen:
                sums[group, b] += float(np.mean(np.abs(page.weights[chosen])))
        counts[group] += 1
    scores = np.zeros_like(sums)
    has = counts > 0
    scores[has] = sums[has] / counts[has, None]
    return AttributionReport(scores=scores, counts=counts, group_by=group_by)


def block_mass(page: PageAttribution, blocks: Sequence[Tuple[str, int, int]]) -> Dict[str, float]:
    """Fraction of selected |weight| mass per modality block."""
    total = float(np.sum(np.abs(page.weights[page.selected])))
    out = {}
    for name, start, stop in blocks:
        chosen = [i for i in page.selected if start <= i < stop]
        out[name] = (float(np.sum(np.abs(page.weights[chosen]))) / total) if total > 0 else 0.0
    return out

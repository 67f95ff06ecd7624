"""Network summaries: recovery metrics, density, transitivity, Procrustes."""

from dataclasses import dataclass

import numpy as np
from scipy.linalg import orthogonal_procrustes
from scipy.stats import rankdata

from .exceptions import ValidationError


@dataclass
class RecoveryReport:
    tp: int
    fp: int
    tn: int
    fn: int
    acc: float
    auc: float

    def as_dict(self):
        return dict(tp=self.tp, fp=self.fp, tn=self.tn, fn=self.fn, acc=self.acc, auc=self.auc)


def _upper(a):
    a = np.asarray(a)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise ValidationError("expected a square matrix")
    return a[np.triu_indices(a.shape[0], 1)]


def auc_score(scores, labels):
    """Area under the ROC curve in percent, ties counted as one half."""
    scores = np.asarray(scores, dtype=float)
    labels = np.asarray(labels).astype(bool)
    n_pos = int(labels.sum())
    n_neg = labels.size - n_pos
    if n_pos == 0 or n_neg == 0:
        raise ValidationError("AUC undefined: truth has only one class")
    ranks = rankdata(scores)
    u = ranks[labels].sum() - n_pos * (n_pos + 1) / 2.0
    return 100.0 * u / (n_pos * n_neg)


def recovery_metrics(edge_prob, true_graph, threshold=0.5):
    """Compare posterior edge probabilities with a planted graph.

    Counts use the median-probability graph (edge_prob > threshold) over the
    n(n-1)/2 unordered pairs; AUC ranks the pairs by edge_prob.
    """
    p = _upper(edge_prob).astype(float)
    truth = _upper(true_graph) > 0
    pred = p > threshold
    tp = int(np.sum(pred & truth))
    fp = int(np.sum(pred & ~truth))
    tn = int(np.sum(~pred & ~truth))
    fn = int(np.sum(~pred & truth))
    acc = 100.0 * (tp + tn) / truth.size
    return RecoveryReport(tp, fp, tn, fn, acc, auc_score(p, truth))


def network_density(graph):
    """Number of edges over n(n-1)/2."""
    g = np.asarray(graph)
    n = g.shape[0]
    if n < 2:
        raise ValidationError("density needs at least two nodes")
    return float((_upper(g) != 0).sum()) / (n * (n - 1) / 2.0)


def standardize_series(values):
    """z-scores with the population (1/N) standard deviation."""
    x = np.asarray(values, dtype=float)
    if x.size < 2:
        raise ValidationError("need at least two values")
    sd = x.std()
    if not sd > 0:
        raise ValidationError("series has zero variance")
    return (x - x.mean()) / sd


def positive_periods(z, labels=None):
    """Runs of strictly positive standardized values as (first, last) labels."""
    z = np.asarray(z, dtype=float)
    labels = list(range(z.size)) if labels is None else list(labels)
    runs = []
    start = None
    for i, v in enumerate(z):
        if v > 0 and start is None:
            start = i
        elif v <= 0 and start is not None:
            runs.append((labels[start], labels[i - 1]))
            start = None
    if start is not None:
        runs.append((labels[start], labels[-1]))
    return runs


def clustering_coefficient(graph):
    """Transitivity: 3 x triangles over connected triples (0 if none)."""
    a = (np.asarray(graph) != 0).astype(float)
    np.fill_diagonal(a, 0.0)
    deg = a.sum(axis=1)
    triples = float(np.sum(deg * (deg - 1.0)))
    if triples == 0:
        return 0.0
    closed = float(np.trace(a @ a @ a))
    return closed / triples


@dataclass
class ProcrustesResult:
    rho: float
    h: np.ndarray
    c: np.ndarray
    d: float

    def transform(self, source):
        return self.rho * np.asarray(source) @ self.h + self.c


def procrustes(target, source, reflection=True):
    """Similarity transform rho * source @ h + c closest to `target`.

    `d` is the minimized residual sum of squares divided by the centered
    total sum of squares of the target, so 0 means identical shapes and
    1 means nothing is explained.
    """
    x = np.asarray(target, dtype=float)
    y = np.asarray(source, dtype=float)
    if x.shape != y.shape:
        raise ValidationError(f"shape mismatch {x.shape} vs {y.shape}")
    xm, ym = x.mean(axis=0), y.mean(axis=0)
    xc, yc = x - xm, y - ym
    ssx = float(np.sum(xc * xc))
    ssy = float(np.sum(yc * yc))
    if not ssx > 0:
        raise ValidationError("degenerate target configuration")
    p = x.shape[1]
    if not ssy > 0:
        return ProcrustesResult(0.0, np.eye(p), xm, 1.0)
    u, s, vt = np.linalg.svd(yc.T @ xc)
    if not reflection and np.linalg.det(u @ vt) < 0:
        u[:, -1] *= -1.0
        s[-1] *= -1.0
    h = u @ vt
    rho = s.sum() / ssy
    c = xm - rho * ym @ h
    rss = ssx - s.sum() ** 2 / ssy
    return ProcrustesResult(float(rho), h, c, float(min(max(rss / ssx, 0.0), 1.0)))


def procrustes_series(configs):
    """Procrustes distances between consecutive configurations."""
    if len(configs) < 2:
        raise ValidationError("need at least two configurations")
    return [procrustes(a, b).d for a, b in zip(configs[:-1], configs[1:])]


def orthogonal_align(target, source):
    """Rotate/reflect `source` (no centering or scaling) onto `target`."""
    r, _ = orthogonal_procrustes(source, target)
    return source @ r

"""Segmentation accuracy metrics and the Tukey HSD comparison across methods."""
from __future__ import annotations
from dataclasses import dataclass
from itertools import combinations
from string import ascii_uppercase
from typing import List, Optional, Sequence, Tuple

import numpy as np
import pandas as pd
from scipy import stats
from scipy.spatial.distance import directed_hausdorff

from leaf_pheno.errors import DegenerateInputError, EmptyMaskError
from leaf_pheno.domain.morphology.components import connected_components

ALPHA = 0.05


def _pair(a: np.ndarray, b: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    a = np.asarray(a, dtype=bool); b = np.asarray(b, dtype=bool)
    if a.shape != b.shape:
        raise DegenerateInputError(f"mask shapes differ: {a.shape} vs {b.shape}")
    return a, b


def jaccard(a: np.ndarray, b: np.ndarray) -> float:
    a, b = _pair(a, b)
    union = int(np.count_nonzero(a | b))
    if union == 0:
        return 1.0
    return np.count_nonzero(a & b) / union


def recall(pred: np.ndarray, gt: np.ndarray) -> float:
    pred, gt = _pair(pred, gt)
    n = int(np.count_nonzero(gt))
    if n == 0:
        raise EmptyMaskError("recall needs a nonempty ground-truth mask")
    return np.count_nonzero(pred & gt) / n


def r_squared(x: Sequence[float], y: Sequence[float]) -> float:
    """Coefficient of determination of the least-squares line y ~ x."""
    x = np.asarray(x, dtype=np.float64); y = np.asarray(y, dtype=np.float64)
    if x.shape != y.shape or x.size < 3:
        raise DegenerateInputError("r_squared needs two equal-length sequences of at least 3 values")
    if np.ptp(x) == 0 or np.ptp(y) == 0:
        raise DegenerateInputError("r_squared needs nonzero variance in x and y")
    return float(stats.linregress(x, y).rvalue ** 2)


def hausdorff(a: Sequence[Tuple[float, float]], b: Sequence[Tuple[float, float]]) -> float:
    """Symmetric Hausdorff distance between two point sets (contours)."""
    u = np.asarray(a, dtype=np.float64).reshape(-1, 2)
    v = np.asarray(b, dtype=np.float64).reshape(-1, 2)
    if len(u) == 0 or len(v) == 0:
        raise DegenerateInputError("hausdorff needs two nonempty point sets")
    return float(max(directed_hausdorff(u, v)[0], directed_hausdorff(v, u)[0]))


def object_counts(masks: Sequence[np.ndarray], connectivity: int = 8) -> List[int]:
    return [connected_components(m, connectivity)[1] for m in masks]


# ---------------------------------------------------------------------------
# Tukey HSD
# ---------------------------------------------------------------------------

@dataclass
class TukeyResult:
    letters: List[str]              # one compact-letter string per group, input order
    pairs: pd.DataFrame             # group_a, group_b, mean_diff, p_value, reject
    means: List[float]


def _letters(means: np.ndarray, differ: np.ndarray) -> List[str]:
    """Compact letter display by insert-and-absorb.

    Every column is a set of groups that share a letter; a significant pair
    splits each column holding both, and columns contained in another are
    dropped. Letters follow the order of decreasing group mean.
    """
    k = len(means)
    cols: List[frozenset] = [frozenset(range(k))]
    for i, j in combinations(range(k), 2):
        if not differ[i, j]:
            continue
        nxt: List[frozenset] = []
        for c in cols:
            if i in c and j in c:
                nxt += [c - {i}, c - {j}]
            else:
                nxt.append(c)
        uniq = list(dict.fromkeys(nxt))
        cols = [c for c in uniq if not any(c < d for d in uniq)]
    order = list(np.argsort(-means, kind="stable"))
    rank = {g: r for r, g in enumerate(order)}
    cols.sort(key=lambda c: min(rank[g] for g in c))
    out = ["" for _ in range(k)]
    for letter, c in zip(ascii_uppercase, cols):
        for g in sorted(c):
            out[g] += letter
    return out


def tukey_hsd(groups: Sequence[Sequence[float]], alpha: float = ALPHA,
              names: Optional[Sequence[str]] = None) -> TukeyResult:
    """All-pairs studentized-range comparison; groups sharing no letter differ at `alpha`."""
    data = [np.asarray(g, dtype=np.float64) for g in groups]
    if len(data) < 2 or any(len(g) < 2 for g in data):
        raise DegenerateInputError("tukey_hsd needs at least two groups of at least two values")
    if all(np.ptp(g) == 0 for g in data):
        raise DegenerateInputError("tukey_hsd needs within-group variance")
    names = list(names) if names is not None else [str(i) for i in range(len(data))]
    res = stats.tukey_hsd(*data)
    means = np.array([g.mean() for g in data])
    p = np.asarray(res.pvalue)
    differ = p < alpha
    rows = [{"group_a": names[i], "group_b": names[j], "mean_diff": float(means[i] - means[j]),
             "p_value": float(p[i, j]), "reject": bool(differ[i, j])}
            for i, j in combinations(range(len(data)), 2)]
    return TukeyResult(_letters(means, differ), pd.DataFrame(rows), means.tolist())

"""Multi-locus association scan with two alternating fixed-effect models.

Each iteration tests every SNP given the current pseudo-QTN covariates,
takes the significant SNPs in p-value order while skipping any in LD with one
already taken, and keeps the prefix of that list with the lowest BIC as the
next covariate set. The loop stops once the covariate set repeats.
"""
from __future__ import annotations
import logging
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
import pandas as pd
from scipy import stats

from leaf_pheno.errors import DegenerateInputError
from .genotype import LD_R2, GenotypeMatrix, pairwise_r2

log = logging.getLogger(__name__)

CANDIDATE_P = 0.01         # FEM-1 p below this makes a SNP a pseudo-QTN candidate
MAX_QTN = 20
MAX_ITER = 10
FDR_LEVEL = 0.05


@dataclass
class GwasHit:
    snp_id: str
    chrom: int
    pos: int
    maf: float
    p_value: float
    effect: float
    fdr_p: float
    qtn: bool = False


@dataclass
class BlinkState:
    qtns: List[int] = field(default_factory=list)            # SNP column indices
    effects: np.ndarray = field(default_factory=lambda: np.zeros(0))
    iteration: int = 0
    bic_trace: List[Dict[str, float]] = field(default_factory=list)
    dropped: List[int] = field(default_factory=list)         # rank-deficient QTNs

    @property
    def selected_k(self) -> int:
        return len(self.qtns)


def bh_fdr(pvalues: Sequence[float]) -> np.ndarray:
    """Benjamini-Hochberg step-up adjusted p-values."""
    p = np.asarray(pvalues, dtype=np.float64)
    if p.size == 0:
        return p.copy()
    if not np.all((p > 0) & (p <= 1)):
        raise DegenerateInputError("p-values must lie in (0, 1]")
    return stats.false_discovery_control(p, method="bh")


# ---------------------------------------------------------------------------
# Fixed-effect models
# ---------------------------------------------------------------------------

def _design(n: int, covariates: Optional[np.ndarray]) -> np.ndarray:
    ones = np.ones((n, 1))
    if covariates is None or covariates.size == 0:
        return ones
    return np.hstack([ones, covariates.reshape(n, -1)])


def fem1(y: np.ndarray, S: np.ndarray, covariates: Optional[np.ndarray] = None) -> Tuple[np.ndarray, np.ndarray]:
    """Per-SNP t-test of d_j in y = X b + S_j d_j + e, vectorized over SNPs.

    Covariates are projected out of y and every SNP first, so each test is
    a simple regression on residuals. SNPs that the covariates explain
    completely get p = 1 and effect 0.
    """
    n = len(y)
    X = _design(n, covariates)
    Q, _ = np.linalg.qr(X)
    ry = y - Q @ (Q.T @ y)
    RS = S - Q @ (Q.T @ S)
    ss = np.einsum("ij,ij->j", RS, RS)
    df = n - X.shape[1] - 1
    if df <= 0:
        raise DegenerateInputError("not enough samples for the fixed-effect model")
    ok = ss > 1e-10 * max(1.0, float(ss.max(initial=0.0)))
    d = np.zeros(S.shape[1]); p = np.ones(S.shape[1])
    d[ok] = (RS[:, ok].T @ ry) / ss[ok]
    rss = float(ry @ ry) - d[ok] ** 2 * ss[ok]
    se = np.sqrt(np.clip(rss, 0.0, None) / df / ss[ok])
    with np.errstate(divide="ignore", invalid="ignore"):
        t = np.where(se > 0, d[ok] / se, np.inf)
    p[ok] = np.clip(2.0 * stats.t.sf(np.abs(t), df), np.finfo(float).tiny, 1.0)
    return p, d


def _rss(y: np.ndarray, X: np.ndarray) -> float:
    beta, *_ = np.linalg.lstsq(X, y, rcond=None)
    r = y - X @ beta
    return float(r @ r)


def bic(y: np.ndarray, covariates: Optional[np.ndarray]) -> float:
    n = len(y)
    X = _design(n, covariates)
    rss = max(_rss(y, X), np.finfo(float).tiny)
    return n * np.log(rss / n) + X.shape[1] * np.log(n)


def _ld_filter(S: np.ndarray, ranked: Sequence[int], r2: float, limit: int) -> List[int]:
    kept: List[int] = []
    for j in ranked:
        if kept and (pairwise_r2(S[:, [j]], S[:, kept]) >= r2).any():
            continue
        kept.append(int(j))
        if len(kept) == limit:
            break
    return kept


def _full_rank(S: np.ndarray, qtns: List[int], n: int) -> Tuple[List[int], List[int]]:
    kept, dropped = [], []
    for j in qtns:
        trial = kept + [j]
        if np.linalg.matrix_rank(_design(n, S[:, trial])) == len(trial) + 1:
            kept.append(j)
        else:
            dropped.append(j)
    return kept, dropped


def fem2(y: np.ndarray, S: np.ndarray, candidates: List[int], iteration: int,
         state: BlinkState) -> List[int]:
    """Prefix of the ranked candidates with minimal BIC; ties keep the shorter prefix."""
    n = len(y)
    cands, dropped = _full_rank(S, candidates, n)
    for j in dropped:
        log.warning("[gwas] QTN candidate %d is collinear with earlier covariates; dropped", j)
    state.dropped.extend(dropped)
    best_k, best = 0, np.inf
    for k in range(len(cands) + 1):
        b = bic(y, S[:, cands[:k]] if k else None)
        state.bic_trace.append({"iteration": iteration, "k": k, "bic": float(b)})
        if b < best:
            best_k, best = k, b
    return cands[:best_k]


def _reduced_tests(y: np.ndarray, S: np.ndarray, qtns: List[int], p: np.ndarray, d: np.ndarray) -> None:
    """A covariate QTN is tested with only the other QTNs as covariates."""
    for q in qtns:
        others = [k for k in qtns if k != q]
        pq, dq = fem1(y, S[:, [q]], S[:, others] if others else None)
        p[q], d[q] = pq[0], dq[0]


# ---------------------------------------------------------------------------
# Driver
# ---------------------------------------------------------------------------

def blink_gwas(G: GenotypeMatrix, y: Sequence[float], max_iter: int = MAX_ITER,
               candidate_p: float = CANDIDATE_P, ld_r2: float = LD_R2,
               max_qtn: int = MAX_QTN) -> Tuple[List[GwasHit], BlinkState]:
    if max_iter < 1:
        raise DegenerateInputError("max_iter must be at least 1")
    y = np.asarray(y, dtype=np.float64)
    S = G.codes
    if np.isnan(S).any():
        raise DegenerateInputError("genotype matrix must be filtered and imputed before association")
    if len(y) != G.n_samples:
        raise DegenerateInputError(f"phenotype length {len(y)} does not match {G.n_samples} samples")
    if not np.all(np.isfinite(y)) or np.ptp(y) == 0:
        raise DegenerateInputError("phenotype must be finite and non-constant")

    state = BlinkState()
    qtns: List[int] = []
    for it in range(1, max_iter + 1):
        state.iteration = it
        p, d = fem1(y, S, S[:, qtns] if qtns else None)
        _reduced_tests(y, S, qtns, p, d)
        sig = np.nonzero(p < candidate_p)[0]
        ranked = sig[np.argsort(p[sig], kind="stable")].tolist()
        cands = _ld_filter(S, ranked, ld_r2, max_qtn)
        new = fem2(y, S, cands, it, state)
        log.info("[gwas] iteration %d: %d candidates, %d QTNs", it, len(cands), len(new))
        if sorted(new) == sorted(qtns):
            break
        qtns = new
        if it == max_iter:
            p, d = fem1(y, S, S[:, qtns] if qtns else None)
            _reduced_tests(y, S, qtns, p, d)

    state.qtns = qtns
    if qtns:
        beta, *_ = np.linalg.lstsq(_design(len(y), S[:, qtns]), y, rcond=None)
        state.effects = beta[1:]
    fdr = bh_fdr(p)
    maf = G.maf()
    qset = set(qtns)
    hits = [GwasHit(G.snp_ids[j], int(G.chrom[j]), int(G.pos[j]), float(maf[j]), float(p[j]), float(d[j]),
                    float(fdr[j]), j in qset) for j in range(G.n_snps)]
    n_sig = int((fdr < FDR_LEVEL).sum())
    log.info("[gwas] %d SNPs, %d QTNs, %d significant at FDR %.2f", G.n_snps, len(qtns), n_sig, FDR_LEVEL)
    return hits, state


def hits_frame(hits: Sequence[GwasHit]) -> pd.DataFrame:
    """Association table sorted by p-value (ties by chromosome then position)."""
    df = pd.DataFrame([h.__dict__ for h in hits],
                      columns=["snp_id", "chrom", "pos", "maf", "p_value", "effect", "fdr_p", "qtn"])
    return df.sort_values(["p_value", "chrom", "pos"], kind="mergesort").reset_index(drop=True)


def manhattan_table(hits: Sequence[GwasHit]) -> pd.DataFrame:
    df = pd.DataFrame({"chrom": [h.chrom for h in hits], "pos": [h.pos for h in hits],
                       "neg_log10_p": [-np.log10(h.p_value) for h in hits]})
    return df.sort_values(["chrom", "pos"], kind="mergesort").reset_index(drop=True)


def qq_table(pvalues: Sequence[float]) -> pd.DataFrame:
    """Expected vs observed -log10 p under the uniform null, strongest first."""
    p = np.sort(np.asarray(pvalues, dtype=np.float64))
    m = len(p)
    expected = -np.log10((np.arange(1, m + 1) - 0.5) / m)
    return pd.DataFrame({"expected": expected, "observed": -np.log10(p)})

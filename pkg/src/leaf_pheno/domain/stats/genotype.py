"""Sample x SNP genotype matrices: quality filters, LD pruning and simulation."""
from __future__ import annotations
import logging
from dataclasses import dataclass
from typing import List, Optional, Sequence, Tuple

import numpy as np
from scipy import stats

from leaf_pheno.errors import ConfigError, DegenerateInputError

log = logging.getLogger(__name__)

SAMPLE_MISSING = 0.10      # drop samples missing more than this share of SNPs
SNP_MISSING = 0.15         # drop SNPs missing in more than this share of samples
MAF_MIN = 0.05             # drop SNPs with minor allele frequency below this
HWE_P_MIN = 1e-50          # drop SNPs whose HWE chi-square p falls below this
LD_R2 = 0.7
LD_WINDOW = 100

TRUE_MAF_MIN = 0.1         # allele frequency floor when simulating


@dataclass
class GenotypeMatrix:
    """Minor-allele counts (n samples x m SNPs); nan marks a missing call.

    Imputed matrices hold per-SNP means in place of missing calls, so codes are
    only guaranteed to lie in [0, 2].
    """
    codes: np.ndarray
    sample_ids: Sequence[str]
    snp_ids: Sequence[str]
    chrom: np.ndarray
    pos: np.ndarray

    def __post_init__(self) -> None:
        self.codes = np.asarray(self.codes, dtype=np.float64)
        self.sample_ids = [str(s) for s in self.sample_ids]
        self.snp_ids = [str(s) for s in self.snp_ids]
        self.chrom = np.asarray(self.chrom, dtype=np.int64)
        self.pos = np.asarray(self.pos, dtype=np.int64)
        n, m = self.codes.shape
        if len(self.sample_ids) != n or len(self.snp_ids) != m or len(self.chrom) != m or len(self.pos) != m:
            raise ConfigError(f"genotype metadata does not match a {n} x {m} matrix")
        ok = np.isnan(self.codes) | ((self.codes >= 0) & (self.codes <= 2))
        if not ok.all():
            raise ConfigError("genotype codes must lie in [0, 2] or be missing")
        if (self.pos < 0).any():
            raise ConfigError("SNP positions must be nonnegative")
        same = self.chrom[1:] == self.chrom[:-1]
        if (same & (self.pos[1:] < self.pos[:-1])).any():
            raise ConfigError("SNP positions must be sorted within each chromosome")

    @property
    def n_samples(self) -> int:
        return int(self.codes.shape[0])

    @property
    def n_snps(self) -> int:
        return int(self.codes.shape[1])

    def subset(self, samples: Optional[np.ndarray] = None, snps: Optional[np.ndarray] = None) -> "GenotypeMatrix":
        s = np.arange(self.n_samples) if samples is None else np.asarray(samples)
        j = np.arange(self.n_snps) if snps is None else np.asarray(snps)
        if s.dtype == bool:
            s = np.nonzero(s)[0]
        if j.dtype == bool:
            j = np.nonzero(j)[0]
        return GenotypeMatrix(self.codes[np.ix_(s, j)], [self.sample_ids[i] for i in s],
                              [self.snp_ids[i] for i in j], self.chrom[j], self.pos[j])

    def select_snps(self, snp_ids: Sequence[str]) -> "GenotypeMatrix":
        keep = set(snp_ids)
        return self.subset(snps=np.array([s in keep for s in self.snp_ids], dtype=bool))

    def maf(self) -> np.ndarray:
        """Minor allele frequency over the non-missing calls of every SNP."""
        obs = ~np.isnan(self.codes)
        count = np.where(obs, self.codes, 0.0).sum(axis=0)
        alleles = 2.0 * obs.sum(axis=0)
        with np.errstate(invalid="ignore", divide="ignore"):
            return np.where(alleles > 0, np.minimum(count, alleles - count) / alleles, 0.0)


def hwe_pvalues(codes: np.ndarray) -> np.ndarray:
    """One-degree-of-freedom chi-square Hardy-Weinberg test per SNP over exact 0/1/2 calls."""
    n0 = (codes == 0).sum(axis=0).astype(np.float64)
    n1 = (codes == 1).sum(axis=0).astype(np.float64)
    n2 = (codes == 2).sum(axis=0).astype(np.float64)
    n = n0 + n1 + n2
    p = np.ones(codes.shape[1])
    with np.errstate(invalid="ignore", divide="ignore"):
        f = (n1 + 2 * n2) / (2 * n)
        ok = (n > 0) & (f > 0) & (f < 1)
        e0, e1, e2 = (1 - f) ** 2 * n, 2 * f * (1 - f) * n, f ** 2 * n
        chi = (n0 - e0) ** 2 / e0 + (n1 - e1) ** 2 / e1 + (n2 - e2) ** 2 / e2
    p[ok] = stats.chi2.sf(chi[ok], 1)
    return p


def impute_mean(G: GenotypeMatrix) -> GenotypeMatrix:
    codes = G.codes.copy()
    miss = np.isnan(codes)
    if miss.any():
        means = np.nanmean(np.where(miss.all(axis=0), 0.0, codes), axis=0)
        codes[miss] = np.broadcast_to(means, codes.shape)[miss]
    return GenotypeMatrix(codes, G.sample_ids, G.snp_ids, G.chrom, G.pos)


def snp_filters(G: GenotypeMatrix, sample_missing: float = SAMPLE_MISSING, snp_missing: float = SNP_MISSING,
                maf_min: float = MAF_MIN, hwe_p_min: Optional[float] = HWE_P_MIN) -> GenotypeMatrix:
    """Sample and SNP quality filters followed by per-SNP mean imputation.

    `hwe_p_min=None` disables the Hardy-Weinberg filter.
    """
    miss = np.isnan(G.codes)
    keep_s = miss.mean(axis=1) <= sample_missing
    if not keep_s.any():
        raise DegenerateInputError("every sample exceeds the missing-call limit")
    G1 = G.subset(samples=keep_s)
    keep_j = (np.isnan(G1.codes).mean(axis=0) <= snp_missing) & ~(G1.maf() < maf_min)
    if hwe_p_min is not None:
        keep_j &= ~(hwe_pvalues(G1.codes) < hwe_p_min)
    if not keep_j.any():
        raise DegenerateInputError("every SNP was removed by the quality filters")
    log.info("[geno] kept %d/%d samples and %d/%d SNPs", int(keep_s.sum()), G.n_samples,
             int(keep_j.sum()), G.n_snps)
    return impute_mean(G1.subset(snps=keep_j))


def pairwise_r2(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Squared Pearson correlation between the columns of `a` (n x p) and `b` (n x q); 0 for monomorphic columns."""
    a = a - a.mean(axis=0); b = b - b.mean(axis=0)
    na = np.sqrt((a ** 2).sum(axis=0)); nb = np.sqrt((b ** 2).sum(axis=0))
    with np.errstate(invalid="ignore", divide="ignore"):
        r = (a.T @ b) / np.outer(na, nb)
    return np.nan_to_num(r ** 2, nan=0.0)


def ld_prune(G: GenotypeMatrix, r2_threshold: float = LD_R2, window_snps: int = LD_WINDOW) -> List[str]:
    """Greedy scan in (chromosome, position) order.

    A SNP is dropped when its r2 with any kept SNP among the previous
    `window_snps` SNPs of the same chromosome reaches the threshold.
    """
    order = np.lexsort((G.pos, G.chrom))
    X = G.codes
    if np.isnan(X).any():
        X = impute_mean(G).codes
    kept: List[int] = []
    for idx, j in enumerate(order):
        lo = max(0, idx - window_snps)
        prior = set(order[lo:idx].tolist())
        near = [k for k in kept[-window_snps:] if k in prior and G.chrom[k] == G.chrom[j]]
        if near and (pairwise_r2(X[:, [j]], X[:, near]) >= r2_threshold).any():
            continue
        kept.append(int(j))
    log.info("[geno] LD pruning kept %d/%d SNPs", len(kept), G.n_snps)
    return [G.snp_ids[k] for k in sorted(kept)]


# ---------------------------------------------------------------------------
# Simulation
# ---------------------------------------------------------------------------

def simulate_genotypes(n: int, m: int, rng: np.random.Generator, n_chrom: int = 5,
                       min_true_maf: float = TRUE_MAF_MIN) -> GenotypeMatrix:
    """Unlinked biallelic SNPs under Hardy-Weinberg proportions.

    Allele frequencies are drawn uniformly above `min_true_maf`; SNPs that
    come out monomorphic are redrawn.
    """
    f = min_true_maf + (1 - 2 * min_true_maf) * rng.uniform(size=m)
    codes = np.zeros((n, m))
    todo = np.ones(m, dtype=bool)
    while todo.any():
        u = rng.uniform(size=(n, int(todo.sum())))
        g = np.ones_like(u)
        g[u < ((1 - f[todo]) ** 2)[None, :]] = 0
        g[u > (1 - f[todo] ** 2)[None, :]] = 2
        codes[:, todo] = g
        todo = codes.std(axis=0) == 0
    chrom = np.sort(rng.integers(1, n_chrom + 1, size=m))
    pos = np.zeros(m, dtype=np.int64)
    for c in np.unique(chrom):
        sel = chrom == c
        pos[sel] = np.cumsum(rng.integers(1_000, 20_000, size=int(sel.sum())))
    return GenotypeMatrix(codes, [f"S{i:04d}" for i in range(n)], [f"snp{j:05d}" for j in range(m)], chrom, pos)


def simulate_phenotype(G: GenotypeMatrix, qtns: Sequence[int], variance_fraction: float,
                       rng: np.random.Generator) -> Tuple[np.ndarray, np.ndarray]:
    """Phenotype whose planted QTNs jointly explain `variance_fraction` of the variance.

    Returns (y, effects) with effects per QTN on the allele-count scale.
    """
    if not 0 <= variance_fraction < 1:
        raise DegenerateInputError("variance fraction must lie in [0, 1)")
    noise = rng.normal(size=G.n_samples)
    noise = (noise - noise.mean()) / noise.std()
    if len(qtns) == 0 or variance_fraction == 0:
        return noise, np.zeros(len(qtns))
    S = G.codes[:, list(qtns)]
    raw = rng.normal(size=len(qtns))
    g = S @ raw
    scale = np.sqrt(variance_fraction) / g.std()
    g = (g - g.mean()) * scale
    y = g + np.sqrt(1 - variance_fraction) * noise
    return y, raw * scale

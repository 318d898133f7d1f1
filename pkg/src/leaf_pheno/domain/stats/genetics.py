"""Phenotype preprocessing for association testing.

Outlier removal by median absolute deviation, thin-plate-spline correction
for field position, then genotype BLUPs and broad-sense heritability from a
one-way random-effects model.
"""
from __future__ import annotations
import logging
from dataclasses import dataclass
from typing import Optional, Sequence, Union

import numpy as np
import pandas as pd
from scipy import stats
from scipy.interpolate import RBFInterpolator
from scipy.spatial.distance import cdist

from leaf_pheno.errors import DegenerateInputError

log = logging.getLogger(__name__)

MAD_CUTOFF = 6.0
MIN_TPS_SAMPLES = 10
LAMBDA_GRID = tuple(float(v) for v in np.logspace(-4, 6, 41))


# ---------------------------------------------------------------------------
# Outliers
# ---------------------------------------------------------------------------

@dataclass
class MadResult:
    kept: np.ndarray        # bool per value
    scores: np.ndarray      # |x - median| / (1.4826 MAD); nan for non-finite input
    mad_zero: bool


def mad_filter(values: Sequence[float], cutoff: float = MAD_CUTOFF) -> MadResult:
    x = np.asarray(values, dtype=np.float64)
    finite = np.isfinite(x)
    if finite.sum() < 3:
        raise DegenerateInputError("mad_filter needs at least 3 finite values")
    med = float(np.median(x[finite]))
    mad = float(stats.median_abs_deviation(x[finite], scale="normal"))
    scores = np.full(x.shape, np.nan)
    if mad == 0:
        log.warning("[pheno] MAD is zero; no values removed")
        scores[finite] = 0.0
        return MadResult(finite.copy(), scores, True)
    scores[finite] = np.abs(x[finite] - med) / mad
    kept = finite & (scores <= cutoff)
    return MadResult(kept, scores, False)


# ---------------------------------------------------------------------------
# Spatial correction
# ---------------------------------------------------------------------------

@dataclass
class TpsResult:
    corrected: np.ndarray
    fitted: np.ndarray
    lam: float
    gcv: Optional[pd.DataFrame] = None


def _tps_kernel(coords: np.ndarray) -> np.ndarray:
    r = cdist(coords, coords)
    with np.errstate(divide="ignore", invalid="ignore"):
        return np.where(r > 0, r ** 2 * np.log(r), 0.0)


def gcv_scores(values: np.ndarray, coords: np.ndarray, grid: Sequence[float] = LAMBDA_GRID) -> pd.DataFrame:
    """Generalized cross-validation score of the smoothing spline for every lambda on the grid.

    The affine part is projected out with a QR basis of its null space, so the
    residual and the trace of (I - hat) come from one eigendecomposition.
    """
    n = len(values)
    P = np.column_stack([np.ones(n), coords])
    Q, _ = np.linalg.qr(P, mode="complete")
    Q2 = Q[:, P.shape[1]:]
    e, U = np.linalg.eigh(Q2.T @ _tps_kernel(coords) @ Q2)
    e = np.clip(e, 0.0, None)
    z = U.T @ (Q2.T @ values)
    rows = []
    for lam in grid:
        shrink = lam / (e + lam)
        rss = float(np.sum((shrink * z) ** 2))
        tr = float(shrink.sum())
        rows.append({"lambda": float(lam), "gcv": n * rss / tr ** 2, "rss": rss, "dof": n - tr})
    return pd.DataFrame(rows)


def tps_correct(values: Sequence[float], coords: np.ndarray, lam: Union[str, float] = "auto",
                grid: Sequence[float] = LAMBDA_GRID) -> TpsResult:
    """Residuals of a thin-plate-spline field fit, shifted back to the grand mean."""
    y = np.asarray(values, dtype=np.float64)
    X = np.asarray(coords, dtype=np.float64).reshape(-1, 2)
    if len(y) != len(X):
        raise DegenerateInputError("values and coordinates differ in length")
    if len(y) < MIN_TPS_SAMPLES:
        raise DegenerateInputError(f"tps_correct needs at least {MIN_TPS_SAMPLES} samples")
    if np.linalg.matrix_rank(np.column_stack([np.ones(len(X)), X - X.mean(axis=0)])) < 3:
        raise DegenerateInputError("field coordinates are collinear")
    table = None
    if lam == "auto":
        table = gcv_scores(y, X, grid)
        lam = float(table.loc[table["gcv"].idxmin(), "lambda"])
    lam = float(lam)
    if lam < 0:
        raise DegenerateInputError("smoothing must be nonnegative")
    try:
        fit = RBFInterpolator(X, y, kernel="thin_plate_spline", smoothing=lam, degree=1)
    except (ValueError, np.linalg.LinAlgError) as e:
        raise DegenerateInputError(f"thin-plate spline fit failed: {e}") from e
    fitted = fit(X)
    corrected = y - fitted + y.mean()
    log.debug("[pheno] TPS lambda %.3g", lam)
    return TpsResult(corrected, fitted, lam, table)


# ---------------------------------------------------------------------------
# Random-effects model
# ---------------------------------------------------------------------------

@dataclass
class VarianceComponents:
    sigma2_g: float
    sigma2_e: float
    clamped: bool = False

    @property
    def h2(self) -> float:
        total = self.sigma2_g + self.sigma2_e
        return self.sigma2_g / total if total > 0 else 0.0


@dataclass
class BlupResult:
    blups: pd.Series                # indexed by genotype id
    components: VarianceComponents
    h2: float
    grand_mean: float


def blup_and_h2(values: Sequence[float], genotype_ids: Sequence[str]) -> BlupResult:
    """ANOVA variance components for y = mu + g + e and shrunken genotype effects."""
    y = np.asarray(values, dtype=np.float64)
    if len(y) != len(genotype_ids):
        raise DegenerateInputError("values and genotype ids differ in length")
    df = pd.DataFrame({"y": y, "g": list(genotype_ids)})
    grouped = df.groupby("g", sort=True)["y"]
    n_i = grouped.size()
    a, N = len(n_i), len(df)
    if a < 2:
        raise DegenerateInputError("blup_and_h2 needs at least two genotypes")
    if N - a == 0:
        raise DegenerateInputError("no replicated genotype; heritability is unidentifiable")
    mean_i = grouped.mean()
    grand = float(df["y"].mean())
    msb = float((n_i * (mean_i - grand) ** 2).sum()) / (a - 1)
    msw = float(((df["y"] - df["g"].map(mean_i)) ** 2).sum()) / (N - a)
    n0 = (N - float((n_i ** 2).sum()) / N) / (a - 1)
    raw_g = (msb - msw) / n0
    comps = VarianceComponents(max(raw_g, 0.0), max(msw, 0.0), clamped=raw_g < 0)
    if comps.clamped:
        log.warning("[pheno] negative genotypic variance estimate clamped to zero")
    if comps.sigma2_e == 0:
        shrink = pd.Series(1.0 if comps.sigma2_g > 0 else 0.0, index=n_i.index)
    else:
        shrink = comps.sigma2_g / (comps.sigma2_g + comps.sigma2_e / n_i)
    blups = (shrink * (mean_i - grand)).rename("blup")
    return BlupResult(blups, comps, comps.h2, grand)


def simulate_clonal_trait(n_genotypes: int, n_clones: int, sigma2_g: float, sigma2_e: float,
                          rng: np.random.Generator, mu: float = 0.0) -> pd.DataFrame:
    """Genotype x clone replicated trait with known variance components."""
    g = rng.normal(0.0, np.sqrt(sigma2_g), n_genotypes)
    ids = np.repeat([f"G{i:04d}" for i in range(n_genotypes)], n_clones)
    y = mu + np.repeat(g, n_clones) + rng.normal(0.0, np.sqrt(sigma2_e), n_genotypes * n_clones)
    return pd.DataFrame({"genotype_id": ids, "value": y})


# ---------------------------------------------------------------------------
# Chain
# ---------------------------------------------------------------------------

@dataclass
class PreparedPhenotype:
    table: pd.DataFrame             # per sample: kept, mad_score, corrected
    blup: BlupResult
    tps: Optional[TpsResult]


def prepare_phenotype(table: pd.DataFrame, cutoff: float = MAD_CUTOFF,
                      lam: Union[str, float] = "auto", spatial: bool = True) -> PreparedPhenotype:
    """MAD filter, TPS correction and BLUPs over a table with
    sample_id, genotype_id, row, position and value columns."""
    df = table.copy()
    mad = mad_filter(df["value"].to_numpy(), cutoff)
    df["mad_score"] = mad.scores
    df["kept"] = mad.kept
    kept = df[df["kept"]]
    log.info("[pheno] MAD filter kept %d of %d samples", len(kept), len(df))
    tps = None
    df["corrected"] = np.nan
    if spatial:
        tps = tps_correct(kept["value"].to_numpy(), kept[["row", "position"]].to_numpy(), lam)
        df.loc[kept.index, "corrected"] = tps.corrected
    else:
        df.loc[kept.index, "corrected"] = kept["value"].to_numpy()
    ok = df[df["kept"]]
    blup = blup_and_h2(ok["corrected"].to_numpy(), ok["genotype_id"].astype(str).tolist())
    log.info("[pheno] H2 = %.3f over %d genotypes", blup.h2, len(blup.blups))
    return PreparedPhenotype(df, blup, tps)

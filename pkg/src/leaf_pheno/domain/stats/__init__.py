"""Evaluation metrics and the quantitative-genetics pipeline."""
from .genetics import (BlupResult, MadResult, PreparedPhenotype, TpsResult, VarianceComponents, blup_and_h2,
                       mad_filter, prepare_phenotype, simulate_clonal_trait, tps_correct)
from .genotype import (GenotypeMatrix, hwe_pvalues, impute_mean, ld_prune, pairwise_r2, simulate_genotypes,
                       simulate_phenotype, snp_filters)
from .gwas import BlinkState, GwasHit, bh_fdr, blink_gwas, fem1, hits_frame, manhattan_table, qq_table
from .metrics import TukeyResult, hausdorff, jaccard, object_counts, r_squared, recall, tukey_hsd

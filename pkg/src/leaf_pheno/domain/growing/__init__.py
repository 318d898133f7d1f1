"""Seeded vein region growing."""
from .grower import (CnnGrower, GrowConfig, OracleGrower, ProbAccumulator, VeinSegmentation, grow,
                     make_grower_training_set, neighbourhood_labels, sample_seeds, segment_veins,
                     select_threshold, threshold_sweep)

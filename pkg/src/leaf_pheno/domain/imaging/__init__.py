"""Images, tiles, augmentation, thresholding and the synthetic leaf generator."""
from .augment import AugmentConfig, augment_tile, batch_augmenter, rotate_offsets
from .image import DEFAULT_DPI, DisplacementSet, ImageRGB, Tile, auto_threshold, extract_tile
from .synthetic import (PetioleRecord, SyntheticLeaf, SyntheticLeafParams, generate_synthetic_leaf,
                        leaf_seeds, write_fixtures)

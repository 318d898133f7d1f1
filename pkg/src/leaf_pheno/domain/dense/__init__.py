"""Tiled encoder-decoder baseline."""
from .baseline import (CnnDense, DenseResult, DenseSegmentation, OracleDense, make_dense_training_set,
                       predict_tiled, segment_dense, tile_starts)

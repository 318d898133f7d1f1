"""Iterative leaf-boundary tracing."""
from leaf_pheno.domain.imaging.image import DisplacementSet
from .tracer import (CnnTracer, OracleTracer, TraceConfig, TraceResult, TraceState, forward_offsets,
                     init_trace, make_tracer_training_set, stack_samples, trace_leaf)

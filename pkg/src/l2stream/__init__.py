"""Turnstile l2 samplers over ``y = A x`` and ``y = (A1 kron A2) x`` built from linear sketches."""

from .matvec import MatVecModel, MatVecSampler
from .rng_hash import HashFamily, SignFamily, hash_bucket, prf_word, sign, uniform_scale
from .sampler import (
    FAIL,
    AllRepetitionsFailed,
    L2Sampler,
    SampleOutcome,
    SamplerConfig,
    rep_query,
)
from .sketches import AmsSketch, CountSketch, tail_norm_estimate
from .tensor import TensorSampler, kron_flat, kron_unflat

__all__ = [
    "AllRepetitionsFailed", "AmsSketch", "CountSketch", "FAIL", "HashFamily", "L2Sampler",
    "MatVecModel", "MatVecSampler", "SampleOutcome", "SamplerConfig", "SignFamily",
    "TensorSampler", "hash_bucket", "kron_flat", "kron_unflat", "prf_word", "rep_query",
    "sign", "tail_norm_estimate", "uniform_scale",
]

"""Exact n-gram memory branch for decoder language models (C++ core)."""

from ._lngram import (
    ConfigError,
    Decoder,
    DecoderConfig,
    Error,
    FusionMode,
    LngramConfig,
    LoadError,
    compute_address,
    depthwise_causal_conv,
    exact_surrogate_grad,
    expected_retrieval,
    gen_corpus,
    gradcheck,
    holm_bonferroni,
    kl_divergence,
    linear_cka,
    local_symbol_probs,
    onebit_surrogate_grad,
    paired_bootstrap,
    rmsnorm,
    soft_alignment,
    softmax_temp,
)

__all__ = [name for name in dir() if not name.startswith("_")]

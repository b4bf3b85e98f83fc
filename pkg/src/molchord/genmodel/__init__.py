"""Conditional autoregressive SMILES generator at desk scale."""

from .features import (
    DEFAULT_STRUCT_TOKENS,
    PocketFeatures,
    complex_feature_vector,
    featurize_pocket,
    ligand_feature_vector,
)
from .interleave import (
    DEFAULT_TEMPLATES,
    PIPELINE_TEMPLATE,
    InterleavedSequence,
    PromptTemplate,
    UnknownTemplate,
    build_interleaved,
)
from .network import (
    AdapterCache,
    Epsilon,
    SequenceCache,
    ShapeMismatch,
    adapter_backward,
    adapter_forward,
    lm_logits,
    sequence_backward,
    sequence_forward,
    vae_forward,
)
from .params import (
    ADAPTER_FIELDS,
    DPO_TRAINABLE,
    LM_FIELDS,
    SFT_TRAINABLE,
    VAE_FIELDS,
    ModelConfig,
    ModelParams,
    init_params,
    load_params,
    save_params,
)
from .sampling import (
    SampleResult,
    nucleus_distribution,
    sample,
    sample_many,
    sample_seed,
)
from .vocab import BOS, EOS, PAD, TokenOutOfVocab, Vocabulary, make_vocabulary, smiles_vocabulary

__all__ = [
    "ADAPTER_FIELDS",
    "AdapterCache",
    "BOS",
    "DEFAULT_STRUCT_TOKENS",
    "DEFAULT_TEMPLATES",
    "DPO_TRAINABLE",
    "EOS",
    "Epsilon",
    "InterleavedSequence",
    "LM_FIELDS",
    "ModelConfig",
    "ModelParams",
    "PAD",
    "PIPELINE_TEMPLATE",
    "PocketFeatures",
    "PromptTemplate",
    "SFT_TRAINABLE",
    "SampleResult",
    "SequenceCache",
    "ShapeMismatch",
    "TokenOutOfVocab",
    "UnknownTemplate",
    "VAE_FIELDS",
    "Vocabulary",
    "adapter_backward",
    "adapter_forward",
    "build_interleaved",
    "complex_feature_vector",
    "featurize_pocket",
    "init_params",
    "ligand_feature_vector",
    "lm_logits",
    "load_params",
    "make_vocabulary",
    "nucleus_distribution",
    "sample",
    "sample_many",
    "sample_seed",
    "save_params",
    "sequence_backward",
    "sequence_forward",
    "smiles_vocabulary",
    "vae_forward",
]

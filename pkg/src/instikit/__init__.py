"""Executable institutions for state machines, protocols and their environments."""
from .env import (
    EnvMorphism,
    EnvSentence,
    EnvSignature,
    EnvStructure,
    IllFormedSentence,
    reduct_env,
    satisfies_env,
    translate_env_sentence,
)
from .flat import (
    FlatMorphism,
    FlatSignature,
    FlatStructure,
    combine_signatures,
    flat_reduct,
    interleave_product,
    project_env,
)
from .psm import PsmSentence, monitor_trace, psm_canonical_monitor, psm_satisfies
from .sm import (
    Configuration,
    Pool,
    SmMorphism,
    SmSentence,
    SmSignature,
    SmStructure,
    canonical_structure,
    reachable,
    reduct_sm,
    satisfies_sm,
    step,
    translate_sm_sentence,
)

__version__ = "0.1.0"

__all__ = [
    "Configuration",
    "EnvMorphism",
    "EnvSentence",
    "EnvSignature",
    "EnvStructure",
    "FlatMorphism",
    "FlatSignature",
    "FlatStructure",
    "IllFormedSentence",
    "Pool",
    "PsmSentence",
    "SmMorphism",
    "SmSentence",
    "SmSignature",
    "SmStructure",
    "canonical_structure",
    "combine_signatures",
    "flat_reduct",
    "interleave_product",
    "monitor_trace",
    "project_env",
    "psm_canonical_monitor",
    "psm_satisfies",
    "reachable",
    "reduct_env",
    "reduct_sm",
    "satisfies_env",
    "satisfies_sm",
    "step",
    "translate_env_sentence",
    "translate_sm_sentence",
]

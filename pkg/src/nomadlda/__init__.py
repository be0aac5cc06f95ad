"""F+tree collapsed Gibbs sampling for LDA with a nomadic token-passing
parallel trainer."""

from .corpus import Corpus, SyntheticSpec, generate_synthetic, parse_uci_bow
from .model import (
    CountModel,
    HyperParams,
    conditional_weights,
    decompose,
    init_assignments,
    joint_log_likelihood,
    two_level_sample,
)
from .samplers import AliasTable, Cdf, FTree, cumsum_build, lsearch_sample
from .serial import TrainerConfig, train

__version__ = "0.1.0"

__all__ = [
    "AliasTable", "Cdf", "Corpus", "CountModel", "FTree", "HyperParams", "SyntheticSpec",
    "TrainerConfig", "conditional_weights", "cumsum_build", "decompose", "generate_synthetic",
    "init_assignments", "joint_log_likelihood", "lsearch_sample", "parse_uci_bow", "train",
    "two_level_sample",
]

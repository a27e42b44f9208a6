"""Bayesian induction of stochastic string-generating programs from positive examples."""

__version__ = "0.1.0"

from .expr import FactorizedProgram, canonical_form, evaluate, parse_program  # noqa: E402
from .distribution import StringDistribution, enumerate_distribution, estimate_distribution  # noqa: E402
from .grammar import ExpressionGrammar, default_grammar, extend_with_atoms  # noqa: E402
from .scoring import Dataset, ScoredHypothesis, ScoreParams, log_likelihood, score  # noqa: E402
from .inference import ChainConfig, HypothesisStore, run_chain, run_inference  # noqa: E402

__all__ = [
    "ChainConfig", "Dataset", "ExpressionGrammar", "FactorizedProgram", "HypothesisStore",
    "ScoreParams", "ScoredHypothesis", "StringDistribution", "canonical_form", "default_grammar",
    "enumerate_distribution", "estimate_distribution", "evaluate", "extend_with_atoms",
    "log_likelihood", "parse_program", "run_chain", "run_inference", "score",
]

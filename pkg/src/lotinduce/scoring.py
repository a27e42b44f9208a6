"""Likelihood of positive-only string data and posterior scores."""
from __future__ import annotations

import math
from collections import Counter
from dataclasses import dataclass, field

from .distribution import StringDistribution, estimate_distribution
from .expr import DEFAULT_BUDGET, DEFAULT_MAX_LEN, FactorizedProgram, read_str, show
from .grammar import ExpressionGrammar, GrammarError


class Dataset:
    """Ordered multiset of token tuples (positive examples only)."""

    __slots__ = ("items", "counts")

    def __init__(self, items=()):
        self.items = tuple(tuple(s) for s in items)
        self.counts = Counter(self.items)

    @property
    def size(self) -> int:
        return len(self.items)

    def __len__(self) -> int:
        return len(self.items)

    def __iter__(self):
        return iter(self.items)

    def __eq__(self, other) -> bool:
        return isinstance(other, Dataset) and self.items == other.items

    def __add__(self, other: "Dataset") -> "Dataset":
        return Dataset(self.items + other.items)

    def prefix(self, n: int) -> "Dataset":
        return Dataset(self.items[:n])

    def __repr__(self) -> str:
        return f"Dataset({[show(s) for s in self.items]})"

    @classmethod
    def from_strings(cls, strings) -> "Dataset":
        return cls(read_str(s) if isinstance(s, str) else tuple(s) for s in strings)


@dataclass(frozen=True)
class ScoreParams:
    n_sim: int = 1024
    eval_n_sim: int = 2048
    outlier_log_penalty: float = -1000.0
    bottom_reject_threshold: float = 0.5
    budget: int = DEFAULT_BUDGET
    max_len: int = DEFAULT_MAX_LEN

    def __post_init__(self):
        if self.n_sim < 1 or self.eval_n_sim < 1:
            raise ValueError("sample counts must be >= 1")
        if not self.outlier_log_penalty < 0:
            raise ValueError("outlier_log_penalty must be negative")


@dataclass
class ScoredHypothesis:
    program: FactorizedProgram
    log_prior: float
    log_lik: float
    dist: StringDistribution | None = field(default=None, repr=False, compare=False)
    canonical: str = field(default="", compare=False)

    def __post_init__(self):
        if not self.canonical:
            self.canonical = self.program.canonical()

    @property
    def log_post(self) -> float:
        return self.log_prior + self.log_lik

    @property
    def rejected(self) -> bool:
        return self.log_prior == -math.inf


def log_likelihood(dist: StringDistribution, data: Dataset, penalty: float = -1000.0,
                   probs: dict | None = None) -> float:
    """Multinomial log likelihood; each zero-probability occurrence adds ``penalty``.

    ``probs`` overrides ``dist.probs`` (used for the halting-renormalized law).
    """
    probs = dist.probs if probs is None else probs
    counts = data.counts if isinstance(data, Dataset) else Counter(tuple(s) for s in data)
    total = 0.0
    for s, c in counts.items():
        p = probs.get(s, 0.0)
        total += c * (math.log(p) if p > 0 else penalty)
    return total


def halting_distribution(prog: FactorizedProgram, params: ScoreParams, seed: int) -> StringDistribution:
    # stopping early is safe: past the threshold the program is rejected anyway
    return estimate_distribution(prog, params.n_sim, seed, params.budget, params.max_len,
                                 stop_bottom=params.bottom_reject_threshold)


def score(prog: FactorizedProgram, data: Dataset, grammar: ExpressionGrammar,
          params: ScoreParams = ScoreParams(), seed: int = 0,
          dist: StringDistribution | None = None) -> ScoredHypothesis:
    """Posterior score with a plug-in Monte Carlo likelihood.

    Programs whose sampled bottom mass exceeds the rejection threshold, or
    that violate the grammar, get a zero prior.
    """
    canon = prog.canonical()
    try:
        log_prior = grammar.log_prior_program(prog)
    except GrammarError:
        return ScoredHypothesis(prog, -math.inf, 0.0, None, canon)
    if dist is None:
        dist = halting_distribution(prog, params, seed)
    if dist.bottom_mass > params.bottom_reject_threshold or not dist.probs:
        return ScoredHypothesis(prog, -math.inf, 0.0, dist, canon)
    ll = log_likelihood(dist, data, params.outlier_log_penalty, dist.renormalized())
    return ScoredHypothesis(prog, log_prior, ll, dist, canon)

"""Precision, recall and F-scores of hypotheses against target languages."""
from __future__ import annotations

import math
from dataclasses import dataclass

from .distribution import StringDistribution, estimate_distribution
from .inference import HypothesisStore
from .languages import GOMEZ_FRAMES, TargetLanguage, get_language
from .scoring import ScoredHypothesis, ScoreParams

DEFAULT_RECALL_M = 25
INFINITE_THRESHOLD = 3


@dataclass(frozen=True)
class Scores:
    precision: float
    recall: float
    f: float


def _lang(lang) -> TargetLanguage:
    return get_language(lang) if isinstance(lang, str) else lang


def precision(dist: StringDistribution, lang) -> float:
    """Halting-renormalized mass on in-language strings (0 if nothing halts)."""
    lang = _lang(lang)
    probs = dist.renormalized()
    return math.fsum(p for s, p in probs.items() if lang.contains(s))


def recall(dist: StringDistribution, lang, m: int = DEFAULT_RECALL_M) -> float:
    """Target mass of the top-``m`` target strings that ``dist`` can produce."""
    top = _lang(lang).top_support(m)
    z = math.fsum(p for _, p in top)
    if z <= 0:
        return 0.0
    return math.fsum(p for s, p in top if dist.probs.get(s, 0.0) > 0) / z


def f_score(p: float, r: float) -> float:
    return 2 * p * r / (p + r) if p + r > 0 else 0.0


def scores(dist: StringDistribution, lang, m: int = DEFAULT_RECALL_M) -> Scores:
    p = precision(dist, lang)
    r = recall(dist, lang, m)
    return Scores(p, r, f_score(p, r))


class EvalCache:
    """Evaluation distributions (``eval_n_sim`` runs each) keyed by canonical form."""

    def __init__(self, params: ScoreParams = ScoreParams(), seed: int = 0):
        self.params = params
        self.seed = seed
        self._dists: dict = {}

    def dist(self, h: ScoredHypothesis) -> StringDistribution:
        d = self._dists.get(h.canonical)
        if d is None:
            p = self.params
            d = estimate_distribution(h.program, p.eval_n_sim, self.seed, p.budget, p.max_len)
            self._dists[h.canonical] = d
        return d


@dataclass(frozen=True)
class StoreScores:
    weighted_precision: float
    weighted_recall: float
    weighted_f: float
    map_f: float
    best_f: float


def score_store(store: HypothesisStore, lang, m: int = DEFAULT_RECALL_M,
                cache: EvalCache | None = None, min_weight: float = 0.0) -> StoreScores:
    """Posterior-weighted scores plus the MAP and best-found F.

    Entries with weight at or below ``min_weight`` are skipped for the
    weighted sums (their contribution is bounded by their weight) but still
    count towards the best-found F.
    """
    lang = _lang(lang)
    cache = cache or EvalCache()
    wp = wr = wf = 0.0
    best = 0.0
    map_f_value = 0.0
    for i, (w, h) in enumerate(store):
        if h.rejected:
            continue
        sc = scores(cache.dist(h), lang, m)
        if i == 0:
            map_f_value = sc.f
        best = max(best, sc.f)
        if w > min_weight:
            wp += w * sc.precision
            wr += w * sc.recall
            wf += w * sc.f
    return StoreScores(wp, wr, wf, map_f_value, best)


def weighted_f(store: HypothesisStore, lang, m: int = DEFAULT_RECALL_M,
               cache: EvalCache | None = None) -> float:
    cache = cache or EvalCache()
    return math.fsum(w * scores(cache.dist(h), lang, m).f
                     for w, h in store if w > 0 and not h.rejected)


def map_f(store: HypothesisStore, lang, m: int = DEFAULT_RECALL_M,
          cache: EvalCache | None = None) -> float:
    """F of the top entry; the store orders ties by canonical form."""
    cache = cache or EvalCache()
    h = store.map
    return 0.0 if h.rejected else scores(cache.dist(h), lang, m).f


def infinite_leaning(dist: StringDistribution, max_finite_len: int = INFINITE_THRESHOLD) -> bool:
    return any(len(s) > max_finite_len for s in dist.probs)


def dependency_consistent(dist: StringDistribution, frames=GOMEZ_FRAMES) -> bool:
    """Every generated string has length 5 and a trained (first, last) pairing."""
    if not dist.probs:
        return False
    allowed = set(map(tuple, frames))
    return all(len(s) == 5 and (s[0], s[-1]) in allowed for s in dist.probs)


def posterior_mass_where(store: HypothesisStore, predicate) -> float:
    return math.fsum(w for w, h in store if predicate(h))

"""Tree-regeneration Metropolis-Hastings over factorized programs."""
from __future__ import annotations

import math
import random
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, replace

from .expr import LIST, MAX_FACTORS, FactorizedProgram, nth_node, parse_program, replace_at, sort_of
from .grammar import ExpressionGrammar, sample_program
from .kernels import program_seed
from .scoring import Dataset, ScoredHypothesis, ScoreParams, log_likelihood, score


@dataclass(frozen=True)
class ChainConfig:
    steps: int = 50000
    chains: int = 12
    top_n: int = 100
    factor_move_prob: float = 0.2
    max_factors: int = MAX_FACTORS
    temperature: float = 1.0
    seed: int = 0

    def __post_init__(self):
        if self.steps < 0:
            raise ValueError("steps must be >= 0")
        if self.chains < 1 or self.top_n < 1:
            raise ValueError("chains and top_n must be >= 1")
        if not 0 <= self.factor_move_prob < 1:
            raise ValueError("factor_move_prob must be in [0, 1)")
        if not 1 <= self.max_factors <= MAX_FACTORS:
            raise ValueError(f"max_factors must be in 1..{MAX_FACTORS}")
        if self.temperature <= 0:
            raise ValueError("temperature must be positive")


@dataclass
class ChainState:
    current: ScoredHypothesis
    step_index: int = 0
    accepted: int = 0


def chain_rng(seed: int, chain_index: int) -> random.Random:
    return random.Random(program_seed(seed, f"chain:{chain_index}"))


# ---------------------------------------------------------------------------
# proposals


def propose_regen(prog: FactorizedProgram, grammar: ExpressionGrammar, rng):
    """Resample a uniformly chosen subtree of a uniformly chosen factor.

    Returns ``(proposal, log_q_forward, log_q_backward)``. Both directions
    use the sampler's actual law at the node's depth.
    """
    K = prog.K
    j = 1 + int(rng.random() * K)
    body = prog.factors[j - 1]
    n_old = body.size
    path, old, depth = nth_node(body, int(rng.random() * n_old))
    nt = sort_of(old)
    new = grammar.sample(nt, j, rng, depth)
    new_body = replace_at(body, path, new)
    factors = list(prog.factors)
    factors[j - 1] = new_body
    proposal = FactorizedProgram(tuple(factors))
    n_new = n_old - old.size + new.size
    log_qf = -math.log(K) - math.log(n_old) + grammar.log_proposal(new, j, nt, depth)
    log_qb = -math.log(K) - math.log(n_new) + grammar.log_proposal(old, j, nt, depth)
    return proposal, log_qf, log_qb


def _p_add(K: int, max_factors: int) -> float:
    if K >= max_factors:
        return 0.0
    if K <= 1:
        return 1.0
    return 0.5


def propose_factor_move(prog: FactorizedProgram, grammar: ExpressionGrammar, rng,
                        max_factors: int = MAX_FACTORS):
    """Append a freshly sampled last factor, or drop the last one.

    Direction is a fair coin; an infeasible direction becomes the other one.
    """
    K = prog.K
    if max_factors <= 1:
        return prog, 0.0, 0.0
    p_add = _p_add(K, max_factors)
    if rng.random() < p_add:
        new = grammar.sample(LIST, K + 1, rng, 0)
        proposal = FactorizedProgram(prog.factors + (new,))
        log_qf = math.log(p_add) + grammar.log_proposal(new, K + 1, LIST, 0)
        log_qb = math.log(1.0 - _p_add(K + 1, max_factors))
    else:
        proposal = FactorizedProgram(prog.factors[:-1])
        log_qf = math.log(1.0 - p_add)
        log_qb = math.log(_p_add(K - 1, max_factors)) + grammar.log_proposal(
            prog.factors[-1], K, LIST, 0)
    return proposal, log_qf, log_qb


# ---------------------------------------------------------------------------
# scoring with a per-chain cache


class Scorer:
    """Scores programs, caching prior and output distribution by canonical form.

    The likelihood seed is fixed per run, so a program's score does not depend
    on which chain finds it.
    """

    def __init__(self, data: Dataset, grammar: ExpressionGrammar, params: ScoreParams,
                 seed: int, cache_size: int = 200_000):
        self.data = data
        self.grammar = grammar
        self.params = params
        self.seed = seed
        self.cache_size = cache_size
        self._cache: dict = {}
        self.hits = 0
        self.misses = 0

    def __call__(self, prog: FactorizedProgram) -> ScoredHypothesis:
        canon = prog.canonical()
        hit = self._cache.get(canon)
        if hit is None:
            self.misses += 1
            h = score(prog, self.data, self.grammar, self.params, self.seed)
            if len(self._cache) >= self.cache_size:
                self._cache.clear()
            self._cache[canon] = h
            return h
        self.hits += 1
        return hit

    def set_data(self, data: Dataset) -> None:
        """Swap the dataset; cached distributions are reused, likelihoods recomputed."""
        self.data = data
        self._cache = {c: self.rescore(h) for c, h in self._cache.items()}

    def rescore(self, h: ScoredHypothesis) -> ScoredHypothesis:
        if h.rejected or h.dist is None:
            return h
        ll = log_likelihood(h.dist, self.data, self.params.outlier_log_penalty,
                            h.dist.renormalized())
        return ScoredHypothesis(h.program, h.log_prior, ll, h.dist, h.canonical)


def mh_step(state: ChainState, data: Dataset, grammar: ExpressionGrammar,
            params: ScoreParams, rng, factor_move_prob: float = 0.2,
            max_factors: int = MAX_FACTORS, temperature: float = 1.0,
            scorer: Scorer | None = None, seed: int = 0) -> ChainState:
    """One MH transition; returns a new state (the input is not mutated)."""
    prog = state.current.program
    if rng.random() < factor_move_prob:
        proposal, log_qf, log_qb = propose_factor_move(prog, grammar, rng, max_factors)
    else:
        proposal, log_qf, log_qb = propose_regen(prog, grammar, rng)
    if scorer is None:
        new = score(proposal, data, grammar, params, seed)
    else:
        new = scorer(proposal)
    u = rng.random()
    if accept(state.current.log_post, new.log_post, log_qf, log_qb, u, temperature):
        return ChainState(new, state.step_index + 1, state.accepted + 1)
    return ChainState(state.current, state.step_index + 1, state.accepted)


def accept(old_post: float, new_post: float, log_qf: float, log_qb: float, u: float,
           temperature: float = 1.0) -> bool:
    if new_post == -math.inf or log_qb == -math.inf:
        return False
    if old_post == -math.inf:
        return True
    log_a = (new_post - old_post) / temperature + log_qb - log_qf
    return log_a >= 0 or u < math.exp(log_a)


class TopN:
    """Best ``n`` distinct hypotheses seen, by log posterior then canonical form."""

    def __init__(self, n: int):
        self.n = n
        self.entries: dict = {}

    def add(self, h: ScoredHypothesis) -> None:
        if h.canonical in self.entries:
            return
        self.entries[h.canonical] = h
        if len(self.entries) > 4 * self.n:
            self._prune()

    def _prune(self) -> None:
        keep = self.sorted()[: self.n]
        self.entries = {h.canonical: h for h in keep}

    def sorted(self) -> list:
        return sorted(self.entries.values(), key=_rank_key)

    def best(self) -> list:
        return self.sorted()[: self.n]


def _rank_key(h: ScoredHypothesis):
    return (-h.log_post, h.canonical)


class Chain:
    """A single MH chain with its own random stream, cache and top-N record."""

    def __init__(self, config: ChainConfig, data: Dataset, grammar: ExpressionGrammar,
                 params: ScoreParams = ScoreParams(), chain_index: int = 0):
        self.config = config
        self.grammar = grammar
        self.params = params
        self.rng = chain_rng(config.seed, chain_index)
        self.scorer = Scorer(data, grammar, params, config.seed)
        self.top = TopN(config.top_n)
        init = self.scorer(sample_program(grammar, self.rng, 1))
        self.state = ChainState(init)
        self.top.add(init)
        self.best_post = init.log_post

    @property
    def data(self) -> Dataset:
        return self.scorer.data

    def step(self) -> ChainState:
        c = self.config
        old = self.state.current
        self.state = mh_step(self.state, self.scorer.data, self.grammar, self.params, self.rng,
                             c.factor_move_prob, c.max_factors, c.temperature, self.scorer)
        cur = self.state.current
        if cur is not old:
            self.top.add(cur)
            if cur.log_post > self.best_post:
                self.best_post = cur.log_post
        return self.state

    def run(self, steps: int) -> "Chain":
        for _ in range(steps):
            self.step()
        return self

    def set_data(self, data: Dataset) -> None:
        """Continue on new data: rescore the current state and the top-N record."""
        self.scorer.set_data(data)
        st = self.state
        self.state = ChainState(self.scorer.rescore(st.current), st.step_index, st.accepted)
        self.top.entries = {k: self.scorer.rescore(h) for k, h in self.top.entries.items()}
        self.top._prune()
        self.best_post = max(self.state.current.log_post,
                             max((h.log_post for h in self.top.entries.values()), default=-math.inf))

    @property
    def acceptance_rate(self) -> float:
        return self.state.accepted / self.state.step_index if self.state.step_index else 0.0


def run_chain(config: ChainConfig, data: Dataset, grammar: ExpressionGrammar,
              params: ScoreParams = ScoreParams(), chain_index: int = 0) -> list:
    return Chain(config, data, grammar, params, chain_index).run(config.steps).top.best()


def _run_chain_job(args):
    return run_chain(*args)


# ---------------------------------------------------------------------------
# hypothesis store


class HypothesisStore:
    """Deduplicated hypotheses with normalized posterior weights."""

    def __init__(self, entries):
        uniq = {}
        for h in entries:
            cur = uniq.get(h.canonical)
            if cur is None or h.log_post > cur.log_post:
                uniq[h.canonical] = h
        self.entries = sorted(uniq.values(), key=_rank_key)
        self.weights = softmax([h.log_post for h in self.entries])

    def __len__(self) -> int:
        return len(self.entries)

    def __iter__(self):
        return iter(zip(self.weights, self.entries))

    @property
    def map(self) -> ScoredHypothesis:
        return self.entries[0]

    def dumps(self, header: list | None = None) -> str:
        lines = [f"# {h}" for h in (header or [])]
        lines.append("# weight\tlog_post\tlog_prior\tlog_lik\tprogram")
        for w, h in self:
            lines.append("\t".join((_fmt(w), _fmt(h.log_post), _fmt(h.log_prior),
                                    _fmt(h.log_lik), h.canonical)))
        return "\n".join(lines) + "\n"

    @classmethod
    def loads(cls, text: str) -> "HypothesisStore":
        entries = []
        for line in text.splitlines():
            if not line.strip() or line.startswith("#"):
                continue
            _, _, lp, ll, canon = line.split("\t")
            entries.append(ScoredHypothesis(parse_program(canon), float(lp), float(ll)))
        return cls(entries)


def _fmt(x: float) -> str:
    return repr(float(x))


def softmax(logs: list) -> list:
    finite = [v for v in logs if v != -math.inf]
    if not finite:
        return [0.0] * len(logs)
    m = max(finite)
    ex = [math.exp(v - m) if v != -math.inf else 0.0 for v in logs]
    z = math.fsum(ex)
    return [e / z for e in ex]


def run_inference(config: ChainConfig, data: Dataset, grammar: ExpressionGrammar,
                  params: ScoreParams = ScoreParams(), workers: int = 1) -> HypothesisStore:
    """Run independent chains (optionally in worker processes) and merge their top-N lists."""
    jobs = [(config, data, grammar, params, i) for i in range(config.chains)]
    if workers > 1 and config.chains > 1:
        with ProcessPoolExecutor(max_workers=workers) as ex:
            results = list(ex.map(_run_chain_job, jobs))
    else:
        results = [_run_chain_job(j) for j in jobs]
    return HypothesisStore([h for r in results for h in r])


def with_seed(config: ChainConfig, seed: int) -> ChainConfig:
    return replace(config, seed=seed)

"""Exhaustively enumerable space for checking the sampler's stationary law."""
import itertools
import math
from collections import Counter

from lotinduce.expr import parse_program
from lotinduce.grammar import ExpressionGrammar
from lotinduce.inference import Chain, ChainConfig
from lotinduce.scoring import Dataset

LEAVES = ("∅", "x", "a")
DEPTH = 2  # root at depth 0; nodes at depth 2 are leaves


def grammar():
    return ExpressionGrammar(("a",), {"pair": 1, "nil": 1, "arg": 1, "atom": 1}, max_depth=DEPTH)


def expressions(depth=DEPTH):
    """(text, node count, number of a leaves) for every tree of the given height bound."""
    if depth == 0:
        return [(t, 1, int(t == "a")) for t in LEAVES]
    sub = expressions(depth - 1)
    out = [(t, 1, int(t == "a")) for t in LEAVES]
    for (l, nl, al), (r, nr, ar) in itertools.product(sub, sub):
        out.append((f"(pair {l} {r})", 1 + nl + nr, al + ar))
    return out


def exact_posterior(data_len=1, penalty=-1000.0):
    """Each of the four productions has prior 1/4; data is the single string a."""
    logp = {}
    for text, size, n_a in expressions():
        lik = 0.0 if n_a == data_len else penalty
        logp[text] = size * math.log(0.25) + lik
    m = max(logp.values())
    z = math.fsum(math.exp(v - m) for v in logp.values())
    return {t: math.exp(v - m) / z for t, v in logp.items()}


def visit_distribution(steps, seed):
    cfg = ChainConfig(steps=steps, chains=1, top_n=10, factor_move_prob=0.0, max_factors=1, seed=seed)
    chain = Chain(cfg, Dataset([("a",)]), grammar())
    visits = Counter()
    for _ in range(steps):
        chain.step()
        visits[chain.state.current.canonical] += 1
    return {t: c / steps for t, c in visits.items()}, chain


def tv(p, q):
    keys = set(p) | set(q)
    return 0.5 * math.fsum(abs(p.get(k, 0.0) - q.get(k, 0.0)) for k in keys)


def check_space():
    texts = [t for t, _, _ in expressions()]
    assert len(texts) == len(set(texts)) == 147
    for t in texts[:5]:
        parse_program(t)
    return texts

import math
import random

import pytest

import micro
from lotinduce.expr import parse_program
from lotinduce.grammar import default_grammar, sample_program
from lotinduce.inference import (
    Chain,
    ChainConfig,
    ChainState,
    HypothesisStore,
    Scorer,
    TopN,
    accept,
    mh_step,
    propose_factor_move,
    propose_regen,
    run_chain,
    run_inference,
    softmax,
)
from lotinduce.scoring import Dataset, ScoredHypothesis, ScoreParams, score

DATA = Dataset.from_strings(["a", "a", "a a", "a", "a a a"])
G = default_grammar(("a",))


class FixedRng:
    def __init__(self, values):
        self.values = list(values)

    def random(self):
        return self.values.pop(0)


def test_regen_at_root_is_fresh_sample():
    prog = parse_program("(pair a ∅)")
    draws = [0.0, 0.0] + [0.3] * 50  # factor 1, node 0 (the root), then the sampler's draws
    proposal, qf, qb = propose_regen(prog, G, FixedRng(draws))
    fresh = G.sample("list", 1, FixedRng([0.3] * 50), 0)
    assert proposal.factors[0] == fresh
    # forward and backward terms use the sampler's own (depth-truncated) law
    assert qf == pytest.approx(-math.log(3) + G.log_proposal(fresh, 1, "list", 0))
    assert qb == pytest.approx(-math.log(fresh.size) + G.log_proposal(prog.factors[0], 1, "list", 0))
    assert G.log_proposal(prog.factors[0], 1, "list", 0) == G.log_prior_expression(prog.factors[0], 1)


def test_regen_leaves_other_factors():
    prog = parse_program("(pair a ∅) ; (F1 x) ; (pair x a)")
    rng = random.Random(0)
    for _ in range(200):
        p, _, _ = propose_regen(prog, G, rng)
        changed = [i for i in range(3) if p.factors[i] != prog.factors[i]]
        assert len(changed) <= 1
        p.validate()


def test_factor_move_boundaries_and_reversibility():
    one = parse_program("(pair a ∅)")
    p, qf, qb = propose_factor_move(one, G, random.Random(1))
    assert p.K == 2  # delete on K=1 becomes add
    back, qf2, qb2 = propose_factor_move(p, G, FixedRng([0.99]))  # 0.99 >= p_add: delete
    assert back == one
    assert (qf2, qb2) == pytest.approx((qb, qf))
    ten = parse_program(" ; ".join(["x"] * 10))
    p10, _, _ = propose_factor_move(ten, G, random.Random(2))
    assert p10.K == 9  # add on K=10 becomes delete


def test_accept_rules():
    assert accept(-10, -5, 0, 0, 0.999)
    assert not accept(-10, -math.inf, 0, 0, 0.0)
    assert accept(-math.inf, -3, 0, 0, 0.5)
    assert accept(-10, -11, 0, 0, 0.3) == (0.3 < math.exp(-1))
    assert accept(-10, -12, 0, 0, 0.2, temperature=2.0) == (0.2 < math.exp(-1))


def test_rejected_proposal_keeps_state():
    h = score(parse_program("(pair a ∅)"), DATA, G)
    st = ChainState(h)
    scorer = Scorer(DATA, G, ScoreParams(), 0)
    scorer._cache = {}

    class Loop:
        def __init__(self):
            self.r = random.Random(0)

        def random(self):
            return self.r.random()

    for _ in range(30):
        new = mh_step(st, DATA, G, ScoreParams(), Loop(), scorer=scorer)
        assert new.current is st.current or new.current.log_post > -math.inf


def test_steps_zero_returns_initial():
    cfg = ChainConfig(steps=0, chains=1, seed=3)
    out = run_chain(cfg, DATA, G)
    assert len(out) == 1


def test_topn_bound_and_determinism():
    cfg = ChainConfig(steps=300, chains=1, top_n=5, seed=7)
    a = run_chain(cfg, DATA, G)
    b = run_chain(cfg, DATA, G)
    assert len(a) <= 5
    assert [h.canonical for h in a] == [h.canonical for h in b]
    assert [h.log_post for h in a] == [h.log_post for h in b]


def test_running_max_monotone():
    cfg = ChainConfig(steps=0, chains=1, seed=1)
    ch = Chain(cfg, DATA, G)
    best = ch.best_post
    for _ in range(300):
        ch.step()
        assert ch.best_post >= best
        best = ch.best_post


def test_chain_streams_differ_by_index():
    cfg = ChainConfig(steps=100, chains=1, seed=2)
    a = Chain(cfg, DATA, G, chain_index=0).run(100)
    b = Chain(cfg, DATA, G, chain_index=1).run(100)
    assert a.state.current.canonical != b.state.current.canonical or \
        a.state.accepted != b.state.accepted


def test_inference_store_properties():
    cfg = ChainConfig(steps=200, chains=3, top_n=4, seed=5)
    store = run_inference(cfg, DATA, G)
    assert len(store) <= 12
    assert sum(store.weights) == pytest.approx(1, abs=1e-9)
    assert len({h.canonical for h in store.entries}) == len(store)
    single = run_inference(ChainConfig(steps=200, chains=1, top_n=4, seed=5), DATA, G)
    direct = run_chain(ChainConfig(steps=200, chains=1, top_n=4, seed=5), DATA, G, chain_index=0)
    assert [h.canonical for h in single.entries] == [h.canonical for h in direct]


def test_chain_order_invariance():
    cfg = ChainConfig(steps=150, chains=3, top_n=4, seed=8)
    lists = [run_chain(cfg, DATA, G, chain_index=i) for i in range(3)]
    a = HypothesisStore([h for r in lists for h in r])
    b = HypothesisStore([h for r in reversed(lists) for h in r])
    assert a.dumps() == b.dumps()
    assert run_inference(cfg, DATA, G).dumps() == a.dumps()


def test_store_round_trip_and_weights():
    progs = ["(pair a ∅)", "(pair a (if (flip 0.5) ∅ (F1 ∅)))", "(F1 x)"]
    hs = [score(parse_program(p), DATA, G) for p in progs]
    store = HypothesisStore(hs + hs[:1])
    assert len(store) == 3
    assert store.weights[-1] == 0.0  # the rejected program
    text = store.dumps(["header line"])
    again = HypothesisStore.loads(text)
    assert again.dumps(["header line"]) == text


def test_softmax():
    w = softmax([0.0, math.log(3), -math.inf])
    assert w == pytest.approx([0.25, 0.75, 0.0])
    assert softmax([-math.inf]) == [0.0]


def test_topn_dedup_and_order():
    t = TopN(2)
    for p in ["(pair a ∅)", "(pair ∅ a)", "a", "a"]:
        t.add(ScoredHypothesis(parse_program(p), -1.0, 0.0))
    best = t.best()
    assert [h.canonical for h in best] == ["(pair a ∅)", "(pair ∅ a)"]


def test_acceptance_rate_band_on_an():
    cfg = ChainConfig(steps=3000, chains=1, seed=0)
    ch = Chain(cfg, DATA, G).run(3000)
    assert 0.01 < ch.acceptance_rate < 0.9


def test_micro_space_size():
    micro.check_space()


def test_micro_chain_matches_exact_posterior():
    exact = micro.exact_posterior()
    visits, chain = micro.visit_distribution(20000, seed=11)
    assert set(visits) <= set(exact)
    assert micro.tv(visits, exact) <= 0.10


def test_warm_start_rescoring():
    cfg = ChainConfig(steps=0, chains=1, top_n=5, seed=0)
    ch = Chain(cfg, Dataset.from_strings(["a"]), G).run(200)
    bigger = Dataset.from_strings(["a", "a a", "a a a"])
    ch.set_data(bigger)
    for h in ch.top.entries.values():
        if not h.rejected:
            assert h.log_lik == pytest.approx(score(h.program, bigger, G, seed=0).log_lik)
    ch.run(50)


def test_random_programs_score_finite_or_rejected():
    rng = random.Random(0)
    for _ in range(50):
        p = sample_program(G, rng, 2)
        h = score(p, DATA, G)
        assert h.rejected or math.isfinite(h.log_post)

import math
import re
import random
from collections import Counter

import pytest

from conftest import GEOMETRIC_A
from lotinduce.expr import BOOL, LIST, NIL, Atom, Call, Flip, Pair, parse_expr, parse_program
from lotinduce.grammar import (
    LEAF_PRODUCTIONS,
    LOG_HALF,
    ExpressionGrammar,
    GrammarError,
    default_grammar,
    extend_with_atoms,
)


def test_extend_with_atoms():
    g = extend_with_atoms(ExpressionGrammar(), ["a"])
    assert g.atoms == ("a",)
    g2 = default_grammar(("a", "b"))
    lp = g2.log_prior_expression(Atom("a"), 1)
    assert lp == pytest.approx(math.log(1 / 8) + math.log(0.5))
    eng = extend_with_atoms(ExpressionGrammar(), ["d", "n", "v", "a", "that", "if", "then"])
    assert len(eng.atoms) == 7
    with pytest.raises(GrammarError):
        extend_with_atoms(ExpressionGrammar(), ["a", "a"])
    with pytest.raises(GrammarError):
        extend_with_atoms(ExpressionGrammar(), [])


def test_normalization():
    g = default_grammar(("a", "b", "c"))
    for nt in (LIST, BOOL):
        for restricted in (False, True):
            probs = g.production_logprobs(nt, restricted)
            assert math.fsum(math.exp(v) for v in probs.values()) == pytest.approx(1, abs=1e-12)


def test_atom_and_flip_priors():
    g = default_grammar(("a",))
    assert g.log_prior_expression(Atom("a"), 1) == math.log(1 / 8)
    assert g.log_prior_expression(Flip(0.5), 1, BOOL) == pytest.approx(math.log(0.5) + math.log(0.2))


def test_golden_prior_of_geometric_example():
    # pair, atom, if, nil, call, nil: six list choices at 1/8; flip at 1/2 then 0.7 at 1/5;
    # the only callable id in F1 is 1 and the only atom is a
    g = default_grammar(("a",))
    golden_expr = 6 * math.log(1 / 8) + math.log(1 / 2) + math.log(1 / 5)
    prog = parse_program(GEOMETRIC_A)
    assert g.log_prior_expression(prog.factors[0], 1) == pytest.approx(golden_expr, abs=1e-12)
    assert g.log_prior_program(prog) == pytest.approx(golden_expr + math.log(0.5), abs=1e-12)


def test_factor_penalty_and_additivity():
    g = default_grammar(("a",))
    body = parse_expr("(pair a ∅)")
    one = g.log_prior_program(parse_program("(pair a ∅)"))
    two = g.log_prior_program(parse_program("(pair a ∅) ; (pair a ∅)"))
    three = g.log_prior_program(parse_program("(pair a ∅) ; (pair a ∅) ; (pair a ∅)"))
    e1 = g.log_prior_expression(body, 1)
    assert one == e1 + LOG_HALF
    assert three == pytest.approx(3 * e1 + 3 * math.log(0.5))
    assert two - one == pytest.approx(LOG_HALF + g.log_prior_expression(body, 2))


def test_call_restriction_rejected():
    g = default_grammar(("a",))
    with pytest.raises(GrammarError):
        g.log_prior_expression(Call(2, NIL), 1)
    with pytest.raises(GrammarError):
        g.log_prior_expression(Atom("z"), 1)


def test_call_production_split_over_callable_ids():
    g = default_grammar(("a",))
    assert g.log_prior_expression(Call(1, NIL), 3) == pytest.approx(
        g.log_prior_expression(Call(3, NIL), 3))
    assert g.log_prior_expression(Call(1, NIL), 3) - g.log_prior_expression(Call(1, NIL), 1) \
        == pytest.approx(-math.log(3))


def test_probability_constants_uniform():
    g = default_grammar(("a",))
    rng = random.Random(0)
    counts = Counter(g.sample_probability(rng) for _ in range(5000))
    assert set(counts) == {0.5, 0.6, 0.7, 0.8, 0.9}
    for c in counts.values():
        assert abs(c / 5000 - 0.2) < 3 * math.sqrt(0.16 / 5000) + 1e-9


def test_depth_boundary_only_leaves():
    g = default_grammar(("a", "b"), max_depth=3)
    rng = random.Random(1)
    for _ in range(300):
        e = g.sample(LIST, 2, rng, depth=3)
        assert e.size == 1
    kinds = g.production_logprobs(LIST, restricted=True)
    assert set(kinds) <= LEAF_PRODUCTIONS


def test_root_pair_frequency():
    g = default_grammar(("a",))
    rng = random.Random(2)
    n = 20000
    hits = sum(isinstance(g.sample(LIST, 1, rng), Pair) for _ in range(n))
    assert abs(hits / n - 1 / 8) < 3 * math.sqrt((1 / 8) * (7 / 8) / n)


def test_prior_sampler_consistency():
    # Over a thousand expressions are compared, so a few 3-sigma excursions are
    # expected by chance; require 99% inside 3 sigma and a global chi-square fit.
    g = default_grammar(("a",), max_depth=20)
    rng = random.Random(3)
    n = 100_000
    counts = Counter(g.sample(LIST, 1, rng).text for _ in range(n))
    inside = total = 0
    chi2 = 0.0
    for text, c in counts.items():
        p = math.exp(g.log_prior_expression(parse_expr(text), 1))
        if n * p < 10:  # chosen by expected count so selection does not bias the test
            continue
        total += 1
        inside += abs(c / n - p) <= 3 * math.sqrt(p * (1 - p) / n)
        chi2 += (c - n * p) ** 2 / (n * p)
    assert total >= 100
    assert inside >= 0.99 * total
    # upper 0.1% point of chi-square with `total` dof (Wilson-Hilferty)
    z = 3.09
    bound = total * (1 - 2 / (9 * total) + z * math.sqrt(2 / (9 * total))) ** 3
    assert chi2 <= bound


def test_adding_a_node_lowers_prior():
    g = default_grammar(("a",))
    small = parse_expr("(pair a ∅)")
    big = parse_expr("(pair a (rest ∅))")
    assert g.log_prior_expression(big, 1) < g.log_prior_expression(small, 1)


def test_proposal_law_matches_prior_above_cutoff():
    g = default_grammar(("a",), max_depth=4)
    e = parse_expr("(pair a (if (flip 0.5) ∅ x))")
    assert g.log_proposal(e, 1, LIST, 0) == pytest.approx(g.log_prior_expression(e, 1))
    # at the cutoff only leaves are possible, renormalized over nil, arg, atom
    assert g.log_proposal(Atom("a"), 1, LIST, 4) == pytest.approx(math.log(1 / 3))
    assert g.log_proposal(e, 1, LIST, 4) == -math.inf


def test_zero_weight_removes_production():
    g = ExpressionGrammar(("a",), {"pair": 1, "nil": 1, "arg": 1, "atom": 1}, max_depth=2)
    rng = random.Random(0)
    for _ in range(200):
        e = g.sample(LIST, 1, rng)
        assert set(re.findall(r"[^\s()]+", e.text)) <= {"pair", "∅", "x", "a"}

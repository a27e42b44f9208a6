"""Probabilistic grammar over expressions: sampling and log priors.

Nonterminals are ``list``, ``bool``, ``probability`` and ``atom``. The single
``function(list)`` production of ``list`` expands to ``Fi(list)`` with ``i``
uniform over the factors callable from the current factor (``1..j`` inside
``Fj``), so callable ids split that production's mass evenly.
"""
from __future__ import annotations

import math
from bisect import bisect_right
from dataclasses import dataclass, field
from itertools import accumulate

from .expr import (
    ARG,
    BOOL,
    LIST,
    NIL,
    PROBABILITIES,
    Arg,
    Atom,
    Call,
    Expr,
    FactorizedProgram,
    First,
    Flip,
    If,
    IsEmpty,
    Nil,
    Pair,
    Rest,
    valid_atom,
    children,
    to_text,
)

LIST_PRODUCTIONS = ("pair", "call", "rest", "if", "first", "nil", "arg", "atom")
BOOL_PRODUCTIONS = ("flip", "empty")
LEAF_PRODUCTIONS = {"nil", "arg", "atom", "flip"}
NONTERMINALS = ("START", LIST, BOOL, "atom", "probability")

_NODE_PRODUCTION = {Pair: "pair", Call: "call", Rest: "rest", If: "if", First: "first",
                    Nil: "nil", Arg: "arg", Atom: "atom", Flip: "flip", IsEmpty: "empty"}

LOG_HALF = math.log(0.5)


class GrammarError(ValueError):
    pass


_MEMO_CAP = 500_000


def _normalize(weights: dict) -> dict:
    z = sum(weights.values())
    if z <= 0:
        raise GrammarError("production weights must have positive total")
    return {k: (math.log(w / z) if w > 0 else -math.inf) for k, w in weights.items()}


@dataclass(frozen=True)
class ExpressionGrammar:
    """Immutable PCFG over expressions.

    ``list_weights`` / ``bool_weights`` / ``prob_weights`` are unnormalized;
    a zero weight removes a production. ``max_depth`` is the node depth (root
    at 0) from which the sampler only uses non-recursive productions.
    """

    atoms: tuple = ()
    list_weights: dict = field(default_factory=lambda: dict.fromkeys(LIST_PRODUCTIONS, 1.0))
    bool_weights: dict = field(default_factory=lambda: dict.fromkeys(BOOL_PRODUCTIONS, 1.0))
    prob_weights: dict = field(default_factory=lambda: dict.fromkeys(PROBABILITIES, 1.0))
    max_depth: int = 20

    def __post_init__(self):
        atoms = tuple(self.atoms)
        if len(set(atoms)) != len(atoms):
            raise GrammarError(f"duplicate atoms in {atoms}")
        for a in atoms:
            if not valid_atom(a):
                raise GrammarError(f"atom {a!r} is reserved or malformed")
        object.__setattr__(self, "atoms", atoms)
        for name, table, allowed in (("list", self.list_weights, LIST_PRODUCTIONS),
                                     ("bool", self.bool_weights, BOOL_PRODUCTIONS),
                                     ("probability", self.prob_weights, PROBABILITIES)):
            unknown = set(table) - set(allowed)
            if unknown:
                raise GrammarError(f"unknown {name} productions: {sorted(unknown, key=str)}")
            if any(w < 0 for w in table.values()):
                raise GrammarError(f"negative weight in {name} productions")
        if self.max_depth < 1:
            raise GrammarError("max_depth must be >= 1")
        lw = {k: self.list_weights.get(k, 0.0) for k in LIST_PRODUCTIONS}
        if not atoms:
            lw["atom"] = 0.0
        bw = {k: self.bool_weights.get(k, 0.0) for k in BOOL_PRODUCTIONS}
        pw = {p: self.prob_weights.get(p, 0.0) for p in PROBABILITIES}
        object.__setattr__(self, "_lp_list", _normalize(lw))
        object.__setattr__(self, "_lp_bool", _normalize(bw))
        object.__setattr__(self, "_lp_prob", _normalize(pw))
        leaf_l = {k: (w if k in LEAF_PRODUCTIONS else 0.0) for k, w in lw.items()}
        leaf_b = {k: (w if k in LEAF_PRODUCTIONS else 0.0) for k, w in bw.items()}
        object.__setattr__(self, "_lp_list_leaf", _normalize(leaf_l) if sum(leaf_l.values()) > 0 else None)
        object.__setattr__(self, "_lp_bool_leaf", _normalize(leaf_b) if sum(leaf_b.values()) > 0 else None)
        object.__setattr__(self, "_tables", {
            (LIST, False): _cum(lw), (LIST, True): _cum(leaf_l),
            (BOOL, False): _cum(bw), (BOOL, True): _cum(leaf_b),
            ("probability", False): _cum(pw),
        })
        object.__setattr__(self, "_memo", {})

    # -- production tables -------------------------------------------------

    def production_logprobs(self, nt: str, restricted: bool = False) -> dict:
        if nt == LIST:
            t = self._lp_list_leaf if restricted else self._lp_list
        elif nt == BOOL:
            t = self._lp_bool_leaf if restricted else self._lp_bool
        elif nt == "probability":
            t = self._lp_prob
        elif nt == "atom":
            t = {a: -math.log(len(self.atoms)) for a in self.atoms}
        else:
            raise GrammarError(f"unknown nonterminal {nt!r}")
        if t is None:
            raise GrammarError(f"no non-recursive production for {nt}")
        return {k: v for k, v in t.items() if v > -math.inf}

    def sample_probability(self, rng) -> float:
        keys, cum = self._tables[("probability", False)]
        return keys[bisect_right(cum, rng.random() * cum[-1])]

    def callable_ids(self, factor_index: int) -> range:
        return range(1, factor_index + 1)

    # -- sampling ----------------------------------------------------------

    def sample(self, nt: str, factor_index: int, rng, depth: int = 0) -> Expr:
        """Top-down PCFG sample of sort ``nt`` at node depth ``depth``.

        ``rng`` is a :class:`random.Random`-like object with ``random()``.
        """
        restricted = depth >= self.max_depth
        keys, cum = self._tables[(nt, restricted)]
        if not keys:
            raise GrammarError(f"no usable production for {nt} (restricted={restricted})")
        k = keys[bisect_right(cum, rng.random() * cum[-1])]
        d = depth + 1
        if nt == BOOL:
            if k == "flip":
                pk, pc = self._tables[("probability", False)]
                return Flip(pk[bisect_right(pc, rng.random() * pc[-1])])
            return IsEmpty(self.sample(LIST, factor_index, rng, d))
        if k == "nil":
            return NIL
        if k == "arg":
            return ARG
        if k == "atom":
            return Atom(self.atoms[int(rng.random() * len(self.atoms))])
        if k == "pair":
            left = self.sample(LIST, factor_index, rng, d)
            return Pair(left, self.sample(LIST, factor_index, rng, d))
        if k == "call":
            i = 1 + int(rng.random() * factor_index)
            return Call(i, self.sample(LIST, factor_index, rng, d))
        if k == "rest":
            return Rest(self.sample(LIST, factor_index, rng, d))
        if k == "first":
            return First(self.sample(LIST, factor_index, rng, d))
        cond = self.sample(BOOL, factor_index, rng, d)
        then = self.sample(LIST, factor_index, rng, d)
        return If(cond, then, self.sample(LIST, factor_index, rng, d))

    # -- log probabilities ---------------------------------------------------

    def log_prior_expression(self, expr: Expr, factor_index: int, nt: str = LIST) -> float:
        """Untruncated PCFG log probability of ``expr`` rooted at sort ``nt``."""
        return self._logp(expr, factor_index, nt, None)

    def log_proposal(self, expr: Expr, factor_index: int, nt: str, depth: int) -> float:
        """Log probability that :meth:`sample` at ``depth`` returns ``expr``.

        Differs from the prior only where the depth cut-off renormalizes the
        choices onto non-recursive productions.
        """
        return self._logp(expr, factor_index, nt, depth)

    def _logp(self, e: Expr, j: int, nt: str, depth) -> float:
        if depth is not None or e.size == 1:
            return self._logp_node(e, j, nt, depth)
        # untruncated values of shared subtrees are memoized by text
        key = (e.text, j, nt)
        lp = self._memo.get(key)
        if lp is None:
            lp = self._logp_node(e, j, nt, None)
            if len(self._memo) >= _MEMO_CAP:
                self._memo.clear()
            self._memo[key] = lp
        return lp

    def _logp_node(self, e: Expr, j: int, nt: str, depth) -> float:
        own, kids = self._node_terms(e, j, nt, depth)
        lp = sum(own)
        d = None if depth is None else depth + 1
        for k, knt in kids:
            if lp == -math.inf:
                return lp
            lp += self._logp(k, j, knt, d)
        return lp

    def _node_terms(self, e: Expr, j: int, nt: str, depth):
        """Log-probability terms chosen at the root of ``e`` and its (child, sort) pairs."""
        kind = _NODE_PRODUCTION.get(type(e))
        if kind is None:
            raise GrammarError(f"not an expression: {e!r}")
        want = BOOL if kind in BOOL_PRODUCTIONS else LIST
        if want != nt:
            raise GrammarError(f"sort mismatch: {to_text(e)} is not {nt}")
        restricted = depth is not None and depth >= self.max_depth
        if nt == LIST:
            table = self._lp_list_leaf if restricted else self._lp_list
        else:
            table = self._lp_bool_leaf if restricted else self._lp_bool
        if table is None:
            return [-math.inf], ()
        own = [table[kind]]
        if kind == "atom":
            if e.symbol not in self.atoms:
                raise GrammarError(f"atom {e.symbol!r} not in alphabet {self.atoms}")
            if len(self.atoms) > 1:
                own.append(-math.log(len(self.atoms)))
        elif kind == "flip":
            if e.p not in self._lp_prob:
                raise GrammarError(f"flip constant {e.p} not allowed")
            own.append(self._lp_prob[e.p])
        elif kind == "call":
            if not 1 <= e.index <= j:
                raise GrammarError(f"F{j} may not call F{e.index}")
            if j > 1:
                own.append(-math.log(j))
        if kind == "if":
            kids_nt = (BOOL, LIST, LIST)
        else:
            kids_nt = (LIST,) * len(children(e))
        return own, tuple(zip(children(e), kids_nt))

    def log_prior_terms(self, prog: FactorizedProgram) -> list:
        """Every production log probability used by ``prog`` plus one log(1/2) per factor."""
        terms = [LOG_HALF] * prog.K
        for j, body in enumerate(prog.factors, start=1):
            stack = [(body, LIST)]
            while stack:
                e, nt = stack.pop()
                own, kids = self._node_terms(e, j, nt, None)
                terms.extend(own)
                stack.extend(reversed(kids))
        return terms

    def log_prior_program(self, prog: FactorizedProgram) -> float:
        """PCFG prior of every factor body times the 2^-K factor penalty.

        Summed with ``math.fsum`` so the value is the correctly rounded total
        of :meth:`log_prior_terms`, independent of tree shape.
        """
        terms = self.log_prior_terms(prog)
        return -math.inf if -math.inf in terms else math.fsum(terms)

    def with_atoms(self, alphabet) -> "ExpressionGrammar":
        return extend_with_atoms(self, alphabet)

    def config(self) -> dict:
        return {
            "atoms": list(self.atoms),
            "list_weights": {k: self.list_weights.get(k, 0.0) for k in LIST_PRODUCTIONS},
            "bool_weights": {k: self.bool_weights.get(k, 0.0) for k in BOOL_PRODUCTIONS},
            "prob_weights": {str(p): self.prob_weights.get(p, 0.0) for p in PROBABILITIES},
            "max_depth": self.max_depth,
        }


def _cum(weights: dict) -> tuple:
    keys = tuple(k for k, w in weights.items() if w > 0)
    return keys, list(accumulate(weights[k] for k in keys))


def extend_with_atoms(grammar: ExpressionGrammar, alphabet) -> ExpressionGrammar:
    """Add one uniformly weighted atom production per token."""
    alphabet = list(alphabet)
    if not alphabet:
        raise GrammarError("alphabet must be nonempty")
    if len(set(alphabet)) != len(alphabet):
        raise GrammarError(f"duplicate tokens in alphabet {alphabet}")
    clash = set(alphabet) & set(grammar.atoms)
    if clash:
        raise GrammarError(f"atoms already registered: {sorted(clash)}")
    return ExpressionGrammar(atoms=grammar.atoms + tuple(alphabet),
                             list_weights=dict(grammar.list_weights),
                             bool_weights=dict(grammar.bool_weights),
                             prob_weights=dict(grammar.prob_weights),
                             max_depth=grammar.max_depth)


def default_grammar(alphabet=(), max_depth: int = 20) -> ExpressionGrammar:
    g = ExpressionGrammar(max_depth=max_depth)
    return extend_with_atoms(g, alphabet) if alphabet else g


def sample_program(grammar: ExpressionGrammar, rng, K: int = 1) -> FactorizedProgram:
    return FactorizedProgram(tuple(grammar.sample(LIST, j, rng) for j in range(1, K + 1)))

"""Expression language for factorized string-generating programs.

A program is an ordered list of factors ``F1..FK``. Each factor is a
one-argument function whose body is an :class:`Expr`; factor ``j`` may call
``F1..Fj``. Running the program means evaluating ``FK`` on the empty string.

Strings are tuples of token symbols. The empty string prints as ``∅``.
"""
from __future__ import annotations

import re
import sys
from dataclasses import dataclass
from typing import Iterator

PROBABILITIES = (0.5, 0.6, 0.7, 0.8, 0.9)
MAX_FACTORS = 10
DEFAULT_BUDGET = 128
DEFAULT_MAX_LEN = 50

EMPTY_SYMBOL = "∅"
ARG_SYMBOL = "x"
# keywords only ever appear in head position, so only these clash with atoms
RESERVED = {ARG_SYMBOL, EMPTY_SYMBOL}

LIST = "list"
BOOL = "bool"

Str = tuple  # tuple[str, ...]


# ---------------------------------------------------------------------------
# nodes
#
# Nodes are immutable by convention. Each caches its canonical text and
# subtree size at construction; equality and hashing go through the text.


class Expr:
    __slots__ = ("text", "size")

    def __eq__(self, other) -> bool:
        return isinstance(other, Expr) and self.text == other.text

    def __hash__(self) -> int:
        return hash(self.text)

    def __repr__(self) -> str:
        return self.text


class Pair(Expr):
    __slots__ = ("left", "right")

    def __init__(self, left: Expr, right: Expr):
        self.left = left
        self.right = right
        self.text = f"(pair {left.text} {right.text})"
        self.size = 1 + left.size + right.size


class First(Expr):
    __slots__ = ("arg",)

    def __init__(self, arg: Expr):
        self.arg = arg
        self.text = f"(first {arg.text})"
        self.size = 1 + arg.size


class Rest(Expr):
    __slots__ = ("arg",)

    def __init__(self, arg: Expr):
        self.arg = arg
        self.text = f"(rest {arg.text})"
        self.size = 1 + arg.size


class If(Expr):
    __slots__ = ("cond", "then", "orelse")

    def __init__(self, cond: Expr, then: Expr, orelse: Expr):
        self.cond = cond
        self.then = then
        self.orelse = orelse
        self.text = f"(if {cond.text} {then.text} {orelse.text})"
        self.size = 1 + cond.size + then.size + orelse.size


class Flip(Expr):
    __slots__ = ("p",)

    def __init__(self, p: float):
        self.p = p
        self.text = f"(flip {p:.1f})"
        self.size = 1


class IsEmpty(Expr):
    __slots__ = ("arg",)

    def __init__(self, arg: Expr):
        self.arg = arg
        self.text = f"(empty {arg.text})"
        self.size = 1 + arg.size


class Nil(Expr):
    __slots__ = ()

    def __init__(self):
        self.text = EMPTY_SYMBOL
        self.size = 1


class Arg(Expr):
    __slots__ = ()

    def __init__(self):
        self.text = ARG_SYMBOL
        self.size = 1


class Atom(Expr):
    __slots__ = ("symbol",)

    def __init__(self, symbol: str):
        self.symbol = symbol
        self.text = symbol
        self.size = 1


class Call(Expr):
    __slots__ = ("index", "arg")

    def __init__(self, index: int, arg: Expr):
        self.index = index  # 1-based factor id
        self.arg = arg
        self.text = f"(F{index} {arg.text})"
        self.size = 1 + arg.size


NIL = Nil()
ARG = Arg()


def sort_of(e: Expr) -> str:
    return BOOL if isinstance(e, (Flip, IsEmpty)) else LIST


def children(e: Expr) -> tuple:
    t = type(e)
    if t is Pair:
        return (e.left, e.right)
    if t is If:
        return (e.cond, e.then, e.orelse)
    if t in (First, Rest, IsEmpty, Call):
        return (e.arg,)
    return ()


def with_children(e: Expr, kids: tuple) -> Expr:
    if isinstance(e, Pair):
        return Pair(*kids)
    if isinstance(e, If):
        return If(*kids)
    if isinstance(e, First):
        return First(kids[0])
    if isinstance(e, Rest):
        return Rest(kids[0])
    if isinstance(e, IsEmpty):
        return IsEmpty(kids[0])
    if isinstance(e, Call):
        return Call(e.index, kids[0])
    return e


def walk(e: Expr, depth: int = 0, path: tuple = ()) -> Iterator[tuple[tuple, Expr, int]]:
    """Yield ``(path, node, depth)`` in pre-order."""
    yield path, e, depth
    for i, k in enumerate(children(e)):
        yield from walk(k, depth + 1, path + (i,))


def count_nodes(e: Expr) -> int:
    return e.size


def nth_node(e: Expr, k: int) -> tuple:
    """The ``k``-th node in pre-order as ``(path, node, depth)``."""
    path, depth = [], 0
    while k:
        k -= 1
        for i, c in enumerate(children(e)):
            if k < c.size:
                path.append(i)
                e = c
                depth += 1
                break
            k -= c.size
    return tuple(path), e, depth


def node_at(e: Expr, path: tuple) -> Expr:
    for i in path:
        e = children(e)[i]
    return e


def replace_at(e: Expr, path: tuple, new: Expr) -> Expr:
    if not path:
        return new
    kids = list(children(e))
    kids[path[0]] = replace_at(kids[path[0]], path[1:], new)
    return with_children(e, tuple(kids))


def has_flip(e: Expr) -> bool:
    return any(isinstance(n, Flip) for _, n, _ in walk(e))


def atoms_of(e: Expr) -> set:
    return {n.symbol for _, n, _ in walk(e) if isinstance(n, Atom)}


def max_call_index(e: Expr) -> int:
    return max((n.index for _, n, _ in walk(e) if isinstance(n, Call)), default=0)


# ---------------------------------------------------------------------------
# programs


@dataclass(frozen=True)
class FactorizedProgram:
    factors: tuple

    def __post_init__(self):
        object.__setattr__(self, "factors", tuple(self.factors))
        if not 1 <= len(self.factors) <= MAX_FACTORS:
            raise ValueError(f"need 1..{MAX_FACTORS} factors, got {len(self.factors)}")

    @property
    def K(self) -> int:
        return len(self.factors)

    def validate(self) -> None:
        """Check sorts, flip constants and the call restriction."""
        for j, body in enumerate(self.factors, start=1):
            if sort_of(body) != LIST:
                raise ValueError(f"F{j} body must be list-sorted")
            _check(body, LIST, j)

    def canonical(self) -> str:
        c = self.__dict__.get("_canonical")
        if c is None:
            c = " ; ".join(f.text for f in self.factors)
            object.__setattr__(self, "_canonical", c)
        return c

    def __str__(self) -> str:
        return self.canonical()


def _check(e: Expr, want: str, j: int) -> None:
    if sort_of(e) != want:
        raise ValueError(f"sort mismatch at {to_text(e)}: expected {want}")
    if isinstance(e, Flip) and e.p not in PROBABILITIES:
        raise ValueError(f"flip constant {e.p} not in {PROBABILITIES}")
    if isinstance(e, Call) and not 1 <= e.index <= j:
        raise ValueError(f"F{j} may not call F{e.index}")
    if isinstance(e, Atom) and not valid_atom(e.symbol):
        raise ValueError(f"bad atom symbol {e.symbol!r}")
    if isinstance(e, If):
        _check(e.cond, BOOL, j)
        _check(e.then, LIST, j)
        _check(e.orelse, LIST, j)
    else:
        for k in children(e):
            _check(k, LIST, j)


def valid_atom(symbol: str) -> bool:
    return (symbol not in RESERVED and _TOKEN_RE.fullmatch(symbol) is not None
            and _CALL_RE.fullmatch(symbol) is None and not _is_number(symbol))


def _is_number(s: str) -> bool:
    try:
        float(s)
    except ValueError:
        return False
    return True


def program(*bodies: Expr) -> FactorizedProgram:
    """Validated program from factor bodies F1..FK."""
    prog = FactorizedProgram(tuple(bodies))
    prog.validate()
    return prog


# ---------------------------------------------------------------------------
# canonical text form


def to_text(e: Expr) -> str:
    return e.text


def canonical_form(prog: FactorizedProgram) -> str:
    return prog.canonical()


def must_call(e: Expr) -> frozenset:
    """Factor ids invoked by every evaluation of ``e``, whatever the flips."""
    t = type(e)
    if t is Call:
        return must_call(e.arg) | {e.index}
    if t is Pair:
        return must_call(e.left) | must_call(e.right)
    if t is If:
        return must_call(e.cond) | (must_call(e.then) & must_call(e.orelse))
    if t in (First, Rest, IsEmpty):
        return must_call(e.arg)
    return frozenset()


def never_halts(prog: "FactorizedProgram") -> bool:
    """True when running the program forces an endless chain of factor calls.

    Sound but incomplete: a True answer means every trace is bottom.
    """
    edges = {j: must_call(body) for j, body in enumerate(prog.factors, start=1)}
    state: dict = {}  # 1 = on the current path, 2 = finished

    def cyclic(j: int) -> bool:
        if state.get(j) == 1:
            return True
        if state.get(j) == 2:
            return False
        state[j] = 1
        found = any(cyclic(k) for k in edges[j])
        state[j] = 2
        return found

    # the top-level run of FK is itself a forced call
    return cyclic(prog.K)


_TOKEN_RE = re.compile(r"[^\s();]+")
_LEX_RE = re.compile(r"\s*(\(|\)|;|[^\s();]+)")
_CALL_RE = re.compile(r"F([1-9][0-9]*)")


def _lex(text: str) -> list:
    pos, out = 0, []
    text = text.rstrip()
    while pos < len(text):
        m = _LEX_RE.match(text, pos)
        if m is None:
            raise ValueError(f"cannot tokenize at {text[pos:pos + 20]!r}")
        out.append(m.group(1))
        pos = m.end()
    return out


def parse_expr(text: str) -> Expr:
    toks = _lex(text)
    e, i = _parse(toks, 0)
    if i != len(toks):
        raise ValueError(f"trailing input in {text!r}")
    return e


def parse_program(text: str) -> FactorizedProgram:
    toks = _lex(text)
    bodies, i = [], 0
    while True:
        e, i = _parse(toks, i)
        bodies.append(e)
        if i == len(toks):
            break
        if toks[i] != ";":
            raise ValueError(f"expected ';' between factors, got {toks[i]!r}")
        i += 1
    return program(*bodies)


def _parse(toks: list, i: int) -> tuple:
    if i >= len(toks):
        raise ValueError("unexpected end of input")
    t = toks[i]
    if t == ")" or t == ";":
        raise ValueError(f"unexpected {t!r}")
    if t != "(":
        if t == EMPTY_SYMBOL:
            return NIL, i + 1
        if t == ARG_SYMBOL:
            return ARG, i + 1
        return Atom(t), i + 1
    if i + 1 >= len(toks):
        raise ValueError("unexpected end of input")
    head = toks[i + 1]
    i += 2
    args = []
    if head == "flip":
        if i >= len(toks):
            raise ValueError("unexpected end of input")
        node, i = Flip(round(float(toks[i]), 1)), i + 1
    else:
        while i < len(toks) and toks[i] != ")":
            a, i = _parse(toks, i)
            args.append(a)
        node = _build(head, args)
    if i >= len(toks) or toks[i] != ")":
        raise ValueError(f"missing ')' after {head}")
    return node, i + 1


_ARITY = {"pair": 2, "first": 1, "rest": 1, "if": 3, "empty": 1}


def _build(head: str, args: list) -> Expr:
    m = _CALL_RE.fullmatch(head)
    if m:
        if len(args) != 1:
            raise ValueError(f"{head} takes one argument")
        return Call(int(m.group(1)), args[0])
    if head not in _ARITY:
        raise ValueError(f"unknown form {head!r}")
    if len(args) != _ARITY[head]:
        raise ValueError(f"{head} takes {_ARITY[head]} arguments, got {len(args)}")
    return {"pair": Pair, "first": First, "rest": Rest, "if": If, "empty": IsEmpty}[head](*args)


# ---------------------------------------------------------------------------
# random sources

_MASK = (1 << 64) - 1
GOLDEN_GAMMA = 0x9E3779B97F4A7C15


def mix64(z: int) -> int:
    """SplitMix64 finalizer."""
    z &= _MASK
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _MASK
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _MASK
    return z ^ (z >> 31)


class SplitMix64:
    """The in-repo 64-bit generator shared with the compiled evaluator."""

    __slots__ = ("state",)

    def __init__(self, seed: int):
        self.state = seed & _MASK

    def next_u64(self) -> int:
        self.state = (self.state + GOLDEN_GAMMA) & _MASK
        return mix64(self.state)

    def random(self) -> float:
        return (self.next_u64() >> 11) * (1.0 / 9007199254740992.0)

    def flip(self, p: float) -> bool:
        return self.random() < p


class ScriptedFlips:
    """Replays a fixed list of flip outcomes; used for hand traces and enumeration."""

    def __init__(self, outcomes):
        self.outcomes = list(outcomes)
        self.used = 0

    def flip(self, p: float) -> bool:
        if self.used >= len(self.outcomes):
            raise NeedFlip(p)
        b = self.outcomes[self.used]
        self.used += 1
        return bool(b)


class NeedFlip(Exception):
    def __init__(self, p: float):
        super().__init__(p)
        self.p = p


# ---------------------------------------------------------------------------
# reference evaluator


class _Bottom(Exception):
    pass


class Bottom:
    """Marker for a trace that ran out of call budget or length."""

    _inst = None

    def __new__(cls):
        if cls._inst is None:
            cls._inst = super().__new__(cls)
        return cls._inst

    def __repr__(self) -> str:
        return "⊥"


BOTTOM = Bottom()


def evaluate(prog: FactorizedProgram, rand, budget: int = DEFAULT_BUDGET,
             max_len: int = DEFAULT_MAX_LEN, arg: Str = ()):
    """Run one sample of ``prog``; returns a token tuple or :data:`BOTTOM`.

    ``rand`` needs a ``flip(p)`` method. The top-level invocation of ``FK``
    counts toward ``budget``.
    """
    return evaluate_factor(prog, prog.K, arg, rand, budget, max_len)


def evaluate_factor(prog: FactorizedProgram, index: int, arg: Str, rand,
                    budget: int = DEFAULT_BUDGET, max_len: int = DEFAULT_MAX_LEN):
    ev = _Evaluator(prog.factors, rand, budget, max_len)
    limit = sys.getrecursionlimit()
    if limit < 20000:
        sys.setrecursionlimit(20000)
    try:
        return ev.call(index, tuple(arg))
    except _Bottom:
        return BOTTOM
    finally:
        sys.setrecursionlimit(limit)


class _Evaluator:
    __slots__ = ("factors", "rand", "budget", "max_len", "calls")

    def __init__(self, factors, rand, budget, max_len):
        self.factors = factors
        self.rand = rand
        self.budget = budget
        self.max_len = max_len
        self.calls = 0

    def call(self, index: int, x: Str) -> Str:
        self.calls += 1
        if self.calls > self.budget:
            raise _Bottom
        return self.ev(self.factors[index - 1], x)

    def ev(self, e: Expr, x: Str):
        # type dispatch ordered by frequency in sampled programs
        t = type(e)
        if t is Pair:
            left = self.ev(e.left, x)
            right = self.ev(e.right, x)
            if len(left) + len(right) > self.max_len:
                raise _Bottom
            return left + right
        if t is Atom:
            return (e.symbol,)
        if t is Nil:
            return ()
        if t is Arg:
            return x
        if t is If:
            branch = e.then if self.ev(e.cond, x) else e.orelse
            return self.ev(branch, x)
        if t is Call:
            return self.call(e.index, self.ev(e.arg, x))
        if t is Flip:
            return self.rand.flip(e.p)
        if t is IsEmpty:
            return len(self.ev(e.arg, x)) == 0
        if t is First:
            return self.ev(e.arg, x)[:1]
        if t is Rest:
            return self.ev(e.arg, x)[1:]
        raise TypeError(f"not an expression: {e!r}")


def show(s) -> str:
    """Human-readable string: space-separated tokens, ``∅`` for empty."""
    if s is BOTTOM:
        return "⊥"
    return " ".join(s) if s else EMPTY_SYMBOL


def read_str(text: str) -> Str:
    text = text.strip()
    if text in ("", EMPTY_SYMBOL):
        return ()
    return tuple(text.split())

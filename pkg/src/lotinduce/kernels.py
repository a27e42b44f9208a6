"""Compiled batch evaluator.

A program is flattened into parallel int/float arrays (one row per node) and
run ``n_sim`` times by :func:`run_batch`, an explicit-stack interpreter with no
recursion so it compiles under numba. String values are ``(start, length)``
views into a token arena; ``first``/``rest`` are O(1) view updates and only
``pair`` copies.

The per-sample random stream is SplitMix64 seeded from ``seeds[i]``; flips
are consumed in exactly the order of :func:`lotinduce.expr.evaluate`, so the
two evaluators agree sample-for-sample.
"""
from __future__ import annotations

import hashlib

import numpy as np

from ._jit import njit
from .expr import (
    GOLDEN_GAMMA,
    Arg,
    Atom,
    Call,
    First,
    Flip,
    If,
    IsEmpty,
    Nil,
    Pair,
    Rest,
    DEFAULT_MAX_LEN,
    FactorizedProgram,
    children,
    walk,
)

OP_NIL, OP_ARG, OP_ATOM, OP_FLIP, OP_PAIR, OP_FIRST, OP_REST, OP_EMPTY, OP_IF, OP_CALL = range(10)

_OPCODE = {Nil: OP_NIL, Arg: OP_ARG, Atom: OP_ATOM, Flip: OP_FLIP, Pair: OP_PAIR,
           First: OP_FIRST, Rest: OP_REST, IsEmpty: OP_EMPTY, If: OP_IF, Call: OP_CALL}

FRAME_CAP = 4096
VALUE_CAP = 4096
ARENA_CAP = 1 << 18

_U64 = np.uint64


OP_CONST, OP_BCONST = 10, 11


class CompiledProgram:
    """Flat array encoding of a :class:`FactorizedProgram`.

    Subtrees free of ``x``, ``flip`` and calls are folded to literals when
    they evaluate within ``max_len``; an ``if`` whose condition folds keeps
    only the taken branch. Folding never removes a flip, so the random
    stream of every trace is unchanged. A folded string lives in ``pool``
    (copied into the arena after the atoms); its node stores the arena start
    in ``ival`` and the length in ``kids[:, 0]``.
    """

    __slots__ = ("op", "kids", "pval", "ival", "roots", "symbols", "stochastic", "pool")

    def __init__(self, prog: FactorizedProgram, max_len: int = DEFAULT_MAX_LEN, fold: bool = True):
        symbols: dict = {}
        for body in prog.factors:
            for _, n, _ in walk(body):
                if type(n) is Atom:
                    symbols.setdefault(n.symbol, len(symbols))
        op, kids, pval, ival = [], [], [], []
        pool: list = []
        consts: dict = {}
        memo: dict = {}
        natoms = len(symbols)

        def cval(e):
            # constant value of e (tuple or bool), or None
            key = id(e)
            if key in memo:
                return memo[key]
            t = type(e)
            v = None
            if t is Nil:
                v = ()
            elif t is Atom:
                v = (e.symbol,)
            elif t is Pair:
                a, b = cval(e.left), cval(e.right)
                if a is not None and b is not None and len(a) + len(b) <= max_len:
                    v = a + b
            elif t is First:
                a = cval(e.arg)
                v = None if a is None else a[:1]
            elif t is Rest:
                a = cval(e.arg)
                v = None if a is None else a[1:]
            elif t is IsEmpty:
                a = cval(e.arg)
                v = None if a is None else len(a) == 0
            elif t is If:
                c = cval(e.cond)
                if c is not None:
                    v = cval(e.then if c else e.orelse)
            memo[key] = v
            return v

        def node(code, p=0.0, i=0):
            op.append(code)
            kids.append([-1, -1, -1])
            pval.append(p)
            ival.append(i)
            return len(op) - 1

        def emit(e) -> int:
            t = type(e)
            if fold and t not in (Nil, Atom, Arg, Flip):
                v = cval(e)
                if v is True or v is False:
                    return node(OP_BCONST, i=int(v))
                if v is not None:
                    start = consts.get(v)
                    if start is None:
                        start = natoms + len(pool)
                        consts[v] = start
                        pool.extend(symbols[s] for s in v)
                    idx = node(OP_CONST, i=start)
                    kids[idx][0] = len(v)
                    return idx
                if t is If and cval(e.cond) is not None:
                    return emit(e.then if cval(e.cond) else e.orelse)
            if t is Atom:
                return node(OP_ATOM, i=symbols[e.symbol])
            if t is Flip:
                return node(OP_FLIP, p=e.p)
            idx = node(_OPCODE[t], i=(e.index - 1) if t is Call else 0)
            for k, c in enumerate(children(e)):
                kids[idx][k] = emit(c)
            return idx

        roots = [emit(body) for body in prog.factors]
        self.op = np.asarray(op, dtype=np.int32)
        self.kids = np.asarray(kids, dtype=np.int32).reshape(-1, 3)
        self.pval = np.asarray(pval, dtype=np.float64)
        self.ival = np.asarray(ival, dtype=np.int32)
        self.roots = np.asarray(roots, dtype=np.int32)
        self.pool = np.asarray(pool, dtype=np.int32)
        self.symbols = tuple(sorted(symbols, key=symbols.get))
        self.stochastic = bool(np.any(self.op == OP_FLIP))


def program_seed(seed: int, canonical: str) -> int:
    """Stable 64-bit base seed for a (seed, program) pair."""
    h = hashlib.blake2b(f"{int(seed)}|{canonical}".encode(), digest_size=8)
    return int.from_bytes(h.digest(), "little")


def sim_seeds(base: int, n: int, start: int = 0) -> np.ndarray:
    """Per-sample SplitMix64 seeds: ``mix64(base + (i+1)*gamma)`` for i in [start, start+n)."""
    with np.errstate(over="ignore"):
        i = np.arange(start + 1, start + n + 1, dtype=_U64)
        z = _U64(base) + i * _U64(GOLDEN_GAMMA)
        z = (z ^ (z >> _U64(30))) * _U64(0xBF58476D1CE4E5B9)
        z = (z ^ (z >> _U64(27))) * _U64(0x94D049BB133111EB)
        return z ^ (z >> _U64(31))


@njit(cache=True)
def _next_unit(state):
    # state is a length-1 uint64 array so the update wraps silently in both modes
    state[0] += np.uint64(0x9E3779B97F4A7C15)
    z = state[0]
    z = (z ^ (z >> np.uint64(30))) * np.uint64(0xBF58476D1CE4E5B9)
    z = (z ^ (z >> np.uint64(27))) * np.uint64(0x94D049BB133111EB)
    z = z ^ (z >> np.uint64(31))
    return np.float64(z >> np.uint64(11)) * (1.0 / 9007199254740992.0)


@njit(cache=True)
def run_batch(op, kids, pval, ival, roots, pool, seeds, budget, max_len, natoms, max_bottom,
              out_len, out_tok, out_hash):
    """Evaluate the program once per seed.

    Writes the output length to ``out_len[i]`` (-1 for a bottom trace), the
    tokens to ``out_tok[i, :len]`` and an FNV-1a hash of the output to
    ``out_hash[i]``. Atom ids index ``0..natoms-1``. Stops early once more
    than ``max_bottom`` traces were bottom; returns the number of traces run.
    """
    n = seeds.shape[0]
    arena = np.empty(ARENA_CAP, dtype=np.int32)
    for a in range(natoms):
        arena[a] = a
    for k in range(pool.shape[0]):
        arena[natoms + k] = pool[k]
    f_node = np.empty(FRAME_CAP, dtype=np.int32)
    f_phase = np.empty(FRAME_CAP, dtype=np.int32)
    f_start = np.empty(FRAME_CAP, dtype=np.int32)
    f_len = np.empty(FRAME_CAP, dtype=np.int32)
    v_start = np.empty(VALUE_CAP, dtype=np.int32)
    v_len = np.empty(VALUE_CAP, dtype=np.int32)
    state = np.zeros(1, dtype=np.uint64)
    top = roots[roots.shape[0] - 1]
    n_bottom = 0

    for s in range(n):
        state[0] = seeds[s]
        apos = natoms + pool.shape[0]
        sp = 1
        vp = 0
        f_node[0] = top
        f_phase[0] = 0
        f_start[0] = 0
        f_len[0] = 0
        calls = 1
        bottom = calls > budget
        while sp > 0 and not bottom:
            f = sp - 1
            node = f_node[f]
            o = op[node]
            ph = f_phase[f]
            if o == 0:  # nil
                v_start[vp] = 0
                v_len[vp] = 0
                vp += 1
                sp -= 1
            elif o == 1:  # arg
                v_start[vp] = f_start[f]
                v_len[vp] = f_len[f]
                vp += 1
                sp -= 1
            elif o == 2:  # atom
                v_start[vp] = ival[node]
                v_len[vp] = 1
                vp += 1
                sp -= 1
            elif o == 10:  # folded string
                v_start[vp] = ival[node]
                v_len[vp] = kids[node, 0]
                vp += 1
                sp -= 1
            elif o == 11:  # folded bool
                v_start[vp] = ival[node]
                v_len[vp] = -1
                vp += 1
                sp -= 1
            elif o == 3:  # flip
                u = _next_unit(state)
                v_start[vp] = 1 if u < pval[node] else 0
                v_len[vp] = -1
                vp += 1
                sp -= 1
            elif o == 4:  # pair
                if ph < 2:
                    f_phase[f] = ph + 1
                    if sp >= FRAME_CAP:
                        bottom = True
                        break
                    f_node[sp] = kids[node, ph]
                    f_phase[sp] = 0
                    f_start[sp] = f_start[f]
                    f_len[sp] = f_len[f]
                    sp += 1
                else:
                    vp -= 1
                    rs = v_start[vp]
                    rl = v_len[vp]
                    ls = v_start[vp - 1]
                    ll = v_len[vp - 1]
                    tot = ll + rl
                    if tot > max_len:
                        bottom = True
                        break
                    if rl == 0:
                        pass
                    elif ll == 0:
                        v_start[vp - 1] = rs
                        v_len[vp - 1] = rl
                    else:
                        if apos + tot > ARENA_CAP:
                            bottom = True
                            break
                        for k in range(ll):
                            arena[apos + k] = arena[ls + k]
                        for k in range(rl):
                            arena[apos + ll + k] = arena[rs + k]
                        v_start[vp - 1] = apos
                        v_len[vp - 1] = tot
                        apos += tot
                    sp -= 1
            elif o == 5 or o == 6 or o == 7:  # first / rest / empty
                if ph == 0:
                    f_phase[f] = 1
                    if sp >= FRAME_CAP:
                        bottom = True
                        break
                    f_node[sp] = kids[node, 0]
                    f_phase[sp] = 0
                    f_start[sp] = f_start[f]
                    f_len[sp] = f_len[f]
                    sp += 1
                else:
                    t = vp - 1
                    if o == 5:
                        if v_len[t] > 1:
                            v_len[t] = 1
                    elif o == 6:
                        if v_len[t] > 0:
                            v_start[t] += 1
                            v_len[t] -= 1
                    else:
                        v_start[t] = 1 if v_len[t] == 0 else 0
                        v_len[t] = -1
                    sp -= 1
            elif o == 8:  # if
                if ph == 0:
                    f_phase[f] = 1
                    if sp >= FRAME_CAP:
                        bottom = True
                        break
                    f_node[sp] = kids[node, 0]
                    f_phase[sp] = 0
                    f_start[sp] = f_start[f]
                    f_len[sp] = f_len[f]
                    sp += 1
                else:
                    vp -= 1
                    f_node[f] = kids[node, 1] if v_start[vp] == 1 else kids[node, 2]
                    f_phase[f] = 0
            else:  # call
                if ph == 0:
                    f_phase[f] = 1
                    if sp >= FRAME_CAP:
                        bottom = True
                        break
                    f_node[sp] = kids[node, 0]
                    f_phase[sp] = 0
                    f_start[sp] = f_start[f]
                    f_len[sp] = f_len[f]
                    sp += 1
                else:
                    calls += 1
                    if calls > budget:
                        bottom = True
                        break
                    vp -= 1
                    f_node[f] = roots[ival[node]]
                    f_phase[f] = 0
                    f_start[f] = v_start[vp]
                    f_len[f] = v_len[vp]
            if vp >= VALUE_CAP:
                bottom = True
        if bottom:
            out_len[s] = -1
            out_hash[s] = np.uint64(0)
            n_bottom += 1
            if n_bottom > max_bottom:
                return s + 1
        else:
            ln = v_len[0]
            st = v_start[0]
            out_len[s] = ln
            h = np.uint64(0xCBF29CE484222325) ^ np.uint64(ln)
            for k in range(ln):
                t = arena[st + k]
                out_tok[s, k] = t
                h = (h ^ np.uint64(t + 1)) * np.uint64(0x100000001B3)
            out_hash[s] = h
    return n


def run_compiled(cp: CompiledProgram, seeds: np.ndarray, budget: int, max_len: int,
                 python: bool = False, max_bottom: int | None = None):
    """Run ``cp`` once per seed.

    Returns ``(lengths, tokens, hashes)`` truncated to the traces actually run
    (fewer than ``len(seeds)`` only when ``max_bottom`` triggered).
    """
    n = seeds.shape[0]
    out_len = np.empty(n, dtype=np.int32)
    out_tok = np.zeros((n, max(max_len, 1)), dtype=np.int32)
    out_hash = np.empty(n, dtype=np.uint64)
    fn = run_batch.py_func if python else run_batch
    mb = n if max_bottom is None else max_bottom
    with np.errstate(over="ignore"):
        ran = fn(cp.op, cp.kids, cp.pval, cp.ival, cp.roots, cp.pool, seeds, budget, max_len,
                 len(cp.symbols), mb, out_len, out_tok, out_hash)
    return out_len[:ran], out_tok[:ran], out_hash[:ran]

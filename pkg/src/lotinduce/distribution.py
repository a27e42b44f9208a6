"""Output distributions of programs: Monte Carlo estimate and exact enumeration."""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .expr import (
    BOTTOM,
    DEFAULT_BUDGET,
    DEFAULT_MAX_LEN,
    FactorizedProgram,
    NeedFlip,
    ScriptedFlips,
    evaluate,
    never_halts,
    show,
)
from .kernels import CompiledProgram, program_seed, run_compiled, sim_seeds

MAX_ENUM_FLIPS = 24


@dataclass
class StringDistribution:
    probs: dict  # token tuple -> probability
    bottom_mass: float = 0.0
    method: str = ""
    _renorm: dict | None = field(default=None, repr=False, compare=False)

    def total(self) -> float:
        return math.fsum(self.probs.values()) + self.bottom_mass

    def prob(self, s) -> float:
        return self.probs.get(tuple(s), 0.0)

    def renormalized(self) -> dict:
        """Probabilities conditioned on halting (bottom mass removed)."""
        if self._renorm is None:
            z = math.fsum(self.probs.values())
            self._renorm = {s: p / z for s, p in self.probs.items()} if z > 0 else {}
        return self._renorm

    def support(self) -> list:
        return sorted(self.probs, key=lambda s: (-self.probs[s], len(s), s))

    def describe(self, top: int = 10) -> str:
        parts = [f"{show(s)}:{self.probs[s]:.4f}" for s in self.support()[:top]]
        if self.bottom_mass:
            parts.append(f"⊥:{self.bottom_mass:.4f}")
        return ", ".join(parts)


def total_variation(p: StringDistribution, q: StringDistribution) -> float:
    """TV distance treating bottom as one extra outcome."""
    keys = set(p.probs) | set(q.probs)
    d = math.fsum(abs(p.probs.get(k, 0.0) - q.probs.get(k, 0.0)) for k in keys)
    d += abs(p.bottom_mass - q.bottom_mass)
    return 0.5 * d


def sample_outputs(prog: FactorizedProgram, n_sim: int, seed: int,
                   budget: int = DEFAULT_BUDGET, max_len: int = DEFAULT_MAX_LEN,
                   python: bool = False):
    """Raw per-sample outputs (token tuples or BOTTOM) in simulation order."""
    cp = CompiledProgram(prog, max_len)
    seeds = sim_seeds(program_seed(seed, prog.canonical()), n_sim)
    lens, toks, _ = run_compiled(cp, seeds, budget, max_len, python=python)
    sym = cp.symbols
    return [BOTTOM if ln < 0 else tuple(sym[t] for t in toks[i, :ln]) for i, ln in enumerate(lens)]


def estimate_distribution(prog: FactorizedProgram, n_sim: int, seed: int = 0,
                          budget: int = DEFAULT_BUDGET, max_len: int = DEFAULT_MAX_LEN,
                          python: bool = False, stop_bottom: float | None = None,
                          shortcuts: bool = True) -> StringDistribution:
    """Empirical output distribution from ``n_sim`` seeded runs.

    Sample ``i`` draws its flips from SplitMix64 seeded by a hash of
    ``(seed, canonical form, i)``, so the result is a pure function of the
    inputs. With ``shortcuts`` (the default) two cases skip simulation while
    giving the identical result: programs without any ``flip`` are run once,
    and programs with a forced infinite call chain are all-bottom.

    ``stop_bottom`` abandons the run once the bottom fraction is certain to
    exceed it; the returned distribution then covers only the runs made and
    says so in ``method``.
    """
    if n_sim < 1:
        raise ValueError("n_sim must be >= 1")
    method = f"monte-carlo(n_sim={n_sim}, seed={seed})"
    if shortcuts and never_halts(prog):
        return StringDistribution({}, 1.0, method)
    cp = CompiledProgram(prog, max_len)
    runs = n_sim if (cp.stochastic or not shortcuts) else 1
    seeds = sim_seeds(program_seed(seed, prog.canonical()), runs)
    max_bottom = None
    if stop_bottom is not None and runs > 1:
        max_bottom = int(math.floor(stop_bottom * n_sim))
    lens, toks, hashes = run_compiled(cp, seeds, budget, max_len, python=python,
                                      max_bottom=max_bottom)
    if runs == 1:
        if lens[0] < 0:
            return StringDistribution({}, 1.0, method)
        s = tuple(cp.symbols[t] for t in toks[0, :lens[0]])
        return StringDistribution({s: 1.0}, 0.0, method)
    if len(lens) < runs:
        method = f"monte-carlo(n_sim={n_sim}, seed={seed}, stopped_at={len(lens)})"
        return _tally(cp.symbols, lens, toks, hashes, len(lens), method)
    return _tally(cp.symbols, lens, toks, hashes, n_sim, method)


def _tally(symbols, lens, toks, hashes, n_sim, method) -> StringDistribution:
    ok = lens >= 0
    n_bottom = int(n_sim - ok.sum())
    probs = {}
    if ok.any():
        h = hashes[ok]
        rows = toks[ok]
        ls = lens[ok]
        _, first_idx, inverse, counts = np.unique(h, return_index=True, return_inverse=True,
                                                  return_counts=True)
        inverse = inverse.ravel()
        rep = first_idx[inverse]
        if not (np.array_equal(ls, ls[rep]) and np.array_equal(rows, rows[rep])):
            return _tally_rows(symbols, lens, toks, n_sim, method)
        for i, c in zip(first_idx, counts):
            s = tuple(symbols[t] for t in rows[i, :ls[i]])
            probs[s] = c / n_sim
    return StringDistribution(probs, n_bottom / n_sim, method)


def _tally_rows(symbols, lens, toks, n_sim, method) -> StringDistribution:
    # exact fallback for a 64-bit hash collision
    ok = lens >= 0
    n_bottom = int(n_sim - ok.sum())
    counts: dict = {}
    for ln, row in zip(lens[ok], toks[ok]):
        s = tuple(symbols[t] for t in row[:ln])
        counts[s] = counts.get(s, 0) + 1
    return StringDistribution({s: c / n_sim for s, c in counts.items()}, n_bottom / n_sim, method)


def enumerate_distribution(prog: FactorizedProgram, max_flips: int,
                           budget: int = DEFAULT_BUDGET,
                           max_len: int = DEFAULT_MAX_LEN) -> StringDistribution:
    """Exact law over flip traces of length <= ``max_flips``.

    Depth-first over flip prefixes using the reference tree-walking
    evaluator. Traces that would need more flips, and bottom traces, are
    counted in ``bottom_mass``.
    """
    if max_flips > MAX_ENUM_FLIPS:
        raise ValueError(f"max_flips must be <= {MAX_ENUM_FLIPS}")
    if max_flips < 0:
        raise ValueError("max_flips must be >= 0")
    probs: dict = {}
    bottom = []
    stack = [((), 1.0)]
    while stack:
        prefix, w = stack.pop()
        try:
            out = evaluate(prog, ScriptedFlips(prefix), budget, max_len)
        except NeedFlip as nf:
            if len(prefix) >= max_flips:
                bottom.append(w)
            else:
                stack.append((prefix + (False,), w * (1.0 - nf.p)))
                stack.append((prefix + (True,), w * nf.p))
            continue
        if out is BOTTOM:
            bottom.append(w)
        else:
            probs.setdefault(out, []).append(w)
    return StringDistribution({s: math.fsum(ws) for s, ws in probs.items()},
                              math.fsum(bottom), f"exact(max_flips={max_flips})")

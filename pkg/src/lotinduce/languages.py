"""Target languages: membership oracles, reference samplers and exact top supports.

Every size index follows the geometric law P(n) = (1/2)^n for n >= 1. Strings
longer than the length cap are resampled, so the exact laws reported by
``top_support`` are renormalized over strings that fit.
"""
from __future__ import annotations

import heapq
import itertools
import math
import random
import re
from fractions import Fraction
from functools import cached_property, lru_cache

from .expr import DEFAULT_MAX_LEN, read_str, show
from .kernels import program_seed
from .scoring import Dataset

GOMEZ_SYMBOLS = ("h", "i", "j", "k")
GOMEZ_FRAMES = (("a", "b"), ("c", "b"), ("c", "d"))
GOMEZ_MAX_POOL = len(GOMEZ_SYMBOLS) ** 3
GOMEZ_POOL_SIZES = (2, 4, 6, 9, 12, 18, 24)
LAI_BLOCKS = 12
LAI_BLOCK_SIZE = 12
LAI_CONDITIONS = ("skewed", "staged", "random")


def _geometric(rng, max_n: int) -> int:
    """n >= 1 with P(n) proportional to (1/2)^n, restricted to n <= max_n."""
    while True:
        n = 1
        while rng.random() < 0.5:
            n += 1
        if n <= max_n:
            return n


class TargetLanguage:
    """Base class: subclasses define membership, sampling and exact top support."""

    id = ""
    alphabet: tuple = ()

    def __init__(self, max_len: int = DEFAULT_MAX_LEN):
        self.max_len = max_len

    def __repr__(self) -> str:
        return f"<{self.id}>"

    def contains(self, s) -> bool:
        s = tuple(s)
        return len(s) <= self.max_len and self._member(s)

    def _member(self, s: tuple) -> bool:
        raise NotImplementedError

    def sample(self, rng) -> tuple:
        raise NotImplementedError

    def top_support(self, m: int) -> list:
        """The ``m`` most probable strings with exact probabilities.

        Ordered by descending probability, ties by length then tokens.
        """
        raise NotImplementedError

    def alphabet_list(self) -> list:
        return list(self.alphabet)


def _ranked(pairs, m: int) -> list:
    pairs = sorted(pairs, key=lambda sp: (-sp[1], len(sp[0]), sp[0]))
    return [(s, float(p)) for s, p in pairs[:m]]


class _SizeIndexed(TargetLanguage):
    """Languages with exactly one string per size n >= 1."""

    cap_n: int | None = None

    def string(self, n: int) -> tuple:
        raise NotImplementedError

    def size_of(self, s: tuple) -> int | None:
        raise NotImplementedError

    def _member(self, s):
        n = self.size_of(s)
        return n is not None and n >= 1 and self.string(n) == s and n <= self.max_n

    @cached_property
    def max_n(self) -> int:
        n = 1
        while len(self.string(n + 1)) <= self.max_len and (self.cap_n is None or n + 1 <= self.cap_n):
            n += 1
        return n

    def sample(self, rng):
        return self.string(_geometric(rng, self.max_n))

    def prob_n(self, n: int) -> Fraction:
        N = self.max_n
        if not 1 <= n <= N:
            return Fraction(0)
        return Fraction(1, 2 ** n) / (1 - Fraction(1, 2 ** N))

    def top_support(self, m):
        N = self.max_n
        return _ranked([(self.string(n), self.prob_n(n)) for n in range(1, min(m, N) + 1)], m)


def _blocks(s: tuple, symbols: tuple):
    """Run lengths if ``s`` is symbols[0]^k0 symbols[1]^k1 ..., else None."""
    counts = []
    i = 0
    for sym in symbols:
        j = i
        while j < len(s) and s[j] == sym:
            j += 1
        counts.append(j - i)
        i = j
    return counts if i == len(s) else None


class An(_SizeIndexed):
    id = "An"
    alphabet = ("a",)

    def string(self, n):
        return ("a",) * n

    def size_of(self, s):
        return len(s) if all(t == "a" for t in s) else None


class AnFinite(An):
    def __init__(self, max_n: int = 3, max_len: int = DEFAULT_MAX_LEN):
        if max_n < 1:
            raise ValueError("maxN must be >= 1")
        super().__init__(max_len)
        self.cap_n = max_n
        self.id = f"AnFinite({max_n})"


class AbN(_SizeIndexed):
    id = "AbN"
    alphabet = ("a", "b")

    def string(self, n):
        return ("a", "b") * n

    def size_of(self, s):
        return len(s) // 2 if len(s) % 2 == 0 else None


class AnBn(_SizeIndexed):
    id = "AnBn"
    alphabet = ("a", "b")

    def string(self, n):
        return ("a",) * n + ("b",) * n

    def size_of(self, s):
        c = _blocks(s, ("a", "b"))
        return c[0] if c and c[0] == c[1] else None


class LaiAnBn(AnBn):
    id = "LaiAnBn"


class AnB2n(_SizeIndexed):
    id = "AnB2n"
    alphabet = ("a", "b")

    def string(self, n):
        return ("a",) * n + ("b",) * (2 * n)

    def size_of(self, s):
        c = _blocks(s, ("a", "b"))
        return c[0] if c and 2 * c[0] == c[1] else None


class AnBnCn(_SizeIndexed):
    id = "AnBnCn"
    alphabet = ("a", "b", "c")

    def string(self, n):
        return ("a",) * n + ("b",) * n + ("c",) * n

    def size_of(self, s):
        c = _blocks(s, ("a", "b", "c"))
        return c[0] if c and c[0] == c[1] == c[2] else None


@lru_cache(maxsize=None)
def dyck_words(n: int) -> tuple:
    """All Dyck words with ``n`` a/b pairs, sorted."""
    if n == 0:
        return ((),)
    out = []
    for k in range(n):
        for u in dyck_words(k):
            for v in dyck_words(n - 1 - k):
                out.append(("a",) + u + ("b",) + v)
    return tuple(sorted(out))


class Dyck(TargetLanguage):
    """Balanced a/b words (a opens, b closes), nonempty.

    Sampler: S -> a D b D, and each D stops (emits nothing) with probability
    1/2 or else expands to a D b D. A word with n pairs has probability 4^-n.
    """

    id = "Dyck"
    alphabet = ("a", "b")

    def _member(self, s):
        if not s:
            return False
        depth = 0
        for t in s:
            if t == "a":
                depth += 1
            elif t == "b":
                depth -= 1
                if depth < 0:
                    return False
            else:
                return False
        return depth == 0

    def sample(self, rng):
        while True:
            out = []
            todo = ["D", "b", "D"]  # reversed: next symbol at the end
            out.append("a")
            while todo and len(out) <= self.max_len:
                sym = todo.pop()
                if sym != "D":
                    out.append(sym)
                elif rng.random() >= 0.5:
                    out.append("a")
                    todo.extend(("D", "b", "D"))
            if not todo and len(out) <= self.max_len:
                return tuple(out)

    def _z(self) -> Fraction:
        return sum((math.comb(2 * n, n) // (n + 1) * Fraction(1, 4 ** n)
                    for n in range(1, self.max_len // 2 + 1)), Fraction(0))

    def top_support(self, m):
        z = self._z()
        out = []
        n = 1
        while len(out) < m and 2 * n <= self.max_len:
            p = Fraction(1, 4 ** n) / z
            out.extend((w, p) for w in dyck_words(n))
            n += 1
        return _ranked(out, m)


class _HalfWord(TargetLanguage):
    """x + f(x) for x in {a,b}^n, n geometric and x uniform."""

    alphabet = ("a", "b")

    def second(self, x: tuple) -> tuple:
        raise NotImplementedError

    def _member(self, s):
        if not s or len(s) % 2 or any(t not in self.alphabet for t in s):
            return False
        h = len(s) // 2
        return s[h:] == self.second(s[:h])

    def sample(self, rng):
        n = _geometric(rng, self.max_len // 2)
        x = tuple(rng.choice(self.alphabet) for _ in range(n))
        return x + self.second(x)

    def top_support(self, m):
        N = self.max_len // 2
        z = 1 - Fraction(1, 2 ** N)
        out = []
        n = 1
        while len(out) < m and n <= N:
            p = Fraction(1, 4 ** n) / z
            out.extend((x + self.second(x), p) for x in itertools.product(self.alphabet, repeat=n))
            n += 1
        return _ranked(out, m)


class XX(_HalfWord):
    id = "XX"

    def second(self, x):
        return x


class XXR(_HalfWord):
    id = "XXR"

    def second(self, x):
        return x[::-1]


class AnBmCnDm(TargetLanguage):
    """a^n b^m c^n d^m with n and m independent geometric indices."""

    id = "AnBmCnDm"
    alphabet = ("a", "b", "c", "d")

    def _member(self, s):
        c = _blocks(s, self.alphabet)
        return bool(c) and c[0] == c[2] >= 1 and c[1] == c[3] >= 1

    def _pairs(self):
        lim = self.max_len // 2
        return [(n, m) for n in range(1, lim) for m in range(1, lim) if n + m <= lim]

    @staticmethod
    def string(n, m):
        return ("a",) * n + ("b",) * m + ("c",) * n + ("d",) * m

    def sample(self, rng):
        while True:
            n = _geometric(rng, self.max_len)
            m = _geometric(rng, self.max_len)
            if 2 * (n + m) <= self.max_len:
                return self.string(n, m)

    def top_support(self, m_top):
        pairs = self._pairs()
        z = sum(Fraction(1, 2 ** (n + m)) for n, m in pairs)
        return _ranked([(self.string(n, m), Fraction(1, 2 ** (n + m)) / z) for n, m in pairs], m_top)


# the weighted part-of-speech grammar; right-hand sides are symbol tuples
ENGLISH_RULES = {
    "S": ((("NP", "VP"), 4),),
    "NP": ((("n",), 2), (("d", "n"), 1), (("d", "AP", "n"), 1)),
    "AP": ((("a",), 3), (("a", "AP"), 1)),
    "VP": ((("v",), 2), (("v", "NP"), 1), (("v", "that", "S"), 1)),
}
IF_THEN_PROB = Fraction(1, 5)


def _english_probs():
    out = {}
    for nt, rules in ENGLISH_RULES.items():
        z = sum(w for _, w in rules)
        out[nt] = tuple((rhs, Fraction(w, z)) for rhs, w in rules)
    return out


ENGLISH = _english_probs()


def english_sample(rng, max_len: int = DEFAULT_MAX_LEN, if_then: bool = False) -> tuple:
    """Part-of-speech string from the weighted grammar; overlong draws are redrawn."""
    while True:
        if if_then and rng.random() < float(IF_THEN_PROB):
            s = ("if",) + _expand("S", rng) + ("then",) + _expand("S", rng)
        else:
            s = _expand("S", rng)
        if len(s) <= max_len:
            return s


def _expand(sym: str, rng) -> tuple:
    rules = ENGLISH.get(sym)
    if rules is None:
        return (sym,)
    u = rng.random()
    acc = 0.0
    for rhs, p in rules:
        acc += float(p)
        if u < acc:
            break
    out = ()
    for t in rhs:
        out += _expand(t, rng)
    return out


def _parse(sym: str, s: tuple, i: int):
    """All end positions of ``sym`` derivations starting at ``i``."""
    rules = ENGLISH.get(sym)
    if rules is None:
        return [i + 1] if i < len(s) and s[i] == sym else []
    ends = []
    for rhs, _ in rules:
        pos = [i]
        for t in rhs:
            pos = [e for p in pos for e in _parse(t, s, p)]
            if not pos:
                break
        ends.extend(pos)
    return ends


def _english_lengths(max_len: int) -> dict:
    """Length distribution of every nonterminal, truncated at ``max_len``."""
    L = {nt: [0.0] * (max_len + 1) for nt in ENGLISH}

    def term(sym):
        if sym in L:
            return L[sym]
        v = [0.0] * (max_len + 1)
        v[1] = 1.0
        return v

    def conv(a, b):
        out = [0.0] * (max_len + 1)
        for i, x in enumerate(a):
            if x:
                for j in range(max_len + 1 - i):
                    out[i + j] += x * b[j]
        return out

    for _ in range(max_len + 2):
        new = {}
        for nt, rules in ENGLISH.items():
            acc = [0.0] * (max_len + 1)
            for rhs, p in rules:
                v = [1.0] + [0.0] * max_len
                for t in rhs:
                    v = conv(v, term(t))
                acc = [x + float(p) * y for x, y in zip(acc, v)]
            new[nt] = acc
        L = new
    return L


class SimpleEnglish(TargetLanguage):
    """Strings of the weighted part-of-speech grammar.

    With ``if_then`` the whole string is ``if S then S`` with probability
    1/5 instead of a plain ``S``.
    """

    def __init__(self, if_then: bool = False, max_len: int = DEFAULT_MAX_LEN):
        super().__init__(max_len)
        self.if_then = if_then
        self.id = "SimpleEnglish(if_then)" if if_then else "SimpleEnglish"
        self.alphabet = ("d", "n", "a", "v", "that") + (("if", "then") if if_then else ())

    def _is_s(self, s):
        return len(s) in _parse("S", s, 0)

    def _member(self, s):
        if self._is_s(s):
            return True
        if self.if_then and s and s[0] == "if":
            for k in range(2, len(s)):
                if s[k] == "then" and self._is_s(s[1:k]) and self._is_s(s[k + 1:]):
                    return True
        return False

    def sample(self, rng):
        return english_sample(rng, self.max_len, self.if_then)

    def _z(self) -> float:
        ls = _english_lengths(self.max_len)["S"]
        z_plain = sum(ls)
        if not self.if_then:
            return z_plain
        wrapped = sum(ls[i] * ls[j] for i in range(len(ls)) for j in range(len(ls))
                      if i + j + 2 <= self.max_len)
        return (1 - float(IF_THEN_PROB)) * z_plain + float(IF_THEN_PROB) * wrapped

    def _derivations(self):
        """Complete strings in order of non-increasing derivation probability."""
        # the grammar is unambiguous, so each string has exactly one derivation
        start = ("S",)
        heap = [(-Fraction(1), start)]
        while heap:
            negp, form = heapq.heappop(heap)
            k = next((i for i, t in enumerate(form) if t in ENGLISH), None)
            if k is None:
                yield form, -negp
                continue
            for rhs, p in ENGLISH[form[k]]:
                new = form[:k] + rhs + form[k + 1:]
                if len(new) <= self.max_len:
                    heapq.heappush(heap, (negp * p, new))

    def top_support(self, m):
        z = self._z()
        plain = []
        scale = (1 - IF_THEN_PROB) if self.if_then else Fraction(1)
        for s, p in self._derivations():
            if len(plain) >= m and p < plain[m - 1][1]:
                break
            plain.append((s, p))
        items = [(s, p * scale) for s, p in plain]
        if self.if_then:
            base = plain[:m]
            for (s1, p1), (s2, p2) in itertools.product(base, base):
                w = ("if",) + s1 + ("then",) + s2
                if len(w) <= self.max_len:
                    items.append((w, IF_THEN_PROB * p1 * p2))
        return _ranked([(s, p / Fraction(z)) for s, p in items], m)


def gomez_pool(pool_size: int) -> tuple:
    """First ``pool_size`` length-3 middles over h<i<j<k in lexicographic order."""
    if not 2 <= pool_size <= GOMEZ_MAX_POOL:
        raise ValueError(f"pool size must be in 2..{GOMEZ_MAX_POOL}")
    return tuple(itertools.islice(itertools.product(GOMEZ_SYMBOLS, repeat=3), pool_size))


class GomezAXB(TargetLanguage):
    """Frames aXb, cXb, cXd around a middle X drawn uniformly from the pool."""

    alphabet = ("a", "b", "c", "d") + GOMEZ_SYMBOLS

    def __init__(self, pool_size: int = 2, max_len: int = DEFAULT_MAX_LEN):
        super().__init__(max_len)
        self.pool = gomez_pool(pool_size)
        self.pool_set = frozenset(self.pool)
        self.id = f"GomezAXB({pool_size})"

    def _member(self, s):
        return len(s) == 5 and (s[0], s[4]) in GOMEZ_FRAMES and s[1:4] in self.pool_set

    def sample(self, rng):
        f, l = GOMEZ_FRAMES[int(rng.random() * 3)]
        return (f,) + self.pool[int(rng.random() * len(self.pool))] + (l,)

    def top_support(self, m):
        p = Fraction(1, 3 * len(self.pool))
        return _ranked([((f,) + x + (l,), p) for f, l in GOMEZ_FRAMES for x in self.pool], m)


_SIMPLE = {cls.id: cls for cls in (An, AbN, AnBn, AnB2n, Dyck, AnBnCn, XX, XXR, AnBmCnDm, LaiAnBn)}
LANGUAGE_IDS = tuple(_SIMPLE) + ("AnFinite(n)", "SimpleEnglish", "SimpleEnglish(if_then)", "GomezAXB(n)")
_ID_RE = re.compile(r"^\s*([A-Za-z0-9]+)\s*(?:\(\s*([^)]*?)\s*\))?\s*$")


def get_language(lang_id: str, max_len: int = DEFAULT_MAX_LEN) -> TargetLanguage:
    """Build a target from its id, e.g. ``AnBn``, ``AnFinite(3)``, ``GomezAXB(12)``."""
    m = _ID_RE.match(lang_id)
    if not m:
        raise ValueError(f"bad language id {lang_id!r}")
    name, arg = m.group(1), m.group(2)
    if name in _SIMPLE and arg is None:
        return _SIMPLE[name](max_len)
    if name == "AnFinite" and arg and arg.isdigit():
        return AnFinite(int(arg), max_len)
    if name == "GomezAXB" and arg and arg.isdigit():
        return GomezAXB(int(arg), max_len)
    if name == "SimpleEnglish" and arg in (None, "if_then"):
        return SimpleEnglish(arg == "if_then", max_len)
    raise ValueError(f"unknown language id {lang_id!r}; known: {', '.join(LANGUAGE_IDS)}")


def _lang(lang) -> TargetLanguage:
    return get_language(lang) if isinstance(lang, str) else lang


def as_tokens(text: str, alphabet=()) -> tuple:
    """Tokens of ``text``: space separated, or one token per character when
    the text is a single run that is not itself an alphabet token."""
    if not text.strip() or any(c.isspace() for c in text.strip()) or text.strip() in alphabet:
        return read_str(text)
    return read_str(" ".join(text.strip()))


def membership(lang, s) -> bool:
    lang = _lang(lang)
    if isinstance(s, str):
        s = as_tokens(s, lang.alphabet)
    return lang.contains(s)


def sample_string(lang, rng) -> tuple:
    return _lang(lang).sample(rng)


def dataset_rng(tag: str, seed: int) -> random.Random:
    return random.Random(program_seed(seed, f"data:{tag}"))


def generate_dataset(lang, count: int, seed: int) -> Dataset:
    """``count`` independent draws; a smaller count gives a prefix of a larger one."""
    if count < 0:
        raise ValueError("count must be >= 0")
    lang = _lang(lang)
    rng = dataset_rng(lang.id, seed)
    return Dataset(lang.sample(rng) for _ in range(count))


def _largest_remainder(total: int, ratios) -> list:
    z = sum(ratios)
    raw = [Fraction(total * r, z) for r in ratios]
    base = [int(x) for x in raw]
    order = sorted(range(len(ratios)), key=lambda i: (-(raw[i] - base[i]), i))
    for i in order[: total - sum(base)]:
        base[i] += 1
    return base


def lai_blocks(condition: str, seed: int) -> list:
    """Twelve blocks of twelve a^n b^n items with n in 1..3.

    skewed: every block holds n=1,2,3 in ratio 4:2:1 (7/3/2 items).
    staged: blocks 1-4 only n=1, blocks 5-8 n uniform in {1,2}, blocks 9-12
    n uniform in {1,2,3}. random: n uniform in {1,2,3} throughout.
    """
    if condition not in LAI_CONDITIONS:
        raise ValueError(f"condition must be one of {LAI_CONDITIONS}")
    rng = dataset_rng(f"lai:{condition}", seed)
    lang = AnBn()
    blocks = []
    for b in range(LAI_BLOCKS):
        if condition == "skewed":
            counts = _largest_remainder(LAI_BLOCK_SIZE, (4, 2, 1))
            ns = [n for n, c in zip((1, 2, 3), counts) for _ in range(c)]
            rng.shuffle(ns)
        else:
            top = 3 if condition == "random" else 1 + b // 4
            ns = [1 + int(rng.random() * top) for _ in range(LAI_BLOCK_SIZE)]
        blocks.append(Dataset(lang.string(n) for n in ns))
    return blocks


def gomez_dataset(pool_size: int, count: int, seed: int) -> Dataset:
    lang = GomezAXB(pool_size)
    rng = dataset_rng(lang.id, seed)
    return Dataset(lang.sample(rng) for _ in range(count))


def dataset_to_text(data: Dataset, lang_id: str, seed: int) -> str:
    lines = [f"# language={lang_id} count={data.size} seed={seed}"]
    lines.extend(show(s) for s in data)
    return "\n".join(lines) + "\n"


def dataset_from_text(text: str) -> Dataset:
    items = []
    for line in text.splitlines():
        if line.startswith("#") or not line.strip():
            continue
        items.append(read_str(line))
    return Dataset(items)

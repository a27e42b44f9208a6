"""Run configuration: a flat ``key = value`` text file plus profile defaults."""
from __future__ import annotations

import hashlib
from dataclasses import asdict, dataclass, fields, replace

from .expr import DEFAULT_BUDGET, DEFAULT_MAX_LEN, MAX_FACTORS, PROBABILITIES
from .grammar import BOOL_PRODUCTIONS, LIST_PRODUCTIONS, ExpressionGrammar
from .inference import ChainConfig
from .languages import GOMEZ_POOL_SIZES, get_language
from .scoring import ScoreParams

PROFILES = {"desk": (4, 20000), "paper": (12, 50000)}
DEFAULT_SCHEDULE = (1, 2, 5, 10, 25, 50, 100)
EXPERIMENTS = ("induce", "curve", "infinite", "lai", "gomez", "english")


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class RunConfig:
    experiment: str = "induce"
    language: str = "An"
    data_size: int = 10
    schedule: tuple = DEFAULT_SCHEDULE
    profile: str = "desk"
    chains: int | None = None  # None: taken from the profile
    steps: int | None = None
    top_n: int = 100
    factor_move_prob: float = 0.2
    max_factors: int = MAX_FACTORS
    temperature: float = 1.0
    n_sim: int = 1024
    eval_n_sim: int = 2048
    outlier_log_penalty: float = -1000.0
    bottom_reject_threshold: float = 0.5
    budget: int = DEFAULT_BUDGET
    max_len: int = DEFAULT_MAX_LEN
    max_depth: int = 20
    weights: tuple = ()  # (production, weight) pairs overriding the uniform default
    recall_m: int = 25
    lai_steps_per_block: int | None = None  # None: steps // 12
    gomez_pool_sizes: tuple = GOMEZ_POOL_SIZES
    gomez_count: int = 24
    if_then: bool = False
    seed: int = 0
    workers: int = 1
    out: str = "out"

    def __post_init__(self):
        if self.experiment not in EXPERIMENTS:
            raise ConfigError(f"experiment must be one of {EXPERIMENTS}")
        if self.profile not in PROFILES:
            raise ConfigError(f"profile must be one of {tuple(PROFILES)}")
        try:
            get_language(self.language, self.max_len)
        except ValueError as e:
            raise ConfigError(str(e)) from None
        s = tuple(self.schedule)
        if not s or any(b <= a for a, b in zip(s, s[1:])) or s[0] < 0:
            raise ConfigError("schedule must be nonempty, non-negative and strictly increasing")
        if self.data_size < 0 or self.gomez_count < 1:
            raise ConfigError("dataset sizes must be positive")
        if self.recall_m < 1 or self.workers < 1:
            raise ConfigError("recall_m and workers must be >= 1")
        for name, _ in self.weights:
            if name not in LIST_PRODUCTIONS + BOOL_PRODUCTIONS and _prob(name) is None:
                raise ConfigError(f"unknown production weight {name!r}")
        try:
            self.chain_config()
            self.score_params()
            self.grammar(("a",))
        except ValueError as e:
            raise ConfigError(str(e)) from None

    # -- derived objects --------------------------------------------------

    def resolved_chains(self) -> int:
        return self.chains if self.chains is not None else PROFILES[self.profile][0]

    def resolved_steps(self) -> int:
        return self.steps if self.steps is not None else PROFILES[self.profile][1]

    def chain_config(self, seed: int | None = None) -> ChainConfig:
        return ChainConfig(steps=self.resolved_steps(), chains=self.resolved_chains(),
                           top_n=self.top_n, factor_move_prob=self.factor_move_prob,
                           max_factors=self.max_factors, temperature=self.temperature,
                           seed=self.seed if seed is None else seed)

    def score_params(self) -> ScoreParams:
        return ScoreParams(n_sim=self.n_sim, eval_n_sim=self.eval_n_sim,
                           outlier_log_penalty=self.outlier_log_penalty,
                           bottom_reject_threshold=self.bottom_reject_threshold,
                           budget=self.budget, max_len=self.max_len)

    def grammar(self, alphabet) -> ExpressionGrammar:
        lw = dict.fromkeys(LIST_PRODUCTIONS, 1.0)
        bw = dict.fromkeys(BOOL_PRODUCTIONS, 1.0)
        pw = dict.fromkeys(PROBABILITIES, 1.0)
        for name, w in self.weights:
            if name in lw:
                lw[name] = w
            elif name in bw:
                bw[name] = w
            else:
                pw[_prob(name)] = w
        return ExpressionGrammar(tuple(alphabet), lw, bw, pw, self.max_depth)

    def lai_block_steps(self) -> int:
        if self.lai_steps_per_block is not None:
            return self.lai_steps_per_block
        return max(1, self.resolved_steps() // 12)

    # -- identity ---------------------------------------------------------

    def identity(self) -> dict:
        """Everything that affects results (output location and parallelism excluded)."""
        d = asdict(self)
        d.pop("out")
        d.pop("workers")
        d["chains"] = self.resolved_chains()
        d["steps"] = self.resolved_steps()
        return d

    def config_hash(self) -> str:
        text = "\n".join(f"{k}={_fmt(v)}" for k, v in sorted(self.identity().items()))
        return hashlib.sha256(text.encode()).hexdigest()[:16]

    def dumps(self) -> str:
        out = []
        for f in fields(self):
            v = getattr(self, f.name)
            if f.name == "weights":
                out.extend(f"weight.{k} = {_fmt(w)}" for k, w in v)
            elif v is not None:
                out.append(f"{f.name} = {_fmt(v)}")
        return "\n".join(out) + "\n"


def _prob(name: str):
    try:
        p = round(float(name), 1)
    except ValueError:
        return None
    return p if p in PROBABILITIES else None


def _fmt(v) -> str:
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, tuple):
        if v and isinstance(v[0], tuple):
            return ",".join(f"{a}:{_fmt(b)}" for a, b in v)
        return ",".join(_fmt(x) for x in v)
    if isinstance(v, float):
        return repr(v)
    return str(v)


_FIELD_TYPES = {f.name: f.type for f in fields(RunConfig)}


def _coerce(key: str, raw: str):
    t = _FIELD_TYPES[key]
    raw = raw.strip()
    if key in ("schedule", "gomez_pool_sizes"):
        return tuple(int(x) for x in raw.replace(" ", "").split(",") if x)
    if t == "bool":
        if raw.lower() in ("1", "true", "yes", "on"):
            return True
        if raw.lower() in ("0", "false", "no", "off"):
            return False
        raise ValueError(f"not a boolean: {raw!r}")
    if t == "int" or t.startswith("int |"):
        return None if raw.lower() == "none" else int(raw)
    if t == "float":
        return float(raw)
    return raw


def parse_assignments(pairs) -> dict:
    """``(key, raw value)`` pairs to RunConfig keyword arguments."""
    kw: dict = {}
    weights: dict = {}
    for key, raw in pairs:
        key = key.strip().replace("-", "_")
        if key.startswith("weight."):
            try:
                weights[key[len("weight."):]] = float(raw)
            except ValueError:
                raise ConfigError(f"bad weight value {raw!r} for {key}") from None
            continue
        if key not in _FIELD_TYPES or key == "weights":
            raise ConfigError(f"unknown config key {key!r}")
        try:
            kw[key] = _coerce(key, raw)
        except ValueError as e:
            raise ConfigError(f"bad value for {key}: {e}") from None
    if weights:
        kw["weights"] = tuple(sorted(weights.items()))
    return kw


def parse_config_text(text: str) -> list:
    pairs = []
    for n, line in enumerate(text.splitlines(), start=1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {n}: expected key = value")
        k, v = line.split("=", 1)
        pairs.append((k.strip(), v.strip()))
    return pairs


def load_config(path: str | None = None, overrides=(), **flags) -> RunConfig:
    """Config file, then the explicit flags, then ``key=value`` overrides.

    A ``profile`` flag discards chains and steps set in the file so the
    profile's values apply; ``--set chains=...`` still wins over both.
    """
    kw: dict = {}
    if path:
        with open(path, encoding="utf-8") as fh:
            kw = parse_assignments(parse_config_text(fh.read()))
    for k, v in flags.items():
        if v is None:
            continue
        kw[k] = v
        if k == "profile":
            kw.pop("chains", None)
            kw.pop("steps", None)
    kw.update(parse_assignments(overrides))
    if "weights" in kw and path:
        kw["weights"] = _merge_weights(path, kw["weights"])
    try:
        return RunConfig(**kw)
    except TypeError as e:
        raise ConfigError(str(e)) from None


def _merge_weights(path: str, extra: tuple) -> tuple:
    with open(path, encoding="utf-8") as fh:
        base = dict(parse_assignments(parse_config_text(fh.read())).get("weights", ()))
    base.update(extra)
    return tuple(sorted(base.items()))


def with_overrides(cfg: RunConfig, **kw) -> RunConfig:
    return replace(cfg, **kw)

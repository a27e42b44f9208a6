"""Experiment orchestration and output files."""
from __future__ import annotations

import csv
import io
import os
import sys
import time
from dataclasses import replace

from . import __version__
from .config import RunConfig
from .inference import Chain, HypothesisStore, run_inference
from .languages import (
    LAI_CONDITIONS,
    AnBn,
    GomezAXB,
    dataset_to_text,
    generate_dataset,
    get_language,
    gomez_dataset,
    lai_blocks,
)
from .metrics import (
    EvalCache,
    dependency_consistent,
    infinite_leaning,
    map_f,
    posterior_mass_where,
    score_store,
)
from .scoring import Dataset

CURVE_COLUMNS = ("data_size", "weighted_f", "map_f", "best_f", "weighted_precision",
                 "weighted_recall", "n_hypotheses")
INFINITE_COLUMNS = ("language", "data_size", "infinite_mass")
LAI_COLUMNS = ("condition", "block", "mcmc_steps", "map_f", "weighted_f")
GOMEZ_COLUMNS = ("pool_size", "data_size", "dependency_mass", "map_consistent")


EXPERIMENT_LANGUAGES = {"infinite": "AnFinite(3),An", "lai": "AnBn", "gomez": "GomezAXB"}


def header_lines(cfg: RunConfig, what: str, language: str | None = None) -> list:
    return [f"lotinduce {__version__} {what}",
            f"config={cfg.config_hash()} seed={cfg.seed} language={language or cfg.language} "
            f"chains={cfg.resolved_chains()} steps={cfg.resolved_steps()}"]


def atomic_write(path: str, text: str) -> None:
    """Write to a sibling temporary file, then rename over ``path``."""
    d = os.path.dirname(os.path.abspath(path))
    os.makedirs(d, exist_ok=True)
    tmp = f"{path}.tmp{os.getpid()}"
    with open(tmp, "w", encoding="utf-8", newline="") as fh:
        fh.write(text)
    os.replace(tmp, path)


def _fmt(v) -> str:
    return f"{v:.6f}" if isinstance(v, float) else str(v)


def csv_text(cfg: RunConfig, what: str, columns, rows, language: str | None = None) -> str:
    buf = io.StringIO()
    for line in header_lines(cfg, what, language):
        buf.write(f"# {line}\n")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(columns)
    for r in rows:
        w.writerow([_fmt(r[c]) for c in columns])
    return buf.getvalue()


class Timer:
    """Wall-clock notes go to stderr so output files stay reproducible."""

    def __init__(self, enabled: bool):
        self.enabled = enabled
        self.t0 = time.perf_counter()

    def note(self, msg: str) -> None:
        if self.enabled:
            print(f"[{time.perf_counter() - self.t0:8.1f}s] {msg}", file=sys.stderr, flush=True)


def induce(cfg: RunConfig, data: Dataset, alphabet, seed: int | None = None) -> HypothesisStore:
    return run_inference(cfg.chain_config(seed), data, cfg.grammar(alphabet), cfg.score_params(),
                         workers=cfg.workers)


def _store_text(cfg: RunConfig, store: HypothesisStore, note: str) -> str:
    return store.dumps(header_lines(cfg, note))


def _curve_point(cfg, lang, data, cache, size):
    store = induce(cfg, data, lang.alphabet)
    sc = score_store(store, lang, cfg.recall_m, cache)
    row = {"data_size": size, "weighted_f": sc.weighted_f, "map_f": sc.map_f, "best_f": sc.best_f,
           "weighted_precision": sc.weighted_precision, "weighted_recall": sc.weighted_recall,
           "n_hypotheses": len(store)}
    return store, row


def cmd_induce(cfg: RunConfig, timing: bool = False) -> dict:
    """Dataset, hypothesis store and one-row summary for ``cfg.language``."""
    t = Timer(timing)
    lang = get_language(cfg.language, cfg.max_len)
    data = generate_dataset(lang, cfg.data_size, cfg.seed)
    cache = EvalCache(cfg.score_params(), cfg.seed)
    store, row = _curve_point(cfg, lang, data, cache, cfg.data_size)
    t.note(f"induce {lang.id} n={cfg.data_size}")
    paths = {
        "data": os.path.join(cfg.out, "data.txt"),
        "store": os.path.join(cfg.out, "store.txt"),
        "summary": os.path.join(cfg.out, "summary.csv"),
    }
    atomic_write(paths["data"], dataset_to_text(data, lang.id, cfg.seed))
    atomic_write(paths["store"], _store_text(cfg, store, "hypothesis store"))
    atomic_write(paths["summary"], csv_text(cfg, "induce summary", CURVE_COLUMNS, [row]))
    return {"paths": paths, "row": row, "store": store}


def learning_curve(cfg: RunConfig, lang, timer: Timer | None = None, store_dir: str | None = None) -> list:
    """One row per schedule size; every dataset is a prefix of the largest one."""
    full = generate_dataset(lang, cfg.schedule[-1], cfg.seed)
    cache = EvalCache(cfg.score_params(), cfg.seed)
    rows = []
    for size in cfg.schedule:
        store, row = _curve_point(cfg, lang, full.prefix(size), cache, size)
        rows.append(row)
        if store_dir:
            atomic_write(os.path.join(store_dir, f"{_slug(lang.id)}_{size}.txt"),
                         _store_text(cfg, store, f"hypothesis store data_size={size}"))
        if timer:
            timer.note(f"curve {lang.id} n={size} wF={row['weighted_f']:.3f}")
    return rows


def _slug(lang_id: str) -> str:
    return lang_id.replace("(", "_").replace(")", "")


def cmd_curve(cfg: RunConfig, timing: bool = False) -> str:
    lang = get_language(cfg.language, cfg.max_len)
    rows = learning_curve(cfg, lang, Timer(timing), os.path.join(cfg.out, "stores"))
    path = os.path.join(cfg.out, f"curve_{_slug(lang.id)}.csv")
    atomic_write(path, csv_text(cfg, f"learning curve {lang.id}", CURVE_COLUMNS, rows))
    return path


def infinite_rows(cfg: RunConfig, timer: Timer | None = None) -> list:
    rows = []
    cache = EvalCache(cfg.score_params(), cfg.seed)
    for lid in ("AnFinite(3)", "An"):
        lang = get_language(lid, cfg.max_len)
        full = generate_dataset(lang, cfg.schedule[-1], cfg.seed)
        for size in cfg.schedule:
            store = induce(cfg, full.prefix(size), ("a",))
            mass = posterior_mass_where(store, lambda h: not h.rejected
                                        and infinite_leaning(cache.dist(h)))
            rows.append({"language": lid, "data_size": size, "infinite_mass": mass})
            if timer:
                timer.note(f"infinite {lid} n={size} mass={mass:.3f}")
    return rows


def lai_rows(cfg: RunConfig, timer: Timer | None = None) -> list:
    """Warm-started chains see the cumulative data block by block.

    Every condition gets the same number of steps per block.
    """
    lang = AnBn(cfg.max_len)
    grammar = cfg.grammar(lang.alphabet)
    params = cfg.score_params()
    chain_cfg = cfg.chain_config()
    per_block = cfg.lai_block_steps()
    cache = EvalCache(params, cfg.seed)
    rows = []
    for cond in LAI_CONDITIONS:
        blocks = lai_blocks(cond, cfg.seed)
        data = Dataset()
        chains = []
        for b, block in enumerate(blocks, start=1):
            data = data + block
            if not chains:
                chains = [Chain(chain_cfg, data, grammar, params, i) for i in range(chain_cfg.chains)]
            else:
                for ch in chains:
                    ch.set_data(data)
            for ch in chains:
                ch.run(per_block)
            store = HypothesisStore(h for ch in chains for h in ch.top.best())
            rows.append({"condition": cond, "block": b, "mcmc_steps": b * per_block,
                         "map_f": map_f(store, lang, cfg.recall_m, cache),
                         "weighted_f": score_store(store, lang, cfg.recall_m, cache).weighted_f})
        if timer:
            timer.note(f"lai {cond} final mapF={rows[-1]['map_f']:.3f}")
    return rows


def gomez_rows(cfg: RunConfig, timer: Timer | None = None) -> list:
    rows = []
    cache = EvalCache(cfg.score_params(), cfg.seed)
    for pool in cfg.gomez_pool_sizes:
        lang = GomezAXB(pool, cfg.max_len)
        data = gomez_dataset(pool, cfg.gomez_count, cfg.seed)
        store = induce(cfg, data, lang.alphabet)
        mass = posterior_mass_where(store, lambda h: not h.rejected
                                    and dependency_consistent(cache.dist(h)))
        top = store.map
        rows.append({"pool_size": pool, "data_size": data.size, "dependency_mass": mass,
                     "map_consistent": int(not top.rejected and dependency_consistent(cache.dist(top)))})
        if timer:
            timer.note(f"gomez pool={pool} mass={mass:.3f}")
    return rows


def cmd_experiment(cfg: RunConfig, experiment: str, timing: bool = False) -> str:
    t = Timer(timing)
    if experiment == "infinite":
        rows, cols = infinite_rows(cfg, t), INFINITE_COLUMNS
    elif experiment == "lai":
        rows, cols = lai_rows(cfg, t), LAI_COLUMNS
    elif experiment == "gomez":
        rows, cols = gomez_rows(cfg, t), GOMEZ_COLUMNS
    elif experiment == "english":
        ecfg = replace(cfg, language="SimpleEnglish(if_then)" if cfg.if_then else "SimpleEnglish")
        lang = get_language(ecfg.language, cfg.max_len)
        rows, cols = learning_curve(ecfg, lang, t), CURVE_COLUMNS
        cfg = ecfg
    else:
        raise ValueError(f"unknown experiment {experiment!r}")
    path = os.path.join(cfg.out, f"experiment_{experiment}.csv")
    atomic_write(path, csv_text(cfg, f"experiment {experiment}", cols, rows,
                                EXPERIMENT_LANGUAGES.get(experiment)))
    return path


def inspect_store(path: str, top: int = 10) -> str:
    with open(path, encoding="utf-8") as fh:
        text = fh.read()
    store = HypothesisStore.loads(text)
    lines = [line for line in text.splitlines() if line.startswith("# ") and "\t" not in line]
    lines.append(f"{len(store)} hypotheses")
    lines.append(f"{'weight':>8} {'log_post':>10} {'log_prior':>10} {'log_lik':>10}  program")
    for w, h in list(store)[:top]:
        lines.append(f"{w:8.4f} {h.log_post:10.3f} {h.log_prior:10.3f} {h.log_lik:10.3f}  {h.canonical}")
    return "\n".join(lines) + "\n"

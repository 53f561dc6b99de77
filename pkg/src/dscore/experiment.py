"""Seeded end-to-end experiments: generate a network, sample, recover an
order, post-process and score every (replicate, sample size) cell."""

from __future__ import annotations

import copy
import csv
import hashlib
import io
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

import numpy as np

from . import graph as G
from .bayesnet import (
    gen_condition2_bn,
    gen_dirichlet_cpts,
    gen_uniform_cpts,
    random_cards,
    sample,
    verify_condition2,
)
from .diagnosis import ci_tester, diagnose_order, estimate_in_degrees
from .errors import ConfigError, InputError
from .fileio import atomic_write_text, load_network, write_json
from .metrics import evaluate
from .ordersearch import exact_order_search, order_search
from .randomness import parse_measure
from .structure import FamilyScorer, edge_insertion, forbidden_edges, hill_climb, parse_score, prune_with_order

_MASK64 = (1 << 64) - 1

DEFAULT_CONFIG = {
    "seed": 0,
    "replicates": 10,
    "graph": {"kind": "er", "d": 8, "expected_edges": 8, "attach_m": 2, "card_range": [3, 6], "path": None},
    "cpt": {"kind": "condition2", "alpha0": 100.0, "max_tries": 50},
    "sample_sizes": [10000],
    "measure": "shannon",
    "estimator": {"mode": "exact", "lambda": 0.5, "refit": True},
    "postprocess": {"score": "bdeu:1.0", "base_score": "bic", "max_parents": 4, "insert_fixpoint": False},
    "diagnosis": {"enabled": False, "deg_max": 3, "alpha": 0.01, "test_n": 5000},
    "workers": 1,
    "out": "run-output",
}

METHODS = ("hc", "prune", "hc_order", "bic_hc", "insert")
METRIC_FIELDS = ("shd", "sid", "f1_skeleton", "f1_directed", "f1_avg")
BASE_FIELDS = ("replicate", "seed", "N", "d", "edges", "dtop", "condition2", "exceed_fraction")
CSV_COLUMNS = BASE_FIELDS + tuple(f"{m}_{f}" for m in METHODS for f in METRIC_FIELDS)


def splitmix64(x: int) -> int:
    x = (x + 0x9E3779B97F4A7C15) & _MASK64
    x = ((x ^ (x >> 30)) * 0xBF58476D1CE4E5B9) & _MASK64
    x = ((x ^ (x >> 27)) * 0x94D049BB133111EB) & _MASK64
    return x ^ (x >> 31)


def derive_seed(seed: int, label: str) -> int:
    """Child seed for a named sub-task; stable across processes and runs."""
    h = int.from_bytes(hashlib.sha256(label.encode()).digest()[:8], "little")
    return splitmix64((seed & _MASK64) ^ h)


def _merge(base: dict, override: dict, where: str = "") -> dict:
    out = copy.deepcopy(base)
    for key, val in override.items():
        if key not in base:
            raise ConfigError(f"unknown config field {where + key!r}")
        if isinstance(base[key], dict) and val is not None:
            if not isinstance(val, dict):
                raise ConfigError(f"config field {where + key!r} must be an object")
            out[key] = _merge(base[key], val, where + key + ".")
        else:
            out[key] = val
    return out


def resolve_config(user: dict) -> dict:
    """Fill defaults and validate; raises ConfigError on bad values."""
    if not isinstance(user, dict):
        raise ConfigError("config must be a JSON object")
    cfg = _merge(DEFAULT_CONFIG, user)
    if not isinstance(cfg["seed"], int) or isinstance(cfg["seed"], bool):
        raise ConfigError("seed must be an integer")
    if not isinstance(cfg["replicates"], int) or cfg["replicates"] < 1:
        raise ConfigError("replicates must be a positive integer")
    sizes = cfg["sample_sizes"]
    if not isinstance(sizes, list) or not sizes or any(not isinstance(n, int) or n < 1 for n in sizes):
        raise ConfigError("sample_sizes must be a non-empty list of positive integers")
    g = cfg["graph"]
    if g["kind"] not in ("er", "sf", "file"):
        raise ConfigError(f"graph.kind must be er, sf or file, not {g['kind']!r}")
    if g["kind"] == "file":
        if not g["path"] or not Path(g["path"]).exists():
            raise ConfigError(f"graph.path {g['path']!r} does not exist")
    elif not isinstance(g["d"], int) or g["d"] < 1:
        raise ConfigError("graph.d must be a positive integer")
    lo, hi = g["card_range"]
    if not 2 <= lo <= hi:
        raise ConfigError("graph.card_range must satisfy 2 <= low <= high")
    c = cfg["cpt"]
    if c["kind"] not in ("uniform", "dirichlet", "condition2"):
        raise ConfigError(f"cpt.kind must be uniform, dirichlet or condition2, not {c['kind']!r}")
    if c["kind"] == "dirichlet" and not (isinstance(c["alpha0"], (int, float)) and c["alpha0"] > 0):
        raise ConfigError("cpt.alpha0 must be positive")
    _checked(parse_measure, cfg["measure"], "measure")
    e = cfg["estimator"]
    if e["mode"] not in ("exact", "empirical"):
        raise ConfigError("estimator.mode must be exact or empirical")
    if not (isinstance(e["lambda"], (int, float)) and e["lambda"] > 0):
        raise ConfigError("estimator.lambda must be positive")
    p = cfg["postprocess"]
    _checked(parse_score, p["score"], "postprocess.score")
    _checked(parse_score, p["base_score"], "postprocess.base_score")
    if not isinstance(p["max_parents"], int) or p["max_parents"] < 0:
        raise ConfigError("postprocess.max_parents must be a non-negative integer")
    if not isinstance(cfg["workers"], int) or cfg["workers"] < 1:
        raise ConfigError("workers must be a positive integer")
    return cfg


def _checked(parse, value, key: str):
    try:
        return parse(value)
    except ConfigError:
        raise
    except InputError as exc:
        raise ConfigError(f"{key}: {exc}") from exc


def build_network(cfg: dict, replicate: int):
    """Truth graph and network for one replicate (shared by all sample sizes)."""
    seed = derive_seed(cfg["seed"], f"network/{replicate}")
    rng = np.random.default_rng(seed)
    g, c = cfg["graph"], cfg["cpt"]
    if g["kind"] == "file":
        return load_network(g["path"])
    if g["kind"] == "er":
        dag = G.gen_er(g["d"], g["expected_edges"], rng)
    else:
        dag = G.gen_sf(g["d"], g["attach_m"], rng)
    cards = random_cards(dag.d, rng, *g["card_range"])
    if c["kind"] == "uniform":
        return gen_uniform_cpts(dag, cards, rng)
    if c["kind"] == "dirichlet":
        return gen_dirichlet_cpts(dag, cards, float(c["alpha0"]), rng)
    return gen_condition2_bn(dag, cards, parse_measure(cfg["measure"]), rng, max_tries=c["max_tries"])


def run_cell(args) -> dict:
    cfg, replicate, N = args
    phi = parse_measure(cfg["measure"])
    bn = build_network(cfg, replicate)
    truth = bn.dag
    data = sample(bn, N, np.random.default_rng(derive_seed(cfg["seed"], f"sample/{replicate}/{N}")))
    est = cfg["estimator"]
    if est["mode"] == "exact":
        trace = exact_order_search(bn, phi)
    else:
        trace = order_search(data, phi, float(est["lambda"]), bool(est["refit"]))
    order = trace.order
    post = cfg["postprocess"]
    kind, base_kind = parse_score(post["score"]), parse_score(post["base_score"])
    scorer = FamilyScorer(data, kind)
    hc = hill_climb(data, kind, max_parents=post["max_parents"], scorer=scorer)
    graphs = {
        "hc": hc,
        "prune": prune_with_order(hc, order),
        "hc_order": hill_climb(data, kind, forbidden_edges(order), post["max_parents"], scorer=scorer),
    }
    base = hill_climb(data, base_kind, max_parents=post["max_parents"])
    graphs["bic_hc"] = base
    graphs["insert"] = edge_insertion(base, order, data, kind, bool(post["insert_fixpoint"]), scorer=scorer)
    row = {
        "replicate": replicate,
        "seed": cfg["seed"],
        "N": N,
        "d": truth.d,
        "edges": truth.num_edges,
        "dtop": None,
        "condition2": verify_condition2(bn, phi).holds,
        "exceed_fraction": None,
    }
    for m in METHODS:
        rep = evaluate(graphs[m], truth, order)
        row["dtop"] = rep.dtop
        for f in METRIC_FIELDS:
            row[f"{m}_{f}"] = getattr(rep, f)
    diag = cfg["diagnosis"]
    if diag["enabled"]:
        sub = data if data.N <= diag["test_n"] else type(data)(data.rows[: diag["test_n"]], data.cards)
        degs = estimate_in_degrees(ci_tester(sub, diag["alpha"]), order)
        row["exceed_fraction"] = diagnose_order(degs, diag["deg_max"]).exceed_fraction
    row["order"] = list(order.seq)
    return row


def _fmt(v) -> str:
    if v is None:
        return ""
    if isinstance(v, bool):
        return "true" if v else "false"
    return repr(v)


def rows_to_csv(rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(CSV_COLUMNS)
    for r in rows:
        w.writerow([_fmt(r[c]) for c in CSV_COLUMNS])
    return buf.getvalue()


def summarize(rows) -> dict:
    out = {}
    for m in METHODS:
        for f in METRIC_FIELDS:
            out[f"{m}_{f}"] = float(np.mean([r[f"{m}_{f}"] for r in rows]))
    out["dtop"] = float(np.mean([r["dtop"] for r in rows]))
    out["condition2_rate"] = float(np.mean([r["condition2"] for r in rows]))
    return out


def run_experiment(cfg: dict, workers: int | None = None) -> dict:
    cfg = resolve_config(cfg)
    workers = workers or cfg["workers"]
    cells = [(cfg, r, N) for r in range(cfg["replicates"]) for N in cfg["sample_sizes"]]
    if workers > 1:
        with ProcessPoolExecutor(workers) as pool:
            rows = list(pool.map(run_cell, cells))
    else:
        rows = [run_cell(c) for c in cells]
    report_cfg = {k: v for k, v in cfg.items() if k not in ("workers", "out")}
    return {"config": report_cfg, "rows": rows, "summary": summarize(rows)}


def write_report(report: dict, out_dir) -> tuple[Path, Path]:
    out_dir = Path(out_dir)
    json_path, csv_path = out_dir / "report.json", out_dir / "results.csv"
    write_json(json_path, report)
    atomic_write_text(csv_path, rows_to_csv(report["rows"]))
    return json_path, csv_path

"""Command-line interface.

Exit status: 0 on success, 2 for bad input or configuration, 1 for
failures during computation.  ``--json-errors`` prints errors to stderr as
a JSON object instead of plain text.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from . import graph as G
from .bayesnet import (
    DEFAULT_CAP,
    bn_to_json,
    dumps_json,
    gen_condition2_bn,
    gen_dirichlet_cpts,
    gen_uniform_cpts,
    random_cards,
    sample,
    verify_condition2,
)
from .bif import default_names, read_bif, serialize_bif
from .diagnosis import (
    DEFAULT_ALPHA,
    DEFAULT_TEST_N,
    check_prop1,
    ci_tester,
    diagnose_order,
    dsep_tester,
    estimate_in_degrees,
    exceed_vs_dtop_study,
)
from .errors import ComputationError, ConfigError, DscoreError, InputError
from .experiment import resolve_config, run_experiment, write_report
from .fileio import (
    atomic_write_text,
    load_dataset,
    load_graph,
    load_network,
    load_order,
    read_json,
    save_dataset,
    write_json,
)
from .metrics import evaluate
from .ordersearch import exact_order_search, order_search
from .randomness import parse_measure
from .score import DEFAULT_LAMBDA
from .structure import edge_insertion, forbidden_edges, hill_climb, parse_score, prune_with_order

GLOBAL_DEFAULTS = {"seed": 0, "measure": "shannon", "mode": "empirical", "lam": DEFAULT_LAMBDA,
                   "out": None, "json_errors": False}


def _add_globals(p: argparse.ArgumentParser) -> None:
    s = argparse.SUPPRESS
    p.add_argument("--seed", type=int, default=s, help="base random seed (default 0)")
    p.add_argument("--measure", default=s, help="shannon | renyi:<order> | neg-log-var | neg-kl-uniform")
    p.add_argument("--mode", choices=("exact", "empirical"), default=s, help="score source (default empirical)")
    p.add_argument("--lambda", dest="lam", type=float, default=s, help="additive smoothing (default 0.5)")
    p.add_argument("--out", default=s, help="output file or directory (stdout when omitted)")
    p.add_argument("--json-errors", action="store_true", default=s, help="machine-readable errors on stderr")


def _emit(args, obj) -> None:
    text = dumps_json(obj)
    if args.out:
        atomic_write_text(args.out, text)
    else:
        sys.stdout.write(text)


def _parse_range(text: str) -> tuple[int, int]:
    try:
        lo, _, hi = text.partition(":")
        return int(lo), int(hi or lo)
    except ValueError:
        raise ConfigError(f"bad range {text!r}; use LOW:HIGH") from None


# ------------------------------------------------------------- commands

def cmd_generate(args) -> int:
    rng = np.random.default_rng(args.seed)
    if args.graph == "er":
        dag = G.gen_er(args.d, args.expected_edges if args.expected_edges is not None else args.d, rng)
    else:
        dag = G.gen_sf(args.d, args.attach_m, rng)
    cards = random_cards(dag.d, rng, *_parse_range(args.cards))
    if args.cpt == "uniform":
        bn = gen_uniform_cpts(dag, cards, rng)
    elif args.cpt == "dirichlet":
        bn = gen_dirichlet_cpts(dag, cards, args.alpha0, rng)
    else:
        bn = gen_condition2_bn(dag, cards, parse_measure(args.measure), rng, args.max_tries)
    out = Path(args.out or ".")
    write_json(out / "bn.json", bn_to_json(bn))
    write_json(out / "truth.json", G.graph_to_json(dag))
    return 0


def cmd_sample(args) -> int:
    bn = load_network(args.bn)
    ds = sample(bn, args.n, np.random.default_rng(args.seed))
    if not args.out:
        raise ConfigError("sample needs --out for the CSV path")
    save_dataset(args.out, ds)
    return 0


def cmd_order(args) -> int:
    phi = parse_measure(args.measure)
    if args.mode == "exact":
        if not args.bn:
            raise ConfigError("exact mode needs --bn")
        trace = exact_order_search(load_network(args.bn), phi, args.cap)
    else:
        if not args.data:
            raise ConfigError("empirical mode needs --data")
        trace = order_search(load_dataset(args.data), phi, args.lam, refit=not args.no_refit)
    _emit(args, trace.to_json())
    return 0


def cmd_prune(args) -> int:
    order = load_order(args.order)
    if args.candidate:
        cand = load_graph(args.candidate)
    elif args.data:
        cand = hill_climb(load_dataset(args.data), parse_score(args.score), max_parents=args.max_parents)
    else:
        raise ConfigError("prune needs --candidate or --data")
    _emit(args, G.graph_to_json(prune_with_order(cand, order)))
    return 0


def cmd_insert(args) -> int:
    data = load_dataset(args.data)
    order = load_order(args.order)
    if args.base:
        base = load_graph(args.base)
    else:
        base = hill_climb(data, parse_score(args.base_score), max_parents=args.max_parents)
    est = edge_insertion(base, order, data, parse_score(args.score), fixpoint=args.fixpoint)
    _emit(args, G.graph_to_json(est))
    return 0


def cmd_hill_climb(args) -> int:
    data = load_dataset(args.data)
    forbidden = forbidden_edges(load_order(args.order)) if args.order else ()
    _emit(args, G.graph_to_json(hill_climb(data, parse_score(args.score), forbidden, args.max_parents)))
    return 0


def cmd_evaluate(args) -> int:
    est, truth = load_graph(args.est), load_graph(args.truth)
    order = load_order(args.order) if args.order else None
    _emit(args, evaluate(est, truth, order).to_json())
    return 0


def cmd_diagnose(args) -> int:
    order = load_order(args.order)
    report = {}
    if args.data:
        data = load_dataset(args.data)
        if data.N > args.test_n:
            data = type(data)(data.rows[: args.test_n], data.cards)
        tester = ci_tester(data, args.alpha, args.test)
    elif args.truth:
        tester = dsep_tester(load_graph(args.truth))
    else:
        raise ConfigError("diagnose needs --data (independence tests) or --truth (d-separation oracle)")
    report["in_degree"] = diagnose_order(estimate_in_degrees(tester, order), args.deg_max).to_json()
    if args.alpha0 is not None:
        if not args.bn:
            raise ConfigError("--alpha0 needs --bn for the cardinalities")
        bn = load_network(args.bn)
        report["prop1"] = check_prop1(bn.dag, bn.cards, args.alpha0).to_json()
    _emit(args, report)
    return 0


def cmd_verify(args) -> int:
    bn = load_network(args.bn)
    rep = verify_condition2(bn, parse_measure(args.measure), args.cap)
    _emit(args, {
        "holds": rep.holds,
        "values": list(rep.values),
        "violations": [{"parent": i, "child": j, "gap": g} for i, j, g in rep.violations],
    })
    return 0


def cmd_bif(args) -> int:
    src = args.input
    if src.lower().endswith(".bif"):
        net = read_bif(src)
    else:
        net = default_names(load_network(src))
    if args.to == "bif":
        text = serialize_bif(net)
    else:
        obj = bn_to_json(net.bn)
        obj["names"] = list(net.names)
        obj["states"] = [list(s) for s in net.state_names]
        text = dumps_json(obj)
    if args.out:
        atomic_write_text(args.out, text)
    else:
        sys.stdout.write(text)
    return 0


def cmd_study(args) -> int:
    res = exceed_vs_dtop_study(args.graphs, _parse_range(args.d_range),
                               tuple(float(v) for v in args.k_range.split(":")),
                               args.deg_max, args.seed, args.workers)
    lines = [",".join(res.CSV_COLUMNS)]
    for r in res.rows:
        lines.append(",".join(repr(getattr(r, c)) for c in res.CSV_COLUMNS))
    csv_text = "\n".join(lines) + "\n"
    summary = {"graphs": len(res.rows), "pearson": res.pearson, "pearson_p": res.pearson_p,
               "spearman": res.spearman, "spearman_p": res.spearman_p}
    if args.out:
        atomic_write_text(args.out, csv_text)
        write_json(Path(args.out).with_suffix(".summary.json"), summary)
    else:
        sys.stdout.write(csv_text)
    sys.stderr.write(json.dumps(summary) + "\n")
    return 0


def cmd_run(args) -> int:
    user = read_json(args.config) if args.config else {}
    if "seed" in args.explicit:
        user["seed"] = args.seed
    if "measure" in args.explicit:
        user["measure"] = args.measure
    if "mode" in args.explicit or "lam" in args.explicit:
        est = dict(user.get("estimator") or {})
        if "mode" in args.explicit:
            est["mode"] = args.mode
        if "lam" in args.explicit:
            est["lambda"] = args.lam
        user["estimator"] = est
    cfg = resolve_config(user)
    out = args.out or cfg["out"]
    report = run_experiment(cfg, args.workers)
    write_report(report, out)
    return 0


# --------------------------------------------------------------- parser

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="dscore", description="Ordering-based causal discovery on discrete data.")
    _add_globals(parser)
    sub = parser.add_subparsers(dest="command", required=True, metavar="COMMAND")

    def add(name, func, help_):
        p = sub.add_parser(name, help=help_, description=help_)
        _add_globals(p)
        p.set_defaults(func=func)
        return p

    p = add("generate", cmd_generate, "random network; writes bn.json and truth.json into --out")
    p.add_argument("--graph", choices=("er", "sf"), default="er")
    p.add_argument("--d", type=int, default=8)
    p.add_argument("--expected-edges", type=float, default=None, help="edge budget for ER (default d)")
    p.add_argument("--attach-m", type=int, default=2)
    p.add_argument("--cards", default="3:6", help="cardinality range LOW:HIGH")
    p.add_argument("--cpt", choices=("uniform", "dirichlet", "condition2"), default="uniform")
    p.add_argument("--alpha0", type=float, default=100.0)
    p.add_argument("--max-tries", type=int, default=50)

    p = add("sample", cmd_sample, "ancestral sample from a network (JSON or BIF) to CSV")
    p.add_argument("--bn", required=True)
    p.add_argument("--n", type=int, default=10000)

    p = add("order", cmd_order, "recover a topological order; writes a trace")
    p.add_argument("--data")
    p.add_argument("--bn")
    p.add_argument("--no-refit", action="store_true")
    p.add_argument("--cap", type=int, default=DEFAULT_CAP)

    p = add("prune", cmd_prune, "drop edges that contradict an order")
    p.add_argument("--order", required=True)
    p.add_argument("--candidate")
    p.add_argument("--data", help="hill-climb a candidate from this data first")
    p.add_argument("--score", default="bdeu")
    p.add_argument("--max-parents", type=int, default=4)

    p = add("insert", cmd_insert, "add score-improving edges from predecessors")
    p.add_argument("--order", required=True)
    p.add_argument("--data", required=True)
    p.add_argument("--base", help="starting graph (default: hill climb with --base-score)")
    p.add_argument("--base-score", default="bic")
    p.add_argument("--score", default="bdeu")
    p.add_argument("--max-parents", type=int, default=4)
    p.add_argument("--fixpoint", "--insert-fixpoint", dest="fixpoint", action="store_true")

    p = add("hill-climb", cmd_hill_climb, "greedy score search, optionally constrained by an order")
    p.add_argument("--data", required=True)
    p.add_argument("--order")
    p.add_argument("--score", default="bdeu")
    p.add_argument("--max-parents", type=int, default=4)

    p = add("evaluate", cmd_evaluate, "compare an estimated graph with the truth")
    p.add_argument("--est", required=True)
    p.add_argument("--truth", required=True)
    p.add_argument("--order")

    p = add("diagnose", cmd_diagnose, "in-degree diagnosis of an order, optional Dirichlet check")
    p.add_argument("--order", required=True)
    p.add_argument("--data")
    p.add_argument("--truth")
    p.add_argument("--deg-max", type=int, default=3)
    p.add_argument("--alpha", type=float, default=DEFAULT_ALPHA)
    p.add_argument("--test", choices=("chi2", "gtest"), default="chi2")
    p.add_argument("--test-n", type=int, default=DEFAULT_TEST_N)
    p.add_argument("--alpha0", type=float)
    p.add_argument("--bn")

    p = add("verify-condition", cmd_verify, "check that randomness does not decrease along edges")
    p.add_argument("--bn", required=True)
    p.add_argument("--cap", type=int, default=DEFAULT_CAP)

    p = add("bif", cmd_bif, "convert between BIF and network JSON")
    p.add_argument("input")
    p.add_argument("--to", choices=("json", "bif"), default="json")

    p = add("study", cmd_study, "exceed fraction versus order error on random graphs")
    p.add_argument("--graphs", type=int, default=1000)
    p.add_argument("--d-range", default="5:30")
    p.add_argument("--k-range", default="2:4")
    p.add_argument("--deg-max", type=int, default=3)
    p.add_argument("--workers", type=int, default=1)

    p = add("run", cmd_run, "seeded experiment from a JSON config; writes report.json and results.csv")
    p.add_argument("--config")
    p.add_argument("--workers", type=int, default=None)
    return parser


def _report_error(exc: BaseException, code: int, as_json: bool) -> int:
    if as_json:
        sys.stderr.write(json.dumps({"error": type(exc).__name__, "message": str(exc), "exit_code": code}) + "\n")
    else:
        sys.stderr.write(f"dscore: error: {exc}\n")
    return code


def main(argv=None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = build_parser()
    args = parser.parse_args(argv)
    args.explicit = {k for k in GLOBAL_DEFAULTS if hasattr(args, k)}
    for key, val in GLOBAL_DEFAULTS.items():
        if not hasattr(args, key):
            setattr(args, key, val)
    try:
        return args.func(args)
    except InputError as exc:
        return _report_error(exc, 2, args.json_errors)
    except (OSError, UnicodeDecodeError) as exc:
        return _report_error(exc, 2, args.json_errors)
    except (ComputationError, DscoreError) as exc:
        return _report_error(exc, 1, args.json_errors)


if __name__ == "__main__":
    raise SystemExit(main())

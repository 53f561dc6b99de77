"""On-disk formats: canonical JSON, headerless CSV datasets with a
cardinality sidecar, and atomic writes."""

from __future__ import annotations

import json
import os
import tempfile
from pathlib import Path

import numpy as np

from . import graph as G
from .bayesnet import Dataset, DiscreteBayesNet, bn_from_json, bn_to_json, dumps_json
from .errors import InputError


def atomic_write_text(path, text: str) -> None:
    """Write to a temporary file in the target directory, then rename."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix="." + path.name + ".", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def write_json(path, obj) -> None:
    atomic_write_text(path, dumps_json(obj))


def read_json(path):
    try:
        with open(path, encoding="utf-8") as fh:
            return json.load(fh)
    except json.JSONDecodeError as exc:
        raise InputError(f"{path}: invalid JSON at line {exc.lineno}, column {exc.colno}: {exc.msg}") from None


def cards_path(path) -> Path:
    path = Path(path)
    return path.with_name(path.stem + ".cards.json")


def dataset_to_csv(ds: Dataset) -> str:
    return "".join(",".join(map(str, row)) + "\n" for row in ds.rows.tolist())


def save_dataset(path, ds: Dataset) -> None:
    write_json(cards_path(path), {"cards": list(ds.cards)})
    atomic_write_text(path, dataset_to_csv(ds))


def load_dataset(path) -> Dataset:
    side = cards_path(path)
    if not side.exists():
        raise InputError(f"missing cardinality sidecar {side}")
    cards = read_json(side).get("cards")
    if not isinstance(cards, list):
        raise InputError(f"{side}: expected an object with a 'cards' list")
    rows = []
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            line = line.strip()
            if not line:
                continue
            try:
                rows.append([int(v) for v in line.split(",")])
            except ValueError:
                raise InputError(f"{path}, line {lineno}: non-integer entry") from None
            if len(rows[-1]) != len(cards):
                raise InputError(f"{path}, line {lineno}: {len(rows[-1])} fields, expected {len(cards)}")
    if not rows:
        raise InputError(f"{path}: no data rows")
    return Dataset.of(np.array(rows, dtype=np.int64), cards)


def load_network(path) -> DiscreteBayesNet:
    """Network from BN JSON or a .bif file."""
    if str(path).lower().endswith(".bif"):
        from .bif import read_bif

        return read_bif(path).bn
    return bn_from_json(read_json(path))


def save_network(path, bn: DiscreteBayesNet) -> None:
    write_json(path, bn_to_json(bn))


def load_graph(path) -> G.DagStructure:
    """Graph from graph JSON, BN JSON or a .bif file."""
    if str(path).lower().endswith(".bif"):
        return load_network(path).dag
    obj = read_json(path)
    if isinstance(obj, dict) and "cards" in obj and "edges" in obj:
        return G.from_edges(len(obj["cards"]), [tuple(e) for e in obj["edges"]])
    return G.graph_from_json(obj)


def save_graph(path, dag: G.DagStructure) -> None:
    write_json(path, G.graph_to_json(dag))


def load_order(path) -> G.TopologicalOrder:
    """Order from a search trace or a plain {"order": [...]} / list document."""
    obj = read_json(path)
    seq = obj.get("order") if isinstance(obj, dict) else obj
    if not isinstance(seq, list):
        raise InputError(f"{path}: no order found")
    return G.TopologicalOrder.from_sequence(seq)

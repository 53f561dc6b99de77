"""Reader and writer for BIF network files (discrete variables only).

Recognised blocks: ``network``, ``variable`` with ``type discrete [k] {...}``
and ``probability`` with either a ``table`` (root nodes) or one
parenthesised parent-state tuple per row plus an optional ``default`` row.
``property`` lines are accepted and dropped.  Every error carries the line
and column of the offending token.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from . import graph as G
from .bayesnet import DiscreteBayesNet
from .errors import (
    ArityMismatch,
    BifSyntaxError,
    CycleDetected,
    DuplicateBlock,
    MissingBlock,
    NonNormalizedRow,
    UndeclaredVariable,
    UnknownState,
    UnsupportedFeature,
)

ROW_TOLERANCE = 1e-4
_EXACT = 1e-12


@dataclass(frozen=True, eq=False)
class NamedNetwork:
    bn: DiscreteBayesNet
    names: tuple[str, ...]
    state_names: tuple[tuple[str, ...], ...]
    network_name: str = "unknown"

    def __eq__(self, other):
        if not isinstance(other, NamedNetwork):
            return NotImplemented
        return (self.bn == other.bn and self.names == other.names
                and self.state_names == other.state_names)

    __hash__ = None

    def index(self, name: str) -> int:
        return self.names.index(name)


class Token(NamedTuple):
    kind: str  # "word", "string" or the punctuation character
    text: str
    line: int
    col: int


_TOKEN_RE = re.compile(
    r"""(?P<ws>[ \t\r\f\v]+|\n)
      | (?P<line_comment>//[^\n]*)
      | (?P<block_comment>/\*.*?\*/)
      | (?P<string>"[^"\n]*")
      | (?P<word>[A-Za-z0-9_\-.+<>=]+(?:/(?![/*])[A-Za-z0-9_\-.+<>=]+)*)
      | (?P<punct>[{}()\[\];,|])
    """,
    re.VERBOSE | re.DOTALL,
)


def tokenize(text: str) -> list[Token]:
    tokens = []
    pos, line, line_start = 0, 1, 0
    while pos < len(text):
        m = _TOKEN_RE.match(text, pos)
        col = pos - line_start + 1
        if m is None:
            if text.startswith("/*", pos):
                raise BifSyntaxError("unterminated comment", line, col)
            raise BifSyntaxError(f"unexpected character {text[pos]!r}", line, col)
        kind = m.lastgroup
        chunk = m.group()
        next_pos = m.end()
        if kind == "word":
            tokens.append(Token("word", chunk, line, col))
            if chunk == "property":
                # free text up to the terminating semicolon
                end = text.find(";", m.end())
                end = len(text) if end < 0 else end
                body = text[m.end():end]
                tokens.append(Token("raw", body, line, col + len(chunk)))
                chunk += body
                next_pos = end
        elif kind == "string":
            tokens.append(Token("string", chunk[1:-1], line, col))
        elif kind == "punct":
            tokens.append(Token(chunk, chunk, line, col))
        newlines = chunk.count("\n")
        if newlines:
            line += newlines
            line_start = pos + chunk.rfind("\n") + 1
        pos = next_pos
    tokens.append(Token("eof", "", line, pos - line_start + 1))
    return tokens


class _Parser:
    def __init__(self, text: str):
        self.toks = tokenize(text)
        self.k = 0

    @property
    def tok(self) -> Token:
        return self.toks[self.k]

    def advance(self) -> Token:
        t = self.toks[self.k]
        if t.kind != "eof":
            self.k += 1
        return t

    def fail(self, msg, tok=None, cls=BifSyntaxError):
        tok = tok or self.tok
        raise cls(msg, tok.line, tok.col)

    def expect(self, kind: str, what: str | None = None) -> Token:
        t = self.tok
        if t.kind != kind:
            found = "end of input" if t.kind == "eof" else repr(t.text)
            self.fail(f"expected {what or repr(kind)}, found {found}")
        return self.advance()

    def name(self, what="a name") -> Token:
        if self.tok.kind not in ("word", "string"):
            self.expect("word", what)
        return self.advance()

    def keyword(self, word: str) -> Token:
        t = self.tok
        if t.kind != "word" or t.text != word:
            self.fail(f"expected {word!r}")
        return self.advance()

    def number(self) -> tuple[float, Token]:
        t = self.expect("word", "a probability")
        try:
            v = float(t.text)
        except ValueError:
            self.fail(f"{t.text!r} is not a number", t)
        if not np.isfinite(v) or v < 0:
            self.fail(f"probability {t.text} must be finite and non-negative", t)
        return v, t

    def numbers(self) -> list[tuple[float, Token]]:
        vals = [self.number()]
        while self.tok.kind == ",":
            self.advance()
            vals.append(self.number())
        return vals

    def skip_property(self) -> None:
        start = self.keyword("property")
        body = self.advance().text if self.tok.kind == "raw" else ""
        if "loopy" in re.findall(r"[A-Za-z]+", body.lower()):
            self.fail("loopy networks are not supported", start, UnsupportedFeature)
        self.expect(";")

    # blocks ---------------------------------------------------------
    def network(self):
        self.keyword("network")
        name = self.name("network name").text
        self.expect("{")
        while self.tok.kind != "}":
            if self.tok.kind == "word" and self.tok.text == "property":
                self.skip_property()
            else:
                self.fail("unexpected content in network block")
        self.expect("}")
        return name

    def variable(self):
        self.keyword("variable")
        name = self.name("variable name")
        self.expect("{")
        states = None
        while self.tok.kind != "}":
            t = self.tok
            if t.kind == "word" and t.text == "property":
                self.skip_property()
            elif t.kind == "word" and t.text == "type":
                if states is not None:
                    self.fail(f"second type declaration for {name.text!r}", t, DuplicateBlock)
                self.advance()
                kind = self.expect("word", "variable type")
                if kind.text != "discrete":
                    self.fail(f"variable type {kind.text!r} is not supported", kind, UnsupportedFeature)
                self.expect("[")
                count_tok = self.expect("word", "state count")
                if not count_tok.text.isdigit():
                    self.fail(f"state count {count_tok.text!r} is not an integer", count_tok)
                self.expect("]")
                self.expect("{")
                labels = [self.name("state label")]
                while self.tok.kind == ",":
                    self.advance()
                    labels.append(self.name("state label"))
                self.expect("}")
                self.expect(";")
                if len(labels) != int(count_tok.text):
                    self.fail(f"{name.text!r} declares {count_tok.text} states but lists {len(labels)}",
                              count_tok, ArityMismatch)
                seen = set()
                for lab in labels:
                    if lab.text in seen:
                        self.fail(f"state {lab.text!r} repeated", lab, DuplicateBlock)
                    seen.add(lab.text)
                if len(labels) < 2:
                    self.fail(f"{name.text!r} needs at least two states", count_tok, ArityMismatch)
                states = [lab.text for lab in labels]
            else:
                self.fail("expected 'type' or 'property'")
        end = self.expect("}")
        if states is None:
            self.fail(f"variable {name.text!r} has no type declaration", end, MissingBlock)
        return name, states

    def probability(self):
        head = self.keyword("probability")
        self.expect("(")
        child = self.name("variable name")
        parents = []
        if self.tok.kind == "|":
            self.advance()
            parents.append(self.name("parent name"))
            while self.tok.kind == ",":
                self.advance()
                parents.append(self.name("parent name"))
        self.expect(")")
        self.expect("{")
        entries = []  # (kind, payload, token)
        while self.tok.kind != "}":
            t = self.tok
            if t.kind == "word" and t.text == "table":
                self.advance()
                entries.append(("table", self.numbers(), t))
                self.expect(";")
            elif t.kind == "word" and t.text == "default":
                self.advance()
                entries.append(("default", self.numbers(), t))
                self.expect(";")
            elif t.kind == "word" and t.text == "property":
                self.skip_property()
            elif t.kind == "(":
                self.advance()
                labels = [self.name("state label")]
                while self.tok.kind == ",":
                    self.advance()
                    labels.append(self.name("state label"))
                self.expect(")")
                entries.append(("row", (labels, self.numbers()), t))
                self.expect(";")
            else:
                self.fail("expected 'table', 'default' or a parent-state tuple")
        end = self.expect("}")
        return head, child, parents, entries, end


def _row(values, owner: str, n: int, anchor: Token) -> np.ndarray:
    if len(values) != n:
        bad = values[n][1] if len(values) > n else anchor
        raise ArityMismatch(f"{owner}: expected {n} probabilities, found {len(values)}", bad.line, bad.col)
    row = np.array([v for v, _ in values], dtype=float)
    total = row.sum()
    if abs(total - 1.0) > ROW_TOLERANCE:
        raise NonNormalizedRow(f"{owner}: row sums to {float(total)!r}", anchor.line, anchor.col)
    if abs(total - 1.0) > _EXACT:
        row = row / total
    return row


def parse_bif(text: str) -> NamedNetwork:
    p = _Parser(text)
    net_name = "unknown"
    seen_network = False
    variables: dict[str, tuple[Token, list[str]]] = {}
    blocks: dict[str, tuple] = {}
    while p.tok.kind != "eof":
        t = p.tok
        if t.kind != "word":
            p.fail(f"expected a block keyword, found {t.text!r}")
        if t.text == "network":
            if seen_network:
                p.fail("second network block", t, DuplicateBlock)
            seen_network = True
            net_name = p.network()
        elif t.text == "variable":
            name, states = p.variable()
            if name.text in variables:
                p.fail(f"variable {name.text!r} declared twice", name, DuplicateBlock)
            variables[name.text] = (name, states)
        elif t.text == "probability":
            block = p.probability()
            child = block[1]
            if child.text in blocks:
                p.fail(f"second probability block for {child.text!r}", child, DuplicateBlock)
            blocks[child.text] = block
        else:
            p.fail(f"unknown block {t.text!r}")

    names = list(variables)
    index = {n: k for k, n in enumerate(names)}
    cards = [len(variables[n][1]) for n in names]
    for child_name, (head, child, parents, _, _) in blocks.items():
        for tok in (child, *parents):
            if tok.text not in index:
                raise UndeclaredVariable(f"variable {tok.text!r} is not declared", tok.line, tok.col)
        seen = set()
        for tok in parents:
            if tok.text in seen or tok.text == child.text:
                raise DuplicateBlock(f"parent {tok.text!r} repeated", tok.line, tok.col)
            seen.add(tok.text)
    for n in names:
        if n not in blocks:
            tok = variables[n][0]
            raise MissingBlock(f"no probability block for {n!r}", tok.line, tok.col)

    d = len(names)
    adj = np.zeros((d, d), dtype=bool)
    cpts = [None] * d
    for child_name, (head, child, parent_toks, entries, end) in blocks.items():
        c = index[child_name]
        pa = [index[t.text] for t in parent_toks]
        adj[pa, c] = True
        cpts[c] = _block_table(child_name, cards[c], pa, parent_toks, variables, cards, entries, end)
    try:
        dag = G.validate_dag(adj)
    except CycleDetected as exc:
        first = blocks[names[exc.cycle[0]]][0]
        raise BifSyntaxError("probability blocks form a directed cycle: "
                             + " -> ".join(names[v] for v in exc.cycle), first.line, first.col) from None
    bn = DiscreteBayesNet(dag, tuple(cards), tuple(cpts))
    return NamedNetwork(bn, tuple(names), tuple(tuple(variables[n][1]) for n in names), net_name)


def _block_table(child_name, n, pa, parent_toks, variables, cards, entries, end) -> np.ndarray:
    pcards = [cards[v] for v in pa]
    K = int(np.prod(pcards, dtype=np.int64)) if pa else 1
    rows = np.full((K, n), np.nan)
    default = None
    for kind, payload, tok in entries:
        if kind == "table":
            if pa:
                raise UnsupportedFeature(f"flat 'table' for {child_name!r} with parents is not supported",
                                         tok.line, tok.col)
            if not np.isnan(rows[0, 0]):
                raise DuplicateBlock(f"second table for {child_name!r}", tok.line, tok.col)
            rows[0] = _row(payload, child_name, n, tok)
        elif kind == "default":
            if default is not None:
                raise DuplicateBlock(f"second default row for {child_name!r}", tok.line, tok.col)
            default = _row(payload, child_name, n, tok)
        else:
            labels, values = payload
            if not pa:
                raise ArityMismatch(f"{child_name!r} has no parents but a parent-state row",
                                    tok.line, tok.col)
            if len(labels) != len(pa):
                raise ArityMismatch(f"expected {len(pa)} parent states, found {len(labels)}", tok.line, tok.col)
            states = []
            for lab, ptok in zip(labels, parent_toks):
                options = variables[ptok.text][1]
                if lab.text not in options:
                    raise UnknownState(f"{lab.text!r} is not a state of {ptok.text!r}", lab.line, lab.col)
                states.append(options.index(lab.text))
            r = 0
            for s, m in zip(states, pcards):
                r = r * m + s
            if not np.isnan(rows[r, 0]):
                raise DuplicateBlock(f"row for {child_name!r} given twice", tok.line, tok.col)
            rows[r] = _row(values, child_name, n, tok)
    missing = np.isnan(rows[:, 0])
    if missing.any():
        if default is None:
            raise MissingBlock(f"{child_name!r} is missing {int(missing.sum())} of {K} rows", end.line, end.col)
        rows[missing] = default
    if pa:
        perm = np.argsort(pa, kind="stable")
        rows = rows.reshape(*pcards, n).transpose(*perm, len(pa)).reshape(K, n)
    return np.ascontiguousarray(rows)


_NAME_OK = re.compile(r"^[A-Za-z0-9_\-.+<>=]+(?:/[A-Za-z0-9_\-.+<>=]+)*$")


def _fmt_name(s: str) -> str:
    return s if _NAME_OK.match(s) else '"' + s + '"'


def serialize_bif(net: NamedNetwork) -> str:
    """Canonical text: node-index order, declared state order, parents
    ascending, 17 significant digits."""
    bn = net.bn
    out = [f"network {_fmt_name(net.network_name)} {{", "}"]
    for i, name in enumerate(net.names):
        states = ", ".join(_fmt_name(s) for s in net.state_names[i])
        out += [f"variable {_fmt_name(name)} {{",
                f"  type discrete [ {bn.cards[i]} ] {{ {states} }};", "}"]
    for i, name in enumerate(net.names):
        pa = bn.parents(i)
        table = bn.cpts[i]
        if not pa:
            out += [f"probability ( {_fmt_name(name)} ) {{",
                    "  table " + ", ".join("%.17g" % v for v in table[0]) + ";", "}"]
            continue
        out.append(f"probability ( {_fmt_name(name)} | {', '.join(_fmt_name(net.names[p]) for p in pa)} ) {{")
        for r, config in enumerate(np.ndindex(*[bn.cards[p] for p in pa])):
            labels = ", ".join(_fmt_name(net.state_names[p][s]) for p, s in zip(pa, config))
            out.append(f"  ({labels}) " + ", ".join("%.17g" % v for v in table[r]) + ";")
        out.append("}")
    return "\n".join(out) + "\n"


def default_names(bn: DiscreteBayesNet) -> NamedNetwork:
    """Names X0.. and states s0.. for an unnamed network."""
    return NamedNetwork(bn, tuple(f"X{i}" for i in range(bn.d)),
                        tuple(tuple(f"s{k}" for k in range(n)) for n in bn.cards))


def read_bif(path) -> NamedNetwork:
    with open(path, encoding="utf-8") as fh:
        return parse_bif(fh.read())

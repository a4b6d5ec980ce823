"""Constituent trees with arbitrary terminal positions, and their file formats.

Three line-oriented formats are supported:

``export``
    NEGRA/TIGER export (5 columns: form, tag, morph, edge, parent) between
    ``#BOS id`` / ``#EOS id``; nonterminals are ``#5xx`` records.
``discbracket``
    one s-expression per line, terminals written ``INDEX=FORM``.
``bracket``
    one s-expression per line, terminals as bare forms; reading order is the
    terminal index, so only continuous trees can be written.

Trees are stored in a canonical form: the children of every node are sorted by
the minimum of their yields and node ids are assigned in pre-order.  Two trees
with the same constituents therefore compare equal regardless of the child
order found in the input file.
"""
from __future__ import annotations

import logging
import re
from dataclasses import dataclass, field
from typing import Iterable, Iterator, NamedTuple, Sequence, Union

logger = logging.getLogger(__name__)

FORMATS = ("export", "discbracket", "bracket")
DEFAULT_ROOT_LABEL = "VROOT"

_ESCAPES = (("(", "-LRB-"), (")", "-RRB-"))


class TreebankError(ValueError):
    """Malformed input; carries the sentence id and line number when known."""

    def __init__(self, message, sentence_id=None, line=None):
        self.sentence_id = sentence_id
        self.line = line
        where = []
        if sentence_id is not None:
            where.append(f"sentence {sentence_id}")
        if line is not None:
            where.append(f"line {line}")
        if where:
            message = f"{', '.join(where)}: {message}"
        super().__init__(message)


class StructureError(TreebankError):
    """The parsed material does not form a valid constituent tree."""


class NotContinuousError(ValueError):
    def __init__(self, label, node, sentence_id=None):
        self.label = label
        self.node = node
        prefix = f"sentence {sentence_id}: " if sentence_id is not None else ""
        super().__init__(f"{prefix}tree not continuous: node {node} ({label}) has a gapped yield")


def escape(text: str) -> str:
    for raw, esc in _ESCAPES:
        text = text.replace(raw, esc)
    return text


def unescape(text: str) -> str:
    for raw, esc in _ESCAPES:
        text = text.replace(esc, raw)
    return text


@dataclass(frozen=True)
class Token:
    form: str
    pos: str | None = None
    # opaque export columns, written back verbatim
    morph: str | None = None
    edge: str | None = None

    def __post_init__(self):
        if not self.form or any(c.isspace() for c in self.form):
            raise ValueError(f"invalid token form {self.form!r}")


@dataclass(frozen=True)
class Sentence:
    tokens: tuple[Token, ...]

    def __post_init__(self):
        object.__setattr__(self, "tokens", tuple(self.tokens))
        if not self.tokens:
            raise ValueError("a sentence needs at least one token")

    @classmethod
    def from_forms(cls, forms: Iterable[str]) -> "Sentence":
        return cls(tuple(Token(f) for f in forms))

    @property
    def n(self) -> int:
        return len(self.tokens)

    @property
    def forms(self) -> list[str]:
        return [t.form for t in self.tokens]

    def __len__(self):
        return len(self.tokens)

    def __getitem__(self, i):
        return self.tokens[i]


class Leaf(NamedTuple):
    """A terminal child: the sentence position it covers."""

    index: int


Child = Union[int, Leaf]


@dataclass(frozen=True)
class Node:
    label: str
    children: tuple[Child, ...]
    func: str | None = None


@dataclass(frozen=True)
class ConstTree:
    """A (possibly discontinuous) constituent tree over ``sentence``.

    Use :meth:`build` or :meth:`from_nested` to construct one; the raw
    constructor expects ``nodes`` already in canonical order (root at 0).
    """

    nodes: tuple[Node, ...]
    sentence: Sentence
    _yields: tuple[tuple[int, ...], ...] = field(default=(), repr=False, compare=False)

    root = 0

    def __post_init__(self):
        object.__setattr__(self, "nodes", tuple(self.nodes))
        yields = _validate(self.nodes, self.root, self.sentence.n)
        object.__setattr__(self, "_yields", yields)

    # -- construction -----------------------------------------------------
    @classmethod
    def build(cls, nodes: dict, root, sentence: Sentence) -> "ConstTree":
        """Canonicalize an arbitrary node table.

        ``nodes`` maps any hashable id to a :class:`Node` whose non-leaf
        children refer to those ids.
        """
        n = sentence.n
        if root not in nodes:
            raise StructureError(f"root {root!r} is not a node")
        # parent check before recursion so cycles cannot loop forever
        parent = {}
        for nid, node in nodes.items():
            if not node.children:
                raise StructureError(f"node {nid!r} ({node.label}) has no children")
            for c in node.children:
                if isinstance(c, Leaf):
                    continue
                if c not in nodes:
                    raise StructureError(f"node {nid!r} refers to unknown child {c!r}")
                if c in parent:
                    raise StructureError(f"node {c!r} has more than one parent")
                parent[c] = nid
        if root in parent:
            raise StructureError("root node has a parent")
        reachable = {root}
        stack = [root]
        while stack:
            for c in nodes[stack.pop()].children:
                if not isinstance(c, Leaf) and c not in reachable:
                    reachable.add(c)
                    stack.append(c)
        if len(reachable) != len(nodes):
            raise StructureError("node graph is not a single tree")

        minima = {}

        def low(nid):
            if nid not in minima:
                minima[nid] = min(
                    c.index if isinstance(c, Leaf) else low(c) for c in nodes[nid].children)
            return minima[nid]

        def key(c):
            return c.index if isinstance(c, Leaf) else low(c)

        out: list = []

        def visit(nid):
            slot = len(out)
            out.append(None)
            node = nodes[nid]
            kids = []
            for c in sorted(node.children, key=key):
                kids.append(c if isinstance(c, Leaf) else visit(c))
            out[slot] = Node(node.label, tuple(kids), node.func)
            return slot

        visit(root)
        for node in out:
            for c in node.children:
                if isinstance(c, Leaf) and not 0 <= c.index < n:
                    raise StructureError(f"terminal index {c.index} outside 0..{n - 1}")
        return cls(tuple(out), sentence)

    @classmethod
    def from_nested(cls, nested, sentence) -> "ConstTree":
        """Build from ``(label, child, ...)`` tuples where ints are positions.

        ``sentence`` may be a :class:`Sentence` or a list of forms.
        """
        if not isinstance(sentence, Sentence):
            sentence = Sentence.from_forms(sentence)
        nodes = {}

        def walk(item):
            label, *children = item
            nid = len(nodes)
            nodes[nid] = None
            kids = tuple(Leaf(c) if isinstance(c, int) else walk(c) for c in children)
            nodes[nid] = Node(label, kids)
            return nid

        walk(nested)
        return cls.build(nodes, 0, sentence)

    # -- queries ------------------------------------------------------------
    @property
    def n(self) -> int:
        return self.sentence.n

    def node_yield(self, node: int) -> list[int]:
        return list(self._yield(node))

    def _yield(self, node: int) -> tuple[int, ...]:
        if not isinstance(node, int) or not 0 <= node < len(self.nodes):
            raise KeyError(f"unknown node {node!r}")
        return self._yields[node]

    def label(self, node: int) -> str:
        return self.nodes[node].label

    def leaves(self) -> list[int]:
        """Terminal positions in depth-first order of the canonical tree."""
        result = []

        def visit(nid):
            for c in self.nodes[nid].children:
                if isinstance(c, Leaf):
                    result.append(c.index)
                else:
                    visit(c)

        visit(self.root)
        return result

    def parents(self) -> dict[int, int]:
        return {c: nid for nid, node in enumerate(self.nodes)
                for c in node.children if not isinstance(c, Leaf)}

    def is_continuous(self) -> bool:
        return not discontinuous_nodes(self)

    def to_nested(self, forms: bool = False):
        def visit(nid):
            node = self.nodes[nid]
            kids = []
            for c in node.children:
                if isinstance(c, Leaf):
                    kids.append(self.sentence.tokens[c.index].form if forms else c.index)
                else:
                    kids.append(visit(c))
            return (node.label, *kids)

        return visit(self.root)

    def structure(self):
        """Hashable summary of labels, yields and forms (ignores export-only columns)."""
        return (tuple((nd.label, y) for nd, y in zip(self.nodes, self._yields)),
                tuple(self.sentence.forms), self.to_nested())

    def with_sentence(self, sentence: Sentence) -> "ConstTree":
        return ConstTree(self.nodes, sentence)

    def __str__(self):
        return _discbracket_line(self)


def _validate(nodes: Sequence[Node], root: int, n: int):
    """Return per-node sorted yields, raising when invariants fail."""
    if not nodes:
        raise StructureError("tree has no nodes")
    seen = [0] * n
    yields: list = [None] * len(nodes)
    # canonical pre-order: every child id is larger than its parent id
    for nid in range(len(nodes) - 1, -1, -1):
        node = nodes[nid]
        if not node.children:
            raise StructureError(f"node {nid} ({node.label}) has no children")
        ys = []
        for c in node.children:
            if isinstance(c, Leaf):
                if not 0 <= c.index < n:
                    raise StructureError(f"terminal index {c.index} outside 0..{n - 1}")
                seen[c.index] += 1
                ys.append(c.index)
            else:
                if not nid < c < len(nodes) or yields[c] is None:
                    raise StructureError(f"node table is not in canonical order at node {nid}")
                ys.extend(yields[c])
        yields[nid] = tuple(sorted(ys))
    refs = [0] * len(nodes)
    for node in nodes:
        for c in node.children:
            if not isinstance(c, Leaf):
                refs[c] += 1
    if refs[root] or any(r != 1 for k, r in enumerate(refs) if k != root):
        raise StructureError("node graph is not a single tree")
    for i, count in enumerate(seen):
        if count != 1:
            what = "missing" if count == 0 else "duplicated"
            raise StructureError(f"terminal {i} {what}")
    return tuple(yields)


def node_yield(tree: ConstTree, node: int) -> list[int]:
    """Sorted terminal positions dominated by ``node``."""
    return tree.node_yield(node)


def is_interval(positions: Sequence[int]) -> bool:
    """``positions`` must be sorted."""
    return positions[-1] - positions[0] + 1 == len(positions)


def discontinuous_nodes(tree: ConstTree) -> list[int]:
    return [nid for nid in range(len(tree.nodes)) if not is_interval(tree._yields[nid])]


@dataclass(frozen=True)
class Corpus:
    entries: tuple[tuple[str, ConstTree], ...]

    def __post_init__(self):
        object.__setattr__(self, "entries", tuple(self.entries))
        seen = set()
        for sid, _ in self.entries:
            if sid in seen:
                raise TreebankError("duplicate sentence id", sentence_id=sid)
            seen.add(sid)

    @classmethod
    def from_trees(cls, trees: Iterable[ConstTree], ids: Iterable[str] | None = None):
        trees = list(trees)
        ids = [str(i + 1) for i in range(len(trees))] if ids is None else list(ids)
        return cls(tuple(zip(ids, trees)))

    @property
    def ids(self) -> list[str]:
        return [sid for sid, _ in self.entries]

    @property
    def trees(self) -> list[ConstTree]:
        return [t for _, t in self.entries]

    @property
    def sentences(self) -> list[Sentence]:
        return [t.sentence for _, t in self.entries]

    def __len__(self):
        return len(self.entries)

    def __iter__(self) -> Iterator[tuple[str, ConstTree]]:
        return iter(self.entries)

    def __getitem__(self, i):
        return self.entries[i]


# ---------------------------------------------------------------------------
# reading

_TOKEN_RE = re.compile(r"\(|\)|[^\s()]+")
_DISC_LEAF = re.compile(r"^(\d+)=(.+)$")


def read_corpus(text: str, format: str = "discbracket", *, root_label: str = DEFAULT_ROOT_LABEL,
                keep_pos_nodes: bool = False) -> Corpus:
    """Parse a whole file's contents.

    ``keep_pos_nodes`` inserts a preterminal node labeled with the tag for
    every export token; by default tags only live on :class:`Token`.
    """
    if format == "export":
        return _read_export(text, root_label, keep_pos_nodes)
    if format in ("discbracket", "bracket"):
        entries = []
        for lineno, line in enumerate(text.splitlines(), 1):
            if not line.strip():
                continue
            sid = str(len(entries) + 1)
            if "\t" in line and format == "discbracket":
                sid, line = line.split("\t", 1)
            entries.append((sid, _read_sexpr(line, format == "discbracket", sid, lineno)))
        return Corpus(tuple(entries))
    raise ValueError(f"unknown format {format!r}; expected one of {FORMATS}")


def read_tree(line: str, format: str = "discbracket") -> ConstTree:
    return _read_sexpr(line, format == "discbracket", None, None)


def _read_sexpr(line: str, indexed: bool, sid, lineno) -> ConstTree:
    toks = _TOKEN_RE.findall(line)
    pos = 0
    nodes: dict[int, Node] = {}
    forms: dict[int, str] = {}
    counter = [0]

    def fail(msg):
        raise TreebankError(msg, sentence_id=sid, line=lineno)

    def parse_node():
        nonlocal pos
        if pos >= len(toks) or toks[pos] != "(":
            fail("expected '('")
        pos += 1
        if pos >= len(toks) or toks[pos] in "()":
            fail("missing node label")
        label = unescape(toks[pos])
        pos += 1
        nid = len(nodes)
        nodes[nid] = None
        kids = []
        while pos < len(toks) and toks[pos] != ")":
            tok = toks[pos]
            if tok == "(":
                kids.append(parse_node())
                continue
            pos += 1
            if indexed:
                m = _DISC_LEAF.match(tok)
                if m is None:
                    fail(f"terminal {tok!r} lacks an INDEX= prefix")
                idx, form = int(m.group(1)), m.group(2)
            else:
                idx, form = counter[0], tok
                counter[0] += 1
            if idx in forms:
                raise StructureError(f"duplicate terminal index {idx}", sentence_id=sid, line=lineno)
            forms[idx] = unescape(form)
            kids.append(Leaf(idx))
        if pos >= len(toks):
            fail("unbalanced parentheses")
        pos += 1
        if not kids:
            fail(f"node {label} has no children")
        nodes[nid] = Node(label, tuple(kids))
        return nid

    parse_node()
    if pos != len(toks):
        fail("trailing material after tree")
    n = len(forms)
    if sorted(forms) != list(range(n)):
        raise StructureError("terminal indices are not 0..n-1", sentence_id=sid, line=lineno)
    sentence = Sentence(tuple(Token(forms[i]) for i in range(n)))
    try:
        return ConstTree.build(nodes, 0, sentence)
    except StructureError as e:
        raise StructureError(str(e), sentence_id=sid, line=lineno) from None


def _read_export(text: str, root_label: str, keep_pos_nodes: bool) -> Corpus:
    entries = []
    block = None
    start = 0
    sid = None
    warned = False
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.strip()
        if not line or line.startswith("%%"):
            continue
        if line.startswith("#BOS"):
            fields = line.split()
            if block is not None:
                raise TreebankError("#BOS inside an open sentence", sentence_id=sid, line=lineno)
            if len(fields) < 2:
                raise TreebankError("#BOS without sentence id", line=lineno)
            sid, block, start = fields[1], [], lineno
            continue
        if line.startswith("#EOS"):
            fields = line.split()
            if block is None:
                raise TreebankError("#EOS without #BOS", line=lineno)
            if len(fields) > 1 and fields[1] != sid:
                raise TreebankError(f"#EOS {fields[1]} closes #BOS {sid}", sentence_id=sid, line=lineno)
            entries.append((sid, _export_block(block, sid, root_label, keep_pos_nodes)))
            block = None
            continue
        if block is None:
            continue  # header tables (#FORMAT, #BOT/#EOT ...) are ignored
        fields = line.split()
        if len(fields) < 5:
            raise TreebankError(f"expected 5 columns, got {len(fields)}", sentence_id=sid, line=lineno)
        if len(fields) > 5 and not warned:
            logger.warning("sentence %s: secondary edges ignored", sid)
            warned = True
        block.append((lineno, fields[:5]))
    if block is not None:
        raise TreebankError("missing #EOS", sentence_id=sid, line=start)
    return Corpus(tuple(entries))


def _export_block(block, sid, root_label, keep_pos_nodes) -> ConstTree:
    tokens = []
    nodes: dict = {}
    members: dict[int, list] = {}
    lines = {}

    def parent_of(field, lineno):
        try:
            return int(field)
        except ValueError:
            raise TreebankError(f"bad parent field {field!r}", sentence_id=sid, line=lineno) from None

    def opt(v):
        return None if v == "--" else v

    for lineno, (word, tag, morph, edge, parent) in block:
        p = parent_of(parent, lineno)
        if word.startswith("#") and word[1:].isdigit():
            nid = int(word[1:])
            if nid < 500:
                raise TreebankError(f"nonterminal id {nid} below 500", sentence_id=sid, line=lineno)
            if nid in nodes:
                raise StructureError(f"duplicate node #{nid}", sentence_id=sid, line=lineno)
            nodes[nid] = (tag, opt(edge))
            lines[nid] = lineno
            members.setdefault(p, []).append(nid)
        else:
            i = len(tokens)
            tokens.append(Token(unescape(word), opt(tag), opt(morph), opt(edge)))
            members.setdefault(p, []).append(("t", i, lineno))

    table: dict = {}
    for nid, (label, func) in nodes.items():
        kids = members.get(nid)
        if not kids:
            raise StructureError(f"node #{nid} has no children", sentence_id=sid, line=lines[nid])
        table[nid] = (label, func, kids)
    for p, kids in members.items():
        if p != 0 and p not in nodes:
            where = kids[0][2] if isinstance(kids[0], tuple) else lines[kids[0]]
            raise StructureError(f"dangling parent id {p}", sentence_id=sid, line=where)
    if not tokens:
        raise TreebankError("sentence without tokens", sentence_id=sid)

    out: dict = {}

    def child(k):
        if isinstance(k, tuple):
            i = k[1]
            if keep_pos_nodes and tokens[i].pos is not None:
                key = ("pos", i)
                out[key] = Node(tokens[i].pos, (Leaf(i),))
                return key
            return Leaf(i)
        return k

    for nid, (label, func, kids) in table.items():
        out[nid] = Node(label, tuple(child(k) for k in kids), func)
    top = members.get(0, [])
    if len(top) == 1 and not isinstance(top[0], tuple):
        root = top[0]
    else:
        root = 0
        out[0] = Node(root_label, tuple(child(k) for k in top))
    sentence = Sentence(tuple(tokens))
    try:
        return ConstTree.build(out, root, sentence)
    except StructureError as e:
        raise StructureError(str(e), sentence_id=sid) from None


# ---------------------------------------------------------------------------
# writing

def write_corpus(corpus: Corpus, format: str = "discbracket", *, root_label: str = DEFAULT_ROOT_LABEL,
                 with_ids: bool = False) -> str:
    if format == "export":
        return "".join(_export_lines(sid, t, root_label) for sid, t in corpus)
    if format == "discbracket":
        lines = [(f"{sid}\t" if with_ids else "") + _discbracket_line(t) for sid, t in corpus]
    elif format == "bracket":
        lines = [bracket_line(t, sid) for sid, t in corpus]
    else:
        raise ValueError(f"unknown format {format!r}; expected one of {FORMATS}")
    return "".join(line + "\n" for line in lines)


def _discbracket_line(tree: ConstTree) -> str:
    forms = tree.sentence.forms

    def visit(nid):
        node = tree.nodes[nid]
        parts = [escape(node.label)]
        for c in node.children:
            parts.append(f"{c.index}={escape(forms[c.index])}" if isinstance(c, Leaf) else visit(c))
        return "(" + " ".join(parts) + ")"

    return visit(tree.root)


def bracket_line(tree: ConstTree, sentence_id=None) -> str:
    bad = discontinuous_nodes(tree)
    if bad:
        raise NotContinuousError(tree.nodes[bad[0]].label, bad[0], sentence_id)
    forms = tree.sentence.forms

    def visit(nid):
        node = tree.nodes[nid]
        parts = [escape(node.label)]
        for c in node.children:
            parts.append(escape(forms[c.index]) if isinstance(c, Leaf) else visit(c))
        return "(" + " ".join(parts) + ")"

    return visit(tree.root)


def _export_lines(sid, tree: ConstTree, root_label: str) -> str:
    root = tree.nodes[tree.root]
    virtual = root.label == root_label and root.func is None and (
        len(root.children) > 1 or isinstance(root.children[0], Leaf))
    # post-order numbering: children get smaller ids than their parents
    order: list[int] = []

    def visit(nid):
        for c in tree.nodes[nid].children:
            if not isinstance(c, Leaf):
                visit(c)
        order.append(nid)

    visit(tree.root)
    if virtual:
        order.pop()
    num = {nid: 500 + k for k, nid in enumerate(order)}
    parent_num = {}
    for nid, node in enumerate(tree.nodes):
        for c in node.children:
            parent_num[c] = num.get(nid, 0)

    def col(v):
        return "--" if v is None else v

    out = [f"#BOS {sid}\n"]
    for i, tok in enumerate(tree.sentence.tokens):
        out.append("\t".join([escape(tok.form), col(tok.pos), col(tok.morph), col(tok.edge),
                              str(parent_num[Leaf(i)])]) + "\n")
    for nid in order:
        node = tree.nodes[nid]
        out.append("\t".join([f"#{num[nid]}", node.label, "--", col(node.func),
                              str(parent_num.get(nid, 0))]) + "\n")
    out.append(f"#EOS {sid}\n")
    return "".join(out)

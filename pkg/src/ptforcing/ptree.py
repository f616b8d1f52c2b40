"""Depth-bounded partition trees and the Cross operation.

A :class:`PartitionTree` is a prefix-closed set of partition codes, stored as
a layered deterministic automaton: level ``x`` holds states, and an edge
labelled with a k-bit *column* (bit ``j`` = "position ``x`` lies in part
``j``") leads to a state of level ``x + 1``.  The nodes of the tree are the
labels of root paths.  Sharing identical subtrees keeps classes such as "all
2-covers of a fixed 64-position partition" small even though they have
``3**64`` paths.

Trees are canonical: states with equal futures are merged and states are
numbered in lexicographic visiting order, so two trees are equal exactly when
their node sets are equal.
"""

from __future__ import annotations

import itertools
import json
from functools import lru_cache
from typing import Callable, Hashable, Iterable, Iterator, Sequence

from .bitvec import BitString, LengthError, columns, from_columns

Layer = tuple[dict[int, int], ...]
ColumnFilter = Callable[[int, int], bool]


class TreeError(ValueError):
    pass


@lru_cache(maxsize=None)
def _lex_key_table(k: int) -> tuple[int, ...]:
    return tuple(int(format(c, f"0{k}b")[::-1], 2) for c in range(1 << k))


def lex_key(col: int, k: int) -> int:
    """Sort key putting columns in text order (part 0 is the leftmost bit)."""
    if k <= 12:
        return _lex_key_table(k)[col]
    return int(format(col, f"0{k}b")[::-1], 2)


def is_partition_code(sigma: BitString, k: int) -> bool:
    """Every coded position lies in at least one part (overlaps allowed)."""
    return all(columns(sigma, k))


def check_partition_code(sigma: BitString, k: int) -> None:
    if not is_partition_code(sigma, k):
        raise TreeError(f"{sigma} does not code an ordered {k}-partition")


class PartitionTree:
    """Prefix-closed set of ordered k-partition codes up to ``depth`` positions."""

    __slots__ = ("k", "depth", "_layers", "_rooted", "_hash")

    def __init__(self, k: int, depth: int, layers: Sequence[Layer], rooted: bool, *, _canonical: bool = False):
        if k <= 0:
            raise ValueError("k must be positive")
        if depth < 0:
            raise ValueError("depth must be non-negative")
        if len(layers) != depth:
            raise ValueError("need one layer per level")
        self.k = k
        self.depth = depth
        self._layers: tuple[Layer, ...] = tuple(tuple(dict(e) for e in layer) for layer in layers)
        self._rooted = rooted
        self._hash: int | None = None
        if not _canonical:
            self._layers, self._rooted = _canonicalize(self._layers, rooted, depth, prune=False)

    # -- constructors ------------------------------------------------------
    @classmethod
    def empty(cls, k: int, depth: int) -> PartitionTree:
        return cls(k, depth, [() for _ in range(depth)], False, _canonical=True)

    @classmethod
    def full(cls, k: int, depth: int) -> PartitionTree:
        """All ordered k-partition codes of ``0..depth-1``."""
        cols = range(1, 1 << k)
        return cls(k, depth, [({c: 0 for c in cols},) for _ in range(depth)], True, _canonical=True)._recanon()

    @classmethod
    def single(cls, k: int, code: BitString) -> PartitionTree:
        """The tree of prefixes of one full-depth code."""
        return cls.from_paths(k, code.length // k, [code])

    @classmethod
    def from_paths(cls, k: int, depth: int, codes: Iterable[BitString]) -> PartitionTree:
        return cls.from_nodes(k, depth, codes, closed=True)

    @classmethod
    def from_nodes(cls, k: int, depth: int, nodes: Iterable[BitString], closed: bool = False) -> PartitionTree:
        """Build from explicit nodes.

        With ``closed=False`` the node set must already be prefix-closed (a
        missing prefix is an error); with ``closed=True`` prefixes are added.
        """
        root: dict = {}
        have = set()
        for code in nodes:
            if code.length % k or code.length > k * depth:
                raise LengthError(f"node {code} has invalid length for k={k}, depth={depth}")
            check_partition_code(code, k)
            have.add(code)
        if not have:
            return cls.empty(k, depth)
        if not closed:
            for code in have:
                if code.length and code.prefix(code.length - k) not in have:
                    raise TreeError(f"node set not prefix-closed: missing parent of {code}")
        for code in have:
            node = root
            for col in columns(code, k):
                node = node.setdefault(col, {})
        # layered rebuild of the trie
        layers: list[list[dict[int, int]]] = []
        frontier = [root]
        for _x in range(depth):
            layer: list[dict[int, int]] = []
            nxt: list[dict] = []
            for node in frontier:
                edges = {}
                for col, child in node.items():
                    edges[col] = len(nxt)
                    nxt.append(child)
                layer.append(edges)
            layers.append(layer)
            frontier = nxt
        return cls(k, depth, [tuple(l) for l in layers], True)

    @classmethod
    def build(
        cls,
        k: int,
        depth: int,
        root: Hashable,
        step: Callable[[int, Hashable], Iterable[tuple[int, Hashable]]],
        *,
        prune: bool = True,
    ) -> PartitionTree:
        """Forward construction from an implicit deterministic automaton.

        ``step(x, key)`` yields ``(column, next_key)`` pairs for the edges
        leaving ``key`` at level ``x``; a column may appear only once per key.
        """
        layers: list[tuple[dict[int, int], ...]] = []
        keys: list[Hashable] = [root]
        for x in range(depth):
            index: dict[Hashable, int] = {}
            nxt: list[Hashable] = []
            layer = []
            for key in keys:
                edges: dict[int, int] = {}
                for col, nkey in step(x, key):
                    if col in edges:
                        raise TreeError("nondeterministic step function")
                    idx = index.get(nkey)
                    if idx is None:
                        idx = index[nkey] = len(nxt)
                        nxt.append(nkey)
                    edges[col] = idx
                layer.append(edges)
            layers.append(tuple(layer))
            keys = nxt
        t = cls(k, depth, layers, True, _canonical=True)
        return t.pruned() if prune else t._recanon()

    def _recanon(self, prune: bool = False) -> PartitionTree:
        layers, rooted = _canonicalize(self._layers, self._rooted, self.depth, prune)
        return PartitionTree(self.k, self.depth, layers, rooted, _canonical=True)

    # -- structure access -----------------------------------------------------
    @property
    def is_empty(self) -> bool:
        return not self._rooted

    def width(self, x: int) -> int:
        if not self._rooted:
            return 0
        if x < self.depth:
            return len(self._layers[x])
        if self.depth == 0:
            return 1
        return 1 + max((n for e in self._layers[-1] for n in e.values()), default=-1)

    def edges(self, x: int, state: int) -> dict[int, int]:
        return self._layers[x][state]

    def layer(self, x: int) -> Layer:
        return self._layers[x]

    def size(self) -> int:
        """Number of automaton states (not nodes)."""
        return sum(self.width(x) for x in range(self.depth + 1))

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, PartitionTree):
            return NotImplemented
        return (self.k, self.depth, self._rooted, self._layers) == (
            other.k,
            other.depth,
            other._rooted,
            other._layers,
        )

    def __hash__(self) -> int:
        if self._hash is None:
            self._hash = hash(
                (self.k, self.depth, self._rooted, tuple(tuple(tuple(sorted(e.items())) for e in l) for l in self._layers))
            )
        return self._hash

    def __repr__(self) -> str:
        return f"PartitionTree(k={self.k}, depth={self.depth}, states={self.size()}, paths={self.count_paths()})"

    # -- queries --------------------------------------------------------------
    def _reachable(self, d: int) -> set[int]:
        cur = {0} if self._rooted else set()
        for x in range(d):
            cur = {n for s in cur for n in self._layers[x][s].values()}
        return cur

    def nonempty_at_depth(self, d: int) -> bool:
        if d > self.depth:
            raise ValueError(f"depth {d} exceeds tree depth {self.depth}")
        return bool(self._reachable(d))

    def count_nodes_at(self, d: int) -> int:
        counts = {0: 1} if self._rooted else {}
        for x in range(d):
            nxt: dict[int, int] = {}
            for s, c in counts.items():
                for n in self._layers[x][s].values():
                    nxt[n] = nxt.get(n, 0) + c
            counts = nxt
        return sum(counts.values())

    def count_paths(self) -> int:
        return self.count_nodes_at(self.depth)

    def sorted_edges(self, x: int, state: int) -> list[tuple[int, int]]:
        return sorted(self._layers[x][state].items(), key=lambda kv: lex_key(kv[0], self.k))

    def iter_nodes(self) -> Iterator[BitString]:
        """All nodes, depth-first in lexicographic order."""
        if not self._rooted:
            return
        stack: list[tuple[int, int, list[int]]] = [(0, 0, [])]
        while stack:
            x, s, cols = stack.pop()
            yield from_columns(cols, self.k)
            if x < self.depth:
                for col, n in reversed(self.sorted_edges(x, s)):
                    stack.append((x + 1, n, cols + [col]))

    def nodes(self) -> frozenset[BitString]:
        return frozenset(self.iter_nodes())

    def paths_at_depth(self, d: int | None = None) -> frozenset[BitString]:
        """All nodes of length ``k·d`` (default: full depth)."""
        d = self.depth if d is None else d
        if d > self.depth:
            raise ValueError(f"depth {d} exceeds tree depth {self.depth}")
        return frozenset(c for c in self.iter_paths_at(d))

    def iter_paths_at(self, d: int) -> Iterator[BitString]:
        if not self._rooted:
            return
        stack: list[tuple[int, int, list[int]]] = [(0, 0, [])]
        while stack:
            x, s, cols = stack.pop()
            if x == d:
                yield from_columns(cols, self.k)
                continue
            for col, n in reversed(self.sorted_edges(x, s)):
                stack.append((x + 1, n, cols + [col]))

    def iter_paths(self) -> Iterator[BitString]:
        return self.iter_paths_at(self.depth)

    def contains(self, code: BitString) -> bool:
        if code.length % self.k or code.length > self.k * self.depth or not self._rooted:
            return False
        s = 0
        for x, col in enumerate(columns(code, self.k)):
            nxt = self._layers[x][s].get(col)
            if nxt is None:
                return False
            s = nxt
        return True

    def first_path(self, allowed: ColumnFilter | None = None) -> list[int] | None:
        """Columns of the lexicographically least full-depth path through
        edges accepted by ``allowed(x, column)``, or ``None``."""
        alive = self._alive(allowed)
        if not self._rooted or 0 not in alive[0]:
            return None
        s, cols = 0, []
        for x in range(self.depth):
            for col, n in self.sorted_edges(x, s):
                if n in alive[x + 1] and (allowed is None or allowed(x, col)):
                    cols.append(col)
                    s = n
                    break
        return cols

    def exists_path(self, allowed: ColumnFilter | None = None) -> bool:
        if not self._rooted:
            return False
        cur = {0}
        for x in range(self.depth):
            cur = {
                n for s in cur for col, n in self._layers[x][s].items() if allowed is None or allowed(x, col)
            }
            if not cur:
                return False
        return True

    def _alive(self, allowed: ColumnFilter | None = None) -> list[set[int]]:
        """Per level, the states from which full depth is reachable."""
        alive: list[set[int]] = [set() for _ in range(self.depth + 1)]
        alive[self.depth] = set(range(self.width(self.depth)))
        for x in range(self.depth - 1, -1, -1):
            nxt = alive[x + 1]
            alive[x] = {
                s
                for s, e in enumerate(self._layers[x])
                if any(n in nxt and (allowed is None or allowed(x, c)) for c, n in e.items())
            }
        return alive

    # -- transformations --------------------------------------------------------
    def pruned(self) -> PartitionTree:
        """Drop every node without a full-depth extension."""
        return self._recanon(prune=True)

    def restrict_columns(self, allowed: ColumnFilter, *, prune: bool = True) -> PartitionTree:
        layers = [
            tuple({c: n for c, n in e.items() if allowed(x, c)} for e in layer) for x, layer in enumerate(self._layers)
        ]
        t = PartitionTree(self.k, self.depth, layers, self._rooted, _canonical=True)
        return t._recanon(prune=prune)

    def subtree(self, rho: BitString) -> PartitionTree:
        """``T_ρ``: the nodes compatible with ``ρ`` (unpruned)."""
        rcols = columns(rho, self.k)
        return self.restrict_columns(lambda x, c: x >= len(rcols) or c == rcols[x], prune=False)

    def truncate(self, d: int) -> PartitionTree:
        """The nodes of length at most ``k·d``."""
        return PartitionTree(self.k, d, self._layers[:d], self._rooted)

    # -- serialization ----------------------------------------------------------
    def dumps(self) -> str:
        """Header ``k=<k> depth=<d>`` then one node per line (``ε`` as an empty line)."""
        lines = [f"k={self.k} depth={self.depth}"]
        for node in sorted(self.iter_nodes(), key=lambda b: (b.length, str(b))):
            lines.append(str(node))
        return "\n".join(lines) + "\n"

    @classmethod
    def loads(cls, text: str) -> PartitionTree:
        if text.endswith("\n"):
            text = text[:-1]
        lines = text.split("\n")
        header = lines[0].split()
        try:
            fields = dict(tok.split("=", 1) for tok in header)
            k, depth = int(fields["k"]), int(fields["depth"])
        except (ValueError, KeyError) as exc:
            raise TreeError(f"bad tree header: {lines[0]!r}") from exc
        body = lines[1:]
        nodes = [BitString.parse(line) for line in body]
        if body and len(body) != len(set(body)):
            raise TreeError("duplicate node lines")
        return cls.from_nodes(k, depth, nodes)

    def to_json(self) -> dict:
        return {
            "k": self.k,
            "depth": self.depth,
            "rooted": self._rooted,
            "layers": [[sorted(e.items()) for e in layer] for layer in self._layers],
        }

    @classmethod
    def from_json(cls, data: dict) -> PartitionTree:
        layers = [tuple({int(c): int(n) for c, n in e} for e in layer) for layer in data["layers"]]
        for x, layer in enumerate(layers):
            for e in layer:
                if any(c == 0 or c >> data["k"] for c in e):
                    raise TreeError(f"invalid column at level {x}")
        return cls(int(data["k"]), int(data["depth"]), layers, bool(data["rooted"]))

    def dumps_json(self) -> str:
        return json.dumps(self.to_json(), separators=(",", ":"))


def _canonicalize(
    layers: Sequence[Layer], rooted: bool, depth: int, prune: bool
) -> tuple[tuple[Layer, ...], bool]:
    """Merge states with equal futures and renumber in visiting order."""
    if not rooted:
        return tuple(() for _ in range(depth)), False
    # bottom-up classes; None marks a dead state when pruning
    width_last = 1 + max((n for e in layers[-1] for n in e.values()), default=-1) if depth else 1
    cls_next: list[int | None] = [0] * width_last
    sigs_per_level: list[list[tuple | None]] = [None] * depth  # type: ignore[list-item]
    classes: list[list[int | None]] = [None] * (depth + 1)  # type: ignore[list-item]
    classes[depth] = cls_next
    for x in range(depth - 1, -1, -1):
        table: dict[tuple, int] = {}
        cls_here: list[int | None] = []
        sigs: list[tuple | None] = []
        for e in layers[x]:
            sig = tuple(sorted((c, cls_next[n]) for c, n in e.items() if cls_next[n] is not None))
            if prune and not sig:
                cls_here.append(None)
                sigs.append(None)
                continue
            cid = table.setdefault(sig, len(table))
            cls_here.append(cid)
            sigs.append(sig)
        classes[x] = cls_here
        sigs_per_level[x] = sigs
        cls_next = cls_here
    if classes[0][0] is None:
        return tuple(() for _ in range(depth)), False
    # forward renumbering from the root, edges visited in sorted order
    out: list[Layer] = []
    cur = [classes[0][0]]
    for x in range(depth):
        # representative raw state for each class at level x
        rep_x: dict[int, int] = {}
        for s, c in enumerate(classes[x]):
            if c is not None and c not in rep_x:
                rep_x[c] = s
        nxt_ids: dict[int, int] = {}
        layer = []
        for c in cur:
            sig = sigs_per_level[x][rep_x[c]]
            edges = {}
            for col, nc in sig:  # type: ignore[union-attr]
                nid = nxt_ids.get(nc)
                if nid is None:
                    nid = nxt_ids[nc] = len(nxt_ids)
                edges[col] = nid
            layer.append(edges)
        out.append(tuple(layer))
        order = sorted(nxt_ids.items(), key=lambda kv: kv[1])
        cur = [nc for nc, _ in order]
    return tuple(out), True


# -- Cross -------------------------------------------------------------------


@lru_cache(maxsize=None)
def pair_list(n: int) -> tuple[tuple[int, int], ...]:
    return tuple(itertools.combinations(range(n), 2))


def cross_part_index(j: int, p: int, q: int, n: int) -> int:
    """Output part of ``X^p_j ∩ X^q_j``: parts are ordered by ``(j, p, q)``."""
    return j * len(pair_list(n)) + pair_list(n).index((p, q))


@lru_cache(maxsize=1 << 20)
def cross_column(cols: tuple[int, ...], k: int) -> int:
    pairs = pair_list(len(cols))
    out = 0
    bit = 0
    for j in range(k):
        for p, q in pairs:
            if (cols[p] >> j) & (cols[q] >> j) & 1:
                out |= 1 << bit
            bit += 1
    return out


def cross_codes(codes: Sequence[BitString], k: int) -> BitString:
    """Pairwise part intersections of ``n`` k-partition codes of equal length."""
    n = len(codes)
    if n < 2:
        raise ValueError("Cross needs at least two codes")
    L = codes[0].length
    if any(c.length != L for c in codes):
        raise LengthError("codes must share a length")
    if L % k:
        raise LengthError(f"code length {L} is not a multiple of {k}")
    K = k * len(pair_list(n))
    mask = (1 << k) - 1
    vals = [c.value for c in codes]
    out = 0
    for x in range(L // k):
        sh = k * x
        out |= cross_column(tuple((v >> sh) & mask for v in vals), k) << (K * x)
    return BitString(out, K * (L // k))


def cross_trees(trees: Sequence[PartitionTree]) -> PartitionTree:
    """Tree whose full-depth paths are the Crosses of path tuples."""
    n = len(trees)
    if n < 2:
        raise ValueError("Cross needs at least two trees")
    k, depth = trees[0].k, trees[0].depth
    if any(t.k != k or t.depth != depth for t in trees):
        raise TreeError("trees must share k and depth")
    trees = [t.pruned() for t in trees]
    K = k * len(pair_list(n))
    if any(t.is_empty for t in trees):
        return PartitionTree.empty(K, depth)

    def step(x: int, key: frozenset) -> Iterator[tuple[int, frozenset]]:
        out: dict[int, set] = {}
        for states in key:
            options = [list(t.edges(x, s).items()) for t, s in zip(trees, states)]
            for combo in itertools.product(*options):
                col = cross_column(tuple(c for c, _ in combo), k)
                out.setdefault(col, set()).add(tuple(nx for _, nx in combo))
        for col, nxt in out.items():
            yield col, frozenset(nxt)

    return PartitionTree.build(K, depth, frozenset([(0,) * n]), step)


def nonempty_at_depth(T: PartitionTree, d: int) -> bool:
    return T.nonempty_at_depth(d)


def paths_at_depth(T: PartitionTree, d: int) -> frozenset[BitString]:
    return T.paths_at_depth(d)


def refine_below(
    T: PartitionTree,
    i: int,
    tau: BitString,
    mode: str = "prefix",
    stem: BitString = BitString(0, 0),
) -> PartitionTree:
    """Keep the paths ``X`` with ``τ ≺ X_i/σ`` (``prefix``) or ``τ ⊆ X_i/σ``
    (``subset``), where ``σ`` is ``stem``; the result is pruned."""
    if not 0 <= i < T.k:
        raise IndexError(f"part {i} out of range for k={T.k}")
    if mode not in ("prefix", "subset"):
        raise ValueError(f"unknown refinement mode {mode!r}")
    lo = stem.length
    # positions fixed by the stem
    for x in range(min(lo, tau.length)):
        if mode == "prefix" and tau.bit(x) != stem.bit(x):
            return PartitionTree.empty(T.k, T.depth)
        if mode == "subset" and tau.bit(x) and not stem.bit(x):
            return PartitionTree.empty(T.k, T.depth)
    for x in range(max(lo, T.depth), tau.length):
        if tau.bit(x):
            return PartitionTree.empty(T.k, T.depth)
    hi = min(tau.length, T.depth)
    if mode == "prefix":
        allowed = lambda x, c: not (lo <= x < hi) or ((c >> i) & 1) == tau.bit(x)
    else:
        allowed = lambda x, c: not (lo <= x < hi and tau.bit(x)) or (c >> i) & 1 == 1
    return T.restrict_columns(allowed)

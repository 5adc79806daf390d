"""Regular-vine tree sequences.

A structure is stored as an explicit list of trees.  Tree ``i`` (1-based)
holds ``d - i`` edges, each labelled ``{j, k | D}`` with ``j < k`` and
``|D| = i - 1``.  Variable indices are 1-based throughout this module.

Raw input to :func:`validate` follows the recursive definition directly:
tree 1 is a list of vertex pairs ``(j, k)``; every later tree is a list of
pairs ``(a, b)`` whose members name edges of the previous tree by their
complete union (any iterable of variable indices).
"""
from __future__ import annotations

from dataclasses import dataclass
from itertools import combinations
from typing import Iterable, Iterator, Sequence

from .errors import BadDimension, BadIndex, BadTruncationLevel, NotATree, ProximityViolation, StructureError


@dataclass(frozen=True, order=True)
class EdgeSpec:
    conditioned: tuple[int, int]
    conditioning: tuple[int, ...] = ()

    def __post_init__(self):
        j, k = self.conditioned
        if j == k:
            raise StructureError(f"conditioned pair must be distinct, got {self.conditioned}")
        if j in self.conditioning or k in self.conditioning:
            raise StructureError(f"conditioned variables {self.conditioned} overlap conditioning set")
        if j > k:
            object.__setattr__(self, "conditioned", (k, j))
        object.__setattr__(self, "conditioning", tuple(sorted(self.conditioning)))

    @property
    def complete_union(self) -> frozenset[int]:
        return frozenset(self.conditioned) | frozenset(self.conditioning)

    @property
    def label(self) -> str:
        j, k = self.conditioned
        if not self.conditioning:
            return f"{j},{k}"
        return f"{j},{k}|{','.join(map(str, self.conditioning))}"

    def to_record(self) -> dict:
        return {"conditioned": list(self.conditioned), "conditioning": list(self.conditioning)}

    @classmethod
    def from_record(cls, record) -> "EdgeSpec":
        if isinstance(record, EdgeSpec):
            return record
        return cls(tuple(int(v) for v in record["conditioned"]),
                   tuple(int(v) for v in record.get("conditioning", ())))


@dataclass(frozen=True)
class RVineStructure:
    d: int
    trees: tuple[tuple[EdgeSpec, ...], ...]

    @property
    def n_edges(self) -> int:
        return sum(len(t) for t in self.trees)

    def edges(self) -> Iterator[tuple[int, int, EdgeSpec]]:
        """Yield ``(tree, position, edge)`` with ``tree`` 1-based."""
        for i, tree in enumerate(self.trees, start=1):
            for pos, edge in enumerate(tree):
                yield i, pos, edge

    def to_records(self) -> list[list[dict]]:
        return [[e.to_record() for e in tree] for tree in self.trees]

    @classmethod
    def from_records(cls, records) -> "RVineStructure":
        return from_labels(records)

    def __str__(self):
        lines = [f"R-vine on {self.d} variables"]
        for i, tree in enumerate(self.trees, start=1):
            lines.append(f"  T{i}: " + "  ".join(e.label for e in tree))
        return "\n".join(lines)


class _UnionFind:
    def __init__(self, items):
        self.parent = {x: x for x in items}

    def find(self, x):
        while self.parent[x] != x:
            self.parent[x] = self.parent[self.parent[x]]
            x = self.parent[x]
        return x

    def union(self, a, b) -> bool:
        ra, rb = self.find(a), self.find(b)
        if ra == rb:
            return False
        self.parent[ra] = rb
        return True


def _check_tree(nodes, pairs, level):
    if len(pairs) != len(nodes) - 1:
        raise NotATree(f"tree {level} needs {len(nodes) - 1} edges, got {len(pairs)}")
    uf = _UnionFind(nodes)
    for a, b in pairs:
        if a == b:
            raise NotATree(f"tree {level} has a self-loop")
        if not uf.union(a, b):
            raise NotATree(f"tree {level} contains a cycle")
    # n-1 edges and no cycle implies connected


def validate(trees: Sequence[Sequence]) -> RVineStructure:
    """Validate a raw tree sequence and derive the edge labels.

    Raises
    ------
    NotATree
        A level is disconnected or contains a cycle.
    ProximityViolation
        Two joined nodes do not share exactly one element.
    BadIndex
        A vertex is outside ``1..d`` or a node reference is unknown.
    """
    trees = list(trees)
    d = len(trees) + 1
    if d < 2:
        raise BadDimension("an R-vine needs at least two variables")

    vertices = list(range(1, d + 1))
    first = []
    for pair in trees[0]:
        j, k = (int(v) for v in pair)
        if not (1 <= j <= d and 1 <= k <= d):
            raise BadIndex(f"vertex index out of range 1..{d}: {(j, k)}")
        first.append((j, k))
    _check_tree(vertices, first, 1)

    # node key -> (children, edge) where the key is the complete union
    prev = {}
    level_edges = []
    for j, k in first:
        key = frozenset((j, k))
        if key in prev:
            raise NotATree("tree 1 repeats an edge")
        prev[key] = (frozenset((j, k)), EdgeSpec((j, k)))
        level_edges.append(prev[key][1])
    out = [tuple(sorted(level_edges))]

    for level in range(2, d):
        raw = trees[level - 1]
        pairs = []
        for a, b in raw:
            ka, kb = frozenset(int(v) for v in a), frozenset(int(v) for v in b)
            for key in (ka, kb):
                if key not in prev:
                    raise BadIndex(f"tree {level} refers to unknown node {sorted(key)}")
            pairs.append((ka, kb))
        _check_tree(list(prev), pairs, level)

        current = {}
        level_edges = []
        for ka, kb in pairs:
            shared = prev[ka][0] & prev[kb][0]
            if len(shared) != 1:
                raise ProximityViolation(
                    f"tree {level}: nodes {sorted(ka)} and {sorted(kb)} share {len(shared)} elements")
            cond = ka & kb
            ca, cb = ka - cond, kb - cond
            if len(ca) != 1 or len(cb) != 1:
                raise ProximityViolation(f"tree {level}: conditioned sets are not singletons")
            key = ka | kb
            if key in current:
                raise NotATree(f"tree {level} repeats the complete union {sorted(key)}")
            edge = EdgeSpec((next(iter(ca)), next(iter(cb))), tuple(cond))
            current[key] = (frozenset((ka, kb)), edge)
            level_edges.append(edge)
        out.append(tuple(sorted(level_edges)))
        prev = current

    seen = set()
    for tree in out:
        for e in tree:
            if e.conditioned in seen:
                raise StructureError(f"conditioned pair {e.conditioned} occurs twice")
            seen.add(e.conditioned)
    return RVineStructure(d, tuple(out))


def from_labels(labels: Iterable[Iterable]) -> RVineStructure:
    """Rebuild a structure from per-tree edge labels (records or EdgeSpec)."""
    raw = []
    for i, tree in enumerate(labels, start=1):
        level = []
        for rec in tree:
            e = EdgeSpec.from_record(rec)
            if len(e.conditioning) != i - 1:
                raise StructureError(f"tree {i} edge {e.label} needs a conditioning set of size {i - 1}")
            j, k = e.conditioned
            if i == 1:
                level.append((j, k))
            else:
                level.append(((j, *e.conditioning), (k, *e.conditioning)))
        raw.append(level)
    return validate(raw)


def _check_dim(d):
    if int(d) != d or d < 2:
        raise BadDimension(f"dimension must be an integer >= 2, got {d}")
    return int(d)


def dvine(d: int) -> RVineStructure:
    """Path-structured vine 1-2-...-d."""
    d = _check_dim(d)
    raw = []
    for t in range(1, d):
        if t == 1:
            raw.append([(i, i + 1) for i in range(1, d)])
        else:
            raw.append([(range(i, i + t), range(i + 1, i + t + 1)) for i in range(1, d - t + 1)])
    return validate(raw)


def cvine(d: int) -> RVineStructure:
    """Star-structured vine; tree ``t`` is rooted at variable ``t``."""
    d = _check_dim(d)
    labels = [[EdgeSpec((t, k), tuple(range(1, t))) for k in range(t + 1, d + 1)] for t in range(1, d)]
    return from_labels(labels)


def pair_count(d: int, level: int) -> int:
    """Number of pair copulas left in an ``level``-truncated vine."""
    d = _check_dim(d)
    if int(level) != level or not 0 <= level <= d - 1:
        raise BadTruncationLevel(f"truncation level must lie in 0..{d - 1}, got {level}")
    return level * (2 * d - (level + 1)) // 2


def all_conditioned_pairs(d: int) -> set[tuple[int, int]]:
    return set(combinations(range(1, d + 1), 2))

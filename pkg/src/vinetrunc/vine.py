"""Truncated R-vine copula models: density, likelihood, truncation, sampling."""
from __future__ import annotations

import csv
import json
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence, Union

import numpy as np
from scipy import special

from . import bicop
from .bicop import EPS, INDEPENDENCE, Family, PairCopulaSpec
from .errors import BadTruncationLevel, DomainError, StructureMismatch
from .structure import EdgeSpec, RVineStructure, from_labels

ArrayLike = Union[np.ndarray, Sequence]


@dataclass(frozen=True)
class VineModel:
    structure: RVineStructure
    pair_copulas: tuple[tuple[PairCopulaSpec, ...], ...]
    truncation_level: int

    def __post_init__(self):
        pcs = tuple(tuple(tree) for tree in self.pair_copulas)
        object.__setattr__(self, "pair_copulas", pcs)
        if len(pcs) != len(self.structure.trees) or any(
                len(p) != len(t) for p, t in zip(pcs, self.structure.trees)):
            raise StructureMismatch("pair copulas must match the structure tree by tree")
        lvl = self.truncation_level
        if int(lvl) != lvl or not 0 <= lvl <= self.structure.d - 1:
            raise BadTruncationLevel(f"truncation level must lie in 0..{self.structure.d - 1}, got {lvl}")
        object.__setattr__(self, "truncation_level", int(lvl))
        for tree in pcs[lvl:]:
            if any(pc.family is not Family.INDEPENDENCE for pc in tree):
                raise BadTruncationLevel(f"edges above tree {lvl} must be independence copulas")

    @property
    def d(self) -> int:
        return self.structure.d

    @property
    def families(self) -> tuple[tuple[Family, ...], ...]:
        return tuple(tuple(pc.family for pc in tree) for tree in self.pair_copulas)

    @property
    def n_params(self) -> int:
        return sum(pc.n_params for tree in self.pair_copulas for pc in tree)

    def parameters(self) -> np.ndarray:
        """Gaussian-edge correlations in (tree, edge) order."""
        return np.array([pc.rho for tree in self.pair_copulas for pc in tree
                         if pc.family is Family.GAUSSIAN], dtype=float)

    def with_parameters(self, theta: ArrayLike) -> "VineModel":
        theta = np.asarray(theta, dtype=float).ravel()
        if theta.size != self.n_params:
            raise StructureMismatch(f"expected {self.n_params} parameters, got {theta.size}")
        it = iter(theta)
        pcs = tuple(tuple(PairCopulaSpec.gaussian(next(it)) if pc.family is Family.GAUSSIAN else pc
                          for pc in tree) for tree in self.pair_copulas)
        return VineModel(self.structure, pcs, self.truncation_level)

    def to_dict(self) -> dict:
        trees = []
        for tree, pcs in zip(self.structure.trees, self.pair_copulas):
            trees.append([{**e.to_record(), **pc.to_record()} for e, pc in zip(tree, pcs)])
        return {"d": self.d, "truncation_level": self.truncation_level, "trees": trees}

    @classmethod
    def from_dict(cls, doc: dict) -> "VineModel":
        structure = from_labels(doc["trees"])
        lookup = {}
        for tree in doc["trees"]:
            for rec in tree:
                e = EdgeSpec.from_record(rec)
                lookup[e] = PairCopulaSpec(Family(rec.get("family", "indep")), rec.get("parameter"))
        if structure.d != doc.get("d", structure.d):
            raise StructureMismatch("model file dimension disagrees with its trees")
        pcs = [[lookup[e] for e in tree] for tree in structure.trees]
        return cls(structure, pcs, doc.get("truncation_level", _highest_dependent_tree(pcs)))


def _highest_dependent_tree(pcs) -> int:
    level = 0
    for i, tree in enumerate(pcs, start=1):
        if any(pc.family is not Family.INDEPENDENCE for pc in tree):
            level = i
    return level


def make_model(structure: RVineStructure, pair_copulas, truncation_level: int | None = None) -> VineModel:
    """Build a model; the truncation level defaults to the last dependent tree."""
    pcs = [list(tree) for tree in pair_copulas]
    pcs += [[INDEPENDENCE] * len(t) for t in structure.trees[len(pcs):]]
    if truncation_level is None:
        truncation_level = _highest_dependent_tree(pcs)
    return VineModel(structure, pcs, truncation_level)


def independence_model(structure: RVineStructure) -> VineModel:
    return make_model(structure, [], 0)


def from_families(structure: RVineStructure, families, theta: ArrayLike | None = None) -> VineModel:
    """Model with the given edge families; Gaussian edges take ``theta`` (default 0)."""
    fams = [[Family(f) for f in tree] for tree in families]
    fams += [[Family.INDEPENDENCE] * len(t) for t in structure.trees[len(fams):]]
    n_gauss = sum(f is Family.GAUSSIAN for tree in fams for f in tree)
    theta = np.zeros(n_gauss) if theta is None else np.asarray(theta, dtype=float).ravel()
    if theta.size != n_gauss:
        raise StructureMismatch(f"expected {n_gauss} parameters, got {theta.size}")
    it = iter(theta)
    pcs = [[PairCopulaSpec.gaussian(next(it)) if f is Family.GAUSSIAN else INDEPENDENCE for f in tree]
           for tree in fams]
    return make_model(structure, pcs)


def gaussian_from_taus(structure: RVineStructure, taus: Sequence[float]) -> VineModel:
    """Gaussian vine with one Kendall's tau per tree; a tau of 0 gives independence."""
    pcs = []
    for tree, tau in zip(structure.trees, taus):
        pc = INDEPENDENCE if tau == 0 else PairCopulaSpec.gaussian(bicop.tau_to_rho(tau))
        pcs.append([pc] * len(tree))
    return make_model(structure, pcs)


def truncate(model: VineModel, level: int) -> VineModel:
    """Replace every pair copula above tree ``level`` by independence."""
    d = model.d
    if int(level) != level or not 0 <= level <= d - 1:
        raise BadTruncationLevel(f"truncation level must lie in 0..{d - 1}, got {level}")
    level = int(level)
    pcs = [tree if i <= level else (INDEPENDENCE,) * len(tree)
           for i, tree in enumerate(model.pair_copulas, start=1)]
    return VineModel(model.structure, pcs, min(level, model.truncation_level))


@dataclass(frozen=True, eq=False)
class Dataset:
    values: np.ndarray

    def __post_init__(self):
        v = np.array(self.values, dtype=float, copy=True)
        if v.ndim != 2:
            raise StructureMismatch("a dataset is an n x d matrix")
        if np.any(~((v > 0.0) & (v < 1.0))):
            raise DomainError("pseudo-observations must lie strictly inside (0, 1)")
        v.setflags(write=False)
        object.__setattr__(self, "values", v)

    @property
    def n(self) -> int:
        return self.values.shape[0]

    @property
    def d(self) -> int:
        return self.values.shape[1]

    def to_csv(self, path) -> None:
        write_csv(path, self.values)

    @classmethod
    def from_csv(cls, path) -> "Dataset":
        return cls(read_csv(path))


def write_csv(path, values: np.ndarray, header: Sequence[str] | None = None) -> None:
    values = np.asarray(values, dtype=float)
    d = values.shape[1] if values.ndim == 2 else len(header or ())
    header = header or [f"u{j}" for j in range(1, d + 1)]
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in values:
            w.writerow([repr(float(x)) for x in row])


def read_csv(path) -> np.ndarray:
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    if not rows:
        raise StructureMismatch(f"{path} is empty")
    header, body = rows[0], [r for r in rows[1:] if r]
    if not body:
        return np.empty((0, len(header)))
    return np.array([[float(x) for x in r] for r in body], dtype=float)


def save_model(model: VineModel, path) -> None:
    Path(path).write_text(json.dumps(model.to_dict(), indent=2) + "\n")


def load_model(path) -> VineModel:
    return VineModel.from_dict(json.loads(Path(path).read_text()))


def _as_points(model: VineModel, u) -> tuple[np.ndarray, bool]:
    if isinstance(u, Dataset):
        arr, single = u.values, False
    else:
        arr = np.asarray(u, dtype=float)
        single = arr.ndim == 1
        arr = np.atleast_2d(arr)
        if np.any(~((arr > 0.0) & (arr < 1.0))):
            raise DomainError("evaluation points must lie strictly inside (0, 1)")
    if arr.shape[1] != model.d:
        raise StructureMismatch(f"model has dimension {model.d}, data has {arr.shape[1]} columns")
    return np.clip(arr, EPS, 1.0 - EPS), single


def _edge(pc: PairCopulaSpec, a, b, need_h: bool):
    # log c(a, b), C(a|b), C(b|a); the normal scores are shared between the three
    if pc.family is Family.INDEPENDENCE:
        return None, a, b
    x, y = special.ndtri(a), special.ndtri(b)
    rho = pc.rho
    logc = bicop.gaussian_log_density_scores(rho, x, y)
    if not need_h:
        return logc, None, None
    s = np.sqrt(1.0 - rho * rho)
    ha = np.clip(special.ndtr((x - rho * y) / s), EPS, 1.0 - EPS)
    hb = np.clip(special.ndtr((y - rho * x) / s), EPS, 1.0 - EPS)
    return logc, ha, hb


def _log_density_terms(model: VineModel, u: np.ndarray) -> np.ndarray:
    n = u.shape[0]
    total = np.zeros(n)
    cond = {(v, frozenset()): u[:, v - 1] for v in range(1, model.d + 1)}
    lvl = model.truncation_level
    for i in range(1, lvl + 1):
        for e, pc in zip(model.structure.trees[i - 1], model.pair_copulas[i - 1]):
            j, k = e.conditioned
            D = frozenset(e.conditioning)
            a, b = cond[(j, D)], cond[(k, D)]
            logc, ha, hb = _edge(pc, a, b, need_h=i < lvl)
            if logc is not None:
                total += logc
            if i < lvl:
                cond[(j, D | {k})] = ha
                cond[(k, D | {j})] = hb
    return total


def log_density(model: VineModel, u):
    """Copula log-density at one point (1-D input) or at each row of a matrix."""
    arr, single = _as_points(model, u)
    out = _log_density_terms(model, arr)
    return float(out[0]) if single else out


def log_likelihood(model: VineModel, data) -> float:
    arr, _ = _as_points(model, data)
    return float(np.sum(_log_density_terms(model, arr)))


def _sampling_plan(structure: RVineStructure):
    """Variable order plus, per variable, its chain of edges ordered by tree.

    A variable that never appears in a conditioning set can be sampled last;
    peeling such leaves repeatedly yields the order.
    """
    pool = {e: i for i, _, e in structure.edges()}
    remaining = set(range(1, structure.d + 1))
    plan = []
    while len(remaining) > 1:
        for v in sorted(remaining, reverse=True):
            if any(v in e.conditioning for e in pool):
                continue
            chain = sorted((e for e in pool if v in e.conditioned), key=lambda e: pool[e])
            if [pool[e] for e in chain] != list(range(1, len(remaining))):
                continue
            break
        else:  # pragma: no cover - every valid R-vine has a leaf
            raise StructureMismatch("could not derive a sampling order")
        links = []
        for e in chain:
            partner = e.conditioned[0] if e.conditioned[1] == v else e.conditioned[1]
            links.append((e, partner, frozenset(e.conditioning)))
        for prev, nxt in zip(links, links[1:]):
            if prev[2] | {prev[1]} != nxt[2]:  # pragma: no cover
                raise StructureMismatch("conditioning sets along a sampling chain are not nested")
        plan.append((v, links))
        for e in chain:
            del pool[e]
        remaining.discard(v)
    plan.append((remaining.pop(), []))
    return plan[::-1]


def make_rng(seed) -> np.random.Generator:
    """Counter-based (Philox) generator for integer seeds; generators pass through."""
    if isinstance(seed, np.random.Generator):
        return seed
    return np.random.Generator(np.random.Philox(int(seed) & 0xFFFFFFFFFFFFFFFF))


def sample(model: VineModel, n: int, rng) -> Dataset:
    """Draw ``n`` observations by conditional inversion along the structure."""
    rng = make_rng(rng)
    d = model.d
    w = np.clip(rng.random((int(n), d)), EPS, 1.0 - EPS)
    pc_of = {e: pc for tree, pcs in zip(model.structure.trees, model.pair_copulas)
             for e, pc in zip(tree, pcs)}
    out = np.empty((int(n), d))
    cond = {}
    for col, (v, links) in enumerate(_sampling_plan(model.structure)):
        val = w[:, col]
        # invert from the deepest tree down to tree 1
        for e, partner, D in reversed(links):
            pc = pc_of[e]
            cond[(v, D | {partner})] = val
            if pc.family is not Family.INDEPENDENCE:
                val = bicop.hinv(pc, val, cond[(partner, D)])
            cond[(v, D)] = val
        cond[(v, frozenset())] = val
        out[:, v - 1] = val
        for e, partner, D in links:
            pc = pc_of[e]
            cond[(partner, D | {v})] = bicop.hfunc(pc, cond[(partner, D)], cond[(v, D)])
    return Dataset(out)

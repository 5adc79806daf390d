"""Simulation studies: scenario grids, repetitions, batches and summaries.

Every repetition is a pure function of ``(master_seed, scenario, rep)``:
the data seed is a 64-bit hash of those values, so records can be
recomputed one at a time and batches are schedule independent.
"""
from __future__ import annotations

import csv
import enum
import hashlib
import json
import logging
import math
import os
import warnings
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, fields
from itertools import product
from pathlib import Path
from typing import Iterable, Optional, Sequence

import numpy as np

from .bicop import Family
from .errors import EmptyCell, VineError
from .fit import FitResult, fit_mle, fit_nested
from .structure import dvine
from .vine import Dataset, VineModel, gaussian_from_taus, log_likelihood, sample
from .vuong import Decision, decide, vuong_nested, vuong_snn

log = logging.getLogger(__name__)

TAU_GRID = tuple(round(0.04 * k, 2) for k in range(1, 8))
FULL_NS = (100, 200, 500, 1000)
RECORDS_FILE = "records.csv"
PARTIAL_FILE = "records.partial.csv"
SUMMARY_FILE = "summary.csv"
SCENARIOS_FILE = "scenarios.json"
DEFAULT_SEED = 20250101


class Study(str, enum.Enum):
    THREE_D = "ThreeD"
    FOUR_D_G1_G2 = "FourD_G1_vs_G2"
    FOUR_D_G2_F = "FourD_G2_vs_F"


# study -> (dimension, truncation level of the smaller model, of the larger model)
DESIGNS = {
    Study.THREE_D: (3, 1, 2),
    Study.FOUR_D_G1_G2: (4, 1, 2),
    Study.FOUR_D_G2_F: (4, 2, 3),
}


@dataclass(frozen=True)
class ScenarioConfig:
    study: Study
    taus: tuple[float, ...]
    n: int
    R: int = 300
    alpha: float = 0.05
    master_seed: int = DEFAULT_SEED

    def __post_init__(self):
        object.__setattr__(self, "study", Study(self.study))
        taus = tuple(float(t) for t in self.taus)
        object.__setattr__(self, "taus", taus)
        d = DESIGNS[self.study][0]
        if len(taus) != d - 1:
            raise ValueError(f"{self.study.value} needs {d - 1} tree taus, got {len(taus)}")
        if any(not 0.0 <= t < 1.0 for t in taus):
            raise ValueError("tree taus must lie in [0, 1)")
        if self.n < 1 or self.R < 1:
            raise ValueError("n and R must be positive")
        if not 0.0 < self.alpha < 1.0:
            raise ValueError("alpha must lie in (0, 1)")

    @property
    def taus3(self) -> tuple[float, float, Optional[float]]:
        t = self.taus + (None,) * (3 - len(self.taus))
        return t[0], t[1], t[2]

    @property
    def key(self) -> tuple:
        return (self.study.value, *self.taus3, self.n)

    def to_dict(self) -> dict:
        out = asdict(self)
        out["study"] = self.study.value
        out["taus"] = list(self.taus)
        return out

    @classmethod
    def from_dict(cls, doc: dict, **defaults) -> "ScenarioConfig":
        merged = {**defaults, **doc}
        names = {f.name for f in fields(cls)}
        return cls(**{k: (tuple(v) if k == "taus" else v) for k, v in merged.items() if k in names})


def seed_for(config: ScenarioConfig, rep: int) -> int:
    tau_ints = ",".join(str(int(round(t * 10_000))) for t in config.taus)
    text = f"{config.master_seed}|{config.study.value}|{tau_ints}|{config.n}|{rep}"
    return int.from_bytes(hashlib.blake2b(text.encode(), digest_size=8).digest(), "little")


def grid_3d(ns: Sequence[int] = (500,), R: int = 300, alpha: float = 0.05,
            master_seed: int = DEFAULT_SEED) -> list[ScenarioConfig]:
    return [ScenarioConfig(Study.THREE_D, (t1, t2), n, R, alpha, master_seed)
            for n in ns for t1, t2 in product(TAU_GRID, repeat=2)]


def grid_4d(ns: Sequence[int] = (200,), R: int = 300, alpha: float = 0.05,
            master_seed: int = DEFAULT_SEED, studies: Sequence[Study] = (Study.FOUR_D_G1_G2, Study.FOUR_D_G2_F)
            ) -> list[ScenarioConfig]:
    return [ScenarioConfig(s, taus, n, R, alpha, master_seed)
            for s in studies for n in ns for taus in product(TAU_GRID, repeat=3)]


def headline_configs(master_seed: int = DEFAULT_SEED) -> list[ScenarioConfig]:
    """Desk-scale default: the discussed 3-d cells, a null cell and one 4-d cell per comparison."""
    return [
        ScenarioConfig(Study.THREE_D, (0.20, 0.08), 500, 300, master_seed=master_seed),
        ScenarioConfig(Study.THREE_D, (0.20, 0.12), 500, 300, master_seed=master_seed),
        ScenarioConfig(Study.THREE_D, (0.20, 0.0), 500, 500, master_seed=master_seed),
        ScenarioConfig(Study.FOUR_D_G1_G2, (0.12, 0.08, 0.04), 200, 50, master_seed=master_seed),
        ScenarioConfig(Study.FOUR_D_G2_F, (0.12, 0.08, 0.04), 200, 50, master_seed=master_seed),
    ]


def true_model(config: ScenarioConfig) -> VineModel:
    d = DESIGNS[config.study][0]
    return gaussian_from_taus(dvine(d), config.taus)


def candidate_families(d: int, level: int) -> list[list[Family]]:
    return [[Family.GAUSSIAN if i <= level else Family.INDEPENDENCE] * (d - i) for i in range(1, d)]


def _true_start(truth: VineModel, level: int) -> np.ndarray:
    return np.array([pc.rho if pc.family is Family.GAUSSIAN else 0.0
                     for tree in truth.pair_copulas[:level] for pc in tree])


@dataclass(frozen=True)
class Replicate:
    seed: int
    truth: VineModel
    data: Dataset
    small: FitResult
    large: FitResult


def simulate_and_fit(config: ScenarioConfig, rep: int) -> Replicate:
    """Draw one data set and fit both candidates, starting from the true parameters."""
    d, lo, hi = DESIGNS[config.study]
    seed = seed_for(config, rep)
    truth = true_model(config)
    data = sample(truth, config.n, seed)
    structure = truth.structure
    small = fit_mle(structure, candidate_families(d, lo), data, start=_true_start(truth, lo))
    large = fit_nested(structure, candidate_families(d, hi), data, small, start=_true_start(truth, hi))
    return Replicate(seed, truth, data, small, large)


@dataclass(frozen=True)
class RepetitionRecord:
    study: str
    tau_t1: float
    tau_t2: float
    tau_t3: Optional[float]
    n: int
    rep: int
    seed: int
    ll_small: float = math.nan
    ll_large: float = math.nan
    lr: float = math.nan
    stat_nested: float = math.nan
    pval_nested: float = math.nan
    eigen_count: int = 0
    stat_snn: float = math.nan
    pval_snn: float = math.nan
    decision_nested: str = ""
    decision_snn: str = ""
    klic_nested_rule: float = math.nan
    klic_snn_rule: float = math.nan
    error: str = ""

    @property
    def cell(self) -> tuple:
        return (self.study, self.tau_t1, self.tau_t2, self.tau_t3, self.n)

    @property
    def ok(self) -> bool:
        return not self.error

    def to_row(self) -> list[str]:
        return [_fmt(getattr(self, c)) for c in RECORD_COLUMNS]

    @classmethod
    def from_row(cls, row: dict) -> "RepetitionRecord":
        kw = {}
        for f in fields(cls):
            raw = row[f.name]
            if f.name in ("study", "decision_nested", "decision_snn", "error"):
                kw[f.name] = raw
            elif f.name in ("n", "rep", "seed", "eigen_count"):
                kw[f.name] = int(raw)
            else:
                kw[f.name] = None if raw == "" else float(raw)
        return cls(**kw)


RECORD_COLUMNS = [f.name for f in fields(RepetitionRecord)]
SUMMARY_COLUMNS = ["study", "tau_t1", "tau_t2", "tau_t3", "n", "R_effective", "med_pval_nested",
                   "med_pval_snn", "rejections_nested", "rejections_snn", "mean_klic_nested",
                   "mean_klic_snn", "failures"]


def _fmt(v) -> str:
    if v is None:
        return ""
    if isinstance(v, float):
        return repr(v)
    return str(v)


def run_repetition(config: ScenarioConfig, rep: int) -> RepetitionRecord:
    t1, t2, t3 = config.taus3
    base = dict(study=config.study.value, tau_t1=t1, tau_t2=t2, tau_t3=t3, n=config.n, rep=rep,
                seed=seed_for(config, rep))
    try:
        r = simulate_and_fit(config, rep)
        small, large = r.small.model, r.large.model
        nested = vuong_nested(small, large, r.data)
        snn = vuong_snn(large, small, r.data)
        dec_n, dec_s = decide(nested, config.alpha), decide(snn, config.alpha)
        ll_true = log_likelihood(r.truth, r.data)

        def klic_of(decision):
            chosen = r.large if decision is Decision.PREFER_LARGER else r.small
            return (ll_true - chosen.loglik) / config.n

        return RepetitionRecord(
            **base, ll_small=r.small.loglik, ll_large=r.large.loglik, lr=nested.lr,
            stat_nested=nested.statistic, pval_nested=nested.p_value, eigen_count=len(nested.eigenvalues),
            stat_snn=snn.statistic, pval_snn=snn.p_value, decision_nested=dec_n.value,
            decision_snn=dec_s.value, klic_nested_rule=klic_of(dec_n), klic_snn_rule=klic_of(dec_s))
    except VineError as exc:
        log.warning("repetition %s rep=%d failed: %s", config.key, rep, exc)
        return RepetitionRecord(**base, error=f"{type(exc).__name__}: {exc}".replace("\n", " "))


def _task(args):
    return run_repetition(*args)


def _sort_key(rec: RepetitionRecord):
    order = list(Study)
    idx = order.index(Study(rec.study)) if rec.study in Study._value2member_map_ else len(order)
    return (idx, rec.study, rec.tau_t1, rec.tau_t2, -1.0 if rec.tau_t3 is None else rec.tau_t3, rec.n, rec.rep)


def _record_key(rec: RepetitionRecord):
    return (*rec.cell, rec.rep)


def read_records(path, tolerant: bool = False) -> list[RepetitionRecord]:
    """Load records; ``tolerant`` skips malformed rows (a partial file cut mid-write)."""
    path = Path(path)
    if path.is_dir():
        path = path / RECORDS_FILE
    out = []
    with open(path, newline="") as fh:
        for row in csv.DictReader(fh):
            try:
                out.append(RepetitionRecord.from_row(row))
            except (KeyError, TypeError, ValueError):
                if not tolerant:
                    raise
    return out


def write_records(path, records: Iterable[RepetitionRecord]) -> None:
    path = Path(path)
    tmp = path.with_suffix(".tmp")
    with open(tmp, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(RECORD_COLUMNS)
        for rec in sorted(records, key=_sort_key):
            w.writerow(rec.to_row())
    os.replace(tmp, path)


def run_batch(configs: Sequence[ScenarioConfig], threads: int = 1, out_dir=".") -> Path:
    """Run every repetition of ``configs`` and write ``records.csv`` into ``out_dir``.

    Repetitions already present in ``records.csv`` or in a partial file left
    by an interrupted run are not recomputed.  ``threads`` bounds the number
    of worker processes; the output does not depend on it.
    """
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    final, partial = out / RECORDS_FILE, out / PARTIAL_FILE
    done = {}
    for path in (final, partial):
        if path.exists():
            for rec in read_records(path, tolerant=path == partial):
                done[_record_key(rec)] = rec
    tasks = [(cfg, rep) for cfg in configs for rep in range(cfg.R)
             if (*cfg.key, rep) not in done]
    _write_scenarios(out / SCENARIOS_FILE, configs)
    log.info("%d repetitions to run (%d already recorded)", len(tasks), len(done))

    new_file = not partial.exists()
    with open(partial, "a", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        if new_file:
            w.writerow(RECORD_COLUMNS)
        if threads <= 1 or len(tasks) <= 1:
            results = map(_task, tasks)
            _drain(results, w, fh, done)
        else:
            with ProcessPoolExecutor(max_workers=threads) as pool:
                _drain(pool.map(_task, tasks, chunksize=max(1, len(tasks) // (8 * threads))), w, fh, done)
    write_records(final, done.values())
    partial.unlink()
    return final


def _drain(results, writer, fh, done):
    for rec in results:
        writer.writerow(rec.to_row())
        fh.flush()
        done[_record_key(rec)] = rec


def _write_scenarios(path: Path, configs: Sequence[ScenarioConfig]) -> None:
    known = {}
    if path.exists():
        for doc in json.loads(path.read_text()).get("scenarios", []):
            cfg = ScenarioConfig.from_dict(doc)
            known[cfg.key] = cfg
    for cfg in configs:
        known[cfg.key] = cfg
    docs = [known[k].to_dict() for k in sorted(known, key=lambda k: (k[0], k[1], k[2], k[3] or -1.0, k[4]))]
    path.write_text(json.dumps({"scenarios": docs}, indent=2) + "\n")


def load_alpha(out_dir, default: float = 0.05) -> dict:
    """Significance level per cell as recorded by :func:`run_batch`."""
    path = Path(out_dir) / SCENARIOS_FILE
    if not path.exists():
        return {}
    return {ScenarioConfig.from_dict(doc).key: doc.get("alpha", default)
            for doc in json.loads(path.read_text()).get("scenarios", [])}


def aggregate(records: Sequence[RepetitionRecord], alpha=0.05) -> list[dict]:
    """Per-cell medians, rejection counts and mean KLIC.

    ``alpha`` is a float or a mapping from cell key to level.
    """
    cells = {}
    for rec in sorted(records, key=_sort_key):
        cells.setdefault(rec.cell, []).append(rec)
    rows = []
    for cell, recs in cells.items():
        good = [r for r in recs if r.ok]
        if not good:
            raise EmptyCell(f"cell {cell} has no successful repetitions")
        a = alpha.get(cell, 0.05) if isinstance(alpha, dict) else alpha
        pn = np.array([r.pval_nested for r in good])
        ps = np.array([r.pval_snn for r in good])
        study, t1, t2, t3, n = cell
        rows.append({
            "study": study, "tau_t1": t1, "tau_t2": t2, "tau_t3": t3, "n": n,
            "R_effective": len(good),
            "med_pval_nested": float(np.median(pn)),
            "med_pval_snn": float(np.median(ps)),
            "rejections_nested": int(np.count_nonzero(pn < a)),
            "rejections_snn": int(np.count_nonzero(ps < a)),
            "mean_klic_nested": float(np.mean([r.klic_nested_rule for r in good])),
            "mean_klic_snn": float(np.mean([r.klic_snn_rule for r in good])),
            "failures": len(recs) - len(good),
        })
    return rows


def write_summary(path, rows: Sequence[dict]) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(SUMMARY_COLUMNS)
        for row in rows:
            w.writerow([_fmt(row[c]) for c in SUMMARY_COLUMNS])


def read_summary(path) -> list[dict]:
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))


def report(out_dir) -> Path:
    """Recompute ``summary.csv`` from the records in ``out_dir``."""
    out = Path(out_dir)
    rows = aggregate(read_records(out / RECORDS_FILE), load_alpha(out))
    write_summary(out / SUMMARY_FILE, rows)
    return out / SUMMARY_FILE


def load_configs(path) -> list[ScenarioConfig]:
    """Read a JSON scenario file.

    The document is either one scenario object or ``{"scenarios": [...]}``;
    top-level ``R``, ``alpha``, ``master_seed`` and ``n`` act as defaults.
    """
    doc = json.loads(Path(path).read_text())
    if "scenarios" not in doc:
        return [ScenarioConfig.from_dict(doc)]
    defaults = {k: doc[k] for k in ("R", "alpha", "master_seed", "n") if k in doc}
    return [ScenarioConfig.from_dict(s, **defaults) for s in doc["scenarios"]]


def full_grid_configs(which: str, R: int = 300, master_seed: int = DEFAULT_SEED) -> list[ScenarioConfig]:
    warnings.warn(f"the full {which} grid runs {49 if which == '3d' else 686} cells per sample size; "
                  "expect hours to days of computation", RuntimeWarning, stacklevel=2)
    if which == "3d":
        return grid_3d(FULL_NS, R, master_seed=master_seed)
    return grid_4d(FULL_NS, R, master_seed=master_seed)

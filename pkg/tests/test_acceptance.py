"""Acceptance criteria, one test each; a PASS/FAIL line per criterion is printed in the terminal summary."""
import json
import math
import statistics
import time

import numpy as np
import pytest
from scipy import stats

from vinetrunc.cli import main
from vinetrunc.harness import (TAU_GRID, ScenarioConfig, Study, aggregate, read_records, run_batch,
                               run_repetition, simulate_and_fit)
from vinetrunc.klic import empirical_klic, mean_klic
from vinetrunc.quadform import cdf, mc_cdf
from vinetrunc.structure import dvine
from vinetrunc.vine import gaussian_from_taus, independence_model, log_density, sample

from test_vine import gaussian_copula_logpdf, implied_correlation

HEADLINE = [ScenarioConfig(Study.THREE_D, (0.20, 0.08), 500, R=300),
            ScenarioConfig(Study.THREE_D, (0.20, 0.12), 500, R=300)]
NULL = ScenarioConfig(Study.THREE_D, (0.20, 0.0), 500, R=500)


@pytest.fixture(scope="session")
def headline_dir(tmp_path_factory):
    out = tmp_path_factory.mktemp("headline1")
    run_batch(HEADLINE, 1, out)
    return out


@pytest.fixture(scope="session")
def headline(headline_dir):
    recs = read_records(headline_dir)
    return {cfg.taus: [r for r in recs if (r.tau_t1, r.tau_t2) == cfg.taus] for cfg in HEADLINE}


@pytest.fixture(scope="session")
def null_records(tmp_path_factory):
    out = tmp_path_factory.mktemp("null")
    run_batch([NULL], 1, out)
    return read_records(out)


def failure_share(recs):
    return sum(bool(r.error) for r in recs) / len(recs)


def test_1_quadform(verdict):
    start = time.perf_counter()
    worst_chi2 = max(abs(cdf(x, np.ones(m)) - stats.chi2.cdf(x, m))
                     for m in range(1, 7) for x in (0.05, 0.5, 1.0, 2.5, 5.0, 9.0, 15.0, 30.0))
    rng = np.random.default_rng(7)
    draws, worst_z = 10**6, 0.0
    for _ in range(50):
        w = rng.uniform(-3, 3, rng.integers(2, 9))
        w[0], w[1] = abs(w[0]), -abs(w[1])
        x = rng.normal(w.sum(), np.sqrt(2 * np.sum(w * w)))
        p = cdf(x, w)
        se = np.sqrt(max(p * (1 - p), 1 / draws) / draws)
        worst_z = max(worst_z, abs(mc_cdf(x, w, draws, rng) - p) / se)
    elapsed = time.perf_counter() - start
    ok = worst_chi2 < 1e-5 and worst_z <= 3 and elapsed < 60
    verdict("1 quadratic form", ok, f"max chi2 err {worst_chi2:.1e}, max |MC z| {worst_z:.2f}, {elapsed:.0f}s")
    assert ok


def test_2_gaussian_vine_oracle(verdict):
    rng = np.random.default_rng(11)
    worst = 0.0
    for t1 in TAU_GRID:
        for t2 in TAU_GRID:
            m = gaussian_from_taus(dvine(3), (t1, t2))
            u = rng.uniform(size=(100, 3))
            worst = max(worst, np.max(np.abs(log_density(m, u) - gaussian_copula_logpdf(implied_correlation(m), u))))
    ok = worst <= 1e-8
    verdict("2 gaussian vine oracle", ok, f"max abs err {worst:.1e} over 49 models x 100 points")
    assert ok


def test_3_sampling_fidelity(verdict):
    u = sample(gaussian_from_taus(dvine(3), (0.2, 0.0)), 10**5, 3).values
    taus = [stats.kendalltau(u[:, j], u[:, j + 1]).statistic for j in range(2)]
    ok = all(abs(t - 0.2) <= 0.01 for t in taus)
    verdict("3 sampling fidelity", ok, "adjacent tau " + ", ".join(f"{t:.4f}" for t in taus))
    assert ok


def test_4_nesting_dominance(verdict, headline, null_records):
    recs = [r for cell in headline.values() for r in cell] + null_records
    done = [r for r in recs if not r.error]
    bad = sum(r.ll_large < r.ll_small - 1e-6 for r in done)
    ok = bad == 0 and len(done) > 0
    verdict("4 nesting dominance", ok, f"{bad} violations in {len(done)} repetitions")
    assert ok


def test_5_null_calibration(verdict, null_records):
    done = [r for r in null_records if not r.error]
    rate = sum(r.pval_nested < 0.05 for r in done) / len(done)
    ok = 0.02 <= rate <= 0.09 and failure_share(null_records) <= 0.02
    verdict("5 null calibration", ok, f"nested rejection rate {rate:.3f} (R={len(done)})")
    assert ok


def test_6_headline_medians(verdict, headline):
    recs = headline[(0.20, 0.08)]
    done = [r for r in recs if not r.error]
    med_n = statistics.median(r.pval_nested for r in done)
    med_s = statistics.median(r.pval_snn for r in done)
    ok = (0.02 <= med_n <= 0.10 and 0.10 <= med_s <= 0.25 and med_n < med_s
          and failure_share(recs) <= 0.02)
    verdict("6 headline medians", ok,
            f"median nested p {med_n:.4f} (want [0.02, 0.10]), median SNN p {med_s:.4f} (want [0.10, 0.25])")
    assert ok


def test_7_rejection_ordering(verdict, headline):
    parts, ok = [], True
    for taus, recs in headline.items():
        done = [r for r in recs if not r.error]
        rn = sum(r.pval_nested < 0.05 for r in done)
        rs = sum(r.pval_snn < 0.05 for r in done)
        ok &= rn >= rs and failure_share(recs) <= 0.02
        parts.append(f"tau_T2={taus[1]}: nested {rn} vs SNN {rs}")
    verdict("7 rejection ordering", ok, "; ".join(parts))
    assert ok


def test_8_klic_sanity(verdict):
    cfg = HEADLINE[0]
    vals = []
    for rep in range(cfg.R):
        r = simulate_and_fit(cfg, rep)
        vals.append(empirical_klic(r.truth, r.large.model, r.data))
    own = mean_klic(vals)
    true = gaussian_from_taus(dvine(2), (2 / np.pi * np.arcsin(0.5),))
    data = sample(true, 10**5, 8)
    indep = empirical_klic(true, independence_model(dvine(2)), data)
    ok = -0.02 <= own <= 0.02 and abs(indep - 0.14384) <= 0.005
    verdict("8 klic sanity", ok, f"own-family mean {own:.4f}, independence vs rho=0.5 {indep:.4f}")
    assert ok


def test_9_determinism(verdict, headline_dir, tmp_path):
    run_batch(HEADLINE, 8, tmp_path)
    ok = (tmp_path / "records.csv").read_bytes() == (headline_dir / "records.csv").read_bytes()
    verdict("9 determinism", ok, "1 vs 8 workers byte-identical" if ok else "records differ")
    assert ok


def test_10_four_d_smoke(verdict, tmp_path):
    cfgs = [ScenarioConfig(s, (0.12, 0.08, 0.04), 200, R=50) for s in (Study.FOUR_D_G1_G2, Study.FOUR_D_G2_F)]
    path = tmp_path / "smoke.json"
    path.write_text(json.dumps({"scenarios": [c.to_dict() for c in cfgs]}))
    out = tmp_path / "out"
    code = main(["experiment", "--config", str(path), "--out", str(out), "--threads", "2"])
    recs = read_records(out)
    problems = []
    if code != 0:
        problems.append(f"exit {code}")
    if len(recs) != 100 or any(r.error for r in recs):
        problems.append("missing or failed repetitions")
    crit = stats.norm.ppf(0.975)
    counts = {Study.FOUR_D_G1_G2.value: 3 + 5, Study.FOUR_D_G2_F.value: 5 + 6}
    for r in recs:
        expect_snn = ("PreferLarger" if r.stat_snn > crit else "PreferSmaller" if r.stat_snn < -crit
                      else "Indistinguishable")
        checks = [r.ll_large >= r.ll_small - 1e-6, r.stat_nested == 2 * r.lr,
                  math.isclose(r.lr, r.ll_large - r.ll_small, abs_tol=1e-9),
                  r.eigen_count == counts[r.study], 0 <= r.pval_nested <= 1, 0 <= r.pval_snn <= 1,
                  r.decision_nested == ("PreferLarger" if r.pval_nested < 0.05 else "PreferSmaller"),
                  r.decision_snn == expect_snn,
                  math.isclose(r.pval_snn, 2 * stats.norm.sf(abs(r.stat_snn)), abs_tol=1e-12)]
        if not all(checks):
            problems.append(f"invariant broken at {r.study} rep {r.rep}")
    for cfg in cfgs:
        if run_repetition(cfg, 17).to_row() != next(r for r in recs if r.study == cfg.study.value
                                                     and r.rep == 17).to_row():
            problems.append(f"{cfg.study.value} rep 17 not recomputable")
    for row in aggregate(recs):
        mine = [r for r in recs if r.study == row["study"]]
        if (row["rejections_nested"] != sum(r.pval_nested < 0.05 for r in mine)
                or row["failures"] != 0 or row["R_effective"] != 50):
            problems.append(f"summary mismatch for {row['study']}")
    ok = not problems
    verdict("10 4-d smoke cell", ok, "; ".join(problems) or "100 repetitions, vuong and harness invariants hold")
    assert ok

"""Acceptance gate: every criterion runs at its stated tolerance and reports
one pass/fail line in the terminal summary.

The heavy structure-recovery runs (criterion 4) are shared with the
diagnostic-monotonicity check (criterion 9) through a module fixture.
"""

import json
import subprocess
import sys
import time
from itertools import combinations
from pathlib import Path

import numpy as np
import pytest
from scipy import stats as spstats

import conftest
from bnensemble.dataset import Dataset, write_csv
from bnensemble.graphs import ConstraintSpec, Dag, d_separated
from bnensemble.graphs import shd as shd_fn
from bnensemble.learners import (
    TOP_LEVEL,
    AlgorithmId,
    LearnerConfig,
    hill_climb,
    learn,
    tabu_search,
)
from bnensemble.pipeline import (
    PipelineConfig,
    fit_parameters,
    l1_penalized_loss,
    quantile_grid,
    run_pipeline,
)
from bnensemble.ensemble import ArcPool, ArcRecord
from bnensemble.sampling import conditional_query
from bnensemble.stats import bic_g_score, ci_test
from bnensemble.synth import (
    random_dag,
    random_ground_truth,
    sample_sem,
    score_recovery,
)
from bnensemble.util import derive_seed

from oracles import (
    all_simple_undirected_paths,
    best_scoring_dag,
    descendants,
    dsep_bruteforce,
    gaussian_conditional,
    random_dag_edges,
    sem_covariance,
    sem_mean,
)

CFG = LearnerConfig()


def check(criterion: int, name: str, condition: bool, detail: str):
    line = f"criterion {criterion:2d} ({name}): {'PASS' if condition else 'FAIL'} - {detail}"
    conftest.record_acceptance(line)
    assert condition, line


def test_criterion_01_ci_test_calibration():
    # Independent Gaussian pairs: the p-value distribution must be uniform.
    start = time.perf_counter()
    rng = np.random.default_rng(20240101)
    pvals = []
    for _ in range(2000):
        d = Dataset(("X", "Y"), rng.normal(size=(200, 2)))
        pvals.append(ci_test(d, "X", "Y").p_value)
    ks = spstats.kstest(pvals, "uniform").statistic
    elapsed = time.perf_counter() - start
    check(
        1,
        "ci-test calibration",
        ks < 0.05 and elapsed < 30,
        f"KS statistic {ks:.4f} < 0.05 over 2000 reps, {elapsed:.1f}s < 30s",
    )


def test_criterion_02_dsep_matches_bruteforce_oracle():
    start = time.perf_counter()
    rng = np.random.default_rng(7)
    checked = 0
    for _ in range(200):
        g = random_dag_edges(6, 0.35, rng)
        nodes = sorted(g.nodes)
        desc = {n: descendants(g, n) for n in nodes}
        for x, y in combinations(nodes, 2):
            paths = all_simple_undirected_paths(g, x, y)
            others = [n for n in nodes if n not in (x, y)]
            for k in range(0, 4):
                for z in combinations(others, k):
                    want = dsep_bruteforce(g, x, y, z, paths=paths, desc=desc)
                    got = d_separated(g, x, y, z)
                    assert got == want, (sorted(g.arcs), x, y, z)
                    checked += 1
    elapsed = time.perf_counter() - start
    check(
        2,
        "d-separation oracle",
        elapsed < 60,
        f"agreement on all {checked} triples over 200 DAGs, {elapsed:.1f}s < 60s",
    )


def test_criterion_03_score_search_optimality():
    start = time.perf_counter()
    hits = 0
    tabu_ok = 0
    trials = 100
    for seed in range(trials):
        truth = random_ground_truth(random_dag(4, 1.5, seed), seed + 1000)
        d = sample_sem(truth, 2000, seed + 2000)
        hc_dag = hill_climb(d, CFG)
        hc_score = sum(bic_g_score(d, v, hc_dag.parents(v)) for v in hc_dag.nodes)
        best, _ = best_scoring_dag(d, bic_g_score, sorted(d.feature_names))
        if hc_score >= best - 1e-9:
            hits += 1
        tabu_dag = tabu_search(d, CFG)
        tabu_score = sum(
            bic_g_score(d, v, tabu_dag.parents(v)) for v in tabu_dag.nodes
        )
        if tabu_score >= hc_score - 1e-9:
            tabu_ok += 1
    elapsed = time.perf_counter() - start
    check(
        3,
        "score-search optimality",
        hits >= 90 and tabu_ok == trials and elapsed < 300,
        f"hill-climb optimal {hits}/100 (>=90), tabu>=hc {tabu_ok}/100 (=100), "
        f"{elapsed:.1f}s < 300s",
    )


PIPELINE_ALGS = (AlgorithmId.PC_STABLE, AlgorithmId.HC, AlgorithmId.MMHC)


@pytest.fixture(scope="module")
def recovery_runs():
    """Criterion 4 workload, shared with criterion 9: 20 seeded cells."""
    start = time.perf_counter()
    f1 = {alg: [] for alg in TOP_LEVEL}
    ens_shd = []
    single_shd = {alg: [] for alg in PIPELINE_ALGS}
    diagnostics = []
    for seed in range(20):
        truth = random_ground_truth(
            random_dag(8, 2.0, derive_seed(seed, "dag")), derive_seed(seed, "params")
        )
        d = sample_sem(truth, 5000, derive_seed(seed, "data"))
        for alg in TOP_LEVEL:
            s = score_recovery(truth.dag, learn(alg, d, ConstraintSpec(), CFG))
            denom = s.skeleton_precision + s.skeleton_recall
            f1[alg].append(
                2 * s.skeleton_precision * s.skeleton_recall / denom if denom else 0.0
            )
        result = run_pipeline(
            d,
            PipelineConfig(
                algorithms=PIPELINE_ALGS,
                replicates=200,
                quantiles=5,
                reference=AlgorithmId.TABU,
                learner=CFG,
                seed=seed,
            ),
        )
        ens_shd.append(shd_fn(truth.dag, result.network.dag))
        for alg in PIPELINE_ALGS:
            single_shd[alg].append(shd_fn(truth.dag, result.singles[alg][1]))
        diagnostics.append(result.selection.diagnostic)
    return {
        "f1": f1,
        "ens_shd": ens_shd,
        "single_shd": single_shd,
        "diagnostics": diagnostics,
        "elapsed": time.perf_counter() - start,
    }


def test_criterion_04_structure_recovery(recovery_runs):
    f1_means = {alg: float(np.mean(v)) for alg, v in recovery_runs["f1"].items()}
    worst_f1 = min(f1_means.values())
    ens_mean = float(np.mean(recovery_runs["ens_shd"]))
    single_means = {
        alg: float(np.mean(v)) for alg, v in recovery_runs["single_shd"].items()
    }
    worst_single = max(single_means.values())
    elapsed = recovery_runs["elapsed"]
    check(
        4,
        "structure recovery",
        worst_f1 >= 0.8 and ens_mean <= worst_single and elapsed < 900,
        f"min mean skeleton F1 {worst_f1:.3f} >= 0.8 across 8 algorithms; "
        f"ensemble mean SHD {ens_mean:.2f} <= worst single {worst_single:.2f}; "
        f"{elapsed:.0f}s < 900s",
    )


def test_criterion_05_selection_formula_fidelity():
    start = time.perf_counter()
    pool = ArcPool(
        (
            ArcRecord("A", "B", AlgorithmId.HC, 0.0),
            ArcRecord("B", "C", AlgorithmId.HC, 1.0),
        )
    )
    grid_ok = quantile_grid(pool, 5).thresholds == (0.2, 0.4, 0.6, 0.8)
    bic_ok = l1_penalized_loss(2, 1000, 10.0) == 16.0
    pool2 = ArcPool(
        (
            ArcRecord("A", "B", AlgorithmId.HC, 0.001),
            ArcRecord("B", "C", AlgorithmId.HC, 0.101),
        )
    )
    # Q1 = min + (max - min)/2 = 0.051; asserted bit-exactly against the
    # same hand-written arithmetic.
    grid2_ok = quantile_grid(pool2, 2).thresholds == (0.001 + (0.101 - 0.001) / 2,)
    elapsed = time.perf_counter() - start
    check(
        5,
        "selection formula fidelity",
        grid_ok and bic_ok and grid2_ok and elapsed < 1,
        f"quantile thresholds and penalized-L1 values exact, {elapsed:.3f}s < 1s",
    )


def _random_constraints(nodes, rng):
    """A valid random constraint spec over the node list."""
    pool = [(u, v) for u in nodes for v in nodes if u != v]
    whitelist = set()
    if rng.random() < 0.7:
        whitelist.add(pool[rng.integers(len(pool))])
    if rng.random() < 0.3 and whitelist:
        (u0, v0) = next(iter(whitelist))
        extra = pool[rng.integers(len(pool))]
        if extra != (v0, u0) and extra not in whitelist:
            trial = whitelist | {extra}
            try:
                ConstraintSpec(whitelist=frozenset(trial))
                whitelist = trial
            except Exception:
                pass
    blacklist = set()
    while len(blacklist) < rng.integers(1, 5):
        cand = pool[rng.integers(len(pool))]
        if cand not in whitelist:
            blacklist.add(cand)
    wl_heads = {v for _, v in whitelist}
    wl_tails = {u for u, _ in whitelist}
    roots = set()
    leaves = set()
    if rng.random() < 0.3:
        candidates = [n for n in nodes if n not in wl_heads]
        if candidates:
            roots.add(candidates[rng.integers(len(candidates))])
    if rng.random() < 0.3:
        candidates = [n for n in nodes if n not in wl_tails and n not in roots]
        if candidates:
            leaves.add(candidates[rng.integers(len(candidates))])
    # Expand roots/leaves the same way the pipeline's first step does.
    expanded = set(blacklist)
    for r in roots:
        expanded |= {(u, r) for u in nodes if u != r}
    for leaf in leaves:
        expanded |= {(leaf, v) for v in nodes if v != leaf}
    expanded -= whitelist
    return ConstraintSpec(
        blacklist=frozenset(expanded),
        whitelist=frozenset(whitelist),
        roots=frozenset(roots),
        leaves=frozenset(leaves),
    )


def test_criterion_06_constraint_contract_fuzz():
    start = time.perf_counter()
    rng = np.random.default_rng(99)
    pairs = 500
    for trial in range(pairs):
        truth = random_ground_truth(
            random_dag(5, 1.5, derive_seed(trial, "t")), derive_seed(trial, "p")
        )
        d = sample_sem(truth, 120, derive_seed(trial, "d"))
        spec = _random_constraints(sorted(d.feature_names), rng)
        for alg in TOP_LEVEL:
            g = learn(alg, d, spec, CFG)
            assert spec.whitelist <= g.arcs, (trial, alg)
            assert not (spec.blacklist & g.arcs), (trial, alg)
        result = run_pipeline(
            d,
            PipelineConfig(
                algorithms=(AlgorithmId.HC, AlgorithmId.PC_STABLE),
                replicates=3,
                quantiles=3,
                reference=AlgorithmId.HC,
                learner=CFG,
                blacklist=spec.blacklist,
                whitelist=spec.whitelist,
                roots=spec.roots,
                leaves=spec.leaves,
                seed=trial,
            ),
        )
        final = result.network.dag
        assert spec.whitelist <= final.arcs, trial
        assert not (spec.blacklist & final.arcs), trial
    elapsed = time.perf_counter() - start
    check(
        6,
        "constraint contracts",
        elapsed < 600,
        f"all whitelists present, blacklists absent, graphs acyclic over "
        f"{pairs} fuzzed pairs x (8 learners + pipeline), {elapsed:.0f}s < 600s",
    )


def test_criterion_07_inference_matches_gaussian_conditioning():
    from bnensemble.pipeline import FittedNetwork, NodeParams

    start = time.perf_counter()
    worst_sigma = 0.0
    for seed in range(5):
        gt = random_ground_truth(random_dag(3, 1.5, seed + 300), seed + 400)
        net = gt.as_network()
        names = tuple(sorted(net.dag.nodes))
        coefficients = {
            (p, v): c
            for v, param in gt.params.items()
            for p, c in zip(param.parents, param.coefficients)
        }
        mean = sem_mean(
            names, coefficients, {v: p.intercept for v, p in gt.params.items()}
        )
        cov = sem_covariance(
            names,
            net.dag.arcs,
            coefficients,
            {v: p.residual_sd for v, p in gt.params.items()},
        )
        evidence_node = names[-1]
        targets = [n for n in names if n != evidence_node]
        e_idx = names.index(evidence_node)
        value = float(mean[e_idx] + 0.8 * np.sqrt(cov[e_idx, e_idx]))
        result = conditional_query(
            net, {evidence_node: value}, targets, 100_000, seed=seed
        )
        want, _ = gaussian_conditional(
            mean, cov, [names.index(t) for t in targets], [e_idx], [value]
        )
        for i, t in enumerate(targets):
            se = max(result.standard_error(t), 1e-12)
            sigmas = abs(result.mean(t) - want[i]) / se
            worst_sigma = max(worst_sigma, sigmas)
            assert sigmas < 3, (seed, t, sigmas)
    elapsed = time.perf_counter() - start
    check(
        7,
        "inference correctness",
        elapsed < 60,
        f"posterior means within 3 MC standard errors (worst {worst_sigma:.2f} se) "
        f"on 5 networks at n=100000, {elapsed:.1f}s < 60s",
    )


def test_criterion_08_cli_determinism(tmp_path):
    start = time.perf_counter()
    truth = random_ground_truth(random_dag(5, 1.5, 881), 882)
    data = sample_sem(truth, 800, 883)
    write_csv(data, tmp_path / "data.csv")
    config = {
        "data": "data.csv",
        "seed": 5,
        "algorithms": ["PC.STABLE", "HC"],
        "replicates": 30,
        "quantiles": 4,
    }
    (tmp_path / "run.json").write_text(json.dumps(config))
    outputs = []
    for out_name, workers in (("out1", "1"), ("out2", "4")):
        proc = subprocess.run(
            [
                sys.executable,
                "-m",
                "bnensemble.cli",
                "ensemble",
                "--config",
                str(tmp_path / "run.json"),
                "--out",
                str(tmp_path / out_name),
                "--workers",
                workers,
            ],
            capture_output=True,
            text=True,
        )
        assert proc.returncode == 0, proc.stderr
        outputs.append((tmp_path / out_name / "network.json").read_bytes())
    elapsed = time.perf_counter() - start
    check(
        8,
        "determinism",
        outputs[0] == outputs[1] and elapsed < 600,
        f"network.json byte-identical across reruns with workers 1 vs 4, "
        f"{elapsed:.1f}s",
    )


def test_criterion_09_diagnostic_monotonicity(recovery_runs):
    checked = 0
    for rows in recovery_runs["diagnostics"]:
        sizes = [r[1] for r in rows]
        assert sizes == sorted(sizes), rows
        checked += 1
    check(
        9,
        "diagnostic monotonicity",
        checked == 20,
        f"whitelist size non-decreasing in threshold for all {checked} "
        "criterion-4 pools",
    )


def test_criterion_10_parameter_recovery():
    start = time.perf_counter()
    gt = random_ground_truth(random_dag(6, 2.0, 990), 991)
    d = sample_sem(gt, 10_000, 992)
    net = fit_parameters(gt.dag, d)
    worst = 0.0
    for v, p in gt.params.items():
        for parent, beta in zip(p.parents, p.coefficients):
            fitted = net.coefficient(parent, v)
            worst = max(worst, abs(fitted - beta))
            assert abs(fitted - beta) <= 0.05, (parent, v)
            want_sign = "promote" if beta > 0 else "inhibit"
            assert net.signs[(parent, v)] == want_sign, (parent, v)
    elapsed = time.perf_counter() - start
    check(
        10,
        "parameter recovery",
        elapsed < 10,
        f"all coefficients within +-0.05 (worst {worst:.4f}) and all signs "
        f"exact at n=10000, {elapsed:.1f}s < 10s",
    )

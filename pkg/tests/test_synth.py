import numpy as np
import pytest

from bnensemble.graphs import Dag, GraphError
from bnensemble.learners import AlgorithmId, LearnerConfig
from bnensemble.synth import (
    BenchConfig,
    GroundTruth,
    benchmark_suite,
    random_dag,
    random_ground_truth,
    sample_sem,
    score_recovery,
)

from oracles import sem_covariance


class TestRandomDag:
    def test_single_node_edgeless(self):
        g = random_dag(1, 2.0, seed=0)
        assert len(g.nodes) == 1 and not g.arcs

    def test_zero_degree_edgeless(self):
        g = random_dag(6, 0.0, seed=1)
        assert not g.arcs

    def test_mean_arc_count_matches_expectation(self):
        n_nodes, degree = 7, 2.0
        counts = [len(random_dag(n_nodes, degree, seed=s).arcs) for s in range(1000)]
        expected = n_nodes * degree / 2.0
        assert abs(np.mean(counts) - expected) < 0.05 * expected

    def test_respects_dag_invariants(self):
        for s in range(30):
            random_dag(6, 2.5, seed=s)  # Dag construction validates acyclicity


class TestGroundTruth:
    def test_random_parameters_in_documented_ranges(self):
        gt = random_ground_truth(random_dag(6, 2.0, seed=3), seed=4)
        for v, p in gt.params.items():
            assert 0.2 <= p.residual_sd <= 1.0
            for c in p.coefficients:
                assert 0.5 <= abs(c) <= 2.0

    def test_negative_noise_rejected(self):
        dag = Dag(("A",), frozenset())
        from bnensemble.pipeline import NodeParams

        with pytest.raises(GraphError):
            GroundTruth(dag, {"A": NodeParams(0.0, (), (), -1.0, 0.0)})


class TestSampleSem:
    def test_deterministic(self):
        gt = random_ground_truth(random_dag(5, 1.5, seed=5), seed=6)
        d1 = sample_sem(gt, 200, seed=7)
        d2 = sample_sem(gt, 200, seed=7)
        assert np.array_equal(d1.values, d2.values)

    def test_zero_noise_chain_exactly_linear(self):
        from bnensemble.pipeline import NodeParams

        dag = Dag(("A", "B"), frozenset({("A", "B")}))
        gt = GroundTruth(
            dag,
            {
                "A": NodeParams(0.0, (), (), 1.0, 0.0),
                "B": NodeParams(2.0, ("A",), (3.0,), 0.0, 0.0),
            },
        )
        d = sample_sem(gt, 100, seed=8)
        assert np.array_equal(d.column("B"), 2.0 + 3.0 * d.column("A"))

    def test_covariance_matches_closed_form(self):
        gt = random_ground_truth(random_dag(4, 1.5, seed=9), seed=10)
        n = 200_000
        d = sample_sem(gt, n, seed=11)
        names = tuple(sorted(gt.dag.nodes))
        coefficients = {
            (p, v): c
            for v, param in gt.params.items()
            for p, c in zip(param.parents, param.coefficients)
        }
        noise = {v: p.residual_sd for v, p in gt.params.items()}
        want = sem_covariance(names, gt.dag.arcs, coefficients, noise)
        got = d.covariance
        for i in range(len(names)):
            for j in range(len(names)):
                mc_sd = np.sqrt((want[i, i] * want[j, j] + want[i, j] ** 2) / n)
                assert abs(got[i, j] - want[i, j]) < 3 * mc_sd, (i, j)


class TestScoreRecovery:
    def test_identical_graphs_perfect(self):
        g = random_dag(6, 2.0, seed=12)
        s = score_recovery(g, g)
        assert s.shd == 0
        assert s.precision == s.recall == s.f1 == 1.0
        assert s.skeleton_precision == s.skeleton_recall == 1.0

    def test_edgeless_learned_uses_precision_convention(self):
        truth = random_dag(5, 2.0, seed=13)
        assert truth.arcs
        learned = Dag(truth.nodes, frozenset())
        s = score_recovery(truth, learned)
        assert s.precision == 1.0  # empty-prediction convention
        assert s.recall == 0.0

    def test_single_reversal(self):
        truth = Dag(("A", "B"), frozenset({("A", "B")}))
        learned = Dag(("A", "B"), frozenset({("B", "A")}))
        s = score_recovery(truth, learned)
        assert s.shd == 1
        assert s.skeleton_precision == s.skeleton_recall == 1.0
        assert s.recall == 0.0

    def test_node_mismatch_rejected(self):
        with pytest.raises(GraphError):
            score_recovery(Dag(("A",)), Dag(("B",)))


class TestBenchmarkSuite:
    def test_single_cell_shape_and_isolation(self):
        config = BenchConfig(
            algorithms=(AlgorithmId.HC, AlgorithmId.PC_STABLE),
            n_nodes=(5,),
            n_obs=(400,),
            seeds=(0,),
            replicates=6,
            quantiles=3,
            learner=LearnerConfig(),
        )
        rows = benchmark_suite(config)
        names = [r.algorithm for r in rows]
        assert names == ["HC", "PC.STABLE", "ENSEMBLE"]
        for r in rows:
            assert r.error == ""
            assert r.shd >= 0
            assert 0.0 <= r.f1 <= 1.0
            assert r.runtime_ms > 0

    def test_suite_without_ensemble(self):
        config = BenchConfig(
            algorithms=(AlgorithmId.HC,),
            n_nodes=(4,),
            n_obs=(300,),
            seeds=(1, 2),
            replicates=4,
            run_ensemble=False,
        )
        rows = benchmark_suite(config)
        assert [r.algorithm for r in rows] == ["HC", "HC"]
        assert {r.seed for r in rows} == {1, 2}

    def test_more_observations_weakly_improve_f1(self):
        # Directed F1 carries orientation noise from equivalence-ambiguous
        # arcs, so the consistency trend needs a few seeds to show.
        config = BenchConfig(
            algorithms=(AlgorithmId.HC, AlgorithmId.PC_STABLE),
            n_nodes=(6,),
            n_obs=(200, 5000),
            seeds=tuple(range(8)),
            replicates=10,
            run_ensemble=False,
        )
        rows = benchmark_suite(config)
        for alg in ("HC", "PC.STABLE"):
            mean_f1 = {
                n: np.mean(
                    [r.f1 for r in rows if r.algorithm == alg and r.n_obs == n]
                )
                for n in (200, 5000)
            }
            assert mean_f1[5000] >= mean_f1[200] - 1e-9, alg

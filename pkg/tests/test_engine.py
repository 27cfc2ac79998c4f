import json
from dataclasses import asdict

import numpy as np
import pytest
from sklearn.metrics import adjusted_rand_score

from conftest import collinear_segments
from delipy.dataio import gen_doughnut
from delipy.engine import NOISE, Mode, RunConfig, is_core, relation_eval_count, run, run_expand, run_literal
from delipy.exceptions import DeliError
from delipy.geometry import SegmentLike
from delipy.neighborhood import NeighbourhoodSpec
from delipy.oracle import core_reachability, reference_dbscan, relation_matrix


def v1(alpha, c):
    return NeighbourhoodSpec(1, c, alpha=alpha)


@pytest.fixture
def six_lines():
    """
    Six unit segments on the x axis (version 1, alpha 1, c 3):

        line   segment       neighbour set
        0      [0, 1]        {0, 1}
        1      [1.5, 2.5]    {0, 1, 2}
        2      [3, 4]        {1, 2, 3}
        3      [4.5, 5.5]    {2, 3, 4}
        4      [6, 7]        {3, 4}
        5      [20, 21]      {5}

    Lines 1, 2 and 3 are core. Drawing 1 then 3 puts line 2 in two
    clusters; drawing 4 before 3 labels 4 NOISE and 3 absorbs it later.
    """
    U = collinear_segments(5) + [SegmentLike.segment((20.0, 0.0), (21.0, 0.0))]
    neighbours = [{0, 1}, {0, 1, 2}, {1, 2, 3}, {2, 3, 4}, {3, 4}, {5}]
    return U, neighbours


def literal_by_hand(neighbours, c, seed):
    """
    The DeLi loop as written: draw an UNVISITED line (position
    integers(0, m) in the ascending list of the m UNVISITED lines), emit
    N_U and the drawn line as a cluster when |N_U| >= c, else label it NOISE.
    """
    rng = np.random.Generator(np.random.PCG64(seed))
    status = ['UNVISITED'] * len(neighbours)
    trace, clusters = [], []
    while 'UNVISITED' in status:
        pending = [i for i, s in enumerate(status) if s == 'UNVISITED']
        u = pending[int(rng.integers(0, len(pending)))]
        N = neighbours[u]
        if len(N) >= c:
            clusters.append(sorted(N | {u}))
            for m in N | {u}:
                status[m] = 'VISITED'
            trace.append({'chosen': u, 'cardinality': len(N), 'decision': 'cluster', 'cluster': len(clusters)})
        else:
            status[u] = 'NOISE'
            trace.append({'chosen': u, 'cardinality': len(N), 'decision': 'noise', 'cluster': None})
    return trace, clusters


@pytest.mark.parametrize('seed', range(12))
def test_literal_trace_matches_hand_execution(six_lines, seed):
    U, neighbours = six_lines
    spec = v1(1.0, 3)
    np.testing.assert_array_equal(relation_matrix(U, spec),
                                  [[j in N for j in range(6)] for N in neighbours])

    labels = run_literal(U, RunConfig(spec, Mode.LITERAL, seed))
    expected_trace, expected_clusters = literal_by_hand(neighbours, 3, seed)
    assert [asdict(entry) for entry in labels.trace] == expected_trace
    assert labels.clusters == expected_clusters
    assert labels.seed_order == [entry['chosen'] for entry in expected_trace]

    assert labels.assignment[5] == NOISE
    assert labels.core_set <= {1, 2, 3}
    assert labels.k in (1, 2)
    for members in labels.memberships:
        assert members == sorted(members)
    if labels.clusters_may_overlap:
        assert labels.memberships[2] == [1, 2]


def test_literal_rerun_is_identical(six_lines):
    U, _ = six_lines
    cfg = RunConfig(v1(1.0, 3), Mode.LITERAL, 2 ** 63 + 11)
    first = list(run(U, cfg).trace_lines())
    second = list(run(U, cfg).trace_lines())
    assert first == second
    assert json.loads(first[0])['chosen'] in range(6)


def test_is_core(collinear_triple):
    single = [SegmentLike.segment((0, 0), (1, 0))]
    assert is_core(0, single, v1(1.0, 1))
    assert not is_core(0, single, v1(1.0, 2))
    assert is_core(1, collinear_triple, v1(1.0, 3))
    assert not is_core(0, collinear_triple, v1(1.0, 3))
    assert not is_core(2, collinear_triple, v1(1.0, 3))


@pytest.mark.parametrize('mode', list(Mode))
def test_isolated_segment_is_noise(mode):
    labels = run([SegmentLike.segment((0, 0), (1, 0))], RunConfig(v1(1.0, 2), mode))
    assert labels.k == 0
    assert labels.noise == [0]
    assert labels.assignment == [NOISE]
    assert relation_eval_count(labels) == 1


@pytest.mark.parametrize('seed', range(5))
def test_mutually_related_literal(seed):
    U = [SegmentLike.segment((0, y), (1, y)) for y in (0.0, 0.1, 0.2)]
    labels = run_literal(U, RunConfig(v1(1.0, 3), Mode.LITERAL, seed))
    assert labels.clusters == [[0, 1, 2]]
    assert labels.noise == []
    assert relation_eval_count(labels) == 3


def test_literal_eval_count_worst_case():
    n = 40
    U = collinear_segments(n, gap=5.0)
    labels = run_literal(U, RunConfig(v1(1.0, 2), Mode.LITERAL, 1))
    assert labels.noise == list(range(n))
    assert relation_eval_count(labels) == n * n
    assert sorted(labels.seed_order) == list(range(n))


def test_literal_eval_count_all_related():
    n = 10
    U = [SegmentLike.segment((0, 0.01 * i), (1, 0.01 * i)) for i in range(n)]
    labels = run_literal(U, RunConfig(v1(1.0, 4), Mode.LITERAL, 3))
    assert labels.k == 1
    assert relation_eval_count(labels) == n


def test_chain_expand_and_literal(chain_of_ten):
    spec = v1(1.0, 2)
    expanded = run_expand(chain_of_ten, RunConfig(spec, Mode.EXPAND, 0))
    assert expanded.clusters == [list(range(10))]
    assert not expanded.clusters_may_overlap

    clusters, core = core_reachability(relation_matrix(chain_of_ten, spec), spec.c)
    assert clusters == expanded.clusters
    assert core.all()

    literal = run_literal(chain_of_ten, RunConfig(spec, Mode.LITERAL, 0))
    assert literal.k >= 2
    assert all(len(members) <= 3 for members in literal.clusters)


def test_expand_labels_every_line_once():
    U = [SegmentLike.segment(r.x, r.y) for r in gen_doughnut(120, seed=4)]
    labels = run_expand(U, RunConfig(v1(12.0, 5), Mode.EXPAND, 9))
    assert len(labels.assignment) == len(U)
    assert all(len(m) <= 1 for m in labels.memberships)
    assert sorted(i for members in labels.clusters for i in members) == \
        sorted(i for i, a in enumerate(labels.assignment) if a != NOISE)
    assert set(range(1, labels.k + 1)) == {a for a in labels.assignment if a != NOISE}


@pytest.mark.parametrize('mode', list(Mode))
def test_runs_are_deterministic(mode):
    U = [SegmentLike.segment(r.x, r.y) for r in gen_doughnut(150, seed=1)]
    cfg = RunConfig(v1(12.0, 5), mode, 42)
    assert run(U, cfg) == run(U, cfg)


def test_threads_do_not_change_the_result():
    U = [SegmentLike.segment(r.x, r.y) for r in gen_doughnut(150, seed=1)]
    spec = NeighbourhoodSpec(3, 5, alpha=12.0, profile='beta:2,2')
    single = run(U, RunConfig(spec, Mode.EXPAND, 5))
    pooled = run(U, RunConfig(spec, Mode.EXPAND, 5, threads=4))
    assert single.assignment == pooled.assignment
    assert single.trace == pooled.trace


def _blobs(rng, n=200):
    centres = rng.uniform(2, 8, (3, 2))
    n_noise = n // 10
    sizes = [(n - n_noise) // 3] * 2 + [n - n_noise - 2 * ((n - n_noise) // 3)]
    parts = [c + rng.normal(0, 0.4, (s, 2)) for c, s in zip(centres, sizes)]
    parts.append(rng.uniform(0, 10, (n_noise, 2)))
    return np.vstack(parts)


def _ambiguous_border(points, eps, reference):
    "True when a non-core point is within eps of core points of two clusters."
    d = np.linalg.norm(points[:, None, :] - points[None, :, :], axis=2)
    for i in np.flatnonzero(~reference.core):
        near = {reference.labels[j] for j in np.flatnonzero((d[i] < eps) & reference.core)}
        if len(near) > 1:
            return True
    return False


def _check_dbscan_equivalence(seeds, eps=0.6, minpts=5):
    agreeing = 0
    for seed in seeds:
        rng = np.random.default_rng(seed)
        points = _blobs(rng)
        reference = reference_dbscan(points, eps, minpts)
        U = [SegmentLike.point(p) for p in points]
        labels = run_expand(U, RunConfig(v1(eps, minpts), Mode.EXPAND, seed))
        assert labels.core == reference.core.tolist()
        if not _ambiguous_border(points, eps, reference):
            assert adjusted_rand_score(reference.labels, labels.assignment) == pytest.approx(1.0)
            agreeing += 1
    return agreeing


def test_dbscan_equivalence():
    assert _check_dbscan_equivalence(range(4)) >= 1


@pytest.mark.slow
def test_dbscan_equivalence_full():
    assert _check_dbscan_equivalence(range(20)) >= 5


def test_doughnut_core_set_shrinks_with_c():
    U = [SegmentLike.segment(r.x, r.y) for r in gen_doughnut(400, seed=7)]
    five = run_expand(U, RunConfig(v1(12.0, 5), Mode.EXPAND, 7))
    eight = run_expand(U, RunConfig(v1(12.0, 8), Mode.EXPAND, 7))
    assert five.k >= 2
    assert eight.core_set < five.core_set
    assert set(eight.noise) >= set(five.noise)
    assert five.core_set == {i for i in range(len(U)) if is_core(i, U, v1(12.0, 5))}


def test_run_config_validation():
    with pytest.raises(DeliError):
        RunConfig(v1(1.0, 2), rng_seed=-1)
    with pytest.raises(DeliError):
        RunConfig(v1(1.0, 2), threads=0)
    with pytest.raises(ValueError):
        RunConfig(v1(1.0, 2), mode='sideways')
    with pytest.raises(DeliError):
        run([], RunConfig(v1(1.0, 2)))

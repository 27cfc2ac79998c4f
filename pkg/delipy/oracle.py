"""
Module with brute-force reference computations used to check the clustering
code: grid distances, dense quadrature of neighbourhood volumes, the full
relation matrix, a textbook point DBSCAN and core reachability on a graph.

Apart from the relation matrix, nothing here calls into the geometry or
neighbourhood modules; only the end points of the lines are read.
"""

import logging
from typing import NamedTuple

import networkx as nx
import numpy as np
from scipy import integrate, special
from scipy.spatial.distance import cdist

from delipy.exceptions import GeometryError
from delipy.neighborhood import relates

logger = logging.getLogger(__name__)

NOISE = -1


def _ends(l):
    x = np.asarray(l.x, dtype=float)
    return x, np.asarray(l.y, dtype=float) - x


def grid_min_distance(l1, l2, step=1e-3):
    """
    Smallest distance between the points g_l1(t1), g_l2(t2) with t1, t2 on
    a regular grid of [0, 1]. Exceeds the true minimum by at most
    (|d1| + |d2|) * step.
    """
    if not (l1.bounded and l2.bounded):
        raise GeometryError('Grid distances are only defined for segments')
    if not step > 0:
        raise GeometryError('step must be positive')
    t = np.linspace(0.0, 1.0, int(np.ceil(1.0 / step)) + 1)
    x1, d1 = _ends(l1)
    x2, d2 = _ends(l2)
    best = np.inf
    # chunks keep the distance block small for fine steps
    for chunk in np.array_split(t, max(1, t.size // 1024)):
        P = x1 + chunk[:, None] * d1
        Q = x2 + t[:, None] * d2
        best = min(best, float(cdist(P, Q).min()))
    return best


class DbscanResult(NamedTuple):
    labels: np.ndarray  # cluster ids 1..k, NOISE for outliers
    core: np.ndarray  # boolean core flags


def reference_dbscan(points, eps, minpts):
    """
    Textbook DBSCAN on points. Neighbourhoods are open balls (distance
    strictly below eps) and contain the point itself. Points are visited in
    index order; a border point keeps the first cluster that reaches it.
    """
    points = np.asarray(points, dtype=float)
    n = points.shape[0]
    adjacency = cdist(points, points) < eps
    core = adjacency.sum(axis=1) >= minpts
    labels = np.full(n, NOISE)
    cluster_id = 0

    for i in range(n):
        if labels[i] != NOISE or not core[i]:
            continue
        cluster_id += 1
        labels[i] = cluster_id
        seeds = list(np.flatnonzero(adjacency[i]))
        while seeds:
            j = seeds.pop(0)
            if labels[j] != NOISE:
                continue
            labels[j] = cluster_id
            if core[j]:
                seeds.extend(np.flatnonzero(adjacency[j]))
    return DbscanResult(labels, core)


def relation_matrix(U, spec):
    "Every relation U[i] R U[j], evaluated pair by pair."
    n = len(U)
    matrix = np.zeros((n, n), dtype=bool)
    for i in range(n):
        for j in range(n):
            matrix[i, j] = relates(U[i], U[j], spec, i, j)
    return matrix


def core_reachability(matrix, c):
    """
    Clusters obtained by chaining core lines: line i is core when its row
    holds at least c relations, a core line reaches every line of its row,
    and clusters are the weakly connected pieces of the core-to-core graph
    together with the lines their cores reach.

    For a symmetric relation without border lines shared by two clusters
    this is the partition grown by expand mode.
    """
    matrix = np.asarray(matrix, dtype=bool)
    core = matrix.sum(axis=1) >= c
    graph = nx.DiGraph()
    graph.add_nodes_from(np.flatnonzero(core).tolist())
    for i in np.flatnonzero(core):
        for j in np.flatnonzero(matrix[i] & core):
            graph.add_edge(int(i), int(j))
    clusters = []
    for component in nx.weakly_connected_components(graph):
        members = set(component)
        for i in component:
            members.update(np.flatnonzero(matrix[i]).tolist())
        clusters.append(sorted(members))
    clusters.sort()
    return clusters, core


def grid_relates(l1, p1, alpha1, l2, p2=None, samples=20001, eps=1e-6):
    """
    Dense scan of the witness condition: some sample g_l2(s) of the support
    of f_l2 is closer to l1 than alpha1 * f_l1 at its foot point.
    """
    x1, d1 = _ends(l1)
    x2, d2 = _ends(l2)
    if p2 is None:
        lo, hi = 0.0, 1.0
    else:
        lo, hi = _window(p2, eps)
        lo, hi = max(lo, 0.0), min(hi, 1.0)
        if lo > hi:
            return False
    s = np.linspace(lo, hi, samples)
    pts = x2 + s[:, None] * d2
    dd = float(d1 @ d1)
    t = np.zeros(samples) if dd == 0 else (pts - x1) @ d1 / dd
    if l1.bounded:
        t = np.clip(t, 0.0, 1.0)
    gap = np.linalg.norm(pts - (x1 + t[:, None] * d1), axis=1)
    return bool(np.any(gap < alpha1 * p1.eval(t)))


def _window(p, eps):
    lo, hi = p.support()
    if not np.isfinite(lo):
        lo = float(p.dist.ppf(eps))
    if not np.isfinite(hi):
        hi = float(p.dist.isf(eps))
    return lo, hi


def quadrature_volume(p, l, n, samples=200001, eps=1e-6):
    """
    Volume of the f-neighbourhood of the segment l in R^n by composite
    Simpson on a dense grid of the effective window.
    """
    x, d = _ends(l)
    lo, hi = _window(p, eps)
    t = np.linspace(lo, hi, samples)
    integral = integrate.simpson(p.eval(t) ** (n - 1), x=t)
    ball = np.pi ** ((n - 1) / 2.0) / special.gamma((n - 1) / 2.0 + 1.0)
    return float(ball * np.linalg.norm(d) * integral)

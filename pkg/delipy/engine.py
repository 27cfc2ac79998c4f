"""
Module with the DeLi clustering loop.

Literal mode runs the DeLi loop step by step: draw an UNVISITED line
at random, collect its neighbour set N_U, and either emit N_U (plus the drawn
line) as a new cluster or label the drawn line NOISE. There is no seed
expansion, so clusters may overlap.

Expand mode grows every cluster transitively through the neighbour sets of
its core lines, the way DBSCAN does for points, and gives every line a single
label.
"""

import enum
import json
import logging
from collections import deque
from dataclasses import asdict, dataclass
from typing import List, Optional

import numpy as np
from tqdm import tqdm

from delipy.exceptions import DeliError
from delipy.geometry import pack_segments
from delipy.neighborhood import NeighbourhoodSpec, RelationCounter, neighbor_set

logger = logging.getLogger(__name__)

NOISE = -1

_UNVISITED, _VISITED, _NOISE = 0, 1, 2


class Mode(enum.Enum):
    LITERAL = 'literal'
    EXPAND = 'expand'


@dataclass(frozen=True)
class RunConfig:
    """
    spec     : neighbourhood relation parameters
    mode     : Mode.LITERAL or Mode.EXPAND
    rng_seed : seed of the PCG64 generator that draws the UNVISITED lines
    threads  : workers for the relation evaluations of one neighbour set
    batch    : vectorised distance pass per neighbour set (False: pair by pair)
    """

    spec: NeighbourhoodSpec
    mode: Mode = Mode.EXPAND
    rng_seed: int = 0
    threads: int = 1
    batch: bool = True
    progress: bool = False

    def __post_init__(self):
        object.__setattr__(self, 'mode', Mode(self.mode))
        if int(self.rng_seed) != self.rng_seed or not 0 <= self.rng_seed < 2 ** 64:
            raise DeliError('rng_seed must be an unsigned 64-bit integer, got {}'.format(self.rng_seed))
        if self.threads < 1:
            raise DeliError('threads must be >= 1')


@dataclass
class TraceEntry:
    chosen: int
    cardinality: int
    decision: str  # 'cluster' or 'noise'
    cluster: Optional[int] = None


@dataclass
class ClusterLabels:
    """
    assignment    : per line, the id (1..k) of its first cluster or NOISE
    memberships   : per line, every cluster id it belongs to (several in literal mode)
    clusters      : member indices of C_1..C_k, sorted
    core          : lines whose own neighbour set met the cardinality threshold
    seed_order    : lines drawn at random, in order
    """

    assignment: List[int]
    memberships: List[List[int]]
    clusters: List[List[int]]
    core: List[bool]
    seed_order: List[int]
    trace: List[TraceEntry]
    eval_count: int
    mode: Mode
    clusters_may_overlap: bool = False

    @property
    def k(self):
        return len(self.clusters)

    @property
    def noise(self):
        return [i for i, a in enumerate(self.assignment) if a == NOISE]

    @property
    def core_set(self):
        return {i for i, flag in enumerate(self.core) if flag}

    def trace_lines(self):
        "The run trace as JSON lines."
        for entry in self.trace:
            yield json.dumps(asdict(entry), sort_keys=True)


def relation_eval_count(run):
    return run.eval_count


def is_core(i, U, spec, pack=None):
    return len(neighbor_set(i, U, spec, pack)) >= spec.c


class _Drawer:
    """
    Uniform draw among the UNVISITED lines: the generator picks
    integers(0, m) as a position in the ascending list of the m UNVISITED
    indices.
    """

    def __init__(self, n, seed):
        self.rng = np.random.Generator(np.random.PCG64(seed))
        self.pending = list(range(n))

    def draw(self):
        return self.pending[int(self.rng.integers(0, len(self.pending)))]

    def refresh(self, still_pending):
        self.pending = [i for i in self.pending if still_pending(i)]


def _prepare(U, cfg):
    if len(U) == 0:
        raise DeliError('Cannot cluster an empty set of lines')
    counter = RelationCounter()
    pack = pack_segments(U)

    def neighbours(i):
        return neighbor_set(i, U, cfg.spec, pack, counter, cfg.threads, cfg.batch)

    bar = tqdm(total=len(U), disable=not cfg.progress, desc='DeLi {}'.format(cfg.mode.value), unit='line')
    return counter, neighbours, bar


def run_literal(U, cfg):
    n = len(U)
    counter, neighbours, bar = _prepare(U, cfg)
    status = np.full(n, _UNVISITED, dtype=np.int8)
    memberships = [[] for _ in range(n)]
    clusters, core, seeds, trace = [], [False] * n, [], []
    drawer = _Drawer(n, cfg.rng_seed)

    while drawer.pending:
        u = drawer.draw()
        seeds.append(u)
        N_u = neighbours(u)
        if len(N_u) >= cfg.spec.c:
            cid = len(clusters) + 1
            members = sorted(set(N_u) | {u})
            for m in members:
                status[m] = _VISITED
                memberships[m].append(cid)
            core[u] = True
            clusters.append(members)
            trace.append(TraceEntry(u, len(N_u), 'cluster', cid))
        else:
            status[u] = _NOISE
            trace.append(TraceEntry(u, len(N_u), 'noise'))
        before = len(drawer.pending)
        drawer.refresh(lambda i: status[i] == _UNVISITED)
        bar.update(before - len(drawer.pending))
    bar.close()

    assignment = [m[0] if m else NOISE for m in memberships]
    overlap = any(len(m) > 1 for m in memberships)
    logger.info('literal run: %d clusters, %d noise, %d relation evaluations',
                len(clusters), assignment.count(NOISE), counter.count)
    return ClusterLabels(assignment, memberships, clusters, core, seeds, trace, counter.count, Mode.LITERAL,
                         overlap)


def run_expand(U, cfg):
    n = len(U)
    counter, neighbours, bar = _prepare(U, cfg)
    assignment = [NOISE] * n
    visited = [False] * n
    core = [False] * n
    clusters, seeds, trace = [], [], []
    drawer = _Drawer(n, cfg.rng_seed)

    def visit(i):
        visited[i] = True
        bar.update(1)
        return neighbours(i)

    while drawer.pending:
        u = drawer.draw()
        seeds.append(u)
        N_u = visit(u)
        if len(N_u) < cfg.spec.c:
            trace.append(TraceEntry(u, len(N_u), 'noise'))
            drawer.refresh(lambda i: not visited[i])
            continue

        cid = len(clusters) + 1
        core[u] = True
        assignment[u] = cid
        members = [u]
        queue = deque(N_u)
        while queue:
            j = queue.popleft()
            if assignment[j] == NOISE:
                assignment[j] = cid
                members.append(j)
            elif assignment[j] != cid:
                # border line already claimed by an earlier cluster
                continue
            if visited[j]:
                continue
            N_j = visit(j)
            if len(N_j) >= cfg.spec.c:
                core[j] = True
                queue.extend(N_j)
        clusters.append(sorted(members))
        trace.append(TraceEntry(u, len(N_u), 'cluster', cid))
        drawer.refresh(lambda i: not visited[i])
    bar.close()

    memberships = [[a] if a != NOISE else [] for a in assignment]
    logger.info('expand run: %d clusters, %d noise, %d relation evaluations',
                len(clusters), assignment.count(NOISE), counter.count)
    return ClusterLabels(assignment, memberships, clusters, core, seeds, trace, counter.count, Mode.EXPAND)


def run(U, cfg):
    if cfg.mode is Mode.LITERAL:
        return run_literal(U, cfg)
    return run_expand(U, cfg)

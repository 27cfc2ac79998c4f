"""
Module to handle points, lines and line segments in R^n.

A line or segment l = (x, y) is stored through its two defining points and
parametrised as g_l(t) = x + (y - x) t, with t in R for lines and t in [0, 1]
for segments. Distances are Euclidean.
"""

import enum
from dataclasses import dataclass
from functools import cached_property
from typing import NamedTuple, Sequence

import numpy as np

from delipy.exceptions import GeometryError


def as_point(coords):
    """
    Convert a coordinate sequence to a read-only 1-D float array.
    Raise GeometryError for empty input or non-finite coordinates.
    """
    arr = np.array(coords, dtype=float)
    if arr.ndim != 1 or arr.size == 0:
        raise GeometryError('A point needs a flat, non-empty list of coordinates (got shape {})'.format(arr.shape))
    if not np.all(np.isfinite(arr)):
        raise GeometryError('Point coordinates must be finite: {}'.format(arr.tolist()))
    arr.flags.writeable = False
    return arr


class Kind(enum.Enum):
    LINE = 'line'
    SEGMENT = 'segment'


@dataclass(frozen=True)
class SegmentLike:
    """
    A line or a line segment through the points x and y.

    A segment with x == y is allowed (it stands for a single point), a line is not.
    """

    x: tuple
    y: tuple
    kind: Kind = Kind.SEGMENT

    def __post_init__(self):
        x = as_point(self.x)
        y = as_point(self.y)
        if x.size != y.size:
            raise GeometryError('End points have different dimensions ({} and {})'.format(x.size, y.size))
        if self.kind is Kind.LINE and np.array_equal(x, y):
            raise GeometryError('A line needs two distinct points')
        object.__setattr__(self, 'x', tuple(x.tolist()))
        object.__setattr__(self, 'y', tuple(y.tolist()))
        object.__setattr__(self, 'kind', Kind(self.kind))

    @classmethod
    def segment(cls, x, y):
        return cls(tuple(x), tuple(y), Kind.SEGMENT)

    @classmethod
    def line(cls, x, y):
        return cls(tuple(x), tuple(y), Kind.LINE)

    @classmethod
    def point(cls, p):
        "Degenerate segment standing for a single point."
        return cls(tuple(p), tuple(p), Kind.SEGMENT)

    @property
    def dim(self):
        return len(self.x)

    @property
    def bounded(self):
        return self.kind is Kind.SEGMENT

    @property
    def domain(self):
        return (0.0, 1.0) if self.bounded else (-np.inf, np.inf)

    @cached_property
    def start(self):
        return as_point(self.x)

    @cached_property
    def direction(self):
        d = as_point(self.y) - self.start
        d.flags.writeable = False
        return d

    @property
    def is_degenerate(self):
        return not np.any(self.direction)


class ClosestPointResult(NamedTuple):
    t_star: float
    point: np.ndarray
    distance: float


class MinDistanceResult(NamedTuple):
    distance: float
    t1: float
    t2: float


def check_same_dim(a, b):
    if a != b:
        raise GeometryError('Dimension mismatch: {} vs {}'.format(a, b))


def param_point(l, t):
    "Evaluate g_l(t) = x + (y - x) t."
    lo, hi = l.domain
    if not lo <= t <= hi:
        raise GeometryError('Parameter t={} is outside the segment domain [0, 1]'.format(t))
    return l.start + l.direction * t


def project_parameters(points, x, d, bounded):
    """
    Parameters of the closest points on the line/segment (x, d) for an (m, n)
    array of points. A zero direction projects everything to t = 0.
    """
    dd = float((d * d).sum())
    if dd == 0.0:
        return np.zeros(points.shape[0])
    t = ((points - x) * d).sum(axis=1) / dd
    if bounded:
        t = np.clip(t, 0.0, 1.0)
    return t


def closest_point(P, l):
    """
    Closest point of l to P: the foot of the perpendicular, or the nearer end
    point when the foot falls outside a segment.
    """
    P = as_point(P)
    check_same_dim(P.size, l.dim)
    t = float(project_parameters(P[None, :], l.start, l.direction, l.bounded)[0])
    point = l.start + l.direction * t
    return ClosestPointResult(t, point, float(np.sqrt(((P - point) ** 2).sum())))


def length(l):
    if not l.bounded:
        raise GeometryError('A line has infinite length')
    return float(np.sqrt((l.direction ** 2).sum()))


class SegmentPack(NamedTuple):
    """Lines/segments stacked into arrays for batched distance queries."""

    start: np.ndarray  # (m, n)
    direction: np.ndarray  # (m, n)
    bounded: np.ndarray  # (m,) True for segments

    @property
    def dim(self):
        return self.start.shape[1]

    def __len__(self):
        return self.start.shape[0]


def pack_segments(lines: Sequence[SegmentLike]):
    if len(lines) == 0:
        raise GeometryError('Nothing to pack: empty list of lines')
    dims = {l.dim for l in lines}
    if len(dims) > 1:
        raise GeometryError('Mixed dimensions in one dataset: {}'.format(sorted(dims)))
    start = np.array([l.start for l in lines])
    direction = np.array([l.direction for l in lines])
    bounded = np.array([l.bounded for l in lines], dtype=bool)
    return SegmentPack(start, direction, bounded)


def _clip_where(t, bounded):
    return np.where(bounded, np.clip(t, 0.0, 1.0), t)


def min_distances(l1, pack):
    """
    Minimum distance between l1 and every line/segment of pack.

    The squared distance |r + t1 d1 - t2 d2|^2 is a convex quadratic in
    (t1, t2). Candidates are the stationary point of the normal equations
    (kept only when it lies inside D1 x D2) and the four edge problems
    t1 in {0, 1} and t2 in {0, 1}, each solved by a 1-D projection. Every
    candidate is feasible, so the smallest one is the minimum.
    Returns three (m,) arrays: distances, t1 and t2.
    """
    check_same_dim(l1.dim, pack.dim)
    x1, d1, b1 = l1.start, l1.direction, l1.bounded
    X2, D2, B2 = pack.start, pack.direction, pack.bounded

    r = x1 - X2
    a = float((d1 * d1).sum())
    b = (D2 * d1).sum(axis=1)
    c = (D2 * D2).sum(axis=1)
    dr = (r * d1).sum(axis=1)
    e = (r * D2).sum(axis=1)

    denom = a * c - b * b
    parallel = denom <= 1e-12 * a * c
    safe = np.where(parallel, 1.0, denom)
    t1_free = (b * e - c * dr) / safe
    t2_free = (a * e - b * dr) / safe
    inside = ~parallel
    if b1:
        inside &= (t1_free >= 0.0) & (t1_free <= 1.0)
    inside &= ~B2 | ((t2_free >= 0.0) & (t2_free <= 1.0))

    c_safe = np.where(c > 0.0, c, 1.0)
    zero_c = c == 0.0
    t2_at0 = np.where(zero_c, 0.0, _clip_where(e / c_safe, B2))
    t2_at1 = np.where(zero_c, 0.0, _clip_where((e + b) / c_safe, B2))
    if a > 0.0:
        t1_at0 = -dr / a
        t1_at1 = (b - dr) / a
        if b1:
            t1_at0 = np.clip(t1_at0, 0.0, 1.0)
            t1_at1 = np.clip(t1_at1, 0.0, 1.0)
    else:
        t1_at0 = np.zeros_like(dr)
        t1_at1 = np.zeros_like(dr)

    ones = np.ones_like(dr)
    zeros = np.zeros_like(dr)
    t1 = np.stack([t1_free, zeros, ones, t1_at0, t1_at1])
    t2 = np.stack([t2_free, t2_at0, t2_at1, zeros, ones])

    diff = r[None, :, :] + t1[:, :, None] * d1 - t2[:, :, None] * D2[None, :, :]
    sq = (diff * diff).sum(axis=2)
    sq[0] = np.where(inside, sq[0], np.inf)

    best = np.argmin(sq, axis=0)
    # two parallel lines: every pair on a common perpendicular ties, keep t1 = 0
    if not b1:
        best = np.where(parallel & ~B2, 1, best)
    cols = np.arange(sq.shape[1])
    return np.sqrt(sq[best, cols]), t1[best, cols], t2[best, cols]


def min_distance(l1, l2):
    "inf over D1 x D2 of |g_l1(t1) - g_l2(t2)| and the parameters achieving it."
    check_same_dim(l1.dim, l2.dim)
    dist, t1, t2 = min_distances(l1, pack_segments([l2]))
    return MinDistanceResult(float(dist[0]), float(t1[0]), float(t2[0]))

"""
Module to lift points with one missing coordinate to line segments.

A record of R^n with its k-th entry unknown is replaced by the set of all its
possible completions: the axis-parallel segment that sweeps coordinate k over
a window given by domain knowledge. A profile over the segment parameter
weights the plausible values. Complete records become degenerate segments
(single points) without a profile.
"""

import logging
import math
from dataclasses import dataclass
from typing import Any, List, Mapping, NamedTuple, Optional

import numpy as np
from scipy import integrate

from delipy.exceptions import GeometryError, LiftError, ProfileError
from delipy.geometry import SegmentLike
from delipy.profile import Profile, parse_profile

logger = logging.getLogger(__name__)

MISSING = None

UNIFORM_TEMPLATE = Profile('uniform', (0.0, 1.0))


def is_missing(value):
    if value is None:
        return True
    try:
        return math.isnan(value)
    except TypeError:
        return False


@dataclass(frozen=True)
class AxisDomain:
    """
    Domain knowledge for one coordinate.

    axis             : 0-based coordinate index
    window           : (lo, hi), range swept by a missing entry
    profile_template : density over t in [0, 1] (t = 0 at lo, t = 1 at hi)
    """

    axis: int
    window: tuple
    profile_template: Profile = UNIFORM_TEMPLATE

    def __post_init__(self):
        lo, hi = (float(v) for v in self.window)
        if not (np.isfinite(lo) and np.isfinite(hi) and lo < hi):
            raise ProfileError('Axis window must satisfy lo < hi, got ({}, {})'.format(lo, hi))
        if int(self.axis) != self.axis or self.axis < 0:
            raise ProfileError('Axis index must be a non-negative integer, got {}'.format(self.axis))
        template = parse_profile(self.profile_template)
        mass, _ = integrate.quad(template.eval, 0.0, 1.0, points=_breakpoints(template))
        if abs(mass - 1.0) > 1e-6:
            raise ProfileError('Template {} puts mass {:.6g} on [0, 1]; it must integrate to 1 there'.format(
                template, mass))
        object.__setattr__(self, 'axis', int(self.axis))
        object.__setattr__(self, 'window', (lo, hi))
        object.__setattr__(self, 'profile_template', template)


def _breakpoints(p):
    lo, hi = p.support()
    inner = [v for v in (lo, hi) if 0.0 < v < 1.0]
    return inner or None


def parse_axis_domain(text):
    """
    Parse an axis declaration with a 1-based axis number:

        '2=uniform:-4,4'            window [-4, 4], uniform template
        '2=-4,4'                    same
        '2=-4,4;normal:0.5,0.01'    window [-4, 4], normal template in t
    """
    axis, sep, rest = str(text).partition('=')
    try:
        axis = int(axis.strip())
    except ValueError:
        raise ProfileError('Axis declaration must start with an axis number, got {!r}'.format(text))
    if not sep or axis < 1:
        raise ProfileError("Axis declaration must look like '2=lo,hi[;profile]', got {!r}".format(text))
    window_text, _, template_text = rest.partition(';')
    window_text = window_text.strip()
    if ':' in window_text:
        family, _, bounds = window_text.partition(':')
        if family.strip().lower() != 'uniform':
            raise ProfileError('Only uniform:lo,hi may be used as a window shorthand, got {!r}'.format(text))
        window_text = bounds
    try:
        lo, hi = (float(v) for v in window_text.split(','))
    except ValueError:
        raise ProfileError('Axis window must be two numbers lo,hi in {!r}'.format(text))
    template = parse_profile(template_text) if template_text.strip() else UNIFORM_TEMPLATE
    return AxisDomain(axis - 1, (lo, hi), template)


@dataclass(frozen=True)
class LiftedPoint:
    original: tuple
    missing_axis: Optional[int]
    segment: SegmentLike
    profile: Optional[Profile]
    source_id: Any = None


class LiftedDataset(NamedTuple):
    segments: List[SegmentLike]
    profiles: Mapping[int, Profile]  # only lifted records carry one
    id_map: List[Any]  # position -> source id
    records: List[LiftedPoint]


def lift(point, domains, source_id=None):
    values = list(point)
    missing = [k for k, v in enumerate(values) if is_missing(v)]
    if len(missing) > 1:
        raise LiftError('Record {} has {} missing coordinates; only one is supported'.format(
            source_id, len(missing)))
    present = [float(v) for v in values if not is_missing(v)]
    if not all(np.isfinite(present)):
        raise LiftError('Record {} has non-finite coordinates'.format(source_id))

    if not missing:
        coords = tuple(float(v) for v in values)
        return LiftedPoint(coords, None, SegmentLike.point(coords), None, source_id)

    k = missing[0]
    if k not in domains:
        raise LiftError('Record {} misses coordinate {} but no domain is declared for it'.format(source_id, k + 1))
    domain = domains[k]
    lo, hi = domain.window
    x = [MISSING if i == k else float(v) for i, v in enumerate(values)]
    start = tuple(lo if i == k else v for i, v in enumerate(x))
    end = tuple(hi if i == k else v for i, v in enumerate(x))
    return LiftedPoint(tuple(x), k, SegmentLike.segment(start, end), domain.profile_template, source_id)


def lift_dataset(points, domains, ids=None):
    """
    Lift every record, keeping input order. All invalid records are reported
    together in one LiftError.
    """
    points = [list(p) for p in points]
    if ids is None:
        ids = list(range(len(points)))
    if isinstance(domains, (list, tuple)):
        domains = {d.axis: d for d in domains}
    dims = {len(p) for p in points}
    if len(dims) > 1:
        common = max(dims, key=lambda d: sum(len(p) == d for p in points))
        bad = [i for i, p in enumerate(points) if len(p) != common]
        raise LiftError('Records have inconsistent dimensions {}: records {}'.format(sorted(dims), bad), bad)

    records, failures = [], []
    for i, (point, source_id) in enumerate(zip(points, ids)):
        try:
            records.append(lift(point, domains, source_id))
        except (LiftError, GeometryError) as err:
            failures.append((i, str(err)))
    if failures:
        raise LiftError('{} record(s) could not be lifted: {}'.format(
            len(failures), '; '.join('#{}: {}'.format(i, msg) for i, msg in failures)),
            [i for i, _ in failures])

    profiles = {i: r.profile for i, r in enumerate(records) if r.profile is not None}
    logger.info('lifted %d records, %d with a missing coordinate', len(records), len(profiles))
    return LiftedDataset([r.segment for r in records], profiles, list(ids), records)


def labels_by_source(id_map, assignment):
    "Map cluster labels of the lifted lines back to the source record ids."
    return dict(zip(id_map, assignment))

"""
Module for the neighbourhood relation R between lines.

Version 1 relates l1 to l2 when their minimum distance is below alpha_l1.
Versions 2 and 3 relate l1 to l2 when some point of the support of f_l2 lies
in the (alpha_l1 * f_l1)-neighbourhood of l1; version 2 derives alpha_l1 from
a volume parameter, version 3 takes it as given. R is reflexive but neither
symmetric nor transitive.
"""

import enum
import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from functools import lru_cache
from types import MappingProxyType
from typing import Mapping, Optional, Union

import numpy as np
from scipy import optimize

from delipy.exceptions import NeighbourhoodConfigError
from delipy.geometry import (check_same_dim, closest_point, min_distance, min_distances, pack_segments,
                             project_parameters)
from delipy.profile import (ALPHA_MODES, ALPHA_LITERAL, DEFAULT_EPS, Profile, ball_radius, parse_profile,
                            profile_max, scaling_factor)

logger = logging.getLogger(__name__)


class Version(enum.IntEnum):
    V1 = 1
    V2 = 2
    V3 = 3


def _freeze(value, convert):
    if value is None:
        return None
    if isinstance(value, Mapping):
        return MappingProxyType({int(k): convert(v) for k, v in value.items()})
    return convert(value)


@dataclass(frozen=True)
class NeighbourhoodSpec:
    """
    Parameters of the relation, one row of the version table:

        V1: c, alpha           (no profile)
        V2: c, volume, profile
        V3: c, alpha, profile

    alpha and profile are either one value for every line or a mapping
    {line index: value}. With distance_fallback, a line without a profile is
    related to others by minimum distance (alpha under V3, the radius of the
    n-ball of volume V under V2).
    """

    version: Version
    c: int
    alpha: Union[float, Mapping[int, float], None] = None
    volume: Optional[float] = None
    profile: Union[Profile, Mapping[int, Profile], None] = None
    search_samples: int = 64
    search_tol: float = 1e-9
    alpha_mode: str = ALPHA_LITERAL
    distance_fallback: bool = False
    eps: float = DEFAULT_EPS

    def __post_init__(self):
        try:
            version = Version(int(self.version))
        except ValueError:
            raise NeighbourhoodConfigError('Unknown version {!r}; use 1, 2 or 3'.format(self.version))
        object.__setattr__(self, 'version', version)
        object.__setattr__(self, 'alpha', _freeze(self.alpha, float))
        object.__setattr__(self, 'profile', _freeze(self.profile, parse_profile))

        if int(self.c) != self.c or self.c < 1:
            raise NeighbourhoodConfigError('Cardinality c must be an integer >= 1, got {}'.format(self.c))
        object.__setattr__(self, 'c', int(self.c))

        needs_alpha = version in (Version.V1, Version.V3)
        if needs_alpha and self.alpha is None:
            raise NeighbourhoodConfigError('Version {} needs alpha'.format(int(version)))
        if not needs_alpha and self.alpha is not None:
            raise NeighbourhoodConfigError('Version 2 derives alpha from the volume; do not give alpha')
        if version is Version.V2 and self.volume is None:
            raise NeighbourhoodConfigError('Version 2 needs the volume parameter V')
        if version is not Version.V2 and self.volume is not None:
            raise NeighbourhoodConfigError('Volume V is only used by version 2')
        if version is Version.V1 and self.profile is not None:
            raise NeighbourhoodConfigError('Version 1 does not take a profile')
        if version is not Version.V1 and self.profile is None:
            raise NeighbourhoodConfigError('Version {} needs a profile f_l'.format(int(version)))

        alphas = self.alpha.values() if isinstance(self.alpha, Mapping) else [self.alpha]
        if self.alpha is not None and not all(a > 0 and np.isfinite(a) for a in alphas):
            raise NeighbourhoodConfigError('alpha must be positive and finite')
        if self.volume is not None and not (self.volume > 0 and np.isfinite(self.volume)):
            raise NeighbourhoodConfigError('Volume must be positive and finite, got {}'.format(self.volume))
        if self.search_samples < 2:
            raise NeighbourhoodConfigError('search_samples must be at least 2')
        if not self.search_tol > 0:
            raise NeighbourhoodConfigError('search_tol must be positive')
        if self.alpha_mode not in ALPHA_MODES:
            raise NeighbourhoodConfigError('alpha_mode must be one of {}'.format(ALPHA_MODES))

    def alpha_for(self, i=None):
        if isinstance(self.alpha, Mapping):
            if i not in self.alpha:
                raise NeighbourhoodConfigError('No alpha given for line {}'.format(i))
            return self.alpha[i]
        return self.alpha

    def profile_for(self, i=None):
        "Profile of line i, or None when the line has none."
        if isinstance(self.profile, Mapping):
            return self.profile.get(i)
        return self.profile


@dataclass
class RelationCounter:
    "Number of relation evaluations performed."

    count: int = 0

    def add(self, k=1):
        self.count += k


def contains_point(l, p, alpha, P):
    "True when P lies strictly inside the (alpha * f)-neighbourhood of l."
    r = closest_point(P, l)
    return r.distance < alpha * p.eval(r.t_star)


def relates_v1(l1, l2, alpha1):
    return min_distance(l1, l2).distance < alpha1


@lru_cache(maxsize=65536)
def volume_alpha(l, p, volume, mode=ALPHA_LITERAL, eps=DEFAULT_EPS):
    "alpha_l derived from the volume parameter, computed once per (line, profile)."
    return scaling_factor(volume, p, l, l.dim, mode, eps)


def witness_window(l2, p2, eps=DEFAULT_EPS):
    """
    Parameter interval of l2 holding the candidate witnesses: the segment
    domain cut to the effective window of f_l2, or the whole segment when l2
    has no profile. None when the interval is empty.
    """
    lo, hi = l2.domain
    if p2 is None:
        if not l2.bounded:
            raise NeighbourhoodConfigError('A line without a profile has an unbounded witness set')
        return lo, hi
    wlo, whi = p2.effective_window(eps)
    lo, hi = max(lo, wlo), min(hi, whi)
    if lo > hi:
        return None
    return lo, hi


def _phi_factory(l1, p1, alpha1, l2):
    x1, d1 = l1.start, l1.direction
    x2, d2 = l2.start, l2.direction

    def phi(s):
        s = np.atleast_1d(np.asarray(s, dtype=float))
        pts = x2 + s[:, None] * d2
        t = project_parameters(pts, x1, d1, l1.bounded)
        gap = pts - (x1 + t[:, None] * d1)
        return np.sqrt((gap * gap).sum(axis=1)) - alpha1 * p1.dist.pdf(t)

    return phi


def _refine(phi, s, values, tol):
    "Bounded scalar search around every grid minimum, lowest first."
    left = np.r_[np.inf, values[:-1]]
    right = np.r_[values[1:], np.inf]
    minima = np.flatnonzero((values <= left) & (values <= right))
    for k in minima[np.argsort(values[minima], kind='stable')]:
        a, b = s[max(k - 1, 0)], s[min(k + 1, s.size - 1)]
        res = optimize.minimize_scalar(lambda v: float(phi(v)[0]), bounds=(a, b), method='bounded',
                                       options={'xatol': tol})
        if res.fun < 0:
            return True
    return False


def _scan(phi, lo, hi, samples, tol):
    if hi == lo:
        return bool(phi(lo)[0] < 0)
    s = np.linspace(lo, hi, samples)
    values = phi(s)
    return bool(np.any(values < 0)) or _refine(phi, s, values, tol)


def _focus_window(l1, p1, l2, window, eps):
    """
    Sub-interval of the witness window whose foot points on l1 fall in the
    effective window of f1, where a narrow peak of f1 can hide between the
    grid points of a long l2. None when it is not narrower than the window.
    """
    d1, d2 = l1.direction, l2.direction
    dd = float(d1 @ d1)
    rate = float(d2 @ d1) / dd if dd > 0.0 else 0.0
    if rate == 0.0:
        return None
    tlo, thi = p1.effective_window(eps)
    dlo, dhi = l1.domain
    # foot points clamp to the segment ends, so an end inside the window opens that side
    tlo = -np.inf if tlo <= dlo else tlo
    thi = np.inf if thi >= dhi else thi
    offset = float((l2.start - l1.start) @ d1) / dd
    bounds = sorted(((tlo - offset) / rate, (thi - offset) / rate))
    lo, hi = max(window[0], bounds[0]), min(window[1], bounds[1])
    if lo > hi or (lo, hi) == tuple(window):
        return None
    return lo, hi


def _search_witness(l1, p1, alpha1, l2, window, samples, tol, eps=DEFAULT_EPS):
    phi = _phi_factory(l1, p1, alpha1, l2)
    if _scan(phi, window[0], window[1], samples, tol):
        return True
    focus = _focus_window(l1, p1, l2, window, eps)
    return focus is not None and _scan(phi, focus[0], focus[1], samples, tol)


def relates_prob(l1, p1, alpha1, l2, p2=None, search_samples=64, search_tol=1e-9, eps=DEFAULT_EPS,
                 distance=None):
    """
    True when some point of S_l2 lies in the (alpha1 * f1)-neighbourhood of l1.

    The signed gap phi(s) = d(g_l2(s), l1) - alpha1 f1(t*(s)) is scanned on a
    grid of the witness window and every local minimum is refined with a
    bounded scalar search; the relation holds when phi < 0 somewhere.
    """
    check_same_dim(l1.dim, l2.dim)
    if distance is None:
        distance = min_distance(l1, l2).distance
    if distance >= alpha1 * profile_max(p1, eps):
        return False
    window = witness_window(l2, p2, eps)
    if window is None:
        return False
    return _search_witness(l1, p1, alpha1, l2, window, search_samples, search_tol, eps)


def _line_params(i, l1, spec):
    """
    (profile, alpha) governing line i as the first argument of R;
    profile None means the minimum distance rule applies.
    """
    if spec.version is Version.V1:
        return None, spec.alpha_for(i)
    p1 = spec.profile_for(i)
    if p1 is None:
        if not spec.distance_fallback:
            raise NeighbourhoodConfigError('No profile given for line {}'.format(i))
        if spec.version is Version.V2:
            return None, ball_radius(spec.volume, l1.dim)
        return None, spec.alpha_for(i)
    if spec.version is Version.V2:
        return p1, volume_alpha(l1, p1, spec.volume, spec.alpha_mode, spec.eps)
    return p1, spec.alpha_for(i)


def relates(l1, l2, spec, i=None, j=None):
    """
    l1 R l2 under spec; i and j are the positions of the lines in the dataset,
    used to look up per-line alpha and profile.
    """
    p1, alpha1 = _line_params(i, l1, spec)
    if p1 is None:
        return relates_v1(l1, l2, alpha1)
    return relates_prob(l1, p1, alpha1, l2, spec.profile_for(j), spec.search_samples, spec.search_tol,
                        spec.eps)


def neighbor_set(i, U, spec, pack=None, counter=None, threads=1, batch=True):
    """
    Indices j with U[i] R U[j], in increasing order (i itself included when
    the relation is reflexive there). Its size is the l-cardinality of U[i].

    With batch=True the minimum distances to every line are computed in one
    vectorised pass; batch=False evaluates the relation pair by pair.
    """
    if pack is None:
        pack = pack_segments(U)
    if counter is not None:
        counter.add(len(U))
    l1 = U[i]
    p1, alpha1 = _line_params(i, l1, spec)

    if not batch:
        def pair(j):
            return relates(l1, U[j], spec, i, j)
        return _collect(pair, range(len(U)), threads)

    distances = min_distances(l1, pack)[0]
    if p1 is None:
        return np.flatnonzero(distances < alpha1).tolist()

    reach = alpha1 * profile_max(p1, spec.eps)
    candidates = np.flatnonzero(distances < reach).tolist()

    def pair(j):
        window = witness_window(U[j], spec.profile_for(j), spec.eps)
        if window is None:
            return False
        return _search_witness(l1, p1, alpha1, U[j], window, spec.search_samples, spec.search_tol,
                               spec.eps)

    return _collect(pair, candidates, threads)


def _collect(pair, indices, threads):
    indices = list(indices)
    if threads > 1 and len(indices) > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            hits = list(pool.map(pair, indices))
    else:
        hits = [pair(j) for j in indices]
    return [j for j, hit in zip(indices, hits) if hit]

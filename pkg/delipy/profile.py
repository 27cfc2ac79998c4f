"""
Module with the density profiles f_l placed along a line.

A profile is a probability density in the line parameter t. The families are
the standard ones of the distribution gallery (uniform, normal, ellipsoidal,
gamma, beta, exponential), evaluated through scipy.stats. The module also
computes the volume of the f-neighbourhood of a line (the solid obtained by
revolving f around the line) and the scaling factor alpha_l = V / V(N_f).
"""

import enum
import logging
from dataclasses import dataclass
from functools import cached_property, lru_cache
from typing import NamedTuple

import numpy as np
from scipy import integrate, optimize, special, stats

from delipy.exceptions import GeometryError, ProfileError
from delipy.geometry import length

logger = logging.getLogger(__name__)

DEFAULT_EPS = 1e-6
QUAD_RTOL = 1e-8
QUAD_MAX_SUBINTERVALS = 2 ** 16

ALPHA_LITERAL = 'literal'
ALPHA_EXACT_VOLUME = 'exact-volume'
ALPHA_MODES = (ALPHA_LITERAL, ALPHA_EXACT_VOLUME)


class Family(enum.Enum):
    UNIFORM = 'uniform'
    NORMAL = 'normal'
    ELLIPSOIDAL = 'ellipsoidal'
    GAMMA = 'gamma'
    BETA = 'beta'
    EXPONENTIAL = 'exponential'


_ARITY = {Family.UNIFORM: 2, Family.NORMAL: 2, Family.ELLIPSOIDAL: 2,
          Family.GAMMA: 2, Family.BETA: 2, Family.EXPONENTIAL: 1}


class Support(NamedTuple):
    lo: float
    hi: float


@dataclass(frozen=True)
class Profile:
    """
    Density of the line parameter t.

    params, per family:
        uniform (a, b)          a < b
        normal (mu, sigma^2)    variance > 0
        ellipsoidal (a, b)      semicircle on [-a, a]; b > 0 is the nominal
                                height, normalisation makes the peak 2/(pi a)
        gamma (alpha, lambda)   shape alpha >= 1, rate lambda > 0
        beta (a1, a2)           a1, a2 >= 1
        exponential (lambda)    rate > 0

    Shapes below 1 give unbounded densities and are refused.
    """

    family: Family
    params: tuple

    def __post_init__(self):
        try:
            family = Family(self.family)
        except ValueError:
            raise ProfileError('Unknown profile family: {!r}'.format(self.family))
        params = tuple(float(p) for p in self.params)
        if len(params) != _ARITY[family]:
            raise ProfileError('{} takes {} parameter(s), got {}'.format(family.value, _ARITY[family], len(params)))
        if not all(np.isfinite(params)):
            raise ProfileError('Profile parameters must be finite: {}'.format(params))
        _check_params(family, params)
        object.__setattr__(self, 'family', family)
        object.__setattr__(self, 'params', params)

    @classmethod
    def parse(cls, text):
        return parse_profile(text)

    def __str__(self):
        return '{}:{}'.format(self.family.value, ','.join(repr(p) for p in self.params))

    @cached_property
    def dist(self):
        "Frozen scipy.stats distribution with the same density."
        p = self.params
        if self.family is Family.UNIFORM:
            return stats.uniform(loc=p[0], scale=p[1] - p[0])
        if self.family is Family.NORMAL:
            return stats.norm(loc=p[0], scale=np.sqrt(p[1]))
        if self.family is Family.ELLIPSOIDAL:
            return stats.semicircular(loc=0.0, scale=p[0])
        if self.family is Family.GAMMA:
            return stats.gamma(a=p[0], scale=1.0 / p[1])
        if self.family is Family.BETA:
            return stats.beta(p[0], p[1])
        return stats.expon(scale=1.0 / p[0])

    def eval(self, t):
        "Density at t (scalar or array); zero outside the support."
        values = self.dist.pdf(t)
        if np.ndim(values) == 0:
            return float(values)
        return values

    def support(self):
        lo, hi = self.dist.support()
        return Support(float(lo), float(hi))

    def effective_window(self, eps=DEFAULT_EPS):
        """
        Finite window used for quadrature and witness search. Finite support
        ends are kept; an infinite end is replaced by the eps (or 1 - eps)
        quantile.
        """
        if not 0.0 < eps < 0.5:
            raise ProfileError('Window tail mass must lie in (0, 0.5), got {}'.format(eps))
        lo, hi = self.support()
        if not np.isfinite(lo):
            lo = float(self.dist.ppf(eps))
        if not np.isfinite(hi):
            hi = float(self.dist.isf(eps))
        return Support(lo, hi)


def _check_params(family, p):
    if family is Family.UNIFORM and not p[0] < p[1]:
        raise ProfileError('uniform needs a < b, got {}'.format(p))
    if family is Family.NORMAL and not p[1] > 0:
        raise ProfileError('normal needs a positive variance, got {}'.format(p[1]))
    if family is Family.ELLIPSOIDAL and not (p[0] > 0 and p[1] > 0):
        raise ProfileError('ellipsoidal needs a > 0 and b > 0, got {}'.format(p))
    if family is Family.GAMMA:
        if not p[1] > 0:
            raise ProfileError('gamma needs a positive rate, got {}'.format(p[1]))
        if not p[0] >= 1:
            raise ProfileError('gamma shape {} < 1 gives an unbounded density'.format(p[0]))
    if family is Family.BETA and not (p[0] >= 1 and p[1] >= 1):
        raise ProfileError('beta shapes below 1 give an unbounded density, got {}'.format(p))
    if family is Family.EXPONENTIAL and not p[0] > 0:
        raise ProfileError('exponential needs a positive rate, got {}'.format(p[0]))


def parse_profile(text):
    """
    Parse the textual form 'family:p1,p2' (case-insensitive), for example
    'uniform:-4,4' or 'normal:0.5,0.01'.
    """
    if isinstance(text, Profile):
        return text
    family, sep, args = str(text).strip().partition(':')
    if not sep:
        raise ProfileError("Profile must look like 'family:p1,p2', got {!r}".format(text))
    try:
        params = tuple(float(a) for a in args.split(','))
    except ValueError:
        raise ProfileError('Non-numeric profile parameters in {!r}'.format(text))
    return Profile(family.strip().lower(), params)


def unit_ball_volume(m):
    "Volume of the unit m-ball, pi^(m/2) / Gamma(m/2 + 1)."
    if int(m) != m or m < 1:
        raise ProfileError('Ball dimension must be a positive integer, got {}'.format(m))
    return float(np.pi ** (m / 2.0) / special.gamma(m / 2.0 + 1.0))


def ball_radius(volume, m):
    "Radius of the m-ball of the given volume."
    return float((volume / unit_ball_volume(m)) ** (1.0 / m))


@lru_cache(maxsize=4096)
def _base_volume(p, l, n, eps):
    if l.is_degenerate:
        raise GeometryError('Cannot revolve a profile around a zero-length segment')
    lo, hi = p.effective_window(eps)
    jacobian = length(l) if l.bounded else float(np.sqrt((l.direction ** 2).sum()))

    def cross_section(t):
        return p.eval(t) ** (n - 1)

    value, abserr = integrate.quad(cross_section, lo, hi, epsabs=0.0, epsrel=QUAD_RTOL,
                                   limit=QUAD_MAX_SUBINTERVALS)
    volume = unit_ball_volume(n - 1) * jacobian * value
    logger.debug('V(N_f) for %s in R^%d: %.12g (quad error %.3g)', p, n, volume, abserr)
    if not np.isfinite(volume) or volume <= 0:
        raise ProfileError('Neighbourhood volume of {} is not finite and positive ({})'.format(p, volume))
    return volume


def neighbourhood_volume(p, l, n, scale=1.0, eps=DEFAULT_EPS):
    """
    Volume of the (scale * f)-neighbourhood of l in R^n.

    Every cross-section perpendicular to l is an (n-1)-ball of radius
    scale * f(t), so V = c_{n-1} * |y - x| * integral of (scale f(t))^(n-1) dt
    over the effective window of the profile.
    """
    if int(n) != n or n < 2:
        raise ProfileError('Neighbourhood volumes need n >= 2, got {}'.format(n))
    if not scale > 0:
        raise ProfileError('Scale must be positive, got {}'.format(scale))
    return float(scale) ** (n - 1) * _base_volume(p, l, int(n), float(eps))


def scaling_factor(V, p, l, n, mode=ALPHA_LITERAL, eps=DEFAULT_EPS):
    """
    alpha_l = V / V(N_{f_l, l}).

    The literal ratio only reproduces the volume V for n = 2, where volume is
    linear in the scale; mode 'exact-volume' takes the (n-1)-th root so that
    the scaled neighbourhood has volume V in any dimension.
    """
    if not V > 0:
        raise ProfileError('Volume parameter must be positive, got {}'.format(V))
    if mode not in ALPHA_MODES:
        raise ProfileError('Unknown alpha mode {!r}'.format(mode))
    ratio = V / neighbourhood_volume(p, l, n, 1.0, eps)
    if mode == ALPHA_EXACT_VOLUME:
        return ratio ** (1.0 / (n - 1))
    return ratio


@lru_cache(maxsize=1024)
def profile_max(p, eps=DEFAULT_EPS):
    "sup of f over its effective window (grid maximum refined by a bounded search)."
    lo, hi = p.effective_window(eps)
    grid = np.linspace(lo, hi, 513)
    values = p.eval(grid)
    k = int(np.argmax(values))
    best = float(values[k])
    a, b = grid[max(k - 1, 0)], grid[min(k + 1, grid.size - 1)]
    if b > a:
        res = optimize.minimize_scalar(lambda t: -p.eval(t), bounds=(a, b), method='bounded',
                                       options={'xatol': 1e-12 * max(1.0, abs(b))})
        best = max(best, -float(res.fun))
    return best

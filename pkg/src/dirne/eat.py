"""Finite-round randomness bounds from entropy accumulation for the spot-checking,
recycled-input and biased-input CHSH protocols."""

from dataclasses import dataclass, field
import enum
import math

import numpy as np

from .entropy import hbin
from .envelope import lower_hull
from .errors import DomainError
from .strategy import OMEGA_MAX, S_MIN

LN2 = math.log(2.0)
EPS_EXT = 1e-12
ALPHA_GRID = tuple(1.0 + np.geomspace(1e-9, 0.99, 64))
T_POINTS = 32


class ProtocolKind(str, enum.Enum):
    SPOT = "SpotCheck"
    RECYCLED = "Recycled"
    BIASED = "Biased"


@dataclass(frozen=True)
class EatParams:
    n: int
    eps_h: float
    eps_eat: float
    d_C: int = 4
    alpha_grid: tuple = field(default=ALPHA_GRID)
    eps_ext: float = EPS_EXT

    def __post_init__(self):
        if not (0.0 < self.eps_h < 1.0):
            raise DomainError(f"eps_h {self.eps_h} outside (0, 1)")
        if not (0.0 < self.eps_eat < 1.0):
            raise DomainError(f"eps_eat {self.eps_eat} outside (0, 1)")
        if self.d_C not in (4, 16):
            raise DomainError(f"output alphabet size {self.d_C} not in {{4, 16}}")
        if self.n < 0:
            raise DomainError("number of rounds must be non-negative")
        if not self.alpha_grid or any(not (1.0 < a < 2.0) for a in self.alpha_grid):
            raise DomainError("alpha grid must be non-empty and inside (1, 2)")

    @property
    def eps_s(self):
        """Soundness error max(eps_eat, 2 eps_h + eps_ext)."""
        return max(self.eps_eat, 2 * self.eps_h + self.eps_ext)

    @classmethod
    def from_soundness(cls, n, eps_s, d_C=4, eps_ext=EPS_EXT, alpha_grid=ALPHA_GRID):
        """Spend the soundness budget: eps_eat = eps_s and 2 eps_h + eps_ext = eps_s."""
        if not eps_s > eps_ext:
            raise DomainError("soundness error must exceed the extractor error")
        return cls(int(n), 0.5 * (eps_s - eps_ext), eps_s, d_C, tuple(alpha_grid), eps_ext)


@dataclass(frozen=True)
class MinTradeoff:
    slope: float
    anchor: float
    base: float
    values: tuple
    max_f: float
    min_q: float
    var_bound: float
    d_C: int

    def __post_init__(self):
        if self.max_f < self.min_q - 1e-12:
            raise DomainError("Max(f) must not be below Min_Q(f)")
        if self.var_bound < 0:
            raise DomainError("variance bound must be non-negative")


def _log_term(params):
    # 1 - sqrt(1 - e^2) without cancellation
    e = params.eps_h
    tail = e * e / (1.0 + math.sqrt(1.0 - e * e))
    return -math.log2(params.eps_eat * tail)


def _second_order(alpha, spread):
    """K_alpha with spread = log d_C + Max - Min_Q, in log space."""
    a1 = alpha - 1.0
    log_k = (a1 * spread * LN2 + 3.0 * np.log(np.logaddexp(spread * LN2, 2.0))
             - np.log(6.0 * (2.0 - alpha) ** 3 * LN2))
    # huge spreads overflow to inf, which only rules that alpha out
    with np.errstate(over="ignore"):
        return np.exp(log_k)


def _bits_per_alpha(params, mt, r):
    alpha = np.asarray(params.alpha_grid, dtype=float)
    a1 = alpha - 1.0
    v = 0.5 * LN2 * (math.log2(1 + 2 * mt.d_C) + math.sqrt(2.0 + mt.var_bound)) ** 2
    spread = math.log2(mt.d_C) + mt.max_f - mt.min_q
    k = _second_order(alpha, spread)
    n = params.n
    with np.errstate(over="ignore"):
        return n * r - alpha / a1 * _log_term(params) - n * (a1 * v + a1 * a1 * k)


def eat_generic(params, mt, r):
    """Smooth min-entropy bound in bits, maximized over the alpha grid, floored at 0.

    The infimum of rate(p) - f(p) is taken as 0, which holds for tangent
    min-tradeoff functions of convex rate curves.
    """
    if params.n == 0:
        return 0.0
    vals = _bits_per_alpha(params, mt, r)
    return max(float(np.max(vals)), 0.0)


def _check_gap(omega_exp, delta_conf):
    if not (0.0 <= delta_conf) or not (0.5 <= omega_exp <= 1.0):
        raise DomainError("need omega_exp in [1/2, 1] and delta_conf >= 0")


def _hull_pieces(curve):
    """Convex minorant of a sampled curve as (knots, values, right slopes)."""
    hull = lower_hull(curve.samples)
    xs = np.array([p[0] for p in hull])
    ys = np.array([p[1] for p in hull])
    if len(xs) == 1:
        return xs, ys, np.zeros(1)
    slopes = np.diff(ys) / np.diff(xs)
    return xs, ys, np.append(slopes, slopes[-1])


def _tangents(curve, lo, hi):
    """Anchor points with value and supporting slope of the curve's convex minorant."""
    xs, ys, slopes = _hull_pieces(curve)
    grid = np.linspace(lo, hi, T_POINTS) if hi > lo else np.array([lo])
    knots = xs[(xs >= lo) & (xs <= hi)]
    ts = np.unique(np.concatenate([grid, knots]))
    ts = ts[(ts >= xs[0]) & (ts <= xs[-1])]
    idx = np.clip(np.searchsorted(xs, ts, side="right") - 1, 0, len(xs) - 1)
    vals = np.interp(ts, xs, ys)
    return ts, vals, slopes[idx]


def _best(params, candidates):
    """Largest bound over (alpha, anchor); ties go to the smallest alpha, then anchor."""
    if not candidates:
        return 0.0
    table = np.stack([_bits_per_alpha(params, mt, r) for mt, r in candidates], axis=1)
    return max(float(table.flat[int(np.argmax(table))]), 0.0)


def spot_tradeoff(t, f_t, slope, gamma):
    g1 = f_t + slope * (1.0 - t)
    vals = (g1 - slope / gamma, g1, g1)  # u = 0 (lost test), 1 (won test), no test
    # two-point law with P(u = 0) <= gamma
    var = slope * slope * (1.0 - gamma) / gamma
    return MinTradeoff(slope, t, f_t, vals, g1, f_t + slope * (S_MIN - t), var, 4)


def spot_check_rate(n, gamma, omega_exp, delta_conf, params, F_curve):
    """Certified bits of the spot-checking protocol with a tangent of F_curve."""
    _check_gap(omega_exp, delta_conf)
    if not (0.0 < gamma < 0.5):
        raise DomainError(f"test probability {gamma} outside (0, 1/2)")
    params = _with_n(params, n, 4)
    hi = omega_exp - delta_conf
    if hi <= 0.75 or params.n == 0:
        return 0.0
    cands = []
    for t, f_t, k in zip(*_tangents(F_curve, 0.75 + delta_conf, min(hi, OMEGA_MAX))):
        cands.append((spot_tradeoff(t, f_t, k, gamma), f_t + (hi - t) * k))
    return _best(params, cands)


def recycled_tradeoff(slope):
    f1 = 2.0 + slope / 4.0
    f0 = 2.0 - 0.75 * slope
    return MinTradeoff(slope, 0.75, 2.0, (f0, f1), f1, 2.0 + slope * (S_MIN - 0.75),
                       slope * slope / 4.0, 16)


def recycled_rate(n, omega_exp, delta_conf, params, slope, curve=None):
    """Certified bits on ABXY for the protocol that recycles its inputs."""
    _check_gap(omega_exp, delta_conf)
    if slope < 0:
        raise DomainError("slope must be non-negative")
    params = _with_n(params, n, 16)
    if params.n == 0:
        return 0.0
    s = omega_exp - delta_conf
    r = 2.0 + slope * (s - 0.75)
    if curve is not None:
        r = min(r, 2.0 + curve(min(s, OMEGA_MAX)))
    return eat_generic(params, recycled_tradeoff(slope), r)


def biased_tradeoff(t, f_t, slope, zeta_a, zeta_b):
    z = zeta_a * zeta_b
    low = f_t - t * slope
    top = slope / (4.0 * z) + low
    if z < 0.125:
        var = slope * slope * (1.0 / (4.0 * z) - 1.0)
    else:
        var = (slope / (8.0 * z)) ** 2
    return MinTradeoff(slope, t, f_t, (low, top), top, f_t - slope * (t - S_MIN), var, 4)


def biased_rate(n, zeta_a, zeta_b, omega_exp, delta_conf, params, F_curve):
    """Certified bits of the protocol with biased local inputs."""
    _check_gap(omega_exp, delta_conf)
    if not (0.0 < zeta_a <= 0.5 and 0.0 < zeta_b <= 0.5):
        raise DomainError("input biases must lie in (0, 1/2]")
    params = _with_n(params, n, 4)
    hi = omega_exp - delta_conf
    if hi <= 0.75 or params.n == 0:
        return 0.0
    cands = []
    for t, f_t, k in zip(*_tangents(F_curve, 0.75 + delta_conf, min(hi, OMEGA_MAX))):
        cands.append((biased_tradeoff(t, f_t, k, zeta_a, zeta_b), f_t + (hi - t) * k))
    return _best(params, cands)


def _with_n(params, n, d_C):
    return EatParams(int(n), params.eps_h, params.eps_eat, d_C, params.alpha_grid, params.eps_ext)


def _kind(kind):
    return ProtocolKind(kind) if not isinstance(kind, ProtocolKind) else kind


def completeness(kind, n, delta_conf, gamma_or_zetas=None):
    """Hoeffding bound on the honest abort probability."""
    kind = _kind(kind)
    if n < 0 or delta_conf < 0:
        raise DomainError("n and delta_conf must be non-negative")
    if kind is ProtocolKind.BIASED:
        za, zb = gamma_or_zetas
        return math.exp(-32.0 * n * (delta_conf * za * zb) ** 2)
    if kind is ProtocolKind.SPOT:
        return math.exp(-2.0 * n * (gamma_or_zetas * delta_conf) ** 2)
    return math.exp(-2.0 * n * delta_conf ** 2)


def calibrated_delta(kind, n, eps_c, gamma_or_zetas=None):
    """Smallest delta_conf whose completeness bound equals eps_c."""
    kind = _kind(kind)
    if not (0.0 < eps_c < 1.0) or n <= 0:
        raise DomainError("need eps_c in (0, 1) and n > 0")
    log_term = math.log(1.0 / eps_c)
    if kind is ProtocolKind.BIASED:
        za, zb = gamma_or_zetas
        return math.sqrt(log_term / (32.0 * n)) / (za * zb)
    if kind is ProtocolKind.SPOT:
        return math.sqrt(log_term / (2.0 * n)) / gamma_or_zetas
    return math.sqrt(log_term / (2.0 * n))


def input_randomness(kind, n, gamma_or_zetas=None):
    """Expected input bits consumed by n rounds."""
    kind = _kind(kind)
    if kind is ProtocolKind.SPOT:
        g = gamma_or_zetas
        return n * (float(hbin(g)) + 2 * g) + 3
    if kind is ProtocolKind.BIASED:
        za, zb = gamma_or_zetas
        return n * (float(hbin(za)) + float(hbin(zb)))
    return 2.0 * n


def net_expansion(kind, output_bits, n, gamma_or_zetas=None):
    return output_bits - input_randomness(kind, n, gamma_or_zetas)

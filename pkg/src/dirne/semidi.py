"""Certified rate bounds for the semi-device-independent protocol with a
score omega and an overlap Theta, and the asymptotic net rates built on them.

The rate problem is reduced to two weighted qubit terms, one per input x,
with Bloch length a_x and angle xi_x to the measurement direction. The block
weights eta_x are eliminated exactly: their sum s only enters the two
constraints, and a feasible s exists iff

    a_0 + a_1 - a_0 cos xi_0 + a_1 cos xi_1 <= 4 - 4 omega,
    |v| >= 4 Theta - 2,
    |v| + a_0 cos xi_0 - a_1 cos xi_1 >= 4 Theta + 4 omega - 4,

with v = a_0 e^{i xi_0} + a_1 e^{i xi_1}. The objective depends on the angles
only through cos xi_x, and |v| only grows when both sines share a sign, so
xi_x ranges over [0, pi].
"""

from dataclasses import dataclass
import math
import time

import numpy as np
from scipy.optimize import minimize

from .entropy import hbin, phi_minorant
from .envelope import SampledFn2D, convenv_2d
from .errors import BudgetError, DomainError, InfeasibleError
from .lower import GridSpec, _nested_min

__all__ = ["SemiDiPoint", "SemiDiVars", "SemiDiBound", "SemiDiSurface", "VAR_GRID",
           "INFEASIBLE", "semidi_objective", "semidi_feasible", "semidi_lb",
           "semidi_surface", "semidi_net_rate"]

# cells over (a_0, xi_0, a_1, xi_1)
VAR_GRID = GridSpec((256, 256, 256, 256))
# surface value where no strategy reaches the point
INFEASIBLE = 2.0
_TOL = 1e-12


@dataclass(frozen=True)
class SemiDiPoint:
    omega: float
    theta_overlap: float
    pX0: float = 0.5

    def __post_init__(self):
        if not (0.0 <= self.omega <= 1.0):
            raise DomainError(f"score {self.omega} outside [0, 1]")
        if not (0.0 <= self.theta_overlap <= 1.0):
            raise DomainError(f"overlap {self.theta_overlap} outside [0, 1]")
        if not (0.0 < self.pX0 < 1.0):
            raise DomainError(f"input bias {self.pX0} outside (0, 1)")


@dataclass(frozen=True)
class SemiDiVars:
    eta0: float
    eta1: float
    a0: float
    a1: float
    xi0: float
    xi1: float

    def __post_init__(self):
        for a, e in ((self.a0, self.eta0), (self.a1, self.eta1)):
            if not (0.0 <= a <= e <= 1.0):
                raise DomainError("need 0 <= a_x <= eta_x <= 1")


@dataclass(frozen=True)
class SemiDiBound:
    point: SemiDiPoint
    value: float
    n_poly: int
    resolution: tuple
    seconds: float


def _weights(px0):
    return (px0, 1.0 - px0)


def semidi_objective(v, px0, n_poly=None):
    """sum_x p(x) (Phi(a_x cos xi_x) - Phi(a_x)), with the minorant bound
    Phi_n(a c) - Phi_n(a) - I_{n+1} a^{2n+2} per term when n_poly is given."""
    total = 0.0
    for w, a, xi in zip(_weights(px0), (v.a0, v.a1), (v.xi0, v.xi1)):
        total = total + w * _term(np.asarray(a, float), np.cos(xi), n_poly)
    return total


def _term(a, c, n_poly):
    if n_poly is None:
        return hbin(0.5 + 0.5 * a * c) - hbin(0.5 + 0.5 * a)
    p = phi_minorant(n_poly)
    return p(a * c) - p(a) - p.tail(a)


def semidi_feasible(v, point, tol=1e-12):
    """Both constraints of the reduced problem at the full variable set."""
    w, t = point.omega, point.theta_overlap
    c0, c1 = math.cos(v.xi0), math.cos(v.xi1)
    score = -v.eta0 - v.eta1 + v.a0 * c0 - v.a1 * c1
    vx = v.a0 * c0 + v.a1 * c1
    vy = v.a0 * math.sin(v.xi0) + v.a1 * math.sin(v.xi1)
    gap = 4 * t - v.eta0 - v.eta1
    return score >= 4 * w - 4 - tol and vx * vx + vy * vy >= gap * gap - tol


class _Reduced:
    """Box bounds and point values over (a_0, xi_0, a_1, xi_1)."""

    def __init__(self, point, n_poly):
        self.w = point.omega
        self.t = point.theta_overlap
        self.weights = _weights(point.pX0)
        self.n_poly = n_poly
        self.bounds = [(0.0, 1.0), (0.0, math.pi), (0.0, 1.0), (0.0, math.pi)]

    def _terms(self, a, c_abs, a_tail=None):
        # Phi_n(a c) - Phi_n(a) grows with a and falls with |c|; the tail grows with a
        p = phi_minorant(self.n_poly)
        return p(a * c_abs) - p(a) - p.tail(a if a_tail is None else a_tail)

    def boxes(self, lows, widths):
        a0, x0, a1, x1 = lows
        a0h, x0h, a1h, x1h = (lo + w for lo, w in zip(lows, widths))
        c0_hi, c0_lo = np.cos(x0), np.cos(x0h)
        c1_hi, c1_lo = np.cos(x1), np.cos(x1h)
        w0, w1 = self.weights
        obj = (w0 * self._terms(a0, np.maximum(np.abs(c0_hi), np.abs(c0_lo)), a0h)
               + w1 * self._terms(a1, np.maximum(np.abs(c1_hi), np.abs(c1_lo)), a1h))
        # smallest left side of the first condition
        score_lhs = a0 * (1.0 - c0_hi) + a1 * (1.0 + c1_lo)
        # largest |v|
        d_lo, d_hi = x0 - x1h, x0h - x1
        cos_d = np.where((d_lo <= 0) & (d_hi >= 0), 1.0,
                         np.cos(np.minimum(np.abs(d_lo), np.abs(d_hi))))
        cross = 2.0 * cos_d * np.where(cos_d >= 0, a0h * a1h, a0 * a1)
        v_hi = np.sqrt(np.maximum(a0h * a0h + a1h * a1h + cross, 0.0))
        y0_hi = np.where(c0_hi >= 0, a0h, a0) * c0_hi
        y1_lo = np.where(c1_lo <= 0, a1h, a1) * c1_lo
        ok = ((score_lhs <= 4.0 - 4.0 * self.w + _TOL)
              & (v_hi >= 4.0 * self.t - 2.0 - _TOL)
              & (v_hi + y0_hi - y1_lo >= 4.0 * (self.t + self.w) - 4.0 - _TOL))
        return np.where(ok, obj, np.inf)

    def points(self, pts):
        a0, x0, a1, x1 = pts
        c0, c1 = np.cos(x0), np.cos(x1)
        y0, y1 = a0 * c0, a1 * c1
        v = np.hypot(y0 + y1, a0 * np.sin(x0) + a1 * np.sin(x1))
        ok = ((a0 + a1 - y0 + y1 <= 4.0 - 4.0 * self.w)
              & (v >= 4.0 * self.t - 2.0)
              & (v + y0 - y1 >= 4.0 * (self.t + self.w) - 4.0))
        w0, w1 = self.weights
        obj = w0 * self._terms(a0, np.abs(c0)) + w1 * self._terms(a1, np.abs(c1))
        return np.where(ok, obj, np.inf)

    def _margins(self, x):
        """Constraint slacks at one point; all non-negative iff feasible."""
        a0, x0, a1, x1 = x
        y0, y1 = a0 * math.cos(x0), a1 * math.cos(x1)
        v = math.hypot(y0 + y1, a0 * math.sin(x0) + a1 * math.sin(x1))
        return np.array([4.0 - 4.0 * self.w - (a0 + a1 - y0 + y1),
                         v - (4.0 * self.t - 2.0),
                         v + y0 - y1 - (4.0 * (self.t + self.w) - 4.0)])

    def _value(self, x):
        return float(self.points([np.array([c]) for c in x])[0])

    def incumbent(self, starts=8, seed=0):
        """Smallest objective found by local searches from random starts.

        Local solutions sit on the constraint boundary up to the solver
        tolerance, so each is pulled toward a point of largest slack until it
        passes the exact feasibility test. Only such points count, which makes
        the result an attained value that prunes boxes without changing the bound.
        """
        lo = np.array([b[0] for b in self.bounds])
        hi = np.array([b[1] for b in self.bounds])
        rng = np.random.default_rng(seed)
        # the point of largest smallest slack, found over (x, slack)
        best_c, best_s = None, -np.inf
        for _ in range(starts):
            z0 = np.append(rng.uniform(lo, hi), 0.0)
            res = minimize(lambda z: -z[-1], z0, method="SLSQP",
                           bounds=self.bounds + [(None, None)],
                           constraints=[{"type": "ineq",
                                         "fun": lambda z: self._margins(z[:-1]) - z[-1]}])
            x = np.clip(res.x[:-1], lo, hi)
            s = float(np.min(self._margins(x)))
            if s > best_s:
                best_c, best_s = x, s
        if best_s <= 0.0:
            return np.inf
        best = self._value(best_c)
        cons = [{"type": "ineq", "fun": self._margins}]
        for _ in range(starts):
            res = minimize(self._smooth, rng.uniform(lo, hi), method="SLSQP",
                           bounds=self.bounds, constraints=cons)
            x = np.clip(res.x, lo, hi)
            # bisect on the segment to the centre for the feasible point nearest x
            t_in, t_out = 0.0, 1.0
            if np.isfinite(self._value(x)):
                t_in = t_out = 1.0
            for _ in range(40):
                if t_out - t_in < 1e-12:
                    break
                mid = 0.5 * (t_in + t_out)
                if np.isfinite(self._value(best_c + mid * (x - best_c))):
                    t_in = mid
                else:
                    t_out = mid
            best = min(best, self._value(best_c + t_in * (x - best_c)))
        return best

    def _smooth(self, x):
        a0, x0, a1, x1 = x
        w0, w1 = self.weights
        return float(w0 * self._terms(a0, abs(math.cos(x0))) + w1 * self._terms(a1, abs(math.cos(x1))))


def semidi_lb(point, n_poly=2, var_grid=VAR_GRID, max_cells=1e12):
    """Certified lower bound in bits on the generation-round entropy H(Y|XE).

    var_grid splits (a_0, xi_0, a_1, xi_1); each box is bounded through the
    monotonicity of the objective in a_x and |cos xi_x| and kept only if some
    point of it can satisfy both constraints. Larger n_poly tightens the minorant of the
    binary entropy. Raises InfeasibleError when no box can be feasible.
    """
    t0 = time.perf_counter()
    if n_poly is None or int(n_poly) != n_poly or n_poly < 2:
        raise DomainError("n_poly must be an integer of at least 2")
    if var_grid.ndim != 4:
        raise DomainError("var_grid needs 4 axes")
    res = var_grid.resolution
    if point.theta_overlap <= 0.5:
        return SemiDiBound(point, 0.0, int(n_poly), res, time.perf_counter() - t0)
    if float(np.prod(res, dtype=float)) > max_cells:
        raise BudgetError(f"grid {res} exceeds the cap of {max_cells:g} cells")
    eng = _Reduced(point, int(n_poly))
    axes = var_grid.axes(eng.bounds)
    val = _nested_min(eng.boxes, eng.points, axes, np.inf, incumbent=eng.incumbent())
    if not np.isfinite(val):
        raise InfeasibleError(f"no strategy reaches score {point.omega} "
                              f"with overlap {point.theta_overlap}")
    return SemiDiBound(point, float(val), int(n_poly), res, time.perf_counter() - t0)


@dataclass(frozen=True)
class SemiDiSurface:
    raw: SampledFn2D
    feasible: np.ndarray
    extended: SampledFn2D
    envelope: SampledFn2D

    def floor(self, omega, theta):
        """Extended surface at the largest grid point below (omega, theta)."""
        i = int(np.searchsorted(self.extended.xs, omega, side="right")) - 1
        j = int(np.searchsorted(self.extended.ys, theta, side="right")) - 1
        if i < 0 or j < 0:
            return 0.0
        return float(self.extended.values[i, j])


def semidi_surface(omega_grid, theta_grid, pX0=0.5, n_poly=2, var_grid=VAR_GRID):
    """Certified values on a grid, their monotone extension and convex envelope.

    Unreachable grid points get INFEASIBLE. The extension takes at each grid
    point the smallest value over grid points that dominate it in both
    coordinates, which stays a lower bound because the rate grows in both.
    """
    ws = np.asarray(omega_grid, dtype=float)
    ts = np.asarray(theta_grid, dtype=float)
    if np.any(np.diff(ws) <= 0) or np.any(np.diff(ts) <= 0):
        raise DomainError("grids must be strictly increasing")
    vals = np.empty((len(ws), len(ts)))
    feas = np.ones(vals.shape, dtype=bool)
    for i, w in enumerate(ws):
        for j, t in enumerate(ts):
            try:
                vals[i, j] = semidi_lb(SemiDiPoint(w, t, pX0), n_poly, var_grid).value
            except InfeasibleError:
                vals[i, j] = INFEASIBLE
                feas[i, j] = False
    ext = np.minimum.accumulate(vals[::-1, ::-1], axis=0)
    ext = np.minimum.accumulate(ext, axis=1)[::-1, ::-1]
    raw = SampledFn2D(ws, ts, vals)
    extended = SampledFn2D(ws, ts, ext)
    return SemiDiSurface(raw, feas, extended, convenv_2d(extended))


def semidi_net_rate(point, gamma, recycle, rate_H):
    """Asymptotic net bits per round for testing probability gamma.

    Recycling the inputs costs gamma H(X) per round; otherwise H(X).
    """
    if not (0.0 < gamma < 1.0):
        raise DomainError(f"testing probability {gamma} outside (0, 1)")
    h_x = float(hbin(point.pX0))
    return (1.0 - gamma) * rate_H - (gamma * h_x if recycle else h_x)

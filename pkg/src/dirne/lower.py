"""Certified lower bounds on minimal entropies at fixed CHSH score.

Each engine partitions a reduced parameter domain into boxes, bounds the
objective from below on every box and reports the smallest box bound.
"""

from dataclasses import dataclass
import math
import time

import numpy as np

from .entropy import phi_minorant, phi_unchecked
from .envelope import lower_hull
from .errors import BudgetError, DomainError
from .strategy import OMEGA_MAX, K, g1, theta_max
from .upper import BoundCurve

__all__ = ["K", "GridSpec", "CuboidBound", "CertifiedPoint", "one_sided_lb",
           "one_sided_bounds", "two_sided_00_lb", "two_sided_00_bounds", "default_00_grid",
           "two_sided_xye_lb", "Staircase", "staircase", "shifted_convex_lb"]

SQRT2 = math.sqrt(2.0)
# intersection tests with the curved domains are exact up to rounding
_DOMAIN_TOL = 1e-12
# boxes per vectorized evaluation
_CHUNK = 1 << 17


@dataclass(frozen=True)
class GridSpec:
    """Per-axis cell counts over the engine's domain, or explicit breakpoints."""

    counts: tuple = None
    breaks: tuple = None
    fallback: float = 2.0

    def __post_init__(self):
        if (self.counts is None) == (self.breaks is None):
            raise DomainError("give exactly one of counts and breaks")
        if self.counts is not None and any(int(n) < 1 for n in self.counts):
            raise DomainError("cell counts must be positive")
        if self.breaks is not None:
            for b in self.breaks:
                if len(b) < 2 or np.any(np.diff(b) <= 0):
                    raise DomainError("breakpoints must be strictly increasing")

    @property
    def ndim(self):
        return len(self.counts if self.counts is not None else self.breaks)

    @property
    def resolution(self):
        if self.counts is not None:
            return tuple(int(n) for n in self.counts)
        return tuple(len(b) - 1 for b in self.breaks)

    def doubled(self):
        if self.counts is not None:
            return GridSpec(tuple(2 * int(n) for n in self.counts), None, self.fallback)
        out = []
        for b in self.breaks:
            b = np.asarray(b, dtype=float)
            mid = 0.5 * (b[:-1] + b[1:])
            out.append(tuple(np.sort(np.concatenate([b, mid]))))
        return GridSpec(None, tuple(out), self.fallback)

    def axes(self, bounds):
        """Breakpoint arrays for the given (lo, hi) per axis.

        A degenerate axis (lo == hi) becomes a single zero-width cell.
        """
        if len(bounds) != self.ndim:
            raise DomainError(f"grid has {self.ndim} axes, domain has {len(bounds)}")
        out = []
        for i, (lo, hi) in enumerate(bounds):
            if hi <= lo:
                out.append(np.array([lo, lo]))
                continue
            if self.counts is not None:
                ax = np.linspace(lo, hi, int(self.counts[i]) + 1)
            else:
                ax = np.asarray(self.breaks[i], dtype=float)
                if abs(ax[0] - lo) > 1e-12 or abs(ax[-1] - hi) > 1e-12:
                    raise DomainError(f"axis {i} breakpoints must span [{lo}, {hi}]")
            ax[0], ax[-1] = lo, hi
            out.append(ax)
        return out


@dataclass(frozen=True)
class CuboidBound:
    index: tuple
    value: float
    tag: str


@dataclass(frozen=True)
class CertifiedPoint:
    omega: float
    value: float
    engine: str
    resolution: tuple
    seconds: float

    def __post_init__(self):
        if not (0.0 <= self.value <= 2.0):
            raise DomainError(f"certified value {self.value} outside [0, 2]")


def _check_omega(omega):
    if not (0.75 < omega <= OMEGA_MAX + 1e-12):
        raise DomainError(f"score {omega} outside (3/4, {OMEGA_MAX}]")
    return min(float(omega), OMEGA_MAX)


def _cells(axes):
    """Lower corners and widths of all boxes, broadcast to the full grid."""
    lows = np.meshgrid(*[a[:-1] for a in axes], indexing="ij")
    widths = np.meshgrid(*[np.diff(a) for a in axes], indexing="ij")
    return lows, widths


def _level_shifts(counts, min_count=4):
    """Coarsening shifts per level, coarsest first, finest level all zero.

    Level L - m merges 2^min(m, e_i) fine cells along axis i, where e_i is the
    largest power of two dividing the count that keeps min_count cells.
    """
    exps = []
    for n in counts:
        e = 0
        while n % (2 ** (e + 1)) == 0 and n // 2 ** (e + 1) >= min_count:
            e += 1
        exps.append(e)
    depth = max(exps)
    return [tuple(min(m, e) for e in exps) for m in range(depth, -1, -1)]


def _nested_min(box_fn, point_fn, axes, fallback, incumbent=np.inf):
    """Minimum over the finest boxes of the largest bound along each box's chain
    of enclosing coarser boxes.

    box_fn(lows, widths) bounds the objective on boxes from below; point_fn(pts)
    evaluates it at points, inf where infeasible, and incumbent is any known
    objective value. Boxes whose bound exceeds a known objective value cannot
    hold the minimum and are skipped, so the result equals the exhaustive
    evaluation.
    """
    dim = len(axes)
    shifts = _level_shifts([len(a) - 1 for a in axes])
    idx = np.array(np.meshgrid(*[np.arange((len(a) - 1) >> s) for a, s in zip(axes, shifts[0])],
                               indexing="ij"), dtype=np.int32).reshape(dim, -1)
    inherited = np.full(idx.shape[1], -np.inf)
    best_point = float(incumbent)
    for level, sh in enumerate(shifts):
        level_axes = [axes[i][::2 ** sh[i]] for i in range(dim)]
        last = level == len(shifts) - 1
        nxt = None if last else shifts[level + 1]
        split = [] if last else [i for i in range(dim) if nxt[i] < sh[i]]
        kept_idx, kept_bound = [], []
        lowest = np.inf
        for start in range(0, idx.shape[1], _CHUNK):
            part = idx[:, start:start + _CHUNK]
            lows = [level_axes[i][part[i]] for i in range(dim)]
            widths = [level_axes[i][part[i] + 1] - lows[i] for i in range(dim)]
            bound = np.minimum(box_fn(lows, widths), fallback)
            bound = np.maximum(bound, inherited[start:start + _CHUNK])
            mids = [lo + 0.5 * w for lo, w in zip(lows, widths)]
            best_point = min(best_point, float(np.min(point_fn(lows))),
                             float(np.min(point_fn(mids))))
            lowest = min(lowest, float(np.min(bound)))
            kept_idx.append(part)
            kept_bound.append(bound)
        if last:
            return lowest
        # pruning waits for the whole level so the best known value is as low as possible
        idx = np.concatenate(kept_idx, axis=1)
        bound = np.concatenate(kept_bound)
        # boxes without feasible points have infinite bounds and go as well
        keep = (bound <= best_point) & (bound < np.inf)
        idx, bound = idx[:, keep], bound[keep]
        if not idx.shape[1]:
            return np.inf
        # split along the axes that refine at the next level
        for i in split:
            idx = np.concatenate([idx, idx], axis=1)
            half = idx.shape[1] // 2
            idx[i, :half] *= 2
            idx[i, half:] = 2 * idx[i, half:] + 1
            bound = np.concatenate([bound, bound])
        inherited = bound


def _certified(omega, value, engine, grid, t0):
    value = float(min(max(value, 0.0), grid.fallback))
    return CertifiedPoint(omega, value, engine, grid.resolution, time.perf_counter() - t0)


# one-sided: H(A|XYE) over (eta, theta, v), R = c / cos(eta)

class _OneSided:
    def __init__(self, omega, branches=("+", "-")):
        self.c = SQRT2 * (2 * omega - 1)
        self.scale = 4 * omega - 2
        self.bounds = [(0.0, math.acos(min(self.c, 1.0))),
                       (0.0, max(math.pi / 4 - math.acos(min(1.0 / self.scale, 1.0)), 0.0)),
                       (0.0, math.pi / 2)]
        self.signs = [s for tag, s in (("+", 1.0), ("-", -1.0)) if tag in branches]
        if not self.signs:
            raise DomainError("select at least one branch")

    def theta_top(self, eta):
        return math.pi / 4 - np.arccos(np.clip(np.cos(eta) / self.scale, -1.0, 1.0))

    def boxes(self, lows, widths):
        """Per-branch lower bounds on boxes, stacked along the first axis."""
        (e0, t0, v0), (de, dt, dv) = lows, widths
        r_lo = self.c / np.cos(e0)
        r_hi = np.minimum(self.c / np.cos(e0 + de), 1.0)
        s_lo = np.sin(2 * t0)
        s_hi = np.sin(2 * (t0 + dt))
        # theta_max(eta) decreases in eta, so the lower corner decides intersection
        feasible = t0 <= self.theta_top(e0) + _DOMAIN_TOL
        k_part = K(r_lo, t0)
        u0 = np.arccos(np.clip(np.cos(v0) * s_lo, -1.0, 1.0))

        def half_term(g, spread):
            top = np.minimum(np.cos(g) + spread, 1.0)
            zeta = np.where(top < 0.0, top * s_lo, top * s_hi)
            arg = np.minimum(r_hi * np.sqrt(np.maximum(1.0 + zeta, 0.0)), 1.0)
            return 0.5 * phi_unchecked(arg)

        out = []
        for sign in self.signs:
            u = u0 + sign * 2 * e0
            if sign > 0:
                d0 = np.maximum(2 * dt, 2 * de + 2 * dv)
                d1 = np.maximum(2 * de, 2 * dt + dv)
            else:
                d0 = np.maximum(2 * dv, 2 * de + 2 * dt)
                d1 = 2 * de + 2 * dt + dv
            val = half_term(u + v0, d0) + half_term(u - v0, d1) + k_part
            out.append(np.where(feasible, val, np.inf))
        return np.array(out)

    def box_min(self, lows, widths):
        return np.min(self.boxes(lows, widths), axis=0)

    def points(self, pts):
        e, t, v = pts
        R = np.minimum(self.c / np.cos(e), 1.0)
        s = np.sin(2 * t)
        u0 = np.arccos(np.clip(np.cos(v) * s, -1.0, 1.0))
        best = np.full(np.shape(e), np.inf)
        for sign in self.signs:
            u = u0 + sign * 2 * e
            val = sum(0.5 * phi_unchecked(R * np.sqrt(np.maximum(1.0 + s * np.cos(g), 0.0)))
                      for g in (u + v, u - v)) + K(R, t)
            best = np.minimum(best, val)
        return np.where(t <= self.theta_top(e), best, np.inf)


def one_sided_bounds(omega, grid=GridSpec((40, 40, 40)), branches=("+", "-")):
    """Per-box lower bounds on the full grid, one array per branch."""
    eng = _OneSided(_check_omega(omega), branches)
    lows, widths = _cells(grid.axes(eng.bounds))
    return tuple(np.minimum(b, grid.fallback) for b in eng.boxes(lows, widths))


def one_sided_lb(omega, grid=GridSpec((40, 40, 40)), branches=("+", "-")):
    """Certified lower bound on min H(A|XYE) at score omega, uniform inputs."""
    t0 = time.perf_counter()
    omega = _check_omega(omega)
    eng = _OneSided(omega, branches)
    val = _nested_min(eng.box_min, eng.points, grid.axes(eng.bounds), grid.fallback)
    return _certified(omega, val, "one_sided", grid, t0)


# two-sided, inputs (0, 0): H(AB|X=0,Y=0,E) over (lam, v, theta)

def _alpha0(lam, v, tbar):
    tt = np.tan(tbar)
    # atan(1/(tan(x) tan(tbar))) written with atan2 to stay finite at x = 0, pi/2, pi
    return (-2.0 * np.arctan2(np.cos(lam), np.sin(lam) * tt)
            + np.arctan2(np.cos(v), np.sin(v) * tt))


def reduced_00(lam, v, theta):
    """Reduced correlator and inverse-radius factor (eps, z) of the 00 problem."""
    tbar = math.pi / 4 + theta
    a0 = _alpha0(lam, v, tbar)
    eps = (np.cos(theta) * np.cos(a0 - 2 * v + lam)
           + np.sin(theta) * np.cos(a0 + 2 * v - lam))
    root = np.sqrt(np.clip(1.0 - np.cos(2 * v) * np.sin(2 * theta), 0.0, None))
    z = (np.cos(v - lam) * (np.sin(a0) * np.sin(v) * np.cos(tbar)
                            + np.cos(a0) * np.cos(v) * np.sin(tbar))
         - np.sin(v - lam) / SQRT2 * root)
    return eps, z


def _scaled(coef, width):
    # zero-width axes contribute nothing even where the constant is infinite
    with np.errstate(invalid="ignore", over="ignore"):
        return np.where(width > 0, coef * width, 0.0)


class _TwoSided00:
    def __init__(self, omega, r_splits=8):
        self.c = SQRT2 * (2 * omega - 1)
        th_hi = max(math.pi / 4 - math.acos(min(1.0 / (4 * omega - 2), 1.0)), 0.0)
        self.bounds = [(0.0, math.pi), (0.0, math.pi), (0.0, th_hi)]
        self.r_splits = r_splits

    def boxes(self, lows, widths):
        (l0, v0, t0), (dl, dv, dt) = lows, widths
        c = self.c
        # expand from the box centre, so every distance is at most half a width
        eps_c, z_c = reduced_00(l0 + 0.5 * dl, v0 + 0.5 * dv, t0 + 0.5 * dt)
        # derivative bounds increase with theta: take them on the upper face
        tbar = math.pi / 4 + t0 + dt
        with np.errstate(divide="ignore", over="ignore"):
            a_l = 2 * np.tan(tbar)
            a_v = np.tan(tbar)
            a_t = 3.0 / np.sin(2 * tbar)
        dz = 0.5 * (_scaled(SQRT2 * (1.5 + a_l), dl) + _scaled(SQRT2 * (2 + a_v), dv)
                    + _scaled(SQRT2 + 1 + SQRT2 * a_t, dt))
        de = 0.5 * (_scaled(SQRT2 * (a_l + 1), dl) + _scaled(SQRT2 * (a_v + 2), dv)
                    + _scaled(SQRT2 * (a_t + 1), dt))
        dz = np.where(np.isfinite(dz), dz, np.inf)
        de = np.where(np.isfinite(de), de, np.inf)
        # valid points have R = c / z in [c, 1], i.e. z in [c, 1]
        z_lo = np.maximum(z_c - dz, c)
        z_hi = np.minimum(z_c + dz, 1.0)
        nonempty = z_lo <= z_hi
        r_min = c / np.where(nonempty, z_hi, 1.0)
        r_max = c / np.where(nonempty, z_lo, 1.0)
        # the reduced correlator may exceed 1; only its product with R is capped
        e_abs = np.abs(eps_c) + de
        # K grows and the entropy term shrinks with R: bound each slice of the
        # R range by K at its left end plus the entropy term at its right end
        best = np.full(np.shape(l0), np.inf)
        for i in range(self.r_splits):
            ra = r_min + (r_max - r_min) * (i / self.r_splits)
            rb = r_min + (r_max - r_min) * ((i + 1) / self.r_splits)
            # theta_max decreases in R: a slice above theta_max(ra) holds no valid point
            ok = nonempty & (t0 <= theta_max(np.minimum(ra, 1.0)) + _DOMAIN_TOL)
            val = phi_unchecked(np.minimum(rb * e_abs, 1.0)) + K(ra, t0)
            best = np.minimum(best, np.where(ok, val, np.inf))
        return best

    def points(self, pts):
        lam, v, t = pts
        eps, z = reduced_00(lam, v, t)
        ok = z >= self.c
        R = self.c / np.where(ok, z, 1.0)
        ok &= t <= theta_max(np.minimum(R, 1.0))
        val = phi_unchecked(R * eps) + K(np.minimum(R, 1.0), t)
        return np.where(ok, val, np.inf)


def two_sided_00_bounds(omega, grid=GridSpec((40, 40, 40))):
    """Per-box lower bounds on the full (lam, v, theta) grid."""
    eng = _TwoSided00(_check_omega(omega))
    lows, widths = _cells(grid.axes(eng.bounds))
    return np.minimum(eng.boxes(lows, widths), grid.fallback)


def default_00_grid(omega):
    """5120 x 5120 boxes in (lam, v) and 80 * 2^k in theta with width at most 7e-4."""
    th_hi = _TwoSided00(_check_omega(omega)).bounds[2][1]
    n_theta = 80
    while th_hi / n_theta > 7e-4:
        n_theta *= 2
    return GridSpec((5120, 5120, n_theta))


def two_sided_00_lb(omega, grid=None):
    """Certified lower bound on min H(AB|X=0,Y=0,E) at score omega."""
    t0 = time.perf_counter()
    omega = _check_omega(omega)
    grid = default_00_grid(omega) if grid is None else grid
    eng = _TwoSided00(omega)
    val = _nested_min(eng.boxes, eng.points, grid.axes(eng.bounds), grid.fallback)
    return _certified(omega, val, "two_sided_00", grid, t0)


# two-sided, all inputs: H(AB|XYE) over (R, theta, alpha0, alpha1, beta0, beta1)

def _cos2_range(lo, hi):
    """Range of cos(2 t) for t in [lo, hi], elementwise."""
    a, b = 2 * lo, 2 * hi
    ca, cb = np.cos(a), np.cos(b)
    # does [a, b] contain a multiple of 2 pi (cos = 1) or an odd multiple of pi?
    has_max = np.ceil(a / (2 * math.pi)) * 2 * math.pi <= b
    has_min = np.ceil((a - math.pi) / (2 * math.pi)) * 2 * math.pi + math.pi <= b
    return (np.where(has_min, -1.0, np.minimum(ca, cb)),
            np.where(has_max, 1.0, np.maximum(ca, cb)))


def _even_poly(coefs, x2):
    acc = 0.0
    for c in reversed(coefs):
        acc = acc * x2 + c
    return acc


def _dphi(x):
    return 0.5 * np.log2((1.0 - x) / (1.0 + x))


def _quad_max(g, H, hs):
    """Upper bound on g.d + d'Hd/2 over the box |d_k| <= hs[k].

    Off-diagonal products are split with |z_k z_l| <= (z_k^2 + z_l^2)/2, which
    leaves one concave or convex parabola per axis.
    """
    out = 0.0
    n = len(hs)
    for k in range(n):
        lam = H[k][k] * hs[k] * hs[k]
        for m in range(n):
            if m != k:
                lam = lam + np.abs(H[k][m]) * hs[k] * hs[m]
        gk = np.abs(g[k]) * hs[k]
        neg = np.maximum(-lam, 1e-300)
        out = out + np.where(lam >= 0, gk + 0.5 * lam,
                             np.where(gk <= neg, gk * gk / (2 * neg), gk - 0.5 * neg))
    return out


# (alpha index, beta index, sign) of each signed correlator; angles are
# (alpha0, alpha1, beta0, beta1) and box variables (R, theta, angles...)
_XYE_TERMS = ((0, 2, 1), (0, 3, 1), (1, 2, 1), (1, 3, -1))


class _TwoSidedXYE:
    """Objective 1/4 sum Phi_n(e_xy) + K(R, theta) subject to sum e_xy >= 4(2 omega - 1).

    e_xy is the signed correlator R (cos theta X + sin theta Y) with
    X = cos 2(alpha - beta), Y = cos 2(alpha + beta). Shifting all angles by
    pi/2 or negating all of them changes no correlator, so alpha0 is
    restricted to [0, pi/4].

    Box bounds combine a centred second-order expansion (exact gradient and
    Hessian at the box centre, third-order remainder from explicit derivative
    bounds) with per-correlator interval bounds, for several Lagrange
    multipliers on the score constraint.
    """

    def __init__(self, omega, n_poly, multipliers=(0.0, 0.5, 1.0, 1.5, 2.0)):
        self.c = SQRT2 * (2 * omega - 1)
        self.target = 4 * (2 * omega - 1)
        self.fun = phi_minorant(n_poly) if n_poly is not None else None
        c_top = min(self.c, 1.0)
        self.bounds = [(c_top, 1.0), (0.0, max(float(theta_max(c_top)), 0.0)),
                       (0.0, math.pi / 4), (0.0, math.pi), (0.0, math.pi), (0.0, math.pi)]
        if self.fun is not None:
            co = list(self.fun.coeffs) + [0.0]
            # Phi_n'' in powers x^(2j); every coefficient is negative
            second = [(2 * j + 2) * (2 * j + 1) * (co[j + 1] - co[j]) for j in range(len(co) - 1)]
            self.d2_coefs = [abs(v) for v in second]
            self.d3_coefs = [2 * j * abs(v) for j, v in enumerate(second)][1:]
            # the multiplier of the standard strategy sets the scale
            scale = -0.25 * float(self.fun.deriv(c_top / SQRT2))
            self.multipliers = [m * scale for m in multipliers]

    def _phi(self, x):
        return phi_unchecked(x) if self.fun is None else self.fun(x)

    def boxes(self, lows, widths):
        f = self.fun
        r0, t0 = lows[0], lows[1]
        ok = t0 <= theta_max(r0) + _DOMAIN_TOL
        h_r, h_t = 0.5 * widths[0], 0.5 * widths[1]
        rc, tc = r0 + h_r, t0 + h_t
        r1, t1 = r0 + widths[0], t0 + widths[1]
        h = [0.5 * w for w in widths[2:]]
        ang = [lo + hh for lo, hh in zip(lows[2:], h)]
        hs = [h_r, h_t] + h
        # |cos theta X + sin theta Y| <= cos theta + sin theta, largest at t1 <= pi/4
        sig = np.cos(t1) + np.sin(t1)
        c, s = np.cos(tc), np.sin(tc)
        cos_lo, cos_hi, sin_lo, sin_hi = np.cos(t1), np.cos(t0), np.sin(t0), np.sin(t1)
        # derivative bounds of Phi_n on |x| <= x_top, every correlator stays inside
        x_top = np.maximum(r1 * sig, 1.0)
        d1 = np.abs(f.deriv(x_top))
        d2 = _even_poly(self.d2_coefs, x_top ** 2)
        d3 = _even_poly(self.d3_coefs, x_top ** 2) * x_top
        zero = np.zeros_like(r0)
        g_s = [zero] * 6
        h_s = [[zero] * 6 for _ in range(6)]
        s_mid = 0.0
        rem_s = 0.0
        terms = []
        ranges = []
        for i, j, sg in _XYE_TERMS:
            a, b = ang[i], ang[j]
            va, vb = 2 + i, 2 + j
            X, Y = np.cos(2 * (a - b)), np.cos(2 * (a + b))
            sx, sy = np.sin(2 * (a - b)), np.sin(2 * (a + b))
            u = c * X + s * Y
            v = -s * X + c * Y
            ua, ub = -2 * c * sx - 2 * s * sy, 2 * c * sx - 2 * s * sy
            uta, utb = 2 * s * sx - 2 * c * sy, -2 * s * sx - 2 * c * sy
            e = sg * rc * u
            grad = {0: sg * u, 1: sg * rc * v, va: sg * rc * ua, vb: sg * rc * ub}
            hess = {(0, 1): sg * v, (0, va): sg * ua, (0, vb): sg * ub,
                    (1, 1): -sg * rc * u, (1, va): sg * rc * uta, (1, vb): sg * rc * utb,
                    (va, va): -4 * sg * rc * u, (vb, vb): -4 * sg * rc * u,
                    (va, vb): sg * rc * (4 * c * X - 4 * s * Y)}
            # k-th directional derivative of u is at most sig * m^k
            m = h_t + 2 * (h[i] + h[j])
            de1 = sig * (h_r + r1 * m)
            de2 = sig * m * (2 * h_r + r1 * m)
            de3 = sig * m * m * (3 * h_r + r1 * m)
            terms.append((e, grad, hess, de1, de2, de3))
            s_mid = s_mid + e
            rem_s = rem_s + de3 / 6
            for k, val in grad.items():
                g_s[k] = g_s[k] + val
            for (k, m2), val in hess.items():
                h_s[k][m2] = h_s[k][m2] + val
                if k != m2:
                    h_s[m2][k] = h_s[m2][k] + val
            # interval of the correlator, clipped since feasible points have |e| <= 1
            xl, xh = _cos2_range(a - b - h[i] - h[j], a - b + h[i] + h[j])
            yl, yh = _cos2_range(a + b - h[i] - h[j], a + b + h[i] + h[j])
            ul = np.minimum(cos_lo * xl, cos_hi * xl) + np.minimum(sin_lo * yl, sin_hi * yl)
            uh = np.maximum(cos_lo * xh, cos_hi * xh) + np.maximum(sin_lo * yh, sin_hi * yh)
            el = np.clip(np.minimum(r0 * ul, r1 * ul), -1.0, 1.0)
            eh = np.clip(np.maximum(r0 * uh, r1 * uh), -1.0, 1.0)
            ranges.append((el, eh) if sg > 0 else (-eh, -el))
        s_top = np.minimum(s_mid + _quad_max(g_s, h_s, hs) + rem_s, sum(eh for _, eh in ranges))
        ok &= s_top >= self.target
        # expansion of the entropy part without multiplier
        g_f = [zero] * 6
        h_f = [[zero] * 6 for _ in range(6)]
        f_mid = 0.0
        rem_f = 0.0
        for e, grad, hess, de1, de2, de3 in terms:
            f1 = 0.25 * f.deriv(e)
            f2 = -0.25 * _even_poly(self.d2_coefs, e * e)
            f_mid = f_mid + 0.25 * f(e)
            for k, val in grad.items():
                g_f[k] = g_f[k] + f1 * val
                for m2, val2 in grad.items():
                    h_f[k][m2] = h_f[k][m2] + f2 * val * val2
            for (k, m2), val in hess.items():
                h_f[k][m2] = h_f[k][m2] + f1 * val
                if k != m2:
                    h_f[m2][k] = h_f[m2][k] + f1 * val
            rem_f = rem_f + 0.25 * (d3 * de1 ** 3 + 3 * d2 * de1 * de2 + d1 * de3) / 6
        # K is convex in R and non-decreasing in theta: tangent along R at the lower corner
        pa, pb = np.cos(t0) + np.sin(t0), np.cos(t0) - np.sin(t0)
        smooth = r0 * pa < 1.0 - 1e-9
        k_slope = np.where(smooth, -(pa * _dphi(np.where(smooth, r0 * pa, 0.0))
                                     + pb * _dphi(np.where(smooth, r0 * pb, 0.0))), 0.0)
        k_low = K(r0, t0)
        best = np.full(np.shape(r0), -np.inf)
        for mu in self.multipliers:
            g = [mu * g_s[k] - g_f[k] for k in range(6)]
            g[0] = g[0] - k_slope
            H = [[mu * h_s[k][m2] - h_f[k][m2] for m2 in range(6)] for k in range(6)]
            taylor = (f_mid - mu * s_mid - _quad_max(g, H, hs) - rem_f - mu * rem_s
                      + mu * self.target + k_low + k_slope * h_r)
            # each Lagrangian term is concave in its correlator: minimum at an end
            split = mu * self.target + k_low
            for el, eh in ranges:
                split = split + np.minimum(0.25 * f(el) - mu * el, 0.25 * f(eh) - mu * eh)
            best = np.maximum(best, np.maximum(taylor, split))
        return np.where(ok, best, np.inf)

    def points(self, pts):
        r, t = pts[0], pts[1]
        es = [sg * r * (np.cos(t) * np.cos(2 * (pts[2 + i] - pts[2 + j]))
                        + np.sin(t) * np.cos(2 * (pts[2 + i] + pts[2 + j])))
              for i, j, sg in _XYE_TERMS]
        val = 0.25 * sum(self._phi(e) for e in es) + K(r, t)
        feasible = (sum(es) >= self.target) & (t <= theta_max(r) + _DOMAIN_TOL)
        return np.where(feasible, val, np.inf)


def _no_points(pts):
    return np.full(np.shape(pts[0]), np.inf)


XYE_RT_GRID = GridSpec((16, 16))
XYE_ANGLE_GRID = GridSpec((16, 64, 64, 64))


def two_sided_xye_lb(omega, rt_grid=XYE_RT_GRID, angle_grid=XYE_ANGLE_GRID, n_poly=4,
                     slack=True, max_cells=4e9):
    """Certified lower bound on min H(AB|XYE) at score omega, uniform inputs.

    rt_grid splits (R, theta); angle_grid splits alpha0 over [0, pi/4] and the
    other angles over [0, pi]. slack=False instead returns the smallest
    objective over the grid nodes with the exact constraint, a plain scan that
    is not certified; n_poly=None then uses the exact binary entropy.
    """
    t0 = time.perf_counter()
    omega = _check_omega(omega)
    if n_poly is None and slack:
        raise DomainError("certified bounds need a polynomial minorant (n_poly >= 2)")
    if n_poly is not None and n_poly < 2:
        raise DomainError("n_poly must be at least 2")
    if rt_grid.ndim != 2 or angle_grid.ndim != 4:
        raise DomainError("rt_grid needs 2 axes and angle_grid 4")
    res = tuple(rt_grid.resolution) + tuple(angle_grid.resolution)
    if float(np.prod(res, dtype=float)) > max_cells:
        raise BudgetError(f"grid {res} exceeds the cap of {max_cells:g} cells")
    eng = _TwoSidedXYE(omega, n_poly)
    axes = rt_grid.axes(eng.bounds[:2]) + angle_grid.axes(eng.bounds[2:])
    fallback = rt_grid.fallback
    if slack:
        # the standard strategy is feasible, and Phi_n <= Phi, so g1 is an objective value
        val = _nested_min(eng.boxes, _no_points, axes, fallback, incumbent=g1(omega))
    else:
        val = _node_scan(eng.points, axes)
    value = float(min(max(val, 0.0), fallback))
    return CertifiedPoint(omega, value, "two_sided_xye", res, time.perf_counter() - t0)


def _node_scan(point_fn, axes):
    """Minimum of point_fn over all grid nodes, in chunks along the last axes."""
    head = np.meshgrid(*axes[:2], indexing="ij")
    tail = np.meshgrid(*axes[2:], indexing="ij")
    tail = [t.ravel() for t in tail]
    best = np.inf
    for r, t in zip(head[0].ravel(), head[1].ravel()):
        best = min(best, float(np.min(point_fn([np.full_like(tail[0], r), np.full_like(tail[0], t)] + tail))))
    return best


# post-processing of certified points

@dataclass(frozen=True)
class Staircase:
    omegas: tuple
    values: tuple

    def __call__(self, omega):
        i = int(np.searchsorted(np.asarray(self.omegas), omega, side="right")) - 1
        return 0.0 if i < 0 else float(self.values[i])


def _pairs(points):
    out = []
    for p in points:
        if isinstance(p, CertifiedPoint):
            out.append((p.omega, p.value))
        else:
            out.append((float(p[0]), float(p[1])))
    return out


def staircase(points):
    """Step function using that the minimal entropy is non-decreasing in the score."""
    pairs = _pairs(points)
    if not pairs:
        raise DomainError("staircase needs at least one point")
    if any(b[0] <= a[0] for a, b in zip(pairs, pairs[1:])):
        raise DomainError("points must be sorted by score")
    # a later point can never certify less than an earlier one
    vals = np.maximum.accumulate([v for _, v in pairs])
    return Staircase(tuple(w for w, _ in pairs), tuple(float(v) for v in vals))


def shifted_convex_lb(points, kind="certified"):
    """Convex lower bound from points shifted one place to the right."""
    pairs = _pairs(points)
    if not pairs or abs(pairs[0][0] - 0.75) > 1e-12 or abs(pairs[0][1]) > 1e-12:
        raise DomainError("first point must be (3/4, 0)")
    if any(b[0] <= a[0] for a, b in zip(pairs, pairs[1:])):
        raise DomainError("points must be sorted by score")
    shifted = [(pairs[0][0], 0.0)]
    shifted += [(pairs[i + 1][0], pairs[i][1]) for i in range(len(pairs) - 1)]
    hull = lower_hull(shifted)
    return BoundCurve(kind, "lower", tuple(hull), "shifted lower hull")

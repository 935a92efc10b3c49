"""Heuristic upper bounds on minimal entropies at fixed score and tangent
convexification of the resulting curves."""

from dataclasses import dataclass
import math

import numpy as np
from scipy.interpolate import CubicSpline

from .errors import DomainError, InfeasibleError, NoRootError
from .strategy import (CHSH, DELTA_FREE_KINDS, OMEGA_MAX, UNIFORM, EntropyKind,
                       QubitStrategy, corr_terms, delta_range, delta_star,
                       entropy, entropy_arr, score)

DIRECTIONS = ("upper", "lower", "analytic", "conjectured")


@dataclass(frozen=True)
class OptimizerConfig:
    restarts: int = 512
    max_iters: int = 400
    reflect: float = 1.0
    expand: float = 2.0
    contract: float = 0.5
    shrink: float = 0.5
    penalty: float = 10.0
    init_step: float = 0.3
    seed: int = 0


@dataclass(frozen=True)
class BoundCurve:
    kind: str
    direction: str
    samples: tuple
    provenance: str = ""

    def __post_init__(self):
        if self.direction not in DIRECTIONS:
            raise DomainError(f"unknown direction {self.direction}")
        oms = [w for w, _ in self.samples]
        if any(b <= a for a, b in zip(oms, oms[1:])):
            raise DomainError("curve scores must be strictly increasing")
        for w, v in self.samples:
            if not (0.75 - 1e-9 <= w <= OMEGA_MAX + 1e-9):
                raise DomainError(f"score {w} outside the CHSH range")
            if not (-1e-9 <= v <= 2.0 + 1e-9):
                raise DomainError(f"value {v} outside [0, 2]")

    @property
    def omegas(self):
        return np.array([w for w, _ in self.samples])

    @property
    def values(self):
        return np.array([v for _, v in self.samples])

    def __call__(self, omega):
        return float(np.interp(omega, self.omegas, self.values))


class _Problem:
    """Maps unconstrained parameter vectors to score-restored strategies."""

    def __init__(self, kind, omega, pxy, coeffs):
        self.kind = EntropyKind(kind)
        self.omega = omega
        self.pxy = np.asarray(pxy, dtype=float)
        self.coeffs = coeffs
        self.free_delta = self.kind in DELTA_FREE_KINDS
        self.dim = 6 if self.free_delta else 5

    def decode(self, X):
        th = (math.pi / 4) * np.sin(X[:, 0]) ** 2
        ang = X[:, -4:]
        a0, a1, b0, b1 = (ang[:, i] for i in range(4))
        cs = corr_terms(th, a0, a1, b0, b1)
        base = 0.5 * sum(self.coeffs)
        slope = 0.5 * sum(g * c for g, c in zip(self.coeffs, cs))
        # score is affine in R at fixed angles: solve it exactly
        with np.errstate(divide="ignore", invalid="ignore"):
            R = (self.omega - base) / slope
        ok = slope > 1e-12
        R = np.where(ok, R, 0.0)
        viol = np.where(ok, np.maximum(R * (np.cos(th) + np.sin(th)) - 1.0, -R), 10.0 - slope)
        R = np.clip(R, 0.0, 1.0)
        if self.free_delta:
            lo, hi = delta_range(R, th)
            hi = np.maximum(hi, lo)
            delta = lo + (hi - lo) * np.sin(X[:, 1]) ** 2
        else:
            delta = delta_star(R, th)
        return R, th, delta, a0, a1, b0, b1, viol

    def __call__(self, X, penalty):
        R, th, delta, a0, a1, b0, b1, viol = self.decode(X)
        feas = viol <= 0.0
        val = entropy_arr(self.kind, R, th, delta, a0, a1, b0, b1, pxy=self.pxy, fast=True)
        return np.where(feas, val, 2.0 + penalty * np.maximum(viol, 0.0))

    def strategy(self, x):
        R, th, delta, a0, a1, b0, b1, viol = self.decode(x[None, :])
        if viol[0] > 0.0:
            raise InfeasibleError("restored point violates the parameter domain")
        return QubitStrategy(float(R[0]), float(th[0]), float(delta[0]),
                             float(a0[0]), float(a1[0]), float(b0[0]), float(b1[0]))


def _initial_points(problem, cfg, count, tries=200):
    """One start per restart, drawn from its own seed-indexed stream."""
    cand = np.empty((count, tries, problem.dim))
    for i in range(count):
        rng = np.random.default_rng([cfg.seed, i])
        cand[i] = rng.uniform(0.0, math.pi, (tries, problem.dim))
        cand[i, :, 0] *= 0.5
    viol = problem.decode(cand.reshape(-1, problem.dim))[-1].reshape(count, tries)
    first = np.argmax(viol <= 0.0, axis=1)
    return cand[np.arange(count), first]


def _nelder_mead(fun, x0, cfg):
    """Independent Nelder-Mead runs, one per row of x0, advanced in lockstep."""
    m, d = x0.shape
    simplex = np.repeat(x0[:, None, :], d + 1, axis=1)
    for j in range(d):
        simplex[:, j + 1, j] += cfg.init_step
    fvals = fun(simplex.reshape(-1, d)).reshape(m, d + 1)
    rows = np.arange(m)
    for _ in range(cfg.max_iters):
        order = np.argsort(fvals, axis=1, kind="stable")
        simplex = simplex[rows[:, None], order]
        fvals = fvals[rows[:, None], order]
        best, worst = fvals[:, 0], fvals[:, -1]
        if np.all(worst - best <= 1e-15 * (1.0 + np.abs(best))):
            break
        centroid = simplex[:, 0, :].copy()
        for j in range(1, d):
            centroid = centroid + simplex[:, j, :]
        centroid = centroid / d
        xw = simplex[:, -1, :]
        xr = centroid + cfg.reflect * (centroid - xw)
        fr = fun(xr)
        new_x = xw.copy()
        new_f = fvals[:, -1].copy()

        take_r = (fr >= best) & (fr < fvals[:, -2])
        new_x[take_r] = xr[take_r]
        new_f[take_r] = fr[take_r]

        exp = fr < best
        if exp.any():
            xe = centroid[exp] + cfg.expand * (xr[exp] - centroid[exp])
            fe = fun(xe)
            use_e = fe < fr[exp]
            idx = np.flatnonzero(exp)
            new_x[idx] = np.where(use_e[:, None], xe, xr[exp])
            new_f[idx] = np.where(use_e, fe, fr[exp])

        con = fr >= fvals[:, -2]
        shrink = np.zeros(m, dtype=bool)
        if con.any():
            idx = np.flatnonzero(con)
            outside = fr[idx] < worst[idx]
            target = np.where(outside[:, None], xr[idx], xw[idx])
            xc = centroid[idx] + cfg.contract * (target - centroid[idx])
            fc = fun(xc)
            ok = np.where(outside, fc <= fr[idx], fc < worst[idx])
            new_x[idx[ok]] = xc[ok]
            new_f[idx[ok]] = fc[ok]
            shrink[idx[~ok]] = True

        simplex[:, -1, :] = new_x
        fvals[:, -1] = new_f
        if shrink.any():
            idx = np.flatnonzero(shrink)
            base = simplex[idx, :1, :]
            pts = base + cfg.shrink * (simplex[idx, 1:, :] - base)
            simplex[idx, 1:, :] = pts
            fvals[idx, 1:] = fun(pts.reshape(-1, d)).reshape(len(idx), d)
    order = np.argsort(fvals, axis=1, kind="stable")
    simplex = simplex[rows[:, None], order]
    fvals = fvals[rows[:, None], order]
    return simplex[:, 0, :], fvals[:, 0]


def restart_values(kind, omega, p=UNIFORM, cfg=OptimizerConfig(), coeffs=CHSH):
    """Per-restart best values and points, in seed order."""
    if not (0.75 - 1e-12 <= omega <= OMEGA_MAX + 1e-12):
        raise DomainError(f"score {omega} outside [3/4, {OMEGA_MAX}]")
    problem = _Problem(kind, min(omega, OMEGA_MAX), p, coeffs)
    x0 = _initial_points(problem, cfg, cfg.restarts)
    xs, fs = _nelder_mead(lambda X: problem(X, cfg.penalty), x0, cfg)
    return problem, xs, fs


def heuristic_min(kind, omega, p=UNIFORM, cfg=OptimizerConfig(), coeffs=CHSH):
    """Best entropy found over restarts; an upper bound on the true minimum."""
    problem, xs, fs = restart_values(kind, omega, p, cfg, coeffs)
    feasible = fs <= 2.0
    if not feasible.any():
        raise InfeasibleError(f"no restart reached score {omega}")
    i = int(np.argmin(np.where(feasible, fs, np.inf)))
    strat = problem.strategy(xs[i])
    if abs(score(strat, coeffs) - omega) > 1e-8:
        raise InfeasibleError("score restoration failed")
    return entropy(strat, kind, p), strat


def curve_upper(kind, omega_grid, p=UNIFORM, cfg=OptimizerConfig()):
    """Pointwise heuristic minima; failed points are skipped and listed."""
    samples = []
    skipped = []
    for w in omega_grid:
        try:
            val, _ = heuristic_min(kind, w, p, cfg)
        except InfeasibleError:
            skipped.append(w)
            continue
        samples.append((float(w), max(val, 0.0)))
    note = f"nelder-mead restarts={cfg.restarts} iters={cfg.max_iters} seed={cfg.seed}"
    if skipped:
        note += f" skipped={skipped}"
    return BoundCurve(EntropyKind(kind).value, "upper", tuple(samples), note)


def _tangent_gap(curve):
    spline = CubicSpline(curve.omegas, curve.values)
    lo, hi = curve.omegas[0], curve.omegas[-1]
    h = 1e-6 * (hi - lo)

    def gap(w):
        a, b = max(w - h, lo), min(w + h, hi)
        slope = (spline(b) - spline(a)) / (b - a)
        return (w - 0.75) * slope - float(spline(w)), slope

    return gap


def tangent_point(curve):
    """Smallest score where the tangent to the curve passes through (3/4, 0)."""
    if len(curve.samples) < 5:
        raise DomainError("tangent search needs at least five samples")
    gap = _tangent_gap(curve)
    ws = curve.omegas
    scale = max(1.0, float(np.max(np.abs(curve.values))))
    fine = np.linspace(ws[0], ws[-1], 20 * (len(ws) - 1) + 1)
    vals = np.array([gap(w)[0] for w in fine])
    tol = 1e-9 * scale
    if abs(vals[0]) <= tol:
        return float(fine[0])
    for i in range(1, len(fine)):
        if abs(vals[i]) <= tol:
            return float(fine[i])
        if np.sign(vals[i]) != np.sign(vals[i - 1]):
            a, b, fa = fine[i - 1], fine[i], vals[i - 1]
            while b - a > 1e-8:
                mid = 0.5 * (a + b)
                fm = gap(mid)[0]
                if np.sign(fm) == np.sign(fa):
                    a, fa = mid, fm
                else:
                    b = mid
            return float(0.5 * (a + b))
    raise NoRootError("tangent condition has constant sign on the sampled range")


def convexify_through_origin(curve):
    """Replace the curve below its tangent point by the chord from (3/4, 0)."""
    try:
        w_star = tangent_point(curve)
    except NoRootError:
        return curve
    gap = _tangent_gap(curve)
    slope = gap(w_star)[1]
    g_star = slope * (w_star - 0.75)
    out = []
    for w, v in curve.samples:
        if w < w_star:
            out.append((w, min(v, slope * (w - 0.75))))
        else:
            out.append((w, v))
    if all(abs(w - w_star) > 1e-12 for w, _ in out):
        out.append((w_star, g_star))
        out.sort()
    return BoundCurve(curve.kind, curve.direction, tuple(out),
                      curve.provenance + f"; tangent at {w_star:.8f}")

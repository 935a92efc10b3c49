"""Convex lower envelopes of sampled functions."""

from dataclasses import dataclass

import numpy as np

from .errors import DomainError


@dataclass(frozen=True)
class SampledFn1D:
    xs: tuple
    fs: tuple

    def __post_init__(self):
        if len(self.xs) != len(self.fs) or not self.xs:
            raise DomainError("need matching, non-empty sample lists")
        if any(b <= a for a, b in zip(self.xs, self.xs[1:])):
            raise DomainError("sample abscissae must be strictly increasing")
        if not np.all(np.isfinite(self.fs)):
            raise DomainError("sample values must be finite")

    @classmethod
    def of(cls, xs, fs):
        return cls(tuple(float(x) for x in xs), tuple(float(f) for f in fs))


@dataclass(frozen=True)
class SampledFn2D:
    xs: np.ndarray
    ys: np.ndarray
    values: np.ndarray

    def __post_init__(self):
        if self.values.shape != (len(self.xs), len(self.ys)):
            raise DomainError("value grid shape must be (len(xs), len(ys))")
        for ax in (self.xs, self.ys):
            if np.any(np.diff(ax) <= 0):
                raise DomainError("grid axes must be strictly increasing")


def _cross(o, a, b):
    return (a[0] - o[0]) * (b[1] - o[1]) - (a[1] - o[1]) * (b[0] - o[0])


def lower_hull(points):
    """Vertices of the lower convex hull, left to right, collinear points dropped."""
    pts = sorted((float(x), float(y)) for x, y in points)
    if not pts:
        raise DomainError("lower_hull needs at least one point")
    hull = []
    for p in pts:
        if hull and hull[-1][0] == p[0]:
            continue  # same x: the earlier entry has the smaller y
        while len(hull) >= 2 and _cross(hull[-2], hull[-1], p) <= 0:
            hull.pop()
        hull.append(p)
    return hull


def hull_eval(hull, x):
    """Piecewise-linear interpolation of hull vertices."""
    hx = np.array([p[0] for p in hull])
    hy = np.array([p[1] for p in hull])
    return np.interp(x, hx, hy)


def lf_conjugate_1d(f, slopes):
    """Discrete conjugate max_i (k x_i - f_i) at each sorted slope k."""
    hull = lower_hull(zip(f.xs, f.fs))
    ks = np.asarray(slopes, dtype=float)
    if np.any(np.diff(ks) < 0):
        raise DomainError("slopes must be sorted")
    edges = [(b[1] - a[1]) / (b[0] - a[0]) for a, b in zip(hull, hull[1:])]
    out = np.empty(len(ks))
    j = 0
    # the maximizing hull vertex moves right as the slope increases
    for i, k in enumerate(ks):
        while j < len(edges) and edges[j] < k:
            j += 1
        out[i] = k * hull[j][0] - hull[j][1]
    return SampledFn1D.of(ks, out)


def _hull_slopes(f):
    hull = lower_hull(zip(f.xs, f.fs))
    if len(hull) == 1:
        return np.array([0.0])
    # rounding can repeat a slope across nearly collinear vertices
    return np.unique([(b[1] - a[1]) / (b[0] - a[0]) for a, b in zip(hull, hull[1:])])


def convenv_1d(f):
    """Double conjugate evaluated at the sample abscissae."""
    slopes = _hull_slopes(f)
    conj = lf_conjugate_1d(f, slopes)
    ks = np.array(conj.xs)
    cs = np.array(conj.fs)
    xs = np.array(f.xs)
    env = np.max(ks[None, :] * xs[:, None] - cs[None, :], axis=1)
    return SampledFn1D.of(xs, np.minimum(env, f.fs))


def _axis_slopes(values, axis_pts, axis, count):
    q = np.diff(values, axis=axis) / np.expand_dims(np.diff(axis_pts), 1 - axis)
    lo, hi = float(np.min(q)), float(np.max(q))
    if hi - lo < 1e-15:
        return np.array([lo])
    return np.linspace(lo, hi, count)


def convenv_2d(f, slope_factor=8):
    """Discrete double conjugate with the supremum split across the two axes."""
    xs = np.asarray(f.xs, dtype=float)
    ys = np.asarray(f.ys, dtype=float)
    v = np.asarray(f.values, dtype=float)
    if len(xs) == 1 or len(ys) == 1:
        flat = convenv_1d(SampledFn1D.of(ys if len(xs) == 1 else xs, v.ravel()))
        return SampledFn2D(xs, ys, np.array(flat.fs).reshape(v.shape))
    k1 = _axis_slopes(v, xs, 0, slope_factor * len(xs))
    k2 = _axis_slopes(v, ys, 1, slope_factor * len(ys))
    # conjugate: inner sup over y per (x, k2), then over x per (k1, k2)
    inner = np.max(k2[None, None, :] * ys[None, :, None] - v[:, :, None], axis=1)
    conj = np.max(k1[:, None, None] * xs[None, :, None] + inner[None, :, :], axis=1)
    # biconjugate at the samples, same split
    inner2 = np.max(k2[None, None, :] * ys[None, :, None] - conj[:, None, :], axis=2)
    env = np.max(k1[None, :, None] * xs[:, None, None] + inner2[None, :, :], axis=1)
    return SampledFn2D(xs, ys, np.minimum(env, v))

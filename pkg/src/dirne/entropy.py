"""Binary and Shannon entropies, small symmetric eigensolves, Helstrom
success probability and polynomial minorants of the binary entropy."""

from dataclasses import dataclass
from functools import lru_cache
import math

import numpy as np
from scipy import integrate
from scipy.special import xlogy

from .errors import DomainError

LN2 = math.log(2.0)
_TOL = 1e-12


def _scalar_or_array(x):
    return float(x) if np.ndim(x) == 0 else x


def hbin(p):
    """Binary entropy in bits without domain checks; arrays allowed."""
    p = np.clip(np.asarray(p, dtype=float), 0.0, 1.0)
    return -(xlogy(p, p) + xlogy(1.0 - p, 1.0 - p)) / LN2


def binary_entropy(p):
    """H_bin(p) in bits with 0 log 0 = 0."""
    arr = np.asarray(p, dtype=float)
    if np.any(arr < -_TOL) or np.any(arr > 1.0 + _TOL) or np.any(np.isnan(arr)):
        raise DomainError(f"binary entropy argument outside [0, 1]: {p}")
    return _scalar_or_array(hbin(arr))


def phi(x):
    """H_bin(1/2 + x/2), an even function of x in [-1, 1]."""
    arr = np.asarray(x, dtype=float)
    if np.any(np.abs(arr) > 1.0 + _TOL) or np.any(np.isnan(arr)):
        raise DomainError(f"phi argument outside [-1, 1]: {x}")
    return _scalar_or_array(hbin(0.5 + 0.5 * arr))


def phi_unchecked(x):
    """phi on arrays, clamping |x| to 1."""
    return hbin(0.5 + 0.5 * np.clip(x, -1.0, 1.0))


def shannon(p):
    """Shannon entropy in bits of a probability vector."""
    arr = np.asarray(p, dtype=float)
    if arr.ndim != 1 or arr.size == 0:
        raise DomainError("shannon expects a non-empty 1-d vector")
    if np.any(arr < -_TOL) or abs(arr.sum() - 1.0) > 1e-9:
        raise DomainError(f"not a probability vector: {p}")
    arr = np.clip(arr, 0.0, None)
    return float(-xlogy(arr, arr).sum() / LN2)


def shannon_rows(p):
    """Entropy in bits along the last axis; negative entries clamp to 0."""
    arr = np.clip(np.asarray(p, dtype=float), 0.0, None)
    return -xlogy(arr, arr).sum(axis=-1) / LN2


# Jacobi sweeps visit the upper triangle in row-major order.
_PAIRS4 = [(p, q) for p in range(4) for q in range(p + 1, 4)]


def jacobi_eigvals(m, tol=1e-14, max_sweeps=60):
    """Eigenvalues of a stack of real symmetric 4x4 matrices.

    Cyclic Jacobi with a fixed row-major pivot order. Input shape (..., 4, 4);
    output shape (..., 4), unsorted.
    """
    a = np.array(m, dtype=float, copy=True)
    shape = a.shape[:-2]
    a = a.reshape(-1, 4, 4)
    for _ in range(max_sweeps):
        off = np.abs(a[:, [0, 0, 0, 1, 1, 2], [1, 2, 3, 2, 3, 3]]).max(initial=0.0)
        if off < tol:
            break
        for p, q in _PAIRS4:
            apq = a[:, p, q]
            active = np.abs(apq) >= 1e-300
            if not active.any():
                continue
            safe = np.where(active, apq, 1.0)
            tau = (a[:, q, q] - a[:, p, p]) / (2.0 * safe)
            with np.errstate(over="ignore"):
                # tau * tau may overflow; the rotation is then the identity
                t = np.where(tau >= 0, 1.0, -1.0) / (np.abs(tau) + np.sqrt(1.0 + tau * tau))
            t = np.where(active, t, 0.0)
            c = 1.0 / np.sqrt(1.0 + t * t)
            s = t * c
            cc = c[:, None]
            ss = s[:, None]
            colp = a[:, :, p].copy()
            colq = a[:, :, q].copy()
            a[:, :, p] = cc * colp - ss * colq
            a[:, :, q] = ss * colp + cc * colq
            rowp = a[:, p, :].copy()
            rowq = a[:, q, :].copy()
            a[:, p, :] = cc * rowp - ss * rowq
            a[:, q, :] = ss * rowp + cc * rowq
    return np.diagonal(a, axis1=1, axis2=2).reshape(shape + (4,)).copy()


def eig_sym(m):
    """Eigenvalues of a real symmetric 2x2 or 4x4 matrix, descending."""
    a = np.asarray(m, dtype=float)
    if a.shape not in ((2, 2), (4, 4)):
        raise DomainError(f"eig_sym supports 2x2 and 4x4, got {a.shape}")
    if not np.allclose(a, a.T, atol=1e-12, rtol=0.0):
        raise DomainError("matrix is not symmetric")
    if a.shape == (2, 2):
        mean = 0.5 * (a[0, 0] + a[1, 1])
        rad = math.hypot(0.5 * (a[0, 0] - a[1, 1]), a[0, 1])
        return (mean + rad, mean - rad)
    vals = jacobi_eigvals(a)
    return tuple(sorted(vals.tolist(), reverse=True))


def helstrom(rho1, rho2):
    """Optimal probability of distinguishing two equiprobable real states."""
    for r in (rho1, rho2):
        if np.any(np.imag(np.asarray(r)) != 0):
            raise DomainError("only real symmetric density matrices are supported")
    r1 = np.real(np.asarray(rho1)).astype(float)
    r2 = np.real(np.asarray(rho2)).astype(float)
    for r in (r1, r2):
        if abs(np.trace(r) - 1.0) > 1e-9:
            raise DomainError("state must have unit trace")
        if min(eig_sym(r)) < -1e-10:
            raise DomainError("state must be positive semidefinite")
    trace_norm = sum(abs(v) for v in eig_sym(r1 - r2))
    return 0.5 + 0.25 * trace_norm


@lru_cache(maxsize=None)
def i_coeff(k):
    """Integral coefficient of the k-th term in the minorant expansion."""
    if k < 0 or int(k) != k:
        raise DomainError("k must be a non-negative integer")
    if k == 0:
        return 1.0

    def f(z):
        return ((1.0 - z) / z) ** (2 * k) / (z * LN2)

    val, _ = integrate.quad(f, 0.5, 1.0, epsabs=1e-14, epsrel=1e-13, limit=200)
    return val


@dataclass(frozen=True)
class PolyMinorant:
    """Polynomial lower bound on phi with an explicit tail bound."""

    order_n: int
    coeffs: tuple
    tail_bound: float

    def __call__(self, x):
        x2 = np.asarray(x, dtype=float) ** 2
        acc = np.zeros_like(x2)
        for c in reversed(self.coeffs):
            acc = acc * x2 + c
        return _scalar_or_array(acc * (1.0 - x2))

    def deriv(self, x):
        x = np.asarray(x, dtype=float)
        x2 = x * x
        total = np.zeros_like(x2)
        for k, c in enumerate(self.coeffs):
            # d/dx x^{2k}(1 - x^2) = 2k x^{2k-1} - (2k+2) x^{2k+1}
            lead = 2 * k * x ** (2 * k - 1) if k > 0 else 0.0
            total = total + c * (lead - (2 * k + 2) * x ** (2 * k + 1))
        return _scalar_or_array(total)

    @property
    def slope_at_one(self):
        """|d/dx Phi_n| at x = 1, which bounds |d/dx Phi_n| on [-1, 1]."""
        return 2.0 * sum(self.coeffs)

    def tail(self, x):
        x = np.asarray(x, dtype=float)
        return _scalar_or_array(self.tail_bound * x ** (2 * (self.order_n + 1)))


@lru_cache(maxsize=None)
def phi_minorant(n):
    """Phi_n(x) = sum_{k=0}^{n} I_k x^{2k} (1 - x^2)."""
    if n < 1 or int(n) != n:
        raise DomainError("minorant order must be a positive integer")
    return PolyMinorant(int(n), tuple(i_coeff(k) for k in range(n + 1)), i_coeff(n + 1))

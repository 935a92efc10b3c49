"""Reduced two-qubit strategies: Bell-diagonal states with projective
measurements in the real plane, their CHSH-type scores and entropies."""

from dataclasses import dataclass
import enum
import math

import numpy as np

from .entropy import LN2, hbin, jacobi_eigvals, phi_unchecked, shannon_rows
from .errors import DomainError, InfeasibleError

OMEGA_MAX = 0.5 + 0.5 / math.sqrt(2.0)
S_MIN = 1.0 - OMEGA_MAX
CHSH = (0.25, 0.25, 0.25, 0.25)
UNIFORM = ((0.25, 0.25), (0.25, 0.25))


class EntropyKind(str, enum.Enum):
    AB_00E = "AB_00E"
    AB_XYE = "AB_XYE"
    AB_E = "AB_E"
    A_00E = "A_00E"
    A_XYE = "A_XYE"
    A_E = "A_E"


DELTA_FREE_KINDS = (EntropyKind.AB_E, EntropyKind.A_E)


@dataclass(frozen=True)
class QubitStrategy:
    R: float
    theta: float
    delta: float
    alpha0: float
    alpha1: float
    beta0: float
    beta1: float

    def angles(self):
        return (self.alpha0, self.alpha1, self.beta0, self.beta1)


def theta_max(R):
    """Largest admissible theta for Bell-diagonal radius R."""
    R = np.asarray(R, dtype=float)
    with np.errstate(invalid="ignore", divide="ignore"):
        big = math.pi / 4 - np.arccos(np.clip(1.0 / (np.maximum(R, 1e-300) * math.sqrt(2.0)), -1.0, 1.0))
    out = np.where(R <= 1.0 / math.sqrt(2.0), math.pi / 4, big)
    return float(out) if out.ndim == 0 else out


def in_domain(R, theta, tol=1e-12):
    return 0.0 <= R <= 1.0 + tol and -tol <= theta <= theta_max(min(R, 1.0)) + tol


def lambdas(R, theta, delta):
    """Bell-diagonal weights for radius R, angle theta and offset delta."""
    c = 0.5 * R * np.cos(theta)
    s = 0.5 * R * np.sin(theta)
    lam = np.stack(np.broadcast_arrays(0.25 + c + delta, 0.25 + s - delta,
                                       0.25 - s - delta, 0.25 - c + delta), axis=-1)
    return lam


def checked_lambdas(R, theta, delta):
    lam = lambdas(R, theta, delta)
    if np.any(lam < -1e-12) or np.any(lam > 1.0 + 1e-12):
        raise InfeasibleError(f"weights outside [0, 1]: {lam}")
    return tuple(float(v) for v in lam)


def delta_star(R, theta):
    """Offset maximizing the entropy of the Bell-diagonal weights."""
    return R * R * np.cos(2.0 * theta) / 4.0


def delta_range(R, theta):
    """Interval of offsets keeping all weights non-negative."""
    return 0.5 * R * np.cos(theta) - 0.25, 0.25 - 0.5 * R * np.sin(theta)


def corr_terms(theta, a0, a1, b0, b1):
    """Normalized correlators c_xy with eps_xy = (1 + R c_xy) / 4, sign of 11 flipped."""
    ct, st = np.cos(theta), np.sin(theta)
    a = (a0, a1)
    b = (b0, b1)
    out = []
    for x in range(2):
        for y in range(2):
            c = ct * np.cos(2 * (a[x] - b[y])) + st * np.cos(2 * (a[x] + b[y]))
            out.append(-c if (x, y) == (1, 1) else c)
    return out


def epsilons_arr(R, theta, a0, a1, b0, b1):
    return [0.25 * (1.0 + R * c) for c in corr_terms(theta, a0, a1, b0, b1)]


def _reduced(s):
    return [v % math.pi for v in s.angles()]


def epsilons(s):
    """(eps00, eps01, eps10, eps11) of the probability table."""
    return tuple(float(e) for e in epsilons_arr(s.R, s.theta, *_reduced(s)))


def score_arr(R, theta, a0, a1, b0, b1, coeffs=CHSH):
    eps = epsilons_arr(R, theta, a0, a1, b0, b1)
    return 2.0 * sum(g * e for g, e in zip(coeffs, eps))


def score(s, coeffs=CHSH):
    """Weighted winning probability 2 sum gamma_ij eps_ij."""
    return float(score_arr(s.R, s.theta, *_reduced(s), coeffs=coeffs))


def _check_pxy(p):
    arr = np.asarray(p, dtype=float)
    if arr.shape != (2, 2) or np.any(arr < -1e-12) or abs(arr.sum() - 1.0) > 1e-12:
        raise DomainError(f"invalid input distribution: {p}")
    return arr


def _mixture_spectra(lam, a0, a1, b0, b1, pxy):
    """Unnormalized Eve-side states per outcome pair, mixed over inputs.

    Returns an array of shape (..., 2, 2, 4, 4) indexed by (a, b).
    """
    sq = np.sqrt(np.clip(lam, 0.0, None)) / math.sqrt(2.0)
    alphas = (a0, a1)
    betas = (b0, b1)
    mats = None
    for x in range(2):
        for y in range(2):
            w = pxy[x][y]
            if w == 0:
                continue
            rows = []
            for a in range(2):
                row = []
                for b in range(2):
                    al = alphas[x] + a * math.pi / 2
                    be = betas[y] + b * math.pi / 2
                    vec = np.stack([np.cos(be - al), np.cos(be + al),
                                    np.sin(be + al), np.sin(be - al)], axis=-1) * sq
                    row.append(w * vec[..., :, None] * vec[..., None, :])
                rows.append(np.stack(row, axis=-3))
            term = np.stack(rows, axis=-4)
            mats = term if mats is None else mats + term
    return mats


def _von_neumann_unnormalized(mats, fast):
    vals = np.linalg.eigvalsh(mats) if fast else jacobi_eigvals(mats)
    return shannon_rows(vals)


def entropy_arr(kind, R, theta, delta, a0, a1, b0, b1, pxy=UNIFORM, fast=False):
    """Vectorized entropy evaluation; no feasibility checks.

    fast selects LAPACK eigenvalues for the mixed-state kinds instead of
    the fixed-order Jacobi solver.
    """
    kind = EntropyKind(kind)
    lam = lambdas(R, theta, delta)
    h_e = shannon_rows(lam)
    if kind is EntropyKind.AB_00E:
        eps = epsilons_arr(R, theta, a0, a1, b0, b1)
        return 1.0 + hbin(2.0 * eps[0]) - h_e
    if kind is EntropyKind.AB_XYE:
        eps = epsilons_arr(R, theta, a0, a1, b0, b1)
        flat = (pxy[0][0], pxy[0][1], pxy[1][0], pxy[1][1])
        return 1.0 + sum(w * hbin(2.0 * e) for w, e in zip(flat, eps)) - h_e
    if kind is EntropyKind.A_XYE:
        px = (pxy[0][0] + pxy[0][1], pxy[1][0] + pxy[1][1])
        total = 0.0
        for w, al in zip(px, (a0, a1)):
            rad = np.sqrt(np.clip(1.0 + np.sin(2 * theta) * np.cos(4 * al), 0.0, None))
            total = total + w * phi_unchecked(R * rad)
        return 1.0 + total - h_e
    if kind is EntropyKind.A_00E:
        d03 = lam[..., 0] - lam[..., 3]
        d12 = lam[..., 1] - lam[..., 2]
        arg = 2 * d03 * d12 * np.cos(4 * a0) + d03 ** 2 + d12 ** 2
        return 1.0 + phi_unchecked(np.sqrt(np.clip(arg, 0.0, None))) - h_e
    mats = _mixture_spectra(lam, a0, a1, b0, b1, pxy)
    if kind is EntropyKind.AB_E:
        return _von_neumann_unnormalized(mats, fast).sum(axis=(-1, -2)) - h_e
    return _von_neumann_unnormalized(mats.sum(axis=-3), fast).sum(axis=-1) - h_e


def entropy(s, kind, p=None):
    """Conditional entropy in bits of the given kind for strategy s."""
    kind = EntropyKind(kind)
    checked_lambdas(s.R, s.theta, s.delta)
    if kind in (EntropyKind.AB_00E, EntropyKind.A_00E):
        pxy = UNIFORM if p is None else _check_pxy(p)
    else:
        if p is None:
            raise DomainError(f"entropy kind {kind.value} needs an input distribution")
        pxy = _check_pxy(p)
    val = entropy_arr(kind, s.R, s.theta, s.delta, *_reduced(s), pxy=np.asarray(pxy))
    return float(val)


def _check_omega(omega):
    if not (0.75 - 1e-12 <= omega <= OMEGA_MAX + 1e-12):
        raise DomainError(f"score {omega} outside [3/4, {OMEGA_MAX}]")


def f_a00e_analytic(omega):
    """Exact minimal H(A|X=0,Y=0,E) at CHSH score omega."""
    _check_omega(omega)
    rad = max(16.0 * omega * (omega - 1.0) + 3.0, 0.0)
    return 1.0 - float(hbin(0.5 * (1.0 + math.sqrt(min(rad, 1.0)))))


def g1(omega):
    return 1.0 + float(hbin(omega)) - 2.0 * float(hbin(0.5 + (2 * omega - 1) / math.sqrt(2.0)))


def g2(omega):
    return 1.0 - float(hbin(0.5 + (2 * omega - 1) / math.sqrt(2.0)))


def conjectured_curve(kind, omega):
    """Entropy of the standard strategy family for AB_XYE or A_XYE."""
    kind = EntropyKind(kind)
    _check_omega(omega)
    omega = min(max(omega, 0.75), OMEGA_MAX)
    if kind is EntropyKind.AB_XYE:
        return g1(omega)
    if kind is EntropyKind.A_XYE:
        return g2(omega)
    raise DomainError(f"no conjectured curve for {kind.value}")


def optimal_strategy(omega):
    """Standard strategy reaching CHSH score omega."""
    R = min(math.sqrt(2.0) * (2 * omega - 1), 1.0)
    return QubitStrategy(R, 0.0, R * R / 4, 0.0, math.pi / 4, math.pi / 8, -math.pi / 8)


def K(R, theta):
    """1 - H(lambdas) at the entropy-maximizing offset."""
    lam = lambdas(R, theta, delta_star(R, theta))
    out = 1.0 - shannon_rows(lam)
    return float(out) if np.ndim(out) == 0 else out

"""Seeded Monte-Carlo runs of the CHSH expansion protocols and the
semi-device-independent protocol with honest i.i.d. devices.

Round i draws its random numbers from a Philox stream keyed by the master
seed with counter 2i, so every round can be generated independently of the
others and in any order.
"""

from dataclasses import dataclass, field
from functools import lru_cache
import math
import struct

import numpy as np
from scipy.optimize import brentq

from .eat import (EatParams, ProtocolKind, biased_rate, input_randomness,
                  recycled_rate, spot_check_rate)
from .entropy import hbin
from .errors import DomainError, InfeasibleError
from .semidi import SemiDiPoint, semidi_lb
from .strategy import (OMEGA_MAX, QubitStrategy, epsilons, f_a00e_analytic, g1,
                       optimal_strategy)
from .upper import BoundCurve

__all__ = ["HonestDevice", "RunParams", "SemiDiParams", "ProtocolRun", "round_stream",
           "round_uniforms", "outcome_table", "sample_round", "run", "run_semidi",
           "write_transcript", "read_transcript", "analytic_curve", "RECYCLED_SLOPE",
           "SEMIDI", "WORDS"]

# uniforms per round: test flag, x, y, outcome, two detection draws, two spare
WORDS = 8
MAGIC = b"DIRNE1\0"
SEMIDI = "SemiDI"


def _g1_slope(w):
    q = 0.5 + (2 * w - 1) / math.sqrt(2.0)
    return math.log2((1 - w) / w) - 2 * math.sqrt(2.0) * math.log2((1 - q) / q)


def _tangent_slope():
    """Slope of the tangent to g1 that passes through (3/4, 0)."""
    w = brentq(lambda w: (w - 0.75) * _g1_slope(w) - g1(w), 0.76, OMEGA_MAX - 1e-9, xtol=1e-14)
    return g1(w) / (w - 0.75)


# slope of the affine tradeoff for the protocol with recycled inputs
RECYCLED_SLOPE = _tangent_slope()


@dataclass(frozen=True)
class HonestDevice:
    """i.i.d. device: a qubit strategy for the CHSH protocols, or per-input
    success probabilities omega_x and no-click probabilities q_x for the
    semi-device-independent protocol. no_detection maps a missed detection
    of either CHSH device to output 0."""

    strategy: QubitStrategy = None
    omega_x: tuple = None
    q_x: tuple = None
    no_detection: float = 0.0

    def __post_init__(self):
        if (self.strategy is None) == (self.omega_x is None):
            raise DomainError("give either a qubit strategy or semi-DI probabilities")
        if self.omega_x is not None:
            if self.q_x is None or len(self.omega_x) != 2 or len(self.q_x) != 2:
                raise DomainError("semi-DI device needs two omega_x and two q_x")
            if any(not (0.0 <= p <= 1.0) for p in tuple(self.omega_x) + tuple(self.q_x)):
                raise DomainError("semi-DI probabilities must lie in [0, 1]")
        if self.strategy is not None:
            outcome_table(self)
        if not (0.0 <= self.no_detection <= 1.0):
            raise DomainError("no_detection must lie in [0, 1]")

    @classmethod
    def at_score(cls, omega, no_detection=0.0):
        """Standard strategy reaching CHSH score omega."""
        return cls(strategy=optimal_strategy(omega), no_detection=no_detection)

    @classmethod
    def semidi(cls, omega, theta):
        return cls(omega_x=(omega, omega), q_x=(theta, theta))


def outcome_table(dev):
    """p(a, b | x, y) as an array indexed [x, y, 2a + b].

    Each winning outcome has probability eps_xy and each losing one
    1/2 - eps_xy; a wins when a xor b = x y.
    """
    eps = np.array(epsilons(dev.strategy)).reshape(2, 2)
    tab = np.empty((2, 2, 4))
    for x in range(2):
        for y in range(2):
            e = eps[x, y]
            win, lose = e, 0.5 - e
            if x & y:
                tab[x, y] = (lose, win, win, lose)
            else:
                tab[x, y] = (win, lose, lose, win)
    if np.any(tab < -1e-12) or np.any(np.abs(tab.sum(axis=2) - 1.0) > 1e-12):
        raise DomainError("strategy gives an invalid probability table")
    return np.clip(tab, 0.0, 1.0)


def round_stream(seed, i):
    """Generator for round i alone."""
    return np.random.Generator(np.random.Philox(key=int(seed), counter=2 * int(i)))


def round_uniforms(seed, n):
    """Uniforms of rounds 0..n-1 as an (n, WORDS) array; row i equals
    round_stream(seed, i).random(WORDS)."""
    gen = np.random.Generator(np.random.Philox(key=int(seed)))
    return gen.random((int(n), WORDS))


def _outcomes(dev, x, y, u_out, u_da, u_db):
    tab = outcome_table(dev)
    cum = np.cumsum(tab[x, y], axis=-1)
    ab = np.minimum(np.sum(u_out[..., None] >= cum[..., :3], axis=-1), 3)
    a, b = ab >> 1, ab & 1
    a = np.where(u_da < dev.no_detection, 0, a)
    b = np.where(u_db < dev.no_detection, 0, b)
    return a, b


def sample_round(dev, x, y, rng):
    """Draw (a, b) for inputs (x, y) from the device's outcome table."""
    if x not in (0, 1) or y not in (0, 1):
        raise DomainError("inputs must be 0 or 1")
    u = rng.random(3)
    a, b = _outcomes(dev, np.array(x), np.array(y), u[0], u[1], u[2])
    return int(a), int(b)


@dataclass(frozen=True)
class RunParams:
    n: int
    omega_exp: float
    delta_conf: float
    gamma: float = None
    zetas: tuple = None
    eps_s: float = 3.09e-12

    def __post_init__(self):
        if self.n < 0:
            raise DomainError("number of rounds must be non-negative")
        if not (0.5 <= self.omega_exp <= 1.0) or self.delta_conf < 0:
            raise DomainError("need omega_exp in [1/2, 1] and delta_conf >= 0")


@dataclass(frozen=True)
class SemiDiParams:
    n: int
    gamma: float
    pX0: float
    omega_exp: float
    theta_exp: float
    delta_omega: float = 0.0
    delta_theta: float = 0.0

    def __post_init__(self):
        if self.n < 0:
            raise DomainError("number of rounds must be non-negative")
        if not (0.0 <= self.gamma <= 1.0) or not (0.0 < self.pX0 < 1.0):
            raise DomainError("need gamma in [0, 1] and pX0 in (0, 1)")
        if self.delta_omega < 0 or self.delta_theta < 0:
            raise DomainError("confidence widths must be non-negative")


@dataclass(frozen=True)
class ProtocolRun:
    kind: str
    params: object
    seed: int
    counts: dict
    empirical_omega: float
    aborted: bool
    certified_output_bits: float
    net_expansion_bits: float
    empirical_overlap: float = math.nan
    rate_per_round: float = math.nan
    transcript: bytes = field(default=b"", repr=False, compare=False)


@lru_cache(maxsize=None)
def analytic_curve(points=201):
    """Exact A|00E curve, a lower bound on the AB|00E entropy."""
    ws = np.linspace(0.75, OMEGA_MAX, points)
    return BoundCurve("A_00E", "analytic",
                      tuple((float(w), f_a00e_analytic(w)) for w in ws))


def _pack(t, x, y, a, b):
    return (t | (x << 1) | (y << 2) | (a << 3) | (b << 4)).astype(np.uint8)


def write_transcript(path, data):
    """Header, little-endian round count, then one byte per round."""
    data = bytes(data)
    with open(path, "wb") as fh:
        fh.write(MAGIC + struct.pack("<Q", len(data)) + data)


def read_transcript(path):
    """Per-round (t, x, y, a, b) columns of a transcript file."""
    with open(path, "rb") as fh:
        raw = fh.read()
    if raw[:len(MAGIC)] != MAGIC:
        raise DomainError("not a transcript file")
    (n,) = struct.unpack("<Q", raw[len(MAGIC):len(MAGIC) + 8])
    body = np.frombuffer(raw[len(MAGIC) + 8:], dtype=np.uint8)
    if len(body) != n:
        raise DomainError("transcript length does not match its header")
    return tuple(((body >> k) & 1).astype(np.int8) for k in range(5))


def _eat_params(p, d_C):
    return EatParams.from_soundness(max(p.n, 1), p.eps_s, d_C)


def run(kind, params, dev, seed, keep_transcript=False):
    """Execute one CHSH protocol run round by round and apply its abort rule."""
    kind = ProtocolKind(kind)
    if dev.strategy is None:
        raise DomainError("CHSH protocols need a qubit-strategy device")
    n = params.n
    u = round_uniforms(seed, n)
    if kind is ProtocolKind.SPOT:
        g = params.gamma
        if g is None or not (0.0 < g < 0.5):
            raise DomainError("spot checking needs gamma in (0, 1/2)")
        t = (u[:, 0] < g).astype(np.int64)
        x = np.where(t == 1, u[:, 1] < 0.5, 0).astype(np.int64)
        y = np.where(t == 1, u[:, 2] < 0.5, 0).astype(np.int64)
    elif kind is ProtocolKind.BIASED:
        if params.zetas is None:
            raise DomainError("biased protocol needs zetas")
        za, zb = params.zetas
        if not (0.0 < za <= 0.5 and 0.0 < zb <= 0.5):
            raise DomainError("input biases must lie in (0, 1/2]")
        t = np.ones(n, dtype=np.int64)
        x = (u[:, 1] < za).astype(np.int64)
        y = (u[:, 2] < zb).astype(np.int64)
    else:
        t = np.ones(n, dtype=np.int64)
        x = (u[:, 1] < 0.5).astype(np.int64)
        y = (u[:, 2] < 0.5).astype(np.int64)
    a, b = _outcomes(dev, x, y, u[:, 3], u[:, 4], u[:, 5])
    win = ((a ^ b) == (x & y)).astype(np.int64)
    transcript = _pack(t, x, y, a, b).tobytes() if keep_transcript else b""

    if kind is ProtocolKind.SPOT:
        tested = t == 1
        lost = int(np.sum(tested & (win == 0)))
        won = int(np.sum(tested & (win == 1)))
        counts = {"0": lost, "1": won, "bot": n - lost - won}
        omega_hat = won / (lost + won) if lost + won else math.nan
        aborted = n > 0 and lost > n * params.gamma * (1.0 - params.omega_exp + params.delta_conf)
        extra = params.gamma
    elif kind is ProtocolKind.BIASED:
        counts = {}
        omega_hat = 0.0
        px = (1.0 - za, za)
        py = (1.0 - zb, zb)
        for xx in range(2):
            for yy in range(2):
                sel = (x == xx) & (y == yy)
                for uu in range(2):
                    counts[f"{xx},{yy},{uu}"] = int(np.sum(sel & (win == uu)))
                if n:
                    omega_hat += counts[f"{xx},{yy},1"] / (n * px[xx] * py[yy]) / 4.0
        omega_hat = omega_hat if n else math.nan
        aborted = n > 0 and omega_hat < params.omega_exp - params.delta_conf
        extra = params.zetas
    else:
        lost = int(np.sum(win == 0))
        counts = {"0": lost, "1": n - lost}
        omega_hat = (n - lost) / n if n else math.nan
        aborted = n > 0 and lost > n * (1.0 - params.omega_exp + params.delta_conf)
        extra = None

    bits = 0.0
    if n > 0 and not aborted:
        if kind is ProtocolKind.SPOT:
            bits = spot_check_rate(n, params.gamma, params.omega_exp, params.delta_conf,
                                   _eat_params(params, 4), analytic_curve())
        elif kind is ProtocolKind.BIASED:
            bits = biased_rate(n, za, zb, params.omega_exp, params.delta_conf,
                               _eat_params(params, 4), analytic_curve())
        else:
            bits = recycled_rate(n, params.omega_exp, params.delta_conf,
                                 _eat_params(params, 16), RECYCLED_SLOPE)
    net = bits - input_randomness(kind, n, extra) if n > 0 else 0.0
    return ProtocolRun(kind.value, params, int(seed), counts, omega_hat, bool(aborted),
                       float(bits), float(net), transcript=transcript)


@lru_cache(maxsize=256)
def _semidi_rate(omega, theta, px0):
    try:
        return max(semidi_lb(SemiDiPoint(omega, theta, px0)).value, 0.0)
    except InfeasibleError:
        return 0.0


def _fraction(hits, total):
    return hits / total if total else math.nan


def run_semidi(params, seed, dev=None, keep_transcript=False):
    """One run of the semi-DI protocol that recycles its inputs.

    Test rounds (T = 1) go to the power meter, whose no-click frequency
    estimates the overlap; generation rounds (T = 0) go to the measurement,
    whose agreement Y = X estimates the score. An estimate with no rounds to
    draw on is NaN and skips its abort test. The attached rate is the
    asymptotic net bits per round.
    """
    p = params
    dev = dev or HonestDevice.semidi(p.omega_exp, p.theta_exp)
    if dev.omega_x is None:
        raise DomainError("semi-DI protocol needs a semi-DI device")
    n = p.n
    u = round_uniforms(seed, n)
    x = (u[:, 1] >= p.pX0).astype(np.int64)
    t = (u[:, 0] < p.gamma).astype(np.int64)
    w_x = np.asarray(dev.omega_x)[x]
    q_x = np.asarray(dev.q_x)[x]
    # generation: Y = X with probability omega_x; test: Y = 1 flags no click
    y = np.where(t == 0, np.where(u[:, 3] < w_x, x, 1 - x), (u[:, 3] < q_x).astype(np.int64))
    counts = {f"{tt},{xx},{yy}": int(np.sum((t == tt) & (x == xx) & (y == yy)))
              for tt in range(2) for xx in range(2) for yy in range(2)}
    omega_parts = [_fraction(counts[f"0,{xx},{xx}"],
                             counts[f"0,{xx},0"] + counts[f"0,{xx},1"]) for xx in range(2)]
    theta_parts = [_fraction(counts[f"1,{xx},1"],
                             counts[f"1,{xx},0"] + counts[f"1,{xx},1"]) for xx in range(2)]
    omega_hat = 0.5 * sum(omega_parts)
    theta_hat = 0.5 * sum(theta_parts)
    aborted = bool((not math.isnan(omega_hat) and omega_hat <= p.omega_exp - p.delta_omega)
                   or (not math.isnan(theta_hat) and theta_hat <= p.theta_exp - p.delta_theta))
    rate = _semidi_rate(float(p.omega_exp), float(p.theta_exp), float(p.pX0))
    net = (1.0 - p.gamma) * rate - p.gamma * float(hbin(p.pX0))
    transcript = (_pack(t, x, y, np.zeros_like(x), np.zeros_like(x)).tobytes()
                  if keep_transcript else b"")
    return ProtocolRun(SEMIDI, p, int(seed), counts, omega_hat, aborted, 0.0,
                       net * n if n else 0.0, theta_hat, net, transcript)

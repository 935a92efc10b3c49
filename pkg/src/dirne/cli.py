"""Command-line front end: tables of entropy curves, finite-round rates,
simulated runs and semi-DI bounds, as CSV or JSON."""

import json
import math
import os
import sys
import time

import click
import numpy as np

from . import __version__
from .eat import (EatParams, ProtocolKind, biased_rate, calibrated_delta,
                  input_randomness, recycled_rate, spot_check_rate)
from .errors import BudgetError, DomainError, InfeasibleError, NoRootError
from .lower import GridSpec, one_sided_lb, two_sided_00_lb, two_sided_xye_lb
from .semidi import SemiDiPoint, semidi_lb, semidi_net_rate, semidi_surface
from .simulate import (RECYCLED_SLOPE, HonestDevice, RunParams, SemiDiParams,
                       analytic_curve, run, run_semidi)
from .strategy import EntropyKind, conjectured_curve, f_a00e_analytic
from .upper import OptimizerConfig, heuristic_min

EPS_S = 3.09e-12
PROTOCOLS = {"spot": ProtocolKind.SPOT, "biased": ProtocolKind.BIASED,
             "recycled": ProtocolKind.RECYCLED}
LOWER_ENGINES = {"A_XYE": "one_sided", "AB_00E": "two_sided_00", "AB_XYE": "two_sided_xye"}

CURVE_COLUMNS = ["omega", "value", "direction", "kind", "engine", "grid", "seed"]
RATE_COLUMNS = ["n", "omega_exp", "gamma", "zeta_a", "zeta_b", "delta_conf", "eps_h",
                "eps_eat", "bits_out", "bits_in", "net_per_round"]
SIM_COLUMNS = ["seed", "empirical_omega", "aborted", "bits_out"]
SEMIDI_COLUMNS = ["omega", "theta", "G_lb", "F_env", "net_recycle", "net_public", "feasible"]


class UsageError(Exception):
    """Invalid option values; maps to exit code 2."""


def threads():
    """Parallelism cap from DIRNE_THREADS; the sweeps run in one thread."""
    raw = os.environ.get("DIRNE_THREADS", "1")
    try:
        val = int(raw)
    except ValueError:
        raise UsageError(f"DIRNE_THREADS must be a positive integer, got {raw!r}")
    if val < 1:
        raise UsageError(f"DIRNE_THREADS must be a positive integer, got {raw!r}")
    return val


def frange(lo, hi, step):
    """lo, lo + step, ... up to hi inclusive, computed as lo + k step."""
    if step <= 0:
        raise UsageError("step must be positive")
    if hi < lo:
        return []
    count = int(math.floor((hi - lo) / step + 1e-9)) + 1
    return [lo + k * step for k in range(count)]


def parse_grid(text):
    if text is None:
        return None
    try:
        counts = tuple(int(p) for p in text.lower().split("x"))
    except ValueError:
        raise UsageError(f"grid must look like 40x40x40, got {text!r}")
    if any(c < 1 for c in counts):
        raise UsageError("grid counts must be positive")
    return counts


class Budget:
    def __init__(self, seconds):
        self.seconds = seconds
        self.t0 = time.perf_counter()

    def check(self):
        if self.seconds is not None and time.perf_counter() - self.t0 > self.seconds:
            raise BudgetError(f"time budget of {self.seconds} s exceeded")


# row builders, shared by the commands and usable from Python

def curve_rows(kind, direction, omegas, grid=None, seed=0, restarts=512, n_poly=4,
               budget=None):
    kind = EntropyKind(kind).value
    budget = budget or Budget(None)
    if direction == "analytic" and kind != "A_00E":
        raise UsageError(f"unsupported kind/direction pair: {kind}/{direction}")
    if direction == "conjectured" and kind not in ("AB_XYE", "A_XYE"):
        raise UsageError(f"unsupported kind/direction pair: {kind}/{direction}")
    if direction == "lower" and kind not in LOWER_ENGINES:
        raise UsageError(f"unsupported kind/direction pair: {kind}/{direction}")
    if direction not in ("analytic", "conjectured", "lower", "upper"):
        raise UsageError(f"unknown direction {direction}")
    rows = []
    for w in omegas:
        grid_txt = ""
        if direction == "analytic":
            val, engine = f_a00e_analytic(w), "closed_form"
        elif direction == "conjectured":
            val, engine = conjectured_curve(kind, w), "closed_form"
        elif direction == "upper":
            cfg = OptimizerConfig(restarts=restarts, seed=seed)
            val, _ = heuristic_min(kind, w, cfg=cfg)
            engine = "nelder_mead"
        else:
            engine = LOWER_ENGINES[kind]
            pt = _lower(kind, w, grid, n_poly)
            val = pt.value
            grid_txt = "x".join(str(c) for c in pt.resolution)
        rows.append([float(w), float(val), direction, kind, engine, grid_txt, int(seed)])
        budget.check()
    return rows


def _lower(kind, w, grid, n_poly):
    if kind == "A_XYE":
        if grid is not None and len(grid) != 3:
            raise UsageError("the one-sided engine needs a 3-axis grid")
        return one_sided_lb(w, GridSpec(grid)) if grid else one_sided_lb(w)
    if kind == "AB_00E":
        if grid is not None and len(grid) != 3:
            raise UsageError("the two-sided 00 engine needs a 3-axis grid")
        return two_sided_00_lb(w, GridSpec(grid) if grid else None)
    if grid is not None and len(grid) != 6:
        raise UsageError("the AB_XYE engine needs a 6-axis grid (2 for R, theta; 4 angles)")
    if grid:
        return two_sided_xye_lb(w, GridSpec(grid[:2]), GridSpec(grid[2:]), n_poly=n_poly)
    return two_sided_xye_lb(w, n_poly=n_poly)


def _eat(n, eps_h, eps_eat, d_C):
    if eps_h is None and eps_eat is None:
        return EatParams.from_soundness(max(n, 1), EPS_S, d_C)
    if eps_h is None or eps_eat is None:
        raise UsageError("give both --eps-h and --eps-eat, or neither")
    return EatParams(int(n), eps_h, eps_eat, d_C)


def rate_rows(protocol, ns, omega_exp, gamma=None, zeta_a=None, zeta_b=None, delta=None,
              eps_c=1e-6, eps_h=None, eps_eat=None, slope=RECYCLED_SLOPE, budget=None):
    kind = PROTOCOLS[protocol]
    budget = budget or Budget(None)
    g = {ProtocolKind.SPOT: gamma, ProtocolKind.BIASED: (zeta_a, zeta_b),
         ProtocolKind.RECYCLED: None}[kind]
    if kind is ProtocolKind.SPOT and gamma is None:
        raise UsageError("spot checking needs --gamma")
    if kind is ProtocolKind.BIASED and (zeta_a is None or zeta_b is None):
        raise UsageError("the biased protocol needs --zeta-a and --zeta-b")
    rows = []
    for n in ns:
        n = int(n)
        d = delta if delta is not None else calibrated_delta(kind, n, eps_c, g)
        params = _eat(n, eps_h, eps_eat, 16 if kind is ProtocolKind.RECYCLED else 4)
        if kind is ProtocolKind.SPOT:
            bits = spot_check_rate(n, gamma, omega_exp, d, params, analytic_curve())
        elif kind is ProtocolKind.BIASED:
            bits = biased_rate(n, zeta_a, zeta_b, omega_exp, d, params, analytic_curve())
        else:
            bits = recycled_rate(n, omega_exp, d, params, slope)
        bits_in = input_randomness(kind, n, g)
        net = (bits - bits_in) / n if n else 0.0
        rows.append([n, float(omega_exp), _num(gamma), _num(zeta_a), _num(zeta_b), float(d),
                     params.eps_h, params.eps_eat, float(bits), float(bits_in), float(net)])
        budget.check()
    return rows


def _num(v):
    return None if v is None else float(v)


def simulate_rows(protocol, n, omega_exp, delta, seeds, gamma=None, zeta_a=None,
                  zeta_b=None, omega_dev=None, budget=None):
    kind = PROTOCOLS[protocol]
    budget = budget or Budget(None)
    params = RunParams(int(n), omega_exp, delta, gamma=gamma,
                       zetas=(zeta_a, zeta_b) if kind is ProtocolKind.BIASED else None)
    dev = HonestDevice.at_score(omega_dev if omega_dev is not None else omega_exp)
    rows = []
    for s in seeds:
        r = run(kind, params, dev, s)
        rows.append([int(s), float(r.empirical_omega), bool(r.aborted),
                     float(r.certified_output_bits)])
        budget.check()
    return rows


def semidi_rows(omegas, thetas, px0=0.5, gamma=0.01, n_poly=2, grid=None, budget=None):
    for v in list(omegas) + list(thetas):
        if not (0.5 <= v <= 1.0):
            raise UsageError(f"grid value {v} outside [1/2, 1]")
    budget = budget or Budget(None)
    kw = {} if grid is None else {"var_grid": GridSpec(grid)}
    if grid is not None and len(grid) != 4:
        raise UsageError("the semi-DI engine needs a 4-axis grid")
    if not omegas or not thetas:
        return []
    surf = semidi_surface(omegas, thetas, px0, n_poly, **kw)
    budget.check()
    rows = []
    for i, w in enumerate(omegas):
        for j, t in enumerate(thetas):
            feas = bool(surf.feasible[i, j])
            env = float(surf.envelope.values[i, j])
            pt = SemiDiPoint(w, t, px0)
            if feas:
                rate = max(env, 0.0)
                net_r = semidi_net_rate(pt, gamma, True, rate)
                net_p = semidi_net_rate(pt, gamma, False, rate)
            else:
                net_r = net_p = None
            rows.append([float(w), float(t), float(surf.raw.values[i, j]), env,
                         net_r, net_p, feas])
    return rows


# output

def _fmt(v):
    if v is None:
        return ""
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, float):
        return format(v, ".17g")
    return str(v)


def render(columns, rows, metadata, fmt):
    if fmt == "json":
        return json.dumps({"metadata": metadata, "columns": columns, "rows": rows},
                          indent=1) + "\n"
    lines = [f"# {key}: {json.dumps(metadata[key], sort_keys=True)}" for key in sorted(metadata)]
    lines.append(",".join(columns))
    lines.extend(",".join(_fmt(v) for v in row) for row in rows)
    return "\n".join(lines) + "\n"


def _emit(ctx, columns, rows, config, out, fmt):
    meta = {"version": __version__, "command": ctx.info_name, "config": config,
            "seed": config.get("seed"), "threads": threads()}
    text = render(columns, rows, meta, fmt)
    if out in (None, "-"):
        click.echo(text, nl=False)
    else:
        with open(out, "w") as fh:
            fh.write(text)


def _run(fn):
    """Exit 2 on invalid input and 3 on numerical or budget failures."""
    try:
        return fn()
    except (UsageError, DomainError, ValueError) as exc:
        if isinstance(exc, (InfeasibleError, NoRootError)):
            click.echo(f"error: {exc}", err=True)
            sys.exit(3)
        click.echo(f"error: {exc}", err=True)
        sys.exit(2)
    except (BudgetError, ArithmeticError, RuntimeError) as exc:
        click.echo(f"error: {exc}", err=True)
        sys.exit(3)


def _common(f):
    f = click.option("--out", default="-", help="Output path, '-' for stdout.")(f)
    f = click.option("--format", "fmt", type=click.Choice(["csv", "json"]), default="csv")(f)
    f = click.option("--budget-seconds", type=float, default=None,
                     help="Fail with exit code 3 once this much time has passed.")(f)
    return f


@click.group(context_settings={"help_option_names": ["-h", "--help"]})
@click.version_option(__version__)
def main():
    """Randomness-expansion bounds and simulations."""


@main.command()
@click.option("--kind", required=True, type=click.Choice([k.value for k in EntropyKind]))
@click.option("--direction", required=True,
              type=click.Choice(["upper", "lower", "analytic", "conjectured"]))
@click.option("--omega-min", type=float, default=0.76)
@click.option("--omega-max", type=float, default=0.85)
@click.option("--omega-step", type=float, default=0.01)
@click.option("--grid", default=None, help="Cells per axis, e.g. 40x40x40.")
@click.option("--n-poly", type=int, default=4, help="Minorant order of the AB_XYE engine.")
@click.option("--restarts", type=int, default=512, help="Restarts of the upper-bound search.")
@click.option("--seed", type=int, default=0)
@_common
@click.pass_context
def curve(ctx, kind, direction, omega_min, omega_max, omega_step, grid, n_poly, restarts,
          seed, out, fmt, budget_seconds):
    """Entropy curve samples over a score range."""
    config = dict(kind=kind, direction=direction, omega_min=omega_min, omega_max=omega_max,
                  omega_step=omega_step, grid=grid, n_poly=n_poly, restarts=restarts,
                  seed=seed, format=fmt, budget_seconds=budget_seconds)

    def go():
        rows = curve_rows(kind, direction, frange(omega_min, omega_max, omega_step),
                          parse_grid(grid), seed, restarts, n_poly, Budget(budget_seconds))
        _emit(ctx, CURVE_COLUMNS, rows, config, out, fmt)
    _run(go)


@main.command()
@click.option("--protocol", required=True, type=click.Choice(sorted(PROTOCOLS)))
@click.option("--n", "ns", type=float, multiple=True, required=True,
              help="Number of rounds; repeat for several rows.")
@click.option("--omega-exp", type=float, required=True)
@click.option("--gamma", type=float, default=None)
@click.option("--zeta-a", type=float, default=None)
@click.option("--zeta-b", type=float, default=None)
@click.option("--delta", type=float, default=None,
              help="Confidence width; calibrated from --eps-c when absent.")
@click.option("--eps-c", type=float, default=1e-6, help="Completeness error for calibration.")
@click.option("--eps-h", type=float, default=None)
@click.option("--eps-eat", type=float, default=None)
@click.option("--seed", type=int, default=0)
@_common
@click.pass_context
def rate(ctx, protocol, ns, omega_exp, gamma, zeta_a, zeta_b, delta, eps_c, eps_h, eps_eat,
         seed, out, fmt, budget_seconds):
    """Finite-round certified output and net expansion."""
    config = dict(protocol=protocol, n=[int(n) for n in ns], omega_exp=omega_exp, gamma=gamma,
                  zeta_a=zeta_a, zeta_b=zeta_b, delta=delta, eps_c=eps_c, eps_h=eps_h,
                  eps_eat=eps_eat, seed=seed, format=fmt, budget_seconds=budget_seconds)

    def go():
        rows = rate_rows(protocol, [int(n) for n in ns], omega_exp, gamma, zeta_a, zeta_b,
                         delta, eps_c, eps_h, eps_eat, budget=Budget(budget_seconds))
        _emit(ctx, RATE_COLUMNS, rows, config, out, fmt)
    _run(go)


@main.command()
@click.option("--protocol", required=True, type=click.Choice(sorted(PROTOCOLS)))
@click.option("--n", type=int, required=True)
@click.option("--omega-exp", type=float, required=True)
@click.option("--delta", type=float, required=True)
@click.option("--gamma", type=float, default=None)
@click.option("--zeta-a", type=float, default=None)
@click.option("--zeta-b", type=float, default=None)
@click.option("--device-omega", type=float, default=None,
              help="Score of the honest device; defaults to --omega-exp.")
@click.option("--seed", type=int, default=0, help="First seed.")
@click.option("--seeds", type=int, default=1, help="Number of consecutive seeds.")
@_common
@click.pass_context
def simulate(ctx, protocol, n, omega_exp, delta, gamma, zeta_a, zeta_b, device_omega, seed,
             seeds, out, fmt, budget_seconds):
    """Seeded honest-device runs, one row per seed."""
    config = dict(protocol=protocol, n=n, omega_exp=omega_exp, delta=delta, gamma=gamma,
                  zeta_a=zeta_a, zeta_b=zeta_b, device_omega=device_omega, seed=seed,
                  seeds=seeds, format=fmt, budget_seconds=budget_seconds)

    def go():
        if seeds < 0:
            raise UsageError("--seeds must be non-negative")
        rows = simulate_rows(protocol, n, omega_exp, delta, range(seed, seed + seeds), gamma,
                             zeta_a, zeta_b, device_omega, Budget(budget_seconds))
        _emit(ctx, SIM_COLUMNS, rows, config, out, fmt)
    _run(go)


@main.command()
@click.option("--omega", "omegas", type=float, multiple=True, required=True,
              help="Score grid value; repeat for several.")
@click.option("--theta", "thetas", type=float, multiple=True, required=True,
              help="Overlap grid value; repeat for several.")
@click.option("--px0", type=float, default=0.5)
@click.option("--gamma", type=float, default=0.01)
@click.option("--n-poly", type=int, default=2)
@click.option("--grid", default=None, help="Cells over (a0, xi0, a1, xi1), e.g. 256x256x256x256.")
@click.option("--seed", type=int, default=0)
@_common
@click.pass_context
def semidi(ctx, omegas, thetas, px0, gamma, n_poly, grid, seed, out, fmt, budget_seconds):
    """Certified semi-DI rates and net rates on a score/overlap grid."""
    config = dict(omega=list(omegas), theta=list(thetas), px0=px0, gamma=gamma, n_poly=n_poly,
                  grid=grid, seed=seed, format=fmt, budget_seconds=budget_seconds)

    def go():
        rows = semidi_rows(sorted(omegas), sorted(thetas), px0, gamma, n_poly,
                           parse_grid(grid), Budget(budget_seconds))
        _emit(ctx, SEMIDI_COLUMNS, rows, config, out, fmt)
    _run(go)


if __name__ == "__main__":
    main()

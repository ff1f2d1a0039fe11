"""Command-line front end: ``price``, ``barrier``, ``sweep`` and ``verify``.

Flags may also come from a ``key=value`` file given with ``--config`` (keys are
flag names without the leading dashes); explicit flags win over the file, and
the file wins over the ``DRAWDOWN_PUT_SEED`` environment variable.
"""

from __future__ import annotations

import argparse
import math
import os
import sys

from . import mc
from .figures import FIGURES, METRICS, SWEEP_PARAMS, SweepSettings, parameter_sweep, render_csv, write_csv
from .model import ContractState, DomainError, make_params
from .pricer import BarrierNotFoundError, barrier_residual, build_model, exercise_boundary, regime, value
from .verify import run_suite

SEED_ENV = "DRAWDOWN_PUT_SEED"


class ConfigError(ValueError):
    pass


def _float_list(text: str) -> list[float]:
    items = [t for t in text.replace(";", ",").split(",") if t.strip()]
    return [float(t) for t in items]


def read_config(path: str) -> dict[str, str]:
    out = {}
    with open(path, encoding="utf-8") as fh:
        for n, raw in enumerate(fh, 1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ConfigError(f"{path}:{n}: expected key=value, got {raw.strip()!r}")
            key, val = (t.strip() for t in line.split("=", 1))
            out[key.lstrip("-").replace("-", "_")] = val
    return out


def _model_flags(p: argparse.ArgumentParser, d: dict):
    g = p.add_argument_group("model")
    g.add_argument("--r", type=float, default=d.get("r", 0.1), help="discount rate")
    g.add_argument("--sigma", type=float, default=d.get("sigma", 0.2), help="diffusion volatility")
    g.add_argument("--lambda", dest="lam", type=float, default=d.get("lam", d.get("lambda", 0.2)),
                   help="jump intensity (0 for no jumps)")
    g.add_argument("--rho", type=float, default=d.get("rho", 3.0), help="rate of the exponential jump sizes")
    g.add_argument("--K", type=float, default=d.get("K", 100.0), help="strike")
    g.add_argument("--cap-ratio", type=float, default=d.get("cap_ratio", 1.2),
                   help="drawdown ratio max/S that kills the option (> 1)")
    g.add_argument("--config", default=None, help="key=value file with default flag values")


def _mc_flags(p: argparse.ArgumentParser, d: dict):
    seed = d.get("seed", os.environ.get(SEED_ENV, mc.DEFAULT_SEED))
    g = p.add_argument_group("monte carlo")
    g.add_argument("--paths", type=int, default=d.get("paths", 200_000))
    g.add_argument("--dt", type=float, default=d.get("dt", 1e-3))
    g.add_argument("--t-max", type=float, default=d.get("t_max", 400.0))
    g.add_argument("--workers", type=int, default=d.get("workers", 4))
    g.add_argument("--seed", type=int, default=seed)


def _state_flags(p: argparse.ArgumentParser, d: dict):
    p.add_argument("--s", type=float, default=d.get("s", 100.0), help="current asset price")
    p.add_argument("--smax", type=float, default=d.get("smax", 100.0), help="running maximum of the asset price")


def build_parser(d: dict | None = None) -> argparse.ArgumentParser:
    d = d or {}
    parser = argparse.ArgumentParser(prog="drawdown-put", description="Perpetual American put capped by a drawdown.")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("price", help="price at (s, smax) and the exercise boundary")
    _model_flags(p, d)
    _state_flags(p, d)
    p.add_argument("--mc", action="store_true", help="also report a Monte Carlo estimate")
    _mc_flags(p, d)

    p = sub.add_parser("barrier", help="optimal log-barrier a* and its residual")
    _model_flags(p, d)

    p = sub.add_parser("sweep", help="write CSV data for a figure or a custom grid")
    _model_flags(p, d)
    _state_flags(p, d)
    p.add_argument("--figure", choices=sorted(FIGURES), default=d.get("figure"))
    p.add_argument("--param1", choices=SWEEP_PARAMS, default=d.get("param1"))
    p.add_argument("--values1", type=_float_list, default=d.get("values1"))
    p.add_argument("--param2", choices=SWEEP_PARAMS, default=d.get("param2"))
    p.add_argument("--values2", type=_float_list, default=d.get("values2"))
    p.add_argument("--metric", choices=METRICS, default=d.get("metric", "value"))
    p.add_argument("--points", type=int, default=d.get("points", 61), help="grid size per axis for surfaces")
    p.add_argument("--out", default=d.get("out", "-"), help="output path, - for stdout")

    p = sub.add_parser("verify", help="run the verification suite")
    _model_flags(p, d)
    p.add_argument("--quick", action="store_true", default=str(d.get("quick", "")).lower() in ("1", "true", "yes"),
                   help="skip the Monte Carlo checks")
    _mc_flags(p, d)
    return parser


def parse_args(argv=None) -> argparse.Namespace:
    argv = sys.argv[1:] if argv is None else list(argv)
    pre = argparse.ArgumentParser(add_help=False)
    pre.add_argument("--config")
    known, _ = pre.parse_known_args(argv)
    defaults = read_config(known.config) if known.config else {}
    parser = build_parser(defaults)
    allowed = {"lambda"}
    for action in parser._subparsers._group_actions:
        for sp in action.choices.values():
            allowed |= {a.dest for a in sp._actions}
    unknown = sorted(set(defaults) - allowed)
    if unknown:
        raise ConfigError(f"unknown config keys: {', '.join(unknown)}")
    return parser.parse_args(argv)


def _params(ns):
    if not ns.cap_ratio > 1:
        raise DomainError(f"cap ratio must exceed 1, got {ns.cap_ratio}")
    rho = ns.rho if ns.lam > 0 else None
    return make_params(ns.r, ns.sigma, ns.lam, rho), math.log(ns.cap_ratio)


def _mc_config(ns) -> mc.McConfig:
    return mc.McConfig(n_paths=ns.paths, dt=ns.dt, t_max=ns.t_max, seed=ns.seed, n_workers=ns.workers)


def cmd_price(ns, out) -> int:
    params, c = _params(ns)
    contract = ContractState.from_prices(ns.K, ns.cap_ratio, ns.s, ns.smax)
    m = build_model(params, ns.K, c)
    x, xb = contract.x, contract.xbar
    b = exercise_boundary(m, xb)
    print(f"value     {value(m, x, xb):.10f}", file=out)
    print(f"regime    {regime(m, x, xb).value}", file=out)
    print(f"boundary  {'none' if b is None else format(math.exp(b), '.10f')}", file=out)
    print(f"a_star    {m.a_star:.12f}", file=out)
    print(f"barrier   {math.exp(m.a_star):.10f}", file=out)
    if ns.mc:
        est = mc.estimate_price(params, contract, m.a_star, _mc_config(ns))
        print(f"mc_mean   {est.mean:.10f}", file=out)
        print(f"mc_se     {est.std_err:.10f}", file=out)
        print(f"mc_trunc  {est.truncation_bound:.3e}", file=out)
    return 0


def cmd_barrier(ns, out) -> int:
    params, c = _params(ns)
    m = build_model(params, ns.K, c)
    print(f"a_star    {m.a_star:.12f}", file=out)
    print(f"barrier   {math.exp(m.a_star):.10f}", file=out)
    print(f"residual  {barrier_residual(m, m.a_star):.3e}", file=out)
    return 0


def cmd_sweep(ns, out) -> int:
    _params(ns)  # validates the base parameters before any work
    settings = SweepSettings(ns.r, ns.sigma, ns.lam, ns.rho, ns.K, ns.cap_ratio, ns.s, ns.smax, ns.points)
    if ns.points < 2:
        raise ValueError("--points must be at least 2")
    if ns.figure:
        header, rows = FIGURES[ns.figure](settings)
    else:
        if not (ns.param1 and ns.param2 and ns.values1 is not None and ns.values2 is not None):
            raise ValueError("give --figure, or --param1/--values1/--param2/--values2")
        header, rows = parameter_sweep(settings, ns.param1, ns.values1, ns.param2, ns.values2, ns.metric)
    if ns.out == "-":
        out.write(render_csv(header, rows))
    else:
        write_csv(ns.out, header, rows)
    return 0


def cmd_verify(ns, out) -> int:
    params, c = _params(ns)
    results = run_suite(params, ns.K, c, quick=ns.quick, mc_cfg=None if ns.quick else _mc_config(ns))
    for res in results:
        print(res.line(), file=out)
    failed = sum(not r.passed for r in results)
    print(f"{len(results) - failed} passed, {failed} failed", file=out)
    return 1 if failed else 0


COMMANDS = {"price": cmd_price, "barrier": cmd_barrier, "sweep": cmd_sweep, "verify": cmd_verify}


def main(argv=None, out=None) -> int:
    out = sys.stdout if out is None else out
    try:
        ns = parse_args(argv)
        return COMMANDS[ns.command](ns, out)
    except (DomainError, BarrierNotFoundError, ConfigError, ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())

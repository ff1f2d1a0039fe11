"""Data behind the numerical study: value surfaces and parameter sensitivities.

Each sweep returns a header and rows ready to be written as CSV.  Log-price
columns (``x``, ``xbar``) stay on the log scale; barrier metrics are reported as
asset prices e^{a*}.
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field

import numpy as np

from .model import make_params
from .pricer import build_model, continuation_projection, value

GRIDS = {
    "r": [round(0.05 * k, 10) for k in range(1, 11)],  # 0.05 .. 0.5
    "sigma": [round(0.05 * k, 10) for k in range(2, 11)],  # 0.1 .. 0.5
    "lam": [round(0.1 * k, 10) for k in range(1, 11)],  # 0.1 .. 1.0
    "rho": [float(k) for k in range(1, 11)],  # 1 .. 10
}

SWEEP_PARAMS = ("r", "sigma", "lam", "rho")
METRICS = ("barrier", "value")


@dataclass
class SweepSettings:
    r: float = 0.1
    sigma: float = 0.2
    lam: float = 0.2
    rho: float = 3.0
    K: float = 100.0
    cap_ratio: float = 1.2
    # state at which value sensitivities are reported (asset prices)
    s: float = 100.0
    smax: float = 100.0
    n_points: int = 61
    overrides: dict = field(default_factory=dict)

    @property
    def c(self) -> float:
        return math.log(self.cap_ratio)

    def base(self) -> dict:
        return dict(r=self.r, sigma=self.sigma, lam=self.lam, rho=self.rho)


def _model(settings: SweepSettings, **kw):
    p = settings.base() | kw
    return build_model(make_params(p["r"], p["sigma"], p["lam"], p["rho"]), settings.K, settings.c)


def _check_grid(name: str, values) -> list[float]:
    vals = [float(v) for v in values]
    if not vals:
        raise ValueError(f"grid for {name} is empty")
    if any(b <= a for a, b in zip(vals, vals[1:])):
        raise ValueError(f"grid for {name} must be strictly increasing")
    return vals


def parameter_sweep(settings: SweepSettings, p1: str, v1, p2: str, v2, metric: str):
    """Barrier e^{a*} or value at (s, smax) over a row-major (p1, p2) grid."""
    for p in (p1, p2):
        if p not in SWEEP_PARAMS:
            raise ValueError(f"unknown sweep parameter {p!r}; choose from {', '.join(SWEEP_PARAMS)}")
    if p1 == p2:
        raise ValueError("sweep parameters must differ")
    if metric not in METRICS:
        raise ValueError(f"unknown metric {metric!r}")
    v1, v2 = _check_grid(p1, v1), _check_grid(p2, v2)
    x, xbar = math.log(settings.s), math.log(settings.smax)
    rows = []
    for a in v1:
        for b in v2:
            m = _model(settings, **{p1: a, p2: b})
            out = math.exp(m.a_star) if metric == "barrier" else value(m, x, xbar)
            rows.append((a, b, out))
    return ["param1", "param2", "metric"], rows


def smooth_paste(settings: SweepSettings):
    """Payoff, value and continued-continuation value through the barrier at a fixed LOW-regime maximum."""
    m = _model(settings)
    a, c, K = m.a_star, m.drawdown_c, m.strike_K
    xbar = a + 0.75 * c
    rows = []
    for x in np.linspace(a - 0.3, xbar, settings.n_points):
        x = float(x)
        rows.append((x, max(K - math.exp(x), 0.0), value(m, x, xbar), continuation_projection(m, x, xbar)))
    return ["x", "payoff", "value", "projection"], rows


def _surface(settings: SweepSettings, x_lo, x_hi, xbar_lo, xbar_hi):
    m = _model(settings)
    xs = np.linspace(x_lo, x_hi, settings.n_points)
    xbars = np.linspace(xbar_lo, xbar_hi, settings.n_points)
    rows = []
    for xb in xbars:
        for x in xs:
            # off-domain points (x > xbar) are reported as 0, as in a full rectangular surface plot
            v = value(m, float(x), float(xb)) if x <= xb else 0.0
            rows.append((float(x), float(xb), v))
    return ["x", "xbar", "value"], rows


def price_surface(settings: SweepSettings):
    m = _model(settings)
    lo, hi = m.a_star - 0.2, m.log_K + m.drawdown_c + 0.3
    return _surface(settings, lo, hi, lo, hi)


def price_surface_zoom(settings: SweepSettings):
    """Corner around xbar = log K + c where the x-bar derivative jumps."""
    lk, c = math.log(settings.K), settings.c
    return _surface(settings, lk - 0.05, lk + c + 0.2, lk + c - 0.1, lk + c + 0.2)


def _pair(settings, p1, p2, metric):
    g = GRIDS
    return parameter_sweep(settings, p1, settings.overrides.get(p1, g[p1]), p2, settings.overrides.get(p2, g[p2]), metric)


FIGURES = {
    "smooth-paste": smooth_paste,
    "price-surface": price_surface,
    "price-surface-zoom": price_surface_zoom,
    "barrier-r-sigma": lambda s: _pair(s, "r", "sigma", "barrier"),
    "value-r-sigma": lambda s: _pair(s, "r", "sigma", "value"),
    "barrier-rho-lambda": lambda s: _pair(s, "rho", "lam", "barrier"),
    "value-rho-lambda": lambda s: _pair(s, "rho", "lam", "value"),
    # side views: one parameter on a fine grid, the other held at its base value
    "value-rho": lambda s: parameter_sweep(
        s, "rho", s.overrides.get("rho", np.linspace(0.5, 10, 39)), "lam", [s.lam], "value"),
    "value-lambda": lambda s: parameter_sweep(
        s, "lam", s.overrides.get("lam", np.linspace(0.0, 1.0, 41)), "rho", [s.rho], "value"),
}


def render_csv(header, rows) -> str:
    buf = io.StringIO()
    wr = csv.writer(buf, lineterminator="\n")
    wr.writerow(header)
    for row in rows:
        wr.writerow([f"{v:.12g}" for v in row])
    return buf.getvalue()


def write_csv(path: str, header, rows) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write(render_csv(header, rows))

"""Numerical verification suite: structural identities, optimality conditions, MC oracle.

Every check returns a :class:`CheckResult` holding the worst observed error and
the limit it was held against, so callers can print a table or assert.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np
from scipy import integrate

from . import mc
from .model import ContractState, ModelParams, laplace_exponent, make_params
from .pricer import (
    PriceModel,
    Regime,
    barrier_residual,
    barrier_residual_blocks,
    build_model,
    exercise_boundary,
    regime,
    regime_formula,
    value,
)
from .scale import build_basis, creeping_plus_jump, drawdown_constants, tilt_constants, w, w_prime

BASE_CASE = dict(r=0.1, sigma=0.2, lam=0.2, rho=3.0, K=100.0, cap_ratio=1.2)


@dataclass(frozen=True)
class CheckResult:
    name: str
    passed: bool
    metric: float
    limit: float
    detail: str = ""

    def line(self) -> str:
        tag = "PASS" if self.passed else "FAIL"
        return f"{tag}  {self.name:<34} {self.metric:12.4e} <= {self.limit:10.3e}  {self.detail}"


def _result(name, metric, limit, detail="") -> CheckResult:
    return CheckResult(name, bool(metric <= limit), float(metric), float(limit), detail)


def figure_model(lam: float | None = None) -> PriceModel:
    f = BASE_CASE
    p = make_params(f["r"], f["sigma"], f["lam"] if lam is None else lam, f["rho"])
    return build_model(p, f["K"], math.log(f["cap_ratio"]))


def random_parameter_sets(n: int, seed: int = 7, jumps: bool | None = None) -> list[tuple[ModelParams, float]]:
    """Draw (params, c) over the test ranges; ``jumps`` forces lam > 0 (True) or lam = 0 (False)."""
    rng = np.random.default_rng(seed)
    out = []
    while len(out) < n:
        r = rng.uniform(0.01, 0.5)
        sigma = rng.uniform(0.05, 0.6)
        rho = rng.uniform(0.5, 10.0)
        with_jumps = rng.random() < 0.8 if jumps is None else jumps
        lam = rng.uniform(0.05, 2.0) if with_jumps else 0.0
        c = rng.uniform(0.05, 1.0)
        out.append((make_params(r, sigma, lam, rho), c))
    return out


# --------------------------------------------------------------------------- #
# Structure of the scale basis
# --------------------------------------------------------------------------- #

def _rel(got: float, want: float, scale: float = 0.0) -> float:
    return abs(got - want) / max(abs(want), scale, 1e-300)


def structural_errors(params: ModelParams, c: float) -> dict[str, float]:
    """Relative errors of the identities every basis must satisfy."""
    b = build_basis(params)
    g, C, r = b.g, b.C, params.r
    errs = {
        "W(0)": abs(w(b, 0.0)) / np.abs(C).sum(),
        "W'(0)": _rel(w_prime(b, 0.0), 2.0 / params.sigma**2),
        "Z(0)": _rel(float(np.sum(r * C / g)), 1.0),
        "Psi(gamma)": max(_rel(laplace_exponent(params, gi), r) for gi in g),
    }
    if params.has_jumps:
        t0 = C / (g + params.rho)
        t1 = C * g / (g + params.rho)
        errs["sum C/(g+rho)"] = abs(t0.sum()) / np.abs(t0).sum()
        errs["sum Cg/(g+rho)"] = abs(t1.sum()) / np.abs(t1).sum()
    cq = drawdown_constants(b, c)
    cp = tilt_constants(cq, params.rho)
    errs["Delta+Gamma (Q)"] = _rel(cq.delta + cq.gamma_const, creeping_plus_jump(b, c))
    errs["Delta+Gamma (P)"] = _rel(cp.delta + cp.gamma_const, 1.0)
    return errs


def check_structure(sets, tol: float = 1e-10) -> CheckResult:
    worst, where = 0.0, ""
    for p, c in sets:
        for k, e in structural_errors(p, c).items():
            if e > worst:
                worst, where = e, k
    return _result("structural identities", worst, tol, f"{len(sets)} sets, worst: {where or '-'}")


def laplace_transform_quadrature(params: ModelParams, beta: float) -> float:
    """int_0^inf e^{-beta x} W(x) dx by adaptive quadrature, split at the fast decay scale."""
    b = build_basis(params)
    fast = 1.0 / max(1.0, float(np.max(np.abs(b.g))))
    # e^{-beta x} folded into each exponent so that large x cannot overflow
    f = lambda x: float(np.sum(b.C * np.exp((b.g - beta) * x)))
    cuts = [0.0, 5 * fast, 50 * fast, 1.0, 10.0]
    cuts = sorted(set(min(x, 10.0) for x in cuts))
    total = sum(integrate.quad(f, lo, hi, epsabs=0, epsrel=1e-13, limit=200)[0] for lo, hi in zip(cuts, cuts[1:]))
    return total + integrate.quad(f, cuts[-1], np.inf, epsabs=0, epsrel=1e-13, limit=200)[0]


def check_laplace(sets, betas=(2.0, 3.0, 5.0), tol: float = 1e-8) -> CheckResult:
    worst = 0.0
    for p, _ in sets:
        for beta in betas:
            want = 1.0 / (laplace_exponent(p, beta) - p.r)
            err = _rel(laplace_transform_quadrature(p, beta), want)
            worst = err if not err <= worst else worst  # keeps nan
    return _result("Laplace transform of W", worst, tol, f"{len(sets)} sets x {len(betas)} betas")


# --------------------------------------------------------------------------- #
# Optimality of the barrier
# --------------------------------------------------------------------------- #

def _low_xbar(m: PriceModel) -> float:
    return m.a_star + 0.5 * m.drawdown_c


def paste_slope(m: PriceModel, xbar: float | None = None, h: float = 1e-4) -> float:
    """Right derivative of V(., xbar) at a*, second-order one-sided differences."""
    a = m.a_star
    xbar = _low_xbar(m) if xbar is None else xbar
    v0 = m.strike_K - math.exp(a)
    v1, v2 = value(m, a + h, xbar), value(m, a + 2 * h, xbar)
    return (-3 * v0 + 4 * v1 - v2) / (2 * h)


def check_barrier(m: PriceModel) -> list[CheckResult]:
    K, a = m.strike_K, m.a_star
    res = abs(barrier_residual(m, a))
    out = [_result("barrier residual", res, 1e-12 * K, f"a*={a:.12f}, e^a*={math.exp(a):.6f}")]
    out.append(_result("barrier residual (block form)", abs(barrier_residual_blocks(m, a)), 1e-10 * K))
    slope = paste_slope(m)
    out.append(_result("smooth paste", _rel(slope, -math.exp(a)), 1e-6, f"slope={slope:.8f}"))
    gap = abs(regime_formula(m, Regime.LOW, a, _low_xbar(m)) - (K - math.exp(a)))
    out.append(_result("continuous paste", gap, 1e-9 * K))
    return out


# --------------------------------------------------------------------------- #
# HJB conditions
# --------------------------------------------------------------------------- #

def regime_xbars(m: PriceModel) -> dict[Regime, float]:
    lo = m.a_star + m.drawdown_c
    top = m.log_K + m.drawdown_c
    return {Regime.LOW: _low_xbar(m), Regime.MID: 0.5 * (lo + top), Regime.HIGH: top + 0.2}


def reflection_derivative(m: PriceModel, xbar: float, h: float = 1e-5) -> float:
    """d/dxbar V(x, xbar) at x = xbar, one-sided in the direction the maximum can move."""
    x = xbar
    v = [value(m, x, xbar + k * h) for k in range(3)]
    return (-3 * v[0] + 4 * v[1] - v[2]) / (2 * h)


def check_reflection(m: PriceModel) -> CheckResult:
    vals = {t.value: reflection_derivative(m, xb) for t, xb in regime_xbars(m).items()}
    worst = max(abs(v) for v in vals.values())
    return _result("normal reflection", worst, 1e-4 * m.strike_K,
                   ", ".join(f"{k}={v:.1e}" for k, v in vals.items()))


def generator_residual(m: PriceModel, x: float, xbar: float, h: float = 1e-4) -> float:
    """(L V - r V)(x, xbar) at a continuation point, jumps integrated by quadrature."""
    p = m.params
    v0 = value(m, x, xbar)
    vp, vm = value(m, x + h, xbar), value(m, x - h, xbar)
    out = p.mu * (vp - vm) / (2 * h) + 0.5 * p.sigma**2 * (vp - 2 * v0 + vm) / h**2 - p.r * v0
    if p.has_jumps:
        rho = p.rho
        # V(x - y) has kinks where the landing point crosses a*, xbar - c or log K
        kinks = sorted({x - k for k in (m.a_star, xbar - m.drawdown_c, m.log_K) if x - k > 0})
        cuts = [0.0] + kinks
        f = lambda y: value(m, x - y, xbar) * rho * math.exp(-rho * y)
        jump = sum(integrate.quad(f, lo, hi, epsabs=1e-12, limit=200)[0] for lo, hi in zip(cuts, cuts[1:]))
        jump += integrate.quad(f, cuts[-1], np.inf, epsabs=1e-12, limit=200)[0]
        out += p.lam * (jump - v0)
    return out


def continuation_points(m: PriceModel, n: int = 20) -> list[tuple[float, float]]:
    """Points strictly inside the continuation region, spread over the regimes present."""
    pts = []
    xbars = list(regime_xbars(m).values())
    per = [n // 3 + (1 if i < n % 3 else 0) for i in range(3)]
    for xbar, k in zip(xbars, per):
        lo = max(exercise_boundary(m, xbar) or -math.inf, xbar - m.drawdown_c) + 0.01
        pts += [(float(x), xbar) for x in np.linspace(lo, xbar - 0.002, k)]
    return pts


def check_generator(m: PriceModel, n: int = 20) -> CheckResult:
    worst = max(abs(generator_residual(m, x, xb)) for x, xb in continuation_points(m, n))
    return _result("generator residual", worst, 1e-3 * m.params.r * m.strike_K, f"{n} points")


def dominance_grid(m: PriceModel, n: int = 100):
    c = m.drawdown_c
    xbars = np.linspace(m.a_star - 0.3, m.log_K + c + 0.5, n)
    drops = np.linspace(0.0, 1.2 * c, n)
    return [(xb - d, xb) for xb in xbars for d in drops]


def check_dominance(m: PriceModel, n: int = 100) -> CheckResult:
    K = m.strike_K
    bad = 0
    for x, xb in dominance_grid(m, n):
        if value(m, x, xb) < max(K - math.exp(x), 0.0) - 1e-12 * K:
            bad += 1
    return _result("dominance V >= payoff", bad, 0, f"{n}x{n} grid")


# --------------------------------------------------------------------------- #
# Shape of the value function
# --------------------------------------------------------------------------- #

def continuity_gaps(m: PriceModel, n: int = 9) -> dict[str, float]:
    c = m.drawdown_c
    out = {}
    for name, xb, left, right in (
        ("LOW|MID", m.a_star + c, Regime.LOW, Regime.MID),
        ("MID|HIGH", m.log_K + c, Regime.MID, Regime.HIGH),
    ):
        lo = max(xb - c, m.a_star) + 1e-6
        out[name] = max(
            abs(regime_formula(m, left, x, xb) - regime_formula(m, right, x, xb))
            for x in np.linspace(lo, xb, n)
        )
    return out


def check_continuity(m: PriceModel) -> CheckResult:
    gaps = continuity_gaps(m)
    return _result("continuity across regimes", max(gaps.values()), 1e-8 * m.strike_K,
                   ", ".join(f"{k}={v:.1e}" for k, v in gaps.items()))


def xbar_kink(m: PriceModel, x: float | None = None, h: float = 1e-4) -> tuple[float, float]:
    """(jump in the x-bar derivative at log K + c, finite-difference noise floor)."""
    xb = m.log_K + m.drawdown_c
    x = m.log_K + 0.5 * m.drawdown_c if x is None else x

    def one_sided(tag, sign, step):
        f = [regime_formula(m, tag, x, xb + sign * k * step) for k in range(3)]
        return sign * (-3 * f[0] + 4 * f[1] - f[2]) / (2 * step)

    left, right = one_sided(Regime.MID, -1, h), one_sided(Regime.HIGH, 1, h)
    noise = max(abs(left - one_sided(Regime.MID, -1, h / 2)), abs(right - one_sided(Regime.HIGH, 1, h / 2)), 1e-12)
    return right - left, noise


def check_kink(m: PriceModel) -> CheckResult:
    jump, noise = xbar_kink(m)
    # pass when the jump is at least ten times the noise: metric = 10 noise / |jump|
    return _result("x-bar derivative jump", 10 * noise / max(abs(jump), 1e-300), 1.0,
                   f"jump={jump:.4e}, noise={noise:.1e}")


def check_high_monotone(m: PriceModel, n: int = 60) -> CheckResult:
    top = m.log_K + m.drawdown_c
    worst = 0.0
    for xb in (top + 0.01, top + 0.2, top + 0.5):
        xs = np.linspace(xb - m.drawdown_c + 1e-9, xb, n)
        v = np.array([value(m, x, xb) for x in xs])
        worst = max(worst, float(np.max(-np.diff(v), initial=0.0)))
    return _result("HIGH regime nondecreasing in x", worst, 1e-12 * m.strike_K, "on (xbar - c, xbar)")


def check_high_shape(m: PriceModel, n: int = 60) -> CheckResult:
    """Shape the HIGH regime must have: rising off the drawdown level, dV/dx = -rho V on the diagonal.

    On the diagonal V(xbar, xbar) is proportional to exp(-rho xbar), and the
    x-bar derivative vanishes there, so the x-derivative equals -rho V.
    """
    top, c, rho = m.log_K + m.drawdown_c, m.drawdown_c, m.params.rho
    drop, slope_err = 0.0, 0.0
    for xb in (top + 0.01, top + 0.2, top + 0.5):
        xs = np.linspace(xb - c + 1e-9, xb - 0.5 * c, n)
        v = np.array([value(m, x, xb) for x in xs])
        drop = max(drop, float(np.max(-np.diff(v), initial=0.0)))
        h = 1e-5
        f = [value(m, xb - k * h, xb) for k in range(3)]
        if f[0] > 0:
            slope = (3 * f[0] - 4 * f[1] + f[2]) / (2 * h)
            slope_err = max(slope_err, _rel(slope, -rho * f[0]))
    # both parts scaled to their own tolerance, pass when <= 1
    worst = max(drop / (1e-12 * m.strike_K), slope_err / 1e-6)
    return _result("HIGH regime shape", worst, 1.0, f"max drop={drop:.1e}, diagonal slope rel err={slope_err:.1e}")


def barrier_grid(r_values, sigma_values, lam_values, rho_values, K: float, c: float) -> np.ndarray:
    out = np.empty((len(r_values), len(sigma_values), len(lam_values), len(rho_values)))
    for i, r in enumerate(r_values):
        for j, s in enumerate(sigma_values):
            for k, lam in enumerate(lam_values):
                for l, rho in enumerate(rho_values):
                    out[i, j, k, l] = build_model(make_params(r, s, lam, rho), K, c).a_star
    return out


def check_sensitivities() -> list[CheckResult]:
    """Directions of a* in r, sigma (at base jumps) and in lam, rho (at base r, sigma)."""
    f = BASE_CASE
    K, c = f["K"], math.log(f["cap_ratio"])
    from .figures import GRIDS

    A = barrier_grid(GRIDS["r"], GRIDS["sigma"], [f["lam"]], [f["rho"]], K, c)[:, :, 0, 0]
    B = barrier_grid([f["r"]], [f["sigma"]], GRIDS["lam"], GRIDS["rho"], K, c)[0, 0]
    return [
        _result("a* increasing in r", int(np.sum(np.diff(A, axis=0) <= 0)), 0),
        _result("a* decreasing in sigma", int(np.sum(np.diff(A, axis=1) >= 0)), 0),
        _result("a* decreasing in lambda", int(np.sum(np.diff(B, axis=0) >= 0)), 0),
        _result("a* increasing in rho", int(np.sum(np.diff(B, axis=1) <= 0)), 0),
    ]


# --------------------------------------------------------------------------- #
# Monte Carlo
# --------------------------------------------------------------------------- #

def check_martingale_exponent(params: ModelParams) -> CheckResult:
    return _result("martingale drift Psi(1) = r", _rel(laplace_exponent(params, 1.0), params.r), 1e-12)


def check_martingale_mc(params: ModelParams, T: float = 1.0, n_paths: int = 100_000, dt: float = 1e-2,
                        seed: int = mc.DEFAULT_SEED) -> CheckResult:
    mean, se = mc.discounted_terminal_mean(params, 0.0, T, n_paths, dt, seed)
    return _result("martingale (MC)", abs(mean - 1.0) / se, 3.0, f"E[e^(-rT+X_T)]={mean:.5f} se={se:.1e}")


def mc_states(m: PriceModel) -> list[tuple[float, float]]:
    """Two states in each regime at the figure parameters."""
    a, c, lk = m.a_star, m.drawdown_c, m.log_K
    return [
        (a + 0.05, a + 0.10),
        (a + 0.15, a + 0.17),
        (math.log(90.0), lk),
        (lk, math.log(110.0)),
        (lk + 0.1, lk + c + 0.05),
        (math.log(125.0), math.log(130.0)),
    ]


@dataclass(frozen=True)
class McComparison:
    x: float
    xbar: float
    regime: Regime
    closed_form: float
    coarse: mc.McEstimate
    fine: mc.McEstimate

    @property
    def gap(self) -> float:
        return abs(self.coarse.mean - self.closed_form)

    @property
    def shift(self) -> float:
        return abs(self.fine.mean - self.coarse.mean)

    @property
    def combined_se(self) -> float:
        return math.hypot(self.coarse.std_err, self.fine.std_err)


def compare_mc(m: PriceModel, states, cfg: mc.McConfig) -> list[McComparison]:
    out = []
    fine_cfg = replace(cfg, dt=cfg.dt / 2)
    for x, xb in states:
        cs = ContractState(m.strike_K, m.drawdown_c, x, xb)
        out.append(McComparison(
            x, xb, regime(m, x, xb), value(m, x, xb),
            mc.estimate_price(m.params, cs, m.a_star, cfg),
            mc.estimate_price(m.params, cs, m.a_star, fine_cfg),
        ))
    return out


def check_mc(m: PriceModel, cfg: mc.McConfig, states=None) -> list[CheckResult]:
    rows = compare_mc(m, mc_states(m) if states is None else states, cfg)
    K = m.strike_K
    out = []
    for row in rows:
        lim = 3 * row.coarse.std_err + 0.005 * K
        out.append(_result(f"MC price {row.regime.value} ({math.exp(row.x):.1f},{math.exp(row.xbar):.1f})",
                           row.gap, lim, f"cf={row.closed_form:.4f} mc={row.coarse.mean:.4f}"))
        out.append(_result(f"MC dt/2 shift ({math.exp(row.x):.1f},{math.exp(row.xbar):.1f})",
                           row.shift, 3 * row.combined_se, f"fine={row.fine.mean:.4f}"))
    return out


# --------------------------------------------------------------------------- #

def run_suite(params: ModelParams, K: float, c: float, quick: bool = False,
              mc_cfg: mc.McConfig | None = None, n_random: int = 50) -> list[CheckResult]:
    """All checks for one parameter set; the MC comparison is skipped when ``quick``."""
    results = [check_martingale_exponent(params)]
    jumps = None if params.has_jumps else False
    sets = [(params, c)] + random_parameter_sets(n_random - 1, jumps=jumps)
    results.append(check_structure(sets))
    results.append(check_laplace(sets[:10]))
    m = build_model(params, K, c)
    results += check_barrier(m)
    results += [check_reflection(m), check_generator(m), check_dominance(m), check_continuity(m)]
    results += [check_kink(m), check_high_monotone(m), check_high_shape(m)]
    if not quick:
        results.append(check_martingale_mc(params, seed=(mc_cfg or mc.McConfig()).seed))
        if mc_cfg is not None:
            results += check_mc(m, mc_cfg)
    return results

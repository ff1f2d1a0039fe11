"""Closed-form price of the perpetual American put capped by the first drawdown.

The holder stops at ``tau_a = inf{t: X_t <= a}``; the contract dies at the
drawdown epoch ``tau_D = inf{t: Xbar_t - X_t >= c}`` paying (K - S)^+.  Pricing
splits the domain x <= xbar into four regimes:

* STOP: x <= a or xbar - x >= c, value is the payoff;
* LOW:  xbar < a + c, V1 + V2 (V3 + V4 (V5 + V6 V7));
* MID:  a + c <= xbar < log K + c, V10 + V11 (V12 + V13 V7);
* HIGH: xbar >= log K + c, V14 + V15 V16.

``V8 = Delta + Gamma`` and ``V9 = exp(eta (a - log K)) V8`` only enter through
the identity V6 = V9 / V8.
"""

from __future__ import annotations

import dataclasses
import enum
import math
from dataclasses import dataclass

import numpy as np
from scipy import optimize

from .model import DomainError, ModelParams
from .scale import (
    DrawdownConstants,
    ScaleBasis,
    build_basis,
    drawdown_constants,
    dual_basis,
    tilt_constants,
    w,
    w_prime,
    z,
)

MAX_DOUBLINGS = 60
_EDGE = 1e-12


class BarrierNotFoundError(RuntimeError):
    """The barrier equation showed no sign change; indicates a broken basis."""


class Regime(str, enum.Enum):
    STOP = "STOP"
    LOW = "LOW"
    MID = "MID"
    HIGH = "HIGH"


@dataclass(frozen=True)
class PriceModel:
    params: ModelParams
    strike_K: float
    drawdown_c: float
    basis_Q: ScaleBasis
    basis_P: ScaleBasis
    constants_Q: DrawdownConstants
    constants_P: DrawdownConstants
    a_star: float = math.nan

    @property
    def log_K(self) -> float:
        return math.log(self.strike_K)

    @property
    def solved(self) -> bool:
        return not math.isnan(self.a_star)

    # shorthands used throughout the block formulas
    @property
    def _eta(self) -> float:
        return self.constants_Q.eta

    @property
    def _eta_m1(self) -> float:
        return self.constants_Q.eta_m1

    @property
    def _dg(self) -> tuple[float, float]:
        return self.constants_Q.delta, self.constants_Q.gamma_const


def build_model(params: ModelParams, strike_K: float, drawdown_c: float, solve: bool = True) -> PriceModel:
    """Assemble bases and drawdown constants, then (by default) solve for a*."""
    if not strike_K > 0:
        raise DomainError(f"strike must be positive, got {strike_K}")
    if not drawdown_c > 0:
        raise DomainError(f"drawdown threshold must be positive, got {drawdown_c}")
    bq = build_basis(params)
    cq = drawdown_constants(bq, drawdown_c)
    model = PriceModel(
        params,
        float(strike_K),
        float(drawdown_c),
        bq,
        dual_basis(bq),
        cq,
        tilt_constants(cq, params.rho),
    )
    if solve:
        model = dataclasses.replace(model, a_star=solve_barrier(model))
    return model


def _a(model: PriceModel, a: float | None) -> float:
    if a is None:
        if not model.solved:
            raise DomainError("model has no solved barrier; pass `a` explicitly")
        return model.a_star
    return float(a)


# --------------------------------------------------------------------------- #
# Blocks
# --------------------------------------------------------------------------- #

def v1(m: PriceModel, x, xbar, a):
    b, K = m.basis_Q, m.strike_K
    ratio = w(b, x - a) / w(b, xbar - a)
    return K * (z(b, x - a) - z(b, xbar - a) * ratio) - (math.exp(x) - math.exp(xbar) * ratio)


def v2(m: PriceModel, x, xbar, a):
    return w(m.basis_Q, x - a) / w(m.basis_Q, xbar - a)


def v3(m: PriceModel, xbar, a):
    b, K, c = m.basis_Q, m.strike_K, m.drawdown_c
    ratio = w(b, xbar - a) / w(b, c)
    return K * (z(b, xbar - a) - z(b, c) * ratio) - (math.exp(xbar) - math.exp(a + c) * ratio)


def v4(m: PriceModel, xbar, a):
    return w(m.basis_Q, xbar - a) / w(m.basis_Q, m.drawdown_c)


def v5(m: PriceModel, a):
    K, eta, em1, rho = m.strike_K, m._eta, m._eta_m1, m.params.rho
    d, g = m._dg
    e = math.exp(eta * (a - m.log_K))
    return (
        K * e * (d + g * (rho + 1 - eta) / (rho + 1)) / em1
        - math.exp(a) * eta / em1 * (d + rho / (rho + 1) * g)
        + K * (d + g)
    )


def v6(m: PriceModel, a):
    return math.exp(m._eta * (a - m.log_K))


def v7(m: PriceModel):
    if not m.params.has_jumps:
        return 0.0
    eta, rho = m._eta, m.params.rho
    return m.strike_K * eta * m.constants_Q.gamma_const / ((eta + rho) * (rho + 1))


def v8(m: PriceModel):
    d, g = m._dg
    return d + g


def v9(m: PriceModel, a):
    return math.exp(m._eta * (a - m.log_K)) * v8(m)


def _shifted(m: PriceModel, x, xbar):
    return x + m.drawdown_c - xbar


def v10(m: PriceModel, x, xbar):
    b, K, c = m.basis_Q, m.strike_K, m.drawdown_c
    ratio = w(b, _shifted(m, x, xbar)) / w(b, c)
    return K * (z(b, _shifted(m, x, xbar)) - z(b, c) * ratio) - (math.exp(x) - math.exp(xbar) * ratio)


def v11(m: PriceModel, x, xbar):
    return w(m.basis_Q, _shifted(m, x, xbar)) / w(m.basis_Q, m.drawdown_c)


def v12(m: PriceModel, xbar):
    K, eta, em1, rho, c = m.strike_K, m._eta, m._eta_m1, m.params.rho, m.drawdown_c
    d, g = m._dg
    e = math.exp(-(m.log_K + c - xbar) * eta)
    return K * (1 + e / em1) * (d + g) - eta / em1 * (
        math.exp(xbar - c) * d + g / (rho + 1) * (rho * math.exp(xbar - c) + K * e)
    )


def v13(m: PriceModel, xbar):
    return math.exp(-m._eta * (m.log_K + m.drawdown_c - xbar))


def _exp_diff_ratio(g: np.ndarray, rho: float, t: float) -> np.ndarray:
    """(exp(g t) - exp(-rho t)) / (g + rho), stable near g = -rho."""
    return math.exp(-rho * t) * np.expm1((g + rho) * t) / (g + rho)


def v14(m: PriceModel, x, xbar):
    p = m.params
    if not p.has_jumps:
        return 0.0
    b, K, c, rho = m.basis_Q, m.strike_K, m.drawdown_c, p.rho
    g, C = b.g, b.C
    xs = _shifted(m, x, xbar)
    ratio = w(b, xs) / w(b, c)
    terms = C * (ratio * _exp_diff_ratio(g, rho, c) - _exp_diff_ratio(g, rho, xs))
    return K / (rho + 1) * p.lam * math.exp(rho * (m.log_K + c - xbar)) * float(np.sum(terms))


def v15(m: PriceModel, x, xbar):
    return w(m.basis_Q, _shifted(m, x, xbar)) / w(m.basis_Q, m.drawdown_c)


def v16(m: PriceModel, xbar):
    if not m.params.has_jumps:
        return 0.0
    eta, rho = m._eta, m.params.rho
    return (
        m.strike_K / (rho + 1) * eta * m.constants_Q.gamma_const / (eta + rho)
        * math.exp(rho * (m.log_K + m.drawdown_c - xbar))
    )


def _check(cond: bool, block: int, what: str):
    if not cond:
        raise DomainError(f"V{block}: arguments outside its regime ({what})")


def v_block(model: PriceModel, block: int, x: float | None = None, xbar: float | None = None,
            a: float | None = None) -> float:
    """Evaluate one named building block of the value function.

    Blocks taking ``x`` need ``xbar`` too; ``a`` defaults to the solved barrier.
    Arguments outside the regime a block belongs to raise :class:`DomainError`.
    """
    m = model
    a = _a(m, a)
    c, top = m.drawdown_c, m.log_K + m.drawdown_c
    lo, hi = -_EDGE, _EDGE
    if block in (1, 2):
        _check(xbar is not None and x is not None, block, "needs x and xbar")
        _check(a + lo <= x <= xbar + hi and a < xbar <= a + c + hi, block, "a <= x <= xbar <= a + c")
        return float((v1 if block == 1 else v2)(m, x, xbar, a))
    if block in (3, 4):
        _check(xbar is not None, block, "needs xbar")
        _check(a < xbar <= a + c + hi, block, "a < xbar <= a + c")
        return float((v3 if block == 3 else v4)(m, xbar, a))
    if block == 5:
        return v5(m, a)
    if block == 6:
        return v6(m, a)
    if block == 7:
        return v7(m)
    if block == 8:
        return v8(m)
    if block == 9:
        return v9(m, a)
    if block in (10, 11):
        _check(xbar is not None and x is not None, block, "needs x and xbar")
        _check(a + c + lo <= xbar <= top + hi and xbar - c + lo <= x <= xbar + hi, block,
               "a + c <= xbar <= log K + c, xbar - c <= x <= xbar")
        return float((v10 if block == 10 else v11)(m, x, xbar))
    if block in (12, 13):
        _check(xbar is not None, block, "needs xbar")
        _check(a + c + lo <= xbar <= top + hi, block, "a + c <= xbar <= log K + c")
        return float((v12 if block == 12 else v13)(m, xbar))
    if block in (14, 15):
        _check(xbar is not None and x is not None, block, "needs x and xbar")
        _check(xbar >= top + lo and xbar - c + lo <= x <= xbar + hi, block,
               "xbar >= log K + c, xbar - c <= x <= xbar")
        return float((v14 if block == 14 else v15)(m, x, xbar))
    if block == 16:
        _check(xbar is not None, block, "needs xbar")
        _check(xbar >= top + lo, block, "xbar >= log K + c")
        return v16(m, xbar)
    raise DomainError(f"unknown block id {block}")


# --------------------------------------------------------------------------- #
# Barrier
# --------------------------------------------------------------------------- #

def barrier_residual(model: PriceModel, a: float) -> float:
    """Smooth-fit residual G(a) in simplified closed form.

    G(a) = e^{a+c} - rK W(c)^2/W'(c) - eta e^a/(eta-1) (Delta + rho Gamma/(rho+1))
           + K e^{eta(a - log K)} [(Delta + rho Gamma/(rho+1))/(eta-1) - rho Gamma/((eta+rho)(rho+1))]

    Its root is the optimal log-barrier; G(-inf) < 0 < G(log K).
    """
    m = model
    b, K, c, r, rho = m.basis_Q, m.strike_K, m.drawdown_c, m.params.r, m.params.rho
    eta, em1 = m._eta, m._eta_m1
    d, g = m._dg
    mix = d + rho * g / (rho + 1)
    e = math.exp(eta * (a - m.log_K))
    jump_fix = rho * g / ((eta + rho) * (rho + 1)) if m.params.has_jumps else 0.0
    return (
        math.exp(a + c)
        - r * K * w(b, c) ** 2 / w_prime(b, c)
        - eta * math.exp(a) / em1 * mix
        + K * e * (mix / em1 - jump_fix)
    )


def barrier_residual_blocks(model: PriceModel, a: float) -> float:
    """Same residual assembled from the blocks: e^{a+c} - K Z(c) + V5 + V6 V7."""
    m = model
    return math.exp(a + m.drawdown_c) - m.strike_K * z(m.basis_Q, m.drawdown_c) + v5(m, a) + v6(m, a) * v7(m)


def solve_barrier(model: PriceModel, tol: float = 1e-12) -> float:
    """Root of :func:`barrier_residual` below log K, by bracketed bisection."""
    K, hi = model.strike_K, model.log_K
    g_hi = barrier_residual(model, hi)
    if not g_hi > 0:
        raise BarrierNotFoundError(f"residual at log K is not positive ({g_hi})")
    width = 1.0
    lo = hi - width
    for _ in range(MAX_DOUBLINGS):
        if barrier_residual(model, lo) < 0:
            break
        width *= 2
        lo = hi - width
    else:
        raise BarrierNotFoundError("no sign change after expanding the bracket")
    root = optimize.bisect(lambda a: barrier_residual(model, a), lo, hi, xtol=1e-15, rtol=4 * np.finfo(float).eps,
                           maxiter=400)
    if abs(barrier_residual(model, root)) > tol * K:
        raise BarrierNotFoundError(f"bisection stalled with residual {barrier_residual(model, root)}")
    return root


# --------------------------------------------------------------------------- #
# Value
# --------------------------------------------------------------------------- #

def regime(model: PriceModel, x: float, xbar: float, a: float | None = None) -> Regime:
    a = _a(model, a)
    if x > xbar:
        raise DomainError(f"x={x} exceeds running maximum xbar={xbar}")
    c = model.drawdown_c
    if x <= a or xbar - x >= c:
        return Regime.STOP
    if xbar < a + c:
        return Regime.LOW
    if xbar < model.log_K + c:
        return Regime.MID
    return Regime.HIGH


def regime_formula(model: PriceModel, tag: Regime, x: float, xbar: float, a: float | None = None) -> float:
    """Evaluate the closed form of regime ``tag`` without checking that (x, xbar) lies in it.

    Used to compare neighbouring formulas on a shared boundary.
    """
    m = model
    a = _a(m, a)
    if tag is Regime.STOP:
        return max(m.strike_K - math.exp(x), 0.0)
    if tag is Regime.LOW:
        tail = v5(m, a) + v6(m, a) * v7(m)
        return float(v1(m, x, xbar, a) + v2(m, x, xbar, a) * (v3(m, xbar, a) + v4(m, xbar, a) * tail))
    if tag is Regime.MID:
        return float(v10(m, x, xbar) + v11(m, x, xbar) * (v12(m, xbar) + v13(m, xbar) * v7(m)))
    return float(v14(m, x, xbar) + v15(m, x, xbar) * v16(m, xbar))


def value(model: PriceModel, x: float, xbar: float, a: float | None = None) -> float:
    """Price V_a(x, xbar) of the capped put for the stop-at-barrier rule ``a`` (default a*)."""
    a = _a(model, a)
    return regime_formula(model, regime(model, x, xbar, a), x, xbar, a)


def continuation_projection(model: PriceModel, x: float, xbar: float) -> float:
    """LOW-regime formula evaluated with analytically continued scale functions.

    Below a* this extends the continuation value into the stopping region; it
    touches the payoff tangentially at a*.
    """
    m, a = model, _a(model, None)
    b, K = m.basis_Q, m.strike_K
    wx = w(b, x - a, continuation=True)
    wxb = w(b, xbar - a)
    ratio = wx / wxb
    V1 = K * (z(b, x - a, continuation=True) - z(b, xbar - a) * ratio) - (math.exp(x) - math.exp(xbar) * ratio)
    tail = v5(m, a) + v6(m, a) * v7(m)
    return float(V1 + ratio * (v3(m, xbar, a) + v4(m, xbar, a) * tail))


def exercise_boundary(model: PriceModel, xbar: float) -> float | None:
    """Log-price below which the holder exercises, or None when only tau_D can stop."""
    a = _a(model, None)
    if xbar < a + model.drawdown_c:
        return a
    if xbar < model.log_K + model.drawdown_c:
        return xbar - model.drawdown_c
    return None

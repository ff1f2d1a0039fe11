import dataclasses
import math

import numpy as np
import pytest
from scipy import integrate, optimize

from drawdown_put.model import DomainError
from drawdown_put.pricer import (
    BarrierNotFoundError,
    Regime,
    barrier_residual,
    barrier_residual_blocks,
    build_model,
    continuation_projection,
    exercise_boundary,
    regime,
    regime_formula,
    solve_barrier,
    v_block,
    value,
)
from drawdown_put.scale import w, w_prime, z
from drawdown_put.verify import paste_slope

A_STAR = 4.413560771708001  # figure parameters, frozen after the paste and MC checks
A_STAR_BS = 4.458412889065814  # same with lam = 0


def test_barrier_regression(fig_model, bs_model):
    assert fig_model.a_star == pytest.approx(A_STAR, abs=1e-11)
    assert bs_model.a_star == pytest.approx(A_STAR_BS, abs=1e-11)
    assert abs(barrier_residual(fig_model, fig_model.a_star)) <= 1e-12 * fig_model.strike_K


def test_barrier_residual_signs(fig_model):
    assert barrier_residual(fig_model, fig_model.log_K) > 0
    assert barrier_residual(fig_model, fig_model.log_K - 5) < 0


@pytest.mark.parametrize("a", [3.0, 4.0, 4.4, 4.6])
def test_two_residual_forms_agree(fig_model, bs_model, a):
    for m in (fig_model, bs_model):
        assert barrier_residual(m, a) == pytest.approx(barrier_residual_blocks(m, a), abs=1e-11 * m.strike_K)


def test_residual_at_strike(fig_model):
    m = fig_model
    eta, rho, g = m.constants_Q.eta, m.params.rho, m.constants_Q.gamma_const
    want = m.strike_K * (math.exp(m.drawdown_c) - z(m.basis_Q, m.drawdown_c) + eta * g / ((eta + rho) * (rho + 1)))
    assert barrier_residual(m, m.log_K) == pytest.approx(want, rel=1e-12)


def _printed_residual(m, a):
    """Barrier equation without the jump correction term."""
    b, K, c, r = m.basis_Q, m.strike_K, m.drawdown_c, m.params.r
    q = m.constants_Q
    mix = q.delta + m.params.rho * q.gamma_const / (m.params.rho + 1)
    return (math.exp(a + c) - r * K * w(b, c) ** 2 / w_prime(b, c) - q.eta * math.exp(a) / (q.eta - 1) * mix
            + K * math.exp(q.eta * (a - m.log_K)) / (q.eta - 1) * mix)


def test_barrier_without_jump_term_breaks_smooth_paste(fig_model):
    m = fig_model
    a_bad = optimize.brentq(lambda a: _printed_residual(m, a), m.log_K - 1, m.log_K, xtol=1e-14)
    assert abs(math.exp(a_bad) - math.exp(m.a_star)) > 0.5
    bad = dataclasses.replace(m, a_star=a_bad)
    assert abs(paste_slope(bad) / -math.exp(a_bad) - 1) > 1e-3
    assert abs(paste_slope(m) / -math.exp(m.a_star) - 1) < 1e-6


def test_without_jumps_printed_and_corrected_forms_coincide(bs_model):
    for a in (4.0, 4.4):
        assert _printed_residual(bs_model, a) == pytest.approx(barrier_residual(bs_model, a), abs=1e-10)


def test_solver_reports_missing_sign_change(fig_model):
    broken = dataclasses.replace(fig_model, constants_Q=dataclasses.replace(fig_model.constants_Q, gamma_const=1e3))
    with pytest.raises(BarrierNotFoundError):
        solve_barrier(broken)


def test_model_input_validation(fig_params):
    with pytest.raises(DomainError):
        build_model(fig_params, -1.0, 0.2)
    with pytest.raises(DomainError):
        build_model(fig_params, 100.0, 0.0)
    unsolved = build_model(fig_params, 100.0, 0.2, solve=False)
    assert not unsolved.solved
    with pytest.raises(DomainError):
        value(unsolved, 4.5, 4.6)


# --------------------------------------------------------------------------- #
# blocks

def _low(m):
    a, c = m.a_star, m.drawdown_c
    return a + 0.3 * c, a + 0.6 * c


def _mid(m):
    xb = 0.5 * (m.a_star + m.log_K) + m.drawdown_c
    return xb - 0.4 * m.drawdown_c, xb


def _high(m):
    xb = m.log_K + m.drawdown_c + 0.2
    return xb - 0.4 * m.drawdown_c, xb


def test_block_ranges(fig_model):
    m = fig_model
    x, xb = _low(m)
    blocks = {k: v_block(m, k, x, xb) for k in (1, 2)}
    blocks |= {k: v_block(m, k, xbar=xb) for k in (3, 4)}
    blocks |= {k: v_block(m, k) for k in (5, 6, 7, 8, 9)}
    x, xb = _mid(m)
    blocks |= {k: v_block(m, k, x, xb) for k in (10, 11)}
    blocks |= {k: v_block(m, k, xbar=xb) for k in (12, 13)}
    x, xb = _high(m)
    blocks |= {k: v_block(m, k, x, xb) for k in (14, 15)}
    blocks[16] = v_block(m, 16, xbar=xb)
    for k, v in blocks.items():
        assert v >= 0, k
    for k in (2, 4, 6, 11, 13, 15):
        assert 0 <= blocks[k] <= 1, k
    assert blocks[6] == pytest.approx(blocks[9] / blocks[8], rel=1e-14)


def test_v7_closed_form(fig_model, bs_model):
    m = fig_model
    q, rho = m.constants_Q, m.params.rho
    assert v_block(m, 7) == pytest.approx(m.strike_K * q.eta * q.gamma_const / ((q.eta + rho) * (rho + 1)))
    assert v_block(bs_model, 7) == 0.0
    assert bs_model.constants_Q.gamma_const == 0.0


def test_v8_is_drawdown_transform(fig_model):
    from drawdown_put.scale import creeping_plus_jump

    assert v_block(fig_model, 8) == pytest.approx(creeping_plus_jump(fig_model.basis_Q, fig_model.drawdown_c))


def test_block_domain_checks(fig_model):
    m = fig_model
    x, xb = _high(m)
    with pytest.raises(DomainError):
        v_block(m, 1, x, xb)
    with pytest.raises(DomainError):
        v_block(m, 12, xbar=xb + 1)
    with pytest.raises(DomainError):
        v_block(m, 14, *_low(m))
    with pytest.raises(DomainError):
        v_block(m, 3)
    with pytest.raises(DomainError):
        v_block(m, 17)


@pytest.mark.parametrize("frac", [0.2, 0.5, 0.9])
@pytest.mark.parametrize("extra", [0.01, 0.3])
def test_v14_against_gerber_shiu_quadrature(fig_model, frac, extra):
    """Payoff of a jump out of [xbar - c, xbar) integrated against the discounted resolvent and jump law."""
    m = fig_model
    b, K, c, lam, rho = m.basis_Q, m.strike_K, m.drawdown_c, m.params.lam, m.params.rho
    xb = m.log_K + c + extra
    u = frac * c
    floor = xb - c
    resolvent = lambda y: w(b, u) * w(b, c - y) / w(b, c) - w(b, u - y)

    def integrand(s, y):
        land = floor + y - s
        return resolvent(y) * lam * rho * math.exp(-rho * s) * max(K - math.exp(land), 0.0)

    d = floor - m.log_K
    val = 0.0
    for lo, hi in ((0.0, u), (u, c)):
        val += integrate.dblquad(integrand, lo, hi, lambda y: y + d, lambda y: np.inf, epsabs=1e-12, epsrel=1e-10)[0]
    assert v_block(m, 14, floor + u, xb) == pytest.approx(val, rel=1e-6)


# --------------------------------------------------------------------------- #
# value

def test_regimes(fig_model):
    m = fig_model
    assert regime(m, m.a_star - 0.01, m.a_star + 0.01) is Regime.STOP
    assert regime(m, 4.7, 4.7 + m.drawdown_c) is Regime.STOP
    assert regime(m, *_low(m)) is Regime.LOW
    assert regime(m, *_mid(m)) is Regime.MID
    assert regime(m, *_high(m)) is Regime.HIGH
    assert regime(m, m.log_K + m.drawdown_c - 0.01, m.log_K + m.drawdown_c) is Regime.HIGH
    with pytest.raises(DomainError):
        regime(m, 5.0, 4.0)


def test_stop_region_pays_payoff(fig_model):
    m = fig_model
    assert value(m, math.log(80), math.log(90)) == pytest.approx(20.0)
    assert value(m, m.a_star, m.a_star + 0.1) == pytest.approx(100 - math.exp(m.a_star))
    assert value(m, math.log(110), math.log(140)) == 0.0


def test_value_bounds_and_dominance(fig_model):
    m = fig_model
    for xb in np.linspace(m.a_star - 0.1, m.log_K + 0.5, 15):
        for x in np.linspace(xb - 1.2 * m.drawdown_c, xb, 15):
            v = value(m, x, xb)
            assert 0 <= v <= m.strike_K
            assert v >= max(m.strike_K - math.exp(x), 0) - 1e-10


def test_value_at_explicit_barrier(fig_model):
    m = fig_model
    x, xb = _low(m)
    assert value(m, x, xb, a=m.a_star) == value(m, x, xb)
    # a lower (suboptimal) barrier gives a smaller price
    assert value(m, x, xb, a=m.a_star - 0.1) < value(m, x, xb)


def test_exercise_boundary(fig_model):
    m = fig_model
    assert exercise_boundary(m, m.a_star + 0.05) == m.a_star
    xb = _mid(m)[1]
    assert exercise_boundary(m, xb) == pytest.approx(xb - m.drawdown_c)
    assert exercise_boundary(m, m.log_K + m.drawdown_c + 1) is None


def test_projection_touches_payoff_at_barrier(fig_model):
    m = fig_model
    xb = m.a_star + 0.75 * m.drawdown_c
    a = m.a_star
    assert continuation_projection(m, a, xb) == pytest.approx(m.strike_K - math.exp(a), abs=1e-9)
    x = a + 0.02
    assert continuation_projection(m, x, xb) == pytest.approx(value(m, x, xb), rel=1e-12)
    # tangency: the gap to the payoff shrinks quadratically on both sides
    gap = lambda h: continuation_projection(m, a + h, xb) - (m.strike_K - math.exp(a + h))
    for h in (1e-3, -1e-3):
        assert 3.5 < gap(h) / gap(h / 2) < 4.5


def test_continuity_across_regime_boundaries(fig_model):
    m = fig_model
    c = m.drawdown_c
    for xb, left, right in ((m.a_star + c, Regime.LOW, Regime.MID), (m.log_K + c, Regime.MID, Regime.HIGH)):
        for x in np.linspace(xb - c + 1e-6, xb, 7):
            if x <= m.a_star:
                continue
            assert regime_formula(m, left, x, xb) == pytest.approx(regime_formula(m, right, x, xb), abs=1e-8 * m.strike_K)


def test_high_regime_shape(fig_model):
    """Rises off the drawdown level; on the diagonal dV/dx = -rho V because V(xbar, xbar) ~ exp(-rho xbar)."""
    m = fig_model
    xb = m.log_K + m.drawdown_c + 0.2
    xs = np.linspace(xb - m.drawdown_c + 1e-9, xb - 0.5 * m.drawdown_c, 30)
    assert np.all(np.diff([value(m, x, xb) for x in xs]) > 0)
    diag = lambda t: value(m, t, t)
    assert diag(xb + 0.1) / diag(xb) == pytest.approx(math.exp(-m.params.rho * 0.1), rel=1e-10)
    h = 1e-5
    slope = (3 * value(m, xb, xb) - 4 * value(m, xb - h, xb) + value(m, xb - 2 * h, xb)) / (2 * h)
    assert slope == pytest.approx(-m.params.rho * value(m, xb, xb), rel=1e-6)


def test_high_regime_vanishes_without_jumps(bs_model):
    m = bs_model
    xb = m.log_K + m.drawdown_c + 0.1
    assert value(m, xb - 0.05, xb) == 0.0

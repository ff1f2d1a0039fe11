"""Scale functions W^(r), Z^(r) as exponential sums, and drawdown constants.

For the jump model 1/(Psi(beta) - r) is a rational function with three simple
poles gamma_1 = 1 > gamma_3 > -rho > gamma_2, so

    W(x) = sum_i C_i exp(gamma_i x),    Z(x) = sum_i (r C_i / gamma_i) exp(gamma_i x)

for x >= 0, with W = 0 and Z = 1 on the negative half-line.  Without jumps
the same holds with two terms.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass

import numpy as np

from .model import (
    DomainError,
    DualParams,
    ModelParams,
    dual_params,
    laplace_exponent,
    laplace_exponent_prime,
)

ROOT_SEPARATION = 1e-9
# exp(t) underflows to 0.0 below this
_EXP_UNDERFLOW = -745.0


class DegenerateRootsError(DomainError):
    """Two exponents of the scale basis (nearly) coincide."""


class Measure(str, enum.Enum):
    Q = "Q"  # pricing measure
    P = "P"  # measure tilted by exp(X_t - r t)


@dataclass(frozen=True)
class ScaleBasis:
    gammas: tuple[float, ...]
    coeffs: tuple[float, ...]
    r_used: float
    measure_tag: Measure
    params: ModelParams | DualParams

    @property
    def g(self) -> np.ndarray:
        return np.asarray(self.gammas)

    @property
    def C(self) -> np.ndarray:
        return np.asarray(self.coeffs)


@dataclass(frozen=True)
class DrawdownConstants:
    eta: float
    delta: float
    gamma_const: float
    c_used: float
    measure_tag: Measure
    underflow: bool = False
    # eta - 1 without the cancellation of W'(c) - W(c); nan when not computed
    eta_minus_one: float = math.nan

    @property
    def eta_m1(self) -> float:
        return self.eta - 1.0 if math.isnan(self.eta_minus_one) else self.eta_minus_one


def _quadratic_roots(a: float, b: float, c: float) -> tuple[float, float]:
    disc = b * b - 4 * a * c
    q = -0.5 * (b + math.copysign(math.sqrt(disc), b))
    return q / a, c / q


def _polish(p: ModelParams, g: float) -> float:
    """One Newton step on Psi(g) - r, kept only if it reduces the residual."""
    try:
        f = laplace_exponent(p, g) - p.r
        g_new = g - f / laplace_exponent_prime(p, g)
        if math.isfinite(g_new) and abs(laplace_exponent(p, g_new) - p.r) < abs(f):
            return g_new
    except (DomainError, ZeroDivisionError):
        pass
    return g


def build_basis(params: ModelParams) -> ScaleBasis:
    """Exponents and coefficients of W^(r) under the pricing measure."""
    p = params
    if not p.sigma > 0:
        raise DomainError("scale basis requires sigma > 0")
    s2 = p.sigma**2
    r, lam, rho = p.r, p.lam, p.rho

    if lam > 0:
        omega = lam**2 + lam * (rho + 1) * (2 * r + rho * s2) + (rho + 1) ** 2 * (r - 0.5 * rho * s2) ** 2
        b = 2 * lam + 2 * r + rho**2 * s2 + rho * s2 + 2 * r * rho
        g_far = -(b + 2 * math.sqrt(omega)) / (2 * (rho + 1) * s2)
        # the other root by Vieta (product of all three roots is 2 r rho / sigma^2);
        # the "minus" branch of the closed form cancels badly when omega is large
        g_near = 2 * r * rho / (s2 * g_far)
        roots = [1.0] + [_polish(p, g) for g in (g_near, g_far)]
    else:
        # sigma^2/2 t^2 + mu t - r = 0, one root is exactly 1
        g1, g2 = _quadratic_roots(0.5 * s2, p.mu, -r)
        roots = [1.0, min(g1, g2)]

    roots.sort(reverse=True)
    for i in range(len(roots)):
        for j in range(i + 1, len(roots)):
            if abs(roots[i] - roots[j]) < ROOT_SEPARATION:
                raise DegenerateRootsError(
                    f"scale exponents {roots[i]!r} and {roots[j]!r} nearly coincide"
                )

    if lam > 0:
        coeffs = []
        for i, gi in enumerate(roots):
            den = s2
            for j, gj in enumerate(roots):
                if j != i:
                    den *= gi - gj
            coeffs.append(2 * (gi + rho) / den)
    else:
        coeffs = [1.0 / laplace_exponent_prime(p, g) for g in roots]

    return ScaleBasis(tuple(roots), tuple(coeffs), r, Measure.Q, p)


def dual_basis(basis: ScaleBasis) -> ScaleBasis:
    """Basis of W^P(x) = exp(-x) W^(r)(x), the 0-scale function under P."""
    if basis.measure_tag is not Measure.Q:
        raise DomainError("dual_basis expects a pricing-measure basis")
    gammas = tuple(g - 1.0 for g in basis.gammas)
    return ScaleBasis(gammas, basis.coeffs, 0.0, Measure.P, dual_params(basis.params))


def _terms(basis: ScaleBasis, x, power: int):
    x = np.asarray(x, dtype=float)
    g, C = basis.g, basis.C
    e = np.exp(np.multiply.outer(x, g))
    return np.sum(C * g**power * e, axis=-1), x


def _sum(basis: ScaleBasis, x, power: int, continuation: bool):
    val, xa = _terms(basis, x, power)
    if not continuation:
        val = np.where(xa < 0, 0.0, val)
    return val if val.ndim else float(val)


def w(basis: ScaleBasis, x, continuation: bool = False):
    """W(x); zero on x < 0 unless ``continuation`` asks for the analytic extension."""
    return _sum(basis, x, 0, continuation)


def w_prime(basis: ScaleBasis, x, continuation: bool = False):
    """W'(x), right limit at 0."""
    return _sum(basis, x, 1, continuation)


def w_second(basis: ScaleBasis, x, continuation: bool = False):
    return _sum(basis, x, 2, continuation)


def z(basis: ScaleBasis, x, continuation: bool = False):
    """Z(x) = 1 + r int_0^x W; equal to 1 on x <= 0."""
    xa = np.asarray(x, dtype=float)
    if basis.r_used == 0:
        val = np.ones_like(xa)
    else:
        g, C = basis.g, basis.C
        val = np.sum(basis.r_used * C / g * np.exp(np.multiply.outer(xa, g)), axis=-1)
        if not continuation:
            val = np.where(xa <= 0, 1.0, val)
    return val if val.ndim else float(val)


def z_prime(basis: ScaleBasis, x, continuation: bool = False):
    out = basis.r_used * np.asarray(w(basis, x, continuation))
    return out if out.ndim else float(out)


def laplace_transform_w(basis: ScaleBasis, beta: float) -> float:
    """Closed-form int_0^inf exp(-beta x) W(x) dx, valid for beta > gamma_1."""
    return float(np.sum(basis.C / (beta - basis.g)))


def _pair_sum(basis: ScaleBasis, c: float, weight) -> float:
    """sum_{i<j} C_i C_j weight(g_i, g_j) exp((g_i + g_j) c)."""
    g, C = basis.gammas, basis.coeffs
    out = 0.0
    for i in range(len(g)):
        for j in range(i + 1, len(g)):
            out += C[i] * C[j] * weight(g[i], g[j]) * math.exp((g[i] + g[j]) * c)
    return out


def drawdown_constants(basis: ScaleBasis, c: float) -> DrawdownConstants:
    """(eta, Delta, Gamma) for threshold ``c`` computed from ``basis`` directly.

    W'^2 - W W'' and the Gamma sum are written as sums over pairs of
    exponents; the naive forms cancel badly once exp(g_2 c) is negligible
    against exp(g_1 c).
    """
    if not c > 0:
        raise DomainError(f"drawdown threshold must be positive, got {c}")
    p = basis.params
    g, C = basis.g, basis.C
    W, W1 = w(basis, c), w_prime(basis, c)
    eta = W1 / W
    eta_m1 = float(np.sum(C * (g - 1.0) * np.exp(g * c))) / W
    delta = -0.5 * p.sigma**2 * _pair_sum(basis, c, lambda a, b: (a - b) ** 2) / W1
    if p.lam > 0:
        rho = p.rho
        gamma_const = -p.lam * _pair_sum(basis, c, lambda a, b: (a - b) ** 2 / ((a + rho) * (b + rho))) / W1
    else:
        gamma_const = 0.0
    underflow = bool(np.any(g * c < _EXP_UNDERFLOW))
    return DrawdownConstants(eta, delta, gamma_const, c, basis.measure_tag, underflow, eta_m1)


def tilt_constants(consts: DrawdownConstants, rho: float) -> DrawdownConstants:
    """P-measure constants from Q-measure ones via the closed relations."""
    if consts.measure_tag is not Measure.Q:
        raise DomainError("tilt_constants expects pricing-measure constants")
    eta, c = consts.eta, consts.c_used
    ratio = eta / consts.eta_m1
    return DrawdownConstants(
        consts.eta_m1,
        ratio * math.exp(-c) * consts.delta,
        rho * math.exp(-c) / (rho + 1.0) * ratio * consts.gamma_const,
        c,
        Measure.P,
        consts.underflow,
    )


def creeping_plus_jump(basis: ScaleBasis, c: float) -> float:
    """Z(c) - r W(c)^2 / W'(c): the Laplace transform of the drawdown time from the maximum.

    Evaluated as (Z W' - r W^2) / W' with the numerator summed over pairs.
    """
    r = basis.r_used
    if r == 0:
        return 1.0
    num = r * _pair_sum(basis, c, lambda a, b: (a - b) ** 2 / (a * b))
    return num / w_prime(basis, c)

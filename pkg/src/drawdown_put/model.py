"""Risk-neutral Lévy market model with downward exponential jumps.

The log-price follows

    X_t = x + mu t + sigma B_t - sum_{k <= N_t} U_k,

with N a Poisson process of intensity ``lam`` and U_k ~ Exp(rho).  The drift
is never an input: it is fixed by requiring ``exp(X_t - r t)`` to be a
martingale, i.e. ``laplace_exponent(params, 1) == r``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass


class DomainError(ValueError):
    """Raised for inputs outside the domain of an operation."""


@dataclass(frozen=True)
class ModelParams:
    r: float
    sigma: float
    lam: float
    rho: float
    mu: float

    @property
    def has_jumps(self) -> bool:
        return self.lam > 0.0


@dataclass(frozen=True)
class ContractState:
    """Strike, log drawdown threshold and the current (log-price, log-max) pair."""

    strike_K: float
    drawdown_c: float
    x: float
    xbar: float

    def __post_init__(self):
        if not self.strike_K > 0:
            raise DomainError(f"strike must be positive, got {self.strike_K}")
        if not self.drawdown_c > 0:
            raise DomainError(f"drawdown threshold must be positive, got {self.drawdown_c}")
        if self.x > self.xbar:
            raise DomainError(f"x={self.x} exceeds running maximum xbar={self.xbar}")

    @classmethod
    def from_prices(cls, K: float, cap_ratio: float, s: float, smax: float) -> "ContractState":
        if not cap_ratio > 1:
            raise DomainError(f"cap ratio must exceed 1, got {cap_ratio}")
        if not (s > 0 and smax > 0):
            raise DomainError("asset prices must be positive")
        return cls(K, math.log(cap_ratio), math.log(s), math.log(smax))


def martingale_drift(r: float, sigma: float, lam: float, rho: float) -> float:
    return r - 0.5 * sigma * sigma + (lam / (1.0 + rho) if lam > 0 else 0.0)


def make_params(r: float, sigma: float, lam: float = 0.0, rho: float | None = None) -> ModelParams:
    """Build a parameter set with the drift fixed by the martingale constraint.

    ``rho`` is ignored (stored as 1.0) when ``lam == 0``.
    """
    r, sigma, lam = float(r), float(sigma), float(lam)
    if not r > 0:
        raise DomainError(f"discount rate must be positive, got {r}")
    if not sigma >= 0:
        raise DomainError(f"sigma must be nonnegative, got {sigma}")
    if not lam >= 0:
        raise DomainError(f"jump intensity must be nonnegative, got {lam}")
    if lam > 0:
        if rho is None or not rho > 0:
            raise DomainError(f"jump rate rho must be positive when lam > 0, got {rho}")
        if sigma == 0:
            raise DomainError("sigma = 0 with jumps is not supported (scale basis needs sigma > 0)")
        rho = float(rho)
    else:
        if sigma == 0:
            raise DomainError("sigma = 0 and lam = 0 gives a deterministic model")
        rho = 1.0 if rho is None else float(rho)
    return ModelParams(r, sigma, lam, rho, martingale_drift(r, sigma, lam, rho))


def laplace_exponent(params: ModelParams, theta: float) -> float:
    """Psi(theta) = mu theta + sigma^2 theta^2 / 2 - lam theta / (theta + rho)."""
    p = params
    out = p.mu * theta + 0.5 * p.sigma**2 * theta * theta
    if p.lam > 0:
        if theta + p.rho == 0:
            raise DomainError(f"Laplace exponent has a pole at theta = -rho = {-p.rho}")
        out -= p.lam * theta / (theta + p.rho)
    return out


def laplace_exponent_prime(params: ModelParams, theta: float) -> float:
    p = params
    out = p.mu + p.sigma**2 * theta
    if p.lam > 0:
        out -= p.lam * p.rho / (theta + p.rho) ** 2
    return out


@dataclass(frozen=True)
class DualParams:
    """Parameters of X under the measure tilted by exp(X_t - r t).

    Same shape as :class:`ModelParams` but the discount rate is 0 and the
    drift no longer satisfies the pricing constraint.
    """

    sigma: float
    lam: float
    rho: float
    mu: float
    r: float = 0.0

    @property
    def has_jumps(self) -> bool:
        return self.lam > 0.0


def dual_params(params: ModelParams) -> DualParams:
    p = params
    if p.lam > 0:
        return DualParams(p.sigma, p.lam * p.rho / (p.rho + 1.0), p.rho + 1.0, p.mu + p.sigma**2)
    return DualParams(p.sigma, 0.0, p.rho + 1.0, p.mu + p.sigma**2)


def dual_laplace_exponent(dual: DualParams, theta: float) -> float:
    out = dual.mu * theta + 0.5 * dual.sigma**2 * theta * theta
    if dual.lam > 0:
        if theta + dual.rho == 0:
            raise DomainError(f"Laplace exponent has a pole at theta = {-dual.rho}")
        out -= dual.lam * theta / (theta + dual.rho)
    return out

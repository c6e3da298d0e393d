"""Structural primitives of the two-mode (coach vs. airline) price game.

Mode 1 is the coach operator, mode 2 the airline. Demand is constant
elasticity in own price, rival price and income; costs are a fixed term plus
a quadratic density term. Every power law is evaluated in logs and then
exponentiated.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

__all__ = [
    "DomainError",
    "ModeParams",
    "MarketEnv",
    "PricePair",
    "QuantityPair",
    "demand",
    "total_cost",
    "marginal_cost",
    "profit",
    "markup_factor",
    "reaction_exponent",
    "reaction_slope",
    "log_reaction_intercept",
    "reaction_price",
    "foc_residual",
]


class DomainError(ValueError):
    """Raised when an argument lies outside the model's domain."""


def _require(condition: bool, message: str) -> None:
    if not condition:
        raise DomainError(message)


def _finite(x: float) -> bool:
    return math.isfinite(x)


@dataclass(frozen=True)
class ModeParams:
    """Demand and cost primitives of one transport mode.

    Parameters
    ----------
    alpha : float
        Demand scale (absolute advantage in demand), > 0.
    beta_own : float
        Own-price elasticity magnitude, > 1 so the markup is finite and
        positive.
    beta_cross : float
        Cross-price elasticity with respect to the rival mode, >= 0.
    delta : float
        Income elasticity, >= 0.
    fixed_cost : float
        Fixed cost, > 0.
    phi : float
        Density cost parameter; marginal cost is ``phi * q``. Must be > 0.
    """

    alpha: float
    beta_own: float
    beta_cross: float = 0.0
    delta: float = 0.0
    fixed_cost: float = 1.0
    phi: float = 1.0

    def __post_init__(self) -> None:
        for name in ("alpha", "beta_own", "beta_cross", "delta", "fixed_cost", "phi"):
            value = getattr(self, name)
            _require(_finite(float(value)), f"{name} must be finite, got {value!r}")
        _require(self.alpha > 0, f"alpha must be > 0, got {self.alpha}")
        _require(self.phi > 0, f"phi must be > 0, got {self.phi}")
        _require(self.fixed_cost > 0, f"fixed_cost must be > 0, got {self.fixed_cost}")
        _require(self.beta_cross >= 0, f"beta_cross must be >= 0, got {self.beta_cross}")
        _require(self.delta >= 0, f"delta must be >= 0, got {self.delta}")
        _require(
            self.beta_own > 1,
            f"beta_own must be > 1 for a finite positive markup, got {self.beta_own}",
        )


@dataclass(frozen=True)
class MarketEnv:
    """Exogenous market state; ``income`` is the income/activity index."""

    income: float = 1.0

    def __post_init__(self) -> None:
        _require(
            _finite(float(self.income)) and self.income > 0,
            f"income must be finite and > 0, got {self.income}",
        )


@dataclass(frozen=True)
class PricePair:
    p1: float
    p2: float

    def __post_init__(self) -> None:
        for name in ("p1", "p2"):
            value = getattr(self, name)
            _require(
                _finite(float(value)) and value > 0,
                f"{name} must be finite and > 0, got {value}",
            )

    def of(self, mode: int) -> float:
        return self.p1 if _check_mode(mode) == 1 else self.p2


@dataclass(frozen=True)
class QuantityPair:
    q1: float
    q2: float

    def __post_init__(self) -> None:
        for name in ("q1", "q2"):
            value = getattr(self, name)
            _require(
                _finite(float(value)) and value >= 0,
                f"{name} must be finite and >= 0, got {value}",
            )

    def of(self, mode: int) -> float:
        return self.q1 if _check_mode(mode) == 1 else self.q2


def _check_mode(mode: int) -> int:
    if mode not in (1, 2):
        raise DomainError(f"mode must be 1 (coach) or 2 (airline), got {mode!r}")
    return mode


def _log_demand(params: ModeParams, own_price: float, rival_price: float, income: float) -> float:
    _require(own_price > 0 and rival_price > 0, "prices must be > 0")
    _require(income > 0, "income must be > 0")
    return (
        math.log(params.alpha)
        - params.beta_own * math.log(own_price)
        + params.beta_cross * math.log(rival_price)
        + params.delta * math.log(income)
    )


def demand(
    params_1: ModeParams, params_2: ModeParams, prices: PricePair, env: MarketEnv
) -> QuantityPair:
    """Quantities demanded of both modes at the given prices and income."""
    q1 = math.exp(_log_demand(params_1, prices.p1, prices.p2, env.income))
    q2 = math.exp(_log_demand(params_2, prices.p2, prices.p1, env.income))
    return QuantityPair(q1, q2)


def total_cost(params: ModeParams, q: float) -> float:
    """Fixed cost plus the quadratic density cost ``phi / 2 * q**2``."""
    _require(q >= 0, f"quantity must be >= 0, got {q}")
    return params.fixed_cost + 0.5 * params.phi * q * q


def marginal_cost(params: ModeParams, q: float) -> float:
    _require(q >= 0, f"quantity must be >= 0, got {q}")
    return params.phi * q


def profit(params: ModeParams, price: float, q: float) -> float:
    _require(price > 0, f"price must be > 0, got {price}")
    return price * q - total_cost(params, q)


def markup_factor(params: ModeParams) -> float:
    """Price over marginal cost at the optimum, ``beta / (beta - 1)``.

    ``ModeParams`` already rejects ``beta_own <= 1``; the check is repeated
    here because the factor has a pole at 1.
    """
    beta = params.beta_own
    _require(beta > 1, f"markup undefined for beta_own <= 1, got {beta}")
    return beta / (beta - 1.0)


def reaction_exponent(params: ModeParams) -> float:
    """``1 / (1 + beta_own)``, the exponent of the best-response power law."""
    return 1.0 / (1.0 + params.beta_own)


def reaction_slope(params: ModeParams) -> float:
    """Elasticity of the best response with respect to the rival price."""
    return params.beta_cross * reaction_exponent(params)


def log_reaction_intercept(params: ModeParams, env: MarketEnv) -> float:
    """Intercept of the best response in log-log space."""
    return reaction_exponent(params) * (
        math.log(params.alpha)
        + math.log(markup_factor(params))
        + math.log(params.phi)
        + params.delta * math.log(env.income)
    )


def reaction_price(self_params: ModeParams, rival_price: float, env: MarketEnv) -> float:
    """Profit-maximizing price of a mode given the rival's price.

    Solves ``p = eta * phi * q(p)`` in closed form:
    ``p = (alpha * eta * phi * Y**delta) ** mu * rival_price ** (mu * beta_cross)``
    with ``mu = 1 / (1 + beta_own)``.
    """
    _require(
        _finite(float(rival_price)) and rival_price > 0,
        f"rival price must be finite and > 0, got {rival_price}",
    )
    log_p = log_reaction_intercept(self_params, env) + reaction_slope(self_params) * math.log(
        rival_price
    )
    return math.exp(log_p)


def foc_residual(
    self_params: ModeParams,
    rival_params: ModeParams,
    prices: PricePair,
    env: MarketEnv,
    which_mode: int,
) -> float:
    """First-order-condition gap ``p_i - eta_i * phi_i * q_i(p)``.

    ``self_params`` belong to ``which_mode``. The gap is zero exactly on the
    mode's reaction curve and has the sign of ``p_i`` minus its best
    response. ``rival_params`` are accepted for symmetry of the call but do
    not enter mode ``i``'s condition.
    """
    _check_mode(which_mode)
    del rival_params
    own = prices.of(which_mode)
    rival = prices.of(3 - which_mode)
    q = math.exp(_log_demand(self_params, own, rival, env.income))
    return own - markup_factor(self_params) * marginal_cost(self_params, q)

"""Bertrand-Nash equilibrium of the coach/airline game and shock analysis."""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from typing import Literal, Sequence

from .model import (
    DomainError,
    MarketEnv,
    ModeParams,
    PricePair,
    QuantityPair,
    demand,
    foc_residual,
    log_reaction_intercept,
    reaction_slope,
)

__all__ = [
    "DegenerateSystemError",
    "EquilibriumResult",
    "ShockScenario",
    "ComparativeStaticsRow",
    "stability_product",
    "solve_closed_form",
    "iterate_to_equilibrium",
    "apply_shock",
    "comparative_statics_report",
]

DEFAULT_TOL = 1e-10
DEFAULT_MAX_ITER = 10_000
_DEGENERATE_EPS = 1e-12
_LOG_PRICE_LIMIT = 700.0


class DegenerateSystemError(ArithmeticError):
    """The two log-linear reaction curves are parallel (s1 * s2 == 1)."""


@dataclass(frozen=True)
class EquilibriumResult:
    prices: PricePair
    quantities: QuantityPair
    iterations: int
    converged: bool
    max_foc_residual: float
    stability_product: float
    message: str = ""


@dataclass(frozen=True)
class ShockScenario:
    """A parameter shock applied to the base calibration.

    ``cost`` multiplies the target mode's density cost ``phi`` by
    ``phi_multiplier``. ``rivalry`` lowers ``beta_own`` by
    ``beta_own_delta`` and raises ``beta_cross`` by ``beta_cross_delta``
    on the target mode, or on both modes when ``target_mode == 0``.
    Demand scale ``alpha`` is held fixed.
    """

    kind: Literal["cost", "rivalry"]
    target_mode: int = 1
    phi_multiplier: float = 1.0
    beta_own_delta: float = 0.0
    beta_cross_delta: float = 0.0
    name: str = ""

    def __post_init__(self) -> None:
        if self.kind not in ("cost", "rivalry"):
            raise DomainError(f"unknown shock kind {self.kind!r}")
        if self.target_mode not in (0, 1, 2):
            raise DomainError(f"target_mode must be 0 (both), 1 or 2, got {self.target_mode}")
        if not (math.isfinite(self.phi_multiplier) and self.phi_multiplier > 0):
            raise DomainError(f"phi_multiplier must be > 0, got {self.phi_multiplier}")
        if self.beta_own_delta < 0 or self.beta_cross_delta < 0:
            raise DomainError("rivalry deltas are magnitudes and must be >= 0")


def stability_product(params_1: ModeParams, params_2: ModeParams) -> float:
    """Product of the two reaction-curve log slopes; < 1 means contraction."""
    return reaction_slope(params_1) * reaction_slope(params_2)


def _max_relative_foc(
    params_1: ModeParams, params_2: ModeParams, prices: PricePair, env: MarketEnv
) -> float:
    r1 = foc_residual(params_1, params_2, prices, env, 1) / prices.p1
    r2 = foc_residual(params_2, params_1, prices, env, 2) / prices.p2
    return max(abs(r1), abs(r2))


def _result(
    params_1: ModeParams,
    params_2: ModeParams,
    env: MarketEnv,
    log_p1: float,
    log_p2: float,
    iterations: int,
    converged: bool,
    message: str = "",
) -> EquilibriumResult:
    prices = PricePair(math.exp(log_p1), math.exp(log_p2))
    return EquilibriumResult(
        prices=prices,
        quantities=demand(params_1, params_2, prices, env),
        iterations=iterations,
        converged=converged,
        max_foc_residual=_max_relative_foc(params_1, params_2, prices, env),
        stability_product=stability_product(params_1, params_2),
        message=message,
    )


def solve_closed_form(
    params_1: ModeParams, params_2: ModeParams, env: MarketEnv
) -> EquilibriumResult:
    """Solve the pair of log-linear reaction functions exactly.

    ``ln p_i = a_i + s_i ln p_j`` gives
    ``ln p1 = (a1 + s1 a2) / (1 - s1 s2)`` and ``ln p2 = a2 + s2 ln p1``.
    ``max_foc_residual`` is relative (residual divided by price).

    Raises
    ------
    DegenerateSystemError
        If ``s1 * s2`` equals 1, when the curves are parallel in logs.
    """
    s1, s2 = reaction_slope(params_1), reaction_slope(params_2)
    a1, a2 = log_reaction_intercept(params_1, env), log_reaction_intercept(params_2, env)
    det = 1.0 - s1 * s2
    if abs(det) < _DEGENERATE_EPS:
        raise DegenerateSystemError(
            f"reaction curves are parallel in logs: stability product s1*s2 = {s1 * s2!r}"
        )
    log_p1 = (a1 + s1 * a2) / det
    log_p2 = a2 + s2 * log_p1
    return _result(params_1, params_2, env, log_p1, log_p2, iterations=0, converged=True)


def iterate_to_equilibrium(
    params_1: ModeParams,
    params_2: ModeParams,
    env: MarketEnv,
    start: PricePair | None = None,
    damping: float = 1.0,
    tol: float = DEFAULT_TOL,
    max_iter: int = DEFAULT_MAX_ITER,
) -> EquilibriumResult:
    """Damped simultaneous best-response iteration in log prices.

    Each round moves both log prices a fraction ``damping`` of the way to
    their best responses to the current iterate. The run is converged once
    the best-response gap at the new iterate (the move the next undamped
    round would make) and the relative FOC residual are both below ``tol``.
    Failure to converge is reported in the result, not raised; the last
    iterate is returned.
    """
    if not 0 < damping <= 1:
        raise DomainError(f"damping must lie in (0, 1], got {damping}")
    if max_iter < 0:
        raise DomainError(f"max_iter must be >= 0, got {max_iter}")
    start = start or PricePair(1.0, 1.0)
    s1, s2 = reaction_slope(params_1), reaction_slope(params_2)
    a1, a2 = log_reaction_intercept(params_1, env), log_reaction_intercept(params_2, env)

    x1, x2 = math.log(start.p1), math.log(start.p2)

    def gap(y1: float, y2: float) -> tuple[float, float]:
        return a1 + s1 * y2 - y1, a2 + s2 * y1 - y2

    def done(y1: float, y2: float) -> bool:
        g1, g2 = gap(y1, y2)
        if max(abs(g1), abs(g2)) >= tol:
            return False
        prices = PricePair(math.exp(y1), math.exp(y2))
        return _max_relative_foc(params_1, params_2, prices, env) < tol

    if done(x1, x2):
        return _result(params_1, params_2, env, x1, x2, 0, True)

    for k in range(1, max_iter + 1):
        g1, g2 = gap(x1, x2)
        x1, x2 = x1 + damping * g1, x2 + damping * g2
        if not max(abs(x1), abs(x2)) < _LOG_PRICE_LIMIT:
            # exp() would overflow; report the clamped iterate
            x1 = max(min(x1, _LOG_PRICE_LIMIT), -_LOG_PRICE_LIMIT)
            x2 = max(min(x2, _LOG_PRICE_LIMIT), -_LOG_PRICE_LIMIT)
            return EquilibriumResult(
                prices=PricePair(math.exp(x1), math.exp(x2)),
                quantities=QuantityPair(0.0, 0.0),
                iterations=k,
                converged=False,
                max_foc_residual=math.inf,
                stability_product=s1 * s2,
                message=f"iteration diverged; stability product s1*s2 = {s1 * s2:.6g}",
            )
        if done(x1, x2):
            return _result(params_1, params_2, env, x1, x2, k, True)

    return _result(
        params_1,
        params_2,
        env,
        x1,
        x2,
        max_iter,
        False,
        message=f"no convergence in {max_iter} iterations; stability product s1*s2 = {s1 * s2:.6g}",
    )


def _shock_mode(params: ModeParams, scenario: ShockScenario) -> ModeParams:
    if scenario.kind == "cost":
        return replace(params, phi=params.phi * scenario.phi_multiplier)
    beta_own = params.beta_own - scenario.beta_own_delta
    if beta_own <= 1:
        raise DomainError(
            f"rivalry shock drives beta_own to {beta_own:.6g} <= 1; markup undefined"
        )
    return replace(params, beta_own=beta_own, beta_cross=params.beta_cross + scenario.beta_cross_delta)


def apply_shock(
    base_1: ModeParams, base_2: ModeParams, scenario: ShockScenario
) -> tuple[ModeParams, ModeParams]:
    """Return the post-shock parameters of both modes.

    Raises ``DomainError`` if the shocked parameters leave the model's
    domain or the shocked system is no longer a contraction.
    """
    hit_1 = scenario.target_mode in (0, 1)
    hit_2 = scenario.target_mode in (0, 2)
    new_1 = _shock_mode(base_1, scenario) if hit_1 else base_1
    new_2 = _shock_mode(base_2, scenario) if hit_2 else base_2
    product = stability_product(new_1, new_2)
    if product >= 1:
        raise DomainError(
            f"shock destroys stability: stability product s1*s2 = {product:.6g} >= 1"
        )
    return new_1, new_2


@dataclass(frozen=True)
class ComparativeStaticsRow:
    scenario: ShockScenario
    old_prices: PricePair | None
    new_prices: PricePair | None
    pct_change_p1: float = math.nan
    pct_change_p2: float = math.nan
    ok: bool = True
    error: str = ""


def comparative_statics_report(
    base_1: ModeParams,
    base_2: ModeParams,
    env: MarketEnv,
    scenarios: Sequence[ShockScenario],
) -> list[ComparativeStaticsRow]:
    """Re-solve the equilibrium under each scenario.

    Percent changes are ``100 * (ln p_new - ln p_old)``. A scenario that
    cannot be solved yields a row with ``ok=False`` and the reason in
    ``error``; the remaining scenarios are still evaluated.
    """
    base = solve_closed_form(base_1, base_2, env)
    rows = []
    for scenario in scenarios:
        try:
            new_1, new_2 = apply_shock(base_1, base_2, scenario)
            shocked = solve_closed_form(new_1, new_2, env)
        except (DomainError, DegenerateSystemError) as exc:
            rows.append(
                ComparativeStaticsRow(scenario, base.prices, None, ok=False, error=str(exc))
            )
            continue
        rows.append(
            ComparativeStaticsRow(
                scenario,
                base.prices,
                shocked.prices,
                pct_change_p1=100.0 * (math.log(shocked.prices.p1) - math.log(base.prices.p1)),
                pct_change_p2=100.0 * (math.log(shocked.prices.p2) - math.log(base.prices.p2)),
            )
        )
    return rows

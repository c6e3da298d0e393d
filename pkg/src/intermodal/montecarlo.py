"""Replication harness for estimator recovery and test-size studies.

Replication ``r`` of a study with master seed ``m`` draws everything from
``numpy.random.SeedSequence([m, r])``: its first spawned child seeds the
panel, its second any extra instrument noise. Results therefore do not
depend on how replications are scheduled across threads.
"""

from __future__ import annotations

import math
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from typing import Literal, Sequence

import numpy as np

from .econometrics import (
    DesignSpec,
    EstimationError,
    WeakInstrumentWarning,
    build_design,
    gmm_two_step,
    ols,
    two_stage_least_squares,
)
from .instruments import build_leave_one_out
from .panel import DgpConfig, simulate_panel

__all__ = [
    "MonteCarloConfig",
    "ReplicationResult",
    "CoefficientSummary",
    "MonteCarloSummary",
    "replication_seeds",
    "run_replication",
    "run_montecarlo",
]

ESTIMATORS = ("ols", "tsls", "gmm")


@dataclass(frozen=True)
class MonteCarloConfig:
    """One Monte Carlo study.

    ``instrument_mode`` selects the excluded instruments: ``valid`` uses
    the leave-one-out group means; ``invalid`` adds
    ``invalid_strength * error`` to the last of them; ``irrelevant``
    replaces them with independent standard normal noise.
    """

    dgp: DgpConfig = field(default_factory=DgpConfig)
    n_cities: int = 7
    n_months: int = 75
    replications: int = 500
    design: DesignSpec = field(default_factory=lambda: DesignSpec(time_dummies=False))
    grouping: tuple[tuple[str, ...], ...] | None = None
    hac_lags: int = 1
    instrument_mode: Literal["valid", "invalid", "irrelevant"] = "valid"
    invalid_strength: float = 0.5
    estimators: tuple[str, ...] = ESTIMATORS
    test_level: float = 0.05

    def __post_init__(self) -> None:
        if self.replications < 2:
            raise ValueError(f"replications must be >= 2, got {self.replications}")
        unknown = set(self.estimators) - set(ESTIMATORS)
        if unknown:
            raise ValueError(f"unknown estimators {sorted(unknown)}")
        if self.instrument_mode not in ("valid", "invalid", "irrelevant"):
            raise ValueError(f"unknown instrument_mode {self.instrument_mode!r}")
        if not 0 < self.test_level < 1:
            raise ValueError("test_level must lie in (0, 1)")


@dataclass(frozen=True)
class ReplicationResult:
    index: int
    seed: int
    coefficients: dict[str, dict[str, float]] = field(default_factory=dict)
    hansen_p: float | None = None
    anderson_p: float | None = None
    error: str = ""


def replication_seeds(master_seed: int, index: int) -> tuple[int, int]:
    """Panel seed and instrument-noise seed of replication ``index``."""
    children = np.random.SeedSequence([master_seed, index]).spawn(2)
    return tuple(int(c.generate_state(1, dtype=np.uint64)[0]) for c in children)  # type: ignore[return-value]


def run_replication(config: MonteCarloConfig, master_seed: int, index: int) -> ReplicationResult:
    panel_seed, noise_seed = replication_seeds(master_seed, index)
    try:
        panel, components = simulate_panel(
            replace(config.dgp, seed=panel_seed), config.n_cities, config.n_months
        )
        design = build_design(panel, config.design)
        Z = build_leave_one_out(panel, config.grouping).values
        if config.instrument_mode == "invalid":
            Z = Z.copy()
            Z[:, -1] += config.invalid_strength * components.error.reshape(-1)
        elif config.instrument_mode == "irrelevant":
            Z = np.random.default_rng(noise_seed).standard_normal(Z.shape)

        coefficients: dict[str, dict[str, float]] = {}
        hansen_p = anderson_p = None
        for kind in config.estimators:
            if kind == "ols":
                res = ols(design.y, design.X, names=design.names)
            elif kind == "tsls":
                res = two_stage_least_squares(
                    design.y, design.X_exog, design.X_endog, Z, names=design.names
                )
            else:
                res = gmm_two_step(
                    design.y,
                    design.X_exog,
                    design.X_endog,
                    Z,
                    config.hac_lags,
                    groups=design.groups,
                    times=design.times,
                    names=design.names,
                )
                hansen_p = res.hansen_j.p_value if res.hansen_j else None
            if kind != "ols" and res.anderson is not None:
                anderson_p = res.anderson.p_value
            coefficients[kind] = {
                n: float(c)
                for n, c in zip(res.names, res.coefficients)
                if not n.startswith(("city[", "month["))
            }
    except (EstimationError, ValueError, np.linalg.LinAlgError) as exc:
        return ReplicationResult(index, panel_seed, error=f"{type(exc).__name__}: {exc}")
    return ReplicationResult(index, panel_seed, coefficients, hansen_p, anderson_p)


@dataclass(frozen=True)
class CoefficientSummary:
    truth: float | None
    mean: float
    sd: float
    mc_se: float

    @property
    def bias(self) -> float | None:
        return None if self.truth is None else self.mean - self.truth

    @property
    def z_score(self) -> float | None:
        """Bias in Monte Carlo standard errors (``inf`` when the SE is zero)."""
        if self.truth is None:
            return None
        if self.mc_se == 0:
            return 0.0 if self.mean == self.truth else math.inf
        return (self.mean - self.truth) / self.mc_se

    def as_dict(self) -> dict:
        return {
            "truth": self.truth,
            "mean": self.mean,
            "sd": self.sd,
            "mc_se": self.mc_se,
            "bias": self.bias,
            "z_score": self.z_score,
        }


@dataclass(frozen=True)
class MonteCarloSummary:
    replications: int
    succeeded: int
    master_seed: int
    instrument_mode: str
    estimates: dict[str, dict[str, CoefficientSummary]]
    hansen_rejection_rate: float | None
    anderson_rejection_rate: float | None
    test_level: float
    failures: tuple[tuple[int, str], ...] = ()

    def as_dict(self) -> dict:
        return {
            "replications": self.replications,
            "succeeded": self.succeeded,
            "master_seed": self.master_seed,
            "instrument_mode": self.instrument_mode,
            "test_level": self.test_level,
            "hansen_rejection_rate": self.hansen_rejection_rate,
            "anderson_rejection_rate": self.anderson_rejection_rate,
            "estimates": {
                kind: {name: s.as_dict() for name, s in coefs.items()}
                for kind, coefs in self.estimates.items()
            },
            "failures": [{"replication": i, "error": e} for i, e in self.failures],
        }


def _rate(p_values: Sequence[float | None], level: float) -> float | None:
    values = [p for p in p_values if p is not None]
    if not values:
        return None
    return float(np.mean([p < level for p in values]))


def summarize(
    config: MonteCarloConfig, master_seed: int, results: Sequence[ReplicationResult]
) -> MonteCarloSummary:
    results = sorted(results, key=lambda r: r.index)
    ok = [r for r in results if not r.error]
    truth = config.dgp.kappa.as_dict()
    estimates: dict[str, dict[str, CoefficientSummary]] = {}
    for kind in config.estimators:
        names = list(ok[0].coefficients[kind]) if ok else []
        estimates[kind] = {}
        for name in names:
            draws = np.array([r.coefficients[kind][name] for r in ok])
            sd = float(draws.std(ddof=1)) if draws.size > 1 else math.nan
            estimates[kind][name] = CoefficientSummary(
                truth=truth.get(name),
                mean=float(draws.mean()),
                sd=sd,
                mc_se=sd / math.sqrt(draws.size),
            )
    return MonteCarloSummary(
        replications=len(results),
        succeeded=len(ok),
        master_seed=master_seed,
        instrument_mode=config.instrument_mode,
        estimates=estimates,
        hansen_rejection_rate=_rate([r.hansen_p for r in ok], config.test_level),
        anderson_rejection_rate=_rate([r.anderson_p for r in ok], config.test_level),
        test_level=config.test_level,
        failures=tuple((r.index, r.error) for r in results if r.error),
    )


def run_montecarlo(
    config: MonteCarloConfig, master_seed: int = 0, threads: int = 1
) -> MonteCarloSummary:
    """Run every replication and reduce them in replication order."""
    indices = range(config.replications)
    # irrelevant-instrument studies are weak by design; filters are process-wide
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", WeakInstrumentWarning)
        if threads <= 1:
            results = [run_replication(config, master_seed, i) for i in indices]
        else:
            with ThreadPoolExecutor(max_workers=threads) as pool:
                results = list(
                    pool.map(lambda i: run_replication(config, master_seed, i), indices)
                )
    return summarize(config, master_seed, results)

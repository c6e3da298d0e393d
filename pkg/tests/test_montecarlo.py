import math

import numpy as np
import pytest

from intermodal.montecarlo import (
    CoefficientSummary,
    MonteCarloConfig,
    replication_seeds,
    run_montecarlo,
    run_replication,
)
from intermodal.panel import DgpConfig


def small(**kwargs) -> MonteCarloConfig:
    base = dict(dgp=DgpConfig(), n_cities=5, n_months=20, replications=6)
    base.update(kwargs)
    return MonteCarloConfig(**base)


def test_replication_seeds_are_deterministic_and_distinct():
    assert replication_seeds(7, 3) == replication_seeds(7, 3)
    seeds = {replication_seeds(7, r)[0] for r in range(100)}
    assert len(seeds) == 100
    assert replication_seeds(7, 0) != replication_seeds(8, 0)


def test_threads_match_sequential():
    cfg = small()
    one = run_montecarlo(cfg, master_seed=11, threads=1)
    three = run_montecarlo(cfg, master_seed=11, threads=3)
    assert one.as_dict() == three.as_dict()


def test_zero_noise_gives_zero_spread():
    cfg = small(dgp=DgpConfig(error_sd=0.0, endogeneity_rho=0.0), replications=2)
    summary = run_montecarlo(cfg, master_seed=1)
    assert summary.succeeded == 2
    for coefs in summary.estimates.values():
        for name in ("d_diesel", "d_tire", "d_toll", "d_airline"):
            assert coefs[name].sd < 1e-10
            assert coefs[name].bias == pytest.approx(0.0, abs=1e-10)


def test_summary_reports_truth_and_rates():
    summary = run_montecarlo(small(), master_seed=2)
    gmm = summary.estimates["gmm"]
    assert gmm["d_airline"].truth == 0.311
    assert gmm["const"].truth == 0.0
    assert 0.0 <= summary.hansen_rejection_rate <= 1.0
    assert 0.0 <= summary.anderson_rejection_rate <= 1.0
    assert not any(n.startswith("city[") for n in gmm)


def test_failed_replications_are_collected_and_run_continues():
    # a grouping naming an unknown city fails every replication
    cfg = small(grouping=(("nowhere",),), replications=3)
    summary = run_montecarlo(cfg, master_seed=0)
    assert summary.succeeded == 0
    assert len(summary.failures) == 3
    assert "unknown city" in summary.failures[0][1]


@pytest.mark.filterwarnings("ignore::intermodal.econometrics.WeakInstrumentWarning")
def test_invalid_and_irrelevant_modes_change_instruments():
    base = run_replication(small(), 4, 0)
    invalid = run_replication(small(instrument_mode="invalid"), 4, 0)
    irrelevant = run_replication(small(instrument_mode="irrelevant"), 4, 0)
    assert base.coefficients["ols"] == invalid.coefficients["ols"]
    assert base.coefficients["gmm"] != invalid.coefficients["gmm"]
    assert base.coefficients["gmm"] != irrelevant.coefficients["gmm"]


def test_coefficient_summary_z_score():
    s = CoefficientSummary(truth=1.0, mean=1.2, sd=1.0, mc_se=0.1)
    assert s.bias == pytest.approx(0.2)
    assert s.z_score == pytest.approx(2.0)
    assert CoefficientSummary(None, 0.0, 0.0, 0.0).z_score is None
    assert math.isinf(CoefficientSummary(1.0, 2.0, 0.0, 0.0).z_score)


@pytest.mark.parametrize(
    "kwargs",
    [dict(replications=1), dict(estimators=("liml",)), dict(instrument_mode="bad"), dict(test_level=1.0)],
)
def test_invalid_study_config(kwargs):
    with pytest.raises(ValueError):
        small(**kwargs)


@pytest.mark.slow
def test_tsls_recovers_airline_coefficient_over_500_replications():
    study = MonteCarloConfig(replications=500, estimators=("ols", "tsls"))
    summary = run_montecarlo(study, master_seed=31)
    assert abs(summary.estimates["tsls"]["d_airline"].z_score) < 3
    assert summary.estimates["ols"]["d_airline"].z_score > 3

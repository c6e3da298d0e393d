"""Two-way fixed-effects estimation of the coach pricing equation.

OLS, 2SLS and two-step efficient GMM on dummy-variable designs, with the
Hansen J overidentification test, the Anderson canonical-correlation
relevance test and a plain-text coefficient report.
"""

from __future__ import annotations

import csv
import io
import math
import warnings
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from scipy import linalg, stats

from .instruments import InstrumentSet, build_leave_one_out
from .panel import SHIFTERS, PanelDataset

__all__ = [
    "DesignError",
    "EstimationError",
    "RankDeficiencyError",
    "UnderidentificationError",
    "WeightMatrixError",
    "WeakInstrumentWarning",
    "DesignSpec",
    "Design",
    "TestStatistic",
    "EstimationResult",
    "build_design",
    "ols",
    "two_stage_least_squares",
    "gmm_two_step",
    "gmm_objective",
    "hac_moment_covariance",
    "anderson_test",
    "within_transform",
    "residualize",
    "estimate_panel",
    "format_cell",
    "report_rows",
    "report",
    "report_csv",
]

ANDERSON_CAP = 1e12
CRITICAL_1PCT = float(stats.norm.ppf(0.995))
DAGGER = "‡"
EXACT_FIT_NOTE = "exact fit: residuals vanish, standard errors are zero"
_EXACT_FIT_RTOL = 1e-10


class DesignError(ValueError):
    """The design specification does not fit the panel."""


class EstimationError(RuntimeError):
    pass


class RankDeficiencyError(EstimationError):
    def __init__(self, message: str, columns: Sequence[str] = ()):
        super().__init__(message)
        self.columns = tuple(columns)


class UnderidentificationError(EstimationError):
    pass


class WeightMatrixError(EstimationError):
    pass


class WeakInstrumentWarning(UserWarning):
    pass


@dataclass(frozen=True)
class DesignSpec:
    """Regression layout for the pricing equation.

    ``city_dummy_base=None`` takes the first city label as the base.
    ``full_city_dummies`` requests a dummy for every city, which is only
    admissible without a constant.
    """

    dependent: str = "d_coach"
    exogenous_regressors: tuple[str, ...] = SHIFTERS
    endogenous_regressors: tuple[str, ...] = ("d_airline",)
    include_constant: bool = True
    city_dummy_base: str | None = None
    time_dummies: bool = True
    full_city_dummies: bool = False

    def __post_init__(self) -> None:
        listed = (self.dependent,) + tuple(self.exogenous_regressors) + tuple(self.endogenous_regressors)
        dupes = sorted({c for c in listed if listed.count(c) > 1})
        if dupes:
            raise DesignError(f"columns listed more than once: {dupes}")


@dataclass(frozen=True, eq=False)
class Design:
    y: np.ndarray
    X_exog: np.ndarray
    X_endog: np.ndarray
    exog_names: tuple[str, ...]
    endog_names: tuple[str, ...]
    groups: np.ndarray
    times: np.ndarray

    @property
    def names(self) -> tuple[str, ...]:
        return self.exog_names + self.endog_names

    @property
    def X(self) -> np.ndarray:
        return np.column_stack([self.X_exog, self.X_endog])

    @property
    def dummy_names(self) -> tuple[str, ...]:
        return tuple(n for n in self.exog_names if n.startswith(("city[", "month[")))


@dataclass(frozen=True)
class TestStatistic:
    statistic: float
    df: float
    p_value: float
    capped: bool = False

    def as_dict(self) -> dict:
        return {
            "statistic": self.statistic,
            "df": self.df,
            "p_value": self.p_value,
            "capped": self.capped,
        }


@dataclass(frozen=True, eq=False)
class EstimationResult:
    names: tuple[str, ...]
    coefficients: np.ndarray
    std_errors: np.ndarray
    covariance: np.ndarray
    n_obs: int
    adj_r2: float
    mse: float
    f_stat: TestStatistic
    estimator_kind: str
    residuals: np.ndarray
    hansen_j: TestStatistic | None = None
    anderson: TestStatistic | None = None
    first_stage_f: float | None = None
    notes: tuple[str, ...] = field(default_factory=tuple)

    def _index(self, name: str) -> int:
        try:
            return self.names.index(name)
        except ValueError:
            raise KeyError(f"no coefficient named {name!r}") from None

    def coef(self, name: str) -> float:
        return float(self.coefficients[self._index(name)])

    def se(self, name: str) -> float:
        return float(self.std_errors[self._index(name)])

    def to_dict(self) -> dict:
        return {
            "estimator": self.estimator_kind,
            "n_obs": self.n_obs,
            "coefficients": {n: float(c) for n, c in zip(self.names, self.coefficients)},
            "std_errors": {n: float(s) for n, s in zip(self.names, self.std_errors)},
            "adj_r2": self.adj_r2,
            "mse": self.mse,
            "f_stat": self.f_stat.as_dict(),
            "hansen_j": self.hansen_j.as_dict() if self.hansen_j else None,
            "anderson": self.anderson.as_dict() if self.anderson else None,
            "first_stage_f": self.first_stage_f,
            "notes": list(self.notes),
        }


# ---------------------------------------------------------------- design


def build_design(panel: PanelDataset, spec: DesignSpec) -> Design:
    """Assemble y, exogenous block (constant, shifters, dummies) and endogenous block.

    City dummies cover every city except the base; time dummies cover every
    month except the first. Raises ``DesignError`` for unknown columns or
    cities, or a dummy set that is redundant with the constant, and
    ``RankDeficiencyError`` if the assembled regressors are collinear.
    """
    for name in (spec.dependent,) + spec.exogenous_regressors + spec.endogenous_regressors:
        if name not in panel.columns:
            raise DesignError(f"unknown column {name!r}")
    base = spec.city_dummy_base if spec.city_dummy_base is not None else panel.city_ids[0]
    if base not in panel.city_ids:
        raise DesignError(f"base city {base!r} is not in the panel")
    if spec.full_city_dummies and spec.include_constant:
        raise DesignError(
            "a dummy for every city plus a constant is a redundant set "
            "(dummies sum to the constant column)"
        )

    n = panel.n_obs
    groups, times = panel.city_codes, panel.time_codes
    cols: list[np.ndarray] = []
    names: list[str] = []
    if spec.include_constant:
        cols.append(np.ones(n))
        names.append("const")
    for name in spec.exogenous_regressors:
        cols.append(panel.column(name))
        names.append(name)
    for j, city in enumerate(panel.city_ids):
        if city == base and not spec.full_city_dummies:
            continue
        cols.append((groups == j).astype(float))
        names.append(f"city[{city}]")
    if spec.time_dummies:
        for t, month in enumerate(panel.time_ids[1:], start=1):
            cols.append((times == t).astype(float))
            names.append(f"month[{month}]")

    X_exog = np.column_stack(cols) if cols else np.empty((n, 0))
    X_endog = (
        np.column_stack([panel.column(c) for c in spec.endogenous_regressors])
        if spec.endogenous_regressors
        else np.empty((n, 0))
    )
    design = Design(
        y=np.array(panel.column(spec.dependent)),
        X_exog=X_exog,
        X_endog=X_endog,
        exog_names=tuple(names),
        endog_names=tuple(spec.endogenous_regressors),
        groups=groups,
        times=times,
    )
    _check_rank(design.X, design.names)
    return design


def _check_rank(X: np.ndarray, names: Sequence[str], what: str = "regressors") -> None:
    if X.shape[1] == 0:
        return
    if X.shape[0] < X.shape[1]:
        raise RankDeficiencyError(
            f"{what}: {X.shape[1]} columns but only {X.shape[0]} observations"
        )
    _, R, piv = linalg.qr(X, mode="economic", pivoting=True)
    diag = np.abs(np.diag(R))
    tol = max(X.shape) * np.finfo(float).eps * (diag[0] if diag.size else 0.0)
    rank = int(np.sum(diag > tol))
    if rank < X.shape[1]:
        dependent = [names[i] for i in sorted(piv[rank:])]
        raise RankDeficiencyError(
            f"{what} are rank deficient (rank {rank} < {X.shape[1]}); "
            f"linearly dependent column(s): {dependent}",
            dependent,
        )


def _names(names: Sequence[str] | None, k: int, prefix: str = "x") -> tuple[str, ...]:
    if names is None:
        return tuple(f"{prefix}{i}" for i in range(k))
    if len(names) != k:
        raise ValueError(f"got {len(names)} names for {k} columns")
    return tuple(names)


def _as_2d(a: np.ndarray) -> np.ndarray:
    a = np.asarray(a, dtype=float)
    return a.reshape(-1, 1) if a.ndim == 1 else a


def residualize(A: np.ndarray, W: np.ndarray) -> np.ndarray:
    """Residuals of the columns of ``A`` after least squares on ``W``."""
    A = _as_2d(A)
    if W.shape[1] == 0:
        return A.copy()
    coef, *_ = np.linalg.lstsq(W, A, rcond=None)
    return A - W @ coef


def within_transform(values: np.ndarray, groups: np.ndarray, times: np.ndarray) -> np.ndarray:
    """Two-way demeaning (by group and by period) for a balanced panel."""
    v = _as_2d(values)
    g_codes, g_inv = np.unique(groups, return_inverse=True)
    t_codes, t_inv = np.unique(times, return_inverse=True)
    if len(g_codes) * len(t_codes) != v.shape[0]:
        raise ValueError("within_transform requires a balanced panel")
    out = np.empty_like(v)
    for c in range(v.shape[1]):
        col = v[:, c]
        g_mean = np.bincount(g_inv, col) / np.bincount(g_inv)
        t_mean = np.bincount(t_inv, col) / np.bincount(t_inv)
        out[:, c] = col - g_mean[g_inv] - t_mean[t_inv] + col.mean()
    return out if np.ndim(values) > 1 else out[:, 0]


# ---------------------------------------------------------------- statistics


def _intercept_in_span(X: np.ndarray) -> bool:
    ones = np.ones(X.shape[0])
    return bool(np.allclose(residualize(ones, X)[:, 0], 0.0, atol=1e-8))


def _constant_columns(X: np.ndarray) -> np.ndarray:
    return np.array(
        [np.all(X[:, i] == X[0, i]) and X[0, i] != 0 for i in range(X.shape[1])], dtype=bool
    )


def _fit_statistics(
    y: np.ndarray, X: np.ndarray, coef: np.ndarray, resid: np.ndarray, cov: np.ndarray
) -> tuple[float, float, TestStatistic]:
    n, k = X.shape
    ssr = float(resid @ resid)
    centered = _intercept_in_span(X)
    sst = float(((y - y.mean()) @ (y - y.mean())) if centered else y @ y)
    dof_total = n - 1 if centered else n
    adj_r2 = 1.0 - (ssr / (n - k)) / (sst / dof_total) if sst > 0 else math.nan
    mse = ssr / (n - k)

    slopes = ~_constant_columns(X)
    q = int(slopes.sum())
    b = coef[slopes]
    V = cov[np.ix_(slopes, slopes)]
    if q == 0:
        f = TestStatistic(math.nan, 0, math.nan)
    elif not np.any(V):
        f = TestStatistic(math.inf, q, 0.0, capped=True)
    else:
        try:
            wald = float(b @ np.linalg.solve(V, b))
        except np.linalg.LinAlgError:
            wald = math.inf
        f_value = wald / q
        f = TestStatistic(f_value, q, float(stats.f.sf(f_value, q, n - k)) if math.isfinite(f_value) else 0.0)
    return adj_r2, mse, f


def _exact_fit(y: np.ndarray, resid: np.ndarray) -> bool:
    scale = max(float(np.linalg.norm(y)), 1.0)
    return float(np.linalg.norm(resid)) <= _EXACT_FIT_RTOL * scale


def _symmetrize(a: np.ndarray) -> np.ndarray:
    return 0.5 * (a + a.T)


def _result(
    kind: str,
    names: tuple[str, ...],
    y: np.ndarray,
    X: np.ndarray,
    coef: np.ndarray,
    cov: np.ndarray,
    **extra,
) -> EstimationResult:
    cov = _symmetrize(cov)
    resid = y - X @ coef
    if _exact_fit(y, resid):
        # rounding noise would otherwise masquerade as precise, significant estimates
        cov = np.zeros_like(cov)
        extra["notes"] = tuple(extra.get("notes", ())) + (EXACT_FIT_NOTE,)
    adj_r2, mse, f = _fit_statistics(y, X, coef, resid, cov)
    return EstimationResult(
        names=names,
        coefficients=coef,
        std_errors=np.sqrt(np.clip(np.diag(cov), 0.0, None)),
        covariance=cov,
        n_obs=X.shape[0],
        adj_r2=adj_r2,
        mse=mse,
        f_stat=f,
        estimator_kind=kind,
        residuals=resid,
        **extra,
    )


# ---------------------------------------------------------------- estimators


def ols(y: np.ndarray, X: np.ndarray, names: Sequence[str] | None = None) -> EstimationResult:
    """Least squares with the classical covariance ``s^2 (X'X)^-1``, ``s^2 = SSR/(n-k)``.

    Raises ``RankDeficiencyError`` naming the linearly dependent columns.
    """
    y = np.asarray(y, dtype=float)
    X = _as_2d(X)
    names = _names(names, X.shape[1])
    _check_rank(X, names)
    n, k = X.shape
    if n <= k:
        raise EstimationError(f"need more observations ({n}) than regressors ({k})")
    coef, *_ = np.linalg.lstsq(X, y, rcond=None)
    resid = y - X @ coef
    s2 = float(resid @ resid) / (n - k)
    cov = s2 * np.linalg.inv(X.T @ X)
    return _result("ols", names, y, X, coef, cov)


def _iv_inputs(y, X_exog, X_endog, Z_excluded, names):
    y = np.asarray(y, dtype=float)
    X_exog, X_endog, Z_excluded = _as_2d(X_exog), _as_2d(X_endog), _as_2d(Z_excluded)
    n = y.shape[0]
    if not (X_exog.shape[0] == X_endog.shape[0] == Z_excluded.shape[0] == n):
        raise ValueError("y, X_exog, X_endog and Z_excluded must have the same number of rows")
    k_endog, n_excl = X_endog.shape[1], Z_excluded.shape[1]
    if n_excl < k_endog:
        raise UnderidentificationError(
            f"{n_excl} excluded instrument(s) for {k_endog} endogenous regressor(s)"
        )
    X = np.column_stack([X_exog, X_endog])
    Z = np.column_stack([X_exog, Z_excluded])
    names = _names(names, X.shape[1])
    _check_rank(X, names)
    z_names = names[: X_exog.shape[1]] + tuple(f"z{i}" for i in range(n_excl))
    _check_rank(Z, z_names, what="instruments")
    return y, X_exog, X_endog, Z_excluded, X, Z, names


def _first_stage(X_exog, X_endog, Z_excluded, Z) -> float:
    """Smallest partial F of the excluded instruments across endogenous regressors."""
    n, kz = Z.shape
    n_excl = Z_excluded.shape[1]
    f_values = []
    for k in range(X_endog.shape[1]):
        x = X_endog[:, k]
        ssr_u = float(np.sum(residualize(x, Z) ** 2))
        ssr_r = float(np.sum(residualize(x, X_exog) ** 2))
        f_values.append(((ssr_r - ssr_u) / n_excl) / (ssr_u / (n - kz)) if ssr_u > 0 else math.inf)
    return min(f_values)


def _relevance(X_exog, X_endog, Z_excluded, Z) -> dict:
    first_f = _first_stage(X_exog, X_endog, Z_excluded, Z)
    if first_f < 10:
        warnings.warn(
            f"weak instruments: first-stage F = {first_f:.3f} < 10",
            WeakInstrumentWarning,
            stacklevel=3,
        )
    anderson = anderson_test(
        residualize(X_endog, X_exog), residualize(Z_excluded, X_exog), X_endog.shape[0]
    )
    return {"first_stage_f": first_f, "anderson": anderson}


def _tsls_fit(y, X, Z):
    coef_first, *_ = np.linalg.lstsq(Z, X, rcond=None)
    X_hat = Z @ coef_first
    try:
        _check_rank(X_hat, [f"x{i}" for i in range(X.shape[1])], what="first-stage fitted values")
    except RankDeficiencyError as exc:
        raise UnderidentificationError(f"first stage is rank deficient: {exc}") from None
    coef, *_ = np.linalg.lstsq(X_hat, y, rcond=None)
    return coef, X_hat


def two_stage_least_squares(
    y: np.ndarray,
    X_exog: np.ndarray,
    X_endog: np.ndarray,
    Z_excluded: np.ndarray,
    names: Sequence[str] | None = None,
) -> EstimationResult:
    """2SLS with instruments ``[X_exog, Z_excluded]``.

    Coefficients are ordered ``[X_exog, X_endog]``. The covariance is
    ``s^2 (Xhat'Xhat)^-1`` with ``s^2`` from structural residuals over
    ``n - k``. Issues ``WeakInstrumentWarning`` when the first-stage F is
    below 10.
    """
    y, X_exog, X_endog, Z_excluded, X, Z, names = _iv_inputs(y, X_exog, X_endog, Z_excluded, names)
    n, k = X.shape
    coef, X_hat = _tsls_fit(y, X, Z)
    resid = y - X @ coef
    s2 = float(resid @ resid) / (n - k)
    cov = s2 * np.linalg.inv(X_hat.T @ X_hat)
    return _result("tsls", names, y, X, coef, cov, **_relevance(X_exog, X_endog, Z_excluded, Z))


def hac_moment_covariance(
    moments: np.ndarray,
    groups: np.ndarray | None = None,
    times: np.ndarray | None = None,
    lags: int = 1,
) -> np.ndarray:
    """Bartlett-kernel long-run covariance of moment contributions.

    Autocovariances are accumulated only within each group's time series
    (observations in different groups are treated as independent), with
    weights ``1 - l / (lags + 1)``. Normalized by the total count ``n``.
    """
    g = _as_2d(moments)
    n = g.shape[0]
    groups = np.zeros(n, dtype=int) if groups is None else np.asarray(groups)
    times = np.arange(n) if times is None else np.asarray(times)
    if lags < 0:
        raise ValueError("lags must be >= 0")
    order = np.lexsort((times, groups))
    gs, grp, tm = g[order], groups[order], times[order]
    S = gs.T @ gs
    for lag in range(1, lags + 1):
        if lag >= n:
            break
        weight = 1.0 - lag / (lags + 1.0)
        pair = (grp[lag:] == grp[:-lag]) & (tm[lag:] - tm[:-lag] == lag)
        cross = gs[lag:][pair].T @ gs[:-lag][pair]
        S += weight * (cross + cross.T)
    return S / n


def gmm_two_step(
    y: np.ndarray,
    X_exog: np.ndarray,
    X_endog: np.ndarray,
    Z_excluded: np.ndarray,
    hac_lags: int = 1,
    *,
    groups: np.ndarray | None = None,
    times: np.ndarray | None = None,
    names: Sequence[str] | None = None,
) -> EstimationResult:
    """Two-step efficient linear GMM.

    Step one is 2SLS. Its residuals give the HAC moment covariance ``S``
    (Bartlett, ``hac_lags``, within each group). Step two minimizes
    ``n gbar' S^-1 gbar``. The coefficient covariance is
    ``n (X'Z S^-1 Z'X)^-1`` scaled by ``n / (n - k)``. Hansen J is the
    step-two objective, with ``L - K_endog`` degrees of freedom; it is
    exactly 0 with 0 df when the model is just identified.

    Raises
    ------
    WeightMatrixError
        If ``S`` is not positive definite.
    """
    y, X_exog, X_endog, Z_excluded, X, Z, names = _iv_inputs(y, X_exog, X_endog, Z_excluded, names)
    n, k = X.shape
    coef_1, _ = _tsls_fit(y, X, Z)
    u_1 = y - X @ coef_1
    df = Z_excluded.shape[1] - X_endog.shape[1]
    if _exact_fit(y, u_1):
        # every moment holds exactly at the 2SLS solution, whatever the weight
        return _result(
            "gmm2step", names, y, X, coef_1, np.zeros((k, k)),
            hansen_j=TestStatistic(0.0, df, 1.0),
            **_relevance(X_exog, X_endog, Z_excluded, Z),
        )
    S = _symmetrize(hac_moment_covariance(Z * u_1[:, None], groups, times, hac_lags))
    eig = np.linalg.eigvalsh(S)
    if not eig[0] > 1e-12 * max(eig[-1], 0.0) or eig[-1] <= 0:
        raise WeightMatrixError(
            f"moment covariance is not positive definite (eigenvalues in [{eig[0]:.3e}, "
            f"{eig[-1]:.3e}]); add a ridge to S or change hac_lags"
        )
    ZX, Zy = Z.T @ X, Z.T @ y
    S_inv_ZX = np.linalg.solve(S, ZX)
    A = ZX.T @ S_inv_ZX
    coef = np.linalg.solve(A, S_inv_ZX.T @ Zy)
    cov = n * np.linalg.inv(A) * (n / (n - k))

    u_2 = y - X @ coef
    if df == 0:
        hansen = TestStatistic(0.0, 0, 1.0)
    else:
        g_sum = Z.T @ u_2
        j = float(g_sum @ np.linalg.solve(S, g_sum)) / n
        hansen = TestStatistic(j, df, float(stats.chi2.sf(j, df)))
    return _result(
        "gmm2step", names, y, X, coef, cov, hansen_j=hansen,
        **_relevance(X_exog, X_endog, Z_excluded, Z),
    )


def gmm_objective(
    coef: np.ndarray, y: np.ndarray, X: np.ndarray, Z: np.ndarray, S: np.ndarray
) -> float:
    """``n gbar(b)' S^-1 gbar(b)`` for the linear moment ``Z'(y - Xb) / n``."""
    g_sum = Z.T @ (y - X @ coef)
    return float(g_sum @ np.linalg.solve(S, g_sum)) / y.shape[0]


def anderson_test(
    X_endog_residualized: np.ndarray, Z_residualized: np.ndarray, n_obs: int
) -> TestStatistic:
    """Anderson canonical-correlation LR test of instrument relevance.

    Statistic ``-n ln(1 - r_min^2)`` with ``L - K + 1`` degrees of freedom,
    where ``r_min`` is the smallest canonical correlation between the
    (already partialled-out) endogenous regressors and excluded
    instruments. A perfect correlation is capped at ``ANDERSON_CAP`` and
    flagged.
    """
    X = _as_2d(X_endog_residualized)
    Z = _as_2d(Z_residualized)
    if X.shape[0] != Z.shape[0]:
        raise ValueError(
            f"dimension mismatch: {X.shape[0]} rows of regressors vs {Z.shape[0]} of instruments"
        )
    K, L = X.shape[1], Z.shape[1]
    if L < K:
        raise ValueError(f"need at least as many instruments ({L}) as regressors ({K})")
    qx, _ = np.linalg.qr(X)
    qz, _ = np.linalg.qr(Z)
    corr = np.linalg.svd(qx.T @ qz, compute_uv=False)
    r2 = min(float(corr[K - 1]) ** 2, 1.0)
    df = L - K + 1
    if 1.0 - r2 <= 1e-15:
        return TestStatistic(ANDERSON_CAP, df, 0.0, capped=True)
    statistic = -n_obs * math.log1p(-r2)
    return TestStatistic(statistic, df, float(stats.chi2.sf(statistic, df)))


# ---------------------------------------------------------------- pipeline


def estimate_panel(
    panel: PanelDataset,
    spec: DesignSpec | None = None,
    method: str = "gmm",
    instruments: InstrumentSet | np.ndarray | None = None,
    grouping: Sequence[Sequence[str]] | None = None,
    hac_lags: int = 1,
) -> EstimationResult:
    """Build the design and run ``ols``, ``tsls`` or ``gmm`` on a panel.

    Without explicit ``instruments`` the leave-one-out group means of
    ``d_airline`` (per ``grouping``) are used.
    """
    spec = spec or DesignSpec()
    design = build_design(panel, spec)
    if method == "ols":
        return ols(design.y, design.X, names=design.names)
    if method not in ("tsls", "gmm"):
        raise ValueError(f"unknown estimation method {method!r}")
    if instruments is None:
        instruments = build_leave_one_out(panel, grouping)
    Z = instruments.values if isinstance(instruments, InstrumentSet) else np.asarray(instruments)
    if method == "tsls":
        return two_stage_least_squares(
            design.y, design.X_exog, design.X_endog, Z, names=design.names
        )
    return gmm_two_step(
        design.y,
        design.X_exog,
        design.X_endog,
        Z,
        hac_lags,
        groups=design.groups,
        times=design.times,
        names=design.names,
    )


# ---------------------------------------------------------------- report

_LABELS = {
    "const": "Constant",
    "d_coach": "ΔCoach",
    "d_diesel": "ΔDiesel",
    "d_tire": "ΔTire",
    "d_toll": "ΔToll",
    "d_airline": "ΔAirline",
}


def _label(name: str) -> str:
    if name.startswith("city[") and name.endswith("]"):
        return f"city - {name[5:-1]}"
    return _LABELS.get(name, name)


def _significant(estimate: float, std_error: float) -> bool:
    return std_error > 0 and abs(estimate / std_error) > CRITICAL_1PCT


def format_cell(estimate: float, std_error: float) -> str:
    """``estimate[‡] (se)`` with three decimals; ‡ marks 1% two-sided significance."""
    mark = DAGGER if _significant(estimate, std_error) else ""
    return f"{estimate:.3f}{mark} ({std_error:.3f})"


def _format_test(test: TestStatistic | None) -> str:
    if test is None:
        return "n/a"
    mark = DAGGER if test.p_value < 0.01 else ""
    if test.capped:
        return f"inf{mark}"
    return f"{test.statistic:.3f}{mark}"


def report_rows(result: EstimationResult) -> list[tuple[str, str]]:
    """(label, cell) pairs in report order; time dummies are omitted."""
    order = []
    if "const" in result.names:
        order.append("const")
    dummies = [n for n in result.names if n.startswith(("city[", "month["))]
    order += [n for n in result.names if n not in order and n not in dummies and n != "d_airline"]
    if "d_airline" in result.names:
        order.append("d_airline")
    order += [n for n in dummies if n.startswith("city[")]
    rows = [(_label(n), format_cell(result.coef(n), result.se(n))) for n in order]
    rows += [
        ("Adjusted R²", f"{result.adj_r2:.3f}"),
        ("MSE", f"{result.mse:.3f}"),
        ("F Statistic", _format_test(result.f_stat)),
        ("Anderson Statistic", _format_test(result.anderson)),
        ("Hansen Statistic", _format_test(result.hansen_j)),
        ("Number of Observations", str(result.n_obs)),
    ]
    return rows


def report(result: EstimationResult, dependent: str = "d_coach") -> str:
    """Plain-text estimation table."""
    rows = report_rows(result)
    width = max(len(label) for label, _ in rows + [("Variables", "")])
    cell_width = max(len(cell) for _, cell in rows)
    header = f"{'Variables':<{width}}  {_label(dependent):>{cell_width}}"
    lines = [header, "-" * len(header)]
    lines += [f"{label:<{width}}  {cell:>{cell_width}}" for label, cell in rows]
    lines.append("-" * len(header))
    lines.append(f"{DAGGER} Significant at 1% level.")
    if any(n.startswith("month[") for n in result.names):
        lines.append("Estimated time-specific effects omitted.")
    return "\n".join(lines) + "\n"


def report_csv(result: EstimationResult) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["row", "cell"])
    writer.writerows(report_rows(result))
    return buf.getvalue()

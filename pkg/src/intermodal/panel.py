"""City x month panels of percent fare and cost changes.

Variables are percent changes per month, ``100 * (ln X_t - ln X_{t-1})``.
Rows are stored city-major: all months of the first city, then the next.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Iterable, Mapping, Sequence

import numpy as np

from .equilibrium import solve_closed_form
from .model import MarketEnv, ModeParams, reaction_exponent

__all__ = [
    "VARIABLES",
    "SHIFTERS",
    "CSV_COLUMNS",
    "STUDY_CITIES",
    "SchemaError",
    "Observation",
    "PanelDataset",
    "Kappa",
    "DgpConfig",
    "PanelComponents",
    "default_city_labels",
    "default_month_labels",
    "simulate_panel",
    "generate_panel",
    "structural_generate",
    "random_walk_structural_panel",
    "write_csv",
    "read_csv",
]

SHIFTERS = ("d_diesel", "d_tire", "d_toll")
VARIABLES = ("d_coach",) + SHIFTERS + ("d_airline",)
CSV_COLUMNS = ("city", "month") + VARIABLES

# Base city first so that it becomes the omitted dummy by default.
STUDY_CITIES = (
    "Belo Horizonte",
    "Brasília",
    "Curitiba",
    "Goiânia",
    "Rio de Janeiro",
    "Salvador",
    "São Paulo",
)

# Calibrated shifter moments (percent per month).
CALIBRATED_MEANS = {"d_diesel": 0.713, "d_tire": 0.256, "d_toll": 0.913, "d_airline": 0.769}
CALIBRATED_SDS = {"d_diesel": 2.628, "d_tire": 1.990, "d_toll": 2.887, "d_airline": 4.193}


class SchemaError(ValueError):
    """A panel file or row set violates the panel schema."""


@dataclass(frozen=True)
class Observation:
    city: str
    month: str
    d_coach: float
    d_diesel: float
    d_tire: float
    d_toll: float
    d_airline: float


def default_city_labels(n_cities: int) -> tuple[str, ...]:
    if n_cities == len(STUDY_CITIES):
        return STUDY_CITIES
    return tuple(f"city{j + 1:02d}" for j in range(n_cities))


def default_month_labels(n_months: int, start: str = "1999-09") -> tuple[str, ...]:
    year, month = (int(part) for part in start.split("-"))
    labels = []
    for k in range(n_months):
        m = month - 1 + k
        labels.append(f"{year + m // 12:04d}-{m % 12 + 1:02d}")
    return tuple(labels)


@dataclass(frozen=True, eq=False)
class PanelDataset:
    """A balanced panel stored column-wise.

    ``columns`` maps each name in ``VARIABLES`` to a float array of length
    ``n_cities * n_months`` in city-major order.
    """

    city_ids: tuple[str, ...]
    time_ids: tuple[str, ...]
    columns: Mapping[str, np.ndarray]

    def __post_init__(self) -> None:
        if len(self.city_ids) == 0 or len(self.time_ids) == 0:
            raise SchemaError("panel has no rows")
        if len(set(self.city_ids)) != len(self.city_ids):
            raise SchemaError("duplicate city labels")
        if len(set(self.time_ids)) != len(self.time_ids):
            raise SchemaError("duplicate month labels")
        n = len(self.city_ids) * len(self.time_ids)
        cols = {}
        for name in VARIABLES:
            if name not in self.columns:
                raise SchemaError(f"missing column {name!r}")
            values = np.array(self.columns[name], dtype=float).reshape(-1)
            if values.shape != (n,):
                raise SchemaError(f"column {name!r} has {values.size} values, expected {n}")
            if not np.all(np.isfinite(values)):
                bad = int(np.flatnonzero(~np.isfinite(values))[0])
                raise SchemaError(
                    f"non-finite value in column {name!r} at "
                    f"({self.city_of(bad)}, {self.month_of(bad)})"
                )
            values.setflags(write=False)
            cols[name] = values
        object.__setattr__(self, "columns", cols)

    @property
    def n_cities(self) -> int:
        return len(self.city_ids)

    @property
    def n_months(self) -> int:
        return len(self.time_ids)

    @property
    def n_obs(self) -> int:
        return self.n_cities * self.n_months

    def city_of(self, i: int) -> str:
        return self.city_ids[i // len(self.time_ids)]

    def month_of(self, i: int) -> str:
        return self.time_ids[i % len(self.time_ids)]

    @property
    def city_codes(self) -> np.ndarray:
        return np.repeat(np.arange(self.n_cities), self.n_months)

    @property
    def time_codes(self) -> np.ndarray:
        return np.tile(np.arange(self.n_months), self.n_cities)

    def column(self, name: str) -> np.ndarray:
        try:
            return self.columns[name]
        except KeyError:
            raise KeyError(f"unknown panel column {name!r}; have {list(self.columns)}") from None

    def matrix(self, name: str) -> np.ndarray:
        """Column reshaped to (n_cities, n_months)."""
        return self.column(name).reshape(self.n_cities, self.n_months)

    def replace_columns(self, **updates: np.ndarray) -> "PanelDataset":
        cols = dict(self.columns)
        cols.update(updates)
        return PanelDataset(self.city_ids, self.time_ids, cols)

    @property
    def rows(self) -> list[Observation]:
        data = [self.columns[name].tolist() for name in VARIABLES]
        return [
            Observation(self.city_of(i), self.month_of(i), *(col[i] for col in data))
            for i in range(self.n_obs)
        ]

    @classmethod
    def from_rows(cls, rows: Iterable[Observation]) -> "PanelDataset":
        """Build a panel from observations in any order.

        City and month order follow first appearance. Raises ``SchemaError``
        when a (city, month) pair is duplicated or missing.
        """
        rows = list(rows)
        if not rows:
            raise SchemaError("no data rows")
        cities = list(dict.fromkeys(r.city for r in rows))
        months = list(dict.fromkeys(r.month for r in rows))
        city_pos = {c: j for j, c in enumerate(cities)}
        month_pos = {m: t for t, m in enumerate(months)}
        n_months = len(months)
        index = {}
        for k, r in enumerate(rows):
            key = (r.city, r.month)
            if key in index:
                raise SchemaError(f"duplicate observation for (city={r.city!r}, month={r.month!r})")
            index[key] = k
        missing = [(c, m) for c in cities for m in months if (c, m) not in index]
        if missing:
            c, m = missing[0]
            raise SchemaError(
                f"unbalanced panel: missing observation for (city={c!r}, month={m!r})"
                + (f" and {len(missing) - 1} more" if len(missing) > 1 else "")
            )
        cols = {name: np.empty(len(rows)) for name in VARIABLES}
        for r in rows:
            i = city_pos[r.city] * n_months + month_pos[r.month]
            for name in VARIABLES:
                cols[name][i] = getattr(r, name)
        return cls(tuple(cities), tuple(months), cols)

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, PanelDataset):
            return NotImplemented
        return (
            self.city_ids == other.city_ids
            and self.time_ids == other.time_ids
            and all(np.array_equal(self.columns[v], other.columns[v]) for v in VARIABLES)
        )

    __hash__ = None  # type: ignore[assignment]


@dataclass(frozen=True)
class Kappa:
    """Coefficients of the reduced-form coach pricing equation."""

    constant: float = 0.0
    diesel: float = 0.267
    tire: float = 0.255
    toll: float = 0.516
    airline: float = 0.311

    def as_dict(self) -> dict[str, float]:
        return {
            "const": self.constant,
            "d_diesel": self.diesel,
            "d_tire": self.tire,
            "d_toll": self.toll,
            "d_airline": self.airline,
        }


@dataclass(frozen=True)
class DgpConfig:
    """Data-generating process for the reduced-form panel.

    ``shifter_means``/``shifter_sds`` cover the three cost shifters and
    the exogenous part of ``d_airline``, whose standard deviation splits
    into a national factor common to all cities (``national_factor_sd``)
    and a city-specific shock with the remaining variance. The coach error
    is AR(1) within each city with marginal standard deviation
    ``error_sd * heteroskedasticity_scale[j]``; ``endogeneity_rho`` times
    that error is added to ``d_airline``.
    """

    kappa: Kappa = field(default_factory=Kappa)
    city_effects: tuple[float, ...] | None = None
    time_effect_sd: float = 0.0
    shifter_means: Mapping[str, float] = field(default_factory=lambda: dict(CALIBRATED_MEANS))
    shifter_sds: Mapping[str, float] = field(default_factory=lambda: dict(CALIBRATED_SDS))
    error_sd: float = 1.345
    error_ar1: float = 0.2
    heteroskedasticity_scale: tuple[float, ...] | None = None
    endogeneity_rho: float = 0.5
    national_factor_sd: float = 3.0
    seed: int = 0

    def __post_init__(self) -> None:
        keys = set(SHIFTERS) | {"d_airline"}
        for label, mapping in (("shifter_means", self.shifter_means), ("shifter_sds", self.shifter_sds)):
            unknown = set(mapping) - keys
            if unknown:
                raise ValueError(f"{label}: unknown variables {sorted(unknown)}")
        for name, sd in self.shifter_sds.items():
            if not sd >= 0:
                raise ValueError(f"shifter_sds[{name!r}] must be >= 0, got {sd}")
        for name in ("time_effect_sd", "error_sd", "national_factor_sd"):
            if not getattr(self, name) >= 0:
                raise ValueError(f"{name} must be >= 0, got {getattr(self, name)}")
        if not abs(self.error_ar1) < 1:
            raise ValueError(f"error_ar1 must lie in (-1, 1), got {self.error_ar1}")
        if not abs(self.endogeneity_rho) <= 1:
            raise ValueError(f"endogeneity_rho must lie in [-1, 1], got {self.endogeneity_rho}")
        if self.national_factor_sd > self.airline_sd:
            raise ValueError(
                f"national_factor_sd ({self.national_factor_sd}) exceeds the d_airline sd "
                f"({self.airline_sd})"
            )
        if self.heteroskedasticity_scale is not None and any(
            not s >= 0 for s in self.heteroskedasticity_scale
        ):
            raise ValueError("heteroskedasticity_scale entries must be >= 0")

    @property
    def airline_sd(self) -> float:
        return float(self.shifter_sds.get("d_airline", 0.0))

    @property
    def airline_idiosyncratic_sd(self) -> float:
        return math.sqrt(max(self.airline_sd**2 - self.national_factor_sd**2, 0.0))


@dataclass(frozen=True)
class PanelComponents:
    """Latent draws behind a simulated panel, arrays shaped (n_cities, n_months)."""

    error: np.ndarray
    national_factor: np.ndarray
    airline_shock: np.ndarray
    time_effects: np.ndarray
    city_effects: np.ndarray


def _per_city(values: Sequence[float] | None, n_cities: int, default: float, name: str) -> np.ndarray:
    if values is None:
        return np.full(n_cities, default)
    arr = np.asarray(values, dtype=float)
    if arr.shape != (n_cities,):
        raise ValueError(f"{name} has {arr.size} entries, expected one per city ({n_cities})")
    return arr


def simulate_panel(
    config: DgpConfig,
    n_cities: int = 7,
    n_months: int = 75,
    city_ids: Sequence[str] | None = None,
    time_ids: Sequence[str] | None = None,
) -> tuple[PanelDataset, PanelComponents]:
    """Draw a panel together with its latent components.

    The draw order below is part of the determinism contract; do not reorder.
    """
    if n_cities < 2:
        raise ValueError("need at least 2 cities to build leave-one-out instruments")
    if n_months < 3:
        raise ValueError("need at least 3 months")
    city_ids = tuple(city_ids) if city_ids is not None else default_city_labels(n_cities)
    time_ids = tuple(time_ids) if time_ids is not None else default_month_labels(n_months)
    if len(city_ids) != n_cities or len(time_ids) != n_months:
        raise ValueError("label counts do not match panel dimensions")

    rng = np.random.default_rng(config.seed)
    shape = (n_cities, n_months)
    means, sds = config.shifter_means, config.shifter_sds

    shifters = {
        name: means.get(name, 0.0) + sds.get(name, 0.0) * rng.standard_normal(shape)
        for name in SHIFTERS
    }
    national = config.national_factor_sd * rng.standard_normal(n_months)
    airline_shock = config.airline_idiosyncratic_sd * rng.standard_normal(shape)
    time_effects = config.time_effect_sd * rng.standard_normal(n_months)

    scale = config.error_sd * _per_city(
        config.heteroskedasticity_scale, n_cities, 1.0, "heteroskedasticity_scale"
    )
    rho = config.error_ar1
    innovations = rng.standard_normal(shape)
    error = np.empty(shape)
    error[:, 0] = scale * innovations[:, 0]
    innovation_sd = scale * math.sqrt(1.0 - rho * rho)
    for t in range(1, n_months):
        error[:, t] = rho * error[:, t - 1] + innovation_sd * innovations[:, t]

    city_effects = _per_city(config.city_effects, n_cities, 0.0, "city_effects")

    airline = (
        means.get("d_airline", 0.0)
        + national[None, :]
        + airline_shock
        + config.endogeneity_rho * error
    )
    k = config.kappa
    coach = (
        k.constant
        + k.diesel * shifters["d_diesel"]
        + k.tire * shifters["d_tire"]
        + k.toll * shifters["d_toll"]
        + k.airline * airline
        + city_effects[:, None]
        + time_effects[None, :]
        + error
    )
    columns = {"d_coach": coach, **shifters, "d_airline": airline}
    panel = PanelDataset(city_ids, time_ids, {k: v.reshape(-1) for k, v in columns.items()})
    components = PanelComponents(
        error=error,
        national_factor=national,
        airline_shock=airline_shock,
        time_effects=time_effects,
        city_effects=city_effects,
    )
    return panel, components


def generate_panel(config: DgpConfig, n_cities: int = 7, n_months: int = 75) -> PanelDataset:
    """Simulate a balanced panel from the reduced-form pricing equation."""
    return simulate_panel(config, n_cities, n_months)[0]


def structural_generate(
    params_1: Sequence[Sequence[ModeParams]],
    params_2: Sequence[Sequence[ModeParams]],
    env: Sequence[MarketEnv],
    shifters: Mapping[str, np.ndarray] | None = None,
    city_ids: Sequence[str] | None = None,
    time_ids: Sequence[str] | None = None,
) -> PanelDataset:
    """Panel of equilibrium fare changes from per-period structural parameters.

    Parameters
    ----------
    params_1, params_2 : nested sequences, shape (n_cities, n_months + 1)
        Coach and airline parameters for each city and period (levels;
        the first period is the base and produces no row).
    env : sequence of MarketEnv, length n_months + 1
        Common market state per period.
    shifters : mapping, optional
        Log levels ``ln W`` of observed cost shifters, arrays of shape
        (n_cities, n_months + 1) keyed by a name in ``SHIFTERS``. Omitted
        shifters are emitted as zero changes.

    Returns
    -------
    PanelDataset
        ``d_coach`` and ``d_airline`` are ``100 * diff(ln p)`` of the
        equilibrium prices solved period by period.
    """
    n_cities = len(params_1)
    if n_cities < 1 or len(params_2) != n_cities:
        raise ValueError("params_1 and params_2 must cover the same cities")
    n_levels = len(env)
    if n_levels < 2:
        raise ValueError("need at least two periods of levels")
    log_p = np.empty((2, n_cities, n_levels))
    for j in range(n_cities):
        if len(params_1[j]) != n_levels or len(params_2[j]) != n_levels:
            raise ValueError(f"city {j}: parameter paths must have {n_levels} periods")
        for t in range(n_levels):
            eq = solve_closed_form(params_1[j][t], params_2[j][t], env[t])
            log_p[0, j, t] = math.log(eq.prices.p1)
            log_p[1, j, t] = math.log(eq.prices.p2)
    n_months = n_levels - 1
    columns = {
        "d_coach": 100.0 * np.diff(log_p[0], axis=1),
        "d_airline": 100.0 * np.diff(log_p[1], axis=1),
    }
    shifters = dict(shifters or {})
    unknown = set(shifters) - set(SHIFTERS)
    if unknown:
        raise ValueError(f"unknown shifter columns {sorted(unknown)}")
    for name in SHIFTERS:
        if name in shifters:
            levels = np.asarray(shifters[name], dtype=float)
            if levels.shape != (n_cities, n_levels):
                raise ValueError(f"{name} levels must have shape {(n_cities, n_levels)}")
            columns[name] = 100.0 * np.diff(levels, axis=1)
        else:
            columns[name] = np.zeros((n_cities, n_months))
    city_ids = tuple(city_ids) if city_ids is not None else default_city_labels(n_cities)
    time_ids = tuple(time_ids) if time_ids is not None else default_month_labels(n_months)
    return PanelDataset(city_ids, time_ids, {k: v.reshape(-1) for k, v in columns.items()})


def random_walk_structural_panel(
    base_1: ModeParams,
    base_2: ModeParams,
    n_cities: int = 7,
    n_months: int = 75,
    *,
    diesel_loading: float = 1.0,
    diesel_sd: float = 0.03,
    coach_cost_sd: float = 0.01,
    national_airline_sd: float = 0.04,
    city_airline_sd: float = 0.03,
    seed: int | np.random.SeedSequence = 0,
) -> tuple[PanelDataset, dict[str, float]]:
    """Structural panel driven by random-walk log cost paths.

    Coach cost: ``ln phi_1 = ln phi_1(base) + diesel_loading * ln W + ln u``
    where ``ln W`` (observed, reported as ``d_diesel``) and ``ln u``
    (unobserved) are random walks per city. Airline cost ``ln phi_2`` is a
    national random walk plus a city random walk. Income is constant.

    The unobserved coach cost moves the coach fare and, through the
    airline's best response, the airline fare, so ``d_airline`` is
    endogenous; other cities' airline changes share only the national
    component. Returns the panel and the implied true coefficients
    ``{"d_diesel": mu_1 * loading, "d_airline": mu_1 * beta_12}``.
    """
    rng = np.random.default_rng(seed)
    shape = (n_cities, n_months + 1)

    def walk(steps: np.ndarray) -> np.ndarray:
        steps = steps.copy()
        steps[..., 0] = 0.0
        return np.cumsum(steps, axis=-1)

    log_w = walk(diesel_sd * rng.standard_normal(shape))
    log_u = walk(coach_cost_sd * rng.standard_normal(shape))
    log_national = walk(national_airline_sd * rng.standard_normal(n_months + 1))
    log_city = walk(city_airline_sd * rng.standard_normal(shape))

    log_phi_1 = math.log(base_1.phi) + diesel_loading * log_w + log_u
    log_phi_2 = math.log(base_2.phi) + log_national[None, :] + log_city
    params_1 = [[replace(base_1, phi=math.exp(v)) for v in row] for row in log_phi_1]
    params_2 = [[replace(base_2, phi=math.exp(v)) for v in row] for row in log_phi_2]
    env = [MarketEnv(1.0)] * (n_months + 1)
    panel = structural_generate(params_1, params_2, env, shifters={"d_diesel": log_w})
    mu_1 = reaction_exponent(base_1)
    return panel, {"d_diesel": mu_1 * diesel_loading, "d_airline": mu_1 * base_1.beta_cross}


def _format(value: float) -> str:
    return repr(float(value))


def write_csv(panel: PanelDataset, path: str | Path) -> None:
    """Write the panel with the fixed column order, one row per (city, month)."""
    data = [panel.column(name).tolist() for name in VARIABLES]
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(CSV_COLUMNS)
        for i in range(panel.n_obs):
            writer.writerow(
                [panel.city_of(i), panel.month_of(i)] + [_format(col[i]) for col in data]
            )


def read_csv(path: str | Path) -> PanelDataset:
    """Read and validate a panel file.

    Raises
    ------
    SchemaError
        On a missing or misordered header, a short row, a non-numeric or
        non-finite cell (with its line and column), duplicate or missing
        (city, month) pairs, or a file with no data rows.
    """
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise SchemaError(f"{path}: empty file, header row required") from None
        header = [h.strip() for h in header]
        missing = [c for c in CSV_COLUMNS if c not in header]
        if missing:
            raise SchemaError(f"{path}: line 1: missing column(s) {missing}")
        if tuple(header) != CSV_COLUMNS:
            raise SchemaError(
                f"{path}: line 1: columns must be exactly {list(CSV_COLUMNS)}, got {header}"
            )
        rows = []
        for record in reader:
            line = reader.line_num
            if not record or all(not cell.strip() for cell in record):
                continue
            if len(record) != len(CSV_COLUMNS):
                raise SchemaError(
                    f"{path}: line {line}: expected {len(CSV_COLUMNS)} fields, got {len(record)}"
                )
            city, month = record[0].strip(), record[1].strip()
            if not city or not month:
                raise SchemaError(f"{path}: line {line}: empty city or month label")
            values = []
            for name, cell in zip(VARIABLES, record[2:]):
                try:
                    value = float(cell)
                except ValueError:
                    raise SchemaError(
                        f"{path}: line {line}, column {name!r}: non-numeric value {cell!r}"
                    ) from None
                if not math.isfinite(value):
                    raise SchemaError(
                        f"{path}: line {line}, column {name!r}: non-finite value {cell!r}"
                    )
                values.append(value)
            rows.append(Observation(city, month, *values))
    if not rows:
        raise SchemaError(f"{path}: no data rows")
    try:
        return PanelDataset.from_rows(rows)
    except SchemaError as exc:
        raise SchemaError(f"{path}: {exc}") from None

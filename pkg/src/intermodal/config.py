"""TOML run configuration shared by all CLI subcommands."""

from __future__ import annotations

import re
import sys
from pathlib import Path
from typing import Literal, Optional

from pydantic import BaseModel, ConfigDict, Field, PrivateAttr, ValidationError

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

from .econometrics import DesignSpec
from .equilibrium import ShockScenario
from .model import DomainError, MarketEnv, ModeParams
from .panel import DgpConfig, Kappa, CALIBRATED_MEANS, CALIBRATED_SDS

__all__ = ["ConfigError", "RunConfig", "load_config"]


class ConfigError(ValueError):
    """Unreadable or invalid configuration, located by line and/or field."""


class _Section(BaseModel):
    model_config = ConfigDict(extra="forbid")


class ModeBlock(_Section):
    alpha: float
    beta_own: float
    beta_cross: float = 0.0
    delta: float = 0.0
    fixed_cost: float = 1.0
    phi: float = 1.0

    def build(self) -> ModeParams:
        return ModeParams(**self.model_dump())


class MarketBlock(_Section):
    income: float = 1.0


class SolverBlock(_Section):
    damping: float = 1.0
    tol: float = 1e-10
    max_iter: int = 10_000
    start: tuple[float, float] = (1.0, 1.0)


class ScenarioBlock(_Section):
    name: str = ""
    kind: Literal["cost", "rivalry"]
    target_mode: int = 1
    phi_multiplier: float = 1.0
    beta_own_delta: float = 0.0
    beta_cross_delta: float = 0.0

    def build(self) -> ShockScenario:
        return ShockScenario(**self.model_dump())


class ShockBlock(_Section):
    output: str = "comparative_statics.csv"
    scenarios: list[ScenarioBlock] = Field(default_factory=list)


class KappaBlock(_Section):
    constant: float = 0.0
    diesel: float = 0.267
    tire: float = 0.255
    toll: float = 0.516
    airline: float = 0.311


class DgpBlock(_Section):
    kappa: KappaBlock = Field(default_factory=KappaBlock)
    city_effects: Optional[list[float]] = None
    time_effect_sd: float = 0.0
    shifter_means: dict[str, float] = Field(default_factory=lambda: dict(CALIBRATED_MEANS))
    shifter_sds: dict[str, float] = Field(default_factory=lambda: dict(CALIBRATED_SDS))
    error_sd: float = 1.345
    error_ar1: float = 0.2
    heteroskedasticity_scale: Optional[list[float]] = None
    endogeneity_rho: float = 0.5
    national_factor_sd: float = 3.0

    def build(self, seed: int) -> DgpConfig:
        data = self.model_dump()
        data["kappa"] = Kappa(**data["kappa"])
        # a partial table overrides only the variables it names
        data["shifter_means"] = {**CALIBRATED_MEANS, **data["shifter_means"]}
        data["shifter_sds"] = {**CALIBRATED_SDS, **data["shifter_sds"]}
        for key in ("city_effects", "heteroskedasticity_scale"):
            if data[key] is not None:
                data[key] = tuple(data[key])
        return DgpConfig(seed=seed, **data)


class GenerateBlock(_Section):
    output: str = "panel.csv"
    n_cities: int = Field(7, ge=2)
    n_months: int = Field(75, ge=3)
    dgp: DgpBlock = Field(default_factory=DgpBlock)


class DesignBlock(_Section):
    dependent: str = "d_coach"
    exogenous_regressors: list[str] = Field(default_factory=lambda: ["d_diesel", "d_tire", "d_toll"])
    endogenous_regressors: list[str] = Field(default_factory=lambda: ["d_airline"])
    include_constant: bool = True
    city_dummy_base: Optional[str] = None
    time_dummies: bool = True

    def build(self) -> DesignSpec:
        data = self.model_dump()
        data["exogenous_regressors"] = tuple(data["exogenous_regressors"])
        data["endogenous_regressors"] = tuple(data["endogenous_regressors"])
        return DesignSpec(**data)


class EstimateBlock(_Section):
    panel: Optional[str] = None
    method: Literal["ols", "tsls", "gmm"] = "gmm"
    hac_lags: int = Field(1, ge=0)
    grouping: Optional[list[list[str]]] = None
    inflation_csv: Optional[str] = None
    output_prefix: str = "estimation"
    design: DesignBlock = Field(default_factory=DesignBlock)


class MonteCarloBlock(_Section):
    replications: int = Field(500, ge=2)
    instrument_mode: Literal["valid", "invalid", "irrelevant"] = "valid"
    invalid_strength: float = 0.5
    estimators: list[Literal["ols", "tsls", "gmm"]] = Field(
        default_factory=lambda: ["ols", "tsls", "gmm"]
    )
    test_level: float = Field(0.05, gt=0, lt=1)
    output_prefix: str = "montecarlo_summary"


class RunConfig(_Section):
    seed: int = 0
    mode1: Optional[ModeBlock] = None
    mode2: Optional[ModeBlock] = None
    market: MarketBlock = Field(default_factory=MarketBlock)
    solver: SolverBlock = Field(default_factory=SolverBlock)
    shock: ShockBlock = Field(default_factory=ShockBlock)
    generate: GenerateBlock = Field(default_factory=GenerateBlock)
    estimate: EstimateBlock = Field(default_factory=EstimateBlock)
    montecarlo: MonteCarloBlock = Field(default_factory=MonteCarloBlock)

    _source: Optional[Path] = PrivateAttr(default=None)
    _text: str = PrivateAttr(default="")

    @property
    def source(self) -> Optional[Path]:
        return self._source

    def modes(self) -> tuple[ModeParams, ModeParams, MarketEnv]:
        if self.mode1 is None or self.mode2 is None:
            raise ConfigError(self.locate(("mode1",), "sections [mode1] and [mode2] are required"))
        out = []
        for key, block in (("mode1", self.mode1), ("mode2", self.mode2)):
            try:
                out.append(block.build())
            except DomainError as exc:
                raise ConfigError(self.locate((key,), str(exc))) from None
        try:
            env = MarketEnv(self.market.income)
        except DomainError as exc:
            raise ConfigError(self.locate(("market", "income"), str(exc))) from None
        return out[0], out[1], env

    def scenarios(self) -> list[ShockScenario]:
        built = []
        for i, block in enumerate(self.shock.scenarios):
            try:
                built.append(block.build())
            except DomainError as exc:
                raise ConfigError(self.locate(("shock", "scenarios", i), str(exc))) from None
        return built

    def dgp(self, seed: int) -> DgpConfig:
        try:
            return self.generate.dgp.build(seed)
        except ValueError as exc:
            raise ConfigError(self.locate(("generate", "dgp"), str(exc))) from None

    def design(self) -> DesignSpec:
        try:
            return self.estimate.design.build()
        except ValueError as exc:
            raise ConfigError(self.locate(("estimate", "design"), str(exc))) from None

    def resolve_input(self, path: str) -> Path:
        p = Path(path)
        if p.is_absolute() or self.source is None:
            return p
        return self.source.parent / p

    def locate(self, loc: tuple, message: str) -> str:
        return _format_location(self._source, self._text, loc, message)


def _key_line(text: str, loc: tuple) -> int | None:
    """Best-effort line number of the TOML key named by a pydantic location."""
    keys = [str(k) for k in loc if not isinstance(k, int)]
    if not text or not keys:
        return None
    lines = text.splitlines()
    # longest dotted table header that prefixes the location, then the key beneath it
    for split in range(len(keys), 0, -1):
        header = ".".join(keys[:split])
        pattern = re.compile(r"^\s*\[\[?\s*" + re.escape(header) + r"\s*\]\]?\s*$")
        for n, line in enumerate(lines, start=1):
            if pattern.match(line):
                if split == len(keys):
                    return n
                key = keys[split]
                key_re = re.compile(r"^\s*" + re.escape(key) + r"\s*=")
                for m in range(n, len(lines)):
                    if lines[m].lstrip().startswith("["):
                        break
                    if key_re.match(lines[m]):
                        return m + 1
                return n
    key_re = re.compile(r"^\s*" + re.escape(keys[-1]) + r"\s*=")
    for n, line in enumerate(lines, start=1):
        if key_re.match(line):
            return n
    return None


def _format_location(source: Path | None, text: str, loc: tuple, message: str) -> str:
    where = str(source) if source else "<config>"
    line = _key_line(text, loc)
    if line is not None:
        where += f":{line}"
    field = ".".join(str(k) for k in loc)
    return f"{where}: field {field!r}: {message}" if field else f"{where}: {message}"


def load_config(path: str | Path) -> RunConfig:
    """Parse and validate a TOML run configuration.

    Raises ``ConfigError`` carrying the file, line and field of the problem.
    """
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError(f"{path}: cannot read config: {exc.strerror}") from None
    try:
        data = tomllib.loads(text)
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError(f"{path}: TOML syntax error: {exc}") from None
    try:
        config = RunConfig.model_validate(data)
    except ValidationError as exc:
        first = exc.errors()[0]
        message = first["msg"]
        if len(exc.errors()) > 1:
            message += f" (and {len(exc.errors()) - 1} more error(s))"
        raise ConfigError(_format_location(path, text, tuple(first["loc"]), message)) from None
    config._source = path
    config._text = text
    return config

"""Coach/airline Bertrand price competition and its panel GMM estimation."""

from .equilibrium import (
    EquilibriumResult,
    ShockScenario,
    apply_shock,
    comparative_statics_report,
    iterate_to_equilibrium,
    solve_closed_form,
)
from .model import MarketEnv, ModeParams, PricePair, QuantityPair, demand, reaction_price
from .panel import DgpConfig, Kappa, PanelDataset, generate_panel, read_csv, write_csv

__version__ = "0.1.0"

__all__ = [
    "EquilibriumResult",
    "ShockScenario",
    "apply_shock",
    "comparative_statics_report",
    "iterate_to_equilibrium",
    "solve_closed_form",
    "MarketEnv",
    "ModeParams",
    "PricePair",
    "QuantityPair",
    "demand",
    "reaction_price",
    "DgpConfig",
    "Kappa",
    "PanelDataset",
    "generate_panel",
    "read_csv",
    "write_csv",
]

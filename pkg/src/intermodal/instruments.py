"""Leave-one-out instruments built from other cities' airline fare changes."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .panel import PanelDataset

__all__ = ["InstrumentError", "InstrumentSet", "default_grouping", "build_leave_one_out"]


class InstrumentError(ValueError):
    pass


@dataclass(frozen=True, eq=False)
class InstrumentSet:
    """Excluded instruments, one column per city group.

    ``values`` has shape (n_obs, L) in the panel's row order.
    """

    values: np.ndarray
    names: tuple[str, ...]
    grouping: tuple[tuple[str, ...], ...]

    @property
    def n_instruments(self) -> int:
        return self.values.shape[1]


def default_grouping(city_ids: Sequence[str]) -> tuple[tuple[str, ...], tuple[str, ...]]:
    """Split the ordered city labels into two contiguous halves (first half smaller)."""
    cities = tuple(city_ids)
    if len(cities) < 3:
        # two groups would leave a singleton group empty after exclusion
        return (cities,)  # type: ignore[return-value]
    half = len(cities) // 2
    return cities[:half], cities[half:]


def _check_grouping(grouping: Sequence[Sequence[str]], city_ids: Sequence[str]) -> tuple[tuple[str, ...], ...]:
    groups = tuple(tuple(g) for g in grouping)
    if not groups:
        raise InstrumentError("grouping must contain at least one group")
    known = set(city_ids)
    seen: set[str] = set()
    for g in groups:
        for city in g:
            if city not in known:
                raise InstrumentError(f"grouping names unknown city {city!r}")
            if city in seen:
                raise InstrumentError(f"city {city!r} appears in more than one group")
            seen.add(city)
    absent = [c for c in city_ids if c not in seen]
    if absent:
        raise InstrumentError(f"grouping is not a partition; cities not assigned: {absent}")
    return groups


def build_leave_one_out(
    panel: PanelDataset,
    grouping: Sequence[Sequence[str]] | None = None,
    column: str = "d_airline",
) -> InstrumentSet:
    """Group means of ``column`` over other cities, one instrument per group.

    For city ``j`` at month ``t``, instrument ``g`` is the mean of
    ``column`` at ``t`` over the cities of group ``g`` other than ``j``.

    Raises
    ------
    InstrumentError
        If the grouping is not a partition of the panel's cities, or a group
        is empty once a city is excluded from it.
    """
    groups = _check_grouping(
        grouping if grouping is not None else default_grouping(panel.city_ids), panel.city_ids
    )
    pos = {c: j for j, c in enumerate(panel.city_ids)}
    values = panel.matrix(column)
    out = np.empty((panel.n_cities, panel.n_months, len(groups)))
    for g, members in enumerate(groups):
        idx = [pos[c] for c in members]
        for j, city in enumerate(panel.city_ids):
            # sum the others directly so city j's value cannot leak in via rounding
            others = [i for i in idx if i != j]
            if not others:
                raise InstrumentError(
                    f"group {g + 1} {list(members)} is empty after excluding {city!r}"
                )
            out[j, :, g] = values[others].mean(axis=0)
    names = tuple(f"z_{column}_g{g + 1}" for g in range(len(groups)))
    return InstrumentSet(out.reshape(panel.n_obs, len(groups)), names, groups)

"""Firm-to-unit mapping at the four analysis scales, with attribute imputation.

Missing country, industry and employee values are filled per realization
by drawing, with replacement, from the values that are known. Each
attribute gets its own random stream, so imputing industries never shifts
the employee draws for the same seed.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from enum import Enum
from functools import cached_property

import numpy as np

from .errors import DataError
from .graph import SupplyGraph

logger = logging.getLogger(__name__)


class Scale(str, Enum):
    FIRM = "firm"
    COUNTRY_INDUSTRY = "country-industry"
    INDUSTRY = "industry"
    COUNTRY = "country"

    @classmethod
    def parse(cls, text: str) -> Scale:
        key = text.strip().lower().replace("_", "-")
        for s in cls:
            if s.value == key:
                return s
        raise ValueError(f"unknown scale {text!r}; expected one of {[s.value for s in cls]}")


ATTRIBUTES = ("country", "industry", "employees")
_STREAM = {name: i for i, name in enumerate(ATTRIBUTES)}

SCALE_NEEDS: dict[Scale, tuple[str, ...]] = {
    Scale.FIRM: (),
    Scale.COUNTRY_INDUSTRY: ("country", "industry"),
    Scale.INDUSTRY: ("industry",),
    Scale.COUNTRY: ("country",),
}


def raw_attribute(graph: SupplyGraph, name: str) -> np.ndarray:
    """Attribute column in node order; ``None`` where unknown."""
    return np.array([getattr(a, name) for a in graph.attrs], dtype=object)


@dataclass(frozen=True)
class ImputedAttrs:
    """Attribute columns aligned with ``graph.ids`` with no unknowns left.

    Only the attributes that were requested are filled; the rest are ``None``.
    """

    ids: tuple[str, ...]
    seed: int
    country: np.ndarray | None = None
    industry: np.ndarray | None = None
    employees: np.ndarray | None = None

    def column(self, name: str) -> np.ndarray:
        col = getattr(self, name)
        if col is None:
            raise DataError(f"attribute {name!r} was not imputed")
        return col

    @property
    def industry_of(self) -> dict[str, str]:
        return dict(zip(self.ids, self.column("industry")))

    @property
    def employees_of(self) -> dict[str, int]:
        return dict(zip(self.ids, (int(x) for x in self.column("employees"))))

    @property
    def country_of(self) -> dict[str, str]:
        return dict(zip(self.ids, self.column("country")))


def _fill(values: np.ndarray, rng: np.random.Generator, name: str) -> np.ndarray:
    missing = np.array([v is None for v in values], dtype=bool)
    if not missing.any():
        return values
    known = values[~missing]
    if known.size == 0:
        raise DataError(f"cannot impute {name}: no firm has a known value")
    out = values.copy()
    out[missing] = known[rng.integers(0, known.size, size=int(missing.sum()))]
    return out


def impute_attributes(
    graph: SupplyGraph,
    seed: int,
    attributes: tuple[str, ...] = ATTRIBUTES,
) -> ImputedAttrs:
    """Fill unknown attributes by sampling known values with replacement.

    Deterministic for a given ``seed``. Raises :class:`DataError` when a
    requested attribute has no known value anywhere in the graph.
    """
    filled: dict[str, np.ndarray] = {}
    for name in attributes:
        if name not in _STREAM:
            raise ValueError(f"unknown attribute {name!r}")
        col = raw_attribute(graph, name)
        n_missing = sum(v is None for v in col)
        if name == "country" and n_missing:
            logger.warning("imputing %d missing country codes from the known-country distribution", n_missing)
        rng = np.random.default_rng([seed, _STREAM[name]])
        col = _fill(col, rng, name)
        if name == "employees":
            col = col.astype(np.int64)
        filled[name] = col
    return ImputedAttrs(ids=graph.ids, seed=seed, **filled)


@dataclass(frozen=True)
class ScaleMapping:
    """Assignment of every firm (by node position) to a unit at one scale."""

    scale: Scale
    unit_of: np.ndarray  # node position -> unit position
    units: tuple  # unit position -> unit id
    imputation_seed: int | None = None

    @property
    def n_units(self) -> int:
        return len(self.units)

    @property
    def unit_sizes(self) -> np.ndarray:
        return np.bincount(self.unit_of, minlength=self.n_units)

    def members(self) -> tuple[np.ndarray, np.ndarray]:
        """Unit membership as CSR ``(indptr, nodes)``; nodes ascending within each unit."""
        return self._members

    @cached_property
    def _members(self) -> tuple[np.ndarray, np.ndarray]:
        order = np.argsort(self.unit_of, kind="stable")
        indptr = np.zeros(self.n_units + 1, dtype=np.int64)
        np.cumsum(self.unit_sizes, out=indptr[1:])
        return indptr, order.astype(np.int64)

    def unit_of_firm(self, ids: tuple[str, ...]) -> dict[str, object]:
        return {fid: self.units[u] for fid, u in zip(ids, self.unit_of)}


def unit_label(unit) -> str:
    if isinstance(unit, tuple):
        return "-".join(str(x) for x in unit)
    return str(unit)


def _column(graph: SupplyGraph, imputed: ImputedAttrs | None, name: str) -> np.ndarray:
    if imputed is not None and getattr(imputed, name) is not None:
        col = imputed.column(name)
    else:
        col = raw_attribute(graph, name)
    if any(v is None for v in col):
        raise DataError(f"{name} is unknown for some firms; impute before aggregating")
    return col


def aggregate(graph: SupplyGraph, scale: Scale, imputed: ImputedAttrs | None = None) -> ScaleMapping:
    """Group firms into units: themselves, their country, industry, or (country, industry)."""
    seed = imputed.seed if imputed is not None else None
    if scale is Scale.FIRM:
        return ScaleMapping(scale, np.arange(graph.n_nodes, dtype=np.int64), graph.ids, seed)

    if scale is Scale.COUNTRY_INDUSTRY:
        country = _column(graph, imputed, "country")
        industry = _column(graph, imputed, "industry")
        labels = [(str(c), str(i)) for c, i in zip(country, industry)]
    else:
        labels = [str(v) for v in _column(graph, imputed, scale.value)]

    units = tuple(sorted(set(labels)))
    pos = {u: k for k, u in enumerate(units)}
    unit_of = np.fromiter((pos[lab] for lab in labels), dtype=np.int64, count=len(labels))
    return ScaleMapping(scale, unit_of, units, seed)

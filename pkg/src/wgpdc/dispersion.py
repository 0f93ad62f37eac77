"""
Refractive indices of the substrate and guide regions.

Indices come from a two-pole Sellmeier form

    n^2 = A + B / (lam^2 - C) + D / (lam^2 - E)        (lam in um)

with one coefficient stanza per crystal axis, read from a plain-text file.
The guide region is the substrate plus a wavelength-independent index step.
"""

from __future__ import annotations

import configparser
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path

import numpy as np

from .errors import ConfigurationError, DomainError

BUILTIN_DISPERSION = "builtin:ktp_kato2002"
AIR_INDEX = 1.0


@dataclass(frozen=True)
class SellmeierSet:
    axis: str
    coefficients: tuple[float, ...]
    validity: tuple[float, float]  # (min, max) wavelength in m

    def __post_init__(self):
        if len(self.coefficients) != 5:
            raise ConfigurationError(
                f"axis {self.axis!r}: expected 5 Sellmeier coefficients, got {len(self.coefficients)}"
            )
        lo, hi = self.validity
        if not 0 < lo < hi:
            raise ConfigurationError(f"axis {self.axis!r}: bad validity interval {self.validity}")

    def check(self, wavelength):
        lam = np.asarray(wavelength, dtype=float)
        lo, hi = self.validity
        if np.any(~np.isfinite(lam)) or np.any(lam < lo) or np.any(lam > hi):
            raise DomainError(
                f"wavelength outside Sellmeier validity [{lo * 1e9:g}, {hi * 1e9:g}] nm "
                f"for axis {self.axis!r}"
            )
        return lam

    def __call__(self, wavelength):
        lam = self.check(wavelength)
        a, b, c, d, e = self.coefficients
        l2 = (lam * 1e6) ** 2
        return np.sqrt(a + b / (l2 - c) + d / (l2 - e))


def load_sellmeier(source: str | Path = BUILTIN_DISPERSION) -> dict[str, SellmeierSet]:
    """Read Sellmeier stanzas from an INI-style file (or the built-in KTP set)."""
    parser = configparser.ConfigParser(inline_comment_prefixes=("#",))
    if str(source) == BUILTIN_DISPERSION:
        text = resources.files("wgpdc.data").joinpath("ktp_kato2002.ini").read_text()
        label = BUILTIN_DISPERSION
    else:
        path = Path(source)
        if not path.is_file():
            raise ConfigurationError(f"dispersion file not found: {path}")
        text = path.read_text()
        label = str(path)
    try:
        parser.read_string(text, source=label)
    except configparser.Error as exc:
        raise ConfigurationError(f"cannot parse dispersion file {label}: {exc}") from exc

    sets = {}
    for axis in parser.sections():
        sec = parser[axis]
        try:
            coeffs = tuple(float(v) for v in sec["coefficients"].split(","))
            lo, hi = (float(v) * 1e-9 for v in sec["validity_nm"].split(","))
        except (KeyError, ValueError) as exc:
            raise ConfigurationError(f"{label}: bad stanza [{axis}]: {exc}") from exc
        sets[axis] = SellmeierSet(axis, coeffs, (lo, hi))
    if not sets:
        raise ConfigurationError(f"{label}: no axis stanzas")
    return sets


@dataclass(frozen=True)
class IndexModel:
    """Substrate dispersion per axis, guide index step and pump-momentum offset.

    ``pump_momentum_offset`` (1/m) is added to pump-role propagation
    constants only; it never touches signal or idler.
    """

    sellmeier: tuple[SellmeierSet, ...] = field(
        default_factory=lambda: tuple(load_sellmeier().values())
    )
    index_step: float = 0.01
    pump_momentum_offset: float = 0.0

    def __post_init__(self):
        if not 0 <= self.index_step < 0.1:
            raise ConfigurationError(f"index_step must lie in [0, 0.1), got {self.index_step}")
        bound = 0.02 * self.typical_pump_beta()
        if abs(self.pump_momentum_offset) >= bound:
            raise ConfigurationError(
                f"pump_momentum_offset {self.pump_momentum_offset:g} 1/m exceeds 2% of a "
                f"typical pump propagation constant ({bound:g} 1/m)"
            )

    @classmethod
    def from_file(cls, source=BUILTIN_DISPERSION, **kwargs) -> IndexModel:
        return cls(sellmeier=tuple(load_sellmeier(source).values()), **kwargs)

    @property
    def axes(self) -> tuple[str, ...]:
        return tuple(s.axis for s in self.sellmeier)

    def sellmeier_for(self, axis: str) -> SellmeierSet:
        for s in self.sellmeier:
            if s.axis == axis:
                return s
        raise ConfigurationError(f"no dispersion data for axis {axis!r} (have {self.axes})")

    def typical_pump_beta(self) -> float:
        lam = 400e-9
        ns = [float(s(lam)) for s in self.sellmeier if s.validity[0] <= lam <= s.validity[1]]
        n = max(ns) if ns else 2.0
        return 2 * np.pi * n / lam

    def substrate_index(self, axis: str, wavelength):
        return self.sellmeier_for(axis)(wavelength)

    def guide_index(self, axis: str, wavelength):
        return self.substrate_index(axis, wavelength) + self.index_step

    @staticmethod
    def air_index() -> float:
        return AIR_INDEX

    def with_offset(self, offset: float) -> IndexModel:
        return IndexModel(self.sellmeier, self.index_step, offset)


def dispersion_table(model: IndexModel, lam_min, lam_max, step, axes=("y", "z")):
    """Rows of (wavelength_nm, n_axis...) on an inclusive grid given in nm."""
    n = int(round((lam_max - lam_min) / step)) + 1
    grid = lam_min + step * np.arange(n)
    cols = [model.substrate_index(a, grid * 1e-9) for a in axes]
    return grid, np.column_stack(cols)

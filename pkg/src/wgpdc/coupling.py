"""
Spatial overlaps: triplet coupling constants, pump-beam coupling and parity.

All guided modes are products of two slab profiles, so every overlap of
guided modes (and of separable Gaussian beams) factorises into one integral
per transverse axis. Those are done with exact exponential tails plus
Gauss-Legendre in the core. :func:`grid_overlap` is a brute-force 2D Simpson
raster kept as an independent cross-check.
"""

from __future__ import annotations

import functools
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Callable, Mapping, Sequence

import numpy as np
from numpy.polynomial.legendre import leggauss
from scipy.integrate import simpson
from scipy.optimize import minimize_scalar

from .errors import ConfigurationError
from .modes import (DEFAULT_POLARIZATIONS, GuidedMode, ModeIndex, SlabSolution,
                    enumerate_modes)

CORE_NODES = 160
TAIL_PANELS = 12
PUMP_PRESETS = ("centered", "paper-misalignment", "fundamental-only")
HIGHER_ORDER_ENERGY_FRACTION = 0.1


@dataclass(frozen=True)
class ParityCheck:
    x: bool
    y: bool

    @property
    def allowed(self) -> bool:
        return self.x and self.y

    def __bool__(self):
        return self.allowed


def parity_allowed(l: ModeIndex, m: ModeIndex, n: ModeIndex) -> ParityCheck:
    """Node-count parity per axis: even sums conserve parity.

    Only the horizontal axis is exactly symmetric; the vertical verdict is
    advisory because the air cover breaks the up/down symmetry.
    """
    return ParityCheck((l.nx + m.nx + n.nx) % 2 == 0, (l.ny + m.ny + n.ny) % 2 == 0)


@dataclass(frozen=True)
class TripletProcess:
    pump: ModeIndex
    signal: ModeIndex
    idler: ModeIndex
    coupling: float
    pump_amplitude: float = 1.0

    @property
    def weight(self) -> float:
        return (self.pump_amplitude * self.coupling) ** 2

    @property
    def label(self) -> str:
        return f"{self.pump.label}->{self.signal.label}+{self.idler.label}"

    @property
    def key(self) -> str:
        """Column-safe identifier, e.g. ``p00_s01_i01``."""
        return (f"p{self.pump.nx}{self.pump.ny}_s{self.signal.nx}{self.signal.ny}"
                f"_i{self.idler.nx}{self.idler.ny}")

    @property
    def nodes(self):
        return (self.pump.nodes, self.signal.nodes, self.idler.nodes)


# --- 1D integrals ---------------------------------------------------------


@functools.lru_cache(maxsize=None)
def _legendre(n):
    return leggauss(n)


def _gl(a, b, n):
    x, w = _legendre(n)
    half = 0.5 * (b - a)
    return a + half * (x + 1), half * w


def overlap_1d(slabs: Sequence[SlabSolution]) -> float:
    """Integral over the whole line of the product of slab profiles."""
    d = slabs[0].thickness
    if any(abs(s.thickness - d) > 1e-15 * d for s in slabs):
        raise ConfigurationError("slab profiles belong to different core thicknesses")
    ua = math.prod(s.edge_values[0] for s in slabs)
    ub = math.prod(s.edge_values[1] for s in slabs)
    tails = ua / sum(s.gamma_a for s in slabs) + ub / sum(s.gamma_b for s in slabs)
    t, w = _gl(-d / 2, d / 2, CORE_NODES)
    core = np.prod([s.field(t) for s in slabs], axis=0) @ w
    return float(core + tails)


def _gaussian_1d(t, waist, center):
    return (2 / (np.pi * waist**2)) ** 0.25 * np.exp(-((t - center) / waist) ** 2)


def gaussian_overlap_1d(slab: SlabSolution, waist: float, center: float = 0.0) -> float:
    d = slab.thickness
    reach = max(40 / min(slab.gamma_a, slab.gamma_b), abs(center) + 10 * waist)
    total = 0.0
    t, w = _gl(-d / 2, d / 2, CORE_NODES)
    total += (slab.field(t) * _gaussian_1d(t, waist, center)) @ w
    for lo, hi in ((-d / 2 - reach, -d / 2), (d / 2, d / 2 + reach)):
        edges = np.linspace(lo, hi, TAIL_PANELS + 1)
        for a, b in zip(edges[:-1], edges[1:]):
            t, w = _gl(a, b, 48)
            total += (slab.field(t) * _gaussian_1d(t, waist, center)) @ w
    return float(total)


# --- 2D overlaps ----------------------------------------------------------


def coupling_constant(pump: GuidedMode, signal: GuidedMode, idler: GuidedMode) -> float:
    """Triple overlap of normalised mode profiles, in 1/m (sign kept)."""
    if not (pump.geometry is signal.geometry is idler.geometry
            or pump.geometry == signal.geometry == idler.geometry):
        raise ConfigurationError("coupling_constant: modes solved on different geometries")
    return overlap_1d([pump.x, signal.x, idler.x]) * overlap_1d([pump.y, signal.y, idler.y])


@dataclass(frozen=True)
class ExternalPumpBeam:
    """Collimated scalar Gaussian at the input facet (1/e field radius ``waist``)."""

    waist: float
    x0: float = 0.0
    y0: float = 0.0
    wavelength: float = 399e-9

    def __post_init__(self):
        if not self.waist > 0:
            raise ConfigurationError(f"beam waist must be > 0, got {self.waist}")

    def field(self, x, y):
        return _gaussian_1d(np.asarray(x), self.waist, self.x0) * _gaussian_1d(np.asarray(y), self.waist, self.y0)


def gaussian_mode_overlap(mode: GuidedMode, waist, x0=0.0, y0=0.0) -> float:
    """Amplitude overlap of a guided mode with a unit-power Gaussian."""
    return gaussian_overlap_1d(mode.x, waist, x0) * gaussian_overlap_1d(mode.y, waist, y0)


def grid_overlap(fields: Sequence[Callable], window, n=256) -> float:
    """Tensor-product Simpson integral of a product of fields over a window.

    ``window`` is (x0, x1, y0, y1); ``n`` intervals per axis.
    """
    x0, x1, y0, y1 = window
    x = np.linspace(x0, x1, n + 1)
    y = np.linspace(y0, y1, n + 1)
    X, Y = np.meshgrid(x, y, indexing="ij")
    integrand = np.ones_like(X)
    for f in fields:
        integrand = integrand * f(X, Y)
    return float(simpson(simpson(integrand, x=y, axis=1), x=x))


def common_window(modes: Sequence[GuidedMode], decay_lengths=3.0):
    """Window covering the core plus ``decay_lengths`` of the slowest tail of any mode."""
    wins = np.array([m.window(decay_lengths) for m in modes])
    return (wins[:, 0].min(), wins[:, 1].max(), wins[:, 2].min(), wins[:, 3].max())


def matched_waist(mode: GuidedMode) -> float:
    """Gaussian waist that maximises power coupling into ``mode`` (centred beam)."""
    g = mode.geometry
    scale = max(g.width, g.height)
    res = minimize_scalar(lambda w: -abs(gaussian_mode_overlap(mode, w)),
                          bounds=(0.05 * scale, 2 * scale), method="bounded",
                          options={"xatol": 1e-4 * scale})
    return float(res.x)


def pump_coupling(beam: ExternalPumpBeam, pump_modes: Sequence[GuidedMode]) -> list[float]:
    """Overlap of the external beam with each guided pump mode.

    Normalised so the (0,0) amplitude is 1 when present and nonzero.
    """
    for m in pump_modes:
        if abs(m.wavelength - beam.wavelength) > 1e-9 * beam.wavelength:
            raise ConfigurationError(
                f"beam wavelength {beam.wavelength} differs from mode solve wavelength {m.wavelength}"
            )
    amps = [gaussian_mode_overlap(m, beam.waist, beam.x0, beam.y0) for m in pump_modes]
    ref = next((a for a, m in zip(amps, pump_modes) if m.index.nodes == (0, 0)), 0.0)
    if ref != 0.0:
        amps = [a / ref for a in amps]
    return amps


def preset_pump_amplitudes(preset: str, pump_modes: Sequence[GuidedMode],
                           beam: ExternalPumpBeam | None = None) -> dict[tuple[int, int], float]:
    """Relative pump-mode amplitudes keyed by (nx, ny).

    ``paper-misalignment`` puts 10% of the fundamental's energy into every
    higher-order pump mode; ``centered`` uses the overlap of a centred,
    mode-matched Gaussian (or ``beam`` when given).
    """
    if preset == "paper-misalignment":
        frac = math.sqrt(HIGHER_ORDER_ENERGY_FRACTION)
        return {m.index.nodes: 1.0 if m.index.nodes == (0, 0) else frac for m in pump_modes}
    if preset == "fundamental-only":
        return {m.index.nodes: float(m.index.nodes == (0, 0)) for m in pump_modes}
    if preset == "centered":
        if beam is None:
            fund = next(m for m in pump_modes if m.index.nodes == (0, 0))
            beam = ExternalPumpBeam(matched_waist(fund), wavelength=fund.wavelength)
        return dict(zip((m.index.nodes for m in pump_modes), pump_coupling(beam, pump_modes)))
    raise ConfigurationError(f"unknown pump preset {preset!r}; choose from {PUMP_PRESETS}")


def enumerate_triplets(
    geometry,
    pump_wavelength: float,
    downconversion_wavelength: float | None = None,
    pump_amplitudes: Mapping[tuple[int, int], float] | str = "paper-misalignment",
    polarizations: Mapping[str, str] = DEFAULT_POLARIZATIONS,
    cutoff: float | None = 1e-4,
    threads: int | None = None,
) -> list[TripletProcess]:
    """All guided pump x signal x idler combinations, sorted by descending weight.

    Signal and idler modes are enumerated at ``downconversion_wavelength``
    (default: twice the pump wavelength). Triplets lighter than
    ``cutoff * max_weight`` are dropped; ``cutoff=None`` keeps everything.
    """
    lam_dc = 2 * pump_wavelength if downconversion_wavelength is None else downconversion_wavelength
    pumps = enumerate_modes(geometry, pump_wavelength, polarizations["pump"], "pump")
    signals = enumerate_modes(geometry, lam_dc, polarizations["signal"], "signal")
    idlers = enumerate_modes(geometry, lam_dc, polarizations["idler"], "idler")
    if isinstance(pump_amplitudes, str):
        pump_amplitudes = preset_pump_amplitudes(pump_amplitudes, pumps)

    def row(p):
        amp = float(pump_amplitudes.get(p.index.nodes, 0.0))
        return [TripletProcess(p.index, s.index, i.index, coupling_constant(p, s, i), amp)
                for s in signals for i in idlers]

    if threads == 1:
        rows = [row(p) for p in pumps]
    else:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            rows = list(pool.map(row, pumps))
    triplets = [t for r in rows for t in r]
    triplets.sort(key=lambda t: (-t.weight, t.nodes))
    if cutoff is not None and triplets:
        wmax = triplets[0].weight
        triplets = [t for t in triplets if t.weight >= cutoff * wmax and t.weight > 0]
    return triplets

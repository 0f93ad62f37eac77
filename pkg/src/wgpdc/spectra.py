"""
Joint spectral amplitudes, marginal spectra, fiber filtering and peak extraction.

All spectral math runs in angular frequency. Marginals are converted to
wavelength only when they are put on a common output axis, as power per
unit wavelength.
"""

from __future__ import annotations

import functools
import logging
import math
from collections import defaultdict
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Mapping, Sequence

import numpy as np
from scipy.constants import c
from scipy.integrate import trapezoid
from scipy.signal import find_peaks

from .coupling import TripletProcess, enumerate_triplets, gaussian_mode_overlap
from .errors import ConfigurationError, NumericalError, SupportError
from .modes import (DEFAULT_POLARIZATIONS, ModeIndex, WaveguideGeometry, omega_to_wavelength,
                    solve_mode, wavelength_to_omega)
from .phasematch import PhasematchContext, phasematched_signal, pm_function

log = logging.getLogger(__name__)

GRID_POINTS = 1024
SUPPORT_LEVEL = 1e-3
MAX_SPAN_FRACTION = 0.2  # hard cap on the half-span, relative to the centre frequency
MAX_COHERENT_POINTS = 4096
DEFAULT_AXIS = (650e-9, 950e-9, 0.05e-9)
DEFAULT_PROMINENCE = 0.02


def wavelength_axis(lam_min=DEFAULT_AXIS[0], lam_max=DEFAULT_AXIS[1], step=DEFAULT_AXIS[2]):
    n = int(round((lam_max - lam_min) / step)) + 1
    return lam_min + step * np.arange(n)


# --- pump -----------------------------------------------------------------


@dataclass(frozen=True)
class PumpEnvelope:
    """Gaussian pump amplitude in angular frequency, peak 1.

    The wavelength FWHM is mapped to the frequency interval between
    ``center - fwhm/2`` and ``center + fwhm/2``, and the Gaussian is centred
    in that interval, so |alpha|^2 is exactly 1/2 at both wavelength edges.
    The peak then sits within fwhm^2 / (4 center) of ``center_wavelength``.
    """

    center_wavelength: float = 399e-9
    fwhm: float = 1.1e-9

    def __post_init__(self):
        if not self.center_wavelength > 0:
            raise ConfigurationError(f"pump centre must be > 0, got {self.center_wavelength}")
        if not 0 < self.fwhm < self.center_wavelength:
            raise ConfigurationError(f"pump FWHM must lie in (0, centre), got {self.fwhm}")

    @property
    def _edges(self):
        lo, hi = self.center_wavelength - self.fwhm / 2, self.center_wavelength + self.fwhm / 2
        return float(wavelength_to_omega(lo)), float(wavelength_to_omega(hi))

    @property
    def omega0(self) -> float:
        return 0.5 * sum(self._edges)

    @property
    def fwhm_omega(self) -> float:
        w_hi, w_lo = self._edges
        return w_hi - w_lo

    def __call__(self, omega):
        x = (np.asarray(omega, dtype=float) - self.omega0) / self.fwhm_omega
        return np.exp(-2 * math.log(2) * x**2)


def pump_envelope(spec: PumpEnvelope, omega):
    return spec(omega)


# --- JSA ------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class JsaGrid:
    """f(ws, wi) = alpha(ws + wi) phi(ws, wi) on uniform frequency axes.

    Rows index the signal axis and columns the idler axis.
    """

    label: str
    omega_s: np.ndarray
    omega_i: np.ndarray
    alpha: np.ndarray
    phi: np.ndarray

    @functools.cached_property
    def f(self) -> np.ndarray:
        return self.alpha * self.phi

    @functools.cached_property
    def intensity(self) -> np.ndarray:
        return np.abs(self.f) ** 2

    @property
    def lambda_s(self):
        return omega_to_wavelength(self.omega_s)

    @property
    def lambda_i(self):
        return omega_to_wavelength(self.omega_i)

    def signal_density(self):
        """Marginal over the idler frequency, per unit signal angular frequency."""
        return trapezoid(self.intensity, self.omega_i, axis=1)

    def idler_density(self):
        return trapezoid(self.intensity, self.omega_s, axis=0)

    def edge_ratio(self) -> float:
        """Largest |f|^2 on the grid boundary relative to the grid maximum."""
        I = self.intensity
        edge = max(I[0].max(), I[-1].max(), I[:, 0].max(), I[:, -1].max())
        return float(edge / I.max()) if I.max() > 0 else 0.0

    def peak(self) -> tuple[float, float]:
        """(lambda_s, lambda_i) of the |f|^2 maximum."""
        j, k = np.unravel_index(np.argmax(self.intensity), self.intensity.shape)
        return float(self.lambda_s[j]), float(self.lambda_i[k])


def _uniform_step(axis):
    d = np.diff(axis)
    return float(d.mean()) if np.allclose(d, d[0], rtol=1e-9, atol=0) else None


def jsa_on_axes(ctx: PhasematchContext, pump: PumpEnvelope, omega_s, omega_i, label=None) -> JsaGrid:
    """Evaluate the JSA on given frequency axes.

    When both axes share one uniform spacing the pump-side propagation
    constant is evaluated once per distinct sum frequency (Ns + Ni - 1
    values) and scattered onto the grid. Points where any mode is not guided
    get phi = 0.
    """
    ws = np.asarray(omega_s, dtype=float)
    wi = np.asarray(omega_i, dtype=float)
    ds, di = _uniform_step(ws), _uniform_step(wi)
    bs = ctx.signal.beta(ws)
    bi = ctx.idler.beta(wi)
    if ds is not None and di is not None and abs(ds - di) <= 1e-9 * abs(ds):
        sums = ws[0] + wi[0] + ds * np.arange(ws.size + wi.size - 1)
        idx = np.add.outer(np.arange(ws.size), np.arange(wi.size))
        alpha = pump(sums)[idx]
        bp = ctx.pump.beta(sums)[idx]
    else:
        total = np.add.outer(ws, wi)
        alpha = pump(total)
        bp = ctx.pump.beta(total)
    dbeta = bp - bs[:, None] - bi[None, :] - ctx.qpm
    ok = np.isfinite(dbeta)
    phi = np.where(ok, pm_function(np.where(ok, dbeta, 0.0), ctx.length), 0.0)
    return JsaGrid(label or ctx.label, ws, wi, alpha, phi)


@dataclass(frozen=True)
class JsaWindow:
    """Centre and half-span (rad/s) of an auto-fitted JSA grid."""

    omega_s: float
    omega_i: float
    half_span: float

    def axes(self, n_points):
        t = np.linspace(-self.half_span, self.half_span, n_points)
        return self.omega_s + t, self.omega_i + t


def _initial_window(ctx: PhasematchContext, pump: PumpEnvelope) -> JsaWindow:
    w0 = pump.omega0
    roots = phasematched_signal(ctx, w0)
    if not roots:
        raise NumericalError(f"triplet {ctx.label}: no phase-matched signal frequency for this pump")
    ws = min(roots, key=lambda w: abs(w - w0 / 2))
    wi = w0 - ws
    # width of the sinc ridge across the pump line
    h = 1e-6 * ws
    slope = abs(float(ctx.delta_beta(ws + h, wi - h) - ctx.delta_beta(ws - h, wi + h)) / (2 * h))
    sinc_scale = 2 * np.pi / (ctx.length * slope) if slope > 0 else pump.fwhm_omega
    return JsaWindow(ws, wi, max(3 * pump.fwhm_omega, 4 * sinc_scale))


def _edge_intensity(ctx: PhasematchContext, pump: PumpEnvelope, win: JsaWindow, n_points) -> float:
    """Largest |f|^2 on the boundary of the window (the global maximum is 1)."""
    ws, wi = win.axes(n_points)
    s = np.concatenate([ws, ws, np.full(n_points, ws[0]), np.full(n_points, ws[-1])])
    i = np.concatenate([np.full(n_points, wi[0]), np.full(n_points, wi[-1]), wi, wi])
    dbeta = ctx.delta_beta(s, i)
    ok = np.isfinite(dbeta)
    f = pump(s + i) * np.where(ok, np.abs(pm_function(np.where(ok, dbeta, 0.0), ctx.length)), 0.0)
    return float(np.max(f**2))


def fit_window(ctx: PhasematchContext, pump: PumpEnvelope, n_points=GRID_POINTS,
               support=SUPPORT_LEVEL, grow=1.5) -> tuple[JsaWindow, JsaGrid]:
    """Grow a square window around the phase-matched point until the support fits.

    The window is accepted once |f|^2 on its boundary is at most
    ``support`` times the grid maximum. Candidate windows are screened on
    their boundary alone (|f| peaks at 1 on the phase-matched point) before
    the full grid is built. Raises SupportError when the half-span would
    exceed ``MAX_SPAN_FRACTION`` of the signal or idler centre frequency.
    """
    win = _initial_window(ctx, pump)
    cap = MAX_SPAN_FRACTION * min(win.omega_s, win.omega_i)
    grid = None
    while True:
        ratio = _edge_intensity(ctx, pump, win, n_points)
        if ratio <= support:
            grid = jsa_on_axes(ctx, pump, *win.axes(n_points))
            ratio = grid.edge_ratio()
            if ratio <= support:
                return win, grid
        if win.half_span >= cap:
            raise SupportError(
                f"triplet {ctx.label}: JSA support not contained within the grid cap "
                f"(boundary/max = {ratio:.3g} at half-span {win.half_span:.3g} rad/s)"
            )
        win = JsaWindow(win.omega_s, win.omega_i, min(win.half_span * grow, cap))


def compute_jsa(ctx: PhasematchContext, pump: PumpEnvelope, n_points=GRID_POINTS,
                support=SUPPORT_LEVEL) -> JsaGrid:
    """JSA of one triplet on an auto-fitted ``n_points`` x ``n_points`` grid."""
    if n_points < 16:
        raise ConfigurationError(f"n_points must be >= 16, got {n_points}")
    return fit_window(ctx, pump, n_points, support)[1]


# --- marginals ------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class TripletSpectrum:
    """Unweighted per-arm marginals of one triplet (or one coherent group), in frequency."""

    key: str
    label: str
    signal: ModeIndex
    idler: ModeIndex
    weight: float
    omega_s: np.ndarray
    signal_density: np.ndarray
    omega_i: np.ndarray
    idler_density: np.ndarray

    @classmethod
    def from_grid(cls, triplet: TripletProcess, grid: JsaGrid) -> TripletSpectrum:
        return cls(triplet.key, triplet.label, triplet.signal, triplet.idler, triplet.weight,
                   grid.omega_s, grid.signal_density(), grid.omega_i, grid.idler_density())

    def arm(self, arm: str):
        if arm == "signal":
            return self.omega_s, self.signal_density
        if arm == "idler":
            return self.omega_i, self.idler_density
        raise ConfigurationError(f"arm must be 'signal' or 'idler', got {arm!r}")

    def mode(self, arm: str) -> ModeIndex:
        return self.signal if arm == "signal" else self.idler

    def wavelength_density(self, arm: str):
        """(wavelength, power per unit wavelength) sorted by ascending wavelength."""
        omega, dens = self.arm(arm)
        lam = omega_to_wavelength(omega)
        return lam[::-1], (dens * 2 * np.pi * c / lam**2)[::-1]

    def on_axis(self, arm: str, axis):
        lam, dens = self.wavelength_density(arm)
        return np.interp(axis, lam, dens, left=0.0, right=0.0)

    def integral(self, arm: str) -> float:
        """Integral of the wavelength density over its native grid."""
        return float(trapezoid(*self.wavelength_density(arm)[::-1]))

    def peak_wavelength(self, arm: str) -> float:
        lam, dens = self.wavelength_density(arm)
        return _refine(lam, dens, int(np.argmax(dens)))[0]


@dataclass(frozen=True)
class Peak:
    wavelength: float
    height: float


@dataclass(frozen=True, eq=False)
class MarginalSpectrum:
    arm: str
    wavelength: np.ndarray
    total: np.ndarray
    components: dict[str, np.ndarray] = field(default_factory=dict)
    peaks: list[Peak] = field(default_factory=list)

    def top_components(self, n=10) -> list[str]:
        return sorted(self.components, key=lambda k: -self.components[k].max())[:n]


def _refine(x, y, j):
    if 0 < j < len(y) - 1:
        ym, y0, yp = y[j - 1], y[j], y[j + 1]
        den = ym - 2 * y0 + yp
        if den < 0:
            d = 0.5 * (ym - yp) / den
            return float(x[j] + d * (x[j + 1] - x[j - 1]) / 2), float(y0 - 0.25 * (ym - yp) * d)
    return float(x[j]), float(y[j])


def extract_peaks(spectrum, values=None, prominence=DEFAULT_PROMINENCE) -> list[Peak]:
    """Local maxima with prominence above ``prominence`` x global max.

    Accepts a MarginalSpectrum or a (wavelength, values) pair. Positions and
    heights are refined by a parabola through the three nearest samples.
    """
    if isinstance(spectrum, MarginalSpectrum):
        x, y = spectrum.wavelength, spectrum.total
    else:
        x, y = np.asarray(spectrum, float), np.asarray(values, float)
    if y.size < 3 or not np.any(y > 0):
        return []
    # pad so maxima on the axis ends are still seen
    yp = np.concatenate(([0.0], y, [0.0]))
    idx, _ = find_peaks(yp, prominence=prominence * y.max())
    peaks = [Peak(*_refine(x, y, j - 1)) for j in idx]
    peaks.sort(key=lambda p: (-p.height, p.wavelength))
    return peaks


def combine(spectra: Sequence[TripletSpectrum], arm: str, axis=None,
            weights: Mapping[str, float] | None = None,
            prominence=DEFAULT_PROMINENCE) -> MarginalSpectrum:
    """Incoherent, max-normalised sum of weighted per-triplet marginals on ``axis``.

    Components are summed in sorted-key order, so the result does not depend
    on the order of ``spectra``.
    """
    if not spectra:
        raise ConfigurationError("no triplets to combine")
    axis = wavelength_axis() if axis is None else np.asarray(axis, float)
    comps = {}
    for sp in spectra:
        w = sp.weight if weights is None else weights[sp.key]
        if sp.key in comps:
            raise ConfigurationError(f"duplicate triplet key {sp.key}")
        comps[sp.key] = w * sp.on_axis(arm, axis)
    keys = sorted(comps)
    raw = functools.reduce(np.add, (comps[k] for k in keys))
    peak = raw.max()
    scale = 1.0 / peak if peak > 0 else 1.0
    comps = {k: comps[k] * scale for k in keys}
    total = functools.reduce(np.add, (comps[k] for k in keys))
    out = MarginalSpectrum(arm, axis, total, comps)
    out.peaks.extend(extract_peaks(out, prominence=prominence))
    return out


def marginals(items: Sequence[tuple[TripletProcess, JsaGrid]], axis=None, coherent=False,
              prominence=DEFAULT_PROMINENCE) -> tuple[MarginalSpectrum, MarginalSpectrum]:
    """Signal and idler marginals of a set of triplets with precomputed JSAs.

    ``coherent=True`` adds amplitudes of triplets that share signal and
    idler modes before squaring; their grids must then coincide.
    """
    if not items:
        raise ConfigurationError("marginals: empty triplet list")
    if coherent:
        spectra = []
        for key, members in _groups(items).items():
            ref = members[0][1]
            for _, g in members[1:]:
                if g.omega_s.shape != ref.omega_s.shape or not (
                        np.array_equal(g.omega_s, ref.omega_s) and np.array_equal(g.omega_i, ref.omega_i)):
                    raise ConfigurationError(
                        f"coherent sum over {key} needs identical grids; use simulate_pdc(coherent=True)")
            f = sum(t.pump_amplitude * t.coupling * g.f for t, g in members)
            spectra.append(_group_spectrum(members[0][0], f, ref.omega_s, ref.omega_i))
    else:
        spectra = [TripletSpectrum.from_grid(t, g) for t, g in items]
    return (combine(spectra, "signal", axis, prominence=prominence),
            combine(spectra, "idler", axis, prominence=prominence))


def _groups(items):
    groups = defaultdict(list)
    for item in items:
        t = item[0]
        groups[f"s{t.signal.nx}{t.signal.ny}_i{t.idler.nx}{t.idler.ny}"].append(item)
    return dict(sorted(groups.items()))


def _group_spectrum(t: TripletProcess, f, omega_s, omega_i) -> TripletSpectrum:
    I = np.abs(f) ** 2
    key = f"s{t.signal.nx}{t.signal.ny}_i{t.idler.nx}{t.idler.ny}"
    label = f"*->{t.signal.label}+{t.idler.label}"
    return TripletSpectrum(key, label, t.signal, t.idler, 1.0, omega_s,
                           trapezoid(I, omega_i, axis=1), omega_i, trapezoid(I, omega_s, axis=0))


# --- pipeline -------------------------------------------------------------


@dataclass
class PdcResult:
    triplets: list[TripletProcess]
    spectra: list[TripletSpectrum]
    skipped: list[str]
    signal: MarginalSpectrum
    idler: MarginalSpectrum
    pump: PumpEnvelope
    geometry: WaveguideGeometry


def _context(geometry, t: TripletProcess, polarizations, transverse, pump_reference):
    return PhasematchContext.build(geometry, t.pump.nodes, t.signal.nodes, t.idler.nodes,
                                   polarizations, transverse, pump_reference)


def simulate_pdc(
    geometry: WaveguideGeometry,
    pump: PumpEnvelope | None = None,
    preset="paper-misalignment",
    polarizations: Mapping[str, str] = DEFAULT_POLARIZATIONS,
    transverse="fixed",
    pump_reference: float | None = None,
    cutoff: float | None = 1e-4,
    top: int | None = None,
    n_points=GRID_POINTS,
    axis=None,
    coherent=False,
    threads: int | None = None,
    prominence=DEFAULT_PROMINENCE,
) -> PdcResult:
    """Enumerate triplets, compute every JSA and reduce to composite marginals.

    Grids are reduced to per-arm marginals as soon as they are computed, so
    memory stays at a few grids regardless of the triplet count. Triplets
    with no phase-matched point for this pump are skipped and listed in
    ``skipped``.
    """
    pump = pump or PumpEnvelope()
    lam_p = pump.center_wavelength
    pump_reference = lam_p if pump_reference is None else pump_reference
    triplets = enumerate_triplets(geometry, lam_p, 2 * lam_p, preset, polarizations, cutoff,
                                  threads=threads)
    triplets = [t for t in triplets if t.weight > 0]
    if top is not None:
        triplets = triplets[:top]
    if not triplets:
        raise ConfigurationError("no triplet carries nonzero weight")

    def window(t):
        ctx = _context(geometry, t, polarizations, transverse, pump_reference)
        try:
            win, grid = fit_window(ctx, pump, n_points)
        except NumericalError as exc:
            if isinstance(exc, SupportError):
                raise
            log.info("skipping %s: %s", t.label, exc)
            return None
        return ctx, win, grid

    def run(fn, seq):
        if threads == 1:
            return [fn(x) for x in seq]
        with ThreadPoolExecutor(max_workers=threads) as pool:
            return list(pool.map(fn, seq))

    skipped = []
    if not coherent:
        def one(t):
            res = window(t)
            return None if res is None else TripletSpectrum.from_grid(t, res[2])

        out = run(one, triplets)
        spectra = [s for s in out if s is not None]
        skipped = [t.label for t, s in zip(triplets, out) if s is None]
    else:
        groups = _groups([(t,) for t in triplets])

        def one(members):
            fitted = []
            for (t,) in members:
                res = window(t)
                if res is None:
                    skipped.append(t.label)
                else:
                    fitted.append((t, res[0], res[1]))
            if not fitted:
                return None
            ws, wi, step = _union_axes([w for _, _, w in fitted], n_points)
            f = sum(t.pump_amplitude * t.coupling * jsa_on_axes(ctx, pump, ws, wi).f
                    for t, ctx, _ in fitted)
            return _group_spectrum(fitted[0][0], f, ws, wi)

        spectra = [s for s in run(one, list(groups.values())) if s is not None]
        skipped.sort()
    if not spectra:
        raise NumericalError("no triplet phase-matches within the dispersion range")
    return PdcResult(triplets, spectra, skipped,
                     combine(spectra, "signal", axis, prominence=prominence),
                     combine(spectra, "idler", axis, prominence=prominence),
                     pump, geometry)


def _union_axes(windows: Sequence[JsaWindow], n_points):
    step = min(2 * w.half_span / (n_points - 1) for w in windows)
    s_lo = min(w.omega_s - w.half_span for w in windows)
    s_hi = max(w.omega_s + w.half_span for w in windows)
    i_lo = min(w.omega_i - w.half_span for w in windows)
    i_hi = max(w.omega_i + w.half_span for w in windows)
    span = max(s_hi - s_lo, i_hi - i_lo)
    if span / step + 1 > MAX_COHERENT_POINTS:
        step = span / (MAX_COHERENT_POINTS - 1)
    ns = int(math.ceil((s_hi - s_lo) / step)) + 1
    ni = int(math.ceil((i_hi - i_lo) / step)) + 1
    return s_lo + step * np.arange(ns), i_lo + step * np.arange(ni), step


# --- fiber filtering ------------------------------------------------------


def fiber_efficiencies(geometry: WaveguideGeometry, modes: Sequence[ModeIndex], wavelength: float,
                       waist: float, x0=0.0, y0=0.0) -> dict[ModeIndex, float]:
    """Power coupling |<mode|Gaussian>|^2 of each guided mode into a Gaussian fiber mode."""
    if not waist > 0:
        raise ConfigurationError(f"fiber waist must be > 0, got {waist}")
    out = {}
    for m in modes:
        gm = solve_mode(geometry, m, wavelength)
        out[m] = 0.0 if gm is None else gaussian_mode_overlap(gm, waist, x0, y0) ** 2
    return out


def fiber_filter(spectra: Sequence[TripletSpectrum] | PdcResult, arm: str, waist: float,
                 geometry: WaveguideGeometry | None = None, wavelength: float | None = None,
                 axis=None, x0=0.0, y0=0.0, prominence=DEFAULT_PROMINENCE) -> MarginalSpectrum:
    """Marginal seen through a Gaussian-mode fiber on one arm.

    Each triplet weight is multiplied by the power overlap of its ``arm``
    mode (solved at ``wavelength``, default twice the pump centre) with the
    fiber mode.
    """
    if isinstance(spectra, PdcResult):
        geometry = geometry or spectra.geometry
        wavelength = wavelength or 2 * spectra.pump.center_wavelength
        spectra = spectra.spectra
    if geometry is None or wavelength is None:
        raise ConfigurationError("fiber_filter needs geometry and wavelength")
    if not spectra:
        raise ConfigurationError("fiber_filter: empty triplet list")
    eta = fiber_efficiencies(geometry, sorted({s.mode(arm) for s in spectra}), wavelength, waist, x0, y0)
    weights = {s.key: s.weight * eta[s.mode(arm)] for s in spectra}
    return combine(spectra, arm, axis, weights, prominence)


# --- diagnostics ----------------------------------------------------------


def signal_support(spectra: Sequence[TripletSpectrum], level=SUPPORT_LEVEL) -> tuple[float, float]:
    """Wavelength range where some weighted signal marginal exceeds ``level`` x the global max."""
    dens = [(sp.wavelength_density("signal"), sp.weight) for sp in spectra]
    gmax = max(w * d.max() for (_, d), w in dens)
    lo, hi = np.inf, -np.inf
    for (lam, d), w in dens:
        hit = lam[w * d >= level * gmax]
        if hit.size:
            lo, hi = min(lo, hit.min()), max(hi, hit.max())
    return float(lo), float(hi)


def energy_pairing_error(sp: TripletSpectrum, pump: PumpEnvelope) -> float:
    """|(1/lam_s + 1/lam_i)^-1 - lam_pump| from the two marginal peaks (m)."""
    ls, li = sp.peak_wavelength("signal"), sp.peak_wavelength("idler")
    return abs(1 / (1 / ls + 1 / li) - pump.center_wavelength)

"""
Momentum mismatch, sinc phase matching, SHG peak search and pump-offset calibration.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Mapping, Sequence

import numpy as np
from scipy.optimize import brentq

from .errors import CalibrationError, ConfigurationError
from .modes import (DEFAULT_POLARIZATIONS, ModeFamily, ModeIndex, WaveguideGeometry,
                    omega_to_wavelength, wavelength_to_omega)

TRANSVERSE_MODELS = ("fixed", "resolved")
SHG_SCAN_STEP = 0.02e-9
WAVELENGTH_XTOL = 1e-13  # 1e-4 nm


def qpm_vector(period: float, order: int = 1) -> float:
    """Grating momentum 2 pi order / period (1/m)."""
    if order < 1 or order % 2 == 0:
        raise ConfigurationError(f"QPM order must be odd and >= 1, got {order}")
    if not period > 0:
        raise ConfigurationError(f"poling period must be > 0, got {period}")
    return 2 * np.pi * order / period


def pm_function(delta_beta, length):
    """sinc(dB L/2) exp(i dB L/2) with sinc(x) = sin(x)/x."""
    x = np.asarray(delta_beta, dtype=float) * length / 2
    s = np.sin(x)
    zero = x == 0
    sinc = np.where(zero, 1.0, s / np.where(zero, 1.0, x))
    out = np.empty(np.shape(x), dtype=complex)
    out.real = sinc * np.cos(x)
    out.imag = sinc * s
    return out[()] if out.ndim == 0 else out


def make_family(geometry, nodes, role, polarizations=DEFAULT_POLARIZATIONS,
                transverse="fixed", pump_reference=399e-9) -> ModeFamily:
    """ModeFamily for one role, honouring the transverse-momentum model.

    In the ``fixed`` model pump-role modes are solved at ``pump_reference``
    and signal/idler modes at twice that wavelength.
    """
    if transverse not in TRANSVERSE_MODELS:
        raise ConfigurationError(f"transverse model must be one of {TRANSVERSE_MODELS}")
    if isinstance(nodes, ModeIndex):
        nodes = nodes.nodes
    index = ModeIndex(nodes[0], nodes[1], polarizations[role], role)
    ref = None
    if transverse == "fixed":
        ref = pump_reference if role == "pump" else 2 * pump_reference
    return ModeFamily(geometry, index, ref)


@dataclass(frozen=True)
class PhasematchContext:
    pump: ModeFamily
    signal: ModeFamily
    idler: ModeFamily
    qpm_order: int = 1

    def __post_init__(self):
        if self.qpm_order < 1 or self.qpm_order % 2 == 0:
            raise ConfigurationError(f"qpm_order must be odd and >= 1, got {self.qpm_order}")

    @classmethod
    def build(cls, geometry, pump, signal, idler, polarizations=DEFAULT_POLARIZATIONS,
              transverse="fixed", pump_reference=399e-9, qpm_order=1) -> PhasematchContext:
        fam = lambda n, r: make_family(geometry, n, r, polarizations, transverse, pump_reference)
        return cls(fam(pump, "pump"), fam(signal, "signal"), fam(idler, "idler"), qpm_order)

    @property
    def geometry(self) -> WaveguideGeometry:
        return self.pump.geometry

    @property
    def length(self) -> float:
        return self.geometry.length

    @property
    def qpm(self) -> float:
        return qpm_vector(self.geometry.poling_period, self.qpm_order)

    @property
    def label(self) -> str:
        return f"{self.pump.index.label}->{self.signal.index.label}+{self.idler.index.label}"

    def delta_beta(self, omega_s, omega_i):
        ws, wi = np.broadcast_arrays(np.asarray(omega_s, float), np.asarray(omega_i, float))
        return self.pump.beta(ws + wi) - self.signal.beta(ws) - self.idler.beta(wi) - self.qpm


def delta_beta_pdc(ctx: PhasematchContext, omega_s, omega_i):
    """beta_p(ws + wi) - beta_s(ws) - beta_i(wi) - beta_QPM; NaN where a mode is not guided."""
    return ctx.delta_beta(omega_s, omega_i)


def phasematched_signal(ctx: PhasematchContext, pump_omega: float, lam_range=None) -> list[float]:
    """Signal frequencies where the triplet phase-matches for a monochromatic pump."""
    lam_p = float(omega_to_wavelength(pump_omega))
    lo, hi = lam_range or (1.5 * lam_p, 3.0 * lam_p)
    lo = max(lo, _min_valid(ctx), 1 / (1 / lam_p - 1 / _max_valid(ctx)))
    ws = np.linspace(wavelength_to_omega(hi), wavelength_to_omega(lo), 4001)
    g = lambda w: ctx.delta_beta(w, pump_omega - w)
    vals = g(ws)
    roots = []
    ok = np.isfinite(vals[:-1]) & np.isfinite(vals[1:])
    for j in np.flatnonzero(ok & (np.sign(vals[:-1]) * np.sign(vals[1:]) < 0)):
        roots.append(brentq(lambda w: float(g(w)), ws[j], ws[j + 1], xtol=1e-3, rtol=1e-15))
    return roots


def _min_valid(ctx):
    im = ctx.geometry.index_model
    return max(im.sellmeier_for(f.index.polarization).validity[0] for f in (ctx.signal, ctx.idler))


def _max_valid(ctx):
    im = ctx.geometry.index_model
    return min(im.sellmeier_for(f.index.polarization).validity[1] for f in (ctx.signal, ctx.idler))


# --- SHG ------------------------------------------------------------------


@dataclass(frozen=True)
class ShgPeak:
    sh: ModeIndex
    f1: ModeIndex  # fundamental on the signal polarization
    f2: ModeIndex  # fundamental on the idler polarization
    sh_wavelength: float
    fundamental_wavelength: float
    residual: float

    @property
    def label(self) -> str:
        return f"{self.f1.label}+{self.f2.label}->{self.sh.label}"


def shg_mismatch(sh: ModeFamily, f1: ModeFamily, f2: ModeFamily, omega, qpm) -> np.ndarray:
    """beta_SH(2w) - beta_f1(w) - beta_f2(w) - beta_QPM for a degenerate fundamental."""
    omega = np.asarray(omega, dtype=float)
    return sh.beta(2 * omega) - f1.beta(omega) - f2.beta(omega) - qpm


def shg_peaks(
    geometry: WaveguideGeometry,
    processes: Sequence[tuple],
    scan=(780e-9, 820e-9),
    step=SHG_SCAN_STEP,
    polarizations: Mapping[str, str] = DEFAULT_POLARIZATIONS,
    transverse="fixed",
    pump_reference=399e-9,
    qpm_order=1,
) -> list[ShgPeak]:
    """Phase-matched SH wavelengths for each (sh, fa, fb) node triple.

    Both ways of placing ``fa``/``fb`` on the two fundamental polarizations
    are tried, so the result does not depend on their order. Roots are
    bracketed on a ``step`` pre-scan of fundamental wavelength and refined to
    1e-4 nm. Returned peaks are sorted by SH wavelength.
    """
    qpm = qpm_vector(geometry.poling_period, qpm_order)
    lam = np.arange(scan[0], scan[1] + step / 2, step)
    omega = wavelength_to_omega(lam)
    fam = lambda n, r: make_family(geometry, n, r, polarizations, transverse, pump_reference)
    peaks = []
    seen = set()
    for sh_n, fa, fb in processes:
        sh_n = sh_n.nodes if isinstance(sh_n, ModeIndex) else tuple(sh_n)
        fa = fa.nodes if isinstance(fa, ModeIndex) else tuple(fa)
        fb = fb.nodes if isinstance(fb, ModeIndex) else tuple(fb)
        for n1, n2 in {(fa, fb), (fb, fa)}:
            if (sh_n, n1, n2) in seen:
                continue
            seen.add((sh_n, n1, n2))
            sh, f1, f2 = fam(sh_n, "pump"), fam(n1, "signal"), fam(n2, "idler")
            vals = shg_mismatch(sh, f1, f2, omega, qpm)
            ok = np.isfinite(vals[:-1]) & np.isfinite(vals[1:])
            for j in np.flatnonzero(ok & (np.sign(vals[:-1]) * np.sign(vals[1:]) < 0)):
                g = lambda l: float(shg_mismatch(sh, f1, f2, wavelength_to_omega(l), qpm))
                root = brentq(g, lam[j], lam[j + 1], xtol=WAVELENGTH_XTOL, rtol=1e-15)
                peaks.append(ShgPeak(sh.index, f1.index, f2.index, root / 2, root, g(root)))
    peaks.sort(key=lambda p: (p.sh_wavelength, p.label))
    return peaks


def calibrate_pump_offset(
    geometry: WaveguideGeometry,
    reference=((0, 0), (0, 0), (0, 0)),
    sh_wavelength=398.0e-9,
    polarizations: Mapping[str, str] = DEFAULT_POLARIZATIONS,
    transverse="fixed",
    pump_reference=399e-9,
    qpm_order=1,
    bracket_fraction=0.019,
) -> float:
    """Additive pump-momentum offset (1/m) that phase-matches ``reference`` at ``sh_wavelength``.

    ``reference`` is (sh, f1, f2) nodes with f1 on the signal polarization.
    Solved by bracketed root finding on the (monotone) SHG mismatch as a
    function of the offset, within +-``bracket_fraction`` of the SH
    propagation constant.
    """
    sh_n, n1, n2 = reference
    qpm = qpm_vector(geometry.poling_period, qpm_order)
    omega = float(wavelength_to_omega(2 * sh_wavelength))

    def residual(offset):
        g = geometry.with_offset(offset)
        fam = lambda n, r: make_family(g, n, r, polarizations, transverse, pump_reference)
        return float(shg_mismatch(fam(sh_n, "pump"), fam(n1, "signal"), fam(n2, "idler"), omega, qpm))

    base = geometry.with_offset(0.0)
    beta_sh = float(make_family(base, sh_n, "pump", polarizations, transverse, pump_reference).beta(2 * omega))
    if not np.isfinite(beta_sh):
        raise CalibrationError(f"reference SH mode {sh_n} not guided at {sh_wavelength * 1e9:g} nm")
    # stay strictly inside the offset bound the index model enforces
    half = min(bracket_fraction * beta_sh, 0.999 * 0.02 * geometry.index_model.typical_pump_beta())
    lo, hi = -half, half
    r_lo, r_hi = residual(lo), residual(hi)
    if not (np.isfinite(r_lo) and np.isfinite(r_hi)) or r_lo * r_hi > 0:
        raise CalibrationError(
            "pump-offset calibration: no sign change in bracket",
            residuals={lo: r_lo, hi: r_hi},
        )
    return float(brentq(residual, lo, hi, xtol=1e-9, rtol=1e-15))

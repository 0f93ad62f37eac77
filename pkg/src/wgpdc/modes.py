"""
Guided modes of a rectangular channel waveguide in the separable approximation.

The guide cross-section is W (horizontal, x) by H (vertical, y), centred on
the origin. Horizontally the core is a symmetric slab with substrate on both
sides; vertically it is an asymmetric slab with substrate below and air
above. Each transverse direction is solved as a scalar slab problem and the
rectangular mode is the product of the two slab profiles, with

    beta^2 = (k0 n_core)^2 - kx^2 - ky^2.

Node counts (nx, ny) label the modes; (0, 0) is the fundamental.
"""

from __future__ import annotations

import functools
from dataclasses import dataclass, field, replace

import numpy as np
from scipy.constants import c
from scipy.optimize import brentq

from .dispersion import IndexModel
from .errors import ConfigurationError

PRESCAN_POINTS = 2048
ROLES = ("pump", "signal", "idler")
# type-II: pump and signal share one crystal axis, idler takes the orthogonal one
DEFAULT_POLARIZATIONS = {"pump": "y", "signal": "y", "idler": "z"}


def omega_to_wavelength(omega):
    return 2 * np.pi * c / np.asarray(omega, dtype=float)


def wavelength_to_omega(wavelength):
    return 2 * np.pi * c / np.asarray(wavelength, dtype=float)


@dataclass(frozen=True)
class WaveguideGeometry:
    width: float = 4e-6
    height: float = 6e-6
    length: float = 3.5e-3
    poling_period: float = 7.59e-6
    index_model: IndexModel = field(default_factory=IndexModel)
    # substrate instead of air above the core; makes the vertical slab symmetric
    buried: bool = False

    def __post_init__(self):
        for name in ("width", "height", "length", "poling_period"):
            if not getattr(self, name) > 0:
                raise ConfigurationError(f"{name} must be > 0, got {getattr(self, name)}")

    def with_offset(self, offset: float) -> WaveguideGeometry:
        return replace(self, index_model=self.index_model.with_offset(offset))

    def with_length(self, length: float) -> WaveguideGeometry:
        return replace(self, length=length)

    def cover_index(self, n_substrate):
        return n_substrate if self.buried else self.index_model.air_index()


@dataclass(frozen=True, order=True)
class ModeIndex:
    nx: int
    ny: int
    polarization: str = "y"
    role: str = "signal"

    def __post_init__(self):
        if self.nx < 0 or self.ny < 0:
            raise ConfigurationError(f"node counts must be >= 0, got ({self.nx},{self.ny})")
        if self.role not in ROLES:
            raise ConfigurationError(f"unknown field role {self.role!r}")

    @property
    def nodes(self) -> tuple[int, int]:
        return (self.nx, self.ny)

    @property
    def label(self) -> str:
        return f"({self.nx},{self.ny})"

    def as_role(self, role: str, polarization: str | None = None) -> ModeIndex:
        return ModeIndex(self.nx, self.ny, polarization or self.polarization, role)


# --- slab problem ---------------------------------------------------------


def slab_eigenvalue(k_t, thickness, n_core, n_a, n_b, k0):
    """Pole-free slab dispersion function; zero at every guided k_t.

    (k^2 - ga gb) sin(k d) - k (ga + gb) cos(k d), equivalent to
    tan(k d) = k (ga + gb) / (k^2 - ga gb).
    """
    k = np.asarray(k_t, dtype=float)
    ga = np.sqrt(np.maximum(k0**2 * (n_core**2 - n_a**2) - k**2, 0.0))
    gb = np.sqrt(np.maximum(k0**2 * (n_core**2 - n_b**2) - k**2, 0.0))
    kd = k * thickness
    return (k**2 - ga * gb) * np.sin(kd) - k * (ga + gb) * np.cos(kd)


@dataclass(frozen=True)
class SlabSolution:
    """One guided order of a three-layer slab, core on [-d/2, d/2].

    Cladding ``a`` is on the negative side, cladding ``b`` on the positive
    side.
    """

    thickness: float
    order: int
    k_t: float
    gamma_a: float
    gamma_b: float
    n_core: float
    n_a: float
    n_b: float
    k0: float

    @property
    def phase(self) -> float:
        return float(np.arctan2(self.gamma_a, self.k_t))

    @functools.cached_property
    def amplitude(self) -> float:
        k, d, phi = self.k_t, self.thickness, self.phase
        core = d / 2 + (np.sin(2 * (k * d - phi)) + np.sin(2 * phi)) / (4 * k)
        tails = np.cos(phi) ** 2 / (2 * self.gamma_a) + np.cos(k * d - phi) ** 2 / (2 * self.gamma_b)
        return float(1.0 / np.sqrt(core + tails))

    @property
    def edge_values(self) -> tuple[float, float]:
        """Normalised field at the a-side and b-side core boundaries."""
        k, d, phi = self.k_t, self.thickness, self.phase
        return self.amplitude * np.cos(phi), self.amplitude * np.cos(k * d - phi)

    def field(self, t):
        """Normalised profile (1/sqrt(m)); integral of field**2 is 1."""
        s = np.asarray(t, dtype=float) + self.thickness / 2
        k, d, phi = self.k_t, self.thickness, self.phase
        ua, ub = self.edge_values
        inside = self.amplitude * np.cos(k * np.clip(s, 0, d) - phi)
        below = ua * np.exp(self.gamma_a * np.minimum(s, 0.0))
        above = ub * np.exp(-self.gamma_b * np.maximum(s - d, 0.0))
        return np.where(s < 0, below, np.where(s > d, above, inside))

    def residual(self) -> float:
        """Relative residual of the transverse resonance condition."""
        k, d = self.k_t, self.thickness
        lhs = k * d - np.arctan2(self.gamma_a, k) - np.arctan2(self.gamma_b, k)
        return float(abs(lhs - self.order * np.pi) / (k * d))

    def dispersion_residual(self) -> tuple[float, float]:
        va = self.k0**2 * (self.n_core**2 - self.n_a**2)
        vb = self.k0**2 * (self.n_core**2 - self.n_b**2)
        ra = abs(self.gamma_a**2 + self.k_t**2 - va) / va
        rb = abs(self.gamma_b**2 + self.k_t**2 - vb) / vb
        return float(ra), float(rb)


def _slab_kmax(n_core, n_a, n_b, k0):
    return k0 * np.sqrt(n_core**2 - np.maximum(n_a, n_b) ** 2)


def _slab_solution(thickness, order, k, n_core, n_a, n_b, k0):
    ga = np.sqrt(max(k0**2 * (n_core**2 - n_a**2) - k**2, 0.0))
    gb = np.sqrt(max(k0**2 * (n_core**2 - n_b**2) - k**2, 0.0))
    return SlabSolution(float(thickness), int(order), float(k), float(ga), float(gb),
                        float(n_core), float(n_a), float(n_b), float(k0))


def solve_slab(thickness, n_core, n_clad_a, n_clad_b, wavelength, order) -> SlabSolution | None:
    """Solve one guided order of an asymmetric three-layer slab.

    Roots of :func:`slab_eigenvalue` are bracketed on a uniform pre-scan of
    (0, k_max] and refined with Brent's method. Returns ``None`` when the
    slab supports fewer than ``order + 1`` modes.
    """
    if order < 0:
        raise ConfigurationError(f"order must be >= 0, got {order}")
    if not n_core > max(n_clad_a, n_clad_b):
        raise ConfigurationError(
            f"non-guiding slab: n_core={n_core} must exceed claddings ({n_clad_a}, {n_clad_b})"
        )
    k0 = 2 * np.pi / wavelength
    kmax = float(_slab_kmax(n_core, n_clad_a, n_clad_b, k0))
    ks = kmax * np.arange(1, PRESCAN_POINTS + 1) / PRESCAN_POINTS
    g = slab_eigenvalue(ks, thickness, n_core, n_clad_a, n_clad_b, k0)
    brackets = np.flatnonzero(np.sign(g[:-1]) * np.sign(g[1:]) < 0)
    if len(brackets) <= order:
        return None
    j = brackets[order]
    k = brentq(slab_eigenvalue, ks[j], ks[j + 1],
               args=(thickness, n_core, n_clad_a, n_clad_b, k0),
               xtol=1e-14 * kmax, rtol=1e-14, maxiter=200)
    return _slab_solution(thickness, order, k, n_core, n_clad_a, n_clad_b, k0)


def slab_wavenumber(thickness, n_core, n_a, n_b, k0, order, iterations=64):
    """Vectorised core wavenumber of one slab order; NaN where not guided.

    Uses the monotone transverse-resonance form
    k d - atan(ga/k) - atan(gb/k) = order * pi, which has exactly one root
    in [order*pi/d, (order+1)*pi/d].
    """
    n_core, n_a, n_b, k0 = np.broadcast_arrays(*(np.asarray(v, dtype=float) for v in (n_core, n_a, n_b, k0)))
    va = k0**2 * (n_core**2 - n_a**2)
    vb = k0**2 * (n_core**2 - n_b**2)
    kmax = np.sqrt(np.minimum(va, vb))

    def resonance(k):
        ga = np.sqrt(np.maximum(va - k**2, 0.0))
        gb = np.sqrt(np.maximum(vb - k**2, 0.0))
        return k * thickness - np.arctan2(ga, k) - np.arctan2(gb, k) - order * np.pi

    guided = resonance(kmax) > 0
    lo = np.full(kmax.shape, order * np.pi / thickness)
    hi = np.minimum((order + 1) * np.pi / thickness, kmax)
    for _ in range(iterations):
        mid = 0.5 * (lo + hi)
        neg = resonance(mid) < 0
        lo = np.where(neg, mid, lo)
        hi = np.where(neg, hi, mid)
    return np.where(guided, 0.5 * (lo + hi), np.nan)


# --- rectangular guide ----------------------------------------------------


def _slab_indices(geometry: WaveguideGeometry, polarization, wavelength):
    im = geometry.index_model
    n_sub = im.substrate_index(polarization, wavelength)
    return n_sub + im.index_step, n_sub


@dataclass(frozen=True)
class GuidedMode:
    index: ModeIndex
    wavelength: float
    geometry: WaveguideGeometry = field(repr=False)
    x: SlabSolution = field(repr=False)
    y: SlabSolution = field(repr=False)

    @property
    def kx(self) -> float:
        return self.x.k_t

    @property
    def ky(self) -> float:
        return self.y.k_t

    @property
    def n_core(self) -> float:
        return self.x.n_core

    @property
    def k0(self) -> float:
        return 2 * np.pi / self.wavelength

    @property
    def beta_bare(self) -> float:
        """Longitudinal wavenumber without the pump calibration offset."""
        return float(np.sqrt((self.k0 * self.n_core) ** 2 - self.kx**2 - self.ky**2))

    @property
    def beta(self) -> float:
        offset = self.geometry.index_model.pump_momentum_offset if self.index.role == "pump" else 0.0
        return self.beta_bare + offset

    @property
    def n_eff(self) -> float:
        return self.beta_bare / self.k0

    @property
    def decay_lengths(self) -> dict[str, float]:
        return {
            "left": 1 / self.x.gamma_a, "right": 1 / self.x.gamma_b,
            "bottom": 1 / self.y.gamma_a, "top": 1 / self.y.gamma_b,
        }

    def window(self, decay_lengths=3.0) -> tuple[float, float, float, float]:
        """(x0, x1, y0, y1) covering the core plus ``decay_lengths`` tails per side."""
        d = self.decay_lengths
        g = self.geometry
        return (-g.width / 2 - decay_lengths * d["left"], g.width / 2 + decay_lengths * d["right"],
                -g.height / 2 - decay_lengths * d["bottom"], g.height / 2 + decay_lengths * d["top"])

    def field(self, x, y):
        return self.x.field(x) * self.y.field(y)


def mode_field(mode: GuidedMode, x, y):
    """Normalised transverse amplitude u(x, y) in 1/m."""
    return mode.field(x, y)


@functools.lru_cache(maxsize=8192)
def _solve_mode_cached(geometry, index, wavelength):
    n_core, n_sub = _slab_indices(geometry, index.polarization, wavelength)
    n_core, n_sub = float(n_core), float(n_sub)
    n_air = geometry.cover_index(n_sub)
    sx = solve_slab(geometry.width, n_core, n_sub, n_sub, wavelength, index.nx)
    if sx is None:
        return None
    sy = solve_slab(geometry.height, n_core, n_sub, n_air, wavelength, index.ny)
    if sy is None:
        return None
    if (2 * np.pi / wavelength * n_core) ** 2 - sx.k_t**2 - sy.k_t**2 <= 0:
        return None
    return GuidedMode(index, float(wavelength), geometry, sx, sy)


def solve_mode(geometry: WaveguideGeometry, index: ModeIndex, wavelength: float) -> GuidedMode | None:
    """Solve one rectangular-guide mode; ``None`` if it is not guided."""
    return _solve_mode_cached(geometry, index, float(wavelength))


def enumerate_modes(geometry, wavelength, polarization, role="signal") -> list[GuidedMode]:
    """Every guided (nx, ny) at ``wavelength`` in lexicographic order."""
    n_core, n_sub = (float(v) for v in _slab_indices(geometry, polarization, wavelength))
    n_air = geometry.cover_index(n_sub)
    nx_max = _count_orders(geometry.width, n_core, n_sub, n_sub, wavelength)
    ny_max = _count_orders(geometry.height, n_core, n_sub, n_air, wavelength)
    modes = []
    for nx in range(nx_max):
        for ny in range(ny_max):
            m = solve_mode(geometry, ModeIndex(nx, ny, polarization, role), wavelength)
            if m is not None:
                modes.append(m)
    return modes


def _count_orders(thickness, n_core, n_a, n_b, wavelength):
    order = 0
    while solve_slab(thickness, n_core, n_a, n_b, wavelength, order) is not None:
        order += 1
    return order


@dataclass(frozen=True)
class ModeFamily:
    """One (geometry, mode index) evaluated across frequency.

    With ``reference_wavelength=None`` the transverse wavenumbers are
    re-solved at every frequency. Otherwise they are solved once at the
    reference wavelength and held fixed, so only the material index carries
    the chromatic dependence.
    """

    geometry: WaveguideGeometry
    index: ModeIndex
    reference_wavelength: float | None = None

    @functools.cached_property
    def _fixed_q(self):
        mode = solve_mode(self.geometry, self.index, self.reference_wavelength)
        if mode is None:
            return (np.nan, np.nan)
        return (mode.kx, mode.ky)

    def transverse(self, omega):
        omega = np.asarray(omega, dtype=float)
        if self.reference_wavelength is not None:
            kx, ky = self._fixed_q
            return np.full(omega.shape, kx), np.full(omega.shape, ky)
        lam = omega_to_wavelength(omega)
        n_core, n_sub = _slab_indices(self.geometry, self.index.polarization, lam)
        k0 = omega / c
        n_air = self.geometry.cover_index(n_sub)
        kx = slab_wavenumber(self.geometry.width, n_core, n_sub, n_sub, k0, self.index.nx)
        ky = slab_wavenumber(self.geometry.height, n_core, n_sub, n_air, k0, self.index.ny)
        return kx, ky

    @property
    def offset(self) -> float:
        if self.index.role == "pump":
            return self.geometry.index_model.pump_momentum_offset
        return 0.0

    def beta(self, omega):
        """Longitudinal propagation constant (1/m); NaN where not guided."""
        omega = np.asarray(omega, dtype=float)
        lam = omega_to_wavelength(omega)
        n_core = self.geometry.index_model.guide_index(self.index.polarization, lam)
        kx, ky = self.transverse(omega)
        b2 = (omega * n_core / c) ** 2 - kx**2 - ky**2
        with np.errstate(invalid="ignore"):
            beta = np.where(b2 > 0, np.sqrt(np.where(b2 > 0, b2, 0.0)), np.nan)
        return beta + self.offset

    def mode(self, wavelength) -> GuidedMode | None:
        return solve_mode(self.geometry, self.index, wavelength)


def propagation_constant(geometry, index: ModeIndex, omega, reference_wavelength=None):
    return ModeFamily(geometry, index, reference_wavelength).beta(omega)

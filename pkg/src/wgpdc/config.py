"""
Run configuration: a sectioned ``key = value`` text file.

Missing keys take the reference-device defaults (4 x 6 um KTP channel,
index step 0.01, 7.59 um poling, 399 nm / 1.1 nm pump). Saving a loaded
config writes every key, so ``save(load(x)) == x`` for files in that
normalized form.
"""

from __future__ import annotations

import configparser
import dataclasses
import io
from dataclasses import dataclass, field, fields
from pathlib import Path

from .dispersion import BUILTIN_DISPERSION, IndexModel
from .errors import ConfigurationError
from .modes import ROLES, WaveguideGeometry
from .phasematch import TRANSVERSE_MODELS
from .spectra import PumpEnvelope, wavelength_axis
from .coupling import PUMP_PRESETS

OUTPUT_DIR_ENV = "WGPDC_OUTPUT_DIR"


@dataclass
class GeometryConfig:
    width_um: float = 4.0
    height_um: float = 6.0
    length_mm: float = 3.5
    poling_period_um: float = 7.59
    index_step: float = 0.01
    buried: bool = False


@dataclass
class DispersionConfig:
    source: str = BUILTIN_DISPERSION


@dataclass
class ModelConfig:
    pump_polarization: str = "y"
    signal_polarization: str = "y"
    idler_polarization: str = "z"
    transverse: str = "fixed"
    reference_pump_nm: float = 399.0
    qpm_order: int = 1


@dataclass
class CalibrationConfig:
    pump_momentum_offset_per_m: float = 0.0
    reference_sh_nm: float = 398.0


@dataclass
class PumpConfig:
    center_nm: float = 399.0
    fwhm_nm: float = 1.1
    preset: str = "paper-misalignment"


@dataclass
class ShgConfig:
    length_mm: float = 2.1
    from_nm: float = 780.0
    to_nm: float = 820.0
    step_nm: float = 0.02


@dataclass
class SpectraConfig:
    grid_points: int = 1024
    axis_min_nm: float = 650.0
    axis_max_nm: float = 950.0
    axis_step_nm: float = 0.05
    prominence: float = 0.02
    cutoff: float = 1e-4
    coherent: bool = False


@dataclass
class RunSection:
    output_dir: str = "."


@dataclass
class RunConfig:
    geometry: GeometryConfig = field(default_factory=GeometryConfig)
    dispersion: DispersionConfig = field(default_factory=DispersionConfig)
    model: ModelConfig = field(default_factory=ModelConfig)
    calibration: CalibrationConfig = field(default_factory=CalibrationConfig)
    pump: PumpConfig = field(default_factory=PumpConfig)
    shg: ShgConfig = field(default_factory=ShgConfig)
    spectra: SpectraConfig = field(default_factory=SpectraConfig)
    run: RunSection = field(default_factory=RunSection)

    def __post_init__(self):
        self.validate()

    # -- derived objects ---------------------------------------------------

    def index_model(self) -> IndexModel:
        return IndexModel.from_file(
            self.dispersion.source,
            index_step=self.geometry.index_step,
            pump_momentum_offset=self.calibration.pump_momentum_offset_per_m,
        )

    def waveguide(self, length_mm: float | None = None) -> WaveguideGeometry:
        g = self.geometry
        return WaveguideGeometry(
            width=g.width_um * 1e-6,
            height=g.height_um * 1e-6,
            length=(g.length_mm if length_mm is None else length_mm) * 1e-3,
            poling_period=g.poling_period_um * 1e-6,
            index_model=self.index_model(),
            buried=g.buried,
        )

    def polarizations(self) -> dict[str, str]:
        m = self.model
        return {"pump": m.pump_polarization, "signal": m.signal_polarization, "idler": m.idler_polarization}

    def pump_envelope(self) -> PumpEnvelope:
        return PumpEnvelope(self.pump.center_nm * 1e-9, self.pump.fwhm_nm * 1e-9)

    def axis(self):
        s = self.spectra
        return wavelength_axis(s.axis_min_nm * 1e-9, s.axis_max_nm * 1e-9, s.axis_step_nm * 1e-9)

    @property
    def reference_pump(self) -> float:
        return self.model.reference_pump_nm * 1e-9

    # -- validation --------------------------------------------------------

    def validate(self):
        def bound(section, key, ok, desc):
            if not ok:
                value = getattr(getattr(self, section), key)
                raise ConfigurationError(f"[{section}] {key} = {value!r}: must be {desc}")

        g = self.geometry
        for key in ("width_um", "height_um", "length_mm", "poling_period_um"):
            bound("geometry", key, getattr(g, key) > 0, "> 0")
        bound("geometry", "index_step", 0 < g.index_step < 0.1,
              "in (0, 0.1); a non-positive step does not guide")
        m = self.model
        for role in ROLES:
            bound("model", f"{role}_polarization", getattr(m, f"{role}_polarization") in ("x", "y", "z"),
                  "one of x, y, z")
        bound("model", "transverse", m.transverse in TRANSVERSE_MODELS, f"one of {TRANSVERSE_MODELS}")
        bound("model", "reference_pump_nm", m.reference_pump_nm > 0, "> 0")
        bound("model", "qpm_order", m.qpm_order >= 1 and m.qpm_order % 2 == 1, "an odd integer >= 1")
        bound("calibration", "reference_sh_nm", self.calibration.reference_sh_nm > 0, "> 0")
        p = self.pump
        bound("pump", "center_nm", p.center_nm > 0, "> 0")
        bound("pump", "fwhm_nm", 0 < p.fwhm_nm < p.center_nm, "in (0, center_nm)")
        bound("pump", "preset", p.preset in PUMP_PRESETS, f"one of {PUMP_PRESETS}")
        s = self.shg
        bound("shg", "length_mm", s.length_mm > 0, "> 0")
        bound("shg", "to_nm", 0 < s.from_nm < s.to_nm, "> from_nm > 0")
        bound("shg", "step_nm", 0 < s.step_nm < s.to_nm - s.from_nm, "in (0, to_nm - from_nm)")
        sp = self.spectra
        bound("spectra", "grid_points", 16 <= sp.grid_points <= 8192, "in [16, 8192]")
        bound("spectra", "axis_max_nm", 0 < sp.axis_min_nm < sp.axis_max_nm, "> axis_min_nm > 0")
        bound("spectra", "axis_step_nm", 0 < sp.axis_step_nm < sp.axis_max_nm - sp.axis_min_nm,
              "in (0, axis span)")
        bound("spectra", "prominence", 0 <= sp.prominence < 1, "in [0, 1)")
        bound("spectra", "cutoff", 0 <= sp.cutoff < 1, "in [0, 1)")
        # the index model checks the offset bound and the dispersion file
        self.index_model()

    def replace(self, section: str, **changes) -> RunConfig:
        new = dataclasses.replace(getattr(self, section), **changes)
        return dataclasses.replace(self, **{section: new})


def _convert(section, key, ftype, raw: str):
    try:
        if ftype == "bool":
            low = raw.strip().lower()
            if low in ("true", "yes", "on", "1"):
                return True
            if low in ("false", "no", "off", "0"):
                return False
            raise ValueError(f"not a boolean: {raw!r}")
        if ftype == "int":
            return int(raw)
        if ftype == "float":
            return float(raw)
        return raw.strip()
    except ValueError as exc:
        raise ConfigurationError(f"[{section}] {key}: {exc}") from exc


def loads(text: str, source="<string>") -> RunConfig:
    parser = configparser.ConfigParser(interpolation=None, inline_comment_prefixes=("#", ";"))
    try:
        parser.read_string(text, source=source)
    except configparser.Error as exc:
        # configparser messages already carry the line number
        raise ConfigurationError(f"cannot parse config: {exc}") from exc
    known = {f.name: f for f in fields(RunConfig)}
    sections = {}
    for name in parser.sections():
        if name not in known:
            raise ConfigurationError(f"{source}: unknown section [{name}]")
        cls = known[name].default_factory
        types = {f.name: f.type for f in fields(cls)}
        values = {}
        for key, raw in parser[name].items():
            if key not in types:
                raise ConfigurationError(f"{source}: unknown key {key!r} in [{name}]")
            values[key] = _convert(name, key, types[key], raw)
        sections[name] = cls(**values)
    return RunConfig(**sections)


def load_config(path: str | Path | None = None) -> RunConfig:
    """Read a config file; ``None`` gives the defaults."""
    if path is None:
        return RunConfig()
    path = Path(path)
    if not path.is_file():
        raise ConfigurationError(f"config file not found: {path}")
    try:
        text = path.read_text(encoding="utf-8")
    except (OSError, UnicodeDecodeError) as exc:
        raise ConfigurationError(f"cannot read config {path}: {exc}") from exc
    return loads(text, str(path))


def _format(value) -> str:
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        return repr(value)
    return str(value)


def dumps(cfg: RunConfig) -> str:
    out = io.StringIO()
    for i, f in enumerate(fields(RunConfig)):
        if i:
            out.write("\n")
        out.write(f"[{f.name}]\n")
        section = getattr(cfg, f.name)
        for g in fields(section):
            out.write(f"{g.name} = {_format(getattr(section, g.name))}\n")
    return out.getvalue()


def save_config(cfg: RunConfig, path: str | Path) -> None:
    Path(path).write_text(dumps(cfg), encoding="utf-8")

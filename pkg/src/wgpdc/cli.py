"""
Command-line front end.

Every CSV starts with ``#`` comment lines giving the tool version, the
command line and the full effective configuration, so a run can be
re-executed from its own output.
"""

from __future__ import annotations

import argparse
import csv
import io
import logging
import os
import re
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .config import OUTPUT_DIR_ENV, RunConfig, dumps, load_config, save_config
from .coupling import enumerate_triplets, parity_allowed
from .dispersion import dispersion_table
from .errors import ConfigurationError, NumericalError
from .modes import ModeIndex, enumerate_modes, solve_mode, wavelength_to_omega
from .phasematch import PhasematchContext, calibrate_pump_offset, make_family, shg_peaks
from .spectra import compute_jsa, fiber_filter, simulate_pdc

EXIT_OK, EXIT_USAGE, EXIT_CONFIG, EXIT_NUMERICAL = 0, 1, 2, 3

log = logging.getLogger("wgpdc")


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        raise UsageError(f"{self.prog}: error: {message}")


def _fmt(x) -> str:
    if isinstance(x, (float, np.floating)):
        return format(float(x), ".12g")
    return str(x)


class CsvOutput:
    """CSV text with the provenance header."""

    def __init__(self, cfg: RunConfig, argv):
        self.buf = io.StringIO()
        self.buf.write(f"# wgpdc {__version__}\n")
        self.buf.write(f"# command: {' '.join(argv)}\n")
        for line in dumps(cfg).splitlines():
            self.buf.write(f"# {line}\n" if line else "#\n")
        self.writer = csv.writer(self.buf, lineterminator="\n")

    def comment(self, text):
        self.buf.write(f"# {text}\n")

    def header(self, cols):
        self.writer.writerow(cols)

    def row(self, values):
        self.writer.writerow([_fmt(v) for v in values])

    def text(self) -> str:
        return self.buf.getvalue()


def output_dir(cfg: RunConfig, override: str | None) -> Path:
    path = Path(override or os.environ.get(OUTPUT_DIR_ENV) or cfg.run.output_dir)
    path.mkdir(parents=True, exist_ok=True)
    return path


def _emit(out: CsvOutput, args, default_name: str) -> Path | None:
    if args.output == "-":
        sys.stdout.write(out.text())
        return None
    path = Path(args.output) if args.output else output_dir(args.cfg, args.output_dir) / default_name
    path.write_text(out.text(), encoding="utf-8")
    print(path)
    return path


_NODE_RE = re.compile(r"\d+")


def parse_triplet(text: str):
    """``00,01,01`` or ``(0,0)->(0,1)+(0,1)`` to three (nx, ny) pairs."""
    parts = [p for p in re.split(r"[,\s]+", text.strip()) if p]
    if len(parts) == 3 and all(re.fullmatch(r"\d\d", p) for p in parts):
        nums = [int(ch) for p in parts for ch in p]
    else:
        nums = [int(n) for n in _NODE_RE.findall(text)]
    if len(nums) != 6:
        raise UsageError(f"cannot parse triplet {text!r}; use e.g. 00,01,01")
    return (nums[0], nums[1]), (nums[2], nums[3]), (nums[4], nums[5])


# --- commands -------------------------------------------------------------


def cmd_dump_dispersion(args):
    cfg = args.cfg
    model = cfg.index_model()
    axes = tuple(a.strip() for a in args.axes.split(",") if a.strip())
    grid, table = dispersion_table(model, args.lam_min, args.lam_max, args.step, axes)
    out = CsvOutput(cfg, args.argv)
    out.header(["wavelength_nm"] + [f"n_{a}_unitless" for a in axes])
    for lam, row in zip(grid, table):
        out.row([lam, *row])
    _emit(out, args, "dispersion.csv")


def cmd_modes(args):
    cfg = args.cfg
    geom = cfg.waveguide()
    lam = args.wavelength_nm * 1e-9
    pols = [args.polarization] if args.polarization else sorted(set(cfg.polarizations().values()))
    out = CsvOutput(cfg, args.argv)
    out.header(["polarization", "nx_nodes", "ny_nodes", "kx_per_um", "ky_per_um",
                "n_eff_unitless", "beta_per_um"])
    for pol in pols:
        for m in enumerate_modes(geom, lam, pol):
            out.row([pol, m.index.nx, m.index.ny, m.kx * 1e-6, m.ky * 1e-6, m.n_eff, m.beta_bare * 1e-6])
    _emit(out, args, "modes.csv")
    if args.field:
        nodes = [int(n) for n in _NODE_RE.findall(args.field)]
        if len(nodes) != 2:
            raise UsageError(f"cannot parse --field {args.field!r}; use e.g. 1,0")
        pol = pols[0]
        mode = solve_mode(geom, ModeIndex(*nodes, pol), lam)
        if mode is None:
            raise ConfigurationError(f"mode ({nodes[0]},{nodes[1]}) is not guided at {args.wavelength_nm:g} nm")
        x0, x1, y0, y1 = mode.window()
        x = np.linspace(x0, x1, args.grid)
        y = np.linspace(y0, y1, args.grid)
        u = mode.field(x[:, None], y[None, :])
        out = CsvOutput(cfg, args.argv)
        out.comment(f"mode: {mode.index.label} {pol} at {args.wavelength_nm:g} nm")
        out.header(["x_um", "y_um", "amplitude_per_um"])
        for j, xv in enumerate(x):
            for k, yv in enumerate(y):
                out.row([xv * 1e6, yv * 1e6, u[j, k] * 1e-6])
        args.output = None if args.output != "-" else "-"
        _emit(out, args, f"field_{nodes[0]}{nodes[1]}_{pol}.csv")


def cmd_triplets(args):
    cfg = args.cfg
    geom = cfg.waveguide()
    lam = (args.pump_nm or cfg.pump.center_nm) * 1e-9
    cutoff = cfg.spectra.cutoff if args.cutoff is None else args.cutoff
    trips = enumerate_triplets(geom, lam, 2 * lam, args.preset or cfg.pump.preset,
                               cfg.polarizations(), None if args.all else cutoff,
                               threads=args.threads)
    fund = next((t.coupling for t in trips
                 if t.pump.nodes == t.signal.nodes == t.idler.nodes == (0, 0)), 0.0)
    wmax = max((t.weight for t in trips), default=0.0)
    out = CsvOutput(cfg, args.argv)
    out.comment(f"triplet count: {len(trips)}")
    out.header(["pump_mode", "signal_mode", "idler_mode", "A_lmn_rel", "A_lmn_per_m", "A_p_rel",
                "weight_rel", "parity_x_flag", "parity_y_flag"])
    for t in trips:
        pc = parity_allowed(t.pump, t.signal, t.idler)
        out.row([t.pump.label, t.signal.label, t.idler.label, t.coupling / fund if fund else float("nan"),
                 t.coupling, t.pump_amplitude, t.weight / wmax if wmax else 0.0, int(pc.x), int(pc.y)])
    _emit(out, args, "triplets.csv")


def _calibrate(cfg: RunConfig, sh_nm: float) -> RunConfig:
    geom = cfg.waveguide()
    offset = calibrate_pump_offset(geom, sh_wavelength=sh_nm * 1e-9,
                                   polarizations=cfg.polarizations(),
                                   transverse=cfg.model.transverse,
                                   pump_reference=cfg.reference_pump,
                                   qpm_order=cfg.model.qpm_order)
    return cfg.replace("calibration", pump_momentum_offset_per_m=offset, reference_sh_nm=sh_nm)


def _persist(cfg: RunConfig, args):
    target = Path(args.config) if args.config else output_dir(cfg, args.output_dir) / "run.ini"
    save_config(cfg, target)
    print(target)


def cmd_calibrate(args):
    sh_nm = args.sh_nm or args.cfg.calibration.reference_sh_nm
    cfg = _calibrate(args.cfg, sh_nm)
    args.cfg = cfg
    _persist(cfg, args)
    geom = cfg.waveguide()
    fam = make_family(geom.with_offset(0.0), (0, 0), "pump", cfg.polarizations(),
                      cfg.model.transverse, cfg.reference_pump)
    beta = float(fam.beta(wavelength_to_omega(sh_nm * 1e-9)))
    off = cfg.calibration.pump_momentum_offset_per_m
    out = CsvOutput(cfg, args.argv)
    out.header(["reference_sh_nm", "pump_momentum_offset_per_m", "beta_pump_per_m", "offset_fraction_rel"])
    out.row([sh_nm, off, beta, off / beta])
    _emit(out, args, "calibration.csv")


def cmd_shg(args):
    cfg = args.cfg
    if args.calibrate_to is not None:
        cfg = _calibrate(cfg, args.calibrate_to)
        args.cfg = cfg
        if args.config:
            _persist(cfg, args)
    geom = cfg.waveguide(cfg.shg.length_mm)
    lo = (args.from_nm or cfg.shg.from_nm) * 1e-9
    hi = (args.to_nm or cfg.shg.to_nm) * 1e-9
    pols = cfg.polarizations()
    sh_lam = 0.25 * (lo + hi)
    sh = enumerate_modes(geom, sh_lam, pols["pump"], "pump")
    f1 = enumerate_modes(geom, 2 * sh_lam, pols["signal"], "signal")
    f2 = enumerate_modes(geom, 2 * sh_lam, pols["idler"], "idler")
    procs = [(a.index.nodes, b.index.nodes, c.index.nodes) for a in sh for b in f1 for c in f2]
    peaks = shg_peaks(geom, procs, (lo, hi), cfg.shg.step_nm * 1e-9, pols, cfg.model.transverse,
                      cfg.reference_pump, cfg.model.qpm_order)
    out = CsvOutput(cfg, args.argv)
    out.header(["sh_mode", "f1_mode", "f2_mode", "sh_wavelength_nm", "fundamental_nm", "residual_per_m"])
    for p in peaks:
        out.row([p.sh.label, p.f1.label, p.f2.label, p.sh_wavelength * 1e9,
                 p.fundamental_wavelength * 1e9, p.residual])
    _emit(out, args, "shg.csv")


def cmd_jsa(args):
    cfg = args.cfg
    geom = cfg.waveguide()
    p, s, i = parse_triplet(args.triplet)
    ctx = PhasematchContext.build(geom, p, s, i, cfg.polarizations(), cfg.model.transverse,
                                  cfg.reference_pump, cfg.model.qpm_order)
    grid = compute_jsa(ctx, cfg.pump_envelope(), args.points or cfg.spectra.grid_points)
    stride = max(1, args.stride)
    f = grid.f[::stride, ::stride]
    ls, li = grid.lambda_s[::stride] * 1e9, grid.lambda_i[::stride] * 1e9
    out = CsvOutput(cfg, args.argv)
    out.comment(f"triplet: {ctx.label}")
    out.header(["lambda_s_nm", "lambda_i_nm", "re_rel", "im_rel", "abs2_rel"])
    for j, a in enumerate(ls):
        for k, b in enumerate(li):
            v = f[j, k]
            out.row([a, b, v.real, v.imag, abs(v) ** 2])
    _emit(out, args, f"jsa_{'_'.join(f'{x}{y}' for x, y in (p, s, i))}.csv")


def cmd_pdc(args):
    cfg = args.cfg
    changes = {}
    if args.pump_nm is not None:
        changes["center_nm"] = args.pump_nm
    if args.pump_fwhm_nm is not None:
        changes["fwhm_nm"] = args.pump_fwhm_nm
    if args.preset is not None:
        changes["preset"] = args.preset
    if changes:
        cfg = cfg.replace("pump", **changes)
    if args.length_mm is not None:
        cfg = cfg.replace("geometry", length_mm=args.length_mm)
    if args.calibrate:
        cfg = _calibrate(cfg, cfg.calibration.reference_sh_nm)
    elif cfg.calibration.pump_momentum_offset_per_m == 0.0:
        log.warning("pump_momentum_offset is 0; run 'wgpdc calibrate' or pass --calibrate")
    args.cfg = cfg
    geom = cfg.waveguide()
    res = simulate_pdc(geom, cfg.pump_envelope(), cfg.pump.preset, cfg.polarizations(),
                       cfg.model.transverse, cfg.reference_pump, cfg.spectra.cutoff or None,
                       n_points=cfg.spectra.grid_points, axis=cfg.axis(),
                       coherent=cfg.spectra.coherent, threads=args.threads,
                       prominence=cfg.spectra.prominence)
    arms = ["signal", "idler"] if args.arm == "both" else [args.arm]
    for arm in arms:
        if args.fiber_waist_um is not None:
            spec = fiber_filter(res, arm, args.fiber_waist_um * 1e-6, axis=cfg.axis(),
                                prominence=cfg.spectra.prominence)
        else:
            spec = res.signal if arm == "signal" else res.idler
        top = spec.top_components(10)
        out = CsvOutput(cfg, args.argv)
        out.comment(f"arm: {arm}; triplets: {len(res.spectra)}; skipped: {len(res.skipped)}")
        for pk in spec.peaks:
            out.comment(f"peak_nm = {_fmt(pk.wavelength * 1e9)}, height_rel = {_fmt(pk.height)}")
        out.header(["wavelength_nm", "total_rel"] + [f"{k}_rel" for k in top])
        for j, lam in enumerate(spec.wavelength):
            out.row([lam * 1e9, spec.total[j], *(spec.components[k][j] for k in top)])
        name = f"pdc_{arm}{'_fiber' if args.fiber_waist_um is not None else ''}.csv"
        _emit(out, args, name)


# --- parser ---------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    common = _Parser(add_help=False)
    common.add_argument("--config", "-c", help="run configuration file")
    common.add_argument("--output", "-o", help="output file ('-' for stdout)")
    common.add_argument("--output-dir", help=f"output directory (default ${OUTPUT_DIR_ENV} or config)")
    common.add_argument("--threads", type=int, default=None, help="worker threads (default: all cores)")
    common.add_argument("-v", "--verbose", action="store_true")

    parser = _Parser(prog="wgpdc", description="Multimode waveguide PDC/SHG spectral model.")
    parser.add_argument("--version", action="version", version=f"wgpdc {__version__}")
    sub = parser.add_subparsers(dest="command", metavar="command", parser_class=_Parser)
    sub.required = True

    p = sub.add_parser("dump-dispersion", parents=[common], help="tabulate substrate indices")
    p.add_argument("lam_min", type=float, metavar="LMIN_NM")
    p.add_argument("lam_max", type=float, metavar="LMAX_NM")
    p.add_argument("step", type=float, metavar="STEP_NM")
    p.add_argument("--axes", default="y,z", help="comma-separated crystal axes (default y,z)")
    p.set_defaults(func=cmd_dump_dispersion)

    p = sub.add_parser("modes", parents=[common], help="list guided modes")
    p.add_argument("--wavelength-nm", "--wavelength", type=float, default=800.0)
    p.add_argument("--polarization", choices=("x", "y", "z"))
    p.add_argument("--field", metavar="NX,NY", help="also write this mode's field raster")
    p.add_argument("--grid", type=int, default=101, help="raster points per axis")
    p.set_defaults(func=cmd_modes)

    p = sub.add_parser("triplets", parents=[common], help="coupling constants of mode triplets")
    p.add_argument("--pump-nm", type=float)
    p.add_argument("--preset", choices=("centered", "paper-misalignment", "fundamental-only"))
    p.add_argument("--cutoff", type=float, help="drop triplets below this fraction of the top weight")
    p.add_argument("--all", action="store_true", help="no weight cutoff")
    p.set_defaults(func=cmd_triplets)

    p = sub.add_parser("shg", parents=[common], help="SHG peak positions")
    p.add_argument("--from-nm", type=float)
    p.add_argument("--to-nm", type=float)
    p.add_argument("--calibrate-to", type=float, metavar="SH_NM")
    p.set_defaults(func=cmd_shg)

    p = sub.add_parser("calibrate", parents=[common], help="fit the pump-momentum offset")
    p.add_argument("--sh-nm", type=float)
    p.set_defaults(func=cmd_calibrate)

    p = sub.add_parser("jsa", parents=[common], help="JSA raster of one triplet")
    p.add_argument("--triplet", required=True, help="pump,signal,idler nodes, e.g. 00,00,00")
    p.add_argument("--points", type=int)
    p.add_argument("--stride", type=int, default=1, help="write every n-th grid point")
    p.set_defaults(func=cmd_jsa)

    p = sub.add_parser("pdc", parents=[common], help="composite marginal spectra")
    p.add_argument("--pump-nm", type=float)
    p.add_argument("--pump-fwhm-nm", type=float)
    p.add_argument("--length-mm", type=float)
    p.add_argument("--preset", choices=("centered", "paper-misalignment", "fundamental-only"))
    p.add_argument("--fiber-waist-um", type=float)
    p.add_argument("--arm", choices=("signal", "idler", "both"), default="both")
    p.add_argument("--calibrate", action="store_true", help="calibrate the pump offset first")
    p.set_defaults(func=cmd_pdc)
    return parser


def main(argv=None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    if "--dump-dispersion" in argv:
        argv[argv.index("--dump-dispersion")] = "dump-dispersion"
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except UsageError as exc:
        print(exc, file=sys.stderr)
        return EXIT_USAGE
    except SystemExit as exc:  # --help / --version
        return int(exc.code or 0)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s: %(message)s")
    args.argv = ["wgpdc", *argv]
    if args.threads is not None and args.threads < 1:
        print("wgpdc: error: --threads must be >= 1", file=sys.stderr)
        return EXIT_USAGE
    if args.threads is None:
        args.threads = os.cpu_count()
    try:
        args.cfg = load_config(args.config)
        args.func(args)
    except UsageError as exc:
        print(exc, file=sys.stderr)
        return EXIT_USAGE
    except ConfigurationError as exc:
        print(f"wgpdc: configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except NumericalError as exc:
        print(f"wgpdc: numerical failure: {exc}", file=sys.stderr)
        for k, v in getattr(exc, "residuals", {}).items():
            print(f"  residual at offset {k:.6g} 1/m: {v:.6g} 1/m", file=sys.stderr)
        return EXIT_NUMERICAL
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())

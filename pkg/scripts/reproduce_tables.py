"""Regenerate the reference comparison report.

Prints SHG peak positions, coupling ratios, per-triplet PDC marginal peaks
and the composite spread next to the tabulated values they are compared
against.

    python scripts/reproduce_tables.py [--threads N] [--top K]
"""

import argparse
import time

from wgpdc.coupling import coupling_constant
from wgpdc.modes import ModeIndex, WaveguideGeometry, solve_mode
from wgpdc.phasematch import calibrate_pump_offset, shg_peaks
from wgpdc.spectra import PumpEnvelope, signal_support, simulate_pdc

SHG_ROWS = [
    (((0, 2), (0, 0), (0, 0)), 395.1),
    (((0, 0), (0, 0), (0, 0)), 398.0),
    (((0, 0), (0, 1), (0, 2)), 404.1),
    (((0, 1), (0, 0), (0, 1)), 399.3),
]
# (pump, signal, idler) nodes and tabulated ratio to the fundamental process
RATIO_ROWS = [
    (((0, 0), (0, 1), (0, 1)), 0.661),
    (((1, 0), (1, 0), (0, 0)), 0.789),
    (((0, 0), (0, 1), (0, 0)), 0.0),
]
PDC_ROWS = {
    "p00_s00_i00": (788.1, 806.2),
    "p00_s01_i01": (827.0, 700.3),
    "p00_s10_i10": (816.5, 742.9),
    "p00_s11_i11": (895.0, 719.4),
}


def fmt(nodes):
    return "(%d,%d)" % nodes


def coupling_ratios(geom, transpose):
    flip = (lambda n: n[::-1]) if transpose else (lambda n: n)

    def amp(p, s, i):
        return coupling_constant(solve_mode(geom, ModeIndex(*flip(p), "y", "pump"), 399e-9),
                                 solve_mode(geom, ModeIndex(*flip(s), "y", "signal"), 798e-9),
                                 solve_mode(geom, ModeIndex(*flip(i), "z", "idler"), 798e-9))

    ref = amp((0, 0), (0, 0), (0, 0))
    return [amp(*nodes) / ref for nodes, _ in RATIO_ROWS]


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--threads", type=int, default=2)
    ap.add_argument("--top", type=int, default=60, help="triplets in the spread run")
    args = ap.parse_args()

    geom = WaveguideGeometry()
    offset = calibrate_pump_offset(geom)
    cal = geom.with_offset(offset)
    print(f"pump offset: {offset:.6g} 1/m")

    print("\nSHG peaks, L = 2.1 mm (nm)")
    shg_geom = cal.with_length(2.1e-3)
    for nodes, target in SHG_ROWS:
        sh, a, b = nodes
        got = min((p.sh_wavelength * 1e9 for p in shg_peaks(shg_geom, [nodes])),
                  key=lambda w: abs(w - target), default=float("nan"))
        print(f"  {fmt(a)}+{fmt(b)}->{fmt(sh)}  model {got:8.2f}  tabulated {target:6.1f}  "
              f"diff {got - target:+.2f}")

    print("\ncoupling ratio to fundamental")
    direct = coupling_ratios(geom, transpose=False)
    swapped = coupling_ratios(geom, transpose=True)
    for (nodes, target), d, s in zip(RATIO_ROWS, direct, swapped):
        p, si, i = nodes
        print(f"  {fmt(p)}->{fmt(si)}+{fmt(i)}  labels as (x,y) {d:+.4f}  "
              f"labels as (y,x) {s:+.4f}  tabulated {target:.3f}")

    print("\nPDC marginal peaks, pump 399 nm / 1.1 nm FWHM, L = 3.5 mm (nm)")
    t0 = time.perf_counter()
    res = simulate_pdc(cal, PumpEnvelope(399e-9, 1.1e-9), threads=args.threads)
    by_key = {s.key: s for s in res.spectra}
    for key, (ts, ti) in PDC_ROWS.items():
        sp = by_key.get(key)
        if sp is None:
            print(f"  {key}  not computed")
            continue
        ls, li = sp.peak_wavelength("signal") * 1e9, sp.peak_wavelength("idler") * 1e9
        print(f"  {key}  signal {ls:7.2f} (tab {ts})  idler {li:7.2f} (tab {ti})  "
              f"tabulated pair implies pump {1 / (1 / ts + 1 / ti):.1f}")
    for arm in ("signal", "idler"):
        peaks = ", ".join(f"{p.wavelength * 1e9:.2f}" for p in getattr(res, arm).peaks)
        print(f"  composite {arm} peaks: {peaks}")
    print(f"  {len(res.spectra)} triplets in {time.perf_counter() - t0:.1f} s")

    print(f"\ncomposite spread, top {args.top} triplets, pump 1.14 nm FWHM")
    spread = simulate_pdc(cal, PumpEnvelope(399e-9, 1.14e-9), top=args.top, threads=args.threads)
    lo, hi = signal_support(spread.spectra)
    print(f"  signal support {lo * 1e9:.1f}-{hi * 1e9:.1f} nm = {(hi - lo) * 1e9:.1f} nm")


if __name__ == "__main__":
    main()

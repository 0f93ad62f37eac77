"""
Acceptance suite: one recorded PASS/FAIL line per criterion, printed in the
terminal summary. Tolerances are the contract values; a failing criterion
is left failing.
"""

import itertools
import time

import numpy as np

from wgpdc.coupling import coupling_constant, enumerate_triplets, parity_allowed
from wgpdc.modes import (ModeIndex, WaveguideGeometry, _solve_mode_cached, enumerate_modes,
                         solve_mode, wavelength_to_omega)
from wgpdc.phasematch import (PhasematchContext, calibrate_pump_offset, make_family,
                              pm_function, shg_peaks)
from wgpdc.spectra import (PumpEnvelope, compute_jsa, energy_pairing_error, signal_support,
                           simulate_pdc, wavelength_axis)

FUND = ((0, 0), (0, 0), (0, 0))
# (sh, f1, f2) node triples and tabulated SH wavelengths (nm)
SHG_TARGETS = {
    ((0, 2), (0, 0), (0, 0)): 395.1,
    ((0, 0), (0, 0), (0, 0)): 398.0,
    ((0, 0), (0, 1), (0, 2)): 404.1,
    ((0, 1), (0, 0), (0, 1)): 399.3,
}
# tabulated PDC marginal peaks (signal nm, idler nm), pump (0,0)
PDC_ROWS = {
    "p00_s00_i00": (788.1, 806.2),
    "p00_s01_i01": (827.0, 700.3),
    "p00_s10_i10": (816.5, 742.9),
    "p00_s11_i11": (895.0, 719.4),
}


def nm(x):
    return x * 1e9


def label(nodes):
    return "(%d,%d)" % nodes


def test_criterion_1_shg_peaks(record_criterion):
    _solve_mode_cached.cache_clear()  # time a cold solve
    t0 = time.perf_counter()
    geom = WaveguideGeometry(length=2.1e-3)
    cal = geom.with_offset(calibrate_pump_offset(geom, sh_wavelength=398.0e-9))
    found = {}
    for row in SHG_TARGETS:
        peaks = shg_peaks(cal, [row])
        # both assignments of the fundamentals are tried; keep the one nearest the target
        found[row] = min((nm(p.sh_wavelength) for p in peaks),
                         key=lambda w: abs(w - SHG_TARGETS[row]), default=float("nan"))
    elapsed = time.perf_counter() - t0
    errs = {row: found[row] - SHG_TARGETS[row] for row in SHG_TARGETS}
    ok_cal = abs(errs[FUND]) < 0.01
    ok_rows = all(abs(e) <= 0.7 for row, e in errs.items() if row != FUND)
    ok = ok_cal and ok_rows and elapsed < 30
    detail = "; ".join(f"{label(a)}+{label(b)}->{label(s)}: {found[(s, a, b)]:.2f} nm "
                       f"(target {SHG_TARGETS[(s, a, b)]}, {errs[(s, a, b)]:+.2f})"
                       for s, a, b in SHG_TARGETS)
    record_criterion(1, ok, f"{detail}; runtime {elapsed:.2f} s")
    assert ok


def test_criterion_2_calibration_magnitude(record_criterion, geometry, offset):
    beta = float(make_family(geometry, (0, 0), "pump").beta(wavelength_to_omega(398e-9)))
    frac = abs(offset) / beta
    ok = frac <= 0.006
    record_criterion(2, ok, f"offset {offset:.6g} 1/m = {100 * frac:.3f}% of beta_p(398 nm) (bound 0.6%)")
    assert ok


def test_criterion_3_fundamental_and_11(record_criterion, pdc_spectra):
    checks = []
    for key, tol in (("p00_s00_i00", 3.0), ("p00_s11_i11", 4.0)):
        sp = pdc_spectra[key]
        for arm, target in zip(("signal", "idler"), PDC_ROWS[key]):
            got = nm(sp.peak_wavelength(arm))
            checks.append((key, arm, got, target, abs(got - target) <= tol))
    ok = all(c[-1] for c in checks)
    detail = "; ".join(f"{k} {a} {g:.2f} nm (target {t})" for k, a, g, t, _ in checks)
    record_criterion(3, ok, detail)
    assert ok


def test_criterion_4_rows_2_3_qualitative(record_criterion, pdc_result, pdc_spectra):
    fund = pdc_spectra["p00_s00_i00"]
    composite = {"signal": [nm(p.wavelength) for p in pdc_result.signal.peaks],
                 "idler": [nm(p.wavelength) for p in pdc_result.idler.peaks]}
    ok = True
    parts = []
    for key in ("p00_s01_i01", "p00_s10_i10"):
        sp = pdc_spectra[key]
        for arm in ("signal", "idler"):
            got = nm(sp.peak_wavelength(arm))
            sep = abs(got - nm(fund.peak_wavelength(arm)))
            distinct = any(abs(got - w) < 1.0 for w in composite[arm])
            ok &= sep > 15 and distinct
            target = PDC_ROWS[key][0 if arm == "signal" else 1]
            parts.append(f"{key} {arm} {got:.1f} nm (table {target}, sep {sep:.1f} nm, "
                         f"{'resolved' if distinct else 'merged'} in composite)")
    record_criterion(4, ok, "; ".join(parts))
    assert ok


def test_criterion_5_coupling_ratios(record_criterion, geometry):
    # table labels are read as (y nodes, x nodes)
    def a(p, s, i):
        T = lambda n: n[::-1]
        return coupling_constant(solve_mode(geometry, ModeIndex(*T(p), "y", "pump"), 399e-9),
                                 solve_mode(geometry, ModeIndex(*T(s), "y", "signal"), 798e-9),
                                 solve_mode(geometry, ModeIndex(*T(i), "z", "idler"), 798e-9))

    f = a((0, 0), (0, 0), (0, 0))
    r1 = a((0, 0), (0, 1), (0, 1)) / f
    r2 = a((1, 0), (1, 0), (0, 0)) / f
    r3 = abs(a((0, 0), (0, 1), (0, 0)) / f)
    ok = abs(r1 - 0.661) <= 0.066 and abs(r2 - 0.789) <= 0.079 and r3 < 0.05
    record_criterion(5, ok, f"(0,1)+(0,1): {r1:.4f} (0.661 +- 0.066); (1,0)->(1,0)+(0,0): {r2:.4f} "
                            f"(0.789 +- 0.079); (0,0)->(0,1)+(0,0): {r3:.2e} (< 0.05)")
    assert ok


def test_criterion_6_single_basis_parity(record_criterion):
    # single basis: one wavelength and polarization for all three fields, symmetric cladding
    g = WaveguideGeometry(buried=True)
    worst = {}
    for pol in ("y", "z"):
        modes = enumerate_modes(g, 800e-9, pol)
        ref = abs(coupling_constant(modes[0], modes[0], modes[0]))
        worst[pol] = max(abs(coupling_constant(a, b, c)) / ref
                         for a, b, c in itertools.product(modes, repeat=3)
                         if not parity_allowed(a.index, b.index, c.index))
    air = WaveguideGeometry()
    modes = enumerate_modes(air, 800e-9, "z")
    ref = abs(coupling_constant(modes[0], modes[0], modes[0]))
    air_worst = max(abs(coupling_constant(a, b, c)) / ref for a, b, c in itertools.product(modes, repeat=3)
                    if not parity_allowed(a.index, b.index, c.index))
    ok = all(w < 1e-10 for w in worst.values())
    record_criterion(6, ok, f"max |A|/|A_fund| over violators: y {worst['y']:.1e}, z {worst['z']:.1e} "
                            f"(bound 1e-10); with air cover {air_worst:.3f}")
    assert ok


def test_criterion_7_mode_structure(record_criterion, geometry):
    pump = enumerate_modes(geometry, 400e-9, "y", "pump")
    dc = {pol: enumerate_modes(geometry, 800e-9, pol) for pol in ("y", "z")}
    fig_modes = all(solve_mode(geometry, ModeIndex(*n, "z"), 800e-9) is not None
                    for n in [(0, 0), (1, 0), (0, 1), (0, 2)])
    count = len(enumerate_triplets(geometry, 399e-9, cutoff=None))
    ok = (max(m.index.nodes for m in pump) == (3, 5)
          and all(max(m.index.nodes for m in v) == (1, 2) for v in dc.values())
          and fig_modes)
    record_criterion(7, ok, f"pump max {max(m.index.nodes for m in pump)} ({len(pump)} modes), "
                            f"800 nm max (1,2) y/z ({len(dc['y'])} each); triplets {count} vs 720 quoted")
    assert ok


def test_criterion_8_invariants(record_criterion, calibrated, pdc_result):
    pump = PumpEnvelope(399e-9, 1.1e-9)
    results = {}

    ctx = PhasematchContext.build(calibrated, *FUND)
    grid = compute_jsa(ctx, pump, 256)
    total = np.add.outer(grid.omega_s, grid.omega_i)
    results["factorisation"] = (np.array_equal(grid.f, grid.alpha * grid.phi)
                                and np.allclose(grid.alpha, pump(total), rtol=0, atol=1e-9))

    db = np.linspace(-1e5, 1e5, 20001)
    v = pm_function(db, calibrated.length)
    results["sinc"] = (pm_function(0.0, 1.0) == 1 and np.all(np.abs(v) <= 1)
                       and np.allclose(pm_function(-db, calibrated.length), np.conj(v), atol=1e-15))

    rel = max(abs(s.integral("signal") / s.integral("idler") - 1) for s in pdc_result.spectra)
    results[f"marginal integrals (max {100 * rel:.3f}%)"] = rel < 5e-3

    err = max(energy_pairing_error(s, pump) for s in pdc_result.spectra)
    results[f"energy pairing (max {nm(err):.3f} nm)"] = err <= pump.fwhm

    a = simulate_pdc(calibrated, pump, top=12, n_points=1024, threads=2)
    b = simulate_pdc(calibrated, pump, top=12, n_points=2048,
                     axis=wavelength_axis(650e-9, 950e-9, 0.025e-9), threads=2)
    shift = max(abs(x.peak_wavelength(arm) - y.peak_wavelength(arm))
                for x, y in zip(a.spectra, b.spectra) for arm in ("signal", "idler"))
    for arm in ("signal", "idler"):
        pa = sorted(p.wavelength for p in getattr(a, arm).peaks)
        pb = sorted(p.wavelength for p in getattr(b, arm).peaks)
        shift = max(shift, max(abs(x - y) for x, y in zip(pa, pb))) if len(pa) == len(pb) else np.inf
    results[f"grid doubling (max {nm(shift):.4f} nm)"] = shift < 0.05e-9

    one = simulate_pdc(calibrated, pump, top=24, threads=1)
    many = simulate_pdc(calibrated, pump, top=24, threads=4)
    results["threads 1 vs 4"] = all(np.array_equal(getattr(one, arm).total, getattr(many, arm).total)
                                    for arm in ("signal", "idler"))
    ok = all(results.values())
    record_criterion(8, ok, "; ".join(f"{k} {'ok' if v else 'FAIL'}" for k, v in results.items()))
    assert ok


def test_criterion_9_composite_spread(record_criterion, calibrated):
    res = simulate_pdc(calibrated, PumpEnvelope(399e-9, 1.14e-9), top=60, threads=2)
    lo, hi = signal_support(res.spectra)
    span = nm(hi - lo)
    ok = span > 200
    record_criterion(9, ok, f"top-60 signal support {nm(lo):.1f}-{nm(hi):.1f} nm = {span:.1f} nm (> 200)")
    assert ok

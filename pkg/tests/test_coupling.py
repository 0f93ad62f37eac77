import itertools

import numpy as np
import pytest
from hypothesis import given, strategies as st

from wgpdc.coupling import (
    HIGHER_ORDER_ENERGY_FRACTION, ExternalPumpBeam, TripletProcess, common_window,
    coupling_constant, enumerate_triplets, gaussian_mode_overlap, grid_overlap,
    matched_waist, overlap_1d, parity_allowed, preset_pump_amplitudes, pump_coupling,
)
from wgpdc.errors import ConfigurationError
from wgpdc.modes import ModeIndex, WaveguideGeometry, enumerate_modes, solve_mode


def triplet_modes(geometry, p, s, i, lam_p=399e-9):
    return (solve_mode(geometry, ModeIndex(*p, "y", "pump"), lam_p),
            solve_mode(geometry, ModeIndex(*s, "y", "signal"), 2 * lam_p),
            solve_mode(geometry, ModeIndex(*i, "z", "idler"), 2 * lam_p))


def transpose(*nodes):
    # table rows are read as (y nodes, x nodes) in this package's (nx, ny) convention
    return tuple(n[::-1] for n in nodes)


@pytest.fixture(scope="module")
def fundamental(geometry):
    return coupling_constant(*triplet_modes(geometry, (0, 0), (0, 0), (0, 0)))


def ratio(geometry, fundamental, *nodes):
    return coupling_constant(*triplet_modes(geometry, *nodes)) / fundamental


# --- parity ---------------------------------------------------------------


@pytest.mark.parametrize("nodes, allowed", [
    (((0, 0), (0, 0), (0, 0)), True),
    (((0, 0), (0, 1), (0, 0)), False),
    (((1, 0), (1, 0), (0, 0)), True),
    (((1, 0), (0, 0), (0, 0)), False),
    (((1, 1), (1, 0), (0, 1)), True),
])
def test_parity_examples(nodes, allowed):
    idx = [ModeIndex(*n) for n in nodes]
    assert bool(parity_allowed(*idx)) is allowed


def test_parity_per_axis():
    check = parity_allowed(ModeIndex(1, 0), ModeIndex(0, 1), ModeIndex(0, 0))
    assert not check.x and not check.y
    check = parity_allowed(ModeIndex(0, 0), ModeIndex(0, 1), ModeIndex(0, 0))
    assert check.x and not check.y


@given(st.lists(st.tuples(st.integers(0, 5), st.integers(0, 5)), min_size=3, max_size=3))
def test_parity_is_permutation_invariant(nodes):
    idx = [ModeIndex(*n) for n in nodes]
    ref = parity_allowed(*idx)
    for perm in itertools.permutations(idx):
        assert parity_allowed(*perm) == ref


def test_horizontal_parity_exact(geometry):
    # symmetric horizontal slab: every x-parity violation vanishes exactly
    pumps = enumerate_modes(geometry, 399e-9, "y", "pump")
    sig = enumerate_modes(geometry, 798e-9, "y", "signal")
    idl = enumerate_modes(geometry, 798e-9, "z", "idler")
    ref = abs(coupling_constant(pumps[0], sig[0], idl[0]))
    worst = 0.0
    for p, s, i in itertools.product(pumps, sig, idl):
        if not parity_allowed(p.index, s.index, i.index).x:
            worst = max(worst, abs(coupling_constant(p, s, i)))
    assert worst < 1e-10 * ref


def test_vertical_parity_single_basis_buried():
    # all three fields share one basis and the vertical slab is symmetric
    g = WaveguideGeometry(buried=True)
    modes = enumerate_modes(g, 800e-9, "z")
    ref = abs(coupling_constant(modes[0], modes[0], modes[0]))
    worst = max(abs(coupling_constant(a, b, c))
                for a, b, c in itertools.combinations_with_replacement(modes, 3)
                if not parity_allowed(a.index, b.index, c.index))
    assert worst < 1e-10 * ref


def vertical_violators(geometry):
    pumps = enumerate_modes(geometry, 399e-9, "y", "pump")
    sig = enumerate_modes(geometry, 798e-9, "y", "signal")
    idl = enumerate_modes(geometry, 798e-9, "z", "idler")
    return {(p.index.nodes, s.index.nodes, i.index.nodes): abs(coupling_constant(p, s, i))
            for p, s, i in itertools.product(pumps, sig, idl)
            if not parity_allowed(p.index, s.index, i.index).y}


def test_vertical_parity_single_basis_air_cover(geometry):
    modes = enumerate_modes(geometry, 800e-9, "z")
    ref = abs(coupling_constant(modes[0], modes[0], modes[0]))
    worst = max(abs(coupling_constant(a, b, c))
                for a, b, c in itertools.combinations_with_replacement(modes, 3)
                if not parity_allowed(a.index, b.index, c.index))
    assert 1e-3 * ref < worst < 0.05 * ref


@pytest.mark.xfail(strict=True, reason="mixed pump/signal/idler basis with air cover: "
                   "near-cutoff pump modes leak up to 0.28 of the fundamental")
def test_vertical_parity_mixed_basis_bound(geometry, fundamental):
    assert max(vertical_violators(geometry).values()) < 0.05 * fundamental


def test_vertical_parity_mixed_basis_measured(geometry, fundamental):
    v = vertical_violators(geometry)
    worst = max(v, key=v.get)
    assert worst == ((0, 5), (0, 2), (0, 2))
    assert v[worst] / fundamental == pytest.approx(0.2811, abs=1e-3)
    from_fundamental_pump = max(a for k, a in v.items() if k[0] == (0, 0))
    assert from_fundamental_pump / fundamental == pytest.approx(0.0994, abs=1e-3)


# --- coupling constants ---------------------------------------------------


def test_table_ratios(geometry, fundamental):
    assert ratio(geometry, fundamental, *transpose((0, 0), (0, 1), (0, 1))) == pytest.approx(0.661, abs=0.066)
    assert ratio(geometry, fundamental, *transpose((1, 0), (1, 0), (0, 0))) == pytest.approx(0.789, abs=0.079)
    # sign is basis-convention dependent; the table lists magnitudes
    assert abs(ratio(geometry, fundamental, *transpose((0, 2), (0, 0), (0, 0)))) == pytest.approx(4.72 / 53.96, rel=0.1)
    assert abs(ratio(geometry, fundamental, *transpose((0, 0), (0, 1), (0, 0)))) < 0.05


def test_table_ratios_untransposed_frozen(geometry, fundamental):
    # the literal (nx, ny) reading, frozen; the first and third do not match the table
    assert ratio(geometry, fundamental, (0, 0), (0, 1), (0, 1)) == pytest.approx(0.75705, abs=1e-4)
    assert ratio(geometry, fundamental, (1, 0), (1, 0), (0, 0)) == pytest.approx(0.77017, abs=1e-4)
    assert ratio(geometry, fundamental, (0, 0), (0, 1), (0, 0)) == pytest.approx(-0.06023, abs=1e-4)


def test_fundamental_positive_and_scale(fundamental):
    # 1/m; of order one over the square root of the core area
    assert 1e5 < fundamental < 1e6


def test_signal_idler_exchange(geometry):
    modes = enumerate_modes(geometry, 800e-9, "z")
    pump = solve_mode(geometry, ModeIndex(0, 0, "y", "pump"), 400e-9)
    for a, b in itertools.combinations(modes, 2):
        assert coupling_constant(pump, a, b) == pytest.approx(coupling_constant(pump, b, a), rel=1e-13, abs=1e-12 * 2.4e5)


def test_overlap_1d_orthonormal(geometry):
    modes = enumerate_modes(geometry, 800e-9, "z")
    for a, b in itertools.product(modes, repeat=2):
        expected = 1.0 if a.index == b.index else None
        ox = overlap_1d([a.x, b.x])
        oy = overlap_1d([a.y, b.y])
        if a.index.nx == b.index.nx:
            assert ox == pytest.approx(1.0, abs=1e-10)
        else:
            assert abs(ox) < 1e-10
        if a.index.ny == b.index.ny:
            assert oy == pytest.approx(1.0, abs=1e-10)
        if expected:
            assert ox * oy == pytest.approx(1.0, abs=1e-10)


def test_overlap_1d_thickness_mismatch(geometry):
    m = solve_mode(geometry, ModeIndex(0, 0, "z"), 800e-9)
    with pytest.raises(ConfigurationError):
        overlap_1d([m.x, m.y])


def test_geometry_mismatch(geometry):
    other = WaveguideGeometry(width=5e-6)
    a = solve_mode(geometry, ModeIndex(0, 0, "y", "pump"), 399e-9)
    b = solve_mode(other, ModeIndex(0, 0, "y"), 798e-9)
    with pytest.raises(ConfigurationError):
        coupling_constant(a, b, b)


def test_grid_convergence_top_twenty(geometry):
    # brute-force raster oracle: 256^2 vs 512^2 within 0.5%, and both agree with
    # the separable quadrature
    top = enumerate_triplets(geometry, 399e-9, threads=1)[:20]
    for t in top:
        modes = triplet_modes(geometry, t.pump.nodes, t.signal.nodes, t.idler.nodes)
        win = common_window(modes, 6.0)
        fields = [m.field for m in modes]
        a256 = grid_overlap(fields, win, 256)
        a512 = grid_overlap(fields, win, 512)
        assert a512 == pytest.approx(a256, rel=5e-3)
        assert t.coupling == pytest.approx(a512, rel=5e-3, abs=1e-4 * top[0].coupling)


# --- pump coupling --------------------------------------------------------


@pytest.fixture(scope="module")
def pump_modes(geometry):
    return enumerate_modes(geometry, 399e-9, "y", "pump")


def test_centered_beam_odd_modes_vanish(pump_modes):
    w = matched_waist(pump_modes[0])
    amps = pump_coupling(ExternalPumpBeam(w), pump_modes)
    assert amps[0] == 1.0
    for m, a in zip(pump_modes, amps):
        if m.index.nx % 2:
            assert abs(a) < 1e-10


def test_matched_waist_maximises(pump_modes):
    fund = pump_modes[0]
    w = matched_waist(fund)
    best = abs(gaussian_mode_overlap(fund, w))
    assert best > 0.9
    for f in (0.8, 1.2):
        assert abs(gaussian_mode_overlap(fund, f * w)) < best


def test_offset_sweep_monotone(geometry, pump_modes):
    # direct quadrature oracle for the (1,0) amplitude as the beam walks off axis
    m10 = next(m for m in pump_modes if m.index.nodes == (1, 0))
    w = matched_waist(pump_modes[0])
    x0s = np.linspace(0, 0.4 * geometry.width, 9)[1:]
    amps = []
    for x0 in x0s:
        beam = ExternalPumpBeam(w, x0=x0)
        a = abs(gaussian_mode_overlap(m10, w, x0))
        win = common_window([m10], 8.0)
        win = (min(win[0], x0 - 6 * w), max(win[1], x0 + 6 * w), win[2], win[3])
        oracle = abs(grid_overlap([m10.field, beam.field], win, 512))
        assert a == pytest.approx(oracle, rel=1e-3)
        amps.append(a)
    assert amps[4] > 0  # x0 = W/4
    assert np.all(np.diff(amps) > 0)


def test_offset_sweep_turns_over_before_half_width(geometry, pump_modes):
    # the matched Gaussian (waist ~1.96 um) overlaps the (1,0) lobe best at x0 ~ 0.425 W,
    # so growth is monotone only up to there, not on the whole of (0, W/2)
    m10 = next(m for m in pump_modes if m.index.nodes == (1, 0))
    w = matched_waist(pump_modes[0])
    x0s = np.linspace(0, geometry.width / 2, 81)
    amps = [abs(gaussian_mode_overlap(m10, w, x0)) for x0 in x0s]
    peak = x0s[int(np.argmax(amps))] / geometry.width
    assert 0.40 < peak < 0.45


def test_pump_coupling_wavelength_check(pump_modes):
    with pytest.raises(ConfigurationError):
        pump_coupling(ExternalPumpBeam(2e-6, wavelength=405e-9), pump_modes)


def test_beam_waist_positive():
    with pytest.raises(ConfigurationError):
        ExternalPumpBeam(0.0)


def test_presets(pump_modes):
    mis = preset_pump_amplitudes("paper-misalignment", pump_modes)
    assert mis[(0, 0)] == 1.0
    for k, a in mis.items():
        if k != (0, 0):
            assert a**2 == pytest.approx(HIGHER_ORDER_ENERGY_FRACTION * mis[(0, 0)] ** 2)
    only = preset_pump_amplitudes("fundamental-only", pump_modes)
    assert sum(only.values()) == 1.0
    centered = preset_pump_amplitudes("centered", pump_modes)
    assert centered[(0, 0)] == 1.0 and abs(centered[(1, 0)]) < 1e-10
    with pytest.raises(ConfigurationError):
        preset_pump_amplitudes("nope", pump_modes)


# --- enumeration ----------------------------------------------------------


def test_triplet_count_and_order(geometry):
    trips = enumerate_triplets(geometry, 399e-9, cutoff=None, threads=1)
    assert len(trips) == 24 * 6 * 6
    w = [t.weight for t in trips]
    assert w == sorted(w, reverse=True)
    top = trips[0]
    assert top.nodes == ((0, 0), (0, 0), (0, 0))


def test_fundamental_only_weights(geometry):
    trips = enumerate_triplets(geometry, 399e-9, pump_amplitudes="fundamental-only", cutoff=None, threads=1)
    assert all((t.weight > 0) == (t.pump.nodes == (0, 0) and t.coupling != 0) for t in trips)
    assert all(t.weight == 0 for t in trips if t.pump.nodes != (0, 0))


def test_cutoff_drops_light_triplets(geometry):
    full = enumerate_triplets(geometry, 399e-9, cutoff=None, threads=1)
    cut = enumerate_triplets(geometry, 399e-9, cutoff=1e-2, threads=1)
    assert 0 < len(cut) < len(full)
    assert min(t.weight for t in cut) >= 1e-2 * full[0].weight


def test_thread_determinism(geometry):
    a = enumerate_triplets(geometry, 399e-9, cutoff=None, threads=1)
    b = enumerate_triplets(geometry, 399e-9, cutoff=None, threads=4)
    assert a == b


def test_triplet_labels():
    t = TripletProcess(ModeIndex(0, 0, role="pump"), ModeIndex(0, 1), ModeIndex(1, 1, "z", "idler"), 2.0, 0.5)
    assert t.weight == 1.0
    assert t.label == "(0,0)->(0,1)+(1,1)"
    assert t.key == "p00_s01_i11"

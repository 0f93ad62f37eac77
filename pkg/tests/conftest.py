import pytest
from hypothesis import HealthCheck, settings

from wgpdc.modes import WaveguideGeometry
from wgpdc.phasematch import calibrate_pump_offset
from wgpdc.spectra import PumpEnvelope, simulate_pdc

settings.register_profile(
    "default", deadline=None, max_examples=40,
    suppress_health_check=[HealthCheck.function_scoped_fixture],
)
settings.load_profile("default")

_CRITERIA: list[str] = []


@pytest.fixture(scope="session")
def record_criterion():
    """Collect one summary line per acceptance criterion."""

    def record(number, ok, detail):
        _CRITERIA.append(f"criterion {number}: {'PASS' if ok else 'FAIL'} | {detail}")
        print(_CRITERIA[-1])

    return record


def pytest_terminal_summary(terminalreporter):
    if _CRITERIA:
        terminalreporter.section("acceptance criteria")
        for line in _CRITERIA:
            terminalreporter.write_line(line)


@pytest.fixture(scope="session")
def geometry():
    return WaveguideGeometry()


@pytest.fixture(scope="session")
def offset(geometry):
    return calibrate_pump_offset(geometry)


@pytest.fixture(scope="session")
def calibrated(geometry, offset):
    return geometry.with_offset(offset)


@pytest.fixture(scope="session")
def pdc_result(calibrated):
    """Full composite run at the reference PDC settings (399 nm, 1.1 nm, 3.5 mm)."""
    return simulate_pdc(calibrated, PumpEnvelope(399e-9, 1.1e-9), threads=2)


@pytest.fixture(scope="session")
def pdc_spectra(pdc_result):
    return {s.key: s for s in pdc_result.spectra}

import numpy as np
import pytest
from hypothesis import settings

from ontosim.qcore import ProjectiveMeasurement, PureState, fourier_basis

settings.register_profile("ontosim", max_examples=40, deadline=None)
settings.load_profile("ontosim")


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


def ket(*amps):
    return PureState(np.array(amps, dtype=complex))


def z_basis(d=2):
    return ProjectiveMeasurement.computational(d)


def x_basis(d=2):
    return ProjectiveMeasurement.from_basis(fourier_basis(d), "X")


# criterion number -> list of (ok, detail); filled by test_acceptance
ACCEPTANCE: dict[int, list[tuple[bool, str]]] = {}


def record_criterion(number, ok, detail):
    ACCEPTANCE.setdefault(number, []).append((bool(ok), detail))
    print(f"criterion {number:2d}: {'PASS' if ok else 'FAIL'}  {detail}")


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(ACCEPTANCE):
        parts = ACCEPTANCE[number]
        ok = all(p[0] for p in parts)
        detail = "; ".join(p[1] for p in parts)
        terminalreporter.write_line(f"criterion {number:2d}: {'PASS' if ok else 'FAIL'}  {detail}")

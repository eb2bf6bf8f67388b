import pytest
from hypothesis import settings

from oracle_values import ORACLE

from rbswitch import FieldConfig, LadderAtom, RingCavity, VaporCell

settings.register_profile("default", max_examples=60, deadline=None)
settings.load_profile("default")


@pytest.fixture(scope="session")
def atom():
    return LadderAtom.from_table()


@pytest.fixture(scope="session")
def cell():
    return VaporCell(temperature=332.0)


@pytest.fixture(scope="session")
def operating_field():
    return FieldConfig.from_ghz(-0.65, -0.65, control_power=0.5)


@pytest.fixture(scope="session")
def cavity():
    return RingCavity.from_intensities(0.8, 0.8, eta=0.83)


@pytest.fixture(scope="session")
def lossless_cavity():
    return RingCavity.from_intensities(0.8, 0.8, eta=1.0)


@pytest.fixture(scope="session")
def f18_cavity():
    a = ORACLE["a_F18"]
    return RingCavity.from_intensities(a, a, eta=1.0, round_trip_length=0.3331)


def pytest_terminal_summary(terminalreporter):
    from acceptance_report import LINES

    if LINES:
        terminalreporter.section("acceptance criteria")
        for number in sorted(LINES):
            terminalreporter.write_line(LINES[number])

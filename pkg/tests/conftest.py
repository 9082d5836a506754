import pytest

from bettilab import surface as S

# one line per acceptance criterion, echoed after the run so it survives output capture
ACCEPTANCE_LINES = []


@pytest.fixture(scope="session")
def fixture():
    return S.fixture_spec()


@pytest.fixture(scope="session")
def torsion_spec():
    # (0, 0) is a 2-torsion point on every Legendre curve
    return S.fixture_spec().with_section(S.RationalMap((0,)), S.RationalMap((0,)), label="two-torsion")


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split()[1].rstrip(":"))):
            terminalreporter.write_line(line)

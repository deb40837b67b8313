import pytest

from steklov_lab import anosovgeo

ACCEPTANCE_LINES: list[str] = []


@pytest.fixture(scope="session")
def surface():
    return anosovgeo.build_default_surface()


@pytest.fixture(scope="session")
def classes3(surface):
    return anosovgeo.enumerate_classes(surface, 3)


@pytest.fixture(scope="session")
def classes4(surface):
    return anosovgeo.enumerate_classes(surface, 4)


@pytest.fixture(scope="session")
def basis20(surface):
    return anosovgeo.BumpBasis.random(surface, 20, seed=1)


@pytest.fixture(scope="session")
def system4(basis20, classes4):
    return anosovgeo.build_xray_system(basis20, classes4)


@pytest.fixture(scope="session")
def small_basis(surface):
    return anosovgeo.BumpBasis.random(surface, 6, seed=3)


@pytest.fixture(scope="session")
def small_system(small_basis, classes3):
    return anosovgeo.build_xray_system(small_basis, classes3)


@pytest.fixture
def report():
    """Record one PASS/FAIL line per acceptance criterion."""

    def emit(number: int, ok: bool, detail: str):
        line = f"{'PASS' if ok else 'FAIL'} criterion {number:>2}: {detail}"
        ACCEPTANCE_LINES.append(line)
        print(line)
        return ok

    return emit


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split()[2].rstrip(":"))):
            terminalreporter.write_line(line)

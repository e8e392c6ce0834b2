import pytest

from potwell import BoxDomain, Exponents, constants_build, kernel_build, sine_mode

ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split()[1].rstrip(":"))):
            terminalreporter.write_line(line)


@pytest.fixture(scope="session")
def mu2():
    return Exponents(2.0), constants_build(2.0)


@pytest.fixture(scope="session")
def grid16():
    d = BoxDomain(1.0, 16)
    return d, kernel_build(d, 2.0)


@pytest.fixture(scope="session")
def grid32():
    d = BoxDomain(1.0, 32)
    return d, kernel_build(d, 2.0)


@pytest.fixture(scope="session")
def phi32(grid32):
    return sine_mode(grid32[0])

import pytest
from hypothesis import HealthCheck, settings, strategies as st

from cspeed import synthetic
from cspeed.geo import GeoPoint

settings.register_profile("default", max_examples=60, deadline=None,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")

lats = st.floats(-90, 90, allow_nan=False)
lons = st.floats(-180, 180, allow_nan=False, exclude_max=True)
points = st.builds(GeoPoint, lats, lons)


@pytest.fixture(scope="session")
def design_world():
    return synthetic.design_fixture(7)


@pytest.fixture(scope="session")
def fixture_dir(tmp_path_factory):
    """The synthetic world written by scripts/make_fixtures.py."""
    import subprocess
    import sys
    from pathlib import Path
    out = tmp_path_factory.mktemp("world")
    script = Path(__file__).resolve().parents[1] / "scripts" / "make_fixtures.py"
    subprocess.run([sys.executable, str(script), str(out)], check=True, capture_output=True)
    return out


ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split()[2].rstrip(":"))):
            terminalreporter.write_line(line)

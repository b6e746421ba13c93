import os
from pathlib import Path

import pytest
from hypothesis import HealthCheck, settings

from herglotz import cli, config

settings.register_profile(
    "default",
    deadline=None,
    derandomize=True,
    suppress_health_check=[HealthCheck.too_slow],
)
settings.register_profile("thorough", deadline=None, max_examples=500)
settings.load_profile(os.environ.get("HYPOTHESIS_PROFILE", "default"))

SCENARIOS = [p.stem for p in config.bundled()]

# "criterion N: PASS/FAIL ..." lines collected by the acceptance suite
ACCEPTANCE_LINES: list[str] = []


@pytest.fixture(scope="session")
def bundled_runs(tmp_path_factory):
    """Every bundled scenario run twice through the CLI into separate directories."""
    base = tmp_path_factory.mktemp("bundled")
    results = {}
    for name in SCENARIOS:
        codes = [
            cli.main(["run", "--config", name, "--out", str(base / rep / name), "--seed", "7"]) for rep in ("a", "b")
        ]
        results[name] = (codes, base / "a" / name, base / "b" / name)
    return results


def file_tree(root: Path) -> dict[str, bytes]:
    return {str(p.relative_to(root)): p.read_bytes() for p in sorted(root.rglob("*")) if p.is_file()}


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split()[1].rstrip(":"))):
            terminalreporter.write_line(line)

from pathlib import Path

import pytest

from sqlrl.analysis import SchemaCatalog
from sqlrl.data import load_dataset
from sqlrl.demo import build_fixture
from sqlrl.rewards import RewardScorer, ScoringConfig

GOLDEN = Path(__file__).parent / "golden"

# filled by test_acceptance, echoed at the end of the run
ACCEPTANCE_LINES: dict = {}


@pytest.fixture(scope="session")
def fixture_root(tmp_path_factory) -> Path:
    root = tmp_path_factory.mktemp("corpus")
    build_fixture(root)
    return root


@pytest.fixture(scope="session")
def dev_path(fixture_root) -> Path:
    return fixture_root / "dev.json"


@pytest.fixture(scope="session")
def examples(dev_path, fixture_root):
    return load_dataset(dev_path, "bird", db_root=fixture_root)


@pytest.fixture(scope="session")
def scorer(fixture_root):
    s = RewardScorer(ScoringConfig(db_root=fixture_root))
    yield s
    s.close()


@pytest.fixture(scope="session")
def catalogs(fixture_root, examples):
    return {ex.db_id: SchemaCatalog.from_database(fixture_root / ex.db_id / f"{ex.db_id}.sqlite")
            for ex in examples}


@pytest.fixture(scope="session")
def f1_catalog():
    return SchemaCatalog.from_dict({
        "drivers": ["driverId", "driverRef", "code", "forename", "surname", "nationality", "dob"],
        "qualifying": ["qualifyId", "raceId", "driverId", "position", "q1", "q2", "q3"],
        "races": ["raceId", "year", "round", "name", "date"],
    })


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for key in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(ACCEPTANCE_LINES[key])

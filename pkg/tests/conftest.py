import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))  # for `oracle` and helpers

from medgate.synth import GenSpec, generate_dataset


@pytest.fixture(scope="session")
def default_tables():
    """The default-shape dataset, generated once per test session."""
    return generate_dataset(GenSpec(seed=42))


@pytest.fixture(scope="session")
def small_tables():
    return generate_dataset(GenSpec(
        seed=7,
        rows_patient=120,
        rows_examination=200,
        rows_clinicaldetection=300,
        rows_doctor=20,
        rows_prescription=150,
        rows_medication=15,
        rows_prescriptmed=260,
    ))


def pytest_runtest_logreport(report):
    """One visible pass/fail line per acceptance criterion."""
    if report.when != "call" or "test_acceptance" not in report.nodeid:
        return
    name = report.nodeid.split("::")[-1]
    status = "PASS" if report.passed else "FAIL"
    print(f"\nACCEPTANCE {status}: {name}", file=sys.stderr)

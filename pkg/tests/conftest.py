import numpy as np
import pytest

from specmat import SynthConfig, synth_corpus

# criterion number -> (status, detail); filled by test_acceptance.py
ACCEPTANCE: dict[int, tuple[str, str]] = {}


def record(criterion: int, ok: bool, detail: str) -> None:
    ACCEPTANCE[criterion] = ("PASS" if ok else "FAIL", detail)


def record_skip(criterion: int, detail: str) -> None:
    ACCEPTANCE[criterion] = ("SKIP", detail)


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(ACCEPTANCE):
        status, detail = ACCEPTANCE[n]
        terminalreporter.write_line(f"criterion {n:2d}: {status}  {detail}")


@pytest.fixture(scope="session")
def full_corpus():
    """Synthetic corpus with the full 5 materials x 10 objects x 100 samples layout."""
    return synth_corpus(SynthConfig(), seed=7)


@pytest.fixture(scope="session")
def small_corpus():
    return synth_corpus(SynthConfig(objects_per_material=3, samples_per_object=10), seed=3)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)

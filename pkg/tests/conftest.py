from pathlib import Path

import pytest

from lingstego.corpus import split_sentences
from lingstego.provider import InContextNgram, NgramModel, select_context
from lingstego.stega import EmbedConfig

DATA = Path(__file__).parent / "data"
REVIEWS = DATA / "reviews.txt"

_ACCEPTANCE: list[tuple[str, bool | None, str]] = []


def record_criterion(name: str, passed: bool | None, detail: str = "") -> None:
    """``passed=None`` marks a criterion that was skipped."""
    _ACCEPTANCE.append((name, passed, detail))


def pytest_terminal_summary(terminalreporter):
    if not _ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for name, passed, detail in _ACCEPTANCE:
        status = "SKIP" if passed is None else "PASS" if passed else "FAIL"
        line = f"[{status}] {name}"
        if detail:
            line += f"  ({detail})"
        terminalreporter.write_line(line)


@pytest.fixture(scope="session")
def sentences():
    return split_sentences(REVIEWS.read_text(encoding="utf-8"))


@pytest.fixture(scope="session")
def base_model(sentences):
    return NgramModel(sentences)


@pytest.fixture(scope="session")
def provider(base_model):
    return InContextNgram(base_model)


@pytest.fixture(scope="session")
def config():
    return EmbedConfig()


@pytest.fixture(scope="session")
def context(sentences):
    return select_context(sentences, 12345, 2, "imdb")

import csv
from pathlib import Path

import pytest

from climalens.corpus import parse_snippets
from climalens.textkit import load_lexicon, load_vocabularies

FIXTURES = Path(__file__).parent / "fixtures"

_ACCEPTANCE: list[str] = []


@pytest.fixture
def acceptance_line():
    """Record (and print) a PASS/FAIL line for an acceptance criterion."""
    def record(number: int, title: str, ok: bool, detail: str = ""):
        line = f"[{'PASS' if ok else 'FAIL'}] criterion {number:>2}: {title}"
        if detail:
            line += f" :: {detail}"
        _ACCEPTANCE.append(line)
        print(line)
        return ok
    return record


def pytest_terminal_summary(terminalreporter):
    if _ACCEPTANCE:
        terminalreporter.section("acceptance criteria")
        for line in sorted(_ACCEPTANCE, key=lambda s: int(s.split("criterion")[1].split(":")[0])):
            terminalreporter.write_line(line)


@pytest.fixture(scope="session")
def toy_vocabs():
    return load_vocabularies({"CC": FIXTURES / "toy_vocab_cc.txt",
                              "RE": FIXTURES / "toy_vocab_re.txt",
                              "GHI": FIXTURES / "toy_vocab_ghi.txt"})


@pytest.fixture(scope="session")
def toy_lexicon():
    return load_lexicon(FIXTURES / "toy_lexicon.tsv")


@pytest.fixture(scope="session")
def toy_rows():
    with open(FIXTURES / "toy_corpus.csv", encoding="utf-8", newline="") as fh:
        return list(csv.DictReader(fh))


@pytest.fixture(scope="session")
def toy_snippets():
    with open(FIXTURES / "toy_corpus.csv", encoding="utf-8", newline="") as fh:
        snippets, errors = parse_snippets(fh, strict=True)
    assert not errors
    return snippets

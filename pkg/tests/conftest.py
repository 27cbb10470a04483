from pathlib import Path

import pytest

from mispron.corpus import load_inventory, load_lexicon
from mispron.experiment import default_lexicon_path
from mispron.lexicon import parse_rules

FIXTURES = Path(__file__).parent / "fixtures"


@pytest.fixture(scope="session")
def inv():
    return load_inventory()


@pytest.fixture(scope="session")
def rules(inv):
    return parse_rules(None, inv)


@pytest.fixture(scope="session")
def demo_lex(inv):
    return load_lexicon(default_lexicon_path(), inv)


@pytest.fixture(scope="session")
def enc(inv):
    def encode(text):
        return inv.encode(text.split())

    return encode


def pytest_terminal_summary(terminalreporter):
    import sys

    module = sys.modules.get(f"{__package__}.test_acceptance") if __package__ else None
    lines = getattr(module, "RESULTS", None)
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in lines:
            terminalreporter.write_line(line)

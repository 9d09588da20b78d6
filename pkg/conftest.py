import os

import pytest

from modules.artifacts import atomic_write_text
from modules.drug_lexicon import build_trie, load_lexicon_tsv
from modules.synth_corpus import SynthConfig, generate

ROOT = os.path.dirname(os.path.abspath(__file__))
DATA = os.path.join(ROOT, "data")
GOLDEN = os.path.join(DATA, "golden")


def pytest_addoption(parser):
    parser.addoption("--update-golden", action="store_true", default=False,
                     help="Rewrite the regression files under data/golden/")


class GoldenFiles:
    """Regression outputs frozen as text files under data/golden/"""

    def __init__(self, directory: str, update: bool):
        self.directory = directory
        self.update = update

    def path(self, name: str) -> str:
        return os.path.join(self.directory, name)

    def check(self, name: str, text: str) -> None:
        path = self.path(name)
        if self.update or not os.path.exists(path):
            atomic_write_text(path, text)
            pytest.skip(f"recorded {path}; commit it to freeze the value")
        with open(path, "r", encoding="utf-8") as f:
            assert text == f.read(), f"output differs from {path} (rerun with --update-golden if intended)"


@pytest.fixture
def golden(request):
    return GoldenFiles(GOLDEN, request.config.getoption("--update-golden"))


@pytest.fixture(scope="session")
def lexicon_entries():
    return load_lexicon_tsv(os.path.join(DATA, "sample_lexicon.tsv"))


@pytest.fixture(scope="session")
def trie(lexicon_entries):
    return build_trie(lexicon_entries)


@pytest.fixture(scope="session")
def small_corpus(lexicon_entries):
    return generate(lexicon_entries, SynthConfig(n_sentences=120), seed=7)

import sys
from pathlib import Path

import pytest

HERE = Path(__file__).parent
sys.path.insert(0, str(HERE))

CORPUS = HERE.parent / "corpus"


@pytest.fixture
def corpus() -> Path:
    return CORPUS


def read(*parts: str) -> bytes:
    return CORPUS.joinpath(*parts).read_bytes()

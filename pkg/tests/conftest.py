from __future__ import annotations

import pytest

from latflow.figures import FIGURES, corpus_file, load_figure


@pytest.fixture(scope="session")
def figures():
    return {name: load_figure(name) for name in FIGURES}


@pytest.fixture(scope="session")
def corpus():
    return corpus_file

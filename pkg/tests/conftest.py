import math

import numpy as np
import pytest

from lookahead_decoding import TableModel, Vocabulary
from lookahead_decoding.models import ngram_from_sentences


@pytest.fixture
def ab_vocab():
    # ids: <s>=0, </s>=1, A=2, B=3
    return Vocabulary.build(["A", "B"])


@pytest.fixture
def fixture_table(ab_vocab):
    """Context-free p(A)=0.6, p(B)=0.3, p(EOS)=0.1."""
    return TableModel.context_free(ab_vocab, {"A": 0.6, "B": 0.3, "</s>": 0.1})


@pytest.fixture
def uniform_table(ab_vocab):
    return TableModel.uniform(ab_vocab)


@pytest.fixture
def aab_ngram():
    return ngram_from_sentences([["A", "A", "B"]], order=1, k=1.0)


@pytest.fixture
def order1_table(ab_vocab):
    rows = {
        (0,): [0, 0.1, 0.5, 0.4],
        (2,): [0, 0.2, 0.2, 0.6],
        (3,): [0, 0.5, 0.3, 0.2],
    }
    return TableModel(ab_vocab, 1, rows, [0, 0.4, 0.3, 0.3])


LN = math.log


def logs(*ps):
    return np.log(np.array(ps))


def pytest_terminal_summary(terminalreporter):
    from acceptance_log import LINES

    if LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(LINES):
            terminalreporter.write_line(line)

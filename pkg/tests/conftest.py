import pytest

from budgetrank.analysis import AnalyzerConfig
from budgetrank.index import Document, build_index

# Plain analyzer: no stopwords, no stemming; used wherever hand-derived
# values are asserted.
PLAIN = AnalyzerConfig.plain()

THREE_DOCS = [
    Document("d1", "a b"),
    Document("d2", "a a c"),
    Document("d3", "c d"),
]


@pytest.fixture
def plain_analyzer():
    return PLAIN


@pytest.fixture
def three_doc_index():
    return build_index(THREE_DOCS, PLAIN)

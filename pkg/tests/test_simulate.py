import pytest

from budgetrank.index import build_index, search
from budgetrank.simulate import TopicWorldSpec, _zipf_probs, simulate_world
from tests.conftest import PLAIN


class TestSpecValidation:
    def test_defaults_are_valid(self):
        TopicWorldSpec()

    @pytest.mark.parametrize(
        "kwargs",
        [
            {"n_topics": 0},
            {"docs_per_topic": 0},
            {"vocab_per_topic": 0},
            {"doc_len_min": 0},
            {"doc_len_min": 10, "doc_len_max": 5},
            {"query_len": 0},
        ],
    )
    def test_rejects_bad_values(self, kwargs):
        with pytest.raises(ValueError):
            TopicWorldSpec(**kwargs)


class TestZipf:
    def test_probabilities_normalized_and_decreasing(self):
        p = _zipf_probs(10)
        assert p.sum() == pytest.approx(1.0)
        assert all(p[i] > p[i + 1] for i in range(9))

    def test_harmonic_closed_form(self):
        p = _zipf_probs(4)
        h = 1 + 1 / 2 + 1 / 3 + 1 / 4
        assert p[0] == pytest.approx(1 / h)
        assert p[3] == pytest.approx(1 / (4 * h))


@pytest.fixture(scope="module")
def world():
    return simulate_world(
        TopicWorldSpec(n_topics=3, docs_per_topic=20, vocab_per_topic=25, seed=9),
        queries_per_topic=2,
    )


class TestSimulateWorld:
    def test_shapes(self, world):
        assert len(world.docs) == 60
        assert len(world.queries) == 6
        assert len(world.vocabularies) == 3
        assert all(len(v) == 25 for v in world.vocabularies)

    def test_vocabularies_disjoint(self, world):
        seen = set()
        for vocab in world.vocabularies:
            assert not seen & set(vocab)
            seen.update(vocab)

    def test_docs_use_only_their_topic_vocabulary(self, world):
        for doc in world.docs:
            topic = world.doc_topic[doc.id]
            assert set(doc.text.split()) <= set(world.vocabularies[topic])

    def test_doc_lengths_in_range(self, world):
        lo, hi = world.spec.doc_len_min, world.spec.doc_len_max
        for doc in world.docs:
            assert lo <= len(doc.text.split()) <= hi

    def test_queries_on_topic_with_distinct_terms(self, world):
        for _, text, topic in world.queries:
            terms = text.split()
            assert len(terms) == len(set(terms)) == world.spec.query_len
            assert set(terms) <= set(world.vocabularies[topic])

    def test_qrels_are_topic_membership(self, world):
        for (qid, doc_id), grade in world.qrels.items():
            assert grade == 1
            q_topic = next(t for q, _, t in world.queries if q == qid)
            assert world.doc_topic[doc_id] == q_topic
        for qid, _, topic in world.queries:
            judged = {d for (q, d) in world.qrels if q == qid}
            assert judged == set(world.relevant_docs(topic))

    def test_deterministic_per_seed(self):
        spec = TopicWorldSpec(n_topics=2, docs_per_topic=5, vocab_per_topic=10, seed=3)
        a = simulate_world(spec)
        b = simulate_world(spec)
        assert a.docs == b.docs
        assert a.queries == b.queries
        other = simulate_world(
            TopicWorldSpec(n_topics=2, docs_per_topic=5, vocab_per_topic=10, seed=4)
        )
        assert a.docs != other.docs

    def test_retrieval_favors_own_topic(self, world):
        # A topic query should mostly retrieve its own topic's documents.
        index = build_index(world.docs, PLAIN)
        for qid, text, topic in world.queries:
            result = search(index, text, 10)
            topics = [world.doc_topic[d] for d in result.doc_ids()]
            assert topics.count(topic) == len(topics)

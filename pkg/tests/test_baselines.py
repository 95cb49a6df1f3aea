import pytest

from budgetrank.baselines import BaselineSpec, rrf_fuse, run_baseline
from budgetrank.index import build_index, ranked_list, search
from budgetrank.reformulate import make_reformulation_set
from budgetrank.simulate import TopicWorldSpec, simulate_world
from budgetrank.teachers import QrelsTeacher, RecordingTeacher
from tests.conftest import PLAIN


def _list(query_id, ids):
    return ranked_list(query_id, [(d, float(len(ids) - i)) for i, d in enumerate(ids)])


class TestRrfFuse:
    def test_hand_computed_scores(self):
        fused = rrf_fuse([_list("q", ["d1", "d2"]), _list("q", ["d2", "d3"])], 60.0)
        scores = {e.doc_id: e.score for e in fused.entries}
        assert scores["d1"] == pytest.approx(1 / 61)
        assert scores["d2"] == pytest.approx(1 / 62 + 1 / 61)
        assert scores["d3"] == pytest.approx(1 / 62)
        assert fused.doc_ids() == ["d2", "d1", "d3"]

    def test_symmetric_lists_tie_broken_by_id(self):
        fused = rrf_fuse([_list("q", ["d1", "d2"]), _list("q", ["d2", "d1"])], 60.0)
        scores = {e.doc_id: e.score for e in fused.entries}
        assert scores["d1"] == pytest.approx(scores["d2"])
        assert fused.doc_ids() == ["d1", "d2"]

    def test_multiply_retrieved_doc_outranks_single_top(self):
        # Retrieved at rank 50 twice: 2/110 > 1/61 for a single rank-1 hit.
        long_tail = [f"x{i:02d}" for i in range(49)] + ["dd"]
        fused = rrf_fuse(
            [_list("q", long_tail), _list("q", long_tail), _list("q", ["ee"])],
            60.0,
        )
        scores = {e.doc_id: e.score for e in fused.entries}
        assert scores["dd"] == pytest.approx(2 / 110)
        assert scores["ee"] == pytest.approx(1 / 61)
        assert scores["dd"] > scores["ee"]

    def test_requires_lists(self):
        with pytest.raises(ValueError):
            rrf_fuse([], 60.0)


@pytest.fixture(scope="module")
def baseline_world():
    world = simulate_world(
        TopicWorldSpec(n_topics=3, docs_per_topic=40, vocab_per_topic=30, seed=5)
    )
    return world, build_index(world.docs, PLAIN)


def _setup(world):
    qid, text, topic = world.queries[0]
    grades = {d: g for (q, d), g in world.qrels.items() if q == qid}
    on_topic = [" ".join(world.vocabularies[topic][i : i + 3]) for i in range(3)]
    return qid, text, make_reformulation_set(qid, text, on_topic), grades


class TestRunBaseline:
    @pytest.mark.parametrize(
        "kind", ["base_rerank", "rm3_rerank", "rrf_rerank", "concat_rerank"]
    )
    def test_budget_accounting(self, baseline_world, kind):
        world, index = baseline_world
        qid, text, reforms, grades = _setup(world)
        teacher = RecordingTeacher(QrelsTeacher(grades))
        spec = BaselineSpec(kind=kind, budget=20, batch_size=8, k=50)
        result = run_baseline(index, qid, text, reforms, teacher, spec)
        assert not result.failed
        assert teacher.call_count == min(20, result.pool_size)
        assert result.teacher_calls == teacher.call_count
        assert len(set(teacher.scored_doc_ids)) == teacher.call_count
        assert teacher.queries_seen == {text}

    def test_base_rerank_scores_top_of_first_pass(self, baseline_world):
        world, index = baseline_world
        qid, text, reforms, grades = _setup(world)
        teacher = RecordingTeacher(QrelsTeacher(grades))
        spec = BaselineSpec(kind="base_rerank", budget=10, batch_size=4, k=50)
        run_baseline(index, qid, text, reforms, teacher, spec)
        expected = search(index, text, 50, query_id=qid).doc_ids()[:10]
        assert teacher.scored_doc_ids == expected

    def test_final_ranking_by_teacher_score(self, baseline_world):
        world, index = baseline_world
        qid, text, reforms, grades = _setup(world)
        spec = BaselineSpec(kind="rrf_rerank", budget=30, k=50)
        result = run_baseline(index, qid, text, reforms, QrelsTeacher(grades), spec)
        keys = [(-e.score, e.doc_id) for e in result.final_ranking.entries]
        assert keys == sorted(keys)

    def test_batching_matches_spec(self, baseline_world):
        world, index = baseline_world
        qid, text, reforms, grades = _setup(world)
        teacher = RecordingTeacher(QrelsTeacher(grades))
        spec = BaselineSpec(kind="base_rerank", budget=20, batch_size=16, k=50)
        run_baseline(index, qid, text, reforms, teacher, spec)
        assert [len(ids) for _, ids in teacher.calls] == [16, 4]

    def test_rrf_pool_covers_reformulation_hits(self, baseline_world):
        world, index = baseline_world
        qid, text, reforms, grades = _setup(world)
        spec = BaselineSpec(kind="rrf_rerank", budget=0, k=50)
        result = run_baseline(index, qid, text, reforms, QrelsTeacher(grades), spec)
        base = search(index, text, 50).doc_ids()
        assert result.pool_size >= len(base)

    def test_zero_budget(self, baseline_world):
        world, index = baseline_world
        qid, text, reforms, grades = _setup(world)
        teacher = RecordingTeacher(QrelsTeacher(grades))
        spec = BaselineSpec(kind="base_rerank", budget=0)
        result = run_baseline(index, qid, text, reforms, teacher, spec)
        assert teacher.calls == []
        assert len(result.final_ranking) == 0

    def test_unknown_kind_rejected(self):
        with pytest.raises(ValueError):
            BaselineSpec(kind="mystery")

    def test_rm3_rerank_differs_from_base(self, baseline_world):
        world, index = baseline_world
        qid, text, reforms, grades = _setup(world)
        base = run_baseline(
            index, qid, text, reforms, QrelsTeacher(grades),
            BaselineSpec(kind="base_rerank", budget=50, k=50),
        )
        rm3 = run_baseline(
            index, qid, text, reforms, QrelsTeacher(grades),
            BaselineSpec(kind="rm3_rerank", budget=50, k=50),
        )
        # The expanded query retrieves a different (usually broader) slate.
        assert [d for d, _, _ in base.scored] != [d for d, _, _ in rm3.scored]

    def test_empty_query_no_candidates(self, baseline_world):
        _, index = baseline_world
        reforms = make_reformulation_set("qx", "zzz", [])
        result = run_baseline(
            index, "qx", "zzz", reforms, QrelsTeacher({}),
            BaselineSpec(kind="base_rerank", budget=10),
        )
        assert result.pool_size == 0
        assert result.teacher_calls == 0

import json
import math
import threading
from http.server import BaseHTTPRequestHandler, HTTPServer

import numpy as np
import pytest

from budgetrank.errors import FormatError, TeacherError
from budgetrank.teachers import (
    CachedTeacher,
    HttpTeacher,
    LinearTeacher,
    QrelsTeacher,
    RecordingTeacher,
)


class TestLinearTeacher:
    def test_noiseless_scores_are_clamped_dot_products(self):
        teacher = LinearTeacher(w_star=np.array([1.0, -1.0]))
        feats = np.array([[0.5, 0.2], [2.0, 0.0], [0.0, 3.0]])
        scores = teacher.score_batch("q", ["a", "b", "c"], feats)
        assert scores == pytest.approx([0.3, 1.0, 0.0])

    def test_unclamped_mode_passes_raw_values(self):
        teacher = LinearTeacher(w_star=np.array([1.0, -1.0]), clamp=False)
        feats = np.array([[2.0, 0.0], [0.0, 3.0]])
        assert teacher.score_batch("q", ["a", "b"], feats) == pytest.approx(
            [2.0, -3.0]
        )

    def test_noise_is_seeded(self):
        feats = np.array([[0.5, 0.5]])
        a = LinearTeacher(np.ones(2), noise_sigma=0.1, seed=3)
        b = LinearTeacher(np.ones(2), noise_sigma=0.1, seed=3)
        c = LinearTeacher(np.ones(2), noise_sigma=0.1, seed=4)
        assert a.score_batch("q", ["d"], feats) == b.score_batch("q", ["d"], feats)
        assert a.score_batch("q", ["d"], feats) != c.score_batch("q", ["d"], feats)

    def test_requires_features(self):
        teacher = LinearTeacher(np.ones(2))
        with pytest.raises(TeacherError):
            teacher.score_batch("q", ["a"])
        with pytest.raises(TeacherError):
            teacher.score_batch("q", ["a", "b"], np.ones((1, 2)))

    def test_true_score_matches_batch(self):
        teacher = LinearTeacher(w_star=np.array([0.4, 0.6]))
        x = np.array([0.5, 0.5])
        assert teacher.true_score(x) == pytest.approx(
            teacher.score_batch("q", ["d"], x[None, :])[0]
        )


class TestQrelsTeacher:
    def test_graded_normalization(self):
        teacher = QrelsTeacher({"d1": 2, "d2": 1}, max_grade=2)
        assert teacher.score_batch("q", ["d1", "d2", "d3"]) == [1.0, 0.5, 0.0]

    def test_binary_default(self):
        teacher = QrelsTeacher({"d1": 1})
        assert teacher.score_batch("q", ["d1", "dx"]) == [1.0, 0.0]

    def test_noise_stays_in_unit_interval(self):
        teacher = QrelsTeacher({"d1": 1}, noise_sigma=5.0, seed=0)
        scores = teacher.score_batch("q", ["d1"] * 0 + [f"x{i}" for i in range(50)])
        assert all(0.0 <= s <= 1.0 for s in scores)

    def test_invalid_max_grade(self):
        with pytest.raises(ValueError):
            QrelsTeacher({}, max_grade=0)


class TestCachedTeacher:
    def test_from_file_and_replay(self, tmp_path):
        path = tmp_path / "scores.tsv"
        path.write_text("d1\t0.75\nd2\t0.25\n")
        teacher = CachedTeacher.from_file(str(path))
        assert teacher.score_batch("q", ["d2", "d1"]) == [0.25, 0.75]

    def test_missing_document_raises(self):
        teacher = CachedTeacher({"d1": 0.5})
        with pytest.raises(TeacherError, match="d9"):
            teacher.score_batch("q", ["d1", "d9"])

    def test_malformed_file(self, tmp_path):
        path = tmp_path / "bad.tsv"
        path.write_text("d1\tnot-a-number\n")
        with pytest.raises(FormatError, match=":1"):
            CachedTeacher.from_file(str(path))


class _ScoringHandler(BaseHTTPRequestHandler):
    script: list[tuple[int, str]] = []
    requests_seen: list[dict] = []

    def do_POST(self):  # noqa: N802 (http.server API)
        length = int(self.headers.get("Content-Length", "0"))
        type(self).requests_seen.append(json.loads(self.rfile.read(length)))
        status, body = self.script.pop(0) if self.script else (500, "")
        self.send_response(status)
        self.send_header("Content-Type", "application/json")
        self.end_headers()
        self.wfile.write(body.encode("utf-8"))

    def log_message(self, *args):
        pass


@pytest.fixture
def scoring_server():
    server = HTTPServer(("127.0.0.1", 0), _ScoringHandler)
    thread = threading.Thread(target=server.serve_forever, daemon=True)
    thread.start()
    _ScoringHandler.script = []
    _ScoringHandler.requests_seen = []
    yield f"http://127.0.0.1:{server.server_port}"
    server.shutdown()
    thread.join()


class TestHttpTeacher:
    DOCS = {"d1": "first text", "d2": "second text"}

    def test_probability_scores_pass_through(self, scoring_server):
        _ScoringHandler.script = [
            (200, json.dumps({"scores": [0.9, 0.1], "score_semantics": "probability"}))
        ]
        teacher = HttpTeacher(scoring_server, self.DOCS)
        assert teacher.score_batch("the query", ["d1", "d2"]) == [0.9, 0.1]
        sent = _ScoringHandler.requests_seen[0]
        assert sent["query"] == "the query"
        assert sent["documents"] == [
            {"id": "d1", "text": "first text"},
            {"id": "d2", "text": "second text"},
        ]

    def test_raw_scores_get_logistic_squash(self, scoring_server):
        _ScoringHandler.script = [
            (200, json.dumps({"scores": [0.0, 2.0], "score_semantics": "raw"}))
        ]
        teacher = HttpTeacher(scoring_server, self.DOCS)
        scores = teacher.score_batch("q", ["d1", "d2"])
        assert scores[0] == pytest.approx(0.5)
        assert scores[1] == pytest.approx(1.0 / (1.0 + math.exp(-2.0)))

    def test_default_semantics_is_probability(self, scoring_server):
        _ScoringHandler.script = [(200, json.dumps({"scores": [0.4]}))]
        teacher = HttpTeacher(scoring_server, self.DOCS)
        assert teacher.score_batch("q", ["d1"]) == [0.4]

    @pytest.mark.parametrize(
        "body",
        [
            '{"no_scores": []}',
            '{"scores": [0.1]}',  # wrong length for a 2-doc batch
            '{"scores": [0.1, 0.2], "score_semantics": "mystery"}',
            "not json",
        ],
    )
    def test_malformed_responses_raise(self, scoring_server, body):
        _ScoringHandler.script = [(200, body)]
        teacher = HttpTeacher(scoring_server, self.DOCS)
        with pytest.raises(TeacherError):
            teacher.score_batch("q", ["d1", "d2"])

    def test_http_error_status_raises(self, scoring_server):
        _ScoringHandler.script = [(502, "")]
        teacher = HttpTeacher(scoring_server, self.DOCS)
        with pytest.raises(TeacherError, match="502"):
            teacher.score_batch("q", ["d1"])

    def test_unknown_document_raises_before_request(self):
        teacher = HttpTeacher("http://127.0.0.1:1/unused", self.DOCS)
        with pytest.raises(TeacherError, match="d9"):
            teacher.score_batch("q", ["d9"])

    def test_unreachable_endpoint_raises(self):
        teacher = HttpTeacher(
            "http://127.0.0.1:1/nothing", self.DOCS, timeout_seconds=0.2
        )
        with pytest.raises(TeacherError):
            teacher.score_batch("q", ["d1"])


class TestRecordingTeacher:
    def test_records_batches_and_counts_documents(self):
        inner = QrelsTeacher({"d1": 1})
        recorder = RecordingTeacher(inner)
        assert recorder.score_batch("q", ["d1", "d2"]) == [1.0, 0.0]
        recorder.score_batch("q", ["d3"])
        assert recorder.calls == [("q", ("d1", "d2")), ("q", ("d3",))]
        assert recorder.scored_doc_ids == ["d1", "d2", "d3"]
        assert recorder.call_count == 3
        assert recorder.queries_seen == {"q"}

import json
import threading
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer

import numpy as np
import pytest

from crowdbench import (
    EmbeddingError,
    EmbeddingTable,
    KernelSpec,
    build_corpus,
    coverage_check,
    fetch_embeddings_remote,
    load_embeddings,
    save_embeddings,
)
from conftest import make_response


def write_lines(path, records):
    with path.open("w", encoding="utf-8") as fh:
        for rec in records:
            fh.write(json.dumps(rec) + "\n")


class TestLoadEmbeddings:
    def test_renormalizes_with_warning(self, tmp_path):
        path = tmp_path / "emb.jsonl"
        write_lines(path, [{"id": "a", "vector": [3.0, 4.0]}])
        with pytest.warns(UserWarning, match="renormalizing"):
            table = load_embeddings(path)
        np.testing.assert_allclose(table["a"], [0.6, 0.8])

    def test_zero_vector_rejected(self, tmp_path):
        path = tmp_path / "emb.jsonl"
        write_lines(path, [{"id": "z", "vector": [0.0, 0.0]}])
        with pytest.raises(EmbeddingError, match="'z'"):
            load_embeddings(path)

    def test_dimension_mismatch(self, tmp_path):
        path = tmp_path / "emb.jsonl"
        write_lines(
            path,
            [
                {"id": "a", "vector": [1.0, 0.0, 0.0, 0.0]},
                {"id": "b", "vector": [1.0, 0.0, 0.0, 0.0, 0.0]},
            ],
        )
        with pytest.raises(EmbeddingError, match="dimension"):
            load_embeddings(path)

    def test_duplicate_id(self, tmp_path):
        path = tmp_path / "emb.jsonl"
        write_lines(
            path,
            [{"id": "a", "vector": [1.0, 0.0]}, {"id": "a", "vector": [0.0, 1.0]}],
        )
        with pytest.raises(EmbeddingError, match="duplicate"):
            load_embeddings(path)

    def test_meta_line_sets_dimension_and_model(self, tmp_path):
        path = tmp_path / "emb.jsonl"
        write_lines(
            path,
            [
                {"meta": {"dim": 3, "model": "test-encoder"}},
                {"id": "a", "vector": [1.0, 0.0, 0.0]},
            ],
        )
        table = load_embeddings(path)
        assert table.dimension == 3
        assert table.model == "test-encoder"

    def test_near_unit_vectors_load_silently(self, tmp_path):
        path = tmp_path / "emb.jsonl"
        write_lines(path, [{"id": "a", "vector": [1.0 + 1e-7, 0.0]}])
        import warnings

        with warnings.catch_warnings():
            warnings.simplefilter("error")
            table = load_embeddings(path)
        assert abs(np.linalg.norm(table["a"]) - 1.0) < 1e-9

    def test_round_trip(self, tmp_path):
        rng = np.random.default_rng(5)
        table = EmbeddingTable(dimension=6, model="m")
        for i in range(10):
            v = rng.normal(size=6)
            table.add(f"id{i}", v / np.linalg.norm(v))
        path = tmp_path / "emb.jsonl"
        save_embeddings(table, path)
        reloaded = load_embeddings(path)
        assert reloaded.dimension == 6
        for key, vec in table.entries.items():
            np.testing.assert_allclose(reloaded[key], vec, atol=1e-9)
            assert abs(np.linalg.norm(reloaded[key]) - 1.0) <= 1e-6


class _StubHandler(BaseHTTPRequestHandler):
    server_version = "StubEmbed/1"
    behavior = "ok"
    calls = None
    fail_remaining = 0

    def log_message(self, *args):
        pass

    def do_POST(self):
        cls = type(self)
        cls.calls.append(1)
        length = int(self.headers["Content-Length"])
        payload = json.loads(self.rfile.read(length))
        texts = payload["texts"]
        if cls.behavior == "flaky" and cls.fail_remaining > 0:
            cls.fail_remaining -= 1
            self.send_response(503)
            self.end_headers()
            return
        vectors = [{"id": t["id"], "vector": [1.0, 0.0]} for t in texts]
        if cls.behavior == "short":
            vectors = vectors[:-1]
        body = json.dumps({"version": 1, "vectors": vectors}).encode()
        self.send_response(200)
        self.send_header("Content-Type", "application/json")
        self.send_header("Content-Length", str(len(body)))
        self.end_headers()
        self.wfile.write(body)


@pytest.fixture
def stub_server():
    server = ThreadingHTTPServer(("127.0.0.1", 0), _StubHandler)
    _StubHandler.calls = []
    _StubHandler.behavior = "ok"
    _StubHandler.fail_remaining = 0
    thread = threading.Thread(target=server.serve_forever, daemon=True)
    thread.start()
    yield f"http://127.0.0.1:{server.server_address[1]}/embed"
    server.shutdown()


class TestFetchRemote:
    def test_empty_input_no_request(self, stub_server):
        table = fetch_embeddings_remote(stub_server, [])
        assert len(table) == 0
        assert _StubHandler.calls == []

    def test_batching_250_by_100(self, stub_server):
        texts = [(f"id{i}", f"text {i}") for i in range(250)]
        table = fetch_embeddings_remote(stub_server, texts, batch_size=100)
        assert len(table) == 250
        assert len(_StubHandler.calls) == 3
        assert list(table.entries) == [f"id{i}" for i in range(250)]

    def test_count_mismatch_rejected(self, stub_server):
        _StubHandler.behavior = "short"
        with pytest.raises(EmbeddingError, match="count mismatch"):
            fetch_embeddings_remote(stub_server, [("a", "x"), ("b", "y")], batch_size=10)

    def test_transient_failure_retried(self, stub_server):
        _StubHandler.behavior = "flaky"
        _StubHandler.fail_remaining = 2
        table = fetch_embeddings_remote(stub_server, [("a", "x")], batch_size=10)
        assert len(table) == 1
        assert len(_StubHandler.calls) == 3

    def test_persistent_failure_raises(self, stub_server):
        _StubHandler.behavior = "flaky"
        _StubHandler.fail_remaining = 99
        with pytest.raises(EmbeddingError, match="failed after 3 attempts"):
            fetch_embeddings_remote(stub_server, [("a", "x")], batch_size=10)

    def test_batch_size_must_be_positive(self, stub_server):
        with pytest.raises(ValueError, match="batch_size"):
            fetch_embeddings_remote(stub_server, [("a", "x")], batch_size=0)


class TestCoverageCheck:
    def make_corpus(self):
        return build_corpus([make_response(0, synopsis="s"), make_response(1)])

    def test_full_coverage(self):
        table = EmbeddingTable(dimension=2)
        table.add("human-0", [1.0, 0.0])
        table.add("human-1", [0.0, 1.0])
        report = coverage_check(self.make_corpus(), table, KernelSpec("semantic"))
        assert report.ok
        assert report.missing == ()

    def test_missing_synopsis_embedding_listed(self):
        table = EmbeddingTable(dimension=2)
        table.add("human-0#synopsis", [1.0, 0.0])
        report = coverage_check(self.make_corpus(), table, KernelSpec("plot_synopsis"))
        assert report.missing == ("human-1#synopsis",)

    def test_bucket_kernel_needs_nothing(self):
        report = coverage_check(self.make_corpus(), None, KernelSpec("bucket"))
        assert report.ok
        assert report.required == 0

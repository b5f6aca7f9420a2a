"""Ingestion against a local mock of the upstream dataset files."""

import http.server
import json
import threading

import pytest

from tweeteval_ingest.ingest import (
    CANONICAL_SIZES, CANONICAL_TEST_HEART_SUPPORT, LABEL_NAMES, NUM_CLASSES,
    IngestError, ingest, main, parse_mapping, verify_label_order, verify_manifest,
)

GOOD_MAPPING = "\n".join(f"{i}\t{e}\t_name_{i}_" for i, e in enumerate(
    ["❤️", "😍", "😂", "💕", "🔥", "😊", "😎", "✨", "💙", "😘",
     "📷", "🇺🇸", "☀", "💜", "😉", "💯", "😁", "🎄", "📸", "😜"]))


def tiny_split(n, label_of):
    texts = "\n".join(f"tweet number {i} with\tsome tab" for i in range(n))
    labels = "\n".join(str(label_of(i)) for i in range(n))
    return texts + "\n", labels + "\n"


@pytest.fixture
def upstream():
    """Local HTTP server holding a miniature upstream; yields (base_url, files dict)."""
    files = {}

    class Handler(http.server.BaseHTTPRequestHandler):
        def do_GET(self):
            name = self.path.rsplit("/", 1)[-1]
            if name in files:
                body = files[name].encode("utf-8")
                self.send_response(200)
                self.send_header("Content-Type", "text/plain; charset=utf-8")
                self.send_header("Content-Length", str(len(body)))
                self.end_headers()
                self.wfile.write(body)
            else:
                self.send_error(404)

        def log_message(self, *args):
            pass

    server = http.server.ThreadingHTTPServer(("127.0.0.1", 0), Handler)
    thread = threading.Thread(target=server.serve_forever, daemon=True)
    thread.start()
    yield f"http://127.0.0.1:{server.server_address[1]}/emoji/", files
    server.shutdown()


def fill_good_upstream(files, n_train=40, n_val=20, n_test=20):
    files["mapping.txt"] = GOOD_MAPPING
    files["train_text.txt"], files["train_labels.txt"] = tiny_split(n_train, lambda i: i % 20)
    files["val_text.txt"], files["val_labels.txt"] = tiny_split(n_val, lambda i: i % 20)
    files["test_text.txt"], files["test_labels.txt"] = tiny_split(n_test, lambda i: i % 20)
    return {"train": n_train, "validation": n_val, "test": n_test}


def test_ingest_writes_splits_labels_manifest(upstream, tmp_path):
    base, files = upstream
    sizes = fill_good_upstream(files)
    manifest = ingest(tmp_path, base_url=base, expected_sizes=sizes)

    for split, n in sizes.items():
        lines = (tmp_path / f"{split}.tsv").read_text(encoding="utf-8").splitlines()
        assert len(lines) == n
        text, label = lines[0].split("\t")
        assert "\t" not in text and label == "0"
        assert "with some tab" in text  # tab sanitized to a space
        assert manifest["splits"][split]["size"] == n
        assert sum(manifest["splits"][split]["class_counts"]) == n

    labels = (tmp_path / "labels.txt").read_text(encoding="utf-8").splitlines()
    assert labels == list(LABEL_NAMES)
    on_disk = json.loads((tmp_path / "manifest.json").read_text(encoding="utf-8"))
    assert on_disk == manifest


def test_ingest_is_deterministic(upstream, tmp_path):
    base, files = upstream
    sizes = fill_good_upstream(files)
    ingest(tmp_path / "a", base_url=base, expected_sizes=sizes)
    ingest(tmp_path / "b", base_url=base, expected_sizes=sizes)
    for name in ("train.tsv", "validation.tsv", "test.tsv", "labels.txt", "manifest.json"):
        assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()


def test_label_order_mismatch_aborts(upstream, tmp_path):
    base, files = upstream
    sizes = fill_good_upstream(files)
    swapped = GOOD_MAPPING.splitlines()
    swapped[0], swapped[4] = "0\t🔥\t_fire_", "4\t❤️\t_red_heart_"
    files["mapping.txt"] = "\n".join(swapped)
    with pytest.raises(IngestError, match="label-order mismatch.*0=🔥"):
        ingest(tmp_path, base_url=base, expected_sizes=sizes)


def test_size_mismatch_aborts(upstream, tmp_path):
    base, files = upstream
    fill_good_upstream(files)
    with pytest.raises(IngestError, match="expected 41"):
        ingest(tmp_path, base_url=base,
               expected_sizes={"train": 41, "validation": 20, "test": 20})


def test_missing_train_label_aborts(upstream, tmp_path):
    base, files = upstream
    sizes = fill_good_upstream(files)
    files["train_text.txt"], files["train_labels.txt"] = tiny_split(40, lambda i: i % 19)
    with pytest.raises(IngestError, match="missing labels \\[19\\]"):
        ingest(tmp_path, base_url=base, expected_sizes=sizes)


def test_download_failure_aborts(upstream, tmp_path):
    base, files = upstream
    with pytest.raises(IngestError, match="download failed"):
        ingest(tmp_path, base_url=base)


def test_tampered_tsv_fails_verification(upstream, tmp_path):
    base, files = upstream
    sizes = fill_good_upstream(files)
    ingest(tmp_path, base_url=base, expected_sizes=sizes)
    verify_manifest(tmp_path)
    path = tmp_path / "test.tsv"
    path.write_text(path.read_text(encoding="utf-8").replace("tweet number 0", "edited"),
                    encoding="utf-8")
    with pytest.raises(IngestError, match="checksum mismatch"):
        verify_manifest(tmp_path)


def test_cli_verify_and_error_exit_codes(upstream, tmp_path, capsys):
    base, files = upstream
    sizes = fill_good_upstream(files)
    ingest(tmp_path, base_url=base, expected_sizes=sizes)
    assert main(["--verify", "--out", str(tmp_path)]) == 0
    assert main(["--out", str(tmp_path / "x"), "--base-url", base]) == 1  # canonical sizes fail
    assert "error:" in capsys.readouterr().err


def test_canonical_expectations():
    assert CANONICAL_SIZES == {"train": 45000, "validation": 5000, "test": 50000}
    assert CANONICAL_TEST_HEART_SUPPORT == 10798
    assert len(LABEL_NAMES) == NUM_CLASSES == 20
    assert LABEL_NAMES[0] == ":heart:"
    verify_label_order(parse_mapping(GOOD_MAPPING))


def canonical_upstream(files, heart_support=CANONICAL_TEST_HEART_SUPPORT):
    """Full-size mock: exact canonical sizes, configurable class-0 test support."""
    files["mapping.txt"] = GOOD_MAPPING
    files["train_text.txt"], files["train_labels.txt"] = tiny_split(45000, lambda i: i % 20)
    files["val_text.txt"], files["val_labels.txt"] = tiny_split(5000, lambda i: i % 20)

    def test_label(i):
        return 0 if i < heart_support else 1 + (i % 19)

    files["test_text.txt"], files["test_labels.txt"] = tiny_split(50000, test_label)


def test_canonical_sized_ingest_checks_heart_support(upstream, tmp_path):
    base, files = upstream
    canonical_upstream(files)
    manifest = ingest(tmp_path, base_url=base)  # default canonical expectations
    assert manifest["splits"]["test"]["class_counts"][0] == CANONICAL_TEST_HEART_SUPPORT
    assert {s: i["size"] for s, i in manifest["splits"].items()} == CANONICAL_SIZES

    canonical_upstream(files, heart_support=9000)
    with pytest.raises(IngestError, match="9000 examples of label 0"):
        ingest(tmp_path / "bad", base_url=base)

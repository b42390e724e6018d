"""End-to-end smoke: the extraction engine driving a live sidecar.

Launches uvicorn on a free port with the vendored checkpoint, then invokes
the clozefill CLI as a subprocess against it. Only liveness and output
well-formedness are asserted, not extraction quality.
"""
import json
import socket
import subprocess
import sys
import threading
import time

import numpy as np
import pytest
import requests

from mlm_sidecar.server import ModelService, ServerConfig, create_app

from conftest import MODEL_DIR


def free_port() -> int:
    with socket.socket() as s:
        s.bind(("127.0.0.1", 0))
        return s.getsockname()[1]


@pytest.fixture(scope="module")
def live_server():
    import uvicorn

    service = ModelService(ServerConfig(model_path=str(MODEL_DIR)))
    port = free_port()
    config = uvicorn.Config(create_app(service), host="127.0.0.1", port=port, log_level="warning")
    server = uvicorn.Server(config)
    thread = threading.Thread(target=server.run, daemon=True)
    thread.start()
    base_url = f"http://127.0.0.1:{port}"
    deadline = time.time() + 30
    while time.time() < deadline:
        try:
            if requests.get(base_url + "/health", timeout=1).status_code == 200:
                break
        except requests.RequestException:
            time.sleep(0.1)
    else:
        raise RuntimeError("sidecar did not come up")
    yield base_url
    server.should_exit = True
    thread.join(timeout=10)


def write_benchmark(directory):
    directory.mkdir(parents=True, exist_ok=True)
    templates = directory / "templates.tsv"
    templates.write_text(
        "born_in\t[SUB] was born in [OBJ]\ncapital_of\t[SUB] is the capital of [OBJ]\n",
        encoding="utf-8",
    )

    sentences = [
        # (relation, subject, context sentence, gold token or None)
        ("born_in", "obama", "obama was born in hawaii .", "hawaii"),
        ("born_in", "einstein", "einstein was born in ulm .", "ulm"),
        ("born_in", "mozart", "mozart was born in salzburg .", "salzburg"),
        ("born_in", "curie", "curie was born in warsaw .", "warsaw"),
        ("born_in", "darwin", "darwin was born in shrewsbury .", "shrewsbury"),
        ("born_in", "tesla", "tesla was born in smiljan .", "smiljan"),
        ("born_in", "hugo", "the weather was nice today .", None),
        ("born_in", "verne", "dinner was served late .", None),
        ("born_in", "twain", "twain wrote many books .", None),
        ("born_in", "austen", "austen was born in steventon .", "steventon"),
        ("capital_of", "paris", "paris is the capital of france .", "france"),
        ("capital_of", "berlin", "berlin is the capital of germany .", "germany"),
        ("capital_of", "rome", "rome is the capital of italy .", "italy"),
        ("capital_of", "madrid", "madrid is the capital of spain .", "spain"),
        ("capital_of", "tokyo", "tokyo is the capital of japan .", "japan"),
        ("capital_of", "cairo", "cairo is the capital of egypt .", "egypt"),
        ("capital_of", "lima", "the market is busy on sundays .", None),
        ("capital_of", "oslo", "music is the food of love .", None),
        ("capital_of", "dublin", "dublin is the capital of ireland .", "ireland"),
        ("capital_of", "ottawa", "ottawa is the capital of canada .", "canada"),
    ]
    assert len(sentences) == 20

    dataset = directory / "dataset.jsonl"
    with open(dataset, "w", encoding="utf-8") as handle:
        for relation, subject, sentence, gold_token in sentences:
            context = sentence.split()
            record = {"relation": relation, "subject": [subject], "context": context}
            if gold_token is None:
                record["gold"] = None
            else:
                index = context.index(gold_token)
                record["gold"] = {"span": [index, index + 1]}
            handle.write(json.dumps(record) + "\n")

    # random unit vectors per word: scores are arbitrary but finite
    rng = np.random.default_rng(123)
    words = sorted({w for _, _, sentence, _ in sentences for w in sentence.split()})
    lines = []
    for word in words:
        vec = rng.standard_normal(16)
        vec /= np.linalg.norm(vec)
        lines.append(word + " " + " ".join(repr(float(v)) for v in vec))
    embeddings = directory / "vectors.txt"
    embeddings.write_text("\n".join(lines) + "\n", encoding="utf-8")
    return templates, dataset, embeddings


class TestEndToEndSmoke:
    def test_twenty_pair_run_against_live_sidecar(self, live_server, tmp_path):
        templates, dataset, embeddings = write_benchmark(tmp_path / "bench")
        out_dir = tmp_path / "out"
        proc = subprocess.run(
            [
                sys.executable,
                "-m",
                "clozefill.cli",
                "run",
                "--templates", str(templates),
                "--dataset", str(dataset),
                "--embeddings", str(embeddings),
                "--backend", "remote",
                "--backend-url", live_server,
                "--k", "16",
                "--output-dir", str(out_dir),
            ],
            capture_output=True,
            text=True,
            timeout=600,
        )
        assert proc.returncode == 0, proc.stderr

        lines = (out_dir / "extractions.jsonl").read_text(encoding="utf-8").splitlines()
        assert len(lines) == 20
        for line in lines:
            record = json.loads(line)
            assert set(record) == {"relation", "subject", "prediction", "anchor", "rejected", "score"}
            assert isinstance(record["rejected"], bool)
            if record["rejected"]:
                assert record["prediction"] is None and record["anchor"] is None
            else:
                assert isinstance(record["anchor"], int)
                span = record["prediction"]["span"]
                assert 0 <= span[0] < span[1]
                assert record["prediction"]["text"], "answer text must be non-empty"
        assert (out_dir / "report.json").exists()
        manifest = json.loads((out_dir / "manifest.json").read_text())
        assert manifest["mask_token"] == "[MASK]"

    def test_remote_meta_consistency(self, live_server):
        meta = requests.get(live_server + "/meta", timeout=5).json()
        embed = requests.post(
            live_server + "/embed", json={"tokens": ["consistency", "check"]}, timeout=30
        ).json()
        assert len(embed["vectors"][0]) == meta["dimension"]

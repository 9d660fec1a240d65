import json

import pytest
from fastapi.testclient import TestClient

from scorer_sidecar.app import create_app
from scorer_sidecar.config import SidecarConfig, StubConfig

PROFILE = {
    "kind": "stub",
    "scores": {"d1": {"malicious": 0.9, "benign": 0.9}},
    "noise_sigma": 0.0,
    "seed": 0,
}


@pytest.fixture()
def client(tmp_path):
    corpus = tmp_path / "corpus.jsonl"
    rows = [
        {"id": "p1", "prompt": "alpha", "label": "malicious", "dataset": "d1"},
        {"id": "p2", "prompt": "beta", "label": "benign", "dataset": "d1"},
    ]
    corpus.write_text("\n".join(json.dumps(r) for r in rows) + "\n", encoding="utf-8")
    config = SidecarConfig(batch_limit=4, stub=StubConfig(profile=PROFILE, corpus_paths=("corpus.jsonl",)))
    return TestClient(create_app(config, base_dir=tmp_path))


def test_health(client):
    body = client.get("/health").json()
    assert body == {"status": "ok", "mode": "stub", "batch_limit": 4}


def test_score_constant_stub(client):
    response = client.post("/score", json={"prompts": ["alpha", "beta"]})
    assert response.status_code == 200
    assert response.json() == {"probabilities": [0.9, 0.9]}


def test_score_canonical_bytes(client):
    response = client.post("/score", content=b'{"prompts":["alpha"]}', headers={"content-type": "application/json"})
    assert response.content == b'{"probabilities":[0.9]}'


def test_empty_string_prompt_is_valid(client):
    response = client.post("/score", json={"prompts": [""]})
    assert response.status_code == 200
    assert response.json()["probabilities"] == [0.5]


def test_duplicate_prompts_score_identically(client):
    probabilities = client.post("/score", json={"prompts": ["alpha", "alpha"]}).json()["probabilities"]
    assert probabilities[0] == probabilities[1]


def test_oversize_batch_is_413(client):
    response = client.post("/score", json={"prompts": ["x"] * 5})
    assert response.status_code == 413


def test_empty_batch_is_400(client):
    assert client.post("/score", json={"prompts": []}).status_code == 400


def test_malformed_bodies_are_400(client):
    assert client.post("/score", content=b"not json", headers={"content-type": "application/json"}).status_code == 400
    assert client.post("/score", json={"nope": []}).status_code == 400
    assert client.post("/score", json={"prompts": [1, 2]}).status_code == 400


def test_config_requires_exactly_one_mode():
    with pytest.raises(ValueError):
        SidecarConfig()
    with pytest.raises(ValueError):
        SidecarConfig(checkpoint_path="x", stub=StubConfig(profile=PROFILE))

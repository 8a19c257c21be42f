import json
import os
from pathlib import Path

import numpy as np
import pytest

import ctxforge

DEMO = Path(os.environ.get("CTXFORGE_DEMO_DIR", Path(__file__).resolve().parents[2] / "data" / "demo"))


def test_plan_windows_matches_ten_turn_example():
    assert [tuple(w) for w in ctxforge.plan_windows(10)] == [(1, 5), (3, 7), (5, 9), (7, 10)]
    assert [tuple(w) for w in ctxforge.plan_windows(4)] == [(1, 4)]
    with pytest.raises(ValueError):
        ctxforge.plan_windows(0)


def test_stub_embedding_is_unit_norm_and_reproducible():
    v = ctxforge.stub_embedding("喜び")
    assert v.shape == (ctxforge.WORD_EMBEDDING_DIM,)
    assert abs(np.linalg.norm(v) - 1.0) < 1e-12
    np.testing.assert_array_equal(v, ctxforge.stub_embedding("喜び"))
    short = ctxforge.stub_embedding("喜び", 6)
    np.testing.assert_allclose(short[:2], [0.5926121223287076, -0.6002159804709827], rtol=0, atol=1e-15)


def test_aggregate_and_project_against_numpy():
    words = ["喜び", "期待", "信頼"]
    vecs = np.stack([ctxforge.stub_embedding(w) for w in words])
    mean = ctxforge.aggregate_slot(words, vecs)
    np.testing.assert_allclose(mean, vecs.mean(axis=0), rtol=0, atol=1e-15)
    np.testing.assert_array_equal(mean, ctxforge.aggregate_slot(words[::-1], vecs[::-1]))

    w = ctxforge.ProjectionWeights.from_seed(3)
    assert w.matrix.shape == (ctxforge.FEATURE_DIM, ctxforge.WORD_EMBEDDING_DIM)
    bound = 1 / np.sqrt(ctxforge.WORD_EMBEDDING_DIM)
    assert np.abs(w.matrix).max() <= bound and np.abs(w.bias).max() <= bound
    x = ctxforge.compose_context(mean, mean, mean)
    want = w.matrix @ x + w.bias
    got = w.project(x)
    assert np.abs(got - want).max() / np.abs(want).max() < 1e-10
    with pytest.raises(ValueError):
        w.project(np.zeros(5))


def test_parse_answer_accepts_and_rejects():
    dialogue = ctxforge.load_dialogues(DEMO / "dialogues.jsonl")[0]
    ok = ctxforge.parse_answer("1: 挨拶 / 喜び / 明るい\n2: 質問 / 期待 / 丁寧\n3: 共感 / 信頼 / 穏やか\n"
                               "4: 励まし / ワクワク / 元気\n", (1, 4), dialogue)
    assert ok["ok"] and [a["turn"] for a in ok["annotations"]] == [1, 2, 3, 4]
    assert ok["annotations"][3]["emotion_in_vocabulary"] is False
    bad = ctxforge.parse_answer("Sorry, I cannot help with that.", ctxforge.TurnWindow(1, 4), dialogue)
    assert not bad["ok"] and bad["failure"] in {"NoContextWords", "WrongLanguage"}


def test_mock_annotation_round_trip(tmp_path):
    store = tmp_path / "records.jsonl"
    summary = ctxforge.annotate_mock(DEMO / "dialogues.jsonl", DEMO / "script.jsonl", store, workers=2)
    assert summary == {"dialogues": 6, "skipped": 0, "records": 16, "accepted": 15, "failed": 1, "aborted": []}
    records = ctxforge.load_records(store)
    assert len(records) == 16
    assert sum(r["status"] == "failed" for r in records) == 1
    again = ctxforge.annotate_mock(DEMO / "dialogues.jsonl", DEMO / "script.jsonl", store)
    assert again["skipped"] == 6


def test_load_features(tmp_path):
    p = tmp_path / "f.jsonl"
    p.write_text(json.dumps({"dialogue_id": "d", "turn": 1}) + "\n", encoding="utf-8")
    (tmp_path / "f.jsonl.meta.json").write_text(json.dumps({"lines": 1}), encoding="utf-8")
    rows, meta = ctxforge.load_features(p)
    assert rows[0]["turn"] == 1 and meta["lines"] == 1

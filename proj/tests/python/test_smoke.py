import json

import numpy as np
import pytest

import groundhog


def test_mask_primitives():
    a = np.array([[1, 1], [0, 0]], dtype=bool)
    b = np.array([[0, 1], [0, 1]], dtype=bool)
    assert groundhog.iou_mask(a, b) == pytest.approx(1 / 3)
    props = np.stack([a.astype(float), b.astype(float)])
    merged = groundhog.merge_proposals([0.8, 0.5], props)
    np.testing.assert_allclose(merged, [[0.8, 0.8], [0.0, 0.5]])
    assert groundhog.best_match(b, props) == 1
    assert groundhog.best_match((0, 0, 2, 1), props) == 0
    rle = groundhog.rle_encode(a)
    assert rle["h"] == 2 and rle["w"] == 2
    with pytest.raises(groundhog.DimensionError):
        groundhog.merge_proposals([0.5], props)
    with pytest.raises(groundhog.GroundhogError):
        groundhog.iou_mask(a, np.zeros((3, 3), dtype=bool))


def test_pipeline(tmp_path):
    corpus = tmp_path / "corpus.jsonl"
    stats = groundhog.gen_data(str(corpus), n=24, seed=3)
    assert stats["total"] == 24
    again = tmp_path / "again.jsonl"
    groundhog.gen_data(str(again), n=24, seed=3)
    assert corpus.read_bytes() == again.read_bytes()

    cfg = tmp_path / "cfg.json"
    cfg.write_text(json.dumps({"model": {"d_model": 16, "layers": 1, "heads": 2}}))
    ckpt = tmp_path / "ckpt"
    summary = groundhog.train([str(corpus)], str(ckpt), config=str(cfg), epochs=1, threads=1)
    assert summary["steps"] == 2
    assert (ckpt / "weights.ght1").exists()

    report = groundhog.evaluate(str(corpus), ckpt=str(ckpt), metrics=["miou", "anyiou"],
                                max_new_tokens=8)
    assert report

    records = [json.loads(line) for line in corpus.read_text().splitlines()]
    first = next(r for r in records if r["task"] == "RES")
    scene = tmp_path / "scene.json"
    scene.write_text(json.dumps({"scene": first["scene"]}))
    prompt = first["turns"][0]["text"]
    out = groundhog.ground(str(ckpt), str(scene), prompt, max_new_tokens=8)
    assert "response" in out
    diag = groundhog.diagnose(str(ckpt), str(scene), prompt, topk=50,
                              max_new_tokens=8)
    assert diag["topk"] <= 50
    with pytest.raises(groundhog.InvalidArgument):
        groundhog.evaluate(str(corpus))

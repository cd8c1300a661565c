import math
from pathlib import Path

import numpy as np
import pytest

import flyhash

DATA = Path(__file__).resolve().parents[2] / "data" / "sample_corpus.txt"


def toy_lines():
    a = "the bank raised the interest rate on the loan"
    b = "the river bank was covered in mud and reeds"
    return [a, b] * 40


def test_tokenize_and_vocabulary():
    assert flyhash.tokenize("Hello, World!") == ["hello", "world"]
    v = flyhash.build_vocabulary(["a", "b", "a", "c", "a", "b"], 2)
    assert len(v) == 2
    assert v.tokens == ["a", "b"]
    assert v.find("a") == 0
    assert v.find("zzz") is None


def test_encode_wgram_layout():
    idx = flyhash.encode_wgram([1, 2], 0, 5)
    assert idx == [1, 2, 5]


def test_learning_rate_schedule():
    assert flyhash.learning_rate(0, 1e-3, 10) == pytest.approx(1e-3)
    assert flyhash.learning_rate(5, 1e-3, 10) == pytest.approx(5e-4)


def test_init_weights_fixture():
    W = flyhash.init_weights(2, 1, 7)
    assert W.shape == (2, 2)
    assert W[0, 0] == np.float32(-0.019526392221450806)
    assert W[1, 1] == np.float32(0.1751580834388733)
    # rows on the unit sphere
    assert np.allclose(np.linalg.norm(W, axis=1), 1.0, atol=1e-6)


def test_energy_matches_numpy():
    rng = np.random.default_rng(0)
    W = rng.normal(size=(3, 8)).astype(np.float32)
    p = [0.1, 0.2, 0.3, 0.4] * 2
    samples = [[0, 1, 4], [2, 7], [3, 5, 6]]
    want = 0.0
    for s in samples:
        v = np.zeros(8)
        v[s] = 1.0
        mu = int(np.argmax(W.astype(np.float64) @ v))
        want -= (W[mu] @ (v / np.array(p))) / np.linalg.norm(W[mu].astype(np.float64))
    assert flyhash.energy(W, samples, p) == pytest.approx(want, rel=1e-9)


def test_train_save_load_roundtrip(tmp_path):
    model, reports = flyhash.train(toy_lines(), K=16, w=3, n_voc=100, epochs=2, lr0=1e-3,
                                   batch=16, seed=5, scaling="max-norm")
    assert len(reports) == 2
    assert all(math.isfinite(r.energy) for r in reports)
    assert model.K == 16 and model.w == 3 and model.epochs_trained == 2
    code = model.static_embedding("bank", 4)
    assert len(code) == 4 and len(set(code)) == 4
    path = tmp_path / "m.flyw"
    model.save(path)
    again = flyhash.Model.load(path)
    assert np.array_equal(again.weights, model.weights)
    assert again.to_bytes() == model.to_bytes()


def test_train_deterministic_across_workers():
    kw = dict(K=8, w=3, n_voc=50, epochs=1, lr0=1e-3, batch=10, seed=1, scaling="max-norm")
    a, _ = flyhash.train(toy_lines(), workers=1, **kw)
    b, _ = flyhash.train(toy_lines(), workers=3, **kw)
    assert a.to_bytes() == b.to_bytes()


def test_context_embedding_and_neighbors():
    model, _ = flyhash.train(toy_lines(), K=16, w=3, n_voc=100, epochs=2, lr0=1e-3,
                             batch=16, seed=5, scaling="max-norm")
    sent = "the river bank was muddy".split()
    code = model.context_embedding(sent, 2, 4)
    assert len(code) == 4
    nn = model.nearest_neighbors(sent, 2, q=3, k=4)
    assert len(nn) == 3
    assert all(0.0 <= s <= 1.0 for _, s in nn)


def test_errors_are_typed():
    with pytest.raises(flyhash.FlyhashError, match="nothing_to_train"):
        flyhash.train(toy_lines(), K=4, w=3, epochs=0)
    with pytest.raises(flyhash.FlyhashError, match="bad_magic|truncated"):
        flyhash.Model.from_bytes(b"not a model")


def test_eval_helpers():
    assert flyhash.binary_similarity([1, 1, 0, 0], [1, 0, 1, 0]) == pytest.approx(0.5)
    assert flyhash.spearman([1, 2, 3, 4], [10, 20, 30, 40]) == pytest.approx(1.0)
    codes = [[1, 1, 0, 0], [1, 1, 0, 0], [0, 0, 1, 1], [0, 0, 1, 1]]
    labels = flyhash.agglomerative_cluster(codes, 2)
    assert labels[0] == labels[1] and labels[2] == labels[3] and labels[0] != labels[2]
    q = flyhash.cluster_quality(codes, labels)
    assert q["intra_mean"] == pytest.approx(1.0)
    assert q["inter_mean"] == pytest.approx(0.0)
    assert flyhash.binarize_topk([[0.1, 0.9, 0.5]], 2) == [[0, 1, 1]]


@pytest.mark.skipif(not DATA.exists(), reason="sample corpus missing")
def test_sample_corpus_wordsim():
    lines = flyhash.split_sentences(DATA.read_text())[:3000]
    model, _ = flyhash.train(lines, K=32, w=5, n_voc=500, epochs=1, lr0=1e-4,
                             batch=200, seed=2, scaling="max-norm")
    pairs = [("bank", "loan", 9.0), ("river", "water", 8.0), ("bank", "river", 5.0),
             ("loan", "water", 1.0), ("bank", "zzzz", 3.0)]
    r = flyhash.evaluate_wordsim(model, pairs, 8)
    assert r["scored"] == 4
    assert r["coverage"] == pytest.approx(4 / 5)
    assert -1.0 <= r["rho"] <= 1.0

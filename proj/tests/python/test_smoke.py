import math

import numpy as np
import pytest

import lngram


def test_numerics():
    assert np.allclose(lngram.rmsnorm(np.array([2.0, 0, 0, 0]), 0.0), [2, 0, 0, 0])
    assert np.allclose(lngram.softmax_temp(np.array([0.0, math.log(3.0)])), [0.25, 0.75])
    assert lngram.kl_divergence(np.array([1.0, 0.0]), np.array([0.5, 0.5])) == pytest.approx(math.log(2))


def test_addresses():
    assert lngram.compute_address(0, [3, 5], 16) == 83
    assert lngram.compute_address(1, [0, 0], 16) == 256
    seen = {lngram.compute_address(r, [a, b, c], 4) for r in range(4) for a in range(4) for b in range(4) for c in range(4)}
    assert seen == set(range(256))


def test_surrogate_matches_finite_differences():
    rng = np.random.default_rng(0)
    z, g, e = rng.normal(size=4), rng.normal(size=8), rng.normal(size=(16, 8))
    an = lngram.exact_surrogate_grad(z, 1.0, g, e)
    fd = np.zeros(4)
    for j in range(4):
        dz = np.zeros(4)
        dz[j] = 1e-5
        fd[j] = (g @ lngram.expected_retrieval(z + dz, 1.0, e) - g @ lngram.expected_retrieval(z - dz, 1.0, e)) / 2e-5
    assert np.linalg.norm(an - fd) / np.linalg.norm(fd) < 1e-6
    p = lngram.local_symbol_probs(np.array([math.log(1 / 3), math.log(3)]))
    assert np.allclose(p, [0.1875, 0.0625, 0.5625, 0.1875])


def test_analysis():
    rng = np.random.default_rng(1)
    x = rng.normal(size=(30, 5))
    q, _ = np.linalg.qr(rng.normal(size=(5, 5)))
    assert lngram.linear_cka(x, x @ q) == pytest.approx(1.0, abs=1e-9)
    aligned, gain = lngram.soft_alignment(np.eye(3), 1)
    assert aligned == [1, 2, 3] and gain == [0, 0, 0]
    same = lngram.paired_bootstrap([1, 0, 1], [1, 0, 1], 500, 3)
    assert same["delta"] == 0 and same["p"] == 1
    adj = lngram.holm_bonferroni([0.01, 0.04, 0.03])
    assert adj == pytest.approx([0.03, 0.06, 0.06])


def test_decoder_roundtrip(tmp_path):
    cfg = lngram.DecoderConfig()
    cfg.layers, cfg.dim, cfg.heads, cfg.ffn_dim, cfg.max_seq = 2, 16, 2, 32, 32
    cfg.insert_layers = [1]
    cfg.lngram.mem_dim = 4
    model = lngram.Decoder(cfg, 3)
    tokens = list(range(40, 72))
    logits = model.forward_logits(tokens)
    assert logits.shape == (32, 256)
    states = model.hidden_states(tokens)
    assert len(states) == 3
    counts = model.parameter_counts()
    assert counts["total"] == counts["backbone"] + counts["table"] + counts["readout"] + counts["codec"]
    path = str(tmp_path / "m.ckpt")
    model.save(path)
    back = lngram.Decoder.load(path, cfg)
    assert np.array_equal(back.forward_logits(tokens), logits)
    other = lngram.DecoderConfig()
    other.layers, other.dim, other.heads, other.ffn_dim, other.max_seq = 2, 16, 2, 32, 32
    other.insert_layers = [1]
    other.lngram.mem_dim = 4
    other.lngram.mode = lngram.FusionMode.multi_table
    other.lngram.subtables = 2
    with pytest.raises(lngram.LoadError):
        lngram.Decoder.load(path, other)


def test_corpus_and_gradcheck():
    train, val, names = lngram.gen_corpus(seed=2, train_bytes=20000, val_bytes=2000)
    assert len(train) == 20000 and len(val) == 2000 and len(names) == 50
    assert lngram.gen_corpus(seed=2, train_bytes=20000, val_bytes=2000)[0] == train
    report = lngram.gradcheck(cases=20)
    assert report["passed"]

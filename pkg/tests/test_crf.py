"""CRF core checked against exhaustive enumeration and finite differences."""

import numpy as np
import pytest

from nerloop import crf

from oracles import (
    brute_decode,
    brute_log_z,
    brute_marginals,
    fd_gradient,
    random_crf_instance,
)


def test_log_partition_matches_enumeration():
    rng = np.random.default_rng(0)
    for _ in range(50):
        feats, weights, trans, _ = random_crf_instance(rng)
        em = crf.emission_scores(feats, weights)
        _, _, log_z = crf.forward_backward(em, trans)
        assert log_z == pytest.approx(brute_log_z(em, trans), abs=1e-9)


def test_marginals_match_enumeration():
    rng = np.random.default_rng(1)
    for _ in range(120):
        feats, weights, trans, _ = random_crf_instance(rng)
        em = crf.emission_scores(feats, weights)
        marg = crf.marginals(em, trans)
        np.testing.assert_allclose(marg, brute_marginals(em, trans), atol=1e-9)


def test_marginals_normalize():
    rng = np.random.default_rng(2)
    for _ in range(120):
        feats, weights, trans, _ = random_crf_instance(rng)
        em = crf.emission_scores(feats, weights)
        marg = crf.marginals(em, trans)
        np.testing.assert_allclose(marg.sum(axis=1), 1.0, atol=1e-9)


def test_viterbi_matches_masked_argmax():
    rng = np.random.default_rng(3)
    from oracles import is_valid_labeling, raw_score

    for _ in range(120):
        feats, weights, trans, _ = random_crf_instance(rng)
        em = crf.emission_scores(feats, weights)
        path = crf.viterbi(em, trans)
        best = brute_decode(em, trans)
        # Exact float ties between distinct optimal paths are legitimate;
        # the decoded path must be valid and achieve the optimum.
        assert is_valid_labeling(path)
        assert raw_score(em, trans, path) == pytest.approx(
            raw_score(em, trans, best), abs=1e-12
        )


def test_viterbi_output_always_valid():
    rng = np.random.default_rng(4)
    for _ in range(200):
        feats, weights, trans, _ = random_crf_instance(rng)
        em = crf.emission_scores(feats, weights)
        path = crf.viterbi(em, trans)
        prev = crf.L_O
        for lab in path:
            assert not (lab == crf.L_I and prev == crf.L_O)
            prev = lab


def test_viterbi_empty_sequence():
    assert crf.viterbi(np.zeros((0, 3)), np.zeros((3, 3))) == []


def test_gradient_matches_finite_differences():
    rng = np.random.default_rng(5)
    for _ in range(110):
        seqs = []
        n_feat = 6
        for _ in range(int(rng.integers(1, 4))):
            feats, _, _, labels = random_crf_instance(rng, max_len=5, max_features=n_feat)
            seqs.append((feats, labels))
        weights = rng.normal(scale=0.5, size=(n_feat, crf.NUM_LABELS))
        trans = rng.normal(scale=0.5, size=(crf.NUM_LABELS, crf.NUM_LABELS))
        l2 = float(rng.choice([0.0, 0.1]))

        _, g_w, g_t = crf.nll_gradients(seqs, weights, trans, l2)

        fd_w = fd_gradient(lambda w: crf.neg_log_likelihood(seqs, w, trans, l2), weights.copy())
        fd_t = fd_gradient(lambda t: crf.neg_log_likelihood(seqs, weights, t, l2), trans.copy())
        analytic = np.concatenate([g_w.ravel(), g_t.ravel()])
        numeric = np.concatenate([fd_w.ravel(), fd_t.ravel()])
        rel = np.linalg.norm(analytic - numeric) / max(
            np.linalg.norm(analytic), np.linalg.norm(numeric), 1e-12
        )
        assert rel <= 1e-4


def test_zero_weight_marginals_are_uniform():
    # All labelings score 0, so every token's entity marginal is exactly 2/3.
    em = np.zeros((7, crf.NUM_LABELS))
    trans = np.zeros((crf.NUM_LABELS, crf.NUM_LABELS))
    marg = crf.marginals(em, trans)
    np.testing.assert_allclose(marg, np.full((7, 3), 1 / 3), atol=1e-12)

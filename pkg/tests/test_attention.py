import numpy as np
import pytest
from hypothesis import given, strategies as st

from cgm.attention import attention_forward, attention_weights, sensitivity, verify_locality
from cgm.chunking import AttentionMask
from cgm.errors import ContractError


def mask_from(allow, text=0):
    allow = np.asarray(allow, dtype=bool)
    return AttentionMask(allow, allow.shape[0] - text, text)


def rng_emb(n, d=4, seed=0):
    return np.random.default_rng(seed).uniform(-1, 1, size=(n, d))


def test_single_position_is_identity():
    emb = np.array([[0.3, -0.7, 2.0]])
    assert np.array_equal(attention_forward(emb, mask_from([[1]])), emb)


def test_diagonal_mask_is_identity():
    emb = rng_emb(2)
    assert np.allclose(attention_forward(emb, mask_from(np.eye(2))), emb, atol=0, rtol=0)


def test_equal_embeddings_get_equal_weights():
    emb = np.array([[0.5, -0.25], [0.5, -0.25]])
    w = attention_weights(emb, mask_from(np.ones((2, 2))))
    assert np.allclose(w, 0.5, atol=1e-15)
    assert np.allclose(attention_forward(emb, mask_from(np.ones((2, 2)))), emb, atol=1e-15)


def test_weights_match_closed_form_softmax():
    emb = rng_emb(3, 2, seed=4)
    allow = np.array([[1, 1, 0], [1, 1, 1], [0, 1, 1]], dtype=bool)
    w = attention_weights(emb, mask_from(allow), scale=0.7)
    for i in range(3):
        logits = np.array([0.7 * emb[i] @ emb[j] for j in range(3) if allow[i, j]])
        expect = np.exp(logits) / np.exp(logits).sum()
        assert np.allclose(w[i, allow[i]], expect, atol=1e-14)


def test_diagonal_mask_sensitivity_is_diagonal():
    emb = rng_emb(4, 3, seed=1)
    s = sensitivity(emb, mask_from(np.eye(4)))
    assert (s[~np.eye(4, dtype=bool)] == 0).all()
    assert (np.diag(s) > 1e-9).all()


def test_path_graph_locality():
    allow = np.array([[1, 1, 0], [1, 1, 1], [0, 1, 1]], dtype=bool)
    emb = rng_emb(3, 8, seed=2)
    s = sensitivity(emb, mask_from(allow))
    # perturbing a (position 0) moves a and b, never c
    assert s[0, 0] > 1e-9 and s[1, 0] > 1e-9
    assert s[2, 0] <= 1e-9
    assert verify_locality(emb, mask_from(allow)).passed


def test_full_mask_every_perturbation_reaches_every_row():
    emb = rng_emb(4, 8, seed=3)
    s = sensitivity(emb, mask_from(np.ones((4, 4))))
    assert (s > 1e-9).all()


def test_forbidden_weights_are_bitwise_zero():
    emb = rng_emb(5, 8, seed=5) * 30  # large logits would leak under a -inf trick
    allow = np.tril(np.ones((5, 5), dtype=bool))
    w = attention_weights(emb, mask_from(allow))
    assert (w[~allow] == 0.0).all()


@given(st.integers(1, 8), st.integers(1, 6), st.integers(0, 10_000))
def test_rows_sum_to_one(n, d, seed):
    rng = np.random.default_rng(seed)
    allow = rng.random((n, n)) < 0.4
    np.fill_diagonal(allow, True)
    w = attention_weights(rng.uniform(-1, 1, (n, d)), mask_from(allow))
    assert np.allclose(w.sum(axis=1), 1.0, atol=1e-12, rtol=0)


@given(st.integers(2, 7), st.integers(0, 10_000))
def test_permutation_equivariance(n, seed):
    rng = np.random.default_rng(seed)
    allow = rng.random((n, n)) < 0.5
    np.fill_diagonal(allow, True)
    emb = rng.uniform(-1, 1, (n, 3))
    perm = rng.permutation(n)
    out = attention_forward(emb, mask_from(allow))
    out_p = attention_forward(emb[perm], mask_from(allow[np.ix_(perm, perm)]))
    assert np.allclose(out_p, out[perm], atol=1e-12)


def test_report_fields_and_failure_detection():
    emb = rng_emb(3, 4)
    allow = np.eye(3, dtype=bool)
    ok = verify_locality(emb, mask_from(allow))
    assert ok.passed and ok.max_forbidden_weight == 0.0 and ok.max_forbidden_sensitivity == 0.0
    assert "PASS" in str(ok)
    # an absurd threshold makes allowed cells look insensitive
    bad = verify_locality(emb, mask_from(allow), threshold=1e6)
    assert not bad.passed
    assert {v[2] for v in bad.violations} == {"insensitive to allowed position"}


@pytest.mark.parametrize(
    "emb, allow, scale",
    [
        (np.zeros((2, 2)), np.eye(3), None),
        (np.zeros((2,)), np.eye(2), None),
        (np.full((2, 2), np.nan), np.eye(2), None),
        (np.zeros((2, 2)), np.eye(2), -1.0),
        (np.zeros((2, 2)), np.zeros((2, 2)), None),
    ],
)
def test_contract_violations(emb, allow, scale):
    with pytest.raises(ContractError):
        attention_forward(emb, mask_from(allow), scale)

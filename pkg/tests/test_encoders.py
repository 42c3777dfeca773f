import numpy as np
import pytest

from nwqm import autodiff as ad
from nwqm.encoders import (HashingSentenceEmbedder, TalkEncoderParams,
                           ToySectionEncoder, Vocabulary, encode_section,
                           encode_talk, load_image_embedding, LookupSectionEncoder)
from nwqm.store import EmbeddingStore, write_embedding_store


def _toy_encoder(rng=None, vocab_words=("alpha", "beta", "gamma"), d_e=3, d_s=4):
    vocab = Vocabulary.build([list(vocab_words)])
    if rng is None:
        emb = np.zeros((len(vocab), d_e))
        w = np.zeros((d_e, d_s))
        b = np.zeros(d_s)
    else:
        emb = rng.normal(size=(len(vocab), d_e))
        w = rng.normal(size=(d_e, d_s))
        b = rng.normal(size=d_s)
    return ToySectionEncoder(
        embedding=ad.parameter(emb, "encoder.embedding"),
        proj_w=ad.parameter(w, "encoder.proj_w"),
        proj_b=ad.parameter(b, "encoder.proj_b"),
        vocab=vocab,
    )


def test_zero_params_give_bias_vector():
    enc = _toy_encoder()
    enc.proj_b.value = np.array([1.0, -2.0, 0.5, 3.0])
    out = enc.encode_tokens(["alpha", "beta"])
    np.testing.assert_array_equal(out.value, [1.0, -2.0, 0.5, 3.0])


def test_mean_invariant_under_token_duplication():
    # [a, a] pools to the same mean as [a]; verified directly on a 2-word vocab
    rng = np.random.default_rng(0)
    enc = _toy_encoder(rng, vocab_words=("a", "b"))
    one = enc.encode_tokens(["a"]).value
    two = enc.encode_tokens(["a", "a"]).value
    np.testing.assert_allclose(one, two, rtol=0, atol=1e-15)
    mixed = enc.encode_tokens(["a", "b"]).value
    assert not np.allclose(one, mixed)


def test_unknown_tokens_map_to_unk_row():
    rng = np.random.default_rng(1)
    enc = _toy_encoder(rng)
    assert enc.vocab.ids(["never-seen"]) == [Vocabulary.UNKNOWN]
    np.testing.assert_array_equal(enc.encode_tokens(["never-seen"]).value,
                                  enc.encode_tokens(["<unk>"]).value)


def test_toy_encoder_gradients_match_finite_differences():
    rng = np.random.default_rng(2)
    enc = _toy_encoder(rng)
    params = enc.parameters()

    def loss():
        out = enc.encode_tokens(["alpha", "gamma", "alpha"])
        return ad.total(out * out)

    assert ad.check_gradients(loss, params) <= 1e-5


def test_lookup_mode_returns_exact_rows(tmp_path):
    rng = np.random.default_rng(3)
    rows = {f"12#{i}": rng.normal(size=4).astype(np.float32) for i in range(3)}
    path = tmp_path / "sections.store"
    write_embedding_store(path, 4, rows.items())
    enc = LookupSectionEncoder(EmbeddingStore.load(path))
    got = encode_section((12, 1), enc)
    np.testing.assert_array_equal(got.value, rows["12#1"].astype(np.float64))


def test_lookup_miss_names_the_key(tmp_path):
    path = tmp_path / "sections.store"
    write_embedding_store(path, 4, [("12#0", np.zeros(4))])
    enc = LookupSectionEncoder(EmbeddingStore.load(path))
    with pytest.raises(KeyError, match="99#0"):
        encode_section((99, 0), enc)


# ---------------------------------------------------------------------------
# talk encoder

def _talk_params(weight, bias):
    return TalkEncoderParams(weight=ad.parameter(np.asarray(weight, dtype=float), "talk.weight"),
                             bias=ad.parameter(np.asarray(bias, dtype=float), "talk.bias"))


def test_single_sentence_is_dense_of_embedding():
    rng = np.random.default_rng(4)
    params = _talk_params(rng.normal(size=(6, 3)), rng.normal(size=3))
    e = rng.normal(size=(1, 6))
    out, empty = encode_talk(e, params)
    np.testing.assert_allclose(out.value, e[0] @ params.weight.value + params.bias.value)
    assert not empty


def test_duplicate_sentences_pool_to_same_vector():
    rng = np.random.default_rng(5)
    params = _talk_params(rng.normal(size=(6, 3)), rng.normal(size=3))
    e = rng.normal(size=6)
    one, _ = encode_talk(e[None, :], params)
    two, _ = encode_talk(np.stack([e, e]), params)
    np.testing.assert_allclose(one.value, two.value)


def test_two_sentences_match_hand_arithmetic_dim4():
    # ((e1 + e2) / 2) @ W + b worked out by hand at dimension 4 -> 2
    w = [[1.0, 0.0], [0.0, 1.0], [1.0, 1.0], [2.0, -1.0]]
    b = [0.5, -0.5]
    e1 = np.array([1.0, 2.0, 3.0, 4.0])
    e2 = np.array([3.0, 0.0, 1.0, 0.0])
    # mean = [2, 1, 2, 2]; mean @ W = [2*1+1*0+2*1+2*2, 2*0+1*1+2*1+2*(-1)] = [8, 1]
    expected = [8.5, 0.5]
    out, _ = encode_talk(np.stack([e1, e2]), _talk_params(w, b))
    np.testing.assert_allclose(out.value, expected)


def test_talk_pooling_permutation_invariant_exactly():
    rng = np.random.default_rng(6)
    params = _talk_params(rng.normal(size=(5, 4)), rng.normal(size=4))
    e = rng.normal(size=(3, 5))
    forward, _ = encode_talk(e, params)
    # mean pooling commutes with any reordering of identical addends
    shuffled, _ = encode_talk(e[[2, 0, 1]], params)
    np.testing.assert_allclose(forward.value, shuffled.value, rtol=0, atol=1e-15)


def test_empty_talk_yields_bias_with_flag():
    rng = np.random.default_rng(7)
    params = _talk_params(rng.normal(size=(5, 4)), rng.normal(size=4))
    out, empty = encode_talk(np.zeros((0, 5)), params)
    assert empty
    np.testing.assert_array_equal(out.value, params.bias.value)


def test_dimension_mismatch_is_an_error():
    params = _talk_params(np.zeros((5, 4)), np.zeros(4))
    with pytest.raises(ValueError, match="shape"):
        encode_talk(np.zeros((2, 7)), params)


def test_talk_gradients_match_finite_differences():
    rng = np.random.default_rng(8)
    params = _talk_params(rng.normal(size=(5, 4)), rng.normal(size=4))
    e = rng.normal(size=(3, 5))

    def loss():
        out, _ = encode_talk(e, params)
        return ad.total(out * out)

    assert ad.check_gradients(loss, params.parameters()) <= 1e-5


# ---------------------------------------------------------------------------
# image vectors

def test_image_present_and_absent(tmp_path):
    rng = np.random.default_rng(9)
    vec = rng.normal(size=8).astype(np.float32)
    path = tmp_path / "images.store"
    write_embedding_store(path, 8, [("42", vec)])
    store = EmbeddingStore.load(path)
    hit = load_image_embedding(42, store)
    assert hit.present
    np.testing.assert_array_equal(hit.vector, vec.astype(np.float64))
    miss = load_image_embedding(43, store)
    assert not miss.present
    np.testing.assert_array_equal(miss.vector, np.zeros(8))


def test_image_without_store_uses_declared_dim():
    missing = load_image_embedding(1, None, dim=16)
    assert missing.vector.shape == (16,) and not missing.present


# ---------------------------------------------------------------------------
# hashing sentence embedder

def test_hashing_embedder_deterministic_and_normalised():
    emb = HashingSentenceEmbedder(dim=32)
    a = emb.embed(["quality", "matters", "here"])
    b = HashingSentenceEmbedder(dim=32).embed(["quality", "matters", "here"])
    np.testing.assert_array_equal(a, b)
    assert abs(np.linalg.norm(a) - 1.0) < 1e-12
    assert emb.embed([]).tolist() == [0.0] * 32


def test_hashing_embedder_separates_different_tokens():
    emb = HashingSentenceEmbedder(dim=64)
    assert not np.allclose(emb.embed(["alpha"]), emb.embed(["omega"]))

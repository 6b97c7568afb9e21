import math

import numpy as np
import pytest
from hypothesis import given, strategies as st
from hypothesis.extra.numpy import arrays

from madrec.textvec import FormatError, WordVectors, cosine, embed_text, hashed_vector, load_word_vectors, tokenize


def test_tokenize_examples():
    assert tokenize("It applies smoothly!") == ["applies", "smoothly"]
    assert tokenize("") == []
    assert tokenize("Crème brûlée, très bien") == ["crème", "brûlée", "très", "bien"]
    assert tokenize("a b cc dd_ee") == ["cc", "dd", "ee"]


@given(st.text())
def test_tokenize_deterministic_and_idempotent(text):
    toks = tokenize(text)
    assert toks == tokenize(text)
    assert tokenize(" ".join(toks)) == toks
    assert all(t == t.lower() and len(t) >= 2 for t in toks)


def test_load_word_vectors(tmp_path):
    p = tmp_path / "v.txt"
    p.write_text("scent 1 0 0\nColor 0 1 0\n")
    wv = load_word_vectors(p)
    assert wv.dim == 3 and set(wv.table) == {"scent", "color"}
    again = load_word_vectors(p)
    assert all(np.array_equal(wv.table[t], again.table[t]) for t in wv.table)


def test_load_word_vectors_header_and_mixed_dims(tmp_path):
    p = tmp_path / "v.txt"
    p.write_text("4 3\na1 1 2 3\nb1 1 2 3\nc1 1 2 3 4\nd1 1 2 3\n")
    wv = load_word_vectors(p)
    assert wv.dim == 3 and len(wv.table) == 3 and wv.skipped == 1


def test_load_word_vectors_rejects_garbage(tmp_path):
    p = tmp_path / "v.txt"
    p.write_text("\n\n")
    with pytest.raises(FormatError):
        load_word_vectors(p)
    p.write_text("tok x y\n")
    with pytest.raises(FormatError):
        load_word_vectors(p)


def test_embed_examples():
    wv = WordVectors(2, {"left": np.array([1.0, 0.0]), "right": np.array([0.0, 1.0])})
    e = embed_text("left", wv)
    assert np.array_equal(e.values, wv.table["left"]) and not e.empty
    assert np.allclose(embed_text("left right", wv).values, [0.5, 0.5])
    z = embed_text("nothing known here", wv)
    assert z.empty and not z.values.any() and z.dim == 2


def test_hashing_fallback_is_deterministic():
    wv = WordVectors.hashing(dim=16, seed=3)
    a = wv.get("scent")
    assert a.shape == (16,) and abs(np.linalg.norm(a) - 1) < 1e-6
    assert np.array_equal(a, WordVectors.hashing(16, 3).get("scent"))
    assert not np.array_equal(a, hashed_vector("scent", 16, 4))
    assert not embed_text("scent", wv).empty


def test_cosine_examples():
    assert cosine([1, 0], [0, 1]) == 0.0
    assert cosine([2, 0], [1, 0]) == 1.0
    assert cosine([1, 1], [1, 0]) == pytest.approx(1 / math.sqrt(2), abs=1e-12)
    assert cosine([0, 0], [1, 0]) == 0.0
    with pytest.raises(ValueError):
        cosine([1, 0], [1, 0, 0])


vec = arrays(np.float64, 5, elements=st.floats(-100, 100, allow_nan=False))


@given(vec, vec, st.floats(0.01, 100))
def test_cosine_symmetry_and_scale(a, b, k):
    c = cosine(a, b)
    assert abs(c) <= 1 + 1e-12
    assert c == pytest.approx(cosine(b, a), abs=1e-9)
    if np.linalg.norm(a) > 1e-6 and np.linalg.norm(b) > 1e-6:
        assert cosine(k * a, b) == pytest.approx(c, abs=1e-9)


@given(st.lists(st.sampled_from(["alpha", "beta", "gamma", "delta", "zz", "oov"]), max_size=12), st.randoms())
def test_embed_permutation_invariant(tokens, rnd):
    wv = WordVectors.hashing(dim=8, seed=1)
    wv.table.update({"alpha": np.ones(8, dtype=np.float32)})
    shuffled = list(tokens)
    rnd.shuffle(shuffled)
    assert np.array_equal(embed_text(" ".join(tokens), wv).values, embed_text(" ".join(shuffled), wv).values)

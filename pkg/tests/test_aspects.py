import itertools
import random

import numpy as np
import pytest

from madrec.aspects import (
    AspectCategory,
    AspectModel,
    InertiaIncreaseError,
    MappingNamer,
    UnnamedClusterError,
    _check_history,
    cluster_terms,
    label_sentence,
    light_stem,
    name_categories,
    select_vocab,
    split_sentences,
    top_terms,
)
from madrec.synth import ASPECTS
from madrec.textvec import WordVectors, tokenize

ONE_D = {"p00": 0.0, "p01": 0.1, "p50": 5.0, "p51": 5.1}


def one_d_vectors(points=ONE_D):
    return WordVectors(1, {t: np.array([v]) for t, v in points.items()})


def brute_force_two_partition(points):
    # word vectors are stored as float32, so the oracle sees the same values
    points = {t: float(np.float32(v)) for t, v in points.items()}
    toks = sorted(points)
    best = None
    for mask in range(1, 2 ** len(toks) - 1):
        groups = [[t for b, t in enumerate(toks) if (mask >> b) & 1], [t for b, t in enumerate(toks) if not (mask >> b) & 1]]
        inertia = 0.0
        for g in groups:
            xs = np.array([points[t] for t in g])
            inertia += float(((xs - xs.mean()) ** 2).sum())
        if best is None or inertia < best[0] - 1e-12:
            best = (inertia, {frozenset(g) for g in groups})
    return best


def partition(cr):
    return {frozenset(cr.members(j)) for j in range(cr.k)}


def test_one_d_matches_brute_force():
    inertia, groups = brute_force_two_partition(ONE_D)
    cr = cluster_terms(one_d_vectors(), ONE_D, k=2, seed=0, n_init=10)
    assert partition(cr) == groups == {frozenset({"p00", "p01"}), frozenset({"p50", "p51"})}
    assert cr.inertia == pytest.approx(inertia, abs=1e-12)


def test_random_1d_instances_match_brute_force():
    rng = np.random.default_rng(5)
    for trial in range(20):
        pts = {f"t{k}": float(v) for k, v in enumerate(rng.normal(size=6) * 3)}
        inertia, _ = brute_force_two_partition(pts)
        cr = cluster_terms(one_d_vectors(pts), pts, 2, seed=trial, n_init=10)
        assert cr.inertia == pytest.approx(inertia, abs=1e-9)


def test_k1_centroid_is_mean():
    cr = cluster_terms(one_d_vectors(), ONE_D, 1)
    xs = np.array(list(ONE_D.values()))
    assert cr.centroids[0, 0] == pytest.approx(xs.mean())
    assert cr.inertia == pytest.approx(xs.var() * len(xs))


def test_cluster_invariants_and_determinism(synth_wv):
    vocab = list(synth_wv.table)
    a = cluster_terms(synth_wv, vocab, 8, seed=3, n_init=3)
    b = cluster_terms(synth_wv, vocab, 8, seed=3, n_init=3)
    assert a.assignment == b.assignment
    X = np.array([synth_wv.get(t) for t in a.tokens], dtype=np.float64)
    d2 = ((X[:, None, :] - a.centroids[None]) ** 2).sum(-1)
    labels = np.array([a.assignment[t] for t in a.tokens])
    assert np.array_equal(d2.argmin(1), labels)
    assert a.inertia == pytest.approx(d2[np.arange(len(X)), labels].sum())
    assert all(y <= x + 1e-9 for x, y in zip(a.history, a.history[1:]))


def test_planted_aspects_recovered(synth_wv):
    cr = cluster_terms(synth_wv, list(synth_wv.table), 8, seed=0, n_init=10)
    assert partition(cr) == {frozenset(terms) for terms in ASPECTS.values()}


def test_too_few_tokens():
    with pytest.raises(ValueError):
        cluster_terms(one_d_vectors(), ["p00"], 2)
    with pytest.raises(ValueError):
        cluster_terms(one_d_vectors(), ONE_D, 0)


def test_empty_cluster_reseeded():
    # duplicate points force an empty cluster on the first assignment
    pts = {"a": 0.0, "b": 0.0, "c": 0.0, "d": 10.0}
    cr = cluster_terms(one_d_vectors(pts), pts, 3, seed=1, n_init=2)
    assert len({cr.assignment[t] for t in pts}) >= 2


def test_inertia_check_raises():
    _check_history([3.0, 2.0, 2.0])
    with pytest.raises(InertiaIncreaseError):
        _check_history([3.0, 2.0, 2.5])


def test_top_terms_tiebreak_and_bounds():
    cr = cluster_terms(one_d_vectors(), ONE_D, 2, seed=0, n_init=10)
    low = cr.assignment["p00"]
    assert top_terms(cr, one_d_vectors(), low, 1) == ["p00"]
    assert top_terms(cr, one_d_vectors(), low, 10) == ["p00", "p01"]
    with pytest.raises(KeyError):
        top_terms(cr, one_d_vectors(), 5, 1)


def test_name_categories():
    clusters = [(0, ["musk", "vanilla"]), (1, ["shade", "tint"])]
    cats = name_categories(clusters, MappingNamer({0: "Scent", 1: "Color"}))
    assert [c.name for c in cats] == ["Scent", "Color"]
    dup = name_categories(clusters, MappingNamer({0: "Makeup", 1: "Makeup"}))
    assert [c.name for c in dup] == ["Makeup", "Makeup-2"]
    by_term = name_categories(clusters, MappingNamer({"tint": "Color", "musk": "Scent"}))
    assert [c.name for c in by_term] == ["Scent", "Color"]
    with pytest.raises(UnnamedClusterError) as err:
        name_categories(clusters, MappingNamer({0: "Scent"}))
    assert "shade" in str(err.value)


def test_model_inversion_and_json(tmp_path):
    model = AspectModel((AspectCategory("Scent", ("musk", "fresh")), AspectCategory("Feel", ("fresh", "silky"))))
    assert model.term_index["fresh"] == {"Scent", "Feel"}
    inverted = {}
    for c in model.categories:
        for t in c.terms:
            inverted.setdefault(t, set()).add(c.name)
    assert model.term_index == inverted
    model.save(tmp_path / "m.json")
    again = AspectModel.load(tmp_path / "m.json")
    assert again == model and again.term_index == model.term_index
    with pytest.raises(ValueError):
        AspectModel((AspectCategory("A", ("x",)), AspectCategory("A", ("y",))))
    with pytest.raises(ValueError):
        AspectCategory("A", ("Upper",))


def test_label_sentence_examples():
    model = AspectModel((AspectCategory("Usage Context", ("evening", "morning", "night", "daily")), AspectCategory("Scent", ("scent", "smell"))))
    assert label_sentence("I use it every morning", model) == {"Usage Context"}
    assert label_sentence("Nice scent for the evening", model) == {"Usage Context", "Scent"}
    assert label_sentence("Arrived fast", model) == set()
    assert label_sentence("It smells great", model) == set()
    assert label_sentence("It smells great", AspectModel((AspectCategory("Scent", ("smelled",)),)), stem=True) == {"Scent"}


def test_label_sentence_brute_force():
    rng = random.Random(2)
    cats = [AspectCategory(name, terms[:5]) for name, terms in ASPECTS.items()]
    cats.append(AspectCategory("Overlap", ("scent", "price")))
    model = AspectModel(tuple(cats))
    words = [t for c in cats for t in c.terms] + ["great", "the", "is", "really", "bottle!"]
    for _ in range(1000):
        sentence = " ".join(rng.choice(words) for _ in range(rng.randint(0, 8)))
        toks = set(tokenize(sentence))
        want = {c.name for c in cats if any(t in toks for t in c.terms)}
        assert label_sentence(sentence, model) == want


def test_select_vocab():
    texts = ["scent scent"] * 5 + ["other words"] * 20
    assert select_vocab(texts, min_count=10, max_df=0.3) == {"scent"}
    assert select_vocab([], 1, 1.0) == set()


def test_split_sentences():
    assert split_sentences("Love it!  Smells   nice. Cheap?") == ["Love it", "Smells nice", "Cheap"]
    assert split_sentences("") == []


def test_light_stem():
    assert light_stem("smelled") == "smell"
    assert light_stem("is") == "is"


def test_extract_aspects_on_synthetic(synth_model):
    assert sorted(synth_model.names) == sorted(ASPECTS)
    for c in synth_model.categories:
        assert set(c.terms) <= set(ASPECTS[c.name])

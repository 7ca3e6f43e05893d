import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from notesum.errors import ConfigurationError, ParseError
from notesum.filtering import (
    EmbeddingScorer,
    FileEmbedding,
    FilterConfig,
    HashedRandomEmbedding,
    OneHotEmbedding,
    combined_score,
    compute_idf,
    filter_top_fraction,
    greedy_match_f1,
    make_embedder,
    score_pair,
    trigram_scorer,
)


# token-overlap oracle for the one-hot case
def overlap_prf(cand, ref):
    ref_set = set(ref)
    cand_set = set(cand)
    p = sum(t in ref_set for t in cand) / len(cand)
    r = sum(t in cand_set for t in ref) / len(ref)
    f1 = 0.0 if p + r == 0 else 2 * p * r / (p + r)
    return p, r, f1


def test_identical_sentences_score_one():
    tokens = "pt stable on cpap".split()
    assert greedy_match_f1(tokens, tokens, OneHotEmbedding()) == (1.0, 1.0, 1.0)
    assert greedy_match_f1(tokens, tokens, HashedRandomEmbedding(seed=1)) == pytest.approx(
        (1.0, 1.0, 1.0)
    )


def test_half_overlap_hand_value():
    got = greedy_match_f1(["a", "b"], ["a", "c"], OneHotEmbedding())
    assert got == (0.5, 0.5, 0.5)


def test_disjoint_vocabularies_score_zero():
    got = greedy_match_f1(["a", "b"], ["c", "d"], OneHotEmbedding())
    assert got == (0.0, 0.0, 0.0)


def test_empty_side_is_an_error():
    with pytest.raises(ValueError):
        greedy_match_f1([], ["a"], OneHotEmbedding())
    with pytest.raises(ValueError):
        greedy_match_f1(["a"], [], OneHotEmbedding())


tokens_strategy = st.lists(st.sampled_from("abcdefgh"), min_size=1, max_size=8)


@given(tokens_strategy, tokens_strategy)
def test_onehot_matches_token_overlap_oracle(cand, ref):
    got = greedy_match_f1(cand, ref, OneHotEmbedding())
    assert got == pytest.approx(overlap_prf(cand, ref), abs=1e-12)


@given(tokens_strategy, tokens_strategy)
def test_swapping_sides_swaps_precision_and_recall(cand, ref):
    embedder = OneHotEmbedding()
    p1, r1, f1 = greedy_match_f1(cand, ref, embedder)
    p2, r2, f2 = greedy_match_f1(ref, cand, embedder)
    assert (p1, r1) == (r2, p2)
    assert f1 == pytest.approx(f2, abs=1e-12)


def test_idf_weights_change_the_mean():
    idf = {"the": 0.0, "cpap": 2.0}
    got = greedy_match_f1(["the", "cpap"], ["cpap"], OneHotEmbedding(), idf=idf)
    assert got[0] == pytest.approx(1.0)  # 'the' carries no weight


def test_compute_idf_prefers_rare_tokens():
    idf = compute_idf(["the cpap", "the vent", "the labs"])
    assert idf["cpap"] > idf["the"]


# ---------------------------------------------------------------------------
# combining scores


def test_equal_weights_average():
    assert combined_score({"A": 0.8, "B": 0.6}, {"A": 0.5, "B": 0.5}) == pytest.approx(0.7)


def test_single_scorer_is_identity():
    assert combined_score({"A": 0.42}, {"A": 1.0}) == pytest.approx(0.42)


def test_full_weight_on_one_scorer_ignores_the_other():
    assert combined_score({"A": 0.9, "B": 0.1}, {"A": 1.0, "B": 0.0}) == pytest.approx(0.9)


def test_unknown_scorer_name_is_a_configuration_error():
    with pytest.raises(ConfigurationError):
        combined_score({"A": 0.9}, {"missing": 1.0})
    with pytest.raises(ConfigurationError):
        score_pair("x", "y", {"trigram": trigram_scorer}, {"missing": 1.0})


def test_score_pair_reports_per_scorer_and_combined():
    scores = score_pair(
        "pt stable on cpap",
        "pt stable on cpap",
        {"embedding": EmbeddingScorer(OneHotEmbedding()), "trigram": trigram_scorer},
        {"embedding": 0.5, "trigram": 0.5},
    )
    assert scores["embedding"] == pytest.approx(1.0)
    assert scores["trigram"] == pytest.approx(1.0)
    assert scores["combined"] == pytest.approx(1.0)


# ---------------------------------------------------------------------------
# top-fraction filtering


def test_twenty_pairs_keep_exactly_three():
    scored = [(f"p{i}", score) for i, score in enumerate(
        [0.1, 0.9, 0.3, 0.8, 0.2, 0.7, 0.05, 0.6, 0.4, 0.5,
         0.11, 0.12, 0.13, 0.14, 0.15, 0.16, 0.17, 0.18, 0.19, 0.21]
    )]
    kept = filter_top_fraction(scored, 0.15)
    assert kept == ["p1", "p3", "p5"]  # scores 0.9, 0.8, 0.7 in input order


def test_single_pair_is_kept():
    assert filter_top_fraction([("only", 0.01)], 0.15) == ["only"]


def test_ties_resolve_by_input_order():
    scored = [(i, 1.0) for i in range(10)]
    assert filter_top_fraction(scored, 0.15) == [0, 1]


def test_empty_input():
    assert filter_top_fraction([], 0.15) == []


def test_kept_scores_dominate_discarded_for_all_sizes():
    rng = np.random.default_rng(123)
    for n in range(1, 101):
        scores = rng.random(n)
        scored = [(i, float(s)) for i, s in enumerate(scores)]
        kept = filter_top_fraction(scored, 0.15)
        assert len(kept) == math.ceil(0.15 * n)
        kept_set = set(kept)
        discarded = [s for i, s in scored if i not in kept_set]
        if discarded and kept:
            assert min(scores[i] for i in kept) >= max(discarded)
        assert kept == sorted(kept)


def test_keep_fraction_must_be_in_range():
    with pytest.raises(ValueError):
        filter_top_fraction([("x", 1.0)], 0.0)


def test_filter_config_defaults_match_the_85_percent_cut():
    assert FilterConfig().keep_fraction == 0.15


def test_filter_config_validates_weights():
    with pytest.raises(ConfigurationError):
        FilterConfig(weights={"embedding": 0.9, "trigram": 0.9})
    with pytest.raises(ConfigurationError):
        FilterConfig(keep_fraction=0.0)


# ---------------------------------------------------------------------------
# embedding providers


def test_embedder_names_parse():
    assert isinstance(make_embedder("onehot"), OneHotEmbedding)
    assert isinstance(make_embedder("hashed-random:7"), HashedRandomEmbedding)
    assert isinstance(make_embedder("hashed-random(7)"), HashedRandomEmbedding)
    with pytest.raises(ConfigurationError):
        make_embedder("word2vec")
    with pytest.raises(ConfigurationError):
        make_embedder("hashed-random(x)")


def test_hashed_vectors_are_stable_and_unit_norm():
    a = HashedRandomEmbedding(seed=3)
    b = HashedRandomEmbedding(seed=3)
    va, vb = a.embed("cpap"), b.embed("cpap")
    assert np.array_equal(va, vb)
    assert np.linalg.norm(va) == pytest.approx(1.0)
    assert not np.array_equal(a.embed("cpap"), a.embed("vent"))


def test_file_embeddings_load_and_fall_back(tmp_path):
    path = tmp_path / "vectors.txt"
    path.write_text("cpap 1.0 0.0\nvent 0.0 1.0\n", encoding="utf-8")
    emb = FileEmbedding(path)
    assert emb.embed("cpap").tolist() == [1.0, 0.0]
    oov = emb.embed("unseen")
    assert oov.shape == (2,)
    assert np.array_equal(oov, emb.embed("unseen"))


def test_file_embeddings_reject_bad_rows(tmp_path):
    path = tmp_path / "vectors.txt"
    path.write_text("cpap 1.0 zero\n", encoding="utf-8")
    with pytest.raises(ParseError):
        FileEmbedding(path)
    path.write_text("cpap 1.0 2.0\nvent 1.0\n", encoding="utf-8")
    with pytest.raises(ParseError) as exc:
        FileEmbedding(path)
    assert ":2" in str(exc.value)

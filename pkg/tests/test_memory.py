import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from mnmt import numcore as nc
from mnmt.aligner import DictEntry, TranslationDictionary
from mnmt.corpus import ParallelCorpus, build_vocab, encode
from mnmt.errors import EmptyMemory, InvalidBeta, NoTrainableSteps
from mnmt.memory import (
    VARIANTS,
    GlobalMemory,
    LocalMemory,
    MemoryAttentionParams,
    MemoryElement,
    MemoryHook,
    MemoryTrainConfig,
    MemoryVariant,
    build_global_memory,
    build_local_memory,
    combine_posteriors,
    example_loss,
    lexical_posterior,
    memory_attention,
    memory_cross_entropy,
    memory_epoch,
    memory_relevance,
    memory_vectors,
    prepare_examples,
    train_memory_attention,
)
from mnmt.nmt import ModelParams, NMTConfig, beam_search
from mnmt.translate import Translator

from oracles import finite_difference, relative_error

CORPUS = ParallelCorpus.from_lists([("a b c d", "x y z w"), ("b c", "y z")])
SV = build_vocab(CORPUS, "source", 20)
TV = build_vocab(CORPUS, "target", 20)
CFG = NMTConfig(len(SV), len(TV), emb_dim=4, hidden=3, attn_dim=3, readout=4)


def params(seed=0):
    return ModelParams.init(NMTConfig(**{**CFG.to_dict(), "seed": seed, "init_scale": 0.5}))


def dictionary(*rows):
    return TranslationDictionary(DictEntry(*r) for r in rows)


def gmem(*rows):
    return GlobalMemory(MemoryElement(*r) for r in rows)


def theta(variant="sy_xy", seed=0, scale=0.5):
    return MemoryAttentionParams.init(MemoryVariant(variant), CFG, attn_dim=5, seed=seed, scale=scale)


# -- global and local memory ----------------------------------------------------

def test_global_memory_copies_top_k():
    d = dictionary(("a", "x", 0.75, 1.0), ("a", "y", 0.25, 1.0))
    assert [(e.source, e.target) for e in build_global_memory(d, 2).elements()] == [("a", "x"), ("a", "y")]
    assert [(e.source, e.target) for e in build_global_memory(d, 1).elements()] == [("a", "x")]
    assert len(build_global_memory(dictionary(), 2)) == 0


def test_global_memory_is_read_only():
    g = gmem(("a", "x", 1.0, 1.0))
    with pytest.raises(TypeError):
        g._by_source["b"] = ()
    with pytest.raises(AttributeError):
        g.lookup("a")[0].target = "y"


def test_global_memory_file_round_trip(tmp_path):
    g = gmem(("b", "y", 0.5, 1.0), ("a", "x", 1.0, 0.25))
    g.save(tmp_path / "m.tsv", header="#mnmt h")
    assert list(GlobalMemory.load(tmp_path / "m.tsv").elements()) == list(g.elements())


ANN = np.arange(12, dtype=np.float64).reshape(4, 3) ** 1.5


def test_local_memory_singleton_is_identity():
    local = build_local_memory(["a"], ANN[:1], gmem(("a", "x", 1.0, 0.3)), TV)
    np.testing.assert_array_equal(local.vectors[0], ANN[0])


def test_local_memory_symmetric_occurrences():
    local = build_local_memory(["a", "b", "a"], ANN[:3], gmem(("a", "x", 1.0, 0.6)), TV)
    np.testing.assert_allclose(local.vectors[local.index["x"]], 0.5 * ANN[0] + 0.5 * ANN[2], atol=1e-12)


def test_local_memory_renormalizes_distinct_sources():
    g = gmem(("b", "z", 1.0, 0.6), ("c", "z", 1.0, 0.2))
    local = build_local_memory(["b", "c"], ANN[:2], g, TV)
    np.testing.assert_allclose(local.vectors[0], 0.75 * ANN[0] + 0.25 * ANN[1], atol=1e-12)
    np.testing.assert_allclose(local.merge_weights(0), [0.75, 0.25], atol=1e-12)


def test_local_memory_drops_out_of_vocabulary_targets_and_skipped_positions():
    g = gmem(("a", "x", 1.0, 1.0), ("a", "qqq", 0.5, 1.0), ("b", "y", 1.0, 1.0))
    local = build_local_memory(["a", "b"], ANN[:2], g, TV, skip_positions={1})
    assert local.targets == ["x"]
    assert len(build_local_memory(["d"], ANN[:1], g, TV)) == 0


def test_local_memory_invariants():
    g = gmem(("a", "x", 0.6, 0.5), ("a", "y", 0.4, 0.2), ("b", "y", 1.0, 0.8), ("c", "x", 1.0, 0.1))
    local = build_local_memory(["a", "b", "c", "a"], ANN, g, TV)
    assert len(set(local.targets)) == len(local.targets)
    assert sorted(local.index.values()) == list(range(len(local)))
    for k in range(len(local)):
        assert abs(local.merge_weights(k).sum() - 1.0) < 1e-12


# -- relevance, attention, combination ---------------------------------------------

def _local(targets):
    ids = np.array([TV.id(t) for t in targets])
    return LocalMemory(list(targets), ids, np.zeros((len(targets), 2 * CFG.hidden)),
                       [[(0, 1.0)]] * len(targets), {t: k for k, t in enumerate(targets)})


def test_zero_theta_gives_zero_scores():
    th = theta(scale=0.0)
    rng = np.random.default_rng(0)
    scores = memory_relevance(rng.normal(size=(2, 3)), rng.normal(size=(2, 4)), rng.normal(size=(5, 10)), th)
    assert scores.shape == (2, 5)
    assert not scores.data.any()


def test_prev_word_term_vanishes_with_zero_weights():
    a, b = theta("s_y", seed=3), theta("sy_y", seed=3)
    for n in ("v", "W_s", "W_u"):
        b[n].data[...] = a[n].data
    b["W_y"].data[...] = 0.0
    rng = np.random.default_rng(1)
    s, y, u = rng.normal(size=(3, 3)), rng.normal(size=(3, 4)), rng.normal(size=(4, 4))
    np.testing.assert_array_equal(memory_relevance(s, y, u, a).data, memory_relevance(s, y, u, b).data)


@pytest.mark.parametrize("variant", VARIANTS)
def test_relevance_matches_formula(variant):
    th = theta(variant, seed=5)
    rng = np.random.default_rng(2)
    dim_u = th["W_u"].shape[0]
    s, y, u = rng.normal(size=(2, 3)), rng.normal(size=(2, 4)), rng.normal(size=(3, dim_u))
    got = memory_relevance(s, y, u, th).data
    for i in range(2):
        for k in range(3):
            pre = s[i] @ th["W_s"].data + u[k] @ th["W_u"].data
            if th.variant.uses_prev_word:
                pre = pre + y[i] @ th["W_y"].data
            assert abs(got[i, k] - th["v"].data @ np.tanh(pre)) < 1e-12


def test_memory_attention_examples():
    np.testing.assert_array_equal(memory_attention(np.array([[0.7]])).data, [[1.0]])
    np.testing.assert_allclose(memory_attention(np.full((1, 4), -0.3)).data, np.full((1, 4), 0.25))
    np.testing.assert_allclose(memory_attention(np.array([[np.log(2), 0.0]])).data, [[2 / 3, 1 / 3]],
                               atol=1e-15)
    with pytest.raises(EmptyMemory):
        memory_attention(np.zeros((1, 0)))


def test_combine_examples():
    p = np.array([[0.5, 0.5]])
    local = LocalMemory(["w"], np.array([0]), np.zeros((1, 2)), [[(0, 1.0)]], {"w": 0})
    np.testing.assert_allclose(combine_posteriors(p, np.array([[1.0]]), local, 0.4), [[0.7, 0.3]])
    np.testing.assert_array_equal(combine_posteriors(p, np.array([[1.0]]), local, 0.0), p)
    np.testing.assert_array_equal(combine_posteriors(p, np.array([[1.0]]), local, 1.0), [[1.0, 0.0]])
    empty = LocalMemory([], np.array([], dtype=np.int64), np.zeros((0, 2)), [], {})
    np.testing.assert_array_equal(combine_posteriors(p, np.zeros((1, 0)), empty, 0.9), p)
    with pytest.raises(InvalidBeta):
        combine_posteriors(p, np.array([[1.0]]), local, 1.5)


@settings(max_examples=60, deadline=None)
@given(st.integers(0, 10_000), st.floats(0.01, 1.0))
def test_monotone_promotion(seed, beta):
    rng = np.random.default_rng(seed)
    p = rng.dirichlet(np.ones(10))[None]
    local = _local(["x", "y", "z"])
    alpha = rng.dirichlet(np.ones(3))[None]
    out = combine_posteriors(p, alpha, local, beta)
    k = int(alpha.argmax())
    w = local.target_ids[k]
    assert out[0, w] == pytest.approx(beta * alpha[0, k] + (1 - beta) * p[0, w], abs=1e-15)
    if alpha[0, k] > p[0, w]:
        assert out[0, w] > p[0, w]
    assert abs(out.sum() - 1.0) < 1e-9


def test_memory_vectors_by_variant():
    local = build_local_memory(["a"], ANN[:1, :], gmem(("a", "x", 1.0, 1.0)), TV)
    emb = np.arange(len(TV) * 4, dtype=np.float64).reshape(-1, 4)
    assert memory_vectors(local, emb, MemoryVariant("s_y")).shape == (1, 4)
    np.testing.assert_array_equal(memory_vectors(local, emb, MemoryVariant("sy_xy"))[0],
                                  np.concatenate([emb[TV.id("x")], ANN[0]]))


def test_theta_checkpoint_round_trip(tmp_path):
    th = theta("s_xy", seed=9)
    th.save(tmp_path / "t.bin")
    back = MemoryAttentionParams.load(tmp_path / "t.bin")
    assert back.variant == th.variant and back.checksum() == th.checksum()


# -- lexical comparator --------------------------------------------------------

def test_lexical_posterior_examples():
    d = dictionary(("a", "x", 1.0, 1.0), ("b", "y", 1.0, 1.0))
    single = lexical_posterior(np.array([[1.0]]), d, ["a"], TV)
    assert single[0, TV.id("x")] == 1.0 and single.sum() == 1.0
    both = lexical_posterior(np.array([[0.5, 0.5]]), d, ["a", "b"], TV)
    assert both[0, TV.id("x")] == 0.5 and both[0, TV.id("y")] == 0.5
    none = lexical_posterior(np.array([[1.0]]), d, ["d"], TV)
    np.testing.assert_allclose(none, np.full((1, len(TV)), 1 / len(TV)))


# -- memory training ---------------------------------------------------------

PAIRS = [(("a", "b", "c"), ("x", "y", "z")), (("b", "c"), ("y", "z"))]
GMEM = gmem(("a", "x", 1.0, 1.0), ("b", "y", 1.0, 1.0), ("c", "z", 0.5, 1.0), ("c", "w", 0.5, 1.0))


@pytest.mark.parametrize("variant", VARIANTS)
def test_memory_loss_gradient(variant):
    p = params(1)
    examples = prepare_examples(PAIRS, p, GMEM, SV, TV, MemoryVariant(variant))
    th = theta(variant, seed=2)
    plist = th.list()
    with nc.Tape() as tape:
        loss = example_loss(examples[0], th) + example_loss(examples[1], th)
    analytic = tape.gradient(loss, plist)

    def value():
        return sum(float(example_loss(ex, th).data) for ex in examples)

    numeric = finite_difference(value, [t.data for t in plist])
    assert relative_error(analytic, numeric) < 1e-5


def test_skip_rule_marks_unk_eos_and_absent_words():
    examples = prepare_examples([(("a", "d"), ("x", "w", "qqq"))], params(), GMEM, SV, TV,
                                MemoryVariant("s_y"))
    # x is in memory; w has no source in the sentence; qqq is UNK; EOS always skipped
    np.testing.assert_array_equal(examples[0].weights, [1.0, 0.0, 0.0, 0.0])


def test_all_skip_leaves_theta_unchanged():
    p = params(2)
    pairs = [(("a", "b"), ("z", "w")), (("a",), ("y",))]
    th = theta("sy_xy", seed=4)
    before = th.checksum()
    examples = prepare_examples(pairs, p, GMEM, SV, TV, th.variant)
    state = nc.AdaDeltaState.for_params(th.list())
    assert memory_epoch(examples, th, state, MemoryTrainConfig(), np.random.default_rng(0)) == 0
    with pytest.raises(NoTrainableSteps):
        train_memory_attention(pairs, p, GMEM, SV, TV, th.variant, MemoryTrainConfig(), theta=th)
    assert th.checksum() == before


def test_capacity_single_pair():
    p = params(3)
    pairs = [(("c",), ("w",))]
    cfg = MemoryTrainConfig(epochs=300, batch=1, attn_dim=8, patience=300)
    th, report = train_memory_attention(pairs, p, GMEM, SV, TV, MemoryVariant("sy_xy"), cfg)
    assert report.train_xent[-1] < 0.05
    assert report.train_xent[-1] < report.train_xent[0]
    (ex,) = prepare_examples(pairs, p, GMEM, SV, TV, th.variant)
    alpha = memory_attention(memory_relevance(ex.s_prev, ex.y_prev_emb, ex.u, th)).data
    assert alpha[0, ex.gold[0]] > 0.95


def test_training_leaves_model_untouched():
    p = params(4)
    before = p.checksum()
    train_memory_attention(PAIRS, p, GMEM, SV, TV, MemoryVariant("s_xy"), MemoryTrainConfig(epochs=2))
    assert p.checksum() == before


def test_cross_entropy_requires_trainable_steps():
    with pytest.raises(NoTrainableSteps):
        memory_cross_entropy([], theta())


# -- decoding with the memory hook --------------------------------------------

@pytest.mark.parametrize("variant", VARIANTS)
def test_beta_zero_is_token_identical_to_baseline(variant):
    p = params(5)
    th = theta(variant, seed=6)
    for src in (["a", "b", "c"], ["c", "a"], ["d"], ["b", "b", "a", "c"]):
        base = Translator(p, SV, TV).translate(src).hypothesis
        hooked = Translator(p, SV, TV, GMEM, th, beta=0.0).translate(src).hypothesis
        assert base.tokens == hooked.tokens


def test_translation_leaves_global_memory_unchanged(tmp_path):
    p = params(6)
    GMEM.save(tmp_path / "before.tsv")
    Translator(p, SV, TV, GMEM, theta(), beta=0.5).translate_all([["a", "b"], ["c"]])
    GMEM.save(tmp_path / "after.tsv")
    assert (tmp_path / "before.tsv").read_bytes() == (tmp_path / "after.tsv").read_bytes()


def test_beta_one_forces_memory_words():
    p = params(7)
    th = theta("s_y", seed=8)
    hook = MemoryHook(th, p, beta=1.0)

    def posterior_hook(enc):
        return hook.step_fn(build_local_memory(["a"], enc.h.data[0], GMEM, TV))

    hyp = beam_search(encode(["a"], SV), p, beam=3, max_len=4, posterior_hook=posterior_hook)[0]
    assert set(hyp.tokens) == {TV.id("x")}

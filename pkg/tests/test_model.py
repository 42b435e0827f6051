"""Encoder forward passes, conditioning modes, and checkpointing."""

import numpy as np
import pytest

from condctc.core import PosteriorLattice, Vocabulary, collapse
from condctc.decode import BeamConfig
from condctc.errors import DataError, InfeasibleTargetError, NumericError
from condctc.lm import train_ngram
from condctc.model import (
    BestPathConditioning,
    ExpectationConditioning,
    InjectedConditioning,
    ModelConfig,
    NoConditioning,
    OracleConditioning,
    SearchedConditioning,
    condition_best_path,
    condition_expectation,
    condition_oracle,
    condition_searched,
    decode_output,
    embed_path,
    forward,
    load_model,
    multipass_decode,
    new_model,
    save_model,
    window_adjoint,
    window_concat,
)

A, B = 1, 2


@pytest.fixture
def vocab():
    return Vocabulary.from_labels(["a", "b"])


@pytest.fixture
def model(vocab):
    cfg = ModelConfig(
        input_dim=3,
        vocab_size=3,
        dim=4,
        num_layers=3,
        context_radius=1,
        cond_layers=(1, 2),
        seed=0,
    )
    return new_model(cfg, vocab)


@pytest.fixture
def features():
    return np.random.default_rng(2).normal(size=(7, 3))


def one_hot_lattice(path, k=3):
    probs = np.zeros((len(path), k))
    probs[np.arange(len(path)), path] = 1.0
    return PosteriorLattice(probs)


class TestModelConfig:
    def test_cond_layers_must_be_interior(self):
        with pytest.raises(ValueError):
            ModelConfig(input_dim=2, vocab_size=3, num_layers=3, cond_layers=(3,))
        with pytest.raises(ValueError):
            ModelConfig(input_dim=2, vocab_size=3, num_layers=3, cond_layers=(0,))
        with pytest.raises(ValueError):
            ModelConfig(input_dim=2, vocab_size=3, num_layers=4, cond_layers=(2, 1))

    def test_new_model_is_seeded(self, vocab):
        cfg = ModelConfig(input_dim=3, vocab_size=3, seed=5)
        m1, m2 = new_model(cfg, vocab), new_model(cfg, vocab)
        for name in m1.params:
            assert np.array_equal(m1.params[name], m2.params[name])


class TestWindow:
    def test_concat_places_neighbours(self):
        x = np.arange(8, dtype=float).reshape(4, 2)
        c = window_concat(x, 1)
        assert c.shape == (4, 6)
        assert np.array_equal(c[0, :2], [0, 0])  # left pad
        assert np.array_equal(c[0, 2:4], x[0])
        assert np.array_equal(c[0, 4:], x[1])
        assert np.array_equal(c[3, 4:], [0, 0])  # right pad

    def test_adjoint_is_transpose(self):
        rng = np.random.default_rng(3)
        x = rng.normal(size=(5, 3))
        g = rng.normal(size=(5, 9))
        lhs = (window_concat(x, 1) * g).sum()
        rhs = (x * window_adjoint(g, 1)).sum()
        assert lhs == pytest.approx(rhs, rel=1e-12)


class TestConditioningPrimitives:
    def test_one_hot_equivalence_is_bitwise(self):
        rng = np.random.default_rng(5)
        weights = rng.normal(size=(4, 3))
        for path in [(0, 1, 2, 0), (2, 2, 0, 1), (0, 0, 0, 0)]:
            lattice = one_hot_lattice(path)
            h_exp = condition_expectation(lattice, weights)
            h_bp, bp_path = condition_best_path(lattice, weights)
            assert np.array_equal(h_exp, h_bp)
            assert bp_path == path

    def test_expectation_matches_explicit_loop(self):
        rng = np.random.default_rng(7)
        probs = rng.uniform(0.1, 1.0, size=(6, 3))
        probs /= probs.sum(axis=1, keepdims=True)
        lattice = PosteriorLattice(probs)
        weights = rng.normal(size=(4, 3))
        h = condition_expectation(lattice, weights)
        for t in range(6):
            manual = sum(weights[:, k] * probs[t, k] for k in range(3))
            assert np.allclose(h[t], manual, atol=1e-13)

    def test_best_path_commits_to_argmax(self):
        rng = np.random.default_rng(9)
        weights = rng.normal(size=(4, 2))
        lattice = PosteriorLattice(np.array([[0.6, 0.4], [0.3, 0.7]]))
        h, path = condition_best_path(lattice, weights)
        assert path == (0, 1)
        assert np.array_equal(h[0], weights[:, 0])
        assert np.array_equal(h[1], weights[:, 1])

    def test_uniform_rows_tie_to_blank(self):
        weights = np.ones((4, 2))
        lattice = PosteriorLattice(np.full((3, 2), 0.5))
        _, path = condition_best_path(lattice, weights)
        assert path == (0, 0, 0)

    def test_searched_beats_greedy_on_divergence_fixture(self):
        rng = np.random.default_rng(11)
        weights = rng.normal(size=(4, 2))
        lattice = PosteriorLattice(np.array([[0.6, 0.4], [0.6, 0.4]]))
        cfg = BeamConfig(width=4, lm_weight=0.0, length_bonus=0.0)
        h, path, text = condition_searched(lattice, weights, None, cfg)
        assert text == (A,)
        assert collapse(path) == text
        assert path == (0, A)  # lexicographically earliest alignment of (a)
        h_bp, bp_path = condition_best_path(lattice, weights)
        assert bp_path == (0, 0)
        assert not np.array_equal(h, h_bp)

    def test_empty_search_result_embeds_blanks(self):
        rng = np.random.default_rng(13)
        weights = rng.normal(size=(4, 2))
        lattice = PosteriorLattice(np.array([[0.9, 0.1], [0.9, 0.1]]))
        cfg = BeamConfig(width=4, lm_weight=0.0, length_bonus=0.0)
        h, path, text = condition_searched(lattice, weights, None, cfg)
        assert text == ()
        assert path == (0, 0)
        assert np.array_equal(h, embed_path((0, 0), weights))

    def test_oracle_conditioning(self):
        rng = np.random.default_rng(15)
        weights = rng.normal(size=(4, 3))
        lattice = one_hot_lattice((A, 0, B))
        h, path = condition_oracle((A, B), lattice, weights)
        assert collapse(path) == (A, B)
        assert np.array_equal(h, embed_path(path, weights))
        soft = PosteriorLattice(np.full((3, 3), 1 / 3))
        h_empty, empty_path = condition_oracle((), soft, weights)
        assert empty_path == (0, 0, 0)
        assert np.array_equal(h_empty, embed_path((0, 0, 0), weights))
        with pytest.raises(InfeasibleTargetError):
            condition_oracle((A, A, B, B), lattice, weights)


class TestForward:
    def test_zero_conditioning_weights_are_a_noop(self, model, features):
        for n in model.config.cond_layers:
            model.params[f"cond{n}.w"][:] = 0.0
        final_none = forward(model, features, NoConditioning()).final
        final_exp = forward(model, features, ExpectationConditioning()).final
        assert np.array_equal(final_none.probs, final_exp.probs)

    def test_lattices_are_normalized(self, model, features):
        trace = forward(model, features, ExpectationConditioning())
        assert np.allclose(trace.final.probs.sum(axis=1), 1.0, atol=1e-6)
        for lattice in trace.intermediates.values():
            assert np.allclose(lattice.probs.sum(axis=1), 1.0, atol=1e-6)
        assert set(trace.intermediates) == {1, 2}

    def test_conditioning_texts_collapse_consistently(self, model, features, vocab):
        lm = train_ngram([(A, B), (B, A)], vocab, order=2, delta=1.0)
        beam = BeamConfig(width=4, lm_weight=0.2, length_bonus=0.0)
        for mode in (
            SearchedConditioning(beam, lm),
            OracleConditioning((A,)),
            InjectedConditioning((B,)),
        ):
            trace = forward(model, features, mode)
            for n, path in trace.alignments.items():
                if n in trace.fallback_layers:
                    continue
                assert collapse(path) == trace.cond_texts[n]

    def test_infeasible_injection_falls_back_to_best_path(self, model):
        rng = np.random.default_rng(17)
        feats = rng.normal(size=(2, 3))
        long_text = (A, B, A, B, A)  # cannot fit into 2 frames
        trace = forward(model, feats, InjectedConditioning(long_text))
        assert trace.fallback_layers == (1, 2)
        for n, path in trace.alignments.items():
            z = trace.intermediates[n]
            assert path == tuple(int(k) for k in np.argmax(z.probs, axis=1))

    def test_oracle_infeasible_raises(self, model):
        rng = np.random.default_rng(19)
        feats = rng.normal(size=(2, 3))
        with pytest.raises(InfeasibleTargetError):
            forward(model, feats, OracleConditioning((A, B, A)))

    def test_rejects_bad_features(self, model):
        with pytest.raises(ValueError):
            forward(model, np.zeros((3, 5)))
        with pytest.raises(ValueError):
            forward(model, np.full((3, 3), np.nan))

    def test_nan_parameters_surface_with_layer_index(self, model, features):
        model.params["layer2.w"][0, 0] = np.nan
        with pytest.raises(NumericError, match="layer 2"):
            forward(model, features)

    def test_searched_mode_requires_lm_or_zero_weight(self):
        with pytest.raises(ValueError):
            SearchedConditioning(BeamConfig(lm_weight=0.5), None)
        SearchedConditioning(BeamConfig(lm_weight=0.0), None)


class TestMultipass:
    def test_single_pass_equals_forward_decode(self, model, features):
        results = multipass_decode(model, features, 1)
        trace = forward(model, features, ExpectationConditioning())
        assert results[0][0] == decode_output(trace.final)
        assert np.array_equal(results[0][1].final.probs, trace.final.probs)

    def test_later_passes_inject_previous_output(self, model, features):
        results = multipass_decode(model, features, 3)
        for m in range(1, 3):
            prev = results[m - 1][0]
            assert all(t == prev for t in results[m][1].cond_texts.values())

    def test_fixed_point_stability(self, model, features):
        results = multipass_decode(model, features, 4)
        outputs = [y for y, _ in results]
        for m in range(1, 3):
            if outputs[m] == outputs[m - 1]:
                assert outputs[m + 1] == outputs[m]

    def test_passes_validation(self, model, features):
        with pytest.raises(ValueError):
            multipass_decode(model, features, 0)


class TestCheckpoint:
    def test_roundtrip_preserves_everything(self, model, features, tmp_path):
        path = tmp_path / "model.json"
        save_model(model, path)
        loaded = load_model(path)
        assert loaded.config == model.config
        assert loaded.vocab == model.vocab
        for name in model.params:
            assert np.array_equal(loaded.params[name], model.params[name])
        out1 = forward(model, features).final.probs
        out2 = forward(loaded, features).final.probs
        assert np.array_equal(out1, out2)

    def test_rejects_corruption(self, model, tmp_path):
        path = tmp_path / "model.json"
        save_model(model, path)
        import json

        payload = json.loads(path.read_text())
        payload["model_version"] = 99
        path.write_text(json.dumps(payload))
        with pytest.raises(DataError):
            load_model(path)

        payload["model_version"] = 1
        del payload["params"]["input.w"]
        path.write_text(json.dumps(payload))
        with pytest.raises(DataError):
            load_model(path)

    def test_missing_file(self, tmp_path):
        with pytest.raises(DataError):
            load_model(tmp_path / "nope.json")

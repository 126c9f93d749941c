import numpy as np
import pytest

from zoneinvest.labeling import LabeledDataset
from zoneinvest.neural import (CLASSIFIER, REGRESSOR, DivergenceError, auc,
                               forward, gap_at_k, init_model, load_model,
                               loss_and_gradients, save_model, score_and_rank,
                               scores, train)
from zoneinvest.sequences import Sequence, enumerate_sequences

from oracles import finite_difference_grads


def make_labeled(seqs, labels, values=None):
    labels = np.asarray(labels, dtype=int)
    values = np.asarray(values if values is not None else labels, dtype=float)
    return LabeledDataset(
        sequences=tuple(seqs), values=values, labels=labels,
        eta_ub=float(values.max()), eta_thr=float(values.max()),
        eta_bin=float(values[labels == 1].min()) if labels.any() else 0.0,
        pnr_max=1.0, thr_fact=0.0, population_size=len(seqs),
        norm_mean=float(values.mean()), norm_std=float(values.std()),
        forced_positive=False, degenerate_fit=False)


def zero_params(model):
    for name in model.params:
        model.params[name] = np.zeros_like(model.params[name])


class TestForward:
    def test_zero_parameters_classifier_scores_half(self):
        model = init_model(("a", "b", "c"), 4, CLASSIFIER, seed=1)
        zero_params(model)
        for seq in enumerate_sequences(("a", "b", "c"))[:3]:
            assert forward(model, seq) == 0.5

    def test_zero_parameters_regressor_scores_zero(self):
        model = init_model(("a", "b", "c"), 4, REGRESSOR, seed=1)
        zero_params(model)
        assert forward(model, Sequence(("b", "a", "c"))) == 0.0

    def test_unknown_zone_rejected(self):
        model = init_model(("a", "b"), 4, CLASSIFIER, seed=1)
        with pytest.raises(ValueError, match="embedding"):
            forward(model, Sequence(("a", "z"),))

    def test_matches_hand_unrolled_recurrence(self):
        model = init_model(("a", "b"), 2, CLASSIFIER, seed=0)
        p = model.params
        p["emb"] = np.array([[0.1, -0.2], [0.3, 0.05]])
        p["W_fe"] = np.array([[0.2, -0.1], [0.05, 0.3]])
        p["W_fd"] = np.array([[0.1, 0.0], [-0.2, 0.15]])
        p["b_f"] = np.array([0.05, -0.05])
        p["W_ie"] = np.array([[-0.3, 0.2], [0.1, 0.1]])
        p["W_id"] = np.array([[0.0, 0.25], [0.2, -0.1]])
        p["b_i"] = np.array([0.1, 0.0])
        p["W_oe"] = np.array([[0.15, 0.15], [-0.1, 0.2]])
        p["W_od"] = np.array([[0.3, -0.3], [0.0, 0.1]])
        p["b_o"] = np.array([-0.1, 0.2])
        p["W_ed"] = np.array([[0.25, 0.1], [-0.15, 0.05]])
        p["W_dd"] = np.array([[0.05, 0.2], [0.1, -0.25]])
        p["b_c"] = np.array([0.0, 0.1])
        p["W_ff"] = np.array([0.4, -0.5])
        p["b_ff"] = np.array([0.02])

        def sig(x):
            return 1.0 / (1.0 + np.exp(-x))

        d = np.zeros(2)
        c = np.zeros(2)
        for zone in ("b", "a"):
            e = p["emb"][{"a": 0, "b": 1}[zone]]
            f = sig(p["W_fe"] @ e + p["W_fd"] @ d + p["b_f"])
            i = sig(p["W_ie"] @ e + p["W_id"] @ d + p["b_i"])
            o = sig(p["W_oe"] @ e + p["W_od"] @ d + p["b_o"])
            g = np.tanh(p["W_ed"] @ e + p["W_dd"] @ d + p["b_c"])
            c = f * c + i * g
            d = o * np.tanh(c)
        by_hand = sig(p["W_ff"] @ d + p["b_ff"][0])
        assert forward(model, Sequence(("b", "a"))) == pytest.approx(
            by_hand, abs=1e-10)

    def test_forward_deterministic(self):
        model = init_model(tuple("abcd"), 8, CLASSIFIER, seed=5)
        seq = Sequence(("c", "a", "d", "b"))
        assert forward(model, seq) == forward(model, seq)


class TestGradients:
    @pytest.mark.parametrize("head", [CLASSIFIER, REGRESSOR])
    def test_bptt_matches_finite_differences(self, head):
        rng = np.random.default_rng(20)
        model = init_model(tuple("abcd"), 4, head, seed=3)
        idx = np.array([[0, 1, 2], [2, 1, 3], [3, 0, 1], [1, 2, 0], [0, 3, 2]])
        targets = (np.array([1.0, 0.0, 1.0, 0.0, 1.0]) if head == CLASSIFIER
                   else rng.normal(size=5))
        _, analytic = loss_and_gradients(model.params, idx, targets, head)

        def loss_fn(params):
            from zoneinvest.neural import _batch_loss
            return _batch_loss(params, idx, targets, head)

        numeric = finite_difference_grads(loss_fn, model.params, eps=1e-6)
        for name in model.params:
            scale = max(np.abs(numeric[name]).max(), 1e-8)
            err = np.abs(analytic[name] - numeric[name]).max() / scale
            assert err < 1e-4, f"{head} {name}: rel err {err:.2e}"


def separable_dataset():
    seqs = enumerate_sequences(tuple("abcde"))[::6][:20]
    labels = [1 if s.order[0] == "a" else 0 for s in seqs]
    return make_labeled(seqs, labels)


class TestTraining:
    def test_overfits_separable_sequences(self):
        ds = separable_dataset()
        model, history = train(ds, emb_size=16, lr=1e-3, batch_size=4,
                               max_epochs=300, seed=1, validation_fraction=0.0)
        final_bce = history[-1][1]
        assert final_bce < 0.05
        assert auc(scores(model, ds.sequences), ds.labels) == 1.0

    def test_loss_decreases_on_first_epoch(self):
        ds = separable_dataset()
        _, history = train(ds, emb_size=8, lr=1e-3, batch_size=4,
                           max_epochs=1, seed=2, validation_fraction=0.0)
        assert history[1][1] < history[0][1]

    def test_zero_learning_rate_is_a_noop(self):
        ds = separable_dataset()
        model, history = train(ds, emb_size=8, lr=0.0, batch_size=4,
                               max_epochs=3, seed=3, validation_fraction=0.0)
        fresh = init_model(model.vocab, 8, CLASSIFIER,
                           seed=np.random.default_rng(3).integers(2 ** 31))
        for name in fresh.params:
            assert np.array_equal(model.params[name], fresh.params[name])
        losses = [h[1] for h in history]
        assert max(losses) - min(losses) == 0.0

    def test_single_class_rejected(self):
        seqs = enumerate_sequences(("a", "b", "c"))
        with pytest.raises(ValueError, match="class"):
            train(make_labeled(seqs, [1] * 6), validation_fraction=0.0)

    def test_deterministic_per_seed(self):
        ds = separable_dataset()
        m1, h1 = train(ds, emb_size=8, batch_size=8, max_epochs=5, seed=9)
        m2, h2 = train(ds, emb_size=8, batch_size=8, max_epochs=5, seed=9)
        assert h1 == h2
        for name in m1.params:
            assert np.array_equal(m1.params[name], m2.params[name])

    @pytest.mark.filterwarnings("ignore::RuntimeWarning")
    def test_divergence_raises_with_last_state(self):
        ds = separable_dataset()
        with pytest.raises(DivergenceError) as err:
            train(ds, emb_size=8, lr=1e308, batch_size=4, max_epochs=5,
                  seed=4, validation_fraction=0.0)
        assert err.value.model is not None
        assert all(np.all(np.isfinite(a))
                   for a in err.value.model.params.values())

    def test_permutation_sensitivity_after_training(self):
        ds = separable_dataset()
        model, _ = train(ds, emb_size=16, lr=1e-3, batch_size=4,
                         max_epochs=120, seed=1, validation_fraction=0.0)
        a = forward(model, Sequence(("a", "b", "c", "d", "e")))
        b = forward(model, Sequence(("b", "a", "c", "d", "e")))
        assert a != b

    def test_regressor_trains_on_normalized_values(self):
        seqs = enumerate_sequences(tuple("abcd"))[:16]
        values = np.linspace(10.0, 40.0, 16)
        ds = make_labeled(seqs, [0] * 15 + [1], values=values)
        model, history = train(ds, emb_size=8, batch_size=8, max_epochs=40,
                               seed=5, validation_fraction=0.0,
                               head_kind=REGRESSOR)
        assert model.target_norm == (ds.norm_mean, ds.norm_std)
        assert history[-1][1] < history[0][1]


class TestRanking:
    def test_full_ordering(self):
        model = init_model(tuple("abc"), 4, CLASSIFIER, seed=7)
        cands = enumerate_sequences(("a", "b", "c"))
        ranked = score_and_rank(model, cands, k=6)
        assert len(ranked) == 6
        vals = [v for _, v in ranked]
        assert vals == sorted(vals, reverse=True)

    def test_zero_model_ties_break_lexicographically(self):
        model = init_model(tuple("abc"), 4, CLASSIFIER, seed=7)
        zero_params(model)
        cands = enumerate_sequences(("a", "b", "c"))
        ranked = score_and_rank(model, cands, k=3)
        assert [s.order for s, _ in ranked] == [
            ("a", "b", "c"), ("a", "c", "b"), ("b", "a", "c")]

    def test_trained_model_retrieves_all_positives(self):
        ds = separable_dataset()
        model, _ = train(ds, emb_size=16, lr=1e-3, batch_size=4,
                         max_epochs=300, seed=1, validation_fraction=0.0)
        n_pos = int(ds.labels.sum())
        top = score_and_rank(model, list(ds.sequences), k=n_pos)
        want = {s.order for s, y in zip(ds.sequences, ds.labels) if y == 1}
        assert {s.order for s, _ in top} == want

    def test_k_bounded(self):
        model = init_model(tuple("ab"), 4, CLASSIFIER, seed=7)
        with pytest.raises(ValueError):
            score_and_rank(model, enumerate_sequences(("a", "b")), k=3)


class TestMetrics:
    def test_gap_trivial_cases(self):
        assert gap_at_k(100.0, 100.0) == 0.0
        assert gap_at_k(100.0, 99.0) == pytest.approx(1.0)
        assert gap_at_k(100.0, 0.0) == 100.0

    def test_gap_validation(self):
        with pytest.raises(ValueError):
            gap_at_k(0.0, 0.0)
        with pytest.raises(ValueError):
            gap_at_k(10.0, 11.0)

    def test_auc_perfect_separation(self):
        assert auc([0.9, 0.8, 0.2, 0.1], [1, 1, 0, 0]) == 1.0

    def test_auc_hand_case(self):
        assert auc([0.9, 0.8, 0.7, 0.1], [1, 0, 1, 0]) == 0.75

    def test_auc_ties_count_half(self):
        assert auc([0.5, 0.5], [1, 0]) == 0.5

    def test_auc_random_scores_near_half(self):
        rng = np.random.default_rng(21)
        s = rng.uniform(size=20_000)
        y = rng.integers(0, 2, size=20_000)
        assert auc(s, y) == pytest.approx(0.5, abs=0.02)

    def test_auc_single_class_rejected(self):
        with pytest.raises(ValueError):
            auc([0.1, 0.2], [1, 1])


def test_checkpoint_round_trip(tmp_path):
    ds = separable_dataset()
    model, _ = train(ds, emb_size=8, batch_size=8, max_epochs=5, seed=11)
    save_model(model, tmp_path / "model.json")
    again = load_model(tmp_path / "model.json")
    assert again.vocab == model.vocab
    assert again.head_kind == model.head_kind
    assert again.target_norm == model.target_norm
    for name in model.params:
        assert np.array_equal(again.params[name], model.params[name])
    for seq in ds.sequences[:5]:
        assert forward(again, seq) == forward(model, seq)


def test_unsupported_checkpoint_rejected(tmp_path):
    (tmp_path / "bad.json").write_text('{"format": "other"}')
    with pytest.raises(ValueError, match="format"):
        load_model(tmp_path / "bad.json")

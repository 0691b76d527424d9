import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from causereg import nn
from causereg.errors import ConfigError, ConsistencyError, DomainError, ShapeError
from oracles import central_diff_grads, max_rel_error


def small_net(input_dim, hidden, out_dim, activation="relu", out_act="sigmoid", bn=False, seed=0):
    spec = nn.mlp_spec(
        input_dim, hidden, output_dim=out_dim,
        hidden_activation=activation, output_activation=out_act, batch_norm=bn,
    )
    return nn.Network(spec, np.random.default_rng(seed))


def randomize_biases(net, seed):
    """Move biases off zero so relu kinks sit in generic position.

    With zero biases, an input whose first-layer relu outputs all die
    lands the next pre-activation exactly on the kink, where a central
    finite difference straddles the nondifferentiability.
    """
    rng = np.random.default_rng(seed)
    for layer in net.layers:
        layer["b"][...] = rng.uniform(0.05, 0.3, size=layer["b"].shape)


class TestForward:
    def test_identity_layer_with_identity_weights_is_identity(self):
        net = small_net(3, [], 3, out_act="identity")
        net.set_parameters([np.eye(3), np.zeros(3)])
        x = np.array([[0.3, -1.2, 4.0], [0.0, 2.0, -5.0]])
        out, _ = net.forward(x)
        np.testing.assert_array_equal(out, x)

    def test_zero_sigmoid_unit_outputs_half(self):
        net = small_net(4, [], 1)
        net.set_parameters([np.zeros((4, 1)), np.zeros(1)])
        out, _ = net.forward(np.random.default_rng(0).standard_normal((5, 4)))
        np.testing.assert_array_equal(out, np.full((5, 1), 0.5))

    def test_two_layer_relu_hand_evaluation(self):
        # x = [1, -1]; z1 = [1-3+0.5, 2+1-0.5] = [-1.5, 2.5]; relu -> [0, 2.5]
        # z2 = 0*2 + 2.5*1 + 0.25 = 2.75; relu -> 2.75
        net = small_net(2, [2], 1, out_act="relu")
        net.set_parameters([
            np.array([[1.0, 2.0], [3.0, -1.0]]),
            np.array([0.5, -0.5]),
            np.array([[2.0], [1.0]]),
            np.array([0.25]),
        ])
        out, _ = net.forward(np.array([[1.0, -1.0]]))
        assert out[0, 0] == pytest.approx(2.75, abs=1e-12)

    def test_dimension_mismatch_raises_shape_error(self):
        net = small_net(3, [4], 1)
        with pytest.raises(ShapeError):
            net.forward(np.zeros((2, 5)))

    def test_non_finite_input_raises_domain_error(self):
        net = small_net(2, [4], 1)
        with pytest.raises(DomainError):
            net.forward(np.array([[1.0, np.nan]]))

    def test_batch_norm_needs_two_rows_in_train_mode(self):
        net = small_net(2, [4], 1, bn=True)
        with pytest.raises(ShapeError):
            net.forward(np.ones((1, 2)), train=True)
        net.forward(np.ones((1, 2)), train=False)  # infer mode is fine

    def test_infer_mode_uses_running_statistics(self):
        net = small_net(2, [3], 1, bn=True, seed=3)
        rng = np.random.default_rng(1)
        x = rng.standard_normal((32, 2)) * 3.0 + 1.0
        net.forward(x, train=True)
        probe = rng.standard_normal((4, 2))
        out, _ = net.forward(probe, train=False)
        layer = net.layers[0]
        z = probe @ layer["W"] + layer["b"]
        xhat = (z - layer["run_mean"]) / np.sqrt(layer["run_var"] + nn.BN_EPS)
        hidden = np.maximum(layer["gamma"] * xhat + layer["beta"], 0.0)
        expected = 1.0 / (1.0 + np.exp(-(hidden @ net.layers[1]["W"] + net.layers[1]["b"])))
        np.testing.assert_allclose(out, expected, atol=1e-12)

    def test_sigmoid_outputs_stay_in_unit_interval(self):
        net = small_net(3, [8], 1, seed=5)
        out, _ = net.forward(np.random.default_rng(2).standard_normal((50, 3)) * 10)
        assert np.all(out > 0) and np.all(out < 1)


class TestBackward:
    def test_zero_upstream_gradient_gives_zero_grads(self):
        net = small_net(3, [4], 2, out_act="identity", seed=1)
        x = np.random.default_rng(0).standard_normal((6, 3))
        out, cache = net.forward(x, train=True)
        grads, dx = net.backward(cache, np.zeros_like(out))
        assert all(np.all(g == 0) for g in grads)
        assert np.all(dx == 0)

    def test_single_linear_layer_squared_loss_matches_analytic_form(self):
        # d/dW of mean_j 0.5 (x_j w - y_j)^2 is X'(yhat - y)/n
        net = small_net(3, [], 1, out_act="identity", seed=2)
        rng = np.random.default_rng(4)
        x = rng.standard_normal((8, 3))
        y = rng.standard_normal((8, 1))
        out, cache = net.forward(x, train=True)
        grads, _ = net.backward(cache, (out - y) / 8)
        np.testing.assert_allclose(grads[0], x.T @ (out - y) / 8, atol=1e-14)
        np.testing.assert_allclose(grads[1], (out - y).sum(axis=0) / 8, atol=1e-14)

    def test_random_net_gradients_match_finite_differences(self):
        net = small_net(3, [5, 4], 2, out_act="identity", seed=7)
        randomize_biases(net, 9)
        rng = np.random.default_rng(8)
        x = rng.standard_normal((6, 3))
        y = rng.standard_normal((6, 2))

        out, cache = net.forward(x, train=True)
        grads, _ = net.backward(cache, (out - y) / 6)

        def objective():
            o, _ = net.forward(x, train=True)
            return nn.squared_loss(o, y)

        fd = central_diff_grads(objective, net.parameters(), h=1e-5)
        assert max_rel_error(grads, fd) < 1e-5

    def test_stale_or_mismatched_cache_raises_consistency_error(self):
        net = small_net(3, [4], 1, seed=0)
        x = np.zeros((5, 3))
        out, cache = net.forward(x, train=True)
        with pytest.raises(ConsistencyError):
            net.backward(cache, np.zeros((4, 1)))  # wrong batch size
        with pytest.raises(ConsistencyError):
            net.backward(None, np.zeros_like(out))  # infer-mode forward has no cache
        with pytest.raises(ConsistencyError):
            net.backward(cache[:-1], np.zeros_like(out))  # truncated cache

    @pytest.mark.parametrize("activation", ["relu", "sigmoid", "identity"])
    @pytest.mark.parametrize("bn", [False, True])
    def test_gradient_check_every_layer_type(self, activation, bn):
        net = small_net(3, [4], 2, activation=activation, out_act="identity", bn=bn, seed=11)
        randomize_biases(net, 13)
        rng = np.random.default_rng(12)
        x = rng.standard_normal((8, 3))
        y = rng.standard_normal((8, 2))

        out, cache = net.forward(x, train=True)
        grads, _ = net.backward(cache, (out - y) / 8)

        def objective():
            o, _ = net.forward(x, train=True)
            return nn.squared_loss(o, y)

        fd = central_diff_grads(objective, net.parameters(), h=1e-5)
        assert max_rel_error(grads, fd) < 1e-4

    def test_fused_cross_entropy_path_matches_finite_differences(self):
        net = small_net(4, [6], 1, bn=True, seed=13)
        rng = np.random.default_rng(14)
        x = rng.standard_normal((10, 4))
        y = rng.integers(0, 2, 10).astype(float)

        out, cache = net.forward(x, train=True)
        grads, _ = net.backward(cache, (out - y[:, None]) / 10, from_preactivation=True)

        def objective():
            o, _ = net.forward(x, train=True)
            return nn.cross_entropy_loss(o, y)

        fd = central_diff_grads(objective, net.parameters(), h=1e-5)
        assert max_rel_error(grads, fd) < 1e-4

    def test_input_gradient_matches_finite_differences(self):
        net = small_net(3, [4], 1, seed=15)
        rng = np.random.default_rng(16)
        x = rng.standard_normal((5, 3))
        y = rng.integers(0, 2, 5).astype(float)
        out, cache = net.forward(x, train=True)
        _, dx = net.backward(cache, (out - y[:, None]) / 5, from_preactivation=True)

        def objective():
            o, _ = net.forward(x, train=True)
            return nn.cross_entropy_loss(o, y)

        fd = central_diff_grads(objective, [x], h=1e-5)
        assert max_rel_error([dx], fd) < 1e-5


class TestBatchNorm:
    def test_normalized_activations_have_zero_mean_unit_variance(self):
        net = small_net(5, [6], 1, bn=True, seed=21)
        x = np.random.default_rng(22).standard_normal((64, 5)) * 2.0 + 3.0
        _, cache = net.forward(x, train=True)
        xhat = cache[0]["xhat"]
        assert np.max(np.abs(xhat.mean(axis=0))) < 1e-6
        assert np.max(np.abs(xhat.var(axis=0) - 1.0)) < 1e-6


class TestAdamax:
    def test_zero_gradient_zero_moments_leaves_params_unchanged(self):
        params = [np.array([1.0, -2.0])]
        state = nn.AdamaxState.for_params(params)
        nn.adamax_step(params, [np.zeros(2)], state)
        np.testing.assert_array_equal(params[0], [1.0, -2.0])

    def test_hand_computed_first_step(self):
        # g=1: m = 0.1, u = 1, delta = -(0.002/0.1) * 0.1/1 = -0.002
        params = [np.array([0.0])]
        state = nn.AdamaxState.for_params(params, learning_rate=0.002, beta1=0.9, beta2=0.999)
        nn.adamax_step(params, [np.array([1.0])], state)
        assert state.step_count == 1
        assert state.first_moment[0][0] == pytest.approx(0.1, abs=1e-15)
        assert state.inf_norm[0][0] == pytest.approx(1.0, abs=1e-15)
        assert params[0][0] == pytest.approx(-0.002, abs=1e-9)

    def test_update_opposes_persistent_gradient_sign(self):
        params = [np.array([0.0])]
        state = nn.AdamaxState.for_params(params)
        for _ in range(20):
            before = params[0][0]
            nn.adamax_step(params, [np.array([2.5])], state)
            assert params[0][0] < before

    def test_infinity_norm_update_rule(self):
        params = [np.array([0.0])]
        state = nn.AdamaxState.for_params(params, beta2=0.5)
        nn.adamax_step(params, [np.array([4.0])], state)
        assert state.inf_norm[0][0] == 4.0
        nn.adamax_step(params, [np.array([1.0])], state)
        assert state.inf_norm[0][0] == 2.0  # max(0.5*4, 1)

    @given(g=st.floats(-100, 100, allow_nan=False), steps=st.integers(1, 5))
    @settings(max_examples=40, deadline=None)
    def test_update_magnitude_bound(self, g, steps):
        params = [np.array([0.0])]
        state = nn.AdamaxState.for_params(params)
        for _ in range(steps):
            before = params[0].copy()
            nn.adamax_step(params, [np.array([g])], state)
            bound = state.learning_rate / (1 - state.beta1**state.step_count) * np.abs(
                state.first_moment[0]
            ) / (state.inf_norm[0] + state.epsilon)
            assert np.all(np.abs(params[0] - before) <= bound + 1e-15)

    def test_shape_mismatch_raises(self):
        params = [np.zeros(3)]
        state = nn.AdamaxState.for_params(params)
        with pytest.raises(ShapeError):
            nn.adamax_step(params, [np.zeros(4)], state)


def blobs(seed, n=400):
    rng = np.random.default_rng(seed)
    half = n // 2
    x = np.vstack([
        rng.standard_normal((half, 2)) * 0.5 + np.array([2.0, 2.0]),
        rng.standard_normal((half, 2)) * 0.5 - np.array([2.0, 2.0]),
    ])
    y = np.concatenate([np.ones(half), np.zeros(half)])
    perm = rng.permutation(n)
    return x[perm], y[perm]


class TestTrain:
    def test_linearly_separable_blobs_reach_high_validation_accuracy(self):
        x, y = blobs(31, n=600)
        net = small_net(2, [8], 1, seed=32)
        result = nn.train(
            net, (x[:400], y[:400]), (x[400:], y[400:]),
            config=nn.TrainConfig(max_epochs=60, patience=60, batch_size=32, seed=33),
        )
        assert max(h.val_accuracy for h in result.history) >= 0.99
        assert result.history[result.best_epoch - 1].val_accuracy == max(
            h.val_accuracy for h in result.history
        )

    def test_no_signal_gives_majority_rate_accuracy(self):
        rng = np.random.default_rng(41)
        x = rng.standard_normal((1500, 4))
        y = (rng.random(1500) < 0.7).astype(float)
        net = small_net(4, [8], 1, seed=42)
        result = nn.train(
            net, (x[:1000], y[:1000]), (x[1000:], y[1000:]),
            config=nn.TrainConfig(max_epochs=25, patience=25, batch_size=64, seed=43),
        )
        majority = max(y[1000:].mean(), 1 - y[1000:].mean())
        assert abs(result.history[result.best_epoch - 1].val_accuracy - majority) <= 0.05

    def test_same_seed_gives_bit_identical_histories(self):
        x, y = blobs(51, n=200)
        runs = []
        for _ in range(2):
            net = small_net(2, [6], 1, bn=True, seed=52)
            result = nn.train(
                net, (x[:140], y[:140]), (x[140:], y[140:]),
                config=nn.TrainConfig(max_epochs=12, patience=12, batch_size=16, seed=53),
            )
            runs.append(result)
        hist_a = [(h.train_loss, h.val_accuracy) for h in runs[0].history]
        hist_b = [(h.train_loss, h.val_accuracy) for h in runs[1].history]
        assert hist_a == hist_b
        for pa, pb in zip(runs[0].net.parameters(), runs[1].net.parameters()):
            np.testing.assert_array_equal(pa, pb)

    def test_no_improvement_returns_epoch_one_params_with_flag(self):
        x, y = blobs(61, n=120)
        net = small_net(2, [4], 1, seed=62)
        # zero learning rate: validation accuracy can never improve past epoch 1
        result = nn.train(
            net, (x[:80], y[:80]), (x[80:], y[80:]),
            config=nn.TrainConfig(max_epochs=30, patience=3, batch_size=16, seed=63, learning_rate=0.0),
        )
        assert result.stopped_early
        assert result.best_epoch == 1
        assert len(result.history) == 1 + 3

    def test_returned_params_are_best_epoch_not_last(self):
        x, y = blobs(71, n=240)
        net_full = small_net(2, [6], 1, seed=72)
        result = nn.train(
            net_full, (x[:160], y[:160]), (x[160:], y[160:]),
            config=nn.TrainConfig(max_epochs=8, patience=8, batch_size=16, seed=73),
        )
        net_short = small_net(2, [6], 1, seed=72)
        nn.train(
            net_short, (x[:160], y[:160]), (x[160:], y[160:]),
            config=nn.TrainConfig(max_epochs=result.best_epoch, patience=result.best_epoch,
                                  batch_size=16, seed=73),
        )
        for pa, pb in zip(net_full.parameters(), net_short.parameters()):
            np.testing.assert_array_equal(pa, pb)

    def test_cross_entropy_labels_validated(self):
        net = small_net(2, [4], 1)
        with pytest.raises(DomainError):
            nn.train(net, (np.zeros((4, 2)), np.array([0.0, 2.0, 1.0, 0.0])),
                     (np.zeros((2, 2)), np.zeros(2)))

    def test_empty_sets_rejected(self):
        net = small_net(2, [4], 1)
        with pytest.raises(ConfigError):
            nn.train(net, (np.zeros((0, 2)), np.zeros(0)), (np.zeros((2, 2)), np.zeros(2)))

    def test_patience_cannot_exceed_max_epochs(self):
        with pytest.raises(ConfigError):
            nn.TrainConfig(max_epochs=5, patience=6)


class TestLossesAndSerialization:
    def test_cross_entropy_at_half_is_ln_two(self):
        p = np.full(10, 0.5)
        y = np.random.default_rng(0).integers(0, 2, 10).astype(float)
        assert nn.cross_entropy_loss(p, y) == pytest.approx(np.log(2.0), abs=1e-12)

    def test_model_json_round_trip(self, tmp_path):
        net = small_net(3, [5, 4], 1, bn=True, seed=81)
        x = np.random.default_rng(82).standard_normal((40, 3))
        net.forward(x, train=True)  # populate running stats
        path = tmp_path / "model.json"
        nn.save_model(net, path)
        clone = nn.load_model(path)
        np.testing.assert_array_equal(net.predict(x), clone.predict(x))
        payload = nn.model_to_dict(net)
        assert payload["version"] == "nn-v1"

    def test_bad_version_rejected(self):
        with pytest.raises(ConfigError):
            nn.model_from_dict({"version": "nn-v0"})

    def test_spec_dimension_chain_validated(self):
        with pytest.raises(ConfigError):
            nn.NetSpec(3, (nn.LayerSpec(3, 4), nn.LayerSpec(5, 2)))
        with pytest.raises(ConfigError):
            nn.NetSpec(3, (nn.LayerSpec(2, 4),))

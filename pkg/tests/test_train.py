import numpy as np
import pytest

from mgl.autodiff import NumericError, Tape
from mgl.datagen import FourierFieldConfig, build_dataset
from mgl.graphdist import PairwiseDistances, SoftGraphParams, pairwise, soft_graph_distance
from mgl.hilbert import Grid1D
from mgl.model import SpectralModel, StructuredModel, get_flat
from mgl.operators import DerivativePeriodic1D
from mgl.rng import Rng
from mgl.train import (AdamState, L2Loss, SoftGraphLoss, SoftGraphStructuredLoss, SoftLinfLoss,
                       TrainConfig, adam_step, clip_gradients, loss_l2, loss_nonexp,
                       loss_scale_for, loss_soft_graph, loss_soft_linf, selftest_loss, train,
                       write_history_csv)

GP = SoftGraphParams(0.01, 0.01, 0.5, 1.0)


def tcfg(loss, **kw):
    base = dict(epochs=30, batch_size=8, learning_rate=2e-3, weight_decay=1e-6,
                clip_threshold=1.0, loss=loss, seed=0, skip_selftest=True)
    base.update(kw)
    return TrainConfig(**base)


class TestLossL2:
    def test_perfect_predictions(self):
        t = Tape()
        y = Rng(0).normal_array((4, 8))
        assert float(loss_l2(t, y, t.constant(y)).data) == 0.0

    def test_unit_residual_constant_fields(self):
        t = Tape()
        targets = np.ones((1, 16))
        preds = t.constant(np.zeros((1, 16)))
        assert float(loss_l2(t, targets, preds).data) == pytest.approx(1.0)

    def test_matches_bruteforce_sum(self):
        rng = Rng(1)
        y, p = rng.normal_array((6, 12)), rng.normal_array((6, 12))
        t = Tape()
        got = float(loss_l2(t, y, t.constant(p)).data)
        brute = sum(np.sum((y[j] - p[j]) ** 2) / 12 for j in range(6))
        assert got == pytest.approx(brute, abs=1e-12)


class TestLossSoftLinf:
    def test_single_sample_is_its_norm(self):
        rng = Rng(2)
        y, p = rng.normal_array((1, 9)), rng.normal_array((1, 9))
        t = Tape()
        got = float(loss_soft_linf(t, y, t.constant(p), 0.05).data)
        assert got == pytest.approx(np.sqrt(np.mean((y - p) ** 2)), abs=1e-6)

    def test_dominant_term(self):
        # residual norms 1 and 2 at tau 0.02: the larger one wins
        t = Tape()
        y = np.zeros((2, 4))
        p = t.constant(np.stack([np.full(4, 1.0), np.full(4, 2.0)]))
        assert float(loss_soft_linf(t, y, p, 0.02).data) == pytest.approx(2.0, abs=1e-9)

    def test_bracket(self):
        rng = Rng(3)
        for _ in range(20):
            y, p = rng.normal_array((5, 6)), rng.normal_array((5, 6))
            t = Tape()
            got = float(loss_soft_linf(t, y, t.constant(p), 0.1).data)
            worst = np.max(np.sqrt(np.sum((y - p) ** 2, axis=1) / 6))
            assert worst - 1e-9 <= got <= worst + 0.1 * np.log(5) + 1e-9


class TestLossSoftGraph:
    def test_perfect_predictions_bounded_by_soft_floor(self):
        rng = Rng(4)
        u = rng.normal_array((6, 8))
        y = rng.normal_array((6, 8))
        t = Tape()
        got = float(loss_soft_graph(t, u, y, t.constant(y), GP).data)
        # + 1e-6 = sqrt of the documented floor under the square root
        assert got <= GP.tau_out * np.log(6) + 1e-6 + 1e-9

    def test_batch_of_one_is_weighted_residual(self):
        rng = Rng(5)
        u, y, p = rng.normal_array((1, 8)), rng.normal_array((1, 8)), rng.normal_array((1, 8))
        t = Tape()
        got = float(loss_soft_graph(t, u, y, t.constant(p), GP).data)
        assert got == pytest.approx(np.sqrt(GP.w2 * np.mean((y - p) ** 2)), abs=1e-9)

    def test_agrees_with_graphdist(self):
        rng = Rng(6)
        u, y, p = rng.normal_array((5, 8)), rng.normal_array((5, 8)), rng.normal_array((5, 8))
        t = Tape()
        got = float(loss_soft_graph(t, u, y, t.constant(p), GP).data)
        d = pairwise(u, y, u, p, GP.w1, GP.w2, floor=1e-12)
        assert got == pytest.approx(soft_graph_distance(d, GP), abs=1e-12)


class TestLossNonexp:
    def _svals(self, t, factor, inputs):
        return t.scale(t.constant(inputs), factor)

    def test_identity_map_zero(self):
        inputs = Rng(7).normal_array((6, 8))
        t = Tape()
        out = loss_nonexp(t, self._svals(t, 1.0, inputs), inputs, Rng(1), 16)
        assert float(out.data) == pytest.approx(0.0, abs=1e-5)

    def test_doubling_map_counts_pairs(self):
        inputs = Rng(8).normal_array((6, 8))
        t = Tape()
        out = loss_nonexp(t, self._svals(t, 2.0, inputs), inputs, Rng(1), 16)
        assert float(out.data) == pytest.approx(16.0, rel=1e-4)

    def test_zero_map_zero(self):
        inputs = Rng(9).normal_array((6, 8))
        t = Tape()
        out = loss_nonexp(t, self._svals(t, 0.0, inputs), inputs, Rng(1), 16)
        assert float(out.data) == 0.0

    def test_degenerate_batch_warns(self):
        inputs = np.ones((4, 8))
        t = Tape()
        with pytest.warns(UserWarning):
            out = loss_nonexp(t, t.constant(np.ones((4, 8))), inputs, Rng(1), 8)
        assert float(out.data) == 0.0


class TestAdam:
    def test_first_step_moves_by_learning_rate(self):
        p = np.array([1.0])
        state = AdamState.zeros(1)
        cfg = tcfg(L2Loss(), learning_rate=1e-3, weight_decay=0.0, clip_threshold=10.0)
        adam_step(p, np.array([1.0]), state, cfg)
        assert p[0] == pytest.approx(1.0 - 1e-3, abs=1e-9)

    def test_zero_gradient_no_decay_leaves_params(self):
        p = np.array([1.0, -2.0])
        cfg = tcfg(L2Loss(), weight_decay=0.0)
        adam_step(p, np.zeros(2), AdamState.zeros(2), cfg)
        assert np.array_equal(p, np.array([1.0, -2.0]))

    def test_clipping_scales_gradient(self):
        g = np.array([10.0])
        assert clip_gradients(g, 1.0)[0] == pytest.approx(1.0)
        assert np.array_equal(clip_gradients(np.array([0.5]), 1.0), np.array([0.5]))

    def test_weight_decay_is_decoupled(self):
        p = np.array([1.0])
        cfg = tcfg(L2Loss(), learning_rate=0.1, weight_decay=0.5)
        adam_step(p, np.zeros(1), AdamState.zeros(1), cfg)
        assert p[0] == pytest.approx(1.0 - 0.1 * 0.5 * 1.0)

    def test_nonfinite_gradient_aborts(self):
        with pytest.raises(NumericError):
            adam_step(np.zeros(1), np.array([np.nan]), AdamState.zeros(1), tcfg(L2Loss()))


class TestGradientGate:
    @pytest.mark.parametrize("kind", [
        L2Loss(),
        SoftLinfLoss(0.02),
        SoftGraphLoss(GP),
        SoftGraphStructuredLoss(GP, 0.01, 8),
        SoftGraphLoss(SoftGraphParams(1e-4, 1e-4, 1e-4, 1.0)),
        SoftLinfLoss(0.1),
    ])
    def test_selftest_below_tolerance(self, kind):
        assert selftest_loss(kind) <= 1e-4

    def test_selftest_gate_blocks_training(self, monkeypatch):
        import mgl.train as T
        monkeypatch.setattr(T, "selftest_loss", lambda kind: 1.0)
        ds = build_dataset(DerivativePeriodic1D(),
                           FourierFieldConfig(dim=1, k_min=1, k_max=2, n_min=2, n_max=6,
                                              beta=0.5, seed=0), Grid1D(32), 8)
        model = SpectralModel(32, 1, 1, 4, 4, seed=0)
        with pytest.raises(NumericError):
            train(model, ds, tcfg(L2Loss(), skip_selftest=False, epochs=1))


def small_dataset(n=64, count=64, seed=11):
    cfg = FourierFieldConfig(dim=1, k_min=3, k_max=6, n_min=2, n_max=12, beta=0.5, seed=seed)
    return build_dataset(DerivativePeriodic1D(), cfg, Grid1D(n), count)


class TestTrainLoop:
    def test_smoke_loss_reduction(self):
        cfg = FourierFieldConfig(dim=1, k_min=3, k_max=6, n_min=2, n_max=30, beta=0.5, seed=11)
        ds = build_dataset(DerivativePeriodic1D(), cfg, Grid1D(64), 256)
        model = SpectralModel(64, 1, 3, 32, 16, "gelu", seed=0)
        hist = train(model, ds, tcfg(L2Loss(), epochs=30, batch_size=64))
        assert hist.epoch_losses[-1] < 0.1 * hist.epoch_losses[0]

    def test_zero_epochs_untouched(self):
        ds = small_dataset()
        model = SpectralModel(64, 1, 1, 4, 4, seed=1)
        before = get_flat(model).copy()
        hist = train(model, ds, tcfg(L2Loss(), epochs=0))
        assert hist.epoch_losses == [] and hist.wall_ms == []
        assert np.array_equal(get_flat(model), before)

    def test_deterministic_given_seed(self):
        ds = small_dataset()
        runs = []
        for _ in range(2):
            model = SpectralModel(64, 1, 1, 8, 6, seed=2)
            hist = train(model, ds, tcfg(SoftGraphLoss(GP), epochs=3))
            runs.append((list(hist.epoch_losses), get_flat(model)))
        assert runs[0][0] == runs[1][0]
        assert np.array_equal(runs[0][1], runs[1][1])

    def test_structured_hard_keeps_layer_norms(self):
        from mgl.model import layer_operator_norms
        ds = small_dataset()
        core = SpectralModel(64, 1, 2, 8, 6, activation="relu", seed=3)
        model = StructuredModel(core, lam=0.01, mode="hard")
        train(model, ds, tcfg(SoftGraphStructuredLoss(GP, 0.01, 8), epochs=2))
        assert all(s <= 1 + 1e-6 for s in layer_operator_norms(model))

    def test_structured_loss_requires_structured_model(self):
        ds = small_dataset()
        model = SpectralModel(64, 1, 1, 4, 4, seed=0)
        with pytest.raises(ValueError):
            train(model, ds, tcfg(SoftGraphStructuredLoss(GP, 0.01, 4), epochs=1))

    def test_history_csv(self, tmp_path):
        ds = small_dataset()
        model = SpectralModel(64, 1, 1, 4, 4, seed=1)
        hist = train(model, ds, tcfg(L2Loss(), epochs=2))
        path = tmp_path / "history.csv"
        write_history_csv(hist, path)
        lines = path.read_text().strip().splitlines()
        assert lines[0] == "epoch,loss,wall_ms"
        assert len(lines) == 3
        assert float(lines[1].split(",")[1]) == hist.epoch_losses[0]


class TestLossScale:
    def test_l2_has_unit_scale(self):
        rng = Rng(12)
        assert loss_scale_for(L2Loss(), rng.normal_array((4, 8)), rng.normal_array((4, 8))) == 1.0

    def test_graph_scale_is_diameter(self):
        rng = Rng(13)
        u, y = rng.normal_array((5, 8)), rng.normal_array((5, 8))
        got = loss_scale_for(SoftGraphLoss(GP), u, y)
        d = pairwise(u, y, u, y, GP.w1, GP.w2)
        assert got == pytest.approx(np.max(d.matrix), abs=1e-12)

    def test_scaling_temperatures_equals_scaling_units(self):
        # computing the loss on distances divided by s equals using
        # temperatures multiplied by s, up to the overall 1/s factor
        rng = Rng(14)
        u, y, p = rng.normal_array((4, 8)), rng.normal_array((4, 8)), rng.normal_array((4, 8))
        s = 7.5
        scaled = SoftGraphParams(GP.tau_in * s, GP.tau_out * s, GP.w1, GP.w2)
        t = Tape()
        big = float(loss_soft_graph(t, u, y, t.constant(p), scaled).data)
        t2 = Tape()
        small = float(loss_soft_graph(t2, u / s, y / s, t2.constant(p / s), GP).data)
        assert big == pytest.approx(s * small, rel=1e-6)

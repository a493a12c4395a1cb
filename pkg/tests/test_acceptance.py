"""Acceptance gate: every release-blocking criterion at its stated tolerance.

Each test prints one `ACCEPTANCE <n> <name>: PASS/FAIL` line; run with
`pytest tests/test_acceptance.py -v -s` to see them all.
"""

import time
from contextlib import contextmanager

import numpy as np
import pytest

from mgl.cli import apply_scale, reproduce, table_defaults, make_datasets, run_one
from mgl.datagen import FourierFieldConfig, build_dataset, load, save
from mgl.graphdist import (CompactWindow, PairwiseDistances, SoftGraphParams, graph_distance,
                           hard_graph_metric, soft_graph_distance, soft_hard_gap_bound)
from mgl.hilbert import (Field1D, Grid1D, distance, norm, reconstruct, truncate_modes)
from mgl.metrics import monotonicity_inner_products, sample_distinct_pairs
from mgl.model import SpectralModel, StructuredModel
from mgl.operators import AbsSubdifferential, DerivativePeriodic1D, apply, resolvent, yosida
from mgl.rng import Rng
from mgl.autodiff import Tape
from mgl.train import (L2Loss, SoftGraphLoss, SoftGraphStructuredLoss, SoftLinfLoss,
                       TrainConfig, loss_soft_linf, selftest_loss, train)
from mgl.util import batched_sqnorms
from mgl.verify import (verify_lp_counterexample, verify_step_counterexample,
                        verify_uniform_counterexample, verify_yosida_graph_convergence)

ABS = AbsSubdifferential()
DERIV = DerivativePeriodic1D()


@contextmanager
def criterion(num, name):
    try:
        yield
    except BaseException:
        print(f"\nACCEPTANCE {num:02d} {name}: FAIL")
        raise
    print(f"\nACCEPTANCE {num:02d} {name}: PASS")


def band_limited(grid_n, seed, kmax=12):
    g = Grid1D(grid_n)
    t = g.points()
    rng = Rng(seed)
    vals = np.zeros(grid_n)
    for k in range(1, kmax + 1):
        vals += rng.normal() * np.sin(2 * np.pi * k * t) + rng.normal() * np.cos(2 * np.pi * k * t)
    return Field1D(g, vals)


def test_criterion_01_resolvent_identity():
    with criterion(1, "resolvent identity"):
        t0 = time.perf_counter()
        for lam in (1.0, 0.1, 0.01):
            for seed in range(50):
                x = band_limited(128, seed)
                y = apply(DERIV, x)
                z = Field1D(x.grid, x.values + lam * y.values)
                u, _ = resolvent(DERIV, lam, z)
                assert distance(u, x) / norm(x) <= 1e-8
        rng = Rng(123)
        for lam in (1.0, 0.1, 0.01):
            for _ in range(50):
                x = 3 * rng.normal()
                sub = np.sign(x) if x != 0 else 0.0
                u, _ = resolvent(ABS, lam, x + lam * sub)
                assert abs(u - x) <= 1e-12
        assert time.perf_counter() - t0 < 1.0


def test_criterion_02_uniform_family_quantities():
    with criterion(2, "vanishing inputs with pinned derivative norms"):
        out = verify_uniform_counterexample(n_list=(4, 8, 16, 32), grid_n=512)
        assert out.passed
        for n in (4, 8, 16, 32):
            assert out.quantities[f"norm_dv_{n}"] == pytest.approx(np.pi / np.sqrt(2), abs=1e-4)
            assert out.quantities[f"norm_v_{n}"] <= (1 / (n * np.sqrt(2))) * (1 + 1e-6)


def test_criterion_03_lp_family_quantities():
    with criterion(3, "norm growth and divergent weighted sums"):
        out = verify_lp_counterexample(p=2.0, grid_n=512)
        assert out.passed
        assert out.quantities["S1000_over_S100"] > 1.3
        g = Grid1D(512)
        t = g.points()
        for n in range(2, 33):
            u = Field1D(g, np.sin(2 * np.pi * n * t) / np.sqrt(n))
            got = norm(apply(DERIV, u))
            assert abs(got - np.sqrt(2 * n) * np.pi) / (np.sqrt(2 * n) * np.pi) <= 1e-3


def test_criterion_04_yosida_properties():
    with criterion(4, "Yosida Lipschitz, monotone, pointwise limits"):
        rng = Rng(7)
        for lam in (0.5, 0.1, 0.02):
            for _ in range(500):
                z1, z2 = 4 * rng.normal(), 4 * rng.normal()
                y1, y2 = yosida(ABS, lam, z1), yosida(ABS, lam, z2)
                assert abs(y1 - y2) <= (abs(z1 - z2) / lam) * (1 + 1e-6)
                assert (y1 - y2) * (z1 - z2) >= -1e-9
        for x in (0.5, -0.5, 1.0, -1.0):
            errs = []
            for lam in (0.4, 0.2, 0.1, 0.05):
                val = yosida(ABS, lam, x)
                errs.append(abs(val - np.sign(x)))
                if lam <= abs(x):
                    assert val == np.sign(x)
            assert all(b <= a + 1e-12 for a, b in zip(errs, errs[1:]))


def test_criterion_05_graph_convergence_desk_scale():
    with criterion(5, "Yosida graphs converge to the set-valued target"):
        t0 = time.perf_counter()
        out = verify_yosida_graph_convergence(lambdas=(0.5, 0.2, 0.05, 0.01),
                                              window=CompactWindow(2.0, 1.5), step=0.01)
        ds = [out.quantities[f"d_lambda_{lam:g}"] for lam in (0.5, 0.2, 0.05, 0.01)]
        assert all(b < a for a, b in zip(ds, ds[1:]))
        assert ds[-1] <= 0.03
        assert time.perf_counter() - t0 < 10.0


def test_criterion_06_sharpness_witness():
    with criterion(6, "maximality is what makes the step approximable"):
        out = verify_step_counterexample(slopes=(1.0, 10.0, 100.0, 1000.0), radius=1.0,
                                         sample_step=1e-3, maximal=False)
        assert all(out.quantities[f"d_slope_{s:g}"] >= 0.499 for s in (1.0, 10.0, 100.0, 1000.0))
        out_max = verify_step_counterexample(slopes=(1000.0,), radius=1.0,
                                             sample_step=1e-3, maximal=True)
        assert out_max.quantities["d_slope_1000"] < 0.02


def test_criterion_07_soft_hard_brackets():
    with criterion(7, "log-sum-exp brackets around hard values"):
        rng = Rng(31)
        for trial in range(40):
            batch = 3 + trial % 6
            y = rng.normal_array((batch, 8))
            p = rng.normal_array((batch, 8))
            tau = (0.02, 0.1, 0.5)[trial % 3]
            t = Tape()
            soft = float(loss_soft_linf(t, y, t.constant(p), tau).data)
            worst = np.max(np.sqrt(batched_sqnorms(y - p)))
            assert worst - 1e-9 <= soft <= worst + tau * np.log(batch) + 1e-9
        for trial in range(100):
            n, m = 2 + trial % 7, 2 + (trial * 3) % 8
            d = PairwiseDistances(np.abs(rng.normal_array((n, m))))
            params = SoftGraphParams((0.05, 0.1, 0.3)[trial % 3], (0.1, 0.07)[trial % 2])
            gap = abs(soft_graph_distance(d, params) - hard_graph_metric(d))
            assert gap <= soft_hard_gap_bound(d, params) + 1e-12


def test_criterion_08_gradient_correctness():
    with criterion(8, "every loss differentiates correctly"):
        gp = SoftGraphParams(0.01, 0.01, 0.5, 1.0)
        kinds = [L2Loss(), SoftLinfLoss(0.02), SoftGraphLoss(gp),
                 SoftGraphStructuredLoss(gp, 0.01, 8)]
        for kind in kinds:
            for seed in range(10):
                assert selftest_loss(kind, seed=seed) <= 1e-4


def _hard_structured(grid_n=64, seed=0):
    core = SpectralModel(grid_n, 1, layers=2, modes=12, channels=8, activation="relu", seed=seed)
    return StructuredModel(core, lam=0.01, mode="hard")


def _mono_stats(model, inputs, n_pairs=5000, seed=0):
    preds = model.forward(inputs)
    ps, qs = sample_distinct_pairs(len(inputs), n_pairs, Rng(seed))
    m = monotonicity_inner_products(inputs, preds, ps, qs)
    frac = float(np.mean(m < -1e-10))
    return frac, float(np.min(m)), len(ps)


def test_criterion_09_monotone_by_construction():
    with criterion(9, "hard structured models are monotone before and after training"):
        model = _hard_structured()
        rng = Rng(55)
        inputs = rng.normal_array((128, 64))
        frac, worst, count = _mono_stats(model, inputs)
        assert count == 5000
        assert frac == 0.0 and worst >= -1e-9
        cfg = FourierFieldConfig(dim=1, k_min=3, k_max=6, n_min=2, n_max=12, beta=0.5, seed=3)
        ds = build_dataset(DERIV, cfg, Grid1D(64), 64)
        tc = TrainConfig(epochs=3, batch_size=8, learning_rate=2e-3, weight_decay=1e-6,
                         clip_threshold=1.0, seed=0, skip_selftest=True,
                         loss=SoftGraphStructuredLoss(SoftGraphParams(0.01, 0.01, 0.5, 1.0),
                                                      0.01, 8))
        train(model, ds, tc)
        frac, worst, _ = _mono_stats(model, inputs)
        assert frac == 0.0 and worst >= -1e-9


def test_criterion_10_ranking_reproduction(tmp_path):
    with criterion(10, "desk-scale directional reproduction of the comparison table"):
        t0 = time.perf_counter()
        per_seed, ok = reproduce(1, 0.125, 4, tmp_path / "repro")
        elapsed = time.perf_counter() - t0
        seeds = sorted(per_seed)
        assert len(seeds) == 4
        graph_wins = sum(per_seed[s]["graph"].test_graph < per_seed[s]["l2"].test_graph
                         for s in seeds)
        mono_wins = sum(per_seed[s]["graph_structured"].mono_frac < per_seed[s]["l2"].mono_frac
                        for s in seeds)
        assert graph_wins >= 3
        assert mono_wins >= 3
        assert ok
        assert (tmp_path / "repro" / "aggregate_table.csv").exists()
        assert elapsed <= 600.0


def test_criterion_11_edap_measurements():
    with criterion(11, "truncation error decays and hits zero past the band"):
        g = Grid1D(128)
        t = g.points()
        rng = Rng(17)
        fields = []
        for _ in range(12):
            vals = np.zeros(128)
            for k in range(1, 25):
                vals += rng.normal() * np.sin(2 * np.pi * k * t) / k ** 0.5
            fields.append(Field1D(g, vals))
        sups = []
        for m in (2, 4, 8, 16, 32):
            sups.append(max(norm(Field1D(g, f.values - reconstruct(truncate_modes(f, m), g).values))
                            for f in fields))
        assert all(b <= a + 1e-12 for a, b in zip(sups, sups[1:]))
        assert sups[-1] <= 1e-12  # cutoff 32 clears the band (max mode 24)
        for i in range(400):
            u = Field1D(g, rng.normal_array((128,)))
            v = Field1D(g, rng.normal_array((128,)))
            lhs = np.linalg.norm(truncate_modes(u, 16) - truncate_modes(v, 16))
            assert lhs <= distance(u, v) + 1e-12


def test_criterion_12_reproducibility(tmp_path):
    with criterion(12, "bit-identical datasets and metrics under one build"):
        cfg = apply_scale(table_defaults(1), 0.02)
        cfg["train"]["epochs"] = 2
        cfg["model"]["channels"] = 6
        cfg["model"]["modes"] = 8
        cfg["eval"]["n_mono_pairs"] = 20
        tr, te = make_datasets(cfg)
        save(tr, tmp_path / "a.mgl")
        save(tr, tmp_path / "b.mgl")
        assert (tmp_path / "a.mgl").read_bytes() == (tmp_path / "b.mgl").read_bytes()
        back = load(tmp_path / "a.mgl")
        save(back, tmp_path / "c.mgl")
        assert (tmp_path / "c.mgl").read_bytes() == (tmp_path / "a.mgl").read_bytes()
        r1 = run_one(cfg, tr, te, "graph", 0, tmp_path / "r1", skip_selftest=True)
        r2 = run_one(cfg, tr, te, "graph", 0, tmp_path / "r2", skip_selftest=True)
        assert (tmp_path / "r1" / "metrics.csv").read_bytes() == \
               (tmp_path / "r2" / "metrics.csv").read_bytes()
        assert r1.row() == r2.row()

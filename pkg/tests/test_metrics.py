import json

import numpy as np
import pytest

from mgl.datagen import FourierFieldConfig, build_dataset, Dataset
from mgl.hilbert import Grid1D, Grid2D
from mgl.metrics import (COLUMNS, EvalReport, aggregate, evaluate, monotonicity_inner_products,
                         read_reports_csv, report_write, sample_distinct_pairs,
                         write_reports_csv)
from mgl.model import OracleModel
from mgl.operators import DerivativePeriodic1D, PLaplacian2D
from mgl.rng import Rng


def deriv_dataset(count=30, seed=5, grid_n=64):
    cfg = FourierFieldConfig(dim=1, k_min=3, k_max=6, n_min=2, n_max=20, beta=0.5, seed=seed)
    return build_dataset(DerivativePeriodic1D(), cfg, Grid1D(grid_n), count)


class NegationModel:
    def forward(self, inputs):
        return -np.asarray(inputs)


class TestEvaluate:
    def test_oracle_derivative_model(self):
        ds = deriv_dataset()
        rep = evaluate(OracleModel(DerivativePeriodic1D(), Grid1D(64)), ds, 400, 0, 0.5, 1.0)
        assert rep.test_mse <= 1e-20
        assert rep.mean_rel_l2 <= 1e-10 and rep.worst_rel_l2 <= 1e-10
        assert rep.test_graph <= 1e-10 and rep.test_graph_unit <= 1e-10
        assert rep.mono_mean_viol <= 1e-10 and rep.mono_worst_violation <= 1e-10
        assert rep.mono_frac == 0.0

    def test_oracle_plaplacian_monotone(self):
        cfg = FourierFieldConfig(dim=2, k_min=1, k_max=4, n_min=2, n_max=6, beta=0.0, seed=9)
        ds = build_dataset(PLaplacian2D(1.2), cfg, Grid2D(16), 20)
        rep = evaluate(OracleModel(PLaplacian2D(1.2), Grid2D(16)), ds, 150, 0, 1e-4, 1.0)
        assert rep.mono_mean_viol == 0.0
        assert rep.mono_worst_violation == 0.0
        assert rep.mono_frac == 0.0

    def test_anti_monotone_toy(self):
        rng = Rng(3)
        inputs = rng.normal_array((12,))
        ds = Dataset(64, 1, inputs.reshape(-1, 1) * np.ones(64), inputs.reshape(-1, 1) * np.ones(64))
        rep = evaluate(NegationModel(), ds, 66, 0, 1.0, 1.0)
        assert rep.mono_frac == 1.0
        ps, qs = sample_distinct_pairs(12, 66, Rng(0))
        expect = np.mean((inputs[ps] - inputs[qs]) ** 2)
        assert rep.mono_mean_viol == pytest.approx(expect, rel=1e-12)

    def test_worst_at_least_mean(self):
        ds = deriv_dataset()
        rng = Rng(4)
        class Noisy:
            def forward(self, x):
                return ds.targets + 0.1 * rng.normal_array(ds.targets.shape)
        rep = evaluate(Noisy(), ds, 100, 0, 0.5, 1.0)
        assert rep.worst_rel_l2 >= rep.mean_rel_l2

    def test_zero_target_samples_excluded_with_warning(self):
        ds = deriv_dataset(count=5)
        ds.targets[2] = 0.0
        with pytest.warns(UserWarning, match="zero-target"):
            rep = evaluate(OracleModel(DerivativePeriodic1D(), Grid1D(64)), ds, 10, 0, 1.0, 1.0)
        assert np.isfinite(rep.mean_rel_l2)

    def test_all_zero_targets_rejected(self):
        ds = deriv_dataset(count=3)
        ds.targets[:] = 0.0
        with pytest.raises(ValueError):
            evaluate(OracleModel(DerivativePeriodic1D(), Grid1D(64)), ds, 10, 0, 1.0, 1.0)

    def test_mono_pairs_without_replacement_and_capped(self):
        ps, qs = sample_distinct_pairs(10, 10_000, Rng(1))
        assert len(ps) == 45
        assert len({(p, q) for p, q in zip(ps, qs)}) == 45
        ps2, qs2 = sample_distinct_pairs(10, 7, Rng(2))
        assert len(ps2) == 7

    def test_mono_source_train_inputs(self):
        ds = deriv_dataset()
        other = deriv_dataset(count=40, seed=77)
        rep = evaluate(OracleModel(DerivativePeriodic1D(), Grid1D(64)), ds, 50, 0, 0.5, 1.0,
                       mono_inputs=other.inputs)
        assert rep.mono_source == "train"
        assert rep.n_mono_pairs == 50

    def test_monotonicity_inner_products_signs(self):
        inputs = np.array([0.0, 1.0, 3.0])
        outputs = np.array([0.0, 2.0, 6.0])
        ps, qs = np.array([0, 1]), np.array([1, 2])
        m = monotonicity_inner_products(inputs, outputs, ps, qs)
        assert np.all(m > 0)


class TestReports:
    def _report(self):
        ds = deriv_dataset()
        return evaluate(OracleModel(DerivativePeriodic1D(), Grid1D(64)), ds, 64, 0, 0.5, 1.0)

    def test_roundtrip(self, tmp_path):
        rep = self._report()
        report_write(rep, tmp_path / "m.csv", tmp_path / "m.json", {"note": "x"})
        rows = read_reports_csv(tmp_path / "m.csv")
        assert rows[0] == rep.row()
        payload = json.loads((tmp_path / "m.json").read_text())
        assert payload["report"]["n_test"] == rep.n_test
        assert payload["config"] == {"note": "x"}

    def test_column_order_stable(self, tmp_path):
        rep = self._report()
        write_reports_csv([rep], tmp_path / "m.csv")
        header = (tmp_path / "m.csv").read_text().splitlines()[0]
        assert header == ("test_mse,mean_rel_l2,worst_rel_l2,test_graph,test_graph_unit,"
                          "mono_mean_viol,mono_worst_signed,mono_worst_violation,mono_frac")

    def test_empty_report_list_header_only(self, tmp_path):
        write_reports_csv([], tmp_path / "empty.csv")
        lines = (tmp_path / "empty.csv").read_text().splitlines()
        assert len(lines) == 1 and lines[0].startswith("test_mse")

    def test_aggregate_mean_std(self):
        a, b = self._report(), self._report()
        b.test_mse = a.test_mse + 2.0
        stats = aggregate([a, b])
        mean, std = stats["test_mse"]
        assert mean == pytest.approx(a.test_mse + 1.0)
        assert std == pytest.approx(np.std([a.test_mse, b.test_mse], ddof=1))

    def test_two_seeds_two_rows(self, tmp_path):
        a, b = self._report(), self._report()
        write_reports_csv([a, b], tmp_path / "two.csv")
        assert len(read_reports_csv(tmp_path / "two.csv")) == 2

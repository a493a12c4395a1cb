import numpy as np
import pytest

from mgl.hilbert import Grid1D, ParameterError
from mgl.operators import DerivativePeriodic1D
from mgl.verify import (VerifyOutcome, _default_band_limited_fields, _weight_normalizer,
                        default_edap_outcome, default_field_yosida_outcome, measure_edap_error,
                        run_all, verify_lp_counterexample, verify_step_counterexample,
                        verify_uniform_counterexample, verify_yosida_graph_convergence)


class TestUniformCounterexample:
    def test_default_passes(self):
        out = verify_uniform_counterexample()
        assert out.passed
        assert out.quantities["implied_lower_bound"] == pytest.approx(np.pi / np.sqrt(2) - 1)
        for n in (4, 8, 16, 32):
            assert out.quantities[f"norm_dv_{n}"] == pytest.approx(np.pi / np.sqrt(2), abs=1e-4)

    def test_ramp_norm_analytic(self):
        out = verify_uniform_counterexample(n_list=(4,), grid_n=512)
        assert out.quantities["norm_v_4"] == pytest.approx(1 / (4 * np.sqrt(2)), abs=1e-6)
        assert out.quantities["norm_v_4"] == pytest.approx(0.17678, abs=1e-5)

    def test_odd_n_rejected(self):
        with pytest.raises(ParameterError):
            verify_uniform_counterexample(n_list=(5,))

    def test_above_nyquist_rejected(self):
        with pytest.raises(ParameterError):
            verify_uniform_counterexample(n_list=(2048,), grid_n=512)

    def test_empty_list_vacuous(self):
        out = verify_uniform_counterexample(n_list=())
        assert out.passed and "vacuous" in out.detail


class TestLpCounterexample:
    def test_default_passes(self):
        out = verify_lp_counterexample()
        assert out.passed
        assert out.quantities["norm_du_8"] == pytest.approx(4 * np.pi, rel=1e-3)
        assert out.quantities["S1000_over_S100"] > 1.3

    def test_weight_normalizer_against_analytic_p2(self):
        # independent oracle: sum_{n>=2} n^-2 = pi^2/6 - 1
        c, lo, hi = _weight_normalizer(2.0)
        assert lo <= 1.0 <= hi and hi - lo <= 1e-6
        assert c == pytest.approx(1.0 / (np.pi ** 2 / 6 - 1.0), rel=1e-9)

    def test_partial_sum_growth_is_harmonic(self):
        out = verify_lp_counterexample(p=2.0)
        h = lambda k: np.sum(1.0 / np.arange(1, k + 1))
        expect = (h(1000) - 1.0) / (h(100) - 1.0)
        assert out.quantities["S1000_over_S100"] == pytest.approx(expect, rel=1e-6)

    def test_other_exponents(self):
        assert verify_lp_counterexample(p=1.5).passed
        assert verify_lp_counterexample(p=3.0).passed


class TestStepCounterexample:
    def test_nonmaximal_distance_floor(self):
        out = verify_step_counterexample()
        assert out.passed
        for s in (1.0, 10.0, 100.0, 1000.0):
            assert out.quantities[f"d_slope_{s:g}"] >= 0.499

    def test_degenerate_flat_family(self):
        out = verify_step_counterexample(slopes=(0.0,))
        assert out.quantities["d_slope_0"] >= 0.5 - 1e-3 - 1e-6
        assert out.passed

    def test_maximal_extension_becomes_approximable(self):
        out = verify_step_counterexample(slopes=(1.0, 10.0, 100.0, 1000.0), maximal=True)
        assert out.passed
        assert out.quantities["d_slope_1000"] < 0.02
        assert out.quantities["d_slope_1"] > out.quantities["d_slope_1000"]

    def test_very_steep_slope_reaches_sampling_floor(self):
        out = verify_step_counterexample(slopes=(1e4,), maximal=True)
        assert out.quantities["d_slope_10000"] < 2 * 1e-3


class TestYosidaConvergence:
    def test_scalar_family_decreases_to_resolution(self):
        out = verify_yosida_graph_convergence()
        assert out.passed
        ds = [out.quantities[f"d_lambda_{lam:g}"] for lam in (0.5, 0.2, 0.05, 0.01)]
        assert all(b < a for a, b in zip(ds, ds[1:]))
        assert ds[-1] <= 0.03

    def test_field_excess_decreases(self):
        out = default_field_yosida_outcome()
        assert out.passed
        vals = [out.quantities[f"excess_lambda_{lam:g}"] for lam in (0.3, 0.1, 0.03)]
        assert vals[0] > vals[1] > vals[2]

    def test_zero_multiplier_distance_zero(self):
        # resolvent of the zero operator is the identity at every lambda
        from mgl.operators import SpectralMultiplier1D, sample_yosida_graph, GraphSample
        from mgl.graphdist import CompactWindow, graph_distance
        from mgl.hilbert import Field1D
        g = Grid1D(32)
        t = g.points()
        A = SpectralMultiplier1D(np.zeros(17, dtype=complex))
        fields = [Field1D(g, np.sin(2 * np.pi * t)), Field1D(g, np.cos(4 * np.pi * t))]
        for lam in (0.5, 0.05):
            ys = sample_yosida_graph(A, lam, fields)
            target = GraphSample(ys.inputs, np.zeros_like(ys.outputs))
            assert graph_distance(ys, target, CompactWindow.unbounded()) <= 1e-12


class TestEdap:
    def test_band_limited_zero_beyond_band(self):
        g = Grid1D(64)
        t = g.points()
        fields = np.stack([np.sin(2 * np.pi * k * t) for k in (1, 2, 3)])
        out = measure_edap_error(fields, m_list=(2, 4, 8))
        assert out.passed
        assert out.quantities["C_B_m4"] <= 1e-12
        assert out.quantities["C_B_m8"] <= 1e-12

    def test_random_sample_strictly_decreasing(self):
        out = default_edap_outcome()
        assert out.passed
        vals = [out.quantities[f"C_B_m{m}"] for m in (2, 4, 8, 16)]
        assert all(b < a for a, b in zip(vals, vals[1:]))
        assert all(v > 0 for v in vals)

    def test_reports_output_radius(self):
        g = Grid1D(32)
        t = g.points()
        inputs = np.stack([np.sin(2 * np.pi * t)])
        outputs = np.stack([3.0 * np.cos(2 * np.pi * t)])
        out = measure_edap_error(inputs, m_list=(2,), outputs=outputs)
        assert out.quantities["R_K"] == pytest.approx(3.0 / np.sqrt(2), abs=1e-9)

    def test_empty_cutoffs_vacuous(self):
        out = measure_edap_error(np.zeros((1, 16)), m_list=())
        assert out.passed and "vacuous" in out.detail


def test_run_all_passes_and_serializes():
    outcomes = run_all()
    assert all(isinstance(o, VerifyOutcome) for o in outcomes)
    assert all(o.passed for o in outcomes)
    names = [o.name for o in outcomes]
    assert "uniform_counterexample" in names
    assert "step_counterexample_maximal" in names
    d = outcomes[0].to_dict()
    assert set(d) == {"name", "quantities", "pass", "detail"}

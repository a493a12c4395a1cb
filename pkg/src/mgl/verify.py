"""Numerical verifiers for the structural facts the library rests on.

Non-existence claims cannot be checked universally; each verifier checks
the quantitative ingredients instead and says so in its detail text:

  - uniform: the ramp family v_n = (1/n) sin(n pi x) shrinks to zero in
    H while its derivative norm stays pinned at pi/sqrt(2), so no
    continuous operator can trail the derivative uniformly on the
    family; we check both computed norms.
  - lp: the family u_n = (1/sqrt(n)) sin(2 pi n x) has derivative norms
    sqrt(2n) pi while the weights c/n^(1+p/2) sum to one; the weighted
    p-th powers of half those norms decay like 1/n, so their partial
    sums grow harmonically (divergence); we check norms, the weight
    normalization via bracketed tail bounds, and the growth signature.
  - step: any continuous single-valued family must cross height 1/2
    near the step's jump, and the crossing point stays at distance ~1/2
    from the two-valued step graph; with the vertical segment added
    (the maximal extension) steep sigmoids do approximate the graph.
    Sigmoids represent the continuous family; the crossing argument
    makes them representative of every such family.
  - yosida: the regularized operators' graphs approach the target graph
    as lambda shrinks, measured with the sampled local graph distance.
  - edap: the mode-truncation reconstruction error over a sample is
    non-increasing in the cutoff and hits zero once the cutoff clears
    the band.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .graphdist import CompactWindow, graph_distance, one_sided_excess
from .hilbert import (Field1D, Grid1D, ParameterError, norm, reconstruct, spectral_derivative,
                      truncate_modes)
from .operators import (AbsSubdifferential, DerivativePeriodic1D, GraphSample, OperatorSpec,
                        apply, resolvent, sample_graph, sample_yosida_graph)

PI_OVER_SQRT2 = np.pi / np.sqrt(2.0)


@dataclass
class VerifyOutcome:
    name: str
    quantities: dict = field(default_factory=dict)
    passed: bool = True
    detail: str = ""

    def to_dict(self) -> dict:
        return {"name": self.name, "quantities": self.quantities,
                "pass": self.passed, "detail": self.detail}


def _ramp_field(n: int, grid: Grid1D) -> Field1D:
    t = grid.points()
    return Field1D(grid, np.sin(n * np.pi * t) / n)


def verify_uniform_counterexample(n_list=(4, 8, 16, 32), grid_n: int = 512) -> VerifyOutcome:
    """Check ||v_n|| -> 0 monotonically while ||v_n'|| stays at pi/sqrt2."""
    if len(n_list) == 0:
        return VerifyOutcome("uniform_counterexample", {}, True,
                             "warning: empty n list, vacuous pass")
    grid = Grid1D(grid_n)
    q = {"implied_lower_bound": PI_OVER_SQRT2 - 1.0}
    passed = True
    prev = np.inf
    for n in n_list:
        if n % 2 != 0:
            raise ParameterError(f"n={n}: sin(n pi x) is 1-periodic only for even n")
        if n > grid_n:
            raise ParameterError(f"n={n} puts the ramp above the grid Nyquist mode")
        v = _ramp_field(n, grid)
        nv, ndv = norm(v), norm(spectral_derivative(v))
        q[f"norm_v_{n}"] = nv
        q[f"norm_dv_{n}"] = ndv
        passed &= nv <= (1.0 / (n * np.sqrt(2.0))) * (1 + 1e-6)
        passed &= nv < prev
        passed &= abs(ndv - PI_OVER_SQRT2) <= 1e-4
        prev = nv
    detail = ("inputs shrink to zero while their derivatives keep norm pi/sqrt(2); "
              "a continuous map through zero would have to absorb the gap "
              f"{PI_OVER_SQRT2:.4f} - 1 > 0. Non-existence itself is not machine-checkable; "
              "these are the proof's computed ingredients.")
    return VerifyOutcome("uniform_counterexample", q, bool(passed), detail)


def _weight_normalizer(p: float, cutoff: int = 10 ** 6):
    """c with sum_{n>=2} c/n^(1+p/2) = 1, via partial sum + bracketed tail.

    Returns (c, lower, upper) where [lower, upper] brackets the infinite
    sum evaluated at this c; the bracket comes from integral bounds on
    the tail, so |1 - sum| <= upper - lower without any closed form.
    """
    s = 1.0 + p / 2.0
    terms = np.arange(2, cutoff + 1, dtype=np.float64) ** (-s)
    partial = float(np.sum(terms[::-1]))
    tail_mid = (cutoff + 0.5) ** (1.0 - s) / (s - 1.0)
    tail_lo = (cutoff + 1.0) ** (1.0 - s) / (s - 1.0)
    tail_hi = cutoff ** (1.0 - s) / (s - 1.0)
    c = 1.0 / (partial + tail_mid)
    return c, c * (partial + tail_lo), c * (partial + tail_hi)


def verify_lp_counterexample(n_partial: int = 1000, p: float = 2.0, grid_n: int = 512) -> VerifyOutcome:
    if p < 1:
        raise ParameterError(f"p must be at least 1, got {p}")
    grid = Grid1D(grid_n)
    t = grid.points()
    q = {}
    passed = True
    for n in range(2, 33):
        u = Field1D(grid, np.sin(2 * np.pi * n * t) / np.sqrt(n))
        got = norm(spectral_derivative(u))
        want = np.sqrt(2.0 * n) * np.pi
        if n in (2, 8, 16, 32):
            q[f"norm_du_{n}"] = got
        passed &= abs(got - want) / want <= 1e-3

    c, lower, upper = _weight_normalizer(p)
    q["c"] = c
    q["normalization_bracket"] = upper - lower
    passed &= lower <= 1.0 <= upper and (upper - lower) <= 1e-6

    ns = np.arange(2, max(n_partial, 200) * 2 + 1, dtype=np.float64)
    terms = (c / ns ** (1.0 + p / 2.0)) * (np.sqrt(2.0 * ns) * np.pi / 2.0) ** p
    csum = np.cumsum(terms)

    def s_at(k: int) -> float:
        return float(csum[k - 2])

    def h_at(k: int) -> float:
        return float(np.sum(1.0 / np.arange(1, k + 1)))

    for base in (100, 250, 500):
        ratio = s_at(2 * base) / s_at(base)
        href = (h_at(2 * base) - 1.0) / (h_at(base) - 1.0)
        q[f"ratio_S{2*base}_S{base}"] = ratio
        passed &= abs(ratio - href) / href <= 0.05
    q["S1000_over_S100"] = s_at(1000) / s_at(100)
    passed &= q["S1000_over_S100"] > 1.3
    detail = ("derivative norms grow like sqrt(2n)pi while the probability weights "
              "decay as c/n^(1+p/2); the weighted p-th powers of half the norms "
              "decay exactly like 1/n, so partial sums grow with the harmonic series "
              "and the expected p-th error diverges. Divergence itself is asserted "
              "through the growth signature, not to infinity.")
    return VerifyOutcome("lp_counterexample", q, bool(passed), detail)


def _step_graph(xs: np.ndarray, maximal: bool, v_step: float) -> GraphSample:
    ins = [xs[xs < 0], np.array([0.0, 0.0]), xs[xs > 0]]
    outs = [np.zeros(np.sum(xs < 0)), np.array([0.0, 1.0]), np.ones(np.sum(xs > 0))]
    if maximal:
        seg = np.linspace(0.0, 1.0, int(round(1.0 / v_step)) + 1)
        ins.append(np.zeros_like(seg))
        outs.append(seg)
    return GraphSample(np.concatenate(ins), np.concatenate(outs),
                       label="step_maximal" if maximal else "step")


def _sigmoid_graph(s: float, xs: np.ndarray, radius: float, v_step: float) -> GraphSample:
    """Sample the slope-s sigmoid, refining across its transition ramp.

    A uniform x-grid steps over the width-1/s ramp once s is large, so
    the sample would miss the heights the continuum curve passes
    through; preimages of a uniform height grid fix the resolution.
    """
    if s > 0:
        heights = np.linspace(v_step, 1.0 - v_step, int(round(1.0 / v_step)) - 1)
        ramp = np.log(heights / (1.0 - heights)) / s
        xs = np.unique(np.concatenate([xs, ramp[np.abs(ramp) <= radius]]))
    with np.errstate(over="ignore"):
        sig = 1.0 / (1.0 + np.exp(-s * xs))
    return GraphSample(xs, sig, label=f"sigmoid_{s:g}")


def verify_step_counterexample(slopes=(1.0, 10.0, 100.0, 1000.0), radius: float = 1.0,
                               sample_step: float = 1e-3, maximal: bool = False) -> VerifyOutcome:
    if any(s < 0 for s in slopes):
        raise ParameterError("slopes must be nonnegative")
    xs = np.linspace(-radius, radius, int(round(2 * radius / sample_step)) + 1)
    target = _step_graph(xs, maximal, sample_step)
    window = CompactWindow(radius, radius)
    q = {}
    dists = []
    for s in slopes:
        d = graph_distance(_sigmoid_graph(s, xs, radius, sample_step), target, window)
        q[f"d_slope_{s:g}"] = d
        dists.append(d)
    if maximal:
        passed = dists[-1] < 0.02
        detail = ("with the vertical segment filling the jump, steep sigmoids do "
                  "approximate the graph: the distance collapses with the slope.")
    else:
        floor = 0.5 - sample_step - 1e-6
        passed = all(d >= floor for d in dists)
        detail = ("every continuous single-valued family crosses height 1/2 near the "
                  "jump, and that crossing stays at distance about 1/2 from the "
                  "two-valued step graph, for every slope; sigmoids stand in for the "
                  "general continuous family.")
    return VerifyOutcome("step_counterexample" + ("_maximal" if maximal else ""),
                         q, bool(passed), detail)


def _abs_subdiff_sample(step: float, radius: float) -> GraphSample:
    xs = np.arange(-radius, radius + step / 2, step)
    base = sample_graph(AbsSubdifferential(), xs, mode="min_norm")
    seg = np.arange(-1.0, 1.0 + step / 2, step)
    return GraphSample(np.concatenate([base.inputs, np.zeros_like(seg)]),
                       np.concatenate([base.outputs, seg]), label="abs_subdiff")


def verify_yosida_graph_convergence(A: OperatorSpec | None = None,
                                    lambdas=(0.5, 0.2, 0.05, 0.01),
                                    window: CompactWindow | None = None,
                                    step: float = 0.01,
                                    fields: list | None = None) -> VerifyOutcome:
    """Sampled d_gph(A_lambda, A) across decreasing lambda.

    Scalar case (default, the absolute-value subdifferential): the
    regularized graph is sampled on a uniform input grid plus inputs
    lambda*v spanning the ramp, so the sample resolves the transition
    region for every lambda. Field case: pass band-limited inputs; the
    output-side excess against exact graph points (J_lam u, A_lam u) is
    reported instead of the full two-sided distance.
    """
    radius = 2.0
    window = window or CompactWindow(2.0, 1.5)
    q = {}
    ds = []
    if fields is not None:
        if A is None:
            raise ParameterError("field verification needs an operator")
        exact_inputs = [f for f in fields]
        full = GraphSample(
            np.stack([f.values for f in exact_inputs]),
            np.stack([apply(A, f).values for f in exact_inputs]),
        )
        for lam in lambdas:
            ys = sample_yosida_graph(A, lam, exact_inputs)
            resolved = [resolvent(A, lam, f)[0] for f in exact_inputs]
            anchor = GraphSample(
                np.concatenate([np.stack([r.values for r in resolved]), full.inputs]),
                np.concatenate([ys.outputs, full.outputs]),
            )
            d = one_sided_excess(ys, anchor, CompactWindow.unbounded())
            q[f"excess_lambda_{lam:g}"] = d
            ds.append(d)
        passed = all(b < a * (1 + 1e-9) for a, b in zip(ds, ds[1:])) if len(ds) > 1 else True
        detail = "output-side excess of the regularized graph against exact target graph points"
        return VerifyOutcome("yosida_graph_convergence_field", q, bool(passed), detail)

    A = A or AbsSubdifferential()
    target = _abs_subdiff_sample(step, radius)
    for lam in lambdas:
        grid_inputs = np.arange(-radius, radius + step / 2, step)
        ramp_inputs = lam * np.arange(-1.0, 1.0 + step / 2, step)
        inputs = np.unique(np.concatenate([grid_inputs, ramp_inputs]))
        ys = sample_yosida_graph(A, lam, inputs)
        d = graph_distance(ys, target, window)
        q[f"d_lambda_{lam:g}"] = d
        ds.append(d)
    strictly_decreasing = all(b < a for a, b in zip(ds, ds[1:]))
    passed = strictly_decreasing and ds[-1] <= 2 * step
    detail = ("graph distance of the regularized operator to the set-valued target, "
              f"sampled at resolution {step}; the ramp region is sampled adaptively "
              "so resolution does not mask the convergence")
    return VerifyOutcome("yosida_graph_convergence", q, bool(passed), detail)


def measure_edap_error(inputs: np.ndarray, m_list=(2, 4, 8, 16, 32),
                       outputs: np.ndarray | None = None) -> VerifyOutcome:
    """C_B over the sample per cutoff, plus the output-radius bound R_K."""
    if len(m_list) == 0:
        return VerifyOutcome("edap_error", {}, True, "warning: empty cutoff list, vacuous pass")
    inputs = np.asarray(inputs, dtype=np.float64)
    grid = Grid1D(inputs.shape[1])
    fields = [Field1D(grid, row) for row in inputs]
    spectra = np.abs(np.fft.rfft(inputs, axis=1))
    active = np.nonzero(np.max(spectra, axis=0) > 1e-9 * np.max(spectra))[0]
    top_freq = int(active.max()) if len(active) else 0
    q = {"top_frequency": float(top_freq)}
    if outputs is not None:
        q["R_K"] = float(np.max(np.sqrt(np.maximum(
            np.sum(np.asarray(outputs) ** 2, axis=1) / outputs.shape[1], 0.0))))
    cbs = []
    for m in m_list:
        cb = max(norm(Field1D(grid, f.values - reconstruct(truncate_modes(f, m), grid).values))
                 for f in fields)
        q[f"C_B_m{m}"] = cb
        cbs.append(cb)
    passed = all(b <= a + 1e-12 for a, b in zip(cbs, cbs[1:]))
    for m, cb in zip(m_list, cbs):
        if m >= top_freq:
            passed &= cb <= 1e-12
    detail = "sup reconstruction error over the sample per mode cutoff"
    return VerifyOutcome("edap_error", q, bool(passed), detail)


def _default_band_limited_fields(seed: int = 0, count: int = 16) -> list[Field1D]:
    from .datagen import FourierFieldConfig, sample_field_1d
    from .rng import Rng

    cfg = FourierFieldConfig(dim=1, k_min=3, k_max=6, n_min=2, n_max=24, beta=0.5, seed=seed)
    grid = Grid1D(128)
    master = Rng(seed)
    return [sample_field_1d(cfg, grid, master.spawn(i)) for i in range(count)]


def default_edap_outcome(seed: int = 0) -> VerifyOutcome:
    fields = _default_band_limited_fields(seed)
    return measure_edap_error(np.stack([f.values for f in fields]))


def default_field_yosida_outcome(seed: int = 0) -> VerifyOutcome:
    return verify_yosida_graph_convergence(A=DerivativePeriodic1D(), lambdas=(0.3, 0.1, 0.03),
                                           fields=_default_band_limited_fields(seed))


def run_all(seed: int = 0) -> list[VerifyOutcome]:
    return [
        verify_uniform_counterexample(),
        verify_lp_counterexample(),
        verify_step_counterexample(maximal=False),
        verify_step_counterexample(maximal=True),
        verify_yosida_graph_convergence(),
        default_field_yosida_outcome(seed),
        default_edap_outcome(seed),
    ]

"""Target operators, their resolvents and Yosida approximations.

Supported operators:
  - DerivativePeriodic1D: u -> u' on the periodic unit interval.
  - PLaplacian2D: u -> -div(|grad u|^(p-2) grad u) with an epsilon
    regularization of the gradient magnitude. The discrete gradient uses
    forward differences and the divergence is its negative adjoint, so
    the operator is exactly the H-gradient of the convex discrete
    p-Dirichlet energy and hence exactly monotone.
  - AbsSubdifferential: the scalar sign operator (subdifferential of
    |x|), set-valued at 0 with minimal-norm selection 0.
  - StepOperator: the scalar {0,1} step; closed and monotone but not
    maximally monotone, so it exposes no resolvent.
  - SpectralMultiplier1D: diagonal action sigma_k per Fourier mode.

Resolvents solve u + lam*A(u) = z: exactly in Fourier space for the
spectral operators, by soft thresholding for AbsSubdifferential, and by
gradient descent with Armijo backtracking on the strongly convex
objective 0.5||u-z||^2 + lam*J_p,eps(u) for the p-Laplacian.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Union

import numpy as np

from .hilbert import Field1D, Field2D, Grid1D, Grid2D, norm, spectral_derivative
from .util import batched_sqnorms, flatten_samples


class CapabilityError(ValueError):
    """The requested operation is not defined for this operator."""


class NumericError(ArithmeticError):
    """A computation produced non-finite values."""


@dataclass(frozen=True)
class DerivativePeriodic1D:
    pass


@dataclass(frozen=True)
class PLaplacian2D:
    p: float
    eps: float = 1e-8

    def __post_init__(self):
        if not self.p > 1:
            raise ValueError(f"p must exceed 1, got {self.p}")
        if self.eps < 0:
            raise ValueError(f"eps must be nonnegative, got {self.eps}")


@dataclass(frozen=True)
class AbsSubdifferential:
    pass


@dataclass(frozen=True)
class StepOperator:
    pass


@dataclass(frozen=True)
class SpectralMultiplier1D:
    multiplier: np.ndarray = field(repr=False)

    def __post_init__(self):
        object.__setattr__(self, "multiplier", np.asarray(self.multiplier, dtype=np.complex128))


OperatorSpec = Union[
    DerivativePeriodic1D, PLaplacian2D, AbsSubdifferential, StepOperator, SpectralMultiplier1D
]

_SCALAR_OPS = (AbsSubdifferential, StepOperator)


@dataclass
class ResolventSolveReport:
    iterations: int
    residual: float
    converged: bool


@dataclass(frozen=True)
class GraphSample:
    """A finite sample of an operator graph in H x H.

    inputs/outputs are stacked along axis 0: shape (N,) for scalar
    operators, (N, n) or (N, n, n) for fields. Set-valued operators may
    repeat an input with several outputs.
    """

    inputs: np.ndarray = field(repr=False)
    outputs: np.ndarray = field(repr=False)
    label: str = ""

    def __post_init__(self):
        a = np.asarray(self.inputs, dtype=np.float64)
        b = np.asarray(self.outputs, dtype=np.float64)
        if len(a) == 0:
            raise ValueError("graph sample must be non-empty")
        if a.shape != b.shape:
            raise ValueError(f"inputs {a.shape} and outputs {b.shape} disagree")
        object.__setattr__(self, "inputs", a)
        object.__setattr__(self, "outputs", b)

    def __len__(self) -> int:
        return len(self.inputs)

    def input_norms(self) -> np.ndarray:
        return np.sqrt(batched_sqnorms(self.inputs))

    def output_norms(self) -> np.ndarray:
        return np.sqrt(batched_sqnorms(self.outputs))


def op_name(A: OperatorSpec) -> str:
    return type(A).__name__


def op_to_dict(A: OperatorSpec) -> dict:
    d = {"kind": op_name(A)}
    if isinstance(A, PLaplacian2D):
        d.update(p=A.p, eps=A.eps)
    elif isinstance(A, SpectralMultiplier1D):
        d.update(multiplier_re=A.multiplier.real.tolist(), multiplier_im=A.multiplier.imag.tolist())
    return d


def op_from_dict(d: dict) -> OperatorSpec:
    kind = d["kind"]
    if kind == "DerivativePeriodic1D":
        return DerivativePeriodic1D()
    if kind == "PLaplacian2D":
        return PLaplacian2D(p=float(d["p"]), eps=float(d.get("eps", 1e-8)))
    if kind == "AbsSubdifferential":
        return AbsSubdifferential()
    if kind == "StepOperator":
        return StepOperator()
    if kind == "SpectralMultiplier1D":
        m = np.asarray(d["multiplier_re"]) + 1j * np.asarray(d["multiplier_im"])
        return SpectralMultiplier1D(m)
    raise ValueError(f"unknown operator kind {kind!r}")


def _check_finite(x, what: str):
    arr = x.values if isinstance(x, (Field1D, Field2D)) else np.asarray(x)
    if not np.all(np.isfinite(arr)):
        raise NumericError(f"non-finite values in {what}")
    return x


def _plap_flux(op: PLaplacian2D, u: np.ndarray, n: int):
    h = 1.0 / n
    gx = (np.roll(u, -1, axis=0) - u) / h
    gy = (np.roll(u, -1, axis=1) - u) / h
    mag2 = gx * gx + gy * gy + op.eps * op.eps
    if op.eps == 0.0 and op.p < 2.0:
        with np.errstate(divide="ignore"):
            w = np.where(mag2 > 0.0, mag2 ** ((op.p - 2.0) / 2.0), 0.0)
    else:
        w = mag2 ** ((op.p - 2.0) / 2.0)
    return w * gx, w * gy, mag2


def _plap_apply_values(op: PLaplacian2D, u: np.ndarray, n: int) -> np.ndarray:
    fx, fy, _ = _plap_flux(op, u, n)
    h = 1.0 / n
    div = (fx - np.roll(fx, 1, axis=0)) / h + (fy - np.roll(fy, 1, axis=1)) / h
    return -div


def _plap_energy(op: PLaplacian2D, u: np.ndarray, n: int) -> float:
    h = 1.0 / n
    gx = (np.roll(u, -1, axis=0) - u) / h
    gy = (np.roll(u, -1, axis=1) - u) / h
    mag2 = gx * gx + gy * gy + op.eps * op.eps
    return float(np.mean(mag2 ** (op.p / 2.0))) / op.p


def apply(A: OperatorSpec, u):
    """Evaluate A at u; set-valued kinks return the minimal-norm element."""
    if isinstance(A, DerivativePeriodic1D):
        if not isinstance(u, Field1D):
            raise CapabilityError("DerivativePeriodic1D acts on Field1D")
        return _check_finite(spectral_derivative(u), "derivative output")
    if isinstance(A, SpectralMultiplier1D):
        if not isinstance(u, Field1D):
            raise CapabilityError("SpectralMultiplier1D acts on Field1D")
        n = u.grid.n
        if A.multiplier.shape != (n // 2 + 1,):
            raise CapabilityError(f"multiplier length {A.multiplier.shape} does not fit grid {n}")
        c = np.fft.rfft(u.values) * A.multiplier
        return _check_finite(Field1D(u.grid, np.fft.irfft(c, n=n)), "multiplier output")
    if isinstance(A, PLaplacian2D):
        if not isinstance(u, Field2D):
            raise CapabilityError("PLaplacian2D acts on Field2D")
        out = Field2D(u.grid, _plap_apply_values(A, u.values, u.grid.n))
        return _check_finite(out, "p-laplacian output")
    if isinstance(A, AbsSubdifferential):
        x = float(u)
        return float(np.sign(x))
    if isinstance(A, StepOperator):
        x = float(u)
        return 0.0 if x <= 0 else 1.0
    raise CapabilityError(f"unsupported operator {A!r}")


def apply_batch(A: OperatorSpec, inputs: np.ndarray, grid=None) -> np.ndarray:
    """Vectorized apply over stacked inputs (axis 0)."""
    inputs = np.asarray(inputs, dtype=np.float64)
    if isinstance(A, _SCALAR_OPS):
        return np.array([apply(A, x) for x in inputs])
    if inputs.ndim == 2:
        g = grid or Grid1D(inputs.shape[1])
        return np.stack([apply(A, Field1D(g, row)).values for row in inputs])
    g = grid or Grid2D(inputs.shape[1])
    return np.stack([apply(A, Field2D(g, row)).values for row in inputs])


def _spectral_sigma(A: OperatorSpec, n: int) -> np.ndarray:
    if isinstance(A, DerivativePeriodic1D):
        k = np.arange(n // 2 + 1, dtype=np.float64)
        sigma = 2j * np.pi * k
        sigma[-1] = 0.0
        return sigma
    return A.multiplier


def resolvent(A: OperatorSpec, lam: float, z, tol: float = 1e-7, max_iter: int = 5000):
    """Solve u + lam*A(u) = z; returns (u, ResolventSolveReport)."""
    if lam <= 0:
        raise ValueError(f"lambda must be positive, got {lam}")
    if isinstance(A, StepOperator):
        raise CapabilityError("StepOperator is not maximally monotone: no resolvent")
    if isinstance(A, AbsSubdifferential):
        x = float(z)
        u = float(np.sign(x) * max(abs(x) - lam, 0.0))
        return u, ResolventSolveReport(iterations=0, residual=0.0, converged=True)
    if isinstance(A, (DerivativePeriodic1D, SpectralMultiplier1D)):
        if not isinstance(z, Field1D):
            raise CapabilityError("spectral resolvent needs a Field1D right-hand side")
        n = z.grid.n
        sigma = _spectral_sigma(A, n)
        c = np.fft.rfft(z.values) / (1.0 + lam * sigma)
        u = Field1D(z.grid, np.fft.irfft(c, n=n))
        res_field = Field1D(z.grid, u.values + lam * apply(A, u).values - z.values)
        return u, ResolventSolveReport(iterations=0, residual=norm(res_field), converged=True)
    if isinstance(A, PLaplacian2D):
        return _plap_resolvent(A, lam, z, tol, max_iter)
    raise CapabilityError(f"unsupported operator {A!r}")


def _plap_resolvent(op: PLaplacian2D, lam: float, z: Field2D, tol: float, max_iter: int):
    if not isinstance(z, Field2D):
        raise CapabilityError("p-laplacian resolvent needs a Field2D right-hand side")
    n = z.grid.n
    zv = z.values
    u = zv.copy()

    def objective(v):
        return 0.5 * float(np.mean((v - zv) ** 2)) + lam * _plap_energy(op, v, n)

    def gradient(v):
        return (v - zv) + lam * _plap_apply_values(op, v, n)

    obj = objective(u)
    step = 1.0
    g = gradient(u)
    gn = float(np.sqrt(np.mean(g * g)))
    it = 0
    while gn > tol and it < max_iter:
        # Armijo backtracking on the H-space gradient
        gsq = gn * gn
        while True:
            cand = u - step * g
            cobj = objective(cand)
            if cobj <= obj - 1e-4 * step * gsq or step < 1e-14:
                break
            step *= 0.5
        u, obj = cand, cobj
        step *= 1.5
        g = gradient(u)
        gn = float(np.sqrt(np.mean(g * g)))
        it += 1
    return Field2D(z.grid, u), ResolventSolveReport(iterations=it, residual=gn, converged=gn <= tol)


def yosida(A: OperatorSpec, lam: float, z, tol: float = 1e-7):
    """(z - J_lam z) / lam; equals clamp(z/lam, -1, 1) for AbsSubdifferential."""
    if lam <= 0:
        raise ValueError(f"lambda must be positive, got {lam}")
    if isinstance(A, AbsSubdifferential):
        # closed form; exact at the saturated region where the generic
        # difference quotient would round away from +-1
        return float(np.clip(float(z) / lam, -1.0, 1.0))
    u, _ = resolvent(A, lam, z, tol=tol)
    if isinstance(z, (Field1D, Field2D)):
        return type(z)(z.grid, (z.values - u.values) / lam)
    return (float(z) - u) / lam


def _value_set(A: OperatorSpec, x: float):
    """Describe A(x) for scalar operators: ('points', [...]) or ('interval', lo, hi)."""
    if isinstance(A, AbsSubdifferential):
        if x < 0:
            return ("points", [-1.0])
        if x > 0:
            return ("points", [1.0])
        return ("interval", -1.0, 1.0)
    if isinstance(A, StepOperator):
        if x < 0:
            return ("points", [0.0])
        if x > 0:
            return ("points", [1.0])
        return ("points", [0.0, 1.0])
    raise CapabilityError(f"{op_name(A)} has no scalar value-set description")


def sample_graph(A: OperatorSpec, inputs, mode: str = "min_norm", output_grid=None, label: str = "") -> GraphSample:
    """Sample gph(A) at the given inputs.

    mode "min_norm" pairs each input with the minimal-norm element
    A0(input). mode "set_valued" (scalar operators only) pairs each
    input with every value of `output_grid` lying in A(input).
    """
    if mode == "min_norm":
        if isinstance(A, _SCALAR_OPS):
            xs = np.asarray(inputs, dtype=np.float64)
            ys = np.array([apply(A, x) for x in xs])
            return GraphSample(xs, ys, label=label or op_name(A))
        fields = list(inputs)
        xs = np.stack([f.values for f in fields])
        ys = np.stack([apply(A, f).values for f in fields])
        return GraphSample(xs, ys, label=label or op_name(A))
    if mode == "set_valued":
        if not isinstance(A, _SCALAR_OPS):
            raise CapabilityError("set_valued sampling is offered for scalar operators only")
        if output_grid is None:
            raise ValueError("set_valued sampling needs an output_grid")
        grid = np.asarray(output_grid, dtype=np.float64)
        xs, ys = [], []
        for x in np.asarray(inputs, dtype=np.float64):
            desc = _value_set(A, float(x))
            if desc[0] == "points":
                for v in desc[1]:
                    hits = grid[np.abs(grid - v) <= 1e-12]
                    for h in hits:
                        xs.append(x)
                        ys.append(h)
            else:
                lo, hi = desc[1], desc[2]
                for h in grid[(grid >= lo - 1e-12) & (grid <= hi + 1e-12)]:
                    xs.append(x)
                    ys.append(h)
        return GraphSample(np.array(xs), np.array(ys), label=label or op_name(A))
    raise ValueError(f"unknown sampling mode {mode!r}")


def sample_yosida_graph(A: OperatorSpec, lam: float, inputs, label: str = "") -> GraphSample:
    """Sample gph(A_lam) at the given inputs (scalar or Field1D)."""
    first = inputs[0] if len(inputs) else None
    if isinstance(first, (Field1D, Field2D)):
        xs = np.stack([f.values for f in inputs])
        ys = np.stack([yosida(A, lam, f).values for f in inputs])
    else:
        xs = np.asarray(inputs, dtype=np.float64)
        ys = np.array([yosida(A, lam, float(x)) for x in xs])
    return GraphSample(xs, ys, label=label or f"{op_name(A)}_yosida_{lam}")

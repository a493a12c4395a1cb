"""Discretized L2 spaces on periodic unit domains.

Fields are real samples of functions on uniform periodic grids over
[0,1] or [0,1]^2. Inner products use the rectangle rule with weight
1/n (1/n^2 in 2d), which is exact for trigonometric polynomials below
the Nyquist mode. Spectra carry Fourier-series coefficients (mode 0 is
the mean), so Parseval reads ||u||^2 = sum_k w_k |c_k|^2 with weights
w_0 = w_{n/2} = 1 and w_k = 2 in between.

Everything is a pure function of immutable values; nothing here holds
state, so concurrent use is safe.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np


class GridMismatchError(ValueError):
    """Operands live on different grids."""


class ParameterError(ValueError):
    """An argument is outside its documented range."""


def _check_grid_n(n: int) -> None:
    if n < 4 or n % 2 != 0:
        raise ParameterError(f"grid size must be even and >= 4, got {n}")


@dataclass(frozen=True)
class Grid1D:
    """Uniform periodic grid on [0,1) with points t_i = i/n."""

    n: int

    def __post_init__(self):
        _check_grid_n(self.n)

    @property
    def spacing(self) -> float:
        return 1.0 / self.n

    def points(self) -> np.ndarray:
        return np.arange(self.n) / self.n


@dataclass(frozen=True)
class Grid2D:
    """Uniform periodic n x n grid on [0,1)^2."""

    n: int

    def __post_init__(self):
        _check_grid_n(self.n)

    @property
    def spacing(self) -> float:
        return 1.0 / self.n

    def points(self):
        t = np.arange(self.n) / self.n
        return np.meshgrid(t, t, indexing="ij")


def _as_values(values, shape) -> np.ndarray:
    v = np.asarray(values, dtype=np.float64)
    if v.shape != shape:
        raise ParameterError(f"values shape {v.shape} does not match grid {shape}")
    if not np.all(np.isfinite(v)):
        raise ParameterError("field values must be finite")
    return v


@dataclass(frozen=True)
class Field1D:
    grid: Grid1D
    values: np.ndarray = field(repr=False)

    def __post_init__(self):
        object.__setattr__(self, "values", _as_values(self.values, (self.grid.n,)))


@dataclass(frozen=True)
class Field2D:
    grid: Grid2D
    values: np.ndarray = field(repr=False)

    def __post_init__(self):
        object.__setattr__(self, "values", _as_values(self.values, (self.grid.n, self.grid.n)))


Field = Field1D | Field2D


@dataclass(frozen=True)
class Spectrum1D:
    """Half spectrum of a real field, length n/2 + 1, series-normalized."""

    grid: Grid1D
    coeffs: np.ndarray = field(repr=False)

    def __post_init__(self):
        c = np.asarray(self.coeffs, dtype=np.complex128)
        if c.shape != (self.grid.n // 2 + 1,):
            raise ParameterError(f"expected {self.grid.n // 2 + 1} coefficients, got {c.shape}")
        object.__setattr__(self, "coeffs", c)


def parseval_weights(n: int) -> np.ndarray:
    w = np.full(n // 2 + 1, 2.0)
    w[0] = 1.0
    w[-1] = 1.0
    return w


def _same_grid(u: Field, v: Field) -> None:
    if type(u) is not type(v) or u.grid != v.grid:
        raise GridMismatchError(f"grids differ: {u.grid} vs {v.grid}")


def inner_product(u: Field, v: Field) -> float:
    _same_grid(u, v)
    d = 1 if isinstance(u, Field1D) else 2
    return float(np.sum(u.values * v.values)) / u.grid.n ** d


def norm(u: Field) -> float:
    return float(np.sqrt(max(inner_product(u, u), 0.0)))


def distance(u: Field, v: Field) -> float:
    _same_grid(u, v)
    w = type(u)(u.grid, u.values - v.values)
    return norm(w)


def fft(u: Field1D) -> Spectrum1D:
    return Spectrum1D(u.grid, np.fft.rfft(u.values) / u.grid.n)


def ifft(s: Spectrum1D) -> Field1D:
    return Field1D(s.grid, np.fft.irfft(s.coeffs * s.grid.n, n=s.grid.n))


def spectrum_sqnorm(s: Spectrum1D) -> float:
    """Parseval evaluation of ||u||^2 from the half spectrum."""
    return float(np.sum(parseval_weights(s.grid.n) * np.abs(s.coeffs) ** 2))


def spectral_derivative(u: Field1D) -> Field1D:
    """Differentiate by scaling mode k with 2*pi*i*k; Nyquist is dropped.

    Exact for trigonometric polynomials with all modes below n/2.
    """
    n = u.grid.n
    c = np.fft.rfft(u.values)
    k = np.arange(n // 2 + 1, dtype=np.float64)
    c *= 2j * np.pi * k
    c[-1] = 0.0
    return Field1D(u.grid, np.fft.irfft(c, n=n))


def encoder_width(m: int) -> int:
    return 2 * m + 1


def _check_cutoff(m: int, n: int) -> None:
    if not (0 < m <= n // 2):
        raise ParameterError(f"mode cutoff m={m} outside (0, {n // 2}]")


def truncate_modes(u: Field1D, m: int) -> np.ndarray:
    """Isometric encoding of modes 0..m into a real vector of width 2m+1.

    Layout: [c_0, s*Re c_1, -s*Im c_1, ..., s*Re c_m, -s*Im c_m] with
    s = sqrt(2), except the Nyquist mode (m = n/2) which enters with
    weight 1 and a structurally zero partner slot. The Euclidean norm of
    the vector equals the H-norm of the band-limited projection, so the
    map is 1-Lipschitz and maps 0 to 0.
    """
    n = u.grid.n
    _check_cutoff(m, n)
    c = np.fft.rfft(u.values) / n
    out = np.empty(encoder_width(m))
    out[0] = c[0].real
    top = min(m, n // 2 - 1)
    s = np.sqrt(2.0)
    out[1 : 2 * top + 1 : 2] = s * c[1 : top + 1].real
    out[2 : 2 * top + 2 : 2] = -s * c[1 : top + 1].imag
    if m == n // 2:
        out[-2] = c[-1].real
        out[-1] = 0.0
    return out


def reconstruct(coeffs: np.ndarray, grid: Grid1D) -> Field1D:
    """Adjoint of truncate_modes: zero-pad the spectrum and invert."""
    coeffs = np.asarray(coeffs, dtype=np.float64)
    if coeffs.ndim != 1 or coeffs.size % 2 != 1:
        raise ParameterError(f"coefficient vector must have odd length, got {coeffs.shape}")
    m = (coeffs.size - 1) // 2
    _check_cutoff(m, grid.n)
    c = np.zeros(grid.n // 2 + 1, dtype=np.complex128)
    c[0] = coeffs[0]
    top = min(m, grid.n // 2 - 1)
    s = 1.0 / np.sqrt(2.0)
    c[1 : top + 1] = s * (coeffs[1 : 2 * top + 1 : 2] - 1j * coeffs[2 : 2 * top + 2 : 2])
    if m == grid.n // 2:
        c[-1] = coeffs[-2]
    return Field1D(grid, np.fft.irfft(c * grid.n, n=grid.n))


def encoder_matrix(grid: Grid1D, m: int) -> np.ndarray:
    """Dense (2m+1, n) matrix E with E @ values == truncate_modes(u, m)."""
    n = grid.n
    _check_cutoff(m, n)
    t = grid.points()
    E = np.zeros((encoder_width(m), n))
    E[0] = 1.0 / n
    s = np.sqrt(2.0) / n
    top = min(m, n // 2 - 1)
    for k in range(1, top + 1):
        E[2 * k - 1] = s * np.cos(2 * np.pi * k * t)
        E[2 * k] = s * np.sin(2 * np.pi * k * t)
    if m == n // 2:
        E[-2] = np.cos(np.pi * n * t) / n
    return E


def decoder_matrix(grid: Grid1D, m: int) -> np.ndarray:
    """Dense (n, 2m+1) matrix D, the H-adjoint of the encoder."""
    return grid.n * encoder_matrix(grid, m).T

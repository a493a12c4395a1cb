"""Minimal reverse-mode differentiation over dense float64 arrays.

A Tape records nodes in creation order (which is already topological),
and `backward` walks the list once in reverse, accumulating exact
adjoints. Tapes are rebuilt every training step and owned by it; nothing
is shared between steps.

Primitives cover exactly what the models and losses need: matmul,
broadcast add/sub/mul, scaling, relu/gelu/tanh, slicing and
concatenation, sums, squared norms, temperature log-sum-exp (backward
through the stabilized softmax weights), sqrt with a floor under the
root (subgradient choice at the kink), an all-pairs squared-distance
block, and complex mode multiplication in the real-pair representation
for spectral layers.
"""

from __future__ import annotations

import numpy as np


class NumericError(ArithmeticError):
    """A forward value came out non-finite; the message names the node."""


class ShapeError(ValueError):
    pass


def _unbroadcast(g: np.ndarray, shape: tuple) -> np.ndarray:
    """Reduce a broadcasted gradient back to `shape`."""
    while g.ndim > len(shape):
        g = g.sum(axis=0)
    for ax, s in enumerate(shape):
        if s == 1 and g.shape[ax] != 1:
            g = g.sum(axis=ax, keepdims=True)
    return g.reshape(shape)


class Tensor:
    __slots__ = ("data", "grad", "requires_grad", "name", "_backward")

    def __init__(self, data, requires_grad=False, name="leaf"):
        self.data = np.asarray(data, dtype=np.float64)
        self.grad = None
        self.requires_grad = requires_grad
        self.name = name
        self._backward = None

    @property
    def shape(self):
        return self.data.shape

    def accumulate(self, g: np.ndarray) -> None:
        if self.grad is None:
            self.grad = np.array(g, dtype=np.float64)
        else:
            self.grad += g


class Tape:
    """Ordered op recording plus reverse sweep."""

    def __init__(self):
        self.nodes: list[Tensor] = []

    def leaf(self, data, requires_grad=False, name="leaf") -> Tensor:
        t = Tensor(data, requires_grad=requires_grad, name=name)
        self.nodes.append(t)
        return t

    def constant(self, data, name="const") -> Tensor:
        return self.leaf(data, requires_grad=False, name=name)

    def _node(self, data, backward, name) -> Tensor:
        arr = np.asarray(data, dtype=np.float64)
        if not np.all(np.isfinite(arr)):
            raise NumericError(f"non-finite forward value in node '{name}'")
        t = Tensor(arr, name=name)
        t._backward = backward
        self.nodes.append(t)
        return t

    def backward(self, out: Tensor) -> None:
        if out.data.shape != ():
            raise ShapeError("backward starts from a scalar node")
        out.accumulate(np.asarray(1.0))
        for node in reversed(self.nodes):
            if node.grad is not None and node._backward is not None:
                node._backward(node.grad)

    # ---- arithmetic ----

    def add(self, a: Tensor, b: Tensor) -> Tensor:
        def back(g):
            a.accumulate(_unbroadcast(g, a.shape))
            b.accumulate(_unbroadcast(g, b.shape))
        return self._node(a.data + b.data, back, "add")

    def sub(self, a: Tensor, b: Tensor) -> Tensor:
        def back(g):
            a.accumulate(_unbroadcast(g, a.shape))
            b.accumulate(_unbroadcast(-g, b.shape))
        return self._node(a.data - b.data, back, "sub")

    def mul(self, a: Tensor, b: Tensor) -> Tensor:
        def back(g):
            a.accumulate(_unbroadcast(g * b.data, a.shape))
            b.accumulate(_unbroadcast(g * a.data, b.shape))
        return self._node(a.data * b.data, back, "mul")

    def scale(self, a: Tensor, c: float) -> Tensor:
        def back(g):
            a.accumulate(c * g)
        return self._node(c * a.data, back, "scale")

    def neg(self, a: Tensor) -> Tensor:
        return self.scale(a, -1.0)

    def add_const(self, a: Tensor, c) -> Tensor:
        def back(g):
            a.accumulate(_unbroadcast(g, a.shape))
        return self._node(a.data + c, back, "add_const")

    def matmul(self, a: Tensor, b: Tensor) -> Tensor:
        if a.data.ndim != 2 or b.data.ndim != 2 or a.data.shape[1] != b.data.shape[0]:
            raise ShapeError(f"matmul mismatch: {a.shape} @ {b.shape}")
        def back(g):
            a.accumulate(g @ b.data.T)
            b.accumulate(a.data.T @ g)
        return self._node(a.data @ b.data, back, "matmul")

    # ---- pointwise nonlinearities ----

    def relu(self, a: Tensor) -> Tensor:
        mask = a.data > 0
        def back(g):
            a.accumulate(g * mask)
        return self._node(np.where(mask, a.data, 0.0), back, "relu")

    def gelu(self, a: Tensor) -> Tensor:
        # tanh form of gelu; the derivative matches this forward exactly
        c = np.sqrt(2.0 / np.pi)
        x = a.data
        inner = c * (x + 0.044715 * x ** 3)
        t = np.tanh(inner)
        def back(g):
            d_inner = c * (1.0 + 3 * 0.044715 * x ** 2)
            a.accumulate(g * (0.5 * (1.0 + t) + 0.5 * x * (1.0 - t * t) * d_inner))
        return self._node(0.5 * x * (1.0 + t), back, "gelu")

    def tanh(self, a: Tensor) -> Tensor:
        t = np.tanh(a.data)
        def back(g):
            a.accumulate(g * (1.0 - t * t))
        return self._node(t, back, "tanh")

    # ---- shape ops ----

    def reshape(self, a: Tensor, shape) -> Tensor:
        def back(g):
            a.accumulate(g.reshape(a.data.shape))
        return self._node(a.data.reshape(shape), back, "reshape")

    def slice_(self, a: Tensor, key) -> Tensor:
        # np.add.at keeps duplicate fancy indices additive in the backward
        def back(g):
            full = np.zeros_like(a.data)
            np.add.at(full, key, g)
            a.accumulate(full)
        return self._node(a.data[key].copy(), back, "slice")

    def concat(self, parts: list[Tensor], axis: int = 0) -> Tensor:
        sizes = [p.data.shape[axis] for p in parts]
        offsets = np.cumsum([0] + sizes)
        def back(g):
            for p, lo, hi in zip(parts, offsets[:-1], offsets[1:]):
                idx = [slice(None)] * g.ndim
                idx[axis] = slice(lo, hi)
                p.accumulate(g[tuple(idx)])
        return self._node(np.concatenate([p.data for p in parts], axis=axis), back, "concat")

    # ---- reductions ----

    def sum(self, a: Tensor) -> Tensor:
        def back(g):
            a.accumulate(np.full_like(a.data, float(g)))
        return self._node(np.sum(a.data), back, "sum")

    def sqnorm(self, a: Tensor) -> Tensor:
        def back(g):
            a.accumulate(2.0 * float(g) * a.data)
        return self._node(np.sum(a.data * a.data), back, "sqnorm")

    def sqnorm_rows(self, a: Tensor) -> Tensor:
        if a.data.ndim < 2:
            raise ShapeError("sqnorm_rows wants a batched array")
        flat = a.data.reshape(a.data.shape[0], -1)
        def back(g):
            a.accumulate((2.0 * g[:, None] * flat).reshape(a.data.shape))
        return self._node(np.sum(flat * flat, axis=1), back, "sqnorm_rows")

    def lse(self, a: Tensor, tau: float, axis=None) -> Tensor:
        """tau * log sum exp(a / tau) along `axis`, max-stabilized."""
        if tau <= 0:
            raise ValueError(f"temperature must be positive, got {tau}")
        x = a.data / tau
        m = np.max(x, axis=axis, keepdims=True)
        e = np.exp(x - m)
        s = np.sum(e, axis=axis, keepdims=True)
        out = tau * np.squeeze(np.log(s) + m, axis=axis)
        w = e / s  # softmax weights, reused by the backward pass
        def back(g):
            a.accumulate(np.expand_dims(g, axis) * w if axis is not None else g * w)
        return self._node(out, back, "lse")

    def softmin(self, a: Tensor, tau: float, axis=None) -> Tensor:
        return self.neg(self.lse(self.neg(a), tau, axis=axis))

    def sqrt_floor(self, a: Tensor, floor: float = 1e-12) -> Tensor:
        r = np.sqrt(a.data + floor)
        def back(g):
            a.accumulate(g * (0.5 / r))
        return self._node(r, back, "sqrt_floor")

    def maximum2(self, a: Tensor, b: Tensor) -> Tensor:
        """Hard max of two scalars; ties send the gradient to `a`."""
        take_a = float(a.data) >= float(b.data)
        def back(g):
            (a if take_a else b).accumulate(g)
        return self._node(a.data if take_a else b.data, back, "maximum2")

    # ---- fused geometry ----

    def pairwise_sqdist(self, ref: np.ndarray, q: Tensor) -> Tensor:
        """(N, M) matrix of ||ref_i - q_j||^2; gradient flows into q only."""
        P = np.asarray(ref, dtype=np.float64).reshape(len(ref), -1)
        Q = q.data.reshape(q.data.shape[0], -1)
        if P.shape[1] != Q.shape[1]:
            raise ShapeError(f"pairwise dims differ: {P.shape[1]} vs {Q.shape[1]}")
        d2 = (
            np.sum(P * P, axis=1)[:, None]
            + np.sum(Q * Q, axis=1)[None, :]
            - 2.0 * (P @ Q.T)
        )
        np.maximum(d2, 0.0, out=d2)
        def back(g):
            cs = np.sum(g, axis=0)
            q.accumulate((2.0 * (cs[:, None] * Q - g.T @ P)).reshape(q.data.shape))
        return self._node(d2, back, "pairwise_sqdist")

    # ---- spectral ops (real-pair representation) ----

    def fft_pair(self, x: Tensor, axes: tuple) -> tuple[Tensor, Tensor]:
        """Orthonormal FFT of a real tensor along `axes`, as (re, im)."""
        X = np.fft.fftn(x.data, axes=axes, norm="ortho")
        def back_re(g):
            x.accumulate(np.fft.ifftn(g, axes=axes, norm="ortho").real)
        def back_im(g):
            x.accumulate(np.fft.ifftn(1j * g, axes=axes, norm="ortho").real)
        re = self._node(X.real, back_re, "fft_re")
        im = self._node(X.imag, back_im, "fft_im")
        return re, im

    def ifft_real(self, re: Tensor, im: Tensor, axes: tuple) -> Tensor:
        """Real part of the orthonormal inverse FFT of (re + i*im)."""
        y = np.fft.ifftn(re.data + 1j * im.data, axes=axes, norm="ortho").real
        def back(g):
            G = np.fft.fftn(g, axes=axes, norm="ortho")
            re.accumulate(G.real)
            im.accumulate(G.imag)
        return self._node(y, back, "ifft_real")

    def mode_matmul(self, re: Tensor, im: Tensor, wre: Tensor, wim: Tensor,
                    idx: np.ndarray) -> tuple[Tensor, Tensor]:
        """Per-mode complex channel mixing on a retained mode set.

        re/im: (B, *space, C) spectra; wre/wim: (M, C, C) with M =
        len(idx), idx flat indices into the flattened space axes. Modes
        outside idx map to zero, as in spectral convolution layers.
        """
        B, C = re.shape[0], re.shape[-1]
        space = re.shape[1:-1]
        S = int(np.prod(space))
        r = re.data.reshape(B, S, C)
        i = im.data.reshape(B, S, C)
        sr = np.ascontiguousarray(np.swapaxes(r[:, idx, :], 0, 1))  # (M, B, C)
        si = np.ascontiguousarray(np.swapaxes(i[:, idx, :], 0, 1))
        our = np.matmul(sr, wre.data) - np.matmul(si, wim.data)  # (M, B, C)
        oui = np.matmul(sr, wim.data) + np.matmul(si, wre.data)

        def scatter(block):
            full = np.zeros((B, S, C))
            full[:, idx, :] = np.swapaxes(block, 0, 1)
            return full.reshape(re.shape)

        def back_re(g):
            gsel = np.swapaxes(g.reshape(B, S, C)[:, idx, :], 0, 1)  # (M, B, C)
            re.accumulate(scatter(np.matmul(gsel, np.swapaxes(wre.data, 1, 2))))
            im.accumulate(scatter(-np.matmul(gsel, np.swapaxes(wim.data, 1, 2))))
            wre.accumulate(np.matmul(np.swapaxes(sr, 1, 2), gsel))
            wim.accumulate(-np.matmul(np.swapaxes(si, 1, 2), gsel))

        def back_im(g):
            gsel = np.swapaxes(g.reshape(B, S, C)[:, idx, :], 0, 1)
            re.accumulate(scatter(np.matmul(gsel, np.swapaxes(wim.data, 1, 2))))
            im.accumulate(scatter(np.matmul(gsel, np.swapaxes(wre.data, 1, 2))))
            wim.accumulate(np.matmul(np.swapaxes(sr, 1, 2), gsel))
            wre.accumulate(np.matmul(np.swapaxes(si, 1, 2), gsel))

        out_re = self._node(scatter(our), back_re, "mode_matmul_re")
        out_im = self._node(scatter(oui), back_im, "mode_matmul_im")
        return out_re, out_im

    def spectral_conv(self, x: Tensor, wre: Tensor, wim: Tensor, idx: np.ndarray,
                      axes: tuple) -> Tensor:
        """Fused spectral convolution on a real signal.

        y = Re(ifftn(scatter_idx(fftn(x)[idx] @ (wre + i*wim)))) with
        orthonormal transforms over `axes`; modes outside `idx` are
        dropped. One batched complex matmul per call; the backward pass
        applies the conjugate-transposed blocks between adjoint
        transforms, which is the exact real-linear adjoint.
        """
        B, C = x.shape[0], x.shape[-1]
        S = int(np.prod(x.shape[1:-1]))
        X = np.fft.fftn(x.data, axes=axes, norm="ortho")
        sel = np.ascontiguousarray(np.swapaxes(X.reshape(B, S, C)[:, idx, :], 0, 1))
        W = wre.data + 1j * wim.data
        out_sel = np.matmul(sel, W)
        Y = np.zeros((B, S, C), dtype=np.complex128)
        Y[:, idx, :] = np.swapaxes(out_sel, 0, 1)
        y = np.fft.ifftn(Y.reshape(X.shape), axes=axes, norm="ortho").real

        def back(g):
            G = np.fft.fftn(g, axes=axes, norm="ortho")
            gsel = np.ascontiguousarray(np.swapaxes(G.reshape(B, S, C)[:, idx, :], 0, 1))
            gw = np.matmul(np.conj(np.swapaxes(sel, 1, 2)), gsel)
            wre.accumulate(gw.real)
            wim.accumulate(gw.imag)
            gx_sel = np.matmul(gsel, np.conj(np.swapaxes(W, 1, 2)))
            GX = np.zeros((B, S, C), dtype=np.complex128)
            GX[:, idx, :] = np.swapaxes(gx_sel, 0, 1)
            x.accumulate(np.fft.ifftn(GX.reshape(X.shape), axes=axes, norm="ortho").real)

        return self._node(y, back, "spectral_conv")


def grad_check(f, x: np.ndarray, h: float = 1e-5) -> float:
    """Worst relative error between tape and central-difference gradients.

    `f(tape, tensor) -> scalar Tensor` builds the composite on a fresh
    tape. Relative errors use |finite difference| + 1e-8 denominators.
    """
    x = np.asarray(x, dtype=np.float64)
    tape = Tape()
    xt = tape.leaf(x, requires_grad=True)
    out = f(tape, xt)
    tape.backward(out)
    g_ad = xt.grad if xt.grad is not None else np.zeros_like(x)

    def value_at(v):
        t = Tape()
        return float(f(t, t.leaf(v)).data)

    worst = 0.0
    flat = x.reshape(-1)
    for i in range(flat.size):
        bump = np.zeros_like(flat)
        bump[i] = h
        fp = value_at((flat + bump).reshape(x.shape))
        fm = value_at((flat - bump).reshape(x.shape))
        fd = (fp - fm) / (2 * h)
        err = abs(fd - g_ad.reshape(-1)[i]) / (abs(fd) + 1e-8)
        worst = max(worst, err)
    return worst

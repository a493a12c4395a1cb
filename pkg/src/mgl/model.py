"""Parameterized operator models.

Two families:
  - EncoderDecoderModel: isometric mode truncation E, an MLP core on the
    coefficient vector, and the adjoint reconstruction D, i.e. the
    composition D . phi . E acting on 1d fields.
  - SpectralModel: field-to-field stack of spectral convolution layers
    (per-mode complex channel mixing plus a pointwise linear path) with
    lifting and projection channels; works on 1d and 2d fields.

StructuredModel wraps either core in a resolvent parameterization:
  penalty mode: S(u) = u - lam*R(u), A(u) = (u - S(u))/lam, with the
    non-expansiveness of S encouraged by a training penalty;
  hard mode: S(u) is the core itself, constrained 1-Lipschitz by
    spectral weight normalization, and A(u) = (u - S(u))/(2*lam), which
    makes A monotone by construction rather than by training.

Models own plain numpy parameter arrays; a training step leafs them onto
a fresh tape. Forward passes are pure given the parameters, so
concurrent read-only evaluation is safe.
"""

from __future__ import annotations

import json
import struct
from pathlib import Path

import numpy as np

from .autodiff import Tape, Tensor
from .hilbert import Grid1D, decoder_matrix, encoder_matrix, encoder_width
from .operators import OperatorSpec, apply_batch
from .rng import Rng

_ONE_LIPSCHITZ_ACTIVATIONS = ("relu", "tanh")


def _act(tape: Tape, name: str):
    return {"gelu": tape.gelu, "relu": tape.relu, "tanh": tape.tanh}[name]


def _uniform_matrix(rng: Rng, rows: int, cols: int, scale: float) -> np.ndarray:
    return (2.0 * rng.uniform_array((rows, cols)) - 1.0) * scale


class MlpCore:
    """Dense layers on coefficient vectors, widths[0] -> widths[-1]."""

    def __init__(self, widths: list[int], activation: str, rng: Rng):
        self.widths = list(widths)
        self.activation = activation
        self.weights = []
        self.biases = []
        for fan_in, fan_out in zip(widths[:-1], widths[1:]):
            self.weights.append(_uniform_matrix(rng, fan_in, fan_out, 1.0 / np.sqrt(fan_in)))
            self.biases.append(np.zeros(fan_out))

    def params(self):
        out = []
        for i, (w, b) in enumerate(zip(self.weights, self.biases)):
            out.append((f"w{i}", w))
            out.append((f"b{i}", b))
        return out

    def forward(self, tape: Tape, x: Tensor, leaves: dict) -> Tensor:
        act = _act(tape, self.activation)
        h = x
        last = len(self.weights) - 1
        for i in range(len(self.weights)):
            h = tape.add(tape.matmul(h, leaves[f"w{i}"]), leaves[f"b{i}"])
            if i != last:
                h = act(h)
        return h


class EncoderDecoderModel:
    """D . phi . E on 1d fields: band-limit, mix coefficients, decode."""

    kind = "encdec"

    def __init__(self, grid_n: int, m: int, hidden: list[int], activation: str = "gelu",
                 seed: int = 0):
        self.grid_n = grid_n
        self.dim = 1
        self.m = m
        self.hidden = list(hidden)
        self.activation = activation
        self.seed = seed
        w = encoder_width(m)
        self.enc = encoder_matrix(Grid1D(grid_n), m)
        self.dec = decoder_matrix(Grid1D(grid_n), m)
        self.core = MlpCore([w] + list(hidden) + [w], activation, Rng(seed))

    def params(self):
        return self.core.params()

    def leafify(self, tape: Tape) -> dict:
        return {name: tape.leaf(arr, requires_grad=True, name=name) for name, arr in self.params()}

    def forward_tape(self, tape: Tape, inputs: np.ndarray, leaves: dict) -> Tensor:
        coeffs = tape.constant(np.asarray(inputs) @ self.enc.T, name="encoded")
        out = self.core.forward(tape, coeffs, leaves)
        return tape.matmul(out, tape.constant(self.dec.T, name="decoder"))

    def forward(self, inputs: np.ndarray) -> np.ndarray:
        tape = Tape()
        return self.forward_tape(tape, np.atleast_2d(inputs), self.leafify(tape)).data

    def arch_dict(self) -> dict:
        return {"kind": self.kind, "grid_n": self.grid_n, "m": self.m,
                "hidden": self.hidden, "activation": self.activation, "seed": self.seed}


def _retained_mode_indices(dim: int, n: int, modes: int) -> np.ndarray:
    """Flat fftn indices of the retained low modes.

    Real inputs have conjugate-symmetric spectra, so the last axis keeps
    only nonnegative frequencies 0..modes-1 (the real part of the
    inverse transform supplies the mirrored half); leading axes keep
    both signs, the usual corner layout of spectral convolutions.
    """
    half = list(range(modes))
    if dim == 1:
        return np.array(half, dtype=np.intp)
    full = [k for k in range(n) if min(k, n - k) < modes]
    flat = [k1 * n + k2 for k1 in full for k2 in half]
    return np.array(sorted(flat), dtype=np.intp)


class SpectralModel:
    """Lift -> L x (pointwise linear + spectral conv, activation) -> project."""

    kind = "spectral"

    def __init__(self, grid_n: int, dim: int, layers: int, modes: int, channels: int,
                 activation: str = "gelu", seed: int = 0):
        if modes > grid_n // 2:
            raise ValueError(f"modes {modes} exceed grid Nyquist {grid_n // 2}")
        self.grid_n, self.dim = grid_n, dim
        self.layers, self.modes, self.channels = layers, modes, channels
        self.activation = activation
        self.seed = seed
        self.mode_idx = _retained_mode_indices(dim, grid_n, modes)
        rng = Rng(seed)
        c = channels
        self.lift_w = _uniform_matrix(rng, 1, c, 1.0)
        self.lift_b = np.zeros(c)
        self.point_w = [_uniform_matrix(rng, c, c, 1.0 / np.sqrt(c)) for _ in range(layers)]
        self.point_b = [np.zeros(c) for _ in range(layers)]
        sscale = 1.0 / (c * len(self.mode_idx))
        self.spec_re = [self._mode_blocks(rng, sscale) for _ in range(layers)]
        self.spec_im = [self._mode_blocks(rng, sscale) for _ in range(layers)]
        self.proj_w = _uniform_matrix(rng, c, 1, 1.0 / np.sqrt(c))
        self.proj_b = np.zeros(1)
        self._power_state: dict = {}

    def _mode_blocks(self, rng: Rng, scale: float) -> np.ndarray:
        m, c = len(self.mode_idx), self.channels
        return _uniform_matrix(rng, m * c, c, scale).reshape(m, c, c)

    def params(self):
        out = [("lift_w", self.lift_w), ("lift_b", self.lift_b)]
        for i in range(self.layers):
            out.append((f"pw{i}", self.point_w[i]))
            out.append((f"pb{i}", self.point_b[i]))
            out.append((f"sre{i}", self.spec_re[i]))
            out.append((f"sim{i}", self.spec_im[i]))
        out.append(("proj_w", self.proj_w))
        out.append(("proj_b", self.proj_b))
        return out

    def leafify(self, tape: Tape) -> dict:
        return {name: tape.leaf(arr, requires_grad=True, name=name) for name, arr in self.params()}

    def _space_axes(self):
        return tuple(range(1, 1 + self.dim))

    def forward_tape(self, tape: Tape, inputs: np.ndarray, leaves: dict) -> Tensor:
        x = np.asarray(inputs, dtype=np.float64)
        batch, space = x.shape[0], x.shape[1:]
        flat = tape.constant(x.reshape(-1, 1), name="lifted_in")
        v = tape.add(tape.matmul(flat, leaves["lift_w"]), leaves["lift_b"])
        v = tape.reshape(v, (batch, *space, self.channels))
        act = _act(tape, self.activation)
        axes = self._space_axes()
        for i in range(self.layers):
            vf = tape.reshape(v, (-1, self.channels))
            local = tape.add(tape.matmul(vf, leaves[f"pw{i}"]), leaves[f"pb{i}"])
            local = tape.reshape(local, (batch, *space, self.channels))
            spec = tape.spectral_conv(v, leaves[f"sre{i}"], leaves[f"sim{i}"],
                                      self.mode_idx, axes)
            v = act(tape.add(local, spec))
        vf = tape.reshape(v, (-1, self.channels))
        out = tape.add(tape.matmul(vf, leaves["proj_w"]), leaves["proj_b"])
        return tape.reshape(out, (batch, *space))

    def forward(self, inputs: np.ndarray) -> np.ndarray:
        tape = Tape()
        return self.forward_tape(tape, inputs, self.leafify(tape)).data

    def arch_dict(self) -> dict:
        return {"kind": self.kind, "grid_n": self.grid_n, "dim": self.dim,
                "layers": self.layers, "modes": self.modes, "channels": self.channels,
                "activation": self.activation, "seed": self.seed}


class StructuredModel:
    """Resolvent-form operator around a core network.

    penalty: core plays R, S(u) = u - lam*R(u), A = (u - S)/lam (which is
    algebraically R, but computed through S so penalties attach to S).
    hard: core plays S directly and A = (u - S)/(2*lam); with normalized
    weights and 1-Lipschitz activations S is provably non-expansive.
    """

    kind = "structured"

    def __init__(self, core, lam: float, mode: str = "penalty"):
        if lam <= 0:
            raise ValueError(f"lambda must be positive, got {lam}")
        if mode not in ("penalty", "hard"):
            raise ValueError(f"mode must be 'penalty' or 'hard', got {mode!r}")
        if mode == "hard" and core.activation not in _ONE_LIPSCHITZ_ACTIVATIONS:
            raise ValueError(f"hard mode needs a 1-Lipschitz activation, got {core.activation!r}")
        self.core = core
        self.lam = lam
        self.mode = mode
        self.grid_n = core.grid_n
        self.dim = core.dim
        if mode == "hard":
            spectral_normalize(self, exact=True)

    def params(self):
        return self.core.params()

    def leafify(self, tape: Tape) -> dict:
        return self.core.leafify(tape)

    def forward_with_s(self, tape: Tape, inputs: np.ndarray, leaves: dict):
        """Returns (A(u), S(u)) as tape tensors."""
        u = tape.constant(np.asarray(inputs, dtype=np.float64), name="u_in")
        core_out = self.core.forward_tape(tape, inputs, leaves)
        if self.mode == "penalty":
            s = tape.sub(u, tape.scale(core_out, self.lam))
            a = tape.scale(tape.sub(u, s), 1.0 / self.lam)
        else:
            s = core_out
            a = tape.scale(tape.sub(u, s), 1.0 / (2.0 * self.lam))
        return a, s

    def forward_tape(self, tape: Tape, inputs: np.ndarray, leaves: dict) -> Tensor:
        return self.forward_with_s(tape, inputs, leaves)[0]

    def forward(self, inputs: np.ndarray) -> np.ndarray:
        tape = Tape()
        return self.forward_tape(tape, inputs, self.leafify(tape)).data

    def s_map(self, inputs: np.ndarray) -> np.ndarray:
        tape = Tape()
        return self.forward_with_s(tape, inputs, self.leafify(tape))[1].data

    def arch_dict(self) -> dict:
        return {"kind": self.kind, "core": self.core.arch_dict(),
                "lambda": self.lam, "mode": self.mode}


class OracleModel:
    """Adapter presenting a ground-truth operator as a model."""

    kind = "oracle"

    def __init__(self, op: OperatorSpec, grid):
        self.op = op
        self.grid = grid

    def params(self):
        return []

    def forward(self, inputs: np.ndarray) -> np.ndarray:
        return apply_batch(self.op, inputs, self.grid)


# ---- flat parameter views ----

def get_flat(model) -> np.ndarray:
    parts = [arr.reshape(-1) for _, arr in model.params()]
    return np.concatenate(parts) if parts else np.zeros(0)


def set_flat(model, flat: np.ndarray) -> None:
    flat = np.asarray(flat, dtype=np.float64)
    total = sum(arr.size for _, arr in model.params())
    if flat.size != total:
        raise ValueError(f"parameter vector has {flat.size} entries, model wants {total}")
    off = 0
    for _, arr in model.params():
        arr[...] = flat[off : off + arr.size].reshape(arr.shape)
        off += arr.size


def grads_flat(model, leaves: dict) -> np.ndarray:
    parts = []
    for name, arr in model.params():
        g = leaves[name].grad
        parts.append((g if g is not None else np.zeros_like(arr)).reshape(-1))
    return np.concatenate(parts) if parts else np.zeros(0)


def param_count(model) -> int:
    return sum(arr.size for _, arr in model.params())


# ---- spectral normalization (hard mode) ----

def _power_sigma(w: np.ndarray, state: dict, key, steps: int) -> float:
    """Largest singular value estimate via persistent power iteration."""
    m = w.reshape(w.shape[-2], w.shape[-1]) if w.ndim == 2 else w
    v = state.get(key)
    if v is None or v.shape != (m.shape[1],):
        v = np.ones(m.shape[1]) / np.sqrt(m.shape[1])
    for _ in range(steps):
        u = m @ v
        nu = np.linalg.norm(u)
        if nu == 0:
            return 0.0
        v = m.T @ (u / nu)
        nv = np.linalg.norm(v)
        if nv == 0:
            return 0.0
        v = v / nv
    state[key] = v
    return float(np.linalg.norm(m @ v))


def _power_sigma_batched(blocks: np.ndarray, state: dict, key, steps: int) -> np.ndarray:
    """Per-block sigma estimates for a (M, C, C) complex stack."""
    m_count, c = blocks.shape[0], blocks.shape[2]
    v = state.get(key)
    if v is None or v.shape != (m_count, c):
        v = np.ones((m_count, c), dtype=np.complex128) / np.sqrt(c)
    bh = np.conj(np.swapaxes(blocks, 1, 2))
    for _ in range(steps):
        u = np.matmul(blocks, v[..., None])[..., 0]
        nu = np.linalg.norm(u, axis=1, keepdims=True)
        nu[nu == 0] = 1.0
        v = np.matmul(bh, (u / nu)[..., None])[..., 0]
        nv = np.linalg.norm(v, axis=1, keepdims=True)
        nv[nv == 0] = 1.0
        v = v / nv
    state[key] = v
    return np.linalg.norm(np.matmul(blocks, v[..., None])[..., 0], axis=1)


def _exact_sigma(m: np.ndarray) -> float:
    return float(np.linalg.svd(m, compute_uv=False)[0])


def layer_operator_norms(model: StructuredModel) -> list[float]:
    """Exact per-stage operator norms of the hard-mode core (SVD-based)."""
    core = model.core
    if isinstance(core, EncoderDecoderModel):
        return [_exact_sigma(w) for w in core.core.weights]
    norms = [_exact_sigma(core.lift_w)]
    for i in range(core.layers):
        blocks = core.spec_re[i] + 1j * core.spec_im[i] + core.point_w[i]
        per_mode = np.linalg.svd(blocks, compute_uv=False)[:, 0]
        norms.append(max(float(np.max(per_mode)), _exact_sigma(core.point_w[i])))
    norms.append(_exact_sigma(core.proj_w))
    return norms


def spectral_normalize(model: StructuredModel, n_steps: int = 30, exact: bool = False) -> None:
    """Divide every weight matrix / spectral block by max(1, sigma_max).

    sigma_max comes from `n_steps` power-iteration steps whose iterate
    vectors persist across calls; `exact` switches to SVD, used at model
    construction and after training so the non-expansiveness certificate
    does not rest on power-iteration convergence. Pointwise and spectral
    weights of one layer are normalized jointly through their per-mode
    sum, which is the true operator norm of the layer's linear part.
    """
    if model.mode != "hard":
        raise ValueError("spectral normalization applies to hard-mode models")
    core = model.core
    state = getattr(core, "_power_state", None)
    if state is None:
        state = {}
        core._power_state = state
    margin = 1.0 + 1e-12
    if isinstance(core, EncoderDecoderModel):
        for i, w in enumerate(core.core.weights):
            sigma = _exact_sigma(w) if exact else _power_sigma(w, state, f"w{i}", n_steps)
            w /= max(1.0, sigma * margin)
        return
    for name, w in (("lift_w", core.lift_w), ("proj_w", core.proj_w)):
        sigma = _exact_sigma(w) if exact else _power_sigma(w, state, name, n_steps)
        w /= max(1.0, sigma * margin)
    for i in range(core.layers):
        blocks = core.spec_re[i] + 1j * core.spec_im[i] + core.point_w[i]
        if exact:
            sig_modes = float(np.max(np.linalg.svd(blocks, compute_uv=False)[:, 0]))
            sig_w = _exact_sigma(core.point_w[i])
        else:
            sig_modes = float(np.max(_power_sigma_batched(blocks, state, f"blocks{i}", n_steps)))
            sig_w = _power_sigma(core.point_w[i], state, f"pw{i}", n_steps)
        scale = max(1.0, max(sig_modes, sig_w) * margin)
        core.point_w[i] /= scale
        core.spec_re[i] /= scale
        core.spec_im[i] /= scale


# ---- construction from config dicts, checkpoints ----

def build_model(cfg: dict, grid_n: int, seed: int = 0):
    kind = cfg["kind"]
    if kind == "encdec":
        return EncoderDecoderModel(grid_n, int(cfg["m"]), list(cfg.get("hidden", [100, 100])),
                                   cfg.get("activation", "gelu"), seed=int(cfg.get("seed", seed)))
    if kind == "spectral":
        return SpectralModel(grid_n, int(cfg["dim"]), int(cfg.get("layers", 3)),
                             int(cfg.get("modes", 16)), int(cfg.get("channels", 96)),
                             cfg.get("activation", "gelu"), seed=int(cfg.get("seed", seed)))
    if kind == "structured":
        core = build_model(cfg["core"], grid_n, seed=seed)
        return StructuredModel(core, float(cfg["lambda"]), cfg.get("mode", "penalty"))
    raise ValueError(f"unknown model kind {kind!r}")


def save_checkpoint(model, path) -> None:
    header = json.dumps(model.arch_dict(), sort_keys=True).encode()
    flat = get_flat(model)
    with open(Path(path), "wb") as f:
        f.write(struct.pack("<I", len(header)))
        f.write(header)
        f.write(np.ascontiguousarray(flat, dtype="<f8").tobytes())


def load_checkpoint(path):
    with open(Path(path), "rb") as f:
        (hlen,) = struct.unpack("<I", f.read(4))
        arch = json.loads(f.read(hlen).decode())
        flat = np.frombuffer(f.read(), dtype="<f8")
    if arch["kind"] == "structured":
        model = StructuredModel(build_model(arch["core"], arch["core"]["grid_n"]),
                                float(arch["lambda"]), arch["mode"])
    else:
        model = build_model(arch, arch["grid_n"])
    set_flat(model, flat.copy())
    return model

"""Loss functions, Adam with global-norm clipping, and the training loop.

Losses are sums over the current mini-batch (batch sizes follow the
experiment configs), built on a fresh tape each step:
  - l2: sum_j ||y_j - yhat_j||^2
  - soft_linf: tau * log sum_j exp(||y_j - yhat_j|| / tau)
  - soft_graph: the softened two-sided sup-inf of the in-batch weighted
    distance matrix d_ij = sqrt(w1*||u_i - u_j||^2 + w2*||y_i - yhat_j||^2);
    gradients reach predictions only.
  - soft_graph + gamma * nonexpansive penalty for structured models,
    the penalty summing max(0, ||S(u_p)-S(u_q)||/||u_p-u_q|| - 1)^2 over
    pairs drawn with replacement from the batch (identical inputs are
    rejected).

Temperatures are read as dimensionless: inside the training loop they
are multiplied by the diameter of the sampled training graph (see
loss_scale_for), which is the same as measuring distances in units of
that diameter. The loss functions themselves take raw temperatures, so
called directly they match their stated formulas exactly.

Training is deterministic given (seed, dataset, config); mini-batches
are reshuffled each epoch from the run's own stream. Before the first
step every configured loss must pass a finite-difference gradient check
unless the config opts out.
"""

from __future__ import annotations

import time
import warnings
from dataclasses import dataclass, field
from typing import Union

import numpy as np

from .autodiff import NumericError, Tape, Tensor, grad_check
from .graphdist import SoftGraphParams
from .model import StructuredModel, get_flat, grads_flat, param_count, set_flat, spectral_normalize
from .rng import Rng
from .util import batched_sqnorms, cross_sqdists, space_weight

SQRT_FLOOR = 1e-12
GRAD_CHECK_TOL = 1e-4


@dataclass(frozen=True)
class L2Loss:
    pass


@dataclass(frozen=True)
class SoftLinfLoss:
    tau_inf: float

    def __post_init__(self):
        if self.tau_inf <= 0:
            raise ValueError("tau_inf must be positive")


@dataclass(frozen=True)
class SoftGraphLoss:
    params: SoftGraphParams


@dataclass(frozen=True)
class SoftGraphStructuredLoss:
    params: SoftGraphParams
    gamma: float
    n_nonexp_pairs: int

    def __post_init__(self):
        if self.gamma < 0:
            raise ValueError("gamma must be nonnegative")
        if self.n_nonexp_pairs < 1:
            raise ValueError("need at least one nonexpansiveness pair")


LossKind = Union[L2Loss, SoftLinfLoss, SoftGraphLoss, SoftGraphStructuredLoss]


@dataclass
class TrainConfig:
    epochs: int
    batch_size: int
    learning_rate: float
    weight_decay: float
    clip_threshold: float
    loss: LossKind
    seed: int = 0
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    skip_selftest: bool = False


@dataclass
class RunHistory:
    epoch_losses: list = field(default_factory=list)
    wall_ms: list = field(default_factory=list)
    final_params: np.ndarray | None = None


# ---- loss graphs ----

def residual_norms(tape: Tape, targets: np.ndarray, preds: Tensor) -> Tensor:
    """Per-sample H-norms ||y_j - yhat_j|| as a (B,) tensor."""
    diff = tape.sub(preds, tape.constant(targets, name="targets"))
    return tape.sqrt_floor(tape.scale(tape.sqnorm_rows(diff), space_weight(targets)), SQRT_FLOOR)


def loss_l2(tape: Tape, targets: np.ndarray, preds: Tensor) -> Tensor:
    diff = tape.sub(preds, tape.constant(targets, name="targets"))
    return tape.scale(tape.sum(tape.sqnorm_rows(diff)), space_weight(targets))


def loss_soft_linf(tape: Tape, targets: np.ndarray, preds: Tensor, tau_inf: float) -> Tensor:
    return tape.lse(residual_norms(tape, targets, preds), tau_inf)


def pairwise_tensor(tape: Tape, inputs: np.ndarray, targets: np.ndarray, preds: Tensor,
                    gp: SoftGraphParams) -> Tensor:
    """Differentiable d_ij matrix; the input block is a constant."""
    w_space = space_weight(targets)
    input_block = gp.w1 * cross_sqdists(inputs, inputs)
    pred_block = tape.scale(tape.pairwise_sqdist(targets, preds), gp.w2 * w_space)
    return tape.sqrt_floor(tape.add(pred_block, tape.constant(input_block, name="d_u")), SQRT_FLOOR)


def soft_graph_tensor(tape: Tape, d: Tensor, gp: SoftGraphParams) -> Tensor:
    rows = tape.lse(tape.softmin(d, gp.tau_in, axis=1), gp.tau_out)
    cols = tape.lse(tape.softmin(d, gp.tau_in, axis=0), gp.tau_out)
    return tape.maximum2(rows, cols)


def loss_soft_graph(tape: Tape, inputs: np.ndarray, targets: np.ndarray, preds: Tensor,
                    gp: SoftGraphParams) -> Tensor:
    return soft_graph_tensor(tape, pairwise_tensor(tape, inputs, targets, preds, gp), gp)


def draw_nonexp_pairs(inputs: np.ndarray, rng: Rng, n_pairs: int, max_tries: int = 64):
    """Index pairs with replacement, rejecting identical inputs."""
    n = len(inputs)
    flat = inputs.reshape(n, -1)
    ps, qs = [], []
    for _ in range(n_pairs):
        for _ in range(max_tries):
            p, q = rng.randint(0, n - 1), rng.randint(0, n - 1)
            if p != q and not np.array_equal(flat[p], flat[q]):
                ps.append(p)
                qs.append(q)
                break
    return np.array(ps, dtype=np.intp), np.array(qs, dtype=np.intp)


def loss_nonexp(tape: Tape, s_vals: Tensor, inputs: np.ndarray, rng: Rng, n_pairs: int) -> Tensor:
    ps, qs = draw_nonexp_pairs(inputs, rng, n_pairs)
    if len(ps) == 0:
        warnings.warn("all batch inputs identical: nonexpansiveness loss is 0")
        return tape.constant(0.0)
    w_space = space_weight(inputs)
    denom = np.sqrt(w_space * np.sum((inputs[ps] - inputs[qs]).reshape(len(ps), -1) ** 2, axis=1))
    diff = tape.sub(tape.slice_(s_vals, ps), tape.slice_(s_vals, qs))
    num = tape.sqrt_floor(tape.scale(tape.sqnorm_rows(diff), w_space), SQRT_FLOOR)
    ratio_m1 = tape.add_const(tape.mul(num, tape.constant(1.0 / denom)), -1.0)
    hinge = tape.relu(ratio_m1)
    return tape.sum(tape.mul(hinge, hinge))


# ---- optimizer ----

@dataclass
class AdamState:
    m: np.ndarray
    v: np.ndarray
    t: int = 0

    @classmethod
    def zeros(cls, size: int) -> "AdamState":
        return cls(np.zeros(size), np.zeros(size))


def clip_gradients(grads: np.ndarray, threshold: float) -> np.ndarray:
    gnorm = float(np.linalg.norm(grads))
    if threshold > 0 and gnorm > threshold:
        return grads * (threshold / gnorm)
    return grads


def adam_step(params: np.ndarray, grads: np.ndarray, state: AdamState, cfg: TrainConfig) -> None:
    """One Adam update in place: clip, moments, bias correction, then
    decoupled weight decay as lr*wd*param subtraction."""
    if not np.all(np.isfinite(grads)):
        raise NumericError(f"non-finite gradient at step {state.t + 1}: aborting the update")
    g = clip_gradients(grads, cfg.clip_threshold)
    state.t += 1
    state.m *= cfg.beta1
    state.m += (1 - cfg.beta1) * g
    state.v *= cfg.beta2
    state.v += (1 - cfg.beta2) * (g * g)
    denom = np.sqrt(state.v / (1 - cfg.beta2 ** state.t))
    denom += cfg.eps
    step = state.m / denom
    step *= cfg.learning_rate / (1 - cfg.beta1 ** state.t)
    params -= step
    if cfg.weight_decay:
        params -= cfg.learning_rate * cfg.weight_decay * params


# ---- gradient-check gate ----

def _fd_step(tau: float) -> float:
    # log-sum-exp curvature grows like 1/tau^2, so the central-difference
    # step must shrink with the temperature to keep truncation error at bay
    return min(1e-5, tau / 130.0)


def selftest_points(kind: LossKind, seed: int):
    """Well-conditioned random data for a finite-difference check.

    Spreads are tied to the loss temperature so the log-sum-exp weights
    stay resolvable: kink neighborhoods and underflow plateaus are the
    caller's to avoid, per the gradient-check contract.
    """
    rng = Rng(seed)
    batch, width = 5, 6
    if isinstance(kind, SoftLinfLoss):
        spread = 2.0 * kind.tau_inf
    elif isinstance(kind, (SoftGraphLoss, SoftGraphStructuredLoss)):
        spread = 2.0 * min(kind.params.tau_in, kind.params.tau_out)
    else:
        spread = 1.0
    scale = min(0.5, spread)
    targets = rng.normal_array((batch, width)) * scale
    inputs = rng.normal_array((batch, width)) * scale + 1.0
    offset = rng.normal_array((1, width))
    offset = offset / np.linalg.norm(offset)
    x0 = targets + offset + rng.normal_array((batch, width)) * scale
    return inputs, targets, x0


def selftest_loss(kind: LossKind, seed: int = 7) -> float:
    """Worst finite-difference error over the configured loss pieces."""
    inputs, targets, x0 = selftest_points(kind, seed)
    if isinstance(kind, L2Loss):
        return grad_check(lambda t, x: loss_l2(t, targets, x), x0)
    if isinstance(kind, SoftLinfLoss):
        return grad_check(lambda t, x: loss_soft_linf(t, targets, x, kind.tau_inf), x0,
                          h=_fd_step(kind.tau_inf))
    h = _fd_step(min(kind.params.tau_in, kind.params.tau_out))
    worst = grad_check(lambda t, x: loss_soft_graph(t, inputs, targets, x, kind.params), x0, h=h)
    if isinstance(kind, SoftGraphStructuredLoss):
        pair_seed = Rng(seed).u64()
        def nonexp_f(t, x):
            return loss_nonexp(t, x, inputs, Rng(pair_seed), kind.n_nonexp_pairs)
        worst = max(worst, grad_check(nonexp_f, x0))
    return worst


def loss_scale_for(kind: LossKind, inputs: np.ndarray, targets: np.ndarray) -> float:
    """Length scale that makes the configured temperatures dimensionless.

    Temperatures are read relative to the diameter of the sampled
    training graph: for the graph losses the largest pairwise weighted
    product-space distance between training graph points, for the soft
    sup loss the largest pairwise target distance. Multiplying both
    temperatures by s is identical to measuring every distance in units
    of s, so the distance-matrix geometry is untouched and the hard
    sup-inf limit is unchanged; only the softening degree becomes
    independent of the raw data magnitude.
    """
    if isinstance(kind, L2Loss):
        return 1.0
    if isinstance(kind, SoftLinfLoss):
        diam2 = float(np.max(cross_sqdists(targets, targets)))
    else:
        gp = kind.params
        diam2 = float(np.max(gp.w1 * cross_sqdists(inputs, inputs)
                             + gp.w2 * cross_sqdists(targets, targets)))
    return np.sqrt(diam2) if diam2 > 0 else 1.0


def _scaled_params(gp: SoftGraphParams, scale: float) -> SoftGraphParams:
    if scale == 1.0:
        return gp
    return SoftGraphParams(gp.tau_in * scale, gp.tau_out * scale, gp.w1, gp.w2)


def _batch_loss(tape: Tape, model, inputs: np.ndarray, targets: np.ndarray,
                leaves: dict, cfg: TrainConfig, rng: Rng, scale: float = 1.0) -> Tensor:
    kind = cfg.loss
    if isinstance(kind, SoftGraphStructuredLoss):
        if not isinstance(model, StructuredModel):
            raise ValueError("the structured loss needs a StructuredModel")
        preds, s_vals = model.forward_with_s(tape, inputs, leaves)
        graph = loss_soft_graph(tape, inputs, targets, preds, _scaled_params(kind.params, scale))
        penalty = loss_nonexp(tape, s_vals, inputs, rng, kind.n_nonexp_pairs)
        return tape.add(graph, tape.scale(penalty, kind.gamma))
    preds = model.forward_tape(tape, inputs, leaves)
    if isinstance(kind, L2Loss):
        return loss_l2(tape, targets, preds)
    if isinstance(kind, SoftLinfLoss):
        return loss_soft_linf(tape, targets, preds, kind.tau_inf * scale)
    if isinstance(kind, SoftGraphLoss):
        return loss_soft_graph(tape, inputs, targets, preds, _scaled_params(kind.params, scale))
    raise ValueError(f"unknown loss kind {kind!r}")


def train(model, dataset, cfg: TrainConfig) -> RunHistory:
    """Adam over shuffled mini-batches; see the module docstring."""
    if not cfg.skip_selftest:
        err = selftest_loss(cfg.loss)
        if err > GRAD_CHECK_TOL:
            raise NumericError(f"loss gradient self-test failed: {err:.2e} > {GRAD_CHECK_TOL}")
    history = RunHistory()
    rng = Rng(cfg.seed)
    state = AdamState.zeros(param_count(model))
    hard = isinstance(model, StructuredModel) and model.mode == "hard"
    n = len(dataset)
    scale = loss_scale_for(cfg.loss, dataset.inputs, dataset.targets)
    for _ in range(cfg.epochs):
        t0 = time.perf_counter()
        order = list(range(n))
        rng.shuffle(order)
        batch_losses = []
        for lo in range(0, n, cfg.batch_size):
            idx = order[lo : lo + cfg.batch_size]
            inputs = dataset.inputs[idx]
            targets = dataset.targets[idx]
            tape = Tape()
            leaves = model.leafify(tape)
            loss = _batch_loss(tape, model, inputs, targets, leaves, cfg, rng, scale)
            tape.backward(loss)
            flat = get_flat(model)
            adam_step(flat, grads_flat(model, leaves), state, cfg)
            set_flat(model, flat)
            if hard:
                spectral_normalize(model)
            batch_losses.append(float(loss.data))
        history.epoch_losses.append(float(np.mean(batch_losses)))
        history.wall_ms.append(1000.0 * (time.perf_counter() - t0))
    if hard and cfg.epochs > 0:
        spectral_normalize(model, exact=True)
    history.final_params = get_flat(model)
    return history


def write_history_csv(history: RunHistory, path) -> None:
    with open(path, "w") as f:
        f.write("epoch,loss,wall_ms\n")
        for i, (loss, ms) in enumerate(zip(history.epoch_losses, history.wall_ms)):
            f.write(f"{i},{loss!r},{ms:.3f}\n")

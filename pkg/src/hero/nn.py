"""Minimal float64 numeric kernel: GRU cell, softmax cross-entropy, Adam,
and a central-finite-difference gradient checker.

The GRU over a sequence x_1..x_T (each of width d, hidden width d/2):

    r_i = sigmoid(W_r x_i + U_r h_{i-1})
    z_i = sigmoid(W_z x_i + U_z h_{i-1})
    c_i = tanh(W_h x_i + U_h (h_{i-1} * r_i))
    h_i = (1 - z_i) * h_{i-1} + z_i * c_i,      h_0 = 0

There are no bias terms; the six matrices are the only learnable tensors.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

import numpy as np

PROB_CLAMP = 1e-12


class ShapeMismatchError(ValueError):
    pass


def sigmoid(x: np.ndarray) -> np.ndarray:
    # exp may overflow for very negative inputs; the result still saturates
    # correctly to 0.0, so just silence the warning.
    with np.errstate(over="ignore"):
        return 1.0 / (1.0 + np.exp(-x))


@dataclass
class GruParams:
    """The six GRU matrices: w_* are (d/2, d), u_* are (d/2, d/2)."""

    w_r: np.ndarray
    w_z: np.ndarray
    w_h: np.ndarray
    u_r: np.ndarray
    u_z: np.ndarray
    u_h: np.ndarray

    @property
    def input_dim(self) -> int:
        return self.w_r.shape[1]

    @property
    def hidden_dim(self) -> int:
        return self.w_r.shape[0]

    @classmethod
    def init(cls, d: int, rng: np.random.Generator) -> "GruParams":
        """Uniform init in +-1/sqrt(fan-in)."""
        if d % 2:
            raise ShapeMismatchError(f"input width must be even, got {d}")
        hd = d // 2
        sw = 1.0 / math.sqrt(d)
        su = 1.0 / math.sqrt(hd)
        return cls(
            w_r=rng.uniform(-sw, sw, (hd, d)),
            w_z=rng.uniform(-sw, sw, (hd, d)),
            w_h=rng.uniform(-sw, sw, (hd, d)),
            u_r=rng.uniform(-su, su, (hd, hd)),
            u_z=rng.uniform(-su, su, (hd, hd)),
            u_h=rng.uniform(-su, su, (hd, hd)),
        )

    @classmethod
    def zeros(cls, d: int) -> "GruParams":
        hd = d // 2
        return cls(*(np.zeros((hd, d)) for _ in range(3)),
                   *(np.zeros((hd, hd)) for _ in range(3)))

    def copy(self) -> "GruParams":
        return GruParams(*(m.copy() for m in self.matrices()))

    def matrices(self) -> tuple[np.ndarray, ...]:
        return (self.w_r, self.w_z, self.w_h, self.u_r, self.u_z, self.u_h)


@dataclass
class GruTrace:
    """Stacked per-step activations kept for backprop; row i is step i+1."""

    inputs: np.ndarray  # (T, d)
    r: np.ndarray       # (T, d/2)
    z: np.ndarray
    hhat: np.ndarray
    h: np.ndarray

    def __len__(self) -> int:
        return self.h.shape[0]

    @property
    def last_h(self) -> np.ndarray:
        return self.h[-1]


def gru_forward(params: GruParams, inputs) -> GruTrace:
    """Run the GRU over a sequence of d-wide vectors, keeping all activations."""
    x = np.ascontiguousarray(inputs, dtype=np.float64)
    if x.ndim != 2 or x.shape[0] == 0:
        raise ShapeMismatchError(f"inputs must be a non-empty (T, d) array, got {x.shape}")
    if x.shape[1] != params.input_dim:
        raise ShapeMismatchError(f"input width {x.shape[1]} != parameter width {params.input_dim}")
    steps, hd = x.shape[0], params.hidden_dim
    # The input contributions do not depend on the recurrence.
    wx_r = x @ params.w_r.T
    wx_z = x @ params.w_z.T
    wx_h = x @ params.w_h.T
    r = np.empty((steps, hd))
    z = np.empty((steps, hd))
    hhat = np.empty((steps, hd))
    h = np.empty((steps, hd))
    h_prev = np.zeros(hd)
    for i in range(steps):
        r_i = sigmoid(wx_r[i] + params.u_r @ h_prev)
        z_i = sigmoid(wx_z[i] + params.u_z @ h_prev)
        c_i = np.tanh(wx_h[i] + params.u_h @ (h_prev * r_i))
        h_prev = (1.0 - z_i) * h_prev + z_i * c_i
        r[i], z[i], hhat[i], h[i] = r_i, z_i, c_i, h_prev
    return GruTrace(x, r, z, hhat, h)


def gru_backward(
    params: GruParams, trace: GruTrace, grad_h
) -> tuple[GruParams, np.ndarray]:
    """Exact reverse-mode pass given an upstream gradient for every h_i.

    Returns gradients for the six matrices (packed in a GruParams) and a
    (T, d) array of gradients w.r.t. the inputs.
    """
    gh = np.asarray(grad_h, dtype=np.float64)
    if gh.shape != trace.h.shape:
        raise ShapeMismatchError(f"grad_h shape {gh.shape} != trace shape {trace.h.shape}")
    steps, hd = gh.shape
    h_prev_rows = np.vstack([np.zeros((1, hd)), trace.h[:-1]])
    da_r = np.empty((steps, hd))
    da_z = np.empty((steps, hd))
    da_h = np.empty((steps, hd))
    carry = np.zeros(hd)
    for i in range(steps - 1, -1, -1):
        g = gh[i] + carry
        h_prev = h_prev_rows[i]
        r_i, z_i, c_i = trace.r[i], trace.z[i], trace.hhat[i]
        dc = g * z_i
        dz = g * (c_i - h_prev)
        dh_prev = g * (1.0 - z_i)
        dah = dc * (1.0 - c_i * c_i)
        dgated = params.u_h.T @ dah  # gradient w.r.t. h_prev * r
        dh_prev += dgated * r_i
        dr = dgated * h_prev
        dar = dr * r_i * (1.0 - r_i)
        daz = dz * z_i * (1.0 - z_i)
        dh_prev += params.u_r.T @ dar + params.u_z.T @ daz
        da_r[i], da_z[i], da_h[i] = dar, daz, dah
        carry = dh_prev
    grads = GruParams(
        w_r=da_r.T @ trace.inputs,
        w_z=da_z.T @ trace.inputs,
        w_h=da_h.T @ trace.inputs,
        u_r=da_r.T @ h_prev_rows,
        u_z=da_z.T @ h_prev_rows,
        u_h=da_h.T @ (h_prev_rows * trace.r),
    )
    dx = da_r @ params.w_r + da_z @ params.w_z + da_h @ params.w_h
    return grads, dx


@dataclass
class ClassifierParams:
    """Two-logit linear head: w is (2, d), b is (2,)."""

    w: np.ndarray
    b: np.ndarray

    @classmethod
    def zeros(cls, d: int) -> "ClassifierParams":
        return cls(np.zeros((2, d)), np.zeros(2))

    @classmethod
    def init(cls, d: int, rng: np.random.Generator) -> "ClassifierParams":
        s = 1.0 / math.sqrt(d)
        return cls(rng.uniform(-s, s, (2, d)), rng.uniform(-s, s, 2))

    def copy(self) -> "ClassifierParams":
        return ClassifierParams(self.w.copy(), self.b.copy())


def softmax_ce(clf: ClassifierParams, h: np.ndarray, y: int) -> tuple[float, float]:
    """Class-1 probability and cross-entropy loss for label y in {0, 1}.

    Ties the loss to clamped probabilities so it stays finite when the
    prediction saturates.
    """
    logits = clf.w @ h + clf.b
    shifted = logits - logits.max()
    exps = np.exp(shifted)
    p_fake = float(exps[1] / exps.sum())
    p = min(max(p_fake, PROB_CLAMP), 1.0 - PROB_CLAMP)
    loss = -(y * math.log(p) + (1 - y) * math.log(1.0 - p))
    return p_fake, loss


def softmax_ce_backward(
    clf: ClassifierParams, h: np.ndarray, y: int
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Gradients (dW, db, dh) of the unclamped softmax cross-entropy."""
    logits = clf.w @ h + clf.b
    shifted = logits - logits.max()
    exps = np.exp(shifted)
    probs = exps / exps.sum()
    dlogits = probs.copy()
    dlogits[y] -= 1.0
    return np.outer(dlogits, h), dlogits, clf.w.T @ dlogits


@dataclass
class AdamState:
    """Moment accumulators for one flat parameter vector."""

    lr: float
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    t: int = 0
    m: np.ndarray | None = None
    v: np.ndarray | None = None


def adam_step(state: AdamState, params: np.ndarray, grads: np.ndarray) -> np.ndarray:
    """One bias-corrected Adam update; returns the new parameter vector."""
    p = np.asarray(params, dtype=np.float64)
    g = np.asarray(grads, dtype=np.float64)
    if p.shape != g.shape:
        raise ShapeMismatchError(f"params {p.shape} vs grads {g.shape}")
    if state.m is None:
        state.m = np.zeros_like(p)
        state.v = np.zeros_like(p)
    elif state.m.shape != p.shape:
        raise ShapeMismatchError(f"moment shape {state.m.shape} vs params {p.shape}")
    state.t += 1
    state.m = state.beta1 * state.m + (1.0 - state.beta1) * g
    state.v = state.beta2 * state.v + (1.0 - state.beta2) * g * g
    m_hat = state.m / (1.0 - state.beta1 ** state.t)
    v_hat = state.v / (1.0 - state.beta2 ** state.t)
    return p - state.lr * m_hat / (np.sqrt(v_hat) + state.eps)


def finite_diff_check(
    f: Callable[[np.ndarray], float],
    params: np.ndarray,
    analytic_grads: np.ndarray,
    step: float = 1e-5,
) -> float:
    """Worst relative error between analytic gradients and central differences.

    ``f`` is called with a perturbed copy of the flat parameter vector; the
    per-coordinate error is |a - n| / max(1e-8, |a| + |n|).
    """
    theta = np.array(params, dtype=np.float64)
    analytic = np.asarray(analytic_grads, dtype=np.float64)
    if theta.shape != analytic.shape:
        raise ShapeMismatchError(f"params {theta.shape} vs grads {analytic.shape}")
    worst = 0.0
    for i in range(theta.size):
        orig = theta.flat[i]
        theta.flat[i] = orig + step
        f_plus = f(theta)
        theta.flat[i] = orig - step
        f_minus = f(theta)
        theta.flat[i] = orig
        numeric = (f_plus - f_minus) / (2.0 * step)
        a = analytic.flat[i]
        rel = abs(a - numeric) / max(1e-8, abs(a) + abs(numeric))
        worst = max(worst, rel)
    return worst

"""
Tape-based reverse-mode differentiation over the operations used by the encoder.

A Tape records one node per operation in creation order, which is also a valid
topological order. Forward values come from the same numpy kernels the public
operations use, so a no-grad tape reproduces them exactly.

Example:
    >>> tape = Tape()
    >>> p = tape.leaf(np.array([1.0, 2.0]), "p")
    >>> tape.backward((p * p).sum())["p"]
    array([2., 4.])
"""

import logging
from dataclasses import dataclass, field
from typing import Callable, Mapping, Optional, Sequence

import numpy as np

from biopars.errors import ContractError, EvaluationError, ParameterError
from biopars.models import attention, norms
from biopars.models.ema import CemaParams, EmaState, cema_scan as _cema_scan, cema_scan_backward
from biopars.models.tensor import ComplexTensor, Tensor
from biopars.models.tensor import l2_normalize_rows as _normalize
from biopars.models.tensor import matmul as _matmul
from biopars.models.tensor import sigmoid as _sigmoid
from biopars.models.tensor import softmax_rows as _softmax_rows

logger = logging.getLogger(__name__)

BackwardFn = Callable[[Tensor], Sequence[Optional[Tensor]]]


@dataclass
class TapeNode:
    id: int
    op: str
    inputs: tuple[int, ...]
    value: Tensor
    backward_fn: Optional[BackwardFn] = None
    name: Optional[str] = None


class Var:
    """Handle on a tape node, with arithmetic operators recorded on the tape."""

    __slots__ = ("tape", "node")

    def __init__(self, tape: "Tape", node: TapeNode):
        self.tape = tape
        self.node = node

    @property
    def value(self) -> Tensor:
        return self.node.value

    @property
    def shape(self) -> tuple[int, ...]:
        return self.node.value.shape

    def __add__(self, other):
        return add(self, other)

    def __radd__(self, other):
        return add(other, self)

    def __sub__(self, other):
        return sub(self, other)

    def __rsub__(self, other):
        return sub(other, self)

    def __mul__(self, other):
        return mul(self, other)

    def __rmul__(self, other):
        return mul(other, self)

    def __neg__(self):
        return neg(self)

    def __matmul__(self, other):
        return matmul(self, other)

    def __getitem__(self, index):
        return getitem(self, index)

    def sum(self) -> "Var":
        return total(self)

    @property
    def T(self) -> "Var":
        return transpose(self)

    def __repr__(self):
        return f"Var(op={self.node.op!r}, shape={self.shape})"


class Tape:
    """
    Record of a computation.

    Args:
        requires_grad: When False no backward closures are kept and backward() is unavailable
    """

    def __init__(self, requires_grad: bool = True):
        self.requires_grad = requires_grad
        self.nodes: list[TapeNode] = []

    def _record(self, op: str, inputs: Sequence[Var], value: Tensor, backward_fn: Optional[BackwardFn] = None, name=None) -> Var:
        node = TapeNode(
            id=len(self.nodes),
            op=op,
            inputs=tuple(v.node.id for v in inputs),
            value=value,
            backward_fn=backward_fn if self.requires_grad else None,
            name=name,
        )
        self.nodes.append(node)
        return Var(self, node)

    def leaf(self, value, name: str) -> Var:
        """A named parameter; backward() reports its gradient under this name."""
        return self._record("leaf", (), np.asarray(value, dtype=np.float64), name=name)

    def constant(self, value) -> Var:
        return self._record("const", (), np.asarray(value, dtype=np.float64))

    def lift(self, value) -> Var:
        if isinstance(value, Var):
            if value.tape is not self:
                raise ContractError("cannot mix variables from different tapes")
            return value
        return self.constant(value)

    def backward(self, loss: Var) -> dict[str, Tensor]:
        """
        Reverse sweep from a scalar loss.

        Returns:
            Gradient for every named leaf on the tape; leaves the loss does not
            depend on get zeros
        """
        if not self.requires_grad:
            raise ContractError("backward() needs a tape created with requires_grad=True")
        if loss.value.size != 1:
            raise ContractError(f"loss must be a scalar, got shape {loss.shape}")
        grads: dict[int, Tensor] = {loss.node.id: np.ones_like(loss.value)}
        for node in reversed(self.nodes[: loss.node.id + 1]):
            g = grads.get(node.id)
            if g is None or node.backward_fn is None:
                continue
            for input_id, g_in in zip(node.inputs, node.backward_fn(g)):
                if g_in is None:
                    continue
                if input_id in grads:
                    grads[input_id] = grads[input_id] + g_in
                else:
                    grads[input_id] = g_in
        return {
            node.name: grads.get(node.id, np.zeros_like(node.value))
            for node in self.nodes
            if node.op == "leaf" and node.name is not None
        }


def _tape_of(*values) -> Tape:
    for v in values:
        if isinstance(v, Var):
            return v.tape
    raise ContractError("at least one operand must be a tape variable")


def _unbroadcast(g: Tensor, shape: tuple[int, ...]) -> Tensor:
    while g.ndim > len(shape):
        g = g.sum(axis=0)
    for axis, size in enumerate(shape):
        if size == 1 and g.shape[axis] != 1:
            g = g.sum(axis=axis, keepdims=True)
    return g


# --- Elementwise and linear algebra ---


def add(a, b) -> Var:
    tape = _tape_of(a, b)
    a, b = tape.lift(a), tape.lift(b)
    sa, sb = a.shape, b.shape
    return tape._record("add", (a, b), a.value + b.value, lambda g: (_unbroadcast(g, sa), _unbroadcast(g, sb)))


def sub(a, b) -> Var:
    tape = _tape_of(a, b)
    a, b = tape.lift(a), tape.lift(b)
    sa, sb = a.shape, b.shape
    return tape._record("sub", (a, b), a.value - b.value, lambda g: (_unbroadcast(g, sa), _unbroadcast(-g, sb)))


def mul(a, b) -> Var:
    tape = _tape_of(a, b)
    a, b = tape.lift(a), tape.lift(b)
    va, vb = a.value, b.value
    return tape._record(
        "mul", (a, b), va * vb, lambda g: (_unbroadcast(g * vb, va.shape), _unbroadcast(g * va, vb.shape))
    )


def neg(a: Var) -> Var:
    return a.tape._record("neg", (a,), -a.value, lambda g: (-g,))


def matmul(a, b) -> Var:
    tape = _tape_of(a, b)
    a, b = tape.lift(a), tape.lift(b)
    va, vb = a.value, b.value
    return tape._record("matmul", (a, b), _matmul(va, vb), lambda g: (g @ vb.T, va.T @ g))


def sigmoid(a: Var) -> Var:
    y = _sigmoid(a.value)
    return a.tape._record("sigmoid", (a,), y, lambda g: (g * y * (1.0 - y),))


def swish(a: Var) -> Var:
    x = a.value
    s = _sigmoid(x)
    return a.tape._record("swish", (a,), x * s, lambda g: (g * (s + x * s * (1.0 - s)),))


def exp(a: Var) -> Var:
    y = np.exp(a.value)
    return a.tape._record("exp", (a,), y, lambda g: (g * y,))


def log(a: Var) -> Var:
    x = a.value
    return a.tape._record("log", (a,), np.log(x), lambda g: (g / x,))


def sin(a: Var) -> Var:
    x = a.value
    return a.tape._record("sin", (a,), np.sin(x), lambda g: (g * np.cos(x),))


def cos(a: Var) -> Var:
    x = a.value
    return a.tape._record("cos", (a,), np.cos(x), lambda g: (-g * np.sin(x),))


def total(a: Var) -> Var:
    shape = a.shape
    return a.tape._record("sum", (a,), np.asarray(np.sum(a.value)), lambda g: (np.broadcast_to(g, shape).copy(),))


def mean(a: Var) -> Var:
    shape, size = a.shape, a.value.size
    return a.tape._record("mean", (a,), np.asarray(np.mean(a.value)), lambda g: (np.full(shape, g / size),))


def sum_rows(a: Var) -> Var:
    """Sum over the last axis."""
    shape = a.shape
    return a.tape._record("sum_rows", (a,), np.sum(a.value, axis=-1), lambda g: (np.broadcast_to(g[..., None], shape).copy(),))


def reshape(a: Var, shape: tuple[int, ...]) -> Var:
    old = a.shape
    return a.tape._record("reshape", (a,), a.value.reshape(shape), lambda g: (g.reshape(old),))


def transpose(a: Var) -> Var:
    return a.tape._record("transpose", (a,), a.value.T, lambda g: (g.T,))


def getitem(a: Var, index) -> Var:
    shape = a.shape

    def backward(g):
        out = np.zeros(shape)
        np.add.at(out, index, g)
        return (out,)

    return a.tape._record("getitem", (a,), a.value[index], backward)


def concat(parts: Sequence[Var], axis: int = 0) -> Var:
    tape = _tape_of(*parts)
    parts = [tape.lift(p) for p in parts]
    bounds = np.cumsum([p.shape[axis] for p in parts])[:-1]
    return tape._record(
        "concat", parts, np.concatenate([p.value for p in parts], axis=axis), lambda g: tuple(np.split(g, bounds, axis=axis))
    )


# --- Row operations ---


def softmax_rows(a: Var) -> Var:
    y = _softmax_rows(a.value)
    return a.tape._record("softmax", (a,), y, lambda g: (y * (g - np.sum(g * y, axis=-1, keepdims=True)),))


def l2_normalize_rows(a: Var, eps: float = 1e-8) -> Var:
    x = a.value
    y = _normalize(x, eps)
    norms_ = np.sqrt(np.sum(x * x, axis=-1, keepdims=True))

    def backward(g):
        projected = g - y * np.sum(g * y, axis=-1, keepdims=True)
        return (np.where(norms_ > eps, projected / np.maximum(norms_, eps), g / eps),)

    return a.tape._record("l2_normalize", (a,), y, backward)


def embedding(table: Var, ids: np.ndarray) -> Var:
    ids = np.asarray(ids, dtype=np.int64)
    shape = table.shape

    def backward(g):
        out = np.zeros(shape)
        np.add.at(out, ids, g)
        return (out,)

    return table.tape._record("embedding", (table,), table.value[ids], backward)


def cross_entropy(logits: Var, targets: np.ndarray) -> Var:
    """Mean next-token cross-entropy of integer targets under row-wise softmax."""
    targets = np.asarray(targets, dtype=np.int64)
    z = logits.value
    if z.ndim != 2 or targets.shape != (z.shape[0],):
        raise ContractError(f"logits {z.shape} and targets {targets.shape} do not line up")
    shifted = z - np.max(z, axis=1, keepdims=True)
    log_norm = np.log(np.sum(np.exp(shifted), axis=1))
    rows = np.arange(z.shape[0])
    loss = np.mean(log_norm - shifted[rows, targets])

    def backward(g):
        probs = np.exp(shifted - log_norm[:, None])
        probs[rows, targets] -= 1.0
        return (g * probs / z.shape[0],)

    return logits.tape._record("cross_entropy", (logits,), np.asarray(loss), backward)


# --- Fused sequence operations ---


def cema_scan(
    x: Var,
    beta: Var,
    alpha_raw: Var,
    delta_raw: Var,
    theta: Var,
    eta_re: Var,
    eta_im: Var,
    s0: EmaState | None = None,
) -> tuple[Var, EmaState]:
    """
    CEMA over x with alpha = sigmoid(alpha_raw) and delta = sigmoid(delta_raw).

    Returns:
        Output variable (n, d) and the final hidden state (not differentiated)
    """
    tape = x.tape
    alpha, delta = _sigmoid(alpha_raw.value), _sigmoid(delta_raw.value)
    params = CemaParams(beta.value, alpha, delta, theta.value, ComplexTensor(eta_re.value, eta_im.value))
    state0 = s0 if s0 is not None else EmaState.zeros(*params.shape)
    y, s_out, states = _cema_scan(x.value, params, state0, keep_states=tape.requires_grad)
    xv = x.value

    def backward(g):
        grads = cema_scan_backward(xv, params, state0, states, g)
        return (
            grads["x"],
            grads["beta"],
            grads["alpha"] * alpha * (1.0 - alpha),
            grads["delta"] * delta * (1.0 - delta),
            grads["theta"],
            grads["eta_re"],
            grads["eta_im"],
        )

    inputs = (x, beta, alpha_raw, delta_raw, theta, eta_re, eta_im)
    return tape._record("cema_scan", inputs, y, backward), s_out


def timestep_norm(
    x: Var, gain: Var, bias: Var, groups: int, eps: float, s0: norms.NormState | None = None
) -> tuple[Var, norms.NormState]:
    tape = x.tape
    spec = norms.GroupSpec(groups, eps, gain.value, bias.value)
    y, s_out = norms.timestep_norm(x.value, spec, s0)
    xv = x.value

    def backward(g):
        grads = norms.timestep_norm_backward(xv, spec, s0, g)
        return grads["x"], grads["gain"], grads["bias"]

    return tape._record("timestep_norm", (x, gain, bias), y, backward), s_out


def layer_norm(x: Var, gain: Var, bias: Var, eps: float) -> Var:
    xv, gv = x.value, gain.value

    def backward(g):
        grads = norms.layer_norm_backward(xv, eps, gv, g)
        return grads["x"], grads["gain"], grads["bias"]

    return x.tape._record("layer_norm", (x, gain, bias), norms.layer_norm(xv, eps, gv, bias.value), backward)


def chunked_attention(
    q: Var, k: Var, v: Var, c: int, causal: bool = True, counter: attention.OpCounter | None = None
) -> Var:
    qv, kv, vv = q.value, k.value, v.value
    out = attention.chunked_causal_attention(qv, kv, vv, c, causal, counter)
    return q.tape._record(
        "chunked_attention",
        (q, k, v),
        out,
        lambda g: attention.chunked_attention_backward(qv, kv, vv, c, causal, g),
    )


# --- Finite differences ---


@dataclass
class GradientReport:
    """Analytic and central-difference gradients per parameter."""

    analytic: dict[str, Tensor]
    numeric: dict[str, Tensor]
    max_rel_error: float
    worst: Optional[tuple[str, tuple]] = field(default=None)


GRADIENT_FLOOR = 1e-5


def relative_error(a: Tensor, n: Tensor, floor: float = GRADIENT_FLOOR) -> Tensor:
    """|a - n| / max(|a|, |n|, floor); gradients below the floor are compared absolutely."""
    return np.abs(a - n) / np.maximum(np.maximum(np.abs(a), np.abs(n)), floor)


def _evaluate(f, params: Mapping[str, Tensor]) -> float:
    tape = Tape(requires_grad=False)
    leaves = {name: tape.leaf(value, name) for name, value in params.items()}
    return float(f(tape, leaves).value)


def finite_diff_check(f: Callable[[Tape, dict[str, Var]], Var], params: Mapping[str, Tensor], step: float = 1e-5) -> GradientReport:
    """
    Compare tape gradients with central differences.

    Args:
        f: Builds a scalar loss on the given tape from the named leaves
        params: Parameter values, perturbed one coordinate at a time
        step: Central-difference step

    Returns:
        The gradient report; max_rel_error is over every coordinate

    Raises:
        EvaluationError: f is not finite at a probe point
    """
    if step <= 0.0:
        raise ParameterError(f"step must be positive, got {step}")
    params = {name: np.array(value, dtype=np.float64) for name, value in params.items()}

    tape = Tape()
    leaves = {name: tape.leaf(value, name) for name, value in params.items()}
    analytic = tape.backward(f(tape, leaves))

    numeric = {}
    worst, worst_err = None, 0.0
    for name, value in params.items():
        grad = np.zeros_like(value)
        for index in np.ndindex(value.shape):
            probes = []
            for sign in (1.0, -1.0):
                shifted = dict(params)
                shifted[name] = value.copy()
                shifted[name][index] += sign * step
                probe = _evaluate(f, shifted)
                if not np.isfinite(probe):
                    raise EvaluationError(f"non-finite value at {name}{list(index)}", name=name, index=index)
                probes.append(probe)
            grad[index] = (probes[0] - probes[1]) / (2.0 * step)
        numeric[name] = grad
        if grad.size:
            errors = relative_error(analytic[name], grad)
            flat = int(np.argmax(errors))
            if errors.flat[flat] > worst_err or worst is None:
                worst_err = float(errors.flat[flat])
                worst = (name, np.unravel_index(flat, grad.shape))
    logger.debug("gradient check over %d parameters: max relative error %.3e", len(params), worst_err)
    return GradientReport(analytic, numeric, worst_err, worst)

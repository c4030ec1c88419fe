"""
Damped EMA and complex EMA (CEMA) kernels

Each input feature j is lifted to h lanes by beta, every lane runs the damped
recurrence

    h_t = alpha * u_t + (1 - alpha * delta) * h_{t-1}

and the lanes are projected back to one value by eta. CEMA rotates both terms
by exp(i * theta) and keeps the real part of the projection. Both kernels are
available as a sequential scan with carry-in/carry-out state and as an explicit
causal convolution with the impulse response.
"""

import logging
from dataclasses import dataclass

import numpy as np

from biopars.errors import DimensionError, ParameterError, StateError
from biopars.models.tensor import ComplexTensor, Rng, Tensor, as_tensor, sigmoid, sum_last

logger = logging.getLogger(__name__)


def _check_decay(alpha: Tensor, delta: Tensor) -> None:
    if np.any(alpha <= 0.0) or np.any(alpha > 1.0):
        raise ParameterError("alpha must lie in (0, 1]")
    if np.any(delta <= 0.0) or np.any(delta > 1.0):
        raise ParameterError("delta must lie in (0, 1]")


def _check_same_shape(shape: tuple, **arrays) -> None:
    for name, arr in arrays.items():
        if arr.shape != shape:
            raise DimensionError(f"{name} has shape {arr.shape}, expected {shape}")


@dataclass(frozen=True)
class EmaParams:
    """Real EMA parameters, every field shaped (d, h)."""

    beta: Tensor
    alpha: Tensor
    delta: Tensor
    eta: Tensor

    def __post_init__(self):
        _check_same_shape(self.beta.shape, alpha=self.alpha, delta=self.delta, eta=self.eta)
        _check_decay(self.alpha, self.delta)

    @property
    def shape(self) -> tuple[int, int]:
        return self.beta.shape


@dataclass(frozen=True)
class CemaParams:
    """Complex EMA parameters: real beta/alpha/delta/theta and complex eta, shaped (d, h)."""

    beta: Tensor
    alpha: Tensor
    delta: Tensor
    theta: Tensor
    eta: ComplexTensor

    def __post_init__(self):
        _check_same_shape(self.beta.shape, alpha=self.alpha, delta=self.delta, theta=self.theta, eta=self.eta.re)
        _check_decay(self.alpha, self.delta)
        if not np.all(np.isfinite(self.theta)):
            raise ParameterError("theta must be finite")

    @property
    def shape(self) -> tuple[int, int]:
        return self.beta.shape

    @classmethod
    def from_ema(cls, p: EmaParams) -> "CemaParams":
        """The CEMA parameters that reproduce a real EMA (theta = 0, real eta)."""
        return cls(p.beta, p.alpha, p.delta, np.zeros_like(p.alpha), ComplexTensor.real(p.eta))


@dataclass(frozen=True)
class EmaState:
    """Hidden state h of shape (d, h); the imaginary part is zero for real EMA."""

    h: ComplexTensor

    @classmethod
    def zeros(cls, d: int, h: int) -> "EmaState":
        return cls(ComplexTensor.zeros((d, h)))

    @property
    def shape(self) -> tuple[int, int]:
        return self.h.shape

    def to_bytes(self) -> bytes:
        """Wire format: 2*d*h little-endian doubles, real parts then imaginary parts."""
        flat = np.concatenate([self.h.re.ravel(), self.h.im.ravel()])
        return flat.astype("<f8").tobytes()

    @classmethod
    def from_bytes(cls, payload: bytes, d: int, h: int) -> "EmaState":
        flat = np.frombuffer(payload, dtype="<f8")
        if flat.size != 2 * d * h:
            raise StateError(f"EMA state payload holds {flat.size} doubles, expected {2 * d * h}")
        flat = flat.astype(np.float64)
        return cls(ComplexTensor(flat[: d * h].reshape(d, h).copy(), flat[d * h :].reshape(d, h).copy()))


def _check_input(x: Tensor, shape: tuple[int, int], s0: EmaState | None) -> EmaState:
    d, h = shape
    if x.ndim != 2 or x.shape[1] != d:
        raise DimensionError(f"input has shape {x.shape}, expected (n, {d})")
    if s0 is None:
        return EmaState.zeros(d, h)
    if s0.shape != (d, h):
        raise StateError(f"state has shape {s0.shape}, expected {(d, h)}")
    return s0


def ema_apply(x: Tensor, p: EmaParams, s0: EmaState | None = None) -> tuple[Tensor, EmaState]:
    """
    Run the real damped EMA over a sequence.

    Args:
        x: Input of shape (n, d)
        p: EMA parameters
        s0: Carried-in state (zero state when omitted); must be real

    Returns:
        The projected output of shape (n, d) and the state after the last step
    """
    s0 = _check_input(x, p.shape, s0)
    if not s0.h.is_real():
        raise StateError("real EMA cannot continue from a state with an imaginary part")
    decay = 1.0 - p.alpha * p.delta
    h = s0.h.re.copy()
    y = np.zeros(x.shape)
    for t in range(x.shape[0]):
        u = p.beta * x[t][:, None]
        h = p.alpha * u + decay * h
        y[t] = sum_last(p.eta * h)
    return y, EmaState(ComplexTensor(h, np.zeros_like(h)))


def _cema_coefficients(p: CemaParams) -> tuple[Tensor, Tensor, Tensor, Tensor]:
    cos, sin = np.cos(p.theta), np.sin(p.theta)
    decay = 1.0 - p.alpha * p.delta
    return p.alpha * cos, p.alpha * sin, decay * cos, decay * sin


def cema_scan(
    x: Tensor, p: CemaParams, s0: EmaState | None = None, keep_states: bool = False
) -> tuple[Tensor, EmaState, tuple[Tensor, Tensor] | None]:
    """
    CEMA recurrence, optionally keeping every hidden state as (n, d, h) arrays.

    The rotation multiplies both the input term and the carried state.
    """
    s0 = _check_input(x, p.shape, s0)
    a_re, a_im, q_re, q_im = _cema_coefficients(p)
    h_re, h_im = s0.h.re.copy(), s0.h.im.copy()
    n = x.shape[0]
    y = np.zeros(x.shape)
    states = (np.zeros((n,) + p.shape), np.zeros((n,) + p.shape)) if keep_states else None
    for t in range(n):
        u = p.beta * x[t][:, None]
        new_re = a_re * u + (q_re * h_re - q_im * h_im)
        new_im = a_im * u + (q_re * h_im + q_im * h_re)
        h_re, h_im = new_re, new_im
        y[t] = sum_last(p.eta.re * h_re - p.eta.im * h_im)
        if states is not None:
            states[0][t] = h_re
            states[1][t] = h_im
    return y, EmaState(ComplexTensor(h_re, h_im)), states


def cema_apply(x: Tensor, p: CemaParams, s0: EmaState | None = None) -> tuple[Tensor, EmaState]:
    """
    Run the complex EMA over a sequence.

    Args:
        x: Input of shape (n, d)
        p: CEMA parameters
        s0: Carried-in state (zero state when omitted)

    Returns:
        Re(eta^T h_t) for every step, shape (n, d), and the final state
    """
    y, s_out, _ = cema_scan(x, p, s0)
    return y, s_out


def cema_scan_backward(
    x: Tensor, p: CemaParams, s0: EmaState, states: tuple[Tensor, Tensor], grad_y: Tensor
) -> dict[str, Tensor]:
    """
    Reverse pass of the CEMA recurrence, treating real and imaginary parts as
    independent real channels.

    Returns:
        Gradients keyed by ``x``, ``beta``, ``alpha``, ``delta``, ``theta``,
        ``eta_re``, ``eta_im``, ``h0_re`` and ``h0_im``
    """
    cos, sin = np.cos(p.theta), np.sin(p.theta)
    decay = 1.0 - p.alpha * p.delta
    a_re, a_im, q_re, q_im = p.alpha * cos, p.alpha * sin, decay * cos, decay * sin
    h_re_all, h_im_all = states

    g_x = np.zeros(x.shape)
    g_beta = np.zeros(p.shape)
    g_eta_re = np.zeros(p.shape)
    g_eta_im = np.zeros(p.shape)
    g_a_re = np.zeros(p.shape)
    g_a_im = np.zeros(p.shape)
    g_q_re = np.zeros(p.shape)
    g_q_im = np.zeros(p.shape)
    carry_re = np.zeros(p.shape)
    carry_im = np.zeros(p.shape)

    for t in range(x.shape[0] - 1, -1, -1):
        gy = grad_y[t][:, None]
        h_re, h_im = h_re_all[t], h_im_all[t]
        if t > 0:
            hp_re, hp_im = h_re_all[t - 1], h_im_all[t - 1]
        else:
            hp_re, hp_im = s0.h.re, s0.h.im
        g_re = gy * p.eta.re + carry_re
        g_im = -gy * p.eta.im + carry_im
        g_eta_re += gy * h_re
        g_eta_im -= gy * h_im

        u = p.beta * x[t][:, None]
        g_a_re += g_re * u
        g_a_im += g_im * u
        g_q_re += g_re * hp_re + g_im * hp_im
        g_q_im += g_im * hp_re - g_re * hp_im

        g_u = a_re * g_re + a_im * g_im
        g_beta += g_u * x[t][:, None]
        g_x[t] = np.sum(g_u * p.beta, axis=1)

        carry_re, carry_im = q_re * g_re + q_im * g_im, q_re * g_im - q_im * g_re

    g_decay = g_q_re * cos + g_q_im * sin
    return {
        "x": g_x,
        "beta": g_beta,
        "alpha": g_a_re * cos + g_a_im * sin - g_decay * p.delta,
        "delta": -g_decay * p.alpha,
        "theta": p.alpha * (g_a_im * cos - g_a_re * sin) + decay * (g_q_im * cos - g_q_re * sin),
        "eta_re": g_eta_re,
        "eta_im": g_eta_im,
        "h0_re": carry_re,
        "h0_im": carry_im,
    }


def cema_kernel(p: CemaParams, length: int) -> Tensor:
    """
    Impulse response of the CEMA from a zero state.

    K[j, tau] = Re(sum_k eta * alpha e^{i theta} * ((1 - alpha delta) e^{i theta})^tau * beta)

    Args:
        p: CEMA parameters
        length: Number of taps L >= 1

    Returns:
        Kernel of shape (d, L)
    """
    if length < 1:
        raise ParameterError(f"kernel length must be >= 1, got {length}")
    rotation = np.exp(1j * p.theta)
    gain = p.eta.to_numpy() * p.alpha * rotation * p.beta
    ratio = (1.0 - p.alpha * p.delta) * rotation
    kernel = np.zeros((p.shape[0], length))
    power = np.ones(p.shape, dtype=np.complex128)
    for tau in range(length):
        kernel[:, tau] = np.sum(gain * power, axis=1).real
        power = power * ratio
    return kernel


def ema_convolve(x: Tensor, p: CemaParams) -> Tensor:
    """Causal per-feature convolution of x with the CEMA impulse response (zero initial state)."""
    _check_input(x, p.shape, None)
    n = x.shape[0]
    kernel = cema_kernel(p, n)
    y = np.zeros(x.shape)
    for j in range(x.shape[1]):
        y[:, j] = np.convolve(x[:, j], kernel[j])[:n]
    return y


def ema_chunked(
    x: Tensor, p: CemaParams, s0: EmaState | None = None, chunk: int = 1
) -> tuple[Tensor, EmaState]:
    """
    Run the CEMA chunk by chunk, threading only the state between chunks.

    Bit-identical to a single cema_apply call for every chunk size.
    """
    if chunk < 1:
        raise ParameterError(f"chunk must be >= 1, got {chunk}")
    state = _check_input(x, p.shape, s0)
    outputs = []
    for start in range(0, x.shape[0], chunk):
        y, state = cema_apply(x[start : start + chunk], p, state)
        outputs.append(y)
    if not outputs:
        return np.zeros(x.shape), state
    return np.concatenate(outputs, axis=0), state


# --- Parameterisation used for training ---

CEMA_PARAM_NAMES = ("beta", "alpha_raw", "delta_raw", "theta", "eta_re", "eta_im")


def init_cema_params(d: int, h: int, rng: Rng) -> dict[str, Tensor]:
    """
    Seeded initial values of the unconstrained CEMA parameters.

    alpha and delta are sigmoid(raw); theta starts at 2*pi*k/h so the h arguments
    cover the unit circle; beta and eta start from normal(0, 1/sqrt(h)).
    """
    scale = 1.0 / np.sqrt(h)
    return {
        "beta": rng.normal((d, h), scale),
        "alpha_raw": rng.normal((d, h), 0.5),
        "delta_raw": rng.normal((d, h), 0.5),
        "theta": np.tile(2.0 * np.pi * np.arange(h) / h, (d, 1)),
        "eta_re": rng.normal((d, h), scale),
        "eta_im": rng.normal((d, h), scale),
    }


def cema_params_from_raw(raw: dict[str, Tensor]) -> CemaParams:
    return CemaParams(
        beta=as_tensor(raw["beta"]),
        alpha=sigmoid(raw["alpha_raw"]),
        delta=sigmoid(raw["delta_raw"]),
        theta=as_tensor(raw["theta"]),
        eta=ComplexTensor(as_tensor(raw["eta_re"]), as_tensor(raw["eta_im"])),
    )

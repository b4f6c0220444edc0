"""Small predictors with per-sample losses and exact analytic gradients.

Three kinds: linear regression (squared error with the 1/2 factor, so the
gradient is the plain residual), multinomial logistic regression, and a
one-hidden-layer tanh MLP. LabeledExample targets decide the loss:

    float target        squared error (output_dim must be 1)
    int target          softmax cross-entropy over output_dim classes
    int-array target    mean per-step cross-entropy over an action sequence,
                        with x holding one feature row per step

Parameters live in one flat vector per model, laid out weight block first
(row major) then bias block, hidden layer before output layer for the MLP.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass
from typing import Sequence

import numpy as np

__all__ = [
    "PredictorKind",
    "PredictorSpec",
    "LabeledExample",
    "init_parameters",
    "predict",
    "per_sample_loss",
    "per_sample_gradient",
    "per_sample_loss_and_gradient",
    "weighted_sgd_step",
    "evaluate",
]

REGRESSION_TOLERANCE = 0.1
INIT_WEIGHT_SCALE = 0.1


class PredictorKind(enum.Enum):
    LINEAR_REGRESSION = "linear_regression"
    LOGISTIC_REGRESSION = "logistic_regression"
    MLP = "mlp"


@dataclass(frozen=True)
class PredictorSpec:
    """Model architecture: kind plus layer sizes.

    hidden_dim is required for the MLP and must be absent otherwise.
    """

    kind: PredictorKind
    input_dim: int
    output_dim: int = 1
    hidden_dim: int | None = None

    def __post_init__(self) -> None:
        if self.input_dim < 1 or self.output_dim < 1:
            raise ValueError("input_dim and output_dim must be positive")
        if self.kind is PredictorKind.MLP:
            if self.hidden_dim is None or self.hidden_dim < 1:
                raise ValueError("MLP requires a positive hidden_dim")
        elif self.hidden_dim is not None:
            raise ValueError(f"hidden_dim only applies to MLP, not {self.kind.name}")

    @property
    def param_count(self) -> int:
        d, o = self.input_dim, self.output_dim
        if self.kind is PredictorKind.MLP:
            h = self.hidden_dim
            return d * h + h + h * o + o
        return d * o + o


@dataclass
class LabeledExample:
    """One training example: features, target, and a difficulty round in 1..5.

    x is (input_dim,) for scalar targets or (steps, input_dim) when y is an
    action-index sequence.
    """

    x: np.ndarray
    y: float | int | np.ndarray
    round: int

    def __post_init__(self) -> None:
        self.x = np.asarray(self.x, dtype=float)
        if not np.all(np.isfinite(self.x)):
            raise ValueError("features must be finite")
        if not 1 <= int(self.round) <= 5:
            raise ValueError(f"round must be in 1..5, got {self.round}")
        self.round = int(self.round)
        if isinstance(self.y, np.ndarray) or (
            isinstance(self.y, (list, tuple))
        ):
            self.y = np.asarray(self.y, dtype=int)
            if self.x.ndim != 2 or self.y.ndim != 1 or len(self.y) != self.x.shape[0]:
                raise ValueError(
                    "sequence targets need x of shape (steps, input_dim) with one "
                    "action per step"
                )
        elif isinstance(self.y, (bool, np.bool_)):
            raise ValueError("targets must be reals or integer class indices")
        elif isinstance(self.y, (int, np.integer)):
            self.y = int(self.y)
            if self.x.ndim != 1:
                raise ValueError("class targets need 1-d features")
        else:
            self.y = float(self.y)
            if self.x.ndim != 1:
                raise ValueError("regression targets need 1-d features")

    @property
    def is_sequence(self) -> bool:
        return isinstance(self.y, np.ndarray)


def init_parameters(spec: PredictorSpec, seed: int) -> np.ndarray:
    """Deterministic init: weights uniform in [-0.1, 0.1], biases exactly zero."""
    rng = np.random.default_rng(seed)
    d, o = spec.input_dim, spec.output_dim
    theta = np.zeros(spec.param_count)
    if spec.kind is PredictorKind.MLP:
        h = spec.hidden_dim
        theta[: d * h] = rng.uniform(-INIT_WEIGHT_SCALE, INIT_WEIGHT_SCALE, d * h)
        off = d * h + h
        theta[off : off + h * o] = rng.uniform(-INIT_WEIGHT_SCALE, INIT_WEIGHT_SCALE, h * o)
    else:
        theta[: d * o] = rng.uniform(-INIT_WEIGHT_SCALE, INIT_WEIGHT_SCALE, d * o)
    return theta


def _unpack_affine(spec: PredictorSpec, theta: np.ndarray):
    d, o = spec.input_dim, spec.output_dim
    return theta[: d * o].reshape(o, d), theta[d * o : d * o + o]


def _unpack_mlp(spec: PredictorSpec, theta: np.ndarray):
    d, h, o = spec.input_dim, spec.hidden_dim, spec.output_dim
    i = 0
    w1 = theta[i : i + d * h].reshape(h, d)
    i += d * h
    b1 = theta[i : i + h]
    i += h
    w2 = theta[i : i + h * o].reshape(o, h)
    i += h * o
    b2 = theta[i : i + o]
    return w1, b1, w2, b2


def _check_theta(spec: PredictorSpec, theta: np.ndarray) -> np.ndarray:
    theta = np.asarray(theta, dtype=float)
    if theta.shape != (spec.param_count,):
        raise ValueError(
            f"parameter vector has length {theta.size}, spec expects {spec.param_count}"
        )
    return theta


def _forward_rows(spec: PredictorSpec, theta: np.ndarray, xs: np.ndarray):
    """Outputs for a (rows, input_dim) feature matrix, plus the hidden
    activations when the model has them."""
    if xs.shape[1] != spec.input_dim:
        raise ValueError(
            f"feature dimension {xs.shape[1]} does not match input_dim {spec.input_dim}"
        )
    if spec.kind is PredictorKind.MLP:
        w1, b1, w2, b2 = _unpack_mlp(spec, theta)
        hidden = np.tanh(xs @ w1.T + b1)
        return hidden @ w2.T + b2, hidden
    w, b = _unpack_affine(spec, theta)
    return xs @ w.T + b, None


def predict(spec: PredictorSpec, theta, x) -> np.ndarray:
    """Raw model outputs (scores or regression values) for one feature vector."""
    theta = _check_theta(spec, theta)
    x = np.asarray(x, dtype=float)
    if x.ndim != 1:
        raise ValueError("predict expects a single feature vector")
    out, _ = _forward_rows(spec, theta, x[None, :])
    return out[0]


def _log_softmax(z: np.ndarray) -> np.ndarray:
    shifted = z - np.max(z, axis=-1, keepdims=True)
    return shifted - np.log(np.sum(np.exp(shifted), axis=-1, keepdims=True))


def _loss_and_output_grad(spec: PredictorSpec, ex: LabeledExample, out: np.ndarray):
    """Loss and dLoss/dOutput for the example, both shaped like `out`."""
    if ex.is_sequence:
        logp = _log_softmax(out)
        picked = logp[np.arange(len(ex.y)), ex.y]
        loss = float(-np.mean(picked))
        grad = np.exp(logp)
        grad[np.arange(len(ex.y)), ex.y] -= 1.0
        grad /= len(ex.y)
        return loss, grad
    if isinstance(ex.y, int):
        if not 0 <= ex.y < spec.output_dim:
            raise ValueError(f"class index {ex.y} out of range for output_dim {spec.output_dim}")
        logp = _log_softmax(out)
        loss = float(-logp[0, ex.y])
        grad = np.exp(logp)
        grad[0, ex.y] -= 1.0
        return loss, grad
    if spec.output_dim != 1:
        raise ValueError("regression targets require output_dim 1")
    resid = float(out[0, 0]) - ex.y
    grad = np.array([[resid]])
    return 0.5 * resid * resid, grad


def per_sample_loss(spec: PredictorSpec, theta, ex: LabeledExample) -> float:
    theta = _check_theta(spec, theta)
    xs = ex.x if ex.is_sequence else ex.x[None, :]
    out, _ = _forward_rows(spec, theta, xs)
    loss, _ = _loss_and_output_grad(spec, ex, out)
    return loss


def per_sample_loss_and_gradient(spec: PredictorSpec, theta, ex: LabeledExample):
    """Loss plus its exact gradient with respect to the flat parameters."""
    theta = _check_theta(spec, theta)
    xs = ex.x if ex.is_sequence else ex.x[None, :]
    out, hidden = _forward_rows(spec, theta, xs)
    loss, dout = _loss_and_output_grad(spec, ex, out)

    grad = np.empty_like(theta)
    if spec.kind is PredictorKind.MLP:
        w1, _, w2, _ = _unpack_mlp(spec, theta)
        d, h, o = spec.input_dim, spec.hidden_dim, spec.output_dim
        dw2 = dout.T @ hidden
        db2 = dout.sum(axis=0)
        dhid = (dout @ w2) * (1.0 - hidden * hidden)
        dw1 = dhid.T @ xs
        db1 = dhid.sum(axis=0)
        grad[: d * h] = dw1.ravel()
        grad[d * h : d * h + h] = db1
        grad[d * h + h : d * h + h + h * o] = dw2.ravel()
        grad[d * h + h + h * o :] = db2
    else:
        d, o = spec.input_dim, spec.output_dim
        dw = dout.T @ xs
        grad[: d * o] = dw.ravel()
        grad[d * o :] = dout.sum(axis=0)
    return loss, grad


def per_sample_gradient(spec: PredictorSpec, theta, ex: LabeledExample) -> np.ndarray:
    return per_sample_loss_and_gradient(spec, theta, ex)[1]


def weighted_sgd_step(
    spec: PredictorSpec,
    theta,
    batch: Sequence[LabeledExample],
    weights: Sequence[float],
    lr: float,
) -> np.ndarray:
    """One step of theta - lr * mean_i(w_i * grad_i) over the batch."""
    theta = _check_theta(spec, theta)
    if len(batch) == 0:
        raise ValueError("batch must be nonempty")
    if len(weights) != len(batch):
        raise ValueError(
            f"got {len(weights)} weights for a batch of {len(batch)} examples"
        )
    if not (np.isfinite(lr) and lr >= 0):
        raise ValueError(f"learning rate must be finite and nonnegative, got {lr}")
    acc = np.zeros_like(theta)
    for ex, w in zip(batch, weights):
        acc += w * per_sample_gradient(spec, theta, ex)
    return theta - lr * (acc / len(batch))


def evaluate(spec: PredictorSpec, theta, dataset: Sequence[LabeledExample]) -> dict:
    """Mean per-sample loss and accuracy over a dataset.

    Accuracy counts argmax-correct predictions for classification, the
    per-example fraction of argmax-correct steps for sequences, and
    predictions within 0.1 of the target for regression.
    """
    theta = _check_theta(spec, theta)
    if len(dataset) == 0:
        raise ValueError("dataset must be nonempty")
    losses = np.empty(len(dataset))
    scores = np.empty(len(dataset))
    for i, ex in enumerate(dataset):
        xs = ex.x if ex.is_sequence else ex.x[None, :]
        out, _ = _forward_rows(spec, theta, xs)
        losses[i], _ = _loss_and_output_grad(spec, ex, out)
        if ex.is_sequence:
            scores[i] = float(np.mean(np.argmax(out, axis=1) == ex.y))
        elif isinstance(ex.y, int):
            scores[i] = float(int(np.argmax(out[0])) == ex.y)
        else:
            scores[i] = float(abs(float(out[0, 0]) - ex.y) <= REGRESSION_TOLERANCE)
    return {"mean_loss": float(np.mean(losses)), "accuracy": float(np.mean(scores))}

"""Multi-layer perceptron: relu hidden layers, softmax output,
cross-entropy loss, Adam updates, standardised inputs."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

ADAM_BETA1 = 0.9
ADAM_BETA2 = 0.999
ADAM_EPS = 1e-8


def _softmax(z: np.ndarray) -> np.ndarray:
    shifted = z - z.max(axis=1, keepdims=True)
    e = np.exp(shifted)
    return e / e.sum(axis=1, keepdims=True)


@dataclass
class MLP:
    """Fitted network. ``weights[i]`` maps layer i to layer i+1."""

    weights: list[np.ndarray]
    biases: list[np.ndarray]
    scaler_mean: np.ndarray
    scaler_std: np.ndarray
    alpha: float
    loss_curve: list[float] = field(default_factory=list)

    def _standardise(self, X: np.ndarray) -> np.ndarray:
        return (X - self.scaler_mean) / self.scaler_std

    def _forward(self, X: np.ndarray) -> list[np.ndarray]:
        """Activations per layer; the last entry is the softmax output."""
        acts = [X]
        for i, (W, b) in enumerate(zip(self.weights, self.biases)):
            z = acts[-1] @ W + b
            acts.append(_softmax(z) if i == len(self.weights) - 1 else np.maximum(z, 0.0))
        return acts

    def predict_proba(self, X: np.ndarray) -> np.ndarray:
        X = np.asarray(X, dtype=np.float64)
        return self._forward(self._standardise(X))[-1]

    def loss_and_grads(self, X: np.ndarray, onehot: np.ndarray,
                       ) -> tuple[float, list[np.ndarray], list[np.ndarray]]:
        """Batch loss and its gradients w.r.t. every weight and bias.

        Loss is the mean cross-entropy plus an L2 penalty
        ``0.5 * alpha * sum(W^2) / batch_size`` on the weights (biases
        are not penalised).
        """
        n = len(X)
        acts = self._forward(X)
        proba = acts[-1]
        ce = float(-np.mean(np.log(np.maximum(
            (proba * onehot).sum(axis=1), 1e-300))))
        l2 = 0.5 * self.alpha * sum(float((W * W).sum()) for W in self.weights) / n
        loss = ce + l2
        grad_w: list[np.ndarray] = [None] * len(self.weights)
        grad_b: list[np.ndarray] = [None] * len(self.biases)
        delta = (proba - onehot) / n  # softmax + cross-entropy gradient
        for i in range(len(self.weights) - 1, -1, -1):
            grad_w[i] = acts[i].T @ delta + self.alpha * self.weights[i] / n
            grad_b[i] = delta.sum(axis=0)
            if i > 0:
                delta = (delta @ self.weights[i].T) * (acts[i] > 0)
        return loss, grad_w, grad_b

    def to_json(self) -> dict:
        return {
            "weights": [W.tolist() for W in self.weights],
            "biases": [b.tolist() for b in self.biases],
            "scaler_mean": self.scaler_mean.tolist(),
            "scaler_std": self.scaler_std.tolist(),
            "alpha": self.alpha,
            "loss_curve": [float(v) for v in self.loss_curve],
        }

    @classmethod
    def from_json(cls, obj: dict) -> "MLP":
        return cls(
            weights=[np.asarray(W, dtype=np.float64) for W in obj["weights"]],
            biases=[np.asarray(b, dtype=np.float64) for b in obj["biases"]],
            scaler_mean=np.asarray(obj["scaler_mean"], dtype=np.float64),
            scaler_std=np.asarray(obj["scaler_std"], dtype=np.float64),
            alpha=obj["alpha"],
            loss_curve=list(obj["loss_curve"]),
        )


def init_mlp(n_features: int, hidden_layer_sizes: tuple[int, ...], n_classes: int,
             alpha: float, scaler_mean: np.ndarray, scaler_std: np.ndarray,
             rng: np.random.Generator) -> MLP:
    """Glorot-uniform weights, zero biases."""
    sizes = [n_features, *hidden_layer_sizes, n_classes]
    weights = []
    biases = []
    for fan_in, fan_out in zip(sizes, sizes[1:]):
        limit = np.sqrt(6.0 / (fan_in + fan_out))
        weights.append(rng.uniform(-limit, limit, size=(fan_in, fan_out)))
        biases.append(np.zeros(fan_out, dtype=np.float64))
    return MLP(weights=weights, biases=biases, scaler_mean=scaler_mean,
               scaler_std=scaler_std, alpha=alpha)


def fit_mlp(X: np.ndarray, y: np.ndarray, n_classes: int, *,
            hidden_layer_sizes: tuple[int, ...], alpha: float, batch_size: int | str,
            learning_rate_init: float, max_iter: int, tol: float,
            seed: int) -> MLP:
    """Adam-trained softmax MLP on standardised features.

    Inputs are standardised to zero mean / unit variance with statistics
    stored in the model. Training runs ``max_iter`` epochs of
    mini-batches at a constant learning rate and stops early once the
    epoch loss improves by less than ``tol``.
    """
    X = np.asarray(X, dtype=np.float64)
    y = np.asarray(y, dtype=np.int64)
    if len(np.unique(y)) < 2:
        raise ValueError("mlp training needs at least 2 classes in the training data")
    n = len(X)
    mean = X.mean(axis=0)
    std = X.std(axis=0)
    std = np.where(std > 0, std, 1.0)
    Xs = (X - mean) / std
    onehot = np.zeros((n, n_classes), dtype=np.float64)
    onehot[np.arange(n), y] = 1.0
    if batch_size == "auto":
        batch_size = min(200, n)
    rng = np.random.default_rng(np.random.SeedSequence([seed]))
    model = init_mlp(X.shape[1], tuple(hidden_layer_sizes), n_classes, alpha, mean, std, rng)

    adam_m = ([np.zeros_like(W) for W in model.weights],
              [np.zeros_like(b) for b in model.biases])
    adam_v = ([np.zeros_like(W) for W in model.weights],
              [np.zeros_like(b) for b in model.biases])
    step = 0

    def update(params: list[np.ndarray], grads: list[np.ndarray], which: int) -> None:
        for i, (p, g) in enumerate(zip(params, grads)):
            m = adam_m[which][i]
            v = adam_v[which][i]
            m *= ADAM_BETA1
            m += (1 - ADAM_BETA1) * g
            v *= ADAM_BETA2
            v += (1 - ADAM_BETA2) * g * g
            m_hat = m / (1 - ADAM_BETA1 ** step)
            v_hat = v / (1 - ADAM_BETA2 ** step)
            p -= learning_rate_init * m_hat / (np.sqrt(v_hat) + ADAM_EPS)

    prev_loss = np.inf
    for _ in range(max_iter):
        perm = rng.permutation(n)
        epoch_loss = 0.0
        for start in range(0, n, batch_size):
            batch = perm[start:start + batch_size]
            loss, grad_w, grad_b = model.loss_and_grads(Xs[batch], onehot[batch])
            step += 1
            update(model.weights, grad_w, 0)
            update(model.biases, grad_b, 1)
            epoch_loss += loss * len(batch)
        epoch_loss /= n
        model.loss_curve.append(epoch_loss)
        if abs(prev_loss - epoch_loss) < tol:
            break
        prev_loss = epoch_loss
    return model

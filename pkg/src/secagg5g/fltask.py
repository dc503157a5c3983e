"""Synthetic federated task: logistic regression on two Gaussian blobs.

Small enough to run hundreds of simulated training runs per minute, yet
realistic enough that dropout schedules visibly move the accuracy curve.
Every array is derived from an explicit seed; identical seeds give
identical shards, test sets, and local updates.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass
class FlTask:
    """Per-device training shards plus a shared held-out test set.

    The model is a linear classifier with bias, dimension feature_dim + 1.
    Local updates are parameter deltas clipped componentwise to clip_bound
    so they always fit the protocol's fixed-point codec.
    """

    feature_dim: int
    shards: list[tuple[np.ndarray, np.ndarray]]
    test_x: np.ndarray
    test_y: np.ndarray
    learning_rate: float
    local_epochs: int
    data_seed: int
    clip_bound: float = 1.0
    separation_direction: np.ndarray | None = None  # true blob axis, for oracles

    @property
    def dim(self) -> int:
        return self.feature_dim + 1

    @property
    def n_shards(self) -> int:
        return len(self.shards)

    def local_update(self, ue_index: int, model: list[float]) -> list[float]:
        x, y = self.shards[ue_index]
        delta = local_train(
            model, x, y, self.learning_rate, self.local_epochs, self.clip_bound
        )
        return delta.tolist()

    def accuracy(self, model: list[float]) -> float:
        return evaluate(model, self.test_x, self.test_y)


def generate_data(
    seed: int,
    n_ues: int,
    feature_dim: int = 9,
    samples_per_shard: int = 40,
    test_samples: int = 200,
    learning_rate: float = 0.5,
    local_epochs: int = 2,
    clip_bound: float = 1.0,
    blob_separation: float = 4.0,
) -> FlTask:
    """Two unit-variance Gaussian blobs with means blob_separation apart.

    Samples are split into n_ues equal disjoint shards; the test set is drawn
    separately and balanced. Labels are +/-1.
    """
    if n_ues < 1:
        raise ValueError("need at least one device")
    rng = np.random.default_rng(seed)
    direction = rng.normal(size=feature_dim)
    direction /= np.linalg.norm(direction)
    mean = (blob_separation / 2.0) * direction

    def draw(count):
        half = count // 2
        pos = rng.normal(size=(half, feature_dim)) + mean
        negative = rng.normal(size=(count - half, feature_dim)) - mean
        x = np.concatenate([pos, negative])
        y = np.concatenate([np.ones(half), -np.ones(count - half)])
        order = rng.permutation(count)
        return x[order], y[order]

    train_x, train_y = draw(n_ues * samples_per_shard)
    shards = [
        (
            train_x[i * samples_per_shard : (i + 1) * samples_per_shard],
            train_y[i * samples_per_shard : (i + 1) * samples_per_shard],
        )
        for i in range(n_ues)
    ]
    test_x, test_y = draw(test_samples)
    return FlTask(
        feature_dim=feature_dim,
        shards=shards,
        test_x=test_x,
        test_y=test_y,
        learning_rate=learning_rate,
        local_epochs=local_epochs,
        data_seed=seed,
        clip_bound=clip_bound,
        separation_direction=direction,
    )


def _with_bias(x: np.ndarray) -> np.ndarray:
    return np.hstack([x, np.ones((x.shape[0], 1))])


def logistic_loss(model, x: np.ndarray, y: np.ndarray) -> float:
    z = _with_bias(x) @ np.asarray(model, dtype=np.float64)
    return float(np.mean(np.logaddexp(0.0, -y * z)))


def _sigmoid(v: np.ndarray) -> np.ndarray:
    # piecewise form avoids exp overflow for large |v|
    out = np.empty_like(v)
    pos = v >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-v[pos]))
    ev = np.exp(v[~pos])
    out[~pos] = ev / (1.0 + ev)
    return out


def local_train(
    model, x: np.ndarray, y: np.ndarray, lr: float, epochs: int, clip_bound: float
) -> np.ndarray:
    """Full-batch gradient descent on the logistic loss; returns the clipped
    parameter delta. Zero epochs gives a zero update."""
    w = np.asarray(model, dtype=np.float64).copy()
    start = w.copy()
    xb = _with_bias(x)
    for _ in range(epochs):
        z = xb @ w
        grad = -(xb.T @ (y * _sigmoid(-y * z))) / len(y)
        w -= lr * grad
    return np.clip(w - start, -clip_bound, clip_bound)


def evaluate(model, x: np.ndarray, y: np.ndarray) -> float:
    """Fraction of test points whose predicted sign matches the label."""
    z = _with_bias(x) @ np.asarray(model, dtype=np.float64)
    predictions = np.where(z >= 0.0, 1.0, -1.0)
    return float(np.mean(predictions == y))

"""Logistic regression baseline.

Maximum-likelihood fit by damped Newton ascent on internally standardised
features; the learned weights are mapped back to the original scale.  No
penalty term is applied beyond the iteration cap.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

__all__ = ["LogisticRegressionModel", "fit_logistic"]

_P_FLOOR = np.nextafter(0.0, 1.0)
_P_CEIL = np.nextafter(1.0, 0.0)


def _sigmoid(z: np.ndarray) -> np.ndarray:
    return np.exp(-np.logaddexp(0.0, -z))


@dataclass
class LogisticRegressionModel:
    weights: np.ndarray  # one per feature, original scale
    bias: float
    max_iterations: int
    tolerance: float
    converged: bool

    @property
    def n_features(self) -> int:
        return int(self.weights.size)

    def score_many(self, features) -> np.ndarray:
        x = np.asarray(features, dtype=np.float64)
        if x.ndim != 2 or x.shape[1] != self.n_features:
            raise ValueError(f"expected (n, {self.n_features}) feature matrix, got {x.shape}")
        p = _sigmoid(x @ self.weights + self.bias)
        return np.clip(p, _P_FLOOR, _P_CEIL)  # keep scores strictly inside (0, 1)

    def score(self, x) -> float:
        x = np.asarray(x, dtype=np.float64)
        if x.ndim != 1 or x.size != self.n_features:
            raise ValueError(f"expected a feature vector of length {self.n_features}, got shape {x.shape}")
        return float(self.score_many(x[None, :])[0])

    def to_dict(self) -> dict:
        return {
            "kind": "logistic_regression",
            "weights": self.weights.tolist(),
            "bias": self.bias,
            "max_iterations": self.max_iterations,
            "tolerance": self.tolerance,
            "converged": self.converged,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "LogisticRegressionModel":
        return cls(
            weights=np.asarray(data["weights"], dtype=np.float64),
            bias=float(data["bias"]),
            max_iterations=int(data["max_iterations"]),
            tolerance=float(data["tolerance"]),
            converged=bool(data["converged"]),
        )


def fit_logistic(
    features,
    labels,
    max_iterations: int = 500,
    tolerance: float = 1e-8,
) -> LogisticRegressionModel:
    """Fit by Newton ascent of the binomial log-likelihood.

    Stops when the gradient infinity-norm drops to `tolerance` or after
    `max_iterations` steps; on (quasi-)separable data the bias and weights
    simply stop growing at the cap.
    """
    x = np.asarray(features, dtype=np.float64)
    if x.ndim == 1:
        x = x[:, None]
    y = np.asarray(labels, dtype=np.float64)
    if x.ndim != 2 or y.ndim != 1 or y.size != x.shape[0]:
        raise ValueError("features must be (n, d) with one label per row")
    if x.shape[0] == 0:
        raise ValueError("cannot fit on empty input")
    if not np.all(np.isfinite(x)):
        raise ValueError("features contain non-finite values")
    if not np.all((y == 0.0) | (y == 1.0)):
        raise ValueError("labels must be 0 or 1")

    mean = x.mean(axis=0)
    std = x.std(axis=0)
    usable = std > 0.0
    scale = np.where(usable, std, 1.0)
    xs = (x - mean) / scale
    xs[:, ~usable] = 0.0  # constant columns carry no signal
    design = np.hstack([xs, np.ones((x.shape[0], 1))])

    beta = np.zeros(design.shape[1])
    converged = False
    for _ in range(max_iterations):
        p = _sigmoid(design @ beta)
        grad = design.T @ (y - p)
        if np.max(np.abs(grad)) <= tolerance:
            converged = True
            break
        w = np.clip(p * (1.0 - p), 1e-12, None)
        hess = design.T @ (design * w[:, None])
        hess[np.diag_indices_from(hess)] += 1e-10  # numerical guard only
        try:
            step = np.linalg.solve(hess, grad)
        except np.linalg.LinAlgError:
            break
        beta = beta + step

    weights_std = beta[:-1]
    bias_std = beta[-1]
    weights = np.where(usable, weights_std / scale, 0.0)
    bias = float(bias_std - np.dot(weights, mean))
    weights.setflags(write=False)
    return LogisticRegressionModel(
        weights=weights,
        bias=bias,
        max_iterations=max_iterations,
        tolerance=tolerance,
        converged=converged,
    )

"""Gradient-boosted depth-1 trees (stumps) with logistic loss.

Second-order boosting with exact greedy split search: every midpoint
between consecutive distinct sorted feature values is a candidate
threshold, ties broken by lowest feature index then lowest threshold.
Each stump carries exactly four parameters (feature, threshold, two leaf
values), so an ensemble of T trees has 4T parameters.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from numba import njit

from .errors import ShapeError, SingleClassError


@dataclass(frozen=True)
class BoostParams:
    n_trees: int = 100
    learning_rate: float = 0.3
    lam: float = 1.0            # L2 penalty on leaf values
    min_child_weight: float = 1.0

    def __post_init__(self):
        if self.n_trees < 1:
            raise ValueError("n_trees must be >= 1")
        if not 0 < self.learning_rate <= 1:
            raise ValueError("learning_rate must be in (0, 1]")
        if self.lam < 0:
            raise ValueError("lam must be >= 0")


@dataclass(frozen=True)
class Stump:
    feature: int
    threshold: float
    left_value: float   # output when x[feature] < threshold
    right_value: float


@dataclass
class StumpEnsemble:
    features: np.ndarray    # (T,) int64
    thresholds: np.ndarray  # (T,) float64
    left_values: np.ndarray
    right_values: np.ndarray
    base_score: float       # initial log-odds
    params: BoostParams
    n_features: int
    train_loss: np.ndarray = field(default_factory=lambda: np.zeros(0))

    @property
    def trees(self) -> list[Stump]:
        return [
            Stump(int(f), float(t), float(l), float(r))
            for f, t, l, r in zip(
                self.features, self.thresholds, self.left_values, self.right_values
            )
        ]


@njit(cache=True, nogil=True)
def _best_split(xs, order, grad, hess, lam, mcw, g_total, h_total):
    """Scan all (feature, threshold) candidates; return the max-gain split.

    xs[d] holds feature d sorted ascending, order[d] the matching sample
    indices. Iterating features then thresholds ascending and accepting
    only strictly larger gains implements the documented tie-break.
    """
    n_feat, n = xs.shape
    parent = g_total * g_total / (h_total + lam)
    best_gain = 0.0
    best_feat = -1
    best_thr = 0.0
    best_left = 0.0
    best_right = 0.0
    for d in range(n_feat):
        row = xs[d]
        idx = order[d]
        g_left = 0.0
        h_left = 0.0
        for i in range(n - 1):
            j = idx[i]
            g_left += grad[j]
            h_left += hess[j]
            if row[i] == row[i + 1]:
                continue
            h_right = h_total - h_left
            if h_left < mcw or h_right < mcw:
                continue
            g_right = g_total - g_left
            gain = 0.5 * (
                g_left * g_left / (h_left + lam)
                + g_right * g_right / (h_right + lam)
                - parent
            )
            if gain > best_gain:
                best_gain = gain
                best_feat = d
                best_thr = 0.5 * (row[i] + row[i + 1])
                best_left = -g_left / (h_left + lam)
                best_right = -g_right / (h_right + lam)
    return best_feat, best_thr, best_left, best_right, best_gain


def _sigmoid(m: np.ndarray) -> np.ndarray:
    out = np.empty_like(m)
    pos = m >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-m[pos]))
    e = np.exp(m[~pos])
    out[~pos] = e / (1.0 + e)
    return out


def _log_loss(y: np.ndarray, p: np.ndarray) -> float:
    p = np.clip(p, 1e-15, 1 - 1e-15)
    return float(-np.mean(y * np.log(p) + (1 - y) * np.log(1 - p)))


def fit_stumps(X: np.ndarray, y: np.ndarray, params: BoostParams) -> StumpEnsemble:
    """Fit a binary classifier of params.n_trees boosted stumps.

    A round with no positive-gain admissible split emits an all-zero
    stump on feature 0 so the ensemble always has exactly n_trees trees.
    """
    X = np.ascontiguousarray(np.asarray(X, dtype=np.float64))
    y = np.asarray(y, dtype=np.float64).reshape(-1)
    if X.ndim != 2 or X.shape[0] != y.shape[0]:
        raise ShapeError(f"X {X.shape} and y {y.shape} do not align")
    if not np.all(np.isfinite(X)):
        raise ShapeError("features contain non-finite values")
    n, n_feat = X.shape
    pos = float(y.sum())
    if n < 2 or pos == 0 or pos == n:
        raise SingleClassError("need samples from both classes")

    base_score = float(np.log(pos / (n - pos)))
    order = np.argsort(X, axis=0, kind="stable").T.astype(np.int64)
    order = np.ascontiguousarray(order)
    xs = np.ascontiguousarray(np.take_along_axis(X, order.T, axis=0).T)

    t_count = params.n_trees
    features = np.zeros(t_count, dtype=np.int64)
    thresholds = np.zeros(t_count)
    lefts = np.zeros(t_count)
    rights = np.zeros(t_count)
    losses = np.zeros(t_count)

    margins = np.full(n, base_score)
    for t in range(t_count):
        p = _sigmoid(margins)
        grad = p - y
        hess = p * (1.0 - p)
        feat, thr, left, right, gain = _best_split(
            xs,
            order,
            grad,
            hess,
            params.lam,
            params.min_child_weight,
            float(grad.sum()),
            float(hess.sum()),
        )
        if feat >= 0 and gain > 0.0:
            left *= params.learning_rate
            right *= params.learning_rate
            features[t] = feat
            thresholds[t] = thr
            lefts[t] = left
            rights[t] = right
            margins = margins + np.where(X[:, feat] < thr, left, right)
        losses[t] = _log_loss(y, _sigmoid(margins))

    return StumpEnsemble(
        features=features,
        thresholds=thresholds,
        left_values=lefts,
        right_values=rights,
        base_score=base_score,
        params=params,
        n_features=n_feat,
        train_loss=losses,
    )


def predict_margin(model: StumpEnsemble, X: np.ndarray) -> np.ndarray:
    """Raw log-odds for an (N, D) feature matrix."""
    X = np.asarray(X, dtype=np.float64)
    if X.ndim != 2 or X.shape[1] != model.n_features:
        raise ShapeError(
            f"expected (N, {model.n_features}) features, got {X.shape}"
        )
    margins = np.full(X.shape[0], model.base_score)
    for f, t, l, r in zip(
        model.features, model.thresholds, model.left_values, model.right_values
    ):
        margins += np.where(X[:, f] < t, l, r)
    return margins


def predict_scores(model: StumpEnsemble, X: np.ndarray) -> np.ndarray:
    """Probability of the positive (fake) class for each row of X."""
    return _sigmoid(predict_margin(model, X))


def predict_score(model: StumpEnsemble, x: np.ndarray) -> float:
    """Probability of the positive class for a single feature vector."""
    x = np.asarray(x, dtype=np.float64).reshape(1, -1)
    return float(predict_scores(model, x)[0])


def param_count(model: StumpEnsemble) -> int:
    """Four parameters per stump; hyperparameters are not counted."""
    return 4 * int(model.features.shape[0])

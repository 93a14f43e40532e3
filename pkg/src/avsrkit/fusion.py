"""Prior-weighted logistic-regression calibration and score fusion.

One model covers both jobs: calibrating a single system's scores to llrs and
affinely fusing several systems. Training minimizes the prior-weighted binary
cross-entropy of logistic(w . s + b + logit(prior)) against trial labels with
a deterministic full-batch gradient descent and backtracking line search, so
fitted weights are exactly reproducible.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np
from scipy.special import expit

from .checkpoint import CheckpointError, load_checkpoint, save_checkpoint
from .metrics import DcfParams
from .store import ScoreEntry, ScoreSet

WEIGHT_NORM_CAP = 1e3


@dataclass
class FusionModel:
    weights: np.ndarray  # one per input system
    bias: float
    effective_prior: float

    def __post_init__(self):
        self.weights = np.atleast_1d(np.asarray(self.weights, dtype=np.float64))
        if not np.all(np.isfinite(self.weights)) or not math.isfinite(self.bias):
            raise ValueError("fusion parameters must be finite")
        if not 0.0 < self.effective_prior < 1.0:
            raise ValueError("effective_prior must be in (0, 1)")

    @property
    def n_systems(self) -> int:
        return self.weights.shape[0]


def _aligned_matrix(system_scores, require_labels):
    """Stack per-system scores into (n_trials, n_systems); checks alignment."""
    if not system_scores:
        raise ValueError("need at least one system")
    ref = system_scores[0]
    keys = [(e.enroll_id, e.test_id) for e in ref]
    for k, other in enumerate(system_scores[1:], start=2):
        if [(e.enroll_id, e.test_id) for e in other] != keys:
            raise ValueError(f"system {k} trial list does not match system 1")
    mat = np.array([[e.score for e in s] for s in system_scores], dtype=np.float64).T
    labels = None
    if require_labels:
        _, is_target = ref.scores_and_labels()
        labels = is_target
    return mat, labels, ref


def _objective_grad(theta, s_std, is_target, offset, l2):
    """Prior-weighted logistic loss and gradient; theta = (weights..., bias)."""
    w = theta[:-1]
    b = theta[-1]
    a = s_std @ w + b + offset["logit_prior"]
    # softplus(-a) on targets, softplus(a) on nontargets
    loss_t = np.logaddexp(0.0, -a[is_target]).mean()
    loss_n = np.logaddexp(0.0, a[~is_target]).mean()
    prior = offset["prior"]
    loss = prior * loss_t + (1.0 - prior) * loss_n + 0.5 * l2 * float(w @ w)

    p = expit(a)
    coef = np.where(is_target,
                    -prior * (1.0 - p) / max(is_target.sum(), 1),
                    (1.0 - prior) * p / max((~is_target).sum(), 1))
    gw = s_std.T @ coef + l2 * w
    gb = coef.sum()
    return loss, np.concatenate([gw, [gb]])


def fit_fusion(system_scores, params: DcfParams = DcfParams(), l2: float = 0.0,
               max_iter: int = 20000, grad_tol: float = 1e-8,
               start: tuple | None = None) -> FusionModel:
    """Fit fusion/calibration weights on labeled development scores.

    All systems must cover the same trial list. Perfectly separable data
    drives the optimum to infinity; the weight norm is capped at 1e3 with a
    warning in that case. `start` optionally seeds the optimizer with
    (weights, bias) in raw score space; the objective is convex, so the
    fitted optimum does not depend on it.
    """
    mat, is_target, _ = _aligned_matrix(list(system_scores), require_labels=True)
    prior = params.effective_prior
    offset = {"prior": prior, "logit_prior": math.log(prior / (1.0 - prior))}

    # standardize per system for conditioning; fold back into weights below
    mean = mat.mean(axis=0)
    std = mat.std(axis=0)
    std = np.where(std < 1e-12, 1.0, std)
    s_std = (mat - mean) / std

    if start is None:
        theta = np.zeros(mat.shape[1] + 1)
    else:
        w0 = np.atleast_1d(np.asarray(start[0], dtype=np.float64))
        theta = np.concatenate([w0 * std, [float(start[1]) + float(w0 @ mean)]])
    loss, grad = _objective_grad(theta, s_std, is_target, offset, l2)
    capped = False
    converged = False
    for _ in range(max_iter):
        if np.linalg.norm(grad) < grad_tol:
            converged = True
            break
        step = 1.0
        direction = -grad
        # Armijo backtracking
        while True:
            candidate = theta + step * direction
            new_loss, new_grad = _objective_grad(candidate, s_std, is_target, offset, l2)
            if new_loss <= loss - 1e-4 * step * float(grad @ grad) or step < 1e-16:
                break
            step *= 0.5
        theta, loss, grad = candidate, new_loss, new_grad
        if np.linalg.norm(theta) > WEIGHT_NORM_CAP:
            theta = theta * (WEIGHT_NORM_CAP / np.linalg.norm(theta))
            capped = True
            break
    if not capped and not converged and l2 == 0.0:
        # separable data sends the unregularized optimum to infinity; the
        # telltale is running out of iterations with every trial on the right
        # side of the decision boundary
        a = s_std @ theta[:-1] + theta[-1] + offset["logit_prior"]
        if np.all(a[is_target] > 0.0) and np.all(a[~is_target] < 0.0):
            capped = True
    if capped:
        warnings.warn("fusion training data is separable; weight norm capped at 1e3")

    w_std = theta[:-1]
    weights = w_std / std
    bias = float(theta[-1] - (w_std * mean / std).sum())
    return FusionModel(weights=weights, bias=bias, effective_prior=prior)


def apply_fusion(model: FusionModel, system_scores) -> ScoreSet:
    """Per-trial fused llr w . s + b; labels carried over from the inputs."""
    system_scores = list(system_scores)
    if len(system_scores) != model.n_systems:
        raise ValueError(f"model expects {model.n_systems} systems, got {len(system_scores)}")
    mat, _, ref = _aligned_matrix(system_scores, require_labels=False)
    fused = mat @ model.weights + model.bias
    return ScoreSet([
        ScoreEntry(e.enroll_id, e.test_id, float(s), e.label)
        for e, s in zip(ref, fused)
    ])


def save_fusion(model: FusionModel, path) -> None:
    save_checkpoint(path, "fusion", {"weights": model.weights},
                    scalars={"bias": model.bias, "effective_prior": model.effective_prior})


def load_fusion(path) -> FusionModel:
    kind, arrays, scalars = load_checkpoint(path)
    if kind != "fusion":
        raise CheckpointError(f"{path}: expected kind 'fusion', found {kind!r}")
    return FusionModel(weights=arrays["weights"], bias=scalars["bias"],
                       effective_prior=scalars["effective_prior"])

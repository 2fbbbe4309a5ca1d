"""Linear and maximum-entropy mixtures of context models, and the objectives built on them.

Sign convention: the maximum-entropy mixture is

    P_w(x) = exp(sum_i w_i * eta_i(x)) / Z(w),    eta_i(x) = -ln p_i(x)

so ``w_i = -1`` on a single model reproduces that model and useful weights are
usually negative. The compression literature writes ``exp(-sum w_i eta_i)``;
the two agree under ``w -> -w``. Max-entropy weights are unconstrained reals.

Exponential sums are evaluated by factoring out the largest exponent.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.special import logsumexp

from .errors import (
    ContextOutOfRange,
    LengthMismatch,
    LinearWeightConstraintViolated,
    Overflow,
    SpaceMismatch,
    ValidationError,
)
from .models import ContextModelSet, Distribution, entropy, kl_divergence

# largest exponent allowed before summing exp() in the linear domain
EXPONENT_CAP = 700.0
LINEAR_SUM_TOL = 1e-9


@dataclass(frozen=True)
class PenaltyConfig:
    alpha: float

    def __post_init__(self):
        if not (np.isfinite(self.alpha) and self.alpha > 0.0):
            raise ValidationError(f"penalty alpha must be finite and > 0, got {self.alpha}")


def as_weights(models: ContextModelSet, w) -> np.ndarray:
    """Return ``w`` as a float vector with one finite entry per context."""
    arr = np.asarray(w, dtype=float)
    if arr.ndim != 1 or arr.shape[0] != models.context_count:
        raise LengthMismatch(
            f"expected {models.context_count} weights, got shape {arr.shape}"
        )
    if not np.all(np.isfinite(arr)):
        raise ValidationError(f"weights must be finite: {arr}")
    return arr


def _check_target(models: ContextModelSet, target: Distribution) -> None:
    if target.space != models.space:
        raise SpaceMismatch("target and models live on different sample spaces")


def exponents(models: ContextModelSet, w) -> np.ndarray:
    """Per-symbol exponent ``sum_i w_i eta_i(x)``."""
    return as_weights(models, w) @ models.code_lengths


def linear_mix(models: ContextModelSet, w) -> Distribution:
    w = as_weights(models, w)
    if np.any(w <= 0.0) or abs(w.sum() - 1.0) > LINEAR_SUM_TOL:
        raise LinearWeightConstraintViolated(
            f"linear weights must be positive and sum to 1, got {w}"
        )
    probs = w @ np.vstack([m.probs for m in models.models])
    return Distribution(models.space, probs / probs.sum())


def log_partition(models: ContextModelSet, w) -> float:
    return float(logsumexp(exponents(models, w)))


def partition_function(models: ContextModelSet, w) -> float:
    log_z = log_partition(models, w)
    if log_z > EXPONENT_CAP:
        raise Overflow(f"ln Z = {log_z:.6g} exceeds the exponent cap {EXPONENT_CAP}")
    return float(np.exp(log_z))


def max_entropy_mix(models: ContextModelSet, w) -> Distribution:
    a = exponents(models, w)
    log_p = a - logsumexp(a)
    probs = np.exp(log_p)
    return Distribution(models.space, probs / probs.sum())


def lambda_of(models: ContextModelSet, w) -> float:
    """The normalizing offset ``-ln Z(w)``."""
    return -log_partition(models, w)


def _context(models: ContextModelSet, i: int) -> int:
    if not 0 <= i < models.context_count:
        raise ContextOutOfRange(f"context id {i} outside [0, {models.context_count})")
    return i


def mean_code_length(models: ContextModelSet, w, i: int) -> float:
    """Expected code length under model ``i`` when symbols follow the mixture."""
    i = _context(models, i)
    mix = max_entropy_mix(models, w)
    return float(mix.probs @ models.code_lengths[i])


def excess_code_length(models: ContextModelSet, w, i: int) -> float:
    """Mean code length under model ``i`` minus the mixture's own entropy.

    This is the KL divergence from the mixture to model ``i``; it is computed
    here from the two code-length expectations, not through
    :func:`kl_divergence`, so the two can be checked against each other.
    """
    i = _context(models, i)
    mix = max_entropy_mix(models, w)
    return mean_code_length(models, w, i) - entropy(mix)


def cross_entropy_objective(models: ContextModelSet, target: Distribution, w) -> float:
    """``E(w) = -sum_x mu(x) ln P_w(x)``; differs from KL(mu || P_w) by H(mu)."""
    _check_target(models, target)
    a = exponents(models, w)
    return float(-(target.probs @ a) + logsumexp(a))


def cross_entropy_gradient(models: ContextModelSet, target: Distribution, w) -> np.ndarray:
    """Gradient of :func:`cross_entropy_objective`: ``sum_x (P_w(x) - mu(x)) eta_i(x)``."""
    _check_target(models, target)
    mix = max_entropy_mix(models, w)
    return models.code_lengths @ (mix.probs - target.probs)


def divergence_objective(models: ContextModelSet, target: Distribution, w) -> float:
    """``D(w) = KL(mu || P_w)``."""
    _check_target(models, target)
    return kl_divergence(target, max_entropy_mix(models, w))


def mean_code_lengths_under(models: ContextModelSet, target: Distribution) -> np.ndarray:
    """Vector ``sum_x mu(x) eta_i(x)``, one entry per context."""
    _check_target(models, target)
    return models.code_lengths @ target.probs


def unconstrained_objective(models: ContextModelSet, target: Distribution, lam: float, w) -> float:
    """``E'(lam, w) = -lam - sum_i w_i sum_x mu(x) eta_i(x)``; unbounded below in ``lam``."""
    w = as_weights(models, w)
    return float(-lam - w @ mean_code_lengths_under(models, target))


def normalization_sum(models: ContextModelSet, lam: float, w) -> float:
    """``sum_x exp(lam + sum_i w_i eta_i(x))``, which equals 1 iff ``lam = lambda_of(w)``."""
    s = lam + exponents(models, w)
    top = float(np.max(s))
    if top > EXPONENT_CAP:
        raise Overflow(f"exponent {top:.6g} exceeds the cap {EXPONENT_CAP}")
    return float(np.sum(np.exp(s)))


def penalized_objective(
    models: ContextModelSet,
    target: Distribution,
    lam: float,
    w,
    penalty: PenaltyConfig,
) -> float:
    """``E'(lam, w) + alpha * (normalization_sum - 1)**2``."""
    base = unconstrained_objective(models, target, lam, w)
    excess = normalization_sum(models, lam, w) - 1.0
    return base + penalty.alpha * excess * excess

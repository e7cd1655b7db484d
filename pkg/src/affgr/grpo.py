"""Group-relative policy optimization math on sequence log-probabilities.

Operates at the sequence level: token-level log-probability sequences are
reduced by summation before they enter the ratio and KL computations.  This
module evaluates objectives and diagnostics only; it performs no parameter
updates.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import DimensionMismatch


class EmptyGroup(ValueError):
    pass


class MismatchedGroup(ValueError):
    """Rollouts in one objective evaluation must share a group id."""


class PositiveLogProb(ValueError):
    pass


@dataclass(frozen=True)
class RolloutRecord:
    group_id: str
    reward: float
    logprob_current: float
    logprob_old: float
    logprob_ref: float


@dataclass(frozen=True)
class GrpoConfig:
    epsilon: float = 0.2
    beta: float = 0.0
    std_floor: float = 1e-8
    group_size: int = 8

    def __post_init__(self) -> None:
        if not (0 < self.epsilon < 1):
            raise ValueError("epsilon must lie in (0, 1)")
        if self.beta < 0:
            raise ValueError("beta must be non-negative")
        if self.std_floor <= 0:
            raise ValueError("std_floor must be positive")


@dataclass(frozen=True)
class TokenSequenceLikelihood:
    reasoning_logprobs: tuple[float, ...]
    answer_logprobs: tuple[float, ...]


@dataclass(frozen=True)
class RolloutDiagnostics:
    advantage: float
    s1: float
    s2: float
    kl: float
    clipped_term: float


@dataclass(frozen=True, eq=False)
class LowRankAdapter:
    """Frozen base weights plus a rank-r additive update.

    base: (d, k); up: (d, r); down: (k, r).  Applying to a k-vector x gives
    base @ x + up @ (down.T @ x).
    """

    base: np.ndarray
    up: np.ndarray
    down: np.ndarray

    def __post_init__(self) -> None:
        d, k = np.shape(self.base)
        du, r_up = np.shape(self.up)
        kd, r_down = np.shape(self.down)
        if du != d or kd != k or r_up != r_down:
            raise DimensionMismatch(
                f"adapter shapes base{d, k} up{du, r_up} down{kd, r_down} do not conform"
            )

    @property
    def rank(self) -> int:
        return self.up.shape[1]


def group_advantages(rewards: list[float], cfg: GrpoConfig = GrpoConfig()) -> list[float]:
    """Standardize rewards within a group: (R_i - mean) / max(std, floor).

    Uses the population standard deviation.  All-equal groups give all-zero
    advantages rather than an error.  Deviations are centered twice: the
    second pass cancels the rounding residue of the first mean, which the
    std floor would otherwise amplify for (near-)constant groups.
    """
    if len(rewards) == 0:
        raise EmptyGroup("cannot standardize an empty reward group")
    arr = np.asarray(rewards, dtype=float)
    dev = arr - arr.mean()
    dev = dev - dev.mean()
    std = float(np.sqrt((dev * dev).mean()))  # population (divide by G)
    return [float(a) for a in dev / max(std, cfg.std_floor)]


def kl_penalty(logprob_current: float, logprob_ref: float) -> float:
    """Per-rollout KL estimate rho - log(rho) - 1 with rho = pi_ref / pi_theta.

    Always non-negative; exactly 0 when the log-probabilities are equal.
    Raises OverflowError when the log-ratio exceeds the exponent range.
    """
    delta = logprob_ref - logprob_current
    value = math.expm1(delta) - delta  # (rho - 1) - log(rho)
    return value if value > 0.0 else 0.0


def clipped_term(ratio: float, advantage: float, cfg: GrpoConfig = GrpoConfig()) -> float:
    """min(s1 * A, clip(s1, 1 - eps, 1 + eps) * A) for importance ratio s1 > 0."""
    if ratio <= 0:
        raise ValueError("importance ratio must be positive")
    s2 = min(max(ratio, 1.0 - cfg.epsilon), 1.0 + cfg.epsilon)
    return min(ratio * advantage, s2 * advantage)


def grpo_objective(
    group: list[RolloutRecord], cfg: GrpoConfig = GrpoConfig()
) -> tuple[float, list[RolloutDiagnostics]]:
    """Clipped group objective with KL penalty, plus per-rollout diagnostics.

    objective = (1/G) sum_i min(s1_i A_i, s2_i A_i) - beta * (1/G) sum_i kl_i
    where s1_i = exp(logprob_current - logprob_old) and advantages come from
    within-group reward standardization.
    """
    if not group:
        raise EmptyGroup("objective needs at least one rollout")
    gid = group[0].group_id
    if any(r.group_id != gid for r in group):
        raise MismatchedGroup("rollouts span multiple group ids")
    advantages = group_advantages([r.reward for r in group], cfg)
    diags: list[RolloutDiagnostics] = []
    for rec, adv in zip(group, advantages):
        s1 = math.exp(rec.logprob_current - rec.logprob_old)
        s2 = min(max(s1, 1.0 - cfg.epsilon), 1.0 + cfg.epsilon)
        kl = kl_penalty(rec.logprob_current, rec.logprob_ref)
        term = min(s1 * adv, s2 * adv)
        diags.append(RolloutDiagnostics(advantage=adv, s1=s1, s2=s2, kl=kl, clipped_term=term))
    g = len(group)
    objective = sum(d.clipped_term for d in diags) / g - cfg.beta * sum(d.kl for d in diags) / g
    return objective, diags


def sft_nll(likelihood: TokenSequenceLikelihood) -> float:
    """Negative log-likelihood of the reasoning and answer token sequences."""
    for lp in (*likelihood.reasoning_logprobs, *likelihood.answer_logprobs):
        if lp > 0:
            raise PositiveLogProb(f"log-probability {lp} > 0")
    return -(sum(likelihood.reasoning_logprobs) + sum(likelihood.answer_logprobs))


def lowrank_apply(adapter: LowRankAdapter, x: np.ndarray) -> np.ndarray:
    """h = base @ x + up @ (down.T @ x), without materializing the dense update."""
    x = np.asarray(x, dtype=float)
    if x.shape != (adapter.base.shape[1],):
        raise DimensionMismatch(
            f"input shape {x.shape} does not match base width {adapter.base.shape[1]}"
        )
    return adapter.base @ x + adapter.up @ (adapter.down.T @ x)

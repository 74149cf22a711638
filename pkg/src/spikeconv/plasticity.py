"""Weight updates (three STDP rules) and threshold updates.

STDP compares each synapse's pre-spike time against the neuron's fire time:
potentiation when the input fired at or before the output, depression
otherwise (a silent input counts as firing after everything). Thresholds
adapt twice per winning sample: first toward the target firing timestamp,
then the winner/loser homeostasis step that keeps the competition fair.
"""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass

import numpy as np

__all__ = [
    "AdditiveStdp",
    "MultiplicativeStdp",
    "BiologicalStdp",
    "ThresholdParams",
    "stdp_delta",
    "stdp_delta_array",
    "apply_stdp",
    "adapt_threshold_target",
    "adapt_threshold_wta",
]


@dataclass(frozen=True)
class AdditiveStdp:
    """Fixed-step rule: +eta on potentiation, -eta on depression."""

    eta_w: float = 0.1

    def __post_init__(self):
        if self.eta_w <= 0:
            raise ValueError("eta_w must be positive")

    def scaled(self, factor: float) -> "AdditiveStdp":
        return dataclasses.replace(self, eta_w=self.eta_w * factor)


@dataclass(frozen=True)
class MultiplicativeStdp:
    """Saturation-aware rule: step shrinks as the weight nears its bound."""

    eta_w: float = 0.1
    beta: float = 1.0

    def __post_init__(self):
        if self.eta_w <= 0:
            raise ValueError("eta_w must be positive")
        if self.beta <= 0:
            raise ValueError("beta must be positive")

    def scaled(self, factor: float) -> "MultiplicativeStdp":
        return dataclasses.replace(self, eta_w=self.eta_w * factor)


@dataclass(frozen=True)
class BiologicalStdp:
    """Time-sensitive rule with an exponential factor exp(|dt| / tau).

    As published, the step magnitude grows with the pre/post delay (the
    exponent is the negation of the classical leaky form); weight clipping
    keeps it bounded. Set ``decay_with_delay=True`` for the classical
    variant whose steps shrink with the delay. Silent inputs evaluate the
    exponential at ``t_end``, the latest physically possible spike time.
    """

    eta_w: float = 0.1
    tau: float = 0.1
    decay_with_delay: bool = False
    t_end: float = 1.0

    def __post_init__(self):
        if self.eta_w <= 0:
            raise ValueError("eta_w must be positive")
        if self.tau <= 0:
            raise ValueError("tau must be positive")

    def scaled(self, factor: float) -> "BiologicalStdp":
        return dataclasses.replace(self, eta_w=self.eta_w * factor)


@dataclass(frozen=True)
class ThresholdParams:
    """Target-timestamp threshold adaptation parameters."""

    t_target: float = 0.7
    eta_th: float = 1.0
    th_min: float = 1.0

    def __post_init__(self):
        if self.eta_th <= 0:
            raise ValueError("eta_th must be positive")
        if self.th_min <= 0:
            raise ValueError("th_min must be positive")

    def scaled(self, factor: float) -> "ThresholdParams":
        return dataclasses.replace(self, eta_th=self.eta_th * factor)


def stdp_delta(rule, t_pre, t_post: float, w: float,
               w_min: float = 0.0, w_max: float = 1.0) -> float:
    """Raw weight change for one synapse, before clipping.

    ``t_pre`` is None when the input stayed silent this sample, which always
    lands in the depression branch.
    """
    pot = t_pre is not None and t_pre <= t_post
    if isinstance(rule, AdditiveStdp):
        return rule.eta_w if pot else -rule.eta_w
    if isinstance(rule, MultiplicativeStdp):
        span = w_max - w_min
        if pot:
            return rule.eta_w * np.exp(-rule.beta * (w - w_min) / span)
        return -rule.eta_w * np.exp(-rule.beta * (w_max - w) / span)
    if isinstance(rule, BiologicalStdp):
        tp = rule.t_end if t_pre is None else t_pre
        gap = abs(t_post - tp)
        sign_exp = -1.0 if rule.decay_with_delay else 1.0
        mag = rule.eta_w * np.exp(sign_exp * gap / rule.tau)
        return mag if pot else -mag
    raise TypeError(f"unknown STDP rule {rule!r}")


def stdp_delta_array(rule, pre_times: np.ndarray, t_post: float, w: np.ndarray,
                     w_min: float = 0.0, w_max: float = 1.0) -> np.ndarray:
    """Vectorized :func:`stdp_delta`; +inf marks silent inputs."""
    pot = np.isfinite(pre_times) & (pre_times <= t_post)
    if isinstance(rule, AdditiveStdp):
        return np.where(pot, rule.eta_w, -rule.eta_w)
    if isinstance(rule, MultiplicativeStdp):
        span = w_max - w_min
        up = rule.eta_w * np.exp(-rule.beta * (w - w_min) / span)
        down = rule.eta_w * np.exp(-rule.beta * (w_max - w) / span)
        return np.where(pot, up, -down)
    if isinstance(rule, BiologicalStdp):
        tp = np.where(np.isfinite(pre_times), pre_times, rule.t_end)
        gap = np.abs(t_post - tp)
        sign_exp = -1.0 if rule.decay_with_delay else 1.0
        mag = rule.eta_w * np.exp(sign_exp * gap / rule.tau)
        return np.where(pot, mag, -mag)
    raise TypeError(f"unknown STDP rule {rule!r}")


def apply_stdp(weights: np.ndarray, winner: int, pre_times: np.ndarray,
               t_post: float, rule, w_min: float = 0.0, w_max: float = 1.0) -> None:
    """Update the winner's synapses in place and clip into [w_min, w_max].

    ``weights`` is the column's (maps, in_maps, F_h, F_w) tensor; only row
    ``winner`` changes. ``pre_times`` matches one row's shape, +inf = silent.
    """
    w = weights[winner]
    delta = stdp_delta_array(rule, pre_times, t_post, w, w_min, w_max)
    np.clip(w + delta, w_min, w_max, out=w)


def adapt_threshold_target(v_th: float, t_fire: float, params: ThresholdParams) -> float:
    """Move a fired neuron's threshold to correct its timing error."""
    return max(params.th_min, v_th - params.eta_th * (t_fire - params.t_target))


def adapt_threshold_wta(thresholds: np.ndarray, fire_times,
                        eta_th: float, th_min: float,
                        loser_step: float | None = None) -> np.ndarray:
    """Homeostasis step: raise the winner by eta, lower everyone else.

    The winner is the earliest fire time, ties to the lowest index; the
    losers drop by ``loser_step`` (default eta/N). At least one neuron must
    have fired. Note the N-neuron cycle of this update injects a net
    +eta/N of threshold per sample with the default step; callers that need
    the timing rule's fixed point to sit exactly at its target can pass
    ``loser_step=eta/(N-1)``, which makes the cycle sum to zero.
    """
    n = len(thresholds)
    keyed = [(t, i) for i, t in enumerate(fire_times) if t is not None]
    if not keyed:
        raise ValueError("adapt_threshold_wta needs at least one fired neuron")
    winner = min(keyed)[1]
    if loser_step is None:
        loser_step = eta_th / n
    out = np.asarray(thresholds, dtype=np.float64) - loser_step
    out[winner] = thresholds[winner] + eta_th
    return np.maximum(th_min, out)

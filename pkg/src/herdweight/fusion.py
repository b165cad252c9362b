"""Agreement-weighted fusion of per-view latent updates.

Several views each propose an update tensor over L latent locations and
D channels. Per location, the views' proposals are pooled into a
consensus centre; each view's RMS deviation from that centre (channel
count normalised, floored by a stability constant) is turned into an
agreement score exp(-beta * deviation), and a softmax over views yields
fusion weights. Views that sit close to the consensus dominate the fused
update; beta sharpens or flattens that selection.

A surrogate trajectory simulator drives the kernel over a decaying noise
schedule and emits per-step, per-view mean agreement and weight curves
as a CSV trace.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import InvalidSchedule, IoError

CENTER_METHODS = ("mean", "median")


@dataclass(frozen=True)
class ViewUpdateSet:
    """Per-view update tensors, stacked as a (V, L, D) float64 array.

    ``provenance`` optionally names each view's source (camera id, image
    path, ...); images and masks themselves never enter this module.
    """

    updates: np.ndarray
    provenance: tuple[str, ...] | None = None

    def __post_init__(self) -> None:
        u = np.asarray(self.updates, dtype=np.float64)
        if u.ndim != 3 or min(u.shape) < 1:
            raise ValueError(f"expected a (V, L, D) array with positive dims, got shape {u.shape}")
        if not np.isfinite(u).all():
            raise ValueError("updates contain NaN or Inf")
        object.__setattr__(self, "updates", u)
        if self.provenance is not None:
            tags = tuple(str(t) for t in self.provenance)
            if len(tags) != u.shape[0]:
                raise ValueError(f"need one provenance tag per view, got {len(tags)} for {u.shape[0]}")
            object.__setattr__(self, "provenance", tags)

    @classmethod
    def from_views(cls, views, provenance=None) -> "ViewUpdateSet":
        return cls(np.stack([np.asarray(v, dtype=np.float64) for v in views]), provenance=provenance)

    @property
    def n_views(self) -> int:
        return self.updates.shape[0]

    @property
    def n_locations(self) -> int:
        return self.updates.shape[1]

    @property
    def n_channels(self) -> int:
        return self.updates.shape[2]


@dataclass(frozen=True)
class FusionParams:
    """beta: selection sharpness >= 0; epsilon: stability floor > 0.

    ``center`` picks the consensus statistic; the coordinate-wise median
    is an optional robust alternative, off by default.
    """

    beta: float = 1.0
    epsilon: float = 1e-8
    center: str = "mean"

    def __post_init__(self) -> None:
        if not np.isfinite(self.beta) or self.beta < 0:
            raise ValueError(f"beta must be >= 0, got {self.beta}")
        if not np.isfinite(self.epsilon) or self.epsilon <= 0:
            raise ValueError(f"epsilon must be > 0, got {self.epsilon}")
        if self.center not in CENTER_METHODS:
            raise ValueError(f"center must be one of {CENTER_METHODS}, got {self.center!r}")


@dataclass(frozen=True)
class FusionResult:
    """Fused update plus the per-view diagnostics behind it."""

    fused: np.ndarray       # (L, D)
    weights: np.ndarray     # (V, L), rows sum to 1 per location
    agreement: np.ndarray   # (V, L), in (0, 1]
    deviations: np.ndarray  # (V, L)
    consensus: np.ndarray   # (L, D)


def consensus_center(updates: ViewUpdateSet, method: str = "mean") -> np.ndarray:
    """Per-location centre of the view proposals."""
    if method == "mean":
        return updates.updates.mean(axis=0)
    if method == "median":
        return np.median(updates.updates, axis=0)
    raise ValueError(f"center must be one of {CENTER_METHODS}, got {method!r}")


def deviations(updates: ViewUpdateSet, consensus: np.ndarray, epsilon: float) -> np.ndarray:
    """Per-view, per-location RMS distance from the consensus.

    Channel-count normalised (an RMS, not an L2 norm) and floored at
    sqrt(epsilon) so downstream scores stay finite.
    """
    diff = updates.updates - consensus[None, :, :]
    return np.sqrt((diff * diff).mean(axis=2) + epsilon)


def _weighted_sum(weights: np.ndarray, updates: np.ndarray) -> np.ndarray:
    return np.einsum("vl,vld->ld", weights, updates)


def agreement_fuse(updates: ViewUpdateSet, params: FusionParams) -> FusionResult:
    """Fuse view updates with softmax weights over agreement scores.

    The softmax subtracts the per-location max logit before
    exponentiation (shift-invariant, numerically safe); the reported
    agreement scores are the unshifted exp(-beta * deviation).
    """
    center = consensus_center(updates, params.center)
    dev = deviations(updates, center, params.epsilon)
    agreement = np.exp(-params.beta * dev)
    logits = -params.beta * dev
    shifted = np.exp(logits - logits.max(axis=0, keepdims=True))
    weights = shifted / shifted.sum(axis=0, keepdims=True)
    fused = _weighted_sum(weights, updates.updates)
    return FusionResult(fused=fused, weights=weights, agreement=agreement,
                        deviations=dev, consensus=center)


def average_fuse(updates: ViewUpdateSet, params: FusionParams | None = None) -> FusionResult:
    """Uniform-weight fusion baseline.

    The fused tensor is bit-identical to agreement_fuse with beta = 0;
    deviation/agreement diagnostics are computed with the given params
    (defaults if omitted).
    """
    if params is None:
        params = FusionParams()
    center = consensus_center(updates, params.center)
    dev = deviations(updates, center, params.epsilon)
    agreement = np.exp(-params.beta * dev)
    v, ell = dev.shape
    weights = np.full((v, ell), 1.0 / v)
    fused = _weighted_sum(weights, updates.updates)
    return FusionResult(fused=fused, weights=weights, agreement=agreement,
                        deviations=dev, consensus=center)


def geometric_schedule(sigma0: float, decay: float, steps: int) -> np.ndarray:
    """sigma0 * decay**t for t = 0..steps-1."""
    if sigma0 < 0 or not 0 <= decay <= 1:
        raise InvalidSchedule(f"need sigma0 >= 0 and decay in [0, 1], got {sigma0}, {decay}")
    return sigma0 * decay ** np.arange(steps, dtype=np.float64)


def constant_schedule(sigma: float, steps: int) -> np.ndarray:
    if sigma < 0:
        raise InvalidSchedule(f"need sigma >= 0, got {sigma}")
    return np.full(steps, float(sigma))


def _validate_schedule(schedule: np.ndarray, steps: int) -> np.ndarray:
    sched = np.asarray(schedule, dtype=np.float64)
    if sched.shape != (steps,):
        raise InvalidSchedule(f"schedule must have one value per step ({steps}), got shape {sched.shape}")
    if not np.isfinite(sched).all() or (sched < 0).any():
        raise InvalidSchedule("schedule values must be finite and >= 0")
    if (np.diff(sched) > 0).any():
        raise InvalidSchedule("schedule must be non-increasing")
    return sched


@dataclass(frozen=True)
class SimulationConfig:
    """Surrogate trajectory: contraction toward a target plus view noise.

    Each step synthesises per-view updates as contraction * (target -
    state) plus a per-view bias and Gaussian noise of scale schedule[t],
    fuses them, and advances the state by the fused update.
    """

    views: int = 3
    locations: int = 64
    channels: int = 8
    steps: int = 60
    schedule: np.ndarray = field(default=None)  # defaults to geometric below
    params: FusionParams = field(default_factory=FusionParams)
    seed: int = 0
    contraction: float = 0.2
    target: np.ndarray | None = None
    view_bias: np.ndarray | None = None
    target_scale: float = 1.0

    def __post_init__(self) -> None:
        if min(self.views, self.locations, self.channels) < 1 or self.steps < 1:
            raise ValueError("views, locations, channels and steps must be >= 1")
        sched = self.schedule
        if sched is None:
            sched = geometric_schedule(1.0, 0.88, self.steps)
        object.__setattr__(self, "schedule", _validate_schedule(sched, self.steps))
        if not 0 < self.contraction <= 1:
            raise ValueError(f"contraction must be in (0, 1], got {self.contraction}")
        if self.view_bias is not None:
            bias = np.asarray(self.view_bias, dtype=np.float64)
            if bias.shape != (self.views,):
                raise ValueError(f"view_bias must have one entry per view, got shape {bias.shape}")
            object.__setattr__(self, "view_bias", bias)
        if self.target is not None:
            tgt = np.asarray(self.target, dtype=np.float64)
            if tgt.shape != (self.locations, self.channels):
                raise ValueError(f"target must be (L, D) = ({self.locations}, {self.channels})")
            object.__setattr__(self, "target", tgt)


@dataclass(frozen=True)
class TrajectoryTrace:
    """Per-step fusion results and per-view mean curves."""

    config: SimulationConfig
    results: tuple[FusionResult, ...]
    mean_agreement: np.ndarray  # (T, V)
    mean_weight: np.ndarray     # (T, V)
    final_state: np.ndarray     # (L, D)

    def write_csv(self, path: str | Path) -> None:
        """Trace rows (step, view, mean_agreement, mean_weight) with a
        commented header recording every simulation parameter."""
        cfg = self.config
        sched = ",".join(repr(float(s)) for s in cfg.schedule)
        lines = [
            f"# views={cfg.views} locations={cfg.locations} channels={cfg.channels} "
            f"steps={cfg.steps} beta={cfg.params.beta!r} epsilon={cfg.params.epsilon!r} "
            f"seed={cfg.seed} contraction={cfg.contraction!r}",
            f"# schedule={sched}",
            "step,view,mean_agreement,mean_weight",
        ]
        for t in range(cfg.steps):
            for v in range(cfg.views):
                lines.append(f"{t},{v},{float(self.mean_agreement[t, v])!r},"
                             f"{float(self.mean_weight[t, v])!r}")
        try:
            Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")
        except OSError as exc:
            raise IoError(f"cannot write {path}: {exc}") from exc


def simulate_trajectory(config: SimulationConfig) -> TrajectoryTrace:
    """Run the surrogate update process and fuse every step."""
    rng = np.random.default_rng(config.seed)
    target = config.target
    if target is None:
        target = config.target_scale * rng.normal(size=(config.locations, config.channels))
    bias = config.view_bias
    if bias is None:
        bias = np.zeros(config.views)

    state = np.zeros((config.locations, config.channels))
    results = []
    mean_agreement = np.empty((config.steps, config.views))
    mean_weight = np.empty((config.steps, config.views))
    for t in range(config.steps):
        clean = config.contraction * (target - state)
        noise = config.schedule[t] * rng.normal(size=(config.views, config.locations, config.channels))
        updates = ViewUpdateSet(clean[None, :, :] + bias[:, None, None] + noise)
        res = agreement_fuse(updates, config.params)
        state = state + res.fused
        results.append(res)
        mean_agreement[t] = res.agreement.mean(axis=1)
        mean_weight[t] = res.weights.mean(axis=1)
    return TrajectoryTrace(config=config, results=tuple(results),
                           mean_agreement=mean_agreement, mean_weight=mean_weight,
                           final_state=state)

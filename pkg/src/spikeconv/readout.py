"""Decode output spikes into feature vectors, sparsity and visualizations.

The network's output spike times turn back into values through the inverse
of the latency code, referenced to the output layer's firing target: a
spike at t_target decodes to 1, anything at or after t_end (or absent)
decodes to 0. Sum pooling collapses spatial positions, the Hoyer measure
quantifies how concentrated the resulting feature vectors are, and the
filter reconstruction back-projects learned weights to the input plane for
inspection.
"""

from __future__ import annotations

import numpy as np

from .network import Network, POOL
from .simulate import InhibitionPolicy, NO_INHIBITION, forward_times

__all__ = [
    "decode",
    "decode_grid",
    "sum_pool",
    "sparsity",
    "network_features",
    "extract_features",
    "mean_sparsity",
    "reconstruct_filter",
]


def decode(t, t_target: float, t_end: float) -> float:
    """Inverse latency code in [0, 1]; ``t`` may be None / +inf (no spike).

    With t_target == t_end (a clipped target), the limit convention applies:
    any spike decodes to 1, no spike to 0.
    """
    if t_target > t_end:
        raise ValueError(f"t_target must be <= t_end, got {t_target} > {t_end}")
    if t is None or not np.isfinite(t):
        return 0.0
    if t_target == t_end:
        return 1.0
    return min(1.0, max(0.0, 1.0 - (t - t_target) / (t_end - t_target)))


def decode_grid(times: np.ndarray, t_target: float, t_end: float) -> np.ndarray:
    """Vectorized :func:`decode` over a fire-time grid (+inf = no spike)."""
    if t_target > t_end:
        raise ValueError(f"t_target must be <= t_end, got {t_target} > {t_end}")
    finite = np.isfinite(times)
    if t_target == t_end:
        return finite.astype(np.float64)
    vals = np.zeros(times.shape)
    vals[finite] = np.clip(1.0 - (times[finite] - t_target) / (t_end - t_target), 0.0, 1.0)
    return vals


def sum_pool(field: np.ndarray) -> np.ndarray:
    """Collapse a decoded (maps, H, W) field into one value per map."""
    field = np.asarray(field, dtype=np.float64)
    if field.ndim != 3:
        raise ValueError(f"expected a (maps, H, W) field, got shape {field.shape}")
    return field.sum(axis=(1, 2))


def sparsity(y: np.ndarray) -> float:
    """Hoyer sparseness of a non-negative vector, in [0, 1].

    1 for a one-hot vector, 0 for a constant vector; the all-zero vector is
    defined as 0 (a silent network carries no structure).
    """
    y = np.asarray(y, dtype=np.float64).ravel()
    n = y.size
    if n < 2:
        raise ValueError(f"sparsity needs a vector of dimension >= 2, got {n}")
    l2 = np.sqrt(np.sum(y * y))
    if l2 == 0.0:
        return 0.0
    rn = np.sqrt(n)
    return float((rn - np.sum(np.abs(y)) / l2) / (rn - 1.0))


def network_features(
    network: Network,
    grid: np.ndarray,
    t_end: float,
    policy: InhibitionPolicy = NO_INHIBITION,
    t_target: float | None = None,
) -> np.ndarray:
    """Feature vector of one sample: run, decode the last layer, sum-pool."""
    out_times = forward_times(network, grid, policy)[-1]
    if t_target is None:
        t_target = network.output_t_target
        if t_target is None:
            raise ValueError("network has no firing target; pass t_target explicitly")
    return sum_pool(decode_grid(out_times, t_target, t_end))


def extract_features(
    networks,
    grids,
    t_end: float = 1.0,
    policy: InhibitionPolicy = NO_INHIBITION,
    t_targets=None,
) -> np.ndarray:
    """Feature matrix of a dataset: per-network features concatenated.

    ``networks`` is one network or a list (ensemble members, concatenated in
    order); ``grids`` the encoded samples. Per-network decode targets default
    to each network's own output target.
    """
    if isinstance(networks, Network):
        networks = [networks]
    networks = list(networks)
    if t_targets is None:
        t_targets = [None] * len(networks)
    if len(t_targets) != len(networks):
        raise ValueError(
            f"got {len(t_targets)} t_targets for {len(networks)} networks"
        )
    widths = [n.spec.out_shape.depth for n in networks]
    total = int(np.sum(widths))
    feats = np.zeros((len(grids), total))
    for si, grid in enumerate(grids):
        col = 0
        for net, tt, w in zip(networks, t_targets, widths):
            feats[si, col:col + w] = network_features(net, grid, t_end, policy, tt)
            col += w
    return feats


def mean_sparsity(features: np.ndarray) -> float:
    """Dataset mean of the Hoyer measure over feature rows."""
    if features.ndim != 2 or features.shape[0] == 0:
        raise ValueError(f"expected a non-empty (samples, dims) matrix, got {features.shape}")
    return float(np.mean([sparsity(row) for row in features]))


def reconstruct_filter(network: Network, index: int, map_index: int) -> np.ndarray:
    """Back-project one learned filter to the input plane for visualization.

    Returns a (in_channels, h, w) array normalized into [0, 1] covering the
    neuron's receptive field: convolution weights compose linearly through
    lower layers and pooling windows expand by nearest-neighbor placement.
    Purely a rendering aid; never feeds back into training.
    """
    spec = network.spec
    if not 0 <= index < len(spec.layers):
        raise ValueError(f"layer index {index} out of range")
    layer = spec.layers[index]
    if layer.kind == POOL:
        raise ValueError("pooling layers have no filters to reconstruct")
    if not 0 <= map_index < layer.maps:
        raise ValueError(f"map {map_index} out of range for layer {index}")
    network.require_ready()

    canvas = np.zeros((layer.maps, 1, 1))
    canvas[map_index, 0, 0] = 1.0
    for li in range(index, -1, -1):
        canvas = _project_down(canvas, spec.layers[li], network.weights[li])
    peak = canvas.max()
    if peak > 0:
        canvas = canvas / peak
    return canvas


def _project_down(canvas: np.ndarray, layer, weights) -> np.ndarray:
    """One transposed step: layer-output canvas -> layer-input canvas."""
    d_out, h, w = canvas.shape
    s = layer.stride
    fh, fw = layer.filter_h, layer.filter_w
    in_h = (h - 1) * s + fh
    in_w = (w - 1) * s + fw
    if layer.kind == POOL:
        out = np.zeros((d_out, in_h, in_w))
        for y in range(h):
            for x in range(w):
                out[:, y * s:y * s + fh, x * s:x * s + fw] += canvas[:, y, x, None, None]
        return out
    d_in = weights.shape[1]
    out = np.zeros((d_in, in_h, in_w))
    for y in range(h):
        for x in range(w):
            contrib = np.tensordot(canvas[:, y, x], weights, axes=(0, 0))
            out[:, y * s:y * s + fh, x * s:x * s + fw] += contrib
    return out

"""Image-to-spike conversion: on/off DoG filtering plus latency coding.

A grayscale image is convolved with a difference-of-Gaussians kernel to
emulate retinal on-off cells, split into positive (on) and negative (off)
channels, normalized into [0, 1], and each nonzero contrast value is turned
into a single spike whose latency decreases with the value: the strongest
contrasts spike first.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .core import SpikeEvent

__all__ = [
    "DoGParams",
    "CodingWindow",
    "gaussian_kernel",
    "dog_kernel",
    "dog_filter",
    "split_channels",
    "encode_latency",
    "encode_image",
    "encode_image_grid",
]


@dataclass(frozen=True)
class DoGParams:
    """Difference-of-Gaussians filter parameters.

    ``center`` and ``surround`` are the variances of the two Gaussians
    (defaults 1.0 / 4.0, i.e. std 1 and 2); ``size`` is the odd kernel side.
    """

    size: int = 7
    center: float = 1.0
    surround: float = 4.0

    def __post_init__(self):
        if self.size < 1 or self.size % 2 == 0:
            raise ValueError(f"DoG size must be odd and >= 1, got {self.size}")
        if not (0 < self.center < self.surround):
            raise ValueError(
                f"need 0 < center < surround, got {self.center}, {self.surround}"
            )


@dataclass(frozen=True)
class CodingWindow:
    """Time range [t_start, t_end] of one sample presentation."""

    t_start: float = 0.0
    t_end: float = 1.0

    def __post_init__(self):
        if not self.t_start < self.t_end:
            raise ValueError(f"need t_start < t_end, got {self.t_start}, {self.t_end}")

    @property
    def span(self) -> float:
        return self.t_end - self.t_start


def gaussian_kernel(size: int, variance: float) -> np.ndarray:
    """Sum-normalized centered 2-D Gaussian on the integer grid [-s//2, s//2]."""
    if size < 1 or size % 2 == 0:
        raise ValueError(f"kernel size must be odd and >= 1, got {size}")
    if variance <= 0:
        raise ValueError(f"variance must be positive, got {variance}")
    half = size // 2
    u = np.arange(-half, half + 1, dtype=np.float64)
    g1 = np.exp(-(u * u) / (2.0 * variance))
    k = np.outer(g1, g1)
    return k / k.sum()


def dog_kernel(params: DoGParams) -> np.ndarray:
    """Center-minus-surround difference kernel; entries sum to zero."""
    return gaussian_kernel(params.size, params.center) - gaussian_kernel(
        params.size, params.surround
    )


def _conv2d_same(image: np.ndarray, kernel: np.ndarray) -> np.ndarray:
    """2-D convolution with zero padding, output size equals input size."""
    k = kernel.shape[0]
    half = k // 2
    padded = np.pad(image, half, mode="constant")
    windows = np.lib.stride_tricks.sliding_window_view(padded, (k, k))
    # symmetric kernels make convolution and correlation identical; flip anyway
    flipped = kernel[::-1, ::-1]
    return np.einsum("ijkl,kl->ij", windows, flipped, optimize=True)


def dog_filter(image: np.ndarray, params: DoGParams = DoGParams()) -> np.ndarray:
    """Convolve an image with the on-off difference kernel (same-size output)."""
    image = np.asarray(image, dtype=np.float64)
    if image.ndim != 2:
        raise ValueError(f"expected a 2-D grayscale image, got shape {image.shape}")
    if not np.all(np.isfinite(image)):
        raise ValueError("image contains non-finite values")
    return _conv2d_same(image, dog_kernel(params))


def split_channels(dog: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Rectify a DoG response into (on, off) channels."""
    dog = np.asarray(dog, dtype=np.float64)
    return np.maximum(0.0, dog), np.maximum(0.0, -dog)


def encode_latency(value: float, window: CodingWindow = CodingWindow()):
    """Spike time for a value in [0, 1]; None for zero (no spike).

    Larger values spike earlier: t = t_start + (1 - value) * span.
    """
    if not 0.0 <= value <= 1.0:
        raise ValueError(f"value must be in [0, 1], got {value}")
    if value == 0.0:
        return None
    return window.t_start + (1.0 - value) * window.span


def encode_image_grid(
    image: np.ndarray,
    params: DoGParams = DoGParams(),
    window: CodingWindow = CodingWindow(),
) -> np.ndarray:
    """Encode an image into a (2, H, W) fire-time grid (+inf = no spike).

    Channel 0 is on-center, channel 1 off-center. Each image's channels are
    jointly normalized by the maximum absolute DoG response so values land
    in [0, 1] (skipped for an all-zero response).
    """
    dog = dog_filter(image, params)
    peak = np.max(np.abs(dog))
    if peak > 0:
        dog = dog / peak
    on, off = split_channels(dog)
    values = np.stack([on, off])
    times = np.full(values.shape, np.inf)
    active = values > 0
    times[active] = window.t_start + (1.0 - values[active]) * window.span
    return times


def encode_image(
    image: np.ndarray,
    params: DoGParams = DoGParams(),
    window: CodingWindow = CodingWindow(),
) -> list[SpikeEvent]:
    """Encode an image into sorted layer-0 spike events over on/off maps."""
    times = encode_image_grid(image, params, window)
    events = []
    for m, y, x in zip(*np.nonzero(np.isfinite(times))):
        events.append(SpikeEvent(time=float(times[m, y, x]), layer=0, map=int(m), y=int(y), x=int(x)))
    events.sort()
    return events

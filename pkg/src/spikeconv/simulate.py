"""Event-driven forward simulation of IF convolution / pooling / FC stacks.

Semantics: spikes travel instantaneously, so each layer's complete output is
a function of its input spike train. Events are delivered one at a time in
total order (time, map, y, x); after each delivery, threshold crossings
resolve in neuron (map, y, x) order, with inhibition applied between
candidate firings. Every neuron fires at most once per sample and membrane
potentials start at zero for each sample.

The hot paths below vectorize this exactly: per output window, input sites
are sorted by (time, site) — the restriction of the global event order to
the window — and the first index where the running weighted sum reaches the
threshold is the neuron's firing event. Winner-take-all keeps the earliest
crossing per competition scope; soft inhibition iterates fire-by-fire with
carry offsets, flooring potentials at zero.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .core import SpikeEvent, Shape3
from .network import Network, LayerSpec, POOL

__all__ = [
    "InhibitionPolicy",
    "NO_INHIBITION",
    "NeuronState",
    "integrate",
    "reset_sample",
    "pool_forward",
    "PoolState",
    "forward_times",
    "run_sample",
    "times_to_events",
    "events_to_times",
    "column_response",
    "ColumnResult",
]

_BIG = np.iinfo(np.int64).max
# cap on elements of one (maps, positions, window) contribution block
_CHUNK_ELEMS = 4_000_000


@dataclass(frozen=True)
class InhibitionPolicy:
    """Lateral competition applied in trainable layers.

    mode: "none", "soft" (subtract v_inh from competitors, floored at 0) or
    "wta" (first spike in a scope suppresses the rest for the sample).
    scope: "column" (the maps at one position) or "layer".
    layers: "all" applies the policy in every trainable layer, "output"
    only in the network's last layer (the one being read out).
    """

    mode: str = "none"
    v_inh: float = 1.0
    scope: str = "column"
    layers: str = "all"

    def __post_init__(self):
        if self.mode not in ("none", "soft", "wta"):
            raise ValueError(f"unknown inhibition mode {self.mode!r}")
        if self.scope not in ("column", "layer"):
            raise ValueError(f"unknown inhibition scope {self.scope!r}")
        if self.layers not in ("all", "output"):
            raise ValueError(f"unknown inhibition layer selector {self.layers!r}")
        if self.v_inh < 0:
            raise ValueError(f"v_inh must be >= 0, got {self.v_inh}")


NO_INHIBITION = InhibitionPolicy("none")


# ---------------------------------------------------------------------------
# scalar reference semantics (unit contracts; the engine vectorizes these)


@dataclass
class NeuronState:
    """Membrane potential, firing threshold and refractory flag of one IF unit."""

    potential: float = 0.0
    threshold: float = 1.0
    fired: bool = False


def integrate(state: NeuronState, voltage: float, time: float):
    """Accumulate one weighted spike; returns the fire time on crossing.

    A fired neuron is refractory until the end of the sample and ignores
    further input. On crossing, the potential resets to zero.
    """
    if state.fired:
        return None
    state.potential += voltage
    if state.potential >= state.threshold:
        state.potential = 0.0
        state.fired = True
        return time
    return None


def reset_sample(states) -> None:
    """Zero potentials and clear refractory flags; thresholds are untouched."""
    for s in states:
        s.potential = 0.0
        s.fired = False


class PoolState:
    """At-most-once bookkeeping for one pooling layer during a sample."""

    def __init__(self, layer: LayerSpec, in_shape: Shape3):
        self.layer = layer
        self.in_shape = in_shape
        self.out_shape = layer.out_shape(in_shape)
        self._fired: set = set()

    def reset(self) -> None:
        self._fired.clear()


def pool_forward(event: SpikeEvent, state: PoolState) -> list[SpikeEvent]:
    """Fan an input spike into the pooling neurons covering its site.

    Each covering neuron (same map) fires immediately at the event's
    timestamp the first time any spike lands in its receptive field, and
    absorbs everything afterwards.
    """
    lay, shp = state.layer, state.out_shape
    out = []
    for oy, ox in _covering_positions(
        event.y, event.x, lay.filter_h, lay.filter_w, lay.stride, lay.padding,
        shp.height, shp.width,
    ):
        key = (event.map, oy, ox)
        if key not in state._fired:
            state._fired.add(key)
            out.append(SpikeEvent(event.time, event.layer + 1, event.map, oy, ox))
    return out


def _covering_positions(y, x, fh, fw, stride, pad, out_h, out_w):
    ys = y + pad
    xs = x + pad
    oy_lo = max(0, -(-(ys - fh + 1) // stride))  # ceil((ys-fh+1)/stride)
    oy_hi = min(out_h - 1, ys // stride)
    ox_lo = max(0, -(-(xs - fw + 1) // stride))
    ox_hi = min(out_w - 1, xs // stride)
    for oy in range(oy_lo, oy_hi + 1):
        if not (0 <= ys - oy * stride < fh):
            continue
        for ox in range(ox_lo, ox_hi + 1):
            if 0 <= xs - ox * stride < fw:
                yield oy, ox


# ---------------------------------------------------------------------------
# window plans


class _Plan:
    """Precomputed gather indices mapping output windows to padded input sites."""

    def __init__(self, in_shape: Shape3, layer: LayerSpec):
        self.in_shape = in_shape
        self.layer = layer
        self.out_shape = layer.out_shape(in_shape)
        d, h, w = in_shape.astuple()
        p, s = layer.padding, layer.stride
        fh, fw = layer.filter_h, layer.filter_w
        self.pad_h, self.pad_w = h + 2 * p, w + 2 * p
        oh, ow = self.out_shape.height, self.out_shape.width
        self.positions = oh * ow

        ky = np.arange(fh, dtype=np.int64)
        kx = np.arange(fw, dtype=np.int64)
        if layer.kind == POOL:
            site = (ky[:, None] * self.pad_w + kx[None, :]).ravel()
        else:
            m = np.arange(d, dtype=np.int64)
            site = (
                (m[:, None, None] * self.pad_h + ky[None, :, None]) * self.pad_w
                + kx[None, None, :]
            ).ravel()
        oy = np.arange(oh, dtype=np.int64) * s
        ox = np.arange(ow, dtype=np.int64) * s
        origin = (oy[:, None] * self.pad_w + ox[None, :]).ravel()
        # (positions, window) indices; window enumeration order (m, ky, kx)
        # coincides with the global (map, y, x) site order inside one window
        self.win_index = origin[:, None] + site[None, :]
        self.window = self.win_index.shape[1]
        self._reverse = None

    def pad_times(self, times: np.ndarray) -> np.ndarray:
        p = self.layer.padding
        if p == 0:
            return times
        return np.pad(times, ((0, 0), (p, p), (p, p)), constant_values=np.inf)

    def reverse(self):
        """CSR site -> (position, window-slot) map for the slow canonical path."""
        if self._reverse is None:
            pk = np.repeat(np.arange(self.positions, dtype=np.int64), self.window)
            kk = np.tile(np.arange(self.window, dtype=np.int64), self.positions)
            flat = self.win_index.ravel()
            order = np.argsort(flat, kind="stable")
            sites = flat[order]
            starts = np.searchsorted(sites, np.arange(self.pad_flat_size() + 1))
            self._reverse = (starts, pk[order], kk[order])
        return self._reverse

    def pad_flat_size(self) -> int:
        d = 1 if self.layer.kind == POOL else self.in_shape.depth
        return d * self.pad_h * self.pad_w


@lru_cache(maxsize=64)
def _plan_for(in_shape_t: tuple, layer: LayerSpec) -> _Plan:
    return _Plan(Shape3(*in_shape_t), layer)


def _window_times(times_in: np.ndarray, plan: _Plan) -> np.ndarray:
    tp = plan.pad_times(times_in)
    if plan.layer.kind == POOL:
        return tp.reshape(times_in.shape[0], -1)[:, plan.win_index]  # (D, P, K)
    return tp.ravel()[plan.win_index]  # (P, K)


# ---------------------------------------------------------------------------
# layer forwards


def _pool_times(times_in: np.ndarray, plan: _Plan) -> np.ndarray:
    wt = _window_times(times_in, plan)
    out = wt.min(axis=2)
    return out.reshape((times_in.shape[0],) + (plan.out_shape.height, plan.out_shape.width))


def _first_crossings(st: np.ndarray, contrib: np.ndarray, thresholds: np.ndarray,
                     monotone: bool = True):
    """First index where each neuron's running input sum reaches its threshold.

    st: (P, K) window times sorted ascending; contrib: (D, P, K) weighted
    contributions in the same order (zero for silent sites). Returns
    (kk, fire_time, valid): window index, timestamp and reachability of the
    first crossing, all shaped (D, P). ``monotone`` marks non-negative
    contributions, letting reachability be read off the final sum.
    """
    v = np.cumsum(contrib, axis=2)
    crossed = v >= thresholds[:, None, None]
    if monotone:
        valid = crossed[:, :, -1]
    else:
        valid = crossed.any(axis=2)
    kk = np.argmax(crossed, axis=2)
    p_idx = np.arange(st.shape[0])[None, :]
    fire_time = st[p_idx, kk]
    valid = valid & np.isfinite(fire_time)
    return kk, np.where(valid, fire_time, np.inf), valid


def _conv_times(times_in, weights, thresholds, policy: InhibitionPolicy, plan: _Plan):
    d_out = weights.shape[0]
    oh, ow = plan.out_shape.height, plan.out_shape.width
    p_total = plan.positions

    if policy.mode == "soft" and policy.scope == "layer":
        return _forward_layer_slow(times_in, weights, thresholds, policy, plan)

    padded_flat = plan.pad_times(times_in).ravel()
    w2 = weights.reshape(d_out, -1)
    # phantom zero-weight column: silent window slots gather a 0.0 term,
    # keeping partial sums bitwise equal to event-by-event delivery
    w2z = np.concatenate([w2, np.zeros((d_out, 1))], axis=1)
    monotone = weights.min() >= 0.0
    out = np.full((d_out, p_total), np.inf)
    layer_best = None  # layer-scope WTA: global minimum over all chunks

    occ_count = np.isfinite(padded_flat[plan.win_index]).sum(axis=1)
    active = np.nonzero(occ_count > 0)[0]
    if active.size == 0:
        return out.reshape(d_out, oh, ow)

    chunk = max(1, _CHUNK_ELEMS // max(1, d_out * plan.window))
    for lo in range(0, active.size, chunk):
        pos = active[lo:lo + chunk]
        wt = padded_flat[plan.win_index[pos]]
        kmax = int(occ_count[pos].max())
        order = np.argsort(wt, axis=1, kind="stable")[:, :kmax]
        st = np.take_along_axis(wt, order, axis=1)
        gidx = np.where(np.isfinite(st), order, w2.shape[1])
        contrib = w2z[:, gidx]
        kk, ft, valid = _first_crossings(st, contrib, thresholds, monotone)

        if policy.mode == "none" or (policy.mode == "soft" and policy.v_inh == 0.0):
            out[:, pos] = ft
        elif policy.mode == "wta" and policy.scope == "column":
            key = np.where(valid, kk, _BIG)
            win = np.argmin(key, axis=0)  # first minimum -> lowest map
            cols = np.arange(pos.size)
            ok = key[win, cols] < _BIG
            out[win[ok], pos[cols[ok]]] = ft[win[ok], cols[ok]]
        elif policy.mode == "wta" and policy.scope == "layer":
            cand = _best_crossing(plan, pos, order, kk, ft, valid)
            if cand is not None and (layer_best is None or cand[0] < layer_best[0]):
                layer_best = cand
        elif policy.mode == "soft":
            out[:, pos] = _soft_columns(st, contrib, thresholds, policy.v_inh)
        else:  # pragma: no cover
            raise AssertionError(policy)

    if policy.mode == "wta" and policy.scope == "layer" and layer_best is not None:
        _, (d, p, t) = layer_best
        out[d, p] = t
    return out.reshape(d_out, oh, ow)


def _best_crossing(plan, pos, order, kk, ft, valid):
    """Earliest candidate in a chunk under the canonical delivery order.

    Candidates compare by their crossing input event (time, map, y, x), then
    by the crossing neuron's own site (map, y, x).
    """
    d_idx, p_idx = np.nonzero(valid)
    if d_idx.size == 0:
        return None
    slot = np.take_along_axis(order[p_idx], kk[d_idx, p_idx][:, None], axis=1).ravel()
    site_flat = plan.win_index[pos[p_idx], slot]
    pw, ph = plan.pad_w, plan.pad_h
    m = site_flat // (ph * pw)
    rem = site_flat % (ph * pw)
    ey = rem // pw - plan.layer.padding
    ex = rem % pw - plan.layer.padding
    times = ft[d_idx, p_idx]
    oy, ox = np.divmod(pos[p_idx], plan.out_shape.width)
    keys = list(zip(times, m, ey, ex, d_idx, oy, ox))
    best = min(range(len(keys)), key=lambda i: keys[i])
    d, p, t = int(d_idx[best]), int(pos[p_idx[best]]), float(times[best])
    return keys[best], (d, p, t)


def _soft_columns(st, contrib, thresholds, v_inh):
    """Column-scoped soft inhibition: finalize one fire per column per round.

    Each round takes every column's earliest surviving crossing, fires it,
    subtracts v_inh from the column mates' potentials at that instant
    (floored at zero, folded into a carry offset) and recomputes crossings.
    """
    d_out, p_n, _ = contrib.shape
    if p_n == 1:
        # single competition scope: a plain event loop beats the per-fire
        # recompute when many neurons end up firing
        return _soft_sequential(st[0], contrib[:, 0, :], thresholds, v_inh)[:, None]
    v = np.cumsum(contrib, axis=2)
    carry = np.zeros((d_out, p_n))
    fired = np.zeros((d_out, p_n), dtype=bool)
    out = np.full((d_out, p_n), np.inf)
    p_idx = np.arange(p_n)

    while True:
        need = thresholds[:, None] - carry
        crossed = v >= need[:, :, None]
        has = crossed.any(axis=2) & ~fired
        kk = np.argmax(crossed, axis=2)
        ftime = st[p_idx[None, :], kk]
        has &= np.isfinite(ftime)
        if not has.any():
            break
        key = np.where(has, kk, _BIG)
        win = np.argmin(key, axis=0)
        win_kk = key[win, p_idx]
        live = win_kk < _BIG
        if not live.any():
            break
        wp = p_idx[live]
        wd = win[live]
        wk = win_kk[live]
        out[wd, wp] = st[wp, wk]
        fired[wd, wp] = True
        if v_inh > 0.0:
            # potential of every column mate at the winner's firing instant
            v_at = carry[:, wp] + v[:, wp, wk]
            cut = np.minimum(np.maximum(v_at, 0.0), v_inh)
            mates = ~fired[:, wp]
            carry[:, wp] -= np.where(mates, cut, 0.0)
    return out


def _soft_sequential(st, contrib, thresholds, v_inh):
    """Exact per-event delivery for one soft-inhibited competition scope.

    st: (K,) sorted event times; contrib: (D, K) contributions in the same
    order. Crossings resolve in map order after each event, each fire
    knocking the survivors down by v_inh (floored at zero).
    """
    d_out, k_n = contrib.shape
    v = np.zeros(d_out)
    alive = np.ones(d_out, dtype=bool)
    out = np.full(d_out, np.inf)
    for k in range(k_n):
        t = st[k]
        if not np.isfinite(t):
            break
        v[alive] += contrib[alive, k]
        while True:
            ready = np.nonzero(alive & (v >= thresholds))[0]
            if ready.size == 0:
                break
            d = int(ready[0])  # lowest map index first
            out[d] = t
            alive[d] = False
            v[d] = 0.0
            if v_inh > 0.0:
                v[alive] = np.maximum(0.0, v[alive] - v_inh)
        if not alive.any():
            break
    return out


def _forward_layer_slow(times_in, weights, thresholds, policy, plan):
    """Canonical per-event delivery; supports every policy/scope (slow)."""
    d_out = weights.shape[0]
    p_total = plan.positions
    w2 = weights.reshape(d_out, -1)
    starts, rev_p, rev_k = plan.reverse()

    tp = plan.pad_times(times_in)
    flat_t = tp.ravel()
    live = np.isfinite(flat_t)
    sites = np.nonzero(live)[0]
    m = sites // (plan.pad_h * plan.pad_w)
    rem = sites % (plan.pad_h * plan.pad_w)
    order = np.lexsort((rem % plan.pad_w, rem // plan.pad_w, m, flat_t[sites]))
    sites = sites[order]

    v = np.zeros((d_out, p_total))
    fired = np.zeros((d_out, p_total), dtype=bool)
    suppressed = np.zeros(p_total if policy.scope == "column" else 1, dtype=bool)
    out = np.full((d_out, p_total), np.inf)

    for s in sites:
        t = flat_t[s]
        pl = rev_p[starts[s]:starts[s + 1]]
        kl = rev_k[starts[s]:starts[s + 1]]
        if pl.size == 0:
            continue
        v[:, pl] += w2[:, kl]
        cd, cp_i = np.nonzero((v[:, pl] >= thresholds[:, None]) & ~fired[:, pl])
        if cd.size == 0:
            continue
        cp = pl[cp_i]
        for i in np.lexsort((cp % plan.out_shape.width, cp // plan.out_shape.width, cd)):
            d, p = int(cd[i]), int(cp[i])
            if fired[d, p] or v[d, p] < thresholds[d]:
                continue
            scope_id = p if policy.scope == "column" else 0
            if policy.mode == "wta" and suppressed[scope_id]:
                continue
            out[d, p] = t
            fired[d, p] = True
            v[d, p] = 0.0
            if policy.mode == "wta":
                suppressed[scope_id] = True
            elif policy.mode == "soft" and policy.v_inh > 0.0:
                if policy.scope == "column":
                    mates = ~fired[:, p]
                    v[mates, p] = np.maximum(0.0, v[mates, p] - policy.v_inh)
                else:
                    mates = ~fired
                    mates[d, p] = False
                    v[mates] = np.maximum(0.0, v[mates] - policy.v_inh)
    return out.reshape(d_out, plan.out_shape.height, plan.out_shape.width)


# ---------------------------------------------------------------------------
# network-level driving


def forward_times(
    network: Network,
    input_times: np.ndarray,
    policy: InhibitionPolicy = NO_INHIBITION,
) -> list[np.ndarray]:
    """Run one sample through every layer; returns per-layer fire-time grids.

    ``input_times`` is a (depth, H, W) array of spike timestamps with +inf
    marking silent sites. Inhibition applies to trainable layers only;
    pooling is a fixed passthrough.
    """
    network.require_ready()
    spec = network.spec
    if tuple(input_times.shape) != spec.input_shape.astuple():
        raise ValueError(
            f"input grid shape {input_times.shape} does not match "
            f"network input {spec.input_shape.astuple()}"
        )
    grids = []
    times = input_times
    last = len(spec.layers) - 1
    for i, layer in enumerate(spec.layers):
        plan = _plan_for(spec.shapes[i].astuple(), layer)
        if layer.kind == POOL:
            times = _pool_times(times, plan)
        else:
            eff = policy
            if policy.layers == "output" and i != last:
                eff = NO_INHIBITION
            times = _conv_times(times, network.weights[i], network.thresholds[i], eff, plan)
        grids.append(times)
    return grids


def events_to_times(events, shape: Shape3, layer: int = 0) -> np.ndarray:
    """Validate spike events and pack them into a fire-time grid."""
    times = np.full(shape.astuple(), np.inf)
    for e in events:
        if e.layer != layer:
            raise ValueError(f"event targets layer {e.layer}, expected {layer}: {e}")
        if not (0 <= e.map < shape.depth and 0 <= e.y < shape.height and 0 <= e.x < shape.width):
            raise ValueError(
                f"event site (map={e.map}, y={e.y}, x={e.x}) outside field "
                f"{shape.astuple()}: {e}"
            )
        if e.voltage != 1.0:
            raise ValueError(f"input spikes are unit-voltage (synapses modulate): {e}")
        if np.isfinite(times[e.map, e.y, e.x]):
            raise ValueError(f"duplicate spike at site (map={e.map}, y={e.y}, x={e.x})")
        times[e.map, e.y, e.x] = e.time
    return times


def times_to_events(times: np.ndarray, layer: int) -> list[SpikeEvent]:
    events = []
    for m, y, x in zip(*np.nonzero(np.isfinite(times))):
        events.append(SpikeEvent(float(times[m, y, x]), layer, int(m), int(y), int(x)))
    events.sort()
    return events


def run_sample(
    network: Network,
    events,
    policy: InhibitionPolicy = NO_INHIBITION,
) -> list[list[SpikeEvent]]:
    """Simulate one sample; returns the spikes emitted by every layer."""
    times = events_to_times(events, network.spec.input_shape, layer=0)
    grids = forward_times(network, times, policy)
    return [times_to_events(g, i + 1) for i, g in enumerate(grids)]


# ---------------------------------------------------------------------------
# single-column simulation (training)


@dataclass
class ColumnResult:
    winner: int | None
    fire_time: float | None


def column_response(
    patch_times: np.ndarray, weights: np.ndarray, thresholds: np.ndarray
) -> ColumnResult:
    """WTA response of one column to a patch of its receptive field.

    ``patch_times`` is (in_maps, F_h, F_w) with +inf for silent sites;
    ``weights`` is (maps, in_maps, F_h, F_w). The winner is the earliest
    crossing, ties resolved by lowest map index.
    """
    flat = patch_times.ravel()
    occ = int(np.isfinite(flat).sum())
    if occ == 0:
        return ColumnResult(None, None)
    order = np.argsort(flat, kind="stable")[:occ]
    st = flat[order][None, :]
    w2 = weights.reshape(weights.shape[0], -1)
    contrib = w2[:, order][:, None, :]
    monotone = weights.min() >= 0.0
    kk, ft, valid = _first_crossings(
        st, contrib, np.asarray(thresholds, dtype=np.float64), monotone
    )
    key = np.where(valid, kk, _BIG)[:, 0]
    win = int(np.argmin(key))
    if key[win] == _BIG:
        return ColumnResult(None, None)
    return ColumnResult(win, float(ft[win, 0]))

"""Spatial multiplexing over a phase-controlled reflecting surface.

The surface cancels the cascaded channel phases of one transmit-receive
antenna pair; which pair is targeted can itself carry information bits
(index modulation).  The receiver first decides the targeted pair, either
by a joint search over all pairs or by a greedy energy rule followed by a
transmit-side search, then recovers the per-antenna symbols with
pseudo-inverse nulling and successive cancellation.  A complex
multiplication cost model covers all three receiver stages.

Detection functions operate on a leading batch axis when present; scalar
(single-frame) inputs give scalar outputs.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .channel import ChannelRealization, Dims, draw_channel
from .modem import Constellation, bits_to_ints, ints_to_bits, min_distance, modulate, slice_index
from .numerics import PinvStats, pseudo_inverse, sample_cn

TWO_PI = 2.0 * math.pi


def _is_pow2(n: int) -> bool:
    return n >= 1 and n & (n - 1) == 0


@dataclass(frozen=True)
class ImMode:
    """Index-modulation operating mode.

    ``full``: the pair (transmit, receive) antenna is data, log2(Nt*Nr)
    bits.  ``partial``: only the transmit side is data and the receive
    index mirrors it, log2(Nt) bits.  ``enhancing``: no index bits, the
    surface always boosts ``fixed_pair`` (1-based).
    """

    kind: str
    fixed_pair: tuple[int, int] = (1, 1)

    def __post_init__(self):
        if self.kind not in ("full", "partial", "enhancing"):
            raise ValueError(f"unknown index-modulation mode {self.kind!r}")


@dataclass(frozen=True)
class ImSelection:
    """A decoded antenna-pair choice (indices are 1-based)."""

    l_star: int
    m_star: int
    im_bits: np.ndarray


def im_bits_count(mode: ImMode, dims: Dims) -> int:
    """Number of index bits per channel use for ``mode``."""
    if mode.kind == "full":
        pairs = dims.n_tx * dims.n_rx
        if not _is_pow2(pairs):
            raise ValueError("full index mode needs n_tx * n_rx to be a power of two")
        return pairs.bit_length() - 1
    if mode.kind == "partial":
        if not _is_pow2(dims.n_tx):
            raise ValueError("partial index mode needs n_tx to be a power of two")
        return dims.n_tx.bit_length() - 1
    l, m = mode.fixed_pair
    if not (1 <= l <= dims.n_tx and 1 <= m <= dims.n_rx):
        raise ValueError(f"fixed pair {mode.fixed_pair} out of range for {dims}")
    return 0


def pairs_from_values(values: np.ndarray, mode: ImMode, dims: Dims):
    """Map natural-binary index values to 0-based (tx, rx) index arrays."""
    values = np.asarray(values)
    if mode.kind == "full":
        return values // dims.n_rx, values % dims.n_rx
    if mode.kind == "partial":
        return values, values
    l, m = mode.fixed_pair
    return np.full_like(values, l - 1), np.full_like(values, m - 1)


def values_from_pairs(l_idx: np.ndarray, m_idx: np.ndarray, mode: ImMode, dims: Dims):
    """Inverse of ``pairs_from_values`` (receiver-side bit recovery)."""
    if mode.kind == "full":
        return l_idx * dims.n_rx + m_idx
    if mode.kind == "partial":
        return np.asarray(l_idx)
    return np.zeros_like(np.asarray(l_idx))


def select_pair(im_bits, mode: ImMode, dims: Dims) -> ImSelection:
    """Decode one frame's index bits into the targeted antenna pair."""
    im_bits = np.asarray(im_bits, dtype=np.uint8)
    want = im_bits_count(mode, dims)
    if im_bits.shape != (want,):
        raise ValueError(f"expected {want} index bits, got shape {im_bits.shape}")
    value = int(bits_to_ints(im_bits)) if want else 0
    l_idx, m_idx = pairs_from_values(np.asarray(value), mode, dims)
    return ImSelection(l_star=int(l_idx) + 1, m_star=int(m_idx) + 1, im_bits=im_bits)


@dataclass(frozen=True)
class RisPhaseConfig:
    """Per-element surface phases, possibly snapped to a uniform grid."""

    n_elements: int
    quant_bits: int | None
    phases: np.ndarray


def quantize_phases(phi: np.ndarray, quant_bits: int) -> np.ndarray:
    """Snap phases to the 2^b-point uniform grid over [0, 2pi).

    Nearest grid point wins; exact midpoints round to the lower point, so
    the per-element error lies in (-pi/2^b, +pi/2^b].
    """
    if quant_bits < 1:
        raise ValueError("quant_bits must be >= 1")
    levels = 1 << quant_bits
    step = TWO_PI / levels
    idx = np.mod(np.ceil(phi / step - 0.5), levels)
    return idx * step


def cascade_phases(col_h: np.ndarray, col_g: np.ndarray, quant_bits: int | None) -> np.ndarray:
    """Surface phases that co-phase one cascaded channel column.

    Element i gets minus the summed phases of the two hop coefficients,
    so h_i * e^{j phi_i} * g_i becomes the nonnegative real |h_i||g_i|.
    """
    phi = np.mod(-np.angle(col_h * col_g), TWO_PI)
    if quant_bits is not None:
        phi = quantize_phases(phi, quant_bits)
    return phi


def cophase_factor(col_h: np.ndarray, col_g: np.ndarray, quant_bits: int | None) -> np.ndarray:
    """Unit-modulus surface coefficients e^{j phi} co-phasing one column.

    With continuous phases the factor is computed as conj(h g)/|h g|,
    which cancels the cascaded phase without a trip through angles; with
    quantization the snapped phase grid requires the explicit angle.
    """
    if quant_bits is None:
        p = np.conj(col_h * col_g)
        mag = np.abs(p)
        # A doubly-faded zero coefficient has no phase to cancel.
        return np.where(mag > 0, p, 1.0) / np.where(mag > 0, mag, 1.0)
    return np.exp(1j * cascade_phases(col_h, col_g, quant_bits))


def ris_phases_for_pair(
    h1: np.ndarray, g1: np.ndarray, sel: ImSelection, quant_bits: int | None = None
) -> RisPhaseConfig:
    """Phase configuration targeting the pair in ``sel`` (single frame)."""
    phi = cascade_phases(h1[:, sel.l_star - 1], g1[:, sel.m_star - 1], quant_bits)
    return RisPhaseConfig(n_elements=h1.shape[0], quant_bits=quant_bits, phases=phi)


# --- receiver cost model ---------------------------------------------------


@dataclass
class CmCounter:
    """Complex-multiplication tally, split by receiver step category.

    Charges follow the per-step cost model: greedy receive-energy scan
    Nr; equivalent-channel construction Nr*N + Nr*N*Nt; pseudo-inverse
    2*Nr^2*Nt + Nr^3; row-norm ordering Nt*Nr; nulling Nr; cancellation
    Nr; slicer/distance metric 2^M (the printed cost, charged literally
    even though the slicer scans M points).
    """

    dims: Dims
    order: int
    greedy: int = 0
    construct: int = 0
    pinv: int = 0
    ordering: int = 0
    nulling: int = 0
    cancel: int = 0
    metric: int = 0

    @property
    def total(self) -> int:
        return (
            self.greedy + self.construct + self.pinv + self.ordering
            + self.nulling + self.cancel + self.metric
        )

    def charge_greedy(self):
        self.greedy += self.dims.n_rx

    def charge_construct(self):
        d = self.dims
        self.construct += d.n_rx * d.n_ris + d.n_rx * d.n_ris * d.n_tx

    def charge_pinv(self):
        d = self.dims
        self.pinv += 2 * d.n_rx**2 * d.n_tx + d.n_rx**3

    def charge_ordering(self):
        self.ordering += self.dims.n_tx * self.dims.n_rx

    def charge_nulling(self):
        self.nulling += self.dims.n_rx

    def charge_cancel(self):
        self.cancel += self.dims.n_rx

    def charge_metric(self):
        self.metric += 1 << self.order


def count_complexity(dims: Dims, order: int, stage: str) -> int:
    """Closed-form complex-multiplication count of one receiver stage.

    ``stage`` is one of ``index_joint`` (exhaustive pair search),
    ``index_greedy`` (energy rule plus transmit-side search), or ``sic``
    (successive nulling and cancellation over all streams).
    """
    nt, nr, n = dims.n_tx, dims.n_rx, dims.n_ris
    e = 1 << order
    construct = nr * n + nr * n * nt
    pinv = 2 * nr**2 * nt + nr**3
    per_hypothesis = construct + pinv + nt * nr + nr + e
    if stage == "index_joint":
        return nt * nr * per_hypothesis
    if stage == "index_greedy":
        return nr + nt * per_hypothesis
    if stage == "sic":
        return pinv + nt * nr + (nt - 1) * (nr + e + nr + pinv + nt * nr) + nr + e
    raise ValueError(f"unknown stage {stage!r}")


def count_complexity_equal_antennas(n_rx: int, n_ris: int, order: int, stage: str) -> int:
    """Hand-simplified counts for the square case Nt = Nr.

    Kept as an independent rewrite for cross-checking against
    :func:`count_complexity`; the ``sic`` form does not algebraically
    match its general counterpart (it is larger by one deflation
    bracket), and tests document that discrepancy rather than hide it.
    """
    r, n, e = n_rx, n_ris, 1 << order
    if stage == "index_joint":
        return n * (r**3 + r**4) + 3 * r**5 + r**4 + r**3 + r**2 * e
    if stage == "index_greedy":
        return r + n * (r**2 + r**3) + 3 * r**4 + r**3 + r**2 + r * e
    if stage == "sic":
        return 4 * r**3 + 3 * r**2 + r * e + 3 * r**4 + r + e
    raise ValueError(f"unknown stage {stage!r}")


# --- detection -------------------------------------------------------------


def _construct_v(g1, h1, h2, theta, pl1, pl2, counter: CmCounter | None = None):
    """Equivalent channel sqrt(pl1) G1^T diag(theta) H1 + sqrt(pl2) H2.

    ``theta`` holds the unit surface coefficients e^{j phi}.  The transpose
    on the surface-to-destination matrix is plain (not conjugated): the
    second hop multiplies the reflected wave by the raw coefficients.
    """
    gt = g1 * theta[..., None]
    cascade = np.matmul(gt.swapaxes(-1, -2), h1)
    if counter is not None:
        counter.charge_construct()
    return math.sqrt(pl1) * cascade + math.sqrt(pl2) * h2


def equivalent_channel(
    realization: ChannelRealization, phases: RisPhaseConfig, counter: CmCounter | None = None
) -> np.ndarray:
    """Receive-side channel matrix seen through surface and direct paths."""
    theta = np.exp(1j * phases.phases)
    return _construct_v(
        realization.g1, realization.h1, realization.h2,
        theta, realization.pl1, realization.pl2, counter,
    )


@dataclass
class SicResult:
    """Output of successive nulling/cancellation detection.

    ``point_idx``/``bits``/``symbols`` are in antenna order; ``order``
    lists the stream indices in the sequence they were detected.
    """

    point_idx: np.ndarray
    bits: np.ndarray
    symbols: np.ndarray
    order: np.ndarray


def zf_nulling_cancelling(
    v: np.ndarray,
    r: np.ndarray,
    c: Constellation,
    scale: float = 1.0,
    counter: CmCounter | None = None,
    pinv_stats: PinvStats | None = None,
) -> SicResult:
    """Detect all streams by ordered nulling and cancellation.

    Repeats: pick the stream whose pseudo-inverse row has minimum squared
    norm (the best-conditioned decision), null with that row, slice,
    subtract the detected contribution, zero the detected column, and
    re-invert.  ``scale`` is the per-stream symbol magnitude; decisions
    are made on the unit constellation.  Deflated matrices are rank
    deficient by construction and take the SVD pseudo-inverse path.
    """
    v = np.asarray(v)
    r = np.asarray(r)
    single = v.ndim == 2
    if single:
        v = v[None]
        r = r[None]
    b, n_rx, n_tx = v.shape
    rows = np.arange(b)

    v_work = v.copy()
    r_work = r.astype(complex, copy=True)
    detected = np.zeros((b, n_tx), dtype=bool)
    point_idx = np.empty((b, n_tx), dtype=np.intp)
    det_order = np.empty((b, n_tx), dtype=np.intp)

    w = pseudo_inverse(v_work, stats=pinv_stats)
    if counter is not None:
        counter.charge_pinv()
    for stage in range(n_tx):
        norms = np.abs(w) ** 2
        norms = norms.sum(axis=-1)
        norms[detected] = np.inf
        k = np.argmin(norms, axis=-1)
        if counter is not None:
            counter.charge_ordering()
        det_order[:, stage] = k
        detected[rows, k] = True
        y = np.einsum("bj,bj->b", w[rows, k], r_work)
        if counter is not None:
            counter.charge_nulling()
        idx = slice_index(y / scale, c)
        if counter is not None:
            counter.charge_metric()
        point_idx[rows, k] = idx
        if stage < n_tx - 1:
            r_work -= (scale * c.points[idx])[:, None] * v_work[rows, :, k]
            if counter is not None:
                counter.charge_cancel()
            v_work[rows, :, k] = 0.0
            w = pseudo_inverse(v_work, stats=pinv_stats)
            if counter is not None:
                counter.charge_pinv()

    bits = c.label_bits[point_idx].reshape(b, -1)
    symbols = c.points[point_idx]
    if single:
        return SicResult(point_idx[0], bits[0], symbols[0], det_order[0])
    return SicResult(point_idx, bits, symbols, det_order)


def _score_hypothesis(w, r, scale, c, counter):
    """Strongest-stream slicer distance for one pair hypothesis."""
    norms = (np.abs(w) ** 2).sum(axis=-1)
    k = np.argmin(norms, axis=-1)
    if counter is not None:
        counter.charge_ordering()
    rows = np.arange(w.shape[0])
    y = np.einsum("bj,bj->b", w[rows, k], r)
    if counter is not None:
        counter.charge_nulling()
    d = scale**2 * min_distance(y / scale, c)
    if counter is not None:
        counter.charge_metric()
    return d


def detect_indices_optimal(
    realization: ChannelRealization,
    r: np.ndarray,
    mode: ImMode,
    c: Constellation,
    quant_bits: int | None = None,
    scale: float = 1.0,
    counter: CmCounter | None = None,
    pinv_stats: PinvStats | None = None,
):
    """Joint search for the surface-targeted antenna pair.

    Rebuilds the equivalent channel under every candidate pair (with the
    same phase quantization the surface applies), nulls the strongest
    stream, and keeps the pair whose sliced statistic lands closest to a
    constellation point.  Ties resolve to the earliest candidate in
    transmit-major order.  Returns 0-based (l_idx, m_idx) and the winning
    channel estimate.
    """
    r = np.asarray(r)
    single = r.ndim == 1
    h1, g1, h2 = realization.h1, realization.g1, realization.h2
    if single:
        h1, g1, h2, r = h1[None], g1[None], h2[None], r[None]
    b = r.shape[0]
    n_tx, n_rx = h1.shape[-1], g1.shape[-1]

    if mode.kind == "full":
        pairs = [(l, m) for l in range(n_tx) for m in range(n_rx)]
    elif mode.kind == "partial":
        pairs = [(p, p) for p in range(n_tx)]
    else:
        pairs = [(mode.fixed_pair[0] - 1, mode.fixed_pair[1] - 1)]

    d = np.empty((b, len(pairs)))
    v_all = np.empty((b, len(pairs), n_rx, n_tx), dtype=complex)
    for hyp, (l, m) in enumerate(pairs):
        theta = cophase_factor(h1[..., l], g1[..., m], quant_bits)
        v_hat = _construct_v(g1, h1, h2, theta, realization.pl1, realization.pl2, counter)
        w = pseudo_inverse(v_hat, stats=pinv_stats)
        if counter is not None:
            counter.charge_pinv()
        d[:, hyp] = _score_hypothesis(w, r, scale, c, counter)
        v_all[:, hyp] = v_hat

    best = np.argmin(d, axis=-1)
    pair_arr = np.asarray(pairs)
    l_idx, m_idx = pair_arr[best, 0], pair_arr[best, 1]
    v_best = v_all[np.arange(b), best]
    if single:
        return int(l_idx[0]), int(m_idx[0]), v_best[0]
    return l_idx, m_idx, v_best


def detect_indices_suboptimal(
    realization: ChannelRealization,
    r: np.ndarray,
    mode: ImMode,
    c: Constellation,
    quant_bits: int | None = None,
    scale: float = 1.0,
    counter: CmCounter | None = None,
    pinv_stats: PinvStats | None = None,
):
    """Greedy pair search: strongest receive antenna first.

    The receive index comes from the maximum instantaneous energy
    |r_m|^2; only the transmit index is then searched with the same
    strongest-stream metric.  In partial mode the pair is determined by
    the greedy step alone (receive index mirrors transmit); in enhancing
    mode there is nothing to detect.
    """
    r = np.asarray(r)
    single = r.ndim == 1
    h1, g1, h2 = realization.h1, realization.g1, realization.h2
    if single:
        h1, g1, h2, r = h1[None], g1[None], h2[None], r[None]
    b = r.shape[0]
    n_tx = h1.shape[-1]
    rows = np.arange(b)

    if mode.kind == "enhancing":
        l_idx = np.full(b, mode.fixed_pair[0] - 1)
        m_idx = np.full(b, mode.fixed_pair[1] - 1)
        theta = cophase_factor(h1[rows, :, l_idx], g1[rows, :, m_idx], quant_bits)
        v_best = _construct_v(g1, h1, h2, theta, realization.pl1, realization.pl2, counter)
    else:
        m_idx = np.argmax(np.abs(r) ** 2, axis=-1)
        if counter is not None:
            counter.charge_greedy()
        col_g = g1[rows, :, m_idx]
        if mode.kind == "partial":
            # Receive index mirrors transmit index, so the greedy step
            # already fixes the pair.
            l_idx = m_idx
            theta = cophase_factor(h1[rows, :, l_idx], col_g, quant_bits)
            v_best = _construct_v(g1, h1, h2, theta, realization.pl1, realization.pl2, counter)
        else:
            d = np.empty((b, n_tx))
            v_all = np.empty((b, n_tx) + h2.shape[-2:], dtype=complex)
            for l in range(n_tx):
                theta = cophase_factor(h1[..., l], col_g, quant_bits)
                v_hat = _construct_v(g1, h1, h2, theta, realization.pl1, realization.pl2, counter)
                w = pseudo_inverse(v_hat, stats=pinv_stats)
                if counter is not None:
                    counter.charge_pinv()
                d[:, l] = _score_hypothesis(w, r, scale, c, counter)
                v_all[:, l] = v_hat
            l_idx = np.argmin(d, axis=-1)
            v_best = v_all[rows, l_idx]

    if single:
        return int(l_idx[0]), int(m_idx[0]), v_best[0]
    return l_idx, m_idx, v_best


# --- batched frame kernels -------------------------------------------------


def classical_vblast_frames(rng, dims: Dims, c, pl, es, n0, n_frames, power_split=True):
    """Independent streams over the direct Rayleigh channel, SIC receiver.

    Returns (bit_errors, symbol_errors, bits_sent, symbols_sent,
    index_bit_errors, index_bits_sent); the last two are always zero
    here.
    """
    nt, nr = dims.n_tx, dims.n_rx
    bps = c.bits_per_symbol
    bits = rng.integers(0, 2, size=(n_frames, nt * bps), dtype=np.uint8)
    x = modulate(bits.ravel(), c).reshape(n_frames, nt)
    h2 = sample_cn(rng, 1.0, (n_frames, nr, nt))
    v = math.sqrt(pl) * h2
    scale = math.sqrt(es / nt) if power_split else math.sqrt(es)
    r = np.matmul(v, x[..., None])[..., 0] * scale
    if n0 > 0:
        r = r + sample_cn(rng, n0, r.shape)
    res = zf_nulling_cancelling(v, r, c, scale)
    bit_err = int((res.bits != bits).sum())
    sym_err = int(
        (res.bits.reshape(n_frames, nt, bps) != bits.reshape(n_frames, nt, bps))
        .any(axis=-1)
        .sum()
    )
    return bit_err, sym_err, bits.size, n_frames * nt, 0, 0


def ris_im_vblast_frames(
    rng,
    dims: Dims,
    c,
    mode: ImMode,
    quant_bits,
    detector,
    spec_h1,
    spec_g1,
    geom,
    es,
    n0,
    n_frames,
    power_split=True,
):
    """Surface-assisted index-modulation frames, end to end.

    ``detector`` is ``"optimal"`` or ``"suboptimal"``.  Index bits pick
    the boosted pair, the surface cancels that pair's cascaded phases
    (optionally quantized), and the receiver runs pair detection followed
    by successive cancellation on the winning channel estimate.
    """
    nt, nr = dims.n_tx, dims.n_rx
    bps = c.bits_per_symbol
    n_im = im_bits_count(mode, dims)
    rows = np.arange(n_frames)

    payload = rng.integers(0, 2, size=(n_frames, nt * bps), dtype=np.uint8)
    if n_im:
        im_bits = rng.integers(0, 2, size=(n_frames, n_im), dtype=np.uint8)
        values = bits_to_ints(im_bits)
    else:
        im_bits = np.zeros((n_frames, 0), dtype=np.uint8)
        values = np.zeros(n_frames, dtype=np.intp)
    l_idx, m_idx = pairs_from_values(values, mode, dims)

    x = modulate(payload.ravel(), c).reshape(n_frames, nt)
    real = draw_channel(rng, dims, spec_h1, spec_g1, geom, batch=n_frames)
    theta = cophase_factor(real.h1[rows, :, l_idx], real.g1[rows, :, m_idx], quant_bits)
    v_true = _construct_v(real.g1, real.h1, real.h2, theta, real.pl1, real.pl2)
    scale = math.sqrt(es / nt) if power_split else math.sqrt(es)
    r = np.matmul(v_true, x[..., None])[..., 0] * scale
    if n0 > 0:
        r = r + sample_cn(rng, n0, r.shape)

    if mode.kind == "enhancing":
        # Pair is fixed and known; the receiver rebuilds the same channel.
        l_hat, m_hat, v_hat = l_idx, m_idx, v_true
    elif detector == "optimal":
        l_hat, m_hat, v_hat = detect_indices_optimal(real, r, mode, c, quant_bits, scale)
    elif detector == "suboptimal":
        l_hat, m_hat, v_hat = detect_indices_suboptimal(real, r, mode, c, quant_bits, scale)
    else:
        raise ValueError(f"unknown detector {detector!r}")

    res = zf_nulling_cancelling(v_hat, r, c, scale)
    bit_err = int((res.bits != payload).sum())
    sym_err = int(
        (res.bits.reshape(n_frames, nt, bps) != payload.reshape(n_frames, nt, bps))
        .any(axis=-1)
        .sum()
    )
    if n_im:
        hat_values = values_from_pairs(l_hat, m_hat, mode, dims)
        im_err = int((ints_to_bits(hat_values, n_im) != im_bits).sum())
    else:
        im_err = 0
    return (
        bit_err + im_err,
        sym_err,
        payload.size + im_bits.size,
        n_frames * nt,
        im_err,
        im_bits.size,
    )

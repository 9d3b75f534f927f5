"""Two-slot orthogonal transmit diversity through a phase-controlled
reflecting surface, its classical two-antenna counterpart, a blind
single-slot reflecting baseline, and the closed-form average symbol
error probability of the surface-assisted scheme.

The surface is split into two halves.  Slot 1 programs the halves with
the two symbol phases; slot 2 programs them with the conjugate pattern,
so the two slots realize the standard orthogonal code
``[[s0, s1], [-s1*, s0*]]`` over the effective half-sums of the
surface-to-destination channel.  All transmit/combine helpers broadcast
over a leading batch axis.
"""

from __future__ import annotations

import math

import numpy as np

from .modem import Constellation, modulate, slice_symbol
from .numerics import integrate, sample_cn


def half_sums(h: np.ndarray):
    """Effective per-half channel gains: sums over the two element halves."""
    h = np.asarray(h)
    n = h.shape[-1]
    if n % 2:
        raise ValueError(f"element count must be even, got {n}")
    return h[..., : n // 2].sum(axis=-1), h[..., n // 2 :].sum(axis=-1)


def _maybe_noise(rng: np.random.Generator, n0: float, shape) -> np.ndarray | float:
    # n0 = 0 is the infinite-SNR proxy used by zero-noise tests.
    if n0 == 0:
        return 0.0
    return sample_cn(rng, n0, shape)


def ris_alamouti_transmit(s0, s1, h, pl, rng: np.random.Generator, n0: float):
    """Received samples of the two slots.

    ``s0``/``s1`` are the (energy-scaled) symbols, ``h`` the per-element
    surface-to-destination channel with the source-to-surface hop taken
    as a unit-gain line-of-sight link, ``pl`` the linear path gain.
    Noise is drawn independently per slot with variance ``n0``.
    """
    a0, a1 = half_sums(h)
    s0, s1 = np.asarray(s0), np.asarray(s1)
    root_pl = math.sqrt(pl)
    shape = np.broadcast(s0, a0).shape
    r0 = root_pl * (s0 * a0 + s1 * a1) + _maybe_noise(rng, n0, shape)
    r1 = root_pl * (-np.conj(s1) * a0 + np.conj(s0) * a1) + _maybe_noise(rng, n0, shape)
    return r0, r1


def combine(r0, r1, a0, a1):
    """Orthogonal-code combiner.

    With receiver-side knowledge of the effective gains ``a0``/``a1``
    (path gain included), returns statistics proportional to the two
    symbols with zero cross-talk: s0_tilde = (|a0|^2 + |a1|^2) s0 + noise.
    """
    s0_tilde = r0 * np.conj(a0) + np.conj(r1) * a1
    s1_tilde = r0 * np.conj(a1) - np.conj(r1) * a0
    return s0_tilde, s1_tilde


def ml_detect_psk(s_tilde, c: Constellation):
    """Nearest-point decision on a combined statistic, PSK only.

    The combiner leaves a positive real scaling on the symbol; for PSK
    the nearest-point rule is invariant to that scaling, so the statistic
    is sliced as-is.  Returns the decided bits.
    """
    if c.kind != "psk":
        raise ValueError("combined-statistic detection is only valid for PSK")
    _, bits = slice_symbol(s_tilde, c)
    return bits


def ris_ap_blind_transmit(s, h, pl, rng: np.random.Generator, n0: float):
    """Blind reflecting baseline: one slot, no channel-phase correction.

    All elements carry the data symbol ``s`` (the surface is the
    modulator), so the received sample is sqrt(pl) * s * sum(h) + noise.
    Detection multiplies by the conjugate of the known channel sum and
    slices; with no phase alignment the effective channel is a single
    Rayleigh sum, hence diversity order one.
    """
    h = np.asarray(h)
    a = h.sum(axis=-1)
    s = np.asarray(s)
    shape = np.broadcast(s, a).shape
    return math.sqrt(pl) * s * a + _maybe_noise(rng, n0, shape)


def sep_theory(order: int, n_elements: int, pl: float, es_over_n0: float) -> float:
    """Average symbol error probability of the surface-assisted scheme.

    Single-integral form over eta in (0, (M-1)pi/M] of the squared
    two-branch MGF term (1 + sin^2(pi/M)/sin^2(eta) * g)^-2 where
    g = pl * N * Es / (2 N0).  The two-branch square reflects the
    order-two diversity of the orthogonal code; the factor N/2 is the
    mean power of each half-sum of N unit-power element channels.
    """
    if order < 2:
        raise ValueError("constellation order must be at least 2")
    if n_elements < 2 or n_elements % 2:
        raise ValueError("element count must be an even integer >= 2")
    g = pl * n_elements * es_over_n0 / 2.0
    sin2 = math.sin(math.pi / order) ** 2

    def integrand(eta):
        return (1.0 + sin2 * g / np.sin(eta) ** 2) ** -2

    return integrate(integrand, 0.0, (order - 1) * math.pi / order, n_points=64) / math.pi


# --- batched frame kernels -------------------------------------------------
#
# Each kernel runs ``n_frames`` independent frames from one rng stream and
# returns (bit_errors, symbol_errors, bits_sent, symbols_sent).  The rng
# consumption order (bits, channel, noise) is fixed; identical streams give
# identical tallies.


def ris_alamouti_frames(rng, n_elements, c, pl, es, n0, n_frames):
    bps = c.bits_per_symbol
    bits = rng.integers(0, 2, size=(n_frames, 2 * bps), dtype=np.uint8)
    x = modulate(bits.ravel(), c).reshape(n_frames, 2)
    root_es = math.sqrt(es)
    h = sample_cn(rng, 1.0, (n_frames, n_elements))
    r0, r1 = ris_alamouti_transmit(root_es * x[:, 0], root_es * x[:, 1], h, pl, rng, n0)
    a0, a1 = half_sums(h)
    root_pl = math.sqrt(pl)
    s0_tilde, s1_tilde = combine(r0, r1, root_pl * a0, root_pl * a1)
    hat0 = ml_detect_psk(s0_tilde, c)
    hat1 = ml_detect_psk(s1_tilde, c)
    hat = np.concatenate([hat0, hat1], axis=1)
    bit_err = int((hat != bits).sum())
    sym_err = int((hat0 != bits[:, :bps]).any(axis=1).sum())
    sym_err += int((hat1 != bits[:, bps:]).any(axis=1).sum())
    return bit_err, sym_err, bits.size, 2 * n_frames


def classical_alamouti_frames(rng, c, pl, es, n0, n_frames, power_split=True):
    """Two transmit antennas over a Rayleigh direct link, same code."""
    bps = c.bits_per_symbol
    bits = rng.integers(0, 2, size=(n_frames, 2 * bps), dtype=np.uint8)
    x = modulate(bits.ravel(), c).reshape(n_frames, 2)
    g = sample_cn(rng, 1.0, (n_frames, 2))
    es_ant = es / 2.0 if power_split else es
    # Effective per-antenna gains with energy and path loss folded in.
    a = math.sqrt(pl * es_ant) * g
    a0, a1 = a[:, 0], a[:, 1]
    n_shape = (n_frames,)
    r0 = x[:, 0] * a0 + x[:, 1] * a1 + _maybe_noise(rng, n0, n_shape)
    r1 = -np.conj(x[:, 1]) * a0 + np.conj(x[:, 0]) * a1 + _maybe_noise(rng, n0, n_shape)
    s0_tilde, s1_tilde = combine(r0, r1, a0, a1)
    hat0 = ml_detect_psk(s0_tilde, c)
    hat1 = ml_detect_psk(s1_tilde, c)
    hat = np.concatenate([hat0, hat1], axis=1)
    bit_err = int((hat != bits).sum())
    sym_err = int((hat0 != bits[:, :bps]).any(axis=1).sum())
    sym_err += int((hat1 != bits[:, bps:]).any(axis=1).sum())
    return bit_err, sym_err, bits.size, 2 * n_frames


def ris_ap_blind_frames(rng, n_elements, c, pl, es, n0, n_frames):
    bps = c.bits_per_symbol
    bits = rng.integers(0, 2, size=(n_frames, bps), dtype=np.uint8)
    x = modulate(bits.ravel(), c)
    h = sample_cn(rng, 1.0, (n_frames, n_elements))
    r = ris_ap_blind_transmit(math.sqrt(es) * x, h, pl, rng, n0)
    stat = r * np.conj(math.sqrt(pl) * h.sum(axis=-1))
    hat = ml_detect_psk(stat, c)
    bit_err = int((hat != bits).sum())
    sym_err = int((hat != bits).any(axis=1).sum())
    return bit_err, sym_err, bits.size, n_frames


def classical_alamouti_simulate(c, pl, snr_grid_db, trials, rng, power_split=True):
    """Fixed-trial-count sweep of the two-antenna baseline.

    Convenience wrapper around the frame kernel; the Monte Carlo engine
    offers the same scheme with adaptive stopping and parallelism.
    """
    from .harness import BerCurve

    snr_grid_db = np.asarray(snr_grid_db, dtype=float)
    n_points = len(snr_grid_db)
    curve = BerCurve.empty(snr_grid_db)
    chunk = 65536
    for i in range(n_points):
        n0 = 10.0 ** (-snr_grid_db[i] / 10.0)
        done = 0
        while done < trials:
            n = min(chunk, trials - done)
            be, se, nb, ns = classical_alamouti_frames(rng, c, pl, 1.0, n0, n, power_split)
            curve.add_point(i, trials=n, bits=nb, bit_errors=be, symbol_errors=se)
            done += n
    return curve

"""Monte Carlo engine: SNR sweeps with adaptive stopping, reproducible
parallel trial scheduling, error-rate curves with confidence intervals,
and theory-versus-simulation comparison.

Reproducibility contract: every batch of frames owns the random stream
``(seed, snr_index, batch_index)``, batches have a fixed size, and
stopping is decided only at fixed-size wave boundaries.  The set of
batches executed for a given config is therefore identical whatever the
worker count, and accumulators are plain sums, so results are
bit-identical from one machine layout to another.
"""

from __future__ import annotations

import logging
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from typing import NamedTuple

import numpy as np

from . import alamouti, vblast
from .channel import Dims, FadingSpec, Geometry, draw_channel, path_loss_direct, path_loss_ris
from .modem import constellation
from .numerics import PinvStats, make_rng, sample_cn

log = logging.getLogger(__name__)

SCHEMES = (
    "classical_alamouti",
    "ris_alamouti",
    "ris_ap_blind",
    "classical_vblast",
    "ris_im_vblast",
)

#: Batches per scheduling wave.  Stopping is evaluated only between
#: waves, so this (not the worker count) defines the executed trial set.
WAVE_BATCHES = 8


class ConfigError(ValueError):
    """Invalid experiment configuration; ``field`` names the bad entry."""

    def __init__(self, field_name: str, message: str):
        super().__init__(f"{field_name}: {message}")
        self.field = field_name


@dataclass(frozen=True)
class SchemeConfig:
    """Full description of one simulated system.

    Dimension fields left at ``None`` are filled per scheme by
    :meth:`normalized`.  ``quant_bits = None`` means continuous surface
    phases.  ``power_split`` divides the symbol energy across transmit
    antennas (classical schemes and multiplexed streams); the
    surface-assisted two-slot scheme has a single radiating source and
    never splits.
    """

    scheme: str
    n_tx: int | None = None
    n_rx: int | None = None
    n_ris: int | None = None
    mod_kind: str = "psk"
    mod_order: int = 2
    im_mode: str = "full"
    fixed_pair: tuple[int, int] = (1, 1)
    quant_bits: int | None = None
    detector: str = "optimal"
    k_factor_sr_db: float = -math.inf
    k_factor_rd_db: float = -math.inf
    los_phase: str = "zero"
    r_s: float = 1.0
    r_d: float = 9.0
    r_direct: float = 9.85
    frequency: float = 1.8e9
    snr_db: tuple[float, ...] = ()
    max_trials: int = 10_000_000
    min_bit_errors: int = 200
    seed: int = 0
    power_split: bool = True
    payload_ber_only: bool = False

    _DIM_DEFAULTS = {
        "classical_alamouti": (2, 1),
        "ris_alamouti": (1, 1),
        "ris_ap_blind": (1, 1),
        "classical_vblast": (2, 2),
        "ris_im_vblast": (2, 2),
    }

    def normalized(self) -> "SchemeConfig":
        """Fill scheme-dependent dimension defaults."""
        if self.scheme not in self._DIM_DEFAULTS:
            return self
        n_tx, n_rx = self._DIM_DEFAULTS[self.scheme]
        out = self
        if out.n_tx is None:
            out = replace(out, n_tx=n_tx)
        if out.n_rx is None:
            out = replace(out, n_rx=n_rx)
        if out.n_ris is None and not self.uses_ris:
            out = replace(out, n_ris=0)
        return out

    @property
    def uses_ris(self) -> bool:
        return self.scheme in ("ris_alamouti", "ris_ap_blind", "ris_im_vblast")

    @property
    def geometry(self) -> Geometry:
        return Geometry(r_s=self.r_s, r_d=self.r_d, r_direct=self.r_direct, frequency=self.frequency)

    @property
    def dims(self) -> Dims:
        return Dims(n_ris=self.n_ris or 1, n_tx=self.n_tx, n_rx=self.n_rx)

    @property
    def im_mode_obj(self) -> vblast.ImMode:
        return vblast.ImMode(kind=self.im_mode, fixed_pair=tuple(self.fixed_pair))

    def bits_per_use(self) -> int:
        """Payload plus index bits carried by one channel use (frame)."""
        bps = self.mod_order.bit_length() - 1
        if self.scheme in ("classical_alamouti", "ris_alamouti"):
            return 2 * bps  # two symbols per two-slot frame
        if self.scheme == "ris_ap_blind":
            return bps
        n_index = 0
        if self.scheme == "ris_im_vblast":
            n_index = vblast.im_bits_count(self.im_mode_obj, self.dims)
        return self.n_tx * bps + n_index

    def validate(self) -> None:
        cfg = self.normalized()
        if cfg.scheme not in SCHEMES:
            raise ConfigError("scheme", f"unknown scheme {cfg.scheme!r}")
        if cfg.mod_kind not in ("psk", "qam"):
            raise ConfigError("mod_kind", f"unknown constellation kind {cfg.mod_kind!r}")
        try:
            constellation(cfg.mod_kind, cfg.mod_order)
        except ValueError as e:
            raise ConfigError("mod_order", str(e)) from None
        if cfg.scheme == "classical_alamouti" and (cfg.n_tx, cfg.n_rx) != (2, 1):
            raise ConfigError("n_tx", "classical_alamouti is fixed to 2 transmit, 1 receive antenna")
        if cfg.uses_ris:
            if not cfg.n_ris or cfg.n_ris < 1:
                raise ConfigError("n_ris", "a surface-assisted scheme needs n_ris >= 1")
            if cfg.scheme in ("ris_alamouti",) and cfg.n_ris % 2:
                raise ConfigError("n_ris", "the two-slot surface scheme needs an even element count")
        if cfg.scheme in ("classical_vblast", "ris_im_vblast"):
            if cfg.n_tx < 1 or cfg.n_rx < cfg.n_tx:
                raise ConfigError("n_rx", "nulling detection needs n_rx >= n_tx >= 1")
        if cfg.scheme == "ris_im_vblast":
            try:
                mode = cfg.im_mode_obj
            except ValueError as e:
                raise ConfigError("im_mode", str(e)) from None
            try:
                vblast.im_bits_count(mode, cfg.dims)
            except ValueError as e:
                raise ConfigError("im_mode", str(e)) from None
            if cfg.detector not in ("optimal", "suboptimal"):
                raise ConfigError("detector", f"unknown detector {cfg.detector!r}")
        if cfg.quant_bits is not None and cfg.quant_bits < 1:
            raise ConfigError("quant_bits", "must be >= 1 (or omitted for continuous phases)")
        for name in ("k_factor_sr_db", "k_factor_rd_db"):
            try:
                FadingSpec(k_factor_db=getattr(cfg, name), los_phase=cfg.los_phase)
            except ValueError as e:
                raise ConfigError(name, str(e)) from None
        try:
            cfg.geometry
        except ValueError as e:
            raise ConfigError("geometry", str(e)) from None
        if not cfg.snr_db:
            raise ConfigError("snr_db", "at least one SNR point is required")
        if cfg.max_trials < 1:
            raise ConfigError("max_trials", "must be >= 1")
        if cfg.min_bit_errors < 1:
            raise ConfigError("min_bit_errors", "must be >= 1")


class BatchTally(NamedTuple):
    """Error ledger of one batch of frames."""

    trials: int
    bits: int
    bit_errors: int
    symbol_errors: int
    symbols: int
    index_bits: int
    index_bit_errors: int


@dataclass
class BerCurve:
    """Per-SNR-point accumulation of a sweep."""

    snr_db: np.ndarray
    trials: np.ndarray
    bits: np.ndarray
    bit_errors: np.ndarray
    symbols: np.ndarray
    symbol_errors: np.ndarray
    index_bits: np.ndarray
    index_bit_errors: np.ndarray
    cm_per_detection: int = 0
    pinv_fallbacks: int = 0

    @classmethod
    def empty(cls, snr_db) -> "BerCurve":
        snr_db = np.asarray(snr_db, dtype=float)
        z = lambda: np.zeros(len(snr_db), dtype=np.int64)
        return cls(snr_db, z(), z(), z(), z(), z(), z(), z())

    def add_point(
        self, i, *, trials, bits, bit_errors,
        symbol_errors=0, symbols=0, index_bits=0, index_bit_errors=0,
    ):
        self.trials[i] += trials
        self.bits[i] += bits
        self.bit_errors[i] += bit_errors
        self.symbols[i] += symbols
        self.symbol_errors[i] += symbol_errors
        self.index_bits[i] += index_bits
        self.index_bit_errors[i] += index_bit_errors

    def _ratio(self, num, den):
        with np.errstate(invalid="ignore", divide="ignore"):
            return np.where(den > 0, num / np.maximum(den, 1), np.nan)

    @property
    def ber(self) -> np.ndarray:
        return self._ratio(self.bit_errors, self.bits)

    @property
    def payload_ber(self) -> np.ndarray:
        return self._ratio(self.bit_errors - self.index_bit_errors, self.bits - self.index_bits)

    @property
    def ser(self) -> np.ndarray:
        return self._ratio(self.symbol_errors, self.symbols)

    @property
    def ci95(self) -> np.ndarray:
        p = self.ber
        return 1.96 * np.sqrt(p * (1.0 - p) / np.maximum(self.bits, 1))

    def rows(self, payload_only: bool = False):
        """Yield CSV-ready dicts, one per SNR point."""
        ber = self.payload_ber if payload_only else self.ber
        for i in range(len(self.snr_db)):
            yield {
                "snr_db": float(self.snr_db[i]),
                "trials": int(self.trials[i]),
                "bits": int(self.bits[i]),
                "bit_errors": int(self.bit_errors[i]),
                "ber": float(ber[i]),
                "ci95": float(self.ci95[i]),
                "index_bit_errors": int(self.index_bit_errors[i]),
                "cm_count": int(self.cm_per_detection),
            }


def _batch_frames(cfg: SchemeConfig) -> int:
    # Surface-assisted multiplexing draws N-element channel matrices per
    # frame; keep those batches smaller to bound memory.
    return 1024 if cfg.scheme == "ris_im_vblast" else 8192


def _fading_specs(cfg: SchemeConfig):
    return (
        FadingSpec(k_factor_db=cfg.k_factor_sr_db, los_phase=cfg.los_phase),
        FadingSpec(k_factor_db=cfg.k_factor_rd_db, los_phase=cfg.los_phase),
    )


def _run_batch(cfg: SchemeConfig, snr_idx: int, batch_idx: int, n_frames: int) -> BatchTally:
    """Simulate one batch of frames on its own random stream."""
    rng = make_rng(cfg.seed, snr_idx, batch_idx)
    c = constellation(cfg.mod_kind, cfg.mod_order)
    es = 1.0
    n0 = es * 10.0 ** (-cfg.snr_db[snr_idx] / 10.0)
    geom = cfg.geometry

    if cfg.scheme == "classical_alamouti":
        pl = path_loss_direct(geom)
        be, se, nb, ns = alamouti.classical_alamouti_frames(
            rng, c, pl, es, n0, n_frames, cfg.power_split
        )
        return BatchTally(n_frames, nb, be, se, ns, 0, 0)
    if cfg.scheme == "ris_alamouti":
        pl = path_loss_ris(geom)
        be, se, nb, ns = alamouti.ris_alamouti_frames(rng, cfg.n_ris, c, pl, es, n0, n_frames)
        return BatchTally(n_frames, nb, be, se, ns, 0, 0)
    if cfg.scheme == "ris_ap_blind":
        pl = path_loss_ris(geom)
        be, se, nb, ns = alamouti.ris_ap_blind_frames(rng, cfg.n_ris, c, pl, es, n0, n_frames)
        return BatchTally(n_frames, nb, be, se, ns, 0, 0)
    if cfg.scheme == "classical_vblast":
        pl = path_loss_direct(geom)
        be, se, nb, ns, ie, nib = vblast.classical_vblast_frames(
            rng, cfg.dims, c, pl, es, n0, n_frames, cfg.power_split
        )
        return BatchTally(n_frames, nb, be, se, ns, nib, ie)
    if cfg.scheme == "ris_im_vblast":
        spec_sr, spec_rd = _fading_specs(cfg)
        be, se, nb, ns, ie, nib = vblast.ris_im_vblast_frames(
            rng, cfg.dims, c, cfg.im_mode_obj, cfg.quant_bits, cfg.detector,
            spec_sr, spec_rd, geom, es, n0, n_frames, cfg.power_split,
        )
        return BatchTally(n_frames, nb, be, se, ns, nib, ie)
    raise ConfigError("scheme", f"unknown scheme {cfg.scheme!r}")


def _run_batch_args(args) -> BatchTally:
    return _run_batch(*args)


def measure_cm_per_detection(cfg: SchemeConfig) -> tuple[int, int]:
    """Instrument one representative frame's receiver chain.

    Returns (complex multiplications, pseudo-inverse SVD fallbacks).  The
    count depends only on loop structure, never on channel values, so a
    fixed probe realization gives the per-frame cost of every frame.
    Schemes without a cost model (the combiner-based ones) report zero.
    """
    cfg = cfg.normalized()
    if cfg.scheme not in ("classical_vblast", "ris_im_vblast"):
        return 0, 0
    dims = cfg.dims
    c = constellation(cfg.mod_kind, cfg.mod_order)
    counter = vblast.CmCounter(dims, c.order)
    stats = PinvStats()
    rng = make_rng(0x5EED, 0)
    if cfg.scheme == "classical_vblast":
        v = sample_cn(rng, 1.0, (dims.n_rx, dims.n_tx))
        r = sample_cn(rng, 1.0, (dims.n_rx,))
        vblast.zf_nulling_cancelling(v, r, c, 1.0, counter=counter, pinv_stats=stats)
        return counter.total, stats.svd_fallbacks

    spec_sr, spec_rd = _fading_specs(cfg)
    real = draw_channel(rng, dims, spec_sr, spec_rd, cfg.geometry)
    r = sample_cn(rng, 1.0, (dims.n_rx,))
    mode = cfg.im_mode_obj
    if mode.kind == "enhancing":
        sel = vblast.select_pair(np.zeros(0, dtype=np.uint8), mode, dims)
        phases = vblast.ris_phases_for_pair(real.h1, real.g1, sel, cfg.quant_bits)
        v_hat = vblast.equivalent_channel(real, phases, counter=counter)
    elif cfg.detector == "optimal":
        _, _, v_hat = vblast.detect_indices_optimal(
            real, r, mode, c, cfg.quant_bits, 1.0, counter=counter, pinv_stats=stats
        )
    else:
        _, _, v_hat = vblast.detect_indices_suboptimal(
            real, r, mode, c, cfg.quant_bits, 1.0, counter=counter, pinv_stats=stats
        )
    vblast.zf_nulling_cancelling(v_hat, r, c, 1.0, counter=counter, pinv_stats=stats)
    return counter.total, stats.svd_fallbacks


def run_sweep(cfg: SchemeConfig, workers: int | None = None) -> BerCurve:
    """Run the Monte Carlo sweep described by ``cfg``.

    Per SNR point, frames accumulate until ``min_bit_errors`` bit errors
    are collected or ``max_trials`` frames are spent.  ``workers`` > 1
    distributes batches over processes; the result is identical for any
    worker count.
    """
    cfg = cfg.normalized()
    cfg.validate()
    curve = BerCurve.empty(np.asarray(cfg.snr_db, dtype=float))
    batch = _batch_frames(cfg)
    pool = ProcessPoolExecutor(max_workers=workers) if workers and workers > 1 else None
    fallbacks = 0
    try:
        for i in range(len(cfg.snr_db)):
            next_batch = 0
            while (
                curve.trials[i] < cfg.max_trials
                and curve.bit_errors[i] < cfg.min_bit_errors
            ):
                planned = int(curve.trials[i])
                wave = []
                for j in range(WAVE_BATCHES):
                    n = min(batch, cfg.max_trials - planned)
                    if n <= 0:
                        break
                    wave.append((cfg, i, next_batch + j, n))
                    planned += n
                if pool is not None:
                    tallies = list(pool.map(_run_batch_args, wave))
                else:
                    tallies = [_run_batch(*args) for args in wave]
                for t in tallies:
                    curve.add_point(
                        i, trials=t.trials, bits=t.bits, bit_errors=t.bit_errors,
                        symbol_errors=t.symbol_errors, symbols=t.symbols,
                        index_bits=t.index_bits, index_bit_errors=t.index_bit_errors,
                    )
                next_batch += len(wave)
            log.info(
                "%s snr=%.1f dB: ber=%.3e (%d errors / %d bits, %d frames)",
                cfg.scheme, cfg.snr_db[i], curve.ber[i],
                curve.bit_errors[i], curve.bits[i], curve.trials[i],
            )
    finally:
        if pool is not None:
            pool.shutdown()
    curve.cm_per_detection, fallbacks = measure_cm_per_detection(cfg)
    curve.pinv_fallbacks = fallbacks
    return curve


# --- analysis --------------------------------------------------------------


@dataclass
class TheoryRow:
    snr_db: float
    measured: float
    predicted: float
    stderr: float
    status: str  # "ok" | "flagged" | "insufficient"


@dataclass
class TheoryReport:
    rows: list[TheoryRow] = field(default_factory=list)

    @property
    def flagged(self) -> list[TheoryRow]:
        return [r for r in self.rows if r.status == "flagged"]

    def __str__(self) -> str:
        lines = [f"{'snr_db':>8} {'measured':>12} {'predicted':>12} {'status':>12}"]
        for r in self.rows:
            lines.append(
                f"{r.snr_db:8.2f} {r.measured:12.4e} {r.predicted:12.4e} {r.status:>12}"
            )
        return "\n".join(lines)


#: Below this many accumulated errors the normal approximation behind the
#: three-standard-error test is not trustworthy; such points are reported
#: as "insufficient" instead of pass/fail.
MIN_ERRORS_FOR_COMPARISON = 10


def compare_theory(curve: BerCurve, cfg: SchemeConfig) -> TheoryReport:
    """Tabulate measured error rates against the closed-form prediction.

    Only defined for the surface-assisted two-slot scheme with PSK.  For
    binary signaling the bit and symbol error rates coincide and the
    comparison runs on bits; for larger orders it runs on symbol errors,
    which is what the prediction models.
    """
    cfg = cfg.normalized()
    if cfg.scheme != "ris_alamouti" or cfg.mod_kind != "psk":
        raise ValueError("theory comparison applies to the surface-assisted two-slot PSK scheme")
    pl = path_loss_ris(cfg.geometry)
    report = TheoryReport()
    for i in range(len(curve.snr_db)):
        predicted = alamouti.sep_theory(
            cfg.mod_order, cfg.n_ris, pl, 10.0 ** (curve.snr_db[i] / 10.0)
        )
        if cfg.mod_order == 2:
            errors, n = int(curve.bit_errors[i]), int(curve.bits[i])
        else:
            errors, n = int(curve.symbol_errors[i]), int(curve.symbols[i])
        measured = errors / n if n else math.nan
        stderr = math.sqrt(measured * (1.0 - measured) / n) if n else math.nan
        if errors < MIN_ERRORS_FOR_COMPARISON:
            status = "insufficient"
        elif abs(measured - predicted) > 3.0 * stderr:
            status = "flagged"
        else:
            status = "ok"
        report.rows.append(TheoryRow(float(curve.snr_db[i]), measured, predicted, stderr, status))
    return report


def snr_at_ber(curve: BerCurve, target: float) -> float | None:
    """SNR where the curve crosses ``target``, by log-linear interpolation.

    Returns ``None`` when no adjacent pair of positive-BER points
    brackets the target.
    """
    snr, ber = curve.snr_db, curve.ber
    for i in range(len(snr) - 1):
        a, b = ber[i], ber[i + 1]
        if a > 0 and b > 0 and a >= target >= b and a > b:
            la, lb, lt = math.log10(a), math.log10(b), math.log10(target)
            return float(snr[i] + (snr[i + 1] - snr[i]) * (lt - la) / (lb - la))
    return None


def gain_at_ber(curve_a: BerCurve, curve_b: BerCurve, target: float) -> float:
    """SNR advantage of ``curve_a`` over ``curve_b`` at the target BER.

    Positive when ``curve_a`` reaches the target at lower SNR.  Raises
    ``ValueError`` if either curve does not cross the target.
    """
    sa = snr_at_ber(curve_a, target)
    sb = snr_at_ber(curve_b, target)
    if sa is None or sb is None:
        which = "first" if sa is None else "second"
        raise ValueError(f"{which} curve does not cross target BER {target:g}")
    return sb - sa

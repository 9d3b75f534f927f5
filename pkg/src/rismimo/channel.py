"""Quasi-static fading generation and geometric path-loss models.

Two propagation paths exist in every setup: the direct source-destination
link and the two-hop link bouncing off the reflecting surface.  Both are
reduced to a single linear power gain here; fading is drawn separately
with unit average power.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .numerics import sample_cn

SPEED_OF_LIGHT = 299_792_458.0

#: Direct-link loss model constants: reference loss at one meter plus the
#: penetration loss of two interior walls (6.9 dB each).
DIRECT_REF_LOSS_DB = 42.7
DIRECT_WALL_LOSS_DB = 13.8


@dataclass(frozen=True)
class Geometry:
    """Node layout in meters plus the carrier frequency in Hz.

    ``r_s``/``r_d`` are the source-to-surface and surface-to-destination
    distances; ``r_direct`` is the straight source-to-destination distance.
    """

    r_s: float
    r_d: float
    r_direct: float
    frequency: float = 1.8e9

    def __post_init__(self):
        for name in ("r_s", "r_d", "r_direct", "frequency"):
            if not getattr(self, name) > 0:
                raise ValueError(f"Geometry.{name} must be positive")

    @property
    def wavelength(self) -> float:
        return SPEED_OF_LIGHT / self.frequency


@dataclass(frozen=True)
class Dims:
    """Array sizes: surface elements, transmit antennas, receive antennas."""

    n_ris: int
    n_tx: int
    n_rx: int

    def __post_init__(self):
        for name in ("n_ris", "n_tx", "n_rx"):
            if getattr(self, name) < 1:
                raise ValueError(f"Dims.{name} must be at least 1")


@dataclass(frozen=True)
class FadingSpec:
    """Marginal distribution of one hop's channel entries.

    ``k_factor_db`` is the ratio of line-of-sight to scattered power;
    ``-inf`` means pure Rayleigh scattering.  Entries always have unit
    average power regardless of the split.  ``los_phase`` selects the
    deterministic component's phase pattern: ``"zero"`` for a flat
    all-equal phase, ``"random"`` for an independent fixed phase per
    entry (drawn once per realization).
    """

    k_factor_db: float = -math.inf
    los_phase: str = "zero"

    def __post_init__(self):
        if math.isnan(self.k_factor_db):
            raise ValueError("k_factor_db must not be NaN")
        if self.los_phase not in ("zero", "random"):
            raise ValueError(f"unknown los_phase {self.los_phase!r}")

    @property
    def kind(self) -> str:
        return "rayleigh" if math.isinf(self.k_factor_db) and self.k_factor_db < 0 else "rician"

    @classmethod
    def rayleigh(cls) -> "FadingSpec":
        return cls()

    @classmethod
    def rician(cls, k_factor_db: float, los_phase: str = "zero") -> "FadingSpec":
        return cls(k_factor_db=k_factor_db, los_phase=los_phase)


@dataclass
class ChannelRealization:
    """One quasi-static draw of all three channel matrices.

    ``h1``: source to surface, shape (..., N, Nt).
    ``g1``: surface to destination, shape (..., N, Nr).
    ``h2``: direct source to destination, shape (..., Nr, Nt).
    ``pl1``/``pl2``: linear power gains of the surface path and the
    direct path.  A leading batch axis holds independent realizations.
    """

    h1: np.ndarray
    g1: np.ndarray
    h2: np.ndarray
    pl1: float
    pl2: float


def path_loss_direct(geom: Geometry) -> float:
    """Linear power gain of the direct link.

    Loss in dB is 42.7 + 20 log10(distance) + 13.8, i.e. free-space-like
    distance scaling referenced to one meter plus two wall penetrations.
    """
    loss_db = DIRECT_REF_LOSS_DB + 20.0 * math.log10(geom.r_direct) + DIRECT_WALL_LOSS_DB
    return 10.0 ** (-loss_db / 10.0)


def path_loss_ris(geom: Geometry) -> float:
    """Linear power gain of the two-hop surface path.

    lambda^4 / (256 pi^2 r_s^2 r_d^2): the product of two near-field
    aperture captures, symmetric in the two hop distances.
    """
    lam = geom.wavelength
    return lam**4 / (256.0 * math.pi**2 * geom.r_s**2 * geom.r_d**2)


def draw_fading(rng: np.random.Generator, spec: FadingSpec, size) -> np.ndarray:
    """Draw channel entries with unit average power per ``spec``."""
    if spec.kind == "rayleigh":
        return sample_cn(rng, 1.0, size)
    if spec.los_phase == "random":
        phase = rng.uniform(0.0, 2.0 * np.pi, size)
        los = np.exp(1j * phase)
    else:
        los = np.ones(size, dtype=complex)
    if math.isinf(spec.k_factor_db):
        # +inf: pure deterministic component, |entry| = 1 exactly.
        return los
    k = 10.0 ** (spec.k_factor_db / 10.0)
    nlos = sample_cn(rng, 1.0, size)
    return math.sqrt(k / (k + 1.0)) * los + math.sqrt(1.0 / (k + 1.0)) * nlos


def draw_channel(
    rng: np.random.Generator,
    dims: Dims,
    spec_h1: FadingSpec,
    spec_g1: FadingSpec,
    geom: Geometry,
    batch: int | None = None,
    direct_blocked: bool = False,
) -> ChannelRealization:
    """Draw one (or a batch of) quasi-static channel realizations.

    The direct channel ``h2`` is always unit-power Rayleigh; the two
    surface hops follow their fading specs.  ``direct_blocked`` zeroes the
    direct path's power gain, modeling a fully obstructed link.  The draw
    order (h1, g1, h2) is fixed so a given rng state maps to exactly one
    realization.
    """
    lead = () if batch is None else (int(batch),)
    h1 = draw_fading(rng, spec_h1, lead + (dims.n_ris, dims.n_tx))
    g1 = draw_fading(rng, spec_g1, lead + (dims.n_ris, dims.n_rx))
    h2 = sample_cn(rng, 1.0, lead + (dims.n_rx, dims.n_tx))
    pl1 = path_loss_ris(geom)
    pl2 = 0.0 if direct_blocked else path_loss_direct(geom)
    return ChannelRealization(h1=h1, g1=g1, h2=h2, pl1=pl1, pl2=pl2)

"""Link-level Monte Carlo simulator and analysis library for
surface-assisted MIMO transmission schemes.

The package covers a two-slot orthogonal transmit-diversity scheme
realized through a passive phase-controlled reflecting surface, a
surface-assisted spatially multiplexed scheme whose targeted antenna
pair carries index bits, their classical counterparts, closed-form error
probability evaluation, geometric path-loss models, and a receiver
complexity (complex multiplication) cost model.  The `rismimo` console
script drives experiment files; see the README for the file format.
"""

from .channel import (
    ChannelRealization,
    Dims,
    FadingSpec,
    Geometry,
    draw_channel,
    path_loss_direct,
    path_loss_ris,
)
from .harness import (
    BerCurve,
    ConfigError,
    SchemeConfig,
    compare_theory,
    gain_at_ber,
    run_sweep,
    snr_at_ber,
)
from .modem import Constellation, constellation, make_psk, make_qam, min_distance, modulate, slice_symbol
from .numerics import integrate, make_rng, pseudo_inverse, sample_cn
from .alamouti import sep_theory
from .vblast import (
    CmCounter,
    ImMode,
    count_complexity,
    count_complexity_equal_antennas,
    detect_indices_optimal,
    detect_indices_suboptimal,
    equivalent_channel,
    ris_phases_for_pair,
    select_pair,
    zf_nulling_cancelling,
)

__version__ = "0.1.0"

__all__ = [
    "BerCurve",
    "ChannelRealization",
    "CmCounter",
    "ConfigError",
    "Constellation",
    "Dims",
    "FadingSpec",
    "Geometry",
    "ImMode",
    "SchemeConfig",
    "compare_theory",
    "constellation",
    "count_complexity",
    "count_complexity_equal_antennas",
    "detect_indices_optimal",
    "detect_indices_suboptimal",
    "draw_channel",
    "equivalent_channel",
    "gain_at_ber",
    "integrate",
    "make_psk",
    "make_qam",
    "make_rng",
    "min_distance",
    "modulate",
    "path_loss_direct",
    "path_loss_ris",
    "pseudo_inverse",
    "ris_phases_for_pair",
    "run_sweep",
    "sample_cn",
    "select_pair",
    "sep_theory",
    "slice_symbol",
    "snr_at_ber",
    "zf_nulling_cancelling",
]

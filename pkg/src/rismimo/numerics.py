"""Numeric substrate: seeded RNG streams, complex Gaussian sampling,
Moore-Penrose pseudo-inverse and fixed-order Gauss-Legendre quadrature.

Everything here is pure and array-oriented: functions accept either a single
matrix/scalar or a leading batch of them and broadcast accordingly.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np

log = logging.getLogger(__name__)

#: Gram-matrix condition number beyond which the explicit right-inverse
#: formula is abandoned for an SVD-based pseudo-inverse.
GRAM_COND_LIMIT = 1e12


def make_rng(seed: int, *stream: int) -> np.random.Generator:
    """Create an independent, reproducible random stream.

    Identical ``(seed, *stream)`` tuples always yield the same sample
    sequence; distinct tuples yield statistically independent streams, so
    parallel workers can each own one without coordination.
    """
    return np.random.default_rng([int(seed)] + [int(s) for s in stream])


def sample_cn(rng: np.random.Generator, variance: float, size=None) -> np.ndarray:
    """Draw circularly-symmetric complex Gaussian samples, CN(0, variance).

    Real and imaginary parts are independent N(0, variance/2), so the mean
    squared magnitude of the samples equals ``variance``.
    """
    if variance <= 0:
        raise ValueError(f"variance must be positive, got {variance}")
    scale = np.sqrt(variance / 2.0)
    if size is None:
        pair = rng.standard_normal(2)
        return scale * complex(pair[0], pair[1])
    shape = (size,) if np.isscalar(size) else tuple(size)
    z = rng.standard_normal(shape + (2,)).view(np.complex128)[..., 0]
    return scale * z


@dataclass
class PinvStats:
    """Counts how often the pseudo-inverse fell back to the SVD path."""

    calls: int = 0
    svd_fallbacks: int = 0

    def merge(self, other: "PinvStats") -> None:
        self.calls += other.calls
        self.svd_fallbacks += other.svd_fallbacks


def pseudo_inverse(
    a: np.ndarray,
    gram_cond_limit: float = GRAM_COND_LIMIT,
    stats: PinvStats | None = None,
) -> np.ndarray:
    """Moore-Penrose pseudo-inverse of ``a`` (shape ``(..., m, n)``).

    The primary path evaluates the explicit right-inverse
    ``a^H (a a^H)^-1``, which is the pseudo-inverse whenever ``a`` has full
    row rank.  Matrices whose Gram matrix ``a a^H`` is singular to within
    ``gram_cond_limit`` (rank-deficient or tall inputs) are routed through
    an SVD-based pseudo-inverse instead; the fallback is logged and counted
    in ``stats`` when provided.
    """
    a = np.asarray(a)
    if a.ndim < 2:
        raise ValueError("pseudo_inverse expects a matrix or a stack of matrices")
    batch_shape = a.shape[:-2]
    m, n = a.shape[-2:]

    gram = a @ np.conj(np.swapaxes(a, -1, -2))
    # Hermitian PSD, so the eigenvalue ratio is the condition number.
    eig = np.linalg.eigvalsh(gram)
    lo, hi = eig[..., 0], eig[..., -1]
    with np.errstate(divide="ignore", invalid="ignore"):
        ok = (lo > 0) & (hi / np.where(lo > 0, lo, 1.0) < gram_cond_limit)

    out = np.empty(batch_shape + (n, m), dtype=np.result_type(a.dtype, np.complex128))
    n_fallback = int(np.size(ok) - np.count_nonzero(ok))
    if stats is not None:
        stats.calls += int(np.size(ok))
        stats.svd_fallbacks += n_fallback
    if n_fallback:
        log.debug(
            "pseudo_inverse: %d/%d Gram matrices near-singular, using SVD path",
            n_fallback,
            np.size(ok),
        )

    if a.ndim == 2:
        if ok:
            out[...] = np.conj(np.swapaxes(np.linalg.solve(gram, a), -1, -2))
        else:
            out[...] = np.linalg.pinv(a)
        return out

    ok_flat = ok.reshape(-1)
    a_flat = a.reshape((-1, m, n))
    gram_flat = gram.reshape((-1, m, m))
    out_flat = out.reshape((-1, n, m))
    if ok_flat.any():
        sol = np.linalg.solve(gram_flat[ok_flat], a_flat[ok_flat])
        out_flat[ok_flat] = np.conj(np.swapaxes(sol, -1, -2))
    if not ok_flat.all():
        out_flat[~ok_flat] = np.linalg.pinv(a_flat[~ok_flat])
    return out


@lru_cache(maxsize=32)
def _leggauss(n_points: int):
    return np.polynomial.legendre.leggauss(n_points)


def integrate(f, lo: float, hi: float, n_points: int = 64) -> float:
    """Gauss-Legendre estimate of the integral of ``f`` over ``[lo, hi]``.

    ``f`` must accept a vector of evaluation points.  64 points resolve the
    smooth error-probability integrands used here to better than 1e-10
    relative error.
    """
    if not lo < hi:
        raise ValueError(f"integration bounds must satisfy lo < hi, got [{lo}, {hi}]")
    if n_points < 1:
        raise ValueError("n_points must be a positive integer")
    x, w = _leggauss(int(n_points))
    half = 0.5 * (hi - lo)
    mid = 0.5 * (hi + lo)
    return float(half * np.dot(w, f(half * x + mid)))


def db_to_linear(db: float) -> float:
    return 10.0 ** (np.asarray(db) / 10.0)


def linear_to_db(lin: float) -> float:
    return 10.0 * np.log10(lin)

"""Truncated diagonal Fock-space field states.

The cavity field is represented by its photon-number populations only;
coherences play no role in any of the counting statistics computed here.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.special import gammaln

from .errors import TruncationError, UndefinedStatisticError

DEFAULT_TAIL_TOL = 1e-12


@dataclass(frozen=True)
class PhotonDistribution:
    """Photon-number population vector p_n for n = 0 .. n_max.

    Constructed states are normalized up to the admissible truncated mass
    ``tail_tol``; vectors produced by superoperator applications may carry
    any non-negative weights.
    """

    probs: np.ndarray
    tail_tol: float = DEFAULT_TAIL_TOL

    def __post_init__(self):
        arr = np.asarray(self.probs, dtype=float)
        arr.flags.writeable = False
        object.__setattr__(self, "probs", arr)

    @property
    def n_max(self) -> int:
        return len(self.probs) - 1

    def trace(self) -> float:
        return float(self.probs.sum())

    def mean(self) -> float:
        return float(np.dot(np.arange(len(self.probs)), self.probs))


def default_n_max(nbar: float) -> int:
    """Truncation heuristic for Poissonian-or-narrower states."""
    return int(np.ceil(nbar + 10.0 * np.sqrt(nbar) + 20.0))


def _check_constructed(probs, n_max, tail_tol, explicit_n_max, required_fn):
    mass = probs.sum()
    ok = (1.0 - mass) <= tail_tol and probs[-1] * n_max <= tail_tol
    if ok:
        return
    if explicit_n_max:
        raise TruncationError(
            f"n_max={n_max} leaves truncated mass {1.0 - mass:.3e} or unsafe "
            f"edge weight {probs[-1] * n_max:.3e} (tol {tail_tol:.1e}); "
            f"need n_max >= {required_fn()}",
            required=required_fn(),
        )


def make_number(n: int, n_max: int) -> PhotonDistribution:
    """Fock state |n><n| on a basis truncated at n_max."""
    if n < 0 or n > n_max:
        raise ValueError(f"need 0 <= n <= n_max, got n={n}, n_max={n_max}")
    probs = np.zeros(n_max + 1)
    probs[n] = 1.0
    return PhotonDistribution(probs)


def _poisson_weights(nbar, n_max):
    n = np.arange(n_max + 1)
    if nbar == 0.0:
        w = np.zeros(n_max + 1)
        w[0] = 1.0
        return w
    return np.exp(n * np.log(nbar) - nbar - gammaln(n + 1))


def _geometric_weights(nbar, n_max):
    n = np.arange(n_max + 1)
    if nbar == 0.0:
        w = np.zeros(n_max + 1)
        w[0] = 1.0
        return w
    x = nbar / (1.0 + nbar)
    return np.exp(n * np.log(x) - np.log(1.0 + nbar))


def _grown_n_max(weight_fn, nbar, tail_tol):
    m = default_n_max(nbar)
    while True:
        w = weight_fn(nbar, m)
        if (1.0 - w.sum()) <= tail_tol and w[-1] * m <= tail_tol:
            return m
        m *= 2


def make_coherent(nbar: float, n_max: int | None = None,
                  tail_tol: float = DEFAULT_TAIL_TOL) -> PhotonDistribution:
    """Coherent (Poissonian) state with mean photon number nbar."""
    if nbar < 0:
        raise ValueError("nbar must be non-negative")
    explicit = n_max is not None
    if n_max is None:
        n_max = _grown_n_max(_poisson_weights, nbar, tail_tol)
    probs = _poisson_weights(nbar, n_max)
    _check_constructed(probs, n_max, tail_tol, explicit,
                       lambda: _grown_n_max(_poisson_weights, nbar, tail_tol))
    return PhotonDistribution(probs / probs.sum(), tail_tol)


def make_thermal(nbar: float, n_max: int | None = None,
                 tail_tol: float = DEFAULT_TAIL_TOL) -> PhotonDistribution:
    """Thermal (geometric) state with mean photon number nbar.

    The geometric tail decays slowly, so the Poissonian n_max heuristic is
    only a starting point; the truncation grows until both the retained mass
    and the edge-weight safety bound meet tail_tol.
    """
    if nbar < 0:
        raise ValueError("nbar must be non-negative")
    explicit = n_max is not None
    if n_max is None:
        n_max = _grown_n_max(_geometric_weights, nbar, tail_tol)
    probs = _geometric_weights(nbar, n_max)
    _check_constructed(probs, n_max, tail_tol, explicit,
                       lambda: _grown_n_max(_geometric_weights, nbar, tail_tol))
    return PhotonDistribution(probs / probs.sum(), tail_tol)


def factorial_moment(dist: PhotonDistribution, k: int) -> float:
    """k-th factorial moment  sum_n n!/(n-k)! p_n  (k = 0 gives the mass)."""
    if k < 0:
        raise ValueError("k must be non-negative")
    n = np.arange(len(dist.probs), dtype=float)
    w = np.ones_like(n)
    for i in range(k):
        w = w * (n - i)
    w[: k] = 0.0
    return float(np.dot(w, dist.probs))


def mandel_q(dist: PhotonDistribution) -> float:
    """Mandel Q = (<n^2> - <n>^2)/<n> - 1; -1/0/nbar for number/coherent/thermal."""
    m1 = factorial_moment(dist, 1)
    if m1 <= 0.0:
        raise UndefinedStatisticError("Mandel Q undefined for zero-mean state")
    m2 = factorial_moment(dist, 2)
    var = m2 + m1 - m1 * m1
    return var / m1 - 1.0

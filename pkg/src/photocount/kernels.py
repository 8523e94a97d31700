"""Diagonal-superoperator algebra on photon-number populations.

Two shift families act on population vectors:

* weighted shift  (A^k p)_n = [(n+k)!/n!] p_{n+k}   (absorption, a rho a^dag)
* plain shift     (E^k p)_n = p_{n+k}               (exponential phase ops)

Resolvents and semigroup exponentials of the plain shift are evaluated as
truncated power series; both shifts are nilpotent on truncated vectors, so
the series are exact.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.special import gammaln

from .fock import PhotonDistribution

SERIES_RTOL = 1e-16


@dataclass(frozen=True)
class DiagonalShiftPowers:
    """A fixed power of one of the two shift families ('a' weighted,
    'eps' plain); order 0 is the identity for either kind."""

    order: int
    kind: str

    def __post_init__(self):
        if self.order < 0:
            raise ValueError("order must be non-negative")
        if self.kind not in ("a", "eps"):
            raise ValueError("kind must be 'a' or 'eps'")

    def apply(self, dist: PhotonDistribution) -> PhotonDistribution:
        if self.kind == "a":
            return apply_a_power(dist, self.order)
        return apply_eps_power(dist, self.order)


def poisson_pmf(lam: float, k_max: int) -> np.ndarray:
    """Poisson weights e^-lam lam^k/k! for k = 0..k_max, safe for large lam."""
    if lam < 0:
        raise ValueError("lam must be non-negative")
    k = np.arange(k_max + 1)
    if lam == 0.0:
        out = np.zeros(k_max + 1)
        out[0] = 1.0
        return out
    return np.exp(k * np.log(lam) - lam - gammaln(k + 1))


def poisson_cutoff(lam: float, tail: float = 1e-16) -> int:
    """Index beyond which the Poisson(lam) tail is below `tail`."""
    z = np.sqrt(max(2.0 * np.log(1.0 / tail), 1.0))
    return int(np.ceil(lam + z * np.sqrt(lam + 1.0) + 12.0))


def apply_a_power(dist: PhotonDistribution, k: int) -> PhotonDistribution:
    """Weighted shift: out[n] = [(n+k)!/n!] p[n+k]; unnormalized."""
    if k < 0:
        raise ValueError("k must be non-negative")
    p = dist.probs
    size = len(p)
    out = np.zeros(size)
    if k < size:
        n = np.arange(size - k, dtype=float)
        w = np.ones_like(n)
        for i in range(1, k + 1):
            w = w * (n + i)
        out[: size - k] = w * p[k:]
    return PhotonDistribution(out, dist.tail_tol)


def apply_eps_power(dist: PhotonDistribution, k: int) -> PhotonDistribution:
    """Plain shift: out[n] = p[n+k]; trace equals sum_{n>=k} p_n."""
    if k < 0:
        raise ValueError("k must be non-negative")
    p = dist.probs
    out = np.zeros(len(p))
    if k < len(p):
        out[: len(p) - k] = p[k:]
    return PhotonDistribution(out, dist.tail_tol)


def eps_resolvent_series(dist: PhotonDistribution, v: float,
                         k0: int) -> PhotonDistribution:
    """(E^k0 / (1 - v E)) p = sum_{l>=0} v^l E^(k0+l) p, exact on truncations.

    Evaluated by the backward recursion r[n] = p[n+k0] + v r[n+1].
    """
    if not 0.0 <= v <= 1.0:
        raise ValueError("need 0 <= v <= 1")
    if k0 < 0:
        raise ValueError("k0 must be non-negative")
    p = dist.probs
    size = len(p)
    shifted = np.zeros(size)
    if k0 < size:
        shifted[: size - k0] = p[k0:]
    out = np.empty(size)
    acc = 0.0
    for n in range(size - 1, -1, -1):
        acc = shifted[n] + v * acc
        out[n] = acc
    return PhotonDistribution(out, dist.tail_tol)


def e_semigroup(dist: PhotonDistribution, rt: float,
                v: float) -> PhotonDistribution:
    """exp(-rt (1 - v E)) p by uniformization: e^-rt sum_j (v rt)^j/j! E^j p."""
    if rt < 0:
        raise ValueError("rt must be non-negative")
    if not 0.0 <= v <= 1.0:
        raise ValueError("need 0 <= v <= 1")
    p = dist.probs
    size = len(p)
    lam = v * rt
    j_max = min(size - 1, poisson_cutoff(lam, SERIES_RTOL))
    w = poisson_pmf(lam, j_max)
    # exact when j_max hits the nilpotency bound size-1; otherwise the
    # dropped Poisson tail is below SERIES_RTOL of the total weight
    out = np.zeros(size)
    for j in range(j_max + 1):
        if w[j] == 0.0:
            continue
        out[: size - j] += w[j] * p[j:]
    out *= np.exp(-(1.0 - v) * rt)
    return PhotonDistribution(out, dist.tail_tol)

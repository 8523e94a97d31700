"""Counting statistics for the saturating (E) jump model.

Bright clicks occur at a photon-number-independent rate whenever the cavity
holds at least one photon; the no-count map additionally accumulates weight
in the vacuum slot.  Times are dimensionless products R*t throughout.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.special import gammaln

from .errors import UndefinedStatisticError
from .fock import PhotonDistribution, factorial_moment
from .kernels import (apply_eps_power, e_semigroup, eps_resolvent_series,
                      poisson_cutoff, poisson_pmf)
from .sdmodel import (CountStats, IdealizedDetector, WaitingTimeCurve,
                      _require, _windowed_mean)


@dataclass(frozen=True)
class EModelKernels:
    """Depletion sums Xi_1, Xi_2, Omega and the survival trace of P_t^0."""

    xi1: float
    xi2: float
    omega: float
    p0_surv: float


def e_nocount(dist: PhotonDistribution, det: IdealizedDetector,
              rt: float) -> PhotonDistribution:
    """No-count map: e^{-d rt} [P_t dist + vacuum slot restoration]."""
    _require(det, "e")
    if rt < 0:
        raise ValueError("rt must be non-negative")
    v = det.v
    pt = e_semigroup(dist, rt, v)
    w = eps_resolvent_series(dist, v, 0)
    ptw0 = float(e_semigroup(w, rt, v).probs[0])
    out = pt.probs.copy()
    out[0] += w.probs[0] - ptw0
    out *= np.exp(-det.d * rt)
    return PhotonDistribution(out, dist.tail_tol)


def e_kernels(dist: PhotonDistribution, rt: float) -> EModelKernels:
    """Xi_k and Omega from the series operators applied to P_t^0 dist.

    omega is nan when the second factorial moment of dist vanishes.
    """
    if rt < 0:
        raise ValueError("rt must be non-negative")
    nbar = dist.mean()
    if nbar <= 0.0:
        raise UndefinedStatisticError("Xi_k undefined for zero-mean state")
    u = e_semigroup(dist, rt, 1.0)
    xi1 = eps_resolvent_series(u, 1.0, 1).trace() / nbar
    xi2 = eps_resolvent_series(u, 1.0, 2).trace() / nbar
    n2f = factorial_moment(dist, 2)
    if n2f > 0.0:
        r1 = eps_resolvent_series(u, 1.0, 1)
        omega = 2.0 * eps_resolvent_series(r1, 1.0, 1).trace() / n2f
    else:
        omega = float("nan")
    return EModelKernels(xi1=xi1, xi2=xi2, omega=omega, p0_surv=u.trace())


def _poisson_cumulants(rt: float, n_top: int):
    """Cumulative sums cs_k[N] = sum_{j<N} j^k po_j(rt) for k = 0, 1, 2."""
    j_top = min(n_top, poisson_cutoff(rt, 1e-18))
    po = poisson_pmf(rt, j_top)
    j = np.arange(j_top + 1, dtype=float)
    def pad(c):
        out = np.zeros(n_top + 1)
        m = min(n_top, j_top + 1)
        out[1: m + 1] = c[:m]
        if n_top > j_top + 1:
            out[j_top + 2:] = c[-1]
        return out
    cs0 = pad(np.cumsum(po))
    cs1 = pad(np.cumsum(j * po))
    cs2 = pad(np.cumsum(j * j * po))
    return cs0, cs1, cs2


def _absorbed_moments(dist: PhotonDistribution, rt: float):
    """M1 = sum_N p_N E[min(J,N)] and the cancellation-safe combination
    X = n2f (1 - Omega) - 2 rt nbar Xi_2, with J ~ Poisson(rt).

    Small-t evaluation through 1 - Omega directly would lose t digits to
    cancellation; the per-component differences below are O(t) before any
    subtraction, so the t -> 0 limit of K_t is reachable at full precision.
    """
    p = dist.probs
    n_top = len(p) - 1
    N = np.arange(n_top + 1, dtype=float)
    cs0, cs1, cs2 = _poisson_cumulants(rt, n_top)
    e_min = cs1 + N * (1.0 - cs0)
    m1 = float(np.dot(p, e_min))
    f_n = N * (N - 1.0)
    g = (2.0 * N - 1.0) * cs1 - cs2 + f_n * (1.0 - cs0)
    z = np.maximum(N - 1.0, 0.0) * cs0 - cs1
    x = float(np.dot(p, g - 2.0 * rt * z))
    return m1, x


def e_moments(dist: PhotonDistribution, det: IdealizedDetector,
              rt: float) -> CountStats:
    """Count moments: mbar = d rt + eta nbar (1 - Xi_1) and the matching
    second factorial moment built from Xi_2 and Omega."""
    if rt < 0:
        raise ValueError("rt must be non-negative")
    m1, x = _absorbed_moments(dist, rt)
    drt = det.d * rt
    mbar = drt + det.eta * m1
    m2 = drt ** 2 + 2.0 * det.eta * drt * m1 + det.eta ** 2 * x
    k = m2 / mbar ** 2 if mbar > 0.0 else float("nan")
    return CountStats(rt=rt, mbar=mbar, m2fac=m2, k_t=k)


def e_count_distribution(dist: PhotonDistribution, det: IdealizedDetector,
                         rt: float, m_max: int | None = None) -> np.ndarray:
    """Probabilities of m = 0..m_max registered counts in (0, rt).

    The alternation of no-count stretches and jumps is, for diagonal states,
    a classical Markov process on (n, m) with constant bright rate while
    n > 0; it is propagated here by uniformization, which is exact up to the
    Poisson tail cutoff (the m-fold time-ordered operator integrals are
    numerically hostile at large m).
    """
    if rt < 0:
        raise ValueError("rt must be non-negative")
    if m_max is None:
        stats = e_moments(dist, det, rt)
        var = stats.mbar + max(stats.m2fac - stats.mbar ** 2, 0.0)
        m_max = max(int(np.ceil(stats.mbar + 12.0 * np.sqrt(var + 1.0) + 30.0)), 20)
        ceiling = dist.n_max + poisson_cutoff(det.d * rt, 1e-13)
        while True:
            pm = e_count_distribution(dist, det, rt, m_max)
            if dist.trace() - pm.sum() < 1e-10 or m_max >= ceiling:
                return pm
            m_max = min(2 * m_max, ceiling)
    p = dist.probs
    size = len(p)
    lam = 1.0 + det.d
    lt = lam * rt
    k_steps = poisson_cutoff(lt, 1e-18)
    po = poisson_pmf(lt, k_steps)
    x = np.zeros((size, m_max + 2))
    x[:, 0] = p
    acc = po[0] * x
    eta_l = det.eta / lam
    v_l = det.v / lam
    d_l = det.d / lam
    stay0 = 1.0 - det.d / lam           # n = 0 row keeps its bright share
    stay = 1.0 - (1.0 + det.d) / lam
    for k in range(1, k_steps + 1):
        y = np.empty_like(x)
        y[0] = stay0 * x[0]
        y[1:] = stay * x[1:]
        y[:-1, 1:] += eta_l * x[1:, :-1]
        y[:-1, :] += v_l * x[1:, :]
        y[:, 1:] += d_l * x[:, :-1]
        y[:, -1] += d_l * x[:, -1]      # overflow sink retains mass
        y[:-1, -1] += eta_l * x[1:, -1]
        x = y
        if po[k] > 0.0:
            acc += po[k] * x
    pm = acc.sum(axis=0)
    return pm[: m_max + 1]


def e_count_prob(dist: PhotonDistribution, det: IdealizedDetector,
                 rt: float, m: int) -> float:
    """Probability of exactly m registered counts in (0, rt)."""
    if m < 0:
        raise ValueError("m must be non-negative")
    return float(e_count_distribution(dist, det, rt, m_max=m)[m])


def _pt_weight_matrix(taus, v):
    """Weights w_j(tau) with P_tau = sum_j w_j(tau) E^j, j rows, tau cols."""
    lam = v * taus
    j_max = poisson_cutoff(float(lam.max(initial=0.0)), 1e-18)
    j = np.arange(j_max + 1, dtype=float)
    with np.errstate(divide="ignore", invalid="ignore"):
        ln = j[:, None] * np.log(np.where(lam > 0, lam, 1.0))[None, :]
    pm = np.exp(ln - lam[None, :] - gammaln(j + 1)[:, None])
    pm[:, lam == 0.0] = 0.0
    pm[0, lam == 0.0] = 1.0
    return pm * np.exp(-(1.0 - v) * taus)[None, :]


def e_wt_curve(dist: PhotonDistribution, det: IdealizedDetector,
               rt_first: float, tau_grid: np.ndarray | None = None,
               theta: float | None = None) -> WaitingTimeCurve:
    """Non-normalized waiting-time density for the E model.

    All traces reduce to Poisson-weighted contractions of suffix sums of
    J P_t^0 dist, so each tau costs O(j_max) after one state preparation.
    """
    _require(det, "e")
    if theta is None:
        if det.eta == 0.0:
            raise ValueError("theta required when eta = 0")
        theta = 10.0 / det.eta
    if theta <= 0:
        raise ValueError("theta must be positive")
    u = e_semigroup(dist, rt_first, 1.0)            # P_t^0 dist
    rho1 = det.eta * apply_eps_power(u, 1).probs + det.d * u.probs
    w_res = eps_resolvent_series(PhotonDistribution(rho1), det.v, 0).probs
    suffix = np.cumsum(rho1[::-1])[::-1]            # S_j = sum_{n>=j} rho1_n
    term0 = det.d ** 2 * (dist.trace() - u.trace())

    def values(taus):
        pm = _pt_weight_matrix(taus, det.v)
        rows = min(pm.shape[0], len(rho1))   # E^j annihilates beyond n_max
        pv = pm[:rows]
        tr = suffix[:rows] @ pv
        slot0 = rho1[:rows] @ pv
        ptw0 = w_res[:rows] @ pv
        t1 = det.eta * (tr - slot0) + det.d * tr
        t2 = det.d * (w_res[0] - ptw0)
        return np.exp(-det.d * taus) * (term0 + t1 + t2)

    if tau_grid is not None:
        taus = np.asarray(tau_grid, dtype=float)
        w = values(taus)
        norm, mean_wt = _windowed_mean(taus, w)
        return WaitingTimeCurve(rt_first, taus, w, theta, norm, mean_wt)
    m = 512
    prev = None
    while True:
        taus = np.linspace(0.0, theta, m + 1)
        w = values(taus)
        norm, mean_wt = _windowed_mean(taus, w)
        if prev is not None and (norm == 0.0 or (np.isfinite(mean_wt)
                                 and abs(mean_wt - prev) <= 1e-4 * abs(mean_wt))):
            return WaitingTimeCurve(rt_first, taus, w, theta, norm, mean_wt)
        if m >= 1 << 17:
            return WaitingTimeCurve(rt_first, taus, w, theta, norm, mean_wt)
        prev = mean_wt
        m *= 2


def e_ncav(dist: PhotonDistribution, rt: float) -> float:
    """Mean cavity photon number nbar Xi_1(rt) under unconditioned evolution."""
    if rt < 0:
        raise ValueError("rt must be non-negative")
    m1, _ = _absorbed_moments(dist, rt)
    return dist.mean() - m1

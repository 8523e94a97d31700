"""Counting statistics for the absorption-proportional (SD) jump model.

The jump superoperator removes a photon at a rate proportional to the photon
number, thinned by the quantum efficiency eta, on top of a state-independent
dark-click rate d (both in units of the ideal counting rate R).  All times
are the dimensionless product R*t.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.special import gammaln

from .fock import PhotonDistribution, factorial_moment
from .kernels import poisson_pmf

_VARIANTS = ("sd", "e")


@dataclass(frozen=True)
class IdealizedDetector:
    """Phenomenological counting model: variant, rate, efficiency, dark ratio.

    `r` (Hz) is carried as metadata only; every computation works in the
    dimensionless time R*t.
    """

    variant: str
    eta: float
    d: float
    r: float = 1.0

    def __post_init__(self):
        if self.variant not in _VARIANTS:
            raise ValueError(f"variant must be one of {_VARIANTS}")
        if not 0.0 <= self.eta <= 1.0:
            raise ValueError("eta must lie in [0, 1]")
        if self.d < 0.0:
            raise ValueError("d must be non-negative")
        if self.r <= 0.0:
            raise ValueError("r must be positive")

    @property
    def v(self) -> float:
        return 1.0 - self.eta


@dataclass(frozen=True)
class CountStats:
    """First two factorial moments of the count number at time rt."""

    rt: float
    mbar: float
    m2fac: float
    k_t: float   # m2fac / mbar^2, nan when mbar == 0


@dataclass(frozen=True)
class WtKernels:
    """State sums entering the SD waiting-time density."""

    phi0: float
    phi1: float
    phi2: float


@dataclass(frozen=True)
class WaitingTimeCurve:
    """Sampled non-normalized waiting-time density after a click at time t."""

    t: float
    taus: np.ndarray
    w: np.ndarray
    theta: float
    norm: float
    mean_wt: float


def _require(det: IdealizedDetector, variant: str):
    if det.variant != variant:
        raise ValueError(f"detector variant must be '{variant}'")


def _nocount_series(p, v_phi, rt):
    """Recursion w_l[n] = c (n+1) w_{l-1}[n+1]/l with the survival factor
    e^{-n rt} folded in; each term is bounded by
    (e^{-rt} + v phi)^(n+l) p_{n+l} <= p_{n+l}, so nothing overflows.
    Requires n_max * rt small enough that no starting term underflows."""
    size = len(p)
    c = v_phi * np.exp(rt) if size > 1 else 0.0
    w = p * np.exp(-rt * np.arange(size))
    acc = w.copy()
    for l in range(1, size):
        w = c * np.arange(1, len(w)) * w[1:] / l
        if not w.size or not w.any():
            break
        acc[: len(w)] += w
    return acc


def _nocount_log(p, v_phi, rt):
    """Same series with every term exponentiated from exact logs, for deep
    truncations where e^{-n rt} underflows before the series re-amplifies."""
    n_max = len(p) - 1
    lgm = gammaln(np.arange(n_max + 2))
    with np.errstate(divide="ignore"):
        lp = np.log(p)
    ln_vp = np.log(v_phi)
    out = np.zeros(n_max + 1)
    ls = np.arange(n_max + 1)
    for n0 in range(0, n_max + 1, 256):
        ns = np.arange(n0, min(n_max, n0 + 255) + 1)
        idx = ns[:, None] + ls[None, :]
        valid = idx <= n_max
        idc = np.minimum(idx, n_max)
        ln_t = (lp[idc] + lgm[idc + 1] - lgm[ns + 1][:, None]
                - lgm[ls + 1][None, :] + ls[None, :] * ln_vp
                - rt * ns[:, None].astype(float))
        out[ns] = np.where(valid, np.exp(np.where(valid, ln_t, -np.inf)),
                           0.0).sum(axis=1)
    return out


def sd_nocount(dist: PhotonDistribution, det: IdealizedDetector,
               rt: float) -> PhotonDistribution:
    """No-count evolution e^{-d rt} E_t exp(v phi_t A) applied to dist."""
    _require(det, "sd")
    if rt < 0:
        raise ValueError("rt must be non-negative")
    p = dist.probs
    phi = -np.expm1(-rt)
    v_phi = det.v * phi
    if v_phi == 0.0:
        acc = p * np.exp(-rt * np.arange(len(p)))
    elif dist.n_max * rt < 600.0:
        acc = _nocount_series(p, v_phi, rt)
    else:
        acc = _nocount_log(p, v_phi, rt)
    acc = acc * np.exp(-det.d * rt)
    return PhotonDistribution(acc, dist.tail_tol)


def _bright_weights(dist: PhotonDistribution, eta: float, rt: float,
                    j_cap: int) -> np.ndarray:
    """s_j = Tr[S_t (eta phi A)^j/j! dist] with the e^{-d rt} factor left out.

    Per Fock component N the weight is the binomial law
    C(N,j) (eta phi)^j a^(N-j) with a = v + eta e^{-rt}; evaluated in the
    log domain so that deep thermal truncations cannot underflow.
    """
    p = dist.probs
    n_max = len(p) - 1
    phi = -np.expm1(-rt)
    a = (1.0 - eta) + eta * np.exp(-rt)
    j_cap = min(j_cap, n_max)
    s = np.zeros(j_cap + 1)
    if eta * phi == 0.0:
        s[0] = float(np.dot(p, a ** np.arange(n_max + 1)))
        return s
    lgm = gammaln(np.arange(n_max + 2))
    ln_ep = np.log(eta * phi)
    ln_a = np.log(a) if a > 0.0 else -np.inf
    with np.errstate(divide="ignore"):
        lp = np.log(p)
    N = np.arange(n_max + 1)
    mass = dist.trace()
    got = 0.0
    for j0 in range(0, j_cap + 1, 512):
        js = np.arange(j0, min(j_cap, j0 + 511) + 1)
        D = N[:, None] - js[None, :]
        valid = D >= 0
        Dc = np.maximum(D, 0)
        ln_t = (lp[:, None] + lgm[N + 1][:, None] - lgm[js + 1][None, :]
                - lgm[Dc + 1] + js[None, :] * ln_ep + Dc * ln_a)
        s[js] = np.where(valid, np.exp(np.where(valid, ln_t, -np.inf)), 0.0).sum(axis=0)
        got += s[js].sum()
        if mass - got < 1e-14:
            break
    return s


def _auto_m_max(dist: PhotonDistribution, det: IdealizedDetector,
                rt: float) -> int:
    nbar = dist.mean()
    n2f = factorial_moment(dist, 2)
    mean = det.d * rt + det.eta * nbar
    var = mean + det.eta ** 2 * max(n2f - nbar * nbar, 0.0)
    return max(int(np.ceil(mean + 12.0 * np.sqrt(var + 1.0) + 30.0)), 20)


def _m_max_ceiling(dist: PhotonDistribution, det: IdealizedDetector,
                   rt: float) -> int:
    from .kernels import poisson_cutoff
    return dist.n_max + poisson_cutoff(det.d * rt, 1e-13)


def sd_count_distribution(dist: PhotonDistribution, det: IdealizedDetector,
                          rt: float, m_max: int | None = None) -> np.ndarray:
    """Probabilities of m = 0..m_max registered counts in (0, rt).

    Expands the m-count superoperator S_t (d R t + eta phi_t A)^m / m!
    over the bright power j; the dark part is the independent Poisson(d rt)
    factor, applied by discrete convolution.  With m_max omitted the range
    grows until the retained probability reaches the state mass to 1e-10.
    """
    if rt < 0:
        raise ValueError("rt must be non-negative")
    if m_max is None:
        m_max = _auto_m_max(dist, det, rt)
        ceiling = _m_max_ceiling(dist, det, rt)
        while True:
            pm = sd_count_distribution(dist, det, rt, m_max)
            if dist.trace() - pm.sum() < 1e-10 or m_max >= ceiling:
                return pm
            m_max = min(2 * m_max, ceiling)
    s = _bright_weights(dist, det.eta, rt, m_max)
    po = poisson_pmf(det.d * rt, m_max)
    return np.convolve(s, po)[: m_max + 1]


def sd_count_prob(dist: PhotonDistribution, det: IdealizedDetector,
                  rt: float, m: int) -> float:
    """Probability of exactly m registered counts in (0, rt)."""
    if m < 0:
        raise ValueError("m must be non-negative")
    return float(sd_count_distribution(dist, det, rt, m_max=m)[m])


def sd_moments(dist: PhotonDistribution, det: IdealizedDetector,
               rt: float) -> CountStats:
    """Closed-form mean and second factorial moment of the count number."""
    if rt < 0:
        raise ValueError("rt must be non-negative")
    phi = -np.expm1(-rt)
    nbar = dist.mean()
    n2f = factorial_moment(dist, 2)
    drt = det.d * rt
    mbar = drt + det.eta * nbar * phi
    m2 = drt ** 2 + 2.0 * det.eta * nbar * drt * phi + (det.eta * phi) ** 2 * n2f
    k = m2 / mbar ** 2 if mbar > 0.0 else float("nan")
    return CountStats(rt=rt, mbar=mbar, m2fac=m2, k_t=k)


def sd_wt_kernels(dist: PhotonDistribution, det: IdealizedDetector,
                  rt: float, tau: float) -> WtKernels:
    """Phi_k = sum_{n>=k} p_n n!/(n-k)! (1 - eta phi_tau e^{-rt})^(n-k)."""
    z = 1.0 - det.eta * (-np.expm1(-tau)) * np.exp(-rt)
    p = dist.probs
    n = np.arange(len(p), dtype=float)
    pw = np.power(z, n)
    phi0 = float(np.dot(p, pw))
    phi1 = float(np.dot(p[1:], n[1:] * pw[:-1]))
    phi2 = float(np.dot(p[2:], n[2:] * (n[2:] - 1.0) * pw[:-2]))
    return WtKernels(phi0=phi0, phi1=phi1, phi2=phi2)


def _wt_values(dist, det, rt, taus):
    p = dist.probs
    size = len(p)
    n = np.arange(size, dtype=float)
    eta, d = det.eta, det.d
    w = np.empty(len(taus))
    e_t = np.exp(-rt)
    for i0 in range(0, len(taus), 256):
        ts = taus[i0: i0 + 256]
        z = 1.0 - eta * (-np.expm1(-ts)) * e_t          # in [0, 1]
        pw = np.power(z[None, :], n[:, None])           # z^n, underflows to 0
        phi0 = p @ pw
        phi1 = (p[1:] * n[1:]) @ pw[:-1]
        phi2 = (p[2:] * n[2:] * (n[2:] - 1.0)) @ pw[:-2]
        w[i0: i0 + len(ts)] = np.exp(-d * ts) * (
            eta ** 2 * np.exp(-(2.0 * rt + ts)) * phi2
            + eta * d * e_t * (1.0 + np.exp(-ts)) * phi1
            + d ** 2 * phi0
        )
    return w


def _windowed_mean(taus, w):
    norm = float(np.trapezoid(w, taus))
    if norm <= 0.0:
        return norm, float("nan")
    return norm, float(np.trapezoid(w * taus, taus) / norm)


def sd_wt_curve(dist: PhotonDistribution, det: IdealizedDetector,
                rt_first: float, tau_grid: np.ndarray | None = None,
                theta: float | None = None) -> WaitingTimeCurve:
    """Non-normalized waiting-time density W_t(tau) over a window theta.

    With no grid given, a uniform grid is refined by doubling until the
    windowed mean waiting time changes by less than 1e-4 relative.
    """
    _require(det, "sd")
    if theta is None:
        if det.eta == 0.0:
            raise ValueError("theta required when eta = 0")
        theta = 10.0 / det.eta
    if theta <= 0:
        raise ValueError("theta must be positive")
    if tau_grid is not None:
        taus = np.asarray(tau_grid, dtype=float)
        w = _wt_values(dist, det, rt_first, taus)
        norm, mean_wt = _windowed_mean(taus, w)
        return WaitingTimeCurve(rt_first, taus, w, theta, norm, mean_wt)
    m = 512
    prev = None
    while True:
        taus = np.linspace(0.0, theta, m + 1)
        w = _wt_values(dist, det, rt_first, taus)
        norm, mean_wt = _windowed_mean(taus, w)
        if prev is not None:
            if norm == 0.0 or (np.isfinite(mean_wt) and abs(mean_wt - prev) <= 1e-4 * abs(mean_wt)):
                return WaitingTimeCurve(rt_first, taus, w, theta, norm, mean_wt)
        if m >= 1 << 17:
            return WaitingTimeCurve(rt_first, taus, w, theta, norm, mean_wt)
        prev = mean_wt
        m *= 2


def sd_ncav(dist: PhotonDistribution, rt: float) -> float:
    """Mean cavity photon number under unconditioned evolution: nbar e^{-rt}."""
    if rt < 0:
        raise ValueError("rt must be non-negative")
    return dist.mean() * np.exp(-rt)

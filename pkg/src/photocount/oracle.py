"""Independent verification engines for the counting models.

Two routes that share no code with the closed forms:

* exact propagation of the equivalent classical jump process on the joint
  (photon number, registered count) lattice by uniformization, and
* seeded Monte Carlo trajectory sampling with counter-based streams.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from numba import njit

from .errors import InsufficientStatisticsError, TruncationError
from .fock import PhotonDistribution
from .kernels import poisson_pmf
from .sdmodel import IdealizedDetector

_BATCH = 1 << 14
_WT_BIN = 0.05


@dataclass(frozen=True)
class JointState:
    """Joint law p[n, m] of photon number and registered count."""

    p: np.ndarray
    n_max: int
    m_max: int

    def count_marginal(self) -> np.ndarray:
        return self.p[:, : self.m_max + 1].sum(axis=0)

    def total_mass(self) -> float:
        return float(self.p.sum())


@dataclass(frozen=True)
class ClickRecord:
    """Click times (ascending, R*t units) and kinds for one trajectory."""

    times: np.ndarray
    kinds: tuple
    seed: int


@njit(cache=True)
def _uniform_steps(x, acc, po, stay, reg, unreg, dl, n_steps, m_start, has_sink):
    """Accumulate acc += po[k] P^k x for the embedded DTMC of the joint chain.

    x has shape (U+1, W); one transition moves (n, m) -> (n-1, m+1) with
    weight reg[n-1], -> (n-1, m) with unreg[n-1], -> (n, m+1) with dl, and
    stays with stay[n].  The live upper photon support shrinks as top rows
    drain; the count window grows by at most one column per step.
    """
    W = x.shape[1]
    y = np.zeros_like(x)
    u = x.shape[0] - 1
    for k in range(1, n_steps + 1):
        mw = m_start + k + 1
        if mw > W:
            mw = W
        for n in range(u + 1):
            xr = x[n]
            yr = y[n]
            st = stay[n]
            if n < u:
                xr1 = x[n + 1]
                e = reg[n]
                v = unreg[n]
                yr[0] = st * xr[0] + v * xr1[0]
                for m in range(1, mw):
                    yr[m] = st * xr[m] + e * xr1[m - 1] + v * xr1[m] + dl * xr[m - 1]
                if has_sink and mw == W:
                    # sink column absorbs every further count increment
                    yr[W - 1] += dl * xr[W - 1] + e * xr1[W - 1]
            else:
                yr[0] = st * xr[0]
                for m in range(1, mw):
                    yr[m] = st * xr[m] + dl * xr[m - 1]
                if has_sink and mw == W:
                    yr[W - 1] += dl * xr[W - 1]
        w = po[k]
        for n in range(u + 1):
            for m in range(mw):
                x[n, m] = y[n, m]
                acc[n, m] += w * y[n, m]
            for m in range(mw, W):
                x[n, m] = 0.0
        if k % 8 == 0:
            while u > 0:
                rmax = 0.0
                for m in range(W):
                    if x[u, m] > rmax:
                        rmax = x[u, m]
                if rmax < 1e-18:
                    for m in range(W):
                        x[u, m] = 0.0
                    u -= 1
                else:
                    break
    return u


def _propagate_joint(dist: PhotonDistribution, det: IdealizedDetector,
                     rt: float, m_max: int) -> JointState:
    """Uniformization of the joint generator, segmented so the rate constant
    tracks the live photon support (a fixed constant R*(n_max + d) makes the
    step count scale with n_max * rt; support-adaptive segmenting is exact
    and brings it down to O(n_max))."""
    sd = det.variant == "sd"
    P = np.zeros((len(dist.probs), m_max + 2))
    P[:, 0] = dist.probs
    U = len(dist.probs) - 1
    while U > 0 and P[U, 0] == 0.0:
        U -= 1
    M = 0
    remaining = rt
    while remaining > 1e-12:
        lam = (float(U) if sd else (1.0 if U > 0 else 0.0)) + det.d
        if lam <= 0.0:
            break
        dt = min(remaining, max(0.5, 32.0 / lam))
        lt = lam * dt
        k_steps = int(np.ceil(lt + 9.0 * np.sqrt(lt + 1.0) + 30.0))
        po = poisson_pmf(lt, k_steps)
        width = int(min(M + k_steps + 2, m_max + 2))
        x = np.ascontiguousarray(P[: U + 1, :width])
        acc = po[0] * x
        rates = np.arange(1, U + 1, dtype=float) if sd else np.ones(U)
        stay = 1.0 - (np.concatenate(([0.0], rates)) + det.d) / lam
        _uniform_steps(x, acc, po, stay, det.eta * rates / lam,
                       det.v * rates / lam, det.d / lam, k_steps, M,
                       width == m_max + 2)
        P[: U + 1, :width] = acc
        u2 = U
        while u2 > 0 and P[u2].max() < 1e-17:
            u2 -= 1
        if u2 < U:
            P[u2 + 1: U + 1] = 0.0
        U = u2
        colmass = P[: U + 1].sum(axis=0)
        nz = np.nonzero(colmass > 1e-18)[0]
        M = int(nz[-1]) if len(nz) else 0
        remaining -= dt
    return JointState(p=P, n_max=len(dist.probs) - 1, m_max=m_max)


def markov_counts(dist: PhotonDistribution, det: IdealizedDetector,
                  rt: float, m_max: int | None = None) -> np.ndarray:
    """Exact count marginal p(m) by uniformization of the joint chain.

    An explicit m_max that would strand more than 1e-10 probability in the
    overflow sink raises TruncationError with a workable suggestion.
    """
    if rt < 0:
        raise ValueError("rt must be non-negative")
    auto = m_max is None
    if auto:
        n = np.arange(len(dist.probs), dtype=float)
        nbar = float(np.dot(n, dist.probs))
        n2 = float(np.dot(n * n, dist.probs))
        mean = det.d * rt + det.eta * nbar
        var = mean + det.eta ** 2 * max(n2 - nbar * nbar, 0.0)
        m_max = max(int(np.ceil(mean + 12.0 * np.sqrt(var + 1.0) + 40.0)), 20)
    while True:
        joint = _propagate_joint(dist, det, rt, m_max)
        sink = float(joint.p[:, m_max + 1].sum())
        if sink <= 1e-10:
            return joint.count_marginal()
        suggestion = 2 * m_max + 32
        if not auto:
            raise TruncationError(
                f"m_max={m_max} leaves {sink:.2e} probability uncounted; "
                f"try m_max >= {suggestion}", required=suggestion)
        m_max = suggestion


def markov_joint(dist: PhotonDistribution, det: IdealizedDetector,
                 rt: float, m_max: int) -> JointState:
    """Joint (n, m) law; exposed for mass-conservation checks."""
    if rt < 0:
        raise ValueError("rt must be non-negative")
    return _propagate_joint(dist, det, rt, m_max)


def _batch_rng(seed: int, batch: int) -> np.random.Generator:
    key = np.array([seed & 0xFFFFFFFFFFFFFFFF, batch], dtype=np.uint64)
    return np.random.Generator(np.random.Philox(key=key))


def _simulate_batch(rng, probs, variant, eta, d, horizon, size, collect_times):
    """One batch of trajectories; returns (bright counts, dark counts,
    optional (traj, time, is_dark) click arrays sorted per trajectory)."""
    n0 = rng.choice(len(probs), size=size, p=probs)
    order = np.argsort(-n0, kind="stable")
    n0s = n0[order]
    t = np.zeros(size)
    brights = np.zeros(size, dtype=np.int64)
    rec_traj = []
    rec_time = []
    max_n = int(n0s[0]) if size else 0
    for j in range(max_n):
        k = int(np.searchsorted(-n0s, -j, side="left"))   # count of n0 > j
        if k == 0:
            break
        rate = (n0s[:k] - j).astype(float) if variant == "sd" else 1.0
        t[:k] += rng.exponential(1.0, k) / rate
        occurred = t[:k] <= horizon
        registered = occurred & (rng.random(k) < eta)
        brights[:k] += registered
        if collect_times and registered.any():
            idx = np.nonzero(registered)[0]
            rec_traj.append(order[idx])
            rec_time.append(t[idx])
    darks = rng.poisson(d * horizon, size)
    dark_traj = np.repeat(np.arange(size), darks)
    dark_time = rng.random(int(darks.sum())) * horizon
    counts_b = np.zeros(size, dtype=np.int64)
    counts_b[order] = brights
    if not collect_times:
        return counts_b, darks, None
    if rec_traj:
        bt = np.concatenate(rec_traj)
        bx = np.concatenate(rec_time)
    else:
        bt = np.empty(0, dtype=np.int64)
        bx = np.empty(0)
    traj = np.concatenate([bt, dark_traj])
    tim = np.concatenate([bx, dark_time])
    kind = np.concatenate([np.zeros(len(bt), bool), np.ones(len(dark_traj), bool)])
    srt = np.lexsort((tim, traj))
    return counts_b, darks, (traj[srt], tim[srt], kind[srt])


def mc_trajectories(dist: PhotonDistribution, det: IdealizedDetector,
                    rt: float, n_traj: int, seed: int):
    """Count histogram over n_traj trajectories plus one sample ClickRecord.

    Streams are counter-based (Philox keyed by (seed, batch)), so results
    are bit-identical for a given seed regardless of how calls interleave.
    """
    if n_traj < 1:
        raise ValueError("n_traj must be >= 1")
    probs = dist.probs / dist.trace()
    hist = np.zeros(1, dtype=np.int64)
    sample = None
    done = 0
    batch_idx = 0
    while done < n_traj:
        size = min(_BATCH, n_traj - done)
        rng = _batch_rng(seed, batch_idx)
        cb, cd, clicks = _simulate_batch(rng, probs, det.variant, det.eta,
                                         det.d, rt, size,
                                         collect_times=(sample is None))
        tot = cb + cd
        top = int(tot.max(initial=0))
        if top + 1 > len(hist):
            hist = np.concatenate([hist, np.zeros(top + 1 - len(hist), dtype=np.int64)])
        hist += np.bincount(tot, minlength=len(hist))
        if sample is None and clicks is not None:
            traj, tim, kind = clicks
            if len(traj):
                first = traj[0]
                sel = traj == first
                sample = ClickRecord(
                    times=tim[sel],
                    kinds=tuple("dark" if k else "bright" for k in kind[sel]),
                    seed=seed)
        done += size
        batch_idx += 1
    if sample is None:
        sample = ClickRecord(times=np.empty(0), kinds=(), seed=seed)
    return hist, sample


def mc_wt_delays(dist: PhotonDistribution, det: IdealizedDetector,
                 rt_first: float, theta: float, n_traj: int, seed: int,
                 bin_width: float = _WT_BIN) -> np.ndarray:
    """Delays to the next click after a click in the bin around rt_first.

    Delays exceeding theta are discarded, matching the windowed average.
    """
    probs = dist.probs / dist.trace()
    horizon = rt_first + theta * 1.05 + bin_width
    out = []
    done = 0
    batch_idx = 0
    while done < n_traj:
        size = min(_BATCH, n_traj - done)
        rng = _batch_rng(seed, batch_idx)
        _, _, clicks = _simulate_batch(rng, probs, det.variant, det.eta,
                                       det.d, horizon, size, collect_times=True)
        traj, tim, _ = clicks
        if len(traj):
            starts = np.nonzero(np.diff(traj, prepend=-1))[0]
            pos = np.arange(len(tim))
            inbin = np.abs(tim - rt_first) <= bin_width / 2.0
            cand = np.where(inbin, pos, len(tim))
            first = np.minimum.reduceat(cand, starts)
            ends = np.append(starts[1:], len(tim))
            ok = (first < ends - 1)  # in-bin click with a successor
            fi = first[ok]
            delays = tim[fi + 1] - tim[fi]
            out.append(delays[delays <= theta])
        done += size
        batch_idx += 1
    return np.concatenate(out) if out else np.empty(0)


def mc_waiting_time(dist: PhotonDistribution, det: IdealizedDetector,
                    rt_first: float, theta: float, n_traj: int,
                    seed: int) -> tuple[float, float]:
    """Monte Carlo estimate (mean, standard error) of the windowed mean WT."""
    if theta <= 0:
        raise ValueError("theta must be positive")
    delays = mc_wt_delays(dist, det, rt_first, theta, n_traj, seed)
    if len(delays) == 0:
        raise InsufficientStatisticsError(
            "no click pairs accepted; increase n_traj or the window")
    mean = float(delays.mean())
    stderr = float(delays.std(ddof=1) / np.sqrt(len(delays))) if len(delays) > 1 else float("inf")
    return mean, stderr

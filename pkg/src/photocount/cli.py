"""Command-line surface: figure data export, verification, defaults.

Subcommands: qjs-table, snr-scan, brightness, counts, wt, verify, defaults.
Every data command writes a CSV plus a `.meta` sidecar holding the full flat
configuration (enough to re-run identically) and any fitted quantities.
Exit codes: 0 success, 1 validation error, 2 numerical failure,
3 verification failure.
"""

from __future__ import annotations

import argparse
import os
import sys
import tempfile
from dataclasses import dataclass, fields

import numpy as np

from . import emodel, fock, microdetector, oracle, sdmodel
from .errors import PhotocountError, PlateauUndefinedError, QuadratureError, TruncationError

OUT_DIR_ENV = "PHOTOCOUNT_OUT_DIR"

# reference operating point: resonant 500 nm sensor, g = 1e11 Hz,
# averaging product 5e5, reservoir excitation 1e-11, bias ratio 380,
# quantum efficiency 0.6, dark ratio 5e-3
DEFAULTS = {
    "lambda0_nm": 500.0,
    "g": 1e11,
    "upsilon": 5e5,
    "nbar_det": 1e-11,
    "b": 380.0,
    "lambda_nm": 500.0,
    "state": "coherent",
    "nbar": 50.0,
    "n_max": 0,            # 0 = automatic truncation
    "tail_tol": 1e-12,
    "eta": 0.6,
    "d": 5e-3,
    "n_table_max": 50,
    "b_min": 20.0,
    "b_max": 2400.0,
    "b_steps": 25,
    "b_scale": "log",
    "lambda_min_nm": 300.0,
    "lambda_max_nm": 2000.0,
    "lambda_steps": 35,
    "rt_max": 20.0,
    "rt_steps": 81,
    "theta": 0.0,          # 0 = default window 10/eta
    "seed": 12345,
    "threads": 1,
    "out": "out.csv",
    "format": "csv",
}

_TYPES = {k: type(v) for k, v in DEFAULTS.items()}


@dataclass(frozen=True)
class RunConfig:
    lambda0_nm: float
    g: float
    upsilon: float
    nbar_det: float
    b: float
    lambda_nm: float
    state: str
    nbar: float
    n_max: int
    tail_tol: float
    eta: float
    d: float
    n_table_max: int
    b_min: float
    b_max: float
    b_steps: int
    b_scale: str
    lambda_min_nm: float
    lambda_max_nm: float
    lambda_steps: int
    rt_max: float
    rt_steps: int
    theta: float
    seed: int
    threads: int
    out: str
    format: str

    def __post_init__(self):
        if self.state not in ("coherent", "number", "thermal"):
            raise ValueError("state must be coherent, number or thermal")
        if self.b_scale not in ("linear", "log"):
            raise ValueError("b_scale must be linear or log")
        if self.format != "csv":
            raise ValueError("only csv output is supported")

    def detector_params(self) -> microdetector.DetectorParams:
        return microdetector.DetectorParams(
            lambda0_nm=self.lambda0_nm, g=self.g, b=self.b,
            nbar_det=self.nbar_det, upsilon=self.upsilon)

    def field_mode(self) -> microdetector.FieldMode:
        return microdetector.FieldMode(self.lambda_nm)

    def field_state(self) -> fock.PhotonDistribution:
        n_max = self.n_max if self.n_max > 0 else None
        if self.state == "number":
            n = int(round(self.nbar))
            return fock.make_number(n, n_max if n_max else max(n, 1))
        if self.state == "coherent":
            return fock.make_coherent(self.nbar, n_max, self.tail_tol)
        return fock.make_thermal(self.nbar, n_max, self.tail_tol)

    def idealized(self, variant: str) -> sdmodel.IdealizedDetector:
        return sdmodel.IdealizedDetector(variant=variant, eta=self.eta, d=self.d)

    def wt_theta(self) -> float:
        if self.theta > 0:
            return self.theta
        if self.eta == 0:
            raise ValueError("theta must be set explicitly when eta = 0")
        return 10.0 / self.eta


def config_from_sources(config_path: str | None, overrides: dict) -> RunConfig:
    values = dict(DEFAULTS)
    if config_path:
        for line in open(config_path, encoding="utf-8"):
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            if "=" not in line:
                raise ValueError(f"bad config line: {line!r}")
            key, _, raw = line.partition("=")
            key = key.strip()
            if key not in _TYPES:
                raise ValueError(f"unknown config key: {key!r}")
            values[key] = _TYPES[key](raw.strip())
    for key, raw in overrides.items():
        if raw is None:
            continue
        if key not in _TYPES:
            raise ValueError(f"unknown config key: {key!r}")
        values[key] = _TYPES[key](raw)
    return RunConfig(**values)


def _resolve_out(cfg: RunConfig) -> str:
    out = cfg.out
    base = os.environ.get(OUT_DIR_ENV)
    if base and not os.path.isabs(out):
        out = os.path.join(base, out)
    return out


def _atomic_write(path: str, text: str):
    directory = os.path.dirname(os.path.abspath(path))
    os.makedirs(directory, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=directory, suffix=".tmp")
    try:
        with os.fdopen(fd, "w", encoding="utf-8") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _write_outputs(cfg: RunConfig, header: list, rows, extra_meta: dict):
    out = _resolve_out(cfg)
    lines = [",".join(header)]
    for row in rows:
        lines.append(",".join(_fmt(x) for x in row))
    _atomic_write(out, "\n".join(lines) + "\n")
    meta_path = os.path.splitext(out)[0] + ".meta"
    meta = {f.name: getattr(cfg, f.name) for f in fields(cfg)}
    meta.update(extra_meta)
    _atomic_write(meta_path,
                  "\n".join(f"{k}={_fmt(v)}" for k, v in meta.items()) + "\n")
    return out


def _fmt(x) -> str:
    if x is None:
        return "none"
    if isinstance(x, np.floating):
        x = float(x)
    elif isinstance(x, np.integer):
        x = int(x)
    if isinstance(x, float):
        return repr(x)
    return str(x)


def cmd_qjs_table(cfg: RunConfig) -> int:
    if cfg.n_table_max < 2:
        raise ValueError("n_table_max must be at least 2")
    table = microdetector.qjs_table(cfg.detector_params(), cfg.field_mode(),
                                    cfg.n_table_max)
    rows = []
    for n in table.n_range:
        jb = table.jb[n]
        rows.append((int(n), jb, jb / table.rb if n >= 1 else float("nan"),
                     table.jd[n], table.jd[n] / table.rd if table.rd > 0 else float("nan"),
                     table.je[n]))
    out = _write_outputs(cfg, ["n", "jb", "jb_norm", "jd", "jd_norm", "je"],
                         rows, {"beta_fit": table.beta_fit,
                                "xi_fit": table.xi_fit, "rb": table.rb,
                                "rd": table.rd, "snr": table.snr})
    print(f"wrote {out} (beta={table.beta_fit:.4f}, xi={table.xi_fit:.4f})")
    return 0


def cmd_snr_scan(cfg: RunConfig) -> int:
    if cfg.b_scale == "log":
        grid = np.geomspace(cfg.b_min, cfg.b_max, cfg.b_steps)
    else:
        grid = np.linspace(cfg.b_min, cfg.b_max, cfg.b_steps)
    scan = microdetector.snr_scan(cfg.detector_params(), cfg.field_mode(),
                                  grid, threads=cfg.threads)
    out = _write_outputs(cfg, ["b", "rb", "rd", "snr"], scan.points,
                         {"b_breakdown": scan.b_breakdown,
                          "plateau": scan.plateau})
    print(f"wrote {out} (b_breakdown={scan.b_breakdown}, "
          f"plateau={scan.plateau:.6g})")
    return 0


def cmd_brightness(cfg: RunConfig) -> int:
    grid = np.linspace(cfg.lambda_min_nm, cfg.lambda_max_nm, cfg.lambda_steps)
    rows = microdetector.brightness_vs_wavelength(cfg.detector_params(), grid,
                                                  threads=cfg.threads)
    peak = float(rows[np.argmax(rows[:, 1]), 0])
    out = _write_outputs(cfg, ["lambda_nm", "rb"], rows,
                         {"peak_lambda_nm": peak})
    print(f"wrote {out} (peak at {peak:.1f} nm)")
    return 0


def cmd_counts(cfg: RunConfig) -> int:
    dist = cfg.field_state()
    det_sd = cfg.idealized("sd")
    det_e = cfg.idealized("e")
    rts = np.linspace(0.0, cfg.rt_max, cfg.rt_steps)
    rows = []
    for rt in rts:
        s = sdmodel.sd_moments(dist, det_sd, rt)
        e = emodel.e_moments(dist, det_e, rt)
        rows.append((rt, s.mbar, e.mbar, s.k_t, e.k_t))
    out = _write_outputs(cfg, ["rt", "mbar_sd", "mbar_e", "k_sd", "k_e"],
                         rows, {"state_n_max": dist.n_max})
    print(f"wrote {out}")
    return 0


def cmd_wt(cfg: RunConfig) -> int:
    dist = cfg.field_state()
    det_sd = cfg.idealized("sd")
    det_e = cfg.idealized("e")
    theta = cfg.wt_theta()
    rts = np.linspace(0.0, cfg.rt_max, cfg.rt_steps)
    rows = []
    for rt in rts:
        sd_curve = sdmodel.sd_wt_curve(dist, det_sd, rt, theta=theta)
        e_curve = emodel.e_wt_curve(dist, det_e, rt, theta=theta)
        rows.append((rt, sdmodel.sd_ncav(dist, rt), sd_curve.mean_wt,
                     emodel.e_ncav(dist, rt), e_curve.mean_wt))
    out = _write_outputs(cfg, ["rt", "ncav_sd", "mean_wt_sd", "ncav_e",
                               "mean_wt_e"], rows, {"theta": theta})
    print(f"wrote {out} (theta={theta:.4f})")
    return 0


def cmd_verify(cfg: RunConfig) -> int:
    checks = []

    def check(name, dev, tol):
        ok = dev <= tol
        checks.append(ok)
        print(f"{'PASS' if ok else 'FAIL'} {name}: deviation={dev:.3e} "
              f"(tol {tol:.1e})")

    dist = fock.make_coherent(min(cfg.nbar, 30.0))
    det_sd = cfg.idealized("sd")
    det_e = cfg.idealized("e")
    rt = 1.0

    pm_sd = sdmodel.sd_count_distribution(dist, det_sd, rt)
    check("sd count completeness", abs(pm_sd.sum() - dist.trace()), 1e-8)
    mk_sd = oracle.markov_counts(dist, det_sd, rt, m_max=len(pm_sd) - 1)
    check("sd closed-form vs markov", float(np.abs(pm_sd - mk_sd).max()), 1e-8)

    pm_e = emodel.e_count_distribution(dist, det_e, rt)
    check("e count completeness", abs(pm_e.sum() - dist.trace()), 1e-8)
    mk_e = oracle.markov_counts(dist, det_e, rt, m_max=len(pm_e) - 1)
    check("e model vs markov", float(np.abs(pm_e - mk_e).max()), 1e-8)

    stats = sdmodel.sd_moments(dist, det_sd, rt)
    m = np.arange(len(pm_sd))
    check("sd moment consistency",
          abs(float(np.dot(m, pm_sd)) - stats.mbar) / max(stats.mbar, 1e-300),
          1e-8)

    vac = fock.make_number(0, 4)
    pm_vac = sdmodel.sd_count_distribution(vac, det_sd, rt, m_max=30)
    from .kernels import poisson_pmf
    check("vacuum dark-count Poisson",
          float(np.abs(pm_vac - poisson_pmf(cfg.d * rt, 30)).max()), 1e-12)

    kern = emodel.e_kernels(dist, 0.0)
    check("Xi1(0) identity", abs(kern.xi1 - 1.0), 1e-12)

    n_traj = 20_000
    hist, _ = oracle.mc_trajectories(dist, det_sd, rt, n_traj, cfg.seed)
    counts = np.repeat(np.arange(len(hist)), hist)
    se = counts.std(ddof=1) / np.sqrt(n_traj)
    check("mc mean vs closed form (3 sigma)",
          abs(counts.mean() - stats.mbar), 3.0 * se)
    hist2, _ = oracle.mc_trajectories(dist, det_sd, rt, n_traj, cfg.seed)
    check("mc determinism under fixed seed",
          float(np.abs(hist - hist2).max()), 0.0)

    if all(checks):
        print(f"all {len(checks)} checks passed")
        return 0
    print(f"{sum(not c for c in checks)} of {len(checks)} checks failed")
    return 3


def cmd_defaults(cfg: RunConfig) -> int:
    for key in DEFAULTS:
        print(f"{key}={_fmt(getattr(cfg, key))}")
    return 0


_COMMANDS = {
    "qjs-table": cmd_qjs_table,
    "snr-scan": cmd_snr_scan,
    "brightness": cmd_brightness,
    "counts": cmd_counts,
    "wt": cmd_wt,
    "verify": cmd_verify,
    "defaults": cmd_defaults,
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="photocount",
        description="Continuous photodetection model: figure data and checks")
    sub = parser.add_subparsers(dest="command", required=True)
    for name in _COMMANDS:
        p = sub.add_parser(name)
        p.add_argument("--config", default=None, help="flat key=value file")
        for key in DEFAULTS:
            p.add_argument(f"--{key}", default=None)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        overrides = {k: getattr(args, k) for k in DEFAULTS}
        cfg = config_from_sources(args.config, overrides)
    except (ValueError, OSError) as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return 1
    try:
        return _COMMANDS[args.command](cfg)
    except (QuadratureError, TruncationError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return 2
    except PlateauUndefinedError as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return 2
    except ValueError as exc:
        print(f"validation error: {exc}", file=sys.stderr)
        return 1
    except PhotocountError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())

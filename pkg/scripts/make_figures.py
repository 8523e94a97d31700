#!/usr/bin/env python3
"""Reproduce the data behind every figure via the CLI.

Writes CSV + .meta pairs into figures/ (or $PHOTOCOUNT_OUT_DIR). Each block
is one figure: SNR breakdown scan, brightness-vs-wavelength at two biases,
normalized bright/dark coefficient tables on and off resonance, counting
moments for three field states at two mean photon numbers, and mean waiting
time versus cavity population for both counting models.
"""

import os
import sys

from photocount.cli import main

OUT = os.environ.get("PHOTOCOUNT_OUT_DIR", "figures")


def run(name, *args):
    argv = list(args) + ["--out", os.path.join(OUT, name)]
    code = main(argv)
    if code != 0:
        sys.exit(f"command for {name} failed with exit code {code}")


def all_figures():
    os.makedirs(OUT, exist_ok=True)

    # fig 1: signal-to-noise vs bias, resonant and far off resonance
    run("fig1_snr_resonant.csv", "snr-scan", "--lambda_nm", "500")
    run("fig1_snr_far.csv", "snr-scan", "--lambda_nm", "1500")

    # fig 2: bright counts rate vs wavelength at two biases
    run("fig2_brightness_b380.csv", "brightness", "--b", "380")
    run("fig2_brightness_b190.csv", "brightness", "--b", "190")

    # figs 3-4: normalized bright and dark coefficient tables
    run("fig34_qjs_resonant.csv", "qjs-table", "--lambda_nm", "500")
    run("fig34_qjs_off.csv", "qjs-table", "--lambda_nm", "1000")

    # figs 5-6: counting moments, three families, nbar = 50 and 100
    for state in ("coherent", "number", "thermal"):
        for nbar in (50, 100):
            run(f"fig56_counts_{state}_{nbar}.csv", "counts",
                "--state", state, "--nbar", str(nbar),
                "--rt_max", "300", "--rt_steps", "121")

    # fig 7: mean waiting time and cavity population, number and thermal
    for state in ("number", "thermal"):
        run(f"fig7_wt_{state}.csv", "wt", "--state", state,
            "--nbar", "100", "--rt_max", "150", "--rt_steps", "76")


if __name__ == "__main__":
    all_figures()
    print(f"figure data written under {OUT}/")

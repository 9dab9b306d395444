"""Flip excess of the simulated device against the click-probability mismatch.

Runs the cycle simulator at fixed probabilities p +- dp/2 and compares the per-cycle
flip excess with the closed form and its quadratic approximation dp^2 / (2 - 2p + 2p^2).
"""
import argparse
import csv
import dataclasses
import math
import sys
from dataclasses import dataclass

import numpy as np

from qrngsim.device import DeviceConfig, run_simulation
from qrngsim.postproc import estimate_mismatch, flip_hold_bias


@dataclass
class Experiment:
    p_avg: float = 0.28
    mismatches: tuple = (0.0, 0.01, 0.02, 0.03, 0.04, 0.06)
    cycles: int = 5 * 10**7
    seed: int = 100


def run(exp: Experiment, out):
    w = csv.writer(out)
    w.writerow(["dp", "cycles", "excess", "se", "closed_form", "quadratic", "dp_estimate"])
    coef = 1.0 / (2 - 2 * exp.p_avg + 2 * exp.p_avg**2)
    for i, dp in enumerate(exp.mismatches):
        p1, p2 = exp.p_avg + dp / 2, exp.p_avg - dp / 2
        cfg = DeviceConfig(click_probs=(p1, p2), feedback_enabled=False)
        cfg = cfg.replace(detectors=dataclasses.replace(cfg.detectors, late_click_prob=0.0))
        c = run_simulation(cfg, exp.seed + i, n_cycles=exp.cycles, record_events=False).counters
        holds = c["emitted_bits"] - c["flips"]
        excess = (c["flips"] - holds) / c["cycles"]
        se = math.sqrt(c["emitted_bits"]) / c["cycles"]
        est = estimate_mismatch(excess, exp.p_avg) if excess > 0 else 0.0
        w.writerow([dp, c["cycles"], f"{excess:.4e}", f"{se:.1e}", f"{flip_hold_bias(p1, p2)[0]:.4e}", f"{coef * dp * dp:.4e}", f"{est:.4f}"])


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--cycles", type=float, default=Experiment.cycles)
    ap.add_argument("--pavg", type=float, default=Experiment.p_avg)
    ap.add_argument("--seed", type=int, default=Experiment.seed)
    a = ap.parse_args()
    run(Experiment(p_avg=a.pavg, cycles=int(a.cycles), seed=a.seed), sys.stdout)


if __name__ == "__main__":
    main()

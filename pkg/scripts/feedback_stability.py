"""Integrator gain against loop behaviour: linear prediction and simulated trace.

For each gain the script reports the natural frequency and damping of the linearised
loop, then runs the device from an off-equilibrium bias and measures the spectral
peak and step overshoot of the bias trace.
"""
import argparse
from dataclasses import dataclass

import numpy as np

from qrngsim import analysis as A
from qrngsim.device import DeviceConfig, FeedbackParams, loop_parameters, run_simulation


@dataclass
class Experiment:
    gains: tuple = (2e-6, 2e-5, 1e-4, 6.6e-4)
    seconds: float = 8.0
    v0: float = 23.5
    seed: int = 200


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--seconds", type=float, default=Experiment.seconds)
    ap.add_argument("--gains", type=lambda s: tuple(float(x) for x in s.split(",")), default=Experiment.gains)
    a = ap.parse_args()
    exp = Experiment(gains=a.gains, seconds=a.seconds)
    print(f"{'gain':>9} {'f_n Hz':>8} {'zeta':>6} {'peak Hz':>8} {'ratio':>7} {'resonant':>8} {'overshoot':>9}")
    for i, g in enumerate(exp.gains):
        cfg = DeviceConfig(feedback=FeedbackParams(integrator_gain=g), v_bias_initial=exp.v0)
        lp = loop_parameters(cfg)
        tr = run_simulation(cfg, exp.seed + i, seconds=exp.seconds, record_events=False).feedback_trace
        sel = tr.t_s >= 0.5
        v = A.resonance_peak(A.periodogram(tr.v_bias[sel], t=tr.t_s[sel]))
        over = A.step_overshoot(tr.t_s, tr.v_bias, settle_from=exp.seconds - 1.0)
        print(f"{g:9.2e} {lp['natural_freq_hz']:8.2f} {lp['damping']:6.2f} {v['freq_hz']:8.2f} "
              f"{v['ratio_to_low_band']:7.1f} {str(v['resonant']):>8} {over:9.1%}")


if __name__ == "__main__":
    main()

"""Single-click rate against bias voltage, and where the loop can settle.

Prints the rate curve, the rate maximum and the crossings with the target rate; a
target above the maximum (or only falling-branch crossings) means the loop runs away
to the supply limit.
"""
import argparse

import numpy as np

from qrngsim.device import DeviceConfig, channel_probs, equilibrium_map


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--target", type=float, default=4e6)
    ap.add_argument("--points", type=int, default=2001)
    ap.add_argument("--show", type=int, default=11, help="rows of the rate curve to print")
    a = ap.parse_args()
    cfg = DeviceConfig(target_rate=a.target)
    grid = np.linspace(cfg.feedback.v_min, cfg.feedback.v_max, a.points)
    eq = equilibrium_map(cfg, grid)
    step = max(1, (a.points - 1) // (a.show - 1))
    print("v_bias,p_click,single_rate_hz")
    for pt in eq.points[::step]:
        print(f"{pt.v_bias:.3f},{channel_probs(cfg, pt.v_bias)[0]:.4f},{pt.single_rate:.6g}")
    print(f"\nmaximum {eq.max_rate:.6g} Hz at {eq.v_peak:.3f} V (p = {channel_probs(cfg, eq.v_peak)[0]:.3f})")
    for c in eq.crossings:
        kind = "stable" if c.stable else "unstable"
        print(f"crossing at {c.v_bias:.3f} V, p = {channel_probs(cfg, c.v_bias)[0]:.3f}, {kind}")
    if eq.lock_risk:
        print(f"lock risk: the loop drives the bias to {eq.lock_voltage} V")


if __name__ == "__main__":
    main()

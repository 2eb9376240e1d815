"""Tensor vs potential formulation on the perturbed n = 1 torus across a refinement ladder."""

import argparse
import time

from chernflow.flow import FlowConfig, cross_validate, phi_dot_identity_residual, run_flow
from chernflow.models import cosine_torus


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--levels", type=int, nargs="+", default=[16, 32, 64], help="grid sizes N")
    ap.add_argument("--dt-at-32", type=float, default=2e-3, help="time step at N = 32, scaled with h")
    ap.add_argument("--t-end", type=float, default=0.2)
    ap.add_argument("--amplitude", type=float, default=0.1)
    args = ap.parse_args()

    model = cosine_torus(1, args.amplitude)
    prev = None
    print(f"{'N':>5} {'dt':>9} {'deviation':>11} {'ratio':>7} {'phidot res':>11} {'secs':>6}")
    for N in args.levels:
        dt = args.dt_at_32 * 32 / N
        start = time.perf_counter()
        runs = [
            run_flow(FlowConfig(model, f, N=N, dt0=dt, t_end=args.t_end, checkpoint_every=1))
            for f in ("tensor", "potential")
        ]
        dev = cross_validate(*runs).max_deviation
        pd = phi_dot_identity_residual(runs[1]).max()
        ratio = f"{prev / dev:7.2f}" if prev else " " * 7
        print(f"{N:>5} {dt:>9.2e} {dev:>11.3e} {ratio} {pd:>11.3e} {time.perf_counter() - start:>6.1f}")
        prev = dev


if __name__ == "__main__":
    main()

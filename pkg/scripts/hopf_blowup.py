"""Integrate the Hopf line to its singular time and fit the sup-R blow-up rate."""

import argparse

from chernflow.flow import FlowConfig, run_flow
from chernflow.models import HopfModel, hopf_singular_time
from chernflow.singularity import fit_trajectory


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--n", type=int, nargs="+", default=[2, 3])
    ap.add_argument("--dt0", type=float, default=1e-3)
    ap.add_argument("--points", type=int, default=16)
    ap.add_argument("--csv-dir", default=None, help="write diagnostics_n<k>.csv here")
    args = ap.parse_args()

    print(f"{'n':>2} {'T':>10} {'t_final':>12} {'T_fit':>14} {'k':>10} {'C':>10} {'n-1':>4}")
    for n in args.n:
        model = HopfModel(n)
        tr = run_flow(FlowConfig(model, "closed_form", dt0=args.dt0, dt_min=1e-8, t_end=1.0, n_points=args.points))
        fit = fit_trajectory(tr)
        if args.csv_dir:
            tr.write_csv(f"{args.csv_dir}/diagnostics_n{n}.csv")
        print(
            f"{n:>2} {hopf_singular_time(model):>10.6f} {tr.t_final:>12.9f} {fit.T_fit:>14.11f}"
            f" {fit.k:>10.6f} {fit.C:>10.6f} {n - 1:>4}"
        )


if __name__ == "__main__":
    main()

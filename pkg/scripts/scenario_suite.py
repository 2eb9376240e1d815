"""Run the built-in scenario suite and tabulate each trajectory's label and evidence."""

from chernflow.verify import scenario_suite


def main():
    results, checks = scenario_suite()
    print(f"{'scenario':<22} {'label':<17} {'termination':<22} {'t_final':>9} {'max sup R':>12} {'T_fit':>9} ok")
    for r in results:
        print(
            f"{r.scenario.name:<22} {r.label:<17} {r.termination:<22} {r.t_final:>9.5f}"
            f" {r.sup_R_max:>12.5g} {r.T_fit:>9.5f} {'yes' if r.consistent else 'NO'}"
        )
    for c in checks:
        print(c.line())
    return 0 if all(c.passed for c in checks) else 1


if __name__ == "__main__":
    raise SystemExit(main())

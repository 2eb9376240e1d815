"""Command-line entry point: ``chernflow run | verify | fit``.

Exit codes: 0 run completed (or all checks / high-confidence fit), 2 curvature
blow-up, 1 resolution failure, config error, failed check or bad input,
3 fit succeeded but with low confidence.
"""

from __future__ import annotations

import argparse
import csv
import io
import logging
import os
import sys
from pathlib import Path

THREADS_ENV = "CHERNFLOW_THREADS"

EXIT_OK = 0
EXIT_FAILURE = 1
EXIT_BLOWUP = 2
EXIT_LOW_CONFIDENCE = 3

LABEL_EXIT = {"completed": EXIT_OK, "curvature_blowup": EXIT_BLOWUP, "resolution_failure": EXIT_FAILURE}

log = logging.getLogger("chernflow")


def apply_threads():
    """Forward CHERNFLOW_THREADS to the BLAS/OpenMP pools (effective before numpy loads)."""
    val = os.environ.get(THREADS_ENV)
    if not val:
        return
    if not val.isdigit() or int(val) < 1:
        raise SystemExit(f"{THREADS_ENV} must be a positive integer, got {val!r}")
    for var in ("OMP_NUM_THREADS", "OPENBLAS_NUM_THREADS", "MKL_NUM_THREADS"):
        os.environ[var] = val


def _say(args, text):
    if not args.quiet:
        print(text)


def _err(text):
    print(f"error: {text}", file=sys.stderr)


# -- run ------------------------------------------------------------------------------


def cmd_run(args):
    from . import config as cfgmod
    from .errors import ConfigError
    from .flow import cross_validate, determinant_bound_holds, run_flow, save_checkpoint
    from .singularity import fit_trajectory, format_report, singular_locus

    try:
        cfg = cfgmod.load(args.config)
        if args.output_dir is not None:
            cfg.output_dir = Path(args.output_dir)
        if args.checkpoint_every is not None:
            if args.checkpoint_every < 1:
                raise ConfigError("--checkpoint-every: must be >= 1")
            cfg.checkpoint_every = args.checkpoint_every
        flow_cfgs = [cfg.flow_config(f) for f in cfg.formulations]
    except ConfigError as exc:
        _err(str(exc))
        return EXIT_FAILURE

    out = cfg.output_dir
    out.mkdir(parents=True, exist_ok=True)
    trajs = []
    for fc in flow_cfgs:
        tr = run_flow(fc)
        trajs.append(tr)
        suffix = "" if len(flow_cfgs) == 1 else f"_{fc.formulation}"
        tr.write_csv(out / f"diagnostics{suffix}.csv")
        if cfg.write_checkpoints:
            cdir = out / f"checkpoints{suffix}"
            cdir.mkdir(exist_ok=True)
            for k, s in enumerate(tr.checkpoints):
                save_checkpoint(s, cdir / f"state_{k:05d}.npz")
        _say(args, f"{fc.formulation}: {tr.termination} ({tr.label}) at t = {tr.t_final:.17g}")
        if not determinant_bound_holds(tr):
            _err(f"{fc.formulation}: determinant bound violated")
            return EXIT_FAILURE

    code = max((LABEL_EXIT[tr.label] for tr in trajs), key=lambda c: (c == EXIT_FAILURE, c))

    if len(trajs) == 2:
        rep = cross_validate(*trajs, C=cfg.cross_validate_C)
        text = format_report(
            {"max_deviation": rep.max_deviation, "tolerance": rep.tolerance, "passed": rep.passed}
        )
        (out / "cross_validation.txt").write_text(text)
        _say(args, text.rstrip())
        if not rep.passed:
            _err("tensor and potential trajectories disagree beyond tolerance")
            code = EXIT_FAILURE

    for tr in trajs:
        if tr.label != "curvature_blowup":
            continue
        fit = fit_trajectory(tr, cfg.fit_window)
        values = {"termination": tr.termination, "label": tr.label, "t_final": tr.t_final, **fit.as_dict()}
        mask = None
        if cfg.locus_threshold is not None:
            mask = singular_locus(tr, cfg.locus_threshold)
        suffix = "" if len(trajs) == 1 else f"_{tr.formulation}"
        text = format_report(values, mask)
        (out / f"fit_report{suffix}.txt").write_text(text)
        _say(args, text.rstrip())
    return code


# -- verify ------------------------------------------------------------------------------


def cmd_verify(args):
    from .verify import SUITES

    checks = SUITES[args.suite]()
    failed = [c for c in checks if not c.passed]
    lines = [c.line() for c in checks]
    if args.output_dir is not None:
        out = Path(args.output_dir)
        out.mkdir(parents=True, exist_ok=True)
        (out / f"verify_{args.suite}.txt").write_text("\n".join(lines) + "\n")
    for line in lines:
        _say(args, line)
    for c in failed:
        _err(f"check failed: {c.name}")
    return EXIT_FAILURE if failed else EXIT_OK


# -- fit -----------------------------------------------------------------------------------


def read_series(text):
    """(t, sup_R) arrays from a diagnostics CSV."""
    import numpy as np

    rows = list(csv.reader(io.StringIO(text)))
    if not rows:
        raise ValueError("empty CSV")
    header = [h.strip() for h in rows[0]]
    if "t" not in header or "sup_R" not in header:
        raise ValueError("CSV needs 't' and 'sup_R' columns")
    it, ir = header.index("t"), header.index("sup_R")
    t, y = [], []
    for k, row in enumerate(rows[1:], 2):
        if not row:
            continue
        try:
            t.append(float(row[it]))
            y.append(float(row[ir]))
        except (IndexError, ValueError):
            raise ValueError(f"line {k}: malformed row") from None
    return np.array(t), np.array(y)


def _parse_window(text):
    try:
        lo, hi = (float(v) for v in text.split(":"))
    except ValueError:
        raise argparse.ArgumentTypeError(f"window must be t_lo:t_hi, got {text!r}") from None
    if not lo < hi:
        raise argparse.ArgumentTypeError("window needs t_lo < t_hi")
    return lo, hi


def cmd_fit(args):
    from .errors import ChernFlowError, ContractViolation
    from .singularity import fit_blowup, format_report, tail_window

    try:
        text = sys.stdin.read() if args.csv == "-" else Path(args.csv).read_text()
        t, y = read_series(text)
    except (OSError, ValueError) as exc:
        _err(f"cannot read series: {exc}")
        return EXIT_FAILURE
    try:
        if len(t) == 0:
            raise ValueError("series is empty")
        fit = fit_blowup(t, y, args.window or tail_window(t, y))
    except ContractViolation as exc:
        _err(f"contract violation: {exc}")
        return EXIT_FAILURE
    except (ChernFlowError, ValueError) as exc:
        _err(str(exc))
        return EXIT_FAILURE
    report = format_report(fit.as_dict())
    if args.output_dir is not None:
        out = Path(args.output_dir)
        out.mkdir(parents=True, exist_ok=True)
        (out / "fit.txt").write_text(report)
    # the fit itself is the command's output, so it is printed even with --quiet
    sys.stdout.write(report)
    return EXIT_LOW_CONFIDENCE if fit.low_confidence else EXIT_OK


# -- entry -----------------------------------------------------------------------------------


def build_parser():
    p = argparse.ArgumentParser(prog="chernflow", description="Chern-Ricci flow on Hermitian model manifolds.")
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--output-dir", default=None, help="directory for artifacts")
    common.add_argument("--quiet", action="store_true", help="suppress progress output")
    sub = p.add_subparsers(dest="command", required=True)

    r = sub.add_parser("run", parents=[common], help="integrate a flow from a config file")
    r.add_argument("config")
    r.add_argument("--checkpoint-every", type=int, default=None, help="steps between stored states")
    r.set_defaults(func=cmd_run)

    v = sub.add_parser("verify", parents=[common], help="run a property suite")
    v.add_argument("suite", choices=("kernel", "hopf", "equivalence", "lemma"))
    v.set_defaults(func=cmd_verify)

    f = sub.add_parser("fit", parents=[common], help="fit R ~ C (T - t)^-k to a diagnostics CSV")
    f.add_argument("csv", help="diagnostics CSV path, or - for stdin")
    f.add_argument("--window", type=_parse_window, default=None, help="fit window t_lo:t_hi")
    f.set_defaults(func=cmd_fit)
    return p


def main(argv=None):
    apply_threads()
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.WARNING if args.quiet else logging.INFO, format="%(message)s")
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())

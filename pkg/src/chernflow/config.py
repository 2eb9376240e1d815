"""Flat ``section.key = value`` run configuration.

Example::

    model.kind = torus
    model.n = 1
    model.N = 64
    model.perturbation.kind = entry
    model.perturbation.amplitude = 0.1
    model.perturbation.axis = x1
    flow.formulation = both
    flow.dt0 = 1e-3
    flow.t_end = 0.2

Lines starting with ``#`` and blank lines are ignored. Unknown keys and bad
values raise :class:`ConfigError` naming the key.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path

from .errors import ConfigError, ContractViolation
from .flow import FlowConfig
from .metric import Torus
from .models import FourierMode, HopfModel, TorusModel, parse_axis, torus_metric

FORMULATIONS = ("tensor", "potential", "both", "closed_form")


def _bool(text):
    t = text.strip().lower()
    if t in ("true", "yes", "1", "on"):
        return True
    if t in ("false", "no", "0", "off"):
        return False
    raise ValueError(f"not a boolean: {text!r}")


def _floats(text):
    return tuple(float(v) for v in text.split(","))


def _ints(text):
    return tuple(int(v) for v in text.split(","))


def _window(text):
    lo, hi = text.split(":")
    return float(lo), float(hi)


# key -> (parser, default)
SCHEMA = {
    "model.kind": (str, None),
    "model.n": (int, 1),
    "model.alpha": (float, 2.0),
    "model.N": (int, 32),
    "model.periods": (_floats, None),
    "model.perturbation.kind": (str, "none"),
    "model.perturbation.amplitude": (float, 0.1),
    "model.perturbation.axis": (str, "x1"),
    "model.perturbation.wavenumber": (int, 1),
    "model.perturbation.wavevector": (_ints, None),
    "model.perturbation.entry": (_ints, (1, 1)),
    "flow.formulation": (str, "tensor"),
    "flow.dt0": (float, 1e-3),
    "flow.dt_min": (float, 1e-7),
    "flow.t_end": (float, 1.0),
    "flow.checkpoint_every": (int, 10),
    "flow.adaptive": (_bool, True),
    "flow.cfl": (float, 0.8),
    "flow.n_points": (int, 32),
    "flow.seed": (int, 0),
    "output.dir": (str, "chernflow_out"),
    "output.checkpoints": (_bool, False),
    "tol.cross_validate_C": (float, 10.0),
    "fit.window": (_window, None),
    "locus.threshold": (float, None),
}


def parse_text(text) -> dict:
    values = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected 'key = value', got {raw.strip()!r}")
        key, val = (s.strip() for s in line.split("=", 1))
        if key not in SCHEMA:
            raise ConfigError(f"{key}: unknown key (line {lineno})")
        if key in values:
            raise ConfigError(f"{key}: given twice (line {lineno})")
        try:
            values[key] = SCHEMA[key][0](val)
        except ValueError as exc:
            raise ConfigError(f"{key}: {exc}") from None
    return values


@dataclass
class RunConfig:
    model: object
    formulation: str
    N: int = 32
    dt0: float = 1e-3
    dt_min: float = 1e-7
    t_end: float = 1.0
    checkpoint_every: int = 10
    adaptive: bool = True
    cfl: float = 0.8
    n_points: int = 32
    seed: int = 0
    output_dir: Path = Path("chernflow_out")
    write_checkpoints: bool = False
    cross_validate_C: float = 10.0
    fit_window: tuple | None = None
    locus_threshold: float | None = None
    source: dict = field(default_factory=dict)

    def flow_config(self, formulation=None) -> FlowConfig:
        try:
            return FlowConfig(
                model=self.model,
                formulation=formulation or self.formulation,
                N=self.N,
                dt0=self.dt0,
                dt_min=self.dt_min,
                t_end=self.t_end,
                checkpoint_every=self.checkpoint_every,
                n_points=self.n_points,
                seed=self.seed,
                adaptive=self.adaptive,
                cfl=self.cfl,
            )
        except ContractViolation as exc:
            raise ConfigError(f"flow: {exc}") from None

    @property
    def formulations(self):
        return ("tensor", "potential") if self.formulation == "both" else (self.formulation,)


def _build_model(v):
    kind = v.get("model.kind")
    n = v["model.n"]
    if kind is None:
        raise ConfigError("model.kind: required (hopf or torus)")
    if n < 1:
        raise ConfigError("model.n: must be >= 1")
    if kind == "hopf":
        return HopfModel(n, v["model.alpha"])
    if kind != "torus":
        raise ConfigError(f"model.kind: expected hopf or torus, got {kind!r}")
    periods = v.get("model.periods")
    if periods is not None and len(periods) != 2 * n:
        raise ConfigError(f"model.periods: need {2 * n} values, got {len(periods)}")
    pk = v["model.perturbation.kind"]
    amp = v["model.perturbation.amplitude"]
    k = v.get("model.perturbation.wavevector")
    if k is None:
        k = [0] * (2 * n)
        k[parse_axis(v["model.perturbation.axis"], n)] = v["model.perturbation.wavenumber"]
    elif len(k) != 2 * n:
        raise ConfigError(f"model.perturbation.wavevector: need {2 * n} entries")
    if pk == "none":
        model = TorusModel(n=n, periods=periods)
    elif pk == "entry":
        i, j = v["model.perturbation.entry"]
        if not (1 <= i <= n and 1 <= j <= n):
            raise ConfigError(f"model.perturbation.entry: indices must lie in 1..{n}")
        model = TorusModel(n=n, periods=periods, modes=(FourierMode.entry(n, i - 1, j - 1, amp, k),))
    elif pk == "kahler":
        full = Torus(n, periods).periods
        model = TorusModel(n=n, periods=periods, modes=(FourierMode.ddbar_exact(n, amp, k, full),))
    else:
        raise ConfigError(f"model.perturbation.kind: expected none, entry or kahler, got {pk!r}")
    torus_metric(model)  # positivity precheck
    return model


def build(values: dict) -> RunConfig:
    v = {k: d for k, (_, d) in SCHEMA.items()}
    v.update(values)
    form = v["flow.formulation"]
    if form not in FORMULATIONS:
        raise ConfigError(f"flow.formulation: expected one of {', '.join(FORMULATIONS)}, got {form!r}")
    model = _build_model(v)
    if form == "closed_form" and not isinstance(model, HopfModel):
        raise ConfigError("flow.formulation: closed_form needs model.kind = hopf")
    if form != "closed_form" and isinstance(model, HopfModel):
        raise ConfigError(f"flow.formulation: {form} needs model.kind = torus (hopf runs are closed_form only)")
    if v["flow.dt0"] <= 0:
        raise ConfigError("flow.dt0: must be positive")
    if not 0 < v["flow.dt_min"] < v["flow.dt0"]:
        raise ConfigError("flow.dt_min: need 0 < dt_min < dt0")
    if v["flow.t_end"] <= 0:
        raise ConfigError("flow.t_end: must be positive")
    if v["flow.checkpoint_every"] < 1:
        raise ConfigError("flow.checkpoint_every: must be >= 1")
    if v["model.N"] < 4:
        raise ConfigError("model.N: must be >= 4")
    return RunConfig(
        model=model,
        formulation=form,
        N=v["model.N"],
        dt0=v["flow.dt0"],
        dt_min=v["flow.dt_min"],
        t_end=v["flow.t_end"],
        checkpoint_every=v["flow.checkpoint_every"],
        adaptive=v["flow.adaptive"],
        cfl=v["flow.cfl"],
        n_points=v["flow.n_points"],
        seed=v["flow.seed"],
        output_dir=Path(v["output.dir"]),
        write_checkpoints=v["output.checkpoints"],
        cross_validate_C=v["tol.cross_validate_C"],
        fit_window=v["fit.window"],
        locus_threshold=v["locus.threshold"],
        source=dict(values),
    )


def load(path) -> RunConfig:
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc.strerror}") from None
    return build(parse_text(text))


def loads(text) -> RunConfig:
    return build(parse_text(text))

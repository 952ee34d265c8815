"""Experiment configuration: strict JSON schema, named presets, validation.

A config file is a JSON object. It may name a ``preset``; the preset is
expanded first and the remaining keys are deep-merged over it. Unknown
keys are errors. All fields are checked, grids and schedules included,
before any computation starts.
"""
from __future__ import annotations

import copy
import hashlib
import json
from importlib import resources
from pathlib import Path
from typing import Literal, Optional

from pydantic import BaseModel, ConfigDict, Field, ValidationError, model_validator

from .expressions import ExpressionError, parse, space_time_variables, spatial_variables

CHECKS = ("moderate", "unique", "consistent", "mc")


class ConfigError(ValueError):
    """Invalid configuration; ``problems`` lists ``(field path, message)``."""

    def __init__(self, problems, source=None):
        self.problems = [(p or "<root>", m) for p, m in problems]
        self.source = source
        where = f"{source}: " if source else ""
        lines = [f"{path}: {msg}" for path, msg in self.problems]
        super().__init__(where + ("; ".join(lines) if len(lines) < 2 else "\n  " + "\n  ".join(lines)))


class _Strict(BaseModel):
    model_config = ConfigDict(extra="forbid", validate_assignment=True)


class OperatorConfig(_Strict):
    kind: Literal["laplacian", "bilaplacian", "polynomial"] = "laplacian"
    coefficients: Optional[list[float]] = Field(
        None, description="symbol coefficients c_j of a(ξ) = Σ c_j |ξ|^{2j} (polynomial kind only)")


class PotentialConfig(_Strict):
    kind: Literal["bounded", "delta", "delta_plus_bounded", "finite_order"] = "delta"
    x0: Optional[list[float]] = Field(None, description="delta location, one entry per dimension")
    expression: Optional[str] = Field(None, description="bounded part, e.g. 'cos(pi*x/R)'")
    order: Optional[list[int]] = Field(None, description="derivative order α (finite_order)")
    carrier: Optional[str] = Field(None, description="continuous compactly supported carrier f (finite_order)")


class TableEntry(_Strict):
    gamma: list[int] = Field(description="dense multi-index, e.g. [1, 0, 2]")
    expression: str


class DataConfig(_Strict):
    """Random force or initial condition."""

    kind: Literal["zero", "deterministic", "time_white_noise", "gaussian", "table"] = "zero"
    expression: Optional[str] = Field(None, description="field of the deterministic kind")
    K: Optional[int] = Field(None, description="white-noise modes (defaults to the truncation K)")
    mean: Optional[str] = None
    fluctuations: list[str] = Field(default_factory=list, description="coefficient of e(k), k = 1, 2, ...")
    table: list[TableEntry] = Field(default_factory=list)


class ProblemConfig(_Strict):
    operator: OperatorConfig = Field(default_factory=OperatorConfig)
    potential: PotentialConfig = Field(default_factory=PotentialConfig)
    force: DataConfig = Field(default_factory=DataConfig)
    initial: DataConfig = Field(default_factory=DataConfig)


class DiscretizationConfig(_Strict):
    d: int = 1
    R: float = 8.0
    n: int = 512
    T: float = 0.5
    dt: float = 0.01


class TruncationConfig(_Strict):
    P: int = 1
    K: int = 1


class MollifierConfig(_Strict):
    scale_law: Literal["linear", "log"] = "log"
    N_q: float = 1.0
    perturbation_power: Optional[float] = None
    perturbation_amplitude: float = 1.0


class ScheduleConfig(_Strict):
    """Either explicit ``values`` or dyadic ``2^-j`` for ``j_min..j_max``."""

    values: Optional[list[float]] = None
    j_min: int = 1
    j_max: int = 5

    def eps(self) -> list[float]:
        if self.values is not None:
            return list(self.values)
        return [2.0**-j for j in range(self.j_min, self.j_max + 1)]


class MonteCarloConfig(_Strict):
    n_samples: int = 10000
    probe_times: list[float] = Field(default_factory=lambda: [0.1, 0.2, 0.3, 0.4, 0.5])
    probe_points: list[list[float]] = Field(default_factory=lambda: [[-2.0], [-1.0], [0.0], [1.0], [2.0]])
    n_sigma: float = 3.0


class VerificationConfig(_Strict):
    checks: list[Literal["moderate", "unique", "consistent", "mc"]] = Field(default_factory=list)
    p_grid: list[float] = Field(default_factory=lambda: [0.0, 1.1, 2.0])
    s: float = 1.1
    residual_threshold: float = 0.25
    margin: float = 0.5
    tail_tolerance: float = 1e-2
    seed: int = 0
    alternate_mollifier: Optional[MollifierConfig] = Field(
        None, description="second regularization for the uniqueness check")
    monte_carlo: MonteCarloConfig = Field(default_factory=MonteCarloConfig)


class OutputConfig(_Strict):
    directory: str = "kpde-out"
    formats: list[Literal["csv", "json"]] = Field(default_factory=lambda: ["csv", "json"])


class ExperimentConfig(_Strict):
    preset: Optional[str] = Field(None, description="name of the preset the config was expanded from")
    problem: ProblemConfig = Field(default_factory=ProblemConfig)
    discretization: DiscretizationConfig = Field(default_factory=DiscretizationConfig)
    truncation: TruncationConfig = Field(default_factory=TruncationConfig)
    regularization: MollifierConfig = Field(default_factory=MollifierConfig)
    schedule: ScheduleConfig = Field(default_factory=ScheduleConfig)
    verification: VerificationConfig = Field(default_factory=VerificationConfig)
    output: OutputConfig = Field(default_factory=OutputConfig)

    @model_validator(mode="after")
    def _semantics(self):
        problems = semantic_problems(self)
        if problems:
            raise ValueError(json.dumps(problems))
        return self

    def to_json(self) -> str:
        return json.dumps(self.model_dump(mode="json"), indent=2, sort_keys=True)

    def config_hash(self) -> str:
        canon = json.dumps(self.model_dump(mode="json"), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(canon.encode()).hexdigest()


# -- presets ---------------------------------------------------------------------

_BUMP_FLUCTUATIONS = [f"0.2*exp(-(x - ({c}))**2)" for c in (-2, -1, 0, 1, 2)]

PRESETS: dict[str, dict] = {
    # δ potential, time white noise force, Gaussian initial condition
    "example-sec4": {
        "problem": {
            "operator": {"kind": "laplacian"},
            "potential": {"kind": "delta", "x0": [0.0]},
            "force": {"kind": "time_white_noise", "K": 5},
            "initial": {"kind": "gaussian", "mean": "exp(-x**2)", "fluctuations": _BUMP_FLUCTUATIONS},
        },
        "discretization": {"d": 1, "R": 8.0, "n": 512, "T": 0.5, "dt": 0.01},
        "truncation": {"P": 2, "K": 5},
        "regularization": {"scale_law": "log", "N_q": 1.0},
        "schedule": {"j_min": 1, "j_max": 5},
        "verification": {"checks": ["moderate"]},
    },
    "consistency-cos": {
        "problem": {
            "operator": {"kind": "laplacian"},
            "potential": {"kind": "bounded", "expression": "cos(pi*x/R)"},
            "force": {"kind": "time_white_noise", "K": 5},
            "initial": {"kind": "gaussian", "mean": "exp(-x**2)", "fluctuations": _BUMP_FLUCTUATIONS},
        },
        "discretization": {"d": 1, "R": 4.0, "n": 4096, "T": 0.5, "dt": 0.01},
        "truncation": {"P": 2, "K": 5},
        "regularization": {"scale_law": "linear"},
        "schedule": {"j_min": 1, "j_max": 6},
        "verification": {"checks": ["consistent"]},
    },
    "uniqueness-negligible": {
        "problem": {
            "operator": {"kind": "laplacian"},
            "potential": {"kind": "delta", "x0": [0.0]},
            "force": {"kind": "time_white_noise", "K": 5},
            "initial": {"kind": "gaussian", "mean": "exp(-x**2)", "fluctuations": _BUMP_FLUCTUATIONS},
        },
        "discretization": {"d": 1, "R": 8.0, "n": 512, "T": 0.5, "dt": 0.01},
        "truncation": {"P": 2, "K": 5},
        "regularization": {"scale_law": "log", "N_q": 1.0},
        "schedule": {"j_min": 1, "j_max": 5},
        "verification": {"checks": ["unique"],
                         "alternate_mollifier": {"scale_law": "log", "N_q": 1.0, "perturbation_power": 8.0}},
    },
    # bounded potential, data on |γ| <= 1: chaos statistics vs Monte Carlo
    "linear-gaussian": {
        "problem": {
            "operator": {"kind": "laplacian"},
            "potential": {"kind": "bounded", "expression": "cos(pi*x/R)"},
            "force": {"kind": "time_white_noise", "K": 3},
            "initial": {"kind": "gaussian", "mean": "exp(-x**2)", "fluctuations": ["0.5*exp(-(x - 1)**2)"]},
        },
        "discretization": {"d": 1, "R": 8.0, "n": 256, "T": 0.5, "dt": 0.01},
        "truncation": {"P": 1, "K": 3},
        "regularization": {"scale_law": "linear"},
        "schedule": {"values": [1.0, 0.75, 0.5]},
        "verification": {"checks": ["mc"], "seed": 20240611,
                         "monte_carlo": {"n_samples": 10000}},
    },
}


def deep_merge(base: dict, override: dict) -> dict:
    out = copy.deepcopy(base)
    for k, v in override.items():
        if isinstance(v, dict) and isinstance(out.get(k), dict):
            out[k] = deep_merge(out[k], v)
        else:
            out[k] = copy.deepcopy(v)
    return out


def expand_preset(raw: dict, preset: str | None = None) -> dict:
    name = preset if preset is not None else raw.get("preset")
    if name is None:
        return dict(raw)
    if name not in PRESETS:
        raise ConfigError([("preset", f"unknown preset {name!r} (known: {', '.join(PRESETS)})")])
    merged = deep_merge(PRESETS[name], {k: v for k, v in raw.items() if k != "preset"})
    merged["preset"] = name
    return merged


# -- validation ------------------------------------------------------------------

def _is_pow2(n):
    return n >= 1 and n & (n - 1) == 0


def _check_expr(problems, path, text, variables):
    if text is None:
        return
    try:
        parse(text, variables)
    except ExpressionError as exc:
        problems.append((path, str(exc)))


def _check_data(problems, path, data: DataConfig, trunc: TruncationConfig, d: int, force: bool):
    variables = space_time_variables(d) if force else spatial_variables(d)
    k = data.kind
    if k == "deterministic" and data.expression is None:
        problems.append((f"{path}.expression", "deterministic data needs an expression"))
    if k == "time_white_noise":
        if not force:
            problems.append((f"{path}.kind", "time white noise is a force, not an initial condition"))
        K = trunc.K if data.K is None else data.K
        if K < 1 or K > trunc.K:
            problems.append((f"{path}.K", f"white-noise modes K = {K} must lie in 1..truncation.K = {trunc.K}"))
    if k == "gaussian":
        if len(data.fluctuations) > trunc.K:
            problems.append((f"{path}.fluctuations",
                             f"{len(data.fluctuations)} fluctuations exceed truncation.K = {trunc.K}"))
        _check_expr(problems, f"{path}.mean", data.mean, variables)
        for i, fl in enumerate(data.fluctuations):
            _check_expr(problems, f"{path}.fluctuations.{i}", fl, variables)
    if k == "table":
        for i, e in enumerate(data.table):
            if len(e.gamma) > trunc.K or any(g < 0 for g in e.gamma) or sum(e.gamma) > trunc.P:
                problems.append((f"{path}.table.{i}.gamma",
                                 f"{e.gamma} lies outside the truncation (P = {trunc.P}, K = {trunc.K})"))
            _check_expr(problems, f"{path}.table.{i}.expression", e.expression, variables)
    _check_expr(problems, f"{path}.expression", data.expression, variables)


def semantic_problems(cfg: ExperimentConfig) -> list[tuple[str, str]]:
    """Cross-field checks that the schema cannot express."""
    p = []
    disc, trunc = cfg.discretization, cfg.truncation
    if disc.d not in (1, 2):
        p.append(("discretization.d", f"dimension must be 1 or 2, got {disc.d}"))
    if not _is_pow2(disc.n) or disc.n < 16:
        p.append(("discretization.n", f"points per axis must be a power of two >= 16, got {disc.n}"))
    if not disc.R > 0:
        p.append(("discretization.R", "half-width must be positive"))
    if not disc.T > 0:
        p.append(("discretization.T", "horizon must be positive"))
    if not disc.dt > 0:
        p.append(("discretization.dt", "time step must be positive"))
    elif disc.T > 0:
        if disc.dt > disc.T:
            p.append(("discretization.dt", f"dt = {disc.dt} exceeds T = {disc.T}"))
        elif abs(round(disc.T / disc.dt) * disc.dt - disc.T) > 1e-9 * disc.T:
            p.append(("discretization.dt", f"dt = {disc.dt} does not divide T = {disc.T}"))
    if trunc.P < 0:
        p.append(("truncation.P", "order must be >= 0"))
    if trunc.K < 1:
        p.append(("truncation.K", "dimension must be >= 1"))
    if p:
        return p
    d = disc.d

    op = cfg.problem.operator
    if op.kind == "polynomial":
        if not op.coefficients:
            p.append(("problem.operator.coefficients", "polynomial operator needs coefficients"))
        elif op.coefficients[-1] >= 0 and len(op.coefficients) > 1:
            p.append(("problem.operator.coefficients", "leading coefficient must be negative (parabolic symbol)"))
    elif op.coefficients is not None:
        p.append(("problem.operator.coefficients", f"{op.kind} takes no coefficients"))

    pot = cfg.problem.potential
    if pot.kind in ("delta", "delta_plus_bounded"):
        if pot.x0 is None or len(pot.x0) != d:
            p.append(("problem.potential.x0", f"delta location needs {d} coordinate(s)"))
        elif any(abs(c) >= disc.R for c in pot.x0):
            p.append(("problem.potential.x0", "delta location lies outside the box"))
    if pot.kind in ("bounded", "delta_plus_bounded"):
        if pot.expression is None:
            p.append(("problem.potential.expression", f"{pot.kind} potential needs an expression"))
        _check_expr(p, "problem.potential.expression", pot.expression, spatial_variables(d))
    if pot.kind == "finite_order":
        if pot.order is None or len(pot.order) != d or any(a < 0 for a in pot.order):
            p.append(("problem.potential.order", f"derivative order needs {d} non-negative entries"))
        if pot.carrier is None:
            p.append(("problem.potential.carrier", "finite_order potential needs a carrier expression"))
        _check_expr(p, "problem.potential.carrier", pot.carrier, spatial_variables(d))

    _check_data(p, "problem.force", cfg.problem.force, trunc, d, force=True)
    _check_data(p, "problem.initial", cfg.problem.initial, trunc, d, force=False)

    for path, m in (("regularization", cfg.regularization),
                    ("verification.alternate_mollifier", cfg.verification.alternate_mollifier)):
        if m is not None and not m.N_q > 0:
            p.append((f"{path}.N_q", "must be positive"))

    eps = cfg.schedule.eps()
    if not eps:
        p.append(("schedule", "schedule is empty"))
    elif any(not 0 < e <= 1 for e in eps):
        p.append(("schedule", "ε values must lie in (0, 1]"))
    elif any(b >= a for a, b in zip(eps, eps[1:])):
        p.append(("schedule", "ε values must be strictly decreasing"))
    elif cfg.regularization.scale_law == "log" and eps[0] >= 1:
        p.append(("schedule", "log-type scaling needs ε < 1"))

    v = cfg.verification
    if any(x < 0 for x in v.p_grid):
        p.append(("verification.p_grid", "Kondratiev orders must be >= 0"))
    if not v.s > 1:
        p.append(("verification.s", f"stochastic norm order must exceed 1, got {v.s}"))
    if "moderate" in v.checks and len(eps) < 3:
        p.append(("schedule", "moderateness needs at least 3 ε values"))
    if "unique" in v.checks and v.alternate_mollifier is None:
        p.append(("verification.alternate_mollifier", "uniqueness check needs a second mollifier"))
    if "consistent" in v.checks and pot.kind != "bounded":
        p.append(("verification.checks", "consistency needs a bounded continuous potential"))
    mc = v.monte_carlo
    if mc.n_samples < 2:
        p.append(("verification.monte_carlo.n_samples", "need at least 2 samples"))
    if any(not 0 <= t <= disc.T for t in mc.probe_times):
        p.append(("verification.monte_carlo.probe_times", "probe times must lie in [0, T]"))
    if any(len(pt) != d for pt in mc.probe_points):
        p.append(("verification.monte_carlo.probe_points", f"probe points need {d} coordinate(s)"))
    if cfg.preset is not None and cfg.preset not in PRESETS:
        p.append(("preset", f"unknown preset {cfg.preset!r}"))
    if not p:
        p.extend(_resolution_problems(cfg))
    return p


def _resolution_problems(cfg: ExperimentConfig):
    from .grid import GridSpec
    from .regularization import UnderResolvedError, _kernel

    d = cfg.discretization
    spec = GridSpec(d.d, d.R, d.n)
    m = build_mollifier(cfg.regularization)
    for e in cfg.schedule.eps():
        try:
            _kernel(m, e, spec)
        except UnderResolvedError as exc:
            return [("schedule", f"ε = {e:g} is not resolved by the grid (n = {d.n}, R = {d.R}); "
                                 f"smallest admissible ε ≈ {exc.smallest_eps:.4g}")]
        except ValueError as exc:
            return [("schedule", f"ε = {e:g}: {exc}")]
    return []


def build_mollifier(m: MollifierConfig):
    from .regularization import MollifierSpec
    return MollifierSpec(m.scale_law, m.N_q, m.perturbation_power, m.perturbation_amplitude)


# -- loading -----------------------------------------------------------------------

def _from_validation_error(exc: ValidationError, source=None) -> ConfigError:
    problems = []
    for err in exc.errors():
        path = ".".join(str(x) for x in err["loc"])
        if err["type"] == "extra_forbidden":
            problems.append((path, f"unknown key {err['loc'][-1]!r}"))
        elif err["type"] == "value_error":
            msg = str(err.get("ctx", {}).get("error", err["msg"]))
            try:
                problems.extend((pth, m) for pth, m in json.loads(msg))
                continue
            except (ValueError, TypeError):
                problems.append((path, msg))
        else:
            problems.append((path, err["msg"]))
    return ConfigError(problems, source)


def config_from_dict(raw: dict, preset: str | None = None, source=None) -> ExperimentConfig:
    if not isinstance(raw, dict):
        raise ConfigError([("", "config must be a JSON object")], source)
    raw = expand_preset(raw, preset)
    try:
        return ExperimentConfig.model_validate(raw)
    except ValidationError as exc:
        raise _from_validation_error(exc, source) from None


def load_config(path, preset: str | None = None) -> ExperimentConfig:
    """Parse, expand presets, validate. Errors carry field paths or line numbers."""
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError([("", f"cannot read config: {exc.strerror}")], str(path)) from None
    try:
        raw = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError([("", f"invalid JSON at line {exc.lineno}, column {exc.colno}: {exc.msg}")],
                          str(path)) from None
    return config_from_dict(raw, preset, str(path))


def preset_config(name: str) -> ExperimentConfig:
    return config_from_dict({"preset": name})


def config_schema() -> dict:
    return ExperimentConfig.model_json_schema()


def shipped_schema() -> dict:
    return json.loads(resources.files("kpde").joinpath("config.schema.json").read_text(encoding="utf-8"))

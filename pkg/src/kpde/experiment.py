"""Build domain objects from a config and run the experiment stages.

Stages are ``regularize`` (sup-norm trace of ``q_ε``), ``chaos`` (one chaos
solution per ε), ``det`` (the mean problem solved deterministically) and
the requested verification checks. Every number goes into the report's
``numeric`` block; wall-clock data goes into ``metadata`` so that reruns
compare equal on ``numeric``.
"""
from __future__ import annotations

import datetime as _dt
import math
import time
from dataclasses import dataclass, field

import numpy as np

from . import __version__
from ._parallel import resolve_threads
from .chaos import StochasticData, expand_inputs
from .config import ExperimentConfig, build_mollifier
from .expressions import compile_expression, space_time_variables, spatial_variables
from .grid import GridField, GridSpec
from .multi_index import MultiIndex, TruncationSet, weight_2N
from .output import OutputWriter, decay_rows, grid_rows, json_safe, trajectory_rows
from .parabolic import OperatorSpec, apriori_bound, solve_deterministic, source_l1_norms
from .regularization import PotentialSpec, regularize, sup_norm_trace
from .verification import (
    PASS,
    EpsilonSchedule,
    ProbeSet,
    StochasticProblem,
    build_very_weak_net,
    consistency_check,
    moderateness_check,
    monte_carlo_check,
    uniqueness_check,
)

STAGES = ("regularize", "det", "chaos", "verify")


# -- config -> domain ----------------------------------------------------------------

def build_grid(cfg: ExperimentConfig) -> GridSpec:
    d = cfg.discretization
    return GridSpec(d.d, d.R, d.n)


def build_operator(cfg: ExperimentConfig) -> OperatorSpec:
    op = cfg.problem.operator
    if op.kind == "laplacian":
        return OperatorSpec.laplacian()
    if op.kind == "bilaplacian":
        return OperatorSpec.bilaplacian()
    return OperatorSpec.polynomial(op.coefficients)


def build_potential(cfg: ExperimentConfig) -> PotentialSpec:
    pot, d, R = cfg.problem.potential, cfg.discretization.d, cfg.discretization.R
    var = spatial_variables(d)
    label = pot.expression or pot.carrier or pot.kind
    if pot.kind == "delta":
        return PotentialSpec.delta(pot.x0)
    if pot.kind == "bounded":
        return PotentialSpec.bounded_fn(compile_expression(pot.expression, var, R), label)
    if pot.kind == "delta_plus_bounded":
        return PotentialSpec.delta_plus_bounded(pot.x0, compile_expression(pot.expression, var, R), label)
    return PotentialSpec.finite_order(pot.order, compile_expression(pot.carrier, var, R), label)


def build_data(cfg: ExperimentConfig, which: str) -> StochasticData:
    data = getattr(cfg.problem, which)
    d, R = cfg.discretization.d, cfg.discretization.R
    var = space_time_variables(d) if which == "force" else spatial_variables(d)

    def cx(text):
        return None if text is None else compile_expression(text, var, R)

    if data.kind == "zero":
        return StochasticData.zero()
    if data.kind == "deterministic":
        return StochasticData.deterministic(cx(data.expression))
    if data.kind == "time_white_noise":
        return StochasticData.time_white_noise(data.K)
    if data.kind == "gaussian":
        return StochasticData.gaussian(cx(data.mean), [cx(f) for f in data.fluctuations])
    return StochasticData.explicit({MultiIndex.from_dense(e.gamma): cx(e.expression) for e in data.table})


def build_problem(cfg: ExperimentConfig) -> StochasticProblem:
    t = cfg.truncation
    return StochasticProblem(build_operator(cfg), build_potential(cfg), build_data(cfg, "force"),
                             build_data(cfg, "initial"), build_grid(cfg), cfg.discretization.T,
                             cfg.discretization.dt, TruncationSet(t.P, t.K))


def build_schedule(cfg: ExperimentConfig) -> EpsilonSchedule:
    return EpsilonSchedule(tuple(cfg.schedule.eps()))


# -- report ------------------------------------------------------------------------

@dataclass
class RunReport:
    """Everything a run produced; ``numeric`` is reproducible bit for bit."""

    config: dict
    config_hash: str
    numeric: dict = field(default_factory=dict)
    verdicts: dict = field(default_factory=dict)
    manifest: list = field(default_factory=list)
    complete: bool = False
    error: str | None = None
    metadata: dict = field(default_factory=dict)

    @property
    def passed(self) -> bool:
        return all(v == PASS for v in self.verdicts.values())

    @property
    def exit_code(self) -> int:
        if not self.complete:
            return 3
        return 0 if self.passed else 1

    def to_dict(self) -> dict:
        return json_safe({
            "tool": "kpde", "version": __version__, "config_hash": self.config_hash,
            "config": self.config, "numeric": self.numeric, "verdicts": self.verdicts,
            "manifest": self.manifest, "complete": self.complete, "error": self.error,
            "metadata": self.metadata,
        })


def _now():
    return _dt.datetime.now(_dt.timezone.utc).isoformat(timespec="seconds")


def _tag(j: int) -> str:
    return f"eps{j + 1:02d}"


def _fmt_p(p: float) -> str:
    return repr(float(p))


# -- stages --------------------------------------------------------------------------

def stage_regularize(cfg, problem, writer: OutputWriter):
    eps = cfg.schedule.eps()
    m = build_mollifier(cfg.regularization)
    trace = sup_norm_trace(problem.potential, m, eps, problem.grid)
    writer.write_csv("regularize.csv", ["eps", "sup_norm", "l_eps"], trace)
    for j, e in enumerate(eps):
        q = regularize(problem.potential, m, e, problem.grid)
        writer.write_csv(f"q_{_tag(j)}.csv", *grid_rows(problem.grid, {"q_eps": q.values}))
    return {"eps": eps, "sup_norm": [r[1] for r in trace], "l_eps": [r[2] for r in trace]}


def _det_potential(cfg, problem):
    if not problem.potential.is_singular:
        return problem.sampled_potential(), None
    e = cfg.schedule.eps()[-1]
    return regularize(problem.potential, build_mollifier(cfg.regularization), e, problem.grid), e


def stage_det(cfg, problem, writer: OutputWriter):
    """The ``γ = 0`` problem, i.e. the equation for the mean."""
    spec = problem.grid
    q, e = _det_potential(cfg, problem)
    forces, initials = problem.expanded()
    zero = MultiIndex.zero()
    g = initials.get(zero, np.zeros(spec.shape))
    f = forces.get(zero)
    u = solve_deterministic(problem.op, q, g, problem.T, problem.dt, f=f, spec=spec)
    norms = u.l2_norms()
    bound = apriori_bound(problem.op, q.sup_norm(), u.times, spec.l2_norm(g),
                          source_l1_norms(f, spec, u.times), spec)
    writer.write_csv("trajectory.csv", *trajectory_rows(spec, u.times, u.values))
    writer.write_csv("norms.csv", ["t", "l2_norm", "apriori_bound"],
                     [[t, a, b] for t, a, b in zip(u.times, norms, bound)])
    return {"eps": e, "q_sup": q.sup_norm(), "sup_l2": float(np.max(norms)),
            "final_l2": float(norms[-1]),
            "within_apriori_bound": bool(np.all(norms <= bound * (1 + 1e-6)))}


def _coefficient_table(U, p_grid, K):
    rows = []
    for g in U.ordered():
        xn = U.coefficients[g].sup_l2()
        for p in p_grid:
            w = weight_2N(g, p)
            rows.append([p, "[" + " ".join(map(str, g.dense(K))) + "]", xn, w, xn * xn * w])
    return rows


def stage_chaos(cfg, problem, writer: OutputWriter, threads):
    spec, K = problem.grid, problem.trunc.max_dim
    p_grid = cfg.verification.p_grid
    net = build_very_weak_net(problem, build_mollifier(cfg.regularization), build_schedule(cfg), threads)
    members = []
    for j, (e, U) in enumerate(zip(net.schedule, net.members)):
        writer.write_csv(f"coefficients_{_tag(j)}.csv", ["p", "gamma", "X_norm", "weight_p", "contribution"],
                         _coefficient_table(U, p_grid, K))
        mean, var = U.mean_variance()
        writer.write_csv(f"mean_variance_{_tag(j)}.csv",
                         *grid_rows(spec, {"mean": mean.values[-1], "variance": var.values[-1]}))
        members.append({
            "eps": e, "q_sup": net.potentials[j].sup_norm(),
            "n_coefficients": len(U.coefficients),
            "coefficients": [g.dense(K) for g in U.ordered()],
            "max_order": max((g.order for g in U.coefficients), default=0),
            "x_norms": [U.coefficients[g].sup_l2() for g in U.ordered()],
            "kondratiev_norms": {_fmt_p(p): U.kondratiev_norm(p) for p in p_grid},
            "tail_indicator": U.tail_indicator(),
        })
    return net, {"members": members}


def _check_moderate(cfg, problem, writer, threads, net=None):
    v = cfg.verification
    if net is None:
        net = build_very_weak_net(problem, build_mollifier(cfg.regularization), build_schedule(cfg), threads)
    r = moderateness_check(net, v.s, T=problem.T, M=problem.op.M, residual_threshold=v.residual_threshold)
    writer.write_csv("decay_moderate.csv", *decay_rows(r.eps, {"norm": r.norms}))
    return r.to_dict()


def _check_unique(cfg, problem, writer, threads):
    v = cfg.verification
    pair = (build_mollifier(cfg.regularization), build_mollifier(v.alternate_mollifier))
    r = uniqueness_check(problem, pair, build_schedule(cfg), s=v.s, margin=v.margin, threads=threads)
    cols = {"potential_difference": r.potential_differences}
    if r.solution_differences:
        cols["solution_difference"] = r.solution_differences
    writer.write_csv("decay_unique.csv", *decay_rows(r.eps, cols))
    return r.to_dict()


def _check_consistent(cfg, problem, writer, threads):
    v = cfg.verification
    r = consistency_check(problem, build_mollifier(cfg.regularization), build_schedule(cfg),
                          s=v.s, tol=v.tail_tolerance, threads=threads)
    writer.write_csv("decay_consistent.csv", *decay_rows(r.eps, {"error": r.errors}))
    return r.to_dict()


def _check_mc(cfg, problem, writer, threads):
    mc = cfg.verification.monte_carlo
    q, e = _det_potential(cfg, problem)
    probes = ProbeSet.grid(mc.probe_times, mc.probe_points)
    r = monte_carlo_check(problem, mc.n_samples, cfg.verification.seed, probes, q=q,
                          n_sigma=mc.n_sigma, threads=threads)
    est = r.estimate
    rows = []
    i = 0
    for t in probes.times:
        for pt in probes.points:
            rows.append([t, *pt, est.mean[i], est.se_mean[i], r.chaos_mean[i],
                         est.variance[i], est.se_variance[i], r.chaos_variance[i]])
            i += 1
    header = ["t"] + ["x", "y"][: problem.grid.d] + ["mc_mean", "se_mean", "chaos_mean",
                                                      "mc_variance", "se_variance", "chaos_variance"]
    writer.write_csv("mc_probes.csv", header, rows)
    out = r.to_dict()
    out["eps"] = e
    return out


CHECK_FUNCTIONS = {"moderate": _check_moderate, "unique": _check_unique,
                   "consistent": _check_consistent, "mc": _check_mc}


def run_experiment(cfg: ExperimentConfig, stages=STAGES, checks=None, out_dir=None,
                   threads: int | None = None) -> RunReport:
    """Run ``stages`` and write every artifact plus ``report.json``.

    A failing stage stops the run; the partial report is still written with
    ``complete = false`` and the error message.
    """
    threads = resolve_threads(threads)
    checks = list(cfg.verification.checks if checks is None else checks)
    writer = OutputWriter(out_dir or cfg.output.directory, csv="csv" in cfg.output.formats)
    report = RunReport(cfg.model_dump(mode="json"), cfg.config_hash())
    timings = {}
    report.metadata = {"started": _now(), "threads": threads, "timings_s": timings}
    problem = build_problem(cfg)
    numeric = report.numeric
    numeric["grid"] = problem.grid.to_dict()
    numeric["diffusion_length"] = math.sqrt(2 * problem.T)
    net = None

    def timed(name, fn, *args):
        t0 = time.perf_counter()
        try:
            return fn(*args)
        finally:
            timings[name] = time.perf_counter() - t0

    try:
        if "regularize" in stages:
            numeric["regularization"] = timed("regularize", stage_regularize, cfg, problem, writer)
        if "det" in stages:
            numeric["deterministic"] = timed("det", stage_det, cfg, problem, writer)
        if "chaos" in stages:
            net, numeric["chaos"] = timed("chaos", stage_chaos, cfg, problem, writer, threads)
        if "verify" in stages:
            numeric["checks"] = {}
            for name in checks:
                extra = (net,) if name == "moderate" else ()
                res = timed(f"check_{name}", CHECK_FUNCTIONS[name], cfg, problem, writer, threads, *extra)
                numeric["checks"][name] = res
                writer.write_json(f"verify_{name}.json", res)
                report.verdicts[name] = res["verdict"]
        report.complete = True
    except Exception as exc:  # reported, not swallowed: exit code 3
        report.error = f"{type(exc).__name__}: {exc}"
    numeric["verdicts"] = dict(report.verdicts)
    if "json" in cfg.output.formats:
        writer.write_json("config.json", report.config)
    report.manifest = list(writer.manifest)
    report.metadata["finished"] = _now()
    writer.write_json("report.json", report.to_dict())
    return report

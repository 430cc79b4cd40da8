"""Campaign runner, data profiles, and report emission.

A campaign runs the solver over a list of problems under a per-problem
evaluation budget and records, for each problem, the trace of best certified
objective values against cumulative evaluation counts.  Two budget rules are
supported, matching the two ways of metering a solver that can evaluate
components independently:

* ``component``: the budget is ``100 * r_p * (n_max + 1)`` component
  evaluations and trace abscissas count component evaluations; profile
  abscissas are ``t / (r_p * (n_p + 1))``.
* ``fmin``: the budget is ``100 * (n_max + 1)`` full objective evaluations and
  trace abscissas count full evaluations; profile abscissas are
  ``t / (n_p + 1)``.

Either way the abscissa unit is one simplex gradient of the objective (n+1
full evaluations).  A problem counts as solved with tolerance ``tau`` at the
first ``t`` where

    f_best(t) <= f_L + tau * (f(x0) - f_L),

with ``f_L`` the reference value per problem (by default the best value found
by any participating run, optionally overridden with known values).  The data
profile is the running fraction of problems solved as a function of the
simplex-gradient budget.
"""

from __future__ import annotations

import csv
import json
import math
import os
from dataclasses import dataclass, field, replace

import numpy as np

from .problem import EvalLedger, LovoProblem
from .solver import SolverConfig, solve

BUDGET_RULES = ("component", "fmin")


@dataclass
class RunTrace:
    """Best-value trace of one (problem, solver) run."""

    problem_name: str
    n_p: int
    r_p: int
    metering: str
    budget: int
    f_x0: float
    samples: list = field(default_factory=list)      # (t, f_best), certified
    provisional: list = field(default_factory=list)  # (t, f), component upper bounds
    status: str = ""
    x_final: np.ndarray | None = None
    i_final: int = 1

    @property
    def best_value(self) -> float:
        return self.samples[-1][1] if self.samples else math.inf

    def first_crossing(self, threshold: float):
        """Smallest t with f_best(t) <= threshold, or None."""
        for t, value in self.samples:
            if value <= threshold:
                return t
        return None

    def profile_denominator(self) -> float:
        if self.metering == "fmin":
            return self.n_p + 1.0
        return self.r_p * (self.n_p + 1.0)


def campaign_budget(problem: LovoProblem, n_max: int, budget_rule: str) -> int:
    """Per-problem evaluation budget for the given rule."""
    if budget_rule == "component":
        return 100 * problem.r * (n_max + 1)
    if budget_rule == "fmin":
        return 100 * (n_max + 1)
    raise ValueError(f"unknown budget rule {budget_rule!r}")


def _trace_from_ledger(ledger: EvalLedger, metering: str):
    certified = []
    provisional = []
    for point in ledger.trace:
        t = point.t_fmin if metering == "fmin" else point.t_component
        certified.append((t, point.value))
    for point in ledger.provisional:
        t = point.t_fmin if metering == "fmin" else point.t_component
        provisional.append((t, point.value))
    return certified, provisional


def run_campaign(problems: list, config: SolverConfig | None = None,
                 budget_rule: str = "component", callback=None,
                 sample_log=None) -> list:
    """Run the solver over every problem; one RunTrace per problem.

    The solver is halted at the budget (a trailing full evaluation may
    overshoot a component budget by at most ``r - 1`` single evaluations).  A
    run that dies on an oracle or geometry failure keeps its trace up to the
    failure, with the exception recorded in ``status``.  ``sample_log`` is the
    solver's per-iteration debug hook, called here as
    ``sample_log(problem_name, k, sample)``.
    """
    if budget_rule not in BUDGET_RULES:
        raise ValueError(f"unknown budget rule {budget_rule!r}")
    config = config if config is not None else SolverConfig()
    n_max = max((p.n for p in problems), default=0)
    traces = []
    for problem in problems:
        budget = campaign_budget(problem, n_max, budget_rule)
        ledger = EvalLedger(problem.r, budget=budget, metering=budget_rule)
        run_config = replace(config, budget=budget)
        log = None
        if sample_log is not None:
            log = lambda k, sample, _name=problem.name: sample_log(_name, k, sample)
        try:
            result = solve(problem, run_config, ledger=ledger, sample_log=log)
            status = result.status
            x_final, i_final = result.x_final, result.i_final
        except Exception as exc:  # failed run: keep the partial trace
            status = f"error:{type(exc).__name__}"
            x_final, i_final = None, 1
        certified, provisional = _trace_from_ledger(ledger, budget_rule)
        trace = RunTrace(
            problem_name=problem.name, n_p=problem.n, r_p=problem.r,
            metering=budget_rule, budget=budget,
            f_x0=certified[0][1] if certified else math.inf,
            samples=certified, provisional=provisional, status=status,
            x_final=x_final, i_final=i_final,
        )
        traces.append(trace)
        if callback is not None:
            callback(trace)
    traces.sort(key=lambda tr: tr.problem_name)
    return traces


def default_f_l(traces: list, overrides: dict | None = None) -> dict:
    """Per-problem reference values: best value across runs, then overrides."""
    table: dict = {}
    for trace in traces:
        best = trace.best_value
        if trace.problem_name not in table or best < table[trace.problem_name]:
            table[trace.problem_name] = best
    if overrides:
        table.update(overrides)
    return table


@dataclass
class DataProfile:
    """Solved-fraction curve over the simplex-gradient budget, for one tolerance."""

    tau: float
    n_problems: int
    solve_kappas: dict  # problem name -> kappa, or None if never solved

    def curve(self):
        """Step-curve vertices as (kappas, fractions), both sorted."""
        solved = sorted(k for k in self.solve_kappas.values() if k is not None)
        kappas = np.asarray(solved, dtype=float)
        fractions = np.arange(1, kappas.size + 1) / max(self.n_problems, 1)
        return kappas, fractions

    def fraction_at(self, kappa: float) -> float:
        kappas, fractions = self.curve()
        idx = np.searchsorted(kappas, kappa, side="right")
        return float(fractions[idx - 1]) if idx > 0 else 0.0

    def rows(self):
        """CSV rows (tau, kappa, solved_fraction) at the curve's step points."""
        kappas, fractions = self.curve()
        return [(self.tau, float(k), float(f)) for k, f in zip(kappas, fractions)]


def data_profile(traces: list, tau: float, f_l_table: dict) -> DataProfile:
    """Solved-fraction profile of the traces at tolerance ``tau``.

    ``f_l_table`` must provide a reference value for every traced problem.
    """
    solve_kappas = {}
    for trace in traces:
        try:
            f_l = f_l_table[trace.problem_name]
        except KeyError:
            raise ValueError(
                f"no reference value for problem {trace.problem_name!r}"
            ) from None
        threshold = f_l + tau * (trace.f_x0 - f_l)
        t = trace.first_crossing(threshold)
        solve_kappas[trace.problem_name] = (
            None if t is None else t / trace.profile_denominator()
        )
    return DataProfile(tau=tau, n_problems=len(traces), solve_kappas=solve_kappas)


def summarize_simplex_gradients(profile: DataProfile, fractions: list) -> list:
    """Smallest budget reaching each solved fraction: rows (fraction, kappa).

    Budgets are in simplex gradients; unreachable fractions report ``inf``.
    """
    solved = sorted(k for k in profile.solve_kappas.values() if k is not None)
    table = []
    for fraction in fractions:
        if not 0.0 < fraction <= 1.0:
            raise ValueError(f"fractions must lie in (0, 1], got {fraction}")
        need = math.ceil(fraction * profile.n_problems)
        kappa = solved[need - 1] if 0 < need <= len(solved) else math.inf
        table.append((float(fraction), float(kappa)))
    return table


# ---------------------------------------------------------------------------
# Emission: CSV / JSON / SVG, all byte-deterministic for identical inputs.

def _format_number(x: float) -> str:
    if x == math.inf:
        return "inf"
    return format(x, ".10g")


def emit(obj, path, fmt: str | None = None) -> str:
    """Write a profile (or dict of tagged profiles) or a summary table to ``path``.

    ``fmt`` is one of ``csv``, ``json``, ``svg``; by default it is inferred
    from the file extension.  Output is deterministic: emitting the same
    object twice yields byte-identical files.
    """
    if fmt is None:
        fmt = os.path.splitext(str(path))[1].lstrip(".").lower()
    if fmt not in ("csv", "json", "svg"):
        raise ValueError(f"unknown format {fmt!r}")

    if isinstance(obj, DataProfile):
        profiles = {"": obj}
    elif isinstance(obj, dict) and all(isinstance(v, DataProfile) for v in obj.values()):
        profiles = obj
    elif isinstance(obj, list):  # summary table
        return _emit_table(obj, path, fmt)
    else:
        raise TypeError(f"cannot emit object of type {type(obj).__name__}")

    if fmt == "csv":
        lines = ["tau,kappa,solved_fraction"]
        for tag in sorted(profiles):
            for tau, kappa, frac in profiles[tag].rows():
                lines.append(
                    f"{_format_number(tau)},{_format_number(kappa)},{_format_number(frac)}"
                )
        text = "\n".join(lines) + "\n"
    elif fmt == "json":
        doc = {
            tag: {
                "tau": prof.tau,
                "n_problems": prof.n_problems,
                "solve_kappas": {
                    name: prof.solve_kappas[name] for name in sorted(prof.solve_kappas)
                },
            }
            for tag, prof in profiles.items()
        }
        text = json.dumps(doc if len(profiles) > 1 or "" not in profiles else doc[""],
                          indent=2, sort_keys=True) + "\n"
    else:
        text = render_profile_svg(profiles)
    with open(path, "w") as fh:
        fh.write(text)
    return str(path)


def _emit_table(table: list, path, fmt: str) -> str:
    if fmt == "svg":
        raise ValueError("summary tables are emitted as csv or json only")
    if fmt == "csv":
        lines = ["fraction,kappa"]
        for fraction, kappa in table:
            lines.append(f"{_format_number(fraction)},{_format_number(kappa)}")
        text = "\n".join(lines) + "\n"
    else:
        text = json.dumps(
            [{"fraction": fr, "kappa": (None if math.isinf(k) else k)}
             for fr, k in table],
            indent=2,
        ) + "\n"
    with open(path, "w") as fh:
        fh.write(text)
    return str(path)


_SVG_COLORS = ("#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b")


def render_profile_svg(profiles: dict, width=640, height=480, kappa_max=None) -> str:
    """Minimal static SVG: one step polyline per tagged profile, labeled axes."""
    ml, mr, mt, mb = 60, 20, 20, 50
    pw, ph = width - ml - mr, height - mt - mb
    if kappa_max is None:
        kappa_max = 0.0
        for prof in profiles.values():
            kappas, _ = prof.curve()
            if kappas.size:
                kappa_max = max(kappa_max, float(kappas[-1]))
        kappa_max = max(kappa_max, 1.0)

    def sx(kappa):
        return ml + pw * min(kappa, kappa_max) / kappa_max

    def sy(fraction):
        return mt + ph * (1.0 - fraction)

    out = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" '
        f'viewBox="0 0 {width} {height}">',
        f'<rect x="{ml}" y="{mt}" width="{pw}" height="{ph}" fill="none" '
        'stroke="#000000"/>',
        f'<text x="{ml + pw / 2:.1f}" y="{height - 12}" text-anchor="middle" '
        'font-size="14">simplex gradients</text>',
        f'<text x="16" y="{mt + ph / 2:.1f}" text-anchor="middle" font-size="14" '
        f'transform="rotate(-90 16 {mt + ph / 2:.1f})">fraction solved</text>',
    ]
    for frac in (0.0, 0.25, 0.5, 0.75, 1.0):
        out.append(
            f'<text x="{ml - 6}" y="{sy(frac) + 4:.1f}" text-anchor="end" '
            f'font-size="11">{frac:g}</text>'
        )
    for tick in range(5):
        kappa = kappa_max * tick / 4.0
        out.append(
            f'<text x="{sx(kappa):.1f}" y="{height - 32}" text-anchor="middle" '
            f'font-size="11">{kappa:g}</text>'
        )
    for idx, tag in enumerate(sorted(profiles)):
        prof = profiles[tag]
        color = _SVG_COLORS[idx % len(_SVG_COLORS)]
        kappas, fractions = prof.curve()
        pts = [(sx(0.0), sy(0.0))]
        level = 0.0
        for kappa, fraction in zip(kappas, fractions):
            pts.append((sx(kappa), sy(level)))
            pts.append((sx(kappa), sy(fraction)))
            level = fraction
        pts.append((sx(kappa_max), sy(level)))
        coords = " ".join(f"{x:.2f},{y:.2f}" for x, y in pts)
        out.append(f'<polyline points="{coords}" fill="none" stroke="{color}" '
                   'stroke-width="1.5"/>')
        label = tag if tag else f"tau={prof.tau:g}"
        out.append(
            f'<text x="{ml + 8}" y="{mt + 16 + 16 * idx}" font-size="12" '
            f'fill="{color}">{label}</text>'
        )
    out.append("</svg>")
    return "\n".join(out) + "\n"


# ---------------------------------------------------------------------------
# Trace files: one CSV per problem plus a JSON manifest, as used by the CLI.

def write_trace(trace: RunTrace, directory):
    base = os.path.join(str(directory), _safe_name(trace.problem_name))
    with open(base + ".csv", "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["t", "f_best"])
        for t, value in trace.samples:
            writer.writerow([t, repr(float(value))])
    manifest = {
        "problem": trace.problem_name,
        "n": trace.n_p,
        "r": trace.r_p,
        "budget": trace.budget,
        "status": trace.status,
        "metering": trace.metering,
        "f_x0": trace.f_x0,
    }
    if trace.x_final is not None:
        manifest["x_final"] = list(np.asarray(trace.x_final, dtype=float))
        manifest["i_final"] = trace.i_final
    with open(base + ".json", "w") as fh:
        json.dump(manifest, fh, indent=2, sort_keys=True)
        fh.write("\n")


def read_traces(directory) -> list:
    traces = []
    for name in sorted(os.listdir(directory)):
        if not name.endswith(".json") or name == "manifest.json":
            continue
        with open(os.path.join(str(directory), name)) as fh:
            manifest = json.load(fh)
        samples = []
        with open(os.path.join(str(directory), name[:-5] + ".csv")) as fh:
            reader = csv.reader(fh)
            next(reader)
            for row in reader:
                samples.append((int(row[0]), float(row[1])))
        traces.append(RunTrace(
            problem_name=manifest["problem"], n_p=manifest["n"], r_p=manifest["r"],
            metering=manifest.get("metering", "component"),
            budget=manifest["budget"], f_x0=manifest.get("f_x0", math.inf),
            samples=samples, status=manifest.get("status", ""),
            x_final=(np.asarray(manifest["x_final"], dtype=float)
                     if "x_final" in manifest else None),
            i_final=manifest.get("i_final", 1),
        ))
    return traces


def _safe_name(name: str) -> str:
    return "".join(c if c.isalnum() or c in "-_." else "_" for c in name)

"""Derivative-free trust-region loop for min-of-components objectives.

Each iteration works on one component, the one known (or last certified) to
attain the pointwise minimum at the current iterate, through a linear
interpolation model maintained over n+1 sample points.  Two radii evolve
independently: ``delta`` bounds the sample region and so governs model
quality, ``Delta`` bounds the step.  An iteration passes through four phases:

* criticality: when ``delta > beta * pi`` the model cannot be trusted relative
  to its apparent stationarity, so both radii shrink and nothing is evaluated;
* step acceptance: the trust-region step is evaluated and accepted when the
  reduction ratio reaches ``eta``; on acceptance the working index is rechosen
  from the active set whenever a full objective evaluation certified it;
* radii adjustment: an accepted step that swaps the working component inflates
  both radii by ``tau4``, at most ``Gamma_max + 1`` times between successful
  iterations (the ``Gamma`` counter, reset whenever ``rho >= eta1``);
* radii update: otherwise radii shrink by ``tau1`` below ``eta1``, grow by
  ``tau3`` after a full-length step with ``rho > eta2``, and stay put between.

Evaluating the full objective costs one evaluation of every component, so by
default the reduction ratio is estimated from the working component alone (a
certified underestimate) for up to ``nrhomax`` consecutive candidate
evaluations before a full evaluation is forced.  Sample maintenance is
single-point exchange: productive trust-region points enter the sample
directly, anything else triggers a geometry-improvement step.  Index swaps
rebuild the sample values for the new component at the unchanged point
locations (n+1 evaluations).
"""

from __future__ import annotations

import json
import logging
import math
from dataclasses import dataclass, field

import numpy as np

from .errors import BudgetExceededError, GeometryError, PointRejectedError
from .model import (
    SampleSet,
    build_model,
    exchange_point,
    initial_sample,
    model_stationarity,
    promote_to_base,
    rebuild_for_index,
    replace_point,
)
from .problem import EvalLedger, LovoProblem, choose_imin, eval_component, eval_fmin
from .subproblem import (
    FULL_STEP_RTOL,
    altmov_linear,
    check_sufficient_decrease,
    select_target_for_altmov,
    trsbox_linear,
)

_log = logging.getLogger(__name__)

# Iteration kinds.  The first six partition the evaluated iterations the way
# the two thresholds and the adjustment phase do; geometry-improvement
# iterations are reported as "altmov" regardless of whether a trust-region
# candidate was evaluated first.
KIND_CRITICALITY = "criticality"
KIND_UNSUCCESSFUL = "unsuccessful"
KIND_ACCEPTABLE_ADJUSTED = "acceptable_adjusted"
KIND_ACCEPTABLE_PLAIN = "acceptable_plain"
KIND_SUCCESSFUL_ADJUSTED = "successful_adjusted"
KIND_SUCCESSFUL_PLAIN = "successful_plain"
KIND_ALTMOV = "altmov"

STATUS_SUCCESS = "success"
STATUS_STALLED = "stalled"
STATUS_BUDGET = "budget_exhausted"
STATUS_MAXCRIT = "maxcrit_exceeded"


@dataclass
class SolverConfig:
    """All loop parameters; orderings are asserted at construction.

    The thresholds follow common trust-region practice and are configuration,
    not contract; ``beta = 1``, ``delta_min = 1e-8`` and ``nrhomax = 3`` are
    the tuned defaults.  ``maxalt`` and ``maxcrit`` default to n when left as
    None.  ``budget`` caps the total number of component evaluations.
    """

    beta: float = 1.0
    delta0: float = 1.0
    Delta0: float = 1.0
    tau1: float = 0.5
    tau2: float = 0.95
    tau3: float = 2.0
    tau4: float = 2.0
    eta: float = 0.05
    eta1: float = 0.25
    eta2: float = 0.75
    Gamma_max: int = 3
    nrhomax: int = 3
    delta_min: float = 1e-8
    maxalt: int | None = None
    maxcrit: int | None = None
    budget: int | None = None
    theta_diag: float = 0.01
    use_cheap_rho: bool = True

    def __post_init__(self):
        if not self.beta > 0:
            raise ValueError("beta must be positive")
        if not 0 < self.delta0 <= self.Delta0:
            raise ValueError("need 0 < delta0 <= Delta0")
        if not 0 < self.tau1 <= self.tau2 < 1 <= self.tau3 <= self.tau4:
            raise ValueError("need 0 < tau1 <= tau2 < 1 <= tau3 <= tau4")
        if not (0 <= self.eta < self.eta1 <= self.eta2 and 0 < self.eta1 < 1):
            raise ValueError("need 0 <= eta < eta1 <= eta2 with eta1 in (0, 1)")
        if self.Gamma_max < 1:
            raise ValueError("Gamma_max must be at least 1")
        if self.nrhomax < 1:
            raise ValueError("nrhomax must be at least 1")
        if not self.delta_min > 0:
            raise ValueError("delta_min must be positive")
        if not self.theta_diag > 0:
            raise ValueError("theta_diag must be positive")

    def maxalt_for(self, n: int) -> int:
        return self.maxalt if self.maxalt is not None else n

    def maxcrit_for(self, n: int) -> int:
        # The stationarity measure is frozen while consecutive criticality
        # iterations shrink the sample radius, so after a sudden drop in the
        # measure (typical when the iterate lands on an active bound) a spell
        # must be able to ride the radius all the way down to delta_min.
        if self.maxcrit is not None:
            return self.maxcrit
        ride = math.ceil(math.log(self.delta0 / self.delta_min)
                         / math.log(1.0 / self.tau1))
        return max(n, ride + n)


@dataclass
class SolverState:
    """The evolving iterate; owned by exactly one run."""

    x: np.ndarray
    i: int
    delta: float
    Delta: float
    Gamma: int
    fx: float
    sample: SampleSet
    model: object
    rho_cheap_streak: int = 0
    consec_crit: int = 0
    consec_alt: int = 0
    repair_streak: int = 0       # consecutive frozen geometry repairs
    model_doubted: bool = False  # last evaluated step had a poor ratio


@dataclass
class StepOutcome:
    """Snapshot of one iteration, sufficient to replay the radii state machine."""

    k: int
    kind: str
    rho: float
    rho_hat: float
    rho_defined: bool     # a trust-region candidate was evaluated
    rho_was_cheap: bool
    index_swapped: bool
    d: np.ndarray
    full_length: bool
    adjusted: bool
    radii_frozen: bool    # geometry iteration that left both radii unchanged
    pi: float
    delta: float          # post-update sample radius
    Delta: float          # post-update trust-region radius
    Gamma: int
    index: int
    fx: float
    evals_total: int

    def record(self) -> dict:
        return {
            "k": self.k,
            "kind": self.kind,
            "rho": self.rho,
            "rho_cheap": self.rho_was_cheap,
            "delta": self.delta,
            "Delta": self.Delta,
            "index": self.index,
            "fx": self.fx,
            "evals_total": self.evals_total,
        }


@dataclass
class SolveResult:
    """Terminal state of one run plus its full iteration history."""

    x_final: np.ndarray
    f_final: float
    status: str
    iterations: int
    ledger: EvalLedger
    history: list = field(default_factory=list)
    i_final: int = 1
    problem_name: str = ""

    def history_records(self) -> list:
        return [outcome.record() for outcome in self.history]

    def write_history_jsonl(self, path):
        with open(path, "w") as fh:
            for rec in self.history_records():
                fh.write(json.dumps(rec, sort_keys=True))
                fh.write("\n")


def _criticality_Delta_factor(config: SolverConfig) -> float:
    # Any factor in [tau1, tau2] is admissible; the midpoint is used.
    return 0.5 * (config.tau1 + config.tau2)


# A sample point farther than this multiple of the trust-region radius makes
# the reduction ratio meaningless; geometry is repaired before stepping.
STALE_FACTOR = 2.0

# Consecutive geometry-repair iterations allowed before a trust-region step is
# forced; bounds the repair cost of one poor-ratio episode.
def _repair_cap(n: int) -> int:
    return 2 * n


def _geometry_iteration(state: SolverState, problem: LovoProblem,
                        config: SolverConfig, ledger: EvalLedger,
                        pi: float, stale: bool) -> StepOutcome:
    """Geometry-improvement iteration: one sample point is resampled.

    On stale geometry the farthest point is forcibly replaced and the radii
    stay put (repair work carries no evidence about the radii); on fresh
    geometry there is nothing left to repair at this scale, so both radii
    shrink instead.  State is only mutated once every fallible operation has
    succeeded, so a run recovering from a mid-iteration failure never sees a
    half-applied iteration.
    """
    box = problem.box
    target = select_target_for_altmov(state.sample)
    d_alt, flat = altmov_linear(state.sample, box, state.delta, target)
    repaired = False
    if not flat:
        x_alt = box.project(state.sample.base + d_alt)
        f_alt = eval_component(problem, ledger, state.i, x_alt)
        if problem.r > 1:
            ledger.note_value(f_alt, certified=False)
        try:
            if stale:
                replace_point(state.sample, target, x_alt, f_alt)
            else:
                exchange_point(state.sample, x_alt, f_alt)
            repaired = True
        except PointRejectedError:
            _log.debug("geometry point rejected by the sample exchange")
    model = build_model(state.sample)

    # commit; frozen repairs are gate maintenance, not the "no further
    # improvement" iterations the stall counter watches, so they age their
    # own streak instead
    frozen = stale and repaired
    if frozen:
        state.repair_streak += 1
    else:
        state.delta *= config.tau1
        state.Delta *= config.tau1
        state.repair_streak = 0
        state.consec_alt += 1
    state.model = model
    state.x = state.sample.base.copy()
    state.fx = float(state.sample.values[0])
    state.consec_crit = 0
    return StepOutcome(
        k=-1, kind=KIND_ALTMOV, rho=0.0, rho_hat=0.0, rho_defined=False,
        rho_was_cheap=False, index_swapped=False,
        d=np.asarray(d_alt, dtype=float).copy(), full_length=False,
        adjusted=False, radii_frozen=frozen, pi=pi, delta=state.delta,
        Delta=state.Delta, Gamma=state.Gamma, index=state.i, fx=state.fx,
        evals_total=ledger.total_component_evals,
    )


def iterate(state: SolverState, problem: LovoProblem, config: SolverConfig,
            ledger: EvalLedger) -> StepOutcome:
    """Run exactly one iteration, mutating ``state`` and ``ledger``."""
    box = problem.box
    pi = model_stationarity(state.model, box)

    # --- criticality phase: radii shrink, nothing is evaluated.
    if state.delta > config.beta * pi:
        state.delta *= config.tau1
        state.Delta *= _criticality_Delta_factor(config)
        state.consec_crit += 1
        state.consec_alt = 0
        state.repair_streak = 0
        return StepOutcome(
            k=-1, kind=KIND_CRITICALITY, rho=0.0, rho_hat=0.0, rho_defined=False,
            rho_was_cheap=False, index_swapped=False, d=np.zeros(problem.n),
            full_length=False, adjusted=False, radii_frozen=False, pi=pi,
            delta=state.delta, Delta=state.Delta, Gamma=state.Gamma,
            index=state.i, fx=state.fx, evals_total=ledger.total_component_evals,
        )

    # --- geometry gate: after a poor reduction ratio, a sample point far
    # outside the trust region is the usual culprit; repair before stepping
    # again rather than shrinking the radii on a meaningless ratio.
    if state.model_doubted and state.repair_streak < _repair_cap(problem.n):
        far = float(np.max(np.linalg.norm(
            state.sample.points[1:] - state.sample.base, axis=1)))
        if far > STALE_FACTOR * state.Delta:
            return _geometry_iteration(state, problem, config, ledger, pi,
                                       stale=True)
        state.model_doubted = False

    d = trsbox_linear(state.model, box, state.Delta)
    dnorm = float(np.linalg.norm(d))
    full_length = dnorm >= state.Delta * (1.0 - FULL_STEP_RTOL)
    predicted = -float(state.model.g @ d)
    if dnorm < 0.5 * state.Delta or predicted <= 0.0:
        # Short or non-descending steps are not worth an evaluation.
        return _geometry_iteration(state, problem, config, ledger, pi, stale=False)

    if not check_sufficient_decrease(state.model, d, pi, state.Delta,
                                     config.theta_diag):
        _log.warning("trust-region step failed the sufficient-decrease "
                     "diagnostic (pi=%.3e, Delta=%.3e)", pi, state.Delta)
    x_new = box.project(state.x + d)
    use_full = (
        not config.use_cheap_rho
        or problem.r == 1
        or state.rho_cheap_streak >= config.nrhomax
    )
    rho_hat = 0.0
    cheap = False
    active_new = None
    if use_full:
        fmin_new, active_new, values_new = eval_fmin(problem, ledger, x_new)
        f_insert = float(values_new[state.i - 1])
        rho = (state.fx - fmin_new) / predicted
        rho_hat = (state.fx - f_insert) / predicted
        # The full ratio can only see a deeper minimum at the candidate.
        assert rho_hat <= rho
    else:
        f_insert = eval_component(problem, ledger, state.i, x_new)
        ledger.note_value(f_insert, certified=False)
        rho = rho_hat = (state.fx - f_insert) / predicted
        cheap = True

    accepted = rho >= config.eta

    # The working index can only be rechosen when the active set at the
    # accepted point was certified by a full evaluation; estimated-ratio
    # iterations keep the current index.
    i_next = state.i
    swapped = False
    if accepted and rho > 0.0 and active_new is not None:
        i_next = choose_imin(active_new, state.i)
        swapped = i_next != state.i

    # --- Gamma reset, then the two radii phases (Algorithm lines; computed
    # now, committed with the rest once the fallible work is done).
    gamma = 0 if rho >= config.eta1 else state.Gamma
    adjusted = accepted and swapped and gamma <= config.Gamma_max
    if adjusted:
        radii_factor = config.tau4
        gamma += 1
    elif rho < config.eta1:
        radii_factor = config.tau1
    elif rho > config.eta2 and full_length:
        radii_factor = config.tau3
    else:
        radii_factor = 1.0

    # --- sample maintenance: insert the productive trust-region point, or
    # take a geometry-improvement step within the sample radius.
    inserted = False
    did_altmov = False
    d_step = d
    if rho > 0.0:
        try:
            exchange_point(state.sample, x_new, f_insert)
            inserted = True
        except PointRejectedError:
            if accepted:
                # A sample set that cannot admit an accepted point needs the
                # caller's geometry recovery, not a silent reclassification.
                raise
            _log.debug("trust-region point rejected by the sample exchange")
    if inserted and accepted:
        row = state.sample.find_row(x_new)
        if row is not None and row != 0:
            # Acceptance makes the candidate the new iterate even when the
            # working component alone did not improve (a certified swap can
            # ride on another component's decrease).
            promote_to_base(state.sample, row)
    if not inserted:
        target = select_target_for_altmov(state.sample)
        d_alt, flat = altmov_linear(state.sample, box, state.delta, target)
        if not flat:
            x_alt = box.project(state.sample.base + d_alt)
            f_alt = eval_component(problem, ledger, state.i, x_alt)
            if problem.r > 1:
                ledger.note_value(f_alt, certified=False)
            try:
                exchange_point(state.sample, x_alt, f_alt)
            except PointRejectedError:
                _log.debug("geometry point rejected by the sample exchange")
        did_altmov = True
        d_step = d_alt
        swapped = False
        i_next = state.i

    # --- model rebuild (certified index swap) or incremental update.
    if swapped:
        _, model = rebuild_for_index(state.sample, problem, ledger, i_next)
    else:
        model = build_model(state.sample)

    # commit
    state.rho_cheap_streak = state.rho_cheap_streak + 1 if cheap else 0
    state.model_doubted = rho < config.eta1
    state.repair_streak = 0
    state.Gamma = gamma
    state.delta *= radii_factor
    state.Delta *= radii_factor
    state.model = model
    state.i = i_next
    state.x = state.sample.base.copy()
    state.fx = float(state.sample.values[0])
    if did_altmov:
        kind = KIND_ALTMOV
        state.consec_alt += 1
    else:
        state.consec_alt = 0
        if not accepted:
            kind = KIND_UNSUCCESSFUL
        elif rho >= config.eta1:
            kind = KIND_SUCCESSFUL_ADJUSTED if adjusted else KIND_SUCCESSFUL_PLAIN
        else:
            kind = KIND_ACCEPTABLE_ADJUSTED if adjusted else KIND_ACCEPTABLE_PLAIN
    state.consec_crit = 0

    if state.delta > state.Delta:
        _log.warning("sample radius %.3e exceeds trust-region radius %.3e",
                     state.delta, state.Delta)
    return StepOutcome(
        k=-1, kind=kind, rho=rho, rho_hat=rho_hat, rho_defined=True,
        rho_was_cheap=cheap, index_swapped=swapped,
        d=np.asarray(d_step, dtype=float).copy(), full_length=full_length,
        adjusted=adjusted, radii_frozen=False, pi=pi,
        delta=state.delta, Delta=state.Delta, Gamma=state.Gamma,
        index=state.i, fx=state.fx, evals_total=ledger.total_component_evals,
    )


def check_stopping(state: SolverState, problem: LovoProblem, config: SolverConfig,
                   ledger: EvalLedger) -> str | None:
    """Terminal status after an iteration, or None to continue.

    A run succeeds once the sample radius and the scaled stationarity measure
    both fall below ``delta_min``.  It stalls when both radii are below
    ``delta_min`` and the last ``maxalt`` iterations were geometry steps, i.e.
    there is no room for improvement left in the sample.  Long runs of
    consecutive criticality iterations (more than ``maxcrit``) and budget
    exhaustion terminate the run as safety valves.
    """
    pi = model_stationarity(state.model, problem.box)
    if state.delta <= config.delta_min and config.beta * pi <= config.delta_min:
        return STATUS_SUCCESS
    if (
        state.delta <= config.delta_min
        and state.Delta <= config.delta_min
        and state.consec_alt >= config.maxalt_for(problem.n)
    ):
        return STATUS_STALLED
    if state.consec_crit > config.maxcrit_for(problem.n):
        return STATUS_MAXCRIT
    if ledger.exhausted():
        return STATUS_BUDGET
    return None


def _initial_state(problem: LovoProblem, config: SolverConfig,
                   ledger: EvalLedger) -> SolverState:
    fmin0, active0, values0 = eval_fmin(problem, ledger, problem.x0)
    i0 = choose_imin(active0)
    sample = initial_sample(problem, problem.x0, config.delta0, ledger, i0,
                            base_value=float(values0[i0 - 1]))
    model = build_model(sample)
    return SolverState(
        x=sample.base.copy(), i=i0, delta=config.delta0, Delta=config.Delta0,
        Gamma=0, fx=fmin0, sample=sample, model=model,
    )


def _recover_geometry(state: SolverState, problem: LovoProblem,
                      config: SolverConfig, ledger: EvalLedger):
    """Rebuild the sample from scratch around the current base."""
    delta = max(state.delta, config.delta_min)
    state.sample = initial_sample(problem, state.x, delta, ledger, state.i,
                                  base_value=state.fx)
    state.model = build_model(state.sample)
    state.x = state.sample.base.copy()
    state.fx = float(state.sample.values[0])


def solve(problem: LovoProblem, config: SolverConfig | None = None,
          callback=None, ledger: EvalLedger | None = None,
          sample_log=None) -> SolveResult:
    """Minimize the pointwise minimum of the problem's components over its box.

    Parameters
    ----------
    problem : LovoProblem
    config : SolverConfig, optional
        Defaults are used when omitted.
    callback : callable, optional
        Called after every iteration as ``callback(k, outcome, ledger)``.
    ledger : EvalLedger, optional
        Pass a pre-configured ledger to control metering; by default a
        component-metered ledger honoring ``config.budget`` is created.
    sample_log : callable, optional
        Debug hook called after every iteration as ``sample_log(k, sample)``
        with the live sample set; see ``SampleSet.to_debug_dict``.

    Returns
    -------
    SolveResult
        Final iterate, status, evaluation ledger and per-iteration history.
    """
    config = config if config is not None else SolverConfig()
    if ledger is None:
        ledger = EvalLedger(problem.r, budget=config.budget)

    best_x = problem.x0.copy()
    best_f = np.inf
    try:
        state = _initial_state(problem, config, ledger)
    except BudgetExceededError:
        return SolveResult(x_final=best_x, f_final=ledger.best_certified,
                           status=STATUS_BUDGET, iterations=0, ledger=ledger,
                           i_final=1, problem_name=problem.name)
    best_x, best_f = state.x.copy(), state.fx

    history = []
    status = None
    k = 0
    geometry_failed = False
    while status is None:
        try:
            outcome = iterate(state, problem, config, ledger)
        except BudgetExceededError:
            status = STATUS_BUDGET
            break
        except GeometryError:
            if geometry_failed:
                status = STATUS_STALLED
                break
            geometry_failed = True
            try:
                _recover_geometry(state, problem, config, ledger)
            except BudgetExceededError:
                status = STATUS_BUDGET
                break
            except GeometryError:
                status = STATUS_STALLED
                break
            continue
        geometry_failed = False
        outcome.k = k
        history.append(outcome)
        if state.fx < best_f:
            best_x, best_f = state.x.copy(), state.fx
        if callback is not None:
            callback(k, outcome, ledger)
        if sample_log is not None:
            sample_log(k, state.sample)
        k += 1
        status = check_stopping(state, problem, config, ledger)

    if state.fx <= best_f:
        best_x, best_f = state.x.copy(), state.fx
    return SolveResult(
        x_final=best_x, f_final=best_f, status=status, iterations=k,
        ledger=ledger, history=history, i_final=state.i,
        problem_name=problem.name,
    )

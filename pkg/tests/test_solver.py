import json

import numpy as np
import pytest

from conftest import (
    adjustment_counts,
    assert_radii_replay,
    central_diff_gradient,
)
from lovotr.errors import OracleError
from lovotr.model import LinearModel, build_model, initial_sample
from lovotr.problem import ComponentOracle, EvalLedger, FeasibleBox, LovoProblem
from lovotr.solver import (
    SolverConfig,
    SolverState,
    check_stopping,
    iterate,
    solve,
)
from lovotr.testsets import gen_hs, gen_mw, gen_qd, qd_instance, HS_CATALOG


def single_quadratic(n, c, lower=0.0, upper=10.0):
    c = np.asarray(c, float)
    fn = lambda x: float(np.sum((np.asarray(x) - c) ** 2))
    return LovoProblem(
        "quad",
        [ComponentOracle(1, fn)],
        FeasibleBox(np.full(n, lower), np.full(n, upper)),
        np.full(n, 0.5 * (lower + upper)),
    )


def linear_pair():
    """f1 = x1 is active at the start; f2 undercuts one unit to the left."""
    comps = [
        ComponentOracle(1, lambda x: float(x[0])),
        ComponentOracle(2, lambda x: float(3.0 * x[0] - 8.5)),
    ]
    return LovoProblem("pair", comps, FeasibleBox([0, 0], [10, 10]), [5, 5])


class TestConfigValidation:
    @pytest.mark.parametrize("bad", [
        dict(beta=0.0),
        dict(delta0=0.0),
        dict(delta0=2.0, Delta0=1.0),
        dict(tau1=0.0),
        dict(tau2=1.0),
        dict(tau1=0.8, tau2=0.5),
        dict(tau3=0.9),
        dict(tau3=3.0, tau4=2.0),
        dict(eta=-0.1),
        dict(eta=0.3, eta1=0.25),
        dict(eta1=1.0, eta2=1.5),
        dict(eta1=0.5, eta2=0.4),
        dict(Gamma_max=0),
        dict(nrhomax=0),
        dict(delta_min=0.0),
    ])
    def test_orderings_enforced(self, bad):
        with pytest.raises(ValueError):
            SolverConfig(**bad)

    def test_defaults_valid(self):
        SolverConfig()


class TestIterationPhases:
    def make_state(self, problem, config):
        ledger = EvalLedger(problem.r)
        sample = initial_sample(problem, problem.x0, config.delta0, ledger, 1)
        return SolverState(
            x=sample.base.copy(), i=1, delta=config.delta0, Delta=config.Delta0,
            Gamma=0, fx=float(sample.values[0]), sample=sample,
            model=build_model(sample),
        ), ledger

    def test_criticality_shrinks_radii(self):
        problem = single_quadratic(2, [5, 5])
        config = SolverConfig(delta0=0.5, Delta0=1.0)
        state, ledger = self.make_state(problem, config)
        # a stationary model forces the criticality branch (delta > beta*pi = 0)
        state.model = LinearModel(b=0.0, g=np.zeros(2), base=state.x.copy())
        before = ledger.total_component_evals
        outcome = iterate(state, problem, config, ledger)
        assert outcome.kind == "criticality"
        assert outcome.rho == 0.0 and np.all(outcome.d == 0)
        assert state.delta == 0.5 * config.tau1
        assert state.Delta == 1.0 * 0.5 * (config.tau1 + config.tau2)
        assert ledger.total_component_evals == before

    def test_growth_on_strong_full_length_step(self):
        # f is linear, so the model is exact, rho = 1 > eta2, and the step
        # always runs to the trust-region boundary
        comps = [ComponentOracle(1, lambda x: float(x[0] + 0.5 * x[1]))]
        problem = LovoProblem("lin", comps, FeasibleBox([0, 0], [10, 10]), [5, 5])
        config = SolverConfig()
        state, ledger = self.make_state(problem, config)
        outcome = iterate(state, problem, config, ledger)
        assert outcome.kind == "successful_plain"
        assert outcome.rho == pytest.approx(1.0)
        assert outcome.full_length
        assert state.delta == config.delta0 * config.tau3
        assert state.Delta == config.Delta0 * config.tau3

    def test_swap_triggers_adjustment_and_rebuild(self):
        problem = linear_pair()
        config = SolverConfig(use_cheap_rho=False)
        state, ledger = self.make_state(problem, config)
        state.fx = 5.0  # certified objective value at the start
        before = ledger.component_evals.copy()
        outcome = iterate(state, problem, config, ledger)
        assert outcome.index_swapped and outcome.adjusted
        assert outcome.kind == "successful_adjusted"
        assert state.i == 2
        assert state.Gamma == 1
        assert state.delta == config.delta0 * config.tau4
        assert state.Delta == config.Delta0 * config.tau4
        assert np.array_equal(state.x, [4.0, 5.0])
        assert state.fx == pytest.approx(3.5)
        # full evaluation charged both components once, rebuild charged the
        # new component at all three sample points
        assert ledger.component_evals[0] - before[0] == 1
        assert ledger.component_evals[1] - before[1] == 1 + 3

    def test_rejection_keeps_iterate(self):
        # an adversarial oracle that punishes any move
        fn = lambda x: 0.0 if np.array_equal(x, [5.0, 5.0]) else 100.0
        problem = LovoProblem(
            "spite", [ComponentOracle(1, fn)], FeasibleBox([0, 0], [10, 10]), [5, 5]
        )
        config = SolverConfig()
        ledger = EvalLedger(1)
        sample = initial_sample(problem, problem.x0, 1.0, ledger, 1)
        state = SolverState(
            x=sample.base.copy(), i=1, delta=1.0, Delta=1.0, Gamma=0,
            fx=0.0, sample=sample, model=build_model(sample),
        )
        outcome = iterate(state, problem, config, ledger)
        assert not outcome.index_swapped
        assert np.array_equal(state.x, [5.0, 5.0])
        assert state.delta == config.tau1  # failed step shrinks the radii


class TestStopping:
    def make_state(self, g, delta, Delta, consec_alt=0, consec_crit=0):
        problem = single_quadratic(2, [5, 5])
        ledger = EvalLedger(1)
        sample = initial_sample(problem, problem.x0, 1.0, ledger, 1)
        model = LinearModel(b=0.0, g=np.asarray(g, float), base=sample.base.copy())
        state = SolverState(
            x=sample.base.copy(), i=1, delta=delta, Delta=Delta, Gamma=0,
            fx=0.0, sample=sample, model=model,
            consec_alt=consec_alt, consec_crit=consec_crit,
        )
        return state, problem, ledger

    def test_success(self):
        state, problem, ledger = self.make_state([0, 0], 1e-9, 1.0)
        assert check_stopping(state, problem, SolverConfig(), ledger) == "success"

    def test_stalled(self):
        state, problem, ledger = self.make_state([1, 0], 1e-9, 1e-9, consec_alt=2)
        assert check_stopping(state, problem, SolverConfig(), ledger) == "stalled"

    def test_maxcrit(self):
        state, problem, ledger = self.make_state([1, 0], 1.0, 1.0, consec_crit=6)
        config = SolverConfig(maxcrit=5)
        assert check_stopping(state, problem, config, ledger) == "maxcrit_exceeded"

    def test_budget(self):
        state, problem, ledger = self.make_state([1, 0], 1.0, 1.0)
        ledger.budget = 3
        ledger.component_evals[0] = 3
        assert check_stopping(state, problem, SolverConfig(), ledger) == (
            "budget_exhausted"
        )

    def test_continue(self):
        state, problem, ledger = self.make_state([1, 0], 1.0, 1.0)
        assert check_stopping(state, problem, SolverConfig(), ledger) is None


class TestSolve:
    def test_single_quadratic_interior(self):
        problem = single_quadratic(2, [3.0, 7.0])
        result = solve(problem, SolverConfig(budget=600))
        assert np.linalg.norm(result.x_final - [3.0, 7.0]) <= 1e-4
        assert result.f_final <= 1e-6

    def test_constant_dominance_never_swaps(self):
        # component 2 sits strictly above component 1 everywhere, so the run
        # behaves exactly like single-component minimization
        c = np.array([4.0, 6.0])
        comps = [
            ComponentOracle(1, lambda x: float(np.sum((x - c) ** 2))),
            ComponentOracle(2, lambda x: float(np.sum((x - c) ** 2)) + 5.0),
        ]
        problem = LovoProblem("dom", comps, FeasibleBox([0, 0], [10, 10]), [5, 5])
        result = solve(problem, SolverConfig(budget=2000))
        assert result.i_final == 1
        assert not any(o.index_swapped for o in result.history)
        assert result.f_final <= 1e-6

    def test_qd_reaches_weak_stationarity(self):
        inst = qd_instance(n=10, r=10, seed=5, ordinal=0)
        problem = inst.to_problem()
        result = solve(problem, SolverConfig(budget=11000))
        assert result.status in ("success", "stalled")
        x, i = result.x_final, result.i_final
        fd = central_diff_gradient(lambda z: inst.component_value(i, z), x, h=1e-6)
        pi_f = np.linalg.norm(problem.box.project(x - fd) - x)
        assert pi_f < 1e-4

    def test_monotone_certified_trace_and_feasible_queries(self):
        queries = []
        inst = qd_instance(n=4, r=3, seed=9, ordinal=0)
        problem = inst.to_problem()
        wrapped = LovoProblem(
            problem.name,
            [
                ComponentOracle(c.index,
                                lambda x, c=c: (queries.append(np.array(x)), c(x))[1])
                for c in problem.components
            ],
            problem.box, problem.x0,
        )
        result = solve(wrapped, SolverConfig(budget=2000))
        values = [p.value for p in result.ledger.trace]
        assert all(a > b for a, b in zip(values, values[1:])) or len(values) == 1
        assert all(np.all(q >= 0.0) and np.all(q <= 10.0) for q in queries)

    def test_rho_hat_never_exceeds_rho(self):
        problem = gen_qd(4, 4, seed=17, count=1)[0]
        result = solve(problem, SolverConfig(budget=3000))
        full = [o for o in result.history if o.rho_defined and not o.rho_was_cheap]
        assert full, "expected full-ratio iterations"
        assert all(o.rho_hat <= o.rho for o in full)

    def test_budget_exhaustion_is_graceful(self):
        problem = single_quadratic(3, [2.0, 3.0, 4.0])
        result = solve(problem, SolverConfig(budget=10))
        assert result.status == "budget_exhausted"
        assert result.ledger.total_component_evals <= 10 + problem.r
        assert problem.box.contains(result.x_final)

    def test_oracle_failure_propagates(self):
        calls = [0]

        def flaky(x):
            calls[0] += 1
            if calls[0] > 20:
                return float("nan")
            return float(np.sum((np.asarray(x) - 3.3) ** 2))

        problem = LovoProblem(
            "flaky", [ComponentOracle(1, flaky)], FeasibleBox([0, 0], [10, 10]), [5, 5]
        )
        with pytest.raises(OracleError):
            solve(problem, SolverConfig(budget=500))

    def test_callback_and_history_export(self, tmp_path):
        problem = single_quadratic(2, [3.0, 7.0])
        seen = []
        result = solve(problem, SolverConfig(budget=300),
                       callback=lambda k, o, ledger: seen.append((k, o.kind)))
        assert [k for k, _ in seen] == list(range(result.iterations))
        path = tmp_path / "history.jsonl"
        result.write_history_jsonl(path)
        records = [json.loads(line) for line in path.read_text().splitlines()]
        assert len(records) == result.iterations
        assert set(records[0]) == {"k", "kind", "rho", "rho_cheap", "delta",
                                   "Delta", "index", "fx", "evals_total"}

    def test_sample_log_hook(self):
        problem = single_quadratic(2, [3.0, 7.0])
        dumps = []
        solve(problem, SolverConfig(budget=100),
              sample_log=lambda k, s: dumps.append(s.to_debug_dict()))
        assert dumps and "condition_estimate" in dumps[0]


class TestCheapRatioEquivalence:
    def test_single_component_sequences_identical(self):
        problem = single_quadratic(3, [2.5, 6.5, 4.0])
        runs = [
            solve(problem, SolverConfig(budget=800, use_cheap_rho=flag))
            for flag in (True, False)
        ]
        a, b = runs
        assert a.iterations == b.iterations
        for oa, ob in zip(a.history, b.history):
            assert oa.kind == ob.kind and oa.rho == ob.rho
            assert np.array_equal(oa.d, ob.d)
            assert (oa.delta, oa.Delta) == (ob.delta, ob.Delta)
        assert np.array_equal(a.x_final, b.x_final)

    def test_cheap_ratio_streak_respects_nrhomax(self):
        problem = gen_qd(4, 4, seed=3, count=1)[0]
        result = solve(problem, SolverConfig(budget=2000, nrhomax=3))
        streak = 0
        for o in result.history:
            if not o.rho_defined:
                continue
            if o.rho_was_cheap:
                streak += 1
                assert streak <= 3
            else:
                streak = 0


class TestRadiiReplay:
    def test_histories_replay_exactly(self):
        problems = [
            gen_qd(4, 4, seed=23, count=1)[0],
            single_quadratic(2, [3.0, 7.0]),
            gen_hs(HS_CATALOG, ["hs1", "hs5"]),
            gen_mw("broyden_tridiagonal", 5, 2),
        ]
        config = SolverConfig(budget=1500)
        for problem in problems:
            result = solve(problem, config)
            assert result.history
            assert_radii_replay(config, result.history)
            adjusted, successful = adjustment_counts(result.history)
            assert adjusted <= config.Gamma_max * max(successful, 0) + 0

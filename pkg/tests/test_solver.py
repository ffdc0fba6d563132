"""Cardinality propagation, the propagation loop, and the two search modes."""

import random

import pytest

import scopdd as sc

from conftest import all_strategies, make_table, pick_theta, random_cubes, score_table


def feasible_strategies(problem):
    for strategy in all_strategies(problem.vars):
        if (
            problem.cardinality is not None
            and sum(strategy.values()) > problem.cardinality
        ):
            continue
        yield strategy


def brute_sat(problem):
    for strategy in feasible_strategies(problem):
        if all(
            sc.strategy_value(c.terms, problem.vars, strategy) >= c.theta
            for c in problem.constraints
        ):
            return strategy
    return None


def brute_opt(problem):
    return max(
        sc.strategy_value(problem.objective, problem.vars, strategy)
        for strategy in feasible_strategies(problem)
    )


def random_problem(rng):
    table, terms = _random_terms(rng)
    maximize = rng.random() < 0.5
    cardinality = (
        rng.randint(0, len(table.decision_ids())) if rng.random() < 0.5 else None
    )
    if maximize:
        return sc.Problem(table, [], cardinality, objective=terms), True
    domains = sc.DomainState(table)
    _, scores = score_table(table, terms, domains)
    if cardinality is not None:
        scores = {
            bits: v for bits, v in scores.items() if sum(bits) <= cardinality
        }
    theta = pick_theta(rng, scores)
    return (
        sc.Problem(table, [sc.Constraint(terms, theta)], cardinality),
        False,
    )


def _random_terms(rng):
    table = make_table(rng, rng.randint(1, 7), rng.randint(1, 5))
    n_terms = rng.choice([1, 1, 2])
    terms = [
        sc.ConstraintTerm(
            sc.from_dnf(table, random_cubes(rng, table, max_cubes=5)),
            rng.choice([1.0, 1.0, 2.0]),
        )
        for _ in range(n_terms)
    ]
    return table, terms


class TestCardinalityPropagate:
    def test_saturated_bound_removes_true(self):
        table = sc.VariableTable()
        for i in range(5):
            table.add_decision(f"d{i}")
        domains = sc.DomainState(table, fixed={0: True, 1: True})
        result = sc.cardinality_propagate(domains, 2)
        assert result.ok
        assert result.fixed == [(2, False), (3, False), (4, False)]

    def test_generous_bound_is_noop(self):
        table = sc.VariableTable()
        for i in range(3):
            table.add_decision(f"d{i}")
        result = sc.cardinality_propagate(sc.DomainState(table), 3)
        assert result.ok and result.fixed == []

    def test_exceeded_bound_fails(self):
        table = sc.VariableTable()
        table.add_decision("d0")
        domains = sc.DomainState(table, fixed={0: True})
        assert sc.cardinality_propagate(domains, 0).status == sc.FAILED


class TestPropagationLoop:
    def test_fixes_before_search(self, choice):
        problem = sc.Problem(
            choice.vt, [sc.Constraint([sc.ConstraintTerm(choice.dd)], 0.4)]
        )
        domains = sc.DomainState(choice.vt)
        result = sc.propagation_loop(domains, problem)
        assert result.ok
        assert (choice.y, True) in result.fixed
        assert domains.is_free(choice.x)

    def test_interleaves_to_complete_assignment(self, choice):
        # threshold forces y true; the saturated cardinality bound then
        # forces x false, completing the assignment with no branching
        problem = sc.Problem(
            choice.vt,
            [sc.Constraint([sc.ConstraintTerm(choice.dd)], 0.4)],
            cardinality=1,
        )
        domains = sc.DomainState(choice.vt)
        result = sc.propagation_loop(domains, problem)
        assert result.ok
        assert dict(result.fixed) == {choice.y: True, choice.x: False}
        assert domains.as_strategy() == {choice.x: False, choice.y: True}

    def test_no_constraints_is_noop(self, choice):
        problem = sc.Problem(
            choice.vt, [], objective=[sc.ConstraintTerm(choice.dd)]
        )
        domains = sc.DomainState(choice.vt)
        result = sc.propagation_loop(domains, problem)
        assert result.ok and result.fixed == []

    def test_fixes_never_contradict_a_solution(self):
        rng = random.Random(83)
        checked = 0
        for _ in range(120):
            problem, maximize = random_problem(rng)
            if maximize:
                continue
            checked += 1
            solutions = [
                s
                for s in feasible_strategies(problem)
                if all(
                    sc.strategy_value(c.terms, problem.vars, s) >= c.theta
                    for c in problem.constraints
                )
            ]
            domains = sc.DomainState(problem.vars)
            result = sc.propagation_loop(domains, problem)
            if not result.ok:
                assert solutions == []  # root failure only on unsatisfiable
            else:
                for var, value in result.fixed:
                    assert all(s[var] == value for s in solutions)
        assert checked > 30


class TestSolveSat:
    def test_choice_sat_deterministic_tie(self, choice):
        problem = sc.Problem(
            choice.vt, [sc.Constraint([sc.ConstraintTerm(choice.dd)], 0.4)]
        )
        strategy, stats = sc.solve_sat(problem)
        assert strategy == {choice.x: True, choice.y: True}
        assert stats.backtracks <= stats.nodes_expanded

    def test_choice_unsat(self, choice):
        problem = sc.Problem(
            choice.vt, [sc.Constraint([sc.ConstraintTerm(choice.dd)], 0.7)]
        )
        strategy, stats = sc.solve_sat(problem)
        assert strategy is None

    def test_network_unsat_above_optimum(self, net_model):
        problem = sc.build_problem(net_model)
        hard = sc.Problem(
            net_model.vars,
            [sc.Constraint(problem.objective, 1.4)],
        )
        strategy, _ = sc.solve_sat(hard)
        assert strategy is None

    def test_verdicts_match_brute_force(self):
        rng = random.Random(61)
        checked = 0
        for _ in range(120):
            problem, maximize = random_problem(rng)
            if maximize:
                continue
            checked += 1
            witness = brute_sat(problem)
            strategy, stats = sc.solve_sat(problem)
            assert (strategy is None) == (witness is None)
            if strategy is not None:
                for c in problem.constraints:
                    value = sc.strategy_value(c.terms, problem.vars, strategy)
                    assert value >= c.theta - 1e-9
                if problem.cardinality is not None:
                    assert sum(strategy.values()) <= problem.cardinality
            assert stats.backtracks <= stats.nodes_expanded
        assert checked > 30


class TestSolveOpt:
    def test_four_node_instance(self, net_model):
        problem = sc.build_problem(net_model)
        strategy, value, stats = sc.solve_opt(problem)
        assert strategy is not None
        best = brute_opt(problem)
        assert value == pytest.approx(best, abs=1e-9)
        assert sum(strategy.values()) <= 2
        assert value == pytest.approx(
            sc.strategy_value(problem.objective, problem.vars, strategy), abs=1e-12
        )

    def test_monotone_objective_without_cardinality(self):
        rng = random.Random(67)
        table, terms = _random_terms(rng)
        problem = sc.Problem(table, [], objective=terms)
        strategy, value, _ = sc.solve_opt(problem)
        all_true = {v: True for v in table.decision_ids()}
        assert value == pytest.approx(
            sc.strategy_value(terms, table, all_true), abs=1e-9
        )

    def test_constant_false_objective(self):
        table = sc.VariableTable()
        table.add_decision("d0")
        term = sc.ConstraintTerm(sc.from_dnf(table, []))
        strategy, value, _ = sc.solve_opt(sc.Problem(table, [], objective=[term]))
        assert strategy is not None
        assert value == 0.0

    def test_infeasible_constraints(self, choice):
        problem = sc.Problem(
            choice.vt,
            [sc.Constraint([sc.ConstraintTerm(choice.dd)], 0.9)],
            objective=[sc.ConstraintTerm(choice.dd)],
        )
        strategy, value, _ = sc.solve_opt(problem)
        assert strategy is None and value is None

    def test_values_match_brute_force(self):
        rng = random.Random(71)
        checked = 0
        for _ in range(120):
            problem, maximize = random_problem(rng)
            if not maximize:
                continue
            checked += 1
            strategy, value, _ = sc.solve_opt(problem)
            assert strategy is not None
            assert value == pytest.approx(brute_opt(problem), abs=1e-9)
            if problem.cardinality is not None:
                assert sum(strategy.values()) <= problem.cardinality
        assert checked > 30


class TestProblemValidation:
    def test_needs_constraint_or_objective(self, choice):
        with pytest.raises(ValueError):
            sc.Problem(choice.vt, [])

    def test_negative_cardinality_rejected(self, choice):
        with pytest.raises(ValueError):
            sc.Problem(
                choice.vt,
                [sc.Constraint([sc.ConstraintTerm(choice.dd)], 0.1)],
                cardinality=-1,
            )

    def test_negative_reward_rejected(self, choice):
        with pytest.raises(ValueError):
            sc.ConstraintTerm(choice.dd, reward=-0.5)

"""Depth-first search with propagation for stochastic constraint problems.

Satisfaction mode interleaves the cardinality propagator and the
domain-consistent threshold propagator to a joint fixpoint at every search
node; branching picks the first free decision variable in the global order
and tries true before false.  Optimization ramps the threshold: the
objective is recast as a constraint whose bound increases past each
incumbent until the residual problem is unsatisfiable.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field

from .evaluate import DomainState, evaluate
from .obdd import VariableTable
from .propagate import (
    ConstraintTerm,
    FAILED,
    OK,
    PropagationResult,
    PropagationScratch,
    THRESHOLD_EPS,
    dc_propagate,
)


@dataclass
class Constraint:
    """Threshold constraint: sum of reward-weighted root values >= theta."""

    terms: list[ConstraintTerm]
    theta: float
    eps: float = THRESHOLD_EPS


@dataclass
class Problem:
    """A full instance: constraints, optional cardinality bound (on the
    number of true decision variables), optional maximization objective."""

    vars: VariableTable
    constraints: list[Constraint] = field(default_factory=list)
    cardinality: int | None = None
    objective: list[ConstraintTerm] | None = None

    def __post_init__(self):
        if not self.constraints and self.objective is None:
            raise ValueError("problem needs a constraint or an objective")
        if self.cardinality is not None and self.cardinality < 0:
            raise ValueError("cardinality bound must be nonnegative")


@dataclass
class SearchStats:
    nodes_expanded: int = 0
    backtracks: int = 0
    propagator_calls: int = 0
    node_visits: int = 0
    wall_time: float = 0.0

    def merge(self, other: "SearchStats") -> None:
        self.nodes_expanded += other.nodes_expanded
        self.backtracks += other.backtracks
        self.propagator_calls += other.propagator_calls
        self.node_visits += other.node_visits
        self.wall_time += other.wall_time

    def as_dict(self) -> dict:
        return {
            "nodes_expanded": self.nodes_expanded,
            "backtracks": self.backtracks,
            "propagator_calls": self.propagator_calls,
            "node_visits": self.node_visits,
            "wall_time": self.wall_time,
        }


def cardinality_propagate(domains: DomainState, bound: int) -> PropagationResult:
    """At most ``bound`` decision variables true.

    Fails when the fixed-true count already exceeds the bound; when it
    meets the bound exactly, every free variable loses the value true.
    """
    if bound < 0:
        raise ValueError("cardinality bound must be nonnegative")
    trues = domains.true_count()
    if trues > bound:
        return PropagationResult(FAILED)
    fixed = []
    if trues == bound:
        for var in domains.free_vars():
            domains.fix(var, False)
            fixed.append((var, False))
    return PropagationResult(OK, fixed=fixed)


def propagation_loop(
    domains: DomainState,
    problem: Problem,
    scratches: list[list[PropagationScratch]] | None = None,
    stats: SearchStats | None = None,
) -> PropagationResult:
    """Run cardinality then every threshold constraint, round-robin, until a
    joint fixpoint or failure.  ``scratches`` (one list per constraint)
    switches the threshold propagator to its incremental form; false-fixes
    coming out of the cardinality propagator are applied to every scratch.
    """
    all_scratches = [s for group in scratches for s in group] if scratches else []
    all_fixed: list[tuple[int, bool]] = []
    visits = 0
    bound = None
    while True:
        changed = False
        if problem.cardinality is not None:
            result = cardinality_propagate(domains, problem.cardinality)
            if stats is not None:
                stats.propagator_calls += 1
            if not result.ok:
                return PropagationResult(FAILED, bound=bound, visits=visits)
            for var, value in result.fixed:
                for scratch in all_scratches:
                    touched = scratch.apply_fix(var, value)
                    visits += touched
                    if stats is not None:
                        stats.node_visits += touched
            if result.fixed:
                changed = True
                all_fixed.extend(result.fixed)
        for index, constraint in enumerate(problem.constraints):
            result = dc_propagate(
                constraint.terms,
                domains,
                constraint.theta,
                eps=constraint.eps,
                scratches=scratches[index] if scratches else None,
            )
            visits += result.visits
            if stats is not None:
                stats.propagator_calls += 1
                stats.node_visits += result.visits
            if not result.ok:
                return PropagationResult(FAILED, bound=result.bound, visits=visits)
            bound = result.bound
            if result.fixed:
                changed = True
                all_fixed.extend(result.fixed)
        if not changed:
            return PropagationResult(OK, fixed=all_fixed, bound=bound, visits=visits)


def solve_sat(problem: Problem) -> tuple[dict[int, bool] | None, SearchStats]:
    """First satisfying strategy in the deterministic search order, or None.

    Complete: a None answer means no strategy satisfies all constraints.
    """
    stats = SearchStats()
    start = time.perf_counter()
    domains = DomainState(problem.vars)
    scratches = [
        [PropagationScratch(term.obdd, domains) for term in constraint.terms]
        for constraint in problem.constraints
    ]
    flat = [s for group in scratches for s in group]
    for scratch in flat:
        stats.node_visits += scratch.visits  # initial full rebuilds
    decision_order = problem.vars.decision_ids()

    def first_free() -> int | None:
        for var in decision_order:
            if domains.is_free(var):
                return var
        return None

    def dfs() -> dict[int, bool] | None:
        var = first_free()
        if var is None:
            return domains.as_strategy()
        for value in (True, False):
            stats.nodes_expanded += 1
            domain_mark = domains.mark()
            scratch_marks = [s.mark() for s in flat]
            domains.fix(var, value)
            if not value:
                for scratch in flat:
                    stats.node_visits += scratch.apply_fix(var, value)
            result = propagation_loop(domains, problem, scratches, stats)
            if result.ok:
                solution = dfs()
                if solution is not None:
                    return solution
            domains.undo_to(domain_mark)
            for scratch, mark in zip(flat, scratch_marks):
                scratch.undo_to(mark)
            stats.backtracks += 1
        return None

    root = propagation_loop(domains, problem, scratches, stats)
    solution = dfs() if root.ok else None
    stats.wall_time += time.perf_counter() - start
    return solution, stats


def strategy_value(terms: list[ConstraintTerm], problem_vars: VariableTable,
                   strategy: dict[int, bool]) -> float:
    """Exact objective value of a complete strategy."""
    domains = DomainState(problem_vars, fixed=strategy)
    return sum(term.reward * evaluate(term.obdd, domains) for term in terms)


def solve_opt(
    problem: Problem, *, delta: float = 1e-9
) -> tuple[dict[int, bool] | None, float | None, SearchStats]:
    """Maximize the objective by threshold ramping.

    Solves satisfaction problems with the objective recast as a constraint,
    raising its threshold to incumbent + delta after every solution; the
    last solution found is optimal to within delta.  The ramping constraint
    uses an exact threshold (no slack), otherwise a slack equal to delta
    would re-admit the incumbent forever.
    """
    if problem.objective is None:
        raise ValueError("problem has no objective")
    total = SearchStats()
    best: dict[int, bool] | None = None
    best_value: float | None = None
    theta = 0.0
    while True:
        sub = Problem(
            vars=problem.vars,
            constraints=problem.constraints
            + [Constraint(problem.objective, theta, eps=0.0)],
            cardinality=problem.cardinality,
        )
        solution, stats = solve_sat(sub)
        total.merge(stats)
        if solution is None:
            break
        best = solution
        best_value = strategy_value(problem.objective, problem.vars, solution)
        theta = best_value + delta
    return best, best_value, total

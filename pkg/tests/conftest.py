"""Shared fixtures and seeded random-instance generators.

The two hand-built fixtures appear throughout the suite:

* ``forced_choice.obdd`` -- a six-node diagram over two decision variables
  whose threshold constraint forces y=1 at the root of search;
* ``four_node.scop`` -- a five-edge network with two connectivity queries,
  a cardinality bound of two, and a maximization objective.

Random instances are monotone DNFs over mixed decision/stochastic variable
tables; thresholds are drawn between achievable constraint values so the
1e-9 comparison slack in the propagators can never flip a verdict.
"""

from __future__ import annotations

import itertools
import random
from pathlib import Path
from types import SimpleNamespace

import pytest

import scopdd as sc

DATA = Path(__file__).parent / "data"

# order that keeps each edge's stochastic/decision pair adjacent, with the
# edges of the a->c event's short routes near the root
PATH_ORDER = [
    "t_cd", "d_cd", "d_ac", "t_ac", "t_ad",
    "d_ad", "d_bd", "t_bd", "t_ab", "d_ab",
]


@pytest.fixture
def choice():
    dd = sc.load_obdd((DATA / "forced_choice.obdd").read_text())
    vt = dd.vars
    return SimpleNamespace(dd=dd, vt=vt, x=vt.index("x"), y=vt.index("y"))


@pytest.fixture
def four_node_text():
    return (DATA / "four_node.scop").read_text()


@pytest.fixture
def net_model(four_node_text):
    return sc.parse_network(four_node_text)


@pytest.fixture
def ordered_model(net_model):
    return sc.with_order(net_model, PATH_ORDER)


@pytest.fixture
def path_dd(ordered_model):
    """The a->c connectivity event compiled under PATH_ORDER (12 nodes)."""
    query = ordered_model.queries[0]
    return sc.from_dnf(ordered_model.vars, sc.st_path_dnf(ordered_model, query))


# -- random instance generators -----------------------------------------


def make_table(rng: random.Random, n_dec: int, n_sto: int) -> sc.VariableTable:
    kinds = ["d"] * n_dec + ["t"] * n_sto
    rng.shuffle(kinds)
    table = sc.VariableTable()
    for i, kind in enumerate(kinds):
        if kind == "d":
            table.add_decision(f"d{i}")
        else:
            table.add_stochastic(f"t{i}", rng.uniform(0.05, 0.95))
    return table


def random_cubes(rng: random.Random, table: sc.VariableTable, max_cubes: int = 6):
    total = len(table)
    return [
        sc.Cube.positive(rng.sample(range(total), rng.randint(1, min(4, total))))
        for _ in range(rng.randint(1, max_cubes))
    ]


def random_instance(
    rng: random.Random,
    max_dec: int = 10,
    max_sto: int = 10,
    n_terms: int = 1,
    max_cubes: int = 6,
):
    """A variable table plus ``n_terms`` monotone diagram terms over it."""
    table = make_table(rng, rng.randint(1, max_dec), rng.randint(1, max_sto))
    terms = [
        sc.ConstraintTerm(
            sc.from_dnf(table, random_cubes(rng, table, max_cubes)),
            rng.choice([1.0, 1.0, 1.0, 2.5]),
        )
        for _ in range(n_terms)
    ]
    return table, terms


def random_domains(rng: random.Random, table: sc.VariableTable, p_free: float = 0.55):
    domains = sc.DomainState(table)
    for var in table.decision_ids():
        r = rng.random()
        if r >= p_free:
            domains.fix(var, r < p_free + (1 - p_free) / 2)
    return domains


def score_table(table, terms, domains):
    """Constraint value of every completion of the free variables."""
    free = domains.free_vars()
    scores = {}
    for bits in itertools.product([False, True], repeat=len(free)):
        completion = domains.copy()
        for var, value in zip(free, bits):
            completion.fix(var, value)
        scores[bits] = sum(
            t.reward * sc.evaluate(t.obdd, completion) for t in terms
        )
    return free, scores


def pick_theta(rng: random.Random, scores) -> float:
    """Threshold kept > 1e-6 away from every achievable value."""
    values = sorted(set(scores.values()))
    mode = rng.random()
    if mode < 0.15:
        return values[0] - 0.1
    if mode < 0.3:
        return values[-1] + 0.1
    gaps = [(a, b) for a, b in zip(values, values[1:]) if b - a > 1e-6]
    if not gaps:
        return values[0] - 0.1
    lo, hi = rng.choice(gaps)
    return (lo + hi) / 2.0


def all_strategies(table: sc.VariableTable):
    dec = table.decision_ids()
    for bits in itertools.product([False, True], repeat=len(dec)):
        yield dict(zip(dec, bits))


def dnf_truth(cubes, assignment) -> bool:
    return any(
        all(assignment[v] == polarity for v, polarity in cube.literals)
        for cube in cubes
    )


def enumerate_event_probability(dd: sc.Obdd, decisions: dict) -> float:
    """Sum of model probabilities over all stochastic assignments."""
    sto = dd.vars.stochastic_ids()
    total = 0.0
    for bits in itertools.product([False, True], repeat=len(sto)):
        assignment = dict(decisions)
        assignment.update(zip(sto, bits))
        total += sc.model_probability(dd, assignment)
    return total

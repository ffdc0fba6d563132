"""Problem file ingestion: probabilistic networks, queries, directives.

The problem file format is line oriented (``#`` starts a comment):

    node <name>
    edge <u> <v> <p>            # undirected, p in [0, 1]
    query <s> <t> [reward <r>]  # reward defaults to 1
    cardinality <= <N>          # optional
    objective maximize          # exactly one of these
    constraint >= <theta>       #   two directives is required
    order <varname> ...         # optional variable-order override

Each edge (u, v) contributes a stochastic variable ``t_uv`` carrying the
edge probability and a decision variable ``d_uv`` that selects the edge.
By default they are registered interleaved, t before d, in edge declaration
order; an ``order`` line overrides this.  A query s -> t compiles into one
cube per simple path between the endpoints: the conjunction of d_e and t_e
over the path's edges, edges usable in either direction.
"""

from __future__ import annotations

from dataclasses import dataclass, field

from .errors import CapacityError, ParseError
from .obdd import Cube, VariableTable, from_dnf
from .propagate import ConstraintTerm
from .solver import Constraint, Problem

DEFAULT_PATH_CAP = 10000


@dataclass(frozen=True)
class Edge:
    u: str
    v: str
    prob: float

    def key(self) -> frozenset:
        return frozenset((self.u, self.v))


@dataclass
class ProbNetwork:
    """Undirected network with per-edge probabilities."""

    nodes: list[str]
    edges: list[Edge]

    def neighbors(self, node: str) -> list[tuple[str, Edge]]:
        out = []
        for edge in self.edges:
            if edge.u == node:
                out.append((edge.v, edge))
            elif edge.v == node:
                out.append((edge.u, edge))
        return out


@dataclass(frozen=True)
class Query:
    """Connectivity event between two distinct network nodes."""

    source: str
    target: str
    reward: float = 1.0


@dataclass
class ParsedModel:
    """Everything a problem file declares, with variables registered."""

    network: ProbNetwork
    vars: VariableTable
    queries: list[Query]
    cardinality: int | None = None
    maximize: bool = False
    theta: float | None = None
    order: list[str] | None = None
    stoch_var: dict[frozenset, int] = field(default_factory=dict, compare=False)
    decision_var: dict[frozenset, int] = field(default_factory=dict, compare=False)


def edge_var_names(u: str, v: str) -> tuple[str, str]:
    """(stochastic, decision) variable names for edge (u, v)."""
    return f"t_{u}{v}", f"d_{u}{v}"


def _register_variables(network, order, lineno_of_order):
    declared: list[tuple[str, str, float | None]] = []
    for edge in network.edges:
        t_name, d_name = edge_var_names(edge.u, edge.v)
        declared.append((t_name, "stochastic", edge.prob))
        declared.append((d_name, "decision", None))
    names = [name for name, _, _ in declared]
    if len(set(names)) != len(names):
        raise ParseError(
            "edge variable names collide; rename the network nodes", lineno_of_order
        )
    if order is not None:
        if sorted(order) != sorted(names):
            raise ParseError(
                "order line must mention every edge variable exactly once",
                lineno_of_order,
            )
        by_name = {name: (kind, prob) for name, kind, prob in declared}
        declared = [(name, *by_name[name]) for name in order]
    table = VariableTable()
    for name, kind, prob in declared:
        if kind == "stochastic":
            table.add_stochastic(name, prob)
        else:
            table.add_decision(name)
    return table


def parse_network(text: str) -> ParsedModel:
    """Parse a problem file; raises ParseError with a line number on bad input."""
    nodes: list[str] = []
    edges: list[Edge] = []
    queries: list[Query] = []
    cardinality: int | None = None
    maximize = False
    theta: float | None = None
    order: list[str] | None = None
    order_line = None
    goal_seen = False

    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        tokens = line.split()
        keyword = tokens[0]
        if keyword == "node":
            if len(tokens) != 2:
                raise ParseError("expected 'node <name>'", lineno)
            if tokens[1] in nodes:
                raise ParseError(f"duplicate node {tokens[1]!r}", lineno)
            nodes.append(tokens[1])
        elif keyword == "edge":
            if len(tokens) != 4:
                raise ParseError("expected 'edge <u> <v> <p>'", lineno)
            u, v = tokens[1], tokens[2]
            for name in (u, v):
                if name not in nodes:
                    raise ParseError(f"unknown node {name!r}", lineno)
            if u == v:
                raise ParseError(f"self-loop on {u!r}", lineno)
            try:
                prob = float(tokens[3])
            except ValueError:
                raise ParseError(f"bad probability {tokens[3]!r}", lineno) from None
            if not 0.0 <= prob <= 1.0:
                raise ParseError(f"probability outside [0, 1]: {prob}", lineno)
            if any(e.key() == frozenset((u, v)) for e in edges):
                raise ParseError(f"duplicate edge {u!r}-{v!r}", lineno)
            edges.append(Edge(u, v, prob))
        elif keyword == "query":
            if len(tokens) not in (3, 5) or (len(tokens) == 5 and tokens[3] != "reward"):
                raise ParseError("expected 'query <s> <t> [reward <r>]'", lineno)
            s, t = tokens[1], tokens[2]
            for name in (s, t):
                if name not in nodes:
                    raise ParseError(f"unknown node {name!r}", lineno)
            if s == t:
                raise ParseError("query source and target must differ", lineno)
            reward = 1.0
            if len(tokens) == 5:
                try:
                    reward = float(tokens[4])
                except ValueError:
                    raise ParseError(f"bad reward {tokens[4]!r}", lineno) from None
                if reward < 0:
                    raise ParseError(f"reward must be nonnegative: {reward}", lineno)
            queries.append(Query(s, t, reward))
        elif keyword == "cardinality":
            if len(tokens) != 3 or tokens[1] != "<=":
                raise ParseError("expected 'cardinality <= <N>'", lineno)
            if cardinality is not None:
                raise ParseError("duplicate cardinality directive", lineno)
            try:
                cardinality = int(tokens[2])
            except ValueError:
                raise ParseError(f"bad bound {tokens[2]!r}", lineno) from None
            if cardinality < 0:
                raise ParseError("cardinality bound must be nonnegative", lineno)
        elif keyword == "objective":
            if len(tokens) != 2 or tokens[1] != "maximize":
                raise ParseError("expected 'objective maximize'", lineno)
            if goal_seen:
                raise ParseError("duplicate objective/constraint directive", lineno)
            maximize, goal_seen = True, True
        elif keyword == "constraint":
            if len(tokens) != 3 or tokens[1] != ">=":
                raise ParseError("expected 'constraint >= <theta>'", lineno)
            if goal_seen:
                raise ParseError("duplicate objective/constraint directive", lineno)
            try:
                theta = float(tokens[2])
            except ValueError:
                raise ParseError(f"bad threshold {tokens[2]!r}", lineno) from None
            goal_seen = True
        elif keyword == "order":
            if order is not None:
                raise ParseError("duplicate order line", lineno)
            order, order_line = tokens[1:], lineno
        else:
            raise ParseError(f"unknown directive {keyword!r}", lineno)

    if not nodes:
        raise ParseError("no nodes declared")
    if not goal_seen:
        raise ParseError("need exactly one 'objective maximize' or 'constraint >= <theta>'")
    if not queries:
        raise ParseError("no query declared")

    network = ProbNetwork(nodes, edges)
    table = _register_variables(network, order, order_line)
    model = ParsedModel(
        network, table, queries, cardinality, maximize, theta, order
    )
    for edge in network.edges:
        t_name, d_name = edge_var_names(edge.u, edge.v)
        model.stoch_var[edge.key()] = table.index(t_name)
        model.decision_var[edge.key()] = table.index(d_name)
    return model


def with_order(model: ParsedModel, order: list[str]) -> ParsedModel:
    """Copy of the model with its variables re-registered in the given order."""
    table = _register_variables(model.network, list(order), None)
    clone = ParsedModel(
        model.network,
        table,
        model.queries,
        model.cardinality,
        model.maximize,
        model.theta,
        list(order),
    )
    for edge in model.network.edges:
        t_name, d_name = edge_var_names(edge.u, edge.v)
        clone.stoch_var[edge.key()] = table.index(t_name)
        clone.decision_var[edge.key()] = table.index(d_name)
    return clone


def st_path_dnf(
    model: ParsedModel, query: Query, cap: int = DEFAULT_PATH_CAP
) -> list[Cube]:
    """One cube (d_e and t_e over the path's edges) per simple source-target
    path.  Disconnected endpoints yield an empty list (a constant-false
    event); more than ``cap`` paths raises CapacityError."""
    network = model.network
    for name in (query.source, query.target):
        if name not in network.nodes:
            raise ValueError(f"unknown node {name!r}")
    cubes: list[Cube] = []
    visited = {query.source}
    path_edges: list[Edge] = []

    def walk(at: str) -> None:
        if at == query.target:
            if len(cubes) >= cap:
                raise CapacityError(
                    f"more than {cap} simple paths from {query.source!r} to "
                    f"{query.target!r}; use a smaller instance or raise the cap"
                )
            literals = []
            for edge in path_edges:
                literals.append((model.decision_var[edge.key()], True))
                literals.append((model.stoch_var[edge.key()], True))
            cubes.append(Cube(tuple(literals)))
            return
        for neighbor, edge in network.neighbors(at):
            if neighbor in visited:
                continue
            visited.add(neighbor)
            path_edges.append(edge)
            walk(neighbor)
            path_edges.pop()
            visited.remove(neighbor)

    walk(query.source)
    return cubes


def build_problem(model: ParsedModel, cap: int = DEFAULT_PATH_CAP) -> Problem:
    """Compile every query and assemble the instance."""
    terms = [
        ConstraintTerm(from_dnf(model.vars, st_path_dnf(model, query, cap)), query.reward)
        for query in model.queries
    ]
    if model.maximize:
        return Problem(model.vars, [], model.cardinality, objective=terms)
    return Problem(
        model.vars, [Constraint(terms, model.theta)], model.cardinality
    )


def format_model(model: ParsedModel) -> str:
    """Canonical problem file text; parse(format_model(parse(x))) == parse(x)."""
    lines = [f"node {name}" for name in model.network.nodes]
    lines += [f"edge {e.u} {e.v} {e.prob!r}" for e in model.network.edges]
    lines += [
        f"query {q.source} {q.target} reward {q.reward!r}" for q in model.queries
    ]
    if model.cardinality is not None:
        lines.append(f"cardinality <= {model.cardinality}")
    lines.append("objective maximize" if model.maximize else f"constraint >= {model.theta!r}")
    if model.order is not None:
        lines.append("order " + " ".join(model.order))
    return "\n".join(lines) + "\n"

"""Reduced ordered binary decision diagrams over decision and stochastic variables.

A diagram lives in an append-only node store of (var, lo, hi) triples with
hash-consing: structurally equal subgraphs share one node id, so isomorphism
within a store reduces to id equality.  Ids 0 and 1 are the false/true
terminals; all other ids are internal nodes.  Variables are kept in a
separate registry whose insertion order fixes the global variable order, and
every node's variable strictly precedes the variables of its internal
children.

The text exchange format is line oriented (``#`` starts a comment):

    var <name> decision
    var <name> stochastic <p>
    order <name> <name> ...        # optional, overrides declaration order
    node <id> <varname> <lo> <hi>  # ids >= 2, children defined first
    root <id>
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Mapping

from .errors import ParseError, StructureError

DECISION = "decision"
STOCHASTIC = "stochastic"

AND = "and"
OR = "or"

FALSE_NODE = 0
TRUE_NODE = 1


@dataclass(frozen=True)
class VarInfo:
    """One registered variable; ``index`` is its position in the order."""

    index: int
    name: str
    kind: str
    prob: float | None = None


class VariableTable:
    """Registry of decision and stochastic variables.

    Insertion order is the variable order: smaller index means closer to
    the root of every diagram built over this table.
    """

    def __init__(self):
        self._infos: list[VarInfo] = []
        self._by_name: dict[str, int] = {}

    def _add(self, name: str, kind: str, prob: float | None) -> int:
        if name in self._by_name:
            raise ValueError(f"duplicate variable name {name!r}")
        if kind == STOCHASTIC:
            if prob is None:
                raise ValueError(f"stochastic variable {name!r} needs a probability")
            if not 0.0 <= prob <= 1.0:
                raise ValueError(f"probability of {name!r} outside [0, 1]: {prob}")
        elif prob is not None:
            raise ValueError(f"decision variable {name!r} cannot carry a probability")
        index = len(self._infos)
        self._infos.append(VarInfo(index, name, kind, prob))
        self._by_name[name] = index
        return index

    def add_decision(self, name: str) -> int:
        return self._add(name, DECISION, None)

    def add_stochastic(self, name: str, prob: float) -> int:
        return self._add(name, STOCHASTIC, prob)

    def __len__(self) -> int:
        return len(self._infos)

    def __iter__(self):
        return iter(self._infos)

    def __eq__(self, other):
        if not isinstance(other, VariableTable):
            return NotImplemented
        return [(i.name, i.kind, i.prob) for i in self._infos] == [
            (i.name, i.kind, i.prob) for i in other._infos
        ]

    def info(self, index: int) -> VarInfo:
        return self._infos[index]

    def name(self, index: int) -> str:
        return self._infos[index].name

    def index(self, name: str) -> int:
        try:
            return self._by_name[name]
        except KeyError:
            raise ValueError(f"unknown variable {name!r}") from None

    def has(self, name: str) -> bool:
        return name in self._by_name

    def is_decision(self, index: int) -> bool:
        return self._infos[index].kind == DECISION

    def prob(self, index: int) -> float:
        info = self._infos[index]
        if info.kind != STOCHASTIC:
            raise ValueError(f"{info.name!r} is not stochastic")
        return info.prob

    def decision_ids(self) -> list[int]:
        return [i.index for i in self._infos if i.kind == DECISION]

    def stochastic_ids(self) -> list[int]:
        return [i.index for i in self._infos if i.kind == STOCHASTIC]


@dataclass(frozen=True)
class Cube:
    """A conjunction of literals, stored as (variable index, polarity) pairs."""

    literals: tuple[tuple[int, bool], ...]

    def __post_init__(self):
        lits = tuple(sorted((int(v), bool(p)) for v, p in self.literals))
        seen = set()
        for v, _ in lits:
            if v in seen:
                raise ValueError(f"variable {v} appears twice in cube")
            seen.add(v)
        object.__setattr__(self, "literals", lits)

    @staticmethod
    def positive(var_ids: Iterable[int]) -> "Cube":
        return Cube(tuple((v, True) for v in var_ids))

    def vars(self) -> list[int]:
        return [v for v, _ in self.literals]


class Obdd:
    """One diagram plus its hash-consed node store.

    The store is append-only and node ids are never recycled, so downstream
    scratch state may index by node id for the lifetime of the diagram.  A
    finished diagram is treated as immutable.
    """

    def __init__(self, variables: VariableTable):
        self.vars = variables
        self.root = FALSE_NODE
        # parallel arrays; slots 0/1 are terminal sentinels
        self._var: list[int] = [-1, -1]
        self._lo: list[int] = [-1, -1]
        self._hi: list[int] = [-1, -1]
        self._unique: dict[tuple[int, int, int], int] = {}
        self._apply_memo: dict[tuple[str, int, int], int] = {}
        self._topo_cache: dict[int, tuple[int, ...]] = {}

    # -- store access -------------------------------------------------

    def __len__(self) -> int:
        return len(self._var)

    def is_terminal(self, node: int) -> bool:
        return node < 2

    def var_of(self, node: int) -> int:
        return self._var[node]

    def lo(self, node: int) -> int:
        return self._lo[node]

    def hi(self, node: int) -> int:
        return self._hi[node]

    def level(self, node: int) -> int:
        """Order index of the node's variable; terminals sit below all levels."""
        return len(self.vars) if node < 2 else self._var[node]

    def _check_node(self, node: int) -> None:
        if not isinstance(node, int) or not 0 <= node < len(self._var):
            raise StructureError(f"node id {node!r} does not belong to this store")

    # -- construction -------------------------------------------------

    def mk_node(self, var: int, lo: int, hi: int) -> int:
        """Canonical node for (var, lo, hi); applies the reduction rules."""
        self._check_node(lo)
        self._check_node(hi)
        if not 0 <= var < len(self.vars):
            raise StructureError(f"variable index {var} not in table")
        if var >= self.level(lo) or var >= self.level(hi):
            raise StructureError(
                f"variable {self.vars.name(var)!r} does not precede its children"
            )
        if lo == hi:
            return lo
        key = (var, lo, hi)
        found = self._unique.get(key)
        if found is not None:
            return found
        node = len(self._var)
        self._var.append(var)
        self._lo.append(lo)
        self._hi.append(hi)
        self._unique[key] = node
        return node

    def _find(self, var: int, lo: int, hi: int) -> int | None:
        return self._unique.get((var, lo, hi))

    def cube(self, cube: Cube) -> int:
        """Diagram of a single conjunction; monotone inputs only."""
        node = TRUE_NODE
        for var, polarity in reversed(cube.literals):
            if not polarity:
                raise StructureError(
                    f"negative literal on {self.vars.name(var)!r}: "
                    "only monotone formulas are accepted"
                )
            node = self.mk_node(var, FALSE_NODE, node)
        return node

    def apply(self, op: str, a: int, b: int) -> int:
        """Reduced diagram of (a op b); memoized per (op, a, b)."""
        if op not in (AND, OR):
            raise ValueError(f"unknown operator {op!r}")
        self._check_node(a)
        self._check_node(b)
        return self._apply(op, a, b)

    def _apply(self, op: str, a: int, b: int) -> int:
        if a == b:
            return a
        if op == OR:
            if a == TRUE_NODE or b == TRUE_NODE:
                return TRUE_NODE
            if a == FALSE_NODE:
                return b
            if b == FALSE_NODE:
                return a
        else:
            if a == FALSE_NODE or b == FALSE_NODE:
                return FALSE_NODE
            if a == TRUE_NODE:
                return b
            if b == TRUE_NODE:
                return a
        if a > b:
            a, b = b, a
        key = (op, a, b)
        found = self._apply_memo.get(key)
        if found is not None:
            return found
        var = min(self.level(a), self.level(b))
        a_lo, a_hi = (self._lo[a], self._hi[a]) if self.level(a) == var else (a, a)
        b_lo, b_hi = (self._lo[b], self._hi[b]) if self.level(b) == var else (b, b)
        result = self.mk_node(
            var, self._apply(op, a_lo, b_lo), self._apply(op, a_hi, b_hi)
        )
        self._apply_memo[key] = result
        return result

    # -- traversal ----------------------------------------------------

    def topo_order(self, root: int | None = None) -> tuple[int, ...]:
        """Reachable nodes, every node before its children, terminals last.

        Deterministic for a fixed diagram: internal nodes are sorted by
        (level, id).  Reverse the result to get a children-first order.
        """
        if root is None:
            root = self.root
        cached = self._topo_cache.get(root)
        if cached is not None:
            return cached
        self._check_node(root)
        seen = {root}
        stack = [root]
        while stack:
            node = stack.pop()
            if node < 2:
                continue
            for child in (self._lo[node], self._hi[node]):
                if child not in seen:
                    seen.add(child)
                    stack.append(child)
        internal = sorted((n for n in seen if n >= 2), key=lambda n: (self._var[n], n))
        order = tuple(internal) + tuple(t for t in (FALSE_NODE, TRUE_NODE) if t in seen)
        self._topo_cache[root] = order
        return order

    def internal_nodes(self, root: int | None = None) -> list[int]:
        return [n for n in self.topo_order(root) if n >= 2]

    def eval_bool(self, assignment: Mapping[int, bool], root: int | None = None) -> bool:
        """Truth value under a full assignment (walks one root-terminal path)."""
        node = self.root if root is None else root
        self._check_node(node)
        while node >= 2:
            var = self._var[node]
            if var not in assignment:
                raise ValueError(f"variable {self.vars.name(var)!r} is unassigned")
            node = self._hi[node] if assignment[var] else self._lo[node]
        return node == TRUE_NODE


def from_dnf(variables: VariableTable, cubes: Iterable[Cube]) -> Obdd:
    """Compile a monotone DNF into a reduced ordered diagram.

    An empty cube list yields the constant-false diagram; a cube without
    literals is the empty conjunction and yields constant true.
    """
    dd = Obdd(variables)
    root = FALSE_NODE
    for cube in cubes:
        for var, _ in cube.literals:
            if not 0 <= var < len(variables):
                raise StructureError(f"cube references unknown variable {var}")
        root = dd.apply(OR, root, dd.cube(cube))
    dd.root = root
    return dd


def validate(dd: Obdd, root: int | None = None) -> None:
    """Full-scan check of the reduced/ordered/unique invariants."""
    triples = set()
    for node in dd.internal_nodes(root):
        var, lo, hi = dd.var_of(node), dd.lo(node), dd.hi(node)
        if lo == hi:
            raise StructureError(f"node {node} is not reduced (lo == hi)")
        if var >= dd.level(lo) or var >= dd.level(hi):
            raise StructureError(f"node {node} violates the variable order")
        if (var, lo, hi) in triples:
            raise StructureError(f"node {node} duplicates another (var, lo, hi)")
        triples.add((var, lo, hi))


# -- text exchange format ----------------------------------------------


def _content_lines(text: str):
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if line:
            yield lineno, line.split()


def load_obdd(text: str) -> Obdd:
    """Parse the exchange format; see the module docstring for the grammar."""
    decls: list[tuple[str, str, float | None]] = []
    order_names: list[str] | None = None
    table: VariableTable | None = None
    dd: Obdd | None = None
    id_map: dict[int, int] = {FALSE_NODE: FALSE_NODE, TRUE_NODE: TRUE_NODE}
    root: int | None = None

    def build_table(lineno: int) -> None:
        nonlocal table, dd
        if table is not None:
            return
        table = VariableTable()
        names = [name for name, _, _ in decls]
        if order_names is not None:
            if sorted(order_names) != sorted(names):
                raise ParseError(
                    "order line must mention every declared variable exactly once",
                    lineno,
                )
            by_name = {name: (kind, prob) for name, kind, prob in decls}
            ordered = [(name, *by_name[name]) for name in order_names]
        else:
            ordered = decls
        for name, kind, prob in ordered:
            try:
                table._add(name, kind, prob)
            except ValueError as exc:
                raise ParseError(str(exc), lineno) from None
        dd = Obdd(table)

    for lineno, tokens in _content_lines(text):
        keyword = tokens[0]
        if keyword == "var":
            if table is not None:
                raise ParseError("var declaration after node lines", lineno)
            if len(tokens) == 3 and tokens[2] == DECISION:
                decls.append((tokens[1], DECISION, None))
            elif len(tokens) == 4 and tokens[2] == STOCHASTIC:
                try:
                    prob = float(tokens[3])
                except ValueError:
                    raise ParseError(f"bad probability {tokens[3]!r}", lineno) from None
                if not 0.0 <= prob <= 1.0:
                    raise ParseError(f"probability outside [0, 1]: {prob}", lineno)
                decls.append((tokens[1], STOCHASTIC, prob))
            else:
                raise ParseError("expected 'var <name> decision|stochastic <p>'", lineno)
            if any(name == tokens[1] for name, _, _ in decls[:-1]):
                raise ParseError(f"duplicate variable {tokens[1]!r}", lineno)
        elif keyword == "order":
            if table is not None:
                raise ParseError("order line after node lines", lineno)
            if order_names is not None:
                raise ParseError("duplicate order line", lineno)
            order_names = tokens[1:]
        elif keyword == "node":
            if len(tokens) != 5:
                raise ParseError("expected 'node <id> <varname> <lo> <hi>'", lineno)
            build_table(lineno)
            try:
                file_id, lo_id, hi_id = int(tokens[1]), int(tokens[3]), int(tokens[4])
            except ValueError:
                raise ParseError("node ids must be integers", lineno) from None
            if file_id < 2:
                raise ParseError("internal node ids must be >= 2", lineno)
            if file_id in id_map:
                raise ParseError(f"duplicate node id {file_id}", lineno)
            if not table.has(tokens[2]):
                raise ParseError(f"unknown variable {tokens[2]!r}", lineno)
            var = table.index(tokens[2])
            try:
                lo, hi = id_map[lo_id], id_map[hi_id]
            except KeyError as exc:
                raise ParseError(f"undefined node id {exc.args[0]}", lineno) from None
            if lo == hi:
                raise ParseError("node is not reduced (lo == hi)", lineno)
            if dd._find(var, lo, hi) is not None:
                raise ParseError("duplicate node structure (var, lo, hi)", lineno)
            try:
                id_map[file_id] = dd.mk_node(var, lo, hi)
            except StructureError as exc:
                raise ParseError(str(exc), lineno) from None
        elif keyword == "root":
            if len(tokens) != 2:
                raise ParseError("expected 'root <id>'", lineno)
            if root is not None:
                raise ParseError("duplicate root line", lineno)
            build_table(lineno)
            try:
                root_id = int(tokens[1])
            except ValueError:
                raise ParseError("root id must be an integer", lineno) from None
            if root_id not in id_map:
                raise ParseError(f"undefined node id {root_id}", lineno)
            root = id_map[root_id]
        else:
            raise ParseError(f"unknown directive {keyword!r}", lineno)

    if root is None:
        raise ParseError("missing root line")
    dd.root = root
    return dd


def _canonical_ids(dd: Obdd, root: int | None = None) -> dict[int, int]:
    """Structure-only renumbering: isomorphic diagrams get identical ids."""
    canon = {FALSE_NODE: FALSE_NODE, TRUE_NODE: TRUE_NODE}
    by_level: dict[int, list[int]] = {}
    for node in dd.internal_nodes(root):
        by_level.setdefault(dd.var_of(node), []).append(node)
    next_id = 2
    for level in sorted(by_level, reverse=True):
        for node in sorted(by_level[level], key=lambda n: (canon[dd.lo(n)], canon[dd.hi(n)])):
            canon[node] = next_id
            next_id += 1
    return canon


def dump_obdd(dd: Obdd, root: int | None = None) -> str:
    """Serialize to the exchange format, children before parents.

    Node ids are renumbered canonically, so isomorphic diagrams over equal
    variable tables dump to identical text.
    """
    if root is None:
        root = dd.root
    lines = []
    for info in dd.vars:
        if info.kind == DECISION:
            lines.append(f"var {info.name} decision")
        else:
            lines.append(f"var {info.name} stochastic {info.prob!r}")
    canon = _canonical_ids(dd, root)
    for node in sorted((n for n in canon if n >= 2), key=canon.get):
        lines.append(
            f"node {canon[node]} {dd.vars.name(dd.var_of(node))} "
            f"{canon[dd.lo(node)]} {canon[dd.hi(node)]}"
        )
    lines.append(f"root {canon[root]}")
    return "\n".join(lines) + "\n"


def dump_dot(dd: Obdd, root: int | None = None) -> str:
    """Graphviz rendering: boxes for decision nodes, circles for stochastic,
    dashed lo arcs and solid hi arcs."""
    if root is None:
        root = dd.root
    lines = ["digraph obdd {"]
    order = dd.topo_order(root)
    for node in order:
        if node < 2:
            lines.append(f'  n{node} [label="{node}", shape=box, peripheries=2];')
            continue
        info = dd.vars.info(dd.var_of(node))
        if info.kind == DECISION:
            lines.append(f'  n{node} [label="{info.name}", shape=box];')
        else:
            lines.append(f'  n{node} [label="{info.name}\\n{info.prob!r}", shape=circle];')
    for node in order:
        if node >= 2:
            lines.append(f"  n{node} -> n{dd.lo(node)} [style=dashed];")
            lines.append(f"  n{node} -> n{dd.hi(node)} [style=solid];")
    lines.append("}")
    return "\n".join(lines) + "\n"

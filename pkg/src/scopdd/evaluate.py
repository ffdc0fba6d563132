"""Weighted model counting on a diagram under a (partial) strategy.

Free decision variables evaluate as true, so on monotone diagrams the
result is the optimistic bound used by the propagators; on a fully fixed
strategy it is the exact conditional probability of the compiled event.
"""

from __future__ import annotations

from typing import Mapping

from .obdd import DECISION, Obdd, VariableTable

# decision-variable domains
FALSE_ONLY = 0
TRUE_ONLY = 1
BOTH = 2

_DOMAIN_NAMES = {FALSE_ONLY: "false", TRUE_ONLY: "true", BOTH: "free"}


class DomainState:
    """Per-decision-variable domain: false-only, true-only, or both.

    Covers exactly the decision variables of one table.  Mutations are
    recorded on a trail so a search can undo them; an empty domain is never
    stored (the propagators signal failure instead of emptying a domain).
    """

    def __init__(self, variables: VariableTable, fixed: Mapping[int, bool] | None = None):
        self.vars = variables
        self._dom = [
            BOTH if info.kind == DECISION else -1 for info in variables
        ]
        self._true_count = 0
        self._trail: list[tuple[int, int]] = []
        if fixed:
            for var, value in fixed.items():
                self.fix(var, value)

    def _check(self, var: int) -> None:
        if not 0 <= var < len(self._dom) or self._dom[var] == -1:
            raise ValueError(f"variable index {var} is not a decision variable")

    def domain(self, var: int) -> int:
        self._check(var)
        return self._dom[var]

    def is_free(self, var: int) -> bool:
        self._check(var)
        return self._dom[var] == BOTH

    def value(self, var: int) -> bool:
        self._check(var)
        dom = self._dom[var]
        if dom == BOTH:
            raise ValueError(f"variable {self.vars.name(var)!r} is still free")
        return dom == TRUE_ONLY

    def fix(self, var: int, value: bool) -> None:
        """Shrink the domain of a free variable to a single value."""
        self._check(var)
        if self._dom[var] != BOTH:
            raise ValueError(f"variable {self.vars.name(var)!r} is already fixed")
        self._trail.append((var, self._dom[var]))
        self._dom[var] = TRUE_ONLY if value else FALSE_ONLY
        if value:
            self._true_count += 1

    def mark(self) -> int:
        return len(self._trail)

    def undo_to(self, mark: int) -> None:
        while len(self._trail) > mark:
            var, old = self._trail.pop()
            if self._dom[var] == TRUE_ONLY:
                self._true_count -= 1
            self._dom[var] = old

    def true_count(self) -> int:
        return self._true_count

    def free_vars(self) -> list[int]:
        return [v for v, d in enumerate(self._dom) if d == BOTH]

    def fixed_items(self) -> list[tuple[int, bool]]:
        return [
            (v, d == TRUE_ONLY) for v, d in enumerate(self._dom)
            if d in (FALSE_ONLY, TRUE_ONLY)
        ]

    def copy(self) -> "DomainState":
        clone = DomainState(self.vars)
        clone._dom = list(self._dom)
        clone._true_count = self._true_count
        return clone

    def as_strategy(self) -> dict[int, bool]:
        """Complete assignment; raises if any variable is still free."""
        strategy = {}
        for var, dom in enumerate(self._dom):
            if dom == BOTH:
                raise ValueError(f"variable {self.vars.name(var)!r} is still free")
            if dom != -1:
                strategy[var] = dom == TRUE_ONLY
        return strategy

    def __repr__(self):
        parts = [
            f"{self.vars.name(v)}={_DOMAIN_NAMES[d]}"
            for v, d in enumerate(self._dom) if d != -1
        ]
        return f"DomainState({', '.join(parts)})"


def _check_compatible(dd: Obdd, domains: DomainState) -> None:
    if domains.vars is not dd.vars and domains.vars != dd.vars:
        raise ValueError("domain state was built over a different variable table")


def sweep_values(
    dd: Obdd,
    domains: DomainState,
    root: int | None = None,
    override_var: int | None = None,
    override_value: bool = False,
) -> list[float]:
    """One children-first pass of the node-value recurrence.

    Returns a value array indexed by node id.  ``override_var`` pretends one
    decision variable has the given value without touching the domain state;
    the naive propagator leans on this.
    """
    if root is None:
        root = dd.root
    val = [0.0] * len(dd)
    val[1] = 1.0
    dom = domains._dom
    for node in reversed(dd.topo_order(root)):
        if node < 2:
            continue
        var = dd.var_of(node)
        info = dd.vars.info(var)
        if info.kind == DECISION:
            if var == override_var:
                branch_true = override_value
            else:
                branch_true = dom[var] != FALSE_ONLY  # true or free
            val[node] = val[dd.hi(node)] if branch_true else val[dd.lo(node)]
        else:
            w = info.prob
            val[node] = w * val[dd.hi(node)] + (1.0 - w) * val[dd.lo(node)]
    return val


def evaluate(dd: Obdd, domains: DomainState, root: int | None = None) -> float:
    """Root value under the partial strategy (free decisions count as true)."""
    _check_compatible(dd, domains)
    if root is None:
        root = dd.root
    return sweep_values(dd, domains, root)[root]


def model_probability(dd: Obdd, assignment: Mapping[int, bool]) -> float:
    """Probability mass of one full assignment, zero when it falsifies the
    diagram.  Every variable of the table must be assigned; used by oracles."""
    for info in dd.vars:
        if info.index not in assignment:
            raise ValueError(f"variable {info.name!r} is unassigned")
    if not dd.eval_bool(assignment):
        return 0.0
    prob = 1.0
    for info in dd.vars:
        if info.kind != DECISION:
            prob *= info.prob if assignment[info.index] else 1.0 - info.prob
    return prob

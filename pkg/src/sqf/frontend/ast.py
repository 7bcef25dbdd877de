"""Logical query plan and expression tree produced by the parser.

Everything here is an immutable value object; structural equality is used by
the parse/pretty-print round-trip tests.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Union

ARITH_OPS = ("+", "-", "*", "/")
CMP_OPS = ("=", "<>", "<", "<=", ">", ">=")
BOOL_OPS = ("AND", "OR", "NOT")
AGG_FNS = ("COUNT", "SUM", "MIN", "MAX", "AVG")


@dataclass(frozen=True)
class ColumnRef:
    qualifier: str | None
    name: str

    def render(self) -> str:
        return f"{self.qualifier}.{self.name}" if self.qualifier else self.name


@dataclass(frozen=True)
class IntLiteral:
    value: int


@dataclass(frozen=True)
class StrLiteral:
    value: str


@dataclass(frozen=True)
class Arith:
    op: str
    lhs: "Expr"
    rhs: "Expr"


@dataclass(frozen=True)
class Cmp:
    op: str
    lhs: "Expr"
    rhs: "Expr"


@dataclass(frozen=True)
class BoolOp:
    op: str
    children: tuple["Expr", ...]


Expr = Union[ColumnRef, IntLiteral, StrLiteral, Arith, Cmp, BoolOp]


@dataclass(frozen=True)
class Star:
    """`SELECT *` marker; expanded left-then-right at bind time."""


@dataclass(frozen=True)
class NamedItem:
    """Projection of a column or of a computed attribute defined in the list."""

    ref: ColumnRef


@dataclass(frozen=True)
class AggItem:
    """Projection of aggregate number `index` in QueryPlan.aggregates."""

    index: int


ProjItem = Union[Star, NamedItem, AggItem]


@dataclass(frozen=True)
class AggSpec:
    fn: str
    arg: ColumnRef | None  # None means `*`
    name: str

    def render(self) -> str:
        arg = self.arg.render() if self.arg is not None else "*"
        return f"{self.fn}({arg}) AS {self.name}"


@dataclass(frozen=True)
class JoinSpec:
    table: str
    left_key: ColumnRef
    right_key: ColumnRef


@dataclass(frozen=True)
class OrderItem:
    name: str
    ascending: bool


@dataclass(frozen=True)
class QueryPlan:
    """Parsed but unresolved query."""

    source: str
    join: JoinSpec | None
    restriction: Expr | None
    computed: tuple[tuple[str, Expr], ...]
    group_by: tuple[ColumnRef, ...]
    aggregates: tuple[AggSpec, ...]
    projection: tuple[ProjItem, ...]
    order_by: tuple[OrderItem, ...]


def render_expr(expr: Expr) -> str:
    """Fully parenthesized text form; reparsing it reproduces the tree."""
    if isinstance(expr, ColumnRef):
        return expr.render()
    if isinstance(expr, IntLiteral):
        return str(expr.value)
    if isinstance(expr, StrLiteral):
        return f"'{expr.value}'"
    if isinstance(expr, Arith):
        return f"({render_expr(expr.lhs)} {expr.op} {render_expr(expr.rhs)})"
    if isinstance(expr, Cmp):
        return f"({render_expr(expr.lhs)} {expr.op} {render_expr(expr.rhs)})"
    if isinstance(expr, BoolOp):
        if expr.op == "NOT":
            return f"(NOT {render_expr(expr.children[0])})"
        body = f" {expr.op} ".join(render_expr(c) for c in expr.children)
        return f"({body})"
    raise TypeError(f"not an expression: {expr!r}")


def pretty_print(plan: QueryPlan) -> str:
    """Canonical SQL text for a plan; parse(pretty_print(p)) == p."""
    computed = dict(plan.computed)
    items = []
    for item in plan.projection:
        if isinstance(item, Star):
            items.append("*")
        elif isinstance(item, AggItem):
            items.append(plan.aggregates[item.index].render())
        elif item.ref.qualifier is None and item.ref.name in computed:
            items.append(f"{render_expr(computed[item.ref.name])} AS {item.ref.name}")
        else:
            items.append(item.ref.render())
    parts = [f"SELECT {', '.join(items)} FROM {plan.source}"]
    if plan.join:
        parts.append(
            f"JOIN {plan.join.table} ON "
            f"{plan.join.left_key.render()} = {plan.join.right_key.render()}"
        )
    if plan.restriction is not None:
        parts.append(f"WHERE {render_expr(plan.restriction)}")
    if plan.group_by:
        parts.append("GROUP BY " + ", ".join(c.render() for c in plan.group_by))
    if plan.order_by:
        keys = ", ".join(
            f"{o.name} {'ASC' if o.ascending else 'DESC'}" for o in plan.order_by
        )
        parts.append("ORDER BY " + keys)
    return " ".join(parts)

"""SQL subset frontend: parser, plan types, and binder."""

from .ast import (
    AggItem,
    AggSpec,
    Arith,
    BoolOp,
    Cmp,
    ColumnRef,
    Expr,
    IntLiteral,
    JoinSpec,
    NamedItem,
    OrderItem,
    QueryPlan,
    Star,
    StrLiteral,
    pretty_print,
    render_expr,
)
from .binder import (
    BArith,
    BBool,
    BCmp,
    BInt,
    BoundAgg,
    BoundComputed,
    BoundPlan,
    BStr,
    FromAggregate,
    FromGroupKey,
    FromValue,
    OutputCol,
    ValueRef,
    bind,
)
from .parser import parse_query, tokenize

__all__ = [
    "AggItem", "AggSpec", "Arith", "BoolOp", "Cmp", "ColumnRef", "Expr",
    "IntLiteral", "JoinSpec", "NamedItem", "OrderItem", "QueryPlan", "Star",
    "StrLiteral", "pretty_print", "render_expr",
    "BArith", "BBool", "BCmp", "BInt", "BoundAgg", "BoundComputed",
    "BoundPlan", "BStr", "FromAggregate", "FromGroupKey", "FromValue",
    "OutputCol", "ValueRef", "bind", "parse_query", "tokenize",
]

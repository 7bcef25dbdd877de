"""Name resolution and type checking: QueryPlan -> BoundPlan.

A bound plan carries, for every expression, the resolved (side, column index,
type) of each reference, plus the fully determined output schema. Binding is
a pure function of (plan, catalog) and re-binding a bound plan's query yields
an equal BoundPlan.
"""

from __future__ import annotations

from dataclasses import dataclass

from ..errors import AmbiguousColumn, QueryTypeError, UnknownColumn, UnknownTable
from ..relcore import ColumnType, Schema, TypeKind
from .ast import (
    AggItem,
    AggSpec,
    Arith,
    BoolOp,
    Cmp,
    ColumnRef,
    Expr,
    IntLiteral,
    QueryPlan,
    Star,
    StrLiteral,
    render_expr,
)


@dataclass(frozen=True)
class ValueRef:
    """A resolved value source: a table column or a computed attribute."""

    kind: str  # "column" | "computed"
    slot: int  # 0 = left, 1 = right; -1 for computed
    index: int
    ctype: ColumnType


@dataclass(frozen=True)
class BInt:
    value: int


@dataclass(frozen=True)
class BStr:
    value: str


@dataclass(frozen=True)
class BArith:
    op: str
    lhs: "BExpr"
    rhs: "BExpr"


@dataclass(frozen=True)
class BCmp:
    op: str
    lhs: "BExpr"
    rhs: "BExpr"
    kind: TypeKind
    width: int  # CHAR comparison width (both sides padded to it); 0 for INT


@dataclass(frozen=True)
class BBool:
    op: str
    children: tuple["BExpr", ...]


BExpr = object  # ValueRef | BInt | BStr | BArith | BCmp | BBool


@dataclass(frozen=True)
class BoundComputed:
    name: str
    expr: BExpr
    ctype: ColumnType


@dataclass(frozen=True)
class BoundAgg:
    fn: str
    arg: ValueRef | None  # None = `*`
    name: str
    ctype: ColumnType


@dataclass(frozen=True)
class FromValue:
    ref: ValueRef


@dataclass(frozen=True)
class FromGroupKey:
    index: int


@dataclass(frozen=True)
class FromAggregate:
    index: int


@dataclass(frozen=True)
class OutputCol:
    name: str
    source: object  # FromValue | FromGroupKey | FromAggregate
    ctype: ColumnType


@dataclass(frozen=True)
class BoundPlan:
    plan: QueryPlan
    left_table: str
    left_schema: Schema
    right_table: str | None
    right_schema: Schema | None
    join_left_index: int | None
    join_right_index: int | None
    join_key_type: ColumnType | None
    restriction: BExpr | None
    computed: tuple[BoundComputed, ...]
    group_by: tuple[ValueRef, ...]
    aggregates: tuple[BoundAgg, ...]
    output: tuple[OutputCol, ...]
    order_by: tuple[tuple[int, bool], ...]  # (output column index, ascending)
    output_schema: Schema

    @property
    def has_join(self) -> bool:
        return self.right_table is not None

    @property
    def grouped(self) -> bool:
        return bool(self.aggregates) or bool(self.group_by)

    def flat_index(self, ref: ValueRef) -> int:
        """Index of a ValueRef in the flattened left+right+computed row."""
        la = self.left_schema.arity
        if ref.kind == "column":
            return ref.index if ref.slot == 0 else la + ref.index
        ra = self.right_schema.arity if self.right_schema else 0
        return la + ra + ref.index

    def table_names(self) -> tuple[str, ...]:
        if self.right_table is not None:
            return (self.left_table, self.right_table)
        return (self.left_table,)


def walk_bound(expr):
    """Yield every node of a bound expression tree."""
    yield expr
    if isinstance(expr, (BArith, BCmp)):
        yield from walk_bound(expr.lhs)
        yield from walk_bound(expr.rhs)
    elif isinstance(expr, BBool):
        for child in expr.children:
            yield from walk_bound(child)


def split_conjuncts(expr) -> list:
    """Top-level AND conjuncts of a bound predicate."""
    if isinstance(expr, BBool) and expr.op == "AND":
        out = []
        for child in expr.children:
            out.extend(split_conjuncts(child))
        return out
    return [expr]


def expr_slots(expr) -> set:
    """Which join sides (0/1) a bound expression reads columns from."""
    return {
        n.slot for n in walk_bound(expr) if isinstance(n, ValueRef) and n.kind == "column"
    }


def expr_has_arith(expr) -> bool:
    return any(isinstance(n, BArith) for n in walk_bound(expr))


def needs_reorder(bp: "BoundPlan") -> bool:
    """True when the output layout differs from the natural stream layout,
    i.e. attributes are reordered, inserted, or removed."""
    if bp.grouped:
        canonical = [FromGroupKey(i) for i in range(len(bp.group_by))]
        canonical += [FromAggregate(i) for i in range(len(bp.aggregates))]
        return [c.source for c in bp.output] != canonical
    if bp.computed:
        return True
    natural = []
    for slot, schema in ((0, bp.left_schema), (1, bp.right_schema)):
        if schema is None:
            continue
        for idx, (_, ctype) in enumerate(schema.columns):
            natural.append(FromValue(ValueRef("column", slot, idx, ctype)))
    return [c.source for c in bp.output] != natural


class _Binder:
    def __init__(self, plan: QueryPlan, catalog: dict):
        self.plan = plan
        self.catalog = catalog
        self.left_table = plan.source
        self.left_schema = self._lookup_table(plan.source)
        self.right_table = None
        self.right_schema = None
        if plan.join:
            if plan.join.table.lower() == plan.source.lower():
                raise QueryTypeError("FROM", "self-joins are not supported")
            self.right_table = plan.join.table
            self.right_schema = self._lookup_table(plan.join.table)
        self.computed: list[BoundComputed] = []
        self.computed_index: dict[str, int] = {}

    def _lookup_table(self, name: str) -> Schema:
        if name in self.catalog:
            return self.catalog[name]
        for key, schema in self.catalog.items():
            if key.lower() == name.lower():
                return schema
        raise UnknownTable(name)

    # -- reference resolution ----------------------------------------------

    def resolve_column(self, ref: ColumnRef) -> ValueRef:
        """Resolve against table columns only (restriction/computed/join keys)."""
        if ref.qualifier is not None:
            slot, schema = self._slot_for_qualifier(ref.qualifier)
            try:
                idx = schema.index_of(ref.name)
            except KeyError:
                raise UnknownColumn(ref.render()) from None
            return ValueRef("column", slot, idx, schema.columns[idx][1])
        hits = []
        for slot, schema in self._slots():
            try:
                idx = schema.index_of(ref.name)
            except KeyError:
                continue
            hits.append(ValueRef("column", slot, idx, schema.columns[idx][1]))
        if len(hits) > 1:
            raise AmbiguousColumn(ref.name)
        if not hits:
            raise UnknownColumn(ref.name)
        return hits[0]

    def resolve_value(self, ref: ColumnRef) -> ValueRef:
        """Columns first, then computed attributes (group/aggregate/projection scope)."""
        try:
            return self.resolve_column(ref)
        except UnknownColumn:
            pass
        if ref.qualifier is None and ref.name.lower() in self.computed_index:
            k = self.computed_index[ref.name.lower()]
            return ValueRef("computed", -1, k, self.computed[k].ctype)
        raise UnknownColumn(ref.render())

    def _slots(self):
        yield 0, self.left_schema
        if self.right_schema is not None:
            yield 1, self.right_schema

    def _slot_for_qualifier(self, qualifier: str):
        if qualifier.lower() == self.left_table.lower():
            return 0, self.left_schema
        if self.right_table is not None and qualifier.lower() == self.right_table.lower():
            return 1, self.right_schema
        raise UnknownTable(qualifier)

    # -- expression typing ---------------------------------------------------

    def bind_value_expr(self, expr: Expr) -> tuple[BExpr, ColumnType]:
        bound, tag = self.bind_expr(expr)
        if tag == "bool":
            raise QueryTypeError(render_expr(expr), "expected a value, got a condition")
        return bound, tag

    def bind_bool_expr(self, expr: Expr) -> BExpr:
        bound, tag = self.bind_expr(expr)
        if tag != "bool":
            raise QueryTypeError(render_expr(expr), "expected a condition, got a value")
        return bound

    def bind_expr(self, expr: Expr):
        """Returns (bound node, tag) where tag is "bool" or a ColumnType."""
        if isinstance(expr, ColumnRef):
            ref = self.resolve_column(expr)
            return ref, ref.ctype
        if isinstance(expr, IntLiteral):
            return BInt(expr.value), ColumnType.int64()
        if isinstance(expr, StrLiteral):
            width = max(1, min(len(expr.value), 64))
            if len(expr.value) > 64:
                raise QueryTypeError(render_expr(expr), "string literal longer than 64 bytes")
            return BStr(expr.value), ColumnType.char(width)
        if isinstance(expr, Arith):
            lhs, lt = self.bind_value_tagged(expr.lhs, expr)
            rhs, rt = self.bind_value_tagged(expr.rhs, expr)
            if lt.kind is not TypeKind.INT or rt.kind is not TypeKind.INT:
                raise QueryTypeError(render_expr(expr), "arithmetic needs INT operands")
            return BArith(expr.op, lhs, rhs), ColumnType.int64()
        if isinstance(expr, Cmp):
            lhs, lt = self.bind_value_tagged(expr.lhs, expr)
            rhs, rt = self.bind_value_tagged(expr.rhs, expr)
            if lt.kind is not rt.kind:
                raise QueryTypeError(render_expr(expr), "cannot compare INT with CHAR")
            if lt.kind is TypeKind.CHAR:
                if expr.op not in ("=", "<>"):
                    raise QueryTypeError(
                        render_expr(expr), "CHAR supports only = and <> comparisons"
                    )
                width = max(lt.width_bytes, rt.width_bytes)
                return BCmp(expr.op, lhs, rhs, TypeKind.CHAR, width), "bool"
            return BCmp(expr.op, lhs, rhs, TypeKind.INT, 0), "bool"
        if isinstance(expr, BoolOp):
            children = tuple(self.bind_bool_expr(c) for c in expr.children)
            return BBool(expr.op, children), "bool"
        raise TypeError(f"not an expression: {expr!r}")

    def bind_value_tagged(self, expr: Expr, parent: Expr):
        bound, tag = self.bind_expr(expr)
        if tag == "bool":
            raise QueryTypeError(render_expr(parent), "condition used as a value")
        return bound, tag

    # -- plan binding ---------------------------------------------------------

    def bind(self) -> BoundPlan:
        plan = self.plan
        join_l = join_r = None
        join_type = None
        if plan.join:
            join_l, join_r, join_type = self._bind_join_keys(plan.join.left_key,
                                                             plan.join.right_key)
        restriction = None
        if plan.restriction is not None:
            restriction = self.bind_bool_expr(plan.restriction)

        for name, expr in plan.computed:
            self._check_computed_name(name)
            bound, ctype = self.bind_value_expr(expr)
            self.computed_index[name.lower()] = len(self.computed)
            self.computed.append(BoundComputed(name, bound, ctype))

        group_by = tuple(self.resolve_value(ref) for ref in plan.group_by)
        aggregates = tuple(self._bind_aggregate(spec) for spec in plan.aggregates)
        output = self._bind_projection(plan, group_by, aggregates)
        order_by = self._bind_order(plan, output)
        schema = Schema(tuple((c.name, c.ctype) for c in output))
        return BoundPlan(
            plan=plan,
            left_table=self.left_table,
            left_schema=self.left_schema,
            right_table=self.right_table,
            right_schema=self.right_schema,
            join_left_index=join_l,
            join_right_index=join_r,
            join_key_type=join_type,
            restriction=restriction,
            computed=tuple(self.computed),
            group_by=group_by,
            aggregates=aggregates,
            output=output,
            order_by=order_by,
            output_schema=schema,
        )

    def _bind_join_keys(self, left: ColumnRef, right: ColumnRef):
        a = self.resolve_column(left)
        b = self.resolve_column(right)
        if a.slot == b.slot:
            raise QueryTypeError(
                f"{left.render()} = {right.render()}",
                "join keys must come from different tables",
            )
        if a.slot == 1:
            a, b = b, a
        if a.ctype.kind is not b.ctype.kind:
            raise QueryTypeError(
                f"{left.render()} = {right.render()}", "join key types differ"
            )
        if a.ctype.kind is TypeKind.CHAR:
            key_type = ColumnType.char(max(a.ctype.width_bytes, b.ctype.width_bytes))
        else:
            key_type = ColumnType.int64()
        return a.index, b.index, key_type

    def _check_computed_name(self, name: str):
        low = name.lower()
        for _, schema in self._slots():
            if any(col.lower() == low for col in schema.names):
                raise QueryTypeError(name, "computed name collides with a column")
        if low in self.computed_index:
            raise QueryTypeError(name, "computed name defined twice")

    def _bind_aggregate(self, spec: AggSpec) -> BoundAgg:
        if spec.arg is None:
            if spec.fn != "COUNT":
                raise QueryTypeError(spec.render(), f"{spec.fn}(*) is not allowed")
            return BoundAgg("COUNT", None, spec.name, ColumnType.int64())
        ref = self.resolve_value(spec.arg)
        if spec.fn in ("SUM", "AVG") and ref.ctype.kind is not TypeKind.INT:
            raise QueryTypeError(spec.render(), f"{spec.fn} needs an INT column")
        if spec.fn == "COUNT":
            ctype = ColumnType.int64()
        elif spec.fn in ("SUM", "AVG"):
            ctype = ColumnType.int64()
        else:
            ctype = ref.ctype
        return BoundAgg(spec.fn, ref, spec.name, ctype)

    def _bind_projection(self, plan, group_by, aggregates):
        output: list[OutputCol] = []
        taken: set[str] = set()

        def add(name: str, source, ctype: ColumnType, qualifier: str | None):
            final = name
            if final.lower() in taken and qualifier:
                final = f"{qualifier}_{name}"
            k = 2
            base = final
            while final.lower() in taken:
                final = f"{base}_{k}"
                k += 1
            taken.add(final.lower())
            output.append(OutputCol(final, source, ctype))

        if self.plan.aggregates or self.plan.group_by:
            for item in plan.projection:
                if isinstance(item, Star):
                    raise QueryTypeError(
                        "*", "star projection cannot be mixed with grouping"
                    )
                if isinstance(item, AggItem):
                    agg = aggregates[item.index]
                    add(agg.name, FromAggregate(item.index), agg.ctype, None)
                    continue
                ref = self.resolve_value(item.ref)
                try:
                    pos = group_by.index(ref)
                except ValueError:
                    raise QueryTypeError(
                        item.ref.render(),
                        "projection must use group columns or aggregates",
                    ) from None
                add(item.ref.name, FromGroupKey(pos), ref.ctype, item.ref.qualifier)
            return tuple(output)

        for item in plan.projection:
            if isinstance(item, Star):
                for slot, schema in self._slots():
                    qualifier = self.left_table if slot == 0 else self.right_table
                    for idx, (name, ctype) in enumerate(schema.columns):
                        add(name, FromValue(ValueRef("column", slot, idx, ctype)),
                            ctype, qualifier)
            elif isinstance(item, AggItem):  # pragma: no cover - shaped away above
                raise AssertionError("aggregate outside grouping")
            else:
                ref = self.resolve_value(item.ref)
                add(item.ref.name, FromValue(ref), ref.ctype, item.ref.qualifier)
        return tuple(output)

    def _bind_order(self, plan, output):
        order = []
        for key in plan.order_by:
            low = key.name.lower()
            for idx, col in enumerate(output):
                if col.name.lower() == low:
                    order.append((idx, key.ascending))
                    break
            else:
                raise UnknownColumn(key.name, "ORDER BY keys must name output columns")
        return tuple(order)


def bind(plan: QueryPlan, catalog: dict) -> BoundPlan:
    """Resolve and type-check a parsed plan against `{table name: Schema}`."""
    return _Binder(plan, catalog).bind()

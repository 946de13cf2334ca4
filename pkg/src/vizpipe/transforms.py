"""Declarative data transforms: match, derive, aggregate/bin, sort, top.

Two tiny textual grammars back the string-valued steps. Predicates::

    pred       := or | or 'or' pred
    or         := cmp | cmp 'and' or            (with parentheses)
    cmp        := field OP literal | field 'in' '[' literal, ... ']'
    OP         := == != < <= > >=

Derive expressions are arithmetic over numeric columns::

    expr := term (('+'|'-') term)* ; term := factor (('*'|'/') factor)*
    factor := '-' factor | '(' expr ')' | number | field

Field names match ``[A-Za-z_$][A-Za-z0-9_.$]*``; anything else (one-hot
columns like ``c=a``) can be written backtick-quoted. String literals take
single or double quotes. Comparisons against a null cell are false; derive
propagates nulls and turns division by zero into null.
"""

from __future__ import annotations

import re
from dataclasses import dataclass

import numpy as np

from .errors import (
    AggregateOnCategorical,
    ExprParseError,
    PredicateParseError,
    TypeMismatch,
    UnknownColumn,
)
from .frame import (
    CATEGORICAL,
    FLOAT64,
    INT64,
    Column,
    DataFrame,
    categorical_column,
    float_column,
    int_column,
)

_TOKEN_RE = re.compile(
    r"""\s*(?:
        (?P<num>-?\d+\.\d*(?:[eE][+-]?\d+)?|-?\.\d+(?:[eE][+-]?\d+)?|-?\d+(?:[eE][+-]?\d+)?)
      | (?P<ident>[A-Za-z_$][A-Za-z0-9_.$]*)
      | `(?P<quoted>[^`]*)`
      | '(?P<sq>[^']*)'
      | "(?P<dq>[^"]*)"
      | (?P<op>==|!=|<=|>=|<|>|\+|-|\*|/|\(|\)|\[|\]|,)
    )""",
    re.VERBOSE,
)

_KEYWORDS = {"and", "or", "in"}


@dataclass
class _Tok:
    kind: str  # num | field | str | op | kw
    value: object
    pos: int


def _tokenize(text: str, error_cls) -> list[_Tok]:
    tokens = []
    pos = 0
    while pos < len(text):
        m = _TOKEN_RE.match(text, pos)
        if not m or m.end() == pos:
            if text[pos:].strip() == "":
                break
            raise error_cls(f"bad token at position {pos}: {text[pos:pos + 10]!r}")
        if m.group("num") is not None:
            tokens.append(_Tok("num", float(m.group("num")), m.start()))
        elif m.group("ident") is not None:
            word = m.group("ident")
            if word in _KEYWORDS:
                tokens.append(_Tok("kw", word, m.start()))
            else:
                tokens.append(_Tok("field", word, m.start()))
        elif m.group("quoted") is not None:
            tokens.append(_Tok("field", m.group("quoted"), m.start()))
        elif m.group("sq") is not None:
            tokens.append(_Tok("str", m.group("sq"), m.start()))
        elif m.group("dq") is not None:
            tokens.append(_Tok("str", m.group("dq"), m.start()))
        else:
            tokens.append(_Tok("op", m.group("op"), m.start()))
        pos = m.end()
    return tokens


# --- predicate AST ---------------------------------------------------------

@dataclass
class Comparison:
    field: str
    op: str  # == != < <= > >= in
    literal: object  # float | str | list

@dataclass
class BoolExpr:
    op: str  # and | or
    left: object
    right: object


class _PredParser:
    def __init__(self, text: str):
        # wholesale '-' tokens would glue onto numbers; fine for predicates
        self.toks = _tokenize(text, PredicateParseError)
        self.i = 0

    def peek(self) -> _Tok | None:
        return self.toks[self.i] if self.i < len(self.toks) else None

    def next(self) -> _Tok:
        tok = self.peek()
        if tok is None:
            raise PredicateParseError("unexpected end of predicate")
        self.i += 1
        return tok

    def parse(self):
        node = self.parse_or()
        if self.peek() is not None:
            raise PredicateParseError(f"unexpected trailing input at {self.peek().pos}")
        return node

    def parse_or(self):
        node = self.parse_and()
        while (tok := self.peek()) and tok.kind == "kw" and tok.value == "or":
            self.next()
            node = BoolExpr("or", node, self.parse_and())
        return node

    def parse_and(self):
        node = self.parse_atom()
        while (tok := self.peek()) and tok.kind == "kw" and tok.value == "and":
            self.next()
            node = BoolExpr("and", node, self.parse_atom())
        return node

    def parse_atom(self):
        tok = self.next()
        if tok.kind == "op" and tok.value == "(":
            node = self.parse_or()
            close = self.next()
            if close.kind != "op" or close.value != ")":
                raise PredicateParseError(f"expected ')' at {close.pos}")
            return node
        if tok.kind != "field":
            raise PredicateParseError(f"expected field name at {tok.pos}")
        op_tok = self.next()
        if op_tok.kind == "kw" and op_tok.value == "in":
            return Comparison(tok.value, "in", self.parse_list())
        if op_tok.kind != "op" or op_tok.value not in ("==", "!=", "<", "<=", ">", ">="):
            raise PredicateParseError(f"expected comparison operator at {op_tok.pos}")
        lit = self.next()
        if lit.kind not in ("num", "str"):
            raise PredicateParseError(f"expected literal at {lit.pos}")
        return Comparison(tok.value, op_tok.value, lit.value)

    def parse_list(self) -> list:
        open_tok = self.next()
        if open_tok.kind != "op" or open_tok.value != "[":
            raise PredicateParseError(f"expected '[' at {open_tok.pos}")
        items = []
        while True:
            tok = self.next()
            if tok.kind == "op" and tok.value == "]" and not items:
                return items
            if tok.kind not in ("num", "str"):
                raise PredicateParseError(f"expected literal in list at {tok.pos}")
            items.append(tok.value)
            sep = self.next()
            if sep.kind == "op" and sep.value == "]":
                return items
            if sep.kind != "op" or sep.value != ",":
                raise PredicateParseError(f"expected ',' or ']' at {sep.pos}")


def parse_predicate(text: str):
    """Parse predicate text to an AST (also reused by interaction filters)."""
    return _PredParser(text).parse()


def predicate_fields(node) -> list[str]:
    if isinstance(node, Comparison):
        return [node.field]
    out = predicate_fields(node.left)
    for f in predicate_fields(node.right):
        if f not in out:
            out.append(f)
    return out


def _compare_column(col: Column, op: str, literal) -> np.ndarray:
    valid = col.valid_mask()
    if col.dtype == CATEGORICAL:
        if op in ("<", "<=", ">", ">="):
            raise TypeMismatch(f"ordering comparison on categorical column {col.name!r}")
        labels = np.asarray(col.dictionary, dtype=object)
        row_labels = labels[col.values] if len(col.dictionary) else np.empty(col.row_count, object)
        if op == "in":
            wanted = set()
            for v in literal:
                if isinstance(v, float) and v.is_integer():
                    wanted.add(str(int(v)))  # 1.0 should hit the label "1"
                wanted.add(str(v))
            hit = np.array([v in wanted for v in row_labels], dtype=bool)
        else:
            if not isinstance(literal, str):
                raise TypeMismatch(f"comparing categorical {col.name!r} to a number")
            hit = row_labels == literal
            if op == "!=":
                hit = ~hit
        return hit & valid
    # numeric column
    if op == "in":
        values = [v for v in literal if isinstance(v, (int, float))]
        if len(values) != len(literal):
            raise TypeMismatch(f"string in numeric 'in' list for column {col.name!r}")
        hit = np.isin(col.values, np.asarray(values))
        return hit & valid
    if isinstance(literal, str):
        raise TypeMismatch(f"comparing numeric column {col.name!r} to a string")
    ops = {
        "==": np.equal, "!=": np.not_equal,
        "<": np.less, "<=": np.less_equal,
        ">": np.greater, ">=": np.greater_equal,
    }
    with np.errstate(invalid="ignore"):
        hit = ops[op](col.values, literal)
    return hit & valid


def evaluate_predicate(frame: DataFrame, node) -> np.ndarray:
    """Row mask for a parsed predicate; null cells never satisfy a comparison."""
    if isinstance(node, Comparison):
        return _compare_column(frame.column(node.field), node.op, node.literal)
    left = evaluate_predicate(frame, node.left)
    right = evaluate_predicate(frame, node.right)
    return (left & right) if node.op == "and" else (left | right)


def match(frame: DataFrame, predicate: str) -> DataFrame:
    """Rows satisfying the predicate, original order preserved."""
    mask = evaluate_predicate(frame, parse_predicate(predicate))
    if mask.all():
        return frame
    return frame.take(np.flatnonzero(mask))


# --- derive ----------------------------------------------------------------

@dataclass
class _Num:
    value: float

@dataclass
class _Ref:
    name: str

@dataclass
class _Unary:
    operand: object

@dataclass
class _Binary:
    op: str
    left: object
    right: object


class _ExprParser:
    def __init__(self, text: str):
        # expressions treat '-' as an operator, so retokenize glued negatives
        toks = []
        for tok in _tokenize(text, ExprParseError):
            if tok.kind == "num" and isinstance(tok.value, float) and tok.value < 0:
                raw = str(tok.value)
                toks.append(_Tok("op", "-", tok.pos))
                toks.append(_Tok("num", float(raw[1:]), tok.pos + 1))
            else:
                toks.append(tok)
        self.toks = toks
        self.i = 0

    def peek(self):
        return self.toks[self.i] if self.i < len(self.toks) else None

    def next(self):
        tok = self.peek()
        if tok is None:
            raise ExprParseError("unexpected end of expression")
        self.i += 1
        return tok

    def parse(self):
        node = self.parse_sum()
        if self.peek() is not None:
            raise ExprParseError(f"unexpected trailing input at {self.peek().pos}")
        return node

    def parse_sum(self):
        node = self.parse_term()
        while (tok := self.peek()) and tok.kind == "op" and tok.value in "+-":
            self.next()
            node = _Binary(tok.value, node, self.parse_term())
        return node

    def parse_term(self):
        node = self.parse_factor()
        while (tok := self.peek()) and tok.kind == "op" and tok.value in "*/":
            self.next()
            node = _Binary(tok.value, node, self.parse_factor())
        return node

    def parse_factor(self):
        tok = self.next()
        if tok.kind == "op" and tok.value == "-":
            return _Unary(self.parse_factor())
        if tok.kind == "op" and tok.value == "(":
            node = self.parse_sum()
            close = self.next()
            if close.kind != "op" or close.value != ")":
                raise ExprParseError(f"expected ')' at {close.pos}")
            return node
        if tok.kind == "num":
            return _Num(tok.value)
        if tok.kind == "field":
            return _Ref(tok.value)
        raise ExprParseError(f"unexpected token at {tok.pos}")


def parse_expression(text: str):
    return _ExprParser(text).parse()


def expression_fields(node) -> list[str]:
    if isinstance(node, _Ref):
        return [node.name]
    if isinstance(node, _Num):
        return []
    if isinstance(node, _Unary):
        return expression_fields(node.operand)
    out = expression_fields(node.left)
    for f in expression_fields(node.right):
        if f not in out:
            out.append(f)
    return out


def _eval_expr(frame: DataFrame, node) -> tuple[np.ndarray, np.ndarray]:
    """Returns (float64 values, valid mask)."""
    if isinstance(node, _Num):
        n = frame.row_count
        return np.full(n, node.value), np.ones(n, dtype=bool)
    if isinstance(node, _Ref):
        col = frame.column(node.name)
        if col.dtype == CATEGORICAL:
            raise TypeMismatch(f"arithmetic on categorical column {col.name!r}")
        return col.values.astype(np.float64), col.valid_mask().copy()
    if isinstance(node, _Unary):
        vals, valid = _eval_expr(frame, node.operand)
        return -vals, valid
    lv, lok = _eval_expr(frame, node.left)
    rv, rok = _eval_expr(frame, node.right)
    valid = lok & rok
    with np.errstate(divide="ignore", invalid="ignore"):
        if node.op == "+":
            out = lv + rv
        elif node.op == "-":
            out = lv - rv
        elif node.op == "*":
            out = lv * rv
        else:
            out = lv / rv
            valid = valid & (rv != 0)
    return out, valid


def derive(frame: DataFrame, name: str, expression: str) -> DataFrame:
    """Append a float64 column computed row-wise from the expression."""
    node = parse_expression(expression)
    for field in expression_fields(node):
        if field not in frame:
            raise UnknownColumn(field)
    vals, valid = _eval_expr(frame, node)
    mask = None if valid.all() else valid
    return frame.append_column(float_column(name, vals, mask))


# --- aggregate -------------------------------------------------------------

def _bin_keys(col: Column, bin_count=None, bin_width=None):
    """Left bin edge per row (NaN for null/empty); right-open, last bin closed."""
    if col.dtype == CATEGORICAL:
        raise TypeMismatch(f"binning categorical column {col.name!r}")
    valid = col.valid_mask()
    vals = col.values.astype(np.float64)
    out = np.full(col.row_count, np.nan)
    if not valid.any():
        return out
    lo = vals[valid].min()
    hi = vals[valid].max()
    if bin_count is not None:
        k = max(1, int(bin_count))
        width = (hi - lo) / k if hi > lo else 1.0
    else:
        width = float(bin_width)
        k = max(1, int(np.ceil((hi - lo) / width))) if hi > lo else 1
    idx = np.floor((vals - lo) / width).astype(np.int64)
    idx = np.clip(idx, 0, k - 1)  # closes the last bin
    out[valid] = lo + idx[valid] * width
    return out


def aggregate(
    frame: DataFrame,
    group_by: list[str] | None = None,
    bin: dict | None = None,
    aggregations: list[dict] | None = None,
) -> DataFrame:
    """Group rows and compute aggregates; groups are sorted by key ascending.

    `bin` is ``{"field": name, "bin_count": k}`` or ``{"field": name,
    "bin_width": w}``; the key column then holds left bin edges. Rows with a
    null in any group key are excluded. ``op: "count"`` needs no field.
    """
    aggregations = aggregations or [{"op": "count"}]
    key_cols: list[tuple[str, str, np.ndarray]] = []  # (name, kind, per-row key)
    keep = np.ones(frame.row_count, dtype=bool)
    if bin:
        col = frame.column(bin["field"])
        edges = _bin_keys(col, bin.get("bin_count"), bin.get("bin_width"))
        keep &= ~np.isnan(edges)
        key_cols.append((f"{bin['field']}_bin", "num", edges))
    for name in group_by or []:
        col = frame.column(name)
        keep &= col.valid_mask()
        if col.dtype == CATEGORICAL:
            labels = np.asarray(col.dictionary, object)[col.values] if col.dictionary else \
                np.empty(col.row_count, object)
            key_cols.append((name, "cat", labels))
        else:
            key_cols.append((name, "num", col.values))
    if not key_cols:
        raise ValueError("aggregate needs group_by fields or a bin")

    rows = np.flatnonzero(keep)
    groups: dict[tuple, list[int]] = {}
    for r in rows:
        key = tuple(k[2][r] for k in key_cols)
        groups.setdefault(key, []).append(int(r))
    ordered = sorted(groups.keys())

    out_cols: list[Column] = []
    for pos, (name, kind, _) in enumerate(key_cols):
        vals = [key[pos] for key in ordered]
        if kind == "cat":
            out_cols.append(categorical_column(name, [str(v) for v in vals]))
        else:
            arr = np.asarray(vals)
            if arr.dtype.kind == "i":
                out_cols.append(int_column(name, arr))
            else:
                out_cols.append(float_column(name, np.asarray(vals, dtype=np.float64)))

    for agg in aggregations:
        op = agg["op"]
        field = agg.get("field")
        out_name = agg.get("out") or ("$count" if op == "count" and not field else f"{op}_{field}")
        if op == "count":
            if field is None:
                counts = [len(groups[k]) for k in ordered]
            else:
                valid = frame.column(field).valid_mask()
                counts = [int(valid[groups[k]].sum()) for k in ordered]
            out_cols.append(int_column(out_name, counts))
            continue
        col = frame.column(field)
        if col.dtype == CATEGORICAL:
            if op in ("sum", "mean"):
                raise AggregateOnCategorical(f"{op} over categorical column {field!r}")
            labels = np.asarray(col.dictionary, object)[col.values] if col.dictionary else \
                np.empty(col.row_count, object)
            valid = col.valid_mask()
            picked = []
            for k in ordered:
                idx = [r for r in groups[k] if valid[r]]
                vals = sorted(labels[idx]) if idx else []
                picked.append((vals[0] if op == "min" else vals[-1]) if vals else None)
            out_cols.append(categorical_column(out_name, picked))
            continue
        values = col.values.astype(np.float64)
        valid = col.valid_mask()
        results = []
        ok = []
        for k in ordered:
            idx = np.asarray(groups[k])
            live = values[idx][valid[idx]]
            if live.size == 0:
                results.append(np.nan)
                ok.append(False)
                continue
            ok.append(True)
            if op == "sum":
                results.append(float(live.sum()))
            elif op == "mean":
                results.append(float(live.mean()))
            elif op == "min":
                results.append(float(live.min()))
            elif op == "max":
                results.append(float(live.max()))
            else:
                raise ValueError(f"unknown aggregation op {op!r}")
        mask = None if all(ok) else ok
        out_cols.append(float_column(out_name, results, mask))

    return DataFrame(out_cols, row_count=len(ordered))


# --- sort / top ------------------------------------------------------------

def sort_top(frame: DataFrame, by: str, order: str = "asc", limit: int | None = None) -> DataFrame:
    """Stable sort by one column (nulls last), optionally keeping the first rows."""
    col = frame.column(by)
    valid = col.valid_mask()
    if col.dtype == CATEGORICAL:
        labels = np.asarray(col.dictionary, object)[col.values] if col.dictionary else \
            np.empty(col.row_count, object)
        order_idx = sorted(range(col.row_count),
                           key=lambda i: (not valid[i], labels[i] if valid[i] else ""))
        if order == "desc":
            live = [i for i in order_idx if valid[i]]
            dead = [i for i in order_idx if not valid[i]]
            # stable descending: reverse the sorted-ascending group blocks
            order_idx = _stable_desc(live, lambda i: labels[i]) + dead
        idx = np.asarray(order_idx, dtype=np.int64)
    else:
        vals = col.values.astype(np.float64).copy()
        vals[~valid] = np.inf if order != "desc" else -np.inf  # nulls last either way
        key = vals if order != "desc" else -vals
        nullkey = (~valid).astype(np.int64)
        idx = np.lexsort((np.arange(frame.row_count), key, nullkey))
    if limit is not None:
        idx = idx[: int(limit)]
    if np.array_equal(idx, np.arange(frame.row_count)):
        return frame
    return frame.take(idx)


def _stable_desc(indices: list[int], key) -> list[int]:
    """Descending by key but original order inside equal-key runs."""
    return sorted(indices, key=lambda i: (_NegStr(key(i)), i))


class _NegStr:
    """Inverts string comparison order."""

    __slots__ = ("s",)

    def __init__(self, s):
        self.s = s

    def __lt__(self, other):
        return self.s > other.s

    def __eq__(self, other):
        return self.s == other.s


# --- step runner -----------------------------------------------------------

def apply_steps(frame: DataFrame, steps: list) -> DataFrame:
    """Run a normalized transform chain (speclang.TransformStep list or dicts)."""
    for step in steps or []:
        kind = step.kind if hasattr(step, "kind") else step["kind"]
        args = step.args if hasattr(step, "args") else step["args"]
        if kind == "match":
            frame = match(frame, args["predicate"])
        elif kind == "derive":
            frame = derive(frame, args["name"], args["expr"])
        elif kind == "aggregate":
            frame = aggregate(frame, args.get("group_by"), args.get("bin"), args.get("ops"))
        elif kind == "sort":
            frame = sort_top(frame, args["by"], args.get("order", "asc"), args.get("limit"))
        elif kind == "top":
            frame = sort_top(frame, args["by"], "desc", args["limit"])
        else:
            raise ValueError(f"unknown transform kind {kind!r}")
    return frame


def output_columns(step_kind: str, args: dict) -> list[str]:
    """Column names a step introduces (symbol resolution uses this)."""
    if step_kind == "derive":
        return [args["name"]]
    if step_kind == "aggregate":
        names = []
        if args.get("bin"):
            names.append(f"{args['bin']['field']}_bin")
        for agg in args.get("ops") or [{"op": "count"}]:
            op = agg["op"]
            field = agg.get("field")
            names.append(agg.get("out") or ("$count" if op == "count" and not field else f"{op}_{field}"))
        return names
    return []

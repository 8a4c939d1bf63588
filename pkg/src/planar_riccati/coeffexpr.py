"""Coefficient expressions in the single variable ``t``.

Grammar (whitespace insensitive)::

    expr    := term (('+' | '-') term)*
    term    := unary (('*' | '/') unary)*
    unary   := '-' unary | power
    power   := atom ('^' unary)?          # right associative
    atom    := NUMBER | 't' | 'pi' | NAME '(' args ')' | '(' expr ')'

Functions: sin, cos, exp, ln, abs (one argument) and min, max (two).
``-t^2`` parses as ``-(t^2)`` and ``2^-1`` as ``2^(-1)``.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass, field
from typing import Sequence, Union

import numpy as np

__all__ = [
    "CoeffExprError",
    "ExprSyntaxError",
    "UnknownIdentifierError",
    "SingularPointError",
    "Const",
    "Var",
    "Neg",
    "BinOp",
    "Call",
    "CoeffExpr",
    "SignCertificate",
    "parse",
    "render",
    "evaluate",
    "sign_certify",
    "as_expr",
]


class CoeffExprError(ValueError):
    pass


class ExprSyntaxError(CoeffExprError):
    def __init__(self, message: str, offset: int, source: str = ""):
        self.offset = offset
        self.source = source
        super().__init__(f"{message} at offset {offset}")


class UnknownIdentifierError(ExprSyntaxError):
    pass


class SingularPointError(CoeffExprError, ArithmeticError):
    def __init__(self, t: float, reason: str = "singular point"):
        self.t = float(t)
        self.reason = reason
        super().__init__(f"{reason} at t={self.t!r}")


# ---------------------------------------------------------------- tree nodes


@dataclass(frozen=True)
class Const:
    value: float


@dataclass(frozen=True)
class Var:
    pass


@dataclass(frozen=True)
class Neg:
    arg: "Node"


@dataclass(frozen=True)
class BinOp:
    op: str  # one of + - * / ^
    left: "Node"
    right: "Node"


@dataclass(frozen=True)
class Call:
    fn: str
    args: tuple


Node = Union[Const, Var, Neg, BinOp, Call]

_UNARY_FUNCS = ("sin", "cos", "exp", "ln", "abs")
_BINARY_FUNCS = ("min", "max")
_NAMED_CONSTS = {"pi": math.pi}

# ---------------------------------------------------------------- tokenizer

_TOKEN = re.compile(
    r"\s*(?:(?P<num>(?:\d+\.?\d*|\.\d+)(?:[eE][+-]?\d+)?)"
    r"|(?P<name>[A-Za-z_][A-Za-z_0-9]*)"
    r"|(?P<op>[-+*/^(),]))"
)


def _tokenize(src: str):
    pos = 0
    out = []
    n = len(src)
    while True:
        while pos < n and src[pos].isspace():
            pos += 1
        if pos >= n:
            break
        m = _TOKEN.match(src, pos)
        if m is None or m.end() == pos:
            raise ExprSyntaxError(f"unexpected character {src[pos]!r}", pos, src)
        start = m.start(m.lastgroup)
        kind = m.lastgroup
        out.append((kind, m.group(kind), start))
        pos = m.end()
    out.append(("end", "", n))
    return out


class _Parser:
    def __init__(self, src: str):
        self.src = src
        self.toks = _tokenize(src)
        self.i = 0

    def peek(self):
        return self.toks[self.i]

    def take(self):
        tok = self.toks[self.i]
        self.i += 1
        return tok

    def expect(self, value: str):
        kind, val, off = self.peek()
        if val != value or kind == "end":
            what = "end of input" if kind == "end" else repr(val)
            raise ExprSyntaxError(f"expected {value!r}, found {what}", off, self.src)
        self.take()

    def parse(self) -> Node:
        node = self.expr()
        kind, val, off = self.peek()
        if kind != "end":
            raise ExprSyntaxError(f"unexpected token {val!r}", off, self.src)
        return node

    def expr(self) -> Node:
        node = self.term()
        while self.peek()[1] in ("+", "-") and self.peek()[0] == "op":
            op = self.take()[1]
            node = BinOp(op, node, self.term())
        return node

    def term(self) -> Node:
        node = self.unary()
        while self.peek()[1] in ("*", "/") and self.peek()[0] == "op":
            op = self.take()[1]
            node = BinOp(op, node, self.unary())
        return node

    def unary(self) -> Node:
        if self.peek()[0] == "op" and self.peek()[1] == "-":
            self.take()
            arg = self.unary()
            if isinstance(arg, Const):
                return Const(-arg.value)
            return Neg(arg)
        return self.power()

    def power(self) -> Node:
        base = self.atom()
        if self.peek()[0] == "op" and self.peek()[1] == "^":
            self.take()
            return BinOp("^", base, self.unary())
        return base

    def atom(self) -> Node:
        kind, val, off = self.take()
        if kind == "num":
            return Const(float(val))
        if kind == "name":
            if self.peek()[1] == "(" and self.peek()[0] == "op":
                if val not in _UNARY_FUNCS and val not in _BINARY_FUNCS:
                    raise UnknownIdentifierError(f"unknown function {val!r}", off, self.src)
                self.take()
                args = [self.expr()]
                while self.peek()[1] == "," and self.peek()[0] == "op":
                    self.take()
                    args.append(self.expr())
                self.expect(")")
                want = 1 if val in _UNARY_FUNCS else 2
                if len(args) != want:
                    raise ExprSyntaxError(
                        f"{val} takes {want} argument(s), got {len(args)}", off, self.src
                    )
                return Call(val, tuple(args))
            if val == "t":
                return Var()
            if val in _NAMED_CONSTS:
                return Const(_NAMED_CONSTS[val])
            raise UnknownIdentifierError(f"unknown identifier {val!r}", off, self.src)
        if kind == "op" and val == "(":
            node = self.expr()
            self.expect(")")
            return node
        if kind == "end":
            raise ExprSyntaxError("unexpected end of input", off, self.src)
        raise ExprSyntaxError(f"unexpected token {val!r}", off, self.src)


# ---------------------------------------------------------------- rendering

_PREC = {"+": 1, "-": 1, "*": 2, "/": 2, "neg": 3, "^": 4}


def _prec(node: Node) -> int:
    if isinstance(node, BinOp):
        return _PREC[node.op]
    if isinstance(node, Neg):
        return _PREC["neg"]
    if isinstance(node, Const) and node.value < 0:
        return _PREC["neg"]
    return 5


def _fmt_const(v: float) -> str:
    if v == math.pi:
        return "pi"
    if not math.isfinite(v):
        raise CoeffExprError(f"non-finite constant {v!r}")
    return repr(abs(v)) if v >= 0 else "-" + repr(-v)


def render(node: "Node | CoeffExpr") -> str:
    """Infix text that parses back to the same tree."""
    if isinstance(node, CoeffExpr):
        node = node.root
    if isinstance(node, Const):
        return _fmt_const(node.value)
    if isinstance(node, Var):
        return "t"
    if isinstance(node, Neg):
        inner = render(node.arg)
        if _prec(node.arg) < _PREC["neg"] or isinstance(node.arg, Neg) or (
            isinstance(node.arg, Const)
        ):
            inner = f"({inner})"
        return "-" + inner
    if isinstance(node, Call):
        return f"{node.fn}({', '.join(render(a) for a in node.args)})"
    p = _PREC[node.op]
    left, right = render(node.left), render(node.right)
    if node.op == "^":
        if _prec(node.left) <= p:
            left = f"({left})"
        if _prec(node.right) < _PREC["neg"]:
            right = f"({right})"
    else:
        if _prec(node.left) < p:
            left = f"({left})"
        if _prec(node.right) <= p:
            right = f"({right})"
    return f"{left}{node.op}{right}"


# ---------------------------------------------------------------- scalar evaluation


def _eval(node: Node, t: float) -> float:
    if isinstance(node, Const):
        return node.value
    if isinstance(node, Var):
        return t
    if isinstance(node, Neg):
        return -_eval(node.arg, t)
    if isinstance(node, BinOp):
        a = _eval(node.left, t)
        b = _eval(node.right, t)
        op = node.op
        if op == "+":
            return a + b
        if op == "-":
            return a - b
        if op == "*":
            return a * b
        if op == "/":
            if b == 0.0:
                raise SingularPointError(t, "division by zero")
            return a / b
        try:
            return math.pow(a, b)
        except (ValueError, ZeroDivisionError):
            raise SingularPointError(t, "invalid power") from None
        except OverflowError:
            raise SingularPointError(t, "overflow") from None
    fn = node.fn
    a = _eval(node.args[0], t)
    if fn == "sin":
        return math.sin(a)
    if fn == "cos":
        return math.cos(a)
    if fn == "exp":
        try:
            return math.exp(a)
        except OverflowError:
            raise SingularPointError(t, "overflow") from None
    if fn == "ln":
        if a <= 0.0:
            raise SingularPointError(t, "ln of non-positive value")
        return math.log(a)
    if fn == "abs":
        return abs(a)
    b = _eval(node.args[1], t)
    return min(a, b) if fn == "min" else max(a, b)


def _eval_vec(node: Node, t: np.ndarray) -> np.ndarray:
    if isinstance(node, Const):
        return np.full(t.shape, node.value)
    if isinstance(node, Var):
        return t
    if isinstance(node, Neg):
        return -_eval_vec(node.arg, t)
    if isinstance(node, BinOp):
        a = _eval_vec(node.left, t)
        b = _eval_vec(node.right, t)
        op = node.op
        if op == "+":
            return a + b
        if op == "-":
            return a - b
        if op == "*":
            return a * b
        if op == "/":
            return np.where(b == 0.0, np.nan, a / np.where(b == 0.0, 1.0, b))
        return np.power(a, b)
    a = _eval_vec(node.args[0], t)
    fn = node.fn
    if fn == "sin":
        return np.sin(a)
    if fn == "cos":
        return np.cos(a)
    if fn == "exp":
        return np.exp(a)
    if fn == "ln":
        return np.where(a > 0.0, np.log(np.where(a > 0.0, a, 1.0)), np.nan)
    if fn == "abs":
        return np.abs(a)
    b = _eval_vec(node.args[1], t)
    return np.minimum(a, b) if fn == "min" else np.maximum(a, b)


# ---------------------------------------------------------------- RPN programs

OP_CONST, OP_T, OP_ADD, OP_SUB, OP_MUL, OP_DIV, OP_POW, OP_NEG = range(8)
OP_SIN, OP_COS, OP_EXP, OP_LN, OP_ABS, OP_MIN, OP_MAX, OP_STATE = range(8, 16)
_BIN_CODES = {"+": OP_ADD, "-": OP_SUB, "*": OP_MUL, "/": OP_DIV, "^": OP_POW}
_FN_CODES = {
    "sin": OP_SIN,
    "cos": OP_COS,
    "exp": OP_EXP,
    "ln": OP_LN,
    "abs": OP_ABS,
    "min": OP_MIN,
    "max": OP_MAX,
}
STACK_LIMIT = 64


def _emit(node: Node, code: list, consts: list) -> int:
    """Append postfix code for ``node``; return the stack depth it needs."""
    if isinstance(node, Const):
        consts.append(node.value)
        code.append((OP_CONST, len(consts) - 1))
        return 1
    if isinstance(node, Var):
        code.append((OP_T, 0))
        return 1
    if isinstance(node, Neg):
        d = _emit(node.arg, code, consts)
        code.append((OP_NEG, 0))
        return d
    if isinstance(node, BinOp):
        d1 = _emit(node.left, code, consts)
        d2 = _emit(node.right, code, consts)
        code.append((_BIN_CODES[node.op], 0))
        return max(d1, d2 + 1)
    depths = [_emit(a, code, consts) + i for i, a in enumerate(node.args)]
    code.append((_FN_CODES[node.fn], 0))
    return max(depths)


# ---------------------------------------------------------------- public type


@dataclass(frozen=True, eq=False)
class CoeffExpr:
    """Immutable parsed coefficient ``f(t)``."""

    root: Node
    source: str = field(default="", compare=False)

    def __eq__(self, other):
        return isinstance(other, CoeffExpr) and self.root == other.root

    def __hash__(self):
        return hash(self.root)

    def __repr__(self):
        return f"CoeffExpr({render(self.root)!r})"

    def __str__(self):
        return render(self.root)

    def eval(self, t: float) -> float:
        return evaluate(self, t)

    def __call__(self, t):
        """Vectorised evaluation; scalars return a float."""
        arr = np.asarray(t, dtype=float)
        if arr.ndim == 0:
            return evaluate(self, float(arr))
        with np.errstate(all="ignore"):
            out = _eval_vec(self.root, arr)
        out = np.broadcast_to(out, arr.shape).astype(float, copy=True)
        bad = ~np.isfinite(out)
        if bad.any():
            tb = float(arr[np.argmax(bad)])
            evaluate(self, tb)  # raises with the precise reason
            raise SingularPointError(tb, "non-finite value")
        return out

    def program(self):
        """Postfix program ``(code[n,2] int64, consts[m] float64)``."""
        code: list = []
        consts: list = []
        depth = _emit(self.root, code, consts)
        if depth > STACK_LIMIT:
            raise CoeffExprError(f"expression too deep for kernel stack ({depth})")
        return np.asarray(code, dtype=np.int64).reshape(-1, 2), np.asarray(consts, dtype=float)

    @property
    def is_constant(self) -> bool:
        return not _contains_var(self.root)

    # small algebra used to derive B, S and reciprocal forms
    def __neg__(self):
        if isinstance(self.root, Const):
            return CoeffExpr(Const(-self.root.value))
        return CoeffExpr(Neg(self.root))

    def __add__(self, other):
        return _combine("+", self, as_expr(other))

    def __sub__(self, other):
        return _combine("-", self, as_expr(other))

    def __mul__(self, other):
        return _combine("*", self, as_expr(other))

    def __truediv__(self, other):
        return _combine("/", self, as_expr(other))

    def __radd__(self, other):
        return _combine("+", as_expr(other), self)

    def __rsub__(self, other):
        return _combine("-", as_expr(other), self)

    def __rmul__(self, other):
        return _combine("*", as_expr(other), self)


def _contains_var(node: Node) -> bool:
    if isinstance(node, Var):
        return True
    if isinstance(node, Const):
        return False
    if isinstance(node, Neg):
        return _contains_var(node.arg)
    if isinstance(node, BinOp):
        return _contains_var(node.left) or _contains_var(node.right)
    return any(_contains_var(a) for a in node.args)


def _combine(op: str, a: CoeffExpr, b: CoeffExpr) -> CoeffExpr:
    ra, rb = a.root, b.root
    zero_a = isinstance(ra, Const) and ra.value == 0.0
    zero_b = isinstance(rb, Const) and rb.value == 0.0
    if op == "+":
        if zero_a:
            return b
        if zero_b:
            return a
    if op == "-":
        if zero_b:
            return a
        if zero_a:
            return -b
    if op == "*" and (zero_a or zero_b):
        return CoeffExpr(Const(0.0))
    if isinstance(ra, Const) and isinstance(rb, Const) and op in "+-*":
        v = {"+": ra.value + rb.value, "-": ra.value - rb.value, "*": ra.value * rb.value}[op]
        return CoeffExpr(Const(v))
    return CoeffExpr(BinOp(op, ra, rb))


def parse(source: str) -> CoeffExpr:
    if not isinstance(source, str) or not source.strip():
        raise ExprSyntaxError("empty expression", 0, source if isinstance(source, str) else "")
    return CoeffExpr(_Parser(source).parse(), source)


def as_expr(value) -> CoeffExpr:
    """Coerce text, numbers or CoeffExpr into a CoeffExpr."""
    if isinstance(value, CoeffExpr):
        return value
    if isinstance(value, (int, float, np.floating, np.integer)):
        return CoeffExpr(Const(float(value)))
    if isinstance(value, str):
        return parse(value)
    raise TypeError(f"cannot interpret {value!r} as a coefficient expression")


def evaluate(expr, t: float) -> float:
    expr = as_expr(expr)
    try:
        return float(_eval(expr.root, float(t)))
    except OverflowError:
        raise SingularPointError(t, "overflow") from None


# ---------------------------------------------------------------- sign certificates


@dataclass(frozen=True)
class SignCertificate:
    verdict: str  # NonNegative | NonPositive | Mixed | Undetermined
    witnesses: tuple  # ((t, value), ...)
    interval: tuple = (0.0, 0.0)
    identically_zero: bool = False
    samples: int = 0

    @property
    def nonnegative(self) -> bool:
        return self.verdict == "NonNegative" or self.identically_zero

    @property
    def nonpositive(self) -> bool:
        return self.verdict == "NonPositive" or self.identically_zero

    def as_dict(self) -> dict:
        return {
            "verdict": self.verdict,
            "interval": list(self.interval),
            "identically_zero": self.identically_zero,
            "samples": self.samples,
            "witnesses": [[float(a), float(b)] for a, b in self.witnesses],
        }


def _chebyshev(t1: float, t2: float, n: int) -> np.ndarray:
    k = np.arange(n)
    x = np.cos(np.pi * (2 * k + 1) / (2 * n))
    pts = 0.5 * (t1 + t2) + 0.5 * (t2 - t1) * x
    return np.unique(np.concatenate([[t1, t2], pts]))


def _safe_values(expr: CoeffExpr, ts: np.ndarray):
    try:
        return expr(ts), np.zeros(ts.shape, bool)
    except SingularPointError:
        vals = np.empty_like(ts)
        bad = np.zeros(ts.shape, bool)
        for i, t in enumerate(ts):
            try:
                vals[i] = evaluate(expr, t)
            except SingularPointError:
                vals[i] = np.nan
                bad[i] = True
        return vals, bad


def _refine_extrema(expr, ts, vals, sign: float, count: int):
    """Golden-section polish of the ``count`` most extreme discrete local minima of sign*f."""
    from scipy.optimize import minimize_scalar

    g = sign * vals
    n = len(ts)
    if n < 3:
        return []
    interior = np.where((g[1:-1] <= g[:-2]) & (g[1:-1] <= g[2:]) & np.isfinite(g[1:-1]))[0] + 1
    if interior.size == 0:
        return []
    order = interior[np.argsort(g[interior])][:count]
    found = []
    for i in order:
        lo, hi = ts[i - 1], ts[i + 1]

        def f(t):
            try:
                return sign * evaluate(expr, t)
            except SingularPointError:
                return np.inf

        res = minimize_scalar(f, bounds=(lo, hi), method="bounded", options={"xatol": 1e-12 * max(1.0, abs(ts[i]))})
        if np.isfinite(res.fun):
            found.append((float(res.x), sign * float(res.fun)))
    return found


def sign_certify(expr, interval: Sequence[float], budget: int = 2001, slack: float = 1e-12,
                 refine: int = 24) -> SignCertificate:
    """Sampling-based sign verdict of ``expr`` on ``[t1, t2]``."""
    expr = as_expr(expr)
    t1, t2 = float(interval[0]), float(interval[1])
    if not t1 < t2:
        return SignCertificate("Undetermined", (), (t1, t2))
    if expr.is_constant:
        try:
            v = evaluate(expr, t1)
        except SingularPointError:
            return SignCertificate("Undetermined", (), (t1, t2))
        if v == 0.0:
            return SignCertificate("NonNegative", ((t1, v),), (t1, t2), True, 1)
        return SignCertificate("NonNegative" if v > 0 else "NonPositive", ((t1, v),), (t1, t2), False, 1)
    ts = _chebyshev(t1, t2, max(int(budget), 8))
    vals, bad = _safe_values(expr, ts)
    extra = _refine_extrema(expr, ts, vals, 1.0, refine) + _refine_extrema(expr, ts, vals, -1.0, refine)
    pts = list(zip(ts[~bad].tolist(), vals[~bad].tolist())) + extra
    n_samples = len(pts)
    if not pts:
        return SignCertificate("Undetermined", (), (t1, t2))
    lo_t, lo_v = min(pts, key=lambda p: p[1])
    hi_t, hi_v = max(pts, key=lambda p: p[1])
    if lo_v < -slack and hi_v > slack:
        w = tuple(sorted([(lo_t, lo_v), (hi_t, hi_v)]))
        # report the earliest pair of opposite-sign samples as witnesses
        first_pos = next((p for p in sorted(pts) if p[1] > slack), None)
        first_neg = next((p for p in sorted(pts) if p[1] < -slack), None)
        if first_pos and first_neg:
            w = tuple(sorted([first_pos, first_neg]))
        return SignCertificate("Mixed", w, (t1, t2), False, n_samples)
    if bad.any():
        return SignCertificate("Undetermined", ((float(ts[bad][0]), float("nan")),), (t1, t2), False, n_samples)
    if lo_v >= -slack and hi_v <= slack:
        return SignCertificate("NonNegative", ((lo_t, lo_v), (hi_t, hi_v)), (t1, t2), True, n_samples)
    if lo_v >= -slack:
        return SignCertificate("NonNegative", ((lo_t, lo_v),), (t1, t2), False, n_samples)
    return SignCertificate("NonPositive", ((hi_t, hi_v),), (t1, t2), False, n_samples)

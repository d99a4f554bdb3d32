"""Expression language for energy functions and field coefficients.

Grammar (EBNF)::

    expr    = term { ("+" | "-") term } ;
    term    = unary { ("*" | "/") unary } ;
    unary   = "-" unary | power ;
    power   = atom [ "^" unary ] ;               (* right associative *)
    atom    = number | variable | func "(" expr ")" | "(" expr ")" ;
    func    = "exp" | "ln" | "sqrt" ;
    variable= ("x" | "y") digit { digit } ;       (* x1..xn, y1..yn *)
    number  = digits [ "." digits ] [ ("e" | "E") [ "+" | "-" ] digits ] ;

Exponents must be constant; ``(1/3)`` folds to the exact rational 1/3.
Integer literals are exact rationals, decimal literals are floats.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from functools import lru_cache

import numpy as np

from .jets import Jet


class ExprSyntaxError(ValueError):
    def __init__(self, message: str, offset: int, expected: tuple[str, ...] = ()):
        self.offset = offset
        self.expected = expected
        detail = f"{message} at offset {offset}"
        if expected:
            detail += f" (expected one of: {', '.join(expected)})"
        super().__init__(detail)


class UnknownVariableError(ValueError):
    pass


class DomainError(ArithmeticError):
    """Evaluation left the domain of the expression."""

    def __init__(self, message: str, node: "Node"):
        self.node = node
        text = to_text(node)
        if len(text) > 160:
            text = text[:157] + "..."
        super().__init__(f"{message} in subexpression '{text}'")


# ---------------------------------------------------------------------------
# AST nodes: immutable, hash-consed enough for memoisation.


class Node:
    __slots__ = ("_hash", "free")
    kind = "node"

    def _key(self):
        raise NotImplementedError

    def __hash__(self):
        return self._hash

    def __eq__(self, other):
        return (
            self is other
            or (type(self) is type(other) and self._hash == other._hash and self._key() == other._key())
        )

    def __repr__(self):
        return f"{type(self).__name__}({to_text(self)!r})"


class Const(Node):
    __slots__ = ("value",)

    def __init__(self, value):
        if isinstance(value, int):
            value = Fraction(value)
        self.value = value
        self.free = frozenset()
        self._hash = hash(("c", value))

    def _key(self):
        # 1 and 1.0 are different literals
        return (type(self.value), self.value)


class Var(Node):
    __slots__ = ("name", "kind_", "index")

    def __init__(self, kind: str, index: int):
        self.kind_ = kind
        self.index = index
        self.name = f"{kind}{index}"
        self.free = frozenset([self.name])
        self._hash = hash(("v", self.name))

    def _key(self):
        return self.name


class _Op(Node):
    __slots__ = ("args",)
    tag = "?"

    def __init__(self, *args: Node):
        self.args = args
        self.free = frozenset().union(*(a.free for a in args))
        self._hash = hash((self.tag,) + args)

    def _key(self):
        return self.args


class Add(_Op):
    __slots__ = ()
    tag = "+"


class Sub(_Op):
    __slots__ = ()
    tag = "-"


class Mul(_Op):
    __slots__ = ()
    tag = "*"


class Div(_Op):
    __slots__ = ()
    tag = "/"


class Neg(_Op):
    __slots__ = ()
    tag = "neg"


class Exp(_Op):
    __slots__ = ()
    tag = "exp"


class Ln(_Op):
    __slots__ = ()
    tag = "ln"


class Pow(Node):
    __slots__ = ("base", "exponent")

    def __init__(self, base: Node, exponent):
        if isinstance(exponent, int):
            exponent = Fraction(exponent)
        self.base = base
        self.exponent = exponent
        self.free = base.free
        self._hash = hash(("^", base, exponent))

    def _key(self):
        return (self.base, type(self.exponent), self.exponent)


# ---------------------------------------------------------------------------
# Smart constructors with best-effort simplification.

ZERO = Const(0)
ONE = Const(1)


def _is_const(n: Node, value=None) -> bool:
    return isinstance(n, Const) and (value is None or n.value == value)


def _fold(a, b, op):
    try:
        return Const(op(a, b))
    except (ZeroDivisionError, OverflowError):
        return None


def add(a: Node, b: Node) -> Node:
    if _is_const(a, 0):
        return b
    if _is_const(b, 0):
        return a
    if _is_const(a) and _is_const(b):
        return _fold(a.value, b.value, lambda u, v: u + v)
    if isinstance(b, Neg):
        return sub(a, b.args[0])
    return Add(a, b)


def sub(a: Node, b: Node) -> Node:
    if _is_const(b, 0):
        return a
    if _is_const(a, 0):
        return neg(b)
    if _is_const(a) and _is_const(b):
        return _fold(a.value, b.value, lambda u, v: u - v)
    if a == b:
        return ZERO
    if isinstance(b, Neg):
        return add(a, b.args[0])
    return Sub(a, b)


def neg(a: Node) -> Node:
    if isinstance(a, Const):
        return Const(-a.value)
    if isinstance(a, Neg):
        return a.args[0]
    return Neg(a)


def mul(a: Node, b: Node) -> Node:
    if _is_const(a, 0) or _is_const(b, 0):
        return ZERO
    if _is_const(a, 1):
        return b
    if _is_const(b, 1):
        return a
    if _is_const(a, -1):
        return neg(b)
    if _is_const(b, -1):
        return neg(a)
    if _is_const(a) and _is_const(b):
        return _fold(a.value, b.value, lambda u, v: u * v)
    if _is_const(b):
        a, b = b, a
    if _is_const(a) and isinstance(b, Mul) and _is_const(b.args[0]):
        return mul(Const(a.value * b.args[0].value), b.args[1])
    if isinstance(a, Neg):
        return neg(mul(a.args[0], b))
    if isinstance(b, Neg):
        return neg(mul(a, b.args[0]))
    return Mul(a, b)


def div(a: Node, b: Node) -> Node:
    if _is_const(b, 1):
        return a
    if _is_const(a, 0) and not _is_const(b, 0):
        return ZERO
    if _is_const(a) and _is_const(b) and b.value != 0:
        return _fold(a.value, b.value, lambda u, v: u / v)
    if a == b:
        return ONE
    return Div(a, b)


def power(base: Node, exponent) -> Node:
    if isinstance(exponent, Const):
        exponent = exponent.value
    if exponent == 0:
        return ONE
    if exponent == 1:
        return base
    if isinstance(base, Const):
        folded = _const_pow(base.value, exponent)
        if folded is not None:
            return Const(folded)
    if isinstance(base, Pow) and isinstance(base.exponent, Fraction) and isinstance(exponent, Fraction):
        # (u^a)^b = u^(ab) is only safe for integer b
        if exponent.denominator == 1:
            return power(base.base, base.exponent * exponent)
    return Pow(base, exponent)


def _const_pow(b, e):
    if isinstance(b, Fraction) and isinstance(e, Fraction) and e.denominator == 1:
        if b == 0 and e < 0:
            return None
        return b**e
    return None


def exp_(a: Node) -> Node:
    if _is_const(a, 0):
        return ONE
    return Exp(a)


def ln_(a: Node) -> Node:
    if _is_const(a, 1):
        return ZERO
    if isinstance(a, Exp):
        return a.args[0]
    return Ln(a)


# ---------------------------------------------------------------------------
# Printing


_PREC = {Add: 1, Sub: 1, Mul: 2, Div: 2, Neg: 3, Pow: 4}


def _const_text(v) -> str:
    if isinstance(v, Fraction):
        if v.denominator == 1:
            return str(v.numerator) if v >= 0 else f"({v.numerator})"
        return f"({v.numerator}/{v.denominator})"
    s = repr(float(v))
    if s in ("inf", "-inf", "nan"):
        raise ValueError(f"cannot print non-finite constant {s}")
    return s if v >= 0 else f"({s})"


def to_text(node: Node) -> str:
    """Print in the input grammar; parse(to_text(e)) evaluates identically."""
    if isinstance(node, Const):
        return _const_text(node.value)
    if isinstance(node, Var):
        return node.name
    if isinstance(node, (Exp, Ln)):
        return f"{node.tag}({to_text(node.args[0])})"
    if isinstance(node, Pow):
        b = to_text(node.base)
        if not isinstance(node.base, (Var, Exp, Ln)) and not (
            isinstance(node.base, Const) and _const_text(node.base.value).isdigit()
        ):
            b = f"({b})"
        return f"{b}^{_const_text(node.exponent)}"
    if isinstance(node, Neg):
        inner = node.args[0]
        s = to_text(inner)
        if _PREC.get(type(inner), 5) <= _PREC[Neg]:
            s = f"({s})"
        return f"-{s}"
    p = _PREC[type(node)]
    left, right = node.args
    ls = to_text(left)
    rs = to_text(right)
    if _PREC.get(type(left), 5) < p:
        ls = f"({ls})"
    # keep the tree shape exactly: a right operand of equal precedence is grouped
    rp = _PREC.get(type(right), 5)
    if rp <= p or isinstance(right, Neg):
        rs = f"({rs})"
    return f"{ls} {node.tag} {rs}" if p == 1 else f"{ls}*{rs}" if isinstance(node, Mul) else f"{ls}/{rs}"


# ---------------------------------------------------------------------------
# Parsing


_FUNCS = {"exp": exp_, "ln": ln_, "sqrt": lambda u: power(u, Fraction(1, 2))}


def _tokenize(text: str):
    toks = []
    i = 0
    n = len(text)
    while i < n:
        ch = text[i]
        if ch.isspace():
            i += 1
            continue
        if ch.isdigit() or (ch == "." and i + 1 < n and text[i + 1].isdigit()):
            j = i
            while j < n and text[j].isdigit():
                j += 1
            is_float = False
            if j < n and text[j] == ".":
                is_float = True
                j += 1
                while j < n and text[j].isdigit():
                    j += 1
            if j < n and text[j] in "eE":
                k = j + 1
                if k < n and text[k] in "+-":
                    k += 1
                if k < n and text[k].isdigit():
                    is_float = True
                    j = k
                    while j < n and text[j].isdigit():
                        j += 1
            lit = text[i:j]
            toks.append(("num", float(lit) if is_float else Fraction(int(lit)), i))
            i = j
            continue
        if ch.isalpha() or ch == "_":
            j = i
            while j < n and (text[j].isalnum() or text[j] == "_"):
                j += 1
            toks.append(("name", text[i:j], i))
            i = j
            continue
        if ch in "+-*/^()":
            toks.append((ch, ch, i))
            i += 1
            continue
        raise ExprSyntaxError(f"unexpected character {ch!r}", i)
    toks.append(("end", None, n))
    return toks


_OPERAND_START = ("number", "variable", "function", "(", "-")


class _Parser:
    def __init__(self, text: str, dim: int):
        self.text = text
        self.dim = dim
        self.toks = _tokenize(text)
        self.pos = 0

    def peek(self):
        return self.toks[self.pos]

    def take(self):
        t = self.toks[self.pos]
        self.pos += 1
        return t

    def parse(self) -> Node:
        node = self.expr()
        t = self.peek()
        if t[0] != "end":
            raise ExprSyntaxError(f"unexpected token {t[1]!r}", t[2], ("+", "-", "*", "/", "^", "end"))
        return node

    def _operand_after(self, op_tok, rule):
        t = self.peek()
        if t[0] in ("num", "name", "(", "-"):
            return rule()
        raise ExprSyntaxError(f"missing operand after {op_tok[1]!r}", op_tok[2], _OPERAND_START)

    def expr(self) -> Node:
        node = self.term()
        while self.peek()[0] in ("+", "-"):
            op = self.take()
            rhs = self._operand_after(op, self.term)
            node = add(node, rhs) if op[0] == "+" else sub(node, rhs)
        return node

    def term(self) -> Node:
        node = self.unary()
        while self.peek()[0] in ("*", "/"):
            op = self.take()
            rhs = self._operand_after(op, self.unary)
            node = mul(node, rhs) if op[0] == "*" else div(node, rhs)
        return node

    def unary(self) -> Node:
        if self.peek()[0] == "-":
            op = self.take()
            return neg(self._operand_after(op, self.unary))
        return self.power()

    def power(self) -> Node:
        base = self.atom()
        if self.peek()[0] == "^":
            op = self.take()
            ex = self._operand_after(op, self.unary)
            if ex.free:
                raise ExprSyntaxError("exponent must be constant", op[2])
            return power(base, _const_value(ex, op[2]))
        return base

    def atom(self) -> Node:
        t = self.take()
        kind, val, off = t
        if kind == "num":
            return Const(val)
        if kind == "(":
            node = self._operand_after(t, self.expr)
            close = self.take()
            if close[0] != ")":
                raise ExprSyntaxError("unbalanced parenthesis", close[2], (")",))
            return node
        if kind == "name":
            if val in _FUNCS:
                lp = self.take()
                if lp[0] != "(":
                    raise ExprSyntaxError(f"expected '(' after {val}", lp[2], ("(",))
                arg = self._operand_after(lp, self.expr)
                rp = self.take()
                if rp[0] != ")":
                    raise ExprSyntaxError("unbalanced parenthesis", rp[2], (")",))
                return _FUNCS[val](arg)
            return self.variable(val, off)
        if kind == "end":
            raise ExprSyntaxError("unexpected end of input", off, _OPERAND_START)
        raise ExprSyntaxError(f"unexpected token {val!r}", off, _OPERAND_START)

    def variable(self, name: str, off: int) -> Node:
        if len(name) >= 2 and name[0] in "xy" and name[1:].isdigit():
            idx = int(name[1:])
            if idx < 1 or idx > self.dim:
                raise UnknownVariableError(
                    f"variable {name!r} at offset {off} is out of range for dim={self.dim}"
                )
            return Var(name[0], idx)
        raise UnknownVariableError(f"unknown variable {name!r} at offset {off}")


def _const_value(node: Node, off: int):
    if isinstance(node, Const):
        return node.value
    try:
        v = _eval_float(node, {})
    except (DomainError, ZeroDivisionError) as exc:
        raise ExprSyntaxError(f"invalid constant exponent ({exc})", off) from exc
    return v


# ---------------------------------------------------------------------------
# Public types


@dataclass(frozen=True)
class EnergyExpr:
    """A parsed expression in the variables x1..xn, y1..yn."""

    node: Node
    dim: int

    def __post_init__(self):
        if self.dim < 1:
            raise ValueError("dim must be positive")
        for name in self.node.free:
            if int(name[1:]) > self.dim:
                raise UnknownVariableError(f"variable {name} exceeds dim={self.dim}")

    def __str__(self):
        return to_text(self.node)

    @property
    def variables(self) -> list[str]:
        return sorted(self.node.free, key=lambda s: (s[0], int(s[1:])))

    def __call__(self, x, y) -> float:
        return evaluate(self, (x, y))


@dataclass(frozen=True)
class FieldSpec:
    """Horizontal vector field sum_i X^i(x, y) h_i given by coefficient expressions."""

    coefficients: tuple[EnergyExpr, ...]
    name: str = ""

    def __post_init__(self):
        dims = {c.dim for c in self.coefficients}
        if len(dims) != 1 or dims.pop() != len(self.coefficients):
            raise ValueError("a field needs exactly n coefficient expressions of dim n")

    @property
    def dim(self) -> int:
        return len(self.coefficients)

    @classmethod
    def parse(cls, texts, dim: int, name: str = "") -> "FieldSpec":
        if isinstance(texts, str):
            texts = _split_top_level(texts)
        texts = list(texts)
        if len(texts) != dim:
            raise ValueError(f"field {name or '?'} has {len(texts)} coefficients, expected {dim}")
        return cls(tuple(parse_energy(t, dim) for t in texts), name)

    def __str__(self):
        return ",".join(str(c) for c in self.coefficients)


def _split_top_level(text: str) -> list[str]:
    parts, depth, cur = [], 0, []
    for ch in text:
        if ch == "(":
            depth += 1
        elif ch == ")":
            depth -= 1
        if ch == "," and depth == 0:
            parts.append("".join(cur))
            cur = []
        else:
            cur.append(ch)
    parts.append("".join(cur))
    return [p.strip() for p in parts]


def parse_energy(text: str, dim: int) -> EnergyExpr:
    if not isinstance(text, str) or not text.strip():
        raise ExprSyntaxError("empty expression", 0, _OPERAND_START)
    if dim < 1:
        raise ValueError("dim must be positive")
    return EnergyExpr(_Parser(text, dim).parse(), dim)


def var_name(var) -> str:
    """Normalise a variable id: 'y3', ('y', 3) or a Var node."""
    if isinstance(var, Var):
        return var.name
    if isinstance(var, tuple):
        return f"{var[0]}{int(var[1])}"
    return str(var)


def var_slot(name: str, dim: int) -> int:
    """Position of a variable in the stacked coordinate vector (x..., y...)."""
    k, i = name[0], int(name[1:])
    return (i - 1) if k == "x" else dim + i - 1


# ---------------------------------------------------------------------------
# Differentiation


@lru_cache(maxsize=200_000)
def _d(node: Node, v: str) -> Node:
    if v not in node.free:
        return ZERO
    if isinstance(node, Var):
        return ONE
    if isinstance(node, Add):
        return add(_d(node.args[0], v), _d(node.args[1], v))
    if isinstance(node, Sub):
        return sub(_d(node.args[0], v), _d(node.args[1], v))
    if isinstance(node, Neg):
        return neg(_d(node.args[0], v))
    if isinstance(node, Mul):
        a, b = node.args
        return add(mul(_d(a, v), b), mul(a, _d(b, v)))
    if isinstance(node, Div):
        a, b = node.args
        da, db = _d(a, v), _d(b, v)
        return sub(div(da, b), div(mul(a, db), power(b, 2)))
    if isinstance(node, Pow):
        e = node.exponent
        e1 = e - 1
        return mul(mul(Const(e), power(node.base, e1)), _d(node.base, v))
    if isinstance(node, Exp):
        return mul(node, _d(node.args[0], v))
    if isinstance(node, Ln):
        return div(_d(node.args[0], v), node.args[0])
    raise TypeError(f"cannot differentiate {node!r}")


def differentiate(e: EnergyExpr, var, order: int = 1) -> EnergyExpr:
    name = var_name(var)
    if len(name) < 2 or name[0] not in "xy" or not name[1:].isdigit():
        raise UnknownVariableError(f"invalid variable {name!r}")
    if not 1 <= int(name[1:]) <= e.dim:
        raise UnknownVariableError(f"variable {name!r} out of range for dim={e.dim}")
    if order < 1:
        raise ValueError("order must be >= 1")
    node = e.node
    for _ in range(order):
        node = _d(node, name)
    return EnergyExpr(node, e.dim)


def partial(e: EnergyExpr, variables) -> EnergyExpr:
    """Mixed partial derivative along a sequence of variables."""
    node = e.node
    for v in variables:
        node = differentiate(EnergyExpr(node, e.dim), v).node
    return EnergyExpr(node, e.dim)


# ---------------------------------------------------------------------------
# Evaluation


def _env_from_point(dim: int, z) -> dict[str, float]:
    x, y = _split_point(z, dim)
    env = {f"x{i + 1}": float(x[i]) for i in range(dim)}
    env.update({f"y{i + 1}": float(y[i]) for i in range(dim)})
    return env


def _split_point(z, dim):
    if hasattr(z, "x") and hasattr(z, "y"):
        return np.asarray(z.x, float), np.asarray(z.y, float)
    if isinstance(z, tuple) and len(z) == 2:
        return np.asarray(z[0], float), np.asarray(z[1], float)
    arr = np.asarray(z, float)
    return arr[:dim], arr[dim:]


def _num(v) -> float:
    return float(v)


def _eval_float(node: Node, env, cache=None) -> float:
    if cache is None:
        cache = {}
    key = id(node)
    hit = cache.get(key)
    if hit is not None:
        return hit[1]
    if isinstance(node, Const):
        out = _num(node.value)
    elif isinstance(node, Var):
        out = env[node.name]
    elif isinstance(node, Pow):
        b = _eval_float(node.base, env, cache)
        ex = node.exponent
        is_int = isinstance(ex, Fraction) and ex.denominator == 1
        if is_int:
            if b == 0 and ex < 0:
                raise DomainError("negative power of zero", node)
            out = b ** int(ex)
        else:
            if b <= 0:
                raise DomainError("fractional power of non-positive base", node)
            out = b ** _num(ex)
    else:
        vals = [_eval_float(a, env, cache) for a in node.args]
        if isinstance(node, Add):
            out = vals[0] + vals[1]
        elif isinstance(node, Sub):
            out = vals[0] - vals[1]
        elif isinstance(node, Mul):
            out = vals[0] * vals[1]
        elif isinstance(node, Div):
            if vals[1] == 0:
                raise DomainError("division by zero", node)
            out = vals[0] / vals[1]
        elif isinstance(node, Neg):
            out = -vals[0]
        elif isinstance(node, Exp):
            try:
                out = math.exp(vals[0])
            except OverflowError as exc:
                raise DomainError("exp overflow", node) from exc
        elif isinstance(node, Ln):
            if vals[0] <= 0:
                raise DomainError("ln of non-positive value", node)
            out = math.log(vals[0])
        else:
            raise TypeError(node)
    if not math.isfinite(out):
        raise DomainError("non-finite value", node)
    cache[key] = (node, out)
    return out


def evaluate(e: EnergyExpr, z) -> float:
    """Value of ``e`` at a chart point (ChartPoint, (x, y) pair or flat array)."""
    return _eval_float(e.node, _env_from_point(e.dim, z))


def evaluate_jet(e: EnergyExpr, env: dict[str, Jet]) -> Jet:
    """Evaluate on jets: one pass yields every partial derivative up to jet order."""
    cache: dict[int, tuple[Node, Jet]] = {}
    any_jet = next(iter(env.values()))

    def go(node: Node):
        hit = cache.get(id(node))
        if hit is not None:
            return hit[1]
        if isinstance(node, Const):
            out = Jet.constant(any_jet.space, any_jet.order, _num(node.value))
        elif isinstance(node, Var):
            out = env[node.name]
        elif isinstance(node, Pow):
            b = go(node.base)
            try:
                out = b.power(node.exponent if _is_int(node.exponent) else _num(node.exponent))
            except (ValueError, ZeroDivisionError) as exc:
                raise DomainError(str(exc), node) from exc
        else:
            vals = [go(a) for a in node.args]
            try:
                if isinstance(node, Add):
                    out = vals[0] + vals[1]
                elif isinstance(node, Sub):
                    out = vals[0] - vals[1]
                elif isinstance(node, Mul):
                    out = vals[0] * vals[1]
                elif isinstance(node, Div):
                    out = vals[0] / vals[1]
                elif isinstance(node, Neg):
                    out = -vals[0]
                elif isinstance(node, Exp):
                    out = vals[0].exp()
                elif isinstance(node, Ln):
                    out = vals[0].log()
                else:
                    raise TypeError(node)
            except (ValueError, ZeroDivisionError) as exc:
                raise DomainError(str(exc), node) from exc
        if not np.all(np.isfinite(out.c)):
            raise DomainError("non-finite value", node)
        cache[id(node)] = (node, out)
        return out

    return go(e.node)


def _is_int(v) -> bool:
    return isinstance(v, Fraction) and v.denominator == 1


def node_size(node: Node) -> int:
    """Number of distinct subtrees (shared subtrees counted once)."""
    seen = set()
    stack = [node]
    while stack:
        n = stack.pop()
        if id(n) in seen:
            continue
        seen.add(id(n))
        if isinstance(n, _Op):
            stack.extend(n.args)
        elif isinstance(n, Pow):
            stack.append(n.base)
    return len(seen)

"""Vector-field catalog, expression parser and forward-mode differentiation.

Fields come either from the builtin catalog or from user expression strings
over variables x1..xn. Parsed fields get exact Jacobians through dual
numbers, so no symbolic differentiation and no finite-difference noise.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

from .errors import (
    ConfigError,
    EvaluationDomainError,
    ExprSyntaxError,
    UnknownField,
    UnknownIdentifier,
)

__all__ = [
    "Expression",
    "Num",
    "Var",
    "Bin",
    "Neg",
    "Call",
    "parse_expression",
    "expression_to_str",
    "Dual",
    "parse_field",
    "jacobian_ad",
    "builtin",
    "builtin_catalog",
    "Box",
    "Ball",
    "parse_region_spec",
    "VectorFieldModel",
    "Provenance",
    "validate_trapping",
]

FUNCTIONS = ("sin", "cos", "exp", "log", "sqrt", "tanh")


# ---------------------------------------------------------------------------
# AST

@dataclass(frozen=True)
class Num:
    value: float


@dataclass(frozen=True)
class Var:
    index: int  # zero-based


@dataclass(frozen=True)
class Bin:
    op: str
    left: "Expression"
    right: "Expression"


@dataclass(frozen=True)
class Neg:
    operand: "Expression"


@dataclass(frozen=True)
class Call:
    fn: str
    arg: "Expression"


Expression = object  # union of the node types above


# ---------------------------------------------------------------------------
# Tokenizer / parser

@dataclass(frozen=True)
class _Token:
    kind: str  # NUM, IDENT, OP, LPAR, RPAR, END
    text: str
    pos: int  # 1-based column


def _tokenize(text):
    tokens = []
    i = 0
    n = len(text)
    while i < n:
        ch = text[i]
        if ch.isspace():
            i += 1
            continue
        pos = i + 1
        if ch.isdigit() or (ch == "." and i + 1 < n and text[i + 1].isdigit()):
            k = i
            while k < n and (text[k].isdigit() or text[k] == "."):
                k += 1
            if k < n and text[k] in "eE":
                k2 = k + 1
                if k2 < n and text[k2] in "+-":
                    k2 += 1
                if k2 < n and text[k2].isdigit():
                    k = k2
                    while k < n and text[k].isdigit():
                        k += 1
            lit = text[i:k]
            try:
                float(lit)
            except ValueError:
                raise ExprSyntaxError(f"bad number literal '{lit}'", pos) from None
            tokens.append(_Token("NUM", lit, pos))
            i = k
            continue
        if ch.isalpha() or ch == "_":
            k = i
            while k < n and (text[k].isalnum() or text[k] == "_"):
                k += 1
            tokens.append(_Token("IDENT", text[i:k], pos))
            i = k
            continue
        if ch in "+-*/^":
            tokens.append(_Token("OP", ch, pos))
            i += 1
            continue
        if ch == "(":
            tokens.append(_Token("LPAR", ch, pos))
            i += 1
            continue
        if ch == ")":
            tokens.append(_Token("RPAR", ch, pos))
            i += 1
            continue
        raise ExprSyntaxError(f"unexpected character '{ch}'", pos)
    tokens.append(_Token("END", "", n + 1))
    return tokens


class _Parser:
    def __init__(self, tokens, n_vars, params):
        self.tokens = tokens
        self.i = 0
        self.n_vars = n_vars
        self.params = params

    def peek(self):
        return self.tokens[self.i]

    def advance(self):
        tok = self.tokens[self.i]
        self.i += 1
        return tok

    def fail_here(self, message):
        tok = self.peek()
        if tok.kind == "END":
            # report the last consumed token; an expression cannot end here
            prev = self.tokens[max(self.i - 1, 0)]
            raise ExprSyntaxError(message, prev.pos)
        raise ExprSyntaxError(message, tok.pos)

    def parse(self):
        node = self.expr()
        tok = self.peek()
        if tok.kind != "END":
            raise ExprSyntaxError(f"unexpected '{tok.text}'", tok.pos)
        return node

    def expr(self):
        node = self.term()
        while self.peek().kind == "OP" and self.peek().text in "+-":
            op = self.advance().text
            node = Bin(op, node, self.term())
        return node

    def term(self):
        node = self.unary()
        while self.peek().kind == "OP" and self.peek().text in "*/":
            op = self.advance().text
            node = Bin(op, node, self.unary())
        return node

    def unary(self):
        if self.peek().kind == "OP" and self.peek().text == "-":
            self.advance()
            child = self.unary()
            if isinstance(child, Num):
                return Num(-child.value)
            return Neg(child)
        return self.power()

    def power(self):
        base = self.primary()
        if self.peek().kind == "OP" and self.peek().text == "^":
            self.advance()
            return Bin("^", base, self.unary())
        return base

    def primary(self):
        tok = self.peek()
        if tok.kind == "NUM":
            self.advance()
            return Num(float(tok.text))
        if tok.kind == "IDENT":
            self.advance()
            name = tok.text
            if name in FUNCTIONS:
                if self.peek().kind != "LPAR":
                    self.fail_here(f"function '{name}' needs parentheses")
                self.advance()
                arg = self.expr()
                if self.peek().kind != "RPAR":
                    self.fail_here("missing ')'")
                self.advance()
                return Call(name, arg)
            if len(name) > 1 and name[0] == "x" and name[1:].isdigit():
                idx = int(name[1:])
                if 1 <= idx <= self.n_vars:
                    return Var(idx - 1)
            if name in self.params:
                return Num(float(self.params[name]))
            raise UnknownIdentifier(name, tok.pos)
        if tok.kind == "LPAR":
            self.advance()
            node = self.expr()
            if self.peek().kind != "RPAR":
                self.fail_here("missing ')'")
            self.advance()
            return node
        self.fail_here("expected a value")


def parse_expression(text, n_vars, params=None):
    """Parse one expression over x1..xn with parameters folded to constants."""
    return _Parser(_tokenize(text), n_vars, dict(params or {})).parse()


_PREC = {"+": 1, "-": 1, "*": 2, "/": 2, "^": 4}
_UNARY_PREC = 3


def _node_prec(node):
    if isinstance(node, Bin):
        return _PREC[node.op]
    if isinstance(node, Neg):
        return _UNARY_PREC
    if isinstance(node, Num) and node.value < 0:
        return _UNARY_PREC
    return 5


def expression_to_str(node):
    """Render an AST so that parsing the output reproduces the AST."""
    if isinstance(node, Num):
        return repr(node.value)
    if isinstance(node, Var):
        return f"x{node.index + 1}"
    if isinstance(node, Call):
        return f"{node.fn}({expression_to_str(node.arg)})"
    if isinstance(node, Neg):
        inner = expression_to_str(node.operand)
        if _node_prec(node.operand) < _UNARY_PREC:
            inner = f"({inner})"
        return f"-{inner}"
    if isinstance(node, Bin):
        my = _PREC[node.op]
        left = expression_to_str(node.left)
        right = expression_to_str(node.right)
        lp = _node_prec(node.left)
        rp = _node_prec(node.right)
        if node.op == "^":
            if lp <= my:
                left = f"({left})"
            # the right side of ^ parses as a unary: anything below unary
            # precedence needs parentheses
            if rp < _UNARY_PREC:
                right = f"({right})"
        else:
            if lp < my:
                left = f"({left})"
            # equal precedence on the right would re-associate when reparsed
            if rp <= my:
                right = f"({right})"
        return f"{left}{node.op}{right}"
    raise TypeError(f"not an expression node: {node!r}")


# ---------------------------------------------------------------------------
# Dual numbers (forward mode)

class Dual:
    """First-order dual number a + b*eps."""

    __slots__ = ("a", "b")

    def __init__(self, a, b=0.0):
        self.a = a
        self.b = b

    def __repr__(self):
        return f"Dual({self.a!r}, {self.b!r})"

    def __add__(self, other):
        if isinstance(other, Dual):
            return Dual(self.a + other.a, self.b + other.b)
        return Dual(self.a + other, self.b)

    __radd__ = __add__

    def __sub__(self, other):
        if isinstance(other, Dual):
            return Dual(self.a - other.a, self.b - other.b)
        return Dual(self.a - other, self.b)

    def __rsub__(self, other):
        return Dual(other - self.a, -self.b)

    def __neg__(self):
        return Dual(-self.a, -self.b)

    def __mul__(self, other):
        if isinstance(other, Dual):
            return Dual(self.a * other.a, self.a * other.b + self.b * other.a)
        return Dual(self.a * other, self.b * other)

    __rmul__ = __mul__

    def __truediv__(self, other):
        if isinstance(other, Dual):
            if other.a == 0.0:
                raise EvaluationDomainError("division by zero")
            return Dual(self.a / other.a,
                        (self.b * other.a - self.a * other.b) / (other.a * other.a))
        if other == 0.0:
            raise EvaluationDomainError("division by zero")
        return Dual(self.a / other, self.b / other)

    def __rtruediv__(self, other):
        if self.a == 0.0:
            raise EvaluationDomainError("division by zero")
        return Dual(other / self.a, -other * self.b / (self.a * self.a))

    def __pow__(self, p):
        if isinstance(p, Dual):
            if p.b == 0.0:
                return self.__pow__(p.a)
            if self.a <= 0.0:
                raise EvaluationDomainError("x^y with dual exponent needs x > 0")
            return (p * _dual_log(self)).exp()
        try:
            val = self.a ** p
            der = p * self.a ** (p - 1.0) if p != 0.0 else 0.0
        except (ValueError, ZeroDivisionError, OverflowError) as exc:
            raise EvaluationDomainError(f"power fault: {exc}") from exc
        if isinstance(der, complex) or isinstance(val, complex):
            raise EvaluationDomainError("fractional power of a negative base")
        return Dual(val, der * self.b)

    def __rpow__(self, base):
        return Dual(base, 0.0) ** self

    def exp(self):
        e = math.exp(self.a)
        return Dual(e, e * self.b)


def _dual_log(d):
    if d.a <= 0.0:
        raise EvaluationDomainError("log of a non-positive value")
    return Dual(math.log(d.a), d.b / d.a)


def _apply_fn(name, v):
    if isinstance(v, Dual):
        a, b = v.a, v.b
        if name == "sin":
            return Dual(math.sin(a), math.cos(a) * b)
        if name == "cos":
            return Dual(math.cos(a), -math.sin(a) * b)
        if name == "exp":
            return Dual(math.exp(a), math.exp(a) * b)
        if name == "tanh":
            t = math.tanh(a)
            return Dual(t, (1.0 - t * t) * b)
        if name == "log":
            return _dual_log(v)
        if name == "sqrt":
            if a < 0.0:
                raise EvaluationDomainError("sqrt of a negative value")
            if a == 0.0 and b != 0.0:
                raise EvaluationDomainError("sqrt not differentiable at 0")
            r = math.sqrt(a)
            return Dual(r, 0.5 * b / r if r != 0.0 else 0.0)
    else:
        try:
            if name == "log" and v <= 0.0:
                raise EvaluationDomainError("log of a non-positive value")
            if name == "sqrt" and v < 0.0:
                raise EvaluationDomainError("sqrt of a negative value")
            return getattr(math, name)(v)
        except (ValueError, OverflowError) as exc:
            raise EvaluationDomainError(f"{name} fault: {exc}") from exc
    raise EvaluationDomainError(f"unsupported function {name}")


def eval_expression(node, values):
    """Evaluate an AST on float or Dual variable values."""
    if isinstance(node, Num):
        return node.value
    if isinstance(node, Var):
        return values[node.index]
    if isinstance(node, Neg):
        return -eval_expression(node.operand, values)
    if isinstance(node, Call):
        return _apply_fn(node.fn, eval_expression(node.arg, values))
    if isinstance(node, Bin):
        left = eval_expression(node.left, values)
        right = eval_expression(node.right, values)
        op = node.op
        if op == "+":
            return left + right
        if op == "-":
            return left - right
        if op == "*":
            return left * right
        if op == "/":
            if not isinstance(left, Dual) and not isinstance(right, Dual):
                if right == 0.0:
                    raise EvaluationDomainError("division by zero")
                return left / right
            if not isinstance(left, Dual):
                left = Dual(left, 0.0)
            return left / right
        if op == "^":
            if not isinstance(left, Dual) and not isinstance(right, Dual):
                try:
                    out = left ** right
                except (ValueError, ZeroDivisionError, OverflowError) as exc:
                    raise EvaluationDomainError(f"power fault: {exc}") from exc
                if isinstance(out, complex):
                    raise EvaluationDomainError("fractional power of a negative base")
                return out
            if not isinstance(left, Dual):
                left = Dual(left, 0.0)
            return left ** right
    raise TypeError(f"not an expression node: {node!r}")


# ---------------------------------------------------------------------------
# Regions

@dataclass(frozen=True)
class Box:
    bounds: np.ndarray  # (n, 2)

    @property
    def dimension(self):
        return self.bounds.shape[0]

    def contains(self, x, slack=1e-12):
        x = np.asarray(x, dtype=float)
        lo = self.bounds[:, 0] - slack
        hi = self.bounds[:, 1] + slack
        return bool(np.all(x >= lo) and np.all(x <= hi))

    def bounding_box(self):
        return self.bounds


@dataclass(frozen=True)
class Ball:
    center: np.ndarray
    radius: float

    @property
    def dimension(self):
        return self.center.shape[0]

    def contains(self, x, slack=1e-12):
        x = np.asarray(x, dtype=float)
        return bool(np.linalg.norm(x - self.center) <= self.radius + slack)

    def bounding_box(self):
        lo = self.center - self.radius
        hi = self.center + self.radius
        return np.column_stack([lo, hi])


def parse_region_spec(spec, dimension):
    """Parse ``box:lo,hi;lo,hi;...`` or ``ball:c1,...,cn;r``."""
    spec = spec.strip()
    if spec.startswith("box:"):
        axes = [a for a in spec[len("box:"):].split(";") if a.strip()]
        if len(axes) != dimension:
            raise ConfigError(f"box region has {len(axes)} axes, expected {dimension}")
        bounds = []
        for axis in axes:
            parts = [float(t) for t in axis.split(",")]
            if len(parts) != 2 or parts[0] >= parts[1]:
                raise ConfigError(f"bad box axis '{axis}'")
            bounds.append(parts)
        return Box(np.asarray(bounds, dtype=float))
    if spec.startswith("ball:"):
        parts = spec[len("ball:"):].split(";")
        if len(parts) != 2:
            raise ConfigError("ball region needs 'center;radius'")
        center = np.asarray([float(t) for t in parts[0].split(",")], dtype=float)
        if center.shape != (dimension,):
            raise ConfigError(f"ball center has dim {center.shape[0]}, expected {dimension}")
        radius = float(parts[1])
        if radius <= 0:
            raise ConfigError("ball radius must be positive")
        return Ball(center, radius)
    raise ConfigError(f"unrecognized region spec '{spec}'")


def region_from_config(cfg, dimension):
    """Region from the JSON config shape {"box": [[lo,hi],...]} or {"ball": {...}}."""
    if "box" in cfg:
        bounds = np.asarray(cfg["box"], dtype=float)
        if bounds.shape != (dimension, 2):
            raise ConfigError("box bounds must be an (n, 2) array")
        return Box(bounds)
    if "ball" in cfg:
        ball = cfg["ball"]
        center = np.asarray(ball["center"], dtype=float)
        if center.shape != (dimension,):
            raise ConfigError("ball center has the wrong dimension")
        return Ball(center, float(ball["radius"]))
    raise ConfigError("region config needs 'box' or 'ball'")


# ---------------------------------------------------------------------------
# Field model

@dataclass(frozen=True)
class Provenance:
    kind: str  # "builtin" | "parsed" | "derived"
    name: str = ""
    params: tuple = ()
    expressions: tuple = ()


@dataclass
class VectorFieldModel:
    """Evaluators for a smooth autonomous field X and its Jacobian DX."""

    dimension: int
    X_at: Callable
    DX_at: Callable
    singularities: Optional[list] = None
    region: Optional[object] = None
    provenance: Provenance = Provenance("derived")
    asts: Optional[tuple] = None

    def is_singular_point(self, x, tol=1e-8):
        return bool(np.linalg.norm(self.X_at(np.asarray(x, dtype=float))) < tol)

    def reversed(self):
        """The time-reversed field -X."""
        x_at, dx_at = self.X_at, self.DX_at
        return VectorFieldModel(
            dimension=self.dimension,
            X_at=lambda x: -x_at(x),
            DX_at=lambda x: -dx_at(x),
            singularities=self.singularities,
            region=self.region,
            provenance=Provenance("derived", name=f"reversed({self.provenance.name})"),
            asts=None,
        )


def parse_field(expressions, params=None, region=None):
    """Build a field model from n expression strings over x1..xn."""
    n = len(expressions)
    if n == 0:
        raise ConfigError("need at least one component expression")
    asts = tuple(parse_expression(s, n, params) for s in expressions)

    def x_at(x):
        vals = [float(v) for v in np.asarray(x, dtype=float)]
        return np.array([eval_expression(a, vals) for a in asts], dtype=float)

    def dx_at(x):
        return _jacobian_from_asts(asts, np.asarray(x, dtype=float))

    return VectorFieldModel(
        dimension=n,
        X_at=x_at,
        DX_at=dx_at,
        singularities=None,
        region=region,
        provenance=Provenance("parsed", expressions=tuple(expressions),
                              params=tuple(sorted((params or {}).items()))),
        asts=asts,
    )


def _jacobian_from_asts(asts, x):
    n = len(asts)
    jac = np.empty((n, n), dtype=float)
    base = [float(v) for v in x]
    for j in range(n):
        vals = [Dual(base[k], 1.0 if k == j else 0.0) for k in range(n)]
        for i, node in enumerate(asts):
            out = eval_expression(node, vals)
            jac[i, j] = out.b if isinstance(out, Dual) else 0.0
    return jac


def jacobian_ad(model, x):
    """Exact Jacobian of a parsed field via dual numbers, one pass per column."""
    if model.asts is None:
        raise ValueError("jacobian_ad needs a parsed field (no ASTs available)")
    return _jacobian_from_asts(model.asts, np.asarray(x, dtype=float))


# ---------------------------------------------------------------------------
# Builtin catalog

def _lorenz(params):
    defaults = {"sigma": 10.0, "rho": 28.0, "beta": 8.0 / 3.0}
    unknown = set(params) - set(defaults)
    if unknown:
        raise ValueError(f"unknown lorenz parameters: {sorted(unknown)}")
    p = {**defaults, **params}
    sigma, rho, beta = p["sigma"], p["rho"], p["beta"]

    def x_at(x):
        return np.array([
            sigma * (x[1] - x[0]),
            x[0] * (rho - x[2]) - x[1],
            x[0] * x[1] - beta * x[2],
        ])

    def dx_at(x):
        return np.array([
            [-sigma, sigma, 0.0],
            [rho - x[2], -1.0, -x[0]],
            [x[1], x[0], -beta],
        ])

    sing = [np.zeros(3)]
    if rho > 1.0:
        wing = math.sqrt(beta * (rho - 1.0))
        sing.append(np.array([wing, wing, rho - 1.0]))
        sing.append(np.array([-wing, -wing, rho - 1.0]))
    return VectorFieldModel(3, x_at, dx_at, singularities=sing,
                            provenance=Provenance("builtin", "lorenz",
                                                  tuple(sorted(p.items()))))


def _linear_diag(params):
    lams = np.asarray(params, dtype=float).ravel()
    if lams.size < 1:
        raise ValueError("linear_diag needs at least one eigenvalue")
    mat = np.diag(lams)
    return _linear_dense(mat, name="linear_diag")


def _linear_dense(matrix, name="linear_dense"):
    mat = np.asarray(matrix, dtype=float)
    if mat.ndim != 2 or mat.shape[0] != mat.shape[1]:
        raise ValueError("linear_dense needs a square matrix")
    n = mat.shape[0]

    def x_at(x):
        return mat @ np.asarray(x, dtype=float)

    def dx_at(_x):
        return mat

    return VectorFieldModel(n, x_at, dx_at, singularities=[np.zeros(n)],
                            provenance=Provenance("builtin", name,
                                                  tuple(map(tuple, mat.tolist()))))


def _saddle_suspension_constant(_params):
    const = np.array([0.0, 1.0])
    zero = np.zeros((2, 2))
    return VectorFieldModel(2, lambda x: const.copy(), lambda x: zero.copy(),
                            singularities=[],
                            provenance=Provenance("builtin",
                                                  "saddle_suspension_constant"))


_CATALOG = {
    "lorenz": ("sigma, rho, beta (keyword map)", _lorenz),
    "linear_diag": ("list of diagonal eigenvalues", _linear_diag),
    "linear_dense": ("square matrix, row-major list of rows", _linear_dense),
    "saddle_suspension_constant": ("no parameters; constant field (0, 1)",
                                   _saddle_suspension_constant),
}


def builtin_catalog():
    """Names and parameter documentation of the builtin fields."""
    return {name: doc for name, (doc, _) in _CATALOG.items()}


def builtin(name, params=None):
    """Instantiate a builtin field; see builtin_catalog() for names."""
    if name not in _CATALOG:
        raise UnknownField(f"unknown builtin field '{name}'")
    _, factory = _CATALOG[name]
    if name == "lorenz":
        return factory(dict(params or {}))
    if name == "linear_diag":
        if params is None:
            raise ValueError("linear_diag needs its eigenvalue list")
        return factory(params)
    if name == "linear_dense":
        if params is None:
            raise ValueError("linear_dense needs its matrix")
        return factory(params)
    return factory(params)


def validate_trapping(model, region, n_boundary=64, dt=1e-2, seed=0):
    """Empirical trapping check: boundary samples should flow inward.

    Emits a warning (never an error) when some boundary sample exits the
    region after a single step; trapping is the caller's assertion.
    """
    rng = np.random.default_rng(seed)
    n = region.dimension
    outward = 0
    for _ in range(n_boundary):
        if isinstance(region, Ball):
            u = rng.normal(size=n)
            u /= max(np.linalg.norm(u), 1e-300)
            x = region.center + region.radius * u
        else:
            x = np.array([rng.uniform(lo, hi) for lo, hi in region.bounds])
            axis = rng.integers(n)
            x[axis] = region.bounds[axis, rng.integers(2)]
        k1 = model.X_at(x)
        k2 = model.X_at(x + 0.5 * dt * k1)
        k3 = model.X_at(x + 0.5 * dt * k2)
        k4 = model.X_at(x + dt * k3)
        step = x + dt / 6.0 * (k1 + 2 * k2 + 2 * k3 + k4)
        if not region.contains(step, slack=0.0):
            outward += 1
    if outward:
        warnings.warn(
            f"{outward}/{n_boundary} boundary samples flow outward; "
            "the declared region may not be trapping", stacklevel=2)
    return outward == 0

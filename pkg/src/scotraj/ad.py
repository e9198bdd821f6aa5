"""Forward-mode automatic differentiation on dual numbers.

Every math expression in the models, terrain, and transcriptions is written
against this module's generic scalar operations, so one derivative pathway
serves all of them.  A ``Dual`` carries a value and a directional-derivative
part; both may be floats, numpy arrays (for vectorized evaluation across
constraint instances), or other ``Dual`` instances (nesting gives higher
derivatives, e.g. Coriolis terms need d(mass matrix)/dq inside expressions
that are themselves differentiated).

Nesting passes are tagged with increasing integer levels: an operation
between duals of different levels treats the lower-level operand as a
passive constant at the higher level.  Without the tag, a constant that
happens to be a dual from an enclosing pass would leak its derivative into
the inner pass.

A float ``0.0`` dot part is a structural zero: it short-circuits products
and sums regardless of the value's array shape.
"""

from __future__ import annotations

import math

import numpy as np


def _is_zero(x) -> bool:
    return type(x) is float and x == 0.0


def _add(a, b):
    if _is_zero(a):
        return b
    if _is_zero(b):
        return a
    return a + b


def _mul(a, b):
    if _is_zero(a) or _is_zero(b):
        return 0.0
    return a * b


def _neg(a):
    return 0.0 if _is_zero(a) else -a


class Dual:
    """Scalar with a directional derivative, supporting nesting via levels."""

    __slots__ = ("val", "dot", "level")

    # Keep numpy from absorbing Dual operands into object arrays; binary ops
    # with ndarrays must fall through to the reflected methods below.
    __array_ufunc__ = None

    def __init__(self, val, dot, level: int = 1):
        self.val = val
        self.dot = dot
        self.level = level

    def __repr__(self):
        return f"Dual({self.val!r}, {self.dot!r}, level={self.level})"

    # -- arithmetic ---------------------------------------------------------

    def __add__(self, o):
        if isinstance(o, Dual):
            if o.level == self.level:
                return Dual(self.val + o.val, _add(self.dot, o.dot), self.level)
            if o.level > self.level:
                return Dual(self + o.val, o.dot, o.level)
        return Dual(self.val + o, self.dot, self.level)

    __radd__ = __add__

    def __neg__(self):
        return Dual(-self.val, _neg(self.dot), self.level)

    def __sub__(self, o):
        if isinstance(o, Dual):
            if o.level == self.level:
                return Dual(self.val - o.val, _add(self.dot, _neg(o.dot)), self.level)
            if o.level > self.level:
                return Dual(self - o.val, _neg(o.dot), o.level)
        return Dual(self.val - o, self.dot, self.level)

    def __rsub__(self, o):
        return Dual(o - self.val, _neg(self.dot), self.level)

    def __mul__(self, o):
        if isinstance(o, Dual):
            if o.level == self.level:
                return Dual(
                    self.val * o.val,
                    _add(_mul(self.dot, o.val), _mul(self.val, o.dot)),
                    self.level,
                )
            if o.level > self.level:
                return Dual(self * o.val, _mul(self, o.dot), o.level)
        return Dual(self.val * o, _mul(self.dot, o), self.level)

    __rmul__ = __mul__

    def __truediv__(self, o):
        if isinstance(o, Dual):
            if o.level == self.level:
                inv = 1.0 / o.val
                v = self.val * inv
                return Dual(v, _mul(_add(self.dot, _mul(-v, o.dot)), inv), self.level)
            if o.level > self.level:
                inv = 1.0 / o.val
                v = self * inv
                return Dual(v, _mul(_mul(-v, inv), o.dot), o.level)
        inv = 1.0 / o
        return Dual(self.val * inv, _mul(self.dot, inv), self.level)

    def __rtruediv__(self, o):
        inv = 1.0 / self.val
        v = o * inv
        return Dual(v, _mul(_mul(-v, inv), self.dot), self.level)

    def __pow__(self, n):
        if isinstance(n, Dual):
            raise TypeError("dual exponents unsupported; use exp/log explicitly")
        if n == 2:
            return self * self
        return Dual(self.val ** n, _mul(_mul(float(n), self.val ** (n - 1)), self.dot), self.level)

    def __abs__(self):
        return where(value(self) < 0.0, -self, self)

    # -- comparisons compare underlying values ------------------------------

    def __lt__(self, o):
        return value(self) < value(o)

    def __le__(self, o):
        return value(self) <= value(o)

    def __gt__(self, o):
        return value(self) > value(o)

    def __ge__(self, o):
        return value(self) >= value(o)


def value(x):
    """Strip all dual layers, returning the plain float/array value."""
    while isinstance(x, Dual):
        x = x.val
    return x


def level_of(x) -> int:
    return x.level if isinstance(x, Dual) else 0


def sin(x):
    if isinstance(x, Dual):
        return Dual(sin(x.val), _mul(cos(x.val), x.dot), x.level)
    return np.sin(x) if isinstance(x, np.ndarray) else math.sin(x)


def cos(x):
    if isinstance(x, Dual):
        return Dual(cos(x.val), _mul(-sin(x.val), x.dot), x.level)
    return np.cos(x) if isinstance(x, np.ndarray) else math.cos(x)


def tan(x):
    return sin(x) / cos(x)


def exp(x):
    if isinstance(x, Dual):
        v = exp(x.val)
        return Dual(v, _mul(v, x.dot), x.level)
    return np.exp(x) if isinstance(x, np.ndarray) else math.exp(x)


def log(x):
    if isinstance(x, Dual):
        return Dual(log(x.val), _mul(1.0 / x.val, x.dot), x.level)
    return np.log(x) if isinstance(x, np.ndarray) else math.log(x)


def sqrt(x):
    if isinstance(x, Dual):
        v = sqrt(x.val)
        return Dual(v, _mul(0.5 / v, x.dot), x.level)
    return np.sqrt(x) if isinstance(x, np.ndarray) else math.sqrt(x)


def atan(x):
    if isinstance(x, Dual):
        return Dual(atan(x.val), _mul(1.0 / (1.0 + x.val * x.val), x.dot), x.level)
    return np.arctan(x) if isinstance(x, np.ndarray) else math.atan(x)


def atan2(y, x):
    ly, lx = level_of(y), level_of(x)
    if ly == 0 and lx == 0:
        if isinstance(y, np.ndarray) or isinstance(x, np.ndarray):
            return np.arctan2(y, x)
        return math.atan2(y, x)
    lv = max(ly, lx)
    yv, ydot = (y.val, y.dot) if ly == lv else (y, 0.0)
    xv, xdot = (x.val, x.dot) if lx == lv else (x, 0.0)
    r2 = xv * xv + yv * yv
    dot = _mul(_add(_mul(xv, ydot), _neg(_mul(yv, xdot))), 1.0 / r2)
    return Dual(atan2(yv, xv), dot, lv)


def where(cond, a, b):
    """Elementwise select; cond is a plain boolean (array), never a dual."""
    la, lb = level_of(a), level_of(b)
    if la == 0 and lb == 0:
        return np.where(cond, a, b)
    lv = max(la, lb)
    av, adot = (a.val, a.dot) if la == lv else (a, 0.0)
    bv, bdot = (b.val, b.dot) if lb == lv else (b, 0.0)
    if _is_zero(adot) and _is_zero(bdot):
        dot = 0.0
    else:
        dot = where(cond, adot, bdot)
    return Dual(where(cond, av, bv), dot, lv)


def clip(x, lo, hi):
    """Clamp with zero derivative outside [lo, hi]."""
    v = value(x)
    return where(v < lo, lo + 0.0 * x, where(v > hi, hi + 0.0 * x, x))


# -- seeding and extraction helpers -----------------------------------------


def seed_columns(cols, level: int = 1):
    """Wrap n argument columns as duals with one-hot derivative rows.

    ``cols`` is a sequence of equal-length value arrays (one per argument,
    vectorized across instances).  The returned duals carry dot parts of
    shape (n_args, 1) that broadcast against full (n_args, n_inst) dots.
    """
    n = len(cols)
    out = []
    for j, c in enumerate(cols):
        e = np.zeros((n, 1))
        e[j, 0] = 1.0
        out.append(Dual(np.asarray(c, dtype=float), e, level))
    return out


def dot_rows(y, n_args: int, n_inst: int) -> np.ndarray:
    """Materialize a seeded output's derivative as an (n_args, n_inst) array."""
    if not isinstance(y, Dual):
        return np.zeros((n_args, n_inst))
    d = y.dot
    if _is_zero(d):
        return np.zeros((n_args, n_inst))
    return np.broadcast_to(np.asarray(d, dtype=float), (n_args, n_inst)).copy()


def _next_level(xs) -> int:
    lv = 0
    for x in xs:
        lv = max(lv, level_of(x))
    return lv + 1


def jvp(f, xs, vs):
    """Directional derivative of f at xs along vs.

    f maps a list of scalars to a list of scalars.  Returns (values, dots).
    Both the point and the direction may contain duals from an enclosing
    pass; the inner seeding happens one level above them.
    """
    lv = max(_next_level(xs), _next_level(vs))
    ys = f([Dual(x, v, lv) for x, v in zip(xs, vs)])
    vals = [y.val if level_of(y) == lv else y for y in ys]
    dots = [y.dot if level_of(y) == lv else 0.0 for y in ys]
    return vals, dots


def jacobian(f, xs):
    """Values and per-argument partials of f at xs, one seed pass per arg.

    Returns (values, cols) with cols[j][i] = d f_i / d xs_j.
    """
    lv = _next_level(xs)
    vals = None
    cols = []
    for j in range(len(xs)):
        args = [Dual(x, 1.0, lv) if k == j else x for k, x in enumerate(xs)]
        ys = f(args)
        if vals is None:
            vals = [y.val if level_of(y) == lv else y for y in ys]
        cols.append([y.dot if level_of(y) == lv else 0.0 for y in ys])
    if vals is None:
        vals = f(xs)
    return vals, cols


def grad(f, xs):
    """Gradient of a scalar-valued f: (value, list of partials)."""
    vals, cols = jacobian(lambda a: [f(a)], xs)
    return vals[0], [c[0] for c in cols]

"""Forward-mode automatic differentiation via truncated bivariate Taylor series.

A Taylor2 holds the coefficients of a polynomial in two displacement
variables (du, dv), truncated at a fixed total degree (1 to 3).  Evaluating
an expression graph on Taylor2 seeds yields every partial derivative up to
that degree exactly, which is how surface jets are produced without finite
differences.  Coefficient slots carry trailing batch axes so whole grids
evaluate in one pass.
"""

from __future__ import annotations

import math

import numpy as np

from .errors import EvaluationError

MAX_ORDER = 3

_FACT = [math.factorial(n) for n in range(MAX_ORDER + 1)]


def index_pairs(order: int):
    return [(i, j) for i in range(order + 1) for j in range(order + 1 - i)]


class Taylor2:
    """Bivariate Taylor polynomial truncated at total degree `order`."""

    __slots__ = ("order", "c")

    # make ndarray <op> Taylor2 defer to our reflected operators
    __array_ufunc__ = None

    def __init__(self, order: int, c: np.ndarray):
        self.order = order
        self.c = c

    # -- constructors -----------------------------------------------------

    @classmethod
    def constant(cls, value, order: int, batch_shape=()):
        value = np.asarray(value, dtype=float)
        shape = (order + 1, order + 1) + np.broadcast_shapes(value.shape, batch_shape)
        c = np.zeros(shape)
        c[0, 0] = value
        return cls(order, c)

    @classmethod
    def variable(cls, value, axis: int, order: int):
        """Seed for u (axis 0) or v (axis 1): value + unit displacement."""
        value = np.asarray(value, dtype=float)
        c = np.zeros((order + 1, order + 1) + value.shape)
        c[0, 0] = value
        if axis == 0:
            c[1, 0] = 1.0
        else:
            c[0, 1] = 1.0
        return cls(order, c)

    @classmethod
    def from_partials(cls, order: int, partials: dict):
        """Build from partial derivatives keyed by (i, j) multi-indices."""
        first = np.asarray(partials[(0, 0)], dtype=float)
        c = np.zeros((order + 1, order + 1) + first.shape)
        for (i, j), val in partials.items():
            c[i, j] = np.asarray(val, dtype=float) / (_FACT[i] * _FACT[j])
        return cls(order, c)

    # -- accessors --------------------------------------------------------

    @property
    def value(self) -> np.ndarray:
        return self.c[0, 0]

    def partial(self, i: int, j: int) -> np.ndarray:
        return self.c[i, j] * (_FACT[i] * _FACT[j])

    # -- ring operations --------------------------------------------------

    def _wrap_other(self, other):
        if isinstance(other, Taylor2):
            if other.order != self.order:
                raise ValueError("mixed Taylor orders")
            return other
        return None

    def __add__(self, other):
        t = self._wrap_other(other)
        if t is not None:
            return Taylor2(self.order, self.c + t.c)
        out = self.c.copy()
        out[0, 0] = out[0, 0] + np.asarray(other, dtype=float)
        return Taylor2(self.order, out)

    __radd__ = __add__

    def __neg__(self):
        return Taylor2(self.order, -self.c)

    def __sub__(self, other):
        return self + (-other if isinstance(other, Taylor2) else -np.asarray(other, dtype=float))

    def __rsub__(self, other):
        return (-self) + other

    def __mul__(self, other):
        t = self._wrap_other(other)
        if t is None:
            return Taylor2(self.order, self.c * np.asarray(other, dtype=float))
        k = self.order
        a, b = self.c, t.c
        shape = np.broadcast_shapes(a.shape, b.shape)
        out = np.zeros(shape)
        for i, j in index_pairs(k):
            acc = 0.0
            for p in range(i + 1):
                for q in range(j + 1):
                    acc = acc + a[p, q] * b[i - p, j - q]
            out[i, j] = acc
        return Taylor2(k, out)

    __rmul__ = __mul__

    def __truediv__(self, other):
        t = self._wrap_other(other)
        if t is None:
            return Taylor2(self.order, self.c / np.asarray(other, dtype=float))
        return self * t.reciprocal()

    def __rtruediv__(self, other):
        return self.reciprocal() * other

    # -- analytic functions -----------------------------------------------

    def compose(self, derivs):
        """Apply a scalar function given by its derivatives at the value.

        `derivs` is [g(f0), g'(f0), ...] up to self.order; composition uses
        the truncated Taylor expansion of g around f0.
        """
        k = self.order
        p = Taylor2(k, self.c.copy())
        p.c[0, 0] = np.zeros_like(p.c[0, 0])
        out = Taylor2.constant(derivs[k] / _FACT[k], k, p.c.shape[2:])
        for n in range(k - 1, -1, -1):
            out = out * p + (derivs[n] / _FACT[n])
        return out

    def _require(self, ok: np.ndarray, what: str):
        ok = np.asarray(ok)
        if not ok.all():
            bad = np.argwhere(~ok)
            raise EvaluationError(f"{what} (first offending batch index {bad[0].tolist()})")

    def exp(self):
        e = np.exp(self.value)
        self._require(np.isfinite(e), "exp overflow")
        return self.compose([e] * (self.order + 1))

    def log(self):
        f0 = self.value
        self._require(f0 > 0, "log of non-positive argument")
        d = [np.log(f0), 1.0 / f0, -1.0 / f0**2, 2.0 / f0**3]
        return self.compose(d[: self.order + 1])

    def sqrt(self):
        f0 = self.value
        self._require(f0 > 0, "sqrt of non-positive argument")
        r = np.sqrt(f0)
        d = [r, 0.5 / r, -0.25 / (r * f0), 0.375 / (r * f0 * f0)]
        return self.compose(d[: self.order + 1])

    def reciprocal(self):
        f0 = self.value
        self._require(f0 != 0, "division by zero")
        d = [1.0 / f0, -1.0 / f0**2, 2.0 / f0**3, -6.0 / f0**4]
        return self.compose(d[: self.order + 1])

    def sin(self):
        s, c = np.sin(self.value), np.cos(self.value)
        return self.compose([s, c, -s, -c][: self.order + 1])

    def cos(self):
        s, c = np.sin(self.value), np.cos(self.value)
        return self.compose([c, -s, -c, s][: self.order + 1])

    def sinh(self):
        s, c = np.sinh(self.value), np.cosh(self.value)
        self._require(np.isfinite(s) & np.isfinite(c), "sinh overflow")
        return self.compose([s, c, s, c][: self.order + 1])

    def cosh(self):
        s, c = np.sinh(self.value), np.cosh(self.value)
        self._require(np.isfinite(s) & np.isfinite(c), "cosh overflow")
        return self.compose([c, s, c, s][: self.order + 1])

    def ipow(self, n: int):
        """Integer power by repeated squaring; valid for any base value."""
        if n == 0:
            return Taylor2.constant(np.ones_like(self.value), self.order, ())
        if n < 0:
            return self.ipow(-n).reciprocal()
        result = None
        base = self
        while n:
            if n & 1:
                result = base if result is None else result * base
            n >>= 1
            if n:
                base = base * base
        return result

    def rpow(self, r: float):
        """Real power; requires a strictly positive base value."""
        f0 = self.value
        self._require(f0 > 0, "power of non-positive base with non-integer exponent")
        d = [np.power(f0, r)]
        coef = 1.0
        for k in range(1, self.order + 1):
            coef *= r - (k - 1)
            d.append(coef * np.power(f0, r - k))
        return self.compose(d)


_UNARY = {
    "sin": Taylor2.sin,
    "cos": Taylor2.cos,
    "sinh": Taylor2.sinh,
    "cosh": Taylor2.cosh,
    "exp": Taylor2.exp,
    "log": Taylor2.log,
    "sqrt": Taylor2.sqrt,
}


def apply_function(name: str, arg: Taylor2) -> Taylor2:
    return _UNARY[name](arg)

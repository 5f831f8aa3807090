"""Instrumented scalar for counting basic arithmetic operations.

A :class:`CountingScalar` wraps a float and bumps a shared :class:`OpCounter`
each time it takes part in arithmetic.  Arrays of counting scalars (numpy
``dtype=object``) can be pushed through the same numeric kernels used for
plain float arrays, which is how the benchmark measures operation counts.

Operations whose outcome needs no arithmetic are folded and cost nothing,
mirroring what a symbolic tracer does with structural constants:

* ``x * 0`` and ``0 * x`` give a plain zero,
* ``x * 1``, ``x + 0``, ``x - 0`` and ``x / 1`` give ``x`` back,
* operations between two plain numbers never involve this class at all.

The folded results are numerically identical to what float arithmetic would
produce, so an evaluation on counting scalars returns the same values as the
same evaluation on object arrays of plain floats.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, fields

import numpy as np

__all__ = [
    "OpCounter",
    "CountingScalar",
    "counted_array",
    "values_of",
    "sin",
    "cos",
    "sqrt",
]


@dataclass
class OpCounter:
    adds: int = 0
    mults: int = 0
    divs: int = 0
    sqrts: int = 0
    compares: int = 0
    trig: int = 0
    enabled: bool = True

    @property
    def total(self) -> int:
        return (self.adds + self.mults + self.divs + self.sqrts
                + self.compares + self.trig)

    def reset(self) -> None:
        self.adds = self.mults = self.divs = 0
        self.sqrts = self.compares = self.trig = 0

    def as_dict(self) -> dict[str, int]:
        out = {f.name: getattr(self, f.name) for f in fields(self)
               if f.name != "enabled"}
        out["total"] = self.total
        return out

    def __iadd__(self, other: "OpCounter") -> "OpCounter":
        for name in ("adds", "mults", "divs", "sqrts", "compares", "trig"):
            setattr(self, name, getattr(self, name) + getattr(other, name))
        return self


def _is_zero(x) -> bool:
    return not isinstance(x, CountingScalar) and x == 0


def _is_one(x) -> bool:
    return not isinstance(x, CountingScalar) and x == 1


def _elementwise(method):
    """Apply a binary scalar method across an ndarray operand."""
    def wrapper(self, other):
        if isinstance(other, np.ndarray):
            out = np.empty(other.shape, dtype=object)
            for idx, o in np.ndenumerate(other):
                out[idx] = method(self, o)
            return out
        return method(self, other)
    wrapper.__name__ = method.__name__
    return wrapper


class CountingScalar:
    """Float value whose arithmetic is tallied on ``counter``."""

    __slots__ = ("value", "counter")
    # keep numpy scalars from trying to wrap us; they defer to our reflected ops
    __array_ufunc__ = None

    def __init__(self, value, counter: OpCounter):
        self.value = float(value)
        self.counter = counter

    def _new(self, value) -> "CountingScalar":
        return CountingScalar(value, self.counter)

    def _tick(self, name: str) -> None:
        c = self.counter
        if c.enabled:
            setattr(c, name, getattr(c, name) + 1)

    @staticmethod
    def _val(x):
        return x.value if isinstance(x, CountingScalar) else x

    # addition ---------------------------------------------------------
    @_elementwise
    def __add__(self, other):
        if _is_zero(other):
            return self
        self._tick("adds")
        return self._new(self.value + self._val(other))

    @_elementwise
    def __radd__(self, other):
        if _is_zero(other):
            return self
        self._tick("adds")
        return self._new(other + self.value)

    @_elementwise
    def __sub__(self, other):
        if _is_zero(other):
            return self
        self._tick("adds")
        return self._new(self.value - self._val(other))

    @_elementwise
    def __rsub__(self, other):
        self._tick("adds")
        return self._new(other - self.value)

    def __neg__(self):
        self._tick("adds")
        return self._new(-self.value)

    def __pos__(self):
        return self

    # multiplication ---------------------------------------------------
    @_elementwise
    def __mul__(self, other):
        if _is_zero(other):
            return self.value * other
        if _is_one(other):
            return self
        self._tick("mults")
        return self._new(self.value * self._val(other))

    @_elementwise
    def __rmul__(self, other):
        if _is_zero(other):
            return other * self.value
        if _is_one(other):
            return self
        self._tick("mults")
        return self._new(other * self.value)

    @_elementwise
    def __truediv__(self, other):
        if _is_one(other):
            return self
        self._tick("divs")
        return self._new(self.value / self._val(other))

    @_elementwise
    def __rtruediv__(self, other):
        if _is_zero(other):
            return other / self.value
        self._tick("divs")
        return self._new(other / self.value)

    def __pow__(self, exponent):
        if exponent == 2:
            self._tick("mults")
            return self._new(self.value * self.value)
        if exponent == 0.5:
            return self.sqrt()
        raise NotImplementedError("only squares and square roots are counted")

    # comparisons ------------------------------------------------------
    def _cmp(self, other, op) -> bool:
        self._tick("compares")
        return op(self.value, self._val(other))

    def __lt__(self, other):
        return self._cmp(other, lambda a, b: a < b)

    def __le__(self, other):
        return self._cmp(other, lambda a, b: a <= b)

    def __gt__(self, other):
        return self._cmp(other, lambda a, b: a > b)

    def __ge__(self, other):
        return self._cmp(other, lambda a, b: a >= b)

    def __abs__(self):
        self._tick("compares")
        return self._new(abs(self.value))

    # elementary functions --------------------------------------------
    def sqrt(self):
        self._tick("sqrts")
        return self._new(math.sqrt(self.value))

    def sin(self):
        self._tick("trig")
        return self._new(math.sin(self.value))

    def cos(self):
        self._tick("trig")
        return self._new(math.cos(self.value))

    def __float__(self):
        return self.value

    def __repr__(self):
        return f"CountingScalar({self.value!r})"


def sin(x):
    return x.sin() if isinstance(x, CountingScalar) else math.sin(x)


def cos(x):
    return x.cos() if isinstance(x, CountingScalar) else math.cos(x)


def sqrt(x):
    return x.sqrt() if isinstance(x, CountingScalar) else math.sqrt(x)


def counted_array(values, counter: OpCounter) -> np.ndarray:
    """Object array of counting scalars sharing ``counter``."""
    vals = np.asarray(values, dtype=float)
    out = np.empty(vals.shape, dtype=object)
    for idx, v in np.ndenumerate(vals):
        out[idx] = CountingScalar(v, counter)
    return out


def values_of(arr) -> np.ndarray:
    """Float array of the values held in a (possibly counted) array."""
    a = np.asarray(arr)
    if a.dtype != object:
        return a.astype(float)
    out = np.empty(a.shape, dtype=float)
    for idx, v in np.ndenumerate(a):
        out[idx] = v.value if isinstance(v, CountingScalar) else float(v)
    return out

"""Truncated multivariate Taylor polynomials ("jets") of degree at most 4.

A :class:`Jet` stores, for a function ``f`` of ``dim`` chart variables, the
Taylor coefficients ``c[alpha] = (d^alpha f)(x0) / alpha!`` for every
multi-index ``|alpha| <= degree``.  The coefficient axis is always the last
axis of the underlying array; any leading axes are free (batches of points,
tensor indices), so one ``Jet`` object can hold a whole tensor field sampled
at many points.

Multi-indices are ordered graded-lexicographically: first by total degree,
then lexicographically with the power of ``x0`` most significant and larger
powers first, e.g. for two variables and degree 2::

    (0,0) (1,0) (0,1) (2,0) (1,1) (0,2)

With this ordering the coefficients of a degree ``k`` jet are a prefix of
the coefficients of the same jet at degree ``m > k``, so truncation is a
slice.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .errors import ArgumentError, SingularValueError

MAX_DEGREE = 4

_COEF = "z"


def _compositions(total, parts):
    if parts == 1:
        yield (total,)
        return
    for first in range(total, -1, -1):
        for rest in _compositions(total - first, parts - 1):
            yield (first,) + rest


@lru_cache(maxsize=None)
def multi_indices(dim: int, degree: int) -> tuple[tuple[int, ...], ...]:
    """All multi-indices with ``|alpha| <= degree`` in graded-lex order."""
    if dim < 1:
        raise ArgumentError(f"jet dimension must be positive, got {dim}")
    if not 0 <= degree <= MAX_DEGREE:
        raise ArgumentError(f"jet degree must lie in [0, {MAX_DEGREE}], got {degree}")
    out = []
    for total in range(degree + 1):
        out.extend(_compositions(total, dim))
    return tuple(out)


def num_coefficients(dim: int, degree: int) -> int:
    return math.comb(dim + degree, degree)


@dataclass(frozen=True)
class _Tables:
    indices: tuple
    position: dict
    left: np.ndarray
    right: np.ndarray
    starts: np.ndarray
    deriv_src: tuple
    deriv_factor: tuple
    factorial: np.ndarray


@lru_cache(maxsize=None)
def _tables(dim: int, degree: int) -> _Tables:
    indices = multi_indices(dim, degree)
    position = {alpha: k for k, alpha in enumerate(indices)}

    pairs = []
    for ia, a in enumerate(indices):
        for ib, b in enumerate(indices):
            s = tuple(x + y for x, y in zip(a, b))
            if sum(s) <= degree:
                pairs.append((position[s], ia, ib))
    pairs.sort()
    target = np.array([p[0] for p in pairs])
    left = np.array([p[1] for p in pairs])
    right = np.array([p[2] for p in pairs])
    starts = np.flatnonzero(np.r_[True, target[1:] != target[:-1]])

    deriv_src, deriv_factor = [], []
    if degree > 0:
        lower = multi_indices(dim, degree - 1)
        for i in range(dim):
            src, fac = [], []
            for beta in lower:
                up = list(beta)
                up[i] += 1
                src.append(position[tuple(up)])
                fac.append(float(up[i]))
            deriv_src.append(np.array(src))
            deriv_factor.append(np.array(fac))

    factorial = np.array([float(np.prod([math.factorial(k) for k in a])) for a in indices])
    return _Tables(indices, position, left, right, starts,
                   tuple(deriv_src), tuple(deriv_factor), factorial)


class Jet:
    """Array of truncated Taylor polynomials sharing ``dim`` and ``degree``.

    Parameters
    ----------
    coeffs : array_like
        Coefficients, last axis of length ``binomial(dim + degree, degree)``.
    dim : int
        Number of chart variables.
    degree : int
        Truncation degree, ``0 <= degree <= 4``.
    """

    __slots__ = ("c", "dim", "degree")
    # make ndarray (op) Jet defer to the reflected Jet methods
    __array_ufunc__ = None

    def __init__(self, coeffs, dim: int, degree: int):
        c = np.asarray(coeffs, dtype=float)
        size = num_coefficients(dim, degree) if 0 <= degree <= MAX_DEGREE else -1
        if size < 0:
            raise ArgumentError(f"jet degree must lie in [0, {MAX_DEGREE}], got {degree}")
        if dim < 1:
            raise ArgumentError(f"jet dimension must be positive, got {dim}")
        if c.ndim == 0 or c.shape[-1] != size:
            raise ArgumentError(
                f"expected {size} coefficients for dim={dim}, degree={degree}, "
                f"got shape {c.shape}")
        self.c = c
        self.dim = dim
        self.degree = degree

    # construction -------------------------------------------------------
    @classmethod
    def constant(cls, value, dim: int, degree: int) -> "Jet":
        value = np.asarray(value, dtype=float)
        c = np.zeros(value.shape + (num_coefficients(dim, degree),))
        c[..., 0] = value
        return cls(c, dim, degree)

    @classmethod
    def zeros(cls, shape, dim: int, degree: int) -> "Jet":
        return cls(np.zeros(tuple(shape) + (num_coefficients(dim, degree),)), dim, degree)

    # basic properties ---------------------------------------------------
    @property
    def shape(self) -> tuple:
        return self.c.shape[:-1]

    @property
    def value(self) -> np.ndarray:
        """Function values at the base point(s)."""
        return self.c[..., 0]

    def __repr__(self):
        return f"Jet(dim={self.dim}, degree={self.degree}, shape={self.shape})"

    def __getitem__(self, key) -> "Jet":
        if not isinstance(key, tuple):
            key = (key,)
        c = self.c[key + (slice(None),)] if Ellipsis in key else self.c[key]
        return Jet(c, self.dim, self.degree)

    def coefficient(self, alpha) -> np.ndarray:
        alpha = tuple(alpha)
        try:
            k = _tables(self.dim, self.degree).position[alpha]
        except KeyError:
            raise ArgumentError(f"multi-index {alpha} not present in {self!r}") from None
        return self.c[..., k]

    def is_finite(self) -> bool:
        return bool(np.isfinite(self.c).all())

    # degree bookkeeping ---------------------------------------------------
    def truncate(self, degree: int) -> "Jet":
        if degree > self.degree:
            raise ArgumentError(f"cannot raise jet degree {self.degree} to {degree}")
        if degree == self.degree:
            return self
        return Jet(self.c[..., :num_coefficients(self.dim, degree)], self.dim, degree)

    def require(self, degree: int, what: str = "operation") -> "Jet":
        if self.degree < degree:
            raise ArgumentError(f"{what} needs jet degree >= {degree}, got {self.degree}")
        return self

    # differentiation ------------------------------------------------------
    def diff(self, i: int) -> "Jet":
        """Partial derivative in variable ``i``; the result loses one degree."""
        if not 0 <= i < self.dim:
            raise ArgumentError(f"variable index {i} out of range for dim {self.dim}")
        self.require(1, "differentiation")
        t = _tables(self.dim, self.degree)
        return Jet(self.c[..., t.deriv_src[i]] * t.deriv_factor[i], self.dim, self.degree - 1)

    def grad(self) -> "Jet":
        """All first partials stacked on a new trailing tensor axis."""
        self.require(1, "differentiation")
        t = _tables(self.dim, self.degree)
        c = np.stack([self.c[..., t.deriv_src[i]] * t.deriv_factor[i]
                      for i in range(self.dim)], axis=-2)
        return Jet(c, self.dim, self.degree - 1)

    def partial(self, alpha) -> np.ndarray:
        """The partial derivative ``d^alpha f`` at the base point."""
        alpha = tuple(int(a) for a in alpha)
        if len(alpha) != self.dim or min(alpha) < 0:
            raise ArgumentError(f"bad multi-index {alpha} for dim {self.dim}")
        if sum(alpha) > self.degree:
            raise ArgumentError(f"|alpha| = {sum(alpha)} exceeds jet degree {self.degree}")
        t = _tables(self.dim, self.degree)
        k = t.position[alpha]
        return self.c[..., k] * t.factorial[k]

    # arithmetic -----------------------------------------------------------
    def _coerce(self, other):
        if isinstance(other, Jet):
            if other.dim != self.dim:
                raise ArgumentError(f"jet dimension mismatch: {self.dim} vs {other.dim}")
            return other
        return np.asarray(other, dtype=float)

    def __add__(self, other):
        other = self._coerce(other)
        if isinstance(other, Jet):
            d = min(self.degree, other.degree)
            return Jet(self.truncate(d).c + other.truncate(d).c, self.dim, d)
        c = self.c.copy() if other.ndim == 0 else np.array(
            np.broadcast_to(self.c, np.broadcast_shapes(self.c.shape, other.shape + (1,))))
        c[..., 0] += other
        return Jet(c, self.dim, self.degree)

    __radd__ = __add__

    def __neg__(self):
        return Jet(-self.c, self.dim, self.degree)

    def __sub__(self, other):
        return self + (-other if isinstance(other, Jet) else -np.asarray(other, dtype=float))

    def __rsub__(self, other):
        return (-self) + other

    def __mul__(self, other):
        other = self._coerce(other)
        if isinstance(other, Jet):
            return _mul(self, other)
        return Jet(self.c * other[..., None], self.dim, self.degree)

    __rmul__ = __mul__

    def __truediv__(self, other):
        other = self._coerce(other)
        if isinstance(other, Jet):
            return _mul(self, reciprocal(other))
        if np.any(other == 0):
            raise SingularValueError("division by zero constant")
        return Jet(self.c / other[..., None], self.dim, self.degree)

    def __rtruediv__(self, other):
        return reciprocal(self) * other

    def __pow__(self, p):
        if isinstance(p, (int, np.integer)) and p >= 0:
            out = Jet.constant(np.ones(self.shape), self.dim, self.degree)
            base = self
            while p:
                if p & 1:
                    out = out * base
                p >>= 1
                if p:
                    base = base * base
            return out
        return powr(self, float(p))

    # layout ---------------------------------------------------------------
    def swap(self, a: int, b: int) -> "Jet":
        """Swap two leading axes (negative indices count from the last tensor axis)."""
        return Jet(np.swapaxes(self.c, _ax(a), _ax(b)), self.dim, self.degree)

    def to_dict(self) -> dict:
        return {"dim": self.dim, "degree": self.degree, "coeffs": self.c.tolist()}


def _ax(a):
    return a - 1 if a < 0 else a


def _mul(a: Jet, b: Jet) -> Jet:
    if a.dim != b.dim:
        raise ArgumentError(f"jet dimension mismatch: {a.dim} vs {b.dim}")
    d = min(a.degree, b.degree)
    a, b = a.truncate(d), b.truncate(d)
    if d == 0:
        return Jet(a.c * b.c, a.dim, 0)
    t = _tables(a.dim, d)
    prod = a.c[..., t.left] * b.c[..., t.right]
    return Jet(np.add.reduceat(prod, t.starts, axis=-1), a.dim, d)


def jeinsum(subscripts: str, *operands) -> Jet:
    """``numpy.einsum`` over the leading axes of jets and plain arrays.

    At most two operands may be jets; jet products are truncated at the
    lower of their degrees.  Subscripts address leading axes only.
    """
    spec_in, spec_out = subscripts.replace(" ", "").split("->")
    specs = spec_in.split(",")
    if len(specs) != len(operands):
        raise ArgumentError("subscript / operand count mismatch")
    jets = [k for k, op in enumerate(operands) if isinstance(op, Jet)]
    if not jets or len(jets) > 2:
        raise ArgumentError("jeinsum needs one or two jet operands")
    dim = operands[jets[0]].dim
    if any(operands[k].dim != dim for k in jets):
        raise ArgumentError("jet dimension mismatch")
    d = min(operands[k].degree for k in jets)
    arrays = []
    for k, op in enumerate(operands):
        if isinstance(op, Jet):
            specs[k] += _COEF
            arrays.append(op.truncate(d).c)
        else:
            arrays.append(np.asarray(op, dtype=float))
    full = ",".join(specs) + "->" + spec_out + _COEF

    if len(jets) == 1 or d == 0:
        return Jet(np.einsum(full, *arrays), dim, d)
    t = _tables(dim, d)
    i, j = jets
    arrays[i] = arrays[i][..., t.left]
    arrays[j] = arrays[j][..., t.right]
    prod = np.einsum(full, *arrays)
    return Jet(np.add.reduceat(prod, t.starts, axis=-1), dim, d)


# --- public operations --------------------------------------------------


def jet_variable(index: int, value, dim: int, degree: int) -> Jet:
    """Jet of the coordinate function ``x_index`` based at ``value``.

    ``value`` may be an array, giving a batch of base points.
    """
    if not 0 <= index < dim:
        raise ArgumentError(f"variable index {index} out of range for dim {dim}")
    j = Jet.constant(value, dim, degree)
    if degree >= 1:
        j.c[..., 1 + index] = 1.0
    return j


def variables(points, degree: int) -> list[Jet]:
    """Coordinate jets for a batch of points of shape ``(..., dim)``."""
    points = np.asarray(points, dtype=float)
    dim = points.shape[-1]
    return [jet_variable(i, points[..., i], dim, degree) for i in range(dim)]


def jet_arith(a: Jet, b: Jet, op: str) -> Jet:
    """Strict binary arithmetic: operands must agree in dimension and degree."""
    if not isinstance(a, Jet) or not isinstance(b, Jet):
        raise ArgumentError("jet_arith expects two jets")
    if a.dim != b.dim or a.degree != b.degree:
        raise ArgumentError(
            f"jet mismatch: (dim {a.dim}, degree {a.degree}) vs (dim {b.dim}, degree {b.degree})")
    if op == "add":
        return a + b
    if op == "sub":
        return a - b
    if op == "mul":
        return a * b
    if op == "div":
        return a / b
    raise ArgumentError(f"unknown jet operation {op!r}")


def reciprocal(b: Jet) -> Jet:
    b0 = b.value
    if np.any(b0 == 0):
        raise SingularValueError("division by a jet with zero constant term")
    t = (b - b0) / b0
    r = Jet.constant(np.ones(b.shape), b.dim, b.degree)
    for _ in range(b.degree):
        r = 1.0 - t * r
    return r / b0


def _compose(a: Jet, taylor) -> Jet:
    """Evaluate ``sum_k taylor[k] * (a - a0)**k`` with Horner's scheme."""
    s = a - a.value
    r = Jet.constant(taylor[a.degree], a.dim, a.degree)
    for k in range(a.degree - 1, -1, -1):
        r = r * s + taylor[k]
    return r


def exp(a: Jet) -> Jet:
    e = np.exp(a.value)
    return _compose(a, [e / math.factorial(k) for k in range(a.degree + 1)])


def log(a: Jet) -> Jet:
    a0 = a.value
    if np.any(a0 <= 0):
        raise SingularValueError("log of a jet with non-positive constant term")
    taylor = [np.log(a0)] + [(-1.0) ** (k + 1) / (k * a0 ** k) for k in range(1, a.degree + 1)]
    return _compose(a, taylor)


def sin(a: Jet) -> Jet:
    s, c = np.sin(a.value), np.cos(a.value)
    cycle = [s, c, -s, -c]
    return _compose(a, [cycle[k % 4] / math.factorial(k) for k in range(a.degree + 1)])


def cos(a: Jet) -> Jet:
    s, c = np.sin(a.value), np.cos(a.value)
    cycle = [c, -s, -c, s]
    return _compose(a, [cycle[k % 4] / math.factorial(k) for k in range(a.degree + 1)])


def powr(a: Jet, p: float) -> Jet:
    a0 = a.value
    if np.any(a0 <= 0):
        raise SingularValueError("real power of a jet with non-positive constant term")
    taylor = []
    coef = 1.0
    for k in range(a.degree + 1):
        taylor.append(coef * a0 ** (p - k))
        coef *= (p - k) / (k + 1)
    return _compose(a, taylor)


def sqrt(a: Jet) -> Jet:
    return powr(a, 0.5)


_ANALYTIC = {"exp": exp, "log": log, "sin": sin, "cos": cos, "sqrt": sqrt}


def jet_analytic(a: Jet, fn, p: float | None = None) -> Jet:
    """Apply ``exp``, ``log``, ``sin``, ``cos``, ``sqrt`` or ``("powr", p)``."""
    if isinstance(fn, tuple):
        fn, p = fn
    if fn == "powr":
        if p is None:
            raise ArgumentError("powr needs an exponent")
        out = powr(a, p)
    else:
        try:
            out = _ANALYTIC[fn](a)
        except KeyError:
            raise ArgumentError(f"unknown analytic function {fn!r}") from None
    if not out.is_finite():
        raise SingularValueError(f"{fn} produced non-finite coefficients")
    return out


def extract_partial(a: Jet, alpha) -> np.ndarray:
    """``alpha! * coeffs[alpha]``, the partial derivative at the base point."""
    return a.partial(alpha)


def stack(jets, axis: int = -1) -> Jet:
    """Stack jets of equal dim along a new leading axis (negative counts from the last tensor axis)."""
    jets = list(jets)
    d = min(j.degree for j in jets)
    arrays = [j.truncate(d).c for j in jets]
    shape = np.broadcast_shapes(*(a.shape for a in arrays))
    arrays = [np.broadcast_to(a, shape) for a in arrays]
    return Jet(np.stack(arrays, axis=_ax(axis) if axis < 0 else axis), jets[0].dim, d)


def tensor(rows) -> Jet:
    """Assemble a nested list of jets (or numbers) into one jet array."""
    flat = list(_flatten(rows))
    template = next(x for x in flat if isinstance(x, Jet))
    jets = [x if isinstance(x, Jet) else Jet.constant(x, template.dim, template.degree) for x in flat]
    d = min(j.degree for j in jets)
    arrays = [j.truncate(d).c for j in jets]
    shape = np.broadcast_shapes(*(a.shape for a in arrays))
    arrays = np.stack([np.broadcast_to(a, shape) for a in arrays], axis=-2)
    dims = _nest_shape(rows)
    c = arrays.reshape(shape[:-1] + dims + (shape[-1],))
    return Jet(c, template.dim, d)


def _flatten(rows):
    if isinstance(rows, (list, tuple)):
        for r in rows:
            yield from _flatten(r)
    else:
        yield rows


def _nest_shape(rows):
    dims = []
    while isinstance(rows, (list, tuple)):
        dims.append(len(rows))
        rows = rows[0]
    return tuple(dims)


__all__ = [
    "Jet", "MAX_DEGREE", "multi_indices", "num_coefficients", "jet_variable",
    "variables", "jet_arith", "jet_analytic", "extract_partial", "reciprocal",
    "exp", "log", "sin", "cos", "sqrt", "powr", "jeinsum", "stack", "tensor",
]

"""Nested forward-mode dual numbers on numpy arrays.

A :class:`Dual` holds a primal value ``re`` and a tangent ``du`` whose
leading axis enumerates seed directions, so ``du.shape == (m,) + re.shape``.
Either part may itself be a :class:`Dual` of a lower nesting level, which is
how higher derivatives are obtained. Every dual carries an integer tag; the
newest tag is the innermost differentiation, and operands with an older tag
are treated as constants at that level (this is what keeps nested
derivatives from confusing their perturbations).

All functions here treat leading axes as batch axes and operate on trailing
axes, so chart points can be evaluated in bulk.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from .chart import ChartPoint

__all__ = [
    "Dual", "MultiIndex", "ScalarField", "VectorFieldTM",
    "sqrt", "exp", "log", "einsum", "inv", "stack", "concatenate",
    "moveaxis", "swapaxes", "broadcast_to", "value", "shape", "ndim", "sum_",
    "jvp", "jacobian", "value_and_jacobian", "jac_x", "jac_y", "jac_z",
    "partial", "partial_along", "fd_oracle", "fd_partial_along",
    "field_jacobian", "MAX_ORDER",
]

MAX_ORDER = 4

_tags = itertools.count(1)


def shape(a) -> tuple:
    if type(a) is Dual:
        return shape(a.re)
    return a.shape if isinstance(a, np.ndarray) else np.shape(a)


def ndim(a) -> int:
    return len(shape(a))


def value(a):
    """Strip every derivative level and return the plain primal array."""
    while isinstance(a, Dual):
        a = a.re
    return a


def _top_tag(*ops) -> int:
    t = 0
    for op in ops:
        if type(op) is Dual and op.tag > t:
            t = op.tag
    return t


def _split(a, tag):
    if isinstance(a, Dual) and a.tag == tag:
        return a.re, a.du
    return a, None


def _lift_du(du, from_ndim: int, to_ndim: int):
    # insert value axes right after the direction axis
    if to_ndim == from_ndim:
        return du
    return du[(slice(None),) + (None,) * (to_ndim - from_ndim)]


def broadcast_to(a, shp):
    shp = tuple(shp)
    if isinstance(a, Dual):
        if a.shape == shp:
            return a
        m = shape(a.du)[0]
        du = _lift_du(a.du, a.ndim, len(shp))
        return Dual(broadcast_to(a.re, shp), broadcast_to(du, (m,) + shp), a.tag)
    return np.broadcast_to(a, shp)


class Dual:
    """Primal value plus a stack of tangents along ``m`` seed directions."""

    __slots__ = ("re", "du", "tag")
    __array_ufunc__ = None

    def __init__(self, re, du, tag: int):
        self.re = re
        self.du = du
        self.tag = tag

    @property
    def shape(self) -> tuple:
        return shape(self.re)

    @property
    def ndim(self) -> int:
        return _nd(self.re)

    @property
    def T(self):
        return swapaxes(self, -1, -2)

    def __repr__(self) -> str:
        return f"Dual(tag={self.tag}, shape={self.shape}, value={value(self)!r})"

    def __getitem__(self, key):
        if not isinstance(key, tuple):
            key = (key,)
        return Dual(self.re[key], self.du[(slice(None),) + key], self.tag)

    def __neg__(self):
        return Dual(-self.re, -self.du, self.tag)

    def __pos__(self):
        return self

    def __add__(self, other):
        return add(self, other)

    __radd__ = __add__

    def __sub__(self, other):
        return add(self, -other)

    def __rsub__(self, other):
        return add(-self, other)

    def __mul__(self, other):
        return multiply(self, other)

    __rmul__ = __mul__

    def __truediv__(self, other):
        return multiply(self, reciprocal(other))

    def __rtruediv__(self, other):
        return multiply(other, reciprocal(self))

    def __pow__(self, p):
        return power(self, p)

    def __matmul__(self, other):
        return einsum("...ij,...jk->...ik", self, other)

    def __rmatmul__(self, other):
        return einsum("...ij,...jk->...ik", other, self)


def _nd(a) -> int:
    if type(a) is Dual:
        return a.ndim
    return a.ndim if isinstance(a, np.ndarray) else np.ndim(a)


def add(a, b):
    ta = a.tag if type(a) is Dual else 0
    tb = b.tag if type(b) is Dual else 0
    if ta == tb == 0:
        return a + b
    if ta == tb:
        re = add(a.re, b.re)
        nd = _nd(re)
        return Dual(re, add(_lift_du(a.du, _nd(a.re), nd), _lift_du(b.du, _nd(b.re), nd)), ta)
    if tb > ta:
        a, b, ta = b, a, tb
    re = add(a.re, b)
    d = _lift_du(a.du, _nd(a.re), _nd(re))
    sd = shape(d)
    if sd[1:] != shape(re):
        d = broadcast_to(d, sd[:1] + shape(re))
    return Dual(re, d, ta)


def multiply(a, b):
    ta = a.tag if type(a) is Dual else 0
    tb = b.tag if type(b) is Dual else 0
    if ta == tb == 0:
        return a * b
    if ta == tb:
        re = multiply(a.re, b.re)
        nd = _nd(re)
        du = add(multiply(_lift_du(a.du, _nd(a.re), nd), b.re), multiply(a.re, _lift_du(b.du, _nd(b.re), nd)))
        return Dual(re, du, ta)
    if tb > ta:
        a, b, ta = b, a, tb
    re = multiply(a.re, b)
    return Dual(re, multiply(_lift_du(a.du, _nd(a.re), _nd(re)), b), ta)


def reciprocal(a):
    if not isinstance(a, Dual):
        return 1.0 / a
    r = reciprocal(a.re)
    return Dual(r, -(a.du * (r * r)), a.tag)


def power(a, p):
    if not isinstance(a, Dual):
        return a ** p
    if p == 2:
        return a * a
    return Dual(power(a.re, p), a.du * (p * power(a.re, p - 1)), a.tag)


def sqrt(a):
    if not isinstance(a, Dual):
        return np.sqrt(a)
    s = sqrt(a.re)
    return Dual(s, a.du * reciprocal(2.0 * s), a.tag)


def exp(a):
    if not isinstance(a, Dual):
        return np.exp(a)
    e = exp(a.re)
    return Dual(e, a.du * e, a.tag)


def log(a):
    if not isinstance(a, Dual):
        return np.log(a)
    return Dual(log(a.re), a.du * reciprocal(a.re), a.tag)


def _neg_axis(axis: int, nd: int) -> int:
    return axis - nd if axis >= 0 else axis


def sum_(a, axis=-1):
    if not isinstance(a, Dual):
        return np.sum(a, axis=axis)
    nd = a.ndim
    ax = tuple(_neg_axis(x, nd) for x in axis) if isinstance(axis, tuple) else _neg_axis(axis, nd)
    return Dual(sum_(a.re, ax), sum_(a.du, ax), a.tag)


def moveaxis(a, src: int, dst: int):
    if not isinstance(a, Dual):
        return np.moveaxis(a, src, dst)
    nd = a.ndim
    s, d = _neg_axis(src, nd), _neg_axis(dst, nd)
    return Dual(moveaxis(a.re, s, d), moveaxis(a.du, s, d), a.tag)


def swapaxes(a, i: int, j: int):
    if not isinstance(a, Dual):
        return np.swapaxes(a, i, j)
    nd = a.ndim
    i, j = _neg_axis(i, nd), _neg_axis(j, nd)
    return Dual(swapaxes(a.re, i, j), swapaxes(a.du, i, j), a.tag)


def einsum(subscripts: str, *operands):
    """Multilinear contraction; every operand term must start with ``...``."""
    t = _top_tag(*operands)
    if t == 0:
        return np.einsum(subscripts, *operands)
    parts = [_split(op, t) for op in operands]
    re = einsum(subscripts, *[p[0] for p in parts])
    explicit = [len(term.replace("...", "")) for term in subscripts.split("->")[0].split(",")]
    batch = [ndim(p[0]) - k for p, k in zip(parts, explicit)]
    du = None
    for k, (r, d) in enumerate(parts):
        if d is None:
            continue
        d = _lift_du(d, ndim(r), ndim(r) + max(batch) - batch[k])
        args = [d if i == k else p[0] for i, p in enumerate(parts)]
        term = einsum(subscripts, *args)
        du = term if du is None else add(du, term)
    # a tangent that did not reach every batch axis still needs the full shape
    du = broadcast_to(du, (shape(du)[0],) + shape(re)) if shape(du)[1:] != shape(re) else du
    return Dual(re, du, t)


def inv(a):
    """Inverse of a (batched) square matrix, differentiated as -A⁻¹ dA A⁻¹."""
    if not isinstance(a, Dual):
        return np.linalg.inv(a)
    ai = inv(a.re)
    du = -einsum("...ij,...jk,...kl->...il", ai, a.du, ai)
    return Dual(ai, du, a.tag)


def _zeros_tangent(m: int, shp: tuple):
    return np.zeros((m,) + shp)


def stack(seq: Sequence, axis: int = -1):
    seq = list(seq)
    t = _top_tag(*seq)
    if t == 0:
        return np.stack(seq, axis=axis)
    common = np.broadcast_shapes(*[shape(s) for s in seq])
    ax = _neg_axis(axis, len(common) + 1)
    seq = [broadcast_to(s, common) for s in seq]
    m = next(shape(s.du)[0] for s in seq if isinstance(s, Dual) and s.tag == t)
    res, dus = [], []
    for s in seq:
        r, d = _split(s, t)
        res.append(r)
        dus.append(_zeros_tangent(m, common) if d is None else d)
    return Dual(stack(res, ax), stack(dus, ax), t)


def _with_axis(shp: tuple, axis: int, k: int) -> tuple:
    shp = list(shp)
    shp[axis] = k
    return tuple(shp)


def concatenate(seq: Sequence, axis: int = -1):
    seq = list(seq)
    t = _top_tag(*seq)
    if t == 0:
        return np.concatenate(seq, axis=axis)
    ax = _neg_axis(axis, ndim(seq[0]))
    common = np.broadcast_shapes(*[_with_axis(shape(s), ax, 1) for s in seq])
    seq = [broadcast_to(s, _with_axis(common, ax, shape(s)[ax])) for s in seq]
    m = next(shape(s.du)[0] for s in seq if isinstance(s, Dual) and s.tag == t)
    res, dus = [], []
    for s in seq:
        r, d = _split(s, t)
        res.append(r)
        dus.append(_zeros_tangent(m, shape(s)) if d is None else d)
    return Dual(concatenate(res, ax), concatenate(dus, ax), t)


# --- derivative drivers -------------------------------------------------


def _extract(out, tag: int, m: int):
    if isinstance(out, Dual) and out.tag == tag:
        return out.re, out.du
    return out, _zeros_tangent(m, shape(out))


def jvp(f: Callable, z, v):
    """Return ``(f(z), d/dε f(z + ε v))``; ``v`` may itself be a dual."""
    tag = next(_tags)
    tangent = broadcast_to(v, shape(z))[None]
    out = f(Dual(z, tangent, tag))
    re, du = _extract(out, tag, 1)
    return re, du[0]


def value_and_jacobian(f: Callable, z):
    """``f`` maps (..., d) to (..., *out); the Jacobian has shape (..., *out, d)."""
    zs = shape(z)
    d = zs[-1]
    seed = np.eye(d).reshape((d,) + (1,) * (len(zs) - 1) + (d,))
    seed = np.broadcast_to(seed, (d,) + zs)
    tag = next(_tags)
    out = f(Dual(z, seed, tag))
    re, du = _extract(out, tag, d)
    return re, moveaxis(du, 0, -1)


def jacobian(f: Callable, z):
    return value_and_jacobian(f, z)[1]


def jac_y(f: Callable, x, y):
    """Derivative of ``f(x, y)`` in the fibre coordinates, appended as last axis."""
    return jacobian(lambda yy: f(x, yy), y)


def jac_x(f: Callable, x, y):
    return jacobian(lambda xx: f(xx, y), x)


def jac_z(f: Callable, x, y):
    """Derivative in all 2n coordinates, ordered (x¹..xⁿ, y¹..yⁿ)."""
    n = shape(x)[-1]
    z = concatenate([broadcast_to(x, np.broadcast_shapes(shape(x), shape(y))),
                     broadcast_to(y, np.broadcast_shapes(shape(x), shape(y)))], -1)
    return jacobian(lambda zz: f(zz[..., :n], zz[..., n:]), z)


# --- fields and the public partial-derivative API ----------------------


@dataclass(frozen=True)
class ScalarField:
    """A real function of chart coordinates, ``func(x, y)`` with x, y of shape (..., n)."""

    func: Callable
    dim: int
    name: str = ""

    def __call__(self, x, y):
        return self.func(x, y)


@dataclass(frozen=True)
class VectorFieldTM:
    """A vector field on the tangent bundle: 2n components, x-part then y-part."""

    func: Callable
    dim: int
    name: str = ""

    def __call__(self, x, y):
        return self.func(x, y)


@dataclass(frozen=True)
class MultiIndex:
    orders: tuple

    def __post_init__(self):
        orders = tuple(int(k) for k in self.orders)
        if any(k < 0 for k in orders):
            raise ValueError(f"negative derivative order in {orders}")
        object.__setattr__(self, "orders", orders)

    @property
    def total(self) -> int:
        return sum(self.orders)

    @property
    def directions(self) -> tuple:
        return tuple(c for c, k in enumerate(self.orders) for _ in range(k))

    @classmethod
    def of(cls, dim: int, **named) -> "MultiIndex":
        """Build from keywords like ``y1=1, y2=2`` or ``x1=1``."""
        orders = [0] * (2 * dim)
        for key, k in named.items():
            block, idx = key[0], int(key[1:]) - 1
            if block not in "xy" or not 0 <= idx < dim:
                raise ValueError(f"bad coordinate name {key!r} for dimension {dim}")
            orders[idx + (dim if block == "y" else 0)] = k
        return cls(tuple(orders))


def _as_field(f):
    return f.func if isinstance(f, (ScalarField, VectorFieldTM)) else f


def partial_along(f, p: ChartPoint, directions: Sequence[int]):
    """Mixed partial along the coordinate sequence ``directions`` (nested duals)."""
    func = _as_field(f)
    n = p.dim
    z0 = np.concatenate([p.x, p.y], axis=-1)
    directions = list(directions)

    def nested(z, todo):
        if not todo:
            return func(z[..., :n], z[..., n:])
        e = np.zeros(2 * n)
        e[todo[0]] = 1.0
        return jvp(lambda zz: nested(zz, todo[1:]), z, e)[1]

    return value(nested(z0, directions))


def partial(f, p: ChartPoint, idx: MultiIndex):
    """Exact mixed partial derivative of a scalar field at ``p``."""
    if len(idx.orders) != 2 * p.dim:
        raise ValueError(f"multi-index has {len(idx.orders)} entries, expected {2 * p.dim}")
    if idx.total > MAX_ORDER:
        raise ValueError(f"total order {idx.total} exceeds {MAX_ORDER}")
    return partial_along(f, p, idx.directions)


def field_jacobian(X, p: ChartPoint):
    """2n×2n matrix with entry (a, b) = ∂X^a/∂(coordinate b)."""
    func = _as_field(X)
    n = p.dim
    z0 = np.concatenate([p.x, p.y], axis=-1)
    return value(jacobian(lambda z: func(z[..., :n], z[..., n:]), z0))


_FD_BASE_STEP = {1: 1e-5, 2: 1e-4, 3: 1e-3, 4: 1e-2}


def fd_partial_along(f, p: ChartPoint, directions: Sequence[int], step: float | None = None):
    """Central differences along each direction, one Richardson level."""
    func = _as_field(f)
    n = p.dim
    directions = list(directions)
    z0 = np.concatenate([p.x, p.y], axis=-1).astype(float)
    if not directions:
        return func(z0[..., :n], z0[..., n:])
    h0 = _FD_BASE_STEP.get(len(directions), 1e-2) if step is None else step

    def central(z, todo, h):
        if not todo:
            return func(z[..., :n], z[..., n:])
        c = todo[0]
        hc = h * (1.0 + np.abs(z0[..., c]))
        zp, zm = z.copy(), z.copy()
        zp[..., c] += hc
        zm[..., c] -= hc
        return (central(zp, todo[1:], h) - central(zm, todo[1:], h)) / (2.0 * hc)

    coarse = central(z0, directions, h0)
    fine = central(z0, directions, h0 / 2.0)
    return (4.0 * fine - coarse) / 3.0


def fd_oracle(f, p: ChartPoint, idx: MultiIndex, step: float | None = None):
    """Independent finite-difference estimate of ``partial(f, p, idx)``."""
    return fd_partial_along(f, p, idx.directions, step)

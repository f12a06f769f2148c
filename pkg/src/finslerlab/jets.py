"""Truncated multivariate Taylor arithmetic (forward jets).

A jet stores the Taylor coefficients of a smooth scalar function of m
variables around an expansion point, up to a fixed total order K.  All
arithmetic (+, *, /, sqrt, integer powers) is exact on the retained
coefficients: for an analytic f built from these operations, the stored
coefficient of a multi-index alpha equals d^alpha f / alpha! at the point,
to machine precision.

Coefficients live in a dense array indexed by a canonical enumeration of
multi-indices (graded, lexicographic within each total order).  A jet may
carry leading batch axes, so a whole tensor of jets is one ndarray with
the coefficient axis last; elementwise operations broadcast like numpy.

Each jet tracks `valid`, the highest total order at which its coefficients
are still exact.  Differentiation lowers `valid` by one; products and
quotients propagate the minimum.  Reading a coefficient above `valid`
raises, so truncation-order bugs fail loudly instead of returning garbage.
Because the enumeration is graded, a jet exact to order v stores only the
prefix of coefficients up to v, and products skip every convolution pair
above it; deep pipelines stay cheap as derivatives eat into the order.
"""

from __future__ import annotations

import math
from functools import lru_cache
from itertools import combinations_with_replacement

import numpy as np
from scipy.sparse import csr_array

__all__ = [
    "Jet",
    "JetAlgebra",
    "JetDomainError",
    "JetOrderError",
    "algebra",
    "lift",
    "lift_point",
    "partial_derivative",
    "invert_jet_matrix",
]


class JetDomainError(ArithmeticError):
    """Non-smooth operation: division by a zero constant term, sqrt of a
    non-positive constant term, or a singular jet matrix."""


class JetOrderError(ValueError):
    """A coefficient or derivative beyond the exact truncation order was
    requested."""


def _multi_indices(nvars, order):
    """All exponent tuples with sum <= order, graded then lexicographic."""
    out = []
    for total in range(order + 1):
        block = set()
        for combo in combinations_with_replacement(range(nvars), total):
            exps = [0] * nvars
            for v in combo:
                exps[v] += 1
            block.add(tuple(exps))
        out.extend(sorted(block, reverse=True))
    return out


class JetAlgebra:
    """Shared tables for jets in `nvars` variables truncated at `order`.

    Holds the multi-index enumeration, per-variable differentiation maps,
    and the sparse convolution table used by multiplication.  Instances
    are cached via :func:`algebra`; all jets combined in one expression
    must come from the same instance.
    """

    def __init__(self, nvars: int, order: int):
        if nvars < 1:
            raise ValueError(f"need at least one variable, got {nvars}")
        if order < 0:
            raise ValueError(f"order must be non-negative, got {order}")
        self.nvars = nvars
        self.order = order
        self.exponents = _multi_indices(nvars, order)
        self.ncoef = len(self.exponents)
        self.position = {e: i for i, e in enumerate(self.exponents)}
        self.orders = np.array([sum(e) for e in self.exponents])
        # graded enumeration: coefficients of order <= v form a prefix, so a
        # jet exact only to order v stores just the first width(v) entries
        self.widths = [int(np.searchsorted(self.orders, o + 1)) for o in range(order + 1)]
        exp_arr = np.array(self.exponents, dtype=np.int64)
        # factorial of each multi-index, for coefficient <-> partial conversion
        fact = np.ones(self.ncoef)
        for v in range(nvars):
            fact *= np.vectorize(math.factorial)(exp_arr[:, v])
        self.factorials = fact
        self._deriv_maps = {}
        self._mul_table = None

    def width(self, valid: int) -> int:
        """Stored coefficient count for a jet exact to order `valid`."""
        return self.widths[min(valid, self.order)]

    def __repr__(self):
        return f"JetAlgebra(nvars={self.nvars}, order={self.order})"

    def index(self, alpha) -> int:
        alpha = tuple(int(a) for a in alpha)
        if len(alpha) != self.nvars:
            raise ValueError(
                f"multi-index has {len(alpha)} entries, algebra has {self.nvars} variables"
            )
        if any(a < 0 for a in alpha):
            raise ValueError(f"negative exponent in multi-index {alpha}")
        if sum(alpha) > self.order:
            raise JetOrderError(
                f"|alpha|={sum(alpha)} exceeds truncation order {self.order}"
            )
        return self.position[alpha]

    def _derivative_map(self, var):
        """Gather map for d/dx_var: dst coefficient <- src coefficient * factor.
        Entries are dst-ascending, so the prefix up to width(v) serves jets
        exact to order v."""
        if var not in self._deriv_maps:
            src, dst, fac = [], [], []
            for i, e in enumerate(self.exponents):
                if sum(e) >= self.order:
                    continue
                shifted = list(e)
                shifted[var] += 1
                src.append(self.position[tuple(shifted)])
                dst.append(i)
                fac.append(shifted[var])
            self._deriv_maps[var] = (
                np.array(src, dtype=np.intp),
                np.array(dst, dtype=np.intp),
                np.array(fac, dtype=np.float64),
            )
        return self._deriv_maps[var]

    def _multiplication_table(self):
        """Pair arrays sorted by the total order of the target coefficient,
        with cumulative cuts, so a product exact only to order v can skip
        every pair above v."""
        if self._mul_table is None:
            K = self.order
            # integer keys make multi-index addition vectorizable
            base = np.int64(K + 1) ** np.arange(self.nvars, dtype=np.int64)
            keys = np.array(self.exponents, dtype=np.int64) @ base
            sort = np.argsort(keys)
            sorted_keys = keys[sort]
            by_order = [np.nonzero(self.orders == o)[0] for o in range(K + 1)]
            ia_parts, ib_parts, ic_parts = [], [], []
            cuts = [0]
            for total in range(K + 1):
                for o1 in range(total + 1):
                    ga, gb = by_order[o1], by_order[total - o1]
                    ia = np.repeat(ga, len(gb))
                    ib = np.tile(gb, len(ga))
                    targets = sort[np.searchsorted(sorted_keys, keys[ia] + keys[ib])]
                    ia_parts.append(ia)
                    ib_parts.append(ib)
                    ic_parts.append(targets)
                cuts.append(sum(len(part) for part in ia_parts))
            ia = np.concatenate(ia_parts)
            ib = np.concatenate(ib_parts)
            ic = np.concatenate(ic_parts)
            self._mul_table = (ia, ib, ic, cuts, {})
        return self._mul_table

    def _scatter(self, order: int):
        ia, ib, ic, cuts, scatters = self._multiplication_table()
        if order not in scatters:
            cut = cuts[order + 1]
            scatters[order] = csr_array(
                (np.ones(cut), (ic[:cut], np.arange(cut))),
                shape=(self.width(order), cut),
            )
        return scatters[order]

    def convolve(self, a: np.ndarray, b: np.ndarray, order: int) -> np.ndarray:
        """Product of prefix coefficient arrays, exact through `order`;
        leading batch axes broadcast.  Operands must store at least the
        prefix for `order`; the result stores exactly that prefix."""
        order = min(order, self.order)
        ia, ib, _, cuts, _ = self._multiplication_table()
        cut = cuts[order + 1]
        # pair positions lie within the prefix for `order` on both sides
        pa = a[..., ia[:cut]]
        pb = b[..., ib[:cut]]
        prod = pa * pb
        batch = prod.shape[:-1]
        flat = prod.reshape(-1, cut)
        out = (self._scatter(order) @ flat.T).T
        return out.reshape(batch + (self.width(order),))


@lru_cache(maxsize=None)
def algebra(nvars: int, order: int) -> JetAlgebra:
    """Cached JetAlgebra; table construction is amortized across uses."""
    return JetAlgebra(nvars, order)


def _newton_steps(valid):
    # error valuation doubles per step; start exact at order 0
    return 0 if valid <= 0 else math.ceil(math.log2(valid + 1))


class Jet:
    """Taylor coefficients of a scalar (or batch of scalars) to order `valid`."""

    __slots__ = ("algebra", "coeffs", "valid")

    # keep numpy from broadcasting over Jet operands elementwise
    __array_ufunc__ = None

    def __init__(self, algebra: JetAlgebra, coeffs: np.ndarray, valid: int | None = None):
        self.algebra = algebra
        self.coeffs = np.asarray(coeffs, dtype=np.float64)
        self.valid = algebra.order if valid is None else min(valid, algebra.order)
        if self.valid < 0:
            raise JetOrderError("jet has no exact coefficients left")
        if self.coeffs.shape[-1] != algebra.width(self.valid):
            raise ValueError(
                f"coefficient axis has length {self.coeffs.shape[-1]}, expected "
                f"{algebra.width(self.valid)} for order {self.valid}"
            )

    # -- construction -----------------------------------------------------

    @classmethod
    def constant(cls, algebra, value, valid: int | None = None):
        valid = algebra.order if valid is None else min(valid, algebra.order)
        value = np.asarray(value, dtype=np.float64)
        coeffs = np.zeros(value.shape + (algebra.width(valid),))
        coeffs[..., 0] = value
        return cls(algebra, coeffs, valid)

    @classmethod
    def variable(cls, algebra, value: float, var: int):
        if not 0 <= var < algebra.nvars:
            raise IndexError(
                f"variable index {var} out of range for {algebra.nvars} variables"
            )
        coeffs = np.zeros(algebra.ncoef)
        coeffs[0] = value
        if algebra.order >= 1:
            unit = tuple(1 if v == var else 0 for v in range(algebra.nvars))
            coeffs[algebra.position[unit]] = 1.0
        return cls(algebra, coeffs)

    @classmethod
    def stack(cls, jets, axis: int = 0):
        jets = list(jets)
        alg = jets[0].algebra
        if any(j.algebra is not alg for j in jets):
            raise ValueError("cannot stack jets from different algebras")
        valid = min(j.valid for j in jets)
        width = alg.width(valid)
        arrays = [j.coeffs[..., :width] for j in jets]
        shape = np.broadcast_shapes(*(a.shape for a in arrays))
        coeffs = np.stack([np.broadcast_to(a, shape) for a in arrays], axis=axis)
        return cls(alg, coeffs, valid)

    # -- shape handling ----------------------------------------------------

    @property
    def shape(self):
        return self.coeffs.shape[:-1]

    def __getitem__(self, idx):
        if not isinstance(idx, tuple):
            idx = (idx,)
        if sum(1 for i in idx if i is not None) > self.coeffs.ndim - 1:
            raise IndexError("cannot index into the coefficient axis")
        return Jet(self.algebra, self.coeffs[idx], self.valid)

    def sum(self, axis):
        axes = (axis,) if isinstance(axis, int) else tuple(axis)
        nbatch = self.coeffs.ndim - 1
        axes = tuple(a % nbatch for a in axes)
        return Jet(self.algebra, self.coeffs.sum(axis=axes), self.valid)

    def transpose(self, *axes):
        """Permute batch axes; the coefficient axis stays last."""
        if len(axes) == 1 and isinstance(axes[0], (tuple, list)):
            axes = tuple(axes[0])
        nbatch = self.coeffs.ndim - 1
        perm = tuple(a % nbatch for a in axes) + (nbatch,)
        return Jet(self.algebra, self.coeffs.transpose(perm), self.valid)

    def trace(self, axis1: int = 0, axis2: int = 1):
        """Sum over a pair of batch axes' diagonal."""
        nbatch = self.coeffs.ndim - 1
        return Jet(
            self.algebra,
            np.trace(self.coeffs, axis1=axis1 % nbatch, axis2=axis2 % nbatch),
            self.valid,
        )

    def reshape(self, *batch_shape):
        if len(batch_shape) == 1 and isinstance(batch_shape[0], tuple):
            batch_shape = batch_shape[0]
        return Jet(
            self.algebra,
            self.coeffs.reshape(tuple(batch_shape) + (self.coeffs.shape[-1],)),
            self.valid,
        )

    # -- coefficient access --------------------------------------------------

    @property
    def value(self):
        """Plain value at the expansion point (scalar or batch array)."""
        v = self.coeffs[..., 0]
        return float(v) if v.ndim == 0 else v

    def coefficient(self, alpha):
        """Taylor coefficient of alpha, i.e. d^alpha f / alpha!."""
        if sum(alpha) > self.valid:
            raise JetOrderError(
                f"coefficient at |alpha|={sum(alpha)} requested, jet exact only to {self.valid}"
            )
        c = self.coeffs[..., self.algebra.index(alpha)]
        return float(c) if c.ndim == 0 else c

    def partial(self, alpha):
        """Partial derivative d^alpha f at the expansion point."""
        pos = self.algebra.index(tuple(alpha))
        if sum(alpha) > self.valid:
            raise JetOrderError(
                f"partial of order {sum(alpha)} requested, jet exact only to {self.valid}"
            )
        c = self.coeffs[..., pos] * self.algebra.factorials[pos]
        return float(c) if c.ndim == 0 else c

    def deriv(self, var: int):
        """Jet of the first partial with respect to variable `var`."""
        if self.valid < 1:
            raise JetOrderError("cannot differentiate: jet exact only to order 0")
        src, dst, fac = self.algebra._derivative_map(var)
        width = self.algebra.width(self.valid - 1)
        cut = int(np.searchsorted(dst, width))  # dst is ascending
        out = np.zeros(self.shape + (width,))
        out[..., dst[:cut]] = self.coeffs[..., src[:cut]] * fac[:cut]
        return Jet(self.algebra, out, self.valid - 1)

    # -- arithmetic ---------------------------------------------------------

    def _coerce(self, other):
        if isinstance(other, Jet):
            if other.algebra is not self.algebra:
                raise ValueError("jets from different algebras")
            return other
        if isinstance(other, (int, float, np.integer, np.floating, np.ndarray)):
            return Jet.constant(self.algebra, other)
        return None

    def _aligned(self, other):
        valid = min(self.valid, other.valid)
        width = self.algebra.width(valid)
        return self.coeffs[..., :width], other.coeffs[..., :width], valid

    def __add__(self, other):
        o = self._coerce(other)
        if o is None:
            return NotImplemented
        a, b, valid = self._aligned(o)
        return Jet(self.algebra, a + b, valid)

    __radd__ = __add__

    def __sub__(self, other):
        o = self._coerce(other)
        if o is None:
            return NotImplemented
        a, b, valid = self._aligned(o)
        return Jet(self.algebra, a - b, valid)

    def __rsub__(self, other):
        o = self._coerce(other)
        if o is None:
            return NotImplemented
        a, b, valid = self._aligned(o)
        return Jet(self.algebra, b - a, valid)

    def __neg__(self):
        return Jet(self.algebra, -self.coeffs, self.valid)

    def __mul__(self, other):
        if isinstance(other, (int, float, np.integer, np.floating)):
            return Jet(self.algebra, self.coeffs * float(other), self.valid)
        if isinstance(other, np.ndarray):
            return Jet(self.algebra, self.coeffs * other[..., None], self.valid)
        o = self._coerce(other)
        if o is None:
            return NotImplemented
        valid = min(self.valid, o.valid)
        return Jet(
            self.algebra,
            self.algebra.convolve(self.coeffs, o.coeffs, order=valid),
            valid,
        )

    __rmul__ = __mul__

    def __truediv__(self, other):
        if isinstance(other, (int, float, np.integer, np.floating)):
            return Jet(self.algebra, self.coeffs / float(other), self.valid)
        o = self._coerce(other)
        if o is None:
            return NotImplemented
        return self * o.reciprocal()

    def __rtruediv__(self, other):
        o = self._coerce(other)
        if o is None:
            return NotImplemented
        return o * self.reciprocal()

    def __pow__(self, exponent):
        if not isinstance(exponent, (int, np.integer)):
            return NotImplemented
        k = int(exponent)
        if k < 0:
            return self.reciprocal() ** (-k)
        result = Jet.constant(
            self.algebra, np.ones(self.shape) if self.shape else 1.0, self.valid
        )
        base = self
        while k:
            if k & 1:
                result = result * base
            base = base * base if k > 1 else base
            k >>= 1
        return result

    def reciprocal(self):
        c0 = self.coeffs[..., 0]
        if np.any(c0 == 0.0) or not np.all(np.isfinite(1.0 / c0)):
            raise JetDomainError("division by a jet with zero constant term")
        r = Jet.constant(self.algebra, 1.0 / c0, self.valid)
        for _ in range(_newton_steps(self.valid)):
            r = r * (2.0 - self * r)
        return r

    def sqrt(self):
        c0 = self.coeffs[..., 0]
        if np.any(c0 <= 0.0):
            raise JetDomainError("sqrt of a jet with non-positive constant term")
        r = Jet.constant(self.algebra, 1.0 / np.sqrt(c0), self.valid)
        for _ in range(_newton_steps(self.valid)):
            r = r * (3.0 - self * (r * r)) * 0.5
        return self * r

    def __repr__(self):
        return (
            f"Jet(shape={self.shape}, value={self.value!r}, valid={self.valid}, "
            f"algebra={self.algebra!r})"
        )


# -- module-level operations -------------------------------------------------


def lift_point(x, y, order: int) -> tuple[list[Jet], list[Jet]]:
    """Coordinate jets for a base point x and direction y, sharing one algebra."""
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    n = len(x)
    alg = algebra(2 * n, order)
    xs = [Jet.variable(alg, x[i], i) for i in range(n)]
    ys = [Jet.variable(alg, y[i], n + i) for i in range(n)]
    return xs, ys


def lift(point, var: int, order: int) -> Jet:
    """Jet of the coordinate function `var` (0..2n-1; x-slots first, then y)."""
    values = np.concatenate([np.asarray(point.x, float), np.asarray(point.y, float)])
    return Jet.variable(algebra(len(values), order), values[var], var)


def partial_derivative(field, point, alpha, order: int | None = None) -> float:
    """Exact partial d^alpha of a scalar field on (x, y) at a point.

    `field` is a callable (xs, ys) -> scalar that accepts jet arguments;
    `alpha` is a multi-index over the 2n variables, x-slots first.
    """
    alpha = tuple(int(a) for a in alpha)
    total = sum(alpha)
    K = total if order is None else order
    if total > K:
        raise JetOrderError(f"|alpha|={total} exceeds requested order {K}")
    xs, ys = lift_point(point.x, point.y, K)
    jet = field(xs, ys)
    return jet.partial(alpha)


def invert_jet_matrix(m: Jet) -> Jet:
    """Inverse of an (n, n) jet matrix by Gauss-Jordan with value pivoting."""
    n = m.shape[0]
    if m.shape != (n, n):
        raise ValueError(f"expected a square jet matrix, got shape {m.shape}")
    rows = [[m[i, j] for j in range(n)] for i in range(n)]
    eye = [
        [Jet.constant(m.algebra, 1.0 if i == j else 0.0) for j in range(n)]
        for i in range(n)
    ]
    for col in range(n):
        pivot = max(range(col, n), key=lambda r: abs(rows[r][col].value))
        if rows[pivot][col].value == 0.0:
            raise JetDomainError("singular jet matrix")
        rows[col], rows[pivot] = rows[pivot], rows[col]
        eye[col], eye[pivot] = eye[pivot], eye[col]
        inv_p = rows[col][col].reciprocal()
        rows[col] = [inv_p * e for e in rows[col]]
        eye[col] = [inv_p * e for e in eye[col]]
        for r in range(n):
            if r == col:
                continue
            factor = rows[r][col]
            if np.all(factor.coeffs == 0.0):
                continue
            rows[r] = [a - factor * b for a, b in zip(rows[r], rows[col])]
            eye[r] = [a - factor * b for a, b in zip(eye[r], eye[col])]
    return Jet.stack([Jet.stack(r, axis=0) for r in eye], axis=0)

"""Finsler metric definitions: built-in families, expression-defined
metrics, point/domain validation, and sampling.

A MetricSpec is declarative: the kind plus coefficient expressions.  The
same expressions evaluate over floats (for values) and over jets (for
derivatives), so there is a single definition of every metric.

Built-in families (any dimension n >= 2):

    euclidean       F = |y|
    conformal       F = u(x) |y|,  u = 1 + 0.3 x1 - 0.2 x2
    sphere          a_ij = delta_ij / (1 + |x|^2/4)^2   (constant curvature +1)
    randers         a = delta, b = (0.3 + 0.15 x2, -0.2 + 0.1 x1, 0, ...)
                    (non-closed 1-form; |b| <= 0.55 on the unit box)
    randers-closed  a = delta, b = grad(0.3 x1 + 0.1 x1 x2)
    funk            the projectively flat metric on the unit ball
    quartic         F = (sum y_i^4)^(1/4)  (x-independent, non-Riemannian)
"""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import expr as ex
from .jets import Jet, JetDomainError, lift_point
from .tensors import LOWER, Tensor

try:
    import tomllib  # Python >= 3.11
except ModuleNotFoundError:  # pragma: no cover
    import tomli as tomllib

__all__ = [
    "EvalPoint",
    "MetricSpec",
    "MetricDefinitionError",
    "DomainError",
    "SamplingError",
    "BUILTIN_METRICS",
    "builtin_metric",
    "make_metric",
    "load_metric_file",
    "evaluate_F",
    "fundamental_tensor",
    "angular_metric",
    "sample_point",
    "sample_points",
    "positive_definite",
]

_Y_FLOOR = 1e-12
_KINDS = ("euclidean", "riemannian", "randers", "funk", "custom")


class MetricDefinitionError(ValueError):
    """The metric specification itself is invalid (rejected at validation)."""


class DomainError(ArithmeticError):
    """An evaluation point violates the metric's domain."""


class SamplingError(DomainError):
    """Rejection sampling failed to find a valid point."""


@dataclass(frozen=True)
class EvalPoint:
    """Base point x and non-zero direction y in a single coordinate chart."""

    x: np.ndarray
    y: np.ndarray

    def __post_init__(self):
        x = np.atleast_1d(np.asarray(self.x, dtype=np.float64))
        y = np.atleast_1d(np.asarray(self.y, dtype=np.float64))
        object.__setattr__(self, "x", x)
        object.__setattr__(self, "y", y)
        if x.shape != y.shape or x.ndim != 1:
            raise ValueError(f"x and y must be vectors of equal length, got {x.shape} and {y.shape}")
        if np.linalg.norm(y) <= _Y_FLOOR:
            raise DomainError("direction y is (numerically) zero")

    @property
    def n(self) -> int:
        return len(self.x)

    def __eq__(self, other):
        return (
            isinstance(other, EvalPoint)
            and np.array_equal(self.x, other.x)
            and np.array_equal(self.y, other.y)
        )

    def __repr__(self):
        return f"EvalPoint(x={self.x.tolist()}, y={self.y.tolist()})"


def positive_definite(mat: np.ndarray, scale: float = 1e-10) -> bool:
    """Symmetric-factorization test with pivot threshold scale * max diagonal."""
    a = np.array(mat, dtype=np.float64)
    n = a.shape[0]
    threshold = scale * max(np.max(np.diag(a)), 0.0)
    for k in range(n):
        pivot = a[k, k]
        if pivot <= threshold:
            return False
        a[k + 1 :, k + 1 :] -= np.outer(a[k + 1 :, k], a[k + 1 :, k]) / pivot
    return True


@dataclass(frozen=True)
class MetricSpec:
    """Declarative Finsler metric: kind, dimension, coefficient expressions.

    Validation happens in :func:`make_metric` / the file loader, not here;
    instances are assumed well-formed once constructed through those paths.
    """

    kind: str
    dim: int
    name: str = "custom"
    a: tuple | None = None  # (n, n) expressions a_ij(x)
    b: tuple | None = None  # (n,) expressions b_i(x)
    F_expr: object | None = None  # expression for custom metrics
    domain_radius: float | None = None
    meta: dict = field(default_factory=dict, compare=False)

    # -- evaluation over floats or jets ------------------------------------

    def eval_F(self, xs, ys):
        """F(x, y); xs, ys are sequences of floats or jets."""
        if self.kind == "euclidean":
            return _sqrt(sum(v * v for v in ys))
        if self.kind == "riemannian":
            return _sqrt(self._alpha2(xs, ys))
        if self.kind == "randers":
            alpha = _sqrt(self._alpha2(xs, ys))
            beta = sum(
                ex.evaluate(bi, xs, ys) * yi for bi, yi in zip(self.b, ys)
            )
            return alpha + beta
        if self.kind == "funk":
            x2 = sum(v * v for v in xs)
            y2 = sum(v * v for v in ys)
            xy = sum(u * v for u, v in zip(xs, ys))
            root = _sqrt(y2 - (x2 * y2 - xy * xy))
            return (root + xy) / (1.0 - x2)
        if self.kind == "custom":
            return ex.evaluate(self.F_expr, xs, ys)
        raise MetricDefinitionError(f"unknown metric kind {self.kind!r}")

    def eval_F2(self, xs, ys):
        """F^2; avoids the sqrt entirely for quadratic metrics."""
        if self.kind == "euclidean":
            return sum(v * v for v in ys)
        if self.kind == "riemannian":
            return self._alpha2(xs, ys)
        F = self.eval_F(xs, ys)
        return F * F

    def _alpha2(self, xs, ys):
        # a is symmetric and typically sparse with repeated entries: fold the
        # off-diagonal factor of 2 and evaluate each distinct expression once
        zero = ex.Num(0.0)
        cache = {}
        total = 0.0
        for i in range(self.dim):
            for j in range(i, self.dim):
                e = self.a[i][j]
                if e == zero:
                    continue
                if e not in cache:
                    cache[e] = ex.evaluate(e, xs, ys)
                factor = 1.0 if i == j else 2.0
                total = total + cache[e] * (ys[i] * ys[j]) * factor
        return total

    # -- pointwise domain checks -------------------------------------------

    def a_matrix(self, x: np.ndarray) -> np.ndarray:
        xs = list(np.asarray(x, dtype=np.float64))
        ys = [0.0] * self.dim
        return np.array(
            [[ex.evaluate(self.a[i][j], xs, ys) for j in range(self.dim)] for i in range(self.dim)]
        )

    def b_vector(self, x: np.ndarray) -> np.ndarray:
        xs = list(np.asarray(x, dtype=np.float64))
        ys = [0.0] * self.dim
        return np.array([ex.evaluate(bi, xs, ys) for bi in self.b])

    def randers_norm(self, x: np.ndarray) -> float:
        """b(x) = sqrt(a^{ij} b_i b_j); must stay below 1."""
        a = self.a_matrix(x)
        b = self.b_vector(x)
        return float(np.sqrt(b @ np.linalg.solve(a, b)))

    def validate_point(self, p: EvalPoint):
        """Raise DomainError if p is outside this metric's domain."""
        if p.n != self.dim:
            raise DomainError(f"point has dimension {p.n}, metric has {self.dim}")
        if self.domain_radius is not None:
            r = float(np.linalg.norm(p.x))
            if r >= self.domain_radius:
                raise DomainError(
                    f"|x| = {r:.6g} is outside the open ball of radius {self.domain_radius}"
                )
        if self.kind in ("riemannian", "randers"):
            a = self.a_matrix(p.x)
            if not positive_definite(a):
                raise DomainError(f"a_ij(x) is not positive definite at x={p.x.tolist()}")
        if self.kind == "randers":
            bn = self.randers_norm(p.x)
            if bn >= 1.0:
                raise DomainError(f"Randers norm b(x) = {bn:.6g} >= 1 at x={p.x.tolist()}")

    def point_ok(self, p: EvalPoint) -> bool:
        try:
            self.validate_point(p)
        except DomainError:
            return False
        return True


def _sqrt(v):
    return v.sqrt() if isinstance(v, Jet) else float(np.sqrt(v))


# -- construction and validation ------------------------------------------------


def _as_expr(e):
    return ex.parse_expression(e) if isinstance(e, str) else e


def _validation_positions(spec: MetricSpec) -> list[np.ndarray]:
    """Deterministic probe positions inside the sampling domain."""
    rng = np.random.default_rng(0xF17)
    pts = [np.zeros(spec.dim)]
    for _ in range(24):
        pts.append(_sample_x(spec, rng))
    return pts


def make_metric(
    kind: str,
    dim: int,
    name: str | None = None,
    a=None,
    b=None,
    F=None,
    domain_radius: float | None = None,
) -> MetricSpec:
    """Build and validate a MetricSpec; raises MetricDefinitionError early."""
    if kind not in _KINDS:
        raise MetricDefinitionError(f"unknown metric kind {kind!r}, expected one of {_KINDS}")
    if dim < 2:
        raise MetricDefinitionError("dimension must be at least 2")

    if kind in ("riemannian", "randers"):
        if a is None:
            raise MetricDefinitionError(f"{kind} metric needs the coefficient matrix a")
        a = tuple(tuple(_as_expr(e) for e in row) for row in a)
        if len(a) != dim or any(len(row) != dim for row in a):
            raise MetricDefinitionError(f"a must be an {dim}x{dim} matrix of expressions")
        _require_x_only(a, "a")
    elif a is not None:
        raise MetricDefinitionError(f"{kind} metric does not take a coefficient matrix")

    if kind == "randers":
        if b is None:
            raise MetricDefinitionError("randers metric needs the 1-form coefficients b")
        b = tuple(_as_expr(e) for e in b)
        if len(b) != dim:
            raise MetricDefinitionError(f"b must have {dim} entries")
        _require_x_only([b], "b")
    elif b is not None:
        raise MetricDefinitionError(f"{kind} metric does not take 1-form coefficients")

    if kind == "custom":
        if F is None:
            raise MetricDefinitionError("custom metric needs the expression F")
        F = _as_expr(F)
        _check_var_range(F, dim, "F")
    elif F is not None:
        raise MetricDefinitionError(f"{kind} metric does not take an F expression")

    if kind == "funk":
        domain_radius = 1.0

    spec = MetricSpec(
        kind=kind,
        dim=dim,
        name=name or kind,
        a=a,
        b=b,
        F_expr=F,
        domain_radius=domain_radius,
    )
    _validate_spec(spec)
    return spec


def _require_x_only(rows, label):
    for row in rows:
        for e in row:
            used = ex.variables_used(e)
            if "y" in used:
                raise MetricDefinitionError(
                    f"coefficient expressions in {label} may depend on x only, "
                    f"got '{ex.to_text(e)}'"
                )


def _check_var_range(e, dim, label):
    top = ex.max_var_index(e)
    if top > dim:
        raise MetricDefinitionError(
            f"{label} references coordinate index {top}, but dimension is {dim}"
        )


def _validate_spec(spec: MetricSpec):
    positions = _validation_positions(spec)
    if spec.kind in ("riemannian", "randers"):
        for e_row in spec.a:
            for e in e_row:
                _check_var_range(e, spec.dim, "a")
        for x in positions:
            a = spec.a_matrix(x)
            if not np.allclose(a, a.T, rtol=0.0, atol=1e-12):
                raise MetricDefinitionError(f"a_ij is not symmetric at x={x.tolist()}")
            if not positive_definite(a):
                raise MetricDefinitionError(
                    f"a_ij is not positive definite at x={x.tolist()}"
                )
    if spec.kind == "randers":
        for e in spec.b:
            _check_var_range(e, spec.dim, "b")
        for x in positions:
            bn = spec.randers_norm(x)
            if bn >= 1.0:
                raise MetricDefinitionError(
                    f"Randers norm b(x) = {bn:.6g} >= 1 at x={x.tolist()}"
                )
    if spec.kind == "custom":
        _validate_homogeneity(spec, positions)


def _validate_homogeneity(spec: MetricSpec, positions, tol: float = 1e-8):
    rng = np.random.default_rng(0xF18)
    for x in positions[:8]:
        y = rng.standard_normal(spec.dim)
        y /= np.linalg.norm(y)
        try:
            base = spec.eval_F(list(x), list(y))
        except (ex.EvalDomainError, JetDomainError, ZeroDivisionError):
            continue  # metric may be defined only on a sub-cone of directions
        for t in (0.5, 2.0, 3.0):
            scaled = spec.eval_F(list(x), list(t * y))
            if abs(scaled - t * base) > tol * max(1.0, abs(t * base)):
                raise MetricDefinitionError(
                    f"F is not positively 1-homogeneous in y: F(x,{t}y) = {scaled:.12g} "
                    f"but {t}*F(x,y) = {t * base:.12g}"
                )


# -- built-in metric registry ---------------------------------------------------


def _delta_matrix(dim):
    return [["1" if i == j else "0" for j in range(dim)] for i in range(dim)]


def _builtin_conformal(dim):
    u2 = "(1 + 0.3*x1 - 0.2*x2)^2"
    a = [[u2 if i == j else "0" for j in range(dim)] for i in range(dim)]
    return make_metric("riemannian", dim, name="conformal", a=a)


def _builtin_sphere(dim):
    s = "1/(1 + norm2(x)/4)^2"
    a = [[s if i == j else "0" for j in range(dim)] for i in range(dim)]
    return make_metric("riemannian", dim, name="sphere", a=a)


def _builtin_randers(dim):
    b = ["0"] * dim
    b[0] = "0.3 + 0.15*x2"
    b[1] = "-0.2 + 0.1*x1"
    return make_metric("randers", dim, name="randers", a=_delta_matrix(dim), b=b)


def _builtin_randers_closed(dim):
    # b = grad(0.3 x1 + 0.1 x1 x2), a closed 1-form
    b = ["0"] * dim
    b[0] = "0.3 + 0.1*x2"
    b[1] = "0.1*x1"
    return make_metric("randers", dim, name="randers-closed", a=_delta_matrix(dim), b=b)


def _builtin_quartic(dim):
    inner = " + ".join(f"y{i + 1}^4" for i in range(dim))
    return make_metric("custom", dim, name="quartic", F=f"sqrt(sqrt({inner}))")


_BUILTINS = {
    "euclidean": lambda dim: make_metric("euclidean", dim, name="euclidean"),
    "conformal": _builtin_conformal,
    "sphere": _builtin_sphere,
    "randers": _builtin_randers,
    "randers-closed": _builtin_randers_closed,
    "funk": lambda dim: make_metric("funk", dim, name="funk"),
    "quartic": _builtin_quartic,
}

BUILTIN_METRICS = tuple(_BUILTINS)


def builtin_metric(name: str, dim: int) -> MetricSpec:
    try:
        factory = _BUILTINS[name]
    except KeyError:
        raise MetricDefinitionError(
            f"unknown built-in metric {name!r}; available: {', '.join(BUILTIN_METRICS)}"
        ) from None
    return factory(dim)


def load_metric_file(path) -> MetricSpec:
    """Load a metric spec from a TOML document.

    Recognized keys: kind, dimension, a (matrix of expression strings),
    b (vector of expression strings), F (string), domain_radius, name.
    """
    path = Path(path)
    if not path.is_file():
        raise MetricDefinitionError(
            f"{path} is neither a built-in metric name "
            f"(available: {', '.join(BUILTIN_METRICS)}) nor a metric file"
        )
    try:
        with open(path, "rb") as fh:
            doc = tomllib.load(fh)
    except tomllib.TOMLDecodeError as err:
        raise MetricDefinitionError(f"cannot parse {path}: {err}") from err
    known = {"kind", "dimension", "a", "b", "F", "domain_radius", "name"}
    unknown = set(doc) - known
    if unknown:
        raise MetricDefinitionError(f"unknown keys in {path}: {sorted(unknown)}")
    try:
        kind = doc["kind"]
        dim = int(doc["dimension"])
    except KeyError as err:
        raise MetricDefinitionError(f"{path} is missing required key {err}") from None
    try:
        return make_metric(
            kind,
            dim,
            name=doc.get("name", path.stem),
            a=doc.get("a"),
            b=doc.get("b"),
            F=doc.get("F"),
            domain_radius=doc.get("domain_radius"),
        )
    except ex.ParseError as err:
        raise MetricDefinitionError(f"bad expression in {path}: {err}") from err


# -- point operations ------------------------------------------------------------


def evaluate_F(spec: MetricSpec, p: EvalPoint) -> float:
    """F at a validated point; raises DomainError on violations."""
    spec.validate_point(p)
    try:
        value = spec.eval_F(list(p.x), list(p.y))
    except (ex.EvalDomainError, JetDomainError) as err:
        raise DomainError(str(err)) from err
    if not np.isfinite(value) or value <= 0.0:
        raise DomainError(f"F = {value!r} is not positive at {p!r}")
    return float(value)


def fundamental_tensor(spec: MetricSpec, p: EvalPoint) -> Tensor:
    """g_ij = half the y-Hessian of F^2 (lower, lower)."""
    spec.validate_point(p)
    n = p.n
    xs, ys = lift_point(p.x, p.y, 2)
    try:
        f2 = spec.eval_F2(xs, ys)
    except (ex.EvalDomainError, JetDomainError) as err:
        raise DomainError(str(err)) from err
    g = np.empty((n, n))
    for i in range(n):
        for j in range(i, n):
            alpha = [0] * (2 * n)
            alpha[n + i] += 1
            alpha[n + j] += 1
            g[i, j] = g[j, i] = 0.5 * f2.partial(alpha)
    if not positive_definite(g):
        raise DomainError(
            f"fundamental tensor is not positive definite at {p!r}; "
            "the spec is not Finsler there"
        )
    return Tensor(g, (LOWER, LOWER), p)


def angular_metric(spec: MetricSpec, p: EvalPoint) -> Tensor:
    """h_ij = g_ij - y_i y_j / F^2 (lower, lower); annihilates y."""
    g = fundamental_tensor(spec, p)
    y_low = g.entries @ p.y
    f2 = float(p.y @ y_low)
    return Tensor(g.entries - np.outer(y_low, y_low) / f2, (LOWER, LOWER), p)


# -- sampling ---------------------------------------------------------------------


def _sample_x(spec: MetricSpec, rng) -> np.ndarray:
    if spec.domain_radius is not None:
        # uniform in the ball of 0.9 * radius, clear of the boundary
        direction = rng.standard_normal(spec.dim)
        direction /= np.linalg.norm(direction)
        r = 0.9 * spec.domain_radius * rng.uniform() ** (1.0 / spec.dim)
        return r * direction
    return rng.uniform(-1.0, 1.0, size=spec.dim)


def _sample_y(dim, rng) -> np.ndarray:
    y = rng.standard_normal(dim)
    y /= np.linalg.norm(y)
    return y * rng.uniform(0.5, 2.0)


def sample_point(spec: MetricSpec, rng, tries: int = 100) -> EvalPoint:
    """One valid sample; positions in the declared domain, directions on the
    sphere scaled by a factor in [0.5, 2].  Rejects points where the metric
    degenerates (e.g. non-convex directions of a custom metric)."""
    for _ in range(tries):
        x = _sample_x(spec, rng)
        y = _sample_y(spec.dim, rng)
        p = EvalPoint(x, y)
        if not spec.point_ok(p):
            continue
        try:
            fundamental_tensor(spec, p)
        except (DomainError, JetDomainError, ex.EvalDomainError):
            continue
        return p
    raise SamplingError(
        f"no valid sample for metric {spec.name!r} after {tries} tries"
    )


def sample_points(spec: MetricSpec, count: int, seed: int) -> list[EvalPoint]:
    rng = np.random.default_rng(seed)
    return [sample_point(spec, rng) for _ in range(count)]

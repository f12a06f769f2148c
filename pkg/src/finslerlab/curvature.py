"""Curvature operators of a Finsler metric at a point.

Everything is computed from a single jet expansion of F^2 at the chosen
(x, y): the fundamental and angular forms, Cartan/Matsumoto torsions, the
geodesic spray with its nonlinear and linear connections, Berwald and
Douglas curvatures, Landsberg and stretch curvatures, the Riemann map and
flag curvature, and the trace quantity obtained by differentiating the
mean Berwald form along geodesics.

Horizontal (Berwald-connection) derivatives of a computed tensor are taken
by differentiating the defining formula through the jet engine: the tensor
components are jets of the underlying field on (x, y), so one extra jet
order supplies d/dx and d/dy, and the connection corrections are assembled
algebraically.  Finite differencing of tensors at displaced points is used
nowhere here (the test suite keeps an independent oracle of that kind).

The truncation order needed grows with the derivative depth of the
quantity: values of all tensors need order 6; residuals that differentiate
the curvatures once more (the Bianchi identities, the projected rate of
change of the Douglas tensor) need order 7.  Each accessor states its
minimum; the context raises if constructed too shallow.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property, lru_cache

import numpy as np

from .jets import Jet, JetDomainError, JetOrderError, invert_jet_matrix, lift_point
from .metrics import DomainError, EvalPoint, MetricSpec, positive_definite
from . import expr as ex
from .tensors import LOWER, UPPER, Tensor

__all__ = [
    "CurvatureContext",
    "SprayData",
    "Trajectory",
    "DegenerateFlagError",
    "DEFAULT_ORDER",
    "HORIZONTAL_ORDER",
    "spray",
    "spray_values",
    "fundamental",
    "angular",
    "cartan",
    "mean_cartan",
    "matsumoto",
    "berwald",
    "mean_berwald",
    "douglas",
    "landsberg",
    "mean_landsberg",
    "riemann",
    "hh_curvature",
    "flag_curvature",
    "h_curvature",
    "stretch",
    "horizontal_derivative",
    "geodesic",
]

DEFAULT_ORDER = 6
# one extra order for residuals that differentiate a curvature tensor again
HORIZONTAL_ORDER = 7

_COND_LIMIT = 1e12


class DegenerateFlagError(ValueError):
    """Flag curvature requested for u (numerically) parallel to y."""


@dataclass(frozen=True)
class SprayData:
    """Spray coefficients with the induced connections at one point."""

    G: np.ndarray  # (n,)      spray coefficients
    N: np.ndarray  # (n, n)    nonlinear connection dG^i/dy^j
    Gamma: np.ndarray  # (n, n, n) linear (Berwald) connection d^2 G^i / dy^j dy^k
    point: EvalPoint


class CurvatureContext:
    """All curvature data of `spec` at `point`, sharing one jet expansion.

    Properties are lazy and cached; a context is immutable and cheap to
    discard.  `order` is the jet truncation order: 6 covers every tensor
    value, 7 additionally covers the identities that differentiate the
    curvature tensors once more.
    """

    def __init__(self, spec: MetricSpec, point: EvalPoint, order: int = DEFAULT_ORDER):
        spec.validate_point(point)
        self.spec = spec
        self.point = point
        self.n = point.n
        self.order = order
        self.xs, self.ys = lift_point(point.x, point.y, order)
        self.xjet = Jet.stack(self.xs)
        self.yjet = Jet.stack(self.ys)
        try:
            self.F2 = spec.eval_F2(self.xs, self.ys)
        except (ex.EvalDomainError, JetDomainError) as err:
            raise DomainError(str(err)) from err
        if not np.isfinite(self.F2.value) or self.F2.value <= 0.0:
            raise DomainError(f"F^2 = {self.F2.value!r} is not positive at {point!r}")

    # -- index bookkeeping --------------------------------------------------

    def _dx(self, jet: Jet, k: int) -> Jet:
        return jet.deriv(k)

    def _dy(self, jet: Jet, k: int) -> Jet:
        return jet.deriv(self.n + k)

    def tensor(self, jet: Jet, valence: tuple[str, ...]) -> Tensor:
        return Tensor(np.asarray(jet.value, dtype=np.float64), valence, self.point)

    # -- metric layer ---------------------------------------------------------

    @cached_property
    def F(self) -> Jet:
        return self.F2.sqrt()

    @cached_property
    def F2_inv(self) -> Jet:
        return self.F2.reciprocal()

    @cached_property
    def g(self) -> Jet:
        """g_ij = half the y-Hessian of F^2; validated positive definite."""
        n = self.n
        dy = [self._dy(self.F2, i) for i in range(n)]
        rows = [Jet.stack([self._dy(dy[i], j) for j in range(n)]) for i in range(n)]
        g = Jet.stack(rows) * 0.5
        gv = np.asarray(g.value)
        if not positive_definite(gv):
            raise DomainError(
                f"fundamental tensor is not positive definite at {self.point!r}"
            )
        if np.linalg.cond(gv) > _COND_LIMIT:
            raise DomainError(f"fundamental tensor is degenerate at {self.point!r}")
        return g

    @cached_property
    def g_inv(self) -> Jet:
        return invert_jet_matrix(self.g)

    @cached_property
    def y_low(self) -> Jet:
        """y_i = g_ij y^j."""
        return (self.g * self.yjet[None, :]).sum(1)

    @cached_property
    def h_low(self) -> Jet:
        """Angular metric h_ij = g_ij - y_i y_j / F^2."""
        return self.g - self.y_low[:, None] * self.y_low[None, :] * self.F2_inv

    @cached_property
    def h_mix(self) -> Jet:
        """h^i_j = delta^i_j - y^i y_j / F^2."""
        delta = Jet.constant(self.F2.algebra, np.eye(self.n))
        return delta - self.yjet[:, None] * self.y_low[None, :] * self.F2_inv

    # -- torsions ---------------------------------------------------------------

    @cached_property
    def cartan(self) -> Jet:
        """C_ijk = quarter of the third y-derivative of F^2; totally symmetric."""
        n = self.n
        dy = [self._dy(self.F2, i) for i in range(n)]
        dyy = [[self._dy(dy[i], j) for j in range(n)] for i in range(n)]
        rows = [
            Jet.stack([Jet.stack([self._dy(dyy[i][j], k) for k in range(n)]) for j in range(n)])
            for i in range(n)
        ]
        return Jet.stack(rows) * 0.25

    @cached_property
    def mean_cartan(self) -> Jet:
        """I_i = g^{jk} C_ijk."""
        return (self.g_inv[None, :, :] * self.cartan).sum((1, 2))

    @cached_property
    def matsumoto(self) -> Jet:
        """M_ijk = C_ijk - (I_i h_jk + I_j h_ik + I_k h_ij) / (n+1)."""
        I, h = self.mean_cartan, self.h_low
        pads = (
            I[:, None, None] * h[None, :, :]
            + I[None, :, None] * h[:, None, :]
            + I[None, None, :] * h[:, :, None]
        )
        return self.cartan - pads * (1.0 / (self.n + 1))

    # -- spray and connections ----------------------------------------------------

    @cached_property
    def G(self) -> Jet:
        """Spray coefficients G^i = g^{il} ([F^2]_{x^k y^l} y^k - [F^2]_{x^l}) / 4."""
        n = self.n
        fx = [self._dx(self.F2, k) for k in range(n)]
        mixed = Jet.stack(
            [Jet.stack([self._dy(fx[k], l) for l in range(n)]) for k in range(n)]
        )  # [k, l]
        contracted = (mixed * self.yjet[:, None]).sum(0)  # (l,)
        rhs = contracted - Jet.stack(fx)
        return (self.g_inv * rhs[None, :]).sum(1) * 0.25

    @cached_property
    def N(self) -> Jet:
        """Nonlinear connection N^i_j = dG^i/dy^j."""
        return Jet.stack([self._dy(self.G, j) for j in range(self.n)], axis=1)

    @cached_property
    def Gamma(self) -> Jet:
        """Berwald connection Gamma^i_jk = d^2 G^i / dy^j dy^k."""
        return Jet.stack([self._dy(self.N, k) for k in range(self.n)], axis=2)

    def spray_data(self) -> SprayData:
        return SprayData(
            G=np.asarray(self.G.value, dtype=np.float64),
            N=np.asarray(self.N.value, dtype=np.float64),
            Gamma=np.asarray(self.Gamma.value, dtype=np.float64),
            point=self.point,
        )

    # -- Berwald-type curvatures -----------------------------------------------------

    @cached_property
    def berwald(self) -> Jet:
        """B^i_jkl = third y-derivative of G^i."""
        return Jet.stack([self._dy(self.Gamma, l) for l in range(self.n)], axis=3)

    @cached_property
    def mean_berwald(self) -> Jet:
        """E_jk = half the (i, l)-trace of the Berwald curvature."""
        return self.berwald.trace(0, 3) * 0.5

    @cached_property
    def douglas(self) -> Jet:
        """Trace-free projective part: third y-derivative of
        G^i - (dG^m/dy^m) y^i / (n+1)."""
        P = self.G - self.N.trace(0, 1) * self.yjet * (1.0 / (self.n + 1))
        D = P
        for slot in range(3):
            D = Jet.stack([self._dy(D, l) for l in range(self.n)], axis=slot + 1)
        return D

    # -- horizontal differentiation ----------------------------------------------------

    def _slot_contract(self, conn: Jet, T: Jet, slot: int) -> Jet:
        """Contract conn[a, p, (m)] with slot `slot` of T over p.

        conn has shape (n, n) or (n, n, n); the result carries `a` at the
        contracted slot and, for rank-3 conn, a trailing m axis.
        """
        rank = len(T.shape)
        perm = (slot,) + tuple(i for i in range(rank) if i != slot)
        Ts = T.transpose(perm)  # (p, rest...)
        rest = rank - 1
        tail = conn.shape[2:]  # () for N-type, (n,) for Gamma-type
        A = conn.transpose((1, 0) + tuple(range(2, 2 + len(tail))))  # (p, a, [m])
        A = A.reshape((self.n, self.n) + (1,) * rest + tail)
        Bc = Ts.reshape((self.n, 1) + Ts.shape[1:] + (1,) * len(tail))
        prod = (A * Bc).sum(0)  # (a, rest..., [m])
        inv = tuple(int(i) for i in np.argsort(perm))
        back = tuple(range(prod.coeffs.ndim - 1))  # batch axes of prod
        order = tuple(inv) + back[rank:]
        return prod.transpose(order)

    def horizontal(self, T: Jet, valence: tuple[str, ...]) -> Jet:
        """Berwald-connection horizontal derivative; appends one lower slot.

        delta_m T = dT/dx^m - N^p_m dT/dy^p, plus +Gamma^i_pm per upper slot
        and -Gamma^p_jm per lower slot.
        """
        n, rank = self.n, len(valence)
        if len(T.shape) != rank:
            raise ValueError(f"tensor of rank {len(T.shape)} with valence {valence}")
        dTx = Jet.stack([self._dx(T, m) for m in range(n)], axis=rank)  # (..., m)
        dTy = Jet.stack([self._dy(T, p) for p in range(n)], axis=0)  # (p, ...)
        Nexp = self.N.reshape((n,) + (1,) * rank + (n,))
        out = dTx - (Nexp * dTy.reshape((n,) + T.shape + (1,))).sum(0)
        for slot, tag in enumerate(valence):
            if tag == UPPER:
                out = out + self._slot_contract(self.Gamma, T, slot)
            else:
                conn = self.Gamma.transpose(1, 0, 2)  # [j, p, m] = Gamma^p_{j m}
                out = out - self._slot_contract(conn, T, slot)
        return out

    def along_spray(self, T: Jet, valence: tuple[str, ...]) -> Jet:
        """Horizontal derivative contracted with y^m (rate along geodesics).

        Uses y^m delta_m = y^m d/dx^m - 2 G^p d/dy^p and the contraction
        Gamma^p_{jm} y^m = N^p_j, so it needs one jet order less than the
        free-index version.
        """
        n, rank = self.n, len(valence)
        if len(T.shape) != rank:
            raise ValueError(f"tensor of rank {len(T.shape)} with valence {valence}")
        acc = None
        for m in range(n):
            term = self.ys[m] * self._dx(T, m) - 2.0 * self.G[m] * self._dy(T, m)
            acc = term if acc is None else acc + term
        for slot, tag in enumerate(valence):
            if tag == UPPER:
                acc = acc + self._slot_contract(self.N, T, slot)
            else:
                acc = acc - self._slot_contract(self.N.transpose(1, 0), T, slot)
        return acc

    # -- Landsberg family ------------------------------------------------------------

    @cached_property
    def landsberg(self) -> Jet:
        """L_ijk: rate of change of the Cartan torsion along geodesics."""
        return self.along_spray(self.cartan, (LOWER, LOWER, LOWER))

    @cached_property
    def mean_landsberg(self) -> Jet:
        """J_i = g^{jk} L_ijk."""
        return (self.g_inv[None, :, :] * self.landsberg).sum((1, 2))

    @cached_property
    def stretch(self) -> Jet:
        """Sigma_ijkl = 2 (L_ijk|l - L_ijl|k); antisymmetric in (k, l)."""
        Lh = self.horizontal(self.landsberg, (LOWER, LOWER, LOWER))  # (i,j,k,l)
        return (Lh - Lh.transpose(0, 1, 3, 2)) * 2.0

    # -- Riemann curvature --------------------------------------------------------------

    @cached_property
    def riemann(self) -> Jet:
        """R^i_k = 2 dG^i/dx^k - y^j d^2G^i/dx^j dy^k + 2 G^j d^2G^i/dy^j dy^k
        - dG^i/dy^j dG^j/dy^k."""
        n = self.n
        Gx = Jet.stack([self._dx(self.G, k) for k in range(n)], axis=1)  # (i, k)
        Gxy = Jet.stack(
            [
                Jet.stack([self._dy(self._dx(self.G, j), k) for k in range(n)], axis=1)
                for j in range(n)
            ],
            axis=1,
        )  # (i, j, k)
        t2 = (Gxy * self.yjet[None, :, None]).sum(1)
        t3 = (self.Gamma * self.G[None, :, None]).sum(1)
        t4 = (self.N[:, :, None] * self.N[None, :, :]).sum(1)
        return 2.0 * Gx - t2 + 2.0 * t3 - t4

    @cached_property
    def nonlinear_curvature(self) -> Jet:
        """R^i_lm = delta_l N^i_m - delta_m N^i_l, the curvature of the
        nonlinear connection; equals one third of the antisymmetrized
        y-Hessian part of R^i_k (verified in the test suite)."""
        n = self.n
        dNy = Jet.stack([self._dy(self.N, p) for p in range(n)], axis=0)  # (p, i, m)
        cols = []
        for l in range(n):
            corr = (self.N[:, l].reshape(n, 1, 1) * dNy).sum(0)
            cols.append(self._dx(self.N, l) - corr)  # delta_l N^i_m
        D = Jet.stack(cols, axis=2)  # [i, m, l] = delta_l N^i_m
        return D.transpose(0, 2, 1) - D  # [i, l, m]

    @cached_property
    def riemann_hh(self) -> Jet:
        """R^i_jkl reconstructed from the y-Hessian of R^i_k (antisymmetric
        combination over k, l with weight one third)."""
        n = self.n
        dR = [self._dy(self.riemann, j) for j in range(n)]  # (i, k) each
        d2 = [[self._dy(dR[j], l) for l in range(n)] for j in range(n)]
        T1 = Jet.stack(
            [Jet.stack([d2[j][l] for l in range(n)], axis=2) for j in range(n)], axis=1
        )  # [i, j, k, l] = d2 R^i_k / dy^j dy^l
        T2 = Jet.stack(
            [Jet.stack([d2[j][k] for k in range(n)], axis=2) for j in range(n)], axis=1
        ).transpose(0, 1, 3, 2)  # [i, j, k, l] = d2 R^i_l / dy^j dy^k
        return (T1 - T2) * (1.0 / 3.0)

    def flag_curvature(self, u) -> float:
        """K(P, y) for the flag P = span(y, u) with flagpole y."""
        u = np.asarray(u, dtype=np.float64)
        gv = np.asarray(self.g.value)
        y = self.point.y
        F2v = self.F2.value
        gyu = float(y @ gv @ u)
        guu = float(u @ gv @ u)
        if guu <= 0.0:
            raise DegenerateFlagError("flag direction u has non-positive g-norm")
        # angle guard: u must not be (numerically) parallel to y
        if abs(gyu) >= 0.99 * np.sqrt(F2v) * np.sqrt(guu):
            raise DegenerateFlagError("flag direction u is parallel to the flagpole y")
        denom = F2v * guu - gyu * gyu
        if denom <= 1e-10 * max(F2v * guu, 1.0):
            raise DegenerateFlagError("degenerate flag: denominator underflow")
        Ru = np.asarray(self.riemann.value) @ u
        return float(u @ gv @ Ru) / denom

    def flag_isotropy(
        self, nflags: int = 20, ndirs: int = 8, seed: int = 0
    ) -> tuple[bool, float, float]:
        """Probe whether the flag curvature depends only on x at this point.

        Samples K over random flags at (x, y) and, because the flag spread
        alone is vacuous in dimension 2 and blind to y-dependence in
        general, also over random directions y' at the same x.  Returns
        (isotropic?, mean K, relative spread).
        """
        rng = np.random.default_rng(seed)
        values = []
        attempts = 0
        while len(values) < nflags and attempts < 50 * nflags:
            attempts += 1
            u = rng.standard_normal(self.n)
            try:
                values.append(self.flag_curvature(u))
            except DegenerateFlagError:
                continue
        for _ in range(ndirs):
            y2 = rng.standard_normal(self.n)
            y2 *= rng.uniform(0.5, 2.0) / np.linalg.norm(y2)
            try:
                other = CurvatureContext(self.spec, EvalPoint(self.point.x, y2), order=4)
            except DomainError:
                continue
            got = 0
            while got < 3 and attempts < 100 * nflags:
                attempts += 1
                u = rng.standard_normal(self.n)
                try:
                    values.append(other.flag_curvature(u))
                    got += 1
                except DegenerateFlagError:
                    continue
        values = np.array(values)
        mean = float(values.mean())
        spread = float(values.max() - values.min()) / max(1.0, abs(mean))
        return spread < 1e-6, mean, spread

    # -- trace curvature along geodesics ------------------------------------------------

    @cached_property
    def h_curvature(self) -> Jet:
        """H_ij: rate of change of the mean Berwald form along geodesics."""
        return self.along_spray(self.mean_berwald, (LOWER, LOWER))

    def h_curvature_local(self) -> np.ndarray:
        """Independent route: the explicit local-coordinates formula for 2H_ij
        assembled from raw partials of the spray coefficients."""
        n = self.n
        Bv = np.asarray(self.berwald.value)  # d^3 G^k / dy^a dy^b dy^c
        Bx = np.stack(
            [np.asarray(self._dx(self.berwald, m).value) for m in range(n)], axis=-1
        )  # d^4 G^k / dy^a dy^b dy^c dx^m
        By = np.stack(
            [np.asarray(self._dy(self.berwald, m).value) for m in range(n)], axis=-1
        )  # d^4 G^k / dy^a dy^b dy^c dy^m
        y = self.point.y
        Gv = np.asarray(self.G.value)
        Nv = np.asarray(self.N.value)
        two_h = (
            np.einsum("kijkm,m->ij", Bx, y)
            - 2.0 * np.einsum("m,kijkm->ij", Gv, By)
            - np.einsum("mi,kjkm->ij", Nv, Bv)
            - np.einsum("mj,kikm->ij", Nv, Bv)
        )
        return two_h / 2.0

    # -- special-form fit inputs ----------------------------------------------------------

    @cached_property
    def mu(self) -> Jet:
        """Candidate mu_j = -2 J_j / ((n+1) F^2), as a field jet."""
        return self.mean_landsberg * self.F2_inv * (-2.0 / (self.n + 1))

    @cached_property
    def lam(self) -> Jet:
        """Candidate lambda = 2 g^{jk} E_jk / ((n+1)(n-1)), as a field jet."""
        tr = (self.g_inv * self.mean_berwald).sum((0, 1))
        return tr * (2.0 / ((self.n + 1) * (self.n - 1)))

    @cached_property
    def mu_prime(self) -> Jet:
        """mu_{j|m} y^m."""
        return self.along_spray(self.mu, (LOWER,))

    @cached_property
    def lam_prime(self) -> Jet:
        """lambda_{|m} y^m (scalar: no connection terms)."""
        return self.along_spray(self.lam, ())


# -- functional operator surface -------------------------------------------------


def _ctx(spec, p, order):
    return CurvatureContext(spec, p, order)


def fundamental(spec, p, order: int = 2) -> Tensor:
    return (c := _ctx(spec, p, order)).tensor(c.g, (LOWER, LOWER))


def angular(spec, p, order: int = 2) -> Tensor:
    return (c := _ctx(spec, p, order)).tensor(c.h_low, (LOWER, LOWER))


def spray(spec, p, order: int = 4) -> SprayData:
    return _ctx(spec, p, order).spray_data()


def spray_2homogeneity_residual(data: SprayData) -> float:
    """Gamma^i_jk y^j y^k should reproduce 2 G^i."""
    y = data.point.y
    recon = 0.5 * np.einsum("ijk,j,k->i", data.Gamma, y, y)
    scale = max(np.max(np.abs(data.G)), np.max(np.abs(recon)))
    return float(np.max(np.abs(recon - data.G))) / (1.0 + scale)


def cartan(spec, p, order: int = 3) -> Tensor:
    return (c := _ctx(spec, p, order)).tensor(c.cartan, (LOWER, LOWER, LOWER))


def mean_cartan(spec, p, order: int = 3) -> Tensor:
    return (c := _ctx(spec, p, order)).tensor(c.mean_cartan, (LOWER,))


def matsumoto(spec, p, order: int = 3) -> Tensor:
    return (c := _ctx(spec, p, order)).tensor(c.matsumoto, (LOWER, LOWER, LOWER))


def berwald(spec, p, order: int = 5) -> Tensor:
    return (c := _ctx(spec, p, order)).tensor(c.berwald, (UPPER, LOWER, LOWER, LOWER))


def mean_berwald(spec, p, order: int = 5) -> Tensor:
    return (c := _ctx(spec, p, order)).tensor(c.mean_berwald, (LOWER, LOWER))


def douglas(spec, p, order: int = 6) -> Tensor:
    return (c := _ctx(spec, p, order)).tensor(c.douglas, (UPPER, LOWER, LOWER, LOWER))


def landsberg(spec, p, order: int = 4) -> Tensor:
    return (c := _ctx(spec, p, order)).tensor(c.landsberg, (LOWER, LOWER, LOWER))


def mean_landsberg(spec, p, order: int = 4) -> Tensor:
    return (c := _ctx(spec, p, order)).tensor(c.mean_landsberg, (LOWER,))


def riemann(spec, p, order: int = 4) -> Tensor:
    return (c := _ctx(spec, p, order)).tensor(c.riemann, (UPPER, LOWER))


def hh_curvature(spec, p, order: int = 6) -> Tensor:
    return (c := _ctx(spec, p, order)).tensor(c.riemann_hh, (UPPER, LOWER, LOWER, LOWER))


def flag_curvature(spec, p, u, order: int = 4) -> float:
    return _ctx(spec, p, order).flag_curvature(u)


def h_curvature(spec, p, order: int = 6) -> Tensor:
    return (c := _ctx(spec, p, order)).tensor(c.h_curvature, (LOWER, LOWER))


def stretch(spec, p, order: int = 5) -> Tensor:
    return (c := _ctx(spec, p, order)).tensor(c.stretch, (LOWER, LOWER, LOWER, LOWER))


def horizontal_derivative(spec, p, field, valence, order: int = DEFAULT_ORDER) -> Tensor:
    """Horizontal derivative of a tensor-valued operator at p.

    `field` maps a CurvatureContext to a jet tensor of the given valence
    (e.g. ``lambda c: c.cartan``); the result carries one extra lower slot.
    """
    c = _ctx(spec, p, order)
    out = c.horizontal(field(c), tuple(valence))
    return c.tensor(out, tuple(valence) + (LOWER,))


# -- spray values and geodesics (float fast path) ------------------------------------


@lru_cache(maxsize=None)
def _spray_index_tables(n: int):
    """Coefficient positions in the order-2 algebra for the spray assembly."""
    from .jets import algebra

    alg = algebra(2 * n, 2)

    def pos(*pairs):
        e = [0] * (2 * n)
        for v in pairs:
            e[v] += 1
        return alg.position[tuple(e)]

    yy = np.array([[pos(n + i, n + j) for j in range(n)] for i in range(n)])
    yy_fac = np.array([[2.0 if i == j else 1.0 for j in range(n)] for i in range(n)])
    xy = np.array([[pos(k, n + l) for l in range(n)] for k in range(n)])
    x1 = np.array([pos(k) for k in range(n)])
    return yy, yy_fac, xy, x1


def spray_values(spec: MetricSpec, x, y) -> np.ndarray:
    """G^i at (x, y) from one order-2 jet evaluation of F^2."""
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    n = len(x)
    xs, ys = lift_point(x, y, 2)
    f2 = spec.eval_F2(xs, ys)
    c = f2.coeffs
    yy, yy_fac, xy, x1 = _spray_index_tables(n)
    g = 0.5 * c[yy] * yy_fac  # g_ij = half Hessian in y
    rhs = c[xy].T @ y - c[x1]  # [F^2]_{x^k y^l} y^k - [F^2]_{x^l}
    return 0.25 * np.linalg.solve(g, rhs)


@dataclass
class Trajectory:
    """Sampled geodesic: rows (t, x, v=dx/dt, F(x, v))."""

    t: np.ndarray
    x: np.ndarray
    v: np.ndarray
    F: np.ndarray
    exited: bool = False

    @property
    def F_drift(self) -> float:
        """Max relative deviation of F(dx/dt) from its initial value."""
        return float(np.max(np.abs(self.F / self.F[0] - 1.0)))


def geodesic(spec: MetricSpec, x0, y0, T: float = 1.0, steps: int = 2000) -> Trajectory:
    """Fixed-step classical Runge-Kutta integration of x'' + 2 G(x, x') = 0.

    Stops early (with `exited` set) if the trajectory leaves the metric's
    domain; rows hold the last valid prefix in that case.
    """
    x0 = np.asarray(x0, dtype=np.float64)
    y0 = np.asarray(y0, dtype=np.float64)
    spec.validate_point(EvalPoint(x0, y0))
    if steps < 1:
        raise ValueError("need at least one step")
    h = T / steps

    def rhs(x, v):
        return v, -2.0 * spray_values(spec, x, v)

    ts = [0.0]
    xsamples = [x0.copy()]
    vsamples = [y0.copy()]
    Fs = [float(spec.eval_F(list(x0), list(y0)))]
    x, v = x0.copy(), y0.copy()
    exited = False
    for step in range(steps):
        try:
            k1x, k1v = rhs(x, v)
            k2x, k2v = rhs(x + 0.5 * h * k1x, v + 0.5 * h * k1v)
            k3x, k3v = rhs(x + 0.5 * h * k2x, v + 0.5 * h * k2v)
            k4x, k4v = rhs(x + h * k3x, v + h * k3v)
            x = x + (h / 6.0) * (k1x + 2 * k2x + 2 * k3x + k4x)
            v = v + (h / 6.0) * (k1v + 2 * k2v + 2 * k3v + k4v)
            p = EvalPoint(x, v)
            if not spec.point_ok(p):
                exited = True
                break
            Fval = float(spec.eval_F(list(x), list(v)))
        except (DomainError, JetDomainError, ex.EvalDomainError, np.linalg.LinAlgError):
            exited = True
            break
        ts.append((step + 1) * h)
        xsamples.append(x.copy())
        vsamples.append(v.copy())
        Fs.append(Fval)
    return Trajectory(
        t=np.array(ts),
        x=np.array(xsamples),
        v=np.array(vsamples),
        F=np.array(Fs),
        exited=exited,
    )

"""Theorem-level classification of a metric at sampled points.

The central object is the special-form fit: the Berwald curvature is
compared against

    B^i_jkl = (mu_j h_kl + mu_k h_jl + mu_l h_jk) y^i
              + lambda (h^i_j h_kl + h^i_k h_jl + h^i_l h_jk)

with the candidate coefficients recovered from traces,

    lambda = 2 g^{jk} E_jk / ((n+1)(n-1)),
    mu_j   = -2 J_j / ((n+1) F^2).

A point is classified as special-form when the reconstruction residual
stays below 1e-6.  The conditional statements (Landsberg reconstruction,
the geodesic rate of mu under isotropic flag curvature, the flag-rate /
trace-curvature relation, and the stretch consequence) only apply on
points passing that fit; when the precondition fails they report
"not applicable" rather than a verdict.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .curvature import CurvatureContext
from .tensors import max_abs, rel_residual

__all__ = [
    "SpecialBerwaldFit",
    "GDWResult",
    "ConditionalResult",
    "PredicateResult",
    "SPECIAL_FIT_TOLERANCE",
    "fit_special_berwald",
    "special_form_reconstruction",
    "gdw_check",
    "predicates",
    "landsberg_reconstruction",
    "mean_landsberg_reconstruction",
    "landsberg_weak_equivalence",
    "mu_rate_relation",
    "lambda_rate_relation",
    "stretch_mu_rate",
    "lambda_vertical_consistency",
    "special_fit_mu_annihilation",
]

SPECIAL_FIT_TOLERANCE = 1e-6

# shared zero-tolerance for both sides of biconditional "= 0" statements,
# so the equivalence cannot pass vacuously with mismatched thresholds
ZERO_TOLERANCE = 1e-8


@dataclass(frozen=True)
class SpecialBerwaldFit:
    """Trace-recovered coefficients and the reconstruction residual."""

    mu: np.ndarray  # (n,), lower index, degree -2 homogeneous in y
    lam: float  # degree -1 homogeneous in y
    residual: float  # relative reconstruction error of the special form

    @property
    def is_special(self) -> bool:
        return self.residual < SPECIAL_FIT_TOLERANCE


@dataclass(frozen=True)
class GDWResult:
    """Projected rate of change of the Douglas tensor along the spray."""

    residual: float  # h-projection of D^a_{jkl|m} y^m against zero
    witness: np.ndarray  # T_jkl = y_a D^a_{jkl|m} y^m / F^2
    witness_residual: float  # D^i_{jkl|m} y^m - T_jkl y^i against zero

    @property
    def is_gdw(self) -> bool:
        return self.residual < 1e-5


@dataclass(frozen=True)
class ConditionalResult:
    """Outcome of a check that only applies under a precondition."""

    applicable: bool
    residual: float | None = None
    note: str = ""


@dataclass(frozen=True)
class PredicateResult:
    holds: bool
    residual: float
    tolerance: float


def special_form_reconstruction(ctx: CurvatureContext, mu: np.ndarray, lam: float) -> np.ndarray:
    """Right-hand side of the special form for given coefficients."""
    h = np.asarray(ctx.h_low.value)
    hm = np.asarray(ctx.h_mix.value)
    y = ctx.point.y
    sym_mu = (
        np.einsum("j,kl->jkl", mu, h)
        + np.einsum("k,jl->jkl", mu, h)
        + np.einsum("l,jk->jkl", mu, h)
    )
    sym_h = (
        np.einsum("ij,kl->ijkl", hm, h)
        + np.einsum("ik,jl->ijkl", hm, h)
        + np.einsum("il,jk->ijkl", hm, h)
    )
    return np.einsum("i,jkl->ijkl", y, sym_mu) + lam * sym_h


def fit_special_berwald(ctx: CurvatureContext) -> SpecialBerwaldFit:
    """Trace-fit of the special Berwald form at ctx's point (n >= 2)."""
    n = ctx.n
    if n < 2:
        raise ValueError("the angular metric is degenerate in dimension 1")
    E = np.asarray(ctx.mean_berwald.value)
    ginv = np.asarray(ctx.g_inv.value)
    J = np.asarray(ctx.mean_landsberg.value)
    F2 = ctx.F2.value
    lam = 2.0 * float(np.einsum("jk,jk->", ginv, E)) / ((n + 1) * (n - 1))
    mu = -2.0 * J / ((n + 1) * F2)
    recon = special_form_reconstruction(ctx, mu, lam)
    residual = rel_residual(np.asarray(ctx.berwald.value), recon)
    return SpecialBerwaldFit(mu=mu, lam=lam, residual=residual)


def gdw_check(ctx: CurvatureContext) -> GDWResult:
    """Projection h^i_a D^a_{jkl|m} y^m, plus the tangency witness."""
    from .tensors import LOWER, UPPER

    Dp = np.asarray(
        ctx.along_spray(ctx.douglas, (UPPER, LOWER, LOWER, LOWER)).value
    )  # (a, j, k, l)
    hm = np.asarray(ctx.h_mix.value)
    projected = np.einsum("ia,ajkl->ijkl", hm, Dp)
    residual = rel_residual(projected)
    y_low = np.asarray(ctx.y_low.value)
    T = np.einsum("a,ajkl->jkl", y_low, Dp) / ctx.F2.value
    recon = np.einsum("jkl,i->ijkl", T, ctx.point.y)
    return GDWResult(
        residual=residual,
        witness=T,
        witness_residual=rel_residual(Dp, recon),
    )


_PREDICATE_SOURCES = {
    "riemannian": lambda ctx: ctx.cartan.value,
    "riemannian_deicke": lambda ctx: ctx.mean_cartan.value,
    "c_reducible": lambda ctx: ctx.matsumoto.value,
    "berwald": lambda ctx: ctx.berwald.value,
    "weakly_berwald": lambda ctx: ctx.mean_berwald.value,
    "landsberg": lambda ctx: ctx.landsberg.value,
    "weakly_landsberg": lambda ctx: ctx.mean_landsberg.value,
    "douglas": lambda ctx: ctx.douglas.value,
    "stretch": lambda ctx: ctx.stretch.value,
}


def predicates(ctx: CurvatureContext, tolerances: dict | None = None) -> dict:
    """Vanishing predicates (is-Riemannian, is-Berwald, ...) with residuals.

    Each predicate holds when the relative residual of the defining tensor
    against zero is below its tolerance (default 1e-8).
    """
    tolerances = tolerances or {}
    out = {}
    for name, source in _PREDICATE_SOURCES.items():
        tol = tolerances.get(name, 1e-8)
        residual = rel_residual(np.asarray(source(ctx)))
        out[name] = PredicateResult(holds=residual < tol, residual=residual, tolerance=tol)
    return out


# -- conditional relations (only under the special-form precondition) -----------


def landsberg_reconstruction(
    ctx: CurvatureContext, fit: SpecialBerwaldFit
) -> ConditionalResult:
    """L_jkl = -F^2 (mu_j h_kl + mu_k h_jl + mu_l h_jk) / 2 under the fit."""
    if not fit.is_special:
        return ConditionalResult(False, note="special-form fit fails at this point")
    h = np.asarray(ctx.h_low.value)
    sym_mu = (
        np.einsum("j,kl->jkl", fit.mu, h)
        + np.einsum("k,jl->jkl", fit.mu, h)
        + np.einsum("l,jk->jkl", fit.mu, h)
    )
    expected = -0.5 * ctx.F2.value * sym_mu
    return ConditionalResult(
        True, rel_residual(np.asarray(ctx.landsberg.value), expected)
    )


def mean_landsberg_reconstruction(
    ctx: CurvatureContext, fit: SpecialBerwaldFit
) -> ConditionalResult:
    """J_j = -(n+1) F^2 mu_j / 2 under the fit."""
    if not fit.is_special:
        return ConditionalResult(False, note="special-form fit fails at this point")
    expected = -0.5 * (ctx.n + 1) * ctx.F2.value * fit.mu
    return ConditionalResult(
        True, rel_residual(np.asarray(ctx.mean_landsberg.value), expected)
    )


def landsberg_weak_equivalence(
    ctx: CurvatureContext, fit: SpecialBerwaldFit
) -> ConditionalResult:
    """L = 0 iff J = 0 under the fit; one shared zero-tolerance on both sides."""
    if not fit.is_special:
        return ConditionalResult(False, note="special-form fit fails at this point")
    l_zero = rel_residual(np.asarray(ctx.landsberg.value)) < ZERO_TOLERANCE
    j_zero = rel_residual(np.asarray(ctx.mean_landsberg.value)) < ZERO_TOLERANCE
    return ConditionalResult(True, 0.0 if l_zero == j_zero else 1.0)


def mu_rate_relation(
    ctx: CurvatureContext,
    fit: SpecialBerwaldFit,
    isotropic: bool,
    flag_value: float,
) -> ConditionalResult:
    """mu'_j = 2 K I_j / (n+1) under the fit and isotropic flag curvature."""
    if not fit.is_special:
        return ConditionalResult(False, note="special-form fit fails at this point")
    if not isotropic:
        return ConditionalResult(False, note="flag curvature is not isotropic here")
    mu_prime = np.asarray(ctx.mu_prime.value)
    expected = (2.0 * flag_value / (ctx.n + 1)) * np.asarray(ctx.mean_cartan.value)
    return ConditionalResult(True, rel_residual(mu_prime, expected))


def lambda_rate_relation(
    ctx: CurvatureContext, fit: SpecialBerwaldFit
) -> ConditionalResult:
    """2 H_jk = (n+1) lambda' h_jk under the fit."""
    if not fit.is_special:
        return ConditionalResult(False, note="special-form fit fails at this point")
    lhs = 2.0 * np.asarray(ctx.h_curvature.value)
    rhs = (ctx.n + 1) * ctx.lam_prime.value * np.asarray(ctx.h_low.value)
    return ConditionalResult(True, rel_residual(lhs, rhs))


def stretch_mu_rate(
    ctx: CurvatureContext, fit: SpecialBerwaldFit, stretch_tol: float = 1e-8
) -> ConditionalResult:
    """mu' = 0 under the fit when the stretch curvature vanishes."""
    if not fit.is_special:
        return ConditionalResult(False, note="special-form fit fails at this point")
    if rel_residual(np.asarray(ctx.stretch.value)) >= stretch_tol:
        return ConditionalResult(False, note="stretch curvature does not vanish here")
    return ConditionalResult(True, rel_residual(np.asarray(ctx.mu_prime.value)))


def lambda_vertical_consistency(
    ctx: CurvatureContext, fit: SpecialBerwaldFit
) -> ConditionalResult:
    """Diagnostic: lambda y_l / F^2 + dlambda/dy^l = 0 under the fit.

    Follows from the (k,l)-symmetry of the Douglas tensor for special-form
    metrics in dimension >= 3 (contracting the symmetry condition leaves a
    factor n-2, so dimension 2 imposes nothing).  Reported, not used for
    classification.
    """
    if not fit.is_special:
        return ConditionalResult(False, note="special-form fit fails at this point")
    if ctx.n < 3:
        return ConditionalResult(
            False, note="vacuous in dimension 2 (the symmetry contraction carries n-2)"
        )
    n = ctx.n
    lam_vert = np.array([ctx.lam.deriv(n + l).value for l in range(n)])
    y_low = np.asarray(ctx.y_low.value)
    residual = rel_residual(ctx.lam.value * y_low / ctx.F2.value + lam_vert)
    return ConditionalResult(True, residual)


def special_fit_mu_annihilation(ctx: CurvatureContext, fit: SpecialBerwaldFit) -> float:
    """Residual of mu_i y^i = 0 (holds structurally; verified numerically)."""
    value = float(fit.mu @ ctx.point.y)
    return abs(value) / (1.0 + max_abs(fit.mu) * float(np.linalg.norm(ctx.point.y)))

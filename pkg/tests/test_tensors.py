"""Valence-tagged tensor operations."""

import numpy as np
import pytest

from finslerlab.curvature import CurvatureContext
from finslerlab.metrics import EvalPoint, builtin_metric, sample_points
from finslerlab.tensors import (
    LOWER,
    UPPER,
    PointMismatchError,
    Tensor,
    ValenceError,
    antisym,
    contract,
    lower_slot,
    max_abs,
    raise_slot,
    rel_residual,
    sym,
)

P = EvalPoint([0.0, 0.0, 0.0], [1.0, 0.0, 0.0])


def test_contract_identity_trace():
    delta = Tensor(np.eye(3), (UPPER, LOWER), P)
    assert contract(delta, 0, 1).entries == pytest.approx(3.0)


def test_contract_requires_opposite_valence():
    t = Tensor(np.eye(3), (LOWER, LOWER), P)
    with pytest.raises(ValenceError):
        contract(t, 0, 1)


def test_contract_with_explicit_metric():
    spec = builtin_metric("funk", 3)
    p = sample_points(spec, 1, seed=8)[0]
    ctx = CurvatureContext(spec, p, order=4)
    g_inv = Tensor(np.asarray(ctx.g_inv.value), (UPPER, UPPER), p)
    L = Tensor(np.asarray(ctx.landsberg.value), (LOWER, LOWER, LOWER), p)
    J_direct = Tensor(np.asarray(ctx.mean_landsberg.value), (LOWER,), p)
    J_contracted = contract(L, 1, 2, metric=g_inv)
    assert rel_residual(J_contracted, J_direct) < 1e-12


def test_raise_lower_roundtrip():
    spec = builtin_metric("randers", 3)
    p = sample_points(spec, 1, seed=2)[0]
    ctx = CurvatureContext(spec, p, order=3)
    g = Tensor(np.asarray(ctx.g.value), (LOWER, LOWER), p)
    g_inv = Tensor(np.asarray(ctx.g_inv.value), (UPPER, UPPER), p)
    C = Tensor(np.asarray(ctx.cartan.value), (LOWER, LOWER, LOWER), p)
    back = lower_slot(raise_slot(C, 1, g_inv), 1, g)
    assert rel_residual(back, C) < 1e-12


def test_lower_y_euclidean_and_euler():
    spec = builtin_metric("euclidean", 3)
    p = EvalPoint([0.1, 0.2, 0.3], [1.0, 2.0, 2.0])
    ctx = CurvatureContext(spec, p, order=2)
    g = Tensor(np.asarray(ctx.g.value), (LOWER, LOWER), p)
    y = Tensor(p.y, (UPPER,), p)
    y_low = lower_slot(y, 0, g)
    np.testing.assert_allclose(y_low.entries, p.y)  # Euclidean: same components
    assert contract(Tensor(np.outer(p.y, y_low.entries), (UPPER, LOWER), p), 0, 1).entries == pytest.approx(9.0)


def test_angular_mixed_idempotent():
    spec = builtin_metric("funk", 3)
    p = sample_points(spec, 1, seed=4)[0]
    ctx = CurvatureContext(spec, p, order=2)
    hm = np.asarray(ctx.h_mix.value)
    h = np.asarray(ctx.h_low.value)
    assert rel_residual(np.einsum("ij,ik->jk", hm, h), h) < 1e-12


def test_sym_of_antisymmetric_pair_is_zero():
    rng = np.random.default_rng(0)
    a = rng.standard_normal((3, 3))
    t = Tensor(a - a.T, (LOWER, LOWER), P)
    assert max_abs(sym(t, (0, 1))) < 1e-15


def test_antisym_and_residual_basics():
    rng = np.random.default_rng(1)
    t = Tensor(rng.standard_normal((3, 3)), (LOWER, LOWER), P)
    assert rel_residual(t, t) == 0.0
    s = sym(t, (0, 1))
    a = antisym(t, 0, 1)
    assert rel_residual(s + a, t) < 1e-15


def test_cartan_total_symmetry_via_permutations():
    spec = builtin_metric("randers", 3)
    p = sample_points(spec, 1, seed=6)[0]
    ctx = CurvatureContext(spec, p, order=3)
    C = Tensor(np.asarray(ctx.cartan.value), (LOWER, LOWER, LOWER), p)
    assert rel_residual(C, sym(C, (0, 1, 2))) < 1e-14


def test_point_mismatch_rejected():
    t1 = Tensor(np.eye(2), (LOWER, LOWER), EvalPoint([0.0, 0.0], [1.0, 0.0]))
    t2 = Tensor(np.eye(2), (LOWER, LOWER), EvalPoint([0.1, 0.0], [1.0, 0.0]))
    with pytest.raises(PointMismatchError):
        t1 + t2


def test_raise_needs_upper_upper_metric():
    g = Tensor(np.eye(3), (LOWER, LOWER), P)
    t = Tensor(np.zeros((3, 3)), (LOWER, LOWER), P)
    with pytest.raises(ValenceError):
        raise_slot(t, 0, g)  # g must be the inverse metric (upper, upper)

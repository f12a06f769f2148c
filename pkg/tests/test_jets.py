"""Jet engine: exact truncated-Taylor arithmetic."""

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from finslerlab.jets import (
    Jet,
    JetDomainError,
    JetOrderError,
    algebra,
    invert_jet_matrix,
    lift,
    lift_point,
    partial_derivative,
)
from finslerlab.metrics import EvalPoint

from oracles import fd_partial


def test_lift_is_coordinate_function():
    p = EvalPoint([0.0, 0.0], [1.0, 2.0])
    jet = lift(p, 2, order=2)  # slot 2 = first y-coordinate = 1
    assert jet.value == 1.0
    assert jet.partial((0, 0, 1, 0)) == 1.0
    assert jet.partial((0, 0, 0, 1)) == 0.0
    assert jet.partial((1, 0, 0, 0)) == 0.0


def test_lift_out_of_range():
    p = EvalPoint([0.0, 0.0], [1.0, 2.0])
    with pytest.raises(IndexError):
        lift(p, 5, order=2)


def test_square_of_lift_expansion():
    # (y + h)^2 at y = 3: constant 9, linear coefficient 6, quadratic 1
    p = EvalPoint([0.0, 0.0], [3.0, 2.0])
    jet = lift(p, 2, order=2) ** 2
    assert jet.value == 9.0
    assert jet.coefficient((0, 0, 1, 0)) == 6.0
    assert jet.coefficient((0, 0, 2, 0)) == 1.0


def test_partial_of_square_norm():
    field = lambda xs, ys: sum(v * v for v in ys)
    p = EvalPoint([0.3, -0.2], [0.9, 1.4])
    assert partial_derivative(field, p, (0, 0, 2, 0)) == 2.0
    assert partial_derivative(field, p, (0, 0, 1, 1)) == 0.0


def test_funk_mixed_partial_vanishes_at_origin():
    # at x = 0 the ball metric reduces to |y|, so F^2 = |y|^2 there
    from finslerlab.metrics import builtin_metric

    funk = builtin_metric("funk", 2)
    p = EvalPoint([0.0, 0.0], [1.0, 1.0])
    value = partial_derivative(
        lambda xs, ys: funk.eval_F2(xs, ys), p, (0, 0, 1, 1)
    )
    assert abs(value) < 1e-12


def test_randers_order4_partial_matches_fd_oracle():
    from finslerlab.metrics import builtin_metric, sample_points

    spec = builtin_metric("randers", 3)
    p = sample_points(spec, 1, seed=21)[0]
    z0 = np.concatenate([p.x, p.y])
    field = lambda z: float(spec.eval_F(list(z[:3]), list(z[3:])) ** 2)
    xs, ys = lift_point(p.x, p.y, 4)
    f2 = spec.eval_F2(xs, ys)
    for alpha in [(0, 1, 0, 2, 1, 0), (1, 1, 0, 1, 1, 0), (0, 0, 0, 2, 1, 1)]:
        exact = f2.partial(alpha)
        approx = fd_partial(field, z0, alpha)
        assert abs(approx - exact) <= 1e-5 * (1.0 + abs(exact))


def _random_polynomial(rng, nvars, order):
    alg = algebra(nvars, order)
    coeffs = rng.standard_normal(alg.ncoef)
    coeffs[alg.orders > 2] = 0.0  # quadratic polynomials: products stay exact
    return Jet(alg, coeffs)


@given(st.integers(0, 2**31 - 1))
@settings(max_examples=25, deadline=None)
def test_leibniz_rule_on_random_polynomials(seed):
    rng = np.random.default_rng(seed)
    f = _random_polynomial(rng, 3, 4)
    g = _random_polynomial(rng, 3, 4)
    prod = f * g
    for alpha in [(1, 0, 0), (0, 1, 1), (2, 0, 0), (1, 1, 1)]:
        # Leibniz expansion over sub-multi-indices
        expected = 0.0
        ranges = [range(a + 1) for a in alpha]
        for b0 in ranges[0]:
            for b1 in ranges[1]:
                for b2 in ranges[2]:
                    beta = (b0, b1, b2)
                    gamma = tuple(a - b for a, b in zip(alpha, beta))
                    binom = math.prod(
                        math.comb(a, b) for a, b in zip(alpha, beta)
                    )
                    expected += binom * f.partial(beta) * g.partial(gamma)
        got = prod.partial(alpha)
        assert abs(got - expected) <= 1e-12 * (1.0 + abs(expected))


def test_partials_commute_with_build_order():
    xs, ys = lift_point([0.4, -0.1], [1.2, 0.3], 5)
    f = ((1.0 + xs[0] * ys[1]) ** 3) / (2.0 + ys[0] * ys[0])
    a = f.deriv(0).deriv(3).deriv(2)
    b = f.deriv(2).deriv(3).deriv(0)
    np.testing.assert_allclose(a.coeffs, b.coeffs, rtol=0, atol=1e-14)


def test_division_and_sqrt_roundtrip():
    xs, ys = lift_point([0.5], [2.0], 6)
    f = 1.0 + xs[0] + ys[0] * ys[0]
    assert np.abs(((f / f) - 1.0).coeffs).max() < 1e-13
    s = f.sqrt()
    assert np.abs((s * s - f).coeffs).max() < 1e-12


def test_division_by_zero_constant_term():
    xs, ys = lift_point([0.0], [1.0], 3)
    with pytest.raises(JetDomainError):
        (1.0 / xs[0]).value


def test_sqrt_of_nonpositive_constant_term():
    xs, ys = lift_point([-1.0], [1.0], 3)
    with pytest.raises(JetDomainError):
        xs[0].sqrt()


def test_negative_integer_power():
    xs, ys = lift_point([0.0], [2.0], 4)
    f = ys[0] ** -2
    assert f.value == 0.25
    assert abs(f.partial((0, 1)) - (-2.0 / 8.0)) < 1e-14


def test_order_tracking_raises_beyond_valid():
    xs, ys = lift_point([0.1], [1.0], 3)
    d = ys[0].deriv(1).deriv(1).deriv(1)  # valid 0 now
    with pytest.raises(JetOrderError):
        d.deriv(1)
    f = xs[0] * ys[0]
    with pytest.raises(JetOrderError):
        f.deriv(0).partial((0, 3))


def test_truncated_storage_widths():
    alg = algebra(4, 6)
    xs, ys = lift_point([1.0, 2.0], [3.0, 4.0], 6)
    f = xs[0] * ys[1]
    assert f.coeffs.shape[-1] == alg.ncoef
    d = f.deriv(0)
    assert d.valid == 5
    assert d.coeffs.shape[-1] == alg.width(5)


def test_invert_jet_matrix_roundtrip():
    xs, ys = lift_point([0.2, -0.3], [1.0, 0.5], 5)
    m = Jet.stack(
        [
            Jet.stack([2.0 + xs[0] * xs[0], 0.3 * ys[0]]),
            Jet.stack([0.3 * ys[0], 1.0 + ys[1] * ys[1]]),
        ]
    )
    inv = invert_jet_matrix(m)
    for i in range(2):
        for j in range(2):
            entry = m[i, 0] * inv[0, j] + m[i, 1] * inv[1, j]
            target = 1.0 if i == j else 0.0
            coeffs = entry.coeffs.copy()
            coeffs[..., 0] -= target
            assert np.abs(coeffs).max() < 1e-13


def test_invert_singular_matrix():
    xs, ys = lift_point([0.0], [1.0], 3)
    zero = xs[0] * 0.0
    m = Jet.stack([Jet.stack([zero, zero]), Jet.stack([zero, zero])])
    with pytest.raises(JetDomainError):
        invert_jet_matrix(m)

"""Tests for map descriptors, their Lipschitz data, and the hyperbolic lift."""

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from sdskit import distributions as d
from sdskit import hyperbolic, maps
from sdskit.errors import ConfigurationError, DomainError


# ---------------------------------------------------------------------------
# descriptor validation

def test_affine_slope_must_be_positive():
    with pytest.raises(ConfigurationError):
        maps.Affine(0.0, 1.0)


def test_reflaffine_requires_positive_params():
    with pytest.raises(ConfigurationError):
        maps.ReflAffine(2.0, -1.0)


def test_composite_needs_factors():
    with pytest.raises(ConfigurationError):
        maps.Composite(())


# ---------------------------------------------------------------------------
# apply / lipschitz / displacement

def test_apply_closed_forms():
    assert maps.apply(maps.ReflAffine(2.0, 1.0), 0.5) == 0.0
    assert maps.apply(maps.ReflTranslate(3.0), 1.0) == 2.0
    assert maps.apply(maps.Affine(0.5, 1.0), 2.0) == 2.0  # fixed point


def test_apply_rejects_negative_input_for_reflections():
    with pytest.raises(DomainError):
        maps.apply(maps.ReflTranslate(1.0), -0.5)
    with pytest.raises(DomainError):
        maps.apply(maps.ReflAffine(2.0, 1.0), -1.0)


def test_composite_applies_first_factor_first():
    comp = maps.Composite((maps.Affine(2.0, 0.0), maps.Affine(1.0, 3.0)))
    # x -> 2x, then +3
    assert maps.apply(comp, 1.0) == 5.0


def test_lipschitz_values():
    assert maps.lipschitz(maps.ReflAffine(2.0, 1.0)) == 2.0
    assert maps.lipschitz(maps.ReflTranslate(5.0)) == 1.0
    comp = maps.Composite((maps.ReflAffine(2.0, 1.0), maps.ReflAffine(0.5, 1.0)))
    assert maps.lipschitz(comp) == 1.0  # product bound


def test_displacement_values():
    assert maps.displacement(maps.ReflAffine(2.0, 1.0), 0.0) == 1.0
    assert maps.displacement(maps.ReflTranslate(3.0), 0.0) == 3.0
    assert maps.displacement(maps.Affine(2.0, 0.0), 0.0) == 0.0


def test_lift_apply():
    p = hyperbolic.ExtendedPoint(0.5, 1.0)
    q = maps.lift_apply(maps.ReflAffine(2.0, 1.0), p)
    assert (q.base, q.height) == (0.0, 2.0)
    r = maps.lift_apply(maps.ReflTranslate(0.0), hyperbolic.ExtendedPoint(3.0, 1.0))
    assert (r.base, r.height) == (3.0, 1.0)


# ---------------------------------------------------------------------------
# SystemSpec validation

def test_system_spec_requires_exactly_one_parameterization():
    with pytest.raises(ConfigurationError):
        maps.SystemSpec(family="affine", b_law=d.Constant(1.0))  # missing a_law
    with pytest.raises(ConfigurationError):
        maps.SystemSpec(
            family="affine",
            a_law=d.Constant(2.0),
            b_law=d.Constant(1.0),
            joint_pairs=(((2.0, 1.0), 1.0),),
        )


def test_system_spec_reflected_rw_takes_no_a_law():
    with pytest.raises(ConfigurationError):
        maps.SystemSpec(family="reflected_rw", a_law=d.Constant(1.0), b_law=d.Constant(1.0))
    with pytest.raises(ConfigurationError):
        maps.SystemSpec(family="reflected_rw", joint_pairs=(((1.0, 1.0), 1.0),))


def test_system_spec_joint_weights_must_sum_to_one():
    with pytest.raises(ConfigurationError):
        maps.SystemSpec(family="affine", joint_pairs=(((2.0, 1.0), 0.4), ((0.5, 1.0), 0.4)))


def test_system_spec_unknown_family():
    with pytest.raises(ConfigurationError):
        maps.SystemSpec(family="spiral", b_law=d.Constant(1.0))


# ---------------------------------------------------------------------------
# properties

_descriptors = st.one_of(
    st.builds(maps.Affine, st.floats(0.1, 4.0), st.floats(-2.0, 2.0)),
    st.builds(maps.ReflAffine, st.floats(0.1, 4.0), st.floats(0.1, 3.0)),
    st.builds(maps.ReflTranslate, st.floats(-3.0, 3.0)),
)


@settings(max_examples=300, deadline=None)
@given(f=_descriptors, x=st.floats(0.0, 10.0), y=st.floats(0.0, 10.0))
def test_lipschitz_property(f, x, y):
    lhs = abs(maps.apply(f, x) - maps.apply(f, y))
    assert lhs <= maps.lipschitz(f) * abs(x - y) + 1e-12


@settings(max_examples=200, deadline=None)
@given(
    f=_descriptors,
    u=st.tuples(st.floats(0.0, 5.0), st.floats(0.1, 4.0)),
    v=st.tuples(st.floats(0.0, 5.0), st.floats(0.1, 4.0)),
)
def test_lift_nonexpansive_property(f, u, v):
    pu = hyperbolic.ExtendedPoint(*u)
    pv = hyperbolic.ExtendedPoint(*v)
    before = hyperbolic.extended_distance(pu, pv)
    after = hyperbolic.extended_distance(maps.lift_apply(f, pu), maps.lift_apply(f, pv))
    assert after <= before + 1e-12


def test_lift_nonexpansive_bulk_random():
    rng = np.random.default_rng(3)
    fails = 0
    for _ in range(10_000):
        kind = rng.integers(3)
        if kind == 0:
            f = maps.Affine(float(rng.uniform(0.1, 4.0)), float(rng.uniform(-2, 2)))
        elif kind == 1:
            f = maps.ReflAffine(float(rng.uniform(0.1, 4.0)), float(rng.uniform(0.1, 3.0)))
        else:
            f = maps.ReflTranslate(float(rng.uniform(-3, 3)))
        pu = hyperbolic.ExtendedPoint(float(rng.uniform(0, 5)), float(rng.uniform(0.1, 4)))
        pv = hyperbolic.ExtendedPoint(float(rng.uniform(0, 5)), float(rng.uniform(0.1, 4)))
        before = hyperbolic.extended_distance(pu, pv)
        after = hyperbolic.extended_distance(maps.lift_apply(f, pu), maps.lift_apply(f, pv))
        fails += after > before + 1e-12
    assert fails == 0


def test_domination_by_affine_majorant():
    # |X_n^x| <= Y_n^{|x|} where Y is driven by (lipschitz, displacement)
    rng = np.random.default_rng(11)
    for _ in range(1000):
        x = float(rng.uniform(0, 3))
        xs, ys = x, abs(x)
        for _ in range(30):
            if rng.random() < 0.5:
                f = maps.ReflAffine(float(rng.uniform(0.2, 3.0)), float(rng.uniform(0.1, 2.0)))
            else:
                f = maps.ReflTranslate(float(rng.uniform(0.0, 2.0)))
            xs = maps.apply(f, xs)
            ys = maps.lipschitz(f) * ys + maps.displacement(f, 0.0)
            assert abs(xs) <= ys + 1e-9

import os
import pytest
import sys

import numpy as np

sys.path.append(os.path.join(os.path.dirname(__file__), '..'))

from iflow.lib.exception import IFlowIdentityError, IFlowValidationError
from iflow.lib.identities import (
    ITEMS,
    AnalyticField3,
    IdentityReport,
    check_identities,
    constant_field,
    identity_residual,
    identity_residual_vector,
    linear_field,
    random_field,
    trig_field,
)

@pytest.fixture
def rng():
  return np.random.default_rng(11)

@pytest.fixture
def points(rng):
  return rng.uniform(-np.pi, np.pi, size=(50, 3))

@pytest.mark.parametrize('item', ITEMS)
def test_constant_fields(item):
    """Both sides vanish for constant fields."""
    v, z = constant_field([1.0, -2.0, 0.5]), constant_field([0.3, 0.0, 4.0])
    assert identity_residual(item, v, z, [0.2, 0.4, -1.0]) == 0.0

@pytest.mark.parametrize('item', ITEMS)
def test_linear_fields(item, rng, points):
    """v = Ap + c, z = Bp + d: residual at rounding level."""
    v = linear_field(rng.normal(size=(3, 3)), rng.normal(size=3))
    z = linear_field(rng.normal(size=(3, 3)))
    for p in points:
        assert identity_residual(item, v, z, p) <= 1e-12

@pytest.mark.parametrize('item', ITEMS)
def test_trig_fields(item, rng, points):
    """Trigonometric modes satisfy the identities within 1e-10."""
    v = trig_field([1.0, 2.0, -0.5], [[1, 0, 2], [0, -1, 1], [3, 1, 0]], [0.1, 0.2, 0.3])
    z = trig_field([0.7, -1.2, 1.5], [[2, 1, 0], [1, 1, 1], [0, -2, 1]])
    for p in points:
        assert identity_residual(item, v, z, p) <= 1e-10

def test_third_identity_from_the_first(rng, points):
    """Residual 3 is minus the sum of residual 1 for (v, z) and (z, v)."""
    v, z = random_field(rng), random_field(rng)
    for p in points:
        r3 = identity_residual_vector(3, v, z, p)
        r1 = identity_residual_vector(1, v, z, p) + identity_residual_vector(1, z, v, p)
        assert np.allclose(r3, -r1, atol=1e-10)
        assert np.allclose(r3, 0.0, atol=1e-10)

def test_sum_of_fields(rng):
    """Adding fields adds values and Jacobians."""
    a, b = random_field(rng), random_field(rng)
    p = np.array([0.1, -0.7, 2.0])
    s = a + b
    assert np.allclose(s.value(p), a.value(p) + b.value(p))
    assert np.allclose(s.jacobian(p), a.jacobian(p) + b.jacobian(p))

def test_consistency_accepts_exact_jacobians(rng, points):
    """Random fields carry the right derivatives."""
    for _ in range(5):
        assert random_field(rng).check_consistency(points) < 1e-5

def test_consistency_rejects_wrong_jacobian():
    """A Jacobian that does not match the field raises."""
    bad = AnalyticField3(value=lambda p: p * p, jacobian=lambda p: np.eye(3))
    with pytest.raises(IFlowIdentityError) as e:
        bad.check_consistency([1.0, 2.0, 3.0])
    assert e.value.point == (1.0, 2.0, 3.0)
    assert e.value.mismatch == pytest.approx(5.0, rel=1e-6)

def test_unknown_item():
    """Only identities 1, 2 and 3 exist."""
    v = constant_field([1.0, 0.0, 0.0])
    with pytest.raises(IFlowValidationError):
        identity_residual(4, v, v, [0.0, 0.0, 0.0])

def test_check_identities_passes():
    """1000 random trials stay within the tolerance."""
    report = check_identities(1000, seed=0)
    assert isinstance(report, IdentityReport)
    assert report.passed, report.max_residual
    assert set(report.max_residual) == set(ITEMS)
    d = report.to_dict()
    assert d['trials'] == 1000 and d['seed'] == 0 and d['passed'] is True

def test_check_identities_seeded():
    """The same seed gives the same report."""
    assert check_identities(20, seed=5).max_residual == check_identities(20, seed=5).max_residual

def test_check_identities_needs_trials():
    """At least one trial."""
    with pytest.raises(IFlowValidationError):
        check_identities(0)

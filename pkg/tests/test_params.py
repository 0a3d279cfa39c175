import math

import pytest
from hypothesis import given, strategies as st

from delaywave.params import (
    BoundaryDelayParams,
    InternalDelayParams,
    ParameterError,
    default_varpi,
    default_xi,
    dissipation_prefactors,
    validate_boundary_params,
    validate_internal_params,
    varpi_bound,
)


def test_valid_boundary_window():
    p = BoundaryDelayParams(2.0, 1.0, 0.5, 0.75, 1e-6, 1.0)
    rep = validate_boundary_params(p, 1.0, 1.0)
    assert rep.valid, str(rep)


def test_beta_equal_alpha_rejected():
    p = BoundaryDelayParams(1.0, 1.0, 0.5, 0.6, 1e-6, 1.0)
    rep = validate_boundary_params(p, 1.0, 1.0)
    assert not rep.valid
    assert "beta_below_alpha" in [c.name for c in rep.violations()]


def test_xi_below_window_rejected():
    p = BoundaryDelayParams(2.0, 1.0, 0.5, 0.4, 1e-6, 1.0)
    rep = validate_boundary_params(p, 1.0, 1.0)
    assert [c.name for c in rep.violations()] == ["xi_lower"]


@pytest.mark.parametrize("bad", [dict(tau=0.0), dict(alpha=0.0), dict(xi=math.nan),
                                 dict(beta=math.inf)])
def test_boundary_input_errors(bad):
    kw = dict(alpha=2.0, beta=1.0, tau=0.5, xi=1.0, varpi=0.01, delta_w=1.0) | bad
    with pytest.raises(ParameterError):
        validate_boundary_params(BoundaryDelayParams(**kw), 1.0, 1.0)


@pytest.mark.parametrize("a,b,tau,xi", [(2, 1, 0.5, 1.0), (1, 0.5, 1, 1.0), (3, 2, 0.1, 0.3)])
def test_default_xi_midpoint(a, b, tau, xi):
    assert default_xi(a, b, tau) == pytest.approx(xi, rel=1e-15)


def test_default_xi_empty_window():
    with pytest.raises(ParameterError):
        default_xi(1.0, 1.0, 1.0)


def test_default_varpi_examples():
    p = BoundaryDelayParams(2.0, 1.0, 0.5, 1.0, 0.0, 1.0)
    assert varpi_bound(p, 1.0, 1.0) == pytest.approx(1 / 6)
    assert default_varpi(p, 1.0, 1.0) == pytest.approx(1 / 12)
    q = BoundaryDelayParams(1.0, 0.5, 1.0, 0.75, 0.0, 0.5)
    assert default_varpi(q, 2.0, 2.0) == pytest.approx(3 / 64)


def test_varpi_cap_near_degenerate_delta():
    p = BoundaryDelayParams(2.0, 1.0, 0.5, 1.0, 0.0, 3.0 - 1e-12)
    assert varpi_bound(p, 1.0, 1.0) > 1e6
    assert default_varpi(p, 1.0, 1.0, cap=0.25) == 0.25
    with pytest.raises(ParameterError):
        varpi_bound(BoundaryDelayParams(2.0, 1.0, 0.5, 1.0, 0.0, 3.0), 1.0, 1.0)


@pytest.mark.parametrize("q,valid", [
    (InternalDelayParams(1.0, 0.25, 1.0, 1.0), True),
    (InternalDelayParams(1.0, 0.9, 1.0, 1.05), True),
    (InternalDelayParams(1.0, 0.0, 1.0, 1.0), False),
])
def test_internal_window(q, valid):
    rep = validate_internal_params(q)
    assert rep.valid is valid
    if q.b_sup == 0:
        assert rep.notes and "undelayed" in rep.notes[0]


pos = st.floats(0.01, 10.0)


@given(alpha=pos, frac=st.floats(0.01, 0.99), tau=st.floats(0.01, 5.0),
       omega=st.floats(0.1, 10.0), gamma=st.floats(0.1, 10.0))
def test_defaults_lie_inside_windows(alpha, frac, tau, omega, gamma):
    beta = frac * alpha
    p = BoundaryDelayParams.with_defaults(alpha, beta, tau, omega, gamma)
    rep = validate_boundary_params(p, omega, gamma)
    assert rep.valid, str(rep)
    assert all(c > 0 for c in dissipation_prefactors(p))

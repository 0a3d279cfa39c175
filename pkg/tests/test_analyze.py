import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from conftest import boundary_1d, internal_2d, random_state
from delaywave.analyze import (
    FitError,
    classify_decay,
    distance_to_equilibrium,
    equilibrium_chi,
    equilibrium_for,
    equilibrium_zeta,
    fit_decay,
)
from delaywave.generator import WaveState, constraint_functional
from delaywave.mesh import build_interval_mesh, build_rect_mesh, damping_strip_field
from delaywave.params import BoundaryDelayParams


def _state(m, y, z, u):
    return WaveState(np.asarray(y, float), np.asarray(z, float), np.asarray(u, float))


def test_chi_constant_displacement():
    m = build_interval_mesh(10)
    p = BoundaryDelayParams.with_defaults(2, 1, 0.5, 1.0, 1.0)
    eq = equilibrium_chi(m, p, _state(m, np.full(11, 0.7), np.zeros(11), np.zeros((1, 4))))
    assert eq.value == pytest.approx(0.7, rel=1e-15)


def test_chi_unit_velocity():
    m = build_interval_mesh(10)
    p = BoundaryDelayParams.with_defaults(2, 1, 0.5, 1.0, 1.0)
    eq = equilibrium_chi(m, p, _state(m, np.zeros(11), np.ones(11), np.zeros((1, 4))))
    assert eq.value == pytest.approx(1 / 3, rel=1e-15)
    assert np.all(eq.state.y == eq.value) and not eq.state.z.any()


def test_chi_history_term():
    m = build_interval_mesh(10)
    p = BoundaryDelayParams.with_defaults(2, 1, 0.5, 1.0, 1.0)
    eq = equilibrium_chi(m, p, _state(m, np.zeros(11), np.zeros(11), np.ones((1, 4))))
    assert eq.value == pytest.approx(-p.beta * p.tau / (p.alpha + p.beta), rel=1e-15)


def test_chi_needs_gamma1():
    m = build_rect_mesh(4, 4)
    p = BoundaryDelayParams.with_defaults(2, 1, 0.5, 1.0, 1.0)
    with pytest.raises(ValueError):
        equilibrium_chi(m, p, _state(m, np.zeros(25), np.zeros(25), np.zeros((0, 0))))


def test_zeta_examples():
    m = build_rect_mesh(10, 10)
    a = damping_strip_field(m, 0.2)
    b = a.scaled(0.1)
    n = m.n_nodes
    u = np.zeros((int(b.support_mask.sum()), 4))
    assert equilibrium_zeta(m, a, b, 1.0, _state(m, np.full(n, 2.0), np.zeros(n), u)).value \
        == pytest.approx(2.0, rel=1e-14)
    # analytic measures give 1/(1.1*0.2); the nodal strip covers 0.15 of the square
    w = m.interior_quadrature
    z = equilibrium_zeta(m, a, b, 1.0, _state(m, np.zeros(n), np.ones(n), u)).value
    assert z == pytest.approx(1.0 / (1.1 * (w @ a.values)), rel=1e-14)
    assert abs(z - 1 / (1.1 * 0.2)) < 2.0
    with pytest.raises(ValueError):
        equilibrium_zeta(m, a.scaled(0.0), None, 1.0, _state(m, np.zeros(n), np.ones(n), u))


@pytest.mark.parametrize("make", [boundary_1d, internal_2d])
def test_equilibrium_carries_charge(make):
    g = make()
    s0 = random_state(g, 11)
    eq = equilibrium_for(g, s0)
    q0 = constraint_functional(g, s0)
    assert constraint_functional(g, eq.state) == pytest.approx(q0, rel=1e-12, abs=1e-12)
    assert distance_to_equilibrium(g, eq.state, eq) == 0.0


@settings(max_examples=25, deadline=None)
@given(seed=st.integers(0, 2**31), a=st.floats(-3, 3), b=st.floats(-3, 3))
def test_chi_is_linear(seed, a, b):
    g = boundary_1d(n=12, m_rho=4)
    s1, s2 = random_state(g, seed), random_state(g, seed + 1)
    comb = g.unstack(a * g.stack(s1) + b * g.stack(s2))
    v = [equilibrium_for(g, s).value for s in (s1, s2, comb)]
    assert v[2] == pytest.approx(a * v[0] + b * v[1], rel=1e-10, abs=1e-12)


def test_distance_velocity_only():
    g = internal_2d()
    eq = equilibrium_for(g, random_state(g, 0))
    dz = np.random.default_rng(2).standard_normal(g.n_nodes)
    s = eq.state.copy()
    s.z = s.z + dz
    d = distance_to_equilibrium(g, s, eq)
    assert d == pytest.approx(np.sqrt(g.mesh.interior_quadrature @ dz**2), rel=1e-13)


T = np.linspace(1, 100, 400)


def test_fit_exponential_exact():
    f = fit_decay(T, 3 * np.exp(-0.5 * T), "exponential", window=(1, 100))
    assert f.rate == pytest.approx(0.5, abs=1e-12)
    assert f.amplitude == pytest.approx(3.0, rel=1e-10)
    assert f.r_squared == pytest.approx(1.0, abs=1e-12)


def test_fit_polynomial_exact():
    f = fit_decay(T, 2 * T ** (-1 / 3), "polynomial")
    assert f.rate == pytest.approx(1 / 3, abs=1e-12)
    assert f.fit_window == (10.0, 100.0)


@settings(max_examples=40, deadline=None)
@given(model=st.sampled_from(["exponential", "polynomial", "logarithmic"]),
       C=st.floats(0.1, 10), rate=st.floats(0.05, 2.0))
def test_fit_round_trip(model, C, rate):
    t = np.geomspace(1, 50, 200)
    from delaywave.analyze import DecayFit
    v = DecayFit(model, C, rate, 1.0, (1, 50)).predict(t)
    f = fit_decay(t, v, model, window=(1, 50))
    assert f.rate == pytest.approx(rate, abs=1e-10)
    assert f.amplitude == pytest.approx(C, rel=1e-10)


@pytest.mark.parametrize("model,v", [
    ("exponential", 3 * np.exp(-0.5 * T)),
    ("polynomial", T ** (-2 / 3)),
    ("logarithmic", 1 / np.log(2 + T)),
])
def test_classify_ranks_generator_first(model, v):
    c = classify_decay(T, v, window=(1, 100))
    assert c.best.model == model


def test_classify_margin_exponential():
    c = classify_decay(T, 3 * np.exp(-0.5 * T) * (1 + 1e-6 * np.sin(T)), window=(1, 100))
    assert c.best.model == "exponential" and min(c.margins) > 10


def test_fit_errors():
    with pytest.raises(FitError):
        fit_decay(T, -np.ones_like(T), "exponential", window=(1, 100))
    with pytest.raises(FitError):
        fit_decay(T, np.ones_like(T), "exponential", window=(5, 5))
    with pytest.raises(FitError):
        fit_decay(T[:5], np.ones(5), "polynomial", window=(1, 100))
    with pytest.raises(FitError):
        fit_decay(np.linspace(0, 1, 20), np.ones(20), "polynomial", window=(0, 1))
    with pytest.raises(FitError):
        fit_decay(T, np.ones_like(T), "stretched", window=(1, 100))


def test_rel_floor_drops_roundoff_tail():
    t = np.linspace(0, 100, 1001)
    v = np.maximum(np.exp(-0.4 * t), 1e-16)
    f = fit_decay(t, v, "exponential", window=(10, 100), rel_floor=1e-11)
    assert f.rate == pytest.approx(0.4, rel=1e-10)

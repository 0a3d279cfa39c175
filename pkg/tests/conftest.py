import numpy as np
import pytest

from delaywave.delayline import build_delayline
from delaywave.generator import (
    WaveState,
    assemble_boundary_generator,
    assemble_internal_generator,
)
from delaywave.mesh import build_interval_mesh, build_rect_mesh, damping_strip_field
from delaywave.params import BoundaryDelayParams


def boundary_1d(n=40, m_rho=10, alpha=2.0, beta=1.0, tau=0.5, xi=1.0, viscosity=0.0,
                gamma1_end="right"):
    m = build_interval_mesh(n, 1.0, gamma1_end)
    p = BoundaryDelayParams.with_defaults(alpha, beta, tau, m.omega_measure,
                                          m.gamma1_measure, xi=xi)
    return assemble_boundary_generator(m, p, build_delayline(m_rho, tau), viscosity=viscosity)


def boundary_2d(n=8, m_rho=5):
    m = build_rect_mesh(n, n, gamma1_spec="all")
    p = BoundaryDelayParams.with_defaults(2.0, 1.0, 0.5, m.omega_measure, m.gamma1_measure)
    return assemble_boundary_generator(m, p, build_delayline(m_rho, 0.5))


def internal_2d(n=8, m_rho=5, bscale=0.25, tau=1.0, xi=1.0):
    m = build_rect_mesh(n, n)
    a = damping_strip_field(m, 0.3, 1.0)
    return assemble_internal_generator(m, a, a.scaled(bscale), tau, xi,
                                       build_delayline(m_rho, tau))


def random_state(g, seed=0):
    rng = np.random.default_rng(seed)
    return g.unstack(rng.standard_normal(g.size))


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture(params=["boundary_1d", "boundary_2d", "internal_2d"])
def any_generator(request):
    return {"boundary_1d": boundary_1d, "boundary_2d": boundary_2d,
            "internal_2d": internal_2d}[request.param]()


ACCEPTANCE_LINES: list[str] = []


@pytest.fixture
def acceptance():
    """Record one ``<id> PASS|FAIL: detail`` line per criterion."""
    def record(cid, ok, detail):
        line = f"{cid} {'PASS' if ok else 'FAIL'}: {detail}"
        ACCEPTANCE_LINES.append(line)
        print(line)
        return ok
    return record


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)

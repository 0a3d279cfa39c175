"""Discrete generators and Gram matrices for the delayed wave systems.

State vectors are stacked as ``[y; z; u]`` with ``u`` flattened node-major
(``u[s, j-1]`` is the delay line of active node ``s`` at ``rho_j``). The
``rho = 0`` slot of every delay line is ``z`` itself, so the coupling
``z = u(., 0)`` holds by construction.

Every generator is written in the same block form

    y' = z
    z' = L y + d*z - E u_m        (E scatters coupling*u_m onto active nodes)
    u' = transport with inflow z on active nodes

and differs only in ``d``, the active set, the coupling weights and the Gram
matrix. The conserved linear form ``c`` satisfies ``c @ A == 0``.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

from .delayline import DelayLine
from .mesh import CoefField, Mesh, assemble_neumann_laplacian, stiffness_matrix
from .params import (
    BoundaryDelayParams,
    InternalDelayParams,
    ParameterError,
    validate_boundary_params,
    validate_internal_params,
)

BOUNDARY_DELAY = "boundary_delay"
BOUNDARY_UNDELAYED = "boundary_undelayed"
INTERNAL_DELAY = "internal_delay"
INTERNAL_UNDELAYED = "internal_undelayed"
KINDS = (BOUNDARY_DELAY, BOUNDARY_UNDELAYED, INTERNAL_DELAY, INTERNAL_UNDELAYED)


class AssemblyError(ValueError):
    pass


@dataclass
class WaveState:
    """``y`` displacement, ``z`` velocity, ``u`` delay lines ``(n_active, m_rho)``.

    Column ``j-1`` of ``u`` holds ``rho_j = j/m_rho``; the ``rho = 0`` value is ``z``.
    """

    y: np.ndarray
    z: np.ndarray
    u: np.ndarray

    def copy(self) -> "WaveState":
        return WaveState(self.y.copy(), self.z.copy(), self.u.copy())

    def __add__(self, other: "WaveState") -> "WaveState":
        return WaveState(self.y + other.y, self.z + other.z, self.u + other.u)

    def __sub__(self, other: "WaveState") -> "WaveState":
        return WaveState(self.y - other.y, self.z - other.z, self.u - other.u)


@dataclass(frozen=True, eq=False)
class DiscreteGenerator:
    kind: str
    A: sp.csr_matrix
    G0: sp.csr_matrix          # sparse part of the Gram matrix
    varpi: float               # G = G0 + varpi * outer(constraint, constraint)
    constraint: np.ndarray
    mesh: Mesh
    L: sp.csr_matrix
    damping: np.ndarray        # d
    active: np.ndarray         # node indices carrying a delay line
    coupling: np.ndarray       # weight of u_m in z' on each active node
    delay_weight: np.ndarray   # per active node, multiplies drho in the Gram matrix
    delayline: DelayLine | None
    viscosity: float = 0.0     # z' also receives viscosity * L z
    params: BoundaryDelayParams | InternalDelayParams | None = None
    a: CoefField | None = None
    b: CoefField | None = None

    @property
    def n_nodes(self) -> int:
        return self.mesh.n_nodes

    @property
    def m_rho(self) -> int:
        return self.delayline.m_rho if (self.delayline is not None and len(self.active)) else 0

    @property
    def size(self) -> int:
        return self.A.shape[0]

    @property
    def tau(self) -> float | None:
        return self.delayline.tau if self.delayline is not None else None

    @property
    def is_boundary(self) -> bool:
        return self.kind in (BOUNDARY_DELAY, BOUNDARY_UNDELAYED)

    def stack(self, s: WaveState) -> np.ndarray:
        n, na, m = self.n_nodes, len(self.active), self.m_rho
        if s.y.shape != (n,) or s.z.shape != (n,) or s.u.shape != (na, m):
            raise ValueError(
                f"state shapes {s.y.shape}, {s.z.shape}, {s.u.shape} do not match "
                f"{self.kind} generator ({n} nodes, {na} delay lines of {m} cells)")
        return np.concatenate([s.y, s.z, s.u.ravel()])

    def unstack(self, x: np.ndarray) -> WaveState:
        n = self.n_nodes
        return WaveState(x[:n].copy(), x[n:2 * n].copy(),
                         x[2 * n:].reshape(len(self.active), self.m_rho).copy())

    def zero_state(self) -> WaveState:
        return self.unstack(np.zeros(self.size))

    def gram_apply(self, x: np.ndarray) -> np.ndarray:
        out = self.G0 @ x
        if self.varpi:
            out = out + self.varpi * (self.constraint @ x) * self.constraint
        return out

    def inner(self, x1: np.ndarray, x2: np.ndarray) -> float:
        return float(np.real(np.vdot(x1, self.gram_apply(x2))))

    def gram_dense(self) -> np.ndarray:
        G = self.G0.toarray()
        if self.varpi:
            G += self.varpi * np.outer(self.constraint, self.constraint)
        return G

    def kernel_vector(self) -> np.ndarray:
        """Constant-displacement equilibrium direction ``(1, 0, 0)``."""
        x = np.zeros(self.size)
        x[:self.n_nodes] = 1.0
        return x


def _assemble(kind, mesh, d, active, coupling, delay_weight, dl, c_y, c_u_node,
              varpi, viscosity=0.0, **extra) -> DiscreteGenerator:
    n = mesh.n_nodes
    w = mesh.interior_quadrature
    L, _ = assemble_neumann_laplacian(mesh)
    K = stiffness_matrix(mesh, L)
    na = len(active)
    m = dl.m_rho if (dl is not None and na) else 0

    I = sp.identity(n, format="csr")
    if viscosity < 0:
        raise ValueError("viscosity must be non-negative")
    A_zz = sp.diags(d) + viscosity * L if viscosity else sp.diags(d)
    if na:
        D = dl.transport
        sel = sp.csr_matrix((np.ones(na), (np.arange(na), active)), shape=(na, n))
        A_uu = sp.kron(sp.identity(na), D[:, 1:], format="csr")
        A_uz = sp.kron(sp.identity(na), D[:, :1], format="csr") @ sel
        A_zu = sp.csr_matrix((-coupling, (active, np.arange(na) * m + (m - 1))),
                             shape=(n, na * m))
        A = sp.bmat([[None, I, None],
                     [L, A_zz, A_zu],
                     [None, A_uz, A_uu]], format="csr")
        G_u = sp.kron(sp.diags(delay_weight), sp.diags(dl.quadrature[1:]), format="csr")
        G0 = sp.block_diag([K, sp.diags(w), G_u], format="csr")
        c_u = np.outer(c_u_node, dl.quadrature[1:]).ravel()
    else:
        A = sp.bmat([[None, I], [L, A_zz]], format="csr")
        G0 = sp.block_diag([K, sp.diags(w)], format="csr")
        c_u = np.zeros(0)
    c = np.concatenate([c_y, w, c_u])
    return DiscreteGenerator(
        kind=kind, A=A, G0=G0, varpi=float(varpi), constraint=c, mesh=mesh, L=L,
        damping=np.asarray(d, dtype=float), active=np.asarray(active, dtype=int),
        coupling=np.asarray(coupling, dtype=float),
        delay_weight=np.asarray(delay_weight, dtype=float),
        delayline=dl, viscosity=float(viscosity), **extra)


def assemble_boundary_generator(m: Mesh, p: BoundaryDelayParams, dl: DelayLine,
                                strict: bool = True,
                                viscosity: float = 0.0) -> DiscreteGenerator:
    """Boundary-delay generator with the ``varpi``-weighted energy.

    ``strict=False`` skips the admissibility check (used for near-undamped
    spectral probes where ``alpha == beta``). ``viscosity`` adds ``nu * L z``
    to the velocity equation; ``nu ~ h**2`` removes the spurious, almost
    undamped grid modes near frequency ``2/h`` without touching the charge.
    """
    g1 = m.gamma1_nodes
    if len(g1) == 0:
        raise AssemblyError("boundary-delay generator needs a nonempty Gamma1")
    if strict:
        rep = validate_boundary_params(p, m.omega_measure, m.gamma1_measure)
        if not rep.valid:
            raise ParameterError("invalid boundary-delay parameters:\n" + str(rep))
    if abs(dl.tau - p.tau) > 1e-14 * p.tau:
        raise AssemblyError("delay line tau differs from parameter tau")
    wb = m.gamma1_weights
    scale = wb / m.interior_quadrature[g1]
    d = np.zeros(m.n_nodes)
    d[g1] = -p.alpha * scale
    c_y = np.zeros(m.n_nodes)
    c_y[g1] = (p.alpha + p.beta) * wb
    return _assemble(BOUNDARY_DELAY, m, d, g1, p.beta * scale, p.xi * wb, dl, c_y,
                     -p.beta * p.tau * wb, p.varpi, viscosity, params=p)


def assemble_boundary_undelayed(m: Mesh, p: BoundaryDelayParams,
                                viscosity: float = 0.0) -> DiscreteGenerator:
    """Generator with the Robin law ``dy/dnu + alpha*z = 0`` and no delay."""
    g1 = m.gamma1_nodes
    if len(g1) == 0:
        raise AssemblyError("boundary damping needs a nonempty Gamma1")
    if not p.alpha > 0:
        raise ParameterError("alpha must be positive")
    wb = m.gamma1_weights
    d = np.zeros(m.n_nodes)
    d[g1] = -p.alpha * wb / m.interior_quadrature[g1]
    c_y = np.zeros(m.n_nodes)
    c_y[g1] = p.alpha * wb
    return _assemble(BOUNDARY_UNDELAYED, m, d, np.zeros(0, dtype=int), np.zeros(0),
                     np.zeros(0), None, c_y, np.zeros(0), p.varpi, viscosity, params=p)


def assemble_internal_generator(m: Mesh, a: CoefField, b: CoefField | None, tau: float,
                                xi: float, dl: DelayLine | None,
                                strict: bool = True,
                                uniform_delay_weight: bool = False,
                                viscosity: float = 0.0) -> DiscreteGenerator:
    """Internal damping ``a*z + b*z(t - tau)`` under Neumann conditions.

    The delay line lives on ``supp(b)`` and carries weight ``xi * b/||b||``, the
    localisation for which the energy is nonincreasing whenever
    ``-2a + (b/||b||)(||b|| + xi/tau) <= 0`` pointwise (true under the usual
    window when ``b`` is proportional to ``a``). ``uniform_delay_weight=True``
    instead puts a delay line of weight ``xi`` on every node; that norm is
    not dissipative where ``a`` vanishes and exists for comparison only.
    ``b`` identically zero returns the undelayed generator.
    """
    if np.any(a.values < 0) or (b is not None and np.any(b.values < 0)):
        raise ValueError("damping coefficients must be non-negative")
    if b is None or b.sup == 0:
        return assemble_internal_undelayed(m, a, viscosity)
    if dl is None:
        raise AssemblyError("delayed internal damping needs a delay line")
    if abs(dl.tau - tau) > 1e-14 * tau:
        raise AssemblyError("delay line tau differs from parameter tau")
    q = InternalDelayParams(a.sup, b.sup, tau, xi)
    if strict:
        rep = validate_internal_params(q)
        if not rep.valid:
            raise ParameterError("invalid internal-delay parameters:\n" + str(rep))
        if not uniform_delay_weight:
            local = -2 * a.values + (b.values / b.sup) * (b.sup + xi / tau)
            if local.max() > 1e-12 * max(1.0, a.sup):
                raise ParameterError(
                    "pointwise dissipation condition -2a + (b/||b||)(||b|| + xi/tau) <= 0 "
                    f"fails (max {local.max():.3g}); b must be dominated by a")
    w = m.interior_quadrature
    if uniform_delay_weight:
        active = np.arange(m.n_nodes)
        weight = xi * w
    else:
        active = np.flatnonzero(b.support_mask)
        weight = xi * w[active] * b.values[active] / b.sup
    return _assemble(INTERNAL_DELAY, m, -a.values, active, b.values[active], weight, dl,
                     (a.values + b.values) * w, -tau * b.values[active] * w[active], 0.0,
                     viscosity, params=q, a=a, b=b)


def assemble_internal_undelayed(m: Mesh, a: CoefField,
                                viscosity: float = 0.0) -> DiscreteGenerator:
    """``z' = L y - a*z``; ``a`` identically zero gives the undamped wave."""
    w = m.interior_quadrature
    return _assemble(INTERNAL_UNDELAYED, m, -a.values, np.zeros(0, dtype=int), np.zeros(0),
                     np.zeros(0), None, a.values * w, np.zeros(0), 0.0, viscosity, a=a,
                     b=CoefField.from_values(np.zeros(m.n_nodes)))


def assemble_scalar_delay(alpha: float, beta: float, dl: DelayLine) -> sp.csr_matrix:
    """Matrix of ``z' = -alpha*z - beta*z(t - tau)`` on the state ``[z, u_1..u_m]``."""
    m = dl.m_rho
    top = sp.csr_matrix(([-alpha, -beta], ([0, 0], [0, m])), shape=(1, m + 1))
    return sp.vstack([top, dl.transport], format="csr")


def constraint_functional(g: DiscreteGenerator, s: WaveState) -> float:
    return float(g.constraint @ g.stack(s))


def project_mean_zero(m: Mesh, field: np.ndarray) -> np.ndarray:
    w = m.interior_quadrature
    return field - (w @ field) / w.sum()


def g_norm(g: DiscreteGenerator, s: WaveState) -> float:
    x = g.stack(s)
    return float(np.sqrt(max(g.inner(x, x), 0.0)))


def export_coo(matrix, path) -> None:
    """Write ``row col value`` lines (0-based) for a sparse or dense matrix."""
    coo = sp.coo_matrix(matrix)
    with open(path, "w") as fh:
        fh.write(f"# {coo.shape[0]} {coo.shape[1]} {coo.nnz}\n")
        for r, c, v in zip(coo.row, coo.col, coo.data):
            fh.write(f"{r} {c} {v:.17g}\n")

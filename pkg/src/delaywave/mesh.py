"""Node-centred grids on an interval or rectangle, Neumann Laplacian, damping fields.

Nodes include the boundary. The Laplacian uses mirror ghost nodes, so with the
nodal quadrature weights ``w`` the product ``diag(w) @ L`` is symmetric and
annihilates constants; a boundary flux ``g`` enters node ``i`` as
``(w_b / w_i) * g``, which makes the discrete divergence theorem exact.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

GAMMA0 = "Gamma0"
GAMMA1 = "Gamma1"


@dataclass(frozen=True)
class Mesh:
    dim: int
    shape: tuple[int, ...]          # nodes per direction
    lengths: tuple[float, ...]
    h: tuple[float, ...]
    node_coords: np.ndarray          # (N, dim)
    interior_quadrature: np.ndarray  # (N,), sums to |Omega|
    boundary_nodes: np.ndarray       # node indices
    boundary_labels: np.ndarray      # GAMMA0 / GAMMA1 per boundary node
    boundary_quadrature: np.ndarray  # sums to |Gamma|
    outward_normal: np.ndarray       # (n_boundary, dim)

    @property
    def n_nodes(self) -> int:
        return self.node_coords.shape[0]

    @property
    def omega_measure(self) -> float:
        return float(self.interior_quadrature.sum())

    @property
    def gamma1_mask(self) -> np.ndarray:
        return self.boundary_labels == GAMMA1

    @property
    def gamma1_nodes(self) -> np.ndarray:
        return self.boundary_nodes[self.gamma1_mask]

    @property
    def gamma1_weights(self) -> np.ndarray:
        return self.boundary_quadrature[self.gamma1_mask]

    @property
    def gamma1_measure(self) -> float:
        return float(self.gamma1_weights.sum())


@dataclass(frozen=True)
class CoefField:
    values: np.ndarray
    support_mask: np.ndarray

    @classmethod
    def from_values(cls, values) -> "CoefField":
        v = np.asarray(values, dtype=float)
        if np.any(v < 0):
            raise ValueError("damping coefficients must be non-negative")
        return cls(v, v > 0)

    @property
    def sup(self) -> float:
        return float(self.values.max()) if self.values.size else 0.0

    def scaled(self, factor: float) -> "CoefField":
        return CoefField.from_values(self.values * factor)


def _weights_1d(n_cells: int, h: float) -> np.ndarray:
    w = np.full(n_cells + 1, h)
    w[0] = w[-1] = h / 2
    return w


def _lap_1d(n_cells: int, h: float) -> sp.csr_matrix:
    n = n_cells + 1
    main = np.full(n, -2.0)
    upper = np.ones(n - 1)
    lower = np.ones(n - 1)
    # mirror ghosts: y_{-1} = y_1, y_{n} = y_{n-2}
    upper[0] = 2.0
    lower[-1] = 2.0
    return sp.diags([lower, main, upper], [-1, 0, 1], format="csr") / h**2


def build_interval_mesh(n_cells: int, length: float = 1.0, gamma1_end: str = "right") -> Mesh:
    if n_cells < 2:
        raise ValueError("n_cells must be >= 2")
    if not length > 0:
        raise ValueError("length must be positive")
    if gamma1_end not in ("left", "right", "both"):
        raise ValueError("gamma1_end must be one of left/right/both")
    h = length / n_cells
    x = np.linspace(0.0, length, n_cells + 1)
    labels = np.array([
        GAMMA1 if gamma1_end in ("left", "both") else GAMMA0,
        GAMMA1 if gamma1_end in ("right", "both") else GAMMA0,
    ])
    return Mesh(
        dim=1,
        shape=(n_cells + 1,),
        lengths=(float(length),),
        h=(h,),
        node_coords=x[:, None],
        interior_quadrature=_weights_1d(n_cells, h),
        boundary_nodes=np.array([0, n_cells]),
        boundary_labels=labels,
        boundary_quadrature=np.ones(2),
        outward_normal=np.array([[-1.0], [1.0]]),
    )


def build_rect_mesh(nx: int, ny: int, lx: float = 1.0, ly: float = 1.0,
                    gamma1_spec: str = "none") -> Mesh:
    """Tensor grid with ``nx`` by ``ny`` cells; node index is ``i*(ny+1) + j``."""
    if nx < 2 or ny < 2:
        raise ValueError("nx and ny must be >= 2")
    if not (lx > 0 and ly > 0):
        raise ValueError("rectangle side lengths must be positive")
    if gamma1_spec not in ("all", "none"):
        raise ValueError("gamma1_spec must be 'all' or 'none'")
    hx, hy = lx / nx, ly / ny
    x = np.linspace(0.0, lx, nx + 1)
    y = np.linspace(0.0, ly, ny + 1)
    X, Y = np.meshgrid(x, y, indexing="ij")
    coords = np.column_stack([X.ravel(), Y.ravel()])
    w = np.kron(_weights_1d(nx, hx), _weights_1d(ny, hy))

    I, J = np.meshgrid(np.arange(nx + 1), np.arange(ny + 1), indexing="ij")
    I, J = I.ravel(), J.ravel()
    on_left, on_right = I == 0, I == nx
    on_bottom, on_top = J == 0, J == ny
    on_boundary = on_left | on_right | on_bottom | on_top
    nodes = np.flatnonzero(on_boundary)

    # each boundary node owns half of each adjacent boundary segment
    xs = on_left | on_right     # node lies on a vertical side
    ys = on_bottom | on_top     # node lies on a horizontal side
    wb = np.zeros(len(coords))
    wb += np.where(xs, np.where((J == 0) | (J == ny), hy / 2, hy), 0.0)
    wb += np.where(ys, np.where((I == 0) | (I == nx), hx / 2, hx), 0.0)

    normal = np.zeros((len(coords), 2))
    normal[on_left, 0] -= 1
    normal[on_right, 0] += 1
    normal[on_bottom, 1] -= 1
    normal[on_top, 1] += 1
    normal = normal[nodes]
    normal /= np.linalg.norm(normal, axis=1, keepdims=True)

    label = GAMMA1 if gamma1_spec == "all" else GAMMA0
    return Mesh(
        dim=2,
        shape=(nx + 1, ny + 1),
        lengths=(float(lx), float(ly)),
        h=(hx, hy),
        node_coords=coords,
        interior_quadrature=w,
        boundary_nodes=nodes,
        boundary_labels=np.full(len(nodes), label),
        boundary_quadrature=wb[nodes],
        outward_normal=normal,
    )


def assemble_neumann_laplacian(m: Mesh) -> tuple[sp.csr_matrix, sp.csr_matrix]:
    """Return ``(L, B)``: mirror-closed Laplacian and the Gamma1 flux map.

    ``B`` has one column per Gamma1 node; ``L @ y + B @ g`` is the discrete
    Laplacian of a field whose outward normal derivative on Gamma1 equals ``g``
    (homogeneous Neumann elsewhere).
    """
    if m.dim == 1:
        L = _lap_1d(m.shape[0] - 1, m.h[0])
    else:
        nx, ny = m.shape[0] - 1, m.shape[1] - 1
        Lx = _lap_1d(nx, m.h[0])
        Ly = _lap_1d(ny, m.h[1])
        L = (sp.kron(Lx, sp.identity(ny + 1)) + sp.kron(sp.identity(nx + 1), Ly)).tocsr()
    g1 = m.gamma1_nodes
    vals = m.gamma1_weights / m.interior_quadrature[g1]
    B = sp.csr_matrix((vals, (g1, np.arange(len(g1)))), shape=(m.n_nodes, len(g1)))
    return L, B


def stiffness_matrix(m: Mesh, L: sp.spmatrix | None = None) -> sp.csr_matrix:
    """Symmetric positive semidefinite ``K = -diag(w) L`` (discrete Dirichlet form)."""
    if L is None:
        L, _ = assemble_neumann_laplacian(m)
    K = -(sp.diags(m.interior_quadrature) @ L)
    return ((K + K.T) * 0.5).tocsr()


def damping_strip_field(m: Mesh, eps: float, amplitude: float = 1.0) -> CoefField:
    """Indicator of ``x_1 < eps`` scaled by ``amplitude``."""
    lx = m.lengths[0]
    if not (0 < eps < lx):
        raise ValueError(f"eps must lie in (0, {lx}), got {eps}")
    if amplitude < 0:
        raise ValueError("amplitude must be non-negative")
    values = np.where(m.node_coords[:, 0] < eps, float(amplitude), 0.0)
    return CoefField.from_values(values)


def zero_field(m: Mesh) -> CoefField:
    return CoefField.from_values(np.zeros(m.n_nodes))

"""Transport representation of the delay and an exact ring-buffer oracle.

The delay line stores ``u(rho_j) = y_t(t - tau*rho_j)`` for ``rho_j = j/m``,
``j = 1..m``; the ``rho = 0`` value is the current velocity itself and is never
stored separately. Upwind differences paired with weights ``drho`` on nodes
``1..m`` telescope exactly:

    sum_j drho * (D u)_j = -(u_m - u_0) / tau
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp


@dataclass(frozen=True)
class DelayLine:
    m_rho: int
    tau: float
    rho_nodes: np.ndarray   # m_rho + 1 points on [0, 1]
    quadrature: np.ndarray  # m_rho + 1 weights, first is zero
    transport: sp.csr_matrix  # (m_rho, m_rho + 1): rows j = 1..m, columns u_0..u_m

    @property
    def drho(self) -> float:
        return 1.0 / self.m_rho

    @property
    def rate(self) -> float:
        """Transport speed in cells per unit time, ``1/(tau*drho)``."""
        return self.m_rho / self.tau


def build_delayline(m_rho: int, tau: float) -> DelayLine:
    if m_rho < 2:
        raise ValueError("m_rho must be >= 2")
    if not tau > 0:
        raise ValueError("tau must be positive")
    drho = 1.0 / m_rho
    rho = np.linspace(0.0, 1.0, m_rho + 1)
    w = np.full(m_rho + 1, drho)
    w[0] = 0.0
    c = m_rho / tau
    rows = np.arange(m_rho)
    D = sp.csr_matrix(
        (np.concatenate([np.full(m_rho, -c), np.full(m_rho, c)]),
         (np.concatenate([rows, rows]), np.concatenate([rows + 1, rows]))),
        shape=(m_rho, m_rho + 1),
    )
    return DelayLine(m_rho, float(tau), rho, w, D)


def sample_history(dl: DelayLine, history, points: np.ndarray) -> np.ndarray:
    """Delay-line initial values ``u(x, rho_j) = history(x, -tau*rho_j)``, j >= 1.

    ``history(points, s)`` must return one value per point for a scalar time
    ``s`` in ``[-tau, 0)``. Result has shape ``(len(points), m_rho)``.
    """
    cols = [np.broadcast_to(np.asarray(history(points, -dl.tau * r), dtype=float),
                            (len(points),)) for r in dl.rho_nodes[1:]]
    return np.column_stack(cols) if cols else np.zeros((len(points), 0))


class RingBuffer:
    """Circular store of past traces; ``step`` returns the one pushed ``tau`` ago."""

    def __init__(self, tau: float, dt: float, n_points: int, history=None, points=None):
        ratio = tau / dt
        capacity = int(round(ratio))
        if capacity < 1 or abs(ratio - capacity) > 1e-9 * max(1.0, ratio):
            raise ValueError(f"dt={dt} must divide tau={tau} exactly")
        self.tau = float(tau)
        self.dt = float(dt)
        self.capacity = capacity
        self._data = np.zeros((capacity, n_points))
        self._head = 0  # index of the oldest entry
        if history is not None:
            for k in range(capacity):
                self._data[k] = history(points, -tau + k * dt)

    def peek(self) -> np.ndarray:
        """Trace that the next ``step`` call will return."""
        return self._data[self._head].copy()

    def step(self, z_now: np.ndarray) -> np.ndarray:
        out = self._data[self._head].copy()
        self._data[self._head] = z_now
        self._head = (self._head + 1) % self.capacity
        return out


def ring_step(rb: RingBuffer, z_now: np.ndarray) -> np.ndarray:
    return rb.step(z_now)

"""Equilibria of the conserved-charge systems and decay-model fitting.

All three decay models are fitted as straight lines in log space:

    exponential   log v = log C - omega * t
    polynomial    log v = log C - p * log t
    logarithmic   log v = log C - r * log log(2 + t)

so a series generated by a model is recovered exactly, and residuals of the
three fits are directly comparable (two parameters each).
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .generator import DiscreteGenerator, WaveState
from .mesh import CoefField, Mesh
from .params import BoundaryDelayParams

MODELS = ("exponential", "polynomial", "logarithmic")
BOUNDARY_CHI = "boundary_chi"
INTERNAL_ZETA = "internal_zeta"


class FitError(ValueError):
    pass


@dataclass
class Equilibrium:
    kind: str
    value: float
    state: WaveState


def _delay_integral(u: np.ndarray, weights: np.ndarray) -> float:
    """``sum_x weights(x) * int_0^1 u(x, rho) drho`` with the delay-line weights."""
    if u.size == 0:
        return 0.0
    return float(weights @ u.sum(axis=1)) / u.shape[1]


def _constant_state(m: Mesh, s0: WaveState, value: float) -> WaveState:
    return WaveState(np.full(m.n_nodes, value), np.zeros(m.n_nodes), np.zeros_like(s0.u))


def equilibrium_chi(m: Mesh, p: BoundaryDelayParams, s0: WaveState) -> Equilibrium:
    """Limit constant of the boundary-delay system.

    ``s0.u`` holds the initial delay history on the Gamma1 nodes (one row per
    node, in ``m.gamma1_nodes`` order); it may be empty for the undelayed law.
    """
    g1 = m.gamma1_nodes
    meas = m.gamma1_measure
    if len(g1) == 0 or meas <= 0:
        raise ValueError("Gamma1 is empty; chi is undefined")
    wb = m.gamma1_weights
    s = p.alpha + p.beta
    num = (m.interior_quadrature @ s0.z + s * (wb @ s0.y[g1])
           - p.beta * p.tau * _delay_integral(s0.u, wb))
    chi = float(num / (s * meas))
    return Equilibrium(BOUNDARY_CHI, chi, _constant_state(m, s0, chi))


def equilibrium_zeta(m: Mesh, a: CoefField, b: CoefField | None, tau: float,
                     s0: WaveState) -> Equilibrium:
    """Limit constant of the internally damped system.

    Delay lines in ``s0.u`` sit on ``supp(b)``, or on every node when there is
    one row per node.
    """
    w = m.interior_quadrature
    bv = np.zeros(m.n_nodes) if b is None else b.values
    den = w @ (a.values + bv)
    if not den > 0:
        raise ValueError("a + b vanishes identically; zeta is undefined")
    num = w @ s0.z + w @ ((a.values + bv) * s0.y)
    if s0.u.size:
        rows = np.arange(m.n_nodes) if s0.u.shape[0] == m.n_nodes else np.flatnonzero(bv > 0)
        num -= tau * _delay_integral(s0.u, (w * bv)[rows])
    zeta = float(num / den)
    return Equilibrium(INTERNAL_ZETA, zeta, _constant_state(m, s0, zeta))


def equilibrium_for(g: DiscreteGenerator, s0: WaveState) -> Equilibrium:
    """Dispatch to the equilibrium formula matching the generator kind."""
    if g.is_boundary:
        p = g.params
        if g.m_rho == 0:  # undelayed Robin law: beta plays no role
            p = BoundaryDelayParams(p.alpha, 0.0, p.tau, p.xi, p.varpi, p.delta_w)
        return equilibrium_chi(g.mesh, p, s0)
    return equilibrium_zeta(g.mesh, g.a, g.b, g.tau or 0.0, s0)


def distance_to_equilibrium(g: DiscreteGenerator, s: WaveState, eq: Equilibrium) -> float:
    d = g.stack(s) - g.stack(eq.state)
    return float(np.sqrt(max(g.inner(d, d), 0.0)))


@dataclass
class DecayFit:
    model: str
    amplitude: float
    rate: float
    r_squared: float
    fit_window: tuple[float, float]
    ssr: float = 0.0      # residual sum of squares of log v
    n_samples: int = 0

    def predict(self, t) -> np.ndarray:
        return self.amplitude * np.exp(-self.rate * _abscissa(self.model, np.asarray(t, float)))


def _abscissa(model: str, t: np.ndarray) -> np.ndarray:
    if model == "exponential":
        return t
    if model == "polynomial":
        return np.log(t)
    if model == "logarithmic":
        return np.log(np.log(2.0 + t))
    raise FitError(f"unknown decay model {model!r}; expected one of {MODELS}")


def default_window(t: np.ndarray) -> tuple[float, float]:
    """Drop the first tenth of the run: decay statements are asymptotic."""
    t_end = float(np.max(t))
    return 0.1 * t_end, t_end


def _select(t, v, model, window, rel_floor):
    t = np.asarray(t, dtype=float)
    v = np.asarray(v, dtype=float)
    if t.shape != v.shape or t.ndim != 1:
        raise FitError("t and v must be 1-D arrays of equal length")
    if window is None:
        window = default_window(t)
    lo, hi = map(float, window)
    if not hi > lo:
        raise FitError(f"degenerate fit window [{lo}, {hi}]")
    sel = (t >= lo) & (t <= hi)
    if rel_floor is not None:
        # samples at round-off level carry no rate information
        sel &= v > rel_floor * np.max(np.abs(v))
    ts, vs = t[sel], v[sel]
    if np.any(vs <= 0):
        raise FitError("decay fits need strictly positive values")
    if model != "exponential" and np.any(ts <= 0):
        raise FitError(f"{model} fit needs t > 0 in the window")
    if len(ts) < 10:
        raise FitError(f"only {len(ts)} samples in window [{lo}, {hi}]; need at least 10")
    if np.ptp(ts) == 0:
        raise FitError("all samples share one time value")
    return ts, vs, (lo, hi)


def fit_decay(t, v, model: str, window=None, rel_floor: float | None = None) -> DecayFit:
    """Least-squares fit of ``model`` to positive samples ``v(t)`` in log space.

    ``window`` defaults to ``[0.1*t_end, t_end]``. ``rel_floor`` drops samples
    smaller than ``rel_floor * max|v|``. R^2 refers to ``log v``.
    """
    _abscissa(model, np.ones(1))
    ts, vs, win = _select(t, v, model, window, rel_floor)
    x = _abscissa(model, ts)
    yv = np.log(vs)
    X = np.column_stack([np.ones_like(x), x])
    coef, *_ = np.linalg.lstsq(X, yv, rcond=None)
    resid = yv - X @ coef
    ssr = float(resid @ resid)
    sst = float(np.sum((yv - yv.mean())**2))
    r2 = 1.0 - ssr / sst if sst > 0 else 1.0
    return DecayFit(model, float(np.exp(coef[0])), float(-coef[1]),
                    float(min(max(r2, 0.0), 1.0)), win, ssr, len(ts))


@dataclass
class Classification:
    ranked: list[DecayFit]
    margins: list[float]  # ssr of each runner-up divided by the best ssr

    @property
    def best(self) -> DecayFit:
        return self.ranked[0]


def classify_decay(t, v, window=None, rel_floor: float | None = None) -> Classification:
    """Fit every model and rank by residual sum (all have two parameters)."""
    fits = sorted((fit_decay(t, v, mdl, window, rel_floor) for mdl in MODELS),
                  key=lambda f: f.ssr)
    best = fits[0].ssr
    tiny = np.finfo(float).tiny
    margins = [f.ssr / max(best, tiny) for f in fits[1:]]
    return Classification(fits, margins)

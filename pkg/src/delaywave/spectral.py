"""Eigenvalues and G-weighted resolvent norms of the discrete generators.

The conserved form ``c`` (``c @ A == 0``) makes ``ker c`` invariant and pins a
zero eigenvalue on the constant displacement ``e``. Deflation removes that
pair by eliminating one pivot coordinate of ``ker c``: with ``V`` the basis
``x_p = -c_keep . x_keep / c_p``, the restriction is

    A_d = A[keep, keep] - outer(A[keep, p], c[keep] / c[p])

and, because the rank-one part of ``G`` vanishes on ``ker c``, its Gram
matrix is ``V^T G0 V``.
"""
from __future__ import annotations

import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np
import scipy.linalg as la
import scipy.sparse as sp
from scipy.sparse.linalg import LinearOperator, eigs, splu
from scipy.special import lambertw

from .generator import DiscreteGenerator

log = logging.getLogger(__name__)

DENSE_LIMIT = 4000


class SpectralError(RuntimeError):
    pass


@dataclass
class SpectrumReport:
    eigenvalues: np.ndarray
    abscissa: float
    imag_axis_margin: float
    deflated: bool


@dataclass
class Deflation:
    A: np.ndarray      # restriction of the generator to ker c, dense
    G: np.ndarray      # Gram matrix in the same coordinates
    keep: np.ndarray
    pivot: int


def deflate(g: DiscreteGenerator) -> Deflation:
    c = g.constraint
    n = g.n_nodes
    # pivot on the largest velocity weight: a z-slot, so G0[p, :] is diagonal
    p = n + int(np.argmax(np.abs(c[n:2 * n])))
    keep = np.delete(np.arange(g.size), p)
    v = -c[keep] / c[p]
    A = g.A.tocsc()
    Ad = A[keep][:, keep].toarray() + np.outer(A[keep, p].toarray().ravel(), v)
    G0 = g.G0.tocsc()
    col = G0[keep, p].toarray().ravel()
    Gd = (G0[keep][:, keep].toarray() + np.outer(col, v) + np.outer(v, col)
          + G0[p, p] * np.outer(v, v))
    return Deflation(Ad, 0.5 * (Gd + Gd.T), keep, p)


def _check_dense(g: DiscreteGenerator, limit: int) -> None:
    if g.size > limit:
        raise SpectralError(
            f"state dimension {g.size} exceeds the dense limit {limit}; "
            "use resolvent sweeps (sparse path) instead of full spectra")


def spectrum(g: DiscreteGenerator, deflate_kernel: bool = True,
             dense_limit: int = DENSE_LIMIT) -> SpectrumReport:
    _check_dense(g, dense_limit)
    if deflate_kernel:
        ev = la.eigvals(deflate(g).A)
    else:
        ev = la.eigvals(g.A.toarray())
    # symmetrize round-off so the reported set is closed under conjugation
    ev = _conjugate_closed(ev)
    scale = max(1.0, float(np.max(np.abs(ev))) if ev.size else 1.0)
    nonzero = np.abs(ev) > 1e-10 * scale
    margin = float(np.min(np.abs(ev[nonzero].real))) if nonzero.any() else np.inf
    return SpectrumReport(ev, float(np.max(ev.real)), margin, deflate_kernel)


def _conjugate_closed(ev: np.ndarray) -> np.ndarray:
    """Pair each eigenvalue with its conjugate and replace both by their mean.

    Real-matrix eigensolvers return conjugate pairs up to round-off; this makes
    the closure exact without moving any eigenvalue by more than that round-off.
    """
    ev = np.asarray(ev, dtype=complex)
    tol = 1e-9 * max(1.0, float(np.max(np.abs(ev)))) if ev.size else 0.0
    real = np.abs(ev.imag) <= tol
    out = [ev[real].real.astype(complex)]
    upper = np.sort_complex(ev[ev.imag > tol])
    lower = np.sort_complex(np.conj(ev[ev.imag < -tol]))
    if len(upper) != len(lower):
        raise SpectralError("eigenvalues of a real matrix failed to pair into conjugates")
    mid = 0.5 * (upper + lower)
    out += [mid, np.conj(mid)]
    return np.concatenate(out)


def weighted_resolvent_norm(A: np.ndarray, G: np.ndarray, gamma: float) -> float:
    """``||(i*gamma - A)^{-1}||`` in the norm ``sqrt(x^H G x)`` (dense)."""
    M = la.cholesky(G)  # G = M^T M
    return _resolvent_from_factor(A, M, gamma)


def _resolvent_from_factor(A, M, gamma):
    B = M @ (1j * gamma * np.eye(A.shape[0]) - A)
    B = la.solve_triangular(M, B.T, trans="T", lower=False).T  # B @ M^{-1}
    smin = la.svdvals(B)[-1]
    if smin <= np.finfo(float).eps * la.norm(B, 2):
        raise SpectralError(f"i*{gamma} is (numerically) an eigenvalue")
    return float(1.0 / smin)


class ResolventEvaluator:
    """Evaluates ``||R(i*gamma)||_G`` on ``ker c`` for one generator.

    ``method="dense"`` factors the deflated Gram matrix once and takes the
    smallest singular value per point. ``method="sparse"`` runs Arnoldi on
    ``P R^* R P`` (``R^*`` the G-adjoint, ``P`` the G-orthogonal projector
    onto ``ker c``) with one sparse LU per point.
    """

    def __init__(self, g: DiscreteGenerator, method: str = "auto",
                 dense_limit: int = 2000):
        self.g = g
        if method == "auto":
            method = "dense" if g.size <= dense_limit else "sparse"
        self.method = method
        if method == "dense":
            d = deflate(g)
            self._A = d.A
            self._M = la.cholesky(d.G)
        elif method == "sparse":
            self._setup_sparse()
        else:
            raise ValueError(f"unknown method {method!r}")

    def _setup_sparse(self):
        g = self.g
        n, c = g.n_nodes, g.constraint
        self._varpi = g.varpi if g.varpi > 0 else 1.0
        G0 = g.G0.tocsr()
        self._K = G0[:n, :n]
        self._rest = G0.diagonal()[n:]
        # particular solutions of K y = r from the system with node 0 pinned
        self._Klu = splu(self._K[1:, 1:].tocsc())
        self._e = g.kernel_vector()
        self._ce = float(c @ self._e)
        self._cy_sum = float(c[:n].sum())
        if abs(self._cy_sum) == 0:
            raise SpectralError("constraint has no displacement part")

    def _gram(self, x):
        c = self.g.constraint
        return self.g.G0 @ x + self._varpi * (c @ x) * c

    def _gram_solve(self, r):
        """Solve ``(G0 + varpi c c^T) x = r`` using the block structure."""
        g, n, c = self.g, self.g.n_nodes, self.g.constraint
        s = r[:n].sum() / (self._varpi * self._cy_sum)  # s = c @ x
        x = np.empty_like(r)
        x[n:] = (r[n:] - self._varpi * s * c[n:]) / self._rest
        ry = r[:n] - self._varpi * s * c[:n]
        y = np.zeros(n, dtype=r.dtype)
        y[1:] = self._Klu.solve(ry[1:]) if np.isrealobj(ry) else (
            self._Klu.solve(ry[1:].real) + 1j * self._Klu.solve(ry[1:].imag))
        t = (s - c[:n] @ y - c[n:] @ x[n:]) / self._cy_sum
        x[:n] = y + t
        return x

    def _project(self, x):
        return x - self._e * (self.g.constraint @ x) / self._ce

    def _sparse_norm(self, gamma):
        g = self.g
        N = g.size
        T = (1j * gamma * sp.identity(N, format="csc") - g.A.tocsc()).tocsc()
        try:
            lu = splu(T)
        except RuntimeError as exc:
            raise SpectralError(f"i*{gamma} is (numerically) an eigenvalue: {exc}") from exc

        def mv(v):
            x = self._project(np.asarray(v, dtype=complex).ravel())
            y = lu.solve(x)
            y = self._gram(y)
            y = lu.solve(y, trans="H")
            return self._project(self._gram_solve(y))

        op = LinearOperator((N, N), matvec=mv, dtype=complex)
        rng = np.random.default_rng(0)
        v0 = self._project(rng.standard_normal(N)).astype(complex)
        val = eigs(op, k=1, which="LM", v0=v0, tol=1e-10, return_eigenvectors=False)
        return float(np.sqrt(abs(val[0])))

    def __call__(self, gamma: float) -> float:
        if self.method == "dense":
            return _resolvent_from_factor(self._A, self._M, gamma)
        return self._sparse_norm(gamma)


def resolvent_norm(g: DiscreteGenerator, gamma: float, method: str = "auto") -> float:
    return ResolventEvaluator(g, method)(gamma)


@dataclass
class ResolventSweep:
    gammas: np.ndarray
    norms: np.ndarray
    theta: float
    r_squared: float

    @property
    def growth_fit(self) -> tuple[float, float]:
        return self.theta, self.r_squared

    def envelope_fit(self, gamma_lo: float | None = None,
                     gamma_hi: float | None = None) -> tuple[float, float]:
        """Growth exponent of the running maximum ``sup_{s <= gamma} ||R(is)||``.

        Near-axis eigenvalues give narrow resonance peaks, so the raw norms
        scatter; their running maximum is monotone and fits cleanly.
        """
        lo = self.gammas[0] if gamma_lo is None else gamma_lo
        hi = self.gammas[-1] if gamma_hi is None else gamma_hi
        env = np.maximum.accumulate(self.norms)
        sel = (self.gammas >= lo) & (self.gammas <= hi)
        if sel.sum() < 2:
            raise ValueError("envelope window holds fewer than two sweep points")
        x, y = np.log(self.gammas[sel]), np.log(env[sel])
        coef = np.polyfit(x, y, 1)
        resid = y - np.polyval(coef, x)
        sst = np.sum((y - y.mean())**2)
        return float(coef[0]), float(1.0 - resid @ resid / sst) if sst > 0 else 1.0


def fit_growth(gammas, norms) -> tuple[float, float]:
    """Slope of ``log norm`` against ``log gamma`` over the upper half."""
    gammas = np.asarray(gammas, dtype=float)
    norms = np.asarray(norms, dtype=float)
    half = len(gammas) // 2
    x, y = np.log(gammas[half:]), np.log(norms[half:])
    if len(x) < 2:
        raise ValueError("need at least four sweep points to fit a growth exponent")
    coef = np.polyfit(x, y, 1)
    resid = y - np.polyval(coef, x)
    sst = np.sum((y - y.mean())**2)
    r2 = 1.0 - resid @ resid / sst if sst > 0 else 1.0
    return float(coef[0]), float(r2)


def sweep_and_fit(g: DiscreteGenerator, gamma_min: float, gamma_max: float,
                  n_points: int, jobs: int = 1, method: str = "auto") -> ResolventSweep:
    if not 0 < gamma_min < gamma_max:
        raise ValueError("need 0 < gamma_min < gamma_max")
    if n_points < 4:
        raise ValueError("n_points must be at least 4")
    gammas = np.geomspace(gamma_min, gamma_max, n_points)
    ev = ResolventEvaluator(g, method)
    if jobs > 1:
        with ThreadPoolExecutor(max_workers=jobs) as pool:
            norms = np.array(list(pool.map(ev, gammas)))
    else:
        norms = np.array([ev(x) for x in gammas])
    theta, r2 = fit_growth(gammas, norms)
    return ResolventSweep(gammas, norms, theta, r2)


def scalar_delay_root(alpha: float, beta: float, tau: float, branch: int = 0) -> complex:
    """Root of ``lam + alpha + beta*exp(-lam*tau) = 0`` on a Lambert-W branch.

    The principal branch gives the rightmost root.
    """
    w = lambertw(-beta * tau * np.exp(alpha * tau), branch)
    return complex(w / tau - alpha)


def dominant_eigenvalue(A) -> complex:
    """Eigenvalue with the largest real part (largest imaginary part on ties)."""
    ev = la.eigvals(A.toarray() if sp.issparse(A) else np.asarray(A))
    i = np.lexsort((-ev.imag, -np.round(ev.real, 12)))[0]
    return complex(ev[i])


@dataclass
class SemigroupDecay:
    times: np.ndarray
    norms: np.ndarray      # max over y-modes of ||e^{tA} A^{-1}||_G on ker c
    exponent: float        # least-squares slope of -log norm against log t
    r_squared: float


def strip_semigroup_decay(nx: int, ny: int, times, eps: float = 0.2, amplitude: float = 1.0,
                          b_scale: float = 0.0, tau: float = 1.0, xi: float = 1.0,
                          m_rho: int = 10, lx: float = 1.0, ly: float = 1.0) -> SemigroupDecay:
    """``||e^{tA} A^{-1}||`` for internal damping on a strip ``x < eps`` of a rectangle.

    The damping depends on ``x`` only and the closure is Neumann on every
    side, so the grid operator splits exactly over the eigenvectors of the
    ``y`` Laplacian into ``ny + 1`` interval problems; the operator norm is the
    largest of theirs. ``A^{-1}`` maps the unit ball of the graph norm, which is
    the quantity polynomial decay rates bound.
    """
    from .delayline import build_delayline
    from .generator import assemble_internal_generator
    from .mesh import CoefField, assemble_neumann_laplacian, build_interval_mesh

    times = np.asarray(times, dtype=float)
    if np.any(times <= 0) or np.any(np.diff(times) <= 0):
        raise ValueError("times must be positive and increasing")
    mx = build_interval_mesh(nx, lx, "right")
    a = CoefField.from_values(np.where(mx.node_coords[:, 0] < eps, float(amplitude), 0.0))
    b = a.scaled(b_scale) if b_scale > 0 else None
    g = assemble_internal_generator(mx, a, b, tau, xi,
                                    build_delayline(m_rho, tau) if b is not None else None)
    my = build_interval_mesh(ny, ly)
    Ly, _ = assemble_neumann_laplacian(my)
    sw = np.sqrt(my.interior_quadrature)
    lam = -la.eigvalsh((sw[:, None] * Ly.toarray()) / sw[None, :])
    lam = np.sort(np.abs(lam))
    lam[0] = 0.0
    n, wx = mx.n_nodes, mx.interior_quadrature
    A0, G0 = g.A.toarray(), g.G0.toarray()
    worst = np.zeros(len(times))
    for j, lj in enumerate(lam):
        if j == 0:  # the mean mode carries the conserved form
            d = deflate(g)
            A, G = d.A, d.G
        else:
            A = A0.copy()
            A[n:2 * n, :n] -= lj * np.eye(n)
            G = G0.copy()
            G[:n, :n] += lj * np.diag(wx)
        M = la.cholesky(0.5 * (G + G.T))
        B = la.solve_triangular(M, (M @ A).T, trans="T").T  # M A M^{-1}
        P = la.expm(times[0] * B) @ la.inv(B)
        worst[0] = max(worst[0], la.norm(P, 2))
        for k in range(1, len(times)):
            P = la.expm((times[k] - times[k - 1]) * B) @ P
            worst[k] = max(worst[k], la.norm(P, 2))
    x, y = np.log(times), np.log(worst)
    coef = np.polyfit(x, y, 1)
    resid = y - np.polyval(coef, x)
    sst = np.sum((y - y.mean())**2)
    return SemigroupDecay(times, worst, float(-coef[0]),
                          float(1 - resid @ resid / sst) if sst > 0 else 1.0)

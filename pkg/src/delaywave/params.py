"""Model coefficients for the boundary- and internal-delay wave systems.

Admissibility windows are checked here so every downstream module can assume
the dissipation prefactors ``2*alpha - beta - xi/tau`` and ``xi/tau - beta``
are positive.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field, replace


class ParameterError(ValueError):
    """Raised for non-finite inputs or an empty admissibility window."""


@dataclass(frozen=True)
class Constraint:
    name: str
    expression: str
    margin: float  # > 0 when satisfied
    passed: bool


@dataclass
class ValidationReport:
    constraints: list[Constraint] = field(default_factory=list)
    notes: list[str] = field(default_factory=list)

    @property
    def valid(self) -> bool:
        return all(c.passed for c in self.constraints)

    def add(self, name: str, expression: str, margin: float) -> None:
        self.constraints.append(Constraint(name, expression, float(margin), bool(margin > 0)))

    def violations(self) -> list[Constraint]:
        return [c for c in self.constraints if not c.passed]

    def __str__(self) -> str:
        lines = []
        for c in self.constraints:
            flag = "ok  " if c.passed else "FAIL"
            lines.append(f"[{flag}] {c.name}: {c.expression} (margin {c.margin:.6g})")
        lines.extend(f"note: {n}" for n in self.notes)
        return "\n".join(lines)


@dataclass(frozen=True)
class BoundaryDelayParams:
    """Coefficients of the Robin law ``dy/dnu = -alpha*y_t - beta*y_t(t - tau)``.

    ``xi`` weights the delay-line part of the energy, ``varpi`` the rank-one
    coupling term, and ``delta_w`` is the auxiliary constant entering the
    upper bound on ``varpi``.
    """

    alpha: float
    beta: float
    tau: float
    xi: float
    varpi: float
    delta_w: float

    @classmethod
    def with_defaults(
        cls,
        alpha: float,
        beta: float,
        tau: float,
        omega_measure: float,
        gamma1_measure: float,
        xi: float | None = None,
        varpi: float | None = None,
        delta_w: float | None = None,
    ) -> "BoundaryDelayParams":
        if xi is None:
            xi = default_xi(alpha, beta, tau)
        if delta_w is None:
            delta_w = beta
        p = cls(alpha, beta, tau, xi, 0.0, delta_w)
        if varpi is None:
            varpi = default_varpi(p, omega_measure, gamma1_measure)
        return replace(p, varpi=varpi)


@dataclass(frozen=True)
class InternalDelayParams:
    """Sup-norms of the damping fields ``a`` and ``b`` with the delay data."""

    a_sup: float
    b_sup: float
    tau: float
    xi: float


def _require_finite(**values: float) -> None:
    for name, v in values.items():
        if not math.isfinite(v):
            raise ParameterError(f"{name} must be finite, got {v!r}")


def validate_boundary_params(
    p: BoundaryDelayParams, omega_measure: float, gamma1_measure: float
) -> ValidationReport:
    _require_finite(alpha=p.alpha, beta=p.beta, tau=p.tau, xi=p.xi,
                    varpi=p.varpi, delta_w=p.delta_w)
    if p.tau <= 0:
        raise ParameterError("tau must be positive")
    if p.alpha <= 0:
        raise ParameterError("alpha must be positive")

    rep = ValidationReport()
    rep.add("beta_positive", "0 < beta", p.beta)
    rep.add("beta_below_alpha", "beta < alpha", p.alpha - p.beta)
    rep.add("xi_lower", "tau*beta < xi", p.xi - p.tau * p.beta)
    rep.add("xi_upper", "xi < tau*(2*alpha - beta)", p.tau * (2 * p.alpha - p.beta) - p.xi)
    s = p.alpha + p.beta
    rep.add("delta_w_positive", "0 < delta_w", p.delta_w)
    rep.add("delta_w_upper", "delta_w < alpha + beta", s - p.delta_w)
    rep.add("varpi_positive", "0 < varpi", p.varpi)
    if 0 < p.delta_w < s:
        bound = varpi_bound(p, omega_measure, gamma1_measure)
        rep.add("varpi_upper", "varpi < min{1/((a+b)(a+b-d)), d/(2(a+b-d)|Omega|), "
                "d*xi/(2(a+b-d)|Gamma1|)}", bound - p.varpi)
    else:
        rep.add("varpi_upper", "varpi bound undefined for delta_w outside (0, alpha+beta)",
                -math.inf)
    return rep


def varpi_bound(p: BoundaryDelayParams, omega_measure: float, gamma1_measure: float) -> float:
    """Three-term minimum bounding ``varpi`` from above (strict)."""
    s = p.alpha + p.beta
    gap = s - p.delta_w
    if gap <= 0 or p.delta_w <= 0:
        raise ParameterError("delta_w must lie in (0, alpha + beta)")
    return min(
        1.0 / (s * gap),
        p.delta_w / (2 * gap * omega_measure),
        p.delta_w * p.xi / (2 * gap * gamma1_measure),
    )


def default_xi(alpha: float, beta: float, tau: float) -> float:
    """Midpoint ``tau*alpha`` of the open window ``(tau*beta, tau*(2*alpha - beta))``."""
    _require_finite(alpha=alpha, beta=beta, tau=tau)
    if not (0 < beta < alpha) or tau <= 0:
        raise ParameterError(
            f"xi window is empty: need 0 < beta < alpha and tau > 0 "
            f"(alpha={alpha}, beta={beta}, tau={tau})")
    return tau * alpha


def default_varpi(
    p: BoundaryDelayParams,
    omega_measure: float,
    gamma1_measure: float,
    cap: float | None = None,
) -> float:
    """Half of the admissible upper bound on ``varpi``, optionally capped.

    The bound grows without limit as ``delta_w`` approaches ``alpha + beta``;
    ``cap`` keeps the returned weight finite in that regime.
    """
    v = 0.5 * varpi_bound(p, omega_measure, gamma1_measure)
    if cap is not None:
        v = min(v, cap)
    return v


def validate_internal_params(q: InternalDelayParams) -> ValidationReport:
    _require_finite(a_sup=q.a_sup, b_sup=q.b_sup, tau=q.tau, xi=q.xi)
    if q.tau <= 0:
        raise ParameterError("tau must be positive")
    rep = ValidationReport()
    rep.add("b_positive", "0 < ||b||", q.b_sup)
    rep.add("b_below_a", "||b|| < ||a||", q.a_sup - q.b_sup)
    rep.add("xi_lower", "tau*||b|| < xi", q.xi - q.tau * q.b_sup)
    rep.add("xi_upper", "xi < tau*(2||a|| - ||b||)", q.tau * (2 * q.a_sup - q.b_sup) - q.xi)
    if q.b_sup == 0:
        rep.notes.append("b == 0 is outside the strict window; use the undelayed "
                         "generator (internal_undelayed) for this case")
    return rep


def dissipation_prefactors(p: BoundaryDelayParams) -> tuple[float, float]:
    """``(2*alpha - beta - xi/tau, xi/tau - beta)``; both positive for valid params."""
    r = p.xi / p.tau
    return 2 * p.alpha - p.beta - r, r - p.beta

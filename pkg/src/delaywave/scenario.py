"""Flat ``key = value`` scenario files, code-defined presets, and model assembly."""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp
from scipy.sparse.linalg import spsolve

from .delayline import build_delayline, sample_history
from .generator import (
    DiscreteGenerator,
    WaveState,
    assemble_boundary_generator,
    assemble_boundary_undelayed,
    assemble_internal_generator,
)
from .mesh import Mesh, build_interval_mesh, build_rect_mesh, damping_strip_field, zero_field
from .params import (
    BoundaryDelayParams,
    InternalDelayParams,
    ParameterError,
    validate_boundary_params,
    validate_internal_params,
)

ANALYSES = ("decay_fit", "equilibrium", "spectrum", "resolvent_sweep")

# key -> (parser, default); None default means "derived" or "required"
KEYS: dict[str, tuple] = {
    "preset": (str, None),
    "system": (str, None),
    "mesh.dim": (int, 1),
    "mesh.n": (int, 100),
    "mesh.lx": (float, 1.0),
    "mesh.ly": (float, 1.0),
    "gamma1": (str, None),
    "alpha": (float, None),
    "beta": (float, None),
    "tau": (float, 1.0),
    "xi": (float, None),
    "varpi": (float, None),
    "delta_w": (float, None),
    "a.kind": (str, "strip"),
    "a.eps": (float, 0.2),
    "a.amplitude": (float, 1.0),
    "b.scale": (float, 0.0),
    "m_rho": (int, 20),
    "y0.kind": (str, "zero"),
    "z0.kind": (str, "zero"),
    "history.kind": (str, "zero"),
    "initial.smoothing": (int, 0),
    "dt": (float, None),
    "t_end": (float, 10.0),
    "snapshot_every": (int, 0),
    "analyses": (str, "decay_fit,equilibrium"),
    "seed": (int, 0),
    "viscosity": (str, "0"),
    "fit.t_min": (float, None),
    "fit.t_max": (float, None),
    "sweep.gamma_min": (float, 20.0),
    "sweep.gamma_max": (float, 200.0),
    "sweep.n": (int, 60),
}

PRESETS: dict[str, dict[str, str]] = {
    "boundary-1d-exp": {
        "system": "boundary", "mesh.dim": "1", "mesh.n": "400", "gamma1": "right",
        "alpha": "2", "beta": "1", "tau": "0.5", "xi": "1", "m_rho": "200",
        "y0.kind": "gaussian:0.5,0.1", "z0.kind": "constant:1", "history.kind": "zero",
        "t_end": "100", "viscosity": "h2",
        "analyses": "decay_fit,equilibrium,spectrum,resolvent_sweep",
        "sweep.gamma_min": "20", "sweep.gamma_max": "200", "sweep.n": "60",
    },
    "trapped-square": {
        "system": "internal", "mesh.dim": "2", "mesh.n": "80", "gamma1": "none",
        "a.kind": "strip", "a.eps": "0.2", "a.amplitude": "1", "b.scale": "0.1",
        "tau": "1", "xi": "1", "m_rho": "10",
        "y0.kind": "random", "z0.kind": "random", "history.kind": "zero",
        "initial.smoothing": "1", "t_end": "400", "fit.t_min": "20", "fit.t_max": "400",
        "analyses": "decay_fit,equilibrium",
    },
}
PRESETS["trapped-square-undelayed"] = {**PRESETS["trapped-square"], "b.scale": "0"}


class ScenarioError(ValueError):
    pass


@dataclass
class Scenario:
    values: dict
    analyses: tuple[str, ...]
    mesh: Mesh = field(repr=False)
    generator: DiscreteGenerator = field(repr=False)
    initial: WaveState = field(repr=False)
    dt: float = 0.0

    @property
    def system(self) -> str:
        return self.values["system"]

    @property
    def t_end(self) -> float:
        return self.values["t_end"]

    def fit_window(self) -> tuple[float, float]:
        lo = self.values["fit.t_min"]
        hi = self.values["fit.t_max"]
        return (0.1 * self.t_end if lo is None else lo, self.t_end if hi is None else hi)


def _parse_lines(text: str) -> dict[str, tuple[str, int]]:
    out = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ScenarioError(f"line {lineno}: expected 'key = value', got {raw.strip()!r}")
        key, val = (s.strip() for s in line.split("=", 1))
        if key not in KEYS:
            raise ScenarioError(f"line {lineno}: unknown key {key!r}")
        if key in out:
            raise ScenarioError(f"line {lineno}: duplicate key {key!r}")
        out[key] = (val, lineno)
    return out


def _convert(key: str, val: str, lineno: int | None):
    conv = KEYS[key][0]
    try:
        v = conv(val)
    except ValueError:
        where = f"line {lineno}: " if lineno else ""
        raise ScenarioError(f"{where}{key} expects {conv.__name__}, got {val!r}") from None
    if conv is float and not math.isfinite(v):
        raise ScenarioError(f"{key} must be finite, got {val!r}")
    return v


def resolve_values(text: str = "", preset: str | None = None) -> dict:
    """Merge defaults, a preset, and explicit assignments (which win)."""
    lines = _parse_lines(text)
    name = preset or (lines["preset"][0] if "preset" in lines else None)
    raw: dict[str, tuple[str, int | None]] = {}
    if name:
        if name not in PRESETS:
            raise ScenarioError(f"unknown preset {name!r}; available: {', '.join(PRESETS)}")
        raw.update({k: (v, None) for k, v in PRESETS[name].items()})
    raw.update(lines)
    vals = {k: d for k, (_, d) in KEYS.items()}
    for k, (v, ln) in raw.items():
        vals[k] = _convert(k, v, ln)
    vals["preset"] = name
    if vals["system"] not in ("boundary", "internal"):
        raise ScenarioError("system must be 'boundary' or 'internal'")
    if vals["mesh.dim"] not in (1, 2):
        raise ScenarioError("mesh.dim must be 1 or 2")
    if vals["gamma1"] is None:
        vals["gamma1"] = ("right" if vals["mesh.dim"] == 1 else "all") \
            if vals["system"] == "boundary" else ("right" if vals["mesh.dim"] == 1 else "none")
    for k in ("t_end", "tau"):
        if not vals[k] > 0:
            raise ScenarioError(f"{k} must be positive")
    if vals["dt"] is not None and not vals["dt"] > 0:
        raise ScenarioError("dt must be positive")
    return vals


def _viscosity(spec: str, mesh: Mesh) -> float:
    if spec == "h2":
        return min(mesh.h) ** 2
    if spec.endswith("*h2"):
        return float(spec[:-3]) * min(mesh.h) ** 2
    return float(spec)


def _split_kind(spec: str) -> tuple[str, list[float]]:
    name, _, args = spec.partition(":")
    try:
        nums = [float(a) for a in args.split(",")] if args else []
    except ValueError:
        raise ScenarioError(f"bad profile arguments in {spec!r}") from None
    return name.strip(), nums


def spatial_profile(spec: str, coords: np.ndarray, rng: np.random.Generator,
                    lengths: tuple[float, ...]) -> np.ndarray:
    """Named nodal profile: zero, constant:c, gaussian:center...,width, mode:k..., random."""
    name, args = _split_kind(spec)
    dim = coords.shape[1]
    if name == "zero":
        return np.zeros(len(coords))
    if name == "constant":
        return np.full(len(coords), args[0] if args else 1.0)
    if name == "gaussian":
        if len(args) != dim + 1:
            raise ScenarioError(f"gaussian needs {dim} center coordinate(s) and a width")
        center, width = np.array(args[:dim]), args[dim]
        if not width > 0:
            raise ScenarioError("gaussian width must be positive")
        r2 = np.sum((coords - center) ** 2, axis=1)
        return np.exp(-r2 / (2 * width**2))
    if name == "mode":
        ks = args + [0.0] * (dim - len(args))
        out = np.ones(len(coords))
        for d in range(dim):
            out *= np.cos(ks[d] * np.pi * coords[:, d] / lengths[d])
        return out
    if name == "random":
        return rng.standard_normal(len(coords))
    raise ScenarioError(f"unknown profile kind {name!r}")


def _history(spec: str, rng: np.random.Generator, coords, lengths, active):
    """History callable ``(points, s)`` on the active nodes; constant in time
    except for ``random``, which draws fresh values per delay slot."""
    name, _ = _split_kind(spec)
    if name == "random":
        return lambda pts, s: rng.standard_normal(len(pts))
    base = spatial_profile(spec, coords, rng, lengths)[active]
    return lambda pts, s: base


def build_mesh(v: dict) -> Mesh:
    n = v["mesh.n"]
    if v["mesh.dim"] == 1:
        return build_interval_mesh(n, v["mesh.lx"], v["gamma1"])
    return build_rect_mesh(n, n, v["mesh.lx"], v["mesh.ly"], v["gamma1"])


def build_generator(v: dict, mesh: Mesh) -> DiscreteGenerator:
    visc = _viscosity(v["viscosity"], mesh)
    if v["system"] == "boundary":
        for k in ("alpha", "beta"):
            if v[k] is None:
                raise ScenarioError(f"boundary system needs {k}")
        if v["beta"] == 0:
            p = BoundaryDelayParams(v["alpha"], 0.0, v["tau"], v["xi"] or 0.0,
                                    v["varpi"] or 0.0, v["delta_w"] or 0.0)
            return assemble_boundary_undelayed(mesh, p, visc)
        try:
            p = BoundaryDelayParams.with_defaults(
                v["alpha"], v["beta"], v["tau"], mesh.omega_measure, mesh.gamma1_measure,
                xi=v["xi"], varpi=v["varpi"], delta_w=v["delta_w"])
        except ParameterError as exc:
            raise ScenarioError(str(exc)) from None
        _raise_violations(validate_boundary_params(p, mesh.omega_measure, mesh.gamma1_measure))
        return assemble_boundary_generator(mesh, p, build_delayline(v["m_rho"], p.tau),
                                           viscosity=visc)
    if v["a.kind"] == "strip":
        a = damping_strip_field(mesh, v["a.eps"], v["a.amplitude"])
    elif v["a.kind"] == "zero":
        a = zero_field(mesh)
    else:
        raise ScenarioError(f"unknown a.kind {v['a.kind']!r}")
    if v["b.scale"] < 0:
        raise ScenarioError("b.scale must be non-negative")
    b = a.scaled(v["b.scale"])
    xi = v["xi"] if v["xi"] is not None else v["tau"] * a.sup
    if b.sup > 0:
        _raise_violations(validate_internal_params(InternalDelayParams(a.sup, b.sup, v["tau"], xi)))
    try:
        return assemble_internal_generator(mesh, a, b, v["tau"], xi,
                                           build_delayline(v["m_rho"], v["tau"]),
                                           viscosity=visc)
    except (ParameterError, ValueError) as exc:
        raise ScenarioError(str(exc)) from None


_MESSAGES = {
    "xi_lower": "xi must exceed tau*beta",
    "xi_upper": "xi must be below tau*(2*alpha - beta)",
    "beta_below_alpha": "beta must be below alpha",
    "beta_positive": "beta must be positive",
    "b_below_a": "||b|| must be below ||a||",
    "varpi_upper": "varpi must be below its admissible bound",
}


def _raise_violations(rep) -> None:
    bad = rep.violations()
    if bad:
        msgs = [f"{_MESSAGES.get(c.name, c.name)} ({c.expression}, margin {c.margin:.6g})"
                for c in bad]
        raise ScenarioError("; ".join(msgs))


def generator_inverse(g: DiscreteGenerator, r: np.ndarray) -> np.ndarray:
    """Solve ``A x = r`` on ``ker c`` after projecting ``r`` there along ``e``."""
    c, e = g.constraint, g.kernel_vector()
    r = r - e * (c @ r) / (c @ e)
    M = sp.bmat([[g.A, sp.csr_matrix(e[:, None])],
                 [sp.csr_matrix(c[None, :]), None]], format="csc")
    return spsolve(M, np.concatenate([r, [0.0]]))[:g.size]


def initial_state(v: dict, g: DiscreteGenerator) -> WaveState:
    m = g.mesh
    seed = v["seed"]
    rngs = [np.random.default_rng([seed, i]) for i in range(3)]
    y0 = spatial_profile(v["y0.kind"], m.node_coords, rngs[0], m.lengths)
    z0 = spatial_profile(v["z0.kind"], m.node_coords, rngs[1], m.lengths)
    if g.m_rho:
        pts = m.node_coords[g.active]
        hist = _history(v["history.kind"], rngs[2], m.node_coords, m.lengths, g.active)
        u0 = sample_history(g.delayline, hist, pts)
    else:
        u0 = np.zeros((len(g.active), 0))
    s = WaveState(y0, z0, u0)
    k = v["initial.smoothing"]
    if k < 0:
        raise ScenarioError("initial.smoothing must be non-negative")
    if k:
        # keep the charge, replace the rest by A^{-k} of it (data in D(A^k))
        x = g.stack(s)
        c, e = g.constraint, g.kernel_vector()
        q = (c @ x) / (c @ e)
        for _ in range(k):
            x = generator_inverse(g, x)
        s = g.unstack(x + q * e)
    return s


def parse_scenario(text: str = "", preset: str | None = None) -> Scenario:
    v = resolve_values(text, preset)
    analyses = tuple(a.strip() for a in v["analyses"].split(",") if a.strip())
    for a in analyses:
        if a not in ANALYSES:
            raise ScenarioError(f"unknown analysis {a!r}; expected a subset of {ANALYSES}")
    mesh = build_mesh(v)
    g = build_generator(v, mesh)
    if "spectrum" in analyses and g.size > 4000:
        raise ScenarioError(f"spectrum needs a dense eigensolve; state size {g.size} exceeds 4000")
    from .evolve import default_dt
    dt = v["dt"] if v["dt"] is not None else default_dt(g)
    return Scenario(v, analyses, mesh, g, initial_state(v, g), dt)

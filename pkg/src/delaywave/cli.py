"""Command-line runner: ``delaywave --preset NAME --out DIR`` or ``--config FILE``.

Exit codes: 0 success, 1 input or I/O error, 2 a built-in invariant check failed.
"""
from __future__ import annotations

import argparse
import logging
import sys
import time
from pathlib import Path

import numpy as np

from .analyze import MODELS, FitError, classify_decay, equilibrium_for
from .evolve import TRACKER_COLUMNS, simulate
from .params import ParameterError
from .scenario import PRESETS, Scenario, ScenarioError, parse_scenario
from .spectral import SpectralError, spectrum, sweep_and_fit

log = logging.getLogger("delaywave")

CONTRACTION_TOL = 1e-12
CHARGE_TOL = 1e-10
DISSIPATION_TOL = 1e-10
FIT_FLOOR = 1e-11  # samples below this fraction of the peak are round-off


def _fmt(x) -> str:
    return f"{x:.17g}"


def _write_csv(path: Path, header, rows) -> None:
    with open(path, "w") as fh:
        fh.write(",".join(header) + "\n")
        for row in rows:
            fh.write(",".join(_fmt(x) if not isinstance(x, str) else x for x in row) + "\n")


def run_scenario(scn: Scenario, out_dir, jobs: int = 1) -> int:
    out = Path(out_dir)
    try:
        out.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        print(f"error: cannot create {out}: {exc}", file=sys.stderr)
        return 1
    g, s0 = scn.generator, scn.initial
    eq = equilibrium_for(g, s0)
    lines = [f"preset: {scn.values['preset'] or '-'}",
             f"system: {scn.system} ({g.kind}), nodes {g.n_nodes}, state size {g.size}",
             f"dt: {_fmt(scn.dt)}, t_end: {_fmt(scn.t_end)}"]
    checks: list[tuple[str, bool, str]] = []

    t0 = time.perf_counter()
    try:
        traj = simulate(g, s0, dt=scn.dt, t_end=scn.t_end,
                        snapshot_every=scn.values["snapshot_every"], eq=eq.state)
    except FloatingPointError as exc:
        checks.append(("finite_state", False, str(exc)))
        traj = None
    lines.append(f"simulation wall time: {time.perf_counter() - t0:.1f} s")

    try:
        if traj is not None:
            _write_csv(out / "trackers.csv", TRACKER_COLUMNS, traj.rows())
            ratio = traj.max_norm_ratio()
            checks.append(("contraction", ratio <= 1 + CONTRACTION_TOL,
                           f"max per-step norm ratio {_fmt(ratio)}"))
            drift = traj.charge_drift()
            checks.append(("charge_conservation", drift <= CHARGE_TOL,
                           f"relative drift {_fmt(drift)}"))
            excess = np.max(traj.trackers["diss_lhs"] - traj.trackers["diss_rhs"])
            scale = max(1.0, traj.trackers["g_norm"][0] ** 2)
            checks.append(("dissipation_bound", excess <= DISSIPATION_TOL * scale,
                           f"max(lhs - rhs) {_fmt(excess)}"))

        if "equilibrium" in scn.analyses:
            lines.append(f"equilibrium ({eq.kind}): {_fmt(eq.value)}")
            if traj is not None:
                lines.append(f"final distance to equilibrium: "
                             f"{_fmt(traj.trackers['dist_eq'][-1])}")

        if "decay_fit" in scn.analyses and traj is not None:
            try:
                cls = classify_decay(traj.times, traj.trackers["dist_eq"],
                                     window=scn.fit_window(), rel_floor=FIT_FLOOR)
            except FitError as exc:
                lines.append(f"decay fit skipped: {exc}")
            else:
                fits = {f.model: f for f in cls.ranked}
                _write_csv(out / "fits.csv", ("model", "C", "rate", "r2", "t_min", "t_max"),
                           [(m, fits[m].amplitude, fits[m].rate, fits[m].r_squared,
                             *fits[m].fit_window) for m in MODELS])
                b = cls.best
                lines.append(f"best decay model: {b.model} (rate {_fmt(b.rate)}, "
                             f"R2 {_fmt(b.r_squared)}); runner-up residual ratios "
                             + ", ".join(f"{x:.3g}" for x in cls.margins))

        if "spectrum" in scn.analyses:
            rep = spectrum(g, deflate_kernel=True)
            _write_csv(out / "spectrum.csv", ("re", "im"),
                       zip(rep.eigenvalues.real, rep.eigenvalues.imag))
            checks.append(("spectral_abscissa", rep.abscissa < 0,
                           f"abscissa {_fmt(rep.abscissa)}, axis margin "
                           f"{_fmt(rep.imag_axis_margin)}"))

        if "resolvent_sweep" in scn.analyses:
            v = scn.values
            sw = sweep_and_fit(g, v["sweep.gamma_min"], v["sweep.gamma_max"], v["sweep.n"],
                               jobs=jobs)
            _write_csv(out / "sweep.csv", ("gamma", "resolvent_norm"), zip(sw.gammas, sw.norms))
            lines.append(f"resolvent growth exponent: {_fmt(sw.theta)} (R2 {_fmt(sw.r_squared)})")
            env, env_r2 = sw.envelope_fit()
            lines.append(f"running-max growth exponent: {_fmt(env)} (R2 {_fmt(env_r2)})")
    except SpectralError as exc:
        checks.append(("spectral", False, str(exc)))
    except OSError as exc:
        print(f"error: writing results failed: {exc}", file=sys.stderr)
        return 1

    lines.append("checks:")
    lines += [f"  [{'PASS' if ok else 'FAIL'}] {name}: {msg}" for name, ok, msg in checks]
    failed = [name for name, ok, _ in checks if not ok]
    lines.append("status: " + ("ok" if not failed else "invariant failure: " + ", ".join(failed)))
    try:
        (out / "summary.txt").write_text("\n".join(lines) + "\n")
    except OSError as exc:
        print(f"error: writing summary failed: {exc}", file=sys.stderr)
        return 1
    return 2 if failed else 0


def main(argv=None) -> int:
    ap = argparse.ArgumentParser(prog="delaywave", description=__doc__.splitlines()[0])
    ap.add_argument("--config", help="flat key = value scenario file")
    ap.add_argument("--preset", choices=sorted(PRESETS), help="built-in scenario")
    ap.add_argument("--out", default="out", help="output directory (default: out)")
    ap.add_argument("--jobs", type=int, default=1, help="threads for resolvent sweeps")
    ap.add_argument("-v", "--verbose", action="store_true")
    args = ap.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING)
    if not args.config and not args.preset:
        ap.error("one of --config or --preset is required")
    if args.jobs < 1:
        ap.error("--jobs must be at least 1")
    text = ""
    if args.config:
        try:
            text = Path(args.config).read_text()
        except OSError as exc:
            print(f"error: cannot read config: {exc}", file=sys.stderr)
            return 1
    try:
        scn = parse_scenario(text, args.preset)
    except (ScenarioError, ParameterError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    return run_scenario(scn, args.out, args.jobs)


if __name__ == "__main__":
    sys.exit(main())

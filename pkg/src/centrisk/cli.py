"""Experiment driver: every subsystem as a subcommand emitting CSV artifacts.

Each command reads a flat key=value config, applies ``--set`` overrides,
runs deterministically from the seed, and writes CSV files plus a JSON
manifest recording every input parameter.  Output file names embed the
command, a hash of the resolved configuration, and the seed, so re-running
with the same manifest reproduces byte-identical files.

Exit codes: 0 success, 2 configuration errors, 3 solver non-convergence
(the last iterate is still written as a CSV for use as a continuation
seed), 1 anything else.
"""

from __future__ import annotations

import argparse
import concurrent.futures
import hashlib
import json
import os
import sys

import numpy as np

from . import control, fluctuations, ldp, sde
from .errors import ConfigError, ContinuationError, NonConvergenceError
from .grids import PathGrid, write_csv_atomic
from .model import ControlParams, format_config, parse_config

COMMANDS = ("simulate", "fluctuations", "ldp-path", "ldp-sweep", "riccati", "control-demo")


def _add_common(parser):
    parser.add_argument("--config", required=True, help="path to key=value config file")
    parser.add_argument("--out", default=".", help="output directory")
    parser.add_argument(
        "--set", action="append", default=[], metavar="KEY=VALUE",
        help="override a config key (repeatable)",
    )
    parser.add_argument("--seed", type=int, default=None, help="override the config seed")
    parser.add_argument(
        "--sweep", default=None, metavar="NAME:START:END:COUNT",
        help="sweep a parameter over a uniform grid",
    )
    parser.add_argument("--jobs", type=int, default=1, help="max concurrent sweep points")


def build_parser():
    parser = argparse.ArgumentParser(
        prog="centrisk",
        description="Central-agent risk model experiments (CSV artifacts + manifest).",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    for name, text in (
        ("simulate", "Euler-Maruyama path of the reduced or full system"),
        ("fluctuations", "stationary covariance report, optionally swept"),
        ("ldp-path", "most probable transition path at the config parameters"),
        ("ldp-sweep", "transition rates along an h0 schedule (continuation)"),
        ("riccati", "backward Riccati coefficient paths and steady state"),
        ("control-demo", "controlled vs uncontrolled simulation, same seed"),
    ):
        p = sub.add_parser(name, help=text)
        _add_common(p)
        if name == "simulate":
            p.add_argument("--mode", choices=("reduced", "full"), default="reduced")
        if name == "ldp-path":
            p.add_argument("--t-final", type=float, default=10.0)
            p.add_argument("--mesh", type=int, default=2000)
        if name == "ldp-sweep":
            p.add_argument("--h0", default=None, help="comma-separated h0 schedule")
            p.add_argument("--t-final", type=float, default=10.0)
            p.add_argument("--mesh", type=int, default=2000)
        if name == "riccati":
            p.add_argument("--dt", type=float, default=None, help="Riccati RK4 step")
    return parser


def _apply_overrides(text: str, overrides) -> str:
    """Replace or append ``key=value`` overrides in config text."""
    updates = {}
    for item in overrides:
        if "=" not in item:
            raise ConfigError(f"--set expects KEY=VALUE, got {item!r}")
        key, value = item.split("=", 1)
        updates[key.strip()] = value.strip()
    lines = []
    seen = set()
    for line in text.splitlines():
        stripped = line.split("#", 1)[0].strip()
        if "=" in stripped:
            key = stripped.split("=", 1)[0].strip()
            if key in updates:
                lines.append(f"{key}={updates[key]}")
                seen.add(key)
                continue
        lines.append(line)
    for key, value in updates.items():
        if key not in seen:
            lines.append(f"{key}={value}")
    return "\n".join(lines) + "\n"


def _parse_sweep(spec: str):
    parts = spec.split(":")
    if len(parts) != 4:
        raise ConfigError(f"--sweep expects NAME:START:END:COUNT, got {spec!r}")
    name = parts[0]
    try:
        start, end = float(parts[1]), float(parts[2])
        count = int(parts[3])
    except ValueError:
        raise ConfigError(f"cannot parse sweep spec {spec!r}") from None
    if count < 1:
        raise ConfigError(f"sweep count must be >= 1, got {count}")
    return name, np.linspace(start, end, count)


def _resolve(args):
    with open(args.config, "r") as fh:
        text = fh.read()
    text = _apply_overrides(text, args.set)
    if args.seed is not None:
        text = _apply_overrides(text, [f"seed={args.seed}"])
    params, sim, ctrl = parse_config(text)
    canonical = format_config(params, sim, ctrl)
    digest = hashlib.sha256(canonical.encode()).hexdigest()[:12]
    return params, sim, ctrl, canonical, digest


def _config_dict(canonical: str) -> dict:
    out = {}
    for line in canonical.splitlines():
        if "=" in line:
            k, v = line.split("=", 1)
            out[k] = v
    return out


def _write_manifest(out_dir, stem, payload):
    path = os.path.join(out_dir, stem + ".manifest.json")
    write_csv_atomic(path, json.dumps(payload, sort_keys=True, indent=2) + "\n")
    return path


def _stem(command, digest, seed):
    return f"{command}_{digest}_seed{seed}"


def _run_simulate(args, params, sim, ctrl, digest, manifest):
    if args.mode == "full":
        grid = sde.simulate_full(params, sim)
    else:
        grid = sde.simulate_reduced(params, sim)
    stem = _stem(args.command, digest, sim.seed)
    path = os.path.join(args.out, stem + ".csv")
    grid.to_csv(path)
    manifest["outputs"].append(os.path.basename(path))
    manifest["results"]["transitions_xbar"] = sde.count_transitions(grid["xbar"])
    return 0


def _run_fluctuations(args, params, sim, ctrl, digest, manifest):
    if args.sweep:
        name, values = _parse_sweep(args.sweep)
        rows = _sweep_concurrent(params, name, values, args.jobs)
    else:
        rows = fluctuations.covariance_sweep_rows(params, "h0", [params.h0])
    stem = _stem(args.command, digest, sim.seed)
    path = os.path.join(args.out, stem + ".csv")
    fluctuations.write_sweep_csv(path, rows)
    manifest["outputs"].append(os.path.basename(path))
    manifest["results"]["rows"] = len(rows)
    return 0


def _sweep_concurrent(params, name, values, jobs):
    def point(value):
        return fluctuations.covariance_sweep_rows(params, name, [value])[0]

    if jobs <= 1:
        return [point(v) for v in values]
    with concurrent.futures.ThreadPoolExecutor(max_workers=jobs) as pool:
        return list(pool.map(point, values))


def _solve_path(params, t_final, mesh):
    if params.sigma0 == 0.0:
        return ldp.solve_bvp_degenerate(params, t_final, mesh)
    return ldp.solve_bvp_nondegenerate(params, t_final, mesh)


def _run_ldp_path(args, params, sim, ctrl, digest, manifest):
    stem = _stem(args.command, digest, sim.seed)
    path = os.path.join(args.out, stem + ".csv")
    try:
        sol = _solve_path(params, args.t_final, args.mesh)
    except NonConvergenceError as exc:
        if exc.last_state is not None:
            t = np.linspace(0.0, args.t_final, exc.last_state.shape[1])
            PathGrid(t, {"x0": exc.last_state[0]}).to_csv(path)
            manifest["outputs"].append(os.path.basename(path))
        raise
    sol.grid.to_csv(path)
    manifest["outputs"].append(os.path.basename(path))
    estimate = ldp.transition_probability(sol.rate_value, params.n_agents)
    manifest["results"].update(
        {
            "rate_infimum": sol.rate_value,
            "log_probability": estimate.log_probability,
            "newton_iterations": sol.newton_iterations,
            "ode_residual_norm": sol.ode_residual_norm,
        }
    )
    return 0


def _run_ldp_sweep(args, params, sim, ctrl, digest, manifest):
    if args.h0 is not None:
        schedule = [float(v) for v in args.h0.split(",") if v.strip()]
    elif args.sweep:
        name, values = _parse_sweep(args.sweep)
        if name != "h0":
            raise ConfigError("ldp-sweep only sweeps h0")
        schedule = list(values)
    else:
        raise ConfigError("ldp-sweep needs --h0 or --sweep h0:START:END:COUNT")
    sols = ldp.continue_in_h0(params, args.t_final, schedule, args.mesh)
    stem = _stem(args.command, digest, sim.seed)
    lines = ["h0,rate_infimum,log_probability,converged,iterations"]
    for h0_value, sol in zip(schedule, sols):
        est = ldp.transition_probability(sol.rate_value, params.n_agents)
        lines.append(
            f"{h0_value:.17g},{sol.rate_value:.17g},{est.log_probability:.17g},"
            f"{int(sol.converged)},{sol.newton_iterations}"
        )
        point_path = os.path.join(args.out, f"{stem}_h0_{h0_value:g}.csv")
        sol.grid.to_csv(point_path)
        manifest["outputs"].append(os.path.basename(point_path))
    summary = os.path.join(args.out, stem + ".csv")
    write_csv_atomic(summary, "\n".join(lines) + "\n")
    manifest["outputs"].append(os.path.basename(summary))
    manifest["results"]["points"] = len(sols)
    return 0


def _require_control(ctrl) -> ControlParams:
    if ctrl is None:
        raise ConfigError("this command needs theta_c in the config", key="theta_c")
    return ctrl


def _run_riccati(args, params, sim, ctrl, digest, manifest):
    ctrl = _require_control(ctrl)
    dt = args.dt if args.dt is not None else ctrl.horizon / 100000
    traj = control.integrate_riccati(params, ctrl, dt)
    stem = _stem(args.command, digest, sim.seed)
    path = os.path.join(args.out, stem + ".csv")
    traj.grid.to_csv(path)
    manifest["outputs"].append(os.path.basename(path))
    steady = control.solve_algebraic_riccati(params, ctrl)
    manifest["results"].update(
        {
            "steady_converged": traj.steady_converged,
            "a_inf": steady.a_inf,
            "b_inf": steady.b_inf,
            "d_inf": steady.d_inf,
            "e_inf": steady.e_inf,
            "reduced_precision": steady.reduced_precision,
        }
    )
    return 0


def _run_control_demo(args, params, sim, ctrl, digest, manifest):
    ctrl = _require_control(ctrl)
    steady = control.solve_algebraic_riccati(params, ctrl)
    law = control.build_feedback(steady, ctrl.theta_c)
    stem = _stem(args.command, digest, sim.seed)
    uncontrolled = sde.simulate_reduced(params, sim)
    controlled = sde.simulate_controlled(params, sim, law)
    for tag, grid in (("uncontrolled", uncontrolled), ("controlled", controlled)):
        path = os.path.join(args.out, f"{stem}_{tag}.csv")
        grid.to_csv(path)
        manifest["outputs"].append(os.path.basename(path))
    manifest["results"].update(
        {
            "transitions_uncontrolled": sde.count_transitions(uncontrolled["xbar"]),
            "transitions_controlled": sde.count_transitions(controlled["xbar"]),
            "b_inf": law.b_inf,
            "d_inf": law.d_inf,
            "e_inf": law.e_inf,
        }
    )
    return 0


_RUNNERS = {
    "simulate": _run_simulate,
    "fluctuations": _run_fluctuations,
    "ldp-path": _run_ldp_path,
    "ldp-sweep": _run_ldp_sweep,
    "riccati": _run_riccati,
    "control-demo": _run_control_demo,
}


def run(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        params, sim, ctrl, canonical, digest = _resolve(args)
    except (ConfigError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    os.makedirs(args.out, exist_ok=True)
    manifest = {
        "command": args.command,
        "config_hash": digest,
        "parameters": _config_dict(canonical),
        "overrides": sorted(args.set),
        "seed": sim.seed,
        "sweep": args.sweep,
        "outputs": [],
        "results": {},
    }
    try:
        status = _RUNNERS[args.command](args, params, sim, ctrl, digest, manifest)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except (NonConvergenceError, ContinuationError) as exc:
        manifest["results"]["error"] = str(exc)
        _write_manifest(args.out, _stem(args.command, digest, sim.seed), manifest)
        print(f"solver error: {exc}", file=sys.stderr)
        return 3
    _write_manifest(args.out, _stem(args.command, digest, sim.seed), manifest)
    return status


def main() -> None:
    sys.exit(run())


if __name__ == "__main__":
    main()

"""``nlsgraph`` command-line driver.

    nlsgraph <stationary|stability|evolve|scatter> --config run.json --out DIR
             [--sweep key=v1,v2,...] [--seed N]

Exit codes: 0 success, 2 configuration error, 3 blow-up signal, 4 numerical
failure.  ``NLSGRAPH_THREADS`` caps the number of sweep workers.
"""

from __future__ import annotations

import argparse
import copy
import csv
import json
import math
import os
import sys
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

import jsonschema
import numpy as np

from . import evolution as ev
from . import scattering as sc
from . import stability as stab
from . import standing_waves as sw
from .errors import (
    BlowUpError,
    FrequencyError,
    NLSGraphError,
    NoSolutionError,
    SetupError,
    SolverError,
    StepError,
)
from .functionals import action, energy, mass, nehari, stationary_residual
from .graph_core import Delta, DeltaPrimeS, Kirchhoff, StarGrid, lp_norm, vertex_residual

EXIT_OK, EXIT_CONFIG, EXIT_BLOWUP, EXIT_NUMERICAL = 0, 2, 3, 4


class ConfigError(ValueError):
    pass


# ---------------------------------------------------------------------------
# schema

_num = {"type": "number"}
_pos = {"type": "number", "exclusiveMinimum": 0}
_int_pos = {"type": "integer", "minimum": 1}


def _obj(props: dict, required=()) -> dict:
    return {"type": "object", "properties": props, "required": list(required),
            "additionalProperties": False}


_initial = {
    "oneOf": [
        _obj({"type": {"const": "stationary"}, "omega": _pos, "j": {"type": "integer", "minimum": 0}},
             ["type", "omega"]),
        _obj({"type": {"const": "perturbed"}, "omega": _pos, "j": {"type": "integer", "minimum": 0},
              "size": _pos}, ["type", "omega", "size"]),
        _obj({"type": {"const": "travelling"}, "omega": _pos, "a": _num, "v": _num},
             ["type", "omega", "v"]),
        _obj({"type": {"const": "scaled"}, "omega": _pos, "j": {"type": "integer", "minimum": 0},
              "factor": _pos}, ["type", "omega", "factor"]),
    ]
}

SCHEMA = _obj(
    {
        "graph": _obj({"n_edges": {"type": "integer", "minimum": 2}, "edge_length": _pos,
                       "n_points": {"type": "integer", "minimum": 3}},
                      ["n_edges", "edge_length", "n_points"]),
        "model": _obj({"mu": _pos, "alpha": _num,
                       "vertex": {"enum": ["delta", "kirchhoff", "delta_prime_s"]},
                       "beta": _num}, ["mu"]),
        "seed": {"type": "integer", "minimum": 0},
        "stationary": _obj({"omega": _pos, "mass": _pos,
                            "j": {"type": "integer", "minimum": 0}}),
        "stability": _obj({
            "omega_sweep": {"oneOf": [
                {"type": "array", "items": _pos, "minItems": 1},
                _obj({"start": _pos, "stop": _pos, "num": _int_pos}, ["start", "stop", "num"]),
            ]},
            "j": {"type": "integer", "minimum": 0},
            "jl_spectrum": {"type": "boolean"},
            "jl_k": _int_pos,
            "backend": {"enum": ["iterative", "dense"]},
        }, ["omega_sweep"]),
        "evolve": _obj({
            "dt": _pos, "t_end": _pos,
            "scheme": {"enum": [s.value for s in ev.Scheme]},
            "initial": _initial,
            "record_every": _int_pos,
            "snapshot_every": {"type": "integer", "minimum": 0},
            "blowup_threshold": _pos,
            "fixedpoint_tol": _pos,
            "fixedpoint_max_iter": _int_pos,
            "reference": {"type": "boolean"},
            "distance_norm": {"enum": ["L2", "energy"]},
        }, ["dt", "t_end", "initial"]),
        "scatter": _obj({"v": _pos, "x0": _pos, "delta_exp": _pos, "T_log": _pos, "dt": _pos,
                         "scheme": {"enum": [s.value for s in ev.Scheme]},
                         "record_every": _int_pos}, ["v", "x0", "delta_exp"]),
    },
    ["graph", "model"],
)


def load_config(path: str | Path) -> dict:
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config: {exc}") from exc
    try:
        cfg = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"malformed JSON at line {exc.lineno}, column {exc.colno}: {exc.msg}") from exc
    validate_config(cfg)
    return cfg


def validate_config(cfg: dict, command: str | None = None):
    try:
        jsonschema.validate(cfg, SCHEMA)
    except jsonschema.ValidationError as exc:
        where = "/".join(str(p) for p in exc.absolute_path) or "<root>"
        raise ConfigError(f"config error at {where}: {exc.message}") from exc
    if command is not None and command not in cfg:
        raise ConfigError(f"config has no '{command}' block")


# ---------------------------------------------------------------------------
# helpers


def fmt(x) -> str:
    if isinstance(x, (bool, np.bool_)):
        return str(bool(x))
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    if isinstance(x, (float, np.floating)):
        return f"{float(x):.16e}"
    return str(x)


def write_csv(path: Path, header: list[str], rows) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([fmt(v) for v in row])


def _params(cfg: dict) -> sw.NLSParams:
    model = cfg["model"]
    vertex = model.get("vertex", "delta")
    alpha = float(model.get("alpha", 0.0))
    if vertex == "kirchhoff" and alpha != 0:
        raise ConfigError("vertex 'kirchhoff' requires alpha = 0")
    if vertex == "delta_prime_s":
        alpha = 0.0
    return sw.NLSParams(cfg["graph"]["n_edges"], float(model["mu"]), alpha)


def _condition(cfg: dict):
    model = cfg["model"]
    vertex = model.get("vertex", "delta")
    if vertex == "delta_prime_s":
        if "beta" not in model:
            raise ConfigError("vertex 'delta_prime_s' needs model.beta")
        return DeltaPrimeS(float(model["beta"]))
    if vertex == "kirchhoff":
        return Kirchhoff()
    alpha = float(model.get("alpha", 0.0))
    return Kirchhoff() if alpha == 0 else Delta(alpha)


def _grid(cfg: dict) -> StarGrid:
    g = cfg["graph"]
    return StarGrid(g["n_edges"], float(g["edge_length"]), g["n_points"])


def _state(params: sw.NLSParams, omega: float, j: int | None):
    if sw.admissible_bump_counts(params) is None:
        return sw.kirchhoff_state(params, omega)
    return sw.build_state(params, omega, 0 if j is None else j)


def _log(msg: str) -> None:
    print(msg, file=sys.stderr)


# ---------------------------------------------------------------------------
# commands


def cmd_stationary(cfg: dict, out: Path, seed: int | None = None) -> int:
    params = _params(cfg)
    grid = _grid(cfg)
    block = cfg["stationary"]
    if ("omega" in block) == ("mass" in block):
        raise ConfigError("stationary needs exactly one of 'omega' or 'mass'")
    counts = sw.admissible_bump_counts(params)
    kirchhoff = counts is None
    if "j" in block:
        if not kirchhoff and block["j"] not in counts:
            raise ConfigError(f"bump count j={block['j']} is not admissible: need j < N/2 "
                              f"for alpha < 0 or j > N/2 for alpha > 0 (N={params.n_edges})")
        branches = [block["j"]]
    else:
        branches = [0] if kirchhoff else sorted(counts)
    cond = Delta(params.alpha)
    rows = []
    for j in branches:
        if "omega" in block:
            omega = float(block["omega"])
        else:
            try:
                omega = sw.solve_omega_for_mass(params, j, float(block["mass"]))
            except NoSolutionError as exc:
                _log(f"j={j} skipped: {exc}")
                continue
        try:
            state = sw.kirchhoff_state(params, omega) if kirchhoff else sw.build_state(params, omega, j)
        except (FrequencyError, ValueError) as exc:
            raise ConfigError(f"j={j}: {exc}") from exc
        f = sw.sample(state, grid)
        try:
            m_cf = sw.mass_closed_form(state)
        except NotImplementedError:
            m_cf = math.nan
        rows.append([j, omega, state.shift, m_cf, lp_norm(f, 2, "simpson") ** 2,
                     energy(f, params, cond), action(f, omega, params, cond),
                     nehari(f, omega, params, cond), stationary_residual(f, omega, params),
                     vertex_residual(f, cond)])
    if not rows:
        raise ConfigError("no admissible branch carries the requested mass")
    write_csv(out / "states.csv",
              ["j", "omega", "a", "mass_closed_form", "mass_quadrature", "energy", "action",
               "nehari_residual", "stationary_residual", "vertex_residual"], rows)
    return EXIT_OK


def _omega_sweep(block) -> list[float]:
    sweep = block["omega_sweep"]
    if isinstance(sweep, dict):
        return list(np.linspace(sweep["start"], sweep["stop"], sweep["num"]))
    return [float(w) for w in sweep]


def cmd_stability(cfg: dict, out: Path, seed: int | None = None) -> int:
    params = _params(cfg)
    grid = _grid(cfg)
    block = cfg["stability"]
    j = block.get("j", 0)
    backend = block.get("backend", "iterative")
    if sw.admissible_bump_counts(params) is not None and j not in sw.admissible_bump_counts(params):
        raise ConfigError(f"bump count j={j} is not admissible for N={params.n_edges}, "
                          f"alpha={params.alpha}")
    thr = sw.branch_threshold(params, j)
    rows, spectrum = [], []
    for omega in _omega_sweep(block):
        if omega - thr < 1e-5:
            _log(f"omega={omega!r} skipped: at or below the branch threshold {thr!r}")
            continue
        rep = stab.classify_stability(params, j, omega, grid, backend=backend)
        rows.append([omega, rep.morse_index, rep.l2_kernel_residual, rep.l2_second_eigenvalue,
                     rep.vk_derivative, rep.verdict.value])
        if block.get("jl_spectrum", False):
            state = sw.build_state(params, omega, j)
            op = stab.assemble_JL(state, grid)
            k = min(block.get("jl_k", 6), op.dim - 2)
            b = "dense" if backend == "dense" else "iterative"
            for lam, _ in stab.eig_low(op, k, backend=b, sigma=None if b == "dense" else 0.3 * omega):
                spectrum.append([omega, lam.real, lam.imag])
    write_csv(out / "stability.csv",
              ["omega", "morse_index", "l2_kernel_residual", "l2_second_eigenvalue",
               "vk_derivative", "verdict"], rows)
    if block.get("jl_spectrum", False):
        write_csv(out / "jl_spectrum.csv", ["omega", "re", "im"], spectrum)
    return EXIT_OK


def _initial_datum(cfg: dict, params, cond, grid, seed):
    init = cfg["evolve"]["initial"]
    kind = init["type"]
    omega = float(init["omega"])
    if kind == "travelling":
        psi0 = sw.travelling_wave_even_kirchhoff(params, omega, float(init.get("a", 0.0)),
                                                 float(init["v"]), 0.0, grid)
        return psi0, ("travelling", omega, float(init.get("a", 0.0)), float(init["v"]))
    if isinstance(cond, DeltaPrimeS):
        state = sw.kirchhoff_state(sw.NLSParams(params.n_edges, params.mu, 0.0), omega)
    else:
        state = _state(params, omega, init.get("j"))
    phi = sw.sample(state, grid)
    if kind == "stationary":
        return phi, state
    if kind == "scaled":
        return phi * float(init["factor"]), state
    if seed is None:
        raise ConfigError("a perturbed initial datum needs a seed (config 'seed' or --seed)")
    rng = np.random.default_rng(seed)
    bump = ev.random_smooth_perturbation(grid, rng, scale=1.0 / math.sqrt(omega))
    bump = bump * (float(init["size"]) / ev.energy_norm(bump))
    return phi + bump, state


def cmd_evolve(cfg: dict, out: Path, seed: int | None = None) -> int:
    params = _params(cfg)
    cond = _condition(cfg)
    grid = _grid(cfg)
    block = cfg["evolve"]
    seed = cfg.get("seed") if seed is None else seed
    psi0, reference = _initial_datum(cfg, params, cond, grid, seed)
    config = ev.EvolutionConfig(
        dt=float(block["dt"]), t_end=float(block["t_end"]),
        scheme=block.get("scheme", ev.Scheme.CRANK_NICOLSON.value),
        fixedpoint_tol=float(block.get("fixedpoint_tol", 1e-12)),
        fixedpoint_max_iter=int(block.get("fixedpoint_max_iter", 50)),
        record_every=int(block.get("record_every", 1)),
        blowup_threshold=float(block.get("blowup_threshold", 1e6)),
        snapshot_every=int(block.get("snapshot_every", 0)),
    )
    want_ref = block.get("reference", True)
    norm = block.get("distance_norm", "L2")
    integ = ev.Integrator(grid, params, cond, config)
    distances = []

    def measure(t, u):
        if not want_ref:
            return
        f = integ.op.to_function(u)
        if isinstance(reference, tuple):
            _, omega, a, v = reference
            exact = sw.travelling_wave_even_kirchhoff(params, omega, a, v, t, grid)
            distances.append(lp_norm(f - exact))
        else:
            distances.append(ev.orbit_distance(f, sw.sample(reference, grid), norm))

    code = EXIT_OK
    try:
        traj = integ.run(psi0, callback=measure)
    except BlowUpError as exc:
        traj = exc.trajectory
        _log(str(exc))
        code = EXIT_BLOWUP
    n = grid.n_edges
    header = (["t", "total_mass", "energy"] + [f"mass_edge_{i + 1}" for i in range(n)]
              + ["vertex_abs", "h1_norm"] + (["orbit_distance"] if want_ref else []))
    rows = []
    for i, (t, o) in enumerate(zip(traj.times, traj.observables)):
        row = [t, o.mass, o.energy, *o.edge_mass, o.vertex_modulus, o.h1_norm]
        if want_ref:
            row.append(distances[i] if i < len(distances) else math.nan)
        rows.append(row)
    write_csv(out / "trace.csv", header, rows)
    if config.snapshot_every:
        for t, f in traj.snapshots:
            cols = [grid.x]
            head = ["x"]
            for e in range(n):
                cols += [f.values[e].real, f.values[e].imag]
                head += [f"re_{e + 1}", f"im_{e + 1}"]
            write_csv(out / f"snap_{t:.6f}.csv", head, zip(*cols))
    if traj.boundary_flagged:
        _log("warning: more than 1e-8 of the mass reached the outer 5% of an edge")
    return code


def cmd_scatter(cfg: dict, out: Path, seed: int | None = None) -> int:
    params = _params(cfg)
    cond = _condition(cfg)
    grid = _grid(cfg)
    block = cfg["scatter"]
    v = float(block["v"])
    dt = float(block.get("dt", grid.h / (2.0 * v)))
    config = ev.EvolutionConfig(dt, 1.0 if dt < 1.0 else 2.0 * dt,
                                scheme=block.get("scheme", ev.Scheme.CRANK_NICOLSON.value),
                                record_every=int(block.get("record_every", 20)))
    try:
        setup = sc.ScatteringSetup(params, cond, v, float(block["x0"]), float(block["delta_exp"]),
                                   grid, config, T_log=float(block.get("T_log", 1.0)))
    except SetupError as exc:
        raise ConfigError(str(exc)) from exc
    rep = sc.run_scattering(setup)
    n = grid.n_edges
    ratios = rep.ratios
    marks = {c.t: c for c in rep.checkpoints}
    rows = []
    for i, t in enumerate(rep.times):
        c = marks.get(t)
        d = (c.dist_pre, c.dist_interaction, c.dist_out) if c else (math.nan,) * 3
        rows.append([t, *ratios[i], *d])
    write_csv(out / "scatter.csv",
              ["t"] + [f"r{i + 1}" for i in range(n)] + ["dist_pre", "dist_S", "dist_out"], rows)
    write_csv(out / "scatter_summary.csv", _summary_header(n), [_summary_row(setup, rep)])
    if rep.boundary_flagged:
        _log("warning: boundary contamination before t3")
    return EXIT_OK


def _summary_header(n: int) -> list[str]:
    return (["v", "t1", "t2", "t3", "R_lin_re", "R_lin_im", "T_lin_re", "T_lin_im"]
            + [f"r{i + 1}_t3" for i in range(n)] + ["boundary_warning"])


def _summary_row(setup, rep) -> list:
    return [setup.v, rep.t1, rep.t2, rep.t3, rep.R.real, rep.R.imag, rep.T.real, rep.T.imag,
            *rep.final_ratios, rep.boundary_flagged]


COMMANDS = {
    "stationary": cmd_stationary,
    "stability": cmd_stability,
    "evolve": cmd_evolve,
    "scatter": cmd_scatter,
}


# ---------------------------------------------------------------------------
# sweeps


def _parse_value(text: str):
    try:
        return json.loads(text)
    except json.JSONDecodeError:
        return text


def parse_sweep(spec: str) -> tuple[list[str], list]:
    if "=" not in spec:
        raise ConfigError(f"--sweep expects key=v1,v2,..., got {spec!r}")
    key, values = spec.split("=", 1)
    items = [_parse_value(v) for v in values.split(",") if v != ""]
    if not items:
        raise ConfigError("--sweep needs at least one value")
    return key.split("."), items


def _set_path(cfg: dict, path: list[str], value) -> dict:
    cfg = copy.deepcopy(cfg)
    node = cfg
    for part in path[:-1]:
        if part not in node or not isinstance(node[part], dict):
            raise ConfigError(f"sweep key {'.'.join(path)!r} does not exist in the config")
        node = node[part]
    node[path[-1]] = value
    return cfg


def _run_one(command: str, cfg: dict, out: str, seed):
    """Worker entry point; returns (exit code, message)."""
    path = Path(out)
    path.mkdir(parents=True, exist_ok=True)
    try:
        validate_config(cfg, command)
        return COMMANDS[command](cfg, path, seed), ""
    except (ConfigError, NLSGraphError, ValueError) as exc:
        if isinstance(exc, (SolverError, StepError)):
            return EXIT_NUMERICAL, str(exc)
        if isinstance(exc, NLSGraphError) and isinstance(exc, (RuntimeError, NotImplementedError)):
            return EXIT_NUMERICAL, str(exc)
        return EXIT_CONFIG, str(exc)
    except (ArithmeticError, np.linalg.LinAlgError, RuntimeError) as exc:
        return EXIT_NUMERICAL, f"{type(exc).__name__}: {exc}"


def max_workers() -> int:
    env = os.environ.get("NLSGRAPH_THREADS")
    if env:
        try:
            return max(1, int(env))
        except ValueError:
            _log(f"ignoring NLSGRAPH_THREADS={env!r}")
    return os.cpu_count() or 1


def main(argv: list[str] | None = None) -> int:
    parser = argparse.ArgumentParser(prog="nlsgraph", description="NLS on metric star graphs")
    parser.add_argument("command", choices=sorted(COMMANDS))
    parser.add_argument("--config", required=True, help="JSON experiment configuration")
    parser.add_argument("--out", required=True, help="output directory")
    parser.add_argument("--sweep", help="dotted.key=v1,v2,... runs one experiment per value")
    parser.add_argument("--seed", type=int, help="overrides the config seed")
    args = parser.parse_args(argv)

    try:
        cfg = load_config(args.config)
        validate_config(cfg, args.command)
        sweep = parse_sweep(args.sweep) if args.sweep else None
        if sweep is not None:
            runs = [(_set_path(cfg, sweep[0], val), val) for val in sweep[1]]
            for c, _ in runs:
                validate_config(c, args.command)
    except ConfigError as exc:
        _log(str(exc))
        return EXIT_CONFIG

    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    if sweep is None:
        code, msg = _run_one(args.command, cfg, str(out), args.seed)
        if msg:
            _log(msg)
        return code

    key = ".".join(sweep[0])
    dirs = [str(out / f"{key}={fmt(val)}") for _, val in runs]
    workers = min(max_workers(), len(runs))
    jobs = [(args.command, c, d, args.seed) for (c, _), d in zip(runs, dirs)]
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(_run_one, *zip(*jobs)))
    else:
        results = [_run_one(*job) for job in jobs]
    for (_, val), (code, msg) in zip(runs, results):
        if msg:
            _log(f"{key}={val}: {msg}")
    if args.command == "scatter":
        rows = []
        for d, (code, _) in zip(dirs, results):
            if code == EXIT_OK:
                with open(Path(d) / "scatter_summary.csv") as fh:
                    rows.append(list(csv.reader(fh))[1])
        n = cfg["graph"]["n_edges"]
        with open(out / "scatter_summary.csv", "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(_summary_header(n))
            w.writerows(rows)
    return max(code for code, _ in results)


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())

"""Command-line interface: JSON config in, JSON (and CSV) reports out.

    p2lab <nu1|solve|scan|verify|meshgen> --config <path> [--out <path>]

Every report embeds the fully resolved configuration and a format version;
re-running a report's config reproduces its numbers bit-for-bit on the same
platform. Exit codes: 0 success, 2 config error, 3 weights condition, 4 below
threshold, 5 nonconvergence, 6 property failure. The environment variable
P2LAB_SEED overrides the config seed.
"""

import argparse
import json
import math
import os
import sys
from dataclasses import dataclass
from pathlib import Path

from p2lab.assembly import WeightField, assemble
from p2lab.errors import (
    ConfigError,
    NonConvergenceError,
    P2LabError,
    PropertyFailureError,
)
from p2lab.linear_spectrum import compute_nu1, default_t_list, verify_threshold_scaling
from p2lab.mesh import (
    Mesh,
    build_disk_mesh,
    build_interval_mesh,
    build_rectangle_mesh,
    load_mesh,
    save_mesh,
)
from p2lab.nonlinear_solvers import SolverOptions, solve_direct_min, solve_nehari_min
from p2lab.verification import DEFAULT_SEED, run_property_suite, scan

FORMAT_VERSION = 1
EIGENVECTOR_INLINE_LIMIT = 2000

_SOLVER_DEFAULTS = {
    "tol": 1e-8,
    "max_iterations": 10000,
    "eps": 0.0,
    "margin": 1e-6,
    "seed": DEFAULT_SEED,
    "armijo_slope": 1e-4,
    "armijo_backtrack": 0.5,
    "max_backtracks": 60,
    "newton_gate": 1e-2,
}


def _reject_unknown(section, data, allowed):
    unknown = sorted(set(data) - set(allowed))
    if unknown:
        raise ConfigError(f"unknown key(s) in {section}: {', '.join(unknown)} "
                          f"(allowed: {', '.join(sorted(allowed))})")


@dataclass(frozen=True)
class RunConfig:
    """Validated configuration with every default resolved."""

    mesh_spec: dict
    weight_a: WeightField
    weight_b: WeightField
    p: float
    eps: float
    solver: SolverOptions
    seed: int
    workers: int
    lam: float | None
    lambda_nu1_factor: float | None
    grid_values: list
    grid_nu1_factors: list
    t_list: list | None
    p_list: list
    lambda_factor: float
    sample_count: int
    output: str | None
    resolved: dict
    base_dir: Path

    def build_mesh(self) -> Mesh:
        spec = self.mesh_spec
        if "path" in spec:
            return load_mesh(self.base_dir / spec["path"])
        gen = spec["generator"]
        if gen == "interval":
            return build_interval_mesh(spec["n"], spec["length"])
        if gen == "rectangle":
            return build_rectangle_mesh(spec["nx"], spec["ny"], spec["Lx"], spec["Ly"])
        return build_disk_mesh(spec["m"], spec["rings"], spec["radius"])

    def analytic_measures(self):
        """(domain, boundary) measures for generated meshes, else (None, None)."""
        spec = self.mesh_spec
        if "path" in spec:
            return None, None
        if spec["generator"] == "interval":
            return spec["length"], 2.0
        if spec["generator"] == "rectangle":
            return spec["Lx"] * spec["Ly"], 2.0 * (spec["Lx"] + spec["Ly"])
        m, r = spec["m"], spec["radius"]
        return 0.5 * m * r * r * math.sin(2.0 * math.pi / m), \
            2.0 * m * r * math.sin(math.pi / m)

    def assemble_problem(self):
        return assemble(self.build_mesh(), self.weight_a, self.weight_b,
                        self.p, self.eps)


def _parse_mesh_spec(data):
    if not isinstance(data, dict):
        raise ConfigError("mesh section must be an object")
    if "path" in data:
        _reject_unknown("mesh", data, {"path"})
        return {"path": str(data["path"])}
    gen = data.get("generator")
    if gen == "interval":
        _reject_unknown("mesh", data, {"generator", "n", "length"})
        return {"generator": gen, "n": int(data["n"]),
                "length": float(data.get("length", 1.0))}
    if gen == "rectangle":
        _reject_unknown("mesh", data, {"generator", "nx", "ny", "Lx", "Ly"})
        return {"generator": gen, "nx": int(data["nx"]), "ny": int(data["ny"]),
                "Lx": float(data.get("Lx", 1.0)), "Ly": float(data.get("Ly", 1.0))}
    if gen == "disk":
        _reject_unknown("mesh", data, {"generator", "m", "rings", "radius"})
        return {"generator": gen, "m": int(data["m"]), "rings": int(data["rings"]),
                "radius": float(data.get("radius", 1.0))}
    raise ConfigError(f"mesh needs a 'path' or a generator in "
                      f"{{interval, rectangle, disk}}; got {gen!r}")


def _parse_weight(name, data, target, base_dir):
    if not isinstance(data, dict):
        raise ConfigError(f"{name} must be an object")
    kind = data.get("kind")
    if kind == "constant":
        _reject_unknown(name, data, {"kind", "value"})
        return WeightField.constant(float(data["value"]), target)
    if kind == "affine":
        _reject_unknown(name, data, {"kind", "coefficients"})
        return WeightField.affine([float(c) for c in data["coefficients"]], target)
    if kind == "per_element":
        _reject_unknown(name, data, {"kind", "path"})
        return WeightField.from_file(base_dir / data["path"], target)
    raise ConfigError(f"{name} needs kind in {{constant, affine, per_element}}; "
                      f"got {kind!r}")


_TOP_KEYS = {
    "version", "mesh", "weight_a", "weight_b", "p", "solver", "workers",
    "lambda", "lambda_nu1_factor", "grid", "t_list", "p_list",
    "lambda_factor", "sample_count", "output",
}


def load_config(path) -> RunConfig:
    path = Path(path)
    try:
        with open(path) as fh:
            data = json.load(fh)
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config {path} is not valid JSON: {exc}") from exc
    if not isinstance(data, dict):
        raise ConfigError("config root must be a JSON object")
    _reject_unknown("config", data, _TOP_KEYS)

    version = data.get("version", FORMAT_VERSION)
    if version != FORMAT_VERSION:
        raise ConfigError(f"unsupported config version {version!r} "
                          f"(this build reads version {FORMAT_VERSION})")
    for key in ("mesh", "weight_a", "weight_b", "p"):
        if key not in data:
            raise ConfigError(f"config is missing required key '{key}'")

    base_dir = path.parent
    mesh_spec = _parse_mesh_spec(data["mesh"])
    weight_a = _parse_weight("weight_a", data["weight_a"], "domain", base_dir)
    weight_b = _parse_weight("weight_b", data["weight_b"], "boundary", base_dir)

    p = float(data["p"])
    if not p > 1.0:
        raise ConfigError(f"p must exceed 1, got {p}")
    if p == 2.0:
        raise ConfigError("p = 2 reduces to the linear Steklov problem for the "
                          "Laplacian and is excluded; pick p in (1,2) or (2,inf)")

    solver_data = data.get("solver", {})
    if not isinstance(solver_data, dict):
        raise ConfigError("solver section must be an object")
    _reject_unknown("solver", solver_data, set(_SOLVER_DEFAULTS))
    solver_resolved = {**_SOLVER_DEFAULTS, **solver_data}
    seed = int(os.environ.get("P2LAB_SEED", solver_resolved["seed"]))
    solver_resolved["seed"] = seed
    eps = float(solver_resolved["eps"])
    opts = SolverOptions(
        tol=float(solver_resolved["tol"]),
        max_iterations=int(solver_resolved["max_iterations"]),
        eps=None,  # the problem-level eps is the single source
        margin=float(solver_resolved["margin"]),
        armijo_slope=float(solver_resolved["armijo_slope"]),
        armijo_backtrack=float(solver_resolved["armijo_backtrack"]),
        max_backtracks=int(solver_resolved["max_backtracks"]),
        newton_gate=float(solver_resolved["newton_gate"]),
    )

    grid_data = data.get("grid", {})
    if not isinstance(grid_data, dict):
        raise ConfigError("grid section must be an object")
    _reject_unknown("grid", grid_data, {"values", "nu1_factors"})
    grid_values = [float(v) for v in grid_data.get("values", [])]
    grid_factors = [float(v) for v in grid_data.get("nu1_factors", [])]

    lam = data.get("lambda")
    factor = data.get("lambda_nu1_factor")
    if lam is not None and factor is not None:
        raise ConfigError("give either 'lambda' or 'lambda_nu1_factor', not both")

    cfg = RunConfig(
        mesh_spec=mesh_spec,
        weight_a=weight_a,
        weight_b=weight_b,
        p=p,
        eps=eps,
        solver=opts,
        seed=seed,
        workers=int(data.get("workers", 1)),
        lam=None if lam is None else float(lam),
        lambda_nu1_factor=None if factor is None else float(factor),
        grid_values=grid_values,
        grid_nu1_factors=grid_factors,
        t_list=None if "t_list" not in data else [float(t) for t in data["t_list"]],
        p_list=[float(q) for q in data.get("p_list", [1.3, 1.5, 1.8])],
        lambda_factor=float(data.get("lambda_factor", 1.05)),
        sample_count=int(data.get("sample_count", 100)),
        output=data.get("output"),
        resolved={
            "version": FORMAT_VERSION,
            "mesh": mesh_spec,
            "weight_a": weight_a.describe(),
            "weight_b": weight_b.describe(),
            "p": p,
            "solver": solver_resolved,
            "workers": int(data.get("workers", 1)),
            "lambda": lam,
            "lambda_nu1_factor": factor,
            "grid": {"values": grid_values, "nu1_factors": grid_factors},
            "t_list": data.get("t_list"),
            "p_list": [float(q) for q in data.get("p_list", [1.3, 1.5, 1.8])],
            "lambda_factor": float(data.get("lambda_factor", 1.05)),
            "sample_count": int(data.get("sample_count", 100)),
            "output": data.get("output"),
        },
        base_dir=base_dir,
    )
    return cfg


# ---------------------------------------------------------------------------
# report plumbing
# ---------------------------------------------------------------------------

def _report_payload(command, config, results):
    return {"format_version": FORMAT_VERSION, "command": command,
            "config": config.resolved, "results": results}


def _write_json(path, payload):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w") as fh:
        json.dump(payload, fh, indent=2)
        fh.write("\n")


def _eigenvector_entry(u, out_path, tag):
    values = [float(x) for x in u]
    if len(values) <= EIGENVECTOR_INLINE_LIMIT:
        return values
    out_path = Path(out_path)
    sidecar = out_path.with_name(out_path.stem + f".{tag}.txt")
    with open(sidecar, "w") as fh:
        for x in values:
            fh.write(repr(x) + "\n")
    return {"file": sidecar.name, "length": len(values)}


def _scaling_rows(rows):
    return [{"t": r.t, "value": r.value, "gap": r.gap, "ratio": r.ratio}
            for r in rows]


def _scan_row_dict(row):
    return {"lambda": row.lam, "classification": row.classification,
            "I_value": row.I_value, "residual_dual": row.residual_dual,
            "iterations": row.iterations, "message": row.message}


def _csv_cell(value):
    if value is None:
        return ""
    if isinstance(value, float):
        return repr(value)
    return str(value)


def write_scan_csv(path, rows):
    lines = ["lambda,classification,I_value,residual,iterations"]
    for row in rows:
        lines.append(",".join(_csv_cell(v) for v in (
            row.lam, row.classification, row.I_value, row.residual_dual,
            row.iterations)))
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w") as fh:
        fh.write("\n".join(lines) + "\n")


# ---------------------------------------------------------------------------
# commands
# ---------------------------------------------------------------------------

def cmd_nu1(config: RunConfig, out):
    problem = config.assemble_problem()
    estimate = compute_nu1(problem)
    t_list = config.t_list if config.t_list is not None else default_t_list(config.p)
    scaling = verify_threshold_scaling(problem, estimate, t_list)
    results = {
        "nu1": estimate.nu1,
        "pencil_residual": estimate.pencil_residual,
        "reduced_dim": estimate.reduced_dim,
        "minimizer": _eigenvector_entry(estimate.minimizer, out, "minimizer"),
        "scaling": _scaling_rows(scaling),
    }
    _write_json(out, _report_payload("nu1", config, results))
    return 0


def _resolve_lambda(config, problem):
    if config.lam is not None:
        return float(config.lam), None
    estimate = compute_nu1(problem)
    if config.lambda_nu1_factor is None:
        raise ConfigError("solve needs 'lambda' or 'lambda_nu1_factor' in the config")
    return config.lambda_nu1_factor * estimate.nu1, estimate


def cmd_solve(config: RunConfig, out):
    problem = config.assemble_problem()
    lam, estimate = _resolve_lambda(config, problem)
    solver = solve_direct_min if config.p > 2.0 else solve_nehari_min
    pair = solver(problem, lam, config.solver, threshold=estimate)
    results = {
        "lambda": pair.lam,
        "method": pair.method,
        "I_value": pair.I_value,
        "residual_dual": pair.residual_dual,
        "iterations": pair.iterations,
        "eps_used": pair.eps_used,
        "diagnostics": pair.diagnostics,
        "eigenvector": _eigenvector_entry(pair.u, out, "eigenvector"),
    }
    _write_json(out, _report_payload("solve", config, results))
    return 0


def cmd_scan(config: RunConfig, out):
    problem = config.assemble_problem()
    estimate = compute_nu1(problem)
    grid = list(config.grid_values) + [f * estimate.nu1
                                       for f in config.grid_nu1_factors]
    report = scan(problem, grid, config.solver, sample_count=config.sample_count,
                  seed=config.seed, workers=config.workers, threshold=estimate)
    results = {
        "nu1": report.nu1,
        "fingerprint": report.fingerprint,
        "rows": [_scan_row_dict(r) for r in report.rows],
    }
    _write_json(out, _report_payload("scan", config, results))
    csv_path = Path(out).with_suffix(".csv")
    write_scan_csv(csv_path, report.rows)
    failed = [r for r in report.rows if r.classification == "nonconvergence"]
    if failed:
        raise NonConvergenceError(
            f"{len(failed)} scan row(s) did not converge "
            f"(first at lambda = {failed[0].lam:.12g})")
    return 0


def cmd_verify(config: RunConfig, out):
    mesh = None
    setup_error = None
    try:
        mesh = config.build_mesh()
    except P2LabError as exc:
        setup_error = exc
    expected_measure, expected_boundary = config.analytic_measures()
    if setup_error is None:
        results = run_property_suite(
            mesh, config.weight_a, config.weight_b, config.p, eps=config.eps,
            opts=config.solver, seed=config.seed,
            expected_measure=expected_measure,
            expected_boundary=expected_boundary)
        rows = [{"name": r.name, "passed": r.passed, "measured": r.measured,
                 "detail": r.detail} for r in results]
    else:
        rows = [{"name": "problem_setup", "passed": False, "measured": None,
                 "detail": f"{type(setup_error).__name__}: {setup_error}"}]
    payload = _report_payload("verify", config,
                              {"properties": rows,
                               "all_passed": all(r["passed"] for r in rows)})
    _write_json(out, payload)
    failed = [r["name"] for r in rows if not r["passed"]]
    if failed:
        raise PropertyFailureError(f"verification failed: {', '.join(failed)}")
    return 0


def cmd_meshgen(config: RunConfig, out):
    save_mesh(config.build_mesh(), out)
    return 0


_COMMANDS = {
    "nu1": cmd_nu1,
    "solve": cmd_solve,
    "scan": cmd_scan,
    "verify": cmd_verify,
    "meshgen": cmd_meshgen,
}


def main(argv=None):
    parser = argparse.ArgumentParser(
        prog="p2lab",
        description="Spectral laboratory for the weighted Steklov-type "
                    "eigenvalue problem of the (p,2)-Laplacian")
    parser.add_argument("command", choices=sorted(_COMMANDS))
    parser.add_argument("--config", required=True, help="JSON configuration file")
    parser.add_argument("--out", help="output path (default: from config, else "
                                      "p2lab_<command>.json)")
    args = parser.parse_args(argv)

    try:
        config = load_config(args.config)
        default_name = "p2lab_mesh.txt" if args.command == "meshgen" \
            else f"p2lab_{args.command}.json"
        out = args.out or config.output or default_name
        return _COMMANDS[args.command](config, out)
    except P2LabError as exc:
        print(f"p2lab {args.command}: error: {exc}", file=sys.stderr)
        return exc.exit_code


if __name__ == "__main__":
    sys.exit(main())

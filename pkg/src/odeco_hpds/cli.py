"""Command-line front end.

Verbs: analyze | solve | decompose | transform | simulate.  Systems come
in as JSON spec files (monomial equations or a flat tensor), reports go
out as JSON, trajectories as CSV; `--plot` renders a figure file next to
the delimited output.  Exit codes: 0 success, 2 input error, 3 analysis
refusal, 4 internal numerical failure.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from dataclasses import dataclass

import numpy as np

from . import __version__, control, dynamics, oracle, spectral, transform
from .errors import (
    DecompositionError,
    FitError,
    HPDSError,
    InputError,
    NoEquilibriumError,
    NotOdecoError,
    NotTransformableError,
    RefusalError,
    SymmetryError,
)
from .tensor_core import (
    AlmostSymTensor,
    PolynomialSpec,
    SymTensor,
    as_supersymmetric,
    from_polynomial,
)

SCHEMA_VERSION = "1"
EXIT_OK = 0
EXIT_INPUT = 2
EXIT_REFUSAL = 3
EXIT_NUMERICAL = 4

CSV_FORMAT = "%.12g"


# ---------------------------------------------------------------------------
# input handling

@dataclass
class LoadedSystem:
    tensor: AlmostSymTensor
    sym: SymTensor | None
    control: np.ndarray | None
    x0: np.ndarray | None
    path: str

    @property
    def order(self) -> int:
        return self.tensor.order

    @property
    def dim(self) -> int:
        return self.tensor.dim


def _vector(doc, key, dim, path):
    if key not in doc or doc[key] is None:
        return None
    raw = doc[key]
    if not isinstance(raw, list) or len(raw) != dim:
        raise InputError(f"{path}: '{key}' must be a list of {dim} numbers")
    try:
        return np.array([float(v) for v in raw])
    except (TypeError, ValueError):
        raise InputError(f"{path}: '{key}' must contain numbers only")


def load_system(path: str) -> LoadedSystem:
    """Parse and validate a system spec file."""
    try:
        with open(path, "r", encoding="utf-8") as fh:
            doc = json.load(fh)
    except OSError as exc:
        raise InputError(f"cannot read {path}: {exc}")
    except json.JSONDecodeError as exc:
        raise InputError(f"{path}: invalid JSON ({exc})")
    if not isinstance(doc, dict):
        raise InputError(f"{path}: top-level JSON object expected")

    dim = doc.get("dim")
    degree = doc.get("degree")
    if not isinstance(dim, int) or dim < 1:
        raise InputError(f"{path}: 'dim' must be a positive integer")
    if not isinstance(degree, int) or degree < 1:
        raise InputError(f"{path}: 'degree' must be a positive integer")
    order = degree + 1

    has_eq = doc.get("equations") is not None
    has_tensor = doc.get("tensor") is not None
    if has_eq == has_tensor:
        raise InputError(f"{path}: exactly one of 'equations'/'tensor' required")

    try:
        if has_eq:
            eq_doc = doc["equations"]
            if not isinstance(eq_doc, list) or len(eq_doc) != dim:
                raise InputError(
                    f"{path}: 'equations' must list {dim} equations"
                )
            equations = []
            for i, eq in enumerate(eq_doc):
                if not isinstance(eq, list):
                    raise InputError(f"{path}: equation {i + 1} must be a list")
                monos = []
                for mono in eq:
                    if (not isinstance(mono, dict) or "exponents" not in mono
                            or "coeff" not in mono):
                        raise InputError(
                            f"{path}: each monomial needs 'exponents' and 'coeff'"
                        )
                    monos.append((tuple(mono["exponents"]), float(mono["coeff"])))
                equations.append(tuple(monos))
            spec = PolynomialSpec(dim=dim, degree=degree,
                                  equations=tuple(equations))
            tensor = from_polynomial(spec)
        else:
            values = doc["tensor"]
            if not isinstance(values, list):
                raise InputError(f"{path}: 'tensor' must be a flat list")
            tensor = AlmostSymTensor.from_flat(values, order, dim)
    except InputError:
        raise
    except (SymmetryError, ValueError, TypeError) as exc:
        raise InputError(f"{path}: {exc}")

    return LoadedSystem(
        tensor=tensor,
        sym=as_supersymmetric(tensor),
        control=_vector(doc, "control", dim, path),
        x0=_vector(doc, "x0", dim, path),
        path=path,
    )


def _check_threads_env():
    raw = os.environ.get("ODECO_HPDS_THREADS")
    if raw is None:
        return
    try:
        value = int(raw)
    except ValueError:
        raise InputError(f"ODECO_HPDS_THREADS must be an integer, got {raw!r}")
    if value < 1:
        raise InputError(f"ODECO_HPDS_THREADS must be positive, got {value}")
    # every computation in this package is single-threaded and pure, so
    # any positive cap is honored as-is


# ---------------------------------------------------------------------------
# output helpers

def _floats(values):
    return [float(v) for v in np.asarray(values).ravel()]


def _matrix(values):
    return [[float(v) for v in row] for row in np.asarray(values)]


def _emit_json(report, output):
    text = json.dumps(report, indent=2)
    if output:
        with open(output, "w", encoding="utf-8") as fh:
            fh.write(text + "\n")
    else:
        sys.stdout.write(text + "\n")


def _emit_csv(header, rows, output):
    lines = [",".join(header)]
    for row in rows:
        lines.append(",".join(CSV_FORMAT % v for v in row))
    text = "\n".join(lines) + "\n"
    if output:
        with open(output, "w", encoding="utf-8") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


# ---------------------------------------------------------------------------
# shared closed-form routing

@dataclass
class ClosedRoute:
    """Odeco coordinates of a system: direct or through a transformation."""

    decomposition: spectral.OdecoDecomposition
    P: np.ndarray | None  # None means the identity (direct route)
    model: transform.TransformModel | None
    # decomposition residual of the original tensor; None when the input
    # is only almost symmetric and has no direct decomposition at all
    odeco_residual: float | None

    def to_modal_frame(self, vec):
        if vec is None:
            return None
        if self.P is None:
            return np.asarray(vec, dtype=float)
        return np.linalg.solve(self.P, np.asarray(vec, dtype=float))

    def from_modal_frame(self, states):
        if self.P is None:
            return states
        return states @ self.P.T


def _closed_route(system: LoadedSystem, tol: float, epsilon: float,
                  absolute: bool, seed: int) -> ClosedRoute:
    """Find odeco coordinates, directly or via the structured fit."""
    if system.sym is not None:
        d = spectral.odeco_decompose(system.sym, tol, seed=seed)
        if d.residual <= tol:
            return ClosedRoute(decomposition=d, P=None, model=None,
                               odeco_residual=d.residual)
        direct_residual = d.residual
    else:
        direct_residual = None
    flag, model = transform.is_transformable(system.tensor, epsilon,
                                             absolute=absolute, seed=seed)
    if not flag:
        fit_err = None if model is None else model.fit_error
        detail = f" (best structured fit error {fit_err:.3e})" if fit_err else ""
        raise NotTransformableError(
            "system is neither odeco nor transformable to odeco form at this "
            f"threshold{detail}; use the numerical integrator (simulate)",
            fit_error=fit_err,
        )
    model = transform.build_transformation(model)
    d = transform.transformed_decomposition(model)
    return ClosedRoute(decomposition=d, P=model.P, model=model,
                       odeco_residual=direct_residual)


def _closed_domain_end(route: ClosedRoute, b, x0, tol: float) -> float:
    d = route.decomposition
    y0 = route.to_modal_frame(x0)
    if d.order == 2:
        return float("inf")
    if b is None:
        sol = dynamics.explicit_solution(d, y0, tol=max(tol, 10 * d.residual))
        return sol.domain_end
    b_y = route.to_modal_frame(b)
    return control.controlled_domain_end(d, b_y, y0)


def _closed_states(route: ClosedRoute, b, x0, times, tol: float) -> np.ndarray:
    d = route.decomposition
    y0 = route.to_modal_frame(x0)
    if b is None:
        if d.order == 2:
            y = np.array([dynamics.eval_solution_k2(d, y0, float(t))
                          for t in times])
        else:
            sol = dynamics.explicit_solution(d, y0,
                                             tol=max(tol, 10 * d.residual))
            y = dynamics.solution_states(sol, times)
    else:
        if d.order == 2:
            raise RefusalError(
                "constant-control closed forms require order >= 3"
            )
        b_y = route.to_modal_frame(b)
        y = control.controlled_states(d, b_y, y0, times,
                                      odeco_tol=max(tol, 10 * d.residual))
    return route.from_modal_frame(y)


# ---------------------------------------------------------------------------
# commands

def _linear_verdict(eigenvalues):
    lams = np.asarray(eigenvalues)
    tol = 1e-12 * max(1.0, float(np.max(np.abs(lams))))
    if np.any(lams > tol):
        return dynamics.UNSTABLE
    if np.all(lams < -tol):
        return dynamics.ASYMPTOTICALLY_STABLE
    return dynamics.STABLE


def cmd_analyze(args) -> int:
    system = load_system(args.path)
    route = _closed_route(system, args.tol, args.epsilon, args.absolute,
                          args.seed)
    d = route.decomposition
    k = d.order

    report = {
        "schema_version": SCHEMA_VERSION,
        "command": "analyze",
        "order": k,
        "dim": d.dim,
        "supersymmetric": system.sym is not None,
        "odeco": {
            "flag": route.P is None,
            "residual": (None if route.odeco_residual is None
                         else float(route.odeco_residual)),
            "tolerance": args.tol,
        },
        "transform": None,
        "eigenvalues": _floats(d.eigenvalues),
        "seed": args.seed,
    }
    if route.model is not None:
        report["transform"] = {
            "transformable": True,
            "fit_error": float(route.model.fit_error),
            "epsilon": args.epsilon,
            "absolute": args.absolute,
        }

    eq = dynamics.equilibrium_structure(d)
    report["equilibrium"] = {
        "structure": eq.kind,
        "null_modes": [m + 1 for m in eq.null_modes],  # 1-based for reports
    }

    stability = {
        "verdict": None,
        "basis": None,
        "mode_products": None,
        "blowup_time": None,
        "global_even_verdict": None,
        "unfolding": None,
    }
    if k >= 4 and k % 2 == 0:
        glob = dynamics.classify_global_even(d)
        stability["global_even_verdict"] = glob.verdict
        stability["verdict"] = glob.verdict
        stability["basis"] = glob.basis
        tensor_for_bound = system.sym
        if tensor_for_bound is None and route.model is not None:
            tensor_for_bound = transform.transformed_tensor(route.model)
        bound = dynamics.classify_by_unfolding(tensor_for_bound)
        stability["unfolding"] = {
            "mu_max": float(spectral.mu_max(tensor_for_bound)),
            "verdict": None if bound is None else bound.verdict,
        }
    elif k == 2:
        stability["verdict"] = _linear_verdict(d.eigenvalues)
        stability["basis"] = "eigenvalue_signs"

    if system.x0 is not None and k >= 3:
        y0 = route.to_modal_frame(system.x0)
        modal = dynamics.classify_stability(d, y0)
        stability["verdict"] = modal.verdict
        stability["basis"] = modal.basis
        stability["mode_products"] = _floats(modal.mode_products)
        stability["blowup_time"] = (
            None if modal.blowup_time is None else float(modal.blowup_time)
        )
    report["stability"] = stability
    report["x0"] = None if system.x0 is None else _floats(system.x0)

    report["controlled_equilibrium"] = None
    if system.control is not None and k >= 3:
        try:
            b_y = route.to_modal_frame(system.control)
            y_e = control.controlled_equilibrium(d, b_y)
            x_e = y_e if route.P is None else route.P @ y_e
            report["controlled_equilibrium"] = _floats(x_e)
        except NoEquilibriumError as exc:
            report["controlled_equilibrium_error"] = str(exc)

    _emit_json(report, args.output)
    return EXIT_OK


def cmd_solve(args) -> int:
    system = load_system(args.path)
    if system.x0 is None:
        raise InputError(f"{args.path}: solve requires 'x0' in the spec file")
    if args.t_end < 0:
        raise InputError("--t-end must be nonnegative")
    if args.samples < 1:
        raise InputError("--samples must be at least 1")
    x0 = system.x0
    n = system.dim

    route = None
    if args.method in ("closed", "both"):
        route = _closed_route(system, args.tol, args.epsilon, args.absolute,
                              args.seed)
        domain_end = _closed_domain_end(route, system.control, x0, args.tol)
        horizon = min(args.t_end, 0.99 * domain_end)
    else:
        horizon = args.t_end

    if horizon <= 0.0 or args.samples == 1:
        times = np.array([0.0])
    else:
        times = np.linspace(0.0, horizon, args.samples)

    columns = [times]
    header = ["t"]
    closed = None
    if route is not None:
        closed = _closed_states(route, system.control, x0, times, args.tol)
        header += [f"x_{i + 1}" for i in range(n)]

    rk4 = None
    if args.method in ("rk4", "both"):
        sysobj = dynamics.HPDSystem(tensor=system.tensor,
                                    control=system.control)
        rk4, _ = oracle.states_at(sysobj, x0, times, rtol=args.rtol)
        label = "x_rk4_" if args.method == "both" else "x_"
        header += [f"{label}{i + 1}" for i in range(n)]

    rows = len(times)
    if closed is not None:
        rows = min(rows, closed.shape[0])
    if rk4 is not None:
        rows = min(rows, rk4.shape[0])
    table = [times[:rows]]
    if closed is not None:
        table.append(closed[:rows])
    if rk4 is not None:
        table.append(rk4[:rows])
    data = np.column_stack(table)
    _emit_csv(header, data, args.output)

    if args.plot:
        from . import plots

        primary = closed if closed is not None else rk4
        overlay = rk4 if (closed is not None and rk4 is not None) else None
        plots.render_trajectory(args.plot, times[:rows], primary[:rows],
                                overlay=overlay,
                                title=os.path.basename(args.path))
    return EXIT_OK


def cmd_decompose(args) -> int:
    system = load_system(args.path)
    if system.sym is None:
        raise RefusalError(
            "decomposition requires a supersymmetric tensor; this system is "
            "only almost symmetric (try 'transform')"
        )
    d = spectral.odeco_decompose(system.sym, args.tol, seed=args.seed)
    report = {
        "schema_version": SCHEMA_VERSION,
        "command": "decompose",
        "order": d.order,
        "dim": d.dim,
        "eigenvalues": _floats(d.eigenvalues),
        # row i, column j holds component i of eigenvector j
        "eigenvectors": _matrix(d.eigenvectors),
        "residual": float(d.residual),
        "odeco": bool(d.residual <= args.tol),
        "tolerance": args.tol,
        "seed": args.seed,
    }
    _emit_json(report, args.output)
    return EXIT_OK


def cmd_transform(args) -> int:
    system = load_system(args.path)
    flag, model = transform.is_transformable(system.tensor, args.epsilon,
                                             absolute=args.absolute,
                                             seed=args.seed)
    report = {
        "schema_version": SCHEMA_VERSION,
        "command": "transform",
        "transformable": bool(flag),
        "fit_error": None if model is None else float(model.fit_error),
        "epsilon": args.epsilon,
        "absolute": args.absolute,
        "weights": None if model is None else _floats(model.weights),
        "P": None,
        "V": None if model is None else _matrix(model.V),
        "seed": args.seed,
    }
    if flag:
        built = transform.build_transformation(model)
        report["P"] = _matrix(built.P)
    _emit_json(report, args.output)
    return EXIT_OK


def cmd_simulate(args) -> int:
    system = load_system(args.path)
    if system.x0 is None:
        raise InputError(f"{args.path}: simulate requires 'x0' in the spec file")
    if args.t_end <= 0:
        raise InputError("--t-end must be positive")
    sysobj = dynamics.HPDSystem(tensor=system.tensor, control=system.control)
    traj = oracle.integrate(sysobj, system.x0, args.t_end, rtol=args.rtol)
    header = ["t"] + [f"x_{i + 1}" for i in range(system.dim)]
    data = np.column_stack([traj.times, traj.states])
    _emit_csv(header, data, args.output)
    if traj.terminated.kind != oracle.COMPLETED:
        print(
            f"integration terminated early: {traj.terminated.kind} "
            f"at t = {traj.terminated.time:.6g}",
            file=sys.stderr,
        )
    if args.plot:
        from . import plots

        plots.render_trajectory(args.plot, traj.times, traj.states,
                                title=os.path.basename(args.path))
    return EXIT_OK


# ---------------------------------------------------------------------------
# argument parsing

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="odeco-hpds",
        description="Analyze homogeneous polynomial dynamical systems "
                    "represented by tensors.",
    )
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("path", help="system spec file (JSON)")
        p.add_argument("--seed", type=int, default=0,
                       help="seed for all randomized procedures (default 0)")
        p.add_argument("--tol", type=float, default=1e-8,
                       help="odeco certification residual tolerance")
        p.add_argument("--output", default=None,
                       help="write the report to a file instead of stdout")

    p = sub.add_parser("analyze", help="odeco check, spectrum, stability")
    common(p)
    p.add_argument("--epsilon", type=float, default=transform.DEFAULT_EPSILON,
                   help="structured-fit acceptance threshold")
    p.add_argument("--absolute", action="store_true",
                   help="treat --epsilon as an absolute Frobenius threshold")
    p.set_defaults(func=cmd_analyze)

    p = sub.add_parser("solve", help="closed-form (and/or RK4) trajectory CSV")
    common(p)
    p.add_argument("--t-end", type=float, required=True)
    p.add_argument("--samples", type=int, default=100)
    p.add_argument("--method", choices=("closed", "rk4", "both"),
                   default="closed")
    p.add_argument("--rtol", type=float, default=1e-9,
                   help="integrator relative tolerance (rk4/both)")
    p.add_argument("--epsilon", type=float, default=transform.DEFAULT_EPSILON)
    p.add_argument("--absolute", action="store_true")
    p.add_argument("--plot", default=None,
                   help="also render the trajectory to this image file")
    p.set_defaults(func=cmd_solve)

    p = sub.add_parser("decompose", help="orthogonal decomposition JSON")
    common(p)
    p.set_defaults(func=cmd_decompose)

    p = sub.add_parser("transform", help="odeco transformability JSON")
    common(p)
    p.add_argument("--epsilon", type=float, default=transform.DEFAULT_EPSILON)
    p.add_argument("--absolute", action="store_true")
    p.set_defaults(func=cmd_transform)

    p = sub.add_parser("simulate", help="pure adaptive RK4 trajectory CSV")
    common(p)
    p.add_argument("--t-end", type=float, required=True)
    p.add_argument("--rtol", type=float, default=1e-9)
    p.add_argument("--plot", default=None,
                   help="also render the trajectory to this image file")
    p.set_defaults(func=cmd_simulate)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        _check_threads_env()
        return args.func(args)
    except InputError as exc:
        print(f"input error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except (NotOdecoError, NotTransformableError, RefusalError) as exc:
        print(f"analysis refusal: {exc}", file=sys.stderr)
        return EXIT_REFUSAL
    except (DecompositionError, FitError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    except HPDSError as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL


if __name__ == "__main__":
    sys.exit(main())

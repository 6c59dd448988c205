"""Benchmarks, mesh-refinement studies and the command-line interface."""

from __future__ import annotations

import argparse
import json
import math
import sys
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Optional, Sequence

import numpy as np

from .assembly import AssembledNlp
from .fespace import FESpace, build_space
from .mesh import Mesh, mesh_from_breakpoints, uniform_mesh
from .ocp_model import (
    MethodParams,
    OcpProblem,
    check_derivatives,
    default_params,
)
from .polybasis import norm_constants_csv, verify_norm_constants
from .solver import (
    STATUS_CONVERGED,
    SolveReport,
    SolverOptions,
    default_start,
    export_lifted_nlp,
    solve,
)

#: Metric values at or below this are treated as "at floor": they carry no
#: order information, only rounding noise.
ORDER_FIT_FLOOR = 1e-10

CSV_COLUMNS = (
    "h",
    "d",
    "omega",
    "tau",
    "N",
    "M",
    "iterations",
    "objective_gap",
    "residual",
    "x_error",
    "status",
)


@dataclass(frozen=True)
class AnalyticSolution:
    """Reference trajectories and optimal cost, each optional.

    ``y(t)`` returns the differential components, ``z(t)`` the auxiliary
    ones.  When ``z`` is unknown (for example because it depends on the
    penalty parameters), the solution-space error is measured over the
    differential block only.
    """

    y: Optional[Callable[[float], np.ndarray]] = None
    z: Optional[Callable[[float], np.ndarray]] = None
    cost: Optional[float] = None


@dataclass(frozen=True)
class Benchmark:
    name: str
    problem: OcpProblem
    analytic: Optional[AnalyticSolution] = None
    mesh_plan: Optional[Callable[[int], Sequence[int]]] = None
    notes: str = ""


_REGISTRY: dict[str, Benchmark] = {}


def register_benchmark(benchmark: Benchmark) -> None:
    _REGISTRY[benchmark.name] = benchmark


def benchmark_names() -> list[str]:
    register_builtin_benchmarks()
    return sorted(_REGISTRY)


def get_benchmark(name: str) -> Benchmark:
    register_builtin_benchmarks()
    try:
        return _REGISTRY[name]
    except KeyError:
        raise ValueError(
            f"unknown benchmark {name!r}; available: {', '.join(sorted(_REGISTRY))}"
        ) from None


def _lq_benchmark() -> Benchmark:
    """Linear-quadratic tracking with the control split into two positives.

    Minimize (1/2) the integral of y^2 + u^2 with dy = u and y(0) = 1, where
    u = z1 - z2 and z1, z2 >= 0.  The two-point boundary-value problem
    y'' = y, y(0) = 1, dy(1) = 0 gives y*(t) = cosh(1 - t) / cosh(1),
    u*(t) = -sinh(1 - t) / cosh(1) and the optimal cost tanh(1) / 2.
    """

    def f_eval(dy, y, z, t):
        u = z[0] - z[1]
        value = 0.5 * (y[0] ** 2 + u**2)
        grad = np.array([0.0, y[0], u, -u])
        hess = np.zeros((4, 4))
        hess[1, 1] = 1.0
        hess[2, 2] = hess[3, 3] = 1.0
        hess[2, 3] = hess[3, 2] = -1.0
        return value, grad, hess

    def c_eval(dy, y, z, t):
        values = np.array([dy[0] - z[0] + z[1]])
        jac = np.array([[1.0, 0.0, -1.0, 1.0]])
        return values, jac, np.zeros((1, 4, 4))

    def b_eval(stacked_y):
        values = np.array([stacked_y[0] - 1.0])
        jac = np.zeros((1, len(stacked_y)))
        jac[0, 0] = 1.0
        return values, jac, np.zeros((1, len(stacked_y), len(stacked_y)))

    cosh1 = math.cosh(1.0)

    def y_star(t: float) -> np.ndarray:
        return np.array([math.cosh(1.0 - t) / cosh1])

    def z_star(t: float) -> np.ndarray:
        u = -math.sinh(1.0 - t) / cosh1
        return np.array([max(u, 0.0), max(-u, 0.0)])

    problem = OcpProblem(
        n_y=1,
        n_z=2,
        m=1,
        p=1,
        time_points=(0.0, 1.0),
        f_eval=f_eval,
        c_eval=c_eval,
        b_eval=b_eval,
        initial_guess=lambda t: np.array([1.0]),
    )
    analytic = AnalyticSolution(y=y_star, z=z_star, cost=0.5 * math.tanh(1.0))
    return Benchmark(
        "lq",
        problem,
        analytic,
        notes="quadratic tracking, dy = z1 - z2, y(0) = 1",
    )


def _trivial_benchmark() -> Benchmark:
    """Zero cost with dy = 0 and y(0) = 0; y vanishes identically.

    The auxiliary component appears only in the regularizer and barrier, so
    any strictly interior constant is optimal in the limit; the converged
    value depends on (omega, tau) and no z reference is recorded.
    """

    def f_eval(dy, y, z, t):
        return 0.0, np.zeros(3), np.zeros((3, 3))

    def c_eval(dy, y, z, t):
        return np.array([dy[0]]), np.array([[1.0, 0.0, 0.0]]), np.zeros((1, 3, 3))

    def b_eval(stacked_y):
        jac = np.zeros((1, len(stacked_y)))
        jac[0, 0] = 1.0
        return (
            np.array([stacked_y[0]]),
            jac,
            np.zeros((1, len(stacked_y), len(stacked_y))),
        )

    problem = OcpProblem(
        n_y=1,
        n_z=1,
        m=1,
        p=1,
        time_points=(0.0, 1.0),
        f_eval=f_eval,
        c_eval=c_eval,
        b_eval=b_eval,
    )
    analytic = AnalyticSolution(y=lambda t: np.array([0.0]), cost=0.0)
    return Benchmark("trivial", problem, analytic, notes="exactly representable zero solution")


def _barrier_pull_benchmark() -> Benchmark:
    """Linear pull toward zero balanced only by the barrier.

    With cost z and slope 1, the pointwise optimality condition
    1 + omega z - tau / z = 0 puts the minimizer at roughly tau, which makes
    this the quantitative test of the barrier's strict-positivity floor.
    """

    def f_eval(dy, y, z, t):
        return float(z[0]), np.array([1.0]), np.zeros((1, 1))

    problem = OcpProblem(
        n_y=0,
        n_z=1,
        m=0,
        p=0,
        time_points=(0.0, 1.0),
        f_eval=f_eval,
    )
    return Benchmark("barrier-pull", problem, notes="minimizer sits at the barrier floor ~ tau")


def register_builtin_benchmarks() -> list[str]:
    """Register the built-in problems (idempotent) and return their names."""
    if "lq" not in _REGISTRY:
        lq = _lq_benchmark()
        register_benchmark(lq)
        register_benchmark(
            Benchmark(
                "lq-multimesh",
                lq.problem,
                lq.analytic,
                mesh_plan=lambda n: [max(1, n // 2), n, n],
                notes="lq with the differential component on a 2x coarser mesh",
            )
        )
        register_benchmark(_trivial_benchmark())
        register_benchmark(_barrier_pull_benchmark())
    return ["lq", "lq-multimesh", "trivial", "barrier-pull"]


def build_setup(
    benchmark: Benchmark,
    h: Optional[float],
    d: int,
    sigma: float = 1.0,
    breakpoints: Optional[Sequence[Sequence[float]]] = None,
) -> tuple[FESpace, MethodParams]:
    """Meshes, space and method parameters for one benchmark run.

    Uniform meshes with width h are the default; explicit per-component
    breakpoint lists (from the config file) take precedence.  The method
    parameters use the requested h, so a mixed-mesh plan coarsens the
    approximation space without touching the penalty strength.
    """
    problem = benchmark.problem
    t0, t_end = problem.domain
    if breakpoints is not None:
        if len(breakpoints) != problem.n_x:
            raise ValueError(
                f"need {problem.n_x} breakpoint lists, got {len(breakpoints)}"
            )
        meshes: list[Mesh] = [mesh_from_breakpoints(b) for b in breakpoints]
        params_h = h if h is not None else max(m.mesh_size for m in meshes)
    else:
        if h is None:
            raise ValueError("mesh size h is required when no breakpoints are given")
        n = max(1, round((t_end - t0) / h))
        counts = list(benchmark.mesh_plan(n)) if benchmark.mesh_plan else [n] * problem.n_x
        meshes = [uniform_mesh((t0, t_end), c) for c in counts]
        params_h = h
    space = build_space(meshes, d, problem.n_y, problem.n_z)
    return space, default_params(params_h, sigma, d)


@dataclass
class ConvergenceRow:
    h: float
    d: int
    omega: float
    tau: float
    N: int
    M: int
    iterations: int
    objective_gap: Optional[float]
    residual: float
    x_error: Optional[float]
    wall_time: float
    status: str


@dataclass
class StudyResult:
    rows: list[ConvergenceRow]
    orders: dict[str, Optional[float]]
    notes: list[str]
    failed: bool
    reports: list[SolveReport] = field(default_factory=list)


def _x_error(
    benchmark: Benchmark, space: FESpace, nlp: AssembledNlp, report: SolveReport
) -> Optional[float]:
    analytic = benchmark.analytic
    if analytic is None or analytic.y is None:
        return None
    functions = []
    for comp in range(space.n_y):
        functions.append(lambda t, c=comp: float(analytic.y(t)[c]))
    for comp in range(space.n_z):
        if analytic.z is not None:
            functions.append(lambda t, c=comp: float(analytic.z(t)[c]))
        else:
            functions.append(lambda t: 0.0)
    reference = space.interpolate(functions)
    diff = report.x_final.values - reference.values
    if analytic.z is None:
        for comp in range(space.n_y, space.n_x):
            diff[np.unique(space.index_map[comp])] = 0.0
    return float(math.sqrt(max(diff @ (nlp.regularizer @ diff), 0.0)))


def _fit_order(h_values: list[float], metric: list[Optional[float]]) -> tuple[Optional[float], Optional[str]]:
    pairs = [
        (h, v)
        for h, v in zip(h_values, metric)
        if v is not None and math.isfinite(v) and abs(v) > ORDER_FIT_FLOOR
    ]
    if len(pairs) < 2:
        return None, "metric at floor; order fit skipped"
    log_h = np.log([h for h, _ in pairs])
    log_v = np.log([abs(v) for _, v in pairs])
    slope = float(np.polyfit(log_h, log_v, 1)[0])
    return slope, None


def run_study(
    problem: str,
    d: int,
    h_list: Sequence[float],
    sigma: float = 1.0,
    solver_options: Optional[SolverOptions] = None,
    out_dir: Optional[str] = None,
) -> StudyResult:
    """Solve one benchmark over a list of mesh widths and fit observed orders.

    Rows are produced in the given h order; a solver failure marks its row
    and the study continues.  Results are persisted as CSV and JSON when an
    output directory is given.
    """
    benchmark = get_benchmark(problem)
    if len(h_list) < 3:
        raise ValueError("insufficient points for order fit: need at least 3 mesh sizes")
    rows: list[ConvergenceRow] = []
    reports: list[SolveReport] = []
    for h in h_list:
        space, params = build_setup(benchmark, h, d, sigma)
        nlp = AssembledNlp(benchmark.problem, space, params)
        started = time.perf_counter()
        report = solve(nlp, None, solver_options)
        wall = time.perf_counter() - started
        gap = None
        if (
            benchmark.analytic is not None
            and benchmark.analytic.cost is not None
            and report.terms is not None
        ):
            gap = report.terms.f - benchmark.analytic.cost
        rows.append(
            ConvergenceRow(
                h=float(h),
                d=d,
                omega=params.omega,
                tau=params.tau,
                N=nlp.N,
                M=nlp.M,
                iterations=report.total_iterations,
                objective_gap=gap,
                residual=report.residual,
                x_error=_x_error(benchmark, space, nlp, report),
                wall_time=wall,
                status=report.status,
            )
        )
        reports.append(report)

    h_values = [r.h for r in rows]
    orders: dict[str, Optional[float]] = {}
    notes: list[str] = []
    for name, metric in (
        ("objective_gap", [r.objective_gap for r in rows]),
        ("residual", [r.residual for r in rows]),
    ):
        order, note = _fit_order(h_values, metric)
        orders[name] = order
        if note:
            notes.append(f"{name}: {note}")
    result = StudyResult(
        rows=rows,
        orders=orders,
        notes=notes,
        failed=any(r.status != STATUS_CONVERGED for r in rows),
        reports=reports,
    )
    if out_dir is not None:
        write_study_outputs(result, out_dir)
    return result


def _csv_cell(value) -> str:
    if value is None:
        return ""
    if isinstance(value, float):
        return repr(value)
    return str(value)


def study_csv(rows: Sequence[ConvergenceRow]) -> str:
    """Fixed-column CSV of the study rows.

    Wall time is deliberately left to the JSON report so that repeated runs
    with identical inputs produce bitwise-identical CSV.
    """
    lines = [",".join(CSV_COLUMNS)]
    for r in rows:
        lines.append(
            ",".join(_csv_cell(getattr(r, column)) for column in CSV_COLUMNS)
        )
    return "\n".join(lines) + "\n"


def _report_summary(report: SolveReport) -> dict:
    return {
        "status": report.status,
        "grad_norm": report.grad_norm,
        "iterations": report.iterations,
        "residual": report.residual,
        "min_z": None if math.isinf(report.min_z) else report.min_z,
        "stages": [
            {
                "omega": s.omega,
                "tau": s.tau,
                "iterations": s.iterations,
                "grad_norm": s.grad_norm,
                "objective": s.objective,
                "residual": s.residual,
                "status": s.status,
            }
            for s in report.stages
        ],
        "terms": None
        if report.terms is None
        else {
            "f": report.terms.f,
            "quad_norm": report.terms.quad_norm,
            "penalty": report.terms.penalty,
            "barrier": report.terms.barrier,
            "total": report.terms.total,
        },
    }


def study_json(result: StudyResult) -> str:
    payload = {
        "rows": [
            {column: getattr(r, column) for column in CSV_COLUMNS}
            | {"wall_time": r.wall_time}
            for r in result.rows
        ],
        "orders": result.orders,
        "notes": result.notes,
        "failed": result.failed,
        "reports": [_report_summary(rep) for rep in result.reports],
    }
    return json.dumps(payload, indent=2, sort_keys=True) + "\n"


def write_study_outputs(result: StudyResult, out_dir: str) -> tuple[Path, Path]:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    csv_path = out / "study.csv"
    json_path = out / "study.json"
    csv_path.write_bytes(study_csv(result.rows).encode("utf-8"))
    json_path.write_bytes(study_json(result).encode("utf-8"))
    return csv_path, json_path


# -- command-line interface ---------------------------------------------------


class UsageError(Exception):
    pass


def _parse_h_list(text: str) -> list[float]:
    try:
        values = [float(part) for part in text.split(",") if part.strip()]
    except ValueError as exc:
        raise UsageError(f"could not parse mesh-size list {text!r}") from exc
    if not values:
        raise UsageError("empty mesh-size list")
    return values


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="ocfem",
        description=(
            "Finite-element transcription of constrained optimal control "
            "problems with a penalty-barrier solver"
        ),
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--config", help="JSON config file supplying defaults for flags")
        p.add_argument("--out", help="output directory")

    p_solve = sub.add_parser("solve", help="solve one benchmark at fixed h and d")
    common(p_solve)
    p_solve.add_argument("--problem")
    p_solve.add_argument("--h", type=float)
    p_solve.add_argument("--d", type=int)
    p_solve.add_argument("--sigma", type=float)
    p_solve.add_argument("--max-iters", type=int, dest="max_iters")
    p_solve.add_argument("--grad-tol", type=float, dest="grad_tol")

    p_study = sub.add_parser("study", help="mesh-refinement study with order fits")
    common(p_study)
    p_study.add_argument("--problem")
    p_study.add_argument("--d", type=int)
    p_study.add_argument("--h-list", dest="h_list")
    p_study.add_argument("--sigma", type=float)
    p_study.add_argument("--max-iters", type=int, dest="max_iters")
    p_study.add_argument("--grad-tol", type=float, dest="grad_tol")

    p_norm = sub.add_parser("norm-check", help="minimum-norm constants per degree")
    common(p_norm)
    p_norm.add_argument("--d-max", type=int, dest="d_max")

    p_export = sub.add_parser("export-nlp", help="write the lifted constrained program")
    common(p_export)
    p_export.add_argument("--problem")
    p_export.add_argument("--h", type=float)
    p_export.add_argument("--d", type=int)
    p_export.add_argument("--sigma", type=float)

    p_sparsity = sub.add_parser("sparsity", help="write operator sparsity patterns")
    common(p_sparsity)
    p_sparsity.add_argument("--problem")
    p_sparsity.add_argument("--h", type=float)
    p_sparsity.add_argument("--d", type=int)
    p_sparsity.add_argument("--sigma", type=float)

    p_check = sub.add_parser("check-derivatives", help="finite-difference derivative report")
    common(p_check)
    p_check.add_argument("--problem")
    p_check.add_argument("--samples", type=int)
    p_check.add_argument("--seed", type=int)
    return parser


def _merge_config(args: argparse.Namespace) -> dict:
    merged = {k: v for k, v in vars(args).items() if k != "config"}
    if getattr(args, "config", None):
        path = Path(args.config)
        if not path.exists():
            raise UsageError(f"config file not found: {path}")
        try:
            config = json.loads(path.read_text(encoding="utf-8"))
        except json.JSONDecodeError as exc:
            raise UsageError(f"config file is not valid JSON: {exc}") from exc
        if not isinstance(config, dict):
            raise UsageError("config file must hold a JSON object")
        for key, value in config.items():
            key = key.replace("-", "_")
            if merged.get(key) is None:
                merged[key] = value
    return merged


def _require(merged: dict, *keys: str) -> None:
    missing = [k for k in keys if merged.get(k) is None]
    if missing:
        raise UsageError(
            "missing required option(s): " + ", ".join(f"--{k.replace('_', '-')}" for k in missing)
        )


def _solver_options(merged: dict) -> Optional[SolverOptions]:
    kwargs = {}
    if merged.get("max_iters") is not None:
        kwargs["max_iters"] = int(merged["max_iters"])
    if merged.get("grad_tol") is not None:
        kwargs["grad_tol"] = float(merged["grad_tol"])
    return SolverOptions(**kwargs) if kwargs else None


def _setup_from(merged: dict) -> tuple[Benchmark, FESpace, MethodParams]:
    benchmark = get_benchmark(str(merged["problem"]))
    sigma = float(merged["sigma"]) if merged.get("sigma") is not None else 1.0
    h = float(merged["h"]) if merged.get("h") is not None else None
    breakpoints = merged.get("breakpoints")
    space, params = build_setup(
        benchmark, h, int(merged["d"]), sigma, breakpoints=breakpoints
    )
    return benchmark, space, params


def _cmd_solve(merged: dict) -> int:
    _require(merged, "problem", "d")
    if merged.get("h") is None and merged.get("breakpoints") is None:
        raise UsageError("missing required option(s): --h")
    benchmark, space, params = _setup_from(merged)
    nlp = AssembledNlp(benchmark.problem, space, params)
    report = solve(nlp, None, _solver_options(merged))
    print(f"problem: {benchmark.name}")
    print(f"h: {params.h!r}  d: {params.d}  sigma: {params.sigma!r}")
    print(f"omega: {params.omega!r}  tau: {params.tau!r}")
    print(f"N: {nlp.N}  M: {nlp.M}")
    print(f"status: {report.status}")
    print(f"iterations: {report.iterations}")
    print(f"grad_norm: {report.grad_norm!r}")
    if report.terms is not None:
        print(f"objective: {report.terms.total!r}")
        print(f"cost_term: {report.terms.f!r}")
    print(f"residual: {report.residual!r}")
    if not math.isinf(report.min_z):
        print(f"min_z: {report.min_z!r}")
    if merged.get("out"):
        out = Path(merged["out"])
        out.mkdir(parents=True, exist_ok=True)
        payload = _report_summary(report) | {
            "problem": benchmark.name,
            "h": params.h,
            "d": params.d,
            "sigma": params.sigma,
            "omega": params.omega,
            "tau": params.tau,
            "N": nlp.N,
            "M": nlp.M,
            "coefficients": report.x_final.values.tolist(),
        }
        (out / "report.json").write_text(
            json.dumps(payload, indent=2, sort_keys=True) + "\n", encoding="utf-8"
        )
    return 0 if report.status == STATUS_CONVERGED else 1


def _cmd_study(merged: dict) -> int:
    _require(merged, "problem", "d", "h_list")
    h_list = merged["h_list"]
    if isinstance(h_list, str):
        h_list = _parse_h_list(h_list)
    sigma = float(merged["sigma"]) if merged.get("sigma") is not None else 1.0
    try:
        result = run_study(
            str(merged["problem"]),
            int(merged["d"]),
            [float(h) for h in h_list],
            sigma=sigma,
            solver_options=_solver_options(merged),
            out_dir=merged.get("out"),
        )
    except ValueError as exc:
        raise UsageError(str(exc)) from exc
    print(study_csv(result.rows), end="")
    for name, order in sorted(result.orders.items()):
        if order is None:
            print(f"order {name}: skipped")
        else:
            print(f"order {name}: {order!r}")
    for note in result.notes:
        print(f"note: {note}")
    return 1 if result.failed else 0


def _cmd_norm_check(merged: dict) -> int:
    d_max = int(merged["d_max"]) if merged.get("d_max") is not None else 30
    rows = verify_norm_constants(d_max)
    text = norm_constants_csv(rows)
    print(text, end="")
    if merged.get("out"):
        out = Path(merged["out"])
        out.mkdir(parents=True, exist_ok=True)
        (out / "norm_check.csv").write_bytes(text.encode("utf-8"))
    return 0


def _cmd_export_nlp(merged: dict) -> int:
    _require(merged, "problem", "d")
    if merged.get("h") is None and merged.get("breakpoints") is None:
        raise UsageError("missing required option(s): --h")
    benchmark, space, params = _setup_from(merged)
    nlp = AssembledNlp(benchmark.problem, space, params)
    export = export_lifted_nlp(nlp)
    if merged.get("out"):
        out = Path(merged["out"])
        out.mkdir(parents=True, exist_ok=True)
        export.write(out / "lifted_nlp.txt")
        print(f"wrote {out / 'lifted_nlp.txt'}")
    else:
        print(export.to_text(), end="")
    return 0


def _coo_text(name: str, matrix) -> str:
    coo = matrix.tocoo()
    order = np.lexsort((coo.col, coo.row))
    lines = [f"# {name} {matrix.shape[0]} {matrix.shape[1]} {coo.nnz}"]
    for i in order:
        lines.append(f"{coo.row[i]} {coo.col[i]} {coo.data[i]!r}")
    return "\n".join(lines) + "\n"


def _cmd_sparsity(merged: dict) -> int:
    _require(merged, "problem", "d")
    if merged.get("h") is None and merged.get("breakpoints") is None:
        raise UsageError("missing required option(s): --h")
    benchmark, space, params = _setup_from(merged)
    nlp = AssembledNlp(benchmark.problem, space, params)
    x0 = default_start(nlp)
    matrices = {
        "eval_operator": nlp.eval_op,
        "point_operator": nlp.point_op,
        "regularizer": nlp.regularizer,
        "full_hessian": nlp.full_hessian(x0),
    }
    if merged.get("out"):
        out = Path(merged["out"])
        out.mkdir(parents=True, exist_ok=True)
        for name, matrix in matrices.items():
            (out / f"{name}.coo").write_bytes(_coo_text(name, matrix).encode("utf-8"))
        print(f"wrote {len(matrices)} pattern files to {out}")
    else:
        for name, matrix in matrices.items():
            print(_coo_text(name, matrix), end="")
    return 0


def _cmd_check_derivatives(merged: dict) -> int:
    _require(merged, "problem")
    benchmark = get_benchmark(str(merged["problem"]))
    n_samples = int(merged["samples"]) if merged.get("samples") is not None else 5
    seed = int(merged["seed"]) if merged.get("seed") is not None else 0
    report = check_derivatives(benchmark.problem, n_samples=n_samples, seed=seed)
    print(report)
    return 0


_HANDLERS = {
    "solve": _cmd_solve,
    "study": _cmd_study,
    "norm-check": _cmd_norm_check,
    "export-nlp": _cmd_export_nlp,
    "sparsity": _cmd_sparsity,
    "check-derivatives": _cmd_check_derivatives,
}


def cli_main(argv: Optional[Sequence[str]] = None) -> int:
    """Entry point; returns 0 on success, 1 on solver failure, 2 on usage errors."""
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exit_:  # argparse signals usage errors via SystemExit
        code = exit_.code
        return int(code) if code is not None else 0
    try:
        merged = _merge_config(args)
        return _HANDLERS[args.command](merged)
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except ValueError as exc:  # bad user input surfacing from the library
        print(f"error: {exc}", file=sys.stderr)
        return 2


def main() -> None:
    sys.exit(cli_main())

"""Damped-Newton minimization of the penalty-barrier program.

A solve runs a short continuation over decreasing (omega, tau), warm-starting
each stage from the previous minimizer.  Every stage is plain Newton with a
symmetric inertia correction, an Armijo backtracking line search, and a
fraction-to-the-boundary cap that keeps the auxiliary values strictly
positive at all quadrature points.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np
from scipy.linalg import LinAlgError, cho_factor, cho_solve

from .assembly import AssembledNlp, MultiplierSet, ObjectiveTerms
from .errors import BarrierDomainError
from .fespace import CoefficientVector

STATUS_CONVERGED = "converged"
STATUS_MAX_ITERS = "max_iters"
STATUS_LINE_SEARCH = "line_search_failure"
STATUS_BARRIER = "barrier_domain_violation"

#: Largest inertia-correction shift tried before falling back to a gradient
#: step, as a multiple of the regularization floor.
_MAX_SHIFT_FACTOR = 1e8

#: Auxiliary components whose smallest quadrature value is at or below zero
#: get shifted up to this level before the first barrier evaluation.
_INTERIOR_MARGIN = 1e-2


@dataclass
class SolverOptions:
    """Tolerances and schedule of the damped-Newton solve."""

    grad_tol: Optional[float] = None  # default 1e-8 * max(1, sqrt(N))
    max_iters: int = 200
    ls_backtrack: float = 0.5
    ls_sufficient_decrease: float = 1e-4
    ls_max_backtracks: int = 60
    boundary_fraction: float = 0.995
    continuation: Optional[Sequence[tuple[float, float]]] = None
    continuation_stages: int = 4
    regularization_floor: float = 1e-12

    def __post_init__(self) -> None:
        if self.grad_tol is not None and self.grad_tol <= 0:
            raise ValueError("grad_tol must be positive")
        if self.max_iters < 0:
            raise ValueError("max_iters must be nonnegative")
        if not 0 < self.ls_backtrack < 1:
            raise ValueError("ls_backtrack must lie in (0, 1)")
        if self.ls_sufficient_decrease <= 0:
            raise ValueError("ls_sufficient_decrease must be positive")
        if not 0 < self.boundary_fraction < 1:
            raise ValueError("boundary_fraction must lie in (0, 1)")
        if self.continuation_stages < 1:
            raise ValueError("continuation_stages must be at least 1")
        if self.regularization_floor <= 0:
            raise ValueError("regularization_floor must be positive")

    def resolved_grad_tol(self, n: int) -> float:
        if self.grad_tol is not None:
            return self.grad_tol
        return 1e-8 * max(1.0, math.sqrt(n))


@dataclass
class StageResult:
    omega: float
    tau: float
    iterations: int
    grad_norm: float
    objective: float
    residual: float
    status: str
    objective_history: list[float] = field(default_factory=list)


@dataclass
class SolveReport:
    x_final: CoefficientVector
    status: str
    stages: list[StageResult]
    grad_norm: float
    terms: Optional[ObjectiveTerms]
    residual: float
    multipliers: MultiplierSet
    min_z: float

    @property
    def iterations(self) -> list[int]:
        return [s.iterations for s in self.stages]

    @property
    def total_iterations(self) -> int:
        return sum(self.iterations)


@dataclass(frozen=True)
class PositivityReport:
    min_z: float
    strictly_positive: bool
    theoretical_floor: Optional[float] = None


def default_start(nlp: AssembledNlp) -> CoefficientVector:
    """Interior starting point: hinted differential values, auxiliaries at max(1, tau)."""
    space, problem = nlp.space, nlp.problem
    values = np.zeros(space.N)
    hint = problem.initial_guess
    nodes = space.basis.nodes
    for comp in range(space.n_y):
        mesh = space.component_meshes[comp]
        for k, iv in enumerate(mesh.intervals):
            ts = iv.left + iv.length * nodes
            for a, t in enumerate(ts):
                values[space.index_map[comp][k][a]] = (
                    float(hint(float(t))[comp]) if hint is not None else 0.0
                )
    z_level = max(1.0, nlp.params.tau)
    for comp in range(space.n_y, space.n_x):
        for block in space.index_map[comp]:
            values[block] = z_level
    return ensure_interior(nlp, space.coefficient_vector(values))


def ensure_interior(nlp: AssembledNlp, x: CoefficientVector) -> CoefficientVector:
    """Shift auxiliary components whose quadrature values are not positive."""
    if nlp.space.n_z == 0:
        return x
    z = nlp.z_values(x)
    mins = z.min(axis=0)
    if (mins > 0).all():
        return x
    values = x.values.copy()
    for comp_z, low in enumerate(mins):
        if low <= 0:
            comp = nlp.space.n_y + comp_z
            for block in nlp.space.index_map[comp]:
                values[block] += _INTERIOR_MARGIN - low
    return x.replace_values(values)


def _default_schedule(omega: float, tau: float, stages: int) -> list[tuple[float, float]]:
    start_omega = max(omega, 1e-1)
    start_tau = max(tau, 1e-1)
    schedule = []
    for i in range(stages):
        frac = i / (stages - 1) if stages > 1 else 1.0
        schedule.append(
            (
                start_omega ** (1 - frac) * omega**frac,
                start_tau ** (1 - frac) * tau**frac,
            )
        )
    deduped = [schedule[0]]
    for pair in schedule[1:]:
        if pair != deduped[-1]:
            deduped.append(pair)
    if deduped[-1] != (omega, tau):
        deduped.append((omega, tau))
    return deduped


def _newton_direction(
    hess: np.ndarray, grad: np.ndarray, floor: float
) -> Optional[np.ndarray]:
    """Solve (H + delta I) p = -g, doubling delta until the factor is PD."""
    n = hess.shape[0]
    delta = 0.0
    while True:
        try:
            factor = cho_factor(hess + delta * np.eye(n), lower=True)
            return cho_solve(factor, -grad)
        except LinAlgError:
            delta = floor if delta == 0.0 else 2.0 * delta
            if delta > _MAX_SHIFT_FACTOR * floor:
                return None


def _boundary_cap(nlp: AssembledNlp, x: CoefficientVector, step: np.ndarray, fraction: float) -> float:
    if nlp.space.n_z == 0:
        return 1.0
    n_y, B = nlp.space.n_y, nlp.space.block_width
    z = nlp.z_values(x)
    dz = (nlp.eval_op @ step).reshape(nlp.M, B)[:, 2 * n_y :]
    shrinking = dz < 0
    if not shrinking.any():
        return 1.0
    caps = fraction * z[shrinking] / -dz[shrinking]
    return min(1.0, float(caps.min()))


def _newton_stage(
    nlp: AssembledNlp, x: CoefficientVector, opts: SolverOptions, tol: float
) -> tuple[CoefficientVector, StageResult]:
    omega, tau = nlp.params.omega, nlp.params.tau
    try:
        total = nlp.objective_terms(x).total
    except BarrierDomainError:
        return x, StageResult(omega, tau, 0, math.inf, math.inf, math.inf, STATUS_BARRIER)
    history = [total]
    status = STATUS_MAX_ITERS
    iterations = 0
    grad_norm = math.inf
    for _ in range(opts.max_iters):
        grad = nlp.gradient(x)
        grad_norm = float(np.linalg.norm(grad))
        if grad_norm <= tol:
            status = STATUS_CONVERGED
            break
        hess = nlp.full_hessian(x).toarray()
        step = _newton_direction(hess, grad, opts.regularization_floor)
        if step is None or float(grad @ step) >= 0.0:
            step = -grad
        slope = float(grad @ step)
        alpha = min(1.0, _boundary_cap(nlp, x, step, opts.boundary_fraction))
        accepted = False
        for _ in range(opts.ls_max_backtracks):
            trial_values = x.values + alpha * step
            if not np.isfinite(trial_values).all():
                alpha *= opts.ls_backtrack
                continue
            trial = x.replace_values(trial_values)
            try:
                trial_total = nlp.objective_terms(trial).total
            except BarrierDomainError:
                trial_total = math.inf
            if math.isfinite(trial_total) and trial_total <= total + (
                opts.ls_sufficient_decrease * alpha * slope
            ):
                accepted = True
                break
            alpha *= opts.ls_backtrack
        if not accepted:
            status = STATUS_LINE_SEARCH
            break
        x = trial
        total = trial_total
        history.append(total)
        iterations += 1
    else:
        grad_norm = float(np.linalg.norm(nlp.gradient(x)))
        if grad_norm <= tol:
            status = STATUS_CONVERGED
    result = StageResult(
        omega=omega,
        tau=tau,
        iterations=iterations,
        grad_norm=grad_norm,
        objective=total,
        residual=nlp.residual_value(x),
        status=status,
        objective_history=history,
    )
    return x, result


def solve(
    nlp: AssembledNlp,
    x0: Optional[CoefficientVector] = None,
    opts: Optional[SolverOptions] = None,
) -> SolveReport:
    """Minimize the assembled program, continuing over decreasing (omega, tau)."""
    opts = opts or SolverOptions()
    tol = opts.resolved_grad_tol(nlp.N)
    params = nlp.params
    if opts.continuation is not None:
        schedule = [(float(w), float(t)) for w, t in opts.continuation]
        if not schedule or schedule[-1] != (params.omega, params.tau):
            schedule.append((params.omega, params.tau))
    else:
        schedule = _default_schedule(params.omega, params.tau, opts.continuation_stages)

    x = default_start(nlp) if x0 is None else ensure_interior(nlp, x0)
    stages: list[StageResult] = []
    for omega, tau in schedule:
        stage_nlp = nlp.with_params(omega, tau)
        x, stage = _newton_stage(stage_nlp, x, opts, tol)
        stages.append(stage)
        if stage.status != STATUS_CONVERGED:
            break

    status = stages[-1].status
    grad_norm = stages[-1].grad_norm
    try:
        terms = nlp.objective_terms(x)
        grad_norm = float(np.linalg.norm(nlp.gradient(x)))
    except BarrierDomainError:
        terms = None
    min_z = float(nlp.z_values(x).min()) if nlp.space.n_z > 0 else math.inf
    return SolveReport(
        x_final=x,
        status=status,
        stages=stages,
        grad_norm=grad_norm,
        terms=terms,
        residual=nlp.residual_value(x),
        multipliers=nlp.penalty_multipliers(x),
        min_z=min_z,
    )


def strict_positivity_check(
    report: SolveReport, nlp: AssembledNlp, lipschitz_bound: Optional[float] = None
) -> PositivityReport:
    """Smallest auxiliary quadrature value of the solution and its sign.

    The quantitative floor tau / L holds for a bound L on the slope of the
    barrier-free objective; it is reported only when the caller supplies such
    an estimate, since L is an analysis quantity that is not computable in
    general.
    """
    min_z = float(nlp.z_values(report.x_final).min()) if nlp.space.n_z else math.inf
    floor = nlp.params.tau / lipschitz_bound if lipschitz_bound else None
    return PositivityReport(min_z, min_z > 0.0, floor)


def lifted_objective(
    nlp: AssembledNlp, x: CoefficientVector, lam: np.ndarray, nu: np.ndarray
) -> float:
    """Objective of the lifted constrained reformulation at (x, lambda, nu).

    Substituting lambda = H_c / omega, nu = H_b / omega recovers the
    barrier-free part of the unconstrained objective exactly.
    """
    terms = nlp.objective_terms(x)
    omega = nlp.params.omega
    lam = np.asarray(lam, dtype=float)
    nu = np.asarray(nu, dtype=float)
    return (
        terms.f
        + 0.5 * omega * terms.quad_norm
        + 0.5 * omega * (float(lam @ lam) + float(nu @ nu))
    )


_OBJECTIVE_TEXT = "F(x) + (omega/2)*x'*S*x + (omega/2)*(||lambda||^2 + ||nu||^2)"
_CONSTRAINT_TEXT = ("H(x) - omega*(lambda;nu) = 0", "Gpt(x) - s = 0")
_BOUNDS_TEXT = "s >= 0"

Pattern = tuple[str, int, int, tuple[tuple[int, int], ...]]


@dataclass(frozen=True)
class LiftedNlpExport:
    """Constrained reformulation of the penalty-barrier program.

    Variables are the coefficient vector, one multiplier per scaled
    path-constraint row, one per point constraint, and one slack per
    auxiliary quadrature value.  Positivity is encoded on the slacks through
    Gpt(x), the plain stacked auxiliary values; an interior-point solver run
    with barrier target theta = tau reproduces the unconstrained program.
    """

    n_coefficients: int
    n_path_multipliers: int
    n_point_multipliers: int
    n_slacks: int
    n_y: int
    n_z: int
    m: int
    p: int
    M: int
    n_T: int
    omega: float
    tau: float
    barrier_target: float
    objective: str
    constraints: tuple[str, ...]
    bounds: str
    patterns: tuple[Pattern, ...]
    options: tuple[str, ...]

    @property
    def n_variables(self) -> int:
        return (
            self.n_coefficients
            + self.n_path_multipliers
            + self.n_point_multipliers
            + self.n_slacks
        )

    @property
    def n_constraints(self) -> int:
        return self.n_path_multipliers + self.n_point_multipliers + self.n_slacks

    def to_text(self) -> str:
        lines = ["lifted-nlp v1"]
        for key in ("n_y", "n_z", "m", "p", "M", "n_T"):
            lines.append(f"dim {key} {getattr(self, key)}")
        lines.append(f"param omega {self.omega!r}")
        lines.append(f"param tau {self.tau!r}")
        lines.append(f"param theta {self.barrier_target!r}")
        lines.append(f"var x {self.n_coefficients}")
        lines.append(f"var lambda {self.n_path_multipliers}")
        lines.append(f"var nu {self.n_point_multipliers}")
        lines.append(f"var s {self.n_slacks}")
        lines.append(f"objective {self.objective}")
        for c in self.constraints:
            lines.append(f"subjectto {c}")
        lines.append(f"bounds {self.bounds}")
        for name, n_rows, n_cols, coords in self.patterns:
            lines.append(f"pattern {name} {n_rows} {n_cols} {len(coords)}")
            for r, c in coords:
                lines.append(f"{r} {c}")
        for opt in self.options:
            lines.append(f"option {opt}")
        lines.append("end")
        return "\n".join(lines) + "\n"

    def write(self, path) -> None:
        with open(path, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(self.to_text())


def export_lifted_nlp(nlp: AssembledNlp) -> LiftedNlpExport:
    """Build the lifted constrained export of the assembled program."""
    problem = nlp.problem
    m_rows = problem.m * nlp.M
    slack_rows = nlp.space.n_z * nlp.M
    struct = nlp.structural_patterns()

    def coords(matrix) -> tuple[tuple[int, int], ...]:
        coo = matrix.tocoo()
        return tuple(sorted(zip(coo.row.tolist(), coo.col.tolist())))

    eq_rows = m_rows + problem.p
    patterns = (
        ("JH_x", eq_rows, nlp.N, coords(struct["H_x"])),
        (
            "JH_lambda_nu",
            eq_rows,
            eq_rows,
            tuple((i, i) for i in range(eq_rows)),
        ),
        ("JG_x", slack_rows, nlp.N, coords(struct["G_x"])),
        ("JG_s", slack_rows, slack_rows, tuple((i, i) for i in range(slack_rows))),
    )
    tau = nlp.params.tau
    options = (
        f"mu_min = {tau!r}  barrier floor handed to an interior-point solver",
        f"mu_target = {tau!r}  barrier target; theta = tau recovers the penalty-barrier program",
    )
    return LiftedNlpExport(
        n_coefficients=nlp.N,
        n_path_multipliers=m_rows,
        n_point_multipliers=problem.p,
        n_slacks=slack_rows,
        n_y=problem.n_y,
        n_z=problem.n_z,
        m=problem.m,
        p=problem.p,
        M=nlp.M,
        n_T=problem.n_T,
        omega=nlp.params.omega,
        tau=tau,
        barrier_target=tau,
        objective=_OBJECTIVE_TEXT,
        constraints=_CONSTRAINT_TEXT,
        bounds=_BOUNDS_TEXT,
        patterns=patterns,
        options=options,
    )


def parse_lifted_nlp(text: str) -> LiftedNlpExport:
    """Parse the text layout produced by ``LiftedNlpExport.to_text``."""
    lines = text.splitlines()
    if not lines or lines[0] != "lifted-nlp v1":
        raise ValueError("not a lifted-nlp v1 document")
    dims: dict[str, int] = {}
    params: dict[str, float] = {}
    variables: dict[str, int] = {}
    objective = ""
    constraints: list[str] = []
    bounds = ""
    patterns: list[Pattern] = []
    options: list[str] = []
    i = 1
    while i < len(lines):
        line = lines[i]
        i += 1
        if line == "end":
            break
        head, _, rest = line.partition(" ")
        if head == "dim":
            key, value = rest.rsplit(" ", 1)
            dims[key] = int(value)
        elif head == "param":
            key, value = rest.rsplit(" ", 1)
            params[key] = float(value)
        elif head == "var":
            key, value = rest.rsplit(" ", 1)
            variables[key] = int(value)
        elif head == "objective":
            objective = rest
        elif head == "subjectto":
            constraints.append(rest)
        elif head == "bounds":
            bounds = rest
        elif head == "pattern":
            name, n_rows, n_cols, nnz = rest.rsplit(" ", 3)
            coords = []
            for _ in range(int(nnz)):
                r, c = lines[i].split()
                coords.append((int(r), int(c)))
                i += 1
            patterns.append((name, int(n_rows), int(n_cols), tuple(coords)))
        elif head == "option":
            options.append(rest)
        else:
            raise ValueError(f"unrecognized line in lifted-nlp document: {line!r}")
    return LiftedNlpExport(
        n_coefficients=variables["x"],
        n_path_multipliers=variables["lambda"],
        n_point_multipliers=variables["nu"],
        n_slacks=variables["s"],
        n_y=dims["n_y"],
        n_z=dims["n_z"],
        m=dims["m"],
        p=dims["p"],
        M=dims["M"],
        n_T=dims["n_T"],
        omega=params["omega"],
        tau=params["tau"],
        barrier_target=params["theta"],
        objective=objective,
        constraints=tuple(constraints),
        bounds=bounds,
        patterns=tuple(patterns),
        options=tuple(options),
    )

"""Problem definition: dimensions, time grid, derivative-supplying callbacks.

Callbacks must return analytic first and second derivatives; the assembled
Hessians rely on them and a silent finite-difference fallback would corrupt
convergence measurements.  ``check_derivatives`` is the supported way to
validate user-coded derivatives against central differences.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Optional, Sequence

import numpy as np

from .fespace import CoefficientVector, FESpace, build_eval_operator, build_point_eval_operator
from .quadrature import GlobalRule

#: (dy, y, z, t) -> (value, gradient over (dy, y, z), Hessian over (dy, y, z))
RunningCost = Callable[
    [np.ndarray, np.ndarray, np.ndarray, float],
    tuple[float, np.ndarray, np.ndarray],
]
#: (dy, y, z, t) -> (m values, (m, B) Jacobian, (m, B, B) Hessians)
PathConstraint = Callable[
    [np.ndarray, np.ndarray, np.ndarray, float],
    tuple[np.ndarray, np.ndarray, np.ndarray],
]
#: stacked y(t_0..t_E) -> (p values, (p, n_y n_T) Jacobian, (p, ., .) Hessians)
PointConstraint = Callable[
    [np.ndarray], tuple[np.ndarray, np.ndarray, np.ndarray]
]


@dataclass(frozen=True)
class MethodParams:
    """Discretization parameters plus the penalty and barrier weights."""

    h: float
    sigma: float
    d: int
    omega: float
    tau: float

    def __post_init__(self) -> None:
        if self.h <= 0:
            raise ValueError(f"invalid mesh size {self.h}: need h > 0")
        if not 0 < self.sigma <= 1:
            raise ValueError(f"invalid mesh ratio {self.sigma}: need 0 < sigma <= 1")
        if not 0 <= self.d <= 30:
            raise ValueError(f"invalid degree {self.d}: need 0..30")
        if self.omega <= 0 or self.tau <= 0:
            raise ValueError("penalty and barrier parameters must be positive")


def default_params(h: float, sigma: float = 1.0, d: int = 4) -> MethodParams:
    """Parameters with the default coupling omega = h^(d/2), tau = h^d."""
    if h <= 0:
        raise ValueError(f"invalid mesh size {h}: need h > 0")
    return MethodParams(h=h, sigma=sigma, d=d, omega=h ** (d / 2), tau=float(h) ** d)


@dataclass(frozen=True)
class OcpProblem:
    """Optimal control problem over the time grid ``time_points``.

    Minimize the integral of f(dy, y, z, t) subject to the point conditions
    b(y(t_0), ..., y(t_E)) = 0, the differential-algebraic constraints
    c(dy, y, z, t) = 0 almost everywhere, and z >= 0.
    """

    n_y: int
    n_z: int
    m: int
    p: int
    time_points: tuple[float, ...]
    f_eval: RunningCost
    c_eval: Optional[PathConstraint] = None
    b_eval: Optional[PointConstraint] = None
    initial_guess: Optional[Callable[[float], np.ndarray]] = None

    def __post_init__(self) -> None:
        for name in ("n_y", "n_z", "m", "p"):
            if getattr(self, name) < 0:
                raise ValueError(f"{name} must be nonnegative")
        if self.n_x < 1:
            raise ValueError("need at least one solution component")
        object.__setattr__(self, "time_points", tuple(float(t) for t in self.time_points))
        if len(self.time_points) < 2:
            raise ValueError("need at least two time points (t_0 and t_E)")
        for a, b in zip(self.time_points, self.time_points[1:]):
            if not a < b:
                raise ValueError("time points must be strictly increasing")
        if self.m > 0 and self.c_eval is None:
            raise ValueError("m > 0 requires a path-constraint callback")
        if self.p > 0 and self.b_eval is None:
            raise ValueError("p > 0 requires a point-constraint callback")

    @property
    def n_x(self) -> int:
        return self.n_y + self.n_z

    @property
    def n_T(self) -> int:
        return len(self.time_points)

    @property
    def domain(self) -> tuple[float, float]:
        return (self.time_points[0], self.time_points[-1])

    @property
    def arg_width(self) -> int:
        """Length of the stacked callback argument (dy, y, z)."""
        return 2 * self.n_y + self.n_z


def _check_symmetric(hess: np.ndarray, what: str) -> None:
    asym = np.abs(hess - np.swapaxes(hess, -1, -2)).max(initial=0.0)
    if asym > 1e-12 * max(1.0, np.abs(hess).max(initial=0.0)):
        raise ValueError(f"{what} Hessian is asymmetric (max deviation {asym})")


def eval_running_cost(problem: OcpProblem, dy, y, z, t: float, point_index=None):
    """Call f with shape validation and quadrature-point context on failure."""
    try:
        value, grad, hess = problem.f_eval(dy, y, z, t)
    except Exception as exc:
        raise RuntimeError(
            f"objective callback failed at quadrature point {point_index} (t={t})"
        ) from exc
    grad = np.asarray(grad, dtype=float)
    hess = np.asarray(hess, dtype=float)
    B = problem.arg_width
    if grad.shape != (B,) or hess.shape != (B, B):
        raise ValueError(
            f"objective derivatives have shapes {grad.shape}/{hess.shape}, "
            f"expected ({B},)/({B}, {B})"
        )
    _check_symmetric(hess, "objective")
    return float(value), grad, hess


def eval_path_constraints(problem: OcpProblem, dy, y, z, t: float, point_index=None):
    try:
        values, jac, hess = problem.c_eval(dy, y, z, t)
    except Exception as exc:
        raise RuntimeError(
            f"constraint callback failed at quadrature point {point_index} (t={t})"
        ) from exc
    values = np.asarray(values, dtype=float)
    jac = np.asarray(jac, dtype=float)
    hess = np.asarray(hess, dtype=float)
    B, m = problem.arg_width, problem.m
    if values.shape != (m,) or jac.shape != (m, B) or hess.shape != (m, B, B):
        raise ValueError(
            f"path-constraint derivatives have shapes {values.shape}/{jac.shape}/"
            f"{hess.shape}, expected ({m},)/({m}, {B})/({m}, {B}, {B})"
        )
    _check_symmetric(hess, "path-constraint")
    return values, jac, hess


def eval_point_constraints(problem: OcpProblem, stacked_y):
    try:
        values, jac, hess = problem.b_eval(np.asarray(stacked_y, dtype=float))
    except Exception as exc:
        raise RuntimeError("point-constraint callback failed") from exc
    values = np.asarray(values, dtype=float)
    jac = np.asarray(jac, dtype=float)
    hess = np.asarray(hess, dtype=float)
    width, p = problem.n_y * problem.n_T, problem.p
    if values.shape != (p,) or jac.shape != (p, width) or hess.shape != (p, width, width):
        raise ValueError(
            f"point-constraint derivatives have shapes {values.shape}/{jac.shape}/"
            f"{hess.shape}, expected ({p},)/({p}, {width})/({p}, {width}, {width})"
        )
    _check_symmetric(hess, "point-constraint")
    return values, jac, hess


def residual(
    problem: OcpProblem,
    x_h: CoefficientVector,
    space: FESpace,
    rule: GlobalRule,
) -> float:
    """Squared constraint residual: quadrature of |c|^2 plus |b|^2.

    Deliberately accumulates alpha_j |c_j|^2 point by point, independently of
    the stacked penalty blocks used during assembly, so the two routes check
    each other.
    """
    if (space.n_y, space.n_z) != (problem.n_y, problem.n_z):
        raise ValueError(
            f"space has (n_y, n_z) = {(space.n_y, space.n_z)}, problem needs "
            f"{(problem.n_y, problem.n_z)}"
        )
    total = 0.0
    if problem.m > 0:
        values = (build_eval_operator(space, rule) @ x_h.values).reshape(
            rule.M, space.block_width
        )
        n_y = problem.n_y
        for j in range(rule.M):
            c, _, _ = eval_path_constraints(
                problem,
                values[j, :n_y],
                values[j, n_y : 2 * n_y],
                values[j, 2 * n_y :],
                float(rule.points[j]),
                point_index=j,
            )
            total += float(rule.weights[j]) * float(c @ c)
    if problem.p > 0:
        point_op = build_point_eval_operator(space, problem.time_points)
        b, _, _ = eval_point_constraints(problem, point_op @ x_h.values)
        total += float(b @ b)
    return total


@dataclass
class DerivativeReport:
    """Max relative finite-difference errors per callback derivative."""

    n_samples: int
    f_gradient: float = math.nan
    f_hessian: float = math.nan
    c_jacobian: Optional[float] = None
    c_hessian: Optional[float] = None
    b_jacobian: Optional[float] = None
    b_hessian: Optional[float] = None

    def entries(self) -> list[tuple[str, float]]:
        out = [("f_gradient", self.f_gradient), ("f_hessian", self.f_hessian)]
        for name in ("c_jacobian", "c_hessian", "b_jacobian", "b_hessian"):
            value = getattr(self, name)
            if value is not None:
                out.append((name, value))
        return out

    def max_error(self) -> float:
        return max(err for _, err in self.entries())

    def __str__(self) -> str:
        lines = [f"derivative check over {self.n_samples} samples"]
        for name, err in self.entries():
            lines.append(f"  {name}: max relative error {err:.3e}")
        return "\n".join(lines)


def _fd_steps(v: np.ndarray, step: float) -> np.ndarray:
    return step * np.maximum(1.0, np.abs(v))


def _rel_error(approx: np.ndarray, exact: np.ndarray) -> float:
    scale = max(1.0, float(np.abs(exact).max(initial=0.0)))
    return float(np.abs(approx - exact).max(initial=0.0)) / scale


def check_derivatives(
    problem: OcpProblem,
    samples: Optional[Sequence[tuple[np.ndarray, np.ndarray, np.ndarray, float]]] = None,
    b_samples: Optional[Sequence[np.ndarray]] = None,
    *,
    n_samples: int = 5,
    step: float = 1e-6,
    seed: int = 0,
) -> DerivativeReport:
    """Compare coded derivatives against central finite differences.

    Gradients and Jacobians are differenced from values; Hessians from the
    coded first derivatives.  Steps are scaled by the argument magnitude.
    The check only reports errors, it never raises on a mismatch.
    """
    rng = np.random.default_rng(seed)
    t0, t_end = problem.domain
    if samples is None:
        samples = []
        for _ in range(n_samples):
            dy = rng.uniform(-1.0, 1.0, problem.n_y)
            y = rng.uniform(-1.0, 1.0, problem.n_y)
            z = rng.uniform(0.5, 1.5, problem.n_z)
            t = float(rng.uniform(t0, t_end))
            samples.append((dy, y, z, t))
    if b_samples is None and problem.p > 0:
        b_samples = [
            rng.uniform(-1.0, 1.0, problem.n_y * problem.n_T) for _ in range(n_samples)
        ]

    report = DerivativeReport(n_samples=len(samples))
    f_grad_err = f_hess_err = 0.0
    c_jac_err = c_hess_err = 0.0
    B = problem.arg_width

    def split(v: np.ndarray):
        return v[: problem.n_y], v[problem.n_y : 2 * problem.n_y], v[2 * problem.n_y :]

    for dy, y, z, t in samples:
        v0 = np.concatenate([dy, y, z]).astype(float)
        steps = _fd_steps(v0, step)
        _, grad, hess = eval_running_cost(problem, *split(v0), t)
        grad_fd = np.empty(B)
        hess_fd = np.empty((B, B))
        for i in range(B):
            vp, vm = v0.copy(), v0.copy()
            vp[i] += steps[i]
            vm[i] -= steps[i]
            fp, gp, _ = eval_running_cost(problem, *split(vp), t)
            fm, gm, _ = eval_running_cost(problem, *split(vm), t)
            grad_fd[i] = (fp - fm) / (2 * steps[i])
            hess_fd[:, i] = (gp - gm) / (2 * steps[i])
        f_grad_err = max(f_grad_err, _rel_error(grad_fd, grad))
        f_hess_err = max(f_hess_err, _rel_error(hess_fd, hess))

        if problem.m > 0:
            _, jac, chess = eval_path_constraints(problem, *split(v0), t)
            jac_fd = np.empty((problem.m, B))
            chess_fd = np.empty((problem.m, B, B))
            for i in range(B):
                vp, vm = v0.copy(), v0.copy()
                vp[i] += steps[i]
                vm[i] -= steps[i]
                cp, jp, _ = eval_path_constraints(problem, *split(vp), t)
                cm, jm, _ = eval_path_constraints(problem, *split(vm), t)
                jac_fd[:, i] = (cp - cm) / (2 * steps[i])
                chess_fd[:, :, i] = (jp - jm) / (2 * steps[i])
            c_jac_err = max(c_jac_err, _rel_error(jac_fd, jac))
            c_hess_err = max(c_hess_err, _rel_error(chess_fd, chess))

    report.f_gradient = f_grad_err
    report.f_hessian = f_hess_err
    if problem.m > 0:
        report.c_jacobian = c_jac_err
        report.c_hessian = c_hess_err

    if problem.p > 0:
        b_jac_err = b_hess_err = 0.0
        width = problem.n_y * problem.n_T
        for yv in b_samples:
            yv = np.asarray(yv, dtype=float)
            steps = _fd_steps(yv, step)
            _, jac, bhess = eval_point_constraints(problem, yv)
            jac_fd = np.empty((problem.p, width))
            hess_fd = np.empty((problem.p, width, width))
            for i in range(width):
                vp, vm = yv.copy(), yv.copy()
                vp[i] += steps[i]
                vm[i] -= steps[i]
                bp, jp, _ = eval_point_constraints(problem, vp)
                bm, jm, _ = eval_point_constraints(problem, vm)
                jac_fd[:, i] = (bp - bm) / (2 * steps[i])
                hess_fd[:, :, i] = (jp - jm) / (2 * steps[i])
            b_jac_err = max(b_jac_err, _rel_error(jac_fd, jac))
            b_hess_err = max(b_hess_err, _rel_error(hess_fd, bhess))
        report.b_jacobian = b_jac_err
        report.b_hessian = b_hess_err
    return report

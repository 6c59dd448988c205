import numpy as np
import pytest

from ocfem.assembly import AssembledNlp
from ocfem.fespace import build_space
from ocfem.harness import build_setup, get_benchmark
from ocfem.mesh import uniform_mesh
from ocfem.ocp_model import MethodParams, OcpProblem, default_params, residual
from ocfem.solver import (
    STATUS_CONVERGED,
    STATUS_LINE_SEARCH,
    STATUS_MAX_ITERS,
    SolverOptions,
    _newton_direction,
    default_start,
    ensure_interior,
    export_lifted_nlp,
    lifted_objective,
    parse_lifted_nlp,
    solve,
    strict_positivity_check,
)


def lq_nlp(h=0.125, d=4):
    bench = get_benchmark("lq")
    space, params = build_setup(bench, h, d)
    return AssembledNlp(bench.problem, space, params)


def barrier_pull_nlp(tau, omega=1e-2, degree=2):
    bench = get_benchmark("barrier-pull")
    space = build_space([uniform_mesh((0.0, 1.0), 2)], degree, 0, 1)
    params = MethodParams(h=0.5, sigma=1.0, d=degree, omega=omega, tau=tau)
    return AssembledNlp(bench.problem, space, params)


class TestNewtonOnQuadratic:
    def test_converges_in_few_iterations(self, rng):
        def f_eval(dy, y, z, t):
            return 0.5 * float(y[0] ** 2), np.array([0.0, y[0]]), np.diag([0.0, 1.0])

        problem = OcpProblem(
            n_y=1, n_z=0, m=0, p=0, time_points=(0.0, 1.0), f_eval=f_eval
        )
        space = build_space([uniform_mesh((0.0, 1.0), 4)], 3, 1, 0)
        params = default_params(0.25, 1.0, 3)
        nlp = AssembledNlp(problem, space, params)
        x0 = space.coefficient_vector(rng.uniform(-1.0, 1.0, space.N))
        opts = SolverOptions(
            grad_tol=1e-10, continuation=[(params.omega, params.tau)]
        )
        report = solve(nlp, x0, opts)
        assert report.status == STATUS_CONVERGED
        assert report.total_iterations <= 3
        assert report.grad_norm <= 1e-10


class TestSolveLq:
    def test_converges_with_default_schedule(self):
        report = solve(lq_nlp())
        assert report.status == STATUS_CONVERGED
        assert report.min_z > 0.0

    @pytest.mark.parametrize("name", ["lq", "lq-multimesh", "trivial", "barrier-pull"])
    def test_residual_decreases_over_continuation(self, name):
        bench = get_benchmark(name)
        space, params = build_setup(bench, 0.125, 4)
        report = solve(AssembledNlp(bench.problem, space, params))
        assert report.status == STATUS_CONVERGED
        residuals = [stage.residual for stage in report.stages]
        for earlier, later in zip(residuals, residuals[1:]):
            assert later <= earlier + 1e-12

    def test_objective_strictly_decreases_within_stage(self):
        report = solve(lq_nlp())
        for stage in report.stages:
            history = stage.objective_history
            for a, b in zip(history, history[1:]):
                assert b < a

    def test_stationarity_reproducible(self):
        nlp = lq_nlp()
        report = solve(nlp)
        assert report.grad_norm <= SolverOptions().resolved_grad_tol(nlp.N)
        again = float(np.linalg.norm(nlp.gradient(report.x_final)))
        assert abs(again - report.grad_norm) <= 1e-13 * max(1.0, report.grad_norm)

    def test_iterates_stay_interior(self):
        nlp = lq_nlp()
        report = solve(nlp)
        assert nlp.z_values(report.x_final).min() > 0.0

    def test_max_iters_status(self):
        report = solve(lq_nlp(), opts=SolverOptions(max_iters=1, grad_tol=1e-14))
        assert report.status == STATUS_MAX_ITERS


class TestStartingPoint:
    def test_default_start_is_interior(self):
        nlp = lq_nlp(h=0.25)
        x0 = default_start(nlp)
        assert nlp.z_values(x0).min() > 0.0
        # hinted differential component starts at 1
        assert nlp.point_op @ x0.values == pytest.approx([1.0, 1.0])

    def test_negative_start_shifted_then_solves(self):
        nlp = barrier_pull_nlp(tau=1e-2)
        bad = nlp.space.interpolate([lambda t: -1.0])
        shifted = ensure_interior(nlp, bad)
        assert nlp.z_values(shifted).min() > 0.0
        report = solve(nlp, bad)
        assert report.status == STATUS_CONVERGED


class TestBarrierPull:
    @pytest.mark.parametrize("tau", [1e-2, 1e-3])
    def test_floor_tracks_tau(self, tau):
        nlp = barrier_pull_nlp(tau)
        report = solve(nlp)
        assert report.status == STATUS_CONVERGED
        z = nlp.z_values(report.x_final)
        assert np.abs(z / tau - 1.0).max() <= 0.1

    def test_halving_tau_halves_floor(self):
        first = solve(barrier_pull_nlp(1e-2))
        second = solve(barrier_pull_nlp(5e-3))
        ratio = second.min_z / first.min_z
        assert abs(ratio - 0.5) <= 0.05

    def test_positivity_report(self):
        nlp = barrier_pull_nlp(1e-2)
        report = solve(nlp)
        check = strict_positivity_check(report, nlp)
        assert check.strictly_positive
        assert check.min_z == pytest.approx(report.min_z)
        assert check.theoretical_floor is None
        with_bound = strict_positivity_check(report, nlp, lipschitz_bound=1.0)
        assert with_bound.theoretical_floor == pytest.approx(nlp.params.tau)
        assert with_bound.min_z >= 0.9 * with_bound.theoretical_floor


class TestLiftedExport:
    def test_dimensions(self):
        nlp = lq_nlp(h=0.25)
        export = export_lifted_nlp(nlp)
        m_rows = nlp.problem.m * nlp.M
        slacks = nlp.space.n_z * nlp.M
        assert export.n_coefficients == nlp.N
        assert export.n_path_multipliers == m_rows
        assert export.n_point_multipliers == nlp.problem.p
        assert export.n_slacks == slacks
        assert export.n_variables == nlp.N + m_rows + nlp.problem.p + slacks
        assert export.n_constraints == m_rows + nlp.problem.p + slacks
        assert export.barrier_target == nlp.params.tau

    def test_empty_point_block(self):
        nlp = barrier_pull_nlp(1e-2)
        export = export_lifted_nlp(nlp)
        assert export.n_point_multipliers == 0
        assert export.n_path_multipliers == 0
        assert export.n_slacks == nlp.M
        parsed = parse_lifted_nlp(export.to_text())
        assert parsed == export

    def test_round_trip(self, tmp_path):
        nlp = lq_nlp(h=0.25)
        export = export_lifted_nlp(nlp)
        path = tmp_path / "lifted.txt"
        export.write(path)
        parsed = parse_lifted_nlp(path.read_text(encoding="utf-8"))
        assert parsed == export
        assert parsed.to_text() == export.to_text()

    def test_rejects_foreign_text(self):
        with pytest.raises(ValueError, match="lifted-nlp"):
            parse_lifted_nlp("something else\n")

    def test_slack_pattern_matches_auxiliary_rows(self):
        nlp = lq_nlp(h=0.5)
        export = export_lifted_nlp(nlp)
        patterns = dict((p[0], p) for p in export.patterns)
        _, n_rows, n_cols, coords = patterns["JG_x"]
        assert n_rows == nlp.space.n_z * nlp.M
        assert n_cols == nlp.N
        # every auxiliary row touches exactly d + 1 coefficients
        rows = {}
        for r, c in coords:
            rows.setdefault(r, []).append(c)
        assert all(len(cs) == nlp.space.degree + 1 for cs in rows.values())

    @pytest.mark.parametrize("name", ["lq", "trivial", "barrier-pull"])
    def test_lifting_reproduces_penalty_objective(self, name):
        bench = get_benchmark(name)
        if name == "barrier-pull":
            nlp = barrier_pull_nlp(1e-2)
        else:
            space, params = build_setup(bench, 0.25, 4)
            nlp = AssembledNlp(bench.problem, space, params)
        report = solve(nlp)
        assert report.status == STATUS_CONVERGED
        h_c, h_b = nlp.penalty_blocks(report.x_final)
        omega = nlp.params.omega
        value = lifted_objective(nlp, report.x_final, h_c / omega, h_b / omega)
        assert abs(value - report.terms.barrier_free) <= 1e-9


class TestInertiaCorrection:
    def test_identity_needs_no_shift(self):
        step = _newton_direction(np.eye(3), np.ones(3), 1e-12)
        assert step == pytest.approx(-np.ones(3))

    def test_singular_matrix_shifted(self):
        step = _newton_direction(np.zeros((2, 2)), np.array([1.0, 0.0]), 1e-12)
        assert step is not None and np.isfinite(step).all()

    def test_strongly_indefinite_gives_up(self):
        # a negative eigenvalue far beyond the shift cap -> gradient fallback
        assert _newton_direction(np.diag([1.0, -1.0]), np.ones(2), 1e-12) is None

    def test_concave_problem_fails_gracefully(self, rng):
        def f_eval(dy, y, z, t):
            return -10.0 * float(y[0] ** 2), np.array([0.0, -20.0 * y[0]]), np.diag(
                [0.0, -20.0]
            )

        problem = OcpProblem(
            n_y=1, n_z=0, m=0, p=0, time_points=(0.0, 1.0), f_eval=f_eval
        )
        space = build_space([uniform_mesh((0.0, 1.0), 2)], 2, 1, 0)
        params = MethodParams(h=0.5, sigma=1.0, d=2, omega=1e-6, tau=1e-6)
        nlp = AssembledNlp(problem, space, params)
        x0 = space.coefficient_vector(rng.uniform(-0.1, 0.1, space.N))
        report = solve(
            nlp, x0, SolverOptions(max_iters=20, continuation=[(1e-6, 1e-6)])
        )
        assert report.status in (STATUS_MAX_ITERS, STATUS_LINE_SEARCH)


class TestSchedules:
    def test_explicit_schedule_gets_target_appended(self):
        nlp = lq_nlp(h=0.25)
        report = solve(nlp, opts=SolverOptions(continuation=[(0.5, 0.5)]))
        assert report.stages[-1].omega == nlp.params.omega
        assert report.stages[-1].tau == nlp.params.tau

    def test_default_schedule_ends_at_params(self):
        nlp = lq_nlp(h=0.25)
        report = solve(nlp)
        assert report.stages[-1].omega == nlp.params.omega
        assert report.stages[-1].tau == nlp.params.tau

    def test_options_validation(self):
        with pytest.raises(ValueError, match="boundary_fraction"):
            SolverOptions(boundary_fraction=1.5)
        with pytest.raises(ValueError, match="grad_tol"):
            SolverOptions(grad_tol=-1.0)

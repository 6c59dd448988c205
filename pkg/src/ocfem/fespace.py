"""Global finite-element spaces and their sparse evaluation operators.

A space couples one mesh per solution component with a single polynomial
degree.  Differential components (the first ``n_y``) are kept continuous by
sharing endpoint coefficients between neighbouring intervals; auxiliary
components (the remaining ``n_z``) are discontinuous.  Coefficients are
numbered component-major, then interval-major, then by local basis index,
which keeps the regularizer and Hessians banded on single-mesh problems.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np
import scipy.sparse as sparse

from .mesh import MergedMesh, Mesh, merge_meshes
from .polybasis import (
    LAGRANGE_GAUSS_LOBATTO,
    Basis,
    eval_basis_derivative_matrix,
    eval_basis_matrix,
    make_basis,
)
from .quadrature import GlobalRule


@dataclass(frozen=True)
class FESpace:
    """Piecewise-polynomial space over per-component meshes.

    ``index_map[c][k, a]`` is the global coefficient index of local basis
    function ``a`` on interval ``k`` of component ``c``.
    """

    component_meshes: tuple[Mesh, ...]
    degree: int
    n_y: int
    n_z: int
    index_map: tuple[np.ndarray, ...]
    N: int
    basis: Basis

    @property
    def n_x(self) -> int:
        return self.n_y + self.n_z

    @property
    def domain(self) -> tuple[float, float]:
        return self.component_meshes[0].domain

    @property
    def block_width(self) -> int:
        """Rows per quadrature point in the evaluation operator: 2 n_y + n_z."""
        return 2 * self.n_y + self.n_z

    def is_continuous(self, component: int) -> bool:
        return component < self.n_y

    def zeros(self) -> "CoefficientVector":
        return CoefficientVector(np.zeros(self.N), self)

    def coefficient_vector(self, values) -> "CoefficientVector":
        return CoefficientVector(np.asarray(values, dtype=float), self)

    def interpolate(self, component_functions: Sequence[Callable[[float], float]]) -> "CoefficientVector":
        """Interpolate one scalar function per component at the basis nodes."""
        if len(component_functions) != self.n_x:
            raise ValueError(
                f"need {self.n_x} component functions, got {len(component_functions)}"
            )
        out = np.zeros(self.N)
        nodes = self.basis.nodes
        for comp, func in enumerate(component_functions):
            mesh = self.component_meshes[comp]
            for k, iv in enumerate(mesh.intervals):
                ts = iv.left + iv.length * nodes
                out[self.index_map[comp][k]] = [func(float(t)) for t in ts]
        return CoefficientVector(out, self)


@dataclass(frozen=True)
class CoefficientVector:
    """Finite coefficient vector tied to its space."""

    values: np.ndarray
    space: FESpace

    def __post_init__(self) -> None:
        vals = np.ascontiguousarray(self.values, dtype=float)
        if vals.shape != (self.space.N,):
            raise ValueError(
                f"coefficient vector has shape {vals.shape}, space needs ({self.space.N},)"
            )
        if not np.isfinite(vals).all():
            raise ValueError("coefficient vector contains non-finite entries")
        vals.flags.writeable = False
        object.__setattr__(self, "values", vals)

    def replace_values(self, values) -> "CoefficientVector":
        return CoefficientVector(np.asarray(values, dtype=float), self.space)


def build_space(meshes: Sequence[Mesh], degree: int, n_y: int, n_z: int) -> FESpace:
    """Assemble the global space from one mesh per component."""
    meshes = tuple(meshes)
    if n_y < 0 or n_z < 0 or n_y + n_z < 1:
        raise ValueError(f"invalid component counts n_y={n_y}, n_z={n_z}")
    if len(meshes) != n_y + n_z:
        raise ValueError(
            f"need {n_y + n_z} meshes (one per component), got {len(meshes)}"
        )
    domain = meshes[0].domain
    for m in meshes[1:]:
        if m.domain != domain:
            raise ValueError(f"domain mismatch: {m.domain} vs {domain}")
    if n_y > 0 and degree < 1:
        raise ValueError(
            "degree 0 cannot represent continuous differential components; "
            "need degree >= 1"
        )
    basis = make_basis(degree, LAGRANGE_GAUSS_LOBATTO)

    counter = 0
    index_map = []
    for comp, mesh in enumerate(meshes):
        arr = np.empty((mesh.n_intervals, degree + 1), dtype=int)
        continuous = comp < n_y
        for k in range(mesh.n_intervals):
            for a in range(degree + 1):
                if continuous and a == 0 and k > 0:
                    arr[k, 0] = arr[k - 1, degree]
                else:
                    arr[k, a] = counter
                    counter += 1
        arr.flags.writeable = False
        index_map.append(arr)
    return FESpace(meshes, degree, n_y, n_z, tuple(index_map), counter, basis)


def _check_rule(space: FESpace, rule: GlobalRule) -> MergedMesh:
    mesh = rule.mesh
    reference = merge_meshes(space.component_meshes)
    ok = (
        isinstance(mesh, MergedMesh)
        and mesh.n_intervals == reference.n_intervals
        and mesh.provenance == reference.provenance
        and np.allclose(mesh.breakpoints(), reference.breakpoints(), atol=1e-12, rtol=0)
    )
    if not ok:
        raise ValueError(
            "quadrature rule was not composed over the merged mesh of this space"
        )
    return mesh


def build_eval_operator(space: FESpace, rule: GlobalRule) -> sparse.csr_matrix:
    """Map coefficients to stacked per-point values.

    For each quadrature point rho_j the rows are ordered as the n_y
    derivative values, then the n_y function values of the differential
    components, then the n_z auxiliary values.  Derivative rows carry the
    1 / |T| chain-rule factor of the containing source interval.
    """
    merged = _check_rule(space, rule)
    B, M = space.block_width, rule.M
    prov = np.array(merged.provenance, dtype=int)
    src_of_point = prov[rule.interval_of]
    point_base = np.arange(M) * B

    rows, cols, vals = [], [], []
    for comp in range(space.n_x):
        mesh = space.component_meshes[comp]
        lefts = np.array([iv.left for iv in mesh.intervals])
        lens = mesh.lengths()
        src = src_of_point[:, comp]
        local = np.clip((rule.points - lefts[src]) / lens[src], 0.0, 1.0)
        col_block = space.index_map[comp][src]

        values = eval_basis_matrix(space.basis, local)
        row_block = point_base + space.n_y + comp
        rows.append(np.repeat(row_block, space.degree + 1))
        cols.append(col_block.ravel())
        vals.append(values.ravel())

        if comp < space.n_y:
            derivs = eval_basis_derivative_matrix(space.basis, local) / lens[src][:, None]
            row_block = point_base + comp
            rows.append(np.repeat(row_block, space.degree + 1))
            cols.append(col_block.ravel())
            vals.append(derivs.ravel())

    op = sparse.coo_matrix(
        (np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))),
        shape=(B * M, space.N),
    ).tocsr()
    op.eliminate_zeros()
    return op


def build_point_eval_operator(space: FESpace, time_points: Sequence[float]) -> sparse.csr_matrix:
    """Evaluate the differential components at fixed times.

    Row i * n_y + c holds the evaluation of component c at time_points[i].
    Evaluation at an interior mesh point uses the interval on its left; the
    continuity of the differential components makes the choice immaterial.
    """
    t0, t_end = space.domain
    pts = [float(t) for t in time_points]
    for t in pts:
        if t < t0 or t > t_end:
            raise ValueError(f"point {t} outside domain {space.domain}")
    rows, cols, vals = [], [], []
    for comp in range(space.n_y):
        mesh = space.component_meshes[comp]
        for i, t in enumerate(pts):
            k = mesh.interval_index(t)
            iv = mesh.intervals[k]
            local = min(max((t - iv.left) / iv.length, 0.0), 1.0)
            values = eval_basis_matrix(space.basis, [local])[0]
            rows.extend([i * space.n_y + comp] * (space.degree + 1))
            cols.extend(space.index_map[comp][k])
            vals.extend(values)
    op = sparse.coo_matrix(
        (vals, (rows, cols)), shape=(space.n_y * len(pts), space.N)
    ).tocsr()
    op.eliminate_zeros()
    return op


def build_regularizer(
    space: FESpace, rule: GlobalRule, eval_op: sparse.csr_matrix
) -> sparse.csr_matrix:
    """Quadrature Gram matrix of the solution-space norm.

    x' S x approximates the H1 norm squared of the differential components
    plus the L2 norm squared of the auxiliary ones: every row block of the
    evaluation operator (derivatives included) is weighted by alpha_j.
    """
    B, M = space.block_width, rule.M
    if eval_op.shape != (B * M, space.N):
        raise ValueError(
            f"evaluation operator has shape {eval_op.shape}, expected {(B * M, space.N)}"
        )
    weights = np.repeat(rule.weights, B)
    gram = eval_op.T @ sparse.diags(weights) @ eval_op
    gram = ((gram + gram.T) * 0.5).tocsr()
    gram.eliminate_zeros()
    return gram


def interleaved_order(space: FESpace) -> np.ndarray:
    """Permutation sorting coefficients by interval position before component.

    Under this ordering the Hessian of a single-mesh problem is banded with
    bandwidth at most 2 (d + 1) n_x.
    """
    entries = []
    seen: set[int] = set()
    for comp in range(space.n_x):
        mesh = space.component_meshes[comp]
        arr = space.index_map[comp]
        for k in range(mesh.n_intervals):
            for a in range(space.degree + 1):
                g = int(arr[k, a])
                if g in seen:
                    continue
                seen.add(g)
                entries.append((mesh.intervals[k].left, comp, a, g))
    entries.sort()
    return np.array([g for *_, g in entries], dtype=int)

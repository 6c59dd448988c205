"""Polynomial bases on the unit interval and the minimum-norm constant check.

Two bases of degree d are provided: a Lagrange basis on Gauss-Lobatto nodes
(nodal values as coefficients, endpoints included for d >= 1, so continuity
across mesh intervals reduces to sharing endpoint coefficients) and the
L2(0,1)-orthonormal shifted Legendre basis.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache
from typing import NamedTuple, Sequence

import numpy as np
from scipy.special import roots_jacobi

from .quadrature import gauss_legendre_unit

LAGRANGE_GAUSS_LOBATTO = "lagrange_gauss_lobatto"
LEGENDRE_ORTHONORMAL = "legendre_orthonormal"
KINDS = (LAGRANGE_GAUSS_LOBATTO, LEGENDRE_ORTHONORMAL)

MAX_DEGREE = 30

#: Points closer than this to a Lagrange node are evaluated with the exact
#: at-node formulas instead of the barycentric quotient.
_NODE_SNAP = 1e-14

#: Grid resolution used to certify sup norms of polynomials.
_LINF_GRID = 10001


@dataclass(frozen=True)
class Basis:
    """Degree-d polynomial basis on [0, 1]; dimension d + 1."""

    degree: int
    kind: str

    def __post_init__(self) -> None:
        if not 0 <= self.degree <= MAX_DEGREE:
            raise ValueError(
                f"unsupported degree {self.degree}: need 0..{MAX_DEGREE}"
            )
        if self.kind not in KINDS:
            raise ValueError(f"unknown basis kind {self.kind!r}")

    @property
    def dimension(self) -> int:
        return self.degree + 1

    @property
    def nodes(self) -> np.ndarray:
        if self.kind != LAGRANGE_GAUSS_LOBATTO:
            raise ValueError(f"{self.kind} basis has no interpolation nodes")
        return gauss_lobatto_nodes(self.degree)


def make_basis(degree: int, kind: str = LAGRANGE_GAUSS_LOBATTO) -> Basis:
    return Basis(degree, kind)


def gauss_lobatto_nodes(degree: int) -> np.ndarray:
    """Gauss-Lobatto points on [0, 1] for a degree-d basis (d + 1 nodes).

    For d = 0 the single node is the midpoint; for d >= 1 the endpoints are
    included and the interior nodes are the extrema of the degree-d Legendre
    polynomial.
    """
    nodes, _ = _lobatto_data(int(degree))
    return nodes.copy()


@lru_cache(maxsize=None)
def _lobatto_data(degree: int) -> tuple[np.ndarray, np.ndarray]:
    """Nodes plus barycentric weights, cached per degree."""
    if not 0 <= degree <= MAX_DEGREE:
        raise ValueError(f"unsupported degree {degree}: need 0..{MAX_DEGREE}")
    if degree == 0:
        nodes = np.array([0.5])
    elif degree == 1:
        nodes = np.array([0.0, 1.0])
    else:
        interior, _ = roots_jacobi(degree - 1, 1.0, 1.0)
        nodes = np.concatenate(([0.0], 0.5 * (interior + 1.0), [1.0]))
    diff = nodes[:, None] - nodes[None, :]
    np.fill_diagonal(diff, 1.0)
    bary = 1.0 / diff.prod(axis=1)
    nodes.flags.writeable = False
    bary.flags.writeable = False
    return nodes, bary


def _check_points(points: np.ndarray) -> np.ndarray:
    pts = np.atleast_1d(np.asarray(points, dtype=float))
    if pts.min(initial=0.0) < 0.0 or pts.max(initial=0.0) > 1.0:
        bad = pts[(pts < 0.0) | (pts > 1.0)][0]
        raise ValueError(f"point {bad} outside [0, 1]")
    return pts


def _shifted_legendre(points: np.ndarray, degree: int) -> tuple[np.ndarray, np.ndarray]:
    """Values and derivatives of the orthonormal shifted Legendre basis.

    Returns two (n_points, degree + 1) arrays.  The recurrences run on
    x = 2t - 1 and stay stable through degree 30 and beyond.
    """
    t = np.asarray(points, dtype=float)
    x = 2.0 * t - 1.0
    values = np.empty((t.size, degree + 1))
    derivs = np.empty_like(values)
    values[:, 0] = 1.0
    derivs[:, 0] = 0.0
    if degree >= 1:
        values[:, 1] = x
        derivs[:, 1] = 1.0
    for k in range(1, degree):
        values[:, k + 1] = (
            (2 * k + 1) * x * values[:, k] - k * values[:, k - 1]
        ) / (k + 1)
        derivs[:, k + 1] = derivs[:, k - 1] + (2 * k + 1) * values[:, k]
    scale = np.sqrt(2.0 * np.arange(degree + 1) + 1.0)
    return values * scale, 2.0 * derivs * scale


def _lagrange_values(points: np.ndarray, degree: int) -> np.ndarray:
    nodes, bary = _lobatto_data(degree)
    if degree == 0:
        return np.ones((points.size, 1))
    out = np.empty((points.size, degree + 1))
    diff = points[:, None] - nodes[None, :]
    at_node = np.abs(diff) < _NODE_SNAP
    regular = ~at_node.any(axis=1)
    if regular.any():
        q = bary / diff[regular]
        out[regular] = q / q.sum(axis=1, keepdims=True)
    for i in np.nonzero(~regular)[0]:
        row = np.zeros(degree + 1)
        row[int(np.argmax(at_node[i]))] = 1.0
        out[i] = row
    return out


def _lagrange_derivatives(points: np.ndarray, degree: int) -> np.ndarray:
    nodes, bary = _lobatto_data(degree)
    if degree == 0:
        return np.zeros((points.size, 1))
    out = np.empty((points.size, degree + 1))
    diff = points[:, None] - nodes[None, :]
    at_node = np.abs(diff) < _NODE_SNAP
    regular = ~at_node.any(axis=1)
    if regular.any():
        d = diff[regular]
        q = bary / d
        values = q / q.sum(axis=1, keepdims=True)
        s_all = (1.0 / d).sum(axis=1, keepdims=True)
        out[regular] = values * (s_all - 1.0 / d)
    for i in np.nonzero(~regular)[0]:
        k = int(np.argmax(at_node[i]))
        row = np.empty(degree + 1)
        others = np.arange(degree + 1) != k
        row[others] = (bary[others] / bary[k]) / (nodes[k] - nodes[others])
        row[k] = -row[others].sum()
        out[i] = row
    return out


def eval_basis_matrix(basis: Basis, points) -> np.ndarray:
    """Basis values at many points, as an (n_points, dimension) matrix."""
    pts = _check_points(points)
    if basis.kind == LAGRANGE_GAUSS_LOBATTO:
        return _lagrange_values(pts, basis.degree)
    return _shifted_legendre(pts, basis.degree)[0]


def eval_basis_derivative_matrix(basis: Basis, points) -> np.ndarray:
    """First derivatives of the basis functions at many points."""
    pts = _check_points(points)
    if basis.kind == LAGRANGE_GAUSS_LOBATTO:
        return _lagrange_derivatives(pts, basis.degree)
    return _shifted_legendre(pts, basis.degree)[1]


def eval_basis(basis: Basis, point: float) -> np.ndarray:
    return eval_basis_matrix(basis, [point])[0]


def eval_basis_derivative(basis: Basis, point: float) -> np.ndarray:
    return eval_basis_derivative_matrix(basis, [point])[0]


def nodal_to_orthonormal(degree: int, values) -> np.ndarray:
    """Convert Lagrange (node value) coefficients to orthonormal Legendre ones."""
    vander = _shifted_legendre(gauss_lobatto_nodes(degree), degree)[0]
    return np.linalg.solve(vander, np.asarray(values, dtype=float))


def orthonormal_to_nodal(degree: int, coefficients) -> np.ndarray:
    """Convert orthonormal Legendre coefficients to Lagrange node values."""
    vander = _shifted_legendre(gauss_lobatto_nodes(degree), degree)[0]
    return vander @ np.asarray(coefficients, dtype=float)


def _unit_value_minimizer(degree: int) -> np.ndarray:
    """Orthonormal coefficients of the minimum-L2 polynomial with value 1 at 0.

    In the orthonormal basis the squared norm is the coefficient 2-norm and
    the value-at-zero constraint is affine, so the minimizer is the closed
    form projection c = phi(0) / ||phi(0)||^2.
    """
    k = np.arange(degree + 1)
    phi0 = np.sqrt(2.0 * k + 1.0) * (-1.0) ** k
    return phi0 / (degree + 1) ** 2


def min_l2_unit_value_qp(degree: int) -> tuple[np.ndarray, float]:
    """Minimize the L2(0,1) norm over degree-d polynomials with v(0) = 1.

    Returns the monomial coefficients of the minimizer (constant term first)
    and its L2 norm.  The problem is solved in the orthonormal Legendre
    basis, where the Gram matrix is the identity; the monomial form is
    produced only for reporting and becomes ill-scaled for large degrees.
    """
    if not 0 <= degree <= MAX_DEGREE:
        raise ValueError(f"unsupported degree {degree}: need 0..{MAX_DEGREE}")
    coeffs = _unit_value_minimizer(degree)
    norm = float(np.linalg.norm(coeffs))
    # orthonormal -> standard Legendre series -> monomials in x -> in t
    std = coeffs * np.sqrt(2.0 * np.arange(degree + 1) + 1.0)
    poly_x = np.polynomial.Polynomial(np.polynomial.legendre.leg2poly(std))
    poly_t = poly_x(np.polynomial.Polynomial([-1.0, 2.0]))
    monomial = np.zeros(degree + 1)
    monomial[: len(poly_t.coef)] = poly_t.coef
    return monomial, norm


class NormConstantRow(NamedTuple):
    d: int
    computed: float
    expected: float
    abs_error: float


def verify_norm_constants(d_max: int) -> list[NormConstantRow]:
    """Tabulate the minimum L2 norm against 1 / (d + 1) for d = 0..d_max.

    The reported norm is recomputed by Gauss quadrature on the minimizer's
    values rather than read off the closed form.  Additionally certifies on a
    dense grid that the minimizer's sup norm equals its value 1 at t = 0.
    """
    if not 0 <= d_max <= MAX_DEGREE:
        raise ValueError(f"unsupported degree {d_max}: need 0..{MAX_DEGREE}")
    grid = np.linspace(0.0, 1.0, _LINF_GRID)
    rows = []
    for d in range(d_max + 1):
        coeffs = _unit_value_minimizer(d)
        rule = gauss_legendre_unit(d + 1)
        vals = _shifted_legendre(rule.nodes, d)[0] @ coeffs
        computed = float(np.sqrt(rule.weights @ vals**2))
        expected = 1.0 / (d + 1)
        rows.append(NormConstantRow(d, computed, expected, abs(computed - expected)))

        grid_vals = _shifted_legendre(grid, d)[0] @ coeffs
        sup = float(np.abs(grid_vals).max())
        at_zero = float(grid_vals[0])
        if abs(sup - at_zero) > 1e-9 or abs(at_zero - 1.0) > 1e-9:
            raise RuntimeError(
                f"sup-norm certificate failed for degree {d}: "
                f"max |v| = {sup}, v(0) = {at_zero}"
            )
    return rows


def norm_constants_csv(rows: Sequence[NormConstantRow]) -> str:
    lines = ["d,computed,expected,error"]
    for r in rows:
        lines.append(f"{r.d},{r.computed!r},{r.expected!r},{r.abs_error!r}")
    return "\n".join(lines) + "\n"

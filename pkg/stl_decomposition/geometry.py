"""
POLYTOPE KERNEL
H-representation polytopes P(A, c, z) = {x | A(x - c) <= z}

Functional form, vertex enumeration, similarity transforms, Minkowski sums of
similar polytopes, and the linear certificates for inclusion and intersection
that the decomposition program is built from.

A similarity parameter eta = [center; scale] maps the base shape P(A, 0, z)
to P(A, center, scale * z). Every vertex of the image is G_k eta with
G_k = [I | v_k] and v_k a vertex of the base shape.
"""

import itertools
import logging
from dataclasses import dataclass
from typing import Any, Dict, Iterable, List, Optional, Sequence

import numpy as np
from scipy.optimize import linprog

from . import conic
from .config import ABS_TOL, VERTEX_TOL
from .errors import BoundednessError, ContractViolation, EmptyPolytopeError, EmptySumError

logger = logging.getLogger(__name__)


def _linprog(cost, A_ub=None, b_ub=None, A_eq=None, b_eq=None, bounds=(None, None)):
    return linprog(cost, A_ub=A_ub, b_ub=b_ub, A_eq=A_eq, b_eq=b_eq,
                   bounds=bounds, method="highs")


# ============================================================================
# TYPES
# ============================================================================


@dataclass(frozen=True)
class SimilarityParam:
    """eta = [center; scale] of a polytope similar to a base shape."""
    center: np.ndarray
    scale: float

    def __post_init__(self):
        object.__setattr__(self, "center", np.asarray(self.center, dtype=float).ravel())
        object.__setattr__(self, "scale", float(self.scale))
        if self.scale < 0:
            raise ContractViolation(f"similarity scale must be nonnegative, got {self.scale}")

    @property
    def vector(self) -> np.ndarray:
        return np.concatenate([self.center, [self.scale]])

    @classmethod
    def from_vector(cls, eta: Sequence[float]) -> "SimilarityParam":
        eta = np.asarray(eta, dtype=float).ravel()
        # interior-point iterates may sit a rounding error below zero
        scale = 0.0 if -1e-9 < eta[-1] < 0 else eta[-1]
        return cls(eta[:-1], scale)

    def to_dict(self) -> Dict[str, Any]:
        return {"center": self.center.tolist(), "scale": self.scale}


class Polytope:
    """
    The set {x | A (x - c) <= z}.

    Args:
        A: (m, n) hyperplane normals
        c: (n,) center
        z: (m,) offsets
    """

    def __init__(self, A, c, z):
        self.A = np.atleast_2d(np.asarray(A, dtype=float))
        self.c = np.asarray(c, dtype=float).ravel()
        self.z = np.asarray(z, dtype=float).ravel()
        m, n = self.A.shape
        if self.c.size != n or self.z.size != m:
            raise ContractViolation(
                f"polytope dimensions disagree: A {self.A.shape}, c {self.c.size}, z {self.z.size}")
        self._vertices: Optional[np.ndarray] = None

    def __repr__(self) -> str:
        return f"Polytope(m={self.m}, n={self.n}, c={np.round(self.c, 6).tolist()})"

    @property
    def n(self) -> int:
        return self.A.shape[1]

    @property
    def m(self) -> int:
        return self.A.shape[0]

    @property
    def b(self) -> np.ndarray:
        """Right-hand side of the plain form A x <= b."""
        return self.A @ self.c + self.z

    @property
    def eta(self) -> SimilarityParam:
        return SimilarityParam(self.c, 1.0)

    @property
    def vertices(self) -> np.ndarray:
        return enumerate_vertices(self)

    def h_value(self, x) -> float:
        return h_value(self, x)

    def contains(self, x, tol: float = ABS_TOL) -> bool:
        return h_value(self, x) >= -tol

    def base(self) -> "Polytope":
        """Same shape centered at the origin."""
        return Polytope(self.A, np.zeros(self.n), self.z)

    def reflected(self) -> "Polytope":
        """{-x | x in P}: the truth set seen along the reversed edge."""
        out = Polytope(-self.A, -self.c, self.z)
        if self._vertices is not None:
            out._vertices = -self._vertices
        return out

    def translated(self, d) -> "Polytope":
        return Polytope(self.A, self.c + np.asarray(d, dtype=float), self.z)

    def scaled_about_center(self, alpha: float) -> "Polytope":
        if alpha < 0:
            raise ContractViolation(f"scale must be nonnegative, got {alpha}")
        return Polytope(self.A, self.c, alpha * self.z)

    def similar(self, eta: SimilarityParam) -> "Polytope":
        """P(A, eta.center, eta.scale * z)."""
        return Polytope(self.A, eta.center, eta.scale * self.z)

    def is_empty(self) -> bool:
        res = _linprog(np.zeros(self.n), A_ub=self.A, b_ub=self.b)
        return res.status == 2

    def check_bounded(self) -> None:
        """Raise BoundednessError when some coordinate direction is unbounded."""
        for i in range(self.n):
            for sign in (1.0, -1.0):
                cost = np.zeros(self.n)
                cost[i] = -sign
                res = _linprog(cost, A_ub=self.A, b_ub=self.b)
                if res.status == 3:
                    raise BoundednessError(
                        f"polytope is unbounded along {'+' if sign > 0 else '-'}x{i}",
                        {"A": self.A.tolist(), "z": self.z.tolist()})

    def chebyshev_center(self):
        """Center and radius of the largest inscribed ball (radius < 0 when empty)."""
        res = common_point([self])
        return res.witness, res.margin

    def bounding_box(self):
        V = self.vertices
        return V.min(axis=0), V.max(axis=0)

    def to_dict(self) -> Dict[str, Any]:
        return {"A": self.A.tolist(), "c": self.c.tolist(), "z": self.z.tolist()}

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> "Polytope":
        return cls(data["A"], data["c"], data["z"])


class GeneratorMatrix:
    """Blocks G_k = [I_n | v_k], one per vertex v_k of a base shape."""

    def __init__(self, base_vertices):
        V = np.atleast_2d(np.asarray(base_vertices, dtype=float))
        self.vertices = V
        n = V.shape[1]
        self.blocks = [np.hstack([np.eye(n), v[:, None]]) for v in V]

    @classmethod
    def from_polytope(cls, P: Polytope) -> "GeneratorMatrix":
        return cls(P.base().vertices)

    def __len__(self) -> int:
        return len(self.blocks)

    @property
    def n(self) -> int:
        return self.vertices.shape[1]

    def stacked(self) -> np.ndarray:
        """All blocks stacked vertically, shape (K n, n + 1)."""
        return np.vstack(self.blocks)


# ============================================================================
# OPERATIONS
# ============================================================================


def h_value(P: Polytope, x) -> float:
    """min over rows of -(A (x - c) - z); nonnegative exactly on P."""
    x = np.asarray(x, dtype=float).ravel()
    if x.size != P.n:
        raise ContractViolation(f"point has dimension {x.size}, polytope has {P.n}")
    return float(np.min(P.z - P.A @ (x - P.c)))


def enumerate_vertices(P: Polytope) -> np.ndarray:
    """
    Vertex set of a bounded polytope by exhaustive n-subset hyperplane
    intersection, feasibility filtered and de-duplicated.

    Returns:
        (K, n) array; the result is cached on P.
    """
    if P._vertices is not None:
        return P._vertices.copy()
    n = P.n
    if n < 1 or n > 3:
        raise ContractViolation(f"vertex enumeration supports dimensions 1 to 3, got {n}")
    P.check_bounded()
    if P.is_empty():
        raise EmptyPolytopeError("polytope has no feasible point",
                                 {"A": P.A.tolist(), "c": P.c.tolist(), "z": P.z.tolist()})

    b = P.b
    slack_tol = 1e-9 * (1.0 + np.abs(b))
    found: List[np.ndarray] = []
    for rows in itertools.combinations(range(P.m), n):
        sub = P.A[list(rows)]
        if abs(np.linalg.det(sub)) < 1e-12:
            continue
        v = np.linalg.solve(sub, b[list(rows)])
        if np.any(P.A @ v - b > slack_tol):
            continue
        if any(np.all(np.abs(v - w) <= VERTEX_TOL) for w in found):
            continue
        found.append(v)
    if not found:
        raise EmptyPolytopeError("no vertex found", {"m": P.m, "n": n})
    P._vertices = np.array(found)
    return P._vertices.copy()


def apply_similarity(G: GeneratorMatrix, eta) -> np.ndarray:
    """Vertices {G_k eta} = {scale * v_k + center}."""
    if not isinstance(eta, SimilarityParam):
        eta = SimilarityParam.from_vector(eta)
    if eta.center.size != G.n:
        raise ContractViolation(f"eta center has dimension {eta.center.size}, generator has {G.n}")
    vec = eta.vector
    return np.array([Gk @ vec for Gk in G.blocks])


def minkowski_sum_similar(base: Polytope, etas: Sequence[SimilarityParam]) -> Polytope:
    """Sum of similar polytopes: P(A, sum of centers, (sum of scales) z)."""
    if len(etas) == 0:
        raise EmptySumError("Minkowski sum over an empty list")
    if np.any(np.abs(base.c) > VERTEX_TOL):
        raise ContractViolation("base shape must be centered at the origin")
    center = np.sum([e.center for e in etas], axis=0)
    scale = float(sum(e.scale for e in etas))
    out = Polytope(base.A, center, scale * base.z)
    if base._vertices is not None and scale > 0:
        G = GeneratorMatrix(base._vertices)
        out._vertices = np.sum([apply_similarity(G, e) for e in etas], axis=0)
    return out


def inclusion_blocks(A1, z1, A2, z2, base_vertices=None):
    """
    Matrices (M, Z) of the linear inclusion test
        P(A1, c1, a1 z1) subset of P(A2, c2, a2 z2)  iff  M eta1 - Z eta2 <= 0

    M stacks A2 G_k over the vertices v_k of P(A1, 0, z1); Z repeats [A2 | z2]
    once per vertex.
    """
    A2 = np.atleast_2d(np.asarray(A2, dtype=float))
    z2 = np.asarray(z2, dtype=float).ravel()
    if base_vertices is None:
        A1 = np.atleast_2d(np.asarray(A1, dtype=float))
        base_vertices = enumerate_vertices(Polytope(A1, np.zeros(A1.shape[1]), z1))
    G = GeneratorMatrix(base_vertices)
    M = np.vstack([A2 @ Gk for Gk in G.blocks])
    Z = np.tile(np.hstack([A2, z2[:, None]]), (len(G), 1))
    return M, Z


@dataclass
class InclusionResult:
    holds: bool
    residual: np.ndarray


def inclusion_check(P1: Polytope, P2: Polytope,
                    eta1: Optional[SimilarityParam] = None,
                    eta2: Optional[SimilarityParam] = None,
                    tol: float = ABS_TOL) -> InclusionResult:
    """
    Certificate for P(A1, c1, a1 z1) subset of P(A2, c2, a2 z2).

    Without explicit parameters each polytope is taken as is (eta = [c; 1]).
    """
    if P1.n != P2.n:
        raise ContractViolation(f"dimension mismatch: {P1.n} vs {P2.n}")
    eta1 = eta1 or P1.eta
    eta2 = eta2 or P2.eta
    M, Z = inclusion_blocks(P1.A, P1.z, P2.A, P2.z, P1.base().vertices)
    residual = M @ eta1.vector - Z @ eta2.vector
    return InclusionResult(holds=bool(np.max(residual) <= tol), residual=residual)


@dataclass
class IntersectionResult:
    feasible: bool
    witness: Optional[np.ndarray]
    margin: float


def common_point(polytopes: Sequence[Polytope], tol: float = ABS_TOL) -> IntersectionResult:
    """
    Deepest common point of several polytopes.

    Solves max s s.t. A_i xi + ||a_row|| s <= A_i c_i + z_i for every
    polytope; the sets meet iff s* >= -tol.
    """
    if not polytopes:
        raise ContractViolation("intersection of an empty family")
    n = polytopes[0].n
    if any(P.n != n for P in polytopes):
        raise ContractViolation("polytopes of different dimensions")
    A = np.vstack([P.A for P in polytopes])
    b = np.concatenate([P.b for P in polytopes])
    norms = np.linalg.norm(A, axis=1)
    A_ub = np.hstack([A, norms[:, None]])
    cost = np.zeros(n + 1)
    cost[-1] = -1.0
    res = _linprog(cost, A_ub=A_ub, b_ub=b)
    if res.status == 3:
        feas = _linprog(np.zeros(n), A_ub=A, b_ub=b)
        return IntersectionResult(True, feas.x, np.inf)
    if res.status != 0:
        logger.debug("intersection LP ended with status %d: %s", res.status, res.message)
        return IntersectionResult(False, None, -np.inf)
    margin = float(res.x[-1])
    if margin < -tol:
        return IntersectionResult(False, None, margin)
    return IntersectionResult(True, res.x[:n], margin)


def intersection_feasible(P1: Polytope, P2: Polytope, tol: float = ABS_TOL) -> IntersectionResult:
    """Whether two polytopes meet, with a witness point xi in both."""
    return common_point([P1, P2], tol)


def regular_polytope(n_sides: int, beta: float, center=(0.0, 0.0)) -> Polytope:
    """Planar regular polygon whose sides lie at distance beta from the center."""
    if n_sides < 3:
        raise ContractViolation(f"a polygon needs at least 3 sides, got {n_sides}")
    if beta <= 0:
        raise ContractViolation(f"beta must be positive, got {beta}")
    center = np.asarray(center, dtype=float).ravel()
    if center.size != 2:
        raise ContractViolation("regular polygons are planar")
    angles = 2.0 * np.pi * np.arange(n_sides) / n_sides
    A = np.column_stack([np.cos(angles), np.sin(angles)])
    return Polytope(A, center, np.full(n_sides, float(beta)))


def point_in_hull(points, x, tol: float = ABS_TOL) -> bool:
    """Whether x is a convex combination of the given points."""
    V = np.atleast_2d(np.asarray(points, dtype=float))
    x = np.asarray(x, dtype=float).ravel()
    k = V.shape[0]
    A_eq = np.vstack([V.T, np.ones((1, k))])
    b_eq = np.concatenate([x, [1.0]])
    res = _linprog(np.zeros(k), A_eq=A_eq, b_eq=b_eq, bounds=(0, None))
    if res.status != 0:
        return False
    return bool(np.max(np.abs(A_eq @ res.x - b_eq)) <= tol)


def origin_in_minkowski_sum(vertex_sets: Iterable) -> bool:
    """
    Whether 0 lies in the Minkowski sum of the convex hulls of the vertex sets:
    one vector of convex weights per summand with sum_k sum_j w_kj v_kj = 0.
    """
    sets = [np.atleast_2d(np.asarray(V, dtype=float)) for V in vertex_sets]
    if not sets:
        raise EmptySumError("Minkowski sum over an empty list")
    n = sets[0].shape[1]
    total = sum(V.shape[0] for V in sets)
    A_eq = np.zeros((n + len(sets), total))
    col = 0
    for k, V in enumerate(sets):
        A_eq[:n, col:col + V.shape[0]] = V.T
        A_eq[n + k, col:col + V.shape[0]] = 1.0
        col += V.shape[0]
    b_eq = np.concatenate([np.zeros(n), np.ones(len(sets))])
    res = _linprog(np.zeros(total), A_eq=A_eq, b_eq=b_eq, bounds=(0, None))
    return res.status == 0


def min_norm_in_polytope(P: Polytope, S=None, settings=None) -> float:
    """
    min ||S e|| over e in P, solved as a small second-order cone program.

    S defaults to the identity (plain Euclidean distance to the origin).
    """
    n = P.n
    S = np.eye(n) if S is None else np.atleast_2d(np.asarray(S, dtype=float))
    cost = np.zeros(n + 1)
    cost[-1] = 1.0
    prog = conic.ConicProgram(cost)
    prog.add_linear(np.hstack([P.A, np.zeros((P.m, 1))]), P.b)
    prog.add_cone(np.hstack([S, np.zeros((S.shape[0], 1))]),
                  d=np.concatenate([np.zeros(n), [1.0]]))
    x0 = None
    center, radius = P.chebyshev_center()
    if center is not None:
        x0 = np.concatenate([center, [np.linalg.norm(S @ center) + 1.0]])
    result = conic.solve(prog, settings, x0=x0)
    if result.x is None:
        raise EmptyPolytopeError("polytope has no feasible point")
    return float(np.linalg.norm(S @ result.x[:n]))

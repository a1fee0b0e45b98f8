"""
EMBEDDED CONIC SOLVER
Log-barrier interior-point method for small second-order cone programs

    minimize    c^T x
    subject to  G x <= h
                ||F_k x + g_k|| <= d_k^T x + e_k        k = 1..K

Strict feasibility is found with a phase-I program over (x, s); cones of the
same inner dimension are stacked into blocks so that every barrier evaluation
is a handful of dense numpy operations.

Usage:
    prog = ConicProgram(c=np.array([1.0, 1.0]))
    prog.add_linear(-np.eye(2), np.zeros(2))
    prog.add_cone(np.eye(2), g=np.zeros(2), e=1.0)
    result = solve(prog)
"""

import logging
from dataclasses import dataclass, field
from typing import Callable, Dict, List, Optional, Tuple

import numpy as np
import scipy.linalg

from .config import ConicSettings
from .errors import ContractViolation, SolverError

logger = logging.getLogger(__name__)

OPTIMAL = "Optimal"
INFEASIBLE = "Infeasible"
ITER_LIMIT = "IterLimit"

# ============================================================================
# PROGRAM DATA
# ============================================================================


@dataclass
class ConeBlock:
    """K second-order cones sharing the inner dimension p."""
    F: np.ndarray   # (K, p, n)
    g: np.ndarray   # (K, p)
    d: np.ndarray   # (K, n)
    e: np.ndarray   # (K,)

    @property
    def size(self) -> int:
        return self.F.shape[0]

    def evaluate(self, x: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
        u = self.d @ x + self.e
        w = np.einsum("kpn,n->kp", self.F, x) + self.g
        return u, w


class ConicProgram:
    """
    Container for a linear-objective program with linear and
    second-order-cone constraints.

    Args:
        c: objective vector (minimized)
    """

    def __init__(self, c: np.ndarray):
        self.c = np.asarray(c, dtype=float).ravel()
        n = self.c.size
        self.G = np.zeros((0, n))
        self.h = np.zeros(0)
        self._cones: Dict[int, List[Tuple[np.ndarray, np.ndarray, np.ndarray, float]]] = {}
        self._blocks: Optional[List[ConeBlock]] = None

    @property
    def n(self) -> int:
        return self.c.size

    @property
    def num_linear(self) -> int:
        return self.h.size

    @property
    def num_cones(self) -> int:
        return sum(len(v) for v in self._cones.values())

    def add_linear(self, G: np.ndarray, h: np.ndarray) -> slice:
        """Append rows G x <= h; returns the row slice they occupy."""
        G = np.atleast_2d(np.asarray(G, dtype=float))
        h = np.atleast_1d(np.asarray(h, dtype=float)).ravel()
        if G.shape[0] == 0:
            return slice(self.num_linear, self.num_linear)
        if G.shape != (h.size, self.n):
            raise ContractViolation(
                f"linear block shape {G.shape} does not match ({h.size}, {self.n})")
        start = self.num_linear
        self.G = np.vstack([self.G, G])
        self.h = np.concatenate([self.h, h])
        return slice(start, self.num_linear)

    def add_cone(self, F: np.ndarray, g: Optional[np.ndarray] = None,
                 d: Optional[np.ndarray] = None, e: float = 0.0) -> None:
        """Append ||F x + g|| <= d^T x + e."""
        F = np.atleast_2d(np.asarray(F, dtype=float))
        if F.shape[1] != self.n:
            raise ContractViolation(f"cone has {F.shape[1]} columns, program has {self.n}")
        p = F.shape[0]
        g = np.zeros(p) if g is None else np.asarray(g, dtype=float).ravel()
        d = np.zeros(self.n) if d is None else np.asarray(d, dtype=float).ravel()
        self._cones.setdefault(p, []).append((F, g, d, float(e)))
        self._blocks = None

    def cone_blocks(self) -> List[ConeBlock]:
        if self._blocks is None:
            blocks = []
            for p in sorted(self._cones):
                items = self._cones[p]
                blocks.append(ConeBlock(
                    F=np.stack([it[0] for it in items]),
                    g=np.stack([it[1] for it in items]),
                    d=np.stack([it[2] for it in items]),
                    e=np.array([it[3] for it in items]),
                ))
            self._blocks = blocks
        return self._blocks

    def barrier_degree(self) -> int:
        return self.num_linear + 2 * self.num_cones

    def violation(self, x: np.ndarray) -> float:
        """Largest constraint violation (negative when strictly feasible)."""
        worst = -np.inf
        if self.num_linear:
            worst = max(worst, float(np.max(self.G @ x - self.h)))
        for blk in self.cone_blocks():
            u, w = blk.evaluate(x)
            worst = max(worst, float(np.max(np.linalg.norm(w, axis=1) - u)))
        return worst

    def relaxed(self, delta: float) -> "ConicProgram":
        """Copy with every constraint loosened by delta."""
        out = ConicProgram(self.c)
        out.add_linear(self.G, self.h + delta)
        for p, items in self._cones.items():
            for F, g, d, e in items:
                out.add_cone(F, g, d, e + delta)
        return out


@dataclass
class ConicResult:
    """Outcome of one conic solve."""
    status: str
    x: Optional[np.ndarray]
    objective: float
    lin_duals: Optional[np.ndarray]
    gap: float
    newton_steps: int
    violation: float
    diagnostics: Dict = field(default_factory=dict)

    @property
    def optimal(self) -> bool:
        return self.status == OPTIMAL


# ============================================================================
# BARRIER
# ============================================================================


def _barrier_value(prog: ConicProgram, x: np.ndarray) -> float:
    """Barrier value, +inf outside the strict interior."""
    val = 0.0
    if prog.num_linear:
        s = prog.h - prog.G @ x
        if np.any(s <= 0):
            return np.inf
        val -= np.sum(np.log(s))
    for blk in prog.cone_blocks():
        u, w = blk.evaluate(x)
        r = u * u - np.einsum("kp,kp->k", w, w)
        if np.any(u <= 0) or np.any(r <= 0):
            return np.inf
        val -= np.sum(np.log(r))
    return val


def _barrier_derivatives(prog: ConicProgram, x: np.ndarray) -> Tuple[float, np.ndarray, np.ndarray]:
    n = prog.n
    val = 0.0
    grad = np.zeros(n)
    hess = np.zeros((n, n))
    if prog.num_linear:
        s = prog.h - prog.G @ x
        inv = 1.0 / s
        val -= np.sum(np.log(s))
        grad += prog.G.T @ inv
        Gs = prog.G * inv[:, None]
        hess += Gs.T @ Gs
    for blk in prog.cone_blocks():
        u, w = blk.evaluate(x)
        r = u * u - np.einsum("kp,kp->k", w, w)
        val -= np.sum(np.log(r))
        q = 2.0 * u[:, None] * blk.d - 2.0 * np.einsum("kpn,kp->kn", blk.F, w)
        grad -= np.sum(q / r[:, None], axis=0)
        root = np.sqrt(1.0 / r)
        Fs = (blk.F * root[:, None, None]).reshape(-1, n)
        ds = blk.d * root[:, None]
        qs = q / r[:, None]
        hess += 2.0 * (Fs.T @ Fs) - 2.0 * (ds.T @ ds) + qs.T @ qs
    return val, grad, hess


def _newton_direction(hess: np.ndarray, grad: np.ndarray) -> np.ndarray:
    n = grad.size
    reg = 1e-12 * np.eye(n)
    try:
        factor = scipy.linalg.cho_factor(hess + reg, check_finite=False)
        return -scipy.linalg.cho_solve(factor, grad, check_finite=False)
    except np.linalg.LinAlgError:
        return -np.linalg.lstsq(hess + reg, grad, rcond=None)[0]


def _center(prog: ConicProgram, x: np.ndarray, t: float,
            settings: ConicSettings) -> Tuple[np.ndarray, int]:
    """Damped Newton minimization of t c^T x + barrier(x)."""
    steps = 0
    for _ in range(settings.max_newton):
        val, grad, hess = _barrier_derivatives(prog, x)
        g = t * prog.c + grad
        dx = _newton_direction(hess, g)
        slope = float(g @ dx)
        if -slope / 2.0 <= settings.newton_tol:
            break
        if slope >= 0:
            logger.debug("newton direction is not a descent direction (slope %.3e)", slope)
            break
        step = 1.0
        accepted = False
        while step > 1e-14:
            xn = x + step * dx
            vn = _barrier_value(prog, xn)
            if np.isfinite(vn):
                decrease = t * float(prog.c @ (step * dx)) + (vn - val)
                if decrease <= settings.line_search_alpha * step * slope:
                    accepted = True
                    break
            step *= settings.line_search_beta
        steps += 1
        if not accepted:
            break
        x = xn
    return x, steps


def _barrier_method(prog: ConicProgram, x: np.ndarray, settings: ConicSettings,
                    stop: Optional[Callable[[np.ndarray], bool]] = None):
    m_bar = prog.barrier_degree()
    if m_bar == 0:
        if np.any(prog.c != 0):
            raise SolverError("unconstrained program with nonzero objective is unbounded")
        return x, np.inf, 0, OPTIMAL
    t = settings.t0
    newton = 0
    for outer in range(settings.max_outer):
        x, steps = _center(prog, x, t, settings)
        newton += steps
        logger.debug("barrier t=%.3e gap=%.3e objective=%.9g", t, m_bar / t, prog.c @ x)
        if stop is not None and stop(x):
            return x, t, newton, "stopped"
        if m_bar / t < settings.gap_tol:
            return x, t, newton, OPTIMAL
        t *= settings.mu
    return x, t, newton, ITER_LIMIT


# ============================================================================
# PHASE I
# ============================================================================


def find_interior_point(prog: ConicProgram, settings: Optional[ConicSettings] = None,
                        x0: Optional[np.ndarray] = None) -> Tuple[Optional[np.ndarray], float]:
    """
    Search a strictly feasible point.

    Returns:
        (x, relax): x strictly feasible for the program loosened by relax
        (relax is 0 when a genuine interior point exists), or (None, s*) with
        s* > 0 the smallest uniform loosening that would make it feasible.
    """
    settings = settings or ConicSettings()
    n = prog.n
    x0 = np.zeros(n) if x0 is None else np.asarray(x0, dtype=float).copy()
    viol = prog.violation(x0)
    if viol < 0:
        return x0, 0.0

    aux = ConicProgram(np.concatenate([np.zeros(n), [1.0]]))
    if prog.num_linear:
        aux.add_linear(np.hstack([prog.G, -np.ones((prog.num_linear, 1))]), prog.h)
    aux.add_linear(np.concatenate([np.zeros(n), [-1.0]])[None, :], np.array([1.0]))
    for p, items in prog._cones.items():
        for F, g, d, e in items:
            aux.add_cone(np.hstack([F, np.zeros((p, 1))]), g, np.concatenate([d, [1.0]]), e)
    radius = 1e6 * (1.0 + np.linalg.norm(x0))
    aux.add_cone(np.hstack([np.eye(n), np.zeros((n, 1))]), -x0, None, radius)

    y0 = np.concatenate([x0, [viol + 1.0]])
    y, _, _, status = _barrier_method(aux, y0, settings, stop=lambda y: y[-1] < 0)
    s_final = float(y[-1])
    x = y[:n]
    if s_final < 0:
        return x, 0.0
    if s_final <= settings.feas_tol:
        logger.warning("program has no strict interior; relaxing constraints by %.2e",
                       s_final + settings.feas_tol)
        return x, s_final + settings.feas_tol
    logger.debug("phase I ended with s=%.3e (%s)", s_final, status)
    return None, s_final


# ============================================================================
# SOLVE
# ============================================================================


def solve(prog: ConicProgram, settings: Optional[ConicSettings] = None,
          x0: Optional[np.ndarray] = None, interior: bool = False) -> ConicResult:
    """
    Solve a conic program.

    Args:
        prog: program data
        settings: barrier knobs
        x0: starting point (phase I starts here when it is not interior)
        interior: promise that x0 is strictly feasible, skipping phase I

    Returns:
        ConicResult; status Infeasible when phase I certifies that no point
        satisfies the constraints within feas_tol
    """
    settings = settings or ConicSettings()
    if interior and x0 is not None:
        x, relax = np.asarray(x0, dtype=float), 0.0
    else:
        x, relax = find_interior_point(prog, settings, x0)
    if x is None:
        return ConicResult(status=INFEASIBLE, x=None, objective=np.inf, lin_duals=None,
                           gap=np.inf, newton_steps=0, violation=relax,
                           diagnostics={"phase1_min_violation": relax})
    work = prog.relaxed(relax) if relax > 0 else prog
    if not np.isfinite(_barrier_value(work, x)):
        raise SolverError("starting point is not strictly feasible",
                          {"violation": work.violation(x)})

    x, t, newton, status = _barrier_method(work, x, settings)
    if not np.all(np.isfinite(x)):
        raise SolverError("barrier iterates left the finite range", {"t": t})
    duals = None
    if work.num_linear:
        duals = 1.0 / (t * (work.h - work.G @ x)) if np.isfinite(t) else np.zeros(work.num_linear)
    gap = work.barrier_degree() / t if np.isfinite(t) else 0.0
    return ConicResult(
        status=status,
        x=x,
        objective=float(prog.c @ x),
        lin_duals=duals,
        gap=gap,
        newton_steps=newton,
        violation=prog.violation(x),
        diagnostics={"relax": relax, "t": t},
    )

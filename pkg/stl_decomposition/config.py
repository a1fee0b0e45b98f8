"""
Configuration records and numerical tolerances.

All records are plain dataclasses that round-trip through dictionaries so that
scenario files and result directories can carry them verbatim.
"""

from dataclasses import asdict, dataclass, field, fields
from typing import Any, Dict, Optional

# ============================================================================
# TOLERANCES
# ============================================================================

ABS_TOL = 1e-7          # inclusion, intersection and membership tests
VERTEX_TOL = 1e-9       # vertex de-duplication, absolute per coordinate
INTERVAL_TOL = 1e-9     # closed-interval comparisons
MAX_ALWAYS_TASKS = 15   # power-set enumeration cap per edge

MODES = ("centralized", "decentralized")


def _known(cls, data: Dict[str, Any]) -> Dict[str, Any]:
    names = {f.name for f in fields(cls)}
    unknown = sorted(set(data) - names)
    if unknown:
        raise KeyError(f"unknown {cls.__name__} fields: {', '.join(unknown)}")
    return dict(data)


@dataclass
class ConicSettings:
    """Knobs of the embedded barrier interior-point method."""
    gap_tol: float = 1e-8
    feas_tol: float = 1e-8
    mu: float = 15.0
    t0: float = 1.0
    max_outer: int = 60
    max_newton: int = 80
    newton_tol: float = 1e-10
    line_search_alpha: float = 0.01
    line_search_beta: float = 0.5

    def to_dict(self) -> Dict[str, Any]:
        return asdict(self)

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> "ConicSettings":
        return cls(**_known(cls, data))


@dataclass
class SolverConfig:
    """
    Solve settings for one decomposition run.

    The step schedule of the decentralized loop is
    gamma_t = gamma0 / (1 + t) ** gamma_exponent, identical at every node.
    """
    mode: str = "centralized"
    max_iter: int = 3500
    gamma0: float = 1.0
    gamma_exponent: float = 0.75
    c_rho: float = 1e3
    rho_tol: float = 1e-6
    obj_tol: float = 1e-6
    window: int = 50
    divergence_window: int = 500
    xi_max: Optional[float] = None
    eta_max: Optional[float] = None
    workers: int = 1
    conic: ConicSettings = field(default_factory=ConicSettings)

    def __post_init__(self):
        if self.mode not in MODES:
            raise ValueError(f"mode must be one of {MODES}, got {self.mode!r}")
        if isinstance(self.conic, dict):
            self.conic = ConicSettings.from_dict(self.conic)

    def gamma(self, iteration: int) -> float:
        """Step size at a given iteration (0-based)."""
        return self.gamma0 / (1.0 + iteration) ** self.gamma_exponent

    def to_dict(self) -> Dict[str, Any]:
        return asdict(self)

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> "SolverConfig":
        return cls(**_known(cls, data))


@dataclass
class VerifyConfig:
    """Settings of the Monte-Carlo implication oracle."""
    samples: int = 10000
    seed: int = 0
    max_rejections: int = 10000
    refinement: int = 100

    def to_dict(self) -> Dict[str, Any]:
        return asdict(self)

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> "VerifyConfig":
        return cls(**_known(cls, data))

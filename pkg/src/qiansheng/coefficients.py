"""Material coefficients, admissibility gates and regime classification."""

from __future__ import annotations

import enum
from dataclasses import dataclass, field, fields

import numpy as np

from .errors import CoefficientError
from .tensor_core import _same_dim, frobenius, norm_sq

# Equality relations come from decimal config values and get this slack;
# strict inequalities are compared exactly.
EQ_TOL = 1e-12
PSD_TOL = 1e-12
MARGIN_TOL = 1e-10


@dataclass(frozen=True)
class MaterialCoefficients:
    a: float
    b: float
    c: float
    J: float
    L: float
    beta1: float
    beta4: float
    beta5: float
    beta6: float
    mu1: float
    mu2: float
    mu2_tilde: float

    @classmethod
    def names(cls) -> tuple[str, ...]:
        return tuple(f.name for f in fields(cls))

    @classmethod
    def from_mapping(cls, values) -> "MaterialCoefficients":
        missing = [n for n in cls.names() if n not in values]
        if missing:
            raise KeyError(f"missing coefficients: {', '.join(missing)}")
        return cls(**{n: float(values[n]) for n in cls.names()})

    def as_dict(self) -> dict[str, float]:
        return {n: getattr(self, n) for n in self.names()}

    def baseline_violations(self) -> list[str]:
        """Relations of the baseline admissibility set that fail."""
        checks = [
            ("a > 0", self.a > 0),
            ("J > 0", self.J > 0),
            ("L > 0", self.L > 0),
            ("beta1 >= 0", self.beta1 >= 0),
            ("beta4 > 0", self.beta4 > 0),
            ("mu1 > 0", self.mu1 > 0),
            ("beta6 - beta5 = mu2 (Parodi)", check_parodi(self)),
        ]
        return [name for name, ok in checks if not ok]

    def validate(self) -> "MaterialCoefficients":
        bad = self.baseline_violations()
        if bad:
            raise CoefficientError(
                "baseline admissibility",
                "violated " + "; ".join(bad) + f" for {self.as_dict()}",
            )
        return self


class Capability(str, enum.Enum):
    LARGE_DATA_LOCAL = "LargeDataLocal"
    SMALL_DATA_LOCAL = "SmallDataLocal"
    GLOBAL_SMALL_DATA = "GlobalSmallData"
    TORUS_DECAY = "TorusDecay"


@dataclass(frozen=True)
class RegimeReport:
    parodi_ok: bool
    entropy_ok: bool
    condition_h_ok: bool
    mu2_equal: bool
    symmetric_viscosity_zero: bool
    delta0: float | None
    delta1: float | None
    capabilities: frozenset = field(default_factory=frozenset)

    @property
    def delta_h(self) -> int:
        """0 when the strengthened coercivity condition holds, else 1."""
        return 0 if self.condition_h_ok else 1


def check_parodi(c: MaterialCoefficients) -> bool:
    return abs(c.beta6 - c.beta5 - c.mu2) <= EQ_TOL


def entropy_gap(c: MaterialCoefficients) -> float:
    """``8 beta4 mu1 - (mu2~ - mu2)^2``; positive inside the entropy region."""
    return 8.0 * c.beta4 * c.mu1 - (c.mu2_tilde - c.mu2) ** 2


def condition_h_gap(c: MaterialCoefficients) -> float:
    """``8 beta4 mu1 - (mu2~ - mu2)^2 - 4 mu2^2``; positive where the strengthened condition holds."""
    return 8.0 * c.beta4 * c.mu1 - (c.mu2_tilde - c.mu2) ** 2 - 4.0 * c.mu2**2


def check_entropy(c: MaterialCoefficients) -> bool:
    """Coefficient set for which the viscous entropy production is nonnegative."""
    return (c.beta1 >= 0 and c.beta4 > 0 and c.mu1 > 0
            and abs(c.beta5 + c.beta6) <= EQ_TOL
            and (c.mu2_tilde - c.mu2) ** 2 < 8.0 * c.beta4 * c.mu1)


def check_condition_h(c: MaterialCoefficients) -> bool:
    """Strict ``(mu2~ - mu2)^2 + 4 mu2^2 < 8 beta4 mu1``."""
    return (c.mu2_tilde - c.mu2) ** 2 + 4.0 * c.mu2**2 < 8.0 * c.beta4 * c.mu1


def quadratic_form_F(x, y, z, c: MaterialCoefficients) -> float:
    """Dissipation form ``F(X, Y, Z)`` controlling the energy decay."""
    x, y, z = (np.asarray(v, dtype=float) for v in (x, y, z))
    _same_dim(x, y)
    _same_dim(x, z)
    return (0.5 * c.beta4 * norm_sq(x)
            + c.mu1 * (norm_sq(y) + norm_sq(z))
            - 0.5 * (c.mu2_tilde - c.mu2) * frobenius(x, y)
            - c.mu2 * frobenius(x, z))


def hessian_matrix(c: MaterialCoefficients, delta0: float, delta1: float) -> np.ndarray:
    half = 0.5 * (c.mu2_tilde - c.mu2)
    return np.array([
        [(1.0 - delta0) * c.beta4, -half, -c.mu2],
        [-half, 2.0 * c.mu1 * (1.0 - delta1), 0.0],
        [-c.mu2, 0.0, 2.0 * c.mu1],
    ])


def hessian_psd(c: MaterialCoefficients, delta0: float, delta1: float) -> bool:
    """Positive semidefiniteness of the shifted 3x3 Hessian of ``F``."""
    for name, v in (("delta0", delta0), ("delta1", delta1)):
        if not 0.0 <= v <= 1.0:
            raise ValueError(f"{name}={v!r} outside [0, 1]")
    eig = np.linalg.eigvalsh(hessian_matrix(c, delta0, delta1))
    return bool(eig[0] >= -PSD_TOL)


def coercivity_margins(c: MaterialCoefficients) -> tuple[float, float] | None:
    """Largest common ``delta0 = delta1`` in (0, 1] keeping the Hessian PSD.

    Returns ``None`` when the strengthened condition fails.
    """
    if not check_condition_h(c):
        return None
    if hessian_psd(c, 1.0, 1.0):
        return 1.0, 1.0
    lo, hi = 0.0, 1.0
    while hi - lo > MARGIN_TOL:
        mid = 0.5 * (lo + hi)
        if hessian_psd(c, mid, mid):
            lo = mid
        else:
            hi = mid
    if lo <= 0.0:
        return None
    return lo, lo


def classify_regime(c: MaterialCoefficients) -> RegimeReport:
    """Evaluate every gate and derive the well-posedness capabilities.

    Torus decay is granted under the same hypotheses as global small-data
    existence, since the decay statement concerns that global solution.
    """
    c.validate()
    sym_zero = abs(c.beta5 + c.beta6) <= EQ_TOL
    ch = check_condition_h(c)
    mu2_equal = abs(c.mu2_tilde - c.mu2) <= EQ_TOL
    h_strict = (c.mu2_tilde - c.mu2) ** 2 < 8.0 * c.beta4 * c.mu1
    margins = coercivity_margins(c)

    caps = {Capability.SMALL_DATA_LOCAL}
    if sym_zero and ch:
        caps.add(Capability.LARGE_DATA_LOCAL)
    if h_strict or mu2_equal:
        caps.add(Capability.GLOBAL_SMALL_DATA)
        caps.add(Capability.TORUS_DECAY)

    return RegimeReport(
        parodi_ok=check_parodi(c),
        entropy_ok=check_entropy(c),
        condition_h_ok=ch,
        mu2_equal=mu2_equal,
        symmetric_viscosity_zero=sym_zero,
        delta0=None if margins is None else margins[0],
        delta1=None if margins is None else margins[1],
        capabilities=frozenset(caps),
    )


def gate_table(c: MaterialCoefficients) -> list[tuple[str, float, float, bool]]:
    """Rows ``(gate, lhs, rhs, passed)`` for human-readable reports."""
    d_mu = (c.mu2_tilde - c.mu2) ** 2
    rows = [
        ("a > 0", c.a, 0.0, c.a > 0),
        ("J > 0", c.J, 0.0, c.J > 0),
        ("L > 0", c.L, 0.0, c.L > 0),
        ("beta1 >= 0", c.beta1, 0.0, c.beta1 >= 0),
        ("beta4 > 0", c.beta4, 0.0, c.beta4 > 0),
        ("mu1 > 0", c.mu1, 0.0, c.mu1 > 0),
        ("beta6 - beta5 = mu2", c.beta6 - c.beta5, c.mu2, check_parodi(c)),
        ("beta5 + beta6 = 0", c.beta5 + c.beta6, 0.0, abs(c.beta5 + c.beta6) <= EQ_TOL),
        ("(mu2~-mu2)^2 < 8 beta4 mu1", d_mu, 8.0 * c.beta4 * c.mu1,
         d_mu < 8.0 * c.beta4 * c.mu1),
        ("(mu2~-mu2)^2 + 4 mu2^2 < 8 beta4 mu1", d_mu + 4.0 * c.mu2**2,
         8.0 * c.beta4 * c.mu1, check_condition_h(c)),
        ("mu2~ = mu2 (special case, optional)", c.mu2_tilde, c.mu2, abs(c.mu2_tilde - c.mu2) <= EQ_TOL),
    ]
    return rows

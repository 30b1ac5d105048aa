"""Energy-type functionals, entropy production and decay-rate fitting.

All Sobolev norms follow the grid convention in :mod:`qiansheng.spectral`:
sums over distinct multi-indices, no multinomial weights, L2 on [0, 2pi)^d.
``R`` (the material derivative of Q) plays the role of ``Qdot`` everywhere.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import tensor_core as tc
from .coefficients import MaterialCoefficients
from .dynamics import FlowState, constraint_drift, divergence_drift, strain_and_vorticity
from .spectral import multi_indices

CSV_COLUMNS = (
    "t", "E", "D_loc", "A", "E_eta", "D_glob", "entropy_total",
    "entropy_term1", "entropy_term2", "entropy_term3", "entropy_term4", "entropy_term5",
    "trace_drift", "symm_drift", "div_drift",
)


class _Spectra:
    """Forward transforms of a state, computed once per diagnostic call."""

    def __init__(self, state: FlowState):
        g = state.grid
        self.grid = g
        self.uh = g.forward(state.u)
        self.qh = g.forward(state.q)
        self.rh = g.forward(state.r)

    def norm(self, fh, s, homogeneous=False):
        return self.grid.norm_sq_hat(fh, s, homogeneous)

    def grad_norm(self, fh, s):
        return self.grid.norm_sq_hat(self.grid.gradient_hat(fh), s)


def energy(state: FlowState, c: MaterialCoefficients, s: int) -> float:
    """``||u||^2 + J ||R||^2 + L ||grad Q||^2 + a ||Q||^2`` in ``H^s``."""
    sp = _Spectra(state)
    return (sp.norm(sp.uh, s) + c.J * sp.norm(sp.rh, s)
            + c.L * sp.grad_norm(sp.qh, s) + c.a * sp.norm(sp.qh, s))


def _beta1_sum(state: FlowState, sp: _Spectra, s: int) -> float:
    g = state.grid
    gu = g.gradient_hat(sp.uh)
    ah = 0.5 * (gu + np.swapaxes(gu, 0, 1))
    total = 0.0
    for alpha in multi_indices(g.d, s):
        mult = np.ones(g.shape, dtype=complex)
        for ax, p in enumerate(alpha):
            if p:
                mult = mult * (1j * g.kd[ax]) ** p
        da = g.inverse(mult * ah)
        prod_h = g.forward(tc.frobenius(da, state.q)) * g.dealias_mask
        total += g.norm_sq_hat(prod_h, 0)
    return total


def dissipation_local(state: FlowState, c: MaterialCoefficients, s: int) -> float:
    """``||grad u||^2_{H^s} + ||R||^2_{H^s} + beta1 sum_alpha ||d^alpha A : Q||^2``."""
    sp = _Spectra(state)
    out = sp.grad_norm(sp.uh, s) + sp.norm(sp.rh, s)
    if c.beta1:
        out += c.beta1 * _beta1_sum(state, sp, s)
    return out


def functional_A(state: FlowState, s: int) -> float:
    sp = _Spectra(state)
    return (sp.norm(sp.uh, s, homogeneous=True) + sp.norm(sp.rh, s)
            + sp.grad_norm(sp.qh, s) + sp.norm(sp.qh, s))


def eta_upper_bound(c: MaterialCoefficients) -> float:
    """Computable part of the admissible range for the modified-energy weight."""
    return 0.5 * min(1.0, c.a / c.J)


def default_eta(c: MaterialCoefficients) -> float:
    return 0.25 * min(1.0, c.a / c.J)


def check_eta(c: MaterialCoefficients, eta: float) -> None:
    hi = eta_upper_bound(c)
    if not 0.0 < eta <= hi:
        raise ValueError(f"eta={eta!r} outside admissible range (0, {hi!r}]")


def modified_energy(state: FlowState, c: MaterialCoefficients, s: int, eta: float) -> float:
    """Energy with the ``Qdot + Q`` cross weight that exposes damping of Q."""
    check_eta(c, eta)
    sp = _Spectra(state)
    return (sp.norm(sp.uh, s) + c.J * (1.0 - eta) * sp.norm(sp.rh, s)
            + c.L * sp.grad_norm(sp.qh, s) + (c.a - c.J * eta) * sp.norm(sp.qh, s)
            + c.J * eta * sp.norm(sp.rh + sp.qh, s))


def equivalence_constants(c: MaterialCoefficients, eta: float) -> tuple[float, float]:
    """Term-wise ``C1, C2`` with ``C1 E <= E_eta <= C2 E``."""
    check_eta(c, eta)
    r = c.J * eta / c.a
    return min(1.0 - eta, 1.0 - r), 1.0 + max(eta, r)


def dissipation_global(state: FlowState, s: int) -> float:
    sp = _Spectra(state)
    return (sp.grad_norm(sp.uh, s) + sp.norm(sp.rh, s)
            + sp.grad_norm(sp.qh, s) + sp.norm(sp.qh, s))


@dataclass(frozen=True)
class EntropyProduction:
    total: float
    terms: tuple[float, float, float, float, float]


def entropy_production(state: FlowState, c: MaterialCoefficients) -> EntropyProduction:
    """Integrated viscous entropy production, split into its five terms."""
    g = state.grid
    A, omega = strain_and_vorticity(g, state.u)
    q = state.q
    n = state.r - tc.commutator(omega, q)
    grad_u = A + omega
    terms = (
        c.beta1 * g.integrate(tc.frobenius(q, A) ** 2),
        0.5 * c.beta4 * g.integrate(tc.norm_sq(grad_u)),
        (c.beta5 + c.beta6) * g.integrate(tc.trace(tc.matmul(q, tc.matmul(A, A)))),
        c.mu1 * g.integrate(tc.norm_sq(n)),
        0.5 * (c.mu2_tilde - c.mu2) * g.integrate(tc.frobenius(A, n)),
    )
    return EntropyProduction(math.fsum(terms), terms)


@dataclass(frozen=True)
class DiagnosticsRecord:
    t: float
    E: float
    D_loc: float
    A_func: float
    E_eta: float
    D_glob: float
    entropy_total: float
    entropy_terms: tuple[float, float, float, float, float]
    trace_drift: float
    symm_drift: float
    div_drift: float

    def row(self) -> tuple[float, ...]:
        return (self.t, self.E, self.D_loc, self.A_func, self.E_eta, self.D_glob,
                self.entropy_total, *self.entropy_terms,
                self.trace_drift, self.symm_drift, self.div_drift)


def record(state: FlowState, c: MaterialCoefficients, s: int, eta: float) -> DiagnosticsRecord:
    ent = entropy_production(state, c)
    tq, sq = constraint_drift(state.q)
    tr_, sr = constraint_drift(state.r)
    return DiagnosticsRecord(
        t=state.t,
        E=energy(state, c, s),
        D_loc=dissipation_local(state, c, s),
        A_func=functional_A(state, s),
        E_eta=modified_energy(state, c, s, eta),
        D_glob=dissipation_global(state, s),
        entropy_total=ent.total,
        entropy_terms=ent.terms,
        trace_drift=max(tq, tr_),
        symm_drift=max(sq, sr),
        div_drift=divergence_drift(state.grid, state.u),
    )


def accumulated_energy(records) -> list[float]:
    """Running ``E(t) + int_0^t D_loc`` by the trapezoid rule (reporting only)."""
    out, acc, prev = [], 0.0, None
    for rec in records:
        if prev is not None:
            acc += 0.5 * (rec.D_loc + prev.D_loc) * (rec.t - prev.t)
        out.append(rec.E + acc)
        prev = rec
    return out


# -- decay fitting -------------------------------------------------------------

@dataclass(frozen=True)
class DecayFit:
    c2: float
    c3: float
    r_squared: float
    window: tuple[float, float]
    degenerate: bool = False

    @property
    def decay_confirmed(self) -> bool:
        return self.c3 > 0 and not self.degenerate


def fit_decay(series, e_in: float | None = None,
              window: tuple[float, float] | None = None) -> DecayFit:
    """Least-squares fit of ``log v = log(c2 E_in) - c3 t``.

    ``series`` is a sequence of ``(t, v)`` pairs.  The default window is the
    second half of the time span.  ``e_in`` defaults to the first value.
    """
    data = np.asarray(list(series), dtype=float)
    if data.ndim != 2 or data.shape[0] < 10:
        raise ValueError("fit_decay needs at least 10 (t, value) samples")
    t, v = data[:, 0], data[:, 1]
    if window is None:
        window = (t[0] + 0.5 * (t[-1] - t[0]), t[-1])
    sel = (t >= window[0]) & (t <= window[1])
    tw, vw = t[sel], v[sel]
    if tw.size < 2:
        raise ValueError(f"window {window} holds fewer than two samples")
    if np.any(vw <= 0) or not np.all(np.isfinite(vw)):
        raise ValueError("decay fit requires strictly positive, finite values in the window")
    if e_in is None:
        e_in = v[0]
    if not e_in > 0:
        raise ValueError("initial energy must be positive for the prefactor")
    y = np.log(vw)
    slope, intercept = np.polyfit(tw, y, 1)
    resid = y - (slope * tw + intercept)
    ss_tot = float(np.sum((y - y.mean()) ** 2))
    ss_res = float(np.sum(resid**2))
    degenerate = ss_tot <= 1e-14 * max(1.0, float(np.sum(y**2)))
    if degenerate:
        r2 = 1.0 if ss_res <= 1e-14 * max(1.0, float(np.sum(y**2))) else 0.0
        slope = 0.0
        intercept = float(y.mean())
    else:
        r2 = min(1.0, max(0.0, 1.0 - ss_res / ss_tot))
    return DecayFit(
        c2=float(np.exp(intercept) / e_in),
        c3=float(-slope),
        r_squared=float(r2),
        window=(float(window[0]), float(window[1])),
        degenerate=bool(degenerate),
    )

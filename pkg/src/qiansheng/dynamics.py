"""Right-hand sides and time stepping for the mollified inertial Qian-Sheng system.

State variables are the velocity ``u``, the Q-tensor ``Q`` and its material
derivative ``R = Qdot``.  With ``Jeps`` the sharp Fourier cutoff (identity
when ``eps == 0``) and ``P`` the Leray projector, the evolved system is

    du/dt = -P Jeps(u.grad u) + beta4/2 lap u
            + P div( -L Jeps(gradQ (.) gradQ)
                     + beta1 Jeps(Q tr(QA)) + beta5 Jeps(AQ) + beta6 Jeps(QA)
                     + mu2/2 (R - Jeps[Omega, Q]) + mu1 Jeps[Q, R - [Omega, Q]] )
    dQ/dt = R - Jeps(u.grad Q)
    J dR/dt = -J Jeps(u.grad R) - mu1 R + L lap Q - a Q
              + b Jeps(QQ) - b tr(Jeps(QQ)) I/d - c Jeps(Q tr(QQ))
              + mu2~/2 A + mu1 Jeps[Omega, Q]

Every pointwise product is formed on the grid and truncated with the
two-thirds rule before any mollification.  Stress divergences use
``(div S)_i = d_j S_ij`` and ``(grad u)_ij = d_j u_i`` so that
``A + Omega = grad u``.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

from . import tensor_core as tc
from .coefficients import MaterialCoefficients
from .errors import BlowUpError, ConfigError
from .spectral import Grid

DRIFT_REPROJECT = 1e-8
DEFAULT_CFL = 0.4
# Absolute step bound; keeps the explicit terms and the diagnostics cadence
# resolved when the flow is (nearly) at rest and the CFL bounds degenerate.
MAX_DT = 0.05


@dataclass(frozen=True)
class FlowState:
    """Snapshot ``(t, u, Q, R)`` in physical space.

    ``u`` has shape ``(d, *grid)``, ``q`` and ``r`` have shape ``(d, d, *grid)``.
    ``eps == 0`` disables mollification (dealiasing still applies).
    """

    grid: Grid
    t: float
    u: np.ndarray
    q: np.ndarray
    r: np.ndarray
    eps: float = 0.0
    reprojections: int = field(default=0, compare=False)

    def scaled(self, lam: float) -> "FlowState":
        return replace(self, u=lam * self.u, q=lam * self.q, r=lam * self.r)

    def __sub__(self, other: "FlowState") -> "FlowState":
        return replace(self, u=self.u - other.u, q=self.q - other.q, r=self.r - other.r)


@dataclass(frozen=True)
class StressSet:
    sigma1: np.ndarray
    sigma2: np.ndarray
    sigma3: np.ndarray

    @property
    def total(self) -> np.ndarray:
        return self.sigma1 + self.sigma2 + self.sigma3


def zero_state(grid: Grid, eps: float = 0.0, t: float = 0.0) -> FlowState:
    d = grid.d
    return FlowState(grid, t, grid.zeros(d), grid.zeros(d, d), grid.zeros(d, d), eps)


# -- pointwise constitutive pieces ---------------------------------------------

def velocity_gradient(grid: Grid, u: np.ndarray) -> np.ndarray:
    """``G_ij = d_j u_i``."""
    return grid.inverse(grid.gradient_hat(grid.forward(u)))


def strain_and_vorticity(grid: Grid, u: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Symmetric and skew parts of ``d_j u_i``."""
    g = velocity_gradient(grid, u)
    gt = tc.transpose(g)
    return 0.5 * (g + gt), 0.5 * (g - gt)


def ericksen_stress(grid: Grid, q: np.ndarray, L: float) -> np.ndarray:
    """``-L sum_kl d_i Q_kl d_j Q_kl`` evaluated pointwise."""
    dq = grid.inverse(grid.gradient_hat(grid.forward(q)))
    return -L * np.einsum("kli...,klj...->ij...", dq, dq)


def viscous_stress(q: np.ndarray, A: np.ndarray, c: MaterialCoefficients) -> np.ndarray:
    """``beta1 Q tr(QA) + beta5 AQ + beta6 QA``."""
    return (c.beta1 * q * tc.frobenius(q, A)
            + c.beta5 * tc.matmul(A, q)
            + c.beta6 * tc.matmul(q, A))


def corotational_stress(q: np.ndarray, r: np.ndarray, omega: np.ndarray,
                        c: MaterialCoefficients) -> np.ndarray:
    """``mu2/2 N + mu1 [Q, N]`` with ``N = R - [Omega, Q]``."""
    n = r - tc.commutator(omega, q)
    return 0.5 * c.mu2 * n + c.mu1 * tc.commutator(q, n)


def stresses(grid: Grid, state: FlowState, c: MaterialCoefficients) -> StressSet:
    A, omega = strain_and_vorticity(grid, state.u)
    return StressSet(
        ericksen_stress(grid, state.q, c.L),
        viscous_stress(state.q, A, c),
        corotational_stress(state.q, state.r, omega, c),
    )


# -- spectral right-hand sides ------------------------------------------------

@dataclass
class _Terms:
    """Explicit right-hand sides in spectral space (linear implicit parts excluded)."""

    nu: np.ndarray
    nq: np.ndarray
    nr: np.ndarray


class Model:
    """Binds a grid, coefficients and mollifier parameter to the evolution operators."""

    def __init__(self, grid: Grid, coeffs: MaterialCoefficients, eps: float = 0.0):
        if eps < 0:
            raise ConfigError(f"eps must be >= 0, got {eps}")
        self.grid = grid
        self.c = coeffs
        self.eps = eps
        self.trunc = grid.dealias_mask
        self.moll = grid.mollify_mask(eps) if eps > 0 else None
        self._propagators: dict[float, tuple] = {}

    # spectral helpers
    def _product(self, f: np.ndarray) -> np.ndarray:
        """Forward transform of a grid product, two-thirds truncated."""
        return self.grid.forward(f) * self.trunc

    def _J(self, fh: np.ndarray) -> np.ndarray:
        return fh if self.moll is None else fh * self.moll

    def explicit_terms(self, uh: np.ndarray, qh: np.ndarray, rh: np.ndarray) -> _Terms:
        g, c, d = self.grid, self.c, self.grid.d
        inv = g.inverse

        u = inv(uh)
        q = inv(qh)
        r = inv(rh)
        grad_u = inv(g.gradient_hat(uh))          # [i, j] = d_j u_i
        grad_q = inv(g.gradient_hat(qh))          # [k, l, i] = d_i Q_kl
        grad_r = inv(g.gradient_hat(rh))
        grad_ut = tc.transpose(grad_u)
        A = 0.5 * (grad_u + grad_ut)
        omega = 0.5 * (grad_u - grad_ut)

        # velocity equation
        adv_u = self._J(self._product(np.einsum("ij...,j...->i...", grad_u, u)))
        sig = -c.L * self._J(self._product(np.einsum("kli...,klj...->ij...", grad_q, grad_q)))
        if c.beta1:
            sig = sig + c.beta1 * self._J(self._product(q * tc.frobenius(q, A)))
        if c.beta5:
            sig = sig + c.beta5 * self._J(self._product(tc.matmul(A, q)))
        if c.beta6:
            sig = sig + c.beta6 * self._J(self._product(tc.matmul(q, A)))
        om_q = tc.commutator(omega, q)
        om_q_h = self._J(self._product(om_q))
        sig = sig + 0.5 * c.mu2 * (rh - om_q_h)
        sig = sig + c.mu1 * self._J(self._product(tc.commutator(q, r - om_q)))
        nu = g.leray_hat(-adv_u + g.divergence_hat(sig))

        # Q-tensor equations
        nq = -self._J(self._product(np.einsum("i...,kli...->kl...", u, grad_q)))
        qq = self._J(self._product(tc.matmul(q, q)))
        tr_qq = tc.trace(qq)
        eye = tc.identity(d, qq)
        force = (c.b * (qq - eye * (tr_qq / d))
                 - c.c * self._J(self._product(q * tc.norm_sq(q)))
                 + 0.5 * c.mu2_tilde * g.forward(A)
                 + c.mu1 * om_q_h)
        nr = force / c.J - self._J(self._product(np.einsum("i...,kli...->kl...", u, grad_r)))
        return _Terms(nu, nq, nr)

    def linear_terms(self, uh, qh, rh):
        """Implicitly treated constant-coefficient parts, in spectral space."""
        c, g = self.c, self.grid
        lu = 0.5 * c.beta4 * g.laplacian_hat(uh)
        lq = rh
        lr = (-c.mu1 * rh + (c.L * g.laplacian_hat(qh) - c.a * qh)) / c.J
        return lu, lq, lr

    def rhs_hat(self, uh, qh, rh):
        n = self.explicit_terms(uh, qh, rh)
        lu, lq, lr = self.linear_terms(uh, qh, rh)
        return lu + n.nu, lq + n.nq, lr + n.nr

    # -- exact linear propagators -------------------------------------------

    def propagators(self, h: float):
        """Per-mode ``exp(h L)`` for the heat part and the damped (Q, R) oscillator."""
        if h in self._propagators:
            return self._propagators[h]
        if len(self._propagators) >= 4:
            self._propagators.clear()
        c, g = self.c, self.grid
        eu = np.exp(-0.5 * c.beta4 * g.ksq * h)
        w2 = (c.L * g.ksq + c.a) / c.J
        gam = c.mu1 / c.J
        # M = [[0, 1], [-w2, -gam]] = -gam/2 I + N with N^2 = disc I
        disc = 0.25 * gam**2 - w2
        z2 = disc * h * h
        x = np.sqrt(np.abs(z2))
        small = np.abs(z2) < 1e-6
        with np.errstate(invalid="ignore", divide="ignore"):
            ch = np.where(z2 >= 0, np.cosh(x), np.cos(x))
            shc = np.where(z2 >= 0, np.sinh(x), np.sin(x)) / np.where(x == 0, 1.0, x)
        ser_c = 1 + z2 / 2 + z2**2 / 24 + z2**3 / 720
        ser_s = 1 + z2 / 6 + z2**2 / 120 + z2**3 / 5040
        ch = np.where(small, ser_c, ch)
        shc = np.where(small, ser_s, shc) * h
        damp = np.exp(-0.5 * gam * h)
        e11 = damp * (ch + 0.5 * gam * shc)
        e12 = damp * shc
        e21 = -damp * w2 * shc
        e22 = damp * (ch - 0.5 * gam * shc)
        out = (eu, (e11, e12, e21, e22))
        self._propagators[h] = out
        return out

    def _apply(self, prop, uh, qh, rh):
        eu, (e11, e12, e21, e22) = prop
        return eu * uh, e11 * qh + e12 * rh, e21 * qh + e22 * rh

    def step_hat(self, uh, qh, rh, h: float):
        """Integrating-factor Heun step; linear parts exact, the rest second order."""
        prop = self.propagators(h)
        n0 = self.explicit_terms(uh, qh, rh)
        pu, pq, pr = self._apply(prop, uh + h * n0.nu, qh + h * n0.nq, rh + h * n0.nr)
        n1 = self.explicit_terms(pu, pq, pr)
        eu0, eq0, er0 = self._apply(prop, uh, qh, rh)
        en_u, en_q, en_r = self._apply(prop, n0.nu, n0.nq, n0.nr)
        uh1 = eu0 + 0.5 * h * (en_u + n1.nu)
        qh1 = eq0 + 0.5 * h * (en_q + n1.nq)
        rh1 = er0 + 0.5 * h * (en_r + n1.nr)
        return self.grid.leray_hat(uh1), qh1, rh1

    # -- public API ------------------------------------------------------------

    def rhs_velocity(self, state: FlowState) -> np.ndarray:
        g = self.grid
        du, _, _ = self.rhs_hat(g.forward(state.u), g.forward(state.q), g.forward(state.r))
        return g.inverse(du)

    def rhs_qtensor(self, state: FlowState) -> np.ndarray:
        """Time derivative of ``R`` with its advection moved to the right side."""
        g = self.grid
        _, _, dr = self.rhs_hat(g.forward(state.u), g.forward(state.q), g.forward(state.r))
        return g.inverse(dr)

    def rhs_q(self, state: FlowState) -> np.ndarray:
        """``dQ/dt = R - Jeps(u . grad Q)``."""
        g = self.grid
        _, dq, _ = self.rhs_hat(g.forward(state.u), g.forward(state.q), g.forward(state.r))
        return g.inverse(dq)

    def stability_cap(self, state: FlowState | None = None) -> float:
        """Time-step cap from the explicitly treated linear couplings.

        The coupling ``mu2/2 div R`` / ``mu2~/(2J) A`` oscillates at a rate
        bounded by ``kmax (|mu2|/2 + |mu2~|/(2J))``; the transported
        rotation term adds ``mu1/J |grad u|``.
        """
        c, g = self.c, self.grid
        kmax = np.sqrt(g.d) * np.floor(g.n / 3.0)
        if self.eps > 0:
            kmax = min(kmax, 1.0 / self.eps)
        rate = kmax * (0.5 * abs(c.mu2) + 0.5 * abs(c.mu2_tilde) / c.J)
        if state is not None:
            grad_u = velocity_gradient(g, state.u)
            rate += c.mu1 / c.J * float(np.max(np.abs(grad_u), initial=0.0)) * g.d
        return 1.0 / rate if rate > 0 else np.inf

    def choose_dt(self, state: FlowState, cfl: float = DEFAULT_CFL, cap: float | None = None) -> float:
        umax = float(np.max(np.abs(state.u), initial=0.0))
        adv = self.grid.dx / umax if umax > 0 else np.inf
        lim = min(adv, self.stability_cap(state) if cap is None else cap)
        return min(cfl * lim, MAX_DT)

    def step(self, state: FlowState, dt: float) -> FlowState:
        if not dt > 0:
            raise ConfigError(f"dt must be positive, got {dt}")
        g = self.grid
        # non-finite values are reported below as a blow-up, not as numpy warnings
        with np.errstate(invalid="ignore", over="ignore"):
            uh, qh, rh = self.step_hat(g.forward(state.u), g.forward(state.q),
                                       g.forward(state.r), dt)
            u, q, r = g.inverse(uh), g.inverse(qh), g.inverse(rh)
        t = state.t + dt
        for name, arr in (("u", u), ("Q", q), ("R", r)):
            if not np.all(np.isfinite(arr)):
                with np.errstate(invalid="ignore", over="ignore"):
                    norm = float(np.sqrt(np.nansum(arr * arr)))
                raise BlowUpError(t, norm, name)
        nrep = state.reprojections
        if max(constraint_drift(q)) > DRIFT_REPROJECT or max(constraint_drift(r)) > DRIFT_REPROJECT:
            q = tc.sym_traceless_project(q)
            r = tc.sym_traceless_project(r)
            nrep += 1
        return FlowState(g, t, u, q, r, state.eps, nrep)


def constraint_drift(m: np.ndarray) -> tuple[float, float]:
    """Max pointwise ``|tr M|`` and ``|M - M^T|`` of a matrix field."""
    tr = float(np.max(np.abs(tc.trace(m)), initial=0.0))
    sym = float(np.max(np.abs(m - tc.transpose(m)), initial=0.0))
    return tr, sym


def divergence_drift(grid: Grid, u: np.ndarray) -> float:
    """Largest spectral coefficient magnitude of ``div u`` (normalised)."""
    dh = grid.divergence_hat(grid.forward(u))
    return float(np.max(np.abs(dh), initial=0.0) / grid.n**grid.d)


# -- initial data ---------------------------------------------------------------

@dataclass(frozen=True)
class InitialSpec:
    """Initial-data recipe.

    ``kind`` is ``random_smooth``, ``single_mode`` or ``manufactured``.
    ``energy`` is the target initial energy at Sobolev order ``s``; the
    amplitudes ``amp_*`` weight the three fields before the common rescale.
    ``u_mean`` is added to the velocity after rescaling.
    """

    kind: str = "random_smooth"
    energy: float = 1e-2
    seed: int = 0
    decay: float = 3.0
    kmax: int | None = None
    mode: tuple[int, ...] = (1, 0)
    amp_u: float = 1.0
    amp_q: float = 1.0
    amp_r: float = 1.0
    u_mean: tuple[float, ...] | None = None


def _random_field(grid: Grid, rng: np.random.Generator, comps: tuple[int, ...],
                  decay: float, kmax: int | None) -> np.ndarray:
    shape = comps + grid.shape
    coef = rng.standard_normal(shape) + 1j * rng.standard_normal(shape)
    envelope = np.exp(-grid.ksq / (2.0 * decay**2))
    if kmax is not None:
        envelope = envelope * np.all(np.abs(grid.k) <= kmax, axis=0)
    return grid.inverse(coef * envelope * grid.n**grid.d)


def _transverse_unit(k: np.ndarray) -> np.ndarray:
    d = k.size
    if d == 2:
        v = np.array([-k[1], k[0]], dtype=float)
    else:
        ref = np.array([0.0, 0.0, 1.0]) if abs(k[2]) < np.linalg.norm(k) * 0.9 else np.array([1.0, 0.0, 0.0])
        v = np.cross(k, ref)
    return v / np.linalg.norm(v)


def _single_mode_fields(grid: Grid, mode) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    d = grid.d
    k = np.zeros(d)
    k[: len(mode)] = mode[:d]
    if not np.any(k):
        raise ConfigError("single_mode needs a nonzero wavevector")
    phase = np.tensordot(k, grid.x, axes=1)
    u = _transverse_unit(k)[:, None] * np.sin(phase).reshape(1, -1)
    u = u.reshape((d,) + grid.shape)
    m = np.zeros((d, d))
    m[0, 0], m[1, 1] = 1.0, -1.0
    m[0, 1] = m[1, 0] = 0.5
    q = m.reshape((d, d) + (1,) * d) * np.cos(phase)
    r = m.reshape((d, d) + (1,) * d) * np.sin(phase)
    return u, q, r


def _manufactured_fields(grid: Grid) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    d = grid.d
    x = grid.x
    u = grid.zeros(d)
    u[0] = np.sin(x[0]) * np.cos(x[1])
    u[1] = -np.cos(x[0]) * np.sin(x[1])
    q = grid.zeros(d, d)
    q[0, 0] = np.cos(x[0] + x[1])
    q[1, 1] = -np.cos(x[0] + x[1])
    q[0, 1] = q[1, 0] = np.sin(x[1])
    r = grid.zeros(d, d)
    r[0, 1] = r[1, 0] = 0.5 * np.cos(x[0])
    if d == 3:
        q[2, 2] = np.sin(x[2])
        q[0, 0] -= 0.5 * np.sin(x[2])
        q[1, 1] -= 0.5 * np.sin(x[2])
        q[0, 2] = q[2, 0] = np.cos(x[2] - x[0])
        r[1, 2] = r[2, 1] = 0.25 * np.sin(x[1] + x[2])
    return u, q, r


def make_initial_data(spec: InitialSpec, grid: Grid, c: MaterialCoefficients,
                      eps: float = 0.0, s: int = 2) -> FlowState:
    """Build divergence-free, mean-zero, symmetric-traceless initial data.

    Fields are dealiased, mollified to ``eps`` and scaled so the energy at
    order ``s`` equals ``spec.energy``.
    """
    from .diagnostics import energy

    d = grid.d
    if spec.kind == "random_smooth":
        rng = np.random.default_rng(spec.seed)
        u = _random_field(grid, rng, (d,), spec.decay, spec.kmax)
        q = _random_field(grid, rng, (d, d), spec.decay, spec.kmax)
        r = _random_field(grid, rng, (d, d), spec.decay, spec.kmax)
    elif spec.kind == "single_mode":
        u, q, r = _single_mode_fields(grid, spec.mode)
    elif spec.kind == "manufactured":
        u, q, r = _manufactured_fields(grid)
    else:
        raise ConfigError(f"unknown initial-data kind {spec.kind!r}")

    mask = grid.dealias_mask & grid.mollify_mask(eps)

    def clean(f):
        return grid.inverse(grid.forward(f) * mask)

    uh = grid.leray_hat(grid.forward(spec.amp_u * u) * mask)
    uh[(slice(None),) + (0,) * d] = 0.0
    u = grid.inverse(uh)
    q = tc.sym_traceless_project(clean(spec.amp_q * q))
    r = tc.sym_traceless_project(clean(spec.amp_r * r))
    state = FlowState(grid, 0.0, u, q, r, eps)

    if spec.energy < 0:
        raise ConfigError(f"target energy must be >= 0, got {spec.energy}")
    if spec.energy == 0:
        state = zero_state(grid, eps)
    else:
        e_unit = energy(state, c, s)
        if not e_unit > 0:
            raise ConfigError("requested nonzero energy from an identically zero field")
        state = state.scaled(np.sqrt(spec.energy / e_unit))
    if spec.u_mean is not None and any(spec.u_mean):
        mean = np.zeros(d)
        mean[: len(spec.u_mean)] = spec.u_mean[:d]
        state = replace(state, u=state.u + mean.reshape((d,) + (1,) * d))
    return state

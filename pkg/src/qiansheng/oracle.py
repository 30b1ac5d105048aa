"""Deliberately naive reference implementations used for verification.

Nothing here calls an FFT or the fast right-hand sides: Fourier coefficients
come from an explicit DFT sum, nonlinear terms from direct convolution sums
on an unbounded integer lattice, and linear mode dynamics from closed forms.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass

import numpy as np

from . import tensor_core as tc
from .coefficients import MaterialCoefficients, hessian_matrix
from .errors import DimensionError
from .spectral import Grid

TINY_MAX_N = 8


@dataclass(frozen=True)
class TinyGridSpec:
    d: int = 2
    n: int = 8
    seed: int = 0

    def __post_init__(self):
        if self.n > TINY_MAX_N:
            raise DimensionError(f"oracle grids are limited to n <= {TINY_MAX_N}, got {self.n}")

    def grid(self) -> Grid:
        return Grid(self.d, self.n, workers=1)


# -- lattice spectra -------------------------------------------------------------

class LatticeSpectrum:
    """Fourier coefficients on the box ``[-K, K]^d`` with component axes first."""

    def __init__(self, data: np.ndarray, K: int, d: int):
        self.data = data
        self.K = K
        self.d = d

    @property
    def comps(self) -> tuple[int, ...]:
        return self.data.shape[: self.data.ndim - self.d]

    def wavenumbers(self) -> np.ndarray:
        r = np.arange(-self.K, self.K + 1)
        return np.stack(np.meshgrid(*([r] * self.d), indexing="ij"))

    @classmethod
    def from_samples(cls, grid: Grid, f: np.ndarray) -> "LatticeSpectrum":
        """Direct DFT; modes are placed at ``-n/2 .. n/2-1``."""
        n, d = grid.n, grid.d
        K = n // 2
        x1 = np.arange(n) * grid.dx
        ks = np.arange(-K, K + 1)
        dft = np.exp(-1j * np.outer(ks, x1)) / n      # (2K+1, n)
        dft[-1] = 0.0                                  # +n/2 duplicates -n/2
        out = f.astype(complex)
        ncomp = f.ndim - d
        for ax in range(d):
            out = np.moveaxis(np.tensordot(dft, out, axes=([1], [ncomp + ax])), 0, ncomp + ax)
        return cls(out, K, d)

    def zeros_like(self, comps=None, K=None) -> "LatticeSpectrum":
        comps = self.comps if comps is None else comps
        K = self.K if K is None else K
        return LatticeSpectrum(np.zeros(tuple(comps) + (2 * K + 1,) * self.d, complex), K, self.d)

    def pad(self, K: int) -> "LatticeSpectrum":
        if K == self.K:
            return self
        out = self.zeros_like(K=K)
        sl = tuple(slice(K - self.K, K + self.K + 1) for _ in range(self.d))
        out.data[(Ellipsis,) + sl] = self.data
        return out

    def __add__(self, other: "LatticeSpectrum") -> "LatticeSpectrum":
        K = max(self.K, other.K)
        return LatticeSpectrum(self.pad(K).data + other.pad(K).data, K, self.d)

    def __sub__(self, other: "LatticeSpectrum") -> "LatticeSpectrum":
        return self + other * -1.0

    def __mul__(self, scalar: float) -> "LatticeSpectrum":
        return LatticeSpectrum(self.data * scalar, self.K, self.d)

    __rmul__ = __mul__

    def multiplier(self, symbol: np.ndarray) -> "LatticeSpectrum":
        return LatticeSpectrum(self.data * symbol, self.K, self.d)

    def ddx(self, axis: int) -> "LatticeSpectrum":
        return self.multiplier(1j * self.wavenumbers()[axis])

    def laplacian(self) -> "LatticeSpectrum":
        return self.multiplier(-np.sum(self.wavenumbers() ** 2, axis=0))

    def gradient(self) -> "LatticeSpectrum":
        """New trailing component axis holding the derivative direction."""
        parts = [self.ddx(i).data for i in range(self.d)]
        return LatticeSpectrum(np.stack(parts, axis=len(self.comps)), self.K, self.d)

    def divergence(self) -> "LatticeSpectrum":
        """Contract the last component axis with the derivative."""
        ax = len(self.comps) - 1
        total = None
        for j in range(self.d):
            part = LatticeSpectrum(np.take(self.data, j, axis=ax), self.K, self.d).ddx(j)
            total = part if total is None else total + part
        return total

    def leray(self) -> "LatticeSpectrum":
        k = self.wavenumbers().astype(float)
        ksq = np.sum(k**2, axis=0)
        safe = np.where(ksq == 0, 1.0, ksq)
        kdotu = np.sum(k * self.data, axis=0)
        corr = k * (kdotu / safe)
        corr[:, ksq == 0] = 0.0
        return LatticeSpectrum(self.data - corr, self.K, self.d)

    def cutoff(self, eps: float) -> "LatticeSpectrum":
        if eps <= 0:
            return self
        ksq = np.sum(self.wavenumbers() ** 2, axis=0)
        r = (1.0 / eps) * (1.0 + 1e-12)
        return self.multiplier(ksq <= r * r)

    def restrict(self, kmax: float) -> "LatticeSpectrum":
        """Keep modes with every ``|k_i| <= kmax`` on the box ``[-floor(kmax), floor(kmax)]``."""
        K = int(np.floor(kmax))
        full = self.pad(max(K, self.K))
        c = full.K
        sl = tuple(slice(c - K, c + K + 1) for _ in range(self.d))
        return LatticeSpectrum(full.data[(Ellipsis,) + sl].copy(), K, self.d)

    def to_grid(self, grid: Grid) -> np.ndarray:
        """Evaluate the trigonometric polynomial at the grid points (direct sum)."""
        x1 = np.arange(grid.n) * grid.dx
        ks = np.arange(-self.K, self.K + 1)
        syn = np.exp(1j * np.outer(x1, ks))           # (n, 2K+1)
        out = self.data
        ncomp = len(self.comps)
        for ax in range(self.d):
            out = np.moveaxis(np.tensordot(syn, out, axes=([1], [ncomp + ax])), 0, ncomp + ax)
        return out.real


def convolve(a: LatticeSpectrum, b: LatticeSpectrum, subscripts: str) -> LatticeSpectrum:
    """Spectrum of a pointwise product by the direct convolution sum.

    ``subscripts`` contracts component axes, e.g. ``"ik,kj->ij"`` for a
    matrix product.  The result lives on ``[-(Ka+Kb), Ka+Kb]^d``.
    """
    d = a.d
    K = a.K + b.K
    lhs, rhs = subscripts.split("->")
    sa, sb = lhs.split(",")
    expr = f"{sa},{sb}...->{rhs}..."
    probe = np.einsum(expr, a.data[(Ellipsis,) + (0,) * d], b.data)
    out = np.zeros(probe.shape[: probe.ndim - d] + (2 * K + 1,) * d, complex)
    nz = np.argwhere(np.any(a.data.reshape((-1,) + a.data.shape[-d:]) != 0, axis=0))
    width = 2 * b.K + 1
    for idx in nz:
        ca = a.data[(Ellipsis,) + tuple(idx)]
        contrib = np.einsum(expr, ca, b.data)
        # mode index idx - Ka shifts b's box to start at idx in the output box
        sl = tuple(slice(i, i + width) for i in idx)
        out[(Ellipsis,) + sl] += contrib
    return LatticeSpectrum(out, K, d)


@dataclass
class OracleRHS:
    """Alias-free right sides restricted to the two-thirds retained set."""

    velocity_hat: LatticeSpectrum
    r_hat: LatticeSpectrum
    q_hat: LatticeSpectrum
    terms: dict
    velocity: np.ndarray
    qtensor: np.ndarray


def convolution_rhs_oracle(state, c: MaterialCoefficients) -> OracleRHS:
    """Reference evaluation of the mollified right sides by convolution sums.

    Returns the velocity tendency, the ``R`` tendency and the ``Q`` tendency
    restricted to modes with every ``|k_i| <= n/3``.
    """
    grid: Grid = state.grid
    if grid.n > TINY_MAX_N:
        raise DimensionError(f"convolution oracle needs n <= {TINY_MAX_N}, got n={grid.n}")
    d, eps = grid.d, state.eps
    kmax = grid.n / 3.0
    U = LatticeSpectrum.from_samples(grid, state.u)
    Q = LatticeSpectrum.from_samples(grid, state.q)
    R = LatticeSpectrum.from_samples(grid, state.r)
    Jm = (lambda s: s.cutoff(eps))

    G = U.gradient()                                  # [i, j]: d_j u_i
    Gt = LatticeSpectrum(np.swapaxes(G.data, 0, 1), G.K, d)
    A = (G + Gt) * 0.5
    Om = (G - Gt) * 0.5
    gQ = Q.gradient()                                 # [k, l, i]
    gR = R.gradient()

    adv_u = Jm(convolve(G, U, "ij,j->i"))
    ericksen = Jm(convolve(gQ, gQ, "kli,klj->ij")) * (-c.L)
    qa = convolve(Q, A, "ij,ij->")
    beta1 = Jm(convolve(Q, qa, "ij,->ij")) * c.beta1
    beta5 = Jm(convolve(A, Q, "ik,kj->ij")) * c.beta5
    beta6 = Jm(convolve(Q, A, "ik,kj->ij")) * c.beta6
    omq = convolve(Om, Q, "ik,kj->ij") - convolve(Q, Om, "ik,kj->ij")
    corot_sym = (R - Jm(omq)) * (0.5 * c.mu2)
    nn = R - omq
    corot_skew = Jm(convolve(Q, nn, "ik,kj->ij") - convolve(nn, Q, "ik,kj->ij")) * c.mu1

    stress_terms = {
        "ericksen": ericksen, "beta1": beta1, "beta5": beta5, "beta6": beta6,
        "mu2_sym": corot_sym, "mu1_skew": corot_skew,
    }
    terms = {"advection_u": (adv_u * -1.0).leray().restrict(kmax)}
    for name, sig in stress_terms.items():
        terms[name] = sig.divergence().leray().restrict(kmax)
    terms["viscosity"] = (U.laplacian() * (0.5 * c.beta4)).restrict(kmax)
    du = None
    for part in terms.values():
        du = part if du is None else du + part

    qq = Jm(convolve(Q, Q, "ik,kj->ij"))
    tr_qq = LatticeSpectrum(np.trace(qq.data, axis1=0, axis2=1), qq.K, d)
    eye = np.eye(d).reshape((d, d) + (1,) * d)
    iso = LatticeSpectrum(eye * tr_qq.data[None, None] / d, qq.K, d)
    norm_q = convolve(Q, Q, "ij,ij->")
    cubic = Jm(convolve(Q, norm_q, "ij,->ij"))
    rterms = {
        "damping": R * (-c.mu1 / c.J),
        "elastic": Q.laplacian() * (c.L / c.J),
        "linear_bulk": Q * (-c.a / c.J),
        "quadratic_bulk": (qq - iso) * (c.b / c.J),
        "cubic_bulk": cubic * (-c.c / c.J),
        "alignment": A * (0.5 * c.mu2_tilde / c.J),
        "rotation": Jm(omq) * (c.mu1 / c.J),
        "advection_r": Jm(convolve(gR, U, "kli,i->kl")) * -1.0,
    }
    rterms = {k: v.restrict(kmax) for k, v in rterms.items()}
    dr = None
    for part in rterms.values():
        dr = part if dr is None else dr + part
    dq = (R - Jm(convolve(gQ, U, "kli,i->kl"))).restrict(kmax)

    terms.update({"R:" + k: v for k, v in rterms.items()})
    return OracleRHS(du, dr, dq, terms, du.to_grid(grid), dr.to_grid(grid))


def grid_spectrum_on_box(grid: Grid, fh: np.ndarray, kmax: float) -> np.ndarray:
    """Normalised FFT coefficients rearranged onto the box ``[-floor(kmax), floor(kmax)]^d``."""
    K = int(np.floor(kmax))
    idx = np.arange(-K, K + 1) % grid.n
    ncomp = fh.ndim - grid.d
    out = fh / grid.n**grid.d
    for ax in range(grid.d):
        out = np.take(out, idx, axis=ncomp + ax)
    return out


def random_tiny_state(spec: TinyGridSpec, band: int = 1, eps: float = 0.0, scale: float = 0.5):
    """Random real state whose Fourier support has every ``|k_i| <= band``."""
    from .dynamics import FlowState

    g = spec.grid()
    d = g.d
    rng = np.random.default_rng(spec.seed)
    mask = np.all(np.abs(g.k) <= band, axis=0)

    def rand(comps):
        shape = comps + g.shape
        coef = (rng.standard_normal(shape) + 1j * rng.standard_normal(shape)) * mask
        return g.inverse(coef * g.n**d) * scale

    u = g.leray_project(rand((d,)))
    q = tc.sym_traceless_project(rand((d, d)))
    r = tc.sym_traceless_project(rand((d, d)))
    return FlowState(g, 0.0, u, q, r, eps)


# -- closed-form damped mode -----------------------------------------------------

def damped_mode_exact(k, q0, r0, c: MaterialCoefficients, t: float):
    """Solve ``J q'' + mu1 q' + (L|k|^2 + a) q = 0`` with ``q(0)=q0, q'(0)=r0``.

    ``k`` is a wavevector or its squared norm given as a scalar.
    """
    k = np.asarray(k, dtype=float)
    ksq = float(k) if k.ndim == 0 else float(np.sum(k**2))
    kappa = c.L * ksq + c.a
    q0 = np.asarray(q0)
    r0 = np.asarray(r0)
    disc = c.mu1**2 - 4.0 * c.J * kappa
    scale = max(c.mu1**2, 4.0 * c.J * kappa)
    if abs(disc) <= 1e-12 * scale:
        lam = -c.mu1 / (2.0 * c.J)
        b = r0 - lam * q0
        e = np.exp(lam * t)
        q = (q0 + b * t) * e
        r = (b + lam * (q0 + b * t)) * e
    elif disc > 0:
        sq = np.sqrt(disc)
        l1 = (-c.mu1 + sq) / (2.0 * c.J)
        l2 = (-c.mu1 - sq) / (2.0 * c.J)
        c1 = (r0 - l2 * q0) / (l1 - l2)
        c2 = (l1 * q0 - r0) / (l1 - l2)
        e1, e2 = np.exp(l1 * t), np.exp(l2 * t)
        q = c1 * e1 + c2 * e2
        r = c1 * l1 * e1 + c2 * l2 * e2
    else:
        alpha = -c.mu1 / (2.0 * c.J)
        omega = np.sqrt(-disc) / (2.0 * c.J)
        b = (r0 - alpha * q0) / omega
        e = np.exp(alpha * t)
        cs, sn = np.cos(omega * t), np.sin(omega * t)
        q = e * (q0 * cs + b * sn)
        r = e * (alpha * (q0 * cs + b * sn) + omega * (-q0 * sn + b * cs))
    return q, r


def damped_mode_rate(k, c: MaterialCoefficients) -> float:
    """Asymptotic decay rate of the mode energy ``J r^2 + kappa q^2``."""
    k = np.asarray(k, dtype=float)
    ksq = float(k) if k.ndim == 0 else float(np.sum(k**2))
    kappa = c.L * ksq + c.a
    disc = c.mu1**2 - 4.0 * c.J * kappa
    if disc <= 0:
        return c.mu1 / c.J
    return (c.mu1 - np.sqrt(disc)) / c.J


# -- Monte-Carlo minimisation of the dissipation form --------------------------------

_F_SAMPLE_CACHE: dict[tuple[int, int, int, bool], tuple[np.ndarray, np.ndarray]] = {}


def _unit_samples(samples: int, seed: int, d: int, include_z: bool):
    """Unit-norm sample triples and their five Frobenius invariants (cached)."""
    key = (samples, seed, d, include_z)
    if key not in _F_SAMPLE_CACHE:
        rng = np.random.default_rng(seed)
        m = d * d
        nb = 3 if include_z else 2
        w = rng.standard_normal((samples, nb * m))
        w /= np.linalg.norm(w, axis=1, keepdims=True)
        x, y = w[:, :m], w[:, m:2 * m]
        z = w[:, 2 * m:] if include_z else np.zeros_like(x)
        inv = np.stack([np.sum(x * x, axis=1), np.sum(y * y, axis=1), np.sum(z * z, axis=1),
                        np.sum(x * y, axis=1), np.sum(x * z, axis=1)], axis=1)
        if len(_F_SAMPLE_CACHE) >= 4:
            _F_SAMPLE_CACHE.clear()
        _F_SAMPLE_CACHE[key] = (w, inv)
    return _F_SAMPLE_CACHE[key]


def _f_weights(c: MaterialCoefficients) -> np.ndarray:
    """``F`` as a linear function of ``(|X|^2, |Y|^2, |Z|^2, X:Y, X:Z)``."""
    return np.array([0.5 * c.beta4, c.mu1, c.mu1, -0.5 * (c.mu2_tilde - c.mu2), -c.mu2])


def mc_min_F(c: MaterialCoefficients, samples: int = 100_000, seed: int = 0,
             d: int = 2, include_z: bool = True, refine: bool = True) -> float:
    """Minimum of ``F(X,Y,Z) / (|X|^2 + |Y|^2 + |Z|^2)`` by sampling plus descent.

    With ``include_z=False`` the ``Z`` block is held at zero, which probes
    the weaker entropy condition instead of the full coercivity condition.
    The refinement runs projected gradient descent on the unit sphere from
    the best samples and from a seed aligned with the lowest eigenvector of
    the 3x3 coefficient Hessian.
    """
    if samples < 10_000:
        raise ValueError("mc_min_F needs at least 1e4 samples")
    w, inv = _unit_samples(samples, seed, d, include_z)
    weights = _f_weights(c)
    vals = inv @ weights
    best = float(vals.min())
    if not refine:
        return best

    m = d * d
    nb = 3 if include_z else 2
    h = hessian_matrix(c, 0.0, 0.0)[:nb, :nb]
    rng = np.random.default_rng(seed + 1)
    mat = rng.standard_normal(m)
    mat /= np.linalg.norm(mat)
    _, vecs = np.linalg.eigh(h)
    seeds = [w[i] for i in np.argsort(vals)[:4]]
    seeds.append(np.kron(vecs[:, 0], mat))
    v = np.array(seeds)
    v /= np.linalg.norm(v, axis=1, keepdims=True)
    # value(w) = 1/2 w^T (H (x) I) w, so the gradient is (H (x) I) w
    op = np.kron(h, np.eye(m))
    step = 1.0 / (np.max(np.abs(np.linalg.eigvalsh(h))) + 1e-300)
    for _ in range(500):
        g = v @ op
        tang = g - np.sum(g * v, axis=1, keepdims=True) * v
        v = v - step * tang
        v /= np.linalg.norm(v, axis=1, keepdims=True)
        if np.max(np.abs(tang)) < 1e-14:
            break
    refined = 0.5 * np.einsum("si,ij,sj->s", v, op, v)
    return min(best, float(refined.min()))


# -- finite differences ------------------------------------------------------------

def fd_gradient_check(f, q: np.ndarray, h: float = 1e-6) -> np.ndarray:
    """Central-difference gradient of a scalar matrix function, projected to S0."""
    if not 1e-8 <= h <= 1e-4:
        raise ValueError(f"step h={h!r} outside [1e-8, 1e-4]")
    q = np.asarray(q, dtype=float)
    d = q.shape[0]
    g = np.zeros((d, d))
    for i, j in itertools.product(range(d), repeat=2):
        e = np.zeros((d, d))
        e[i, j] = h
        g[i, j] = (f(q + e) - f(q - e)) / (2.0 * h)
    return tc.sym_traceless_project(g)


# -- cancellation identity -------------------------------------------------------------

def cancellation_residual(grid: Grid, u: np.ndarray, q: np.ndarray, L: float,
                          sign: float = 1.0) -> tuple[float, float]:
    """``<div(-L gradQ (.) gradQ), u> + L <lap Q, u . grad Q>`` and its scale.

    The scale is ``||u||_L2 ||Q||_{H^2}^2 + 1``.  ``sign=-1`` flips the second
    term and serves as a negative control.
    """
    from .dynamics import ericksen_stress

    sigma = ericksen_stress(grid, q, L)
    div_sigma = grid.divergence(sigma)
    lap_q = grid.laplacian(q)
    grad_q = grid.inverse(grid.gradient_hat(grid.forward(q)))
    u_grad_q = np.einsum("i...,kli...->kl...", u, grad_q)
    res = grid.inner(div_sigma, u) + sign * L * grid.inner(lap_q, u_grad_q)
    scale = grid.sobolev_norm(u, 0) * grid.sobolev_norm(q, 2) ** 2 + 1.0
    return abs(res), scale

import dataclasses

import numpy as np
import pytest

from qiansheng import oracle
from qiansheng import tensor_core as tc
from qiansheng.coefficients import MaterialCoefficients, hessian_psd
from qiansheng.dynamics import InitialSpec, Model, make_initial_data, zero_state
from qiansheng.errors import DimensionError
from qiansheng.spectral import Grid

from conftest import random_sym_traceless


def fast_box(state, c):
    g = state.grid
    du, dq, dr = Model(g, c, state.eps).rhs_hat(g.forward(state.u), g.forward(state.q),
                                                g.forward(state.r))
    return [oracle.grid_spectrum_on_box(g, f, g.n / 3.0) for f in (du, dq, dr)]


def max_gap(state, c):
    ref = oracle.convolution_rhs_oracle(state, c)
    fast = fast_box(state, c)
    return max(float(np.max(np.abs(f - s.data)))
               for f, s in zip(fast, (ref.velocity_hat, ref.q_hat, ref.r_hat)))


def test_lattice_round_trip(rng):
    g = Grid(2, 8)
    f = g.dealias(rng.standard_normal((2, 2) + g.shape))
    spec = oracle.LatticeSpectrum.from_samples(g, f)
    np.testing.assert_allclose(spec.to_grid(g), f, atol=1e-13)


def test_oracle_zero_state(coeffs):
    ref = oracle.convolution_rhs_oracle(zero_state(Grid(2, 8)), coeffs)
    assert not np.any(ref.velocity) and not np.any(ref.qtensor)


def test_oracle_rejects_large_grid(coeffs):
    with pytest.raises(DimensionError):
        oracle.convolution_rhs_oracle(zero_state(Grid(2, 16)), coeffs)
    with pytest.raises(DimensionError):
        oracle.TinyGridSpec(2, 16)


def test_single_mode_velocity(coeffs):
    g = Grid(2, 8)
    st = make_initial_data(InitialSpec(kind="single_mode", amp_q=0.0, amp_r=0.0), g, coeffs)
    ref = oracle.convolution_rhs_oracle(st, coeffs)
    np.testing.assert_allclose(ref.velocity, Model(g, coeffs).rhs_velocity(st), atol=1e-11)


# Each case keeps one group of nonlinear couplings; the bound is recorded per term.
TERM_CASES = {
    "advection only": dict(L=0.0, b=0.0, c=0.0, beta1=0.0, beta5=0.0, beta6=0.0,
                           mu1=0.0, mu2=0.0, mu2_tilde=0.0),
    "ericksen": dict(b=0.0, c=0.0, beta1=0.0, beta5=0.0, beta6=0.0, mu1=0.0, mu2=0.0),
    "beta1": dict(L=0.0, beta5=0.0, beta6=0.0, mu1=0.0, mu2=0.0, beta1=0.7),
    "beta5/beta6": dict(L=0.0, beta1=0.0, mu1=0.0, mu2=0.0, beta5=0.4, beta6=0.4),
    "mu2 corotational": dict(L=0.0, beta1=0.0, beta5=-0.5, beta6=0.5, mu1=0.0, mu2=1.0),
    "mu1 corotational": dict(L=0.0, beta1=0.0, beta5=0.0, beta6=0.0, mu2=0.0, mu1=1.3),
    "bulk": dict(L=0.0, beta1=0.0, beta5=0.0, beta6=0.0, mu1=0.0, mu2=0.0, b=1.1, c=0.9),
}


@pytest.mark.parametrize("name", list(TERM_CASES))
@pytest.mark.parametrize("d", [2, 3])
def test_per_term_agreement(name, d, coeffs):
    c = dataclasses.replace(coeffs, **TERM_CASES[name])
    st = oracle.random_tiny_state(oracle.TinyGridSpec(d, 8, seed=11))
    assert max_gap(st, c) < 1e-10


def test_agreement_with_mollifier(coeffs):
    for eps in (0.5, 0.4):
        st = oracle.random_tiny_state(oracle.TinyGridSpec(2, 8, seed=3), eps=eps)
        assert max_gap(st, coeffs) < 1e-10


def test_mollifier_changes_rhs(coeffs):
    st = oracle.random_tiny_state(oracle.TinyGridSpec(2, 8, seed=3))
    moll = dataclasses.replace(st, eps=0.5)
    a = oracle.convolution_rhs_oracle(st, coeffs).velocity_hat.data
    b = oracle.convolution_rhs_oracle(moll, coeffs).velocity_hat.data
    assert np.max(np.abs(a - b)) > 1e-3


def _complex_step(f, t, h=1e-30):
    return np.imag(f(t + 1j * h)) / h


@pytest.mark.parametrize("mu1", [0.5, 2.0, 6.0])   # under, critical, over damped
def test_damped_mode_solves_ode(mu1):
    c = MaterialCoefficients(a=1.0, b=0, c=0, J=0.5, L=1.0, beta1=0, beta4=1, beta5=0, beta6=0,
                             mu1=mu1, mu2=0, mu2_tilde=0)
    k = (1, 0)
    kappa = c.L + c.a
    q0, r0 = 0.7, -0.2
    for t in (0.0, 0.3, 1.7):
        q, r = oracle.damped_mode_exact(k, q0, r0, c, t)
        dq = _complex_step(lambda s: oracle.damped_mode_exact(k, q0, r0, c, s)[0], t)
        dr = _complex_step(lambda s: oracle.damped_mode_exact(k, q0, r0, c, s)[1], t)
        assert abs(dq - r) <= 1e-10
        assert abs(c.J * dr + c.mu1 * r + kappa * q) <= 1e-10
    assert oracle.damped_mode_exact(k, q0, r0, c, 0.0) == pytest.approx((q0, r0), abs=1e-15)


def test_damped_mode_branches():
    over = MaterialCoefficients(1, 0, 0, 0.5, 1, 0, 1, 0, 0, 10.0, 0, 0)
    qs = [float(oracle.damped_mode_exact((1, 0), 1.0, 0.0, over, t)[0]) for t in np.linspace(0, 5, 50)]
    assert all(a > b > 0 for a, b in zip(qs, qs[1:]))
    crit = MaterialCoefficients(1, 0, 0, 0.5, 1, 0, 1, 0, 0, 2.0, 0, 0)
    lam = crit.mu1 / (2 * crit.J)
    for t in (0.5, 2.0):
        q, _ = oracle.damped_mode_exact((1, 0), 1.0, 0.0, crit, t)
        assert q == pytest.approx((1 + lam * t) * np.exp(-lam * t), rel=1e-14)
    assert oracle.damped_mode_rate((1, 0), crit) == pytest.approx(crit.mu1 / crit.J)


def test_mc_min_signs(coeffs):
    decoupled = dataclasses.replace(coeffs, mu2=0.0, mu2_tilde=0.0, beta5=0.0, beta6=0.0)
    assert oracle.mc_min_F(decoupled) >= 0
    bad = dataclasses.replace(coeffs, mu2=3.0, mu2_tilde=3.0, beta5=-1.5, beta6=1.5)
    assert oracle.mc_min_F(bad) < 0
    for c in (decoupled, bad, coeffs):
        assert (oracle.mc_min_F(c, samples=20_000) >= -1e-12) == hessian_psd(c, 0.0, 0.0)
    with pytest.raises(ValueError):
        oracle.mc_min_F(coeffs, samples=100)


def test_mc_min_matches_smallest_eigenvalue(coeffs):
    from qiansheng.coefficients import hessian_matrix
    c = dataclasses.replace(coeffs, mu2_tilde=-1.0)
    lam = np.linalg.eigvalsh(hessian_matrix(c, 0.0, 0.0))[0]
    assert oracle.mc_min_F(c, d=3) == pytest.approx(0.5 * lam, abs=1e-10)


def test_fd_gradient(rng, coeffs):
    def psi(m):
        return float(tc.bulk_potential(m, coeffs))

    np.testing.assert_allclose(oracle.fd_gradient_check(psi, np.zeros((3, 3))), 0.0, atol=1e-12)
    quad = dataclasses.replace(coeffs, b=0.0, c=0.0)
    q = random_sym_traceless(rng, 2)
    grad = oracle.fd_gradient_check(lambda m: float(tc.bulk_potential(m, quad)), q)
    np.testing.assert_allclose(grad, quad.a * q, atol=1e-9)
    with pytest.raises(ValueError):
        oracle.fd_gradient_check(psi, q, h=1e-2)


def test_cancellation_residual_and_negative_control(coeffs):
    g = Grid(2, 32)
    st = make_initial_data(InitialSpec(energy=1.0, seed=9, kmax=5), g, coeffs)
    res, scale = oracle.cancellation_residual(g, st.u, st.q, coeffs.L)
    assert res <= 1e-9 * scale
    bad, _ = oracle.cancellation_residual(g, st.u, st.q, coeffs.L, sign=-1.0)
    assert bad > 100 * 1e-9 * scale

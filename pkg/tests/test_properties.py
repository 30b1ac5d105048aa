"""Property-based checks with hypothesis."""

import numpy as np
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from qiansheng import cli
from qiansheng import tensor_core as tc
from qiansheng.coefficients import (
    Capability,
    MaterialCoefficients,
    check_condition_h,
    classify_regime,
    hessian_psd,
)
from qiansheng.diagnostics import fit_decay
from qiansheng.spectral import Grid

finite = st.floats(-1e3, 1e3, allow_nan=False, allow_infinity=False)
matrices = st.sampled_from([2, 3]).flatmap(lambda d: arrays(np.float64, (d, d), elements=finite))


@given(matrices)
def test_projection_idempotent(m):
    p = tc.sym_traceless_project(m)
    scale = 1.0 + np.max(np.abs(m))
    assert abs(np.trace(p)) <= 1e-12 * scale
    np.testing.assert_allclose(tc.sym_traceless_project(p), p, atol=1e-12 * scale)


@given(matrices, st.data())
def test_commutator_of_symmetric_is_orthogonal_to_symmetric(m, data):
    d = m.shape[0]
    n = data.draw(arrays(np.float64, (d, d), elements=finite))
    a = data.draw(arrays(np.float64, (d, d), elements=finite))
    q, n, a = (tc.sym_traceless_project(x) for x in (m, n, a))
    val = tc.frobenius(tc.commutator(q, n), a)
    scale = (1 + np.abs(q).max()) * (1 + np.abs(n).max()) * (1 + np.abs(a).max())
    assert abs(val) <= 1e-13 * scale


positive = st.floats(0.05, 5.0)
signed = st.floats(-3.0, 3.0)


@st.composite
def coefficient_sets(draw):
    mu2 = draw(signed)
    beta5 = draw(signed)
    return MaterialCoefficients(
        a=draw(positive), b=draw(signed), c=draw(positive), J=draw(positive), L=draw(positive),
        beta1=draw(st.floats(0.0, 2.0)), beta4=draw(positive), beta5=beta5, beta6=beta5 + mu2,
        mu1=draw(positive), mu2=mu2, mu2_tilde=draw(signed))


@settings(max_examples=200)
@given(coefficient_sets())
def test_regime_consistency(c):
    rep = classify_regime(c)
    assert Capability.SMALL_DATA_LOCAL in rep.capabilities
    if Capability.LARGE_DATA_LOCAL in rep.capabilities:
        assert rep.condition_h_ok and rep.symmetric_viscosity_zero
    if rep.delta0 is not None:
        assert hessian_psd(c, rep.delta0, rep.delta1)
        assert rep.delta0 == 1.0 or not hessian_psd(c, min(1.0, rep.delta0 + 1e-6),
                                                   min(1.0, rep.delta1 + 1e-6))
    assert rep.condition_h_ok == check_condition_h(c)
    if rep.condition_h_ok:
        assert hessian_psd(c, 0.0, 0.0)


@given(st.floats(0.01, 5.0), st.floats(0.1, 10.0))
def test_fit_recovers_rate(rate, amp):
    t = np.linspace(0.0, 4.0, 40)
    fit = fit_decay(zip(t, amp * np.exp(-rate * t)), e_in=amp)
    assert abs(fit.c3 - rate) <= 1e-8 * max(1.0, rate)
    assert abs(fit.c2 - 1.0) <= 1e-7


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 2**31 - 1))
def test_leray_idempotent_and_divergence_free(seed):
    g = Grid(2, 8)
    u = np.random.default_rng(seed).standard_normal((2,) + g.shape)
    pu = g.leray_project(u)
    np.testing.assert_allclose(g.leray_project(pu), pu, atol=1e-12)
    assert np.max(np.abs(g.divergence_hat(g.forward(pu)))) / 64 <= 1e-13


@given(st.floats(1e-3, 10.0), st.floats(0.0, 1.0), st.integers(0, 10**6))
def test_config_text_round_trip(t_end, eps, seed):
    cfg = cli.build_config({"t_end": repr(t_end), "eps": repr(eps), "seed": str(seed)})
    assert cli.build_config(cli.parse_config_text(cfg.to_text())) == cfg

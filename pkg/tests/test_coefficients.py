import dataclasses

import numpy as np
import pytest

from qiansheng.coefficients import (
    Capability,
    MaterialCoefficients,
    check_condition_h,
    check_entropy,
    check_parodi,
    classify_regime,
    coercivity_margins,
    condition_h_gap,
    entropy_gap,
    gate_table,
    hessian_psd,
    quadratic_form_F,
)
from qiansheng.errors import CoefficientError


def make(**kw):
    base = dict(a=1.0, b=0.0, c=0.0, J=1.0, L=1.0, beta1=0.0, beta4=1.0,
                beta5=0.0, beta6=0.0, mu1=1.0, mu2=0.0, mu2_tilde=0.0)
    base.update(kw)
    if "mu2" in kw and "beta5" not in kw and "beta6" not in kw:
        base["beta5"], base["beta6"] = -kw["mu2"] / 2, kw["mu2"] / 2
    return MaterialCoefficients(**base)


@pytest.mark.parametrize("field,value,relation", [
    ("a", 0.0, "a > 0"), ("J", -1.0, "J > 0"), ("L", 0.0, "L > 0"),
    ("beta1", -0.1, "beta1 >= 0"), ("beta4", 0.0, "beta4 > 0"), ("mu1", 0.0, "mu1 > 0"),
])
def test_baseline_violation_names_relation(field, value, relation):
    c = dataclasses.replace(make(), **{field: value})
    with pytest.raises(CoefficientError) as info:
        c.validate()
    assert relation in str(info.value)
    assert info.value.relation == "baseline admissibility"


def test_parodi_within_slack():
    assert check_parodi(make(mu2=0.3, beta5=-0.15, beta6=0.15 + 5e-13))
    assert not check_parodi(make(mu2=0.3, beta5=-0.15, beta6=0.16))
    with pytest.raises(CoefficientError, match="Parodi"):
        make(mu2=0.3, beta5=-0.15, beta6=0.16).validate()


def test_strict_inequalities_are_exact():
    # (mu2~ - mu2)^2 == 8 beta4 mu1 exactly, so the strict inequality fails
    c = make(beta4=0.5, mu1=1.0, mu2=0.0, mu2_tilde=2.0)      # 4 == 8 * 0.5
    assert entropy_gap(c) == 0.0
    assert not check_entropy(c)
    assert not check_condition_h(c)


def test_special_case_mu2_equal():
    c = make(mu2=0.5, mu2_tilde=0.5)
    rep = classify_regime(c)
    assert rep.mu2_equal and rep.entropy_ok
    assert Capability.GLOBAL_SMALL_DATA in rep.capabilities
    assert Capability.TORUS_DECAY in rep.capabilities


def test_special_case_mu2_opposite_depends_on_magnitude():
    small = classify_regime(make(mu2=0.5, mu2_tilde=-0.5))
    large = classify_regime(make(mu2=2.0, mu2_tilde=-2.0))
    assert small.condition_h_ok and Capability.LARGE_DATA_LOCAL in small.capabilities
    assert not large.condition_h_ok and not large.entropy_ok
    assert large.capabilities == frozenset({Capability.SMALL_DATA_LOCAL})


def test_large_data_needs_vanishing_symmetric_viscosity():
    c = make(mu2=0.2, beta5=0.1, beta6=0.3)
    rep = classify_regime(c)
    assert rep.condition_h_ok and not rep.symmetric_viscosity_zero
    assert Capability.LARGE_DATA_LOCAL not in rep.capabilities


def test_quadratic_form_matches_hessian(rng):
    c = make(mu2=0.4, mu2_tilde=-0.3, beta4=1.3, mu1=0.7)
    from qiansheng.coefficients import hessian_matrix
    h = hessian_matrix(c, 0.0, 0.0)
    for _ in range(20):
        x, y, z = (rng.standard_normal((3, 3)) for _ in range(3))
        gram = np.array([[np.sum(p * q) for q in (x, y, z)] for p in (x, y, z)])
        assert quadratic_form_F(x, y, z, c) == pytest.approx(0.5 * np.sum(h * gram), rel=1e-12)


def test_hessian_psd_rejects_out_of_range_margins():
    with pytest.raises(ValueError):
        hessian_psd(make(), 1.5, 0.0)


def test_margins_decoupled_case_is_one():
    assert coercivity_margins(make()) == (1.0, 1.0)


def test_margins_none_when_condition_fails():
    assert coercivity_margins(make(mu2=2.0, mu2_tilde=0.0)) is None
    assert condition_h_gap(make(mu2=2.0, mu2_tilde=0.0)) < 0


def test_gate_table_rows():
    rows = gate_table(make())
    assert all(len(r) == 4 for r in rows)
    assert any(name.startswith("(mu2~-mu2)^2 + 4 mu2^2") for name, *_ in rows)

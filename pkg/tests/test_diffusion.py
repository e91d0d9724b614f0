from __future__ import annotations

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from switchbench.diffusion import (Boundary, DiffusionModel, check_psi_growth, custom_pair,
                                   fundamental_pair, gbm_exponents, generator_apply)
from switchbench.errors import OutOfDomain, OutOfRange, UnsupportedModel
from switchbench.fixtures import GBM_PARAMS, OU_PARAMS
from switchbench.specfun import gamma

GBM = DiffusionModel.gbm(GBM_PARAMS["m"], GBM_PARAMS["beta"], GBM_PARAMS["alpha"])
OU_FREE = DiffusionModel.ou(OU_PARAMS["delta"], OU_PARAMS["m"], OU_PARAMS["sigma"], OU_PARAMS["alpha"])
OU_ABS = DiffusionModel.ou(OU_PARAMS["delta"], OU_PARAMS["m"], OU_PARAMS["sigma"], OU_PARAMS["alpha"],
                           interval=(0.0, math.inf), left=Boundary.ABSORBING)
ABM = DiffusionModel.abm(0.05, 0.4, 0.1)

MODELS = {
    "gbm": (GBM, np.geomspace(0.05, 20.0, 1000)),
    "ou": (OU_FREE, np.linspace(-0.5, 1.5, 1000)),
    "ou_absorbing": (OU_ABS, np.linspace(0.01, 1.5, 1000)),
    "abm": (ABM, np.linspace(-5.0, 5.0, 1000)),
}


def test_gbm_exponents_example():
    up, um = gbm_exponents(0.01, 0.25, 0.1)
    assert up == pytest.approx(2.16088, abs=1e-5)
    assert um == pytest.approx(-1.48088, abs=1e-5)
    for r in (up, um):
        assert 0.5 * 0.25 ** 2 * r * (r - 1.0) + 0.01 * r - 0.1 == pytest.approx(0.0, abs=1e-14)


@pytest.mark.parametrize("name", sorted(MODELS))
def test_psi_phi_positive_monotone(name):
    model, xs = MODELS[name]
    pair = fundamental_pair(model)
    psi, phi = pair.psi(xs), pair.phi(xs)
    assert np.all(psi > 0) and np.all(phi > 0)
    assert np.all(np.diff(psi) > 0) and np.all(np.diff(phi) < 0)
    assert np.all(pair.wronskian(xs) > 0)


@pytest.mark.parametrize("name", sorted(MODELS))
def test_generator_annihilates_psi_phi(name):
    model, xs = MODELS[name]
    pair = fundamental_pair(model)
    for x in xs[::10]:
        for jet, base in ((pair.psi_jet, pair.psi), (pair.phi_jet, pair.phi)):
            r = generator_apply(model, jet, float(x))
            assert abs(r) <= 1e-8 * model.alpha * abs(float(base(x))) + 1e-300


def test_ou_second_derivative_independent_of_ode():
    # the pair derives psi'' from the ODE, so compare with a finite difference of psi'
    pair = fundamental_pair(OU_FREE)
    for x in (0.1, 0.5, 1.2):
        h = 1e-5
        fd = (pair.dpsi(x + h) - pair.dpsi(x - h)) / (2 * h)
        assert pair.d2psi(x) == pytest.approx(fd, rel=1e-6)
        fd = (pair.psi(x + h) - pair.psi(x - h)) / (2 * h)
        assert pair.dpsi(x) == pytest.approx(fd, rel=1e-6)


def test_generator_constant_and_domain():
    for model in (GBM, OU_ABS):
        assert generator_apply(model, lambda x: (2.5, 0.0, 0.0), 0.7) == pytest.approx(-model.alpha * 2.5)
    with pytest.raises(OutOfDomain):
        generator_apply(GBM, lambda x: (1.0, 0.0, 0.0), -1.0)
    with pytest.raises(OutOfDomain):
        generator_apply(OU_ABS, lambda x: (1.0, 0.0, 0.0), 0.0)


def test_ou_psi_at_mean_is_pcf_at_zero():
    pair = fundamental_pair(OU_FREE)
    nu = -OU_PARAMS["alpha"] / OU_PARAMS["delta"]
    # independent oracle: trapezoid rule on the Hermite integral at 0
    t = np.linspace(0.0, 10.0, 1_000_001)
    h0 = np.trapezoid(np.exp(-t * t) * t ** (-nu - 1.0), t) / gamma(-nu)
    expected = 2.0 ** (-nu / 2.0) * h0
    assert float(pair.psi(OU_PARAMS["m"])) == pytest.approx(expected, rel=1e-9)
    assert float(pair.phi(OU_PARAMS["m"])) == pytest.approx(expected, rel=1e-9)
    # closed form D_nu(0) = 2^(nu/2) sqrt(pi) / Gamma((1 - nu)/2)
    assert expected == pytest.approx(2 ** (nu / 2) * math.sqrt(math.pi) / math.gamma((1 - nu) / 2), rel=1e-9)


def test_ou_reflection_symmetry():
    pair = fundamental_pair(OU_FREE)
    m = OU_PARAMS["m"]
    for d in (0.05, 0.3, 0.9):
        assert float(pair.psi(m + d)) == pytest.approx(float(pair.phi(m - d)), rel=1e-12)


def test_absorbing_psi_vanishes_at_left_end():
    pair = fundamental_pair(OU_ABS)
    assert abs(float(pair.psi(0.0))) < 1e-12 * float(pair.psi(1.0))


def test_gbm_F_closed_form():
    pair = fundamental_pair(GBM)
    b2 = GBM_PARAMS["beta"] ** 2
    up, um = gbm_exponents(GBM_PARAMS["m"], GBM_PARAMS["beta"], GBM_PARAMS["alpha"])
    delta = 0.5 * b2 * (up - um)
    xs = np.geomspace(0.01, 100.0, 50)
    np.testing.assert_allclose(pair.F(xs), xs ** (2 * delta / b2), rtol=1e-12)


@pytest.mark.parametrize("name", sorted(MODELS))
def test_F_G_relations_and_inverses(name):
    model, xs = MODELS[name]
    pair = fundamental_pair(model)
    sample = xs[::37]
    np.testing.assert_allclose(pair.G(sample), -1.0 / pair.F(sample), rtol=1e-13)
    assert np.all(np.diff(pair.F(sample)) > 0) and np.all(np.diff(pair.G(sample)) > 0)
    for x in sample:
        y = float(pair.F(x))
        assert float(pair.F(pair.F_inv(y))) == pytest.approx(y, rel=1e-10)
        z = float(pair.G(x))
        assert float(pair.G(pair.G_inv(z))) == pytest.approx(z, rel=1e-10)
        assert pair.F_inv(y) == pytest.approx(x, rel=1e-9, abs=1e-12)


@settings(max_examples=40, deadline=None)
@given(st.floats(min_value=-8.0, max_value=8.0))
def test_gbm_F_inv_roundtrip_property(logy):
    pair = fundamental_pair(GBM)
    y = math.exp(logy)
    assert float(pair.F(pair.F_inv(y))) == pytest.approx(y, rel=1e-10)


def test_inverse_out_of_range():
    pair = fundamental_pair(GBM)
    with pytest.raises(OutOfRange):
        pair.F_inv(-1.0)
    with pytest.raises(OutOfRange):
        pair.G_inv(0.5)


def test_rescaled_pair_scales_everything():
    pair = fundamental_pair(GBM)
    r = pair.rescaled(7.0, 1.0)
    assert float(r.psi(2.0)) == pytest.approx(7 * float(pair.psi(2.0)))
    assert float(r.F(2.0)) == pytest.approx(7 * float(pair.F(2.0)))
    assert r.F_inv(float(r.F(2.0))) == pytest.approx(2.0, rel=1e-12)
    with pytest.raises(ValueError):
        pair.rescaled(-1.0, 1.0)


def test_psi_growth_checks():
    assert check_psi_growth(fundamental_pair(GBM)).passed
    assert check_psi_growth(fundamental_pair(OU_ABS)).passed
    ident = custom_pair(ABM, lambda x: x, lambda x: 1.0 / x, lambda x: 1.0, lambda x: -1.0 / x ** 2)
    res = check_psi_growth(ident)
    assert not res.passed and len(res.ladder) == len(res.ratios)
    slow = DiffusionModel.gbm(0.1, 0.3, 0.05)  # alpha < m puts mu+ below 1
    assert not check_psi_growth(fundamental_pair(slow)).passed


def test_model_validation():
    with pytest.raises(ValueError):
        DiffusionModel.gbm(0.01, -0.25, 0.1)
    with pytest.raises(ValueError):
        DiffusionModel.gbm(0.01, 0.25, 0.0)
    with pytest.raises(ValueError):
        DiffusionModel.ou(0.05, 0.5, 0.35, 0.1, left=Boundary.ABSORBING)
    with pytest.raises(ValueError):
        DiffusionModel.ou(0.05, 0.5, 0.35, 0.1, interval=(1.0, 1.0))
    with pytest.raises(UnsupportedModel):
        DiffusionModel(object(), 0.1, (0.0, 1.0))
    both = DiffusionModel.abm(0.0, 1.0, 0.1, interval=(0.0, 1.0), left=Boundary.ABSORBING,
                              right=Boundary.ABSORBING)
    with pytest.raises(UnsupportedModel):
        fundamental_pair(both)

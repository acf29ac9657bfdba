import numpy as np
import pytest

from thetalab.weights import (
    CrossingParameter,
    LatticeCouplings,
    NAMED_POINT_TAGS,
    ParametrizationError,
    isotropic_points,
    loop_weight,
    named_point,
    twist_for_loop_weight,
    zb_weights,
)

# exact closed forms of the four spectrally parametrized points
s, c, t = np.sin, np.cos, np.tan
SQ2 = np.sqrt(2.0)
CLOSED = {
    "ThetaBN": (SQ2 * s(np.pi / 16),
                1 / (2 * c(np.pi / 16) * (1 + t(np.pi / 16) / SQ2)),
                0.5 * (2 + SQ2 + np.sqrt(2 + SQ2))),
    "Dense": (SQ2 * c(np.pi / 16),
              1 / (SQ2 * c(np.pi / 16) - 2 * s(np.pi / 16)),
              1 + 1 / SQ2 - np.sqrt(0.5 + 0.5 / SQ2)),
    "Dilute": (SQ2 * s(3 * np.pi / 16),
               SQ2 * s(3 * np.pi / 16) / (1 + c(np.pi / 8)),
               1 - 1 / SQ2 + np.sqrt(0.5 - 0.5 / SQ2)),
    "RegimeII": (SQ2 * c(3 * np.pi / 16),
                 4 * s(3 * np.pi / 16) * s(np.pi / 8) / (1 - 8 * s(np.pi / 8) * s(3 * np.pi / 16) ** 2),
                 -(1 - np.sqrt(0.5 + 0.5 / SQ2)) * c(np.pi / 16) / c(3 * np.pi / 16)),
}

DECIMALS = {
    "ThetaBN": (0.275899, 0.446933, 2.630986),
    "Dense": (1.38704, 1.00315, 0.783227),
    "Dilute": (0.785695, 0.408391, 0.675577),
    "RegimeII": (1.17588, 15.4476, -0.0897902),
}


@pytest.mark.parametrize("tag", ["ThetaBN", "Dense", "Dilute", "RegimeII"])
def test_named_points_match_spectral_parametrization(tag):
    pt, w = named_point(tag)
    cpl = w.couplings()
    for got, want in zip((cpl.p, cpl.K, cpl.tau), CLOSED[tag]):
        assert abs(got - want) < 1e-12
    # and the quoted decimals
    for got, want in zip((cpl.p, cpl.K, cpl.tau), DECIMALS[tag]):
        assert abs(got - want) < 5e-6 * max(1, abs(want))


def test_theta_ds_point():
    pt, w = named_point("ThetaDS")
    cpl = w.couplings()
    assert (cpl.p, cpl.K, cpl.tau) == (0.0, 0.5, 2.0)
    assert not pt.has_spectral_form
    assert w.n == 0.0
    # before normalization the contact model has rho_1 = 2, corners 1
    assert np.allclose(w.rho, [1, 0.5, 0.5, 0.5, 0.5, 0, 0, 0.5, 0.5])


def test_normalization_and_positivity():
    for tag in ("ThetaBN", "Dense", "Dilute"):
        _, w = named_point(tag)
        assert w.rho[0] == 1.0
        assert w.all_positive
    _, w = named_point("RegimeII")
    assert w.rho[0] == 1.0
    assert w.couplings().tau < 0
    assert not w.all_positive


def test_isotropy_of_both_branches():
    for gamma in (np.pi / 4, 3 * np.pi / 4, 0.6, 2.2):
        for u in isotropic_points(gamma):
            w = zb_weights(gamma, u)
            assert abs(w.rho[1] - w.rho[3]) < 1e-12  # rho_2 = rho_4
            assert abs(w.rho[7] - w.rho[8]) < 1e-12  # rho_8 = rho_9


def test_isotropic_points_values():
    up, um = isotropic_points(3 * np.pi / 4)
    assert abs(up - 1j * 13 * np.pi / 16) < 1e-14
    assert abs(um - 1j * 5 * np.pi / 16) < 1e-14
    up, um = isotropic_points(np.pi / 4)
    assert abs(up - 1j * (3 * np.pi / 16 + np.pi / 4)) < 1e-14
    assert abs(um - 1j * (3 * np.pi / 16 - np.pi / 4)) < 1e-14


def test_zero_spectral_value_is_identity_like():
    for gamma in (0.5, 1.1, 2.0):
        w = zb_weights(gamma, 0.0)
        assert abs(w.rho[0] - 1) < 1e-14
        assert abs(w.rho[1] - 1) < 1e-14
        assert abs(w.rho[7] - 1) < 1e-14
        for i in (3, 5, 8):
            assert abs(w.rho[i]) < 1e-14


def test_twist_reproduces_loop_weight():
    # n(gamma) = 2 cos(pi - 2 gamma) identically
    for g in np.linspace(1e-3, np.pi - 1e-3, 100):
        ts = twist_for_loop_weight(g)
        assert abs(ts.n_noncontractible - loop_weight(g)) < 1e-13
    assert abs(twist_for_loop_weight(np.pi / 4).phi - np.pi / 2) < 1e-14
    assert abs(twist_for_loop_weight(np.pi / 2).phi) < 1e-14
    assert abs(twist_for_loop_weight(np.pi / 3).n_noncontractible - 1.0) < 1e-13


def test_crossing_parameter_domain():
    with pytest.raises(ValueError):
        CrossingParameter(0.0)
    with pytest.raises(ValueError):
        CrossingParameter(np.pi)
    cp = CrossingParameter(np.pi / 4)
    assert -2 <= cp.n <= 2


def test_degenerate_parametrization_raises():
    # 3*lambda_zb = 0 mod pi at gamma = pi/3 is fine; gamma -> pi makes
    # 2*lambda_zb -> 0
    with pytest.raises(ParametrizationError):
        zb_weights(np.pi - 1e-14, 0.1)


def test_couplings_roundtrip():
    pt, w = named_point("ThetaBN")
    w2 = pt.couplings.to_weights(n=0.0)
    cpl2 = w2.couplings()
    assert abs(cpl2.p - pt.couplings.p) < 1e-14
    assert abs(cpl2.K - pt.couplings.K) < 1e-14
    assert abs(cpl2.tau - pt.couplings.tau) < 1e-14
    assert abs(pt.couplings.w - pt.couplings.K**2 * pt.couplings.tau) < 1e-14


def test_unknown_tag():
    with pytest.raises(ValueError):
        named_point("nope")
    assert set(NAMED_POINT_TAGS) == {"ThetaBN", "Dense", "Dilute", "RegimeII", "ThetaDS"}

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from qcomb.comb import Block, CombRole, ModeLattice
from qcomb.sample import SampleSpec
from qcomb.squeezing import (PairingRule, SqueezingSpec, Structure, amplification_noise,
                             build_covariance, db_to_gain, gain_to_db, pair_kernel, pairing_rule,
                             rotated_pair_variance)

PAIRED = [Structure.INTRA_SELF_REFERRED, Structure.INTRA_CROSS_REFERRED, Structure.CROSS_LINE]


def test_db_round_trip():
    assert math.isclose(db_to_gain(15.0), 31.622776601683793)
    assert math.isclose(gain_to_db(db_to_gain(7.3)), 7.3)


def test_spec_validation():
    with pytest.raises(ValueError):
        SqueezingSpec(Structure.CROSS_LINE, [2.0, 3.0, 4.0])
    with pytest.raises(ValueError):
        SqueezingSpec(Structure.INTRA_CROSS_REFERRED, [0.5, 1.0, 1.0])
    with pytest.raises(ValueError):
        SqueezingSpec(Structure.CLASSICAL, [1.0, 2.0, 1.0])
    with pytest.raises(ValueError):
        SqueezingSpec(Structure.INTRA_CROSS_REFERRED, [1.0, 2.0])
    assert SqueezingSpec.uniform("classical", 2, 30.0).gains.tolist() == [1.0] * 5


@pytest.mark.parametrize("structure", PAIRED)
@pytest.mark.parametrize("role", list(CombRole))
@given(n=st.integers(-5, 5), k=st.integers(-10, 10))
def test_pairing_is_an_involution(structure, role, n, k):
    rule = PairingRule(structure, role)
    pn, pk = rule.partner_coords(n, k)
    assert tuple(map(int, rule.partner_coords(pn, pk))) == (n, k)


def test_pairing_table():
    sig, lo = CombRole.SIGNAL, CombRole.LOCAL_OSCILLATOR
    assert PairingRule(Structure.INTRA_SELF_REFERRED, sig).partner(2, 1) == (2, 3)
    assert PairingRule(Structure.INTRA_SELF_REFERRED, lo).partner(2, 1) == (2, -1)
    assert PairingRule(Structure.INTRA_CROSS_REFERRED, sig).partner(2, 1) == (2, -1)
    assert PairingRule(Structure.INTRA_CROSS_REFERRED, lo).partner(2, 1) == (2, 3)
    assert PairingRule(Structure.CROSS_LINE, sig).partner(2, 1) == (-2, -1)
    # the line mode itself is a fixed point of the self-referred rule
    assert PairingRule(Structure.INTRA_SELF_REFERRED, sig).partner(2, 2) is None
    with pytest.raises(ValueError):
        PairingRule(Structure.CLASSICAL, sig)
    with pytest.raises(ValueError):
        pairing_rule(Structure.INTRA_SELF_REFERRED, sig, receiver="heterodyne")


def test_kernels_agree():
    for g in (1.0, 3.0, 31.6):
        for theta in (0.0, 0.2, math.pi / 2):
            alpha, beta = np.exp(1j * theta), np.exp(-1j * theta)
            assert math.isclose(pair_kernel(alpha, beta, g), rotated_pair_variance(g, theta))
        assert math.isclose(rotated_pair_variance(g, 0.0), 1.0 / g)
        assert math.isclose(rotated_pair_variance(g, math.pi / 2), g)
    assert amplification_noise(1.0) == 1.0
    with pytest.raises(ValueError):
        amplification_noise(0.5)


def _symplectic_form(modes):
    return np.kron(np.eye(modes), np.array([[0.0, 1.0], [-1.0, 0.0]]))


@settings(max_examples=15, deadline=None)
@given(st.integers(1, 3), st.sampled_from(PAIRED), st.floats(1.0, 40.0), st.floats(0.0, 0.2))
def test_covariance_is_physical(n_half, structure, gain, thermal):
    lat = ModeLattice(n_half)
    spec = SqueezingSpec.uniform(structure, n_half, gain)
    cov = build_covariance(lat, spec, spec, SampleSpec.transparent(n_half, thermal)).dense()
    assert np.allclose(cov, cov.T)
    # Robertson-Schroedinger: V + i Omega >= 0 (vacuum variance 1)
    eig = np.linalg.eigvalsh(cov + 1j * _symplectic_form(lat.n_modes))
    assert eig.min() > -1e-9 * max(1.0, gain)


def test_epr_variance():
    g = 20.0
    lat = ModeLattice(2)
    spec = SqueezingSpec.uniform(Structure.CROSS_LINE, 2, g)
    model = build_covariance(lat, spec, spec, SampleSpec.transparent(2))
    i, j = lat.index(Block.A, 1, 0), lat.index(Block.A, -1, 0)
    # var((x_i + x_j)/sqrt 2) and var((y_i - y_j)/sqrt 2) are both 1/G
    w = np.zeros(model.dimension)
    w[[2 * i, 2 * j]] = 1 / math.sqrt(2)
    assert math.isclose(w @ model.matrix @ w, 1 / g)
    w[:] = 0
    w[2 * i + 1], w[2 * j + 1] = 1 / math.sqrt(2), -1 / math.sqrt(2)
    assert math.isclose(w @ model.matrix @ w, 1 / g)
    assert math.isclose(model.mode_variance(i), amplification_noise(g))


def test_boundary_and_fixed_modes():
    lat = ModeLattice(2)
    spec = SqueezingSpec.uniform(Structure.INTRA_SELF_REFERRED, 2, 10.0)
    model = build_covariance(lat, spec, SqueezingSpec.classical(2), SampleSpec.transparent(2))
    # A-comb site (2, -3) pairs with (2, 7), outside the k window
    edge = lat.index(Block.A, 2, -3)
    assert edge in model.boundary_modes
    assert math.isclose(model.mode_variance(edge), amplification_noise(10.0))
    assert model.mode_variance(lat.index(Block.A, 1, 1)) == 1.0
    assert model.mode_variance(lat.index(Block.B, 0, 3)) == 1.0


def test_classical_is_identity_and_thermal_env():
    lat = ModeLattice(1)
    c = SqueezingSpec.classical(1)
    cov = build_covariance(lat, c, c, SampleSpec(1, 1.0, 0.0, [0.0, 0.5, 0.0])).dense()
    diag = np.diag(cov)
    env = lat.index(Block.ENV, 0, 1)
    assert diag[2 * env] == 2.0
    assert np.count_nonzero(cov - np.diag(diag)) == 0
    assert np.count_nonzero(diag != 1.0) == 2 * lat.n_sidebands


def test_size_mismatch_rejected():
    with pytest.raises(ValueError):
        build_covariance(ModeLattice(2), SqueezingSpec.classical(1), SqueezingSpec.classical(2),
                         SampleSpec.transparent(2))

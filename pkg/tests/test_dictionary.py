import numpy as np
import pytest

from tdecs import dictionary as dct
from tdecs.errors import ParameterError
from tdecs.recovery import compress_dictionary
from tdecs.sensing import random_demodulator
from tdecs.signal_model import chirp_template


def support_overlap_window(spec, k):
    """Indices whose nonzero template samples share a sample with atom k's (circularly)."""
    g = chirp_template(spec, 0.0)
    nz = set(np.flatnonzero(g).tolist())
    out = set()
    for i in range(spec.N):
        shifted = {(s + i - k) % spec.N for s in nz}
        if shifted & nz:
            out.add(i)
    return out


def test_build_columns(spec, psi):
    np.testing.assert_array_equal(psi.atoms[:, 0], chirp_template(spec, 0.0))
    for n in (1, 17, 250, 460, 499):
        np.testing.assert_array_equal(psi.atoms[:, n], np.roll(psi.atoms[:, 0], n))
    assert psi.delta == pytest.approx(2e-8)


def test_gram_diagonal(psi, rng):
    d0 = np.vdot(psi.atoms[:, 0], psi.atoms[:, 0])
    for n in rng.integers(0, psi.N, size=20):
        assert np.vdot(psi.atoms[:, n], psi.atoms[:, n]) == pytest.approx(d0, rel=1e-14)


def test_correlation_proxy_zero_and_identity(psi):
    A = psi.atoms
    assert not np.any(dct.correlation_proxy(np.zeros(psi.N), A))
    assert np.argmax(dct.correlation_proxy(A[:, 123], A)) == 123
    with pytest.raises(ParameterError):
        dct.correlation_proxy(np.zeros(3), A)


def test_correlation_proxy_compressed_peak(psi):
    hits = 0
    for trial in range(100):
        rng = np.random.default_rng(trial)
        phi = random_demodulator(psi.N, 0.5, rng)
        C = compress_dictionary(phi, psi)
        p = int(rng.integers(0, psi.N))
        hits += int(np.argmax(dct.correlation_proxy(C[:, p], C)) == p)
    assert hits >= 99


def test_coherence(psi):
    assert dct.coherence(7, 7, psi) == pytest.approx(1.0, abs=1e-14)
    assert dct.coherence(3, 40, psi) == dct.coherence(40, 3, psi)
    for k in range(50, 451):
        assert dct.coherence(0, k, psi) == 0.0
    with pytest.raises(ParameterError):
        dct.coherence(0, psi.N, psi)


def test_band_empty(psi):
    assert dct.band(0.0, [], psi) == set()


@pytest.mark.parametrize("k", [0, 200, 480])
def test_band_eta_zero_window(spec, psi, k):
    b = dct.band(0.0, {k}, psi)
    window = support_overlap_window(spec, k)
    assert len(window) == 97
    assert b <= window and k in b
    # the only gaps are exact coherence nulls of the chirp (shift of T/2)
    for i in window - b:
        assert abs(np.vdot(psi.atoms[:, i], psi.atoms[:, k])) < 1e-12
    assert len(window - b) == 2


def test_band_maximal_eta_keeps_self(psi):
    assert dct.band(1.0, {42}, psi) == {42}


def test_band_union(psi):
    assert dct.band(0.0, {10, 300}, psi) == dct.band(0.0, {10}, psi) | dct.band(0.0, {300}, psi)


def test_band_negative_eta(psi):
    with pytest.raises(ParameterError):
        dct.band(-0.1, {1}, psi)


def test_geometry_same_for_every_p(psi):
    angles = [dct.adjacent_angle(psi, p) for p in range(psi.N)]
    assert np.ptp(angles) < 1e-10
    arcs = np.array([dct._three_point_arc(psi, p) for p in range(psi.N)])
    assert np.ptp(arcs[:, 0]) < 1e-10 and np.ptp(arcs[:, 1]) < 1e-10


@pytest.mark.parametrize("convention", ["arc", "norm"])
def test_geometry_inverse(psi, convention):
    g = dct.polar_geometry(psi, convention)
    assert g.r > 0 and 0 < g.theta < np.pi
    np.testing.assert_allclose(g.A @ dct.arc_matrix(g.r, g.theta), np.eye(3), atol=1e-12)


def test_geometry_norm_convention_radius(psi):
    g = dct.polar_geometry(psi, "norm")
    assert g.r == pytest.approx(1.0, abs=1e-14)
    assert np.cos(g.theta) == pytest.approx(np.real(np.vdot(psi.atoms[:, 0], psi.atoms[:, 1])))


def test_geometry_arc_passes_through_atoms(psi):
    # the fitted circle must reproduce the three atoms exactly
    g = dct.polar_geometry(psi)
    triple = psi.atoms[:, [99, 100, 101]].T
    center, u, v = g.A @ triple
    for phi, atom in zip((-g.theta, 0.0, g.theta), triple):
        np.testing.assert_allclose(center + g.r * np.cos(phi) * u + g.r * np.sin(phi) * v,
                                   atom, atol=1e-12)
    # in-plane directions are orthonormal in the real inner product
    assert np.real(np.vdot(u, v)) == pytest.approx(0.0, abs=1e-12)
    assert np.linalg.norm(u) == pytest.approx(1.0, rel=1e-9)
    assert np.linalg.norm(v) == pytest.approx(1.0, rel=1e-9)


def test_geometry_unknown_convention(psi):
    with pytest.raises(ParameterError):
        dct.polar_geometry(psi, "bogus")

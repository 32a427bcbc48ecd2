import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from tdecs import dictionary as dct
from tdecs.errors import ParameterError, SelectionExhaustedError
from tdecs.harness import tau_mse
from tdecs.recovery import (InterpolationKind, compress_dictionary, ibomp,
                            parabolic_interpolate, polar_interpolate)
from tdecs.sensing import measure, random_demodulator
from tdecs.signal_model import (SceneDrawSpec, SparseScene, chirp_template, draw_scene,
                                synthesize)

DELTA = 2e-8


def parabola_vertex(values, n, delta):
    # fit through (n-1, n, n+1) * delta independently of the closed form
    x = (np.arange(n - 1, n + 2)) * delta
    a, b, _ = np.polyfit(x / delta, values, 2)
    return -b / (2 * a) * delta


@pytest.mark.parametrize("vals, offset", [((1, 2, 1), 0.0), ((0, 1, 1), 0.5), ((1, 1, 1), 0.0)])
def test_parabolic_examples(vals, offset):
    proxy = np.zeros(500)
    proxy[199:202] = vals
    assert parabolic_interpolate(proxy, 200, DELTA) == pytest.approx((200 + offset) * DELTA)


def test_parabolic_matches_polyfit(rng):
    for _ in range(20):
        vals = np.sort(rng.uniform(0.1, 1, 3))[[0, 2, 1]]  # peak in the middle
        proxy = np.zeros(50)
        proxy[9:12] = vals
        assert parabolic_interpolate(proxy, 10, DELTA) == pytest.approx(
            parabola_vertex(vals, 10, DELTA), rel=1e-9)


def test_parabolic_wraps():
    proxy = np.zeros(10)
    proxy[[9, 0, 1]] = (0, 1, 1)
    assert parabolic_interpolate(proxy, 0, 1.0) == pytest.approx(0.5)


def _triple(C, p):
    return C[:, [p - 1, p, p + 1]]


def test_polar_on_grid(psi, geom):
    C = psi.atoms
    tau, alpha = polar_interpolate(C[:, 200], _triple(C, 200), geom, 200, DELTA)
    assert tau == pytest.approx(200 * DELTA, abs=1e-12 * DELTA)
    assert abs(alpha - 1) < 1e-8


@pytest.mark.parametrize("frac", [-0.5, -0.3, -0.1, 0.1, 0.3, 0.5])
def test_polar_off_grid_identity_sensing(spec, psi, geom, frac):
    phi = random_demodulator(spec.N, 1.0, np.random.default_rng(4))
    C = compress_dictionary(phi, psi)
    truth = (200 + frac) * DELTA
    y = measure(phi, chirp_template(spec, truth))
    tau, _ = polar_interpolate(y, _triple(C, 200), geom, 200, DELTA)
    assert abs(tau - truth) < 0.1 * DELTA


def test_polar_scaled(psi, geom):
    C = psi.atoms
    tau, alpha = polar_interpolate(2.5 * C[:, 30], _triple(C, 30), geom, 30, DELTA)
    assert tau == pytest.approx(30 * DELTA)
    assert alpha == pytest.approx(2.5, abs=1e-8)


@settings(max_examples=40, deadline=None)
@given(st.floats(-0.5, 0.5), st.floats(0.1, 20), st.floats(-np.pi, np.pi))
def test_polar_scale_equivariance(frac, mag, phase):
    from tdecs.signal_model import ChirpSpec
    spec = ChirpSpec()
    psi = dct.build(spec)
    geom = dct.polar_geometry(psi)
    y = chirp_template(spec, (100 + frac) * DELTA)
    gamma = mag * np.exp(1j * phase)
    t1, a1 = polar_interpolate(y, _triple(psi.atoms, 100), geom, 100, DELTA)
    t2, a2 = polar_interpolate(gamma * y, _triple(psi.atoms, 100), geom, 100, DELTA)
    assert abs(t2 - t1) <= 1e-9 * DELTA
    assert abs(a2 - gamma * a1) <= 1e-9 * abs(gamma * a1)


def test_polar_rank_deficient_falls_back(geom):
    col = np.arange(1, 11, dtype=complex)
    Q = np.column_stack([col, col, col])
    tau, alpha = polar_interpolate(3 * col, Q, geom, 7, DELTA)
    assert tau == 7 * DELTA and alpha == pytest.approx(3)


def test_polar_bad_shape(geom):
    with pytest.raises(ParameterError):
        polar_interpolate(np.ones(5), np.ones((4, 3)), geom, 1, DELTA)


@pytest.mark.parametrize("kind", list(InterpolationKind))
def test_ibomp_single_on_grid(spec, psi, kind, rng):
    phi = random_demodulator(spec.N, 0.6, rng)
    y = measure(phi, psi.atoms[:, 321])
    res = ibomp(y, phi, psi, 1, 0.0, kind)
    assert res.delays[0] == pytest.approx(321 * DELTA, abs=1e-9 * DELTA)
    assert abs(res.amplitudes[0] - 1) < 1e-8


def test_ibomp_three_on_grid_full_rate(spec, psi, rng):
    phi = random_demodulator(spec.N, 1.0, rng)
    scene = SparseScene.from_pulses([(3 - 2j, 40 * DELTA), (-1 + 1j, 190 * DELTA),
                                     (7 + 0.5j, 400 * DELTA)])
    f = synthesize(spec, scene)
    y = measure(phi, f)
    res = ibomp(y, phi, psi, 3)
    np.testing.assert_array_equal(res.indices, [40, 190, 400])
    assert tau_mse(scene.delays, res.delays) == 0
    assert res.residual_norm < 1e-8 * np.linalg.norm(y)
    np.testing.assert_allclose(res.amplitudes, scene.amplitudes, atol=1e-8)
    np.testing.assert_allclose(res.reconstructed, f, atol=1e-8)


def _trial(spec, psi, geom, kappa, seed):
    rng = np.random.default_rng(seed)
    scene = draw_scene(SceneDrawSpec.for_chirp(spec, 3), rng)
    phi = random_demodulator(spec.N, kappa, rng)
    y = measure(phi, synthesize(spec, scene))
    return scene, phi, y, compress_dictionary(phi, psi)


def test_interpolation_ordering_full_rate(spec, psi, geom):
    errs = {k: [] for k in InterpolationKind}
    for seed in range(100):
        scene, phi, y, C = _trial(spec, psi, geom, 1.0, seed)
        for kind in InterpolationKind:
            res = ibomp(y, phi, psi, 3, 0.0, kind, compressed=C, geom=geom)
            errs[kind].append(tau_mse(scene.delays, res.delays))
    mse = {k: np.mean(v) for k, v in errs.items()}
    assert mse[InterpolationKind.POLAR] < mse[InterpolationKind.PARABOLIC] < mse[InterpolationKind.NONE]


def test_bomp_quantization_floor_single_pulse(spec, psi):
    rng = np.random.default_rng(99)
    phi = random_demodulator(spec.N, 1.0, rng)
    C = compress_dictionary(phi, psi)
    errs = []
    for _ in range(1000):
        tau = rng.uniform(0, spec.tau_max)
        y = measure(phi, chirp_template(spec, tau))
        res = ibomp(y, phi, psi, 1, compressed=C)
        errs.append(tau_mse([tau], res.delays))
    assert 2.5e-5 <= np.mean(errs) <= 4e-5


@pytest.mark.parametrize("kind", list(InterpolationKind))
@pytest.mark.parametrize("seed", range(5))
def test_ibomp_invariants(spec, psi, geom, kind, seed):
    scene, phi, y, C = _trial(spec, psi, geom, 0.5, seed)
    history = []
    res = ibomp(y, phi, psi, 3, 0.0, kind, compressed=C, geom=geom, history=history)
    norms = [np.linalg.norm(y)]
    for step in history:
        B, r = step["basis"], step["residual"]
        np.testing.assert_allclose(r, y - B @ step["coef"], atol=1e-9 * np.linalg.norm(y))
        for b in B.T:
            assert abs(np.vdot(b, r)) <= 1e-8 * np.linalg.norm(y) * np.linalg.norm(b)
        norms.append(np.linalg.norm(r))
    assert np.all(np.diff(norms) <= 1e-12 * norms[0])
    idx = [h["index"] for h in history]
    for a in idx:
        assert not (set(idx) - {a}) & dct.band(0.0, {a}, psi)
    assert len(res.delays) == len(res.amplitudes) == 3
    assert np.all(np.diff(res.delays) > 0)


def test_ibomp_selection_exhausted(spec, psi, rng):
    phi = random_demodulator(spec.N, 1.0, rng)
    y = measure(phi, psi.atoms[:, 0])
    with pytest.raises(SelectionExhaustedError):
        ibomp(y, phi, psi, 60)


def test_ibomp_residual_threshold_mode(spec, psi, rng):
    phi = random_demodulator(spec.N, 1.0, rng)
    y = measure(phi, 2 * psi.atoms[:, 77])
    res = ibomp(y, phi, psi, 3, residual_tol=1e-6)
    assert res.K == 1 and res.indices == [77]


def test_ibomp_bad_args(spec, psi, rng):
    phi = random_demodulator(spec.N, 0.5, rng)
    with pytest.raises(ParameterError):
        ibomp(np.zeros(phi.M), phi, psi, 0)
    with pytest.raises(ParameterError):
        ibomp(np.zeros(phi.M + 1), phi, psi, 1)


def test_ibomp_wrapped_grid_atom_is_usable(spec, psi):
    # a measurement that points at the wrap-around column must not make the basis singular
    phi = random_demodulator(spec.N, 1.0, np.random.default_rng(0))
    y = phi.apply(psi.atoms[:, 499])
    res = ibomp(y, phi, psi, 1)
    assert res.indices == [499]
    assert res.residual_norm < 1e-10

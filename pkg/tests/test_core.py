import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from gaussinterf.core import (
    GaussianState,
    NoiseChannel,
    Source,
    SymplecticTransform,
    apply,
    beam_splitter,
    displaced_thermal,
    displacement,
    loss_channel,
    make_element,
    mean_photon,
    omega,
    phase_shift,
    reduced,
    sample_phase_point,
    squeezer,
    tensor,
    thermal,
    two_mode_squeezer,
    vacuum,
)

angles = st.floats(0.0, 2 * math.pi, allow_nan=False)
unit = st.floats(0.0, 1.0, allow_nan=False)
gains = st.floats(0.0, 2.0, allow_nan=False)
squeezes = st.floats(-2.0, 2.0, allow_nan=False)


@st.composite
def elements(draw):
    kind = draw(st.sampled_from(["beam_splitter", "two_mode_squeezer", "phase_shift", "squeezer", "displacement"]))
    if kind == "beam_splitter":
        return make_element(kind, mu=draw(unit))
    if kind == "two_mode_squeezer":
        return make_element(kind, r=draw(gains), phi=draw(angles))
    if kind == "phase_shift":
        return make_element(kind, phi=draw(angles))
    if kind == "squeezer":
        return make_element(kind, w=draw(squeezes), alpha=draw(angles))
    return make_element(kind, d=draw(st.floats(0, 10)), beta=draw(angles))


@st.composite
def two_mode_states(draw):
    # random physical state: symplectic image of a thermal product state
    V1, V2 = draw(st.floats(1, 50)), draw(st.floats(1, 50))
    s = tensor(thermal(V1), thermal(V2))
    s = apply(two_mode_squeezer(draw(gains), draw(angles)), s)
    s = apply(squeezer(draw(squeezes), draw(angles)), s, [1])
    mean = np.array(draw(st.lists(st.floats(-5, 5), min_size=4, max_size=4)))
    return GaussianState(mean, s.cov)


def test_vacuum():
    v = vacuum(1)
    assert np.array_equal(v.mean, np.zeros(2))
    assert np.array_equal(v.cov, np.eye(2))
    assert np.array_equal(vacuum(2).cov, np.eye(4))
    assert mean_photon(v, 0) == 0.0
    with pytest.raises(ValueError):
        vacuum(0)


def test_state_invariants_enforced():
    with pytest.raises(ValueError):
        GaussianState(np.zeros(2), np.array([[1.0, 0.1], [0.0, 1.0]]))
    with pytest.raises(ValueError):
        GaussianState(np.zeros(2), np.diag([1.0, -0.5]))
    with pytest.raises(ValueError):
        GaussianState(np.zeros(3), np.eye(3))


def test_source_variance_and_photons():
    s = Source(5, 10)
    assert s.V == 75.0
    assert s.mean_photons == 37.0
    assert Source(math.sqrt(10)).V == pytest.approx(10.0)
    assert Source.coherent(100).V == pytest.approx(100.0)
    assert Source.thermal(25).R == 5.0
    with pytest.raises(ValueError):
        Source(0.5)
    assert Source(0.5, allow_unphysical=True).V == 0.25


def test_displaced_thermal():
    st0 = displaced_thermal(Source(5, 10), 0.0)
    assert np.allclose(st0.mean, [10, 0])
    assert np.allclose(st0.cov, 25 * np.eye(2))
    vac = displaced_thermal(Source(1, 0), 1.234)
    assert np.allclose(vac.mean, 0) and np.allclose(vac.cov, np.eye(2))


def test_noise_channel_ranges():
    with pytest.raises(ValueError):
        NoiseChannel(1.1)
    with pytest.raises(ValueError):
        NoiseChannel(0.5, 0.9)
    assert NoiseChannel(1.0, 3.0).is_identity


def test_element_special_cases():
    assert np.allclose(beam_splitter(1.0).matrix, np.eye(4))
    swap = beam_splitter(0.0).matrix
    # mode swap with a sign flip on the first output
    assert np.allclose(swap[:2, 2:], np.eye(2)) and np.allclose(swap[2:, :2], -np.eye(2))
    assert np.allclose(two_mode_squeezer(0.0, 1.3).matrix, np.eye(4))
    with pytest.raises(ValueError):
        beam_splitter(1.5)
    with pytest.raises(ValueError):
        two_mode_squeezer(-0.1, 0.0)
    with pytest.raises(ValueError):
        make_element("mirror")


def test_non_symplectic_rejected():
    with pytest.raises(ValueError):
        SymplecticTransform(np.diag([2.0, 2.0]))


def test_apply_examples():
    assert np.allclose(apply(phase_shift(0.7), vacuum(1)).cov, np.eye(2))
    q = 1.7
    sq = apply(squeezer(math.log(q), 0.0), vacuum(1))
    assert np.allclose(sq.cov, np.diag([q * q, 1 / q**2]))
    s = thermal(3.0)
    moved = apply(displacement(2.0, 0.4), s)
    assert np.allclose(moved.mean, [2 * math.cos(0.4), 2 * math.sin(0.4)])
    assert np.array_equal(moved.cov, s.cov)


def test_apply_arity_checks():
    with pytest.raises(ValueError):
        apply(beam_splitter(0.5), vacuum(2), [0])
    with pytest.raises(ValueError):
        apply(beam_splitter(0.5), vacuum(2), [0, 0])
    with pytest.raises(ValueError):
        apply(phase_shift(0.1), vacuum(2), [2])


@given(elements())
def test_constructors_are_symplectic(t):
    n = t.modes
    assert np.max(np.abs(t.matrix @ omega(n) @ t.matrix.T - omega(n))) < 1e-10


@given(two_mode_states(), unit, gains, angles, squeezes, angles)
def test_composition_law(s, mu, r, phi, w, alpha):
    t1 = beam_splitter(mu)
    t2 = two_mode_squeezer(r, phi)
    both = apply(t2, apply(t1, s))
    composed = apply(t1.then(t2), s)
    assert np.allclose(both.mean, composed.mean, atol=1e-10, rtol=0)
    assert np.max(np.abs(both.cov - composed.cov)) < 1e-10 * max(1.0, np.max(np.abs(both.cov)))


@given(two_mode_states(), elements())
def test_apply_preserves_psd(s, t):
    modes = [0] if t.modes == 1 else [0, 1]
    out = apply(t, s, modes)
    assert out.min_eigenvalue() >= -1e-10 * max(1.0, np.max(np.abs(out.cov)))


@given(two_mode_states(), unit, st.floats(1.0, 5.0), st.integers(0, 1))
def test_loss_channel_matches_beam_splitter_and_trace(s, T, Veps, mode):
    ch = NoiseChannel(T, Veps)
    fast = loss_channel(s, mode, ch)
    # explicit oracle: append the ancilla, mix on a beam splitter, trace out
    big = tensor(s, thermal(Veps))
    mixed = apply(beam_splitter(T), big, [mode, 2])
    slow = reduced(mixed, [0, 1])
    assert np.allclose(fast.mean, slow.mean, atol=1e-12)
    assert np.max(np.abs(fast.cov - slow.cov)) < 1e-12 * max(1.0, np.max(np.abs(s.cov)))


def test_loss_channel_examples():
    s = thermal(75.0)
    same = loss_channel(s, 0, NoiseChannel(1.0, 3.0))
    assert np.array_equal(same.cov, s.cov) and np.array_equal(same.mean, s.mean)
    assert np.allclose(loss_channel(s, 0, NoiseChannel(0.0, 1.7)).cov, 1.7 * np.eye(2))
    # 0.9 * 75 + 0.1 * 1.1, frozen from the beam-splitter + trace oracle
    assert loss_channel(s, 0, NoiseChannel(0.9, 1.1)).cov[0, 0] == pytest.approx(67.61, abs=1e-12)


def test_mean_photon_examples():
    assert mean_photon(thermal(75.0)) == pytest.approx(37.0)
    assert mean_photon(GaussianState(np.array([2.0, 0.0]), np.eye(2))) == pytest.approx(1.0)


@given(two_mode_states(), angles, st.integers(0, 1))
def test_mean_photon_rotation_invariant(s, phi, mode):
    assert mean_photon(apply(phase_shift(phi), s, [mode]), mode) == pytest.approx(mean_photon(s, mode), rel=1e-12, abs=1e-12)


def test_sampling_near_singular_returns_mean():
    s = GaussianState(np.array([1.0, -2.0]), 1e-18 * np.eye(2))
    x = sample_phase_point(s, np.random.default_rng(0))
    assert np.allclose(x, s.mean, atol=1e-5)


def test_sampling_clips_tiny_negative_eigenvalue():
    cov = np.array([[1.0, 1.0], [1.0, 1.0]]) - 1e-13 * np.eye(2)
    x = sample_phase_point(GaussianState(np.zeros(2), cov), np.random.default_rng(1), size=10)
    assert x.shape == (10, 2) and np.all(np.isfinite(x))


def test_sampling_vacuum_variance():
    x = sample_phase_point(vacuum(1), np.random.default_rng(2), size=10**6)
    assert 0.99 <= x[:, 0].var() <= 1.01


def test_sampling_deterministic():
    s = thermal(4.0)
    a = sample_phase_point(s, np.random.default_rng(7), size=5)
    b = sample_phase_point(s, np.random.default_rng(7), size=5)
    assert np.array_equal(a, b)


@settings(max_examples=25)
@given(st.floats(-1.5, 1.5), angles)
def test_large_squeezing_sampling_finite(w, alpha):
    s = apply(squeezer(8 * w, alpha), vacuum(1))
    x = sample_phase_point(s, np.random.default_rng(3), size=4)
    assert np.all(np.isfinite(x))

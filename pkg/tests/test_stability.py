import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from spheroll import quasistatic as q
from spheroll import stability as s
from spheroll.errors import AmbiguousTrivialModeError, InvalidStateError
from spheroll.integrator import DriveProfile, simulate
from oracles import measure_decay


@settings(max_examples=60, deadline=None)
@given(st.integers(0, 10_000), st.integers(1, 8))
def test_qr_matches_numpy(seed, n):
    m = np.random.default_rng(seed).normal(size=(n, n))
    ours = np.sort_complex(s.spectrum(m))
    ref = np.sort_complex(np.linalg.eigvals(m))
    assert np.allclose(ours, ref, rtol=1e-9, atol=1e-9)


def test_qr_special_matrices():
    assert np.allclose(np.sort(s.spectrum(np.diag([3.0, -1.0, 2.0])).real), [-1, 2, 3])
    rot = np.array([[0.0, -2.0], [2.0, 0.0]])
    assert np.allclose(np.sort_complex(s.spectrum(rot)), [-2j, 2j])
    jordan = np.array([[1.0, 1.0, 0.0], [0.0, 1.0, 1.0], [0.0, 0.0, 1.0]])
    assert np.allclose(s.spectrum(jordan), 1.0, atol=1e-5)


def test_spectrum_sorted_and_validated():
    eig = s.spectrum(np.diag([1.0, 5.0, -2.0]))
    assert list(eig.real) == [5.0, 1.0, -2.0]
    with pytest.raises(InvalidStateError):
        s.spectrum(np.ones((2, 3)))
    with pytest.raises(InvalidStateError):
        s.spectrum(np.array([[np.nan]]))


def test_hessenberg_similarity():
    m = np.random.default_rng(0).normal(size=(6, 6))
    h = s._hessenberg(m)
    assert np.allclose(np.tril(h, -2), 0.0)
    assert np.allclose(np.sort_complex(np.linalg.eigvals(h)), np.sort_complex(np.linalg.eigvals(m)))


def test_companion_structure(params):
    jac = s.linearize(params, q.solve(params, math.pi))
    assert np.array_equal(jac[:3, :3], np.zeros((3, 3)))
    assert np.array_equal(jac[:3, 3:], np.eye(3))


def test_zero_perturbation_is_steady(params):
    qs = q.solve(params, math.pi)
    assert np.allclose(s.co_rotating_acceleration(params, qs, np.zeros(3), np.zeros(3)), 0.0, atol=1e-12)


def test_orientation_offset_inverts_perturbation(params):
    qs = q.solve(params, math.pi)
    alpha = np.array([1e-3, -2e-3, 5e-4])
    st0 = s.perturbed_state(params, qs, alpha, np.zeros(3))
    assert np.allclose(s.orientation_offset(qs, st0, 0.0), alpha, atol=1e-14)
    # the unperturbed motion keeps a zero offset as time goes on
    traj = simulate(params, s.perturbed_state(params, qs, np.zeros(3), np.zeros(3)), DriveProfile.constant(math.pi), 5.0)
    offs = [np.linalg.norm(s.orientation_offset(qs, traj.state(i), traj.t[i])) for i in range(len(traj))]
    assert max(offs) < 1e-7


def test_trivial_mode(params):
    rep = s.analyze(params, q.solve(params, 1.5 * math.pi))
    assert abs(rep.eigenvalues[rep.trivial_mode_index]) < 1e-6
    assert rep.trivial_alignment > 0.99


def test_recovery_rules():
    tau, stable, idx = s.recovery(np.array([1e-9, -0.1 + 2j, -0.1 - 2j, -1.0]))
    assert idx == 0 and stable and tau == pytest.approx(10.0)
    tau, stable, _ = s.recovery(np.array([0.0, 0.2, -1.0]))
    assert not stable and tau == math.inf
    with pytest.raises(AmbiguousTrivialModeError) as info:
        s.recovery(np.array([1e-9, -1e-8, -1.0]))
    assert list(info.value.candidates) == [0, 1]


def test_unconverged_state_rejected(params):
    qs = q.solve(params, math.pi)
    bad = q.QuasiStaticState(qs.omega0, qs.Omega * 1.1, qs.theta0, qs.xi, qs.R0, residual_norm=1e-3)
    with pytest.raises(InvalidStateError):
        s.linearize(params, bad)


def test_stable_over_range_with_seven_second_recovery(params, table):
    reports = s.sweep(params, table)
    assert all(r.stable for r in reports)
    mid = reports[len(reports) // 2]
    assert mid.tau == pytest.approx(7.0, rel=0.30)


def test_more_damping_is_not_less_stable(params):
    for w in (math.pi, 2 * math.pi):
        base = s.analyze(params, q.solve(params, w)).dominant.real
        more = params.with_(k0=1.5 * params.k0)
        assert s.analyze(more, q.solve(more, w)).dominant.real <= base


def test_nonlinear_decay_matches_linearization(params):
    lam, rate, freq = measure_decay(params, math.pi)
    assert rate == pytest.approx(lam.real, rel=0.20)
    assert freq == pytest.approx(abs(lam.imag), rel=0.20)


def test_locus_csv(params, table, tmp_path):
    reports = s.sweep(params, [table[1], table[10]])
    path = tmp_path / "locus.csv"
    s.write_locus_csv(reports, path)
    lines = path.read_text().splitlines()
    assert lines[0] == "omega0,index,re,im,trivial"
    assert len(lines) == 1 + 12
    assert sum(int(l.split(",")[-1]) for l in lines[1:]) == 2

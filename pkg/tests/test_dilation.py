import math

import numpy as np
import pytest
from scipy.integrate import solve_ivp
from scipy.linalg import expm

from nhtopo.bloch import (
    SIGMA_X,
    SIGMA_Y,
    SIGMA_Z,
    ComplexField,
    ModelParams,
    bloch_field,
    hamiltonian,
)
from nhtopo.dilation import (
    ANCILLA_MINUS,
    ANCILLA_PLUS,
    DilatedSchedule,
    DilatedState,
    ancilla_prep_unitary,
    auto_eta0,
    compile_pulses,
    dilated_schedule,
    export_pulse_program,
    metric_eta,
    prepare_dilated_state,
    project_readout,
    pulse_slice_unitary,
    readout_rotation,
    trotter_evolve,
)
from nhtopo.errors import (
    EmptyProjectionError,
    NonHermitianResidualError,
    PositivityLostError,
)
from nhtopo.evolution import StateVec, texture_series

I2 = np.eye(2, dtype=complex)
EXP_PARAMS = ModelParams(J0=1.0, J1=1.0, J2=0.0, delta=0.3, hz=0.5)
SHOWCASE_K = -0.448 * math.pi
SHOWCASE_H = bloch_field(EXP_PARAMS, SHOWCASE_K)


def hermitize(a):
    return np.abs(a - a.conj().T).max()


# ---------------------------------------------------------------- metric

def test_metric_hermitian_limit():
    h = bloch_field(ModelParams(J0=0.5, J1=1.0, J2=0.0, delta=0.0, hz=0.3), 0.7)
    for ms in metric_eta(h, 0.8, np.linspace(0, 4, 9)):
        assert np.abs(ms.M - (1 + 0.8**2) * I2).max() < 1e-12
        assert np.abs(ms.eta - 0.8 * I2).max() < 1e-12


def test_metric_initial_value():
    ms = metric_eta(SHOWCASE_H, 1.5, np.array([0.0]))[0]
    assert np.abs(ms.M - (1 + 1.5**2) * I2).max() < 1e-12
    assert np.abs(ms.eta - 1.5 * I2).max() < 1e-12


def test_metric_matches_ode_oracle():
    # dM/dt = -i (H^dag M - M H), propagated independently
    H = hamiltonian(SHOWCASE_H)
    eta0 = 2.0
    m0 = (1 + eta0**2) * I2

    def rhs(t, y):
        M = y.reshape(2, 2)
        return (-1j * (H.conj().T @ M - M @ H)).ravel()

    times = np.linspace(0.0, 3.0, 13)
    sol = solve_ivp(rhs, (0.0, 3.0), m0.ravel(), t_eval=times,
                    rtol=1e-11, atol=1e-12, method="DOP853")
    states = metric_eta(SHOWCASE_H, eta0, times)
    for i, ms in enumerate(states):
        M_ode = sol.y[:, i].reshape(2, 2)
        assert np.abs(ms.M - M_ode).max() < 1e-8


def test_eta_squared_and_hermitian():
    for ms in metric_eta(SHOWCASE_H, 2.0, np.linspace(0, 3, 11)):
        assert hermitize(ms.M) < 1e-12
        assert hermitize(ms.eta) < 1e-12
        assert np.abs(ms.eta @ ms.eta - (ms.M - I2)).max() < 1e-10


def test_positivity_lost_raises():
    with pytest.raises(PositivityLostError):
        metric_eta(SHOWCASE_H, 0.5, np.linspace(0, 3, 31))


def test_auto_eta0_doubles_from_half():
    eta0 = auto_eta0(SHOWCASE_H, 3.0)
    assert eta0 == 2.0   # 0.5 -> 1.0 -> 2.0 for this field and horizon
    metric_eta(SHOWCASE_H, eta0, np.linspace(0, 3, 31))   # must not raise


# ---------------------------------------------------------------- schedule

def test_schedule_hermitian_limit_collapse():
    h = bloch_field(ModelParams(J0=0.5, J1=1.0, J2=0.0, delta=0.0, hz=0.3), 0.7)
    H = hamiltonian(h)
    sch = dilated_schedule(h, 0.9, 0.01, 50)
    assert np.abs(sch.gam).max() < 1e-10
    for m in (0, 25, 49):
        lam_m = (sch.lam[m, 0] * I2 + sch.lam[m, 1] * SIGMA_X
                 + sch.lam[m, 2] * SIGMA_Y + sch.lam[m, 3] * SIGMA_Z)
        assert np.abs(lam_m - H).max() < 1e-10


def test_schedule_generator_hermitian_and_reconstructs():
    sch = dilated_schedule(SHOWCASE_H, 2.0, 0.003, 100, k=SHOWCASE_K)
    for m in (0, 50, 99):
        G = sch.generator(m)
        assert hermitize(G) < 1e-12
        # re-projecting the matrix onto the Pauli basis returns the stored
        # coefficients (completeness of the expansion)
        lam_back = [np.trace(np.kron(P, I2).conj().T @ G).real / 4
                    for P in (I2, SIGMA_X, SIGMA_Y, SIGMA_Z)]
        gam_back = [np.trace(np.kron(P, SIGMA_Z).conj().T @ G).real / 4
                    for P in (I2, SIGMA_X, SIGMA_Y, SIGMA_Z)]
        assert np.abs(np.array(lam_back) - sch.lam[m]).max() < 1e-12
        assert np.abs(np.array(gam_back) - sch.gam[m]).max() < 1e-12


def test_schedule_matches_defining_identities():
    # Lambda - i Gamma eta = H and i Gamma + Lambda eta = i eta' + eta H
    # on the slice grid (the invariant structure of the dilation)
    tau = 0.003
    sch = dilated_schedule(SHOWCASE_H, 2.0, tau, 200, k=SHOWCASE_K)
    H = hamiltonian(SHOWCASE_H)
    t_mid = (np.arange(200) + 0.5) * tau
    states = metric_eta(SHOWCASE_H, 2.0, t_mid)
    h_fd = 1e-6
    for m in (0, 60, 199):
        eta = states[m].eta
        eta_p = metric_eta(SHOWCASE_H, 2.0, np.array([t_mid[m] + h_fd]))[0].eta
        eta_m = metric_eta(SHOWCASE_H, 2.0, np.array([t_mid[m] - h_fd]))[0].eta
        deta = (eta_p - eta_m) / (2 * h_fd)
        lam_m = (sch.lam[m, 0] * I2 + sch.lam[m, 1] * SIGMA_X
                 + sch.lam[m, 2] * SIGMA_Y + sch.lam[m, 3] * SIGMA_Z)
        gam_m = (sch.gam[m, 0] * I2 + sch.gam[m, 1] * SIGMA_X
                 + sch.gam[m, 2] * SIGMA_Y + sch.gam[m, 3] * SIGMA_Z)
        assert np.abs(lam_m - 1j * gam_m @ eta - H).max() < 1e-5
        assert np.abs(1j * gam_m + lam_m @ eta - (1j * deta + eta @ H)).max() < 1e-5


def test_schedule_residue_guard():
    # a crude finite-difference residue bound must trip for huge tau
    with pytest.raises(NonHermitianResidualError):
        dilated_schedule(SHOWCASE_H, 2.0, 0.4, 7, hermiticity_bound=1e-12)


# ---------------------------------------------------------------- trotter

def test_single_term_slice_is_exact():
    sch = DilatedSchedule(tau=0.25, lam=np.array([[0.0, 0.3, 0.0, 0.0]]),
                          gam=np.zeros((1, 4)), k=None, eta0=1.0)
    out = trotter_evolve(sch, DilatedState(np.array([1, 0, 0, 0], dtype=complex)))
    expected = expm(-1j * 0.25 * np.kron(0.3 * SIGMA_X, I2)) @ np.array([1, 0, 0, 0])
    assert np.abs(out[-1] - expected).max() < 1e-12


def test_trotter_preserves_norm():
    sch = dilated_schedule(SHOWCASE_H, 2.0, 0.003, 300, k=SHOWCASE_K)
    psi0 = prepare_dilated_state(np.array([1.0, 0j]), 2.0)
    states = trotter_evolve(sch, psi0)
    norms = np.linalg.norm(states, axis=1)
    assert np.abs(norms - 1.0).max() < 1e-12


def test_trotter_first_order_against_ode_oracle():
    # fidelity defect versus the exactly integrated time-dependent
    # generator halves when the slice count doubles
    eta0 = 2.0
    T = 1.5
    psi0 = prepare_dilated_state(np.array([0.8, 0.6j]), eta0).amplitudes

    def hsa(t):
        st = metric_eta(SHOWCASE_H, eta0, np.array([t, t + 1e-6, t - 1e-6]))
        eta = st[0].eta
        deta = (st[1].eta - st[2].eta) / 2e-6
        H = hamiltonian(SHOWCASE_H)
        Minv = np.linalg.inv(st[0].M)
        lam = (H + (1j * deta + eta @ H) @ eta) @ Minv
        gam = 1j * (H @ eta - eta @ H - 1j * deta) @ Minv
        lam = (lam + lam.conj().T) / 2
        gam = (gam + gam.conj().T) / 2
        return np.kron(lam, I2) + np.kron(gam, SIGMA_Z)

    sol = solve_ivp(lambda t, y: -1j * (hsa(t) @ y), (0, T), psi0,
                    rtol=1e-11, atol=1e-12, method="DOP853")
    exact = sol.y[:, -1]

    defects = []
    for n in (125, 250, 500):
        sch = dilated_schedule(SHOWCASE_H, eta0, T / n, n, k=SHOWCASE_K)
        states = trotter_evolve(sch, DilatedState(psi0))
        defects.append(np.linalg.norm(states[-1] - exact))
    assert defects[0] / defects[1] == pytest.approx(2.0, abs=0.3)
    assert defects[1] / defects[2] == pytest.approx(2.0, abs=0.3)


def test_dilated_state_structure_under_exact_evolution():
    # the b- component of the exactly evolved dilated state reproduces the
    # non-unitary trajectory e^{-iHt} psi0 (componentwise, small rel error)
    eta0 = 2.0
    psi_sys = np.array([0.6 + 0.2j, 0.78])
    psi_sys = psi_sys / np.linalg.norm(psi_sys)
    Psi0 = prepare_dilated_state(psi_sys, eta0).amplitudes
    H = hamiltonian(SHOWCASE_H)

    def hsa(t):
        st = metric_eta(SHOWCASE_H, eta0, np.array([t, t + 1e-6, t - 1e-6]))
        eta, deta = st[0].eta, (st[1].eta - st[2].eta) / 2e-6
        Minv = np.linalg.inv(st[0].M)
        lam = (H + (1j * deta + eta @ H) @ eta) @ Minv
        gam = 1j * (H @ eta - eta @ H - 1j * deta) @ Minv
        lam = (lam + lam.conj().T) / 2
        gam = (gam + gam.conj().T) / 2
        return np.kron(lam, I2) + np.kron(gam, SIGMA_Z)

    times = np.linspace(0.0, 3.0, 7)
    sol = solve_ivp(lambda t, y: -1j * (hsa(t) @ y), (0, 3.0), Psi0,
                    t_eval=times, rtol=1e-11, atol=1e-12, method="DOP853")
    basis = np.eye(2, dtype=complex)
    for i, t in enumerate(times):
        Psi = sol.y[:, i]
        comp = np.array([np.vdot(np.kron(e, ANCILLA_MINUS), Psi) for e in basis])
        target = expm(-1j * H * t) @ psi_sys / math.sqrt(1 + eta0**2)
        assert np.abs(comp - target).max() / np.abs(target).max() < 1e-6


# ---------------------------------------------------------------- pulses

def test_compile_pulse_formulas():
    sch = DilatedSchedule(tau=0.01, lam=np.array([[0.0, 0.3, 0.4, 0.0]]),
                          gam=np.array([[0.0, 0.0, 0.0, 0.0]]), k=None, eta0=1.0)
    p = compile_pulses(sch, 215.0)[0]
    assert p.b1 == pytest.approx(0.01 / math.pi * 0.5, abs=1e-15)
    assert p.phi1 == pytest.approx(math.atan2(0.4, 0.3), abs=1e-12)
    assert p.phi1 == pytest.approx(0.9273, abs=1e-4)
    assert p.tau1 == 0.0   # gamma_x = 0 -> zero coupling duration


def test_compiled_pulse_reproduces_slice_unitary():
    from nhtopo.dilation import _slice_unitaries

    sch = dilated_schedule(SHOWCASE_H, 2.0, 0.003, 60, k=SHOWCASE_K)
    U = _slice_unitaries(sch)
    for m, p in enumerate(compile_pulses(sch, 215.0)):
        Up = pulse_slice_unitary(p, sch.tau, 215.0, identity_coefficient=sch.lam[m, 0])
        assert np.abs(Up - U[m]).max() < 1e-8


def test_pulse_export_formats(tmp_path):
    sch = dilated_schedule(SHOWCASE_H, 2.0, 0.01, 10, k=SHOWCASE_K)
    pulses = compile_pulses(sch, 215.0)
    assert any(p.tau1 < 0 or p.tau2 < 0 or p.tau3 < 0 for p in pulses)

    plain = tmp_path / "pulses.txt"
    export_pulse_program(pulses, plain)
    lines = plain.read_text().splitlines()
    assert lines[0].startswith("#")
    assert len(lines) == 11
    first = lines[1].split()
    assert len(first) == 8
    assert float(first[1]) == pytest.approx(pulses[0].b1, rel=1e-12)

    hw = tmp_path / "pulses_hw.txt"
    export_pulse_program(pulses, hw, hardware=True)
    for line in hw.read_text().splitlines()[1:]:
        cols = line.split()
        assert len(cols) == 11
        assert all(float(c) >= 0.0 for c in cols[5:8])   # durations now positive
        assert all(c in ("1", "-1") for c in cols[8:])


def test_hardware_rewrite_preserves_unitary():
    # a negative coupling duration equals the positive duration with the
    # sandwich rotations phase-shifted by pi (axis reversed)
    from nhtopo.dilation import _j_coupling, _rot

    J, tau1 = 215.0, -3.7e-4
    ry_p = np.kron(_rot(SIGMA_Y, math.pi / 2), I2)
    ry_m = np.kron(_rot(SIGMA_Y, -math.pi / 2), I2)
    signed = ry_p @ _j_coupling(J, tau1) @ ry_m
    rewritten = ry_m @ _j_coupling(J, abs(tau1)) @ ry_p
    assert np.abs(signed - rewritten).max() < 1e-12


# ---------------------------------------------------------------- readout

def test_prepare_matches_circuit():
    for eta0 in (0.5, 1.0, 2.0):
        psi = np.array([0.3 - 0.4j, 0.5 + 0.1j])
        psi = psi / np.linalg.norm(psi)
        direct = prepare_dilated_state(psi, eta0).amplitudes
        circuit = np.kron(I2, ancilla_prep_unitary(eta0)) @ np.kron(psi, [1, 0])
        assert np.abs(direct - circuit).max() < 1e-12


def test_readout_rotation_maps_ancilla_basis():
    rot2 = readout_rotation()[np.ix_([0, 1], [0, 1])]
    assert np.abs(rot2 @ ANCILLA_MINUS - np.array([1, 0])).max() < 1e-12
    assert np.abs(rot2 @ ANCILLA_PLUS - np.array([0, 1])).max() < 1e-12


def test_project_readout_pure_product():
    psi = np.array([0.6, 0.8j])
    Psi = DilatedState(np.kron(psi, np.array([1.0, 0.0])))
    assert project_readout(Psi, "z") == pytest.approx(0.6**2 - 0.8**2)
    assert project_readout(Psi, "y") == pytest.approx(2 * (np.conj(0.6) * 0.8j).imag)


def test_project_readout_ignores_other_branch():
    psi = np.array([0.6, 0.8j])
    junk = np.array([1.0, -1.0j]) / math.sqrt(2)
    Psi = DilatedState(np.kron(psi, [1.0, 0.0]) + 0.7 * np.kron(junk, [0.0, 1.0]))
    clean = DilatedState(np.kron(psi, [1.0, 0.0]))
    for ax in "xyz":
        assert project_readout(Psi, ax) == pytest.approx(project_readout(clean, ax), abs=1e-12)


def test_project_readout_empty_raises():
    Psi = DilatedState(np.kron([0.6, 0.8], [0.0, 1.0]))
    with pytest.raises(EmptyProjectionError):
        project_readout(Psi, "x")


def test_end_to_end_projected_textures_track_exact():
    # full chain at the showcase momentum: prepare, trotterize, rotate,
    # project; first-order deviation shrinks with the slice count
    eta0 = 2.0
    psi_sys = np.array([1.0, 0j])
    rot = readout_rotation()
    devs = {}
    for n in (1000, 2000):
        sch = dilated_schedule(SHOWCASE_H, eta0, 3.0 / n, n, k=SHOWCASE_K)
        states = trotter_evolve(sch, prepare_dilated_state(psi_sys, eta0))
        exact = texture_series(SHOWCASE_H, StateVec(psi_sys), sch.times(), k=SHOWCASE_K)
        worst = 0.0
        for m in range(n + 1):
            out = DilatedState(rot @ states[m])
            worst = max(worst,
                        abs(project_readout(out, "x") - exact.sx[m]),
                        abs(project_readout(out, "y") - exact.sy[m]))
        devs[n] = worst
    assert devs[2000] < 1e-3
    assert devs[1000] / devs[2000] == pytest.approx(2.0, abs=0.3)

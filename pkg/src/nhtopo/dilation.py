"""Hermitian two-qubit dilation of the non-unitary single-qubit dynamics.

The non-Hermitian evolution ``psi(t) = e^{-iHt} psi0`` is embedded into a
unitary two-qubit evolution with the help of a metric ``M(t)`` and
``eta(t) = sqrt(M(t) - I)``:

    M(t)   = (eta0^2 + 1) e^{-i H^dag t} e^{i H t}          (constant H)
    Lambda = {H + [i eta' + eta H] eta} M^{-1}
    Gamma  = i [H eta - eta H - i eta'] M^{-1}
    H_sa   = Lambda (x) I  +  Gamma (x) sigma_z

The dilated state keeps the invariant structure

    Psi(t) = psi(t) (x) b-  +  eta(t) psi(t) (x) b+ ,

where the ancilla pair is fixed (by requiring the structure to be exact for
the sigma_z coupling and the published preparation circuit) to

    b- = (|0> - i |1>) / sqrt(2),     b+ = (-i |0> + |1>) / sqrt(2).

The preparation circuit R_x(pi/2) R_y(2 arctan eta0) acting on an ancilla
|0> produces exactly (b- + eta0 b+) / sqrt(1 + eta0^2), and the readout
rotation R_x(-pi/2) maps b- -> |0>, b+ -> |1>, so conditioning on the
ancilla |0> recovers the non-unitary trajectory.

Basis ordering of 4-vectors is kron(system, ancilla): index = 2 s + a.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .bloch import ComplexField, SIGMA_X, SIGMA_Y, SIGMA_Z, eigensystem, hamiltonian, texture_of_vector
from .errors import (
    EmptyProjectionError,
    NonHermitianResidualError,
    PositivityLostError,
)

__all__ = [
    "ANCILLA_MINUS",
    "ANCILLA_PLUS",
    "MetricState",
    "DilatedSchedule",
    "PulseSlice",
    "DilatedState",
    "metric_eta",
    "auto_eta0",
    "dilated_schedule",
    "trotter_evolve",
    "compile_pulses",
    "pulse_slice_unitary",
    "project_readout",
    "prepare_dilated_state",
    "ancilla_prep_unitary",
    "readout_rotation",
    "export_pulse_program",
]

I2 = np.eye(2, dtype=complex)
I4 = np.eye(4, dtype=complex)
ANCILLA_MINUS = np.array([1.0, -1.0j], dtype=complex) / math.sqrt(2.0)
ANCILLA_PLUS = np.array([-1.0j, 1.0], dtype=complex) / math.sqrt(2.0)

POSITIVITY_MARGIN = 1e-6
HERMITICITY_BOUND = 1e-6


@dataclass(frozen=True)
class MetricState:
    """Metric operator and its square root at one instant."""

    t: float
    M: np.ndarray
    eta: np.ndarray
    eta0: float


@dataclass(frozen=True)
class DilatedSchedule:
    """Per-slice Pauli coefficients of the dilated generator.

    ``lam[m, a]`` and ``gam[m, a]`` hold the coefficients of
    ``sigma_a (x) I`` and ``sigma_a (x) sigma_z`` with a = 0 (identity),
    1 (x), 2 (y), 3 (z), evaluated at the slice midpoints.
    """

    tau: float
    lam: np.ndarray
    gam: np.ndarray
    k: float | None
    eta0: float

    @property
    def n_slices(self) -> int:
        return self.lam.shape[0]

    @property
    def total_time(self) -> float:
        return self.tau * self.n_slices

    def times(self) -> np.ndarray:
        """Slice boundary times 0, tau, ..., n tau."""
        return self.tau * np.arange(self.n_slices + 1)

    def generator(self, m: int) -> np.ndarray:
        """Reconstructed 4x4 H_sa of slice m from its Pauli coefficients."""
        paulis = (I2, SIGMA_X, SIGMA_Y, SIGMA_Z)
        lam_m = sum(self.lam[m, a] * paulis[a] for a in range(4))
        gam_m = sum(self.gam[m, a] * paulis[a] for a in range(4))
        return np.kron(lam_m, I2) + np.kron(gam_m, SIGMA_Z)


@dataclass(frozen=True)
class PulseSlice:
    """Compiled control parameters of one Trotter slice.

    ``b1``/``phi1`` drive the transverse burst, ``b2`` and ``b3`` the system
    and ancilla z rotations (each inside an R_x(+-pi/2) sandwich), and
    ``tau1..tau3`` are signed J-coupling free-evolution durations.
    """

    index: int
    b1: float
    phi1: float
    b2: float
    b3: float
    tau1: float
    tau2: float
    tau3: float


@dataclass(frozen=True)
class DilatedState:
    """Four-component system (x) ancilla state."""

    amplitudes: np.ndarray

    def __post_init__(self):
        amps = np.asarray(self.amplitudes, dtype=complex)
        if amps.shape != (4,):
            raise ValueError("dilated state must be a complex 4-vector")
        object.__setattr__(self, "amplitudes", amps)


def _spectral_propagators(h: ComplexField, times: np.ndarray) -> np.ndarray:
    """e^{+iHt} for every t, shape (n, 2, 2), via the biorthogonal spectrum."""
    es = eigensystem(h)
    R = np.column_stack([es.right_plus, es.right_minus])
    L = np.vstack([es.left_plus, es.left_minus])
    phases = np.exp(1j * np.outer(times, np.array([es.E_plus, -es.E_plus])))
    return np.einsum("ij,tj,jk->tik", R, phases, L)


def _metric_arrays(h: ComplexField, eta0: float, times: np.ndarray,
                   margin: float = POSITIVITY_MARGIN):
    """Batched M(t) and eta(t); raises when M - I loses positivity."""
    A = _spectral_propagators(h, np.asarray(times, dtype=float))
    M = (1.0 + eta0**2) * np.einsum("tji,tjk->tik", np.conj(A), A)
    M = 0.5 * (M + np.conj(np.swapaxes(M, 1, 2)))   # kill rounding skew
    w, V = np.linalg.eigh(M - I2[None])
    wmin = w.min()
    if wmin <= margin:
        t_bad = float(np.asarray(times)[int(np.argmin(w.min(axis=1)))])
        raise PositivityLostError(
            f"min eig(M - I) = {wmin:.3e} <= {margin:.1e} at t = {t_bad:.4f}; "
            f"raise eta0 (currently {eta0})")
    eta = np.einsum("tij,tj,tkj->tik", V, np.sqrt(w), np.conj(V))
    return M, eta


def metric_eta(h: ComplexField, eta0: float, times: np.ndarray,
               margin: float = POSITIVITY_MARGIN) -> list[MetricState]:
    """Metric M(t) and eta(t) = sqrt(M(t) - I) at the given times.

    ``M(t) - I`` must stay positive definite on the whole sequence;
    otherwise PositivityLostError tells the caller to raise eta0.
    """
    if eta0 <= 0:
        raise ValueError("eta0 must be positive")
    times = np.asarray(times, dtype=float)
    M, eta = _metric_arrays(h, eta0, times, margin)
    return [MetricState(t=float(t), M=M[i], eta=eta[i], eta0=eta0)
            for i, t in enumerate(times)]


def auto_eta0(h: ComplexField, horizon: float, start: float = 0.5,
              min_margin: float = 1e-3, n_check: int = 257,
              max_doublings: int = 60) -> float:
    """Smallest power-of-two multiple of ``start`` keeping M - I positive.

    Doubles eta0 until min eig(M(t) - I) >= ``min_margin`` over the horizon.
    """
    ts = np.linspace(0.0, horizon, n_check)
    A = _spectral_propagators(h, ts)
    G = np.einsum("tji,tjk->tik", np.conj(A), A)
    G = 0.5 * (G + np.conj(np.swapaxes(G, 1, 2)))
    gmin = float(np.linalg.eigvalsh(G).min())
    eta0 = start
    for _ in range(max_doublings):
        if (1.0 + eta0**2) * gmin - 1.0 >= min_margin:
            return eta0
        eta0 *= 2.0
    raise PositivityLostError(
        f"auto search exhausted at eta0 = {eta0}; horizon too long?")


def dilated_schedule(h: ComplexField, eta0: float, tau: float, n_slices: int,
                     k: float | None = None,
                     hermiticity_bound: float = HERMITICITY_BOUND) -> DilatedSchedule:
    """Pauli coefficients of the dilated generator on a slice grid.

    Lambda and Gamma are evaluated at slice midpoints from the exact metric;
    d eta / dt uses a centred difference with step tau / 10.  The analytic
    formulas are Hermitian up to the finite-difference residue, which is
    checked against ``hermiticity_bound`` and then symmetrised away.
    """
    if tau <= 0 or n_slices < 1:
        raise ValueError("need tau > 0 and at least one slice")
    H = hamiltonian(h)
    t_mid = (np.arange(n_slices) + 0.5) * tau
    # tau/10, capped: for coarse slicing an uncapped step would inject an
    # O(step^2) residue above the Hermiticity bound
    step = min(tau / 10.0, 5e-4)
    M, eta = _metric_arrays(h, eta0, t_mid)
    _, eta_fwd = _metric_arrays(h, eta0, t_mid + step)
    _, eta_bwd = _metric_arrays(h, eta0, t_mid - step)
    deta = (eta_fwd - eta_bwd) / (2.0 * step)
    Minv = np.linalg.inv(M)

    Lam = np.einsum("tij,tjk->tik", H[None] + (1j * deta + eta @ H) @ eta, Minv)
    Gam = 1j * np.einsum("tij,tjk->tik", H @ eta - eta @ H - 1j * deta, Minv)

    residue = max(
        np.abs(Lam - np.conj(np.swapaxes(Lam, 1, 2))).max(),
        np.abs(Gam - np.conj(np.swapaxes(Gam, 1, 2))).max(),
    )
    if residue > hermiticity_bound:
        raise NonHermitianResidualError(
            f"anti-Hermitian residue {residue:.3e} exceeds {hermiticity_bound:.1e}; "
            f"reduce tau or the finite-difference step")
    Lam = 0.5 * (Lam + np.conj(np.swapaxes(Lam, 1, 2)))
    Gam = 0.5 * (Gam + np.conj(np.swapaxes(Gam, 1, 2)))

    paulis = np.stack([I2, SIGMA_X, SIGMA_Y, SIGMA_Z])
    lam = 0.5 * np.real(np.einsum("aij,tji->ta", paulis, Lam))
    gam = 0.5 * np.real(np.einsum("aij,tji->ta", paulis, Gam))
    return DilatedSchedule(tau=tau, lam=lam, gam=gam, k=k, eta0=eta0)


def _slice_unitaries(schedule: DilatedSchedule) -> np.ndarray:
    """Five-factor split-step unitaries of all slices, shape (n, 4, 4).

    Factor order per slice: transverse burst, commuting z rotations
    (system z with the identity-coupling ancilla z), then the three
    sigma_a (x) sigma_z couplings.  The identity coefficient lam_0 enters as
    an exact global phase; gam_0 is the ancilla z rotation in factor two.
    """
    tau = schedule.tau
    lam, gam = schedule.lam, schedule.gam
    n = schedule.n_slices

    # factor 1: exp(-i tau (lam1 sx + lam2 sy)) (x) I
    r = np.hypot(lam[:, 1], lam[:, 2])
    theta = tau * r
    axis_x = np.divide(lam[:, 1], r, out=np.zeros_like(r), where=r > 0)
    axis_y = np.divide(lam[:, 2], r, out=np.zeros_like(r), where=r > 0)
    u1 = (np.cos(theta)[:, None, None] * I2
          - 1j * np.sin(theta)[:, None, None]
          * (axis_x[:, None, None] * SIGMA_X + axis_y[:, None, None] * SIGMA_Y))
    F1 = np.einsum("tij,kl->tikjl", u1, I2).reshape(n, 4, 4)

    # factor 2: exp(-i tau lam3 sz) (x) exp(-i tau gam0 sz), diagonal
    ph_s = np.exp(-1j * tau * lam[:, 3])
    ph_a = np.exp(-1j * tau * gam[:, 0])
    diag = np.stack([ph_s * ph_a, ph_s / ph_a,
                     ph_a / ph_s, 1.0 / (ph_s * ph_a)], axis=1)
    F2 = np.zeros((n, 4, 4), dtype=complex)
    F2[:, np.arange(4), np.arange(4)] = diag

    # factors 3..5: exp(-i tau gam_a sigma_a (x) sigma_z), each generator
    # squares to the identity
    out = F1 @ F2
    for a, sig in ((1, SIGMA_X), (2, SIGMA_Y), (3, SIGMA_Z)):
        G = np.kron(sig, SIGMA_Z)
        ang = tau * gam[:, a]
        Fa = (np.cos(ang)[:, None, None] * I4
              - 1j * np.sin(ang)[:, None, None] * G)
        out = out @ Fa

    out *= np.exp(-1j * tau * lam[:, 0])[:, None, None]
    return out


def trotter_evolve(schedule: DilatedSchedule, psi_sa0: DilatedState) -> np.ndarray:
    """Split-step evolution through every slice.

    Returns the states at all slice boundaries, shape
    ``(n_slices + 1, 4)``; row 0 is the initial state.  Each slice applies
    the five-factor product documented in ``_slice_unitaries`` (unitary by
    construction).
    """
    U = _slice_unitaries(schedule)
    out = np.empty((schedule.n_slices + 1, 4), dtype=complex)
    out[0] = psi_sa0.amplitudes
    psi = psi_sa0.amplitudes
    for m in range(schedule.n_slices):
        psi = U[m] @ psi
        out[m + 1] = psi
    return out


def compile_pulses(schedule: DilatedSchedule, J: float) -> list[PulseSlice]:
    """Translate slice coefficients into RF burst and J-coupling parameters.

    ``b1 = tau sqrt(lam1^2 + lam2^2) / pi`` with phase ``atan2(lam2, lam1)``;
    ``b2 = lam3 / pi`` and ``b3 = gam0 / pi`` sit inside R_x(+-pi/2)
    sandwiches; ``tau_i = 2 gam_i tau / (pi J)`` may come out negative and is
    kept signed (see ``export_pulse_program`` for the hardware rewrite).
    """
    if J == 0:
        raise ValueError("coupling J must be nonzero")
    tau, lam, gam = schedule.tau, schedule.lam, schedule.gam
    pulses = []
    for m in range(schedule.n_slices):
        pulses.append(PulseSlice(
            index=m,
            b1=tau * math.hypot(lam[m, 1], lam[m, 2]) / math.pi,
            phi1=math.atan2(lam[m, 2], lam[m, 1]),
            b2=lam[m, 3] / math.pi,
            b3=gam[m, 0] / math.pi,
            tau1=2.0 * gam[m, 1] * tau / (math.pi * J),
            tau2=2.0 * gam[m, 2] * tau / (math.pi * J),
            tau3=2.0 * gam[m, 3] * tau / (math.pi * J),
        ))
    return pulses


def _rot(axis: np.ndarray, angle: float) -> np.ndarray:
    return math.cos(angle / 2.0) * I2 - 1j * math.sin(angle / 2.0) * axis


def _burst(b: float, phi: float, duration: float) -> np.ndarray:
    """exp(-i pi b (cos phi sx + sin phi sy) duration)."""
    ang = math.pi * b * duration
    axis = math.cos(phi) * SIGMA_X + math.sin(phi) * SIGMA_Y
    return math.cos(ang) * I2 - 1j * math.sin(ang) * axis


def _j_coupling(J: float, duration: float) -> np.ndarray:
    """exp(-i (pi J / 2) sz (x) sz duration)."""
    ang = math.pi * J * duration / 2.0
    return math.cos(ang) * I4 - 1j * math.sin(ang) * np.kron(SIGMA_Z, SIGMA_Z)


def pulse_slice_unitary(pulse: PulseSlice, tau: float, J: float,
                        identity_coefficient: float = 0.0) -> np.ndarray:
    """Ideal-pulse unitary of one compiled slice.

    Composes the transverse burst (unit duration, amplitude ``b1``), the two
    z-rotation sandwiches (burst duration ``tau``) and the three J-coupling
    gadgets.  With ``identity_coefficient = lam0`` the result reproduces the
    corresponding split-step slice unitary exactly; hardware has no identity
    generator, so that phase is optional.
    """
    rx_p = _rot(SIGMA_X, math.pi / 2.0)
    rx_m = _rot(SIGMA_X, -math.pi / 2.0)
    ry_p = _rot(SIGMA_Y, math.pi / 2.0)
    ry_m = _rot(SIGMA_Y, -math.pi / 2.0)

    F1 = np.kron(_burst(pulse.b1, pulse.phi1, 1.0), I2)
    F2s = np.kron(rx_p @ _burst(pulse.b2, math.pi / 2.0, tau) @ rx_m, I2)
    F2a = np.kron(I2, rx_p @ _burst(pulse.b3, math.pi / 2.0, tau) @ rx_m)
    G1 = np.kron(ry_p, I2) @ _j_coupling(J, pulse.tau1) @ np.kron(ry_m, I2)
    G2 = np.kron(rx_m, I2) @ _j_coupling(J, pulse.tau2) @ np.kron(rx_p, I2)
    G3 = _j_coupling(J, pulse.tau3)
    U = F1 @ F2s @ F2a @ G1 @ G2 @ G3
    if identity_coefficient != 0.0:
        U = np.exp(-1j * tau * identity_coefficient) * U
    return U


def prepare_dilated_state(psi0: np.ndarray, eta0: float) -> DilatedState:
    """Initial dilated state (psi0 (x) b- + eta0 psi0 (x) b+) / sqrt(1 + eta0^2)."""
    psi0 = np.asarray(psi0, dtype=complex)
    amps = (np.kron(psi0, ANCILLA_MINUS) + eta0 * np.kron(psi0, ANCILLA_PLUS))
    return DilatedState(amplitudes=amps / math.sqrt(1.0 + eta0**2))


def ancilla_prep_unitary(eta0: float) -> np.ndarray:
    """Ancilla circuit R_x(pi/2) R_y(2 arctan eta0); maps |0> to the dilated
    ancilla superposition."""
    return _rot(SIGMA_X, math.pi / 2.0) @ _rot(SIGMA_Y, 2.0 * math.atan(eta0))


def readout_rotation() -> np.ndarray:
    """I (x) R_x(-pi/2): maps b- -> |0>, b+ -> |1> on the ancilla."""
    return np.kron(I2, _rot(SIGMA_X, -math.pi / 2.0))


def project_readout(psi: DilatedState, axis: str) -> float:
    """Normalised system texture conditioned on the ancilla being |0>.

    Assumes the readout basis change (R_x(-pi/2) on the ancilla) has already
    been applied, so the conditioning is a plain computational-basis
    projection.  Returns ``<sigma_axis (x) |0><0|> / <I (x) |0><0|>``.
    """
    amps = psi.amplitudes
    system = np.array([amps[0], amps[2]])
    weight = float(np.abs(system[0]) ** 2 + np.abs(system[1]) ** 2)
    if weight < 1e-12:
        raise EmptyProjectionError(f"ancilla-|0> weight {weight:.3e} is numerically zero")
    return texture_of_vector(system, axis)


def export_pulse_program(pulses: list[PulseSlice], path, hardware: bool = False) -> None:
    """Write the pulse program as line-oriented text, one slice per record.

    Default columns: index, b1, phi1, b2, b3, tau1, tau2, tau3 (14
    significant digits).  With ``hardware=True`` the signed J-coupling
    durations are rewritten as positive ones and three extra columns s1 s2
    s3 in {+1, -1} record the pi phase shift of the corresponding sandwich
    pulses.
    """
    cols = "index b1 phi1 b2 b3 tau1 tau2 tau3"
    if hardware:
        cols += " s1 s2 s3"
    lines = ["# " + cols]
    for p in pulses:
        taus = (p.tau1, p.tau2, p.tau3)
        vals = [p.b1, p.phi1, p.b2, p.b3]
        if hardware:
            vals += [abs(t) for t in taus]
            signs = [1 if t >= 0 else -1 for t in taus]
        else:
            vals += list(taus)
            signs = []
        rec = [str(p.index)] + [format(v, ".14e") for v in vals] + [str(s) for s in signs]
        lines.append(" ".join(rec))
    with open(path, "w") as fh:
        fh.write("\n".join(lines) + "\n")

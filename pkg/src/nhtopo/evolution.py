"""Exact non-unitary dynamics and long-time-averaged texture angles.

Right states are kets evolving as ``sum_mu c_mu e^{-i E_mu t} |r_mu>`` where
``c_mu = l_mu @ psi0``.  Left states are stored as covector rows paired with
the right trajectory: the row evolves as ``sum_mu d_mu e^{+i conj(E_mu) t}
l_mu`` with ``d_mu`` the expansion of the initial row in the left basis.
With ``d_mu = conj(c_mu)`` this is the biorthogonal partner of the right
trajectory; both trajectories are then dominated by the same band at long
times, which is what makes the half-sum of the long-time texture angles
reproduce Re(phi_yx).  Measured textures of a left state are those of the
ket obtained by conjugating the row.

Everything is spectral; there is no time stepping.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .bloch import ComplexField, EigenSystem, eigensystem
from .errors import DegenerateAverageError, NotConvergedError

__all__ = [
    "StateVec",
    "TextureSeries",
    "AveragedAngle",
    "state_from_coefficients",
    "expansion_coefficients",
    "evolve_state",
    "texture_series",
    "long_time_angle",
    "default_horizon",
]

#: minimum samples per oscillation period in time averages
SAMPLES_PER_PERIOD = 40


@dataclass(frozen=True)
class StateVec:
    """A two-component state; ``side`` says whether it is a right ket or a
    left covector row."""

    amplitudes: np.ndarray
    side: str = "right"

    def __post_init__(self):
        amps = np.asarray(self.amplitudes, dtype=complex)
        if amps.shape != (2,):
            raise ValueError("amplitudes must be a complex 2-vector")
        if not np.any(np.abs(amps) > 0):
            raise ValueError("state must not be the zero vector")
        if self.side not in ("right", "left"):
            raise ValueError(f"side must be 'right' or 'left', got {self.side!r}")
        object.__setattr__(self, "amplitudes", amps)

    def ket(self) -> np.ndarray:
        """Measurable ket: the amplitudes themselves for a right state, the
        conjugated row for a left one."""
        return self.amplitudes if self.side == "right" else np.conj(self.amplitudes)


@dataclass(frozen=True)
class TextureSeries:
    """Normalised spin textures sampled over time at one quasimomentum."""

    times: np.ndarray
    sx: np.ndarray
    sy: np.ndarray
    sz: np.ndarray | None = None
    k: float | None = None
    meta: str = "exact"

    def __post_init__(self):
        t = np.asarray(self.times, dtype=float)
        if np.any(np.diff(t) <= 0):
            raise ValueError("times must be strictly increasing")
        if len(self.sx) != len(t) or len(self.sy) != len(t):
            raise ValueError("sx, sy must match times in length")
        if self.sz is not None:
            if len(self.sz) != len(t):
                raise ValueError("sz must match times in length")
            r2 = np.asarray(self.sx) ** 2 + np.asarray(self.sy) ** 2 + np.asarray(self.sz) ** 2
            if np.any(r2 > 1.0 + 1e-9):
                raise ValueError(f"texture norm exceeds 1: max {r2.max():.12f}")


@dataclass(frozen=True)
class AveragedAngle:
    """Long-time texture angle plus its half-horizon convergence estimate."""

    angle: float
    half_horizon_diff: float
    horizon: float


def expansion_coefficients(es: EigenSystem, state: StateVec) -> np.ndarray:
    """Band coefficients (c_plus, c_minus) of a state.

    Right kets expand in the right eigenvectors via the left covectors;
    left rows expand in the covectors via the right eigenvectors.
    """
    if state.side == "right":
        return np.array([es.left_plus @ state.amplitudes,
                         es.left_minus @ state.amplitudes])
    return np.array([state.amplitudes @ es.right_plus,
                     state.amplitudes @ es.right_minus])


def state_from_coefficients(es: EigenSystem, c_plus: complex, c_minus: complex,
                            side: str = "right") -> StateVec:
    """Assemble a state from band coefficients.

    For ``side='left'`` the row is built with conjugated coefficients, which
    is the biorthogonal partner of the right state with the same (c_plus,
    c_minus).
    """
    if side == "right":
        amps = c_plus * es.right_plus + c_minus * es.right_minus
    else:
        amps = np.conj(c_plus) * es.left_plus + np.conj(c_minus) * es.left_minus
    return StateVec(amplitudes=amps, side=side)


def _phase_factors(es: EigenSystem, side: str, times: np.ndarray) -> np.ndarray:
    """Per-band evolution factors, shape (len(times), 2)."""
    E = np.array([es.E_plus, -es.E_plus])
    t = np.asarray(times, dtype=float)[:, None]
    if side == "right":
        return np.exp(-1j * E[None, :] * t)
    return np.exp(1j * np.conj(E)[None, :] * t)


def evolve_state(h: ComplexField, psi0: StateVec, t: float) -> StateVec:
    """Evolve a state for time ``t`` under the field's Hamiltonian.

    Right kets pick up ``e^{-i E_mu t}`` per band; left rows pick up
    ``e^{+i conj(E_mu) t}`` (see the module docstring for why the complex
    conjugate appears).  Exact for any t >= 0; ExceptionalPointError
    propagates from the eigensystem.
    """
    es = eigensystem(h)
    c = expansion_coefficients(es, psi0)
    f = _phase_factors(es, psi0.side, np.array([t]))[0]
    if psi0.side == "right":
        amps = c[0] * f[0] * es.right_plus + c[1] * f[1] * es.right_minus
    else:
        amps = c[0] * f[0] * es.left_plus + c[1] * f[1] * es.left_minus
    return StateVec(amplitudes=amps, side=psi0.side)


def _trajectory(es: EigenSystem, psi0: StateVec, times: np.ndarray) -> np.ndarray:
    """Kets of the evolving state at all times, shape (len(times), 2)."""
    c = expansion_coefficients(es, psi0)
    f = _phase_factors(es, psi0.side, times)
    if psi0.side == "right":
        basis = np.stack([es.right_plus, es.right_minus])
    else:
        basis = np.stack([es.left_plus, es.left_minus])
    rows = (c[None, :] * f) @ basis
    return rows if psi0.side == "right" else np.conj(rows)


def _textures(kets: np.ndarray):
    nrm = (np.abs(kets) ** 2).sum(axis=1)
    cross = np.conj(kets[:, 0]) * kets[:, 1]
    sx = 2.0 * cross.real / nrm
    sy = 2.0 * cross.imag / nrm
    sz = (np.abs(kets[:, 0]) ** 2 - np.abs(kets[:, 1]) ** 2) / nrm
    return sx, sy, sz


def texture_series(h: ComplexField, psi0: StateVec, times: np.ndarray,
                   k: float | None = None, meta: str = "exact") -> TextureSeries:
    """Normalised <sigma_x>, <sigma_y>, <sigma_z> along the exact trajectory."""
    if psi0.side != "right":
        raise ValueError("texture_series expects a right-side initial state")
    times = np.asarray(times, dtype=float)
    es = eigensystem(h)
    kets = _trajectory(es, psi0, times)
    sx, sy, sz = _textures(kets)
    return TextureSeries(times=times, sx=sx, sy=sy, sz=sz, k=k, meta=meta)


def default_horizon(es: EigenSystem) -> float:
    """T = 200 / gap with gap the larger of |Re(E_+ - E_-)|, |Im(E_+ - E_-)|."""
    gap = max(abs(2.0 * es.E_plus.real), abs(2.0 * es.E_plus.imag))
    if gap <= 0:
        raise DegenerateAverageError("zero spectral gap: no averaging horizon")
    return 200.0 / gap


def _window_average(es: EigenSystem, psi0: StateVec, T: float):
    """Trapezoid averages of (sx, sy) over [0, T], resolving the fastest beat."""
    period = 2.0 * math.pi / max(2.0 * abs(es.E_plus.real), 1e-9)
    dt = min(period / SAMPLES_PER_PERIOD, T / 400.0)
    n = int(math.ceil(T / dt))
    times = np.linspace(0.0, T, n + 1)
    kets = _trajectory(es, psi0, times)
    sx, sy, _ = _textures(kets)
    return (np.trapezoid(sx, times) / T, np.trapezoid(sy, times) / T)


def long_time_angle(h: ComplexField, psi0: StateVec, side: str = "RR",
                    T: float | None = None, tol: float = 1e-3) -> AveragedAngle:
    """Long-time-averaged texture angle phi^{RR} or phi^{LL}.

    Parameters
    ----------
    psi0 : StateVec
        Right-side initial state.  For ``side='LL'`` the biorthogonal left
        partner (conjugate coefficients) is averaged instead.  The winding
        protocol wants both band coefficients nonzero; a single-band state
        averages, trivially, to that eigenstate's texture angle.
    T : float, optional
        Averaging horizon; defaults to 200 over the spectral gap.
    tol : float
        Allowed angle difference between the T and T/2 averages.

    Raises
    ------
    NotConvergedError
        If the T vs T/2 angles differ by more than ``tol``.
    DegenerateAverageError
        If both averaged components are below 1e-9.
    """
    if side not in ("RR", "LL"):
        raise ValueError(f"side must be 'RR' or 'LL', got {side!r}")
    if psi0.side != "right":
        raise ValueError("long_time_angle expects a right-side initial state")
    es = eigensystem(h)
    c = expansion_coefficients(es, psi0)
    state = psi0 if side == "RR" else state_from_coefficients(es, c[0], c[1], "left")
    if T is None:
        T = default_horizon(es)
    ax_full, ay_full = _window_average(es, state, T)
    ax_half, ay_half = _window_average(es, state, T / 2.0)
    if max(abs(ax_full), abs(ay_full)) < 1e-9:
        raise DegenerateAverageError("averaged texture components vanish")
    angle = math.atan2(ay_full, ax_full)
    diff = abs(math.atan2(ay_half, ax_half) - angle)
    diff = min(diff, 2.0 * math.pi - diff)
    if diff > tol:
        raise NotConvergedError(
            f"long-time average not converged: T vs T/2 angle differs by {diff:.3e} "
            f"(tol {tol:.1e}); increase T")
    return AveragedAngle(angle=angle, half_horizon_diff=diff, horizon=T)

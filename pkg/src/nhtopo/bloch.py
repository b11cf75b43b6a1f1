"""Two-band Bloch Hamiltonian family, biorthogonal eigensystem, spin textures.

The lattice model lives in momentum space as ``H(k) = h(k) . sigma`` with a
complex vector field

    hx = J0 + J1 cos k + J2 cos 2k
    hy = J1 sin k + J2 sin 2k - i delta
    hz = const (real)

``delta`` makes the model non-Hermitian, ``hz`` breaks chiral symmetry.
Energies come in a pair ``E_- = -E_+``; ``E_+`` is the principal square root
of ``hx^2 + hy^2 + hz^2``.  Right eigenvectors and left covectors are stored
biorthonormally: right vectors have unit Euclidean norm and the covectors are
rescaled so that ``l_mu @ r_mu = 1`` (a row-vector contraction without
conjugation).
"""

from __future__ import annotations

import cmath
import math
from dataclasses import dataclass

import numpy as np

from .errors import BranchPoleError, ExceptionalPointError

__all__ = [
    "PAULI",
    "ModelParams",
    "ComplexField",
    "EigenSystem",
    "BlochAngles",
    "bloch_field",
    "hamiltonian",
    "eigensystem",
    "bloch_angles",
    "eigenstate_texture",
    "texture_of_vector",
    "texture_angle",
]

SIGMA_X = np.array([[0.0, 1.0], [1.0, 0.0]], dtype=complex)
SIGMA_Y = np.array([[0.0, -1.0j], [1.0j, 0.0]], dtype=complex)
SIGMA_Z = np.array([[1.0, 0.0], [0.0, -1.0]], dtype=complex)
PAULI = {"x": SIGMA_X, "y": SIGMA_Y, "z": SIGMA_Z}

#: default threshold on |E^2| below which the point counts as exceptional
EP_THRESHOLD = 1e-12


@dataclass(frozen=True)
class ModelParams:
    """Hopping amplitudes and symmetry-breaking terms of the lattice model.

    ``J2 = 0`` gives the two-site experimental family; ``hz = 0`` restores
    chiral symmetry (``sigma_z H sigma_z = -H`` holds exactly).
    """

    J0: float
    J1: float
    J2: float = 0.0
    delta: float = 0.0
    hz: float = 0.0

    def __post_init__(self):
        for name in ("J0", "J1", "J2", "delta", "hz"):
            v = getattr(self, name)
            if not math.isfinite(v):
                raise ValueError(f"{name} must be finite, got {v!r}")


@dataclass(frozen=True)
class ComplexField:
    """Bloch vector h(k) with complex components."""

    hx: complex
    hy: complex
    hz: complex

    def squared_energy(self) -> complex:
        return self.hx * self.hx + self.hy * self.hy + self.hz * self.hz

    def transverse_squared(self) -> complex:
        """hx^2 + hy^2 = (hx + i hy)(hx - i hy)."""
        return self.hx * self.hx + self.hy * self.hy


@dataclass(frozen=True)
class EigenSystem:
    """Biorthogonal eigen-decomposition at a single quasimomentum.

    ``E_plus`` is the chosen branch of the upper-band energy; the lower band
    is implicitly ``-E_plus``.  ``right_plus``/``right_minus`` are unit-norm
    kets; ``left_plus``/``left_minus`` are covector rows scaled so that
    ``left_mu @ right_mu = 1`` and ``left_mu @ right_nu = 0``.
    ``branch`` records the square-root branch: +1 means the principal root.
    """

    E_plus: complex
    right_plus: np.ndarray
    right_minus: np.ndarray
    left_plus: np.ndarray
    left_minus: np.ndarray
    branch: int = 1

    def energy(self, band: int) -> complex:
        return self.E_plus if band > 0 else -self.E_plus

    def right(self, band: int) -> np.ndarray:
        return self.right_plus if band > 0 else self.right_minus

    def left(self, band: int) -> np.ndarray:
        return self.left_plus if band > 0 else self.left_minus


@dataclass(frozen=True)
class BlochAngles:
    """Complex polar/azimuthal angles (beta, phi_yx) of the Bloch vector."""

    beta: complex
    phi_yx: complex


def bloch_field(params: ModelParams, k: float) -> ComplexField:
    """Evaluate the model's Bloch vector at quasimomentum ``k``."""
    hx = params.J0 + params.J1 * math.cos(k) + params.J2 * math.cos(2 * k)
    hy = params.J1 * math.sin(k) + params.J2 * math.sin(2 * k) - 1j * params.delta
    return ComplexField(complex(hx), complex(hy), complex(params.hz))


def hamiltonian(h: ComplexField) -> np.ndarray:
    """2x2 matrix h . sigma."""
    return h.hx * SIGMA_X + h.hy * SIGMA_Y + h.hz * SIGMA_Z


def principal_sqrt(z: complex) -> complex:
    """Principal complex square root with Re >= 0 (Im > 0 on the cut).

    A negative imaginary zero is treated as +0 so that negative real
    arguments land on the upper side of the branch cut.
    """
    z = complex(z)
    if z.imag == 0.0:
        z = complex(z.real, 0.0)
    return cmath.sqrt(z)


def eigensystem(h: ComplexField, ep_threshold: float = EP_THRESHOLD) -> EigenSystem:
    """Biorthogonal eigensystem of ``h . sigma``.

    Parameters
    ----------
    h : ComplexField
        Bloch vector; must be gapped (``|E^2|`` above ``ep_threshold``).
    ep_threshold : float
        Threshold on ``|E^2|`` below which an exceptional point is declared.

    Raises
    ------
    ExceptionalPointError
        If ``|E^2| < ep_threshold`` (coalescing eigenvectors).

    Notes
    -----
    Two algebraically equivalent forms of the eigenvector pair exist; the one
    with the larger biorthogonal normalisation is used per band, which keeps
    the construction stable when ``hx^2 + hy^2`` is small.  When
    ``hx = hy = 0`` exactly, the canonical basis vectors are returned,
    assigned so that the band energies match the sign of ``hz``.
    """
    E2 = h.squared_energy()
    if abs(E2) < ep_threshold:
        raise ExceptionalPointError(f"|E^2| = {abs(E2):.3e} below threshold {ep_threshold:.3e}")
    E = principal_sqrt(E2)

    rights = {}
    lefts = {}
    for band in (+1, -1):
        Em = E if band > 0 else -E
        norm_a = 2.0 * Em * (Em - h.hz)
        norm_b = 2.0 * Em * (Em + h.hz)
        if abs(norm_a) >= abs(norm_b):
            r = np.array([h.hx - 1j * h.hy, Em - h.hz], dtype=complex)
            l = np.array([h.hx + 1j * h.hy, Em - h.hz], dtype=complex)
            norm = norm_a
        else:
            r = np.array([Em + h.hz, h.hx + 1j * h.hy], dtype=complex)
            l = np.array([Em + h.hz, h.hx - 1j * h.hy], dtype=complex)
            norm = norm_b
        scale = np.linalg.norm(r)
        r = r / scale
        l = l * (scale / norm)
        # phase convention: first non-negligible component of the ket is
        # real positive (stabilises fitting seeds, cancels in all textures)
        pivot = r[0] if abs(r[0]) > 1e-12 else r[1]
        phase = pivot / abs(pivot)
        r = r * np.conj(phase)
        l = l * phase
        rights[band] = r
        lefts[band] = l

    return EigenSystem(
        E_plus=E,
        right_plus=rights[+1],
        right_minus=rights[-1],
        left_plus=lefts[+1],
        left_minus=lefts[-1],
        branch=1,
    )


def bloch_angles(h: ComplexField, ep_threshold: float = EP_THRESHOLD) -> BlochAngles:
    """Complex angles (beta, phi_yx) parametrising the Bloch vector.

    ``beta = arccos(hz / E_+)`` on the principal complex branch.  The real
    part of ``phi_yx`` is computed as ``arg((hx + i hy) conj(hx - i hy)) / 2``
    which avoids the branch cuts of the complex arctangent, and the imaginary
    part as ``-log|(hx + i hy)/(hx - i hy)| / 2``.  The pi-branch of
    ``Re(phi_yx)`` is then fixed so that ``E sin(beta) e^{i phi}`` reproduces
    ``hx + i hy`` exactly.

    Raises
    ------
    BranchPoleError
        If ``hx^2 + hy^2 = 0`` (azimuthal angle undefined).
    ExceptionalPointError
        If ``|E^2|`` is below threshold.
    """
    E2 = h.squared_energy()
    if abs(E2) < ep_threshold:
        raise ExceptionalPointError(f"|E^2| = {abs(E2):.3e} below threshold {ep_threshold:.3e}")
    trans = h.transverse_squared()
    if abs(trans) < ep_threshold:
        raise BranchPoleError(f"|hx^2 + hy^2| = {abs(trans):.3e}: azimuthal angle undefined")
    E = principal_sqrt(E2)
    beta = np.arccos(complex(h.hz / E))

    plus = h.hx + 1j * h.hy
    minus = h.hx - 1j * h.hy
    re_phi = 0.5 * cmath.phase(plus * np.conj(minus))
    im_phi = -0.5 * math.log(abs(plus) / abs(minus))
    phi = complex(re_phi, im_phi)

    # pick the pi-branch consistent with the principal beta
    recon = E * np.sin(beta) * cmath.exp(1j * phi)
    if abs(recon - plus) > abs(recon + plus):
        re_phi = re_phi - math.pi if re_phi > 0 else re_phi + math.pi
        phi = complex(re_phi, im_phi)
    return BlochAngles(beta=beta, phi_yx=phi)


def texture_of_vector(psi: np.ndarray, axis: str) -> float:
    """Normalised spin texture <psi|sigma_axis|psi> / <psi|psi> of a ket."""
    a, b = psi[0], psi[1]
    nrm = (abs(a) ** 2 + abs(b) ** 2)
    cross = np.conj(a) * b
    if axis == "x":
        val = 2.0 * cross.real
    elif axis == "y":
        val = 2.0 * cross.imag
    elif axis == "z":
        val = abs(a) ** 2 - abs(b) ** 2
    else:
        raise ValueError(f"axis must be one of x, y, z, got {axis!r}")
    return float(val / nrm)


def eigenstate_texture(es: EigenSystem, band: int, axis: str) -> float:
    """Normalised texture of a right eigenstate; independent of its scaling."""
    return texture_of_vector(es.right(band), axis)


def texture_angle(sx: float, sy: float) -> float:
    """atan2 angle of an in-plane texture pair, in (-pi, pi]."""
    return math.atan2(sy, sx)

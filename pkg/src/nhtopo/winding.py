"""Winding numbers over the Brillouin zone.

Three loop integrals are computed on a uniform periodic k-grid:

* per-band winding  w_mu  (trapezoidal quadrature of a rational integrand
  with a k-continuous energy branch),
* eigenstate winding  w_t  (unwrapped increment of Re(phi_yx) divided by pi),
* energy winding  nu_E  (unwrapped increment of arg(E^2) divided by 2 pi).

w_t and nu_E are quantized; their raw loop integrals are rounded only when
the pre-rounding residual is small, otherwise the result is flagged.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .bloch import ModelParams
from .errors import (
    BandTrackingLostError,
    BranchPoleError,
    ExceptionalPointError,
    UnwrapAmbiguousError,
)

__all__ = [
    "KGrid",
    "QuantizedWinding",
    "WindingReport",
    "band_winding",
    "texture_winding",
    "energy_winding",
    "energy_winding_from_samples",
    "winding_from_angle_series",
    "winding_report",
]

#: residual above which a loop integral is not trusted to be an integer
ROUND_TOL = 1e-2
#: adjacent-sample jump (after branch reduction) that aborts an unwrap
MAX_PHASE_JUMP = math.pi / 4
EP_THRESHOLD = 1e-12


@dataclass(frozen=True)
class KGrid:
    """Uniform grid of n quasimomenta covering [-pi, pi) periodically.

    ``offset`` shifts every sample by that fraction of the spacing; a small
    offset avoids landing exactly on the k = 0, +-pi symmetry points.
    """

    n: int = 721
    offset: float = 0.0

    def __post_init__(self):
        if self.n < 8:
            raise ValueError(f"grid needs at least 8 points, got {self.n}")
        if not 0.0 <= self.offset < 1.0:
            raise ValueError(f"offset must be in [0, 1), got {self.offset}")

    @property
    def spacing(self) -> float:
        return 2.0 * math.pi / self.n

    def points(self) -> np.ndarray:
        return -math.pi + (np.arange(self.n) + self.offset) * self.spacing

    def closed_points(self) -> np.ndarray:
        """Grid plus the periodic image of the first point (n + 1 values)."""
        pts = self.points()
        return np.append(pts, pts[0] + 2.0 * math.pi)


@dataclass(frozen=True)
class QuantizedWinding:
    """A loop integral expected to be an integer.

    ``value`` is the nearest integer, ``residual = raw - value``, and
    ``quantized`` says whether ``|residual|`` passed the rounding tolerance.
    """

    raw: float
    value: int
    residual: float
    quantized: bool

    @staticmethod
    def from_raw(raw: float, tol: float = ROUND_TOL) -> "QuantizedWinding":
        value = int(round(raw))
        residual = raw - value
        return QuantizedWinding(raw=raw, value=value, residual=residual,
                                quantized=abs(residual) < tol)


@dataclass(frozen=True)
class WindingReport:
    """All winding diagnostics of one parameter set on one grid."""

    w_plus: float
    w_minus: float
    w_t: QuantizedWinding
    nu_E: QuantizedWinding
    grid: KGrid = field(default_factory=KGrid)


def _field_arrays(params: ModelParams, ks: np.ndarray):
    """hx(k), hy(k) and their analytic k-derivatives, vectorised."""
    c1, s1 = np.cos(ks), np.sin(ks)
    c2, s2 = np.cos(2 * ks), np.sin(2 * ks)
    hx = (params.J0 + params.J1 * c1 + params.J2 * c2).astype(complex)
    hy = params.J1 * s1 + params.J2 * s2 - 1j * params.delta
    dhx = (-params.J1 * s1 - 2 * params.J2 * s2).astype(complex)
    dhy = (params.J1 * c1 + 2 * params.J2 * c2).astype(complex)
    return hx, hy, dhx, dhy


def _squared_energy(params: ModelParams, ks: np.ndarray) -> np.ndarray:
    hx, hy, _, _ = _field_arrays(params, ks)
    return hx * hx + hy * hy + params.hz**2


def _principal_sqrt_array(E2: np.ndarray) -> np.ndarray:
    # force -0 imaginary parts to +0 so negative real E^2 maps to +i sqrt
    E2 = np.where(E2.imag == 0.0, E2.real + 0.0j, E2)
    return np.sqrt(E2)


def _tracked_energy(E2: np.ndarray) -> np.ndarray:
    """Continuous branch of sqrt(E^2) along an ordered k path.

    Starts on the principal branch and flips sign whenever that keeps the
    eigenvalue curve continuous.  Raises if even the best choice jumps by
    more than half the local energy scale (grid too coarse).
    """
    Ep = _principal_sqrt_array(E2)
    same = np.abs(np.diff(Ep))
    flip = np.abs(Ep[1:] + Ep[:-1])
    jumps = np.minimum(same, flip)
    scale = np.maximum(np.abs(Ep[1:]), np.abs(Ep[:-1]))
    bad = jumps > 0.5 * scale + 1e-12
    if np.any(bad):
        j = int(np.argmax(bad))
        raise BandTrackingLostError(
            f"energy continuation jump {jumps[j]:.3e} at sample {j + 1} "
            f"exceeds half the local scale {scale[j]:.3e}")
    signs = np.cumprod(np.concatenate(([1.0], np.where(same <= flip, 1.0, -1.0))))
    return signs * Ep


def band_winding(params: ModelParams, band: int, grid: KGrid,
                 ep_threshold: float = EP_THRESHOLD) -> float:
    """Per-band winding: loop integral of the biorthogonal Berry connection.

    Evaluates (1/2pi) times the closed trapezoidal quadrature of
    ``(hx hy' - hy hx') / (E_mu (E_mu - hz))`` with analytic derivatives and
    a k-continuous branch of ``E_mu`` (principal at k = -pi, continued by
    nearest-value tracking).  Not quantized unless the model is chiral.
    """
    ks = grid.closed_points()
    hx, hy, dhx, dhy = _field_arrays(params, ks)
    E2 = hx * hx + hy * hy + params.hz**2
    if np.abs(E2).min() < ep_threshold:
        raise ExceptionalPointError("grid passes through an exceptional point")
    E = _tracked_energy(E2)
    if band < 0:
        E = -E
    den = E * (E - params.hz)
    if np.abs(den).min() < 1e-12:
        raise BranchPoleError("E_mu = hz on the grid: hx^2 + hy^2 vanishes")
    integrand = (hx * dhy - hy * dhx) / den
    w = np.trapezoid(integrand, ks) / (2.0 * math.pi)
    if abs(w.imag) > 1e-6:
        raise BranchPoleError(f"winding integral has imaginary part {w.imag:.3e}")
    return float(w.real)


def _unwrap_total(angles: np.ndarray, period: float, closing: float | None = None,
                  max_jump: float = MAX_PHASE_JUMP) -> float:
    """Total increment of an angle series defined modulo ``period``.

    Each adjacent difference is brought into (-period/2, period/2] before
    summation; ``closing`` optionally appends a final wrap-around difference.
    """
    d = np.diff(angles)
    if closing is not None:
        d = np.append(d, closing)
    d = d - period * np.round(d / period)
    if np.abs(d).max() > max_jump:
        j = int(np.argmax(np.abs(d)))
        raise UnwrapAmbiguousError(
            f"phase jump {np.abs(d).max():.3f} rad at sample {j + 1} exceeds "
            f"{max_jump:.3f}; refine the grid")
    return float(d.sum())


def texture_winding(params: ModelParams, grid: KGrid,
                    tol: float = ROUND_TOL) -> QuantizedWinding:
    """Quantized eigenstate winding from the azimuthal angle of the field.

    Only the real part of ``phi_yx`` contributes to the loop integral; it is
    evaluated as ``arg((hx + i hy) conj(hx - i hy)) / 2`` (defined modulo pi)
    on the closed grid and unwrapped.  Result is the total increment over pi.
    """
    ks = grid.closed_points()
    hx, hy, _, _ = _field_arrays(params, ks)
    trans = hx * hx + hy * hy
    if np.abs(trans).min() < EP_THRESHOLD:
        raise BranchPoleError("hx^2 + hy^2 vanishes on the grid")
    re_phi = 0.5 * np.angle((hx + 1j * hy) * np.conj(hx - 1j * hy))
    total = _unwrap_total(re_phi, period=math.pi)
    return QuantizedWinding.from_raw(total / math.pi, tol)


def energy_winding(params: ModelParams, grid: KGrid,
                   tol: float = ROUND_TOL,
                   ep_threshold: float = EP_THRESHOLD) -> QuantizedWinding:
    """Quantized energy winding: how often E^2(k) encircles the origin.

    Both bands together wind twice as fast as each individual one, so the
    band-summed integral equals the unwrapped loop increment of
    ``arg(E^2)`` over 2 pi.  This avoids tracking individual band branches,
    which is ill-defined when the result is odd.
    """
    ks = grid.closed_points()
    E2 = _squared_energy(params, ks)
    if np.abs(E2).min() < ep_threshold:
        raise ExceptionalPointError("E^2 vanishes on the grid (band touching)")
    total = _unwrap_total(np.angle(E2), period=2 * math.pi, max_jump=math.pi / 2)
    return QuantizedWinding.from_raw(total / (2 * math.pi), tol)


def winding_from_angle_series(ks: np.ndarray, angles: np.ndarray,
                              period: float = math.pi / 2,
                              tol: float = ROUND_TOL) -> QuantizedWinding:
    """Winding from sampled angles carrying an n * period offset ambiguity.

    Each sample of ``angles`` is defined only up to an integer multiple of
    ``period`` (pi/2 for angles assembled from fitted eigenstate textures).
    The offsets are resolved by nearest continuation from the previous
    sample; the constant overall offset drops out of the loop integral.
    Returns the total increment over pi as a quantized winding.

    ``ks`` must be strictly increasing and cover one full Brillouin zone,
    either as a closed loop (last point = first + 2 pi) or as an open grid,
    in which case the wrap-around segment is added automatically.
    """
    ks = np.asarray(ks, dtype=float)
    angles = np.asarray(angles, dtype=float)
    if ks.ndim != 1 or ks.shape != angles.shape:
        raise ValueError("ks and angles must be 1-d arrays of equal length")
    if ks.size < 3:
        raise ValueError("need at least 3 samples")
    if np.any(np.diff(ks) <= 0):
        raise ValueError("ks must be strictly increasing")
    span = ks[-1] - ks[0]
    spacing = span / (ks.size - 1)
    if abs(span - 2 * math.pi) < 0.5 * spacing:
        closing = None          # endpoint already repeats the start
    elif abs(span + spacing - 2 * math.pi) < 0.5 * spacing:
        closing = angles[0] - angles[-1]
    else:
        raise ValueError(f"ks spans {span:.4f}, expected a full 2 pi loop")
    total = _unwrap_total(angles, period=period, closing=closing)
    return QuantizedWinding.from_raw(total / math.pi, tol)


def energy_winding_from_samples(ks: np.ndarray, energies: np.ndarray,
                                tol: float = ROUND_TOL) -> QuantizedWinding:
    """Energy winding from per-k (e.g. fitted) eigenvalues.

    Works on ``arg(E^2)`` so the branch/sign convention of the individual
    samples is irrelevant.  Accepts an open or closed loop like
    :func:`winding_from_angle_series`.
    """
    ks = np.asarray(ks, dtype=float)
    energies = np.asarray(energies, dtype=complex)
    if ks.shape != energies.shape or ks.size < 3:
        raise ValueError("need matching 1-d arrays with at least 3 samples")
    if np.any(np.diff(ks) <= 0):
        raise ValueError("ks must be strictly increasing")
    angles = np.angle(energies * energies)
    span = ks[-1] - ks[0]
    spacing = span / (ks.size - 1)
    if abs(span - 2 * math.pi) < 0.5 * spacing:
        closing = None
    elif abs(span + spacing - 2 * math.pi) < 0.5 * spacing:
        closing = angles[0] - angles[-1]
    else:
        raise ValueError(f"ks spans {span:.4f}, expected a full 2 pi loop")
    total = _unwrap_total(angles, period=2 * math.pi, closing=closing,
                          max_jump=math.pi / 2)
    return QuantizedWinding.from_raw(total / (2 * math.pi), tol)


def winding_report(params: ModelParams, grid: KGrid | None = None,
                   tol: float = ROUND_TOL) -> WindingReport:
    """All four winding diagnostics of one parameter set."""
    grid = grid or KGrid()
    return WindingReport(
        w_plus=band_winding(params, +1, grid),
        w_minus=band_winding(params, -1, grid),
        w_t=texture_winding(params, grid, tol),
        nu_E=energy_winding(params, grid, tol),
        grid=grid,
    )

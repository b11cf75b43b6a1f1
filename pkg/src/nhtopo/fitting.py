"""Recover complex eigenvalues and eigenstate textures from texture series.

The measured, normalised spin textures of an evolving two-band state are

    s_a(t) = <psi(t)| sigma_a |psi(t)> / <psi(t)|psi(t)>,
    psi(t) = v_plus e^{-iEt} + v_minus e^{+iEt},

where ``v_mu`` absorbs both the band amplitude and the (unnormalised) right
eigenvector.  Fitting this state-pair model to the sx and sy channels
jointly guarantees the two channels stay physically consistent, and the
eigenstate textures fall out as the normalised textures of the fitted
``v_mu``.  The model is invariant under a global complex rescaling of
``(v_plus, v_minus)`` and under ``(E, v_plus, v_minus) ->
(-E, v_minus, v_plus)``; the gauge is fixed after the fit.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np
from scipy.optimize import least_squares
from scipy.signal import hilbert

from .bloch import texture_of_vector
from .errors import (
    DegenerateTextureError,
    NotConvergedError,
    SingleBandDegenerateError,
)
from .evolution import TextureSeries

__all__ = [
    "FitConfig",
    "FitModel",
    "FitResult",
    "model_textures",
    "dominant_frequency",
    "fit_series",
    "texture_angle_from_fit",
]


@dataclass(frozen=True)
class FitConfig:
    """Optimizer settings and seeding for the texture fit."""

    restarts: int = 8
    seed: int = 0
    max_iterations: int = 200
    gradient_tol: float = 1e-10
    traceless: bool = True
    min_band_ratio: float = 1e-3
    #: optional (v_plus, v_minus) seed, e.g. from the model eigensystem
    seed_vectors: tuple | None = None


@dataclass(frozen=True)
class FitModel:
    """Fitted eigenvalue and combined band amplitude vectors.

    ``E`` is the upper-band eigenvalue (lower band is -E unless ``offset``
    is nonzero); gauge: ``|v_plus| = 1`` with its first significant
    component real positive.
    """

    E: complex
    v_plus: np.ndarray
    v_minus: np.ndarray
    offset: complex = 0.0


@dataclass(frozen=True)
class FitResult:
    """Fit output: model, per-band textures, angles, diagnostics."""

    model: FitModel
    tex_x_plus: float
    tex_y_plus: float
    tex_x_minus: float
    tex_y_minus: float
    phi_pp: float
    phi_mm: float
    residual_rms: float
    converged: bool
    restarts_used: int


def model_textures(E: complex, v_plus: np.ndarray, v_minus: np.ndarray,
                   times: np.ndarray, offset: complex = 0.0):
    """Forward model: normalised (sx, sy) of the two-band trajectory.

    The common growth factor e^{|Im E| t} is divided out before forming the
    normalised ratio, so extreme Im(E) trial values cannot overflow.
    """
    times = np.asarray(times, dtype=float)
    with np.errstate(over="ignore", invalid="ignore"):
        ph_p = np.exp(-1j * (offset + E) * times - abs(E.imag) * times)[:, None]
        ph_m = np.exp(-1j * (offset - E) * times - abs(E.imag) * times)[:, None]
        psi = ph_p * np.asarray(v_plus)[None, :] + ph_m * np.asarray(v_minus)[None, :]
        nrm = (np.abs(psi) ** 2).sum(axis=1)
        cross = np.conj(psi[:, 0]) * psi[:, 1]
        sx = 2.0 * cross.real / nrm
        sy = 2.0 * cross.imag / nrm
    return sx, sy


def dominant_frequency(times: np.ndarray, values: np.ndarray) -> float:
    """Angular frequency of the strongest non-DC Fourier component.

    The time grid must be uniform.  For a noiseless two-band texture series
    this sits at 2 Re(E) to within one FFT bin.
    """
    times = np.asarray(times, dtype=float)
    values = np.asarray(values, dtype=float)
    dt = times[1] - times[0]
    if not np.allclose(np.diff(times), dt, rtol=1e-8, atol=1e-12):
        raise ValueError("dominant_frequency needs a uniform time grid")
    spec = np.abs(np.fft.rfft(values - values.mean()))
    freqs = 2.0 * math.pi * np.fft.rfftfreq(values.size, d=dt)
    return float(freqs[1 + int(np.argmax(spec[1:]))])


def _envelope_decay_rate(times: np.ndarray, values: np.ndarray) -> float:
    """Decay rate of the oscillation envelope via log-linear regression."""
    x = np.asarray(values, dtype=float)
    env = np.abs(hilbert(x - x.mean()))
    lo, hi = max(1, x.size // 10), x.size - max(1, x.size // 10)
    env = np.maximum(env[lo:hi], 1e-12)
    slope = np.polyfit(np.asarray(times)[lo:hi], np.log(env), 1)[0]
    return float(slope)


def _dominant_frequency_two_channel(times, sx, sy) -> float:
    """Dominant beat frequency over the combined sx/sy spectrum.

    Either channel alone can be accidentally flat (textures precessing in a
    plane containing the measurement axis), so both are pooled.
    """
    dt = times[1] - times[0]
    spec = (np.abs(np.fft.rfft(sx - sx.mean()))
            + np.abs(np.fft.rfft(sy - sy.mean())))
    freqs = 2.0 * math.pi * np.fft.rfftfreq(sx.size, d=dt)
    return float(freqs[1 + int(np.argmax(spec[1:]))])


def _pack(E: complex, vp: np.ndarray, vm: np.ndarray,
          offset: complex, traceless: bool) -> np.ndarray:
    theta = [E.real, E.imag,
             vp[0].real, vp[0].imag, vp[1].real, vp[1].imag,
             vm[0].real, vm[0].imag, vm[1].real, vm[1].imag]
    if not traceless:
        theta += [offset.real, offset.imag]
    return np.array(theta)


def _unpack(theta: np.ndarray, traceless: bool):
    E = complex(theta[0], theta[1])
    vp = np.array([complex(theta[2], theta[3]), complex(theta[4], theta[5])])
    vm = np.array([complex(theta[6], theta[7]), complex(theta[8], theta[9])])
    offset = 0.0 if traceless else complex(theta[10], theta[11])
    return E, vp, vm, offset


def _canonicalize(E: complex, vp: np.ndarray, vm: np.ndarray, offset: complex):
    """Fix the sign/branch and gauge degeneracies of the fitted model."""
    if E.real < 0 or (E.real == 0 and E.imag < 0):
        E = -E
        vp, vm = vm, vp
    norm = np.linalg.norm(vp)
    if norm > 0:
        pivot = vp[0] if abs(vp[0]) > 1e-9 * norm else vp[1]
        scale = norm * (pivot / abs(pivot))
        vp = vp / scale
        vm = vm / scale
    return E, vp, vm, offset


def fit_series(sx: TextureSeries, sy: TextureSeries,
               config: FitConfig | None = None) -> FitResult:
    """Joint damped least-squares fit of the sx and sy texture channels.

    Initialisation: Re(E) from half the dominant FFT frequency of sx,
    Im(E) from the log-envelope decay, band vectors from
    ``config.seed_vectors`` when provided.  Additional seeded random
    restarts run until one converges; the best restart wins.

    Raises
    ------
    SingleBandDegenerateError
        If the fitted band amplitudes differ by more than a factor
        ``1 / min_band_ratio`` (the series does not resolve both bands).
    NotConvergedError
        If no restart satisfies the termination criteria.
    """
    config = config or FitConfig()
    times = np.asarray(sx.times, dtype=float)
    if sy.times is not sx.times and not np.array_equal(np.asarray(sy.times), times):
        raise ValueError("sx and sy must share one time grid")
    if times.size < 12:
        raise ValueError(f"need at least 12 samples, got {times.size}")
    sx_data = np.asarray(sx.sx, dtype=float)
    sy_data = np.asarray(sy.sy, dtype=float)
    if max(sx_data.std(), sy_data.std()) < 1e-9:
        raise SingleBandDegenerateError(
            "textures are constant in time: the series contains a single band")
    data = np.concatenate([sx_data, sy_data])

    def residuals(theta):
        E, vp, vm, offset = _unpack(theta, config.traceless)
        mx, my = model_textures(E, vp, vm, times, offset)
        r = np.concatenate([mx, my]) - data
        return np.where(np.isfinite(r), r, 1e6)

    # beat frequency 2 Re(E) is only identifiable below the sampling rate's
    # Nyquist limit, so Re(E) is confined to [0, pi / (2 dt)]
    re_E_max = 0.5 * math.pi / (times[1] - times[0])
    re_E0 = min(0.5 * _dominant_frequency_two_channel(times, sx_data, sy_data),
                0.999 * re_E_max)
    im_E0 = -0.5 * _envelope_decay_rate(times, sx_data if sx_data.std() >= sy_data.std() else sy_data)
    lo = np.full(12 if not config.traceless else 10, -np.inf)
    hi = np.full_like(lo, np.inf)
    lo[0], hi[0] = 0.0, re_E_max
    rng = np.random.default_rng(config.seed)
    starts = []
    informed = config.seed_vectors is not None
    if informed:
        vp0, vm0 = (np.asarray(v, dtype=complex) for v in config.seed_vectors)
        starts.append((complex(re_E0, im_E0), vp0, vm0))
        starts.append((complex(re_E0, im_E0), vp0, 0.5 * vm0))
    for j in range(config.restarts):
        vp0 = rng.standard_normal(2) + 1j * rng.standard_normal(2)
        vm0 = rng.standard_normal(2) + 1j * rng.standard_normal(2)
        # alternate the decay-rate sign so both eigenvalue branches get probed
        E0 = complex(np.clip(re_E0 * (1.0 + 0.1 * rng.standard_normal()),
                             0.0, 0.999 * re_E_max),
                     (im_E0 if j % 2 == 0 else -im_E0) + 0.1 * rng.standard_normal())
        starts.append((E0, vp0, vm0))

    best = informed_best = None
    used = 0
    for i, (E0, vp0, vm0) in enumerate(starts):
        used += 1
        theta0 = _pack(E0, vp0, vm0, 0.0, config.traceless)
        try:
            res = least_squares(
                residuals, theta0, method="trf", bounds=(lo, hi),
                gtol=config.gradient_tol, xtol=1e-14, ftol=1e-14,
                max_nfev=config.max_iterations * (theta0.size + 1),
            )
        except Exception:
            continue
        if not np.all(np.isfinite(res.x)):
            continue
        if informed and i < 2 and (informed_best is None or res.cost < informed_best.cost):
            informed_best = res
        if best is None or res.cost < best.cost:
            best = res
        if res.status > 0 and res.cost < max(1e-16, 1e-6 * data.size):
            break   # essentially exact; later restarts cannot do better

    if best is None or best.status <= 0:
        raise NotConvergedError(f"no restart converged after {used} attempts")
    # damped textures carry a near-degenerate conjugate-eigenvalue twin
    # whose misfit can drown in measurement noise; when the informed start
    # fits essentially as well as the global best, trust the prior
    if informed_best is not None and informed_best.status > 0 \
            and informed_best.cost <= 1.1 * best.cost:
        best = informed_best

    E, vp, vm, offset = _canonicalize(*_unpack(best.x, config.traceless))
    np_, nm_ = np.linalg.norm(vp), np.linalg.norm(vm)
    if min(np_, nm_) < config.min_band_ratio * max(np_, nm_):
        raise SingleBandDegenerateError(
            f"band amplitude ratio {min(np_, nm_) / max(np_, nm_):.2e} below "
            f"{config.min_band_ratio:.1e}: only one band present in the series")

    tex = {band: {ax: texture_of_vector(v, ax) for ax in ("x", "y")}
           for band, v in ((+1, vp), (-1, vm))}
    return FitResult(
        model=FitModel(E=E, v_plus=vp, v_minus=vm, offset=offset),
        tex_x_plus=tex[+1]["x"], tex_y_plus=tex[+1]["y"],
        tex_x_minus=tex[-1]["x"], tex_y_minus=tex[-1]["y"],
        phi_pp=math.atan2(tex[+1]["y"], tex[+1]["x"]),
        phi_mm=math.atan2(tex[-1]["y"], tex[-1]["x"]),
        residual_rms=float(np.sqrt(np.mean(best.fun**2))),
        converged=True,
        restarts_used=used,
    )


def texture_angle_from_fit(fit: FitResult) -> float:
    """Half-sum (phi_pp + phi_mm) / 2, defined modulo pi/2.

    The pi/2 ambiguity is inherent: each band angle carries an unresolved
    quadrant and only differences along a k loop are meaningful.
    """
    for sx_, sy_ in ((fit.tex_x_plus, fit.tex_y_plus),
                     (fit.tex_x_minus, fit.tex_y_minus)):
        if abs(sx_) < 1e-9 and abs(sy_) < 1e-9:
            raise DegenerateTextureError(
                "both in-plane texture components of a band vanish")
    return 0.5 * (fit.phi_pp + fit.phi_mm)

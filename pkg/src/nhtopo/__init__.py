"""Topological invariants of 1D two-band non-Hermitian lattice models,
measured the way an experiment would: dilated two-qubit dynamics, noisy
spin-texture time series, nonlinear fits, winding-number assembly."""

from .bloch import (
    BlochAngles,
    ComplexField,
    EigenSystem,
    ModelParams,
    bloch_angles,
    bloch_field,
    eigensystem,
    eigenstate_texture,
    hamiltonian,
)
from .dilation import (
    DilatedSchedule,
    DilatedState,
    MetricState,
    PulseSlice,
    auto_eta0,
    compile_pulses,
    dilated_schedule,
    export_pulse_program,
    metric_eta,
    prepare_dilated_state,
    project_readout,
    trotter_evolve,
)
from .errors import NhtopoError
from .evolution import (
    StateVec,
    TextureSeries,
    evolve_state,
    long_time_angle,
    state_from_coefficients,
    texture_series,
)
from .fitting import FitConfig, FitResult, fit_series, texture_angle_from_fit
from .pipeline import (
    RmsReport,
    ScanResult,
    ScenarioConfig,
    inject_pulse_noise,
    phase_diagram,
    rms_error,
    run_scan,
    simulate_dilated_series,
)
from .winding import (
    KGrid,
    QuantizedWinding,
    WindingReport,
    band_winding,
    energy_winding,
    energy_winding_from_samples,
    texture_winding,
    winding_from_angle_series,
    winding_report,
)

__version__ = "0.1.0"

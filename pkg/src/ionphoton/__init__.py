"""Desk-scale models of a trapped-ion photonic interface.

Library layout:
    atomic      level structure, Clebsch-Gordan weights, decay channels
    bloch       pulsed-excitation master equation, double-excitation errors
    geometry    dipole patterns over shaped apertures, mixing fidelity
    photonstats click-stream simulation and g2(0) analysis
    entangle    ion-photon density operator, fringes, fidelity estimation
    cli         command-line workbench over all of the above
"""

__version__ = "0.1.0"

from .atomic import (
    AtomSpec,
    Sublevel,
    Term,
    TransitionChannel,
    Wavelength,
    clebsch_gordan_sq,
    decay_channels,
    dipole_channels,
)
from .bloch import (
    BlochTrajectory,
    DynamicState,
    ErrorCurve,
    PulseSpec,
    double_excitation_error,
    evolve,
    scan_pulse_durations,
)
from .entangle import (
    ErrorBudget,
    FringeCounts,
    FringePrediction,
    IonPhotonState,
    MeasurementSettings,
    bell_fidelity,
    build_state,
    estimate_fidelity,
    fit_depolarization,
    fringe_x,
    fringe_z,
    predicted_fidelity,
    simulate_measurements,
    x_protocol_settings,
    z_protocol_settings,
)
from .errors import (
    ConditioningError,
    EstimationError,
    InsufficientDataError,
    QuadratureError,
    StreamFormatError,
    ValidationError,
)
from .geometry import (
    ApertureSpec,
    CollectionProbabilities,
    EmissionAmplitude,
    TradeoffCurve,
    circular_half_angle_for_na,
    coherence_overlap,
    collection_probabilities,
    mixing_fidelity,
    pattern_amplitude,
    solid_angle,
    solve_slit_for_solid_angle,
    tradeoff_curve,
)
from .photonstats import (
    ClickStream,
    CoincidenceHistogram,
    ExperimentTiming,
    G2Result,
    SourceModel,
    coincidence_histogram,
    expected_g2,
    g2_from_counts,
    g2_window_scan,
    g2_zero,
    read_stream,
    read_stream_binary,
    read_stream_csv,
    simulate_stream,
    write_stream_binary,
    write_stream_csv,
)

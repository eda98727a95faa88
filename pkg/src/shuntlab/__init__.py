"""Piezoelectric shunt damping with a digital vibration absorber.

Series-RL tuning, delay-induced stability limits of the sampled loop,
admittance modification against a known sampling period, and sampled-data
time simulation.
"""

from .delay_stability import (
    CriticalDelayResult,
    RootLocus,
    critical_delay_numeric,
    critical_delay_series,
    critical_frequency_series,
    max_sampling_period,
    nominal_poles,
    root_locus,
)
from .errors import (
    BranchLossError,
    DomainError,
    NoCrossoverError,
    NumericalError,
    ShuntlabError,
    SingularConfigurationError,
)
from .freq_analysis import (
    DelayKind,
    DelayModel,
    FrfCurve,
    MarginReport,
    closed_loop_frf,
    delayed_admittance,
    open_loop_tf,
    passivity_loss_delay,
    resonant_grid,
    stability_margins,
    zoh_response,
)
from .model import (
    KC_TUNING_LIMIT,
    PiezoModel,
    ShuntParams,
    dynamic_capacitance,
    eemcf,
    shunt_admittance,
    tune_series_rl,
    tune_series_rl_linearized,
)
from .rational import RationalTF, poly_roots
from .simulate import (
    DiscreteTF,
    Envelope,
    SimResult,
    SweepConfig,
    controller_step,
    extract_envelope,
    simulate_shunt,
    simulate_swept_sine,
    simulated_stability_boundary,
    tustin_discretize,
)
from .stabilization import (
    ModificationFactors,
    apply_modification,
    build_modification_system,
    solve_modification,
    stabilize,
    verify_pole_placement,
)

__version__ = "0.1.0"

__all__ = [name for name in dir() if not name.startswith("_")]

"""Electromagnetically induced transparency in thermal alkali vapor.

Steady-state and time-domain three-level optics, thermal-motion averaging,
nested multi-level resonances, propagation figures of merit and lineshape
fitting. All internal frequencies are angular (rad/s).
"""

__version__ = "0.1.0"

from .atomsys import (AtomicSystem, DetuningGrid, FieldDrive, FieldRole, MotionEnvironment,
                      SchemeKind, Spectrum, TwoPhotonConfig, Unit, convert_units, preset,
                      preset_names)
from .errors import (ConfigError, DegenerateSteadyStateError, EITError, EITWarning, FitError,
                     IntegrationError, NoResonanceError, ParameterError, ResolutionError,
                     SingularConfigurationError, UnitError)
from .steady import chi_numeric, chi_weak_probe, gamma_eit, steady_state_numeric

__all__ = [
    "__version__",
    "AtomicSystem", "DetuningGrid", "FieldDrive", "FieldRole", "MotionEnvironment",
    "SchemeKind", "Spectrum", "TwoPhotonConfig", "Unit", "convert_units", "preset",
    "preset_names",
    "ConfigError", "DegenerateSteadyStateError", "EITError", "EITWarning", "FitError",
    "IntegrationError", "NoResonanceError", "ParameterError", "ResolutionError",
    "SingularConfigurationError", "UnitError",
    "chi_numeric", "chi_weak_probe", "gamma_eit", "steady_state_numeric",
]

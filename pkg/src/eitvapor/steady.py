"""
Steady-state probe response of a three-level atom.

Two independent routes are provided:

* closed-form weak-probe susceptibilities (``chi_weak_probe``,
  ``chi_off_resonant`` and the derived widths), and
* ``steady_state_numeric``, which solves the stationary Bloch equations with
  both fields treated to all orders. It serves as the oracle for the
  closed forms.

Susceptibilities are written as ``chi = i C Gamma12 / (Gamma12 Gamma13 + |Oc|^2)``
with ``C = N mu13^2 / (hbar eps0)``, ``Gamma12 = gamma12 - i delta`` and
``Gamma13 = gamma13 - i Delta1``.

Dressed-state energies use the frame in which the bare |2> energy is zero
and |3> sits at ``-Delta2`` (see :func:`dressed_states`).
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field
from typing import Optional, Tuple

import numpy as np

from . import bloch
from .atomsys import AtomicSystem, FieldDrive, TwoPhotonConfig
from .errors import (DegenerateSteadyStateError, EITWarning, ParameterError,
                     SingularConfigurationError)

__all__ = [
    "DensityMatrix3",
    "Susceptibility",
    "DressedPair",
    "chi_weak_probe",
    "chi_two_level",
    "gamma_eit",
    "absorption_on_resonance",
    "raman_params",
    "chi_off_resonant",
    "steady_state_numeric",
    "chi_numeric",
    "dressed_states",
]


@dataclass(frozen=True)
class DensityMatrix3:
    """Validated 3x3 density matrix over {|1>, |2>, |3>}."""

    matrix: np.ndarray

    def __post_init__(self):
        rho = np.array(self.matrix, dtype=complex)
        if rho.shape != (3, 3):
            raise ParameterError(f"density matrix must be 3x3, got {rho.shape}")
        rho.setflags(write=False)
        object.__setattr__(self, "matrix", rho)

    def check(self, herm_tol=1e-12, trace_tol=1e-12, psd_tol=1e-10) -> None:
        rho = self.matrix
        scale = max(1.0, np.abs(rho).max())
        if np.abs(rho - rho.conj().T).max() > herm_tol * scale:
            raise ParameterError("density matrix is not Hermitian")
        if abs(np.trace(rho) - 1.0) > trace_tol:
            raise ParameterError(f"density matrix trace {np.trace(rho)} differs from 1")
        if np.linalg.eigvalsh(0.5 * (rho + rho.conj().T)).min() < -psd_tol:
            raise ParameterError("density matrix has a negative eigenvalue")

    @property
    def populations(self) -> np.ndarray:
        return self.matrix.diagonal().real.copy()

    def __getitem__(self, idx):
        return self.matrix[idx]

    @property
    def rho31(self) -> complex:
        return complex(self.matrix[2, 0])

    @classmethod
    def from_bloch(cls, x) -> "DensityMatrix3":
        return cls(bloch.to_matrix(x))

    def to_bloch(self) -> np.ndarray:
        return bloch.to_vector(self.matrix)


@dataclass
class Susceptibility:
    """Probe susceptibility (scalar or array) with optional caveats."""

    value: complex
    warnings: list = field(default_factory=list)

    def absorption_coefficient(self, k_p: float):
        """Absorption coefficient per unit length ``(k_p/2) Im chi``."""
        return 0.5 * k_p * np.imag(self.value)

    def phase_per_length(self, k_p: float):
        return 0.5 * k_p * np.real(self.value)

    def __complex__(self):
        return complex(self.value)


@dataclass(frozen=True)
class DressedPair:
    """Control-dressed eigenpairs over {|2>, |3>}; ``energies = (E-, E+)``."""

    energies: Tuple[float, float]
    states: Tuple[np.ndarray, np.ndarray]

    @property
    def minus(self) -> np.ndarray:
        return self.states[0]

    @property
    def plus(self) -> np.ndarray:
        return self.states[1]


# --------------------------------------------------------------------------
# closed forms

def _gammas(sys: AtomicSystem, delta1, delta):
    g12 = sys.gamma12 - 1j * np.asarray(delta, dtype=float)
    g13 = sys.gamma13 - 1j * np.asarray(delta1, dtype=float)
    return g12, g13


def _rabi(control) -> complex:
    return complex(control.rabi if isinstance(control, FieldDrive) else control)


def _wrap(value):
    return complex(value) if np.ndim(value) == 0 else value


def chi_weak_probe(sys: AtomicSystem, control, delta1, delta) -> Susceptibility:
    """Linear-response probe susceptibility.

    ``control`` is a :class:`FieldDrive` or a bare Rabi frequency. ``delta1``
    and ``delta`` may be arrays (broadcast together).
    """
    g12, g13 = _gammas(sys, delta1, delta)
    oc2 = abs(_rabi(control)) ** 2
    if oc2 == 0:
        # |2> decouples; the exact limit is the two-level response
        g12 = np.ones_like(g12)
    den = g12 * g13 + oc2
    if np.any(den == 0):
        if oc2 == 0:
            raise SingularConfigurationError("gamma13 = 0 on resonance and no control field")
        raise SingularConfigurationError(
            "Gamma12*Gamma13 + |Omega_c|^2 vanishes exactly; add a decoherence rate or control field")
    return Susceptibility(_wrap(1j * sys.chi_scale * g12 / den))


def chi_two_level(sys: AtomicSystem, delta1) -> Susceptibility:
    """Bare two-level susceptibility ``i C / Gamma13``."""
    g13 = sys.gamma13 - 1j * np.asarray(delta1, dtype=float)
    if np.any(g13 == 0):
        raise SingularConfigurationError("gamma13 = 0 on resonance")
    return Susceptibility(_wrap(1j * sys.chi_scale / g13))


def gamma_eit(sys: AtomicSystem, omega_c) -> float:
    """Homogeneous EIT half-width ``gamma12 + |Oc|^2 / gamma13``."""
    if sys.gamma13 <= 0:
        raise ParameterError("gamma_eit needs gamma13 > 0")
    return sys.gamma12 + abs(complex(omega_c)) ** 2 / sys.gamma13


def absorption_on_resonance(sys: AtomicSystem, omega_c, delta, alpha0: float = 1.0):
    """Absorption coefficient at Delta1 = 0 as a function of delta.

    Returns ``alpha0 (gamma12 gEIT + delta^2) / (gEIT^2 + delta^2)``; the
    default ``alpha0 = 1`` gives the suppression ratio.
    """
    g = gamma_eit(sys, omega_c)
    d2 = np.asarray(delta, dtype=float) ** 2
    out = alpha0 * (sys.gamma12 * g + d2) / (g * g + d2)
    return float(out) if np.ndim(out) == 0 else out


def raman_params(sys: AtomicSystem, omega_c, delta1: float) -> Tuple[float, float]:
    """Width and light shift ``(gamma_R, delta_R)`` of the far-detuned Raman line."""
    if delta1 == 0:
        raise ParameterError("raman_params needs a nonzero one-photon detuning; "
                             "use gamma_eit for the resonant case")
    oc2 = abs(complex(omega_c)) ** 2
    return sys.gamma12 + sys.gamma13 * oc2 / delta1 ** 2, oc2 / delta1


def chi_off_resonant(sys: AtomicSystem, control, delta1, delta,
                     approximate: bool = False) -> Susceptibility:
    """Probe susceptibility split into a one-photon term and the control-field
    correction.

    The exact branch ``i C/Gamma13 (1 - |Oc|^2/(Gamma12 Gamma13 + |Oc|^2))`` is
    algebraically identical to :func:`chi_weak_probe`. The approximate branch
    keeps the one-photon Lorentzian and replaces the correction by a Raman
    Lorentzian of width gamma_R centred on delta_R, valid for
    ``|Delta1| >> gamma13``.
    """
    oc2 = abs(_rabi(control)) ** 2
    c = sys.chi_scale
    g12, g13 = _gammas(sys, delta1, delta)
    if not approximate:
        den = g12 * g13 + oc2
        if np.any(den == 0) or np.any(g13 == 0):
            raise SingularConfigurationError("vanishing denominator in off-resonant susceptibility")
        return Susceptibility(_wrap(1j * c / g13 * (1.0 - oc2 / den)))
    notes = []
    d1 = np.asarray(delta1, dtype=float)
    if np.any(np.abs(d1) < 3 * sys.gamma13):
        msg = "Raman approximation used with |Delta1| < 3 gamma13"
        notes.append(msg)
        warnings.warn(msg, EITWarning, stacklevel=2)
    if np.any(d1 == 0):
        raise ParameterError("approximate Raman branch needs Delta1 != 0")
    gamma_r = sys.gamma12 + sys.gamma13 * oc2 / d1 ** 2
    delta_r = oc2 / d1
    x = np.asarray(delta, dtype=float) - delta_r
    value = 1j * c / g13 + 1j * c * (oc2 / d1 ** 2) / (gamma_r - 1j * x)
    return Susceptibility(_wrap(value), notes)


# --------------------------------------------------------------------------
# numerical oracle

def _detunings(sys: AtomicSystem, probe: FieldDrive, control: FieldDrive):
    return bloch.frame_detunings(sys, probe.detuning, control.detuning)


def _null_report(a: np.ndarray):
    _, s, vt = np.linalg.svd(a)
    v = vt[-1]
    v = v / v[np.argmax(np.abs(v))]
    v = v / np.linalg.norm(v)
    direction = {name: float(c) for name, c in zip(bloch.LABELS, v) if abs(c) > 1e-9}
    return s, direction


def _solve_affine(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    s = np.linalg.svd(a, compute_uv=False)
    if s[-1] <= 1e-14 * s[0]:
        _, direction = _null_report(a)
        raise DegenerateSteadyStateError(
            "stationary Bloch equations are singular (no unique steady state); "
            f"null direction {direction}", direction)
    x = np.linalg.solve(a, -b)
    scale = max(np.abs(a).max(), np.abs(b).max())
    for _ in range(3):
        res = a @ x + b
        if np.abs(res).max() < 1e-10 * scale:
            break
        x = x - np.linalg.solve(a, res)
    else:
        raise DegenerateSteadyStateError(
            f"steady-state residual {np.abs(a @ x + b).max():.3e} exceeds tolerance")
    return x


def steady_state_numeric(sys: AtomicSystem, probe: FieldDrive, control: FieldDrive) -> DensityMatrix3:
    """Stationary density matrix of the full (non-perturbative) Bloch equations.

    Raises :class:`DegenerateSteadyStateError` when the stationary problem has
    no unique solution, e.g. with both fields off.
    """
    h1, h2 = _detunings(sys, probe, control)
    a, b = bloch.affine_system(sys, probe.rabi, control.rabi, h1, h2)
    return DensityMatrix3.from_bloch(_solve_affine(a, b))


def chi_numeric(sys: AtomicSystem, probe: FieldDrive, control: FieldDrive,
                check_linearity: bool = True, tol: float = 1e-3) -> Susceptibility:
    """Susceptibility ``C rho31 / Omega_p`` from the numerical steady state.

    Only meaningful in linear response. With ``check_linearity`` the probe is
    halved and a warning is attached if chi moves by more than ``tol``
    (relative).
    """
    if probe.rabi == 0:
        raise ParameterError("chi_numeric needs a nonzero probe Rabi frequency")
    chi = sys.chi_scale * steady_state_numeric(sys, probe, control).rho31 / probe.rabi
    notes = []
    if check_linearity:
        half = probe.replace(rabi=0.5 * probe.rabi)
        chi_half = sys.chi_scale * steady_state_numeric(sys, half, control).rho31 / half.rabi
        change = abs(chi - chi_half) / max(abs(chi), np.finfo(float).tiny)
        if change > tol:
            msg = f"probe not in linear response: halving Omega_p changes chi by {change:.2e}"
            notes.append(msg)
            warnings.warn(msg, EITWarning, stacklevel=2)
    return Susceptibility(complex(chi), notes)


def two_photon(sys: AtomicSystem, probe: FieldDrive, control: FieldDrive) -> TwoPhotonConfig:
    return TwoPhotonConfig.from_fields(sys.scheme_kind, probe, control)


# --------------------------------------------------------------------------
# dressed states

def dressed_states(omega_c, delta2: float) -> DressedPair:
    """Eigenpairs of the control-dressed Hamiltonian over {|2>, |3>}.

    Frame convention: ``H = [[0, Oc*], [Oc, -Delta2]]``, i.e. bare |2> at zero
    energy and bare |3> at ``-Delta2``. For ``Delta2 = 0`` this gives
    ``E = -|Oc|, +|Oc|`` with states ``(|2> -/+ |3>)/sqrt(2)``; for
    ``Delta2 >> |Oc|`` the ``+`` state is mostly |2> with
    ``E+ ~ |Oc|^2/Delta2``. Each state is phased so its |2> component is
    real and non-negative.
    """
    oc = complex(omega_c)
    h = np.array([[0.0, np.conj(oc)], [oc, -float(delta2)]], dtype=complex)
    energies, vecs = np.linalg.eigh(h)
    states = []
    for k in range(2):
        v = vecs[:, k]
        pivot = v[0] if abs(v[0]) > 1e-15 else v[1]
        v = v * (abs(pivot) / pivot)
        states.append(v / np.linalg.norm(v))
    return DressedPair((float(energies[0]), float(energies[1])), (states[0], states[1]))

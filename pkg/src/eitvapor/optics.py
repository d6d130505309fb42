"""
Propagation observables of an optically thick EIT medium.

Conventions: the intensity transmission of a medium of length ``L`` is
``T = exp(-2 alpha L)`` with the field absorption coefficient
``alpha = (k_p/2) Im chi``; the accumulated probe phase is
``(k_p/2) Re chi L``; the refractive index is taken as ``n = 1 + Re chi``.
Closed-form index and group-velocity expressions are carried as labelled
secondary channels next to the values obtained from the susceptibility.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field, replace
from typing import Optional

import numpy as np
from scipy import constants

from .atomsys import AtomicSystem, Spectrum
from .errors import EITWarning, FitError, NoResonanceError, ParameterError, ResolutionError
from .lineshape import ModelKind, fit

__all__ = [
    "MediumSpec",
    "FiguresOfMerit",
    "IndexSpectrum",
    "GroupVelocity",
    "alpha0",
    "optical_depth",
    "transmission_spectrum",
    "figures_of_merit",
    "refractive_index",
    "group_velocity",
]

C_LIGHT = constants.c
#: Half-span of the EIT-window fit in units of the measured half-width.
FIT_WINDOW = 3.0


@dataclass(frozen=True)
class MediumSpec:
    """Vapor column of length ``length`` (m) probed with wavenumber ``k_p`` (rad/m)."""

    length: float
    system: AtomicSystem
    k_p: float

    def __post_init__(self):
        if not self.length > 0:
            raise ParameterError("medium length must be positive")
        if not self.k_p > 0:
            raise ParameterError("probe wavenumber must be positive")

    @property
    def alpha0(self) -> float:
        return alpha0(self.system, self.k_p)

    @property
    def od(self) -> float:
        return 2.0 * self.alpha0 * self.length

    @property
    def omega_p(self) -> float:
        return C_LIGHT * self.k_p


@dataclass(frozen=True)
class FiguresOfMerit:
    od: float
    od_eit: float
    gamma_eit_fit: float
    bandwidth: float
    delay: float
    tbp: float
    bandwidth_label: str = "EIT density narrowing"

    def to_dict(self) -> dict:
        return {"od": self.od, "od_eit": self.od_eit, "gamma_eit_fit": self.gamma_eit_fit,
                "bandwidth": self.bandwidth, "bandwidth_label": self.bandwidth_label,
                "delay": self.delay, "tbp": self.tbp}


def alpha0(sys: AtomicSystem, k_p: float) -> float:
    """Unsaturated resonant field absorption coefficient ``k_p C / (2 gamma13)``."""
    if sys.gamma13 <= 0:
        raise ParameterError("alpha0 needs gamma13 > 0")
    return k_p * sys.chi_scale / (2.0 * sys.gamma13)


def optical_depth(sys: AtomicSystem, k_p: float, length: float) -> float:
    return 2.0 * alpha0(sys, k_p) * length


def transmission_spectrum(chi: Spectrum, medium: MediumSpec) -> Spectrum:
    """Attach intensity transmission and phase to a susceptibility spectrum."""
    a = 0.5 * medium.k_p * np.imag(chi.chi)
    log_t = -2.0 * a * medium.length
    phase = 0.5 * medium.k_p * np.real(chi.chi) * medium.length
    return replace(chi, transmission=np.exp(log_t), phase=phase, log_t=log_t,
                   meta=dict(chi.meta), warnings=list(chi.warnings))


def _wings(n: int) -> np.ndarray:
    edge = max(1, int(round(0.05 * n)))
    return np.r_[0:edge, n - edge:n]


def figures_of_merit(spectrum: Spectrum, medium: Optional[MediumSpec] = None) -> FiguresOfMerit:
    """OD, OD_EIT, EIT half-width, bandwidth, delay and time-bandwidth product.

    ``OD`` is the median of ``-log T`` over the outer 10 % of the grid;
    ``OD_EIT = OD + log T`` at the transmission peak; the half-width comes from
    a Lorentzian fit of the ``log T`` dip within ``FIT_WINDOW`` measured
    half-widths of the peak (widened until it holds 40 samples); ``B = gamma/sqrt(OD_EIT - 1)`` for
    ``OD_EIT > 2`` (else ``gamma``), ``tau = OD_EIT/gamma``.
    """
    if spectrum.transmission is None:
        if medium is None:
            raise ParameterError("spectrum has no transmission; pass a MediumSpec")
        spectrum = transmission_spectrum(spectrum, medium)
    x = spectrum.delta
    logt = spectrum.log_transmission
    od = float(np.median(-logt[_wings(len(x))]))
    ipk = int(np.argmax(logt))
    od_eit = od + float(logt[ipk])
    # a maximum inside the wing band is a sloping background, not a window
    edge = np.isin(ipk, _wings(len(x)))
    if od <= 0 or od_eit <= 1e-3 * od or edge:
        raise NoResonanceError("no transparency window: peak transmission does not rise "
                               "above the wings by 1e-3 OD")
    od_eit = min(od_eit, od)
    # fit only the neighbourhood of the dip so a one-photon background does not bias it
    hw, _ = _window_halfwidth(x, -logt, at=float(x[ipk]))
    span = FIT_WINDOW * max(hw, abs(x[1] - x[0]))
    sel = np.abs(x - x[ipk]) <= span
    while np.count_nonzero(sel) < 40 and not sel.all():
        span *= 2.0
        sel = np.abs(x - x[ipk]) <= span
    x, logt = x[sel], logt[sel]
    ipk = int(np.argmax(logt))
    res = fit(x, ModelKind.LORENTZIAN, y=logt,
              init={"A": float(logt[ipk]) + od, "center": float(x[ipk]), "y0": -od})
    if not res.converged:
        warnings.warn("Lorentzian fit of the EIT window did not converge", EITWarning,
                      stacklevel=2)
    gamma = float(res.model.params["gamma"])
    bandwidth = gamma / math.sqrt(od_eit - 1.0) if od_eit > 2.0 else gamma
    delay = od_eit / gamma
    return FiguresOfMerit(od, od_eit, gamma, bandwidth, delay, bandwidth * delay)


@dataclass
class IndexSpectrum:
    """Refractive index ``n = 1 + Re chi`` and the resonant closed form (if computed)."""

    delta: np.ndarray
    n: np.ndarray
    n_closed_form: Optional[np.ndarray] = None
    labels: dict = field(default_factory=lambda: {"n": "1 + Re chi"})


def refractive_index(chi: Spectrum, sys: Optional[AtomicSystem] = None,
                     omega_c: Optional[complex] = None) -> IndexSpectrum:
    """Pointwise ``1 + Re chi``. Given the system and control Rabi frequency
    the resonant (Delta1 = 0) closed-form approximation is evaluated as well."""
    n = 1.0 + np.real(chi.chi)
    out = IndexSpectrum(chi.delta.copy(), n)
    if sys is not None and omega_c is not None:
        oc2 = abs(complex(omega_c)) ** 2
        g = sys.gamma12 + oc2 / sys.gamma13
        d = chi.delta
        out.n_closed_form = 1.0 + sys.chi_scale * d / (g * g + d * d) * \
            (oc2 - sys.gamma12 ** 2 - d * d) / sys.gamma13 ** 2
        out.labels["n_closed_form"] = "resonant closed form (approximation)"
    return out


@dataclass(frozen=True)
class GroupVelocity:
    vg_numeric: float
    vg_analytic: Optional[float]
    group_index: float
    delay_numeric: float
    delay_analytic: Optional[float]

    def __iter__(self):
        return iter((self.vg_numeric, self.vg_analytic))


def _window_halfwidth(delta, absorption, at=0.0):
    i0 = int(np.argmin(np.abs(delta - at)))
    left = i0
    while left > 0 and absorption[left - 1] >= absorption[left]:
        left -= 1
    right = i0
    while right < len(delta) - 1 and absorption[right + 1] >= absorption[right]:
        right += 1
    top = min(absorption[left], absorption[right])
    half = absorption[i0] + 0.5 * (top - absorption[i0])
    lo = i0
    while lo > left and absorption[lo] < half:
        lo -= 1
    hi = i0
    while hi < right and absorption[hi] < half:
        hi += 1
    return 0.5 * (delta[hi] - delta[lo]), hi - lo


def group_velocity(chi: Spectrum, medium: MediumSpec, nu_p: Optional[float] = None,
                   omega_c: Optional[complex] = None, min_points: int = 20) -> GroupVelocity:
    """Group velocity at two-photon resonance.

    The numeric channel differentiates ``n = 1 + Re chi`` at ``delta = 0`` by a
    central difference; the analytic channel evaluates the control-field
    closed form ``c / (1 + (c alpha0/(pi gamma13)) |Oc|^2/gamma_EIT^2)`` with
    the rates expressed in cyclic units (Hz), which is the reading that
    matches the numeric channel. ``nu_p`` defaults to ``c k_p / 2 pi``.
    """
    d = chi.delta
    if not (d[0] < 0 < d[-1]):
        raise ResolutionError("grid must bracket delta = 0")
    absorption = np.imag(chi.chi)
    hw, npts = _window_halfwidth(d, absorption)
    if npts < min_points:
        raise ResolutionError(f"EIT window resolved by {npts} points; need at least {min_points}")
    nu = C_LIGHT * medium.k_p / (2 * math.pi) if nu_p is None else float(nu_p)
    # differentiate Re chi itself; 1 + Re chi rounds away a dilute medium
    slope = np.interp(0.0, d, np.gradient(np.real(chi.chi), d))
    # nu dn/dnu = omega dn/domega
    ng = 1.0 + 2 * math.pi * nu * slope
    vg = C_LIGHT / ng
    delay = medium.length * (ng - 1.0) / C_LIGHT
    vg_a = delay_a = None
    if omega_c is not None:
        sys = medium.system
        oc2 = abs(complex(omega_c)) ** 2
        g = sys.gamma12 + oc2 / sys.gamma13
        two_pi = 2 * math.pi
        coeff = C_LIGHT * medium.alpha0 / (math.pi * sys.gamma13 / two_pi)
        ng_a = 1.0 + coeff * (oc2 / two_pi ** 2) / (g / two_pi) ** 2
        vg_a = C_LIGHT / ng_a
        delay_a = medium.length * (ng_a - 1.0) / C_LIGHT
    return GroupVelocity(vg, vg_a, ng, delay, delay_a)

"""
Thermal-motion models for vapor-cell EIT.

Velocities are one-dimensional along the probe axis for Doppler averaging;
transverse motion only enters through transit-time widths. Rates are rad/s,
velocities m/s, wavevectors rad/m.

Doppler averaging offers three routes:

``gauss_hermite``
    Gauss-Hermite quadrature with node doubling until the result changes by
    less than ``tol`` (relative).
``faddeeva``
    Exact evaluation. The velocity-dependent susceptibility is a ratio of a
    linear and a quadratic polynomial in ``v``, so a partial-fraction split
    reduces the Maxwell-Boltzmann average to Faddeeva functions.
``trapezoid``
    Brute-force trapezoid rule over +-8 v_th, used as an oracle.

``auto`` (the default) uses Gauss-Hermite when it converges within
``max_nodes`` and falls back to the exact route otherwise; the route taken is
recorded in ``Spectrum.meta``.

Ramsey narrowing in coated or buffer-gas cells is not modelled; at most it
pushes the two-photon width down towards gamma12.
"""

from __future__ import annotations

import enum
import math
import warnings
from dataclasses import dataclass
from typing import Optional

import numpy as np
from scipy.special import roots_hermite, voigt_profile, wofz

from .atomsys import (PRESSURE_BROADENING, TORR, AtomicSystem, DetuningGrid,
                      MotionEnvironment, Spectrum, probe_detuning_for)
from .errors import EITWarning, ParameterError, ResolutionError
from .steady import chi_weak_probe

__all__ = [
    "Mechanism",
    "LineshapeFamily",
    "BroadeningReport",
    "sigma_doppler",
    "maxwell_weight",
    "doppler_average",
    "doppler_chi",
    "residual_doppler_width",
    "dicke_width",
    "transit_width",
    "cusp_lineshape",
    "cusp_fwhm",
    "transit_cusp_spectrum",
    "eit_width_collisional",
    "eit_width_doppler",
    "pressure_broadening",
    "dicke_eit_spectrum",
    "pseudo_voigt",
    "pseudo_voigt_eta",
    "voigt_fwhm",
    "voigt",
]

SQRT_HALF_PI = math.sqrt(0.5 * math.pi)


class Mechanism(str, enum.Enum):
    DOPPLER = "Doppler"
    RESIDUAL_DOPPLER = "ResidualDoppler"
    DICKE = "Dicke"
    TRANSIT_BALLISTIC = "TransitBallistic"
    TRANSIT_DIFFUSIVE = "TransitDiffusive"
    COLLISIONAL = "Collisional"


class LineshapeFamily(str, enum.Enum):
    GAUSSIAN = "Gaussian"
    LORENTZIAN = "Lorentzian"
    CUSP = "Cusp"
    VOIGT = "Voigt"


@dataclass(frozen=True)
class BroadeningReport:
    mechanism: Mechanism
    width: float
    lineshape_family: LineshapeFamily

    def __post_init__(self):
        if not self.width >= 0:
            raise ParameterError(f"broadening width must be non-negative, got {self.width}")


# --------------------------------------------------------------------------
# widths

def sigma_doppler(v_th: float, k: float) -> float:
    """One-photon Doppler width ``v_th * |k|``."""
    if k < 0:
        raise ParameterError("wavenumber must be non-negative")
    return v_th * k


def residual_doppler_width(k: float, v_th: float, theta: float) -> float:
    """Two-photon Doppler width for a small angle ``theta`` between beams."""
    if theta < 0:
        raise ParameterError("angle must be non-negative")
    return k * v_th * theta


def dicke_width(diffusion: float, k_eff: float) -> float:
    """Dicke-narrowed Lorentzian half-width ``D k_eff^2``."""
    if diffusion < 0:
        raise ParameterError("diffusion coefficient must be non-negative")
    return diffusion * k_eff ** 2


def transit_width(env: MotionEnvironment, w0: float) -> BroadeningReport:
    """Transit-time width through a beam of waist ``w0``: the smaller of the
    ballistic ``v_th/w0`` and diffusive ``D/w0^2`` rates."""
    if w0 <= 0:
        raise ParameterError("beam waist must be positive")
    candidates = [(env.v_th / w0, Mechanism.TRANSIT_BALLISTIC, LineshapeFamily.CUSP)]
    if env.diffusion > 0:
        candidates.append((env.diffusion / w0 ** 2, Mechanism.TRANSIT_DIFFUSIVE,
                           LineshapeFamily.LORENTZIAN))
    width, mech, family = min(candidates, key=lambda c: c[0])
    return BroadeningReport(mech, width, family)


def pressure_broadening(pressure_pa: float, rate_per_torr: float = PRESSURE_BROADENING) -> float:
    """Collisional broadening of the optical line for a buffer-gas pressure in Pa."""
    return rate_per_torr * pressure_pa / TORR


def eit_width_collisional(sys: AtomicSystem, env: MotionEnvironment, omega_c,
                          sigma_dop: float) -> float:
    """EIT half-width with homogeneous collisional broadening.

    Intended for ``gamma13 + gamma13_col >> sigma_dop``; an :class:`EITWarning`
    ("crude approximation") is issued when that ratio is below 10.
    """
    den = sys.gamma13 + env.gamma13_col + sigma_dop
    if den <= 0:
        raise ParameterError("gamma13 + gamma13_col + sigma_dop must be positive")
    if sigma_dop > 0 and (sys.gamma13 + env.gamma13_col) < 10 * sigma_dop:
        warnings.warn("collisional EIT width is a crude approximation: homogeneous width "
                      "does not dominate the Doppler width", EITWarning, stacklevel=2)
    return abs(complex(omega_c)) ** 2 / den + sys.gamma12 + env.gamma12_col


def eit_width_doppler(sys: AtomicSystem, omega_c, sigma_dop: float) -> float:
    """Doppler-limited EIT half-width ``|Oc|^2/sigma_dop + gamma12``."""
    if sigma_dop <= 0:
        raise ParameterError("sigma_dop must be positive")
    return abs(complex(omega_c)) ** 2 / sigma_dop + sys.gamma12


# --------------------------------------------------------------------------
# lineshapes

def maxwell_weight(v, v_th: float):
    """One-dimensional Maxwell-Boltzmann density with rms velocity ``v_th``."""
    if v_th <= 0:
        raise ParameterError("v_th must be positive")
    v = np.asarray(v, dtype=float)
    return np.exp(-0.5 * (v / v_th) ** 2) / (math.sqrt(2 * math.pi) * v_th)


def cusp_lineshape(delta, w0: float, v_th: float):
    """Transit-time cusp weight ``exp(-|delta| w0 / v_th)`` (peak 1)."""
    if v_th <= 0:
        raise ParameterError("v_th must be positive")
    return np.exp(-np.abs(np.asarray(delta, dtype=float)) * w0 / v_th)


def cusp_fwhm(w0: float, v_th: float) -> float:
    return 2.0 * math.log(2.0) * v_th / w0


def voigt(x, sigma: float, gamma: float):
    """Area-normalised Voigt profile (Gaussian rms ``sigma``, Lorentzian HWHM ``gamma``)."""
    return voigt_profile(np.asarray(x, dtype=float), sigma, gamma)


def voigt_fwhm(sigma: float, gamma: float) -> float:
    """Olivero-Longbothum approximation to the Voigt FWHM (0.02 % accurate)."""
    fg = 2.0 * sigma * math.sqrt(2.0 * math.log(2.0))
    fl = 2.0 * gamma
    return 0.5346 * fl + math.sqrt(0.2166 * fl * fl + fg * fg)


def _tch(sigma: float, gamma: float):
    fg = 2.0 * sigma * math.sqrt(2.0 * math.log(2.0))
    fl = 2.0 * gamma
    f = (fg ** 5 + 2.69269 * fg ** 4 * fl + 2.42843 * fg ** 3 * fl ** 2
         + 4.47163 * fg ** 2 * fl ** 3 + 0.07842 * fg * fl ** 4 + fl ** 5) ** 0.2
    r = fl / f
    eta = 1.36603 * r - 0.47719 * r ** 2 + 0.11116 * r ** 3
    return f, min(max(eta, 0.0), 1.0)


def pseudo_voigt_eta(sigma: float, gamma: float) -> float:
    """Lorentzian fraction of the width-matched pseudo-Voigt."""
    return _tch(sigma, gamma)[1]


def pseudo_voigt(x, sigma: float, gamma: float):
    """Peak-normalised pseudo-Voigt (Thompson-Cox-Hastings width matching)."""
    f, eta = _tch(sigma, gamma)
    x = np.asarray(x, dtype=float)
    hw = 0.5 * f
    lor = 1.0 / (1.0 + (x / hw) ** 2)
    gau = np.exp(-math.log(2.0) * (x / hw) ** 2)
    return eta * lor + (1.0 - eta) * gau


# --------------------------------------------------------------------------
# Doppler averaging

def _gaussian_inverse_mean(z, v_th):
    """<1/(v - z)> over v ~ N(0, v_th^2); principal value for real z."""
    z = np.asarray(z, dtype=complex)
    zeta = z / (math.sqrt(2.0) * v_th)
    out = np.empty(zeta.shape, dtype=complex)
    up = zeta.imag > 0
    down = zeta.imag < 0
    real = ~(up | down)
    out[up] = 1j * SQRT_HALF_PI * wofz(zeta[up]) / v_th
    out[down] = -1j * SQRT_HALF_PI * np.conj(wofz(np.conj(zeta[down]))) / v_th
    # average of the two one-sided limits
    w = wofz(zeta[real])
    out[real] = -SQRT_HALF_PI * w.imag / v_th
    return out


def _chi_velocity(sys, oc2, delta1, delta, v, k_probe, k_eff):
    g13 = sys.gamma13 - 1j * (delta1 - k_probe * v)
    g12 = sys.gamma12 - 1j * (delta - k_eff * v)
    if oc2 == 0:
        return 1j * sys.chi_scale / g13
    return 1j * sys.chi_scale * g12 / (g12 * g13 + oc2)


def _average_gh(sys, oc2, d1, d, k_probe, k_eff, v_th, nodes):
    x, w = roots_hermite(nodes)
    v = math.sqrt(2.0) * v_th * x
    vals = _chi_velocity(sys, oc2, d1[:, None], d[:, None], v[None, :], k_probe, k_eff)
    return vals @ (w / math.sqrt(math.pi))


def _average_trapezoid(sys, oc2, d1, d, k_probe, k_eff, v_th, points=100_001, span=8.0,
                       chunk=64):
    v = np.linspace(-span * v_th, span * v_th, points)
    weight = maxwell_weight(v, v_th)
    out = np.empty(d.shape, dtype=complex)
    for s in range(0, len(d), chunk):
        vals = _chi_velocity(sys, oc2, d1[s:s + chunk, None], d[s:s + chunk, None], v[None, :],
                             k_probe, k_eff)
        out[s:s + chunk] = np.trapezoid(vals * weight, v, axis=1)
    return out


def _average_faddeeva(sys, oc2, d1, d, k_probe, k_eff, v_th):
    c = sys.chi_scale
    a3 = sys.gamma13 - 1j * d1
    a2 = sys.gamma12 - 1j * d
    if oc2 == 0:
        # two-level limit: the ground-state factor cancels
        a2, k_eff = np.ones_like(a2), 0.0
    # chi(v) = N(v)/Q(v), N = iC(a2 + i k_eff v), Q = (a2 + i k_eff v)(a3 + i k_p v) + oc2
    n1 = -c * k_eff
    n0 = 1j * c * a2
    q2 = -k_eff * k_probe
    q1 = 1j * (a2 * k_probe + a3 * k_eff)
    q0 = a2 * a3 + oc2
    out = np.empty(d.shape, dtype=complex)
    # numerically stable roots: v_small = q0/big, v_large = big/q2
    disc = np.sqrt(q1 * q1 - 4 * q2 * q0)
    sign = np.where(np.real(np.conj(q1) * disc) >= 0, 1.0, -1.0)
    big = -0.5 * (q1 + sign * disc)
    flat = big == 0
    out[flat] = n0[flat] / q0[flat]
    with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
        vs = np.where(flat, np.inf, q0 / np.where(flat, 1.0, big))
        vl = big / q2 if q2 != 0 else np.full(d.shape, np.inf, dtype=complex)
    far = 1e3 * v_th
    # both poles far away: the integrand is smooth over the Maxwellian
    smooth = ~flat & ~(np.abs(vs) < far)
    if np.any(smooth):
        out[smooth] = _average_gh(sys, oc2, d1[smooth], d[smooth], k_probe, k_eff, v_th, 64)
    rest = ~flat & ~smooth
    # a vanishing quadratic term pushes the second pole to infinity: linear limit
    linear = rest & ~(np.abs(vl) < 1e100 * far)
    if np.any(linear):
        v0 = vs[linear]
        ql = -big[linear]
        out[linear] = n1 / ql + (n1 * v0 + n0[linear]) / ql * _gaussian_inverse_mean(v0, v_th)
    pair = rest & ~linear
    close = pair.copy()
    close[pair] = np.abs(vl[pair] - vs[pair]) < 1e-6 * (np.abs(vl[pair]) + np.abs(vs[pair]) + v_th)
    ok = pair & ~close
    if np.any(ok):
        v1, v2 = vl[ok], vs[ok]
        r1 = (n1 * v1 + n0[ok]) / (q2 * (v1 - v2))
        r2 = (n1 * v2 + n0[ok]) / (q2 * (v2 - v1))
        out[ok] = r1 * _gaussian_inverse_mean(v1, v_th) + r2 * _gaussian_inverse_mean(v2, v_th)
    if np.any(close):
        out[close] = _average_trapezoid(sys, oc2, d1[close], d[close], k_probe, k_eff, v_th)
    return out


def doppler_chi(sys: AtomicSystem, omega_c, delta1, delta, k_probe: float, k_eff: float,
                v_th: float, method: str = "auto", nodes: int = 64, tol: float = 1e-4,
                max_nodes: int = 512):
    """Velocity-averaged weak-probe susceptibility at detunings (delta1, delta).

    Each velocity class sees ``Delta1 - k_probe v`` and ``delta - k_eff v``.
    Returns ``(chi, info)`` where ``info`` records the route, node count and
    any convergence caveat.
    """
    if v_th <= 0:
        raise ParameterError("Doppler averaging needs v_th > 0")
    d1, d = np.broadcast_arrays(np.atleast_1d(np.asarray(delta1, dtype=float)),
                                np.atleast_1d(np.asarray(delta, dtype=float)))
    d1, d = d1.astype(float), d.astype(float)
    oc2 = abs(complex(omega_c)) ** 2
    info = {"method": method, "nodes": None, "warnings": []}
    if method == "faddeeva":
        return _average_faddeeva(sys, oc2, d1, d, k_probe, k_eff, v_th), info
    if method == "trapezoid":
        return _average_trapezoid(sys, oc2, d1, d, k_probe, k_eff, v_th), info
    if method not in ("auto", "gauss_hermite"):
        raise ParameterError(f"unknown Doppler averaging method {method!r}")
    n = nodes
    prev = _average_gh(sys, oc2, d1, d, k_probe, k_eff, v_th, n)
    while True:
        cur = _average_gh(sys, oc2, d1, d, k_probe, k_eff, v_th, 2 * n)
        change = np.max(np.abs(cur - prev)) / max(np.max(np.abs(cur)), np.finfo(float).tiny)
        n *= 2
        if change < tol:
            info.update(method="gauss_hermite", nodes=n)
            return cur, info
        if n >= max_nodes:
            break
        prev = cur
    msg = (f"Gauss-Hermite quadrature not converged at {n} nodes "
           f"(relative change {change:.1e} > {tol:.0e})")
    if method == "gauss_hermite":
        info.update(method="gauss_hermite", nodes=n)
        info["warnings"].append(msg)
        return cur, info
    info.update(method="faddeeva", nodes=None)
    info["gauss_hermite_note"] = msg
    return _average_faddeeva(sys, oc2, d1, d, k_probe, k_eff, v_th), info


def _scan_detunings(sys, control, delta, scan, delta1):
    d2 = control.detuning if hasattr(control, "detuning") else 0.0
    if delta1 is not None:
        return np.full_like(delta, float(delta1))
    if scan == "probe":
        return probe_detuning_for(sys.scheme_kind, delta, d2)
    raise ParameterError("a control scan needs a fixed delta1")


def _rabi(control):
    return complex(control.rabi if hasattr(control, "rabi") else control)


def doppler_average(sys: AtomicSystem, control, grid: DetuningGrid, k_probe: float,
                    k_eff: float, v_th: float, delta1: Optional[float] = None,
                    method: str = "auto", nodes: int = 64, tol: float = 1e-4) -> Spectrum:
    """Doppler-averaged susceptibility over a two-photon detuning grid.

    By default the probe is scanned (Delta1 follows delta at fixed control
    detuning); pass ``delta1`` to hold the probe fixed and scan the control.
    """
    delta = grid.values
    d1 = _scan_detunings(sys, control, delta, "probe", delta1)
    chi, info = doppler_chi(sys, _rabi(control), d1, delta, k_probe, k_eff, v_th, method,
                            nodes, tol)
    for msg in info["warnings"]:
        warnings.warn(msg, EITWarning, stacklevel=2)
    meta = {"doppler_method": info["method"], "doppler_nodes": info["nodes"],
            "motion_mode": "DopplerAverage"}
    if "gauss_hermite_note" in info:
        meta["doppler_note"] = info["gauss_hermite_note"]
    return Spectrum(delta, chi, warnings=list(info["warnings"]), meta=meta)


def dicke_eit_spectrum(sys: AtomicSystem, control, grid: DetuningGrid, k_eff: float,
                       diffusion: float, v_th: Optional[float] = None,
                       delta1: Optional[float] = None) -> Spectrum:
    """Spectrum with Dicke-narrowed two-photon decoherence ``gamma12 + D k_eff^2``."""
    notes = []
    if v_th is not None and k_eff > 0 and diffusion * k_eff >= v_th:
        msg = ("Dicke substitution outside its regime: D/l^2 >= v_th/l for l = 1/k_eff "
               f"(D k_eff = {diffusion * k_eff:.3g} m/s, v_th = {v_th:.3g} m/s)")
        notes.append(msg)
        warnings.warn(msg, EITWarning, stacklevel=2)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", EITWarning)
        narrowed = sys.replace(gamma12=sys.gamma12 + dicke_width(diffusion, k_eff))
    delta = grid.values
    d1 = _scan_detunings(sys, control, delta, "probe", delta1)
    chi = chi_weak_probe(narrowed, _rabi(control), d1, delta).value
    return Spectrum(delta, chi, warnings=notes,
                    meta={"motion_mode": "DickeSubstitution",
                          "gamma12_effective": narrowed.gamma12})


def transit_cusp_spectrum(sys: AtomicSystem, control, grid: DetuningGrid, w0: float,
                          v_th: float, delta1: Optional[float] = None,
                          min_points: int = 10) -> Spectrum:
    """Two-photon spectrum convolved with the normalised transit cusp kernel.

    The kernel ``exp(-|x| w0/v_th) w0/(2 v_th)`` is sampled with the grid
    step and applied by trapezoid summation; the susceptibility is evaluated
    in closed form at the shifted two-photon detunings. The grid must resolve
    the narrower of the cusp (1/e half-width ``v_th/w0``) and the homogeneous
    EIT half-width by ``min_points`` samples.
    """
    if w0 <= 0 or v_th <= 0:
        raise ParameterError("transit cusp needs w0 > 0 and v_th > 0")
    delta = grid.values
    step = grid.step
    oc = _rabi(control)
    scale = v_th / w0
    natural = sys.gamma12 + abs(oc) ** 2 / sys.gamma13 if sys.gamma13 > 0 else sys.gamma12
    narrow = min(scale, natural) if natural > 0 else scale
    if narrow / step < min_points:
        raise ResolutionError(f"grid step {step:.3g} rad/s resolves the narrowest width "
                              f"{narrow:.3g} rad/s by fewer than {min_points} points")
    half = int(math.ceil(30.0 * scale / step))
    offsets = step * np.arange(-half, half + 1)
    kernel = np.exp(-np.abs(offsets) / scale)
    kernel[[0, -1]] *= 0.5
    kernel /= kernel.sum()
    d1 = _scan_detunings(sys, control, delta, "probe", delta1)
    shifted = delta[:, None] - offsets[None, :]
    chi = chi_weak_probe(sys, oc, d1[:, None], shifted).value @ kernel
    return Spectrum(delta, chi, meta={"motion_mode": "TransitCusp", "transit_width": scale})

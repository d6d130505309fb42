"""
Resonance lineshape models and a damped least-squares fitter.

Every model carries an additive baseline ``y0`` so that dips sitting on an
absorption background can be fitted directly. Parameters:

=====================  ==========================================
kind                   parameters
=====================  ==========================================
Lorentzian             A, gamma, center, y0
GeneralizedLorentzian  A, B, C, gamma, center, y0
Gaussian               A, sigma, center, y0
Cusp                   A, width, center, y0   (width = 1/e half width)
PseudoVoigt            A, fwhm, eta, center, y0
=====================  ==========================================

The generalized Lorentzian is ``y0 + gamma (A gamma + B x) / (gamma^2 + x^2 + C)``
with ``x = delta - center``. Its five shape parameters are not independent
(only ``A gamma^2``, ``B gamma`` and ``gamma^2 + C`` are identifiable), so ``C``
is held at its initial value unless ``fit_c=True``.

The optimiser is Levenberg-Marquardt with Marquardt's diagonal scaling,
working on data normalised to unit ranges. Jacobians are obtained by
complex-step differentiation and are therefore exact to rounding. A step is
accepted only if it lowers the residual norm.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence

import numpy as np
from scipy.optimize import brentq, minimize_scalar

from .errors import FitError

__all__ = [
    "ModelKind",
    "FitModel",
    "FitResult",
    "QuadraticLaw",
    "eval_model",
    "fit",
    "quadratic_width_law",
]


class ModelKind(str, enum.Enum):
    GENERALIZED_LORENTZIAN = "GeneralizedLorentzian"
    LORENTZIAN = "Lorentzian"
    CUSP = "Cusp"
    GAUSSIAN = "Gaussian"
    PSEUDO_VOIGT = "PseudoVoigt"


# role of each parameter under an affine change of units x -> (x - xm)/xs,
# y -> (y - ym)/ys: position, width, width squared, amplitude, baseline, pure
_SPECS = {
    ModelKind.LORENTZIAN: (("A", "amp"), ("gamma", "width"), ("center", "pos"), ("y0", "base")),
    ModelKind.GENERALIZED_LORENTZIAN: (("A", "amp"), ("B", "amp"), ("C", "width2"),
                                       ("gamma", "width"), ("center", "pos"), ("y0", "base")),
    ModelKind.GAUSSIAN: (("A", "amp"), ("sigma", "width"), ("center", "pos"), ("y0", "base")),
    ModelKind.CUSP: (("A", "amp"), ("width", "width"), ("center", "pos"), ("y0", "base")),
    ModelKind.PSEUDO_VOIGT: (("A", "amp"), ("fwhm", "width"), ("eta", "pure"), ("center", "pos"),
                             ("y0", "base")),
}


def _abs(z):
    # |z| continued analytically off the real axis, for complex-step derivatives
    return z * np.sign(np.real(z))


def _shape(kind: ModelKind, p: Dict[str, complex], x):
    u = x - p["center"]
    if kind is ModelKind.LORENTZIAN:
        g = p["gamma"]
        return p["A"] * g * g / (g * g + u * u)
    if kind is ModelKind.GENERALIZED_LORENTZIAN:
        g = p["gamma"]
        return g * (p["A"] * g + p["B"] * u) / (g * g + u * u + p["C"])
    if kind is ModelKind.GAUSSIAN:
        return p["A"] * np.exp(-0.5 * (u / p["sigma"]) ** 2)
    if kind is ModelKind.CUSP:
        return p["A"] * np.exp(-_abs(u) / p["width"])
    hw = 0.5 * p["fwhm"]
    eta = p["eta"]
    lor = 1.0 / (1.0 + (u / hw) ** 2)
    gau = np.exp(-math.log(2.0) * (u / hw) ** 2)
    return p["A"] * (eta * lor + (1.0 - eta) * gau)


@dataclass(frozen=True)
class FitModel:
    kind: ModelKind
    params: Dict[str, float]

    def __post_init__(self):
        kind = ModelKind(self.kind)
        object.__setattr__(self, "kind", kind)
        names = [n for n, _ in _SPECS[kind]]
        params = {n: float(self.params.get(n, 0.0)) for n in names}
        extra = set(self.params) - set(names)
        if extra:
            raise FitError(f"unknown parameters for {kind.value}: {sorted(extra)}")
        object.__setattr__(self, "params", params)
        width = names[1] if kind is not ModelKind.GENERALIZED_LORENTZIAN else "gamma"
        if not params[width] > 0:
            raise FitError(f"{kind.value} width parameter must be positive")
        if kind is ModelKind.GENERALIZED_LORENTZIAN and params["C"] < 0:
            raise FitError("generalized Lorentzian needs C >= 0")
        if kind is ModelKind.PSEUDO_VOIGT and not 0.0 <= params["eta"] <= 1.0:
            raise FitError("pseudo-Voigt mixing parameter must lie in [0, 1]")

    @property
    def names(self):
        return [n for n, _ in _SPECS[self.kind]]


def eval_model(model: FitModel, delta):
    """Evaluate a model (including its baseline) at ``delta``."""
    x = np.asarray(delta, dtype=float)
    return model.params["y0"] + _shape(model.kind, model.params, x).real


@dataclass
class FitResult:
    model: FitModel
    rms_residual: float
    fwhm: float
    center: float
    contrast: float
    converged: bool
    iterations: int
    stderr: Dict[str, float] = field(default_factory=dict)
    history: List[float] = field(default_factory=list)
    gradient_norm: float = float("nan")

    @property
    def hwhm(self) -> float:
        return 0.5 * self.fwhm

    def to_dict(self) -> dict:
        return {
            "kind": self.model.kind.value,
            "params": dict(self.model.params),
            "stderr": dict(self.stderr),
            "rms_residual": self.rms_residual,
            "fwhm": self.fwhm,
            "center": self.center,
            "contrast": self.contrast,
            "converged": self.converged,
            "iterations": self.iterations,
        }


# --------------------------------------------------------------------------
# normalisation and internal parametrisation

def _to_norm(role, v, xm, xs, ym, ys):
    return {"pos": (v - xm) / xs, "width": v / xs, "width2": v / xs ** 2,
            "amp": v / ys, "base": (v - ym) / ys, "pure": v}[role]


def _from_norm(role, v, xm, xs, ym, ys):
    return {"pos": v * xs + xm, "width": v * xs, "width2": v * xs ** 2,
            "amp": v * ys, "base": v * ys + ym, "pure": v}[role]


def _role_scale(role, xs, ys):
    return {"pos": xs, "width": xs, "width2": xs ** 2, "amp": ys, "base": ys, "pure": 1.0}[role]


# unconstrained coordinates: widths via log, C via square, eta via sin^2
def _encode(name, role, v):
    if role == "width":
        return math.log(v)
    if name == "C":
        return math.sqrt(max(v, 0.0))
    if name == "eta":
        return math.asin(math.sqrt(min(max(v, 0.0), 1.0)))
    return v


def _decode(name, role, t):
    if role == "width":
        return np.exp(t)
    if name == "C":
        return t * t
    if name == "eta":
        return np.sin(t) ** 2
    return t


def _decode_deriv(name, role, t):
    if role == "width":
        return math.exp(t)
    if name == "C":
        return 2.0 * t
    if name == "eta":
        return math.sin(2.0 * t)
    return 1.0


# --------------------------------------------------------------------------
# initial guesses

def _half_width(x, dy, i0):
    half = 0.5 * dy[i0]
    sign = np.sign(half) or 1.0
    left = i0
    while left > 0 and sign * dy[left] > sign * half:
        left -= 1
    right = i0
    while right < len(x) - 1 and sign * dy[right] > sign * half:
        right += 1
    widths = []
    if left != i0 and sign * dy[left] <= sign * half:
        widths.append(x[i0] - x[left])
    if right != i0 and sign * dy[right] <= sign * half:
        widths.append(x[right] - x[i0])
    if not widths:
        return 0.25 * (x[-1] - x[0])
    return max(float(np.mean(widths)), 0.5 * float(np.min(np.diff(x))))


def _moments(kind, x, y):
    n = len(x)
    edge = max(1, n // 20)
    base = float(np.median(np.concatenate([y[:edge], y[-edge:]])))
    dy = y - base
    i0 = int(np.argmax(np.abs(dy)))
    amp = float(dy[i0])
    hw = _half_width(x, dy, i0)
    c = float(x[i0])
    if kind is ModelKind.LORENTZIAN:
        return {"A": amp, "gamma": hw, "center": c, "y0": base}
    if kind is ModelKind.GENERALIZED_LORENTZIAN:
        return {"A": amp, "B": 0.0, "C": 0.0, "gamma": hw, "center": c, "y0": base}
    if kind is ModelKind.GAUSSIAN:
        return {"A": amp, "sigma": hw / math.sqrt(2 * math.log(2)), "center": c, "y0": base}
    if kind is ModelKind.CUSP:
        return {"A": amp, "width": hw / math.log(2), "center": c, "y0": base}
    return {"A": amp, "fwhm": 2 * hw, "eta": 0.5, "center": c, "y0": base}


# --------------------------------------------------------------------------
# optimiser

def _numeric_fwhm(model: FitModel, x_lo, x_hi):
    """Full width at half extremum (relative to the baseline) by root bracketing."""
    kind, p = model.kind, model.params
    f = lambda t: float(_shape(kind, p, np.asarray(t)).real)
    span = x_hi - x_lo
    width = max(abs(p.get("gamma", 0)), abs(p.get("sigma", 0)), abs(p.get("width", 0)),
                abs(p.get("fwhm", 0)), 1e-300)
    grid = np.linspace(p["center"] - 20 * width, p["center"] + 20 * width, 40001)
    vals = _shape(kind, p, grid).real
    k = int(np.argmax(np.abs(vals)))
    ext = vals[k]
    if ext == 0:
        return float("nan"), p["center"], 0.0
    peak = grid[k]
    if 0 < k < len(grid) - 1:
        try:
            res = minimize_scalar(lambda t: -np.sign(ext) * f(t),
                                  bracket=(grid[k - 1], grid[k], grid[k + 1]))
            if abs(f(res.x)) >= abs(ext):
                peak, ext = float(res.x), f(res.x)
        except ValueError:
            pass
    half = 0.5 * ext
    g = lambda t: f(t) - half
    step = width
    edges = []
    for direction in (-1.0, 1.0):
        t = peak
        found = None
        for _ in range(200):
            t_next = t + direction * step
            if np.sign(g(t_next)) != np.sign(g(peak)):
                found = brentq(g, min(t, t_next), max(t, t_next), xtol=1e-14 * max(1.0, abs(t)),
                               rtol=1e-14)
                break
            t = t_next
            step *= 1.2
        if found is None:
            return float("nan"), peak, ext
        edges.append(found)
        step = width
    return edges[1] - edges[0], peak, ext


def fit(data, kind, init: Optional[Dict[str, float]] = None, y=None, fit_c: bool = False,
        max_iter: int = 500, gtol: float = 1e-8, fixed: Sequence[str] = ()) -> FitResult:
    """Least-squares fit of a lineshape model.

    ``data`` is a :class:`~eitvapor.atomsys.Spectrum`-like object with
    ``delta`` and a real channel (``absorption`` attribute not required):
    pass ``y`` explicitly, or a Spectrum whose ``-log T`` (if available) or
    ``Im chi`` is used. ``init`` overrides the moment-based initial guess.
    Converged means the scaled gradient norm dropped below ``gtol`` within
    ``max_iter`` iterations; otherwise the best parameters so far are
    returned with ``converged=False``. Parameters named in ``fixed`` stay at
    their initial values (e.g. ``fixed=["y0"], init={"y0": 0}`` for a peak
    without background).
    """
    kind = ModelKind(kind)
    x, y = _xy(data, y)
    spec = _SPECS[kind]
    names = [n for n, _ in spec]
    roles = {n: r for n, r in spec}
    if len(x) < 5 * len(names):
        raise FitError(f"need at least {5 * len(names)} points for a {kind.value} fit, got {len(x)}")
    if not np.all(np.isfinite(y)) or not np.all(np.isfinite(x)):
        raise FitError("data contain non-finite values")
    if np.ptp(y) == 0:
        raise FitError("data are constant; nothing to fit")
    order = np.argsort(x)
    x, y = x[order], y[order]

    xm, xs = 0.5 * (x[0] + x[-1]), 0.5 * (x[-1] - x[0])
    ym, ys = 0.5 * (y.max() + y.min()), 0.5 * np.ptp(y)
    xn, yn = (x - xm) / xs, (y - ym) / ys

    start = _moments(kind, x, y)
    if init:
        unknown = set(init) - set(names)
        if unknown:
            raise FitError(f"unknown init parameters {sorted(unknown)}")
        start.update({k: float(v) for k, v in init.items()})
    FitModel(kind, start)

    unknown = set(fixed) - set(names)
    if unknown:
        raise FitError(f"cannot fix unknown parameters {sorted(unknown)}")
    held = set(fixed) | ({"C"} if not fit_c else set())
    free = [n for n in names if n not in held]
    fixed = {n: _to_norm(roles[n], start[n], xm, xs, ym, ys) for n in names if n not in free}
    theta = np.array([_encode(n, roles[n], _to_norm(roles[n], start[n], xm, xs, ym, ys))
                      for n in free])

    def params_of(t):
        p = dict(fixed)
        for n, v in zip(free, t):
            p[n] = _decode(n, roles[n], v)
        return p

    def residual(t):
        p = params_of(t)
        return (p["y0"] + _shape(kind, p, xn)) - yn

    def jacobian(t):
        h = 1e-30
        cols = []
        for k in range(len(t)):
            tc = t.astype(complex)
            tc[k] += 1j * h
            cols.append(residual(tc).imag / h)
        return np.column_stack(cols)

    r = residual(theta).real
    cost = float(r @ r)
    scale = math.sqrt(len(xn))
    lam = 1e-3
    history = [math.sqrt(cost / len(xn))]
    converged = False
    it = 0
    gnorm = float("inf")
    for it in range(1, max_iter + 1):
        jac = jacobian(theta)
        grad = jac.T @ r
        gnorm = float(np.max(np.abs(grad)))
        jnorm = float(np.linalg.norm(jac)) or 1.0
        if gnorm < gtol * jnorm * scale:
            converged = True
            it -= 1
            break
        jtj = jac.T @ jac
        diag = np.sqrt(np.maximum(np.diag(jtj), 1e-30 * max(np.diag(jtj).max(), 1e-300)))
        accepted = False
        for _ in range(60):
            a = np.vstack([jac, math.sqrt(lam) * np.diag(diag)])
            b = np.concatenate([-r, np.zeros(len(theta))])
            step = np.linalg.lstsq(a, b, rcond=None)[0]
            trial = theta + step
            # wild trial steps may overflow; they are rejected by the cost test
            with np.errstate(over="ignore", invalid="ignore", divide="ignore"):
                r_new = residual(trial).real
            c_new = float(r_new @ r_new)
            if np.isfinite(c_new) and c_new < cost:
                theta, r, cost = trial, r_new, c_new
                lam = max(lam / 3.0, 1e-15)
                accepted = True
                break
            lam *= 4.0
            if lam > 1e16:
                break
        history.append(math.sqrt(cost / len(xn)))
        if not accepted:
            # no descent direction left; judge convergence on the gradient
            jac = jacobian(theta)
            gnorm = float(np.max(np.abs(jac.T @ r)))
            converged = gnorm < gtol * (float(np.linalg.norm(jac)) or 1.0) * scale \
                or cost < 1e-28 * len(xn)
            break

    p_norm = params_of(theta)
    params = {n: float(_from_norm(roles[n], float(np.real(p_norm[n])), xm, xs, ym, ys))
              for n in names}
    model = FitModel(kind, params)

    stderr = _stderr(jacobian(theta), r, free, roles, theta, xs, ys)
    fwhm, peak, ext = _numeric_fwhm(model, x[0], x[-1])
    y0 = params["y0"]
    denom = max(abs(y0), abs(y0 + ext))
    contrast = abs(ext) / denom if denom > 0 else float("nan")
    rms = float(math.sqrt(cost / len(xn)) * ys)
    return FitResult(model, rms, fwhm, peak, contrast, converged, it, stderr,
                     [h * ys for h in history], gnorm)


def _stderr(jac, r, free, roles, theta, xs, ys):
    n, m = jac.shape
    if n <= m:
        return {}
    s2 = float(r @ r) / (n - m)
    try:
        cov = np.linalg.pinv(jac.T @ jac) * s2
    except np.linalg.LinAlgError:
        return {}
    out = {}
    for k, name in enumerate(free):
        d = _decode_deriv(name, roles[name], float(theta[k]))
        out[name] = float(math.sqrt(max(cov[k, k], 0.0)) * abs(d) * _role_scale(roles[name], xs, ys))
    return out


def _xy(data, y):
    if y is not None:
        return np.asarray(data, dtype=float).ravel(), np.asarray(y, dtype=float).ravel()
    x = np.asarray(data.delta, dtype=float)
    if getattr(data, "transmission", None) is not None:
        return x, -np.asarray(data.log_transmission, dtype=float)
    return x, np.imag(np.asarray(data.chi))


# --------------------------------------------------------------------------
# angle law

@dataclass(frozen=True)
class QuadraticLaw:
    """``width(theta) = offset + curvature * theta^2`` with diagnostics.

    ``runs`` counts sign runs of the residuals (few runs means structured
    residuals); ``linear_rms`` is the residual of the competing law
    ``offset + slope * |theta|`` for comparison.
    """

    offset: float
    curvature: float
    offset_err: float
    curvature_err: float
    residuals: np.ndarray
    rms: float
    runs: int
    linear_rms: float

    @property
    def preferred_law(self) -> str:
        return "quadratic" if self.rms <= self.linear_rms else "linear"


def _lstsq(design, w):
    if np.linalg.matrix_rank(design) < design.shape[1]:
        raise FitError("rank-deficient design: need at least two distinct angles")
    coef, *_ = np.linalg.lstsq(design, w, rcond=None)
    return coef, w - design @ coef


def quadratic_width_law(angles: Sequence[float], widths: Sequence[float]) -> QuadraticLaw:
    """Least-squares quadratic angle law with standard errors."""
    th = np.asarray(angles, dtype=float)
    w = np.asarray(widths, dtype=float)
    if th.shape != w.shape or th.size < 3:
        raise FitError("quadratic law needs at least 3 (angle, width) pairs")
    design = np.column_stack([np.ones_like(th), th ** 2])
    coef, res = _lstsq(design, w)
    dof = th.size - 2
    s2 = float(res @ res) / dof if dof > 0 else 0.0
    cov = s2 * np.linalg.inv(design.T @ design)
    lin_coef, lin_res = _lstsq(np.column_stack([np.ones_like(th), np.abs(th)]), w)
    signs = np.sign(res[np.abs(res) > 1e-12 * max(np.abs(w).max(), 1e-300)])
    runs = int(1 + np.count_nonzero(signs[1:] != signs[:-1])) if signs.size else 0
    return QuadraticLaw(float(coef[0]), float(coef[1]), float(math.sqrt(cov[0, 0])),
                        float(math.sqrt(cov[1, 1])), res, float(np.sqrt(np.mean(res ** 2))),
                        runs, float(np.sqrt(np.mean(lin_res ** 2))))

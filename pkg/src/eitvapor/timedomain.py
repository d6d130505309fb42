"""
Dark-state algebra and time integration of the three-level Bloch equations.

Fields enter :func:`evolve_bloch` either as constant :class:`FieldDrive`
objects or as :class:`TimeDependentField` wrappers whose ``envelope(t)``
returns the complex Rabi frequency at time ``t`` (seconds).
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence, Union

import numpy as np
from scipy.integrate import solve_ivp

from . import bloch
from .atomsys import AtomicSystem, FieldDrive
from .errors import IntegrationError, ParameterError
from .steady import DensityMatrix3

__all__ = [
    "StateVector3",
    "TimeDependentField",
    "Trajectory",
    "dark_state",
    "bright_state",
    "dark_state_evolved",
    "evolve_bloch",
    "phase_flip",
]


@dataclass(frozen=True)
class StateVector3:
    """Normalised pure state over {|1>, |2>, |3>}."""

    amplitudes: np.ndarray

    def __post_init__(self):
        amp = np.array(self.amplitudes, dtype=complex).reshape(3)
        norm = np.linalg.norm(amp)
        if abs(norm - 1.0) > 1e-12:
            raise ParameterError(f"state vector norm is {norm}, expected 1")
        amp.setflags(write=False)
        object.__setattr__(self, "amplitudes", amp)

    def overlap(self, other: "StateVector3") -> complex:
        """<self|other>."""
        return complex(np.vdot(self.amplitudes, other.amplitudes))

    def __array__(self, dtype=None, copy=None):
        return np.asarray(self.amplitudes, dtype=dtype)


def _norm(omega_p, omega_c) -> float:
    total = np.hypot(abs(complex(omega_p)), abs(complex(omega_c)))
    if total == 0:
        raise ParameterError("dark state undefined: both Rabi frequencies are zero")
    return total


def dark_state(omega_p, omega_c) -> StateVector3:
    """``(Op|2> - Oc|1>)/Omega``, the zero eigenvector of the interaction."""
    om = _norm(omega_p, omega_c)
    return StateVector3(np.array([-complex(omega_c), complex(omega_p), 0.0]) / om)


def bright_state(omega_p, omega_c) -> StateVector3:
    """``(Op*|1> + Oc*|2>)/Omega``, orthogonal to the dark state."""
    om = _norm(omega_p, omega_c)
    return StateVector3(np.array([np.conj(omega_p), np.conj(omega_c), 0.0]) / om)


def dark_state_evolved(omega_p, omega_c, delta: float, t: float) -> StateVector3:
    """Initially dark state after time ``t`` at two-photon detuning ``delta``."""
    om = _norm(omega_p, omega_c)
    phase = np.exp(1j * delta * t)
    return StateVector3(np.array([-phase * complex(omega_c), complex(omega_p), 0.0]) / om)


@dataclass(frozen=True)
class TimeDependentField:
    """A field whose Rabi frequency follows ``envelope(t)``; ``breakpoints``
    lists times where the envelope is discontinuous."""

    drive: FieldDrive
    envelope: Callable[[float], complex]
    breakpoints: tuple = ()

    def rabi(self, t: float) -> complex:
        return complex(self.envelope(t))


def phase_flip(drive: FieldDrive, t0: float, phase: float = np.pi) -> TimeDependentField:
    """Constant-amplitude field whose phase jumps by ``phase`` at ``t0``."""
    flipped = drive.rabi * np.exp(1j * phase)
    return TimeDependentField(drive, lambda t: drive.rabi if t < t0 else flipped, (t0,))


FieldLike = Union[FieldDrive, TimeDependentField]


def _as_td(f: FieldLike) -> TimeDependentField:
    if isinstance(f, TimeDependentField):
        return f
    return TimeDependentField(f, lambda t, r=f.rabi: r)


@dataclass
class Trajectory:
    """Density matrices ``rho`` (n, 3, 3) sampled at ``times`` (s)."""

    times: np.ndarray
    rho: np.ndarray
    error_estimate: Optional[float] = None
    meta: dict = field(default_factory=dict)

    def __len__(self):
        return len(self.times)

    def __getitem__(self, i) -> DensityMatrix3:
        return DensityMatrix3(self.rho[i])

    @property
    def final(self) -> DensityMatrix3:
        return DensityMatrix3(self.rho[-1])

    def element(self, i: int, j: int) -> np.ndarray:
        return self.rho[:, i, j]

    def to_csv(self, path) -> None:
        header = ["t_s", "rho11", "rho22", "rho33", "re_rho21", "im_rho21",
                  "re_rho31", "im_rho31", "re_rho32", "im_rho32"]
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh, lineterminator="\n")
            writer.writerow(header)
            for t, r in zip(self.times, self.rho):
                row = [t, r[0, 0].real, r[1, 1].real, r[2, 2].real]
                for i, j in ((1, 0), (2, 0), (2, 1)):
                    row += [r[i, j].real, r[i, j].imag]
                writer.writerow([repr(float(v)) for v in row])


def _repair(rho: np.ndarray) -> np.ndarray:
    rho = 0.5 * (rho + np.conj(np.swapaxes(rho, -1, -2)))
    tr = np.trace(rho, axis1=-2, axis2=-1).real
    return rho / tr[..., None, None]


def _integrate(gen, probe, control, x0, times, rtol, atol):
    breaks = sorted({float(b) for f in (probe, control) for b in f.breakpoints
                     if times[0] < b < times[-1]})
    edges = [times[0], *breaks, times[-1]]
    out = np.empty((len(times), 8))
    x = np.asarray(x0, dtype=float)
    filled = 0
    for k, (t_a, t_b) in enumerate(zip(edges[:-1], edges[1:])):
        last = k == len(edges) - 2
        mask = (times >= t_a) & ((times <= t_b) if last else (times < t_b))
        t_eval = times[mask]
        # evaluate fields just inside the segment so jumps land on the boundary
        mid = 0.5 * (t_a + t_b)

        def rhs(t, y):
            tt = min(max(t, np.nextafter(t_a, mid)), np.nextafter(t_b, mid))
            a, b = gen.coefficients(probe.rabi(tt), control.rabi(tt))
            return a @ y + b

        sol = solve_ivp(rhs, (t_a, t_b), x, method="RK45", t_eval=np.unique(np.append(t_eval, t_b)),
                        rtol=rtol, atol=atol)
        if not sol.success:
            last_good = float(sol.t[-1]) if sol.t.size else float(t_a)
            raise IntegrationError(f"integration failed: {sol.message}", last_good)
        n = len(t_eval)
        out[filled:filled + n] = sol.y[:, :n].T
        filled += n
        x = sol.y[:, -1]
    return out


def evolve_bloch(sys: AtomicSystem, probe_t: FieldLike, control_t: FieldLike,
                 rho0, times: Sequence[float], rtol: float = 1e-9,
                 atol: Optional[float] = None, estimate_error: bool = True) -> Trajectory:
    """Integrate the Bloch equations over ``times`` (seconds, increasing).

    Uses adaptive 4(5)-order Runge-Kutta on the 8-component real Bloch
    vector, restarting at envelope breakpoints. Each sample is re-symmetrised
    to Hermitian, unit-trace form. With ``estimate_error`` the run is repeated
    at a tenfold tighter tolerance and the largest elementwise difference is
    reported as ``error_estimate``.
    """
    times = np.asarray(times, dtype=float)
    if times.ndim != 1 or times.size < 1 or np.any(np.diff(times) <= 0):
        raise ParameterError("time grid must be one-dimensional and strictly increasing")
    probe, control = _as_td(probe_t), _as_td(control_t)
    h1, h2 = bloch.frame_detunings(sys, probe.drive.detuning, control.drive.detuning)
    gen = bloch.BlochGenerator.build(sys, h1, h2)
    rho0 = rho0.matrix if isinstance(rho0, DensityMatrix3) else np.asarray(rho0, dtype=complex)
    x0 = bloch.to_vector(rho0)
    atol = rtol * 1e-3 if atol is None else atol
    if times.size == 1:
        xs = x0[None, :]
    else:
        xs = _integrate(gen, probe, control, x0, times, rtol, atol)
    rho = _repair(bloch.to_matrix(xs))
    err = None
    if estimate_error and times.size > 1:
        fine = _integrate(gen, probe, control, x0, times, rtol / 10, atol / 10)
        err = float(np.abs(xs - fine).max())
    return Trajectory(times, rho, err, {"rtol": rtol, "atol": atol})

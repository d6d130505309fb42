"""
Real-vector form of the three-level optical Bloch equations.

The density matrix is parametrised by eight reals

    x = [rho11, rho22, Re rho21, Im rho21, Re rho31, Im rho31, Re rho32, Im rho32]

with rho33 = 1 - rho11 - rho22 eliminated analytically, so that
``dx/dt = A x + b`` is affine. In the rotating frame (hbar = 1)

    H = [[D1, 0, -Op*], [0, D1 - delta, -Oc*], [-Op, -Oc, 0]]

where D1 is the probe detuning and delta the two-photon detuning. With this
choice the dark state (Op|2> - Oc|1>)/Omega is an exact zero-energy
eigenvector on two-photon resonance, for complex Rabi frequencies too.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .atomsys import AtomicSystem, SchemeKind

LABELS = ("rho11", "rho22", "re_rho21", "im_rho21", "re_rho31", "im_rho31", "re_rho32", "im_rho32")
_PAIRS = ((1, 0), (2, 0), (2, 1))


def to_matrix(x) -> np.ndarray:
    """Density matrix (..., 3, 3) from Bloch vectors (..., 8)."""
    x = np.asarray(x, dtype=float)
    rho = np.zeros(x.shape[:-1] + (3, 3), dtype=complex)
    rho[..., 0, 0] = x[..., 0]
    rho[..., 1, 1] = x[..., 1]
    rho[..., 2, 2] = 1.0 - x[..., 0] - x[..., 1]
    for n, (i, j) in enumerate(_PAIRS):
        c = x[..., 2 + 2 * n] + 1j * x[..., 3 + 2 * n]
        rho[..., i, j] = c
        rho[..., j, i] = np.conj(c)
    return rho


def to_vector(rho) -> np.ndarray:
    rho = np.asarray(rho, dtype=complex)
    out = np.empty(rho.shape[:-2] + (8,))
    out[..., 0] = rho[..., 0, 0].real
    out[..., 1] = rho[..., 1, 1].real
    for n, (i, j) in enumerate(_PAIRS):
        out[..., 2 + 2 * n] = rho[..., i, j].real
        out[..., 3 + 2 * n] = rho[..., i, j].imag
    return out


def _basis():
    """Affine basis: rho(x) = R0 + sum_j x_j E_j."""
    r0 = np.zeros((3, 3), dtype=complex)
    r0[2, 2] = 1.0
    basis = []
    for d in (0, 1):
        e = np.zeros((3, 3), dtype=complex)
        e[d, d], e[2, 2] = 1.0, -1.0
        basis.append(e)
    for i, j in _PAIRS:
        for c in (1.0, 1j):
            e = np.zeros((3, 3), dtype=complex)
            e[i, j], e[j, i] = c, np.conj(c)
            basis.append(e)
    return r0, basis


_R0, _BASIS = _basis()


def hamiltonian(omega_p, omega_c, h1, h2) -> np.ndarray:
    return np.array([
        [h1, 0.0, -np.conj(omega_p)],
        [0.0, h2, -np.conj(omega_c)],
        [-omega_p, -omega_c, 0.0],
    ], dtype=complex)


def dissipator(sys: AtomicSystem, rho: np.ndarray) -> np.ndarray:
    g3, g2 = sys.gamma3, sys.gamma2
    out = np.zeros((3, 3), dtype=complex)
    out[0, 0] = sys.r31 * g3 * rho[2, 2]
    out[1, 1] = sys.r32 * g3 * rho[2, 2] - g2 * rho[1, 1]
    out[2, 2] = -g3 * rho[2, 2] + g2 * rho[1, 1]
    for (i, j), g in zip(_PAIRS, (sys.gamma12, sys.gamma13, sys.gamma23)):
        out[i, j] = -g * rho[i, j]
        out[j, i] = -g * rho[j, i]
    return out


def rhs_matrix(sys: AtomicSystem, rho, omega_p, omega_c, h1, h2) -> np.ndarray:
    """Complex right-hand side d rho / dt."""
    h = hamiltonian(omega_p, omega_c, h1, h2)
    return -1j * (h @ rho - rho @ h) + dissipator(sys, rho)


def frame_detunings(sys: AtomicSystem, probe_detuning: float, control_detuning: float):
    """Diagonal Hamiltonian entries (h1, h2) for the given one-photon detunings."""
    if sys.scheme_kind is SchemeKind.LAMBDA:
        return probe_detuning, control_detuning
    return probe_detuning, -control_detuning


def _affine(fun):
    b = to_vector(fun(_R0))
    a = np.column_stack([to_vector(fun(e)) for e in _BASIS])
    return a, b


@dataclass(frozen=True)
class BlochGenerator:
    """``A(Op, Oc) = A0 + sum_k c_k A_k`` with c = (Re Op, Im Op, Re Oc, Im Oc).

    Precomputing the parts lets the time-domain integrator assemble the
    generator for arbitrary field envelopes with a few multiply-adds.
    """

    a0: np.ndarray
    b0: np.ndarray
    a_parts: tuple
    b_parts: tuple

    @classmethod
    def build(cls, sys: AtomicSystem, h1: float, h2: float) -> "BlochGenerator":
        a0, b0 = _affine(lambda r: rhs_matrix(sys, r, 0.0, 0.0, h1, h2))
        a_parts, b_parts = [], []
        for op, oc in ((1.0, 0.0), (1j, 0.0), (0.0, 1.0), (0.0, 1j)):
            # the field terms are linear in Re/Im of each Rabi frequency
            a, b = _affine(lambda r: -1j * _commutator(hamiltonian(op, oc, 0.0, 0.0), r))
            a_parts.append(a)
            b_parts.append(b)
        return cls(a0, b0, tuple(a_parts), tuple(b_parts))

    def coefficients(self, omega_p: complex, omega_c: complex):
        omega_p, omega_c = complex(omega_p), complex(omega_c)
        c = (omega_p.real, omega_p.imag, omega_c.real, omega_c.imag)
        a = self.a0.copy()
        b = self.b0.copy()
        for ck, ak, bk in zip(c, self.a_parts, self.b_parts):
            if ck:
                a += ck * ak
                b += ck * bk
        return a, b


def _commutator(h, r):
    return h @ r - r @ h


def affine_system(sys: AtomicSystem, omega_p: complex, omega_c: complex, h1: float, h2: float):
    """(A, b) such that dx/dt = A x + b for constant fields."""
    return _affine(lambda r: rhs_matrix(sys, r, omega_p, omega_c, h1, h2))

"""
Linear-response susceptibility of chains and trees of coupled levels.

The probe couples the ground state to an excited state (decoherence ``gamma``,
detuning ``Delta``). Each control field reaching a further level adds a
nested resonance

    R_j = |Omega_j|^2 / (gamma_j - i delta_j + sum_k R_{j,k})

and the probe response is ``alpha0 * gamma / (gamma - i Delta + sum_j R_j)``.
``gamma_j`` is the decoherence rate of the coherence between the ground state
and the level reached by node ``j``; ``delta_j`` is the cumulative
multi-photon detuning of that level.

Mapping of a three-level system onto a depth-one tree:

=================  ==================  ===================
tree               Lambda              ladder
=================  ==================  ===================
root ``gamma``     gamma13             gamma13
root ``delta``     Delta1              Delta1
node ``gamma``     gamma12             gamma12
node ``delta``     Delta1 - Delta2     Delta1 + Delta2
=================  ==================  ===================

``chi_weak_probe = (i C / (alpha0 gamma)) * chi_nested`` for that tree.

Nodes may instead carry the one-photon ``field_detuning`` of their control
field; the cumulative detuning is then derived from the parent as
``parent - field_detuning`` when the field is emitted (Lambda-type edge) or
``parent + field_detuning`` when it is absorbed (ladder-type edge).
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Dict, Mapping, Optional, Tuple

import numpy as np

from .atomsys import DetuningGrid, Spectrum
from .errors import ConfigError, ParameterError, SingularConfigurationError

__all__ = ["CouplingNode", "ProbeRoot", "chi_nested", "spectrum_nested", "resolve_detunings",
           "node_at"]


@dataclass(frozen=True)
class CouplingNode:
    rabi: complex
    gamma: float
    delta: float = 0.0
    children: Tuple["CouplingNode", ...] = ()
    field_detuning: Optional[float] = None
    emission: bool = True
    label: Optional[str] = None

    def __post_init__(self):
        object.__setattr__(self, "rabi", complex(self.rabi))
        object.__setattr__(self, "children", tuple(self.children))
        if not self.gamma >= 0:
            raise ParameterError(f"node gamma must be non-negative, got {self.gamma}")
        for c in self.children:
            if not isinstance(c, CouplingNode):
                raise ParameterError("children must be CouplingNode instances")


@dataclass(frozen=True)
class ProbeRoot:
    alpha0: float
    gamma: float
    delta: float = 0.0
    children: Tuple[CouplingNode, ...] = ()

    def __post_init__(self):
        object.__setattr__(self, "children", tuple(self.children))
        if not self.gamma >= 0:
            raise ParameterError(f"probe gamma must be non-negative, got {self.gamma}")


def _resolve_node(node: CouplingNode, parent_delta: float, shifts, path: str) -> CouplingNode:
    delta = node.delta
    if node.field_detuning is not None:
        sign = -1.0 if node.emission else 1.0
        delta = parent_delta + sign * node.field_detuning
    delta += shifts.get(path, 0.0)
    kids = tuple(_resolve_node(c, delta, shifts, f"{path}.{k}") for k, c in enumerate(node.children))
    return replace(node, delta=delta, children=kids, field_detuning=None)


def resolve_detunings(root: ProbeRoot, shifts: Optional[Mapping[str, float]] = None) -> ProbeRoot:
    """Explicit cumulative detunings for every node.

    Nodes given by ``field_detuning`` follow their parent. ``shifts`` maps
    canonical paths (``"root"``, ``"0"``, ``"1.0"``...) to offsets added to
    the cumulative detuning of that node; descendants defined through
    ``field_detuning`` move along with it.
    """
    shifts = dict(shifts or {})
    delta = root.delta + shifts.get("root", 0.0)
    kids = tuple(_resolve_node(c, delta, shifts, str(k)) for k, c in enumerate(root.children))
    return replace(root, delta=delta, children=kids)


def _nested(node: CouplingNode, path: str):
    oc2 = abs(node.rabi) ** 2
    if oc2 == 0:
        # an uncoupled level hides its whole subtree
        return 0.0
    den = node.gamma - 1j * node.delta
    for k, child in enumerate(node.children):
        den = den + _nested(child, f"{path}.{k}")
    if den == 0:
        raise SingularConfigurationError(f"nested resonance denominator vanishes at node {path}")
    return oc2 / den


def chi_nested(root: ProbeRoot) -> complex:
    """Probe response of the coupling tree (depth-first evaluation)."""
    root = resolve_detunings(root)
    den = root.gamma - 1j * root.delta
    for k, child in enumerate(root.children):
        den = den + _nested(child, str(k))
    if den == 0:
        raise SingularConfigurationError("probe denominator vanishes at the root")
    return complex(root.alpha0 * root.gamma / den)


def _split(path: str):
    return [p for p in str(path).split(".") if p != ""]


def _canonical(root: ProbeRoot, path: str) -> str:
    """Dotted index path for a path that may use labels; raises if absent."""
    if path in ("root", ""):
        return "root"
    node, idx = root, []
    for part in _split(path):
        for k, child in enumerate(node.children):
            if part == str(k) or (child.label is not None and part == child.label):
                node = child
                idx.append(str(k))
                break
        else:
            raise ConfigError(f"no coupling node at path {path!r}", path)
    return ".".join(idx)


def node_at(root: ProbeRoot, path: str):
    """Node addressed by a dotted path of child indices or labels; ``root``
    addresses the probe root itself."""
    canon = _canonical(root, path)
    if canon == "root":
        return root
    node = root
    for part in canon.split("."):
        node = node.children[int(part)]
    return node


def spectrum_nested(root: ProbeRoot, grid: DetuningGrid,
                    detuning_map: Mapping[str, float]) -> Spectrum:
    """Evaluate :func:`chi_nested` along a grid.

    ``detuning_map`` maps node paths to coefficients: at grid value ``x`` the
    cumulative detuning of the addressed node is offset by ``coefficient * x``
    (descendants defined by ``field_detuning`` follow). ``{"root": 1}`` scans
    the probe with all control fields fixed; ``{"0": 1}`` scans the first
    control instead.
    """
    if not detuning_map:
        raise ParameterError("detuning map is empty; nothing would be scanned")
    coeffs = {}
    for path, c in detuning_map.items():
        canon = _canonical(root, path)
        coeffs[canon] = coeffs.get(canon, 0.0) + float(c)
    x = grid.values
    chi = np.empty(x.shape, dtype=complex)
    for i, xi in enumerate(x):
        tree = resolve_detunings(root, {p: c * xi for p, c in coeffs.items()})
        chi[i] = chi_nested(tree)
    return Spectrum(x, chi, meta={"model": "nested"})

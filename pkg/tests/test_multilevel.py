import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from eitvapor import AtomicSystem
from eitvapor.atomsys import DetuningGrid
from eitvapor.errors import ConfigError, ParameterError, SingularConfigurationError
from eitvapor.multilevel import (CouplingNode, ProbeRoot, chi_nested, node_at, resolve_detunings,
                                 spectrum_nested)
from eitvapor.steady import chi_weak_probe, dressed_states


def _dense_oracle(root):
    """Weak-probe amplitudes from one linear solve over all tree nodes."""
    root = resolve_detunings(root)
    nodes, parents = [root], [None]

    def walk(node, parent):
        for child in node.children:
            nodes.append(child)
            parents.append(parent)
            walk(child, len(nodes) - 1)

    walk(root, 0)
    n = len(nodes)
    m = np.zeros((n, n), dtype=complex)
    for i, node in enumerate(nodes):
        m[i, i] = node.gamma - 1j * node.delta
        if parents[i] is not None:
            m[parents[i], i] = 1j * np.conj(node.rabi)
            m[i, parents[i]] = 1j * node.rabi
    rhs = np.zeros(n, dtype=complex)
    rhs[0] = root.alpha0 * root.gamma
    return np.linalg.solve(m, rhs)[0]


def test_no_children_is_two_level():
    root = ProbeRoot(alpha0=2.0, gamma=1.5, delta=0.4)
    assert chi_nested(root) == pytest.approx(2.0 * 1.5 / (1.5 - 0.4j), rel=1e-15)


@pytest.mark.parametrize("ladder", [False, True])
def test_depth_one_matches_three_level(ladder):
    rng = np.random.default_rng(3)
    worst = 0.0
    for _ in range(1000):
        g13 = rng.uniform(0.5, 2.0)
        sys = AtomicSystem(gamma13=g13, gamma3=g13, gamma12=g13 * 10 ** rng.uniform(-4, -1.1))
        oc = rng.uniform(0, 3) * np.exp(1j * rng.uniform(0, 6.3))
        d1, d2 = rng.uniform(-5, 5, 2)
        d = d1 + d2 if ladder else d1 - d2
        root = ProbeRoot(1.0, sys.gamma13, d1,
                         [CouplingNode(oc, sys.gamma12, field_detuning=d2, emission=not ladder)])
        ref = chi_weak_probe(sys, oc, d1, d).value
        got = 1j * sys.chi_scale / sys.gamma13 * chi_nested(root)
        worst = max(worst, abs(got - ref) / abs(ref))
    assert worst < 1e-12


def test_combined_lambda_ladder_topology():
    g, d = 1.0, 0.3
    o1, g1, d1 = 0.4, 1e-3, 0.05
    o2, g2, d2 = 0.7 - 0.2j, 2e-3, -0.1
    o21, g21, d21 = 0.5j, 0.05, 0.2
    root = ProbeRoot(3.0, g, d, [
        CouplingNode(o1, g1, d1),
        CouplingNode(o2, g2, d2, [CouplingNode(o21, g21, d21)]),
    ])
    inner = abs(o21) ** 2 / (g21 - 1j * d21)
    hand = 3.0 * g / (g - 1j * d + abs(o1) ** 2 / (g1 - 1j * d1)
                      + abs(o2) ** 2 / (g2 - 1j * d2 + inner))
    assert chi_nested(root) == pytest.approx(hand, rel=1e-15)
    assert chi_nested(root) == pytest.approx(_dense_oracle(root), rel=1e-12)


rabis = st.complex_numbers(max_magnitude=3.0, allow_nan=False, allow_infinity=False)
rates = st.floats(0.01, 2.0)
dets = st.floats(-3.0, 3.0)
nodes = st.recursive(
    st.builds(CouplingNode, rabis, rates, dets),
    lambda kids: st.builds(CouplingNode, rabis, rates, dets, st.lists(kids, max_size=3)),
    max_leaves=8,
)


@settings(max_examples=60, deadline=None)
@given(rates, dets, st.lists(nodes, max_size=3))
def test_random_trees_match_dense_solve(gamma, delta, children):
    root = ProbeRoot(1.0, gamma, delta, children)
    ref = _dense_oracle(root)
    assert chi_nested(root) == pytest.approx(ref, rel=1e-9, abs=1e-12)


def test_zero_rabi_prunes_subtree():
    child = CouplingNode(0.0, 0.1, 0.2, [CouplingNode(5.0, 0.0, 0.0)])
    bare = ProbeRoot(1.0, 1.0, 0.3, [CouplingNode(0.6, 1e-3, 0.0)])
    with_dead = ProbeRoot(1.0, 1.0, 0.3, [CouplingNode(0.6, 1e-3, 0.0), child])
    assert chi_nested(with_dead) == chi_nested(bare)


def test_zero_secondary_gives_double_eit():
    grid = DetuningGrid(-1, 1, 201)
    full = ProbeRoot(1.0, 1.0, 0.0, [
        CouplingNode(0.3, 1e-3, field_detuning=0.0),
        CouplingNode(0.5, 1e-3, field_detuning=0.4, children=[CouplingNode(0.0, 0.1, 0.0)]),
    ])
    pruned = ProbeRoot(1.0, 1.0, 0.0, [
        CouplingNode(0.3, 1e-3, field_detuning=0.0),
        CouplingNode(0.5, 1e-3, field_detuning=0.4),
    ])
    a = spectrum_nested(full, grid, {"root": 1}).chi
    b = spectrum_nested(pruned, grid, {"root": 1}).chi
    assert np.array_equal(a, b)


def test_sibling_branches_are_local():
    left = CouplingNode(0.6, 1e-3, 0.1, [CouplingNode(0.2, 0.01, 0.3)])
    right_a = CouplingNode(0.4, 2e-3, -0.2)
    right_b = CouplingNode(1.4, 5e-2, 0.7)
    a = ProbeRoot(1.0, 1.0, 0.0, [left, right_a])
    b = ProbeRoot(1.0, 1.0, 0.0, [left, right_b])
    # the unchanged branch resolves to the same node in both trees
    assert resolve_detunings(a).children[0] == resolve_detunings(b).children[0]
    assert chi_nested(a) != chi_nested(b)


def test_probe_scan_lockstep_reproduces_eit():
    sys = AtomicSystem(gamma12=1e-3)
    grid = DetuningGrid(-2, 2, 401)
    root = ProbeRoot(1.0, sys.gamma13, 0.0, [CouplingNode(0.3, sys.gamma12, field_detuning=0.0)])
    spec = spectrum_nested(root, grid, {"root": 1})
    ref = chi_weak_probe(sys, 0.3, grid.values, grid.values).value
    got = 1j * sys.chi_scale / sys.gamma13 * spec.chi
    assert np.max(np.abs(got - ref) / np.abs(ref)) < 1e-12


def test_control_scan():
    sys = AtomicSystem(gamma12=1e-3)
    grid = DetuningGrid(-1, 1, 101)
    root = ProbeRoot(1.0, sys.gamma13, 0.2, [CouplingNode(0.3, sys.gamma12, field_detuning=0.0)])
    spec = spectrum_nested(root, grid, {"0": 1})
    ref = chi_weak_probe(sys, 0.3, 0.2, 0.2 + grid.values).value
    got = 1j * sys.chi_scale / sys.gamma13 * spec.chi
    assert np.max(np.abs(got - ref) / np.abs(ref)) < 1e-12


def test_autler_townes_pair_matches_dressed_energies():
    oc = 3.0
    grid = DetuningGrid(-6, 6, 12001)
    root = ProbeRoot(1.0, 1.0, 0.0, [CouplingNode(oc, 1e-9, field_detuning=0.0)])
    absorb = spectrum_nested(root, grid, {"root": 1}).chi.real
    x = grid.values
    left = x[:6000][np.argmax(absorb[:6000])]
    right = x[6001:][np.argmax(absorb[6001:])]
    expected = sorted(dressed_states(oc, 0.0).energies)
    assert (left, right) == pytest.approx(expected, abs=2 * grid.step)
    assert absorb[6000] < 1e-9


def test_field_detuning_follows_parent():
    root = ProbeRoot(1.0, 1.0, 0.5, [
        CouplingNode(0.3, 1e-3, field_detuning=0.2, children=[
            CouplingNode(0.1, 1e-2, field_detuning=0.7, emission=False)]),
    ])
    res = resolve_detunings(root, {"root": 0.1})
    assert res.delta == pytest.approx(0.6)
    assert res.children[0].delta == pytest.approx(0.4)
    assert res.children[0].children[0].delta == pytest.approx(1.1)
    # explicit detunings do not follow
    fixed = ProbeRoot(1.0, 1.0, 0.5, [CouplingNode(0.3, 1e-3, 0.25)])
    assert resolve_detunings(fixed, {"root": 0.1}).children[0].delta == 0.25


def test_label_paths():
    inner = CouplingNode(0.1, 0.01, 0.0, label="rydberg")
    root = ProbeRoot(1.0, 1.0, 0.0, [
        CouplingNode(0.2, 1e-3, 0.0, label="lambda"),
        CouplingNode(0.3, 1e-3, 0.0, [inner], label="ladder"),
    ])
    assert node_at(root, "ladder.rydberg") is inner
    assert node_at(root, "1.0") is inner
    assert node_at(root, "root") is root
    grid = DetuningGrid(-1, 1, 11)
    by_label = spectrum_nested(root, grid, {"ladder.rydberg": 1}).chi
    by_index = spectrum_nested(root, grid, {"1.0": 1}).chi
    assert np.array_equal(by_label, by_index)


def test_missing_path_is_config_error():
    root = ProbeRoot(1.0, 1.0, 0.0, [CouplingNode(0.2, 1e-3, 0.0)])
    with pytest.raises(ConfigError, match="2.0"):
        spectrum_nested(root, DetuningGrid(-1, 1, 5), {"2.0": 1})
    with pytest.raises(ConfigError):
        node_at(root, "0.0")


def test_empty_map_rejected():
    root = ProbeRoot(1.0, 1.0, 0.0)
    with pytest.raises(ParameterError):
        spectrum_nested(root, DetuningGrid(-1, 1, 5), {})


def test_singular_denominators_name_the_node():
    root = ProbeRoot(1.0, 1.0, 0.0, [CouplingNode(0.2, 1e-3, 0.0, [CouplingNode(0.5, 0.0, 0.0)])])
    with pytest.raises(SingularConfigurationError, match="0.0"):
        chi_nested(root)
    with pytest.raises(SingularConfigurationError, match="root"):
        chi_nested(ProbeRoot(1.0, 0.0, 0.0))


def test_negative_gamma_rejected():
    with pytest.raises(ParameterError):
        CouplingNode(0.1, -1.0)
    with pytest.raises(ParameterError):
        ProbeRoot(1.0, -1.0)

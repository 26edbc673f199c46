import math

import numpy as np
import pytest

from circuits import Circuit
from conftest import random_model, single_item
from errors import CompileError
from risk_model import RiskItem, RiskModel, Transition, XorGroup, exact_exceedance, trigger_distribution
from RiskCompiler import (RiskCompiler, angle_for_probability, build_layout, build_rm, compile_transition_patterns,
                          compile_transition_tree, compile_xor_chain, cost_width, resolve_strategy)
from statevector import apply, marginal, simulate


def _run_rm(model, index=0, **options):
    rm, layout = build_rm(model, **options)
    prep = layout.empty_circuit()
    for k, q in enumerate(layout.search):
        if (index >> k) & 1:
            prep.x(q)
    state = simulate(prep)
    apply(state, rm)
    return state, layout


def test_angle_for_probability():
    assert angle_for_probability(0.8) == pytest.approx(2 * math.asin(math.sqrt(0.8)))
    assert angle_for_probability(0.0) == 0.0
    assert angle_for_probability(1.0) == pytest.approx(math.pi)
    with pytest.raises(CompileError):
        angle_for_probability(1.5)


# --- Item blocks ---

def test_xor_chain_conditional_angles():
    gates = compile_xor_chain([0.5, 0.3, 0.2], [0, 1, 2])
    assert gates[0].params[0] == pytest.approx(angle_for_probability(0.5))
    assert gates[1].params[0] == pytest.approx(angle_for_probability(0.6))
    assert gates[1].controls == ((0, False),)
    assert gates[2].kind == "X"
    assert gates[2].controls == ((0, False), (1, False))


def test_xor_chain_distribution():
    circuit = Circuit(3).extend(compile_xor_chain([0.5, 0.3, 0.2], [0, 1, 2]))
    probs = marginal(simulate(circuit), (0, 1, 2))
    assert probs[0b001] == pytest.approx(0.5)
    assert probs[0b010] == pytest.approx(0.3)
    assert probs[0b100] == pytest.approx(0.2)


def test_xor_chain_exhausted_mass():
    gates = compile_xor_chain([1.0, 0.0], [0, 1])
    assert gates[0].params[0] == pytest.approx(math.pi)
    assert gates[1].kind == "U3"
    assert gates[1].params[0] == 0.0


def test_single_source_block():
    gates = compile_transition_tree(1, 0.1, [(0, 0.5)])
    assert len(gates) == 2
    assert gates[0].params[0] == pytest.approx(angle_for_probability(0.1))
    assert gates[1].params[0] == pytest.approx(angle_for_probability(0.55))


def test_tree_needs_ancillas():
    with pytest.raises(CompileError):
        compile_transition_tree(4, 0.1, [(0, 0.5), (1, 0.5), (2, 0.5)], ancillas=(5,))


@pytest.mark.parametrize("n_sources", [2, 3, 4])
def test_tree_and_patterns_agree(n_sources):
    rng = np.random.default_rng(n_sources)
    source_p = rng.uniform(0.1, 0.9, size=n_sources)
    trans_p = rng.uniform(0.1, 0.9, size=n_sources)
    intrinsic = 0.15
    target = n_sources
    ancillas = tuple(range(n_sources + 1, 2 * n_sources))
    sources = [(q, float(t)) for q, t in enumerate(trans_p)]

    prep = Circuit(2 * n_sources)
    for q, p in enumerate(source_p):
        prep.u3(q, angle_for_probability(float(p)))
    tree = prep.copy().extend(compile_transition_tree(target, intrinsic, sources, ancillas))
    patterns = prep.copy().extend(compile_transition_patterns(target, intrinsic, sources))
    assert len(compile_transition_patterns(target, intrinsic, sources)) == 2 ** n_sources
    assert len(compile_transition_tree(target, intrinsic, sources, ancillas)) == 4 * (n_sources - 1) + 2

    expected = 1 - (1 - intrinsic) * np.prod(1 - trans_p * source_p)
    assert marginal(simulate(tree), (target,))[1] == pytest.approx(expected, abs=1e-12)
    assert marginal(simulate(patterns), (target,))[1] == pytest.approx(expected, abs=1e-12)


# --- Whole models ---

RANDOM_CORPUS = [(n_items, seed) for n_items in range(2, 7) for seed in range(3)] + [
    pytest.param(7, seed, marks=pytest.mark.slow) for seed in range(3)]


@pytest.mark.parametrize("n_items, seed", RANDOM_CORPUS)
def test_rm_reproduces_scenarios(n_items, seed):
    model = random_model(seed, n_items)
    for index in (0, 1, 2):
        state, layout = _run_rm(model, index)
        got = marginal(state, layout.item_qubits)
        assert np.max(np.abs(got - trigger_distribution(model, index))) < 1e-10
        assert marginal(state, (layout.indicator,))[1] == pytest.approx(exact_exceedance(model, index), abs=1e-10)


def test_chain_rm_reproduces_scenarios(chain):
    for index in (0, 1, len(chain.modifications)):
        state, layout = _run_rm(chain, index)
        got = marginal(state, layout.item_qubits)
        assert np.max(np.abs(got - trigger_distribution(chain, index))) < 1e-10
        assert marginal(state, (layout.indicator,))[1] == pytest.approx(exact_exceedance(chain, index), abs=1e-10)


def test_fig1_indicator(fig1):
    for index, expected in ((0, 0.0513), (1, 0.07445), (5, 0.06175)):
        state, layout = _run_rm(fig1, index)
        assert marginal(state, (layout.indicator,))[1] == pytest.approx(expected, abs=1e-10)


def test_fig1_rm_gate_count(fig1):
    rm, layout = build_rm(fig1)
    assert len(rm) == 34
    assert layout.n_qubits == 13


def test_native_increments_match_ripple(fig1):
    ripple, _ = _run_rm(fig1, 1)
    native, _ = _run_rm(fig1, 1, native_increments=True)
    assert np.max(np.abs(ripple.amplitudes - native.amplitudes)) < 1e-12


def test_twos_complement_matches_top_bits(fig1):
    top, layout = _run_rm(fig1, 2)
    twos, twos_layout = _run_rm(fig1, 2, strategy="twos-complement")
    assert twos_layout.n_c == layout.n_c + 1
    assert marginal(twos, (twos_layout.indicator,))[1] == pytest.approx(marginal(top, (layout.indicator,))[1])


def test_cost_register_holds_the_loss():
    model = RiskModel((RiskItem(1, "a", 1.0, 3), RiskItem(2, "b", 1.0, 5)), threshold=8)
    state, layout = _run_rm(model, strategy="twos-complement")
    assert marginal(state, layout.cost)[8] == pytest.approx(1.0)
    assert marginal(state, (layout.indicator,))[1] == pytest.approx(1.0)


def test_all_items_and_twos_complement_agree():
    model = RiskModel((RiskItem(1, "a", 0.3, 2), RiskItem(2, "b", 0.6, 1), RiskItem(3, "c", 0.5, 0)),
                      (Transition(1, 2, 0.4),), threshold=3)
    assert resolve_strategy(model) == "all-items"
    a, la = _run_rm(model)
    b, lb = _run_rm(model, strategy="twos-complement")
    expected = exact_exceedance(model)
    assert marginal(a, (la.indicator,))[1] == pytest.approx(expected)
    assert marginal(b, (lb.indicator,))[1] == pytest.approx(expected)


def test_degenerate_thresholds():
    always = single_item(0.3, threshold=0)
    never = single_item(0.3, threshold=2)
    assert resolve_strategy(always, "top-bits") == "always"
    assert resolve_strategy(never) == "never"
    assert cost_width(never, "never") == 0
    state, layout = _run_rm(always)
    assert marginal(state, (layout.indicator,))[1] == pytest.approx(1.0)
    state, layout = _run_rm(never)
    assert marginal(state, (layout.indicator,))[1] == pytest.approx(0.0)


def test_strategy_errors(fig1):
    with pytest.raises(CompileError):
        resolve_strategy(fig1, "bogus")
    with pytest.raises(CompileError):
        resolve_strategy(fig1, "all-items")
    model = single_item(0.3, cost=7, threshold=5)
    with pytest.raises(CompileError):
        resolve_strategy(model, "top-bits")
    assert resolve_strategy(model) == "twos-complement"


def test_xor_member_with_incoming_transition_is_rejected():
    model = RiskModel((RiskItem(1, "a", 0.5, 1), RiskItem(2, "b", 0.5, 1), RiskItem(3, "c", 0.2, 1)),
                      (Transition(3, 1, 0.5),), (XorGroup((1, 2)),), threshold=1)
    with pytest.raises(CompileError):
        build_layout(model)


def test_compiler_uses_given_layout(fig1):
    layout = build_layout(fig1, n_ae=3, grover_phase=True)
    rm = RiskCompiler(fig1, layout).build_rm()
    assert rm.n_qubits == layout.n_qubits == 17
    assert all(q not in layout.ae for g in rm for q in g.qubits)

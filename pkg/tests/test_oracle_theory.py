import math

import pytest

from errors import BudgetExceededError
from oracle_theory import (FalsePositiveOracle, RootOracle, build_root_oracle, effective_solutions,
                           false_positive_sweep, perfect_curve, predicted_steps, predicted_success,
                           random_mixing_experiment, root_grover_delta, root_grover_success, root_sweep,
                           run_false_positive_grover, spread_sweep, unequal_activation_bound)
from statevector import StateVector, apply


# --- Closed forms ---

def test_effective_solutions():
    assert effective_solutions([0.0, 0.0]) == pytest.approx(1.0)
    assert effective_solutions([0.45]) == pytest.approx((math.cos(0.45) + math.sin(0.45)) ** 2)
    assert predicted_success([0.45]) == pytest.approx(0.8108, abs=1e-4)
    assert predicted_steps(64, 1.0) == pytest.approx(2 * math.pi)


# --- False-positive oracles ---

def test_unrotated_oracle_is_perfect_grover():
    assert run_false_positive_grover(3, [0.0, 0.0, 0.0], 2) == pytest.approx(0.9453, abs=1e-4)


def test_curve_starts_at_uniform():
    curve = FalsePositiveOracle.single(4, 0.3).curve(3)
    assert len(curve) == 4
    assert curve[0] == pytest.approx(1 / 16)


def test_single_rotation_peak_near_cos_squared():
    row = false_positive_sweep(6, [0.45])[0]
    bound = math.cos(0.45) ** 2
    assert row.predicted_success == pytest.approx(bound)
    assert 0.9 * bound <= row.peak_success
    assert abs(row.peak_success - bound) <= 0.02 * bound
    assert abs(row.peak_steps - row.predicted_steps) <= 1


def test_rotation_on_other_qubit_is_equivalent():
    a = false_positive_sweep(5, [0.3], qubit=0)[0]
    b = false_positive_sweep(5, [0.3], qubit=4)[0]
    assert a.peak_success == pytest.approx(b.peak_success, abs=1e-10)
    assert a.peak_steps == b.peak_steps


def test_spread_keeps_total_angle():
    rows = spread_sweep(5, 0.6, [1, 2, 3])
    assert [r.as_row()[2] for r in rows] == [1, 2, 3]
    for r in rows:
        assert sum(r.alphas) == pytest.approx(0.6)
        assert r.peak_success <= r.predicted_success + 0.02


def test_false_positive_validation():
    with pytest.raises(ValueError):
        FalsePositiveOracle(3, (0.1, 0.2))
    with pytest.raises(ValueError):
        FalsePositiveOracle.spread(3, 0.5, 4)
    with pytest.raises(BudgetExceededError):
        FalsePositiveOracle.single(15, 0.1)
    with pytest.raises(ValueError):
        run_false_positive_grover(3, [0.0] * 3, -1)


@pytest.mark.parametrize("seed", [0, 1, 2])
def test_random_mixing_prediction(seed):
    result = random_mixing_experiment(6, seed)
    assert result.measured_m_hat > 0
    assert abs(result.peak_steps - result.predicted_steps) <= 1.5
    assert result.success_at_prediction >= 0.85 * result.peak_success


def test_random_mixing_budget():
    with pytest.raises(BudgetExceededError):
        random_mixing_experiment(15, 0)


# --- Root oracles ---

@pytest.mark.parametrize("k, patterns, alpha", [
    (1, (0,), None),
    (2, (1, 2), None),
    (2, (0, 1, 2, 3), None),
    (1, (0,), 0.45),
])
def test_root_oracle_product_law(k, patterns, alpha):
    oracle = RootOracle(3, (5, 6), k, patterns, alpha)
    circuit = oracle.circuit()
    for x in range(8):
        state = apply(StateVector.basis(oracle.n_qubits, x), circuit)
        expected = 1 - 2 * oracle.marked_weight if x in (5, 6) else 1.0
        assert state.amplitudes[x].real == pytest.approx(expected, abs=1e-12)


def test_marked_weight():
    assert RootOracle(2, (3,), 2, (0, 3)).marked_weight == pytest.approx(0.5)
    assert RootOracle(2, (3,), 1, (0,), alpha=0.45).marked_weight == pytest.approx(math.cos(0.45) ** 2)


def test_root_oracle_validation():
    with pytest.raises(ValueError):
        RootOracle(2, (4,), 1, (0,))
    with pytest.raises(ValueError):
        RootOracle(2, (1,), 1, (0, 0))
    with pytest.raises(ValueError):
        RootOracle(2, (1,), 1, (2,))
    with pytest.raises(ValueError):
        build_root_oracle(6, 1, 1, (0,))


@pytest.mark.parametrize("n_states", [8, 16, 32])
def test_root_oracle_keeps_solution_on_top(n_states):
    for k in (1, 2):
        curve = RootOracle(int(math.log2(n_states)), (n_states - 1,), k, (0,)).curve(1)
        assert curve[1] > 1 / n_states


def test_root_delta_small_case():
    d = root_grover_delta(4, 1, 1, 1, 1)
    assert d.success == pytest.approx(1.0)
    assert d.root_success == pytest.approx(0.625)
    assert d.delta_tilde == pytest.approx(0.375)
    assert d.ratio == pytest.approx(0.5)


@pytest.mark.parametrize("n_states, k, marked", [(16, 2, 1), (16, 2, 3), (32, 3, 5), (8, 1, 2)])
def test_root_delta_ratio_is_marked_fraction(n_states, k, marked):
    d = root_grover_delta(n_states, 1, k, marked, 1)
    assert d.ratio == pytest.approx(marked / 2 ** k, abs=1e-10)


ROOT_GRID = [(n_states, k, marked) for n_states in (8, 16, 32) for k in (1, 2) for marked in range(1, 2 ** k + 1)]


@pytest.mark.parametrize("n_states, k, marked", ROOT_GRID)
def test_root_delta_ratio_holds_up_to_optimum(n_states, k, marked):
    optimum = math.floor(math.pi / 4 * math.sqrt(n_states))
    for steps in range(1, optimum + 1):
        assert root_grover_delta(n_states, 1, k, marked, steps).ratio == pytest.approx(marked / 2 ** k, abs=1e-9)

    perfect = perfect_curve(n_states, 1, optimum)
    root = RootOracle(int(math.log2(n_states)), (n_states - 1,), k, tuple(range(marked))).curve(optimum)
    best = max(range(optimum + 1), key=lambda s: perfect[s])
    assert best == optimum
    assert max(range(optimum + 1), key=lambda s: root[s]) == best


def test_root_success_matches_delta():
    assert root_grover_success(16, 1, 2, 1, 1) == pytest.approx(root_grover_delta(16, 1, 2, 1, 1).root_success)


def test_perfect_curve_first_step():
    assert perfect_curve(8, 1, 1)[1] == pytest.approx(math.sin(3 * math.asin(1 / math.sqrt(8))) ** 2)


def test_root_sweep_rows():
    rows = root_sweep([4], [1], max_steps=1)
    assert len(rows) == 2
    full = [r for r in rows if r[2] == 2][0]
    assert full[-1] == pytest.approx(1.0)
    half = [r for r in rows if r[2] == 1][0]
    assert half[-1] == pytest.approx(0.5)


# --- Unequal activation ---

def test_unrotated_ancilla_is_a_perfect_oracle():
    rows = unequal_activation_bound(0.0)
    for row in rows:
        assert row.root_success == pytest.approx(row.success, abs=1e-12)


def test_quarter_turn_matches_uniform_ancilla():
    rows = unequal_activation_bound(math.pi / 4, steps=(1,))
    assert rows[0].root_success == pytest.approx(root_grover_success(16, 1, 1, 1, 1), abs=1e-12)


def test_half_turn_never_marks():
    rows = unequal_activation_bound(math.pi / 2)
    for row in rows:
        assert row.root_success == pytest.approx(1 / 16, abs=1e-12)


def test_bound_holds():
    rows = unequal_activation_bound(0.45)
    assert all(row.holds for row in rows)
    assert rows[0].ratio >= 0.405


def test_unequal_activation_needs_ancilla():
    with pytest.raises(ValueError):
        unequal_activation_bound(0.3, k=0)

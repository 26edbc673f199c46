import math

import numpy as np
import pytest

import settings
from circuits import Circuit
from errors import BudgetExceededError, SimulationError
from statevector import Histogram, StateVector, apply, marginal, sample, simulate, u3_matrix


def test_u3_matrix_is_unitary():
    m = u3_matrix(0.7, 0.2, -1.1)
    assert np.allclose(m.conj().T @ m, np.eye(2))


def test_x_flips_qubit_zero_lsb():
    state = simulate(Circuit(3).x(0))
    assert state.probabilities()[1] == pytest.approx(1.0)


def test_u3_rotation_probability():
    state = simulate(Circuit(1).u3(0, 2 * math.asin(math.sqrt(0.8))))
    assert state.probabilities()[1] == pytest.approx(0.8)


def test_hadamards_give_uniform_marginal():
    circuit = Circuit(3).h(0).h(1).h(2)
    assert np.allclose(marginal(simulate(circuit), (0, 1, 2)), np.full(8, 1 / 8))


def test_negative_control():
    circuit = Circuit(2).x(1, [(0, False)])
    assert simulate(circuit).probabilities()[0b10] == pytest.approx(1.0)
    circuit = Circuit(2).x(0).x(1, [(0, False)])
    assert simulate(circuit).probabilities()[0b01] == pytest.approx(1.0)


def test_controlled_phase_and_z():
    circuit = Circuit(2).x(0).x(1).phase(1, math.pi / 2, [0]).z(0)
    amp = simulate(circuit).amplitudes[3]
    assert amp == pytest.approx(-1j)


def test_increment_wraps():
    start = StateVector.basis(4, 0b1010)
    state = apply(start, Circuit(4).increment((1, 2, 3), 4))
    # register holds 5 on qubits 1..3, adding 4 gives 9 mod 8 = 1
    assert state.probabilities()[0b0010] == pytest.approx(1.0)


def test_controlled_increment_leaves_unfired_branch():
    circuit = Circuit(3).h(0).increment((1, 2), 1, [0])
    probs = simulate(circuit).probabilities()
    assert probs[0b000] == pytest.approx(0.5)
    assert probs[0b011] == pytest.approx(0.5)


def test_circuit_then_inverse_is_identity():
    rng = np.random.default_rng(1)
    circuit = Circuit(4)
    for _ in range(40):
        q = int(rng.integers(4))
        ctrl = [(int(c), bool(rng.integers(2))) for c in rng.choice([c for c in range(4) if c != q], 2, replace=False)]
        circuit.u3(q, *rng.uniform(-3, 3, size=3), controls=ctrl)
        circuit.increment((0, 1), int(rng.integers(4)), [(3, True)])
    state = apply(simulate(circuit), circuit.inverse())
    assert state.probabilities()[0] == pytest.approx(1.0)


def test_marginal_register_order():
    state = StateVector.basis(3, 0b110)
    assert marginal(state, (2, 1))[0b11] == pytest.approx(1.0)
    assert marginal(state, (0, 2))[0b10] == pytest.approx(1.0)
    assert marginal(state, ())[0] == pytest.approx(1.0)


def test_size_mismatch():
    with pytest.raises(SimulationError):
        apply(StateVector.zero(2), Circuit(3))
    with pytest.raises(SimulationError):
        StateVector(2, np.ones(3))


def test_norm_drift_is_caught():
    state = StateVector(1, np.array([1.0, 1.0]))
    with pytest.raises(SimulationError):
        apply(state, Circuit(1).x(0))


def test_qubit_budget(monkeypatch):
    monkeypatch.setattr(settings, "MAX_QUBITS", 4)
    with pytest.raises(BudgetExceededError):
        StateVector.zero(5)


def test_sample_is_seeded():
    state = simulate(Circuit(2).h(0).h(1))
    a = sample(state, (0, 1), 500, seed=3)
    b = sample(state, (0, 1), 500, seed=3)
    assert np.array_equal(a.counts, b.counts)
    assert a.counts.sum() == 500


def test_sample_delta_distribution():
    state = StateVector.basis(3, 5)
    hist = sample(state, (0, 1, 2), 100, seed=0)
    assert hist.counts[5] == 100
    assert hist.most_counted() == 5


def test_sample_needs_shots():
    with pytest.raises(ValueError):
        sample(StateVector.zero(1), (0,), 0, seed=0)


def test_histogram_helpers():
    hist = Histogram.exact(np.array([0.1, 0.6, 0.0, 0.3]), 2, label="ae")
    assert hist.top(2) == [1, 3]
    assert hist.bitstring(1) == "10"
    assert [r[0] for r in hist.rows()] == ["00", "10", "11"]

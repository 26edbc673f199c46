"""Dense statevector simulator.

Qubit 0 is the least significant bit of the basis-state index. Internally the
amplitudes are viewed as an n-dimensional (2, ..., 2) array in which qubit q
lives on axis n-1-q, so a gate with controls is a slice update on the
sub-array where every control axis is pinned to its firing value.
"""

import logging
import math
from dataclasses import dataclass
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

import settings
from circuits import Circuit, Gate
from errors import BudgetExceededError, SimulationError

logger = logging.getLogger(__name__)

NORM_TOLERANCE = 1e-9

_H = np.array([[1, 1], [1, -1]], dtype=complex) / math.sqrt(2)


def u3_matrix(theta: float, phi: float = 0.0, lam: float = 0.0) -> np.ndarray:
    c, s = math.cos(theta / 2), math.sin(theta / 2)
    return np.array([[c, -np.exp(1j * lam) * s],
                     [np.exp(1j * phi) * s, np.exp(1j * (phi + lam)) * c]], dtype=complex)


class StateVector:
    def __init__(self, n_qubits: int, amplitudes: Optional[np.ndarray] = None):
        if n_qubits > settings.MAX_QUBITS:
            raise BudgetExceededError("statevector qubits", n_qubits, settings.MAX_QUBITS)
        self.n_qubits = n_qubits
        if amplitudes is None:
            amplitudes = np.zeros(2 ** n_qubits, dtype=np.complex128)
            amplitudes[0] = 1.0
        amplitudes = np.asarray(amplitudes, dtype=np.complex128)
        if amplitudes.shape != (2 ** n_qubits,):
            raise SimulationError(f"expected {2 ** n_qubits} amplitudes, got {amplitudes.shape}")
        self.amplitudes = amplitudes

    @classmethod
    def zero(cls, n_qubits: int) -> "StateVector":
        return cls(n_qubits)

    @classmethod
    def basis(cls, n_qubits: int, index: int) -> "StateVector":
        state = cls(n_qubits)
        state.amplitudes[0] = 0.0
        state.amplitudes[index] = 1.0
        return state

    def copy(self) -> "StateVector":
        return StateVector(self.n_qubits, self.amplitudes.copy())

    def norm(self) -> float:
        return float(np.vdot(self.amplitudes, self.amplitudes).real)

    def probabilities(self) -> np.ndarray:
        return np.abs(self.amplitudes) ** 2

    def inner(self, other: "StateVector") -> complex:
        return complex(np.vdot(self.amplitudes, other.amplitudes))


# --- Gate kernels ---

def _apply_increment(psi: np.ndarray, n: int, gate: Gate, index: List) -> None:
    reg_axes = [n - 1 - q for q in reversed(gate.targets)]
    others = [a for a in range(n) if a not in reg_axes]
    view = psi.transpose(others + reg_axes)
    sub = view[tuple(index[a] for a in others) + (slice(None),) * len(reg_axes)]
    size = 2 ** len(reg_axes)
    block = sub.reshape(-1, size)
    sub[...] = np.roll(block, int(gate.params[0]) % size, axis=1).reshape(sub.shape)


def _apply_gate(psi: np.ndarray, n: int, gate: Gate) -> None:
    index: List = [slice(None)] * n
    for q, polarity in gate.controls:
        index[n - 1 - q] = 1 if polarity else 0
    if gate.kind == "INC":
        _apply_increment(psi, n, gate, index)
        return
    axis = n - 1 - gate.targets[0]
    index[axis] = 0
    i0 = tuple(index)
    index[axis] = 1
    i1 = tuple(index)
    if gate.kind == "X":
        tmp = psi[i0].copy()
        psi[i0] = psi[i1]
        psi[i1] = tmp
    elif gate.kind == "Z":
        psi[i1] *= -1
    elif gate.kind == "P":
        psi[i1] *= np.exp(1j * gate.params[0])
    else:
        m = _H if gate.kind == "H" else u3_matrix(*gate.params)
        a0 = psi[i0].copy()
        a1 = psi[i1].copy()
        psi[i0] = m[0, 0] * a0 + m[0, 1] * a1
        psi[i1] = m[1, 0] * a0 + m[1, 1] * a1


def apply(state: StateVector, circuit: Circuit, check_norm: bool = True) -> StateVector:
    """
    Apply `circuit` to `state` in place and return the state.

    Raises:
        SimulationError: on a size mismatch or when the norm drifts by more than 1e-9
    """
    if circuit.n_qubits != state.n_qubits:
        raise SimulationError(f"circuit has {circuit.n_qubits} qubits, state has {state.n_qubits}")
    n = state.n_qubits
    psi = state.amplitudes.reshape((2,) * n) if n else state.amplitudes
    for gate in circuit.gates:
        _apply_gate(psi, n, gate)
    if check_norm:
        drift = abs(state.norm() - 1.0)
        if drift > NORM_TOLERANCE:
            raise SimulationError(f"norm drifted by {drift:.3e} over {len(circuit)} gates")
    return state


def simulate(circuit: Circuit, initial: Optional[StateVector] = None) -> StateVector:
    state = initial.copy() if initial is not None else StateVector.zero(circuit.n_qubits)
    logger.debug(f"Simulating {len(circuit)} gates on {circuit.n_qubits} qubits")
    return apply(state, circuit)


# --- Measurement ---

def marginal(state: StateVector, register: Sequence[int]) -> np.ndarray:
    """Exact outcome probabilities of `register`; register[0] is the least significant bit."""
    n = state.n_qubits
    probs = state.probabilities()
    if not register:
        return np.array([probs.sum()])
    probs = probs.reshape((2,) * n)
    keep = [n - 1 - q for q in reversed(register)]
    reduced = probs.sum(axis=tuple(a for a in range(n) if a not in keep))
    remaining = sorted(keep)
    return reduced.transpose([remaining.index(a) for a in keep]).reshape(-1)


@dataclass
class Histogram:
    """Outcome counts of one register plus the exact marginal they were drawn from."""

    width: int
    counts: np.ndarray
    probabilities: np.ndarray
    shots: int
    label: str = ""

    @classmethod
    def exact(cls, probabilities: np.ndarray, width: int, label: str = "") -> "Histogram":
        return cls(width, np.zeros(len(probabilities), dtype=np.int64), np.asarray(probabilities), 0, label)

    def bitstring(self, outcome: int) -> str:
        """LSB-first rendering, the first character being qubit 0."""
        return "".join(str((outcome >> k) & 1) for k in range(self.width))

    def top(self, k: int = 2) -> List[int]:
        order = sorted(range(len(self.probabilities)), key=lambda o: (-self.probabilities[o], o))
        return order[:k]

    def most_counted(self) -> int:
        return int(np.argmax(self.counts))

    def rows(self, cutoff: float = 1e-12) -> List[Tuple[str, int, float]]:
        return [(self.bitstring(o), int(self.counts[o]), float(self.probabilities[o]))
                for o in range(len(self.probabilities))
                if self.counts[o] > 0 or self.probabilities[o] > cutoff]


def sample(state: StateVector, register: Sequence[int], shots: int, seed: Optional[int],
           label: str = "") -> Histogram:
    """
    Draw `shots` outcomes of `register` by inverse-CDF sampling on a PCG64 stream.

    Args:
        state (StateVector): simulated state
        register (Sequence[int]): qubits to read, least significant first
        shots (int): number of draws
        seed (int): PRNG seed

    Returns:
        Histogram: counts together with the exact marginal
    """
    if shots < 1:
        raise ValueError("shots must be at least 1")
    probs = marginal(state, register)
    rng = np.random.default_rng(seed)
    cdf = np.cumsum(probs)
    cdf /= cdf[-1]
    outcomes = np.minimum(np.searchsorted(cdf, rng.random(shots), side="right"), len(probs) - 1)
    counts = np.bincount(outcomes, minlength=len(probs))
    return Histogram(len(register), counts, probs, shots, label)

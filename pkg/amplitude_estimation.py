"""Quantum amplitude estimation on a compiled risk model.

QRM = -RM S0 RM^dagger S_X is the Grover operator of the RM state. QAE puts the
output register in uniform superposition, applies RM once, then QRM^(2^j)
controlled by output qubit j, and finishes with an inverse QFT. Outcome y of
an n_ae-qubit register decodes to P = sin^2(pi * y / 2^n_ae).
"""

import logging
import math
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

import settings
from circuits import Circuit, RegisterLayout
from errors import BudgetExceededError
from risk_model import RiskModel, grid_position
from RiskCompiler import RiskCompiler, build_layout
from statevector import Histogram, StateVector, apply, marginal, sample

logger = logging.getLogger(__name__)

MODAL_BOUND = 8 / math.pi ** 2


@dataclass
class QaeConfig:
    n_ae: int
    model: RiskModel
    strategy: str = "auto"
    native_increments: bool = False
    grover_phase: bool = False

    def __post_init__(self):
        if self.n_ae < 1:
            raise ValueError(f"n_ae must be at least 1, got {self.n_ae}")


@dataclass
class QaeResult:
    n_ae: int
    histogram: Histogram
    modification: int = 0
    decoded: Dict[int, float] = field(default_factory=dict)

    @property
    def modes(self) -> List[int]:
        return self.histogram.top(2)

    @property
    def estimate(self) -> float:
        return decode(self.modes[0], self.n_ae)

    def decoded_rows(self, cutoff: float = 1e-12) -> List[Tuple[int, float, float, float]]:
        """(outcome, a, decoded P, outcome probability) for every outcome with weight."""
        size = 2 ** self.n_ae
        return [(y, y / size, decode(y, self.n_ae), float(self.histogram.probabilities[y])) for y in range(size)
                if self.histogram.probabilities[y] > cutoff or self.histogram.counts[y] > 0]


def decode(outcome: int, n_ae: int) -> float:
    if not 0 <= outcome < 2 ** n_ae:
        raise ValueError(f"outcome {outcome} is outside a {n_ae}-qubit register")
    return math.sin(math.pi * outcome / 2 ** n_ae) ** 2


def modal_mass(probabilities: np.ndarray, p: float, n_ae: int) -> float:
    """Probability of the grid cells either side of the exact position of p, mirrors included."""
    size = 2 ** n_ae
    position = grid_position(p, n_ae)
    cells = {math.floor(position) % size, math.ceil(position) % size}
    cells |= {(size - c) % size for c in cells}
    return float(sum(probabilities[c] for c in cells))


# --- Circuits ---

def qft(m: int, qubits: Optional[Sequence[int]] = None, n_qubits: Optional[int] = None) -> Circuit:
    """QFT on `qubits` (least significant first), bit reversal included."""
    qubits = tuple(qubits) if qubits is not None else tuple(range(m))
    circuit = Circuit(n_qubits if n_qubits is not None else max(qubits) + 1)
    for i in reversed(range(m)):
        circuit.h(qubits[i])
        for l in reversed(range(i)):
            circuit.phase(qubits[i], math.pi / 2 ** (i - l), [(qubits[l], True)])
    for i in range(m // 2):
        a, b = qubits[i], qubits[m - 1 - i]
        circuit.x(b, [a]).x(a, [b]).x(b, [a])
    return circuit


def inverse_qft(m: int, qubits: Optional[Sequence[int]] = None, n_qubits: Optional[int] = None) -> Circuit:
    if m < 1:
        raise ValueError("inverse QFT needs at least one qubit")
    return qft(m, qubits, n_qubits).inverse()


def build_qrm(rm: Circuit, layout: RegisterLayout) -> Circuit:
    """
    One Grover step on the RM state.

    S_X is a Z on the phase ancilla (held in |1>) controlled by the indicator.
    S0 is a Z on the phase ancilla fired only when every work qubit is |0>;
    the modification register is left out so each setting rotates in its own
    plane. X Z X Z on the phase ancilla supplies the -1.
    """
    if layout.indicator is None or layout.phase is None:
        raise ValueError("QRM needs an indicator and a phase ancilla in the layout")
    circuit = layout.empty_circuit()
    circuit.z(layout.phase, [(layout.indicator, True)])
    circuit.compose(rm.inverse())
    circuit.z(layout.phase, [(q, False) for q in layout.work_qubits])
    circuit.x(layout.phase).z(layout.phase).x(layout.phase).z(layout.phase)
    circuit.compose(rm)
    return circuit


def build_qae(config: QaeConfig) -> Tuple[Circuit, RegisterLayout]:
    """
    Full QAE circuit for `config.model`.

    The modification register is left untouched so the circuit can serve as a
    Grover oracle; prepare_modification selects a fixed setting.

    Raises:
        BudgetExceededError: when the layout needs more than settings.MAX_QUBITS qubits
    """
    layout = build_layout(config.model, n_ae=config.n_ae, strategy=config.strategy,
                          grover_phase=config.grover_phase)
    if layout.n_qubits > settings.MAX_QUBITS:
        raise BudgetExceededError("QAE qubits", layout.n_qubits, settings.MAX_QUBITS)
    rm = RiskCompiler(config.model, layout, config.strategy, config.native_increments).build_rm()
    qrm = build_qrm(rm, layout)
    circuit = layout.empty_circuit()
    circuit.x(layout.phase)
    for q in layout.ae:
        circuit.h(q)
    circuit.compose(rm)
    for j, q in enumerate(layout.ae):
        step = qrm.controlled([(q, True)])
        for _ in range(2 ** j):
            circuit.compose(step)
    circuit.compose(inverse_qft(config.n_ae, layout.ae, layout.n_qubits))
    logger.info(f"QAE circuit: {len(circuit)} gates on {layout.n_qubits} qubits (n_ae={config.n_ae})")
    return circuit, layout


def prepare_modification(layout: RegisterLayout, index: int) -> Circuit:
    circuit = layout.empty_circuit()
    if not 0 <= index < 2 ** layout.n_s:
        raise ValueError(f"modification {index} does not fit {layout.n_s} search qubits")
    for k, q in enumerate(layout.search):
        if (index >> k) & 1:
            circuit.x(q)
    return circuit


def run_qae(model: RiskModel, n_ae: int, modification: int = 0, shots: int = 0,
            seed: Optional[int] = None, strategy: str = "auto", native_increments: bool = False) -> QaeResult:
    """
    Simulate QAE for one modification setting.

    Returns:
        QaeResult: exact outcome distribution, plus `shots` samples when shots > 0
    """
    circuit, layout = build_qae(QaeConfig(n_ae, model, strategy, native_increments))
    state = StateVector.zero(layout.n_qubits)
    apply(state, prepare_modification(layout, modification))
    apply(state, circuit)
    if shots > 0:
        histogram = sample(state, layout.ae, shots, seed, label="ae")
    else:
        histogram = Histogram.exact(marginal(state, layout.ae), n_ae, label="ae")
    result = QaeResult(n_ae, histogram, modification)
    result.decoded = {y: decode(y, n_ae) for y, *_ in result.decoded_rows()}
    logger.info(f"QAE modes {result.modes} -> P = {result.estimate:.4f}")
    return result

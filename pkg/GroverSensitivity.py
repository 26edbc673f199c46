"""Grover search over model modifications.

The oracle runs the full QAE circuit, phase-flips the Grover phase qubit
(held in |1>) for every targeted QAE outcome, then uncomputes QAE. The
modification register is the search register.
"""

import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Iterable, List, Optional, Sequence, Union

import numpy as np

import settings
from amplitude_estimation import QaeConfig, build_qae, decode, prepare_modification
from circuits import Circuit, RegisterLayout, pattern_controls
from risk_model import (RiskModel, classical_sensitivity, exact_exceedance, grid_position,
                        plant_dominant_parameter)
from statevector import Histogram, StateVector, apply, marginal, sample

logger = logging.getLogger(__name__)

DEFAULT_EFFECTIVE_FACTOR = 1.8
NEAR_UNIFORM_MARGIN = 0.05


@dataclass(frozen=True)
class SearchTarget:
    """Set of QAE outcomes the oracle marks; mirrors are always included."""

    outcomes: frozenset
    n_ae: int

    def __post_init__(self):
        size = 2 ** self.n_ae
        bad = [y for y in self.outcomes if not 0 <= y < size]
        if bad:
            raise ValueError(f"outcomes {bad} do not fit a {self.n_ae}-qubit register")

    @classmethod
    def from_outcomes(cls, outcomes: Iterable[int], n_ae: int) -> "SearchTarget":
        size = 2 ** n_ae
        chosen = {int(y) for y in outcomes}
        if not chosen:
            raise ValueError("a search target needs at least one outcome")
        return cls(frozenset(chosen | {(size - y) % size for y in chosen}), n_ae)

    @classmethod
    def from_probability(cls, p: float, n_ae: int, widen: int = 0) -> "SearchTarget":
        """Nearest grid outcome of p, optionally widened by `widen` cells on each side."""
        center = round(grid_position(p, n_ae))
        return cls.from_outcomes(range(max(0, center - widen), center + widen + 1), n_ae)

    @classmethod
    def at_least(cls, p: float, n_ae: int) -> "SearchTarget":
        """Every outcome decoding to a probability of at least p; may come out empty."""
        chosen = frozenset(y for y in range(2 ** n_ae) if decode(y, n_ae) >= p - 1e-12)
        if not chosen:
            logger.warning(f"No {n_ae}-qubit outcome decodes to at least {p}")
        return cls(chosen, n_ae)

    def widen(self, cells: int = 1) -> "SearchTarget":
        size = 2 ** self.n_ae
        grown = {(y + d) % size for y in self.outcomes for d in range(-cells, cells + 1)}
        return SearchTarget.from_outcomes(grown, self.n_ae)


@dataclass
class SearchConfig:
    steps: Union[int, str] = "auto"
    shots: int = 100
    seed: Optional[int] = settings.DEFAULT_SEED
    effective_factor: float = DEFAULT_EFFECTIVE_FACTOR
    rounding: str = "floor"

    def __post_init__(self):
        if self.steps != "auto" and (not isinstance(self.steps, int) or self.steps < 1):
            raise ValueError(f"steps must be a positive integer or 'auto', got {self.steps!r}")
        if self.rounding not in ("floor", "round"):
            raise ValueError(f"rounding must be 'floor' or 'round', got {self.rounding}")
        if self.shots < 0:
            raise ValueError("shots must be non-negative")


@dataclass
class SearchResult:
    histogram: Histogram
    steps: int
    top: int
    success_probability: float
    solution: Optional[int] = None

    @property
    def near_uniform(self) -> bool:
        probs = self.histogram.probabilities
        return float(probs.max()) - 1.0 / len(probs) < NEAR_UNIFORM_MARGIN


def optimal_steps(n_states: int, n_solutions: int = 1, effective_factor: float = DEFAULT_EFFECTIVE_FACTOR,
                  rounding: str = "floor") -> int:
    """Grover iterations for n_solutions marked states out of n_states, inflated by effective_factor."""
    if n_states < 1 or n_solutions < 1:
        raise ValueError("need at least one state and one solution")
    m_hat = n_solutions * effective_factor
    if m_hat >= n_states:
        return 1
    raw = math.pi / 4 * math.sqrt(n_states / m_hat)
    return max(1, math.floor(raw) if rounding == "floor" else round(raw))


def diffusion(qubits: Sequence[int], n_qubits: int) -> Circuit:
    """2|s><s| - I on `qubits`, up to a global phase."""
    circuit = Circuit(n_qubits)
    for q in qubits:
        circuit.h(q)
    for q in qubits:
        circuit.x(q)
    circuit.z(qubits[-1], [(q, True) for q in qubits[:-1]])
    for q in qubits:
        circuit.x(q)
    for q in qubits:
        circuit.h(q)
    return circuit


def build_oracle(qae: Circuit, layout: RegisterLayout, target: SearchTarget) -> Circuit:
    if layout.grover_phase is None:
        raise ValueError("oracle needs a layout with a Grover phase qubit")
    if target.n_ae != layout.n_ae:
        raise ValueError(f"target is for {target.n_ae} QAE qubits, layout has {layout.n_ae}")
    circuit = qae.copy()
    for y in sorted(target.outcomes):
        circuit.z(layout.grover_phase, pattern_controls(layout.ae, y))
    return circuit.compose(qae.inverse())


class SensitivitySearch:
    """
    Grover search for the modification whose QAE outcome hits a target.

    Args:
        model (RiskModel): model with modifications
        n_ae (int): QAE output qubits
        strategy (str): threshold construction
        native_increments (bool): INC gates in the cost accumulator
    """

    def __init__(self, model: RiskModel, n_ae: int = 8, strategy: str = "auto", native_increments: bool = False):
        if not model.modifications:
            raise ValueError(f"model '{model.name}' has no modifications to search")
        self.model = model
        self.qae, self.layout = build_qae(QaeConfig(n_ae, model, strategy, native_increments, grover_phase=True))

    @property
    def n_states(self) -> int:
        return 2 ** self.layout.n_s

    def oracle(self, target: SearchTarget) -> Circuit:
        return build_oracle(self.qae, self.layout, target)

    def initial_state(self, modification: Optional[int] = None) -> StateVector:
        """Grover phase qubit in |1>, search register in a basis state or left at |0>."""
        state = StateVector.zero(self.layout.n_qubits)
        prep = self.layout.empty_circuit().x(self.layout.grover_phase)
        if modification is not None:
            prep.compose(prepare_modification(self.layout, modification))
        return apply(state, prep)

    def marking_amplitude(self, target: SearchTarget, modification: int) -> float:
        """<k,0|O|k,0> for modification setting k; equals 1 - 2 * (QAE mass on the target)."""
        start = self.initial_state(modification)
        end = apply(start.copy(), self.oracle(target))
        return float(start.inner(end).real)

    def grover_circuit(self, target: SearchTarget, steps: int) -> Circuit:
        oracle = self.oracle(target)
        step = oracle.copy().compose(diffusion(self.layout.search, self.layout.n_qubits))
        circuit = self.layout.empty_circuit()
        circuit.x(self.layout.grover_phase)
        for q in self.layout.search:
            circuit.h(q)
        for _ in range(steps):
            circuit.compose(step)
        return circuit

    def run(self, target: SearchTarget, config: Optional[SearchConfig] = None,
            solution: Optional[int] = None) -> SearchResult:
        """
        Simulate the search and read the modification register.

        Returns:
            SearchResult: exact search-register distribution (with samples when
            config.shots > 0), the most probable setting and its probability, or the
            probability of `solution` when one is given
        """
        config = config or SearchConfig()
        if not target.outcomes:
            logger.warning("Empty target: the oracle is the identity and the search output stays uniform")
        steps = config.steps
        if steps == "auto":
            steps = optimal_steps(self.n_states, 1, config.effective_factor, config.rounding)
        logger.info(f"Grover search over {self.n_states} settings, {steps} step(s), "
                    f"{len(target.outcomes)} marked outcome(s)")
        state = StateVector.zero(self.layout.n_qubits)
        apply(state, self.grover_circuit(target, steps))
        if config.shots > 0:
            histogram = sample(state, self.layout.search, config.shots, config.seed, label="search")
        else:
            histogram = Histogram.exact(marginal(state, self.layout.search), self.layout.n_s, label="search")
        top = histogram.top(1)[0]
        reported = solution if solution is not None else top
        result = SearchResult(histogram, steps, top, float(histogram.probabilities[reported]), solution)
        if result.near_uniform:
            logger.warning(f"Search output is near uniform (max {histogram.probabilities.max():.3f}); "
                           f"the target may match no setting or every setting")
        return result


def run_search(model: RiskModel, target: SearchTarget, config: Optional[SearchConfig] = None,
               strategy: str = "auto", solution: Optional[int] = None) -> SearchResult:
    return SensitivitySearch(model, target.n_ae, strategy).run(target, config, solution)


# --- Scaling experiment ---

@dataclass
class ScalingRow:
    n_items: int
    n_params: int
    classical_evals: int
    quantum_model_calls: int
    grover_steps: int
    success_probability: float
    planted_index: int
    classical_found: Optional[int]

    HEADERS = ("n_items", "n_params", "classical_evals", "quantum_model_calls", "grover_steps",
               "success_probability", "planted_index", "classical_found")

    def as_row(self) -> List:
        return [getattr(self, h) for h in self.HEADERS]


def repetitions_for_confidence(success: float, confidence: float) -> int:
    """Independent Grover runs needed so at least one succeeds with the given confidence."""
    if success >= confidence:
        return 1
    if success <= 0.0:
        raise ValueError("a search that never succeeds cannot reach any confidence")
    return math.ceil(math.log(1.0 - confidence) / math.log(1.0 - success))


def quantum_model_calls(repetitions: int, steps: int, n_ae: int) -> int:
    """Each Grover step runs QAE twice; one QAE evaluates the model 2^(n_ae+1) - 1 times."""
    return repetitions * steps * 2 * (2 ** (n_ae + 1) - 1)


def _scaling_row(model: RiskModel, n_ae: int, confidence: float, seed: int, factor: float) -> ScalingRow:
    planted_model, planted = plant_dominant_parameter(model, n_ae)
    others = [exact_exceedance(planted_model, 0)] + [exact_exceedance(planted_model, m.index)
                                                     for m in planted_model.modifications
                                                     if m.index != planted.index]
    tolerance = (planted.probability - max(others)) / 2
    classical = classical_sensitivity(planted_model, planted.probability, tolerance, confidence, seed=seed)
    search = SensitivitySearch(planted_model, n_ae)
    steps = optimal_steps(search.n_states, 1, factor)
    result = search.run(SearchTarget.from_outcomes([planted.outcome], n_ae),
                        SearchConfig(steps=steps, shots=0, effective_factor=factor), solution=planted.index)
    repetitions = repetitions_for_confidence(result.success_probability, confidence)
    row = ScalingRow(len(model.items), model.n_params, classical.model_evaluations,
                     quantum_model_calls(repetitions, steps, n_ae), steps, result.success_probability,
                     planted.index, classical.found_index)
    logger.info(f"{model.name}: classical {row.classical_evals} draws, quantum {row.quantum_model_calls} calls, "
                f"P(success) = {row.success_probability:.3f}")
    return row


def scaling_experiment(models: Sequence[RiskModel], confidence: float = 0.70, seed: int = settings.DEFAULT_SEED,
                       n_ae: int = 6, effective_factor: float = DEFAULT_EFFECTIVE_FACTOR,
                       workers: Optional[int] = None) -> List[ScalingRow]:
    """
    Classical Monte Carlo cost against quantum model calls for each model.

    One modification per model is planted to dominate the others; both searches
    then look for it at the same confidence.
    """
    if not 0.0 < confidence < 1.0:
        raise ValueError(f"confidence must lie in (0, 1), got {confidence}")
    children = np.random.SeedSequence(seed).spawn(len(models))
    seeds = [int(c.generate_state(1)[0]) for c in children]
    with ThreadPoolExecutor(max_workers=workers or settings.WORKERS) as pool:
        rows = list(pool.map(lambda args: _scaling_row(args[0], n_ae, confidence, args[1], effective_factor),
                             zip(models, seeds)))
    return rows

"""Grover search with imperfect oracles.

Two families are simulated against their closed forms:

* false-positive oracles, U (mark |1...1>) U^dagger with U a product of
  single-qubit rotations, which behave like a perfect oracle with an
  effective number of solutions M_hat = prod (cos a_i + sin a_i)^2;
* root oracles, which hang k extra ancillas in uniform (or rotated)
  superposition off a perfect oracle and only fire on some ancilla patterns.
"""

import logging
import math
from dataclasses import dataclass
from typing import Iterable, List, Optional, Sequence, Tuple, Union

import numpy as np

from circuits import Circuit, Gate, pattern_controls
from errors import BudgetExceededError
from GroverSensitivity import diffusion
from statevector import StateVector, apply, marginal

logger = logging.getLogger(__name__)

MAX_FALSE_POSITIVE_QUBITS = 14


# --- Closed forms ---

def effective_solutions(alphas: Sequence[float]) -> float:
    return float(np.prod([(math.cos(a) + math.sin(a)) ** 2 for a in alphas]))


def predicted_steps(n_states: int, m_hat: float) -> float:
    return math.pi / 4 * math.sqrt(n_states / m_hat)


def predicted_success(alphas: Sequence[float]) -> float:
    """Upper bound on the probability of reading |1...1>: only the unrotated branch marks it."""
    return float(np.prod([math.cos(a) ** 2 for a in alphas]))


def grover_success_curve(oracle: Circuit, search: Sequence[int], solutions: Iterable[int], max_steps: int,
                         prepare: Optional[Circuit] = None) -> List[float]:
    """Success probability after 0, 1, ..., max_steps Grover steps; entry s is after s steps."""
    n = oracle.n_qubits
    state = StateVector.zero(n)
    start = Circuit(n)
    if prepare is not None:
        start.compose(prepare)
    for q in search:
        start.h(q)
    apply(state, start)
    step = oracle.copy().compose(diffusion(search, n))
    wanted = list(solutions)
    curve = [float(marginal(state, search)[wanted].sum())]
    for _ in range(max_steps):
        apply(state, step)
        curve.append(float(marginal(state, search)[wanted].sum()))
    return curve


# --- False-positive oracles ---

@dataclass(frozen=True)
class FalsePositiveOracle:
    """
    Rotated all-ones oracle on n search qubits plus one internal qubit.

    Args:
        n (int): search qubits
        alphas (Tuple[float, ...]): rotation angle of each search qubit
    """

    n: int
    alphas: Tuple[float, ...]

    def __post_init__(self):
        if self.n < 1:
            raise ValueError("need at least one search qubit")
        if len(self.alphas) != self.n:
            raise ValueError(f"{self.n} qubits need {self.n} angles, got {len(self.alphas)}")
        if self.n > MAX_FALSE_POSITIVE_QUBITS:
            raise BudgetExceededError("false-positive search qubits", self.n, MAX_FALSE_POSITIVE_QUBITS)

    @classmethod
    def single(cls, n: int, alpha: float, qubit: int = 0) -> "FalsePositiveOracle":
        return cls(n, tuple(alpha if q == qubit else 0.0 for q in range(n)))

    @classmethod
    def spread(cls, n: int, total_alpha: float, qubits: int) -> "FalsePositiveOracle":
        """total_alpha split evenly over the first `qubits` search qubits."""
        if not 1 <= qubits <= n:
            raise ValueError(f"cannot spread over {qubits} of {n} qubits")
        return cls(n, tuple(total_alpha / qubits if q < qubits else 0.0 for q in range(n)))

    @property
    def n_states(self) -> int:
        return 2 ** self.n

    @property
    def effective_solutions(self) -> float:
        return effective_solutions(self.alphas)

    @property
    def predicted_steps(self) -> float:
        return predicted_steps(self.n_states, self.effective_solutions)

    @property
    def predicted_success(self) -> float:
        return predicted_success(self.alphas)

    def circuit(self) -> Circuit:
        internal = self.n
        circuit = Circuit(self.n + 1)
        for q, a in enumerate(self.alphas):
            circuit.u3(q, 2 * a)
        circuit.x(internal)
        circuit.z(internal, [(q, True) for q in range(self.n)])
        circuit.x(internal)
        for q, a in enumerate(self.alphas):
            circuit.u3(q, -2 * a)
        return circuit

    def curve(self, max_steps: int) -> List[float]:
        return grover_success_curve(self.circuit(), range(self.n), [self.n_states - 1], max_steps)


def build_false_positive_oracle(n: int, alphas: Sequence[float]) -> Circuit:
    return FalsePositiveOracle(n, tuple(alphas)).circuit()


def run_false_positive_grover(n: int, alphas: Sequence[float], steps: int) -> float:
    """Probability of reading |1...1> after `steps` Grover steps with the rotated oracle."""
    if steps < 0:
        raise ValueError("steps must be non-negative")
    return FalsePositiveOracle(n, tuple(alphas)).curve(steps)[steps]


@dataclass
class FalsePositiveRow:
    n: int
    alphas: Tuple[float, ...]
    m_hat: float
    predicted_steps: float
    predicted_success: float
    peak_steps: int
    peak_success: float
    success_at_prediction: float

    HEADERS = ("n", "alpha_total", "qubits_rotated", "m_hat", "predicted_steps", "predicted_success",
               "peak_steps", "peak_success", "success_at_prediction")

    def as_row(self) -> List:
        rotated = sum(1 for a in self.alphas if a)
        return [self.n, sum(self.alphas), rotated, self.m_hat, self.predicted_steps, self.predicted_success,
                self.peak_steps, self.peak_success, self.success_at_prediction]


def _false_positive_row(oracle: FalsePositiveOracle, max_steps: Optional[int]) -> FalsePositiveRow:
    horizon = max_steps or math.ceil(2 * predicted_steps(oracle.n_states, 1.0)) + 1
    curve = oracle.curve(horizon)
    peak = int(np.argmax(curve[1:])) + 1
    at = min(horizon, max(1, round(oracle.predicted_steps)))
    return FalsePositiveRow(oracle.n, oracle.alphas, oracle.effective_solutions, oracle.predicted_steps,
                            oracle.predicted_success, peak, curve[peak], curve[at])


def false_positive_sweep(n: int, alphas: Sequence[float], qubit: int = 0,
                         max_steps: Optional[int] = None) -> List[FalsePositiveRow]:
    """One row per angle, the angle applied to a single search qubit."""
    return [_false_positive_row(FalsePositiveOracle.single(n, a, qubit), max_steps) for a in alphas]


def spread_sweep(n: int, total_alpha: float, spreads: Sequence[int],
                 max_steps: Optional[int] = None) -> List[FalsePositiveRow]:
    """Same total angle spread over 1, 2, ... qubits."""
    return [_false_positive_row(FalsePositiveOracle.spread(n, total_alpha, j), max_steps) for j in spreads]


@dataclass
class MixingResult:
    n: int
    measured_m_hat: float
    predicted_steps: float
    peak_steps: int
    peak_success: float
    success_at_prediction: float


def random_mixing_experiment(n: int, seed: int, scale: float = 0.5, max_steps: Optional[int] = None) -> MixingResult:
    """
    Oracle V^dagger (mark |1...1>) V with V a product of random single-qubit U3 gates.

    The marked state is w = V^dagger|1...1>. M_hat is measured as
    N |<s|w>|^2 rather than computed from angles, then used to predict the
    optimal step count.
    """
    if n > MAX_FALSE_POSITIVE_QUBITS:
        raise BudgetExceededError("false-positive search qubits", n, MAX_FALSE_POSITIVE_QUBITS)
    rng = np.random.default_rng(seed)
    angles = rng.uniform(-scale, scale, size=(n, 3))
    rotation = Circuit(n + 1)
    for q, (theta, phi, lam) in enumerate(angles):
        rotation.u3(q, float(theta), float(phi), float(lam))
    oracle = Circuit(n + 1).compose(rotation)
    oracle.x(n).z(n, [(q, True) for q in range(n)]).x(n)
    oracle.compose(rotation.inverse())

    marked = Circuit(n + 1)
    for q in range(n):
        marked.x(q)
    marked.compose(rotation.inverse())
    w = apply(StateVector.zero(n + 1), marked)
    s = apply(StateVector.zero(n + 1), Circuit(n + 1).extend(Gate("H", (q,)) for q in range(n)))
    n_states = 2 ** n
    m_hat = n_states * abs(s.inner(w)) ** 2
    prediction = predicted_steps(n_states, m_hat)
    horizon = max_steps or math.ceil(2 * prediction) + 1
    curve = grover_success_curve(oracle, range(n), [n_states - 1], horizon)
    peak = int(np.argmax(curve[1:])) + 1
    at = min(horizon, max(1, round(prediction)))
    logger.info(f"Random mixing n={n}: M_hat = {m_hat:.4f}, predicted {prediction:.2f} steps, peak at {peak}")
    return MixingResult(n, m_hat, prediction, peak, curve[peak], curve[at])


# --- Root oracles ---

@dataclass(frozen=True)
class RootOracle:
    """
    Perfect oracle gated on k ancilla patterns.

    Qubits: search (0..n-1), indicator (n, held in |1>), ancillas (n+1..n+k).
    Pattern bit j gives the polarity of ancilla j; pattern 0 fires when every
    ancilla reads |0>. Ancillas start in |+>, or the first one in
    U3(2 alpha)|0> when alpha is set.
    """

    n: int
    solutions: Tuple[int, ...]
    k: int
    patterns: Tuple[int, ...]
    alpha: Optional[float] = None

    def __post_init__(self):
        if self.n < 1 or self.k < 0:
            raise ValueError("need n >= 1 search qubits and k >= 0 ancillas")
        if not self.solutions or any(not 0 <= s < 2 ** self.n for s in self.solutions):
            raise ValueError(f"solutions {self.solutions} must be non-empty and lie in [0, {2 ** self.n})")
        if not 1 <= len(set(self.patterns)) == len(self.patterns) <= 2 ** self.k:
            raise ValueError(f"need 1..{2 ** self.k} distinct patterns, got {self.patterns}")
        if any(not 0 <= p < 2 ** self.k for p in self.patterns):
            raise ValueError(f"patterns {self.patterns} do not fit {self.k} ancillas")
        if self.alpha is not None and self.k < 1:
            raise ValueError("a rotated ancilla needs k >= 1")

    @property
    def indicator(self) -> int:
        return self.n

    @property
    def ancillas(self) -> Tuple[int, ...]:
        return tuple(range(self.n + 1, self.n + 1 + self.k))

    @property
    def n_qubits(self) -> int:
        return self.n + 1 + self.k

    @property
    def marked_weight(self) -> float:
        """Probability that the ancillas land on a marked pattern."""
        if self.alpha is None:
            return len(self.patterns) / 2 ** self.k
        first = {0: math.cos(self.alpha) ** 2, 1: math.sin(self.alpha) ** 2}
        return sum(first[p & 1] / 2 ** (self.k - 1) for p in self.patterns)

    def preparation(self) -> Circuit:
        circuit = Circuit(self.n_qubits)
        circuit.x(self.indicator)
        for j, q in enumerate(self.ancillas):
            if j == 0 and self.alpha is not None:
                circuit.u3(q, 2 * self.alpha)
            else:
                circuit.h(q)
        return circuit

    def circuit(self) -> Circuit:
        prep = self.preparation()
        circuit = prep.copy()
        for pattern in self.patterns:
            for sol in self.solutions:
                controls = pattern_controls(range(self.n), sol) + pattern_controls(self.ancillas, pattern)
                circuit.z(self.indicator, controls)
        return circuit.compose(prep.inverse())

    def curve(self, max_steps: int) -> List[float]:
        return grover_success_curve(self.circuit(), range(self.n), self.solutions, max_steps)


def _search_qubits(n_states: int) -> int:
    n = n_states.bit_length() - 1
    if n < 1 or 2 ** n != n_states:
        raise ValueError(f"search space size must be a power of two >= 2, got {n_states}")
    return n


def build_root_oracle(n_states: int, solutions: Union[int, Sequence[int]], k: int,
                      patterns: Sequence[int], alpha: Optional[float] = None) -> Circuit:
    sols = (solutions,) if isinstance(solutions, int) else tuple(solutions)
    return RootOracle(_search_qubits(n_states), sols, k, tuple(patterns), alpha).circuit()


def perfect_curve(n_states: int, n_solutions: int, max_steps: int) -> List[float]:
    n = _search_qubits(n_states)
    return RootOracle(n, _top_solutions(n_states, n_solutions), 0, (0,)).curve(max_steps)


def _top_solutions(n_states: int, n_solutions: int) -> Tuple[int, ...]:
    if not 1 <= n_solutions < n_states:
        raise ValueError(f"need 1 <= M < N, got M={n_solutions}, N={n_states}")
    return tuple(range(n_states - n_solutions, n_states))


@dataclass
class RootGroverDelta:
    steps: int
    success: float
    root_success: float
    baseline: float

    @property
    def delta(self) -> float:
        return self.success - self.baseline

    @property
    def delta_tilde(self) -> float:
        return self.root_success - self.baseline

    @property
    def ratio(self) -> float:
        return self.delta_tilde / self.delta if abs(self.delta) > 1e-15 else math.nan


def root_grover_success(n_states: int, n_solutions: int, k: int, marked: int, steps: int) -> float:
    oracle = RootOracle(_search_qubits(n_states), _top_solutions(n_states, n_solutions), k, tuple(range(marked)))
    return oracle.curve(steps)[steps]


def root_grover_delta(n_states: int, n_solutions: int, k: int, marked: int, steps: int) -> RootGroverDelta:
    """
    Success above the M/N baseline with a root oracle against a perfect one.

    The exact relation is delta_tilde = (marked / 2^k) * delta.
    """
    n = _search_qubits(n_states)
    solutions = _top_solutions(n_states, n_solutions)
    root = RootOracle(n, solutions, k, tuple(range(marked))).curve(steps)[steps]
    perfect = perfect_curve(n_states, n_solutions, steps)[steps]
    return RootGroverDelta(steps, perfect, root, n_solutions / n_states)


def root_sweep(sizes: Sequence[int], ks: Sequence[int], max_steps: Optional[int] = None) -> List[List]:
    """Rows (N, k, a, steps, P_n, P_tilde_n, delta, delta_tilde, ratio) for one solution, all a."""
    rows = []
    for n_states in sizes:
        horizon = max_steps or math.floor(math.pi / 4 * math.sqrt(n_states)) + 1
        perfect = perfect_curve(n_states, 1, horizon)
        n = _search_qubits(n_states)
        for k in ks:
            for marked in range(1, 2 ** k + 1):
                curve = RootOracle(n, (n_states - 1,), k, tuple(range(marked))).curve(horizon)
                for s in range(1, horizon + 1):
                    d = RootGroverDelta(s, perfect[s], curve[s], 1 / n_states)
                    rows.append([n_states, k, marked, s, d.success, d.root_success, d.delta, d.delta_tilde, d.ratio])
    return rows


ROOT_HEADERS = ("N", "k", "marked_patterns", "steps", "success", "root_success", "delta", "delta_tilde", "ratio")


@dataclass
class UnequalActivationRow:
    steps: int
    success: float
    root_success: float
    bound: float

    @property
    def holds(self) -> bool:
        return self.root_success >= self.bound - 1e-12

    @property
    def ratio(self) -> float:
        return self.root_success / self.success if self.success else math.nan


UNEQUAL_HEADERS = ("alpha", "k", "N", "steps", "success", "root_success", "bound", "holds")


def unequal_activation_bound(alpha: float, k: int = 1, n_states: int = 16, n_solutions: int = 1,
                             steps: Sequence[int] = (1, 2, 3)) -> List[UnequalActivationRow]:
    """
    Root oracle on the all-|0> pattern with the first ancilla rotated by alpha.

    The marked branch carries weight cos^2(alpha) / 2^(k-1), so the success
    probability never drops below cos^2(alpha) / 2^k times the perfect one.
    """
    if k < 1:
        raise ValueError("unequal activation needs at least one ancilla")
    n = _search_qubits(n_states)
    horizon = max(steps)
    perfect = perfect_curve(n_states, n_solutions, horizon)
    root = RootOracle(n, _top_solutions(n_states, n_solutions), k, (0,), alpha).curve(horizon)
    rows = [UnequalActivationRow(s, perfect[s], root[s], math.cos(alpha) ** 2 / 2 ** k * perfect[s]) for s in steps]
    for row in rows:
        if not row.holds:
            logger.warning(f"alpha={alpha}, k={k}, step {row.steps}: {row.root_success:.6f} below bound {row.bound:.6f}")
    return rows

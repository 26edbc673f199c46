"""Analytical qubit and gate estimates, and exact counts from compiled circuits."""

import logging
import math
from dataclasses import dataclass
from typing import Dict, List, Mapping, Optional

from amplitude_estimation import QaeConfig, build_qae
from circuits import Circuit
from risk_model import RiskModel
from RiskCompiler import RiskCompiler, build_layout

logger = logging.getLogger(__name__)

DEFAULT_LOG_BASE = 10.0
RESOURCE_EFFECTIVE_FACTOR = 1.0


@dataclass(frozen=True)
class QubitBreakdown:
    items: int
    search: int
    ae: int
    cost: int
    ancilla_tree: int = 0
    indicator: int = 1
    phase: int = 1
    grover_phase: int = 1

    @property
    def headline(self) -> int:
        """Item, tree ancilla, search, QAE and cost qubits; single-qubit helpers left out."""
        return self.items + self.ancilla_tree + self.search + self.ae + self.cost

    @property
    def total(self) -> int:
        return self.headline + self.indicator + self.phase + self.grover_phase

    def rows(self) -> List[List]:
        parts = ("items", "ancilla_tree", "search", "ae", "cost", "indicator", "phase", "grover_phase")
        return [[p, getattr(self, p)] for p in parts] + [["headline", self.headline], ["total", self.total]]


@dataclass(frozen=True)
class GateBreakdown:
    model_gates: float
    qae_gates: float
    grover_steps: int
    grover_total: float
    log_base: float
    max_arity: Optional[int] = None

    def rows(self) -> List[List]:
        rows = [["model_gates", self.model_gates], ["qae_gates", self.qae_gates],
                ["grover_steps", self.grover_steps], ["grover_total", self.grover_total],
                ["log_base", self.log_base]]
        if self.max_arity is not None:
            rows.append(["max_arity", self.max_arity])
        return rows


def search_width(n_params: int) -> int:
    """
    Analytical modification register width, ceil(log2(n_params)).

    A compiled model also reserves a setting for "no modification" and needs
    ceil(log2(#modifications + 1)) bits (RiskModel.search_width); the two differ
    when the modification count is a power of two. model_estimate uses the
    model's own width.
    """
    return math.ceil(math.log2(n_params)) if n_params > 1 else 0


def estimate_qubits(n_r: int, n_t: int, n_c: int, n_ae: int, n_s: Optional[int] = None,
                    ancilla_tree: int = 0) -> QubitBreakdown:
    """
    Qubit count of the sensitivity circuit.

    Args:
        n_r (int): risk items
        n_t (int): transitions
        n_c (int): cost register width
        n_ae (int): QAE output qubits
        n_s (int): modification register width; ceil(log2(n_r + n_t)) when omitted
        ancilla_tree (int): ancillas of the binary-tree construction

    Returns:
        QubitBreakdown: per-register counts with headline and total
    """
    if min(n_r, n_t, n_c, n_ae, ancilla_tree) < 0 or (n_s is not None and n_s < 0):
        raise ValueError("qubit counts must be non-negative")
    if n_s is None:
        n_s = search_width(n_r + n_t)
    return QubitBreakdown(n_r, n_s, n_ae, n_c, ancilla_tree)


def estimate_gates(n_r: int, n_t: int, n_c: int, n_ae: int, n_params: int, log_base: float = DEFAULT_LOG_BASE,
                   effective_factor: float = RESOURCE_EFFECTIVE_FACTOR) -> GateBreakdown:
    """
    Gate count estimate.

    m_r = (n_r + n_t) log(n_r + n_t) + n_r n_c log(n_c) for one model
    preparation, 2^n_ae m_r for QAE, and 2 n_g times that for the search,
    with n_g = floor(pi/4 sqrt(n_params / effective_factor)).
    """
    if n_params < 1:
        raise ValueError("need at least one parameter")

    def log(x: float) -> float:
        return math.log(x, log_base) if x > 1 else 0.0

    m_r = (n_r + n_t) * log(n_r + n_t) + n_r * n_c * log(n_c)
    qae = 2 ** n_ae * m_r
    steps = max(1, math.floor(math.pi / 4 * math.sqrt(n_params / effective_factor)))
    return GateBreakdown(m_r, qae, steps, 2 * steps * qae, log_base)


def elementary_expansion(counts: Mapping[int, int], constant: float = 1.0) -> float:
    """Elementary gates for {arity: count}; a gate on n qubits costs constant * n^2, single-qubit gates 1."""
    return sum(count * (1 if arity <= 1 else constant * arity ** 2) for arity, count in counts.items())


def expansion_table(circuit: Circuit, constant: float = 1.0) -> List[List]:
    return [[arity, count, elementary_expansion({arity: count}, constant)]
            for arity, count in circuit.gate_counts().items()]


def model_estimate(model: RiskModel, n_ae: int, strategy: str = "auto") -> QubitBreakdown:
    """Analytical breakdown using the model's own register widths."""
    layout = build_layout(model, n_ae=n_ae, strategy=strategy, grover_phase=True)
    return estimate_qubits(len(model.items), len(model.transitions), layout.n_c, n_ae, n_s=model.search_width,
                           ancilla_tree=len(layout.ancilla_qubits))


def compiled_counts(model: RiskModel, n_ae: int, strategy: str = "auto") -> Dict[str, int]:
    """Exact gate and qubit counts of the compiled RM and QAE circuits."""
    layout = build_layout(model, n_ae=n_ae, strategy=strategy, grover_phase=True)
    rm = RiskCompiler(model, layout, strategy).build_rm()
    qae, _ = build_qae(QaeConfig(n_ae, model, strategy, grover_phase=True))
    counts = {
        "qubits": layout.n_qubits,
        "rm_gates": len(rm),
        "rm_max_arity": rm.max_arity(),
        "qae_gates": len(qae),
        "qae_max_arity": qae.max_arity(),
        "qae_elementary": int(elementary_expansion(qae.gate_counts())),
    }
    logger.info(f"Compiled '{model.name}' at n_ae={n_ae}: {counts}")
    return counts

# Compiles a RiskModel into the RM state-preparation circuit.
#
# RM prepares one qubit per risk item so that measuring the item register
# reproduces the classical scenario distribution. A cost register then sums
# the item costs, and an indicator qubit records whether the loss reaches the
# threshold. Modification settings on the search register swap individual
# item blocks for their modified versions.

import logging
import math
from typing import Dict, Iterable, List, Optional, Sequence, Tuple

from circuits import Circuit, ControlSpec, Gate, RegisterLayout, as_controls, pattern_controls
from errors import CompileError
from risk_model import Modification, RiskModel, XorGroup, apply_modification

logger = logging.getLogger(__name__)

STRATEGIES = ("auto", "all-items", "top-bits", "twos-complement")


def angle_for_probability(p: float) -> float:
    """U3 angle theta with sin^2(theta/2) = p."""
    if not (-1e-12 <= p <= 1 + 1e-12) or math.isnan(p):
        raise CompileError(f"probability {p} is outside [0, 1]")
    return 2 * math.asin(math.sqrt(min(1.0, max(0.0, p))))


def _u3(target: int, p: float, controls: Iterable[ControlSpec] = ()) -> Gate:
    return Gate("U3", (target,), as_controls(controls), (angle_for_probability(p), 0.0, 0.0))


def inverse_gates(gates: Sequence[Gate]) -> List[Gate]:
    return [g.inverse() for g in reversed(gates)]


# --- Item blocks ---

def compile_xor_chain(probabilities: Sequence[float], qubits: Sequence[int],
                      controls: Iterable[ControlSpec] = ()) -> List[Gate]:
    """
    Exactly-one preparation of an XOR group.

    Member k is rotated by its probability conditioned on all earlier members
    being off, with negative controls on those members. The last member only
    needs an X under those controls. Once the earlier members exhaust the
    probability mass the remaining members get U3(0).
    """
    base = as_controls(controls)
    gates: List[Gate] = []
    remaining = 1.0
    for k, (p, q) in enumerate(zip(probabilities, qubits)):
        ctrl = base + tuple((qubits[j], False) for j in range(k))
        if remaining <= 1e-12:
            gates.append(_u3(q, 0.0, ctrl))
        elif k == len(qubits) - 1:
            gates.append(Gate("X", (q,), ctrl))
        else:
            gates.append(_u3(q, min(1.0, p / remaining), ctrl))
        remaining -= p
    return gates


def compile_transition_tree(target: int, intrinsic_p: float, sources: Sequence[Tuple[int, float]],
                            ancillas: Sequence[int] = (), controls: Iterable[ControlSpec] = ()) -> List[Gate]:
    """
    Gates preparing an item triggered by m sources.

    Sources are (qubit, transition probability) pairs. Pairs of sources are
    folded into zero-cost ancilla items with four doubly-controlled U3 gates,
    layer by layer, until one source remains. The item itself then gets two
    opposite-polarity controlled rotations: the intrinsic probability when the
    source is off, p_t + (1 - p_t) * p_intrinsic when it is on.

    Args:
        target (int): item qubit
        intrinsic_p (float): intrinsic trigger probability
        sources (Sequence[Tuple[int, float]]): source qubits and their transition probabilities
        ancillas (Sequence[int]): m - 1 free qubits for the tree
        controls: extra controls put on every gate

    Returns:
        List[Gate]: the block
    """
    base = as_controls(controls)
    if not sources:
        return [_u3(target, intrinsic_p, base)]
    if len(ancillas) < len(sources) - 1:
        raise CompileError(f"{len(sources)} sources need {len(sources) - 1} ancillas, got {len(ancillas)}")
    free = list(ancillas)
    gates: List[Gate] = []
    level = list(sources)
    while len(level) > 1:
        folded = []
        for (qa, ta), (qb, tb) in zip(level[0::2], level[1::2]):
            node = free.pop(0)
            for on_a in (False, True):
                for on_b in (False, True):
                    p = 1.0 - (1.0 - ta * on_a) * (1.0 - tb * on_b)
                    gates.append(_u3(node, p, base + ((qa, on_a), (qb, on_b))))
            folded.append((node, 1.0))
        if len(level) % 2:
            folded.append(level[-1])
        level = folded
    source, t = level[0]
    gates.append(_u3(target, intrinsic_p, base + ((source, False),)))
    gates.append(_u3(target, t + (1.0 - t) * intrinsic_p, base + ((source, True),)))
    return gates


def compile_transition_patterns(target: int, intrinsic_p: float, sources: Sequence[Tuple[int, float]],
                                controls: Iterable[ControlSpec] = ()) -> List[Gate]:
    """The 2^m construction: one rotation per on/off pattern of the m sources."""
    base = as_controls(controls)
    gates = []
    for pattern in range(2 ** len(sources)):
        stay_off = 1.0 - intrinsic_p
        ctrl = []
        for k, (q, t) in enumerate(sources):
            on = bool((pattern >> k) & 1)
            ctrl.append((q, on))
            if on:
                stay_off *= 1.0 - t
        gates.append(_u3(target, 1.0 - stay_off, base + tuple(ctrl)))
    return gates


# --- Threshold strategies ---

def _top_bits_start(threshold: int, total: int) -> Optional[int]:
    width = total.bit_length()
    for j in range(width):
        if threshold == 2 ** width - 2 ** j:
            return j
    return None


def resolve_strategy(model: RiskModel, strategy: str = "auto") -> str:
    """
    Pick the indicator construction.

    Thresholds at or below zero always fire and thresholds above the total
    cost never do; both need no cost register whatever the request.
    """
    if strategy not in STRATEGIES:
        raise CompileError(f"unknown threshold strategy '{strategy}', expected one of {STRATEGIES}")
    threshold, total = model.threshold, model.total_cost
    if threshold <= 0:
        return "always"
    if threshold > total:
        return "never"
    if strategy == "auto":
        if threshold == total:
            return "all-items"
        if _top_bits_start(threshold, total) is not None:
            return "top-bits"
        return "twos-complement"
    if strategy == "all-items" and threshold != total:
        raise CompileError(f"all-items needs threshold == total cost ({total}), got {threshold}")
    if strategy == "top-bits" and _top_bits_start(threshold, total) is None:
        raise CompileError(f"threshold {threshold} is not of the form 2^n - 2^j for total cost {total}")
    return strategy


def cost_width(model: RiskModel, strategy: str) -> int:
    if strategy == "top-bits":
        return model.total_cost.bit_length()
    if strategy == "twos-complement":
        return model.total_cost.bit_length() + 1
    return 0


def _check_supported(model: RiskModel) -> None:
    for group in model.xor_groups:
        for m in group.members:
            if m in model.incoming:
                raise CompileError(f"XOR member {m} has incoming transitions; not supported by the compiler")


def build_layout(model: RiskModel, n_ae: int = 0, strategy: str = "auto", tree: bool = True,
                 items_only: bool = False, grover_phase: bool = False) -> RegisterLayout:
    """Allocate registers for `model`; `items_only` drops cost, indicator and phase qubits."""
    _check_supported(model)
    ancillas = {}
    if tree:
        ancillas = {i: len(ts) - 1 for i, ts in model.incoming.items() if len(ts) > 1}
    resolved = resolve_strategy(model, strategy)
    return RegisterLayout.allocate(
        model.item_ids, n_s=model.search_width, n_ae=n_ae, ancilla_counts=ancillas,
        n_c=0 if items_only else cost_width(model, resolved),
        indicator=not items_only, phase=not items_only, grover_phase=grover_phase,
    )


class RiskCompiler:
    """
    Builds the RM operator of one model on a given register layout.

    Args:
        model (RiskModel): validated model
        layout (RegisterLayout): register allocation, from build_layout by default
        strategy (str): threshold construction, see resolve_strategy
        native_increments (bool): emit INC gates instead of the multi-controlled X ripple
        tree (bool): binary-tree construction for items with several sources
    """

    def __init__(self, model: RiskModel, layout: Optional[RegisterLayout] = None, strategy: str = "auto",
                 native_increments: bool = False, tree: bool = True):
        self.model = model
        self.strategy = resolve_strategy(model, strategy)
        self.layout = layout or build_layout(model, strategy=strategy, tree=tree)
        self.native_increments = native_increments
        self.tree = tree

    # --- Item blocks ---

    def _xor_block(self, model: RiskModel, group: XorGroup, controls=()) -> List[Gate]:
        probs = [model.by_id[m].intrinsic_p for m in group.members]
        return compile_xor_chain(probs, [self.layout.items[m] for m in group.members], controls)

    def _item_block(self, model: RiskModel, item_id: int, controls=()) -> List[Gate]:
        item = model.by_id[item_id]
        sources = [(self.layout.items[t.source], t.p) for t in model.incoming.get(item_id, ())]
        target = self.layout.items[item_id]
        if len(sources) > 1 and not self.tree:
            return compile_transition_patterns(target, item.intrinsic_p, sources, controls)
        return compile_transition_tree(target, item.intrinsic_p, sources,
                                       self.layout.ancillas.get(item_id, ()), controls)

    def _touches(self, mod: Modification, members: Sequence[int]) -> bool:
        if mod.item is not None:
            return mod.item in members
        return mod.transition[1] in members

    def compile_model(self) -> Circuit:
        """Item preparation with the original / inverse / modified blocks for every modification."""
        model = self.model
        circuit = self.layout.empty_circuit()
        done_groups = set()
        for item_id in model.order:
            group = model.xor_of.get(item_id)
            if group is not None:
                if group in done_groups:
                    continue
                done_groups.add(group)
                members = group.members
                block = lambda m: self._xor_block(m, group)
            else:
                members = (item_id,)
                block = lambda m, i=item_id: self._item_block(m, i)
            original = block(model)
            circuit.extend(original)
            for mod in model.modifications:
                if not self._touches(mod, members):
                    continue
                ctrl = pattern_controls(self.layout.search, mod.index)
                circuit.extend(g.with_controls(ctrl) for g in inverse_gates(original))
                circuit.extend(g.with_controls(ctrl) for g in block(apply_modification(model, mod.index)))
        logger.debug(f"Compiled {len(circuit)} item gates for '{model.name}'")
        return circuit

    # --- Cost register ---

    def _add_power(self, power: int, controls: Tuple = ()) -> List[Gate]:
        cost = self.layout.cost
        if power >= len(cost):
            raise CompileError(f"cost register of {len(cost)} qubits cannot add 2^{power}")
        if self.native_increments:
            return [Gate("INC", cost, as_controls(controls), (float(2 ** power),))]
        bits = cost[power:]
        return [Gate("X", (bits[t],), as_controls(controls) + tuple((b, True) for b in bits[:t]))
                for t in reversed(range(len(bits)))]

    def append_cost_accumulator(self, circuit: Circuit) -> Circuit:
        if not self.layout.cost:
            return circuit
        limit = 2 ** (self.layout.n_c - (1 if self.strategy == "twos-complement" else 0))
        if self.model.total_cost >= limit:
            raise CompileError(f"total cost {self.model.total_cost} overflows {self.layout.n_c} cost qubits")
        for item_id in self.model.item_ids:
            cost = self.model.by_id[item_id].cost
            for power in range(cost.bit_length()):
                if (cost >> power) & 1:
                    circuit.extend(self._add_power(power, ((self.layout.items[item_id], True),)))
        return circuit

    def append_threshold_indicator(self, circuit: Circuit) -> Circuit:
        indicator = self.layout.indicator
        if indicator is None:
            raise CompileError("layout has no indicator qubit")
        if self.strategy == "always":
            circuit.x(indicator)
        elif self.strategy == "all-items":
            costly = [self.layout.items[i] for i in self.model.item_ids if self.model.by_id[i].cost > 0]
            circuit.x(indicator, costly)
        elif self.strategy == "top-bits":
            start = _top_bits_start(self.model.threshold, self.model.total_cost)
            circuit.x(indicator, self.layout.cost[start:])
        elif self.strategy == "twos-complement":
            width = self.layout.n_c
            complement = (2 ** width - self.model.threshold) % 2 ** width
            adder: List[Gate] = []
            for power in range(width):
                if (complement >> power) & 1:
                    adder.extend(self._add_power(power))
            circuit.extend(adder)
            circuit.x(indicator, [(self.layout.cost[-1], False)])
            circuit.extend(inverse_gates(adder))
        return circuit

    def build_rm(self) -> Circuit:
        circuit = self.compile_model()
        self.append_cost_accumulator(circuit)
        self.append_threshold_indicator(circuit)
        logger.info(f"RM for '{self.model.name}': {len(circuit)} gates on {circuit.n_qubits} qubits, "
                    f"threshold strategy {self.strategy}")
        return circuit


# --- Functional entry points ---

def compile_model(model: RiskModel, layout: Optional[RegisterLayout] = None, **options) -> Circuit:
    """Item part of RM; defaults to an items-only layout (search register included when modifications exist)."""
    tree = options.get("tree", True)
    layout = layout or build_layout(model, tree=tree, items_only=True,
                                    strategy=options.get("strategy", "auto"))
    return RiskCompiler(model, layout, **options).compile_model()


def append_cost_accumulator(circuit: Circuit, model: RiskModel, layout: RegisterLayout, **options) -> Circuit:
    return RiskCompiler(model, layout, **options).append_cost_accumulator(circuit)


def append_threshold_indicator(circuit: Circuit, model: RiskModel, layout: RegisterLayout, **options) -> Circuit:
    return RiskCompiler(model, layout, **options).append_threshold_indicator(circuit)


def build_rm(model: RiskModel, layout: Optional[RegisterLayout] = None, **options) -> Tuple[Circuit, RegisterLayout]:
    compiler = RiskCompiler(model, layout or build_layout(model, strategy=options.get("strategy", "auto"),
                                                          tree=options.get("tree", True)), **options)
    return compiler.build_rm(), compiler.layout

"""Gate-level circuit IR shared by the compiler, the simulator and the search code.

Multi-controlled gates are first class. A control is a (qubit, polarity)
pair; polarity True fires on |1>, False on |0>.

Text format, one statement per line ('#' starts a comment):

    QUBITS <n>
    REGISTER <name> <q>,<q>,...
    GATE <kind>[(<param>,...)] <target>,<target>,... [<+q|-q> ...]

Kinds and their parameters: U3(theta,phi,lambda), X, Z, H, P(angle) and
INC(weight), the last one adding `weight` modulo 2^len(targets) to the target
register (targets listed least significant first).
"""

import logging
import math
import re
from collections import Counter
from dataclasses import dataclass, field, replace
from typing import Dict, Iterable, Iterator, List, Optional, Sequence, Tuple, Union

from errors import CircuitError

logger = logging.getLogger(__name__)

Control = Tuple[int, bool]
ControlSpec = Union[int, Tuple[int, bool]]

PARAM_COUNT = {"U3": 3, "X": 0, "Z": 0, "H": 0, "P": 1, "INC": 1}


def as_controls(controls: Iterable[ControlSpec]) -> Tuple[Control, ...]:
    """Normalise controls; a bare int is a positive control."""
    out = []
    for c in controls:
        if isinstance(c, tuple):
            out.append((int(c[0]), bool(c[1])))
        else:
            out.append((int(c), True))
    return tuple(out)


def pattern_controls(qubits: Sequence[int], value: int) -> Tuple[Control, ...]:
    """Controls that fire when the register `qubits` (LSB first) holds `value`."""
    return tuple((q, bool((value >> k) & 1)) for k, q in enumerate(qubits))


@dataclass(frozen=True)
class Gate:
    kind: str
    targets: Tuple[int, ...]
    controls: Tuple[Control, ...] = ()
    params: Tuple[float, ...] = ()

    def __post_init__(self):
        if self.kind not in PARAM_COUNT:
            raise CircuitError(f"unknown gate kind {self.kind}")
        if len(self.params) != PARAM_COUNT[self.kind]:
            raise CircuitError(f"{self.kind} takes {PARAM_COUNT[self.kind]} parameters, got {len(self.params)}")
        if any(not math.isfinite(p) for p in self.params):
            raise CircuitError(f"{self.kind} has non-finite parameters {self.params}")
        if not self.targets or (self.kind != "INC" and len(self.targets) != 1):
            raise CircuitError(f"{self.kind} acts on {len(self.targets)} targets")
        qubits = list(self.targets) + [q for q, _ in self.controls]
        if len(set(qubits)) != len(qubits):
            raise CircuitError(f"{self.kind} on {self.targets} with controls {self.controls} reuses a qubit")
        if any(q < 0 for q in qubits):
            raise CircuitError(f"negative qubit index in {self}")

    @property
    def arity(self) -> int:
        return len(self.targets) + len(self.controls)

    @property
    def qubits(self) -> Tuple[int, ...]:
        return self.targets + tuple(q for q, _ in self.controls)

    def inverse(self) -> "Gate":
        if self.kind == "U3":
            theta, phi, lam = self.params
            return replace(self, params=(-theta, -lam, -phi))
        if self.kind in ("P", "INC"):
            return replace(self, params=(-self.params[0],))
        return self

    def with_controls(self, extra: Iterable[ControlSpec]) -> "Gate":
        return replace(self, controls=as_controls(extra) + self.controls)

    def to_text(self, precision: int = 10) -> str:
        head = self.kind
        if self.kind == "INC":
            head += f"({int(self.params[0])})"
        elif self.params:
            head += "(" + ",".join(f"{p:.{precision}f}" for p in self.params) + ")"
        line = f"GATE {head} {','.join(str(t) for t in self.targets)}"
        if self.controls:
            line += " [" + " ".join(f"{'+' if pol else '-'}{q}" for q, pol in self.controls) + "]"
        return line


_GATE_RE = re.compile(r"^GATE\s+(\w+)(?:\(([^)]*)\))?\s+([\d,]+)(?:\s+\[([^\]]*)\])?\s*$")


class Circuit:
    """
    Ordered gate list over a fixed number of qubits, with named registers.

    A circuit is built by appending gates and treated as read-only once it is
    handed to the simulator or to other builders.
    """

    def __init__(self, n_qubits: int, gates: Optional[Iterable[Gate]] = None,
                 registers: Optional[Dict[str, Sequence[int]]] = None):
        if n_qubits < 0:
            raise CircuitError(f"n_qubits must be non-negative, got {n_qubits}")
        self.n_qubits = n_qubits
        self.gates: List[Gate] = []
        self.registers: Dict[str, Tuple[int, ...]] = {}
        for name, qubits in (registers or {}).items():
            self.add_register(name, qubits)
        for gate in gates or ():
            self.append(gate)

    # --- Construction ---

    def add_register(self, name: str, qubits: Sequence[int]) -> None:
        qubits = tuple(qubits)
        if any(not 0 <= q < self.n_qubits for q in qubits):
            raise CircuitError(f"register {name} {qubits} exceeds {self.n_qubits} qubits")
        for other, taken in self.registers.items():
            if set(taken) & set(qubits):
                raise CircuitError(f"register {name} overlaps register {other}")
        self.registers[name] = qubits

    def append(self, gate: Gate) -> "Circuit":
        if any(q >= self.n_qubits for q in gate.qubits):
            raise CircuitError(f"gate {gate.to_text(4)} exceeds {self.n_qubits} qubits")
        self.gates.append(gate)
        return self

    def extend(self, gates: Iterable[Gate]) -> "Circuit":
        for gate in gates:
            self.append(gate)
        return self

    def u3(self, target: int, theta: float, phi: float = 0.0, lam: float = 0.0,
           controls: Iterable[ControlSpec] = ()) -> "Circuit":
        return self.append(Gate("U3", (target,), as_controls(controls), (theta, phi, lam)))

    def x(self, target: int, controls: Iterable[ControlSpec] = ()) -> "Circuit":
        return self.append(Gate("X", (target,), as_controls(controls)))

    def z(self, target: int, controls: Iterable[ControlSpec] = ()) -> "Circuit":
        return self.append(Gate("Z", (target,), as_controls(controls)))

    def h(self, target: int, controls: Iterable[ControlSpec] = ()) -> "Circuit":
        return self.append(Gate("H", (target,), as_controls(controls)))

    def phase(self, target: int, angle: float, controls: Iterable[ControlSpec] = ()) -> "Circuit":
        return self.append(Gate("P", (target,), as_controls(controls), (angle,)))

    def increment(self, register: Sequence[int], weight: int, controls: Iterable[ControlSpec] = ()) -> "Circuit":
        return self.append(Gate("INC", tuple(register), as_controls(controls), (float(weight),)))

    # --- Transformations ---

    def copy(self) -> "Circuit":
        return Circuit(self.n_qubits, self.gates, self.registers)

    def inverse(self) -> "Circuit":
        return Circuit(self.n_qubits, [g.inverse() for g in reversed(self.gates)], self.registers)

    def controlled(self, controls: Iterable[ControlSpec]) -> "Circuit":
        extra = as_controls(controls)
        return Circuit(self.n_qubits, [g.with_controls(extra) for g in self.gates], self.registers)

    def compose(self, other: "Circuit") -> "Circuit":
        if other.n_qubits != self.n_qubits:
            raise CircuitError(f"cannot compose {other.n_qubits}-qubit circuit into {self.n_qubits} qubits")
        return self.extend(other.gates)

    # --- Reporting ---

    def __len__(self) -> int:
        return len(self.gates)

    def __iter__(self) -> Iterator[Gate]:
        return iter(self.gates)

    def gate_counts(self) -> Dict[int, int]:
        """Gate count per arity (targets plus controls)."""
        return dict(sorted(Counter(g.arity for g in self.gates).items()))

    def kind_counts(self) -> Dict[str, int]:
        return dict(sorted(Counter(g.kind for g in self.gates).items()))

    def max_arity(self) -> int:
        return max((g.arity for g in self.gates), default=0)

    def to_text(self, precision: int = 10) -> str:
        lines = [f"QUBITS {self.n_qubits}"]
        for name, qubits in self.registers.items():
            lines.append(f"REGISTER {name} {','.join(str(q) for q in qubits)}")
        lines.extend(g.to_text(precision) for g in self.gates)
        return "\n".join(lines) + "\n"

    @classmethod
    def from_text(cls, text: str) -> "Circuit":
        circuit: Optional[Circuit] = None
        for lineno, raw in enumerate(text.splitlines(), start=1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            if line.startswith("QUBITS"):
                circuit = cls(int(line.split()[1]))
                continue
            if circuit is None:
                raise CircuitError(f"line {lineno}: QUBITS must come first")
            if line.startswith("REGISTER"):
                _, name, qubits = line.split()
                circuit.add_register(name, [int(q) for q in qubits.split(",")])
                continue
            match = _GATE_RE.match(line)
            if not match:
                raise CircuitError(f"line {lineno}: cannot parse '{raw}'")
            kind, params, targets, controls = match.groups()
            values = tuple(float(p) for p in params.split(",")) if params else ()
            ctrl = tuple((int(c[1:]), c[0] == "+") for c in (controls or "").split())
            circuit.append(Gate(kind, tuple(int(t) for t in targets.split(",")), ctrl, values))
        if circuit is None:
            raise CircuitError("empty circuit text")
        return circuit


@dataclass(frozen=True)
class RegisterLayout:
    """
    Qubit allocation for a compiled risk model.

    Registers are laid out in this order: QAE output, modification (search),
    items by id, tree ancillas, cost, indicator, phase ancilla, Grover phase.
    """

    ae: Tuple[int, ...] = ()
    search: Tuple[int, ...] = ()
    items: Dict[int, int] = field(default_factory=dict)
    ancillas: Dict[int, Tuple[int, ...]] = field(default_factory=dict)
    cost: Tuple[int, ...] = ()
    indicator: Optional[int] = None
    phase: Optional[int] = None
    grover_phase: Optional[int] = None
    n_qubits: int = 0

    @classmethod
    def allocate(cls, item_ids: Sequence[int], n_s: int = 0, n_ae: int = 0,
                 ancilla_counts: Optional[Dict[int, int]] = None, n_c: int = 0,
                 indicator: bool = False, phase: bool = False, grover_phase: bool = False) -> "RegisterLayout":
        cursor = 0

        def take(count: int) -> Tuple[int, ...]:
            nonlocal cursor
            block = tuple(range(cursor, cursor + count))
            cursor += count
            return block

        ae = take(n_ae)
        search = take(n_s)
        items = {item_id: take(1)[0] for item_id in sorted(item_ids)}
        ancillas = {item_id: take(count) for item_id, count in sorted((ancilla_counts or {}).items()) if count}
        cost = take(n_c)
        ind = take(1)[0] if indicator else None
        ph = take(1)[0] if phase else None
        gp = take(1)[0] if grover_phase else None
        return cls(ae, search, items, ancillas, cost, ind, ph, gp, cursor)

    @property
    def n_s(self) -> int:
        return len(self.search)

    @property
    def n_ae(self) -> int:
        return len(self.ae)

    @property
    def n_c(self) -> int:
        return len(self.cost)

    @property
    def item_qubits(self) -> Tuple[int, ...]:
        """Item qubits ordered by item id."""
        return tuple(self.items[i] for i in sorted(self.items))

    @property
    def ancilla_qubits(self) -> Tuple[int, ...]:
        return tuple(q for qs in self.ancillas.values() for q in qs)

    @property
    def work_qubits(self) -> Tuple[int, ...]:
        """Qubits prepared by the RM operator: items, tree ancillas, cost and indicator."""
        work = self.item_qubits + self.ancilla_qubits + self.cost
        if self.indicator is not None:
            work += (self.indicator,)
        return work

    def registers(self) -> Dict[str, Tuple[int, ...]]:
        named = {"ae": self.ae, "search": self.search, "items": self.item_qubits,
                 "ancilla": self.ancilla_qubits, "cost": self.cost}
        for name, qubit in (("indicator", self.indicator), ("phase", self.phase),
                            ("grover_phase", self.grover_phase)):
            if qubit is not None:
                named[name] = (qubit,)
        return {k: v for k, v in named.items() if v}

    def empty_circuit(self) -> Circuit:
        return Circuit(self.n_qubits, registers=self.registers())

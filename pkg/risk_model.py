"""Risk model parsing, validation and classical evaluation.

A risk model is a tree of risk items. Each item fires intrinsically with its
own probability, can be triggered by a transition from another triggered item,
and adds its cost to the scenario loss once triggered. Items in an XOR group
are mutually exclusive: every scenario selects exactly one of them.

Everything in this module is classical and serves as the ground truth for the
compiled circuits.
"""

import heapq
import json
import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from functools import cached_property
from pathlib import Path
from typing import Dict, FrozenSet, Iterator, List, Optional, Sequence, Tuple, Union

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, ValidationError, model_validator
from scipy import stats
from scipy.optimize import brentq

import settings
from errors import BudgetExceededError, ModelSyntaxError, ModelValidationError

logger = logging.getLogger(__name__)

XOR_TOLERANCE = 1e-9

TransitionKey = Tuple[int, int]


# --- Model file schema ---

class ItemSpec(BaseModel):
    id: int
    name: str = ""
    p: float
    cost: int = 0


class TransitionSpec(BaseModel):
    model_config = ConfigDict(populate_by_name=True)

    source: int = Field(alias="from")
    target: int = Field(alias="to")
    p: float


class TargetSpec(BaseModel):
    model_config = ConfigDict(populate_by_name=True, extra="forbid")

    item: Optional[int] = None
    source: Optional[int] = Field(default=None, alias="from")
    target: Optional[int] = Field(default=None, alias="to")

    @model_validator(mode="after")
    def _one_target(self):
        is_item = self.item is not None
        is_transition = self.source is not None and self.target is not None
        if is_item == is_transition:
            raise ValueError("target needs either 'item' or both 'from' and 'to'")
        return self


class ModificationSpec(BaseModel):
    index: int
    target: TargetSpec
    delta: float
    compensate: Optional[int] = None


class ModelFile(BaseModel):
    """Top-level layout of a model JSON file."""

    name: str = ""
    items: List[ItemSpec]
    transitions: List[TransitionSpec] = []
    xor_groups: List[List[int]] = []
    modifications: List[ModificationSpec] = []
    threshold: int = Field(ge=0)

    def to_model(self) -> "RiskModel":
        modifications = []
        for m in self.modifications:
            if m.target.item is not None:
                modifications.append(Modification(m.index, item=m.target.item, delta=m.delta,
                                                  compensate=m.compensate))
            else:
                modifications.append(Modification(m.index, transition=(m.target.source, m.target.target),
                                                  delta=m.delta, compensate=m.compensate))
        return RiskModel(
            items=tuple(RiskItem(i.id, i.name or f"RI{i.id}", i.p, i.cost) for i in self.items),
            transitions=tuple(Transition(t.source, t.target, t.p) for t in self.transitions),
            xor_groups=tuple(XorGroup(tuple(g)) for g in self.xor_groups),
            modifications=tuple(modifications),
            threshold=self.threshold,
            name=self.name,
        )


# --- Domain types ---

@dataclass(frozen=True)
class RiskItem:
    id: int
    name: str
    intrinsic_p: float
    cost: int = 0


@dataclass(frozen=True)
class Transition:
    source: int
    target: int
    p: float

    @property
    def key(self) -> TransitionKey:
        return (self.source, self.target)


@dataclass(frozen=True)
class XorGroup:
    members: Tuple[int, ...]


@dataclass(frozen=True)
class Modification:
    """One row of the modification table.

    Exactly one of `item` and `transition` is set. For an item inside an XOR
    group, `compensate` names the member that absorbs -delta.
    """

    index: int
    item: Optional[int] = None
    transition: Optional[TransitionKey] = None
    delta: float = 0.0
    compensate: Optional[int] = None

    def describe(self) -> str:
        if self.item is not None:
            return f"p{self.item} {self.delta:+g}"
        return f"p{self.transition[0]}{self.transition[1]} {self.delta:+g}"


@dataclass(frozen=True)
class ScenarioDraw:
    intrinsic_fired: Dict[int, bool]
    transition_fired: Dict[TransitionKey, bool] = field(default_factory=dict)


@dataclass(frozen=True)
class RiskModel:
    items: Tuple[RiskItem, ...]
    transitions: Tuple[Transition, ...] = ()
    xor_groups: Tuple[XorGroup, ...] = ()
    modifications: Tuple[Modification, ...] = ()
    threshold: int = 0
    name: str = ""

    @cached_property
    def by_id(self) -> Dict[int, RiskItem]:
        return {item.id: item for item in self.items}

    @cached_property
    def incoming(self) -> Dict[int, Tuple[Transition, ...]]:
        grouped: Dict[int, List[Transition]] = {}
        for t in sorted(self.transitions, key=lambda t: t.key):
            grouped.setdefault(t.target, []).append(t)
        return {k: tuple(v) for k, v in grouped.items()}

    @cached_property
    def xor_of(self) -> Dict[int, XorGroup]:
        return {m: g for g in self.xor_groups for m in g.members}

    @cached_property
    def order(self) -> Tuple[int, ...]:
        """Topological order of item ids, ties broken by the smaller id."""
        indegree = {item.id: 0 for item in self.items}
        children: Dict[int, List[int]] = {}
        for t in self.transitions:
            indegree[t.target] += 1
            children.setdefault(t.source, []).append(t.target)
        ready = [i for i, d in indegree.items() if d == 0]
        heapq.heapify(ready)
        order = []
        while ready:
            node = heapq.heappop(ready)
            order.append(node)
            for child in children.get(node, ()):
                indegree[child] -= 1
                if indegree[child] == 0:
                    heapq.heappush(ready, child)
        if len(order) != len(self.items):
            stuck = sorted(i for i, d in indegree.items() if d > 0)
            raise ModelValidationError("cycle", f"transition cycle through items {stuck}")
        return tuple(order)

    @property
    def item_ids(self) -> Tuple[int, ...]:
        return tuple(sorted(self.by_id))

    @property
    def total_cost(self) -> int:
        return sum(item.cost for item in self.items)

    @property
    def n_params(self) -> int:
        return len(self.items) + len(self.transitions)

    @property
    def search_width(self) -> int:
        """Width of the modification register: one setting per table row plus "no modification"."""
        if not self.modifications:
            return 0
        return math.ceil(math.log2(len(self.modifications) + 1))

    def modification(self, index: int) -> Optional[Modification]:
        for m in self.modifications:
            if m.index == index:
                return m
        return None

    def transition(self, key: TransitionKey) -> Transition:
        for t in self.transitions:
            if t.key == key:
                return t
        raise KeyError(key)


# --- Parsing and validation ---

def parse_model(text: str) -> RiskModel:
    """
    Parse and validate the contents of a model file.

    Args:
        text (str): UTF-8 JSON text

    Returns:
        RiskModel: the validated model

    Raises:
        ModelSyntaxError: malformed JSON, with line and column
        ModelValidationError: schema or structural violation
    """
    try:
        raw = json.loads(text)
    except json.JSONDecodeError as e:
        raise ModelSyntaxError(e.msg, e.lineno, e.colno) from e
    try:
        spec = ModelFile.model_validate(raw)
    except ValidationError as e:
        raise ModelValidationError("schema", str(e)) from e
    model = spec.to_model()
    validate_model(model)
    logger.debug(f"Parsed model '{model.name}' with {len(model.items)} items, "
                 f"{len(model.transitions)} transitions, {len(model.modifications)} modifications")
    return model


def load_model(path: Union[str, Path]) -> RiskModel:
    with open(path, "r", encoding="utf-8") as f:
        return parse_model(f.read())


def _check_probability(value: float, what: str) -> None:
    if not (0.0 <= value <= 1.0) or math.isnan(value):
        raise ModelValidationError("probability-range", f"{what} = {value} is outside [0, 1]")


def validate_model(model: RiskModel) -> None:
    ids = [item.id for item in model.items]
    if len(set(ids)) != len(ids):
        raise ModelValidationError("duplicate-id", f"item ids {ids} are not unique")
    for item in model.items:
        _check_probability(item.intrinsic_p, f"p{item.id}")
        if item.cost < 0:
            raise ModelValidationError("negative-cost", f"item {item.id} has cost {item.cost}")

    seen = set()
    for t in model.transitions:
        if t.source not in model.by_id or t.target not in model.by_id:
            raise ModelValidationError("dangling-id", f"transition {t.source}->{t.target} names an unknown item")
        if t.source == t.target:
            raise ModelValidationError("self-loop", f"transition {t.source}->{t.target}")
        if t.key in seen:
            raise ModelValidationError("duplicate-id", f"transition {t.source}->{t.target} appears twice")
        seen.add(t.key)
        _check_probability(t.p, f"p{t.source}{t.target}")
    model.order  # raises on cycles

    grouped = set()
    for group in model.xor_groups:
        if len(group.members) < 2:
            raise ModelValidationError("xor-membership", f"XOR group {list(group.members)} needs two members")
        for m in group.members:
            if m not in model.by_id:
                raise ModelValidationError("dangling-id", f"XOR group member {m} is not an item")
            if m in grouped:
                raise ModelValidationError("xor-membership", f"item {m} is in more than one XOR group")
            grouped.add(m)
        total = sum(model.by_id[m].intrinsic_p for m in group.members)
        if abs(total - 1.0) > XOR_TOLERANCE:
            raise ModelValidationError("xor-sum", f"XOR group {list(group.members)} sums to {total}")

    indices = set()
    for m in model.modifications:
        if m.index < 1 or m.index in indices:
            raise ModelValidationError("modification-index",
                                       f"index {m.index} is reserved or duplicated")
        indices.add(m.index)
        if m.index >= 2 ** model.search_width:
            raise ModelValidationError("modification-index", f"index {m.index} does not fit the register")
        if m.item is not None and m.item not in model.by_id:
            raise ModelValidationError("modification-target", f"modification {m.index} targets unknown item {m.item}")
        if m.transition is not None and m.transition not in seen:
            raise ModelValidationError("modification-target",
                                       f"modification {m.index} targets unknown transition {m.transition}")
        apply_modification(model, m.index)


# --- Modifications ---

def _compensating_member(model: RiskModel, mod: Modification) -> Optional[int]:
    group = model.xor_of.get(mod.item)
    if group is None:
        return None
    if mod.compensate is not None:
        if mod.compensate not in group.members or mod.compensate == mod.item:
            raise ModelValidationError("modification-target",
                                       f"modification {mod.index} compensates with {mod.compensate}, "
                                       f"not another member of its XOR group")
        return mod.compensate
    if len(group.members) == 2:
        return next(m for m in group.members if m != mod.item)
    raise ModelValidationError("modification-target",
                               f"modification {mod.index} changes an XOR group of size "
                               f"{len(group.members)} without 'compensate'")


def apply_modification(model: RiskModel, index: int) -> RiskModel:
    """Return the model with modification `index` applied. Unknown indices mean no modification."""
    mod = model.modification(index)
    if mod is None:
        return model
    items = model.items
    transitions = model.transitions
    if mod.item is not None:
        shifts = {mod.item: mod.delta}
        other = _compensating_member(model, mod)
        if other is not None:
            shifts[other] = -mod.delta
        new_items = []
        for item in items:
            if item.id in shifts:
                p = item.intrinsic_p + shifts[item.id]
                if not (-1e-12 <= p <= 1 + 1e-12):
                    raise ModelValidationError("modification-range",
                                               f"modification {index} moves p{item.id} to {p}")
                item = replace(item, intrinsic_p=min(1.0, max(0.0, p)))
            new_items.append(item)
        items = tuple(new_items)
    else:
        new_transitions = []
        for t in transitions:
            if t.key == mod.transition:
                p = t.p + mod.delta
                if not (-1e-12 <= p <= 1 + 1e-12):
                    raise ModelValidationError("modification-range",
                                               f"modification {index} moves p{t.source}{t.target} to {p}")
                t = replace(t, p=min(1.0, max(0.0, p)))
            new_transitions.append(t)
        transitions = tuple(new_transitions)
    return replace(model, items=items, transitions=transitions)


# --- Propagation ---

def _propagate(model: RiskModel, intrinsic: Dict[int, np.ndarray],
               fired: Dict[TransitionKey, np.ndarray]) -> Tuple[Dict[int, np.ndarray], np.ndarray]:
    shape = np.shape(next(iter(intrinsic.values())))
    loss = np.zeros(shape, dtype=np.int64)
    triggered: Dict[int, np.ndarray] = {}
    for item_id in model.order:
        hit = np.array(intrinsic[item_id], dtype=bool, copy=True)
        for t in model.incoming.get(item_id, ()):
            hit |= triggered[t.source] & fired[t.key]
        triggered[item_id] = hit
        loss += model.by_id[item_id].cost * hit.astype(np.int64)
    return triggered, loss


def propagate(model: RiskModel, draw: ScenarioDraw) -> Tuple[FrozenSet[int], int]:
    """
    Evaluate one scenario.

    Args:
        model (RiskModel): the model
        draw (ScenarioDraw): intrinsic and transition decisions

    Returns:
        Tuple[FrozenSet[int], int]: triggered item ids and the scenario loss
    """
    for group in model.xor_groups:
        selected = sum(bool(draw.intrinsic_fired.get(m, False)) for m in group.members)
        if selected != 1:
            raise ValueError(f"draw selects {selected} members of XOR group {list(group.members)}")
    intrinsic = {i: np.asarray(bool(draw.intrinsic_fired.get(i, False))) for i in model.by_id}
    fired = {t.key: np.asarray(bool(draw.transition_fired.get(t.key, False))) for t in model.transitions}
    triggered, loss = _propagate(model, intrinsic, fired)
    return frozenset(i for i, hit in triggered.items() if bool(hit)), int(loss)


# --- Exact enumeration ---

def _decisions(model: RiskModel) -> List[Tuple[str, object, np.ndarray]]:
    decisions: List[Tuple[str, object, np.ndarray]] = []
    for group in model.xor_groups:
        decisions.append(("xor", group, np.array([model.by_id[m].intrinsic_p for m in group.members])))
    for item_id in model.item_ids:
        if item_id not in model.xor_of:
            p = model.by_id[item_id].intrinsic_p
            decisions.append(("item", item_id, np.array([1.0 - p, p])))
    for t in sorted(model.transitions, key=lambda t: t.key):
        decisions.append(("transition", t.key, np.array([1.0 - t.p, t.p])))
    return decisions


def scenario_count(model: RiskModel) -> int:
    return math.prod(len(probs) for _, _, probs in _decisions(model))


def _enumerate(model: RiskModel) -> Iterator[Tuple[np.ndarray, Dict[int, np.ndarray], np.ndarray]]:
    decisions = _decisions(model)
    total = math.prod(len(probs) for _, _, probs in decisions)
    if total > settings.ENUMERATION_LIMIT:
        raise BudgetExceededError("scenario enumeration", total, settings.ENUMERATION_LIMIT)
    for start in range(0, total, settings.ENUMERATION_CHUNK):
        rest = np.arange(start, min(total, start + settings.ENUMERATION_CHUNK), dtype=np.int64)
        weight = np.ones(rest.shape)
        intrinsic: Dict[int, np.ndarray] = {}
        fired: Dict[TransitionKey, np.ndarray] = {}
        for kind, key, probs in decisions:
            digit = rest % len(probs)
            rest = rest // len(probs)
            weight = weight * probs[digit]
            if kind == "xor":
                for j, member in enumerate(key.members):
                    intrinsic[member] = digit == j
            elif kind == "item":
                intrinsic[key] = digit == 1
            else:
                fired[key] = digit == 1
        triggered, loss = _propagate(model, intrinsic, fired)
        yield weight, triggered, loss


def loss_distribution(model: RiskModel, modification_index: int = 0) -> np.ndarray:
    """Exact probability of every total loss 0..total_cost, by enumerating all scenario draws."""
    modified = apply_modification(model, modification_index)
    dist = np.zeros(modified.total_cost + 1)
    for weight, _, loss in _enumerate(modified):
        dist += np.bincount(loss, weights=weight, minlength=len(dist))
    return dist


def exact_exceedance(model: RiskModel, modification_index: int = 0) -> float:
    """Exact P(loss >= threshold) for the given modification setting."""
    dist = loss_distribution(model, modification_index)
    return float(dist[model.threshold:].sum())


def trigger_distribution(model: RiskModel, modification_index: int = 0) -> np.ndarray:
    """Joint probability of triggered item sets; bit k of the index is the k-th item by id."""
    modified = apply_modification(model, modification_index)
    ids = modified.item_ids
    dist = np.zeros(2 ** len(ids))
    for weight, triggered, _ in _enumerate(modified):
        mask = np.zeros(weight.shape, dtype=np.int64)
        for bit, item_id in enumerate(ids):
            mask |= triggered[item_id].astype(np.int64) << bit
        dist += np.bincount(mask, weights=weight, minlength=len(dist))
    return dist


def exceedance_table(model: RiskModel) -> Dict[int, float]:
    table = {0: exact_exceedance(model, 0)}
    for m in model.modifications:
        table[m.index] = exact_exceedance(model, m.index)
    return table


# --- Recursive conditioning (independent evaluator) ---

def recursive_loss_distribution(model: RiskModel, modification_index: int = 0) -> Dict[int, float]:
    """
    Loss distribution by conditioning on one item at a time in topological order.

    Shares no code with the enumeration path; each item is triggered with
    1 - (1 - p_intrinsic) * prod(1 - p_t) over transitions from triggered sources.
    """
    modified = apply_modification(model, modification_index)
    order = modified.order
    out: Dict[int, float] = {}

    def visit(pos: int, on: FrozenSet[int], chosen: Dict[XorGroup, int], prob: float, loss: int) -> None:
        if prob == 0.0:
            return
        if pos == len(order):
            out[loss] = out.get(loss, 0.0) + prob
            return
        item = modified.by_id[order[pos]]
        group = modified.xor_of.get(item.id)
        if group is not None and group not in chosen:
            for member in group.members:
                visit(pos, on, {**chosen, group: member}, prob * modified.by_id[member].intrinsic_p, loss)
            return
        if group is not None:
            stay_off = 0.0 if chosen[group] == item.id else 1.0
        else:
            stay_off = 1.0 - item.intrinsic_p
        for t in modified.incoming.get(item.id, ()):
            if t.source in on:
                stay_off *= 1.0 - t.p
        visit(pos + 1, on | {item.id}, chosen, prob * (1.0 - stay_off), loss + item.cost)
        visit(pos + 1, on, chosen, prob * stay_off, loss)

    visit(0, frozenset(), {}, 1.0, 0)
    return out


def recursive_exceedance(model: RiskModel, modification_index: int = 0) -> float:
    dist = recursive_loss_distribution(model, modification_index)
    return sum(p for loss, p in dist.items() if loss >= model.threshold)


# --- Monte Carlo ---

def _sample_scenarios(model: RiskModel, rng: np.random.Generator, shots: int):
    intrinsic: Dict[int, np.ndarray] = {}
    fired: Dict[TransitionKey, np.ndarray] = {}
    for group in model.xor_groups:
        cumulative = np.cumsum([model.by_id[m].intrinsic_p for m in group.members])
        selected = np.minimum(np.searchsorted(cumulative, rng.random(shots), side="right"),
                              len(group.members) - 1)
        for j, member in enumerate(group.members):
            intrinsic[member] = selected == j
    for item_id in model.item_ids:
        if item_id not in model.xor_of:
            intrinsic[item_id] = rng.random(shots) < model.by_id[item_id].intrinsic_p
    for t in sorted(model.transitions, key=lambda t: t.key):
        fired[t.key] = rng.random(shots) < t.p
    return intrinsic, fired


def _loss_counts_shard(model: RiskModel, seed: np.random.SeedSequence, shots: int) -> np.ndarray:
    rng = np.random.default_rng(seed)
    intrinsic, fired = _sample_scenarios(model, rng, shots)
    _, loss = _propagate(model, intrinsic, fired)
    return np.bincount(loss, minlength=model.total_cost + 1)


def sample_loss_counts(model: RiskModel, shots: int, seed: np.random.SeedSequence) -> np.ndarray:
    """
    Histogram of sampled scenario losses, indexed 0..total_cost.

    The shot budget is cut into shards of settings.MC_SHARD_SIZE; shard seeds
    are spawned from `seed`, so the counts do not depend on the worker count.
    """
    n_shards = max(1, math.ceil(shots / settings.MC_SHARD_SIZE))
    sizes = [settings.MC_SHARD_SIZE] * (n_shards - 1) + [shots - settings.MC_SHARD_SIZE * (n_shards - 1)]
    children = seed.spawn(n_shards)
    with ThreadPoolExecutor(max_workers=max(1, settings.WORKERS)) as executor:
        shards = list(executor.map(lambda args: _loss_counts_shard(model, *args), zip(children, sizes)))
    return np.sum(shards, axis=0)


def count_exceedances(model: RiskModel, shots: int, seed: np.random.SeedSequence) -> int:
    """Number of sampled scenarios with loss >= threshold."""
    counts = sample_loss_counts(model, shots, seed)
    return int(counts[max(0, model.threshold):].sum())


def exceedance_estimate(counts: np.ndarray, threshold: int) -> Tuple[float, float]:
    """Exceedance estimate and its standard error from a sampled loss histogram."""
    shots = int(counts.sum())
    estimate = int(counts[max(0, threshold):].sum()) / shots
    return estimate, math.sqrt(estimate * (1.0 - estimate) / shots)


def monte_carlo_loss_counts(model: RiskModel, modification_index: int, shots: int, seed: int) -> np.ndarray:
    """Sampled loss histogram for one modification setting; never enumerates."""
    if shots < 1:
        raise ValueError("shots must be at least 1")
    modified = apply_modification(model, modification_index)
    return sample_loss_counts(modified, shots, np.random.SeedSequence(seed))


def monte_carlo(model: RiskModel, modification_index: int, shots: int, seed: int) -> Tuple[float, float]:
    """
    Monte Carlo estimate of the exceedance probability.

    Args:
        model (RiskModel): the model
        modification_index (int): modification register setting
        shots (int): number of sampled scenarios
        seed (int): seed of the PCG64 stream

    Returns:
        Tuple[float, float]: estimate and its standard error
    """
    counts = monte_carlo_loss_counts(model, modification_index, shots, seed)
    estimate, stderr = exceedance_estimate(counts, model.threshold)
    logger.debug(f"Monte Carlo mod={modification_index}: {estimate:.6f} ± {stderr:.6f} over {shots} draws")
    return estimate, stderr


# --- Classical sensitivity search ---

@dataclass
class ClassicalSearchResult:
    found_index: Optional[int]
    model_evaluations: int
    estimates: Dict[int, float]
    intervals: Dict[int, Tuple[float, float]]
    rounds: int


def wilson_interval(hits: int, shots: int, confidence: float) -> Tuple[float, float]:
    ci = stats.binomtest(hits, shots).proportion_ci(confidence_level=confidence, method="wilson")
    return float(ci.low), float(ci.high)


def classical_sensitivity(model: RiskModel, target_p: float, tolerance: float, confidence: float = 0.70,
                          seed: int = settings.DEFAULT_SEED, initial_shots: int = 1024,
                          max_shots: int = 1 << 22) -> ClassicalSearchResult:
    """
    Find the modification whose exceedance lies within `tolerance` of `target_p`.

    Every modification gets the same number of Monte Carlo draws; the number
    doubles each round until exactly one Wilson interval (Bonferroni-adjusted
    to the requested confidence) still meets the target band, or none does.

    Returns:
        ClassicalSearchResult: found index (None when no modification qualifies)
        and the total number of Monte Carlo draws consumed
    """
    indices = [m.index for m in model.modifications]
    if not indices:
        raise ModelValidationError("modification-index", "classical sensitivity needs at least one modification")
    level = 1.0 - (1.0 - confidence) / len(indices)
    low, high = target_p - tolerance, target_p + tolerance
    variants = {i: apply_modification(model, i) for i in indices}
    hits = {i: 0 for i in indices}
    shots = 0
    batch = initial_shots
    rounds = 0
    while True:
        for i in indices:
            hits[i] += count_exceedances(variants[i], batch, np.random.SeedSequence([seed, i, rounds]))
        shots += batch
        rounds += 1
        intervals = {i: wilson_interval(hits[i], shots, level) for i in indices}
        estimates = {i: hits[i] / shots for i in indices}
        touching = [i for i in indices if intervals[i][0] <= high and intervals[i][1] >= low]
        logger.debug(f"Round {rounds}: {shots} draws per modification, candidates {touching}")
        evaluations = shots * len(indices)
        if len(touching) == 1:
            return ClassicalSearchResult(touching[0], evaluations, estimates, intervals, rounds)
        if not touching:
            logger.warning(f"No modification reaches {target_p:.5f} ± {tolerance:.5f}")
            return ClassicalSearchResult(None, evaluations, estimates, intervals, rounds)
        if shots >= max_shots:
            best = min(touching, key=lambda i: abs(estimates[i] - target_p))
            found = best if low <= estimates[best] <= high else None
            logger.warning(f"Shot cap {max_shots} reached with candidates {touching}; reporting {found}")
            return ClassicalSearchResult(found, evaluations, estimates, intervals, rounds)
        batch = shots


# --- Chain model family ---

CHAIN_INTRINSIC = (0.1, 0.2, 0.3, 0.4, 0.6, 0.7, 0.8)
CHAIN_TRANSITIONS = ((1, 2, 0.4), (1, 3, 0.3), (3, 4, 0.2), (3, 5, 0.1), (5, 6, 0.5), (5, 7, 0.6))


def chain_model(n_items: int, delta: float = 0.1) -> RiskModel:
    """
    The 2..7 item tree used for scaling runs.

    Every item costs 1 and the threshold equals the item count, so only the
    all-triggered scenario breaches. Each intrinsic and transition probability
    gets a +delta modification: items first, then transitions.
    """
    if not 2 <= n_items <= len(CHAIN_INTRINSIC):
        raise ValueError(f"chain models have 2..{len(CHAIN_INTRINSIC)} items, got {n_items}")
    items = tuple(RiskItem(i + 1, f"RI{i + 1}", p, 1) for i, p in enumerate(CHAIN_INTRINSIC[:n_items]))
    transitions = tuple(Transition(s, t, p) for s, t, p in CHAIN_TRANSITIONS if t <= n_items)
    modifications = [Modification(k + 1, item=item.id, delta=delta) for k, item in enumerate(items)]
    modifications += [Modification(len(items) + k + 1, transition=t.key, delta=delta)
                      for k, t in enumerate(transitions)]
    model = RiskModel(items, transitions, (), tuple(modifications), threshold=n_items, name=f"chain{n_items}")
    validate_model(model)
    return model


@dataclass(frozen=True)
class PlantedParameter:
    index: int
    outcome: int
    probability: float
    delta: float


def grid_position(p: float, n_ae: int) -> float:
    """Continuous QAE register position of probability p."""
    return math.asin(math.sqrt(p)) / math.pi * 2 ** n_ae


def _with_delta(model: RiskModel, index: int, delta: float) -> RiskModel:
    mods = tuple(replace(m, delta=delta) if m.index == index else m for m in model.modifications)
    return replace(model, modifications=mods)


def _delta_ceiling(model: RiskModel, mod: Modification) -> float:
    if mod.transition is not None:
        return 1.0 - model.transition(mod.transition).p
    ceiling = 1.0 - model.by_id[mod.item].intrinsic_p
    other = _compensating_member(model, mod)
    if other is not None:
        ceiling = min(ceiling, model.by_id[other].intrinsic_p)
    return ceiling


def plant_dominant_parameter(model: RiskModel, n_ae: int, index: Optional[int] = None,
                             gap: int = 2) -> Tuple[RiskModel, PlantedParameter]:
    """
    Re-tune one modification so it dominates every other setting.

    The delta is solved so that the modified exceedance sits exactly on QAE
    outcome y = ceil(highest other position) + gap. When that is out of reach
    the gap shrinks down to 1.

    Returns:
        Tuple[RiskModel, PlantedParameter]: the re-tuned model and the planted target
    """
    if not model.modifications:
        raise ModelValidationError("modification-index", "nothing to plant")
    mod = model.modification(index) if index is not None else model.modifications[0]
    if mod is None:
        raise ModelValidationError("modification-index", f"no modification with index {index}")
    others = [exact_exceedance(model, 0)] + [exact_exceedance(model, m.index)
                                             for m in model.modifications if m.index != mod.index]
    highest = max(grid_position(p, n_ae) for p in others)
    ceiling = _delta_ceiling(model, mod)

    def exceedance_at(delta: float) -> float:
        return exact_exceedance(_with_delta(model, mod.index, delta), mod.index)

    reachable = exceedance_at(ceiling)
    for g in range(gap, 0, -1):
        outcome = math.ceil(highest) + g
        if outcome >= 2 ** (n_ae - 1):
            continue
        target = math.sin(math.pi * outcome / 2 ** n_ae) ** 2
        if reachable < target:
            continue
        delta = brentq(lambda d: exceedance_at(d) - target, 0.0, ceiling, xtol=1e-15, maxiter=200)
        logger.info(f"Planted modification {mod.index} ({mod.describe()} -> {delta:+.6f}) "
                    f"on outcome {outcome}, P = {target:.6f}")
        return _with_delta(model, mod.index, delta), PlantedParameter(mod.index, outcome, target, delta)
    raise ModelValidationError("modification-range",
                               f"modification {mod.index} cannot rise above the other settings at n_ae={n_ae}")

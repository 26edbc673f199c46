import sys
from pathlib import Path

import numpy as np
import pytest

ROOT = Path(__file__).resolve().parent.parent
sys.path.insert(0, str(ROOT))

from risk_model import (Modification, RiskItem, RiskModel, Transition, XorGroup, chain_model,  # noqa: E402
                        load_model, validate_model)

MODELS = ROOT / "models"


@pytest.fixture
def fig1():
    return load_model(MODELS / "fig1.json")


@pytest.fixture
def fig1_path():
    return MODELS / "fig1.json"


@pytest.fixture
def chain7():
    return load_model(MODELS / "chain7.json")


@pytest.fixture(params=range(2, 8))
def chain(request):
    return chain_model(request.param)


def single_item(p: float, cost: int = 1, threshold: int = 1) -> RiskModel:
    return RiskModel((RiskItem(1, "RI1", p, cost),), threshold=threshold, name=f"single{p}")


def random_model(seed: int, n_items: int = 4) -> RiskModel:
    """Small random tree with an XOR pair on the first two items, and one modification per item."""
    rng = np.random.default_rng(seed)
    p0 = float(rng.uniform(0.1, 0.9))
    probs = [p0, 1.0 - p0] + [float(rng.uniform(0.05, 0.6)) for _ in range(n_items - 2)]
    costs = [int(c) for c in rng.integers(0, 5, size=n_items)]
    items = tuple(RiskItem(i + 1, f"RI{i + 1}", probs[i], costs[i]) for i in range(n_items))
    transitions = []
    for target in range(3, n_items + 1):
        sources = rng.choice(np.arange(2, target), size=min(2, target - 2), replace=False)
        for s in sorted(int(x) for x in sources):
            transitions.append(Transition(s, target, float(rng.uniform(0.1, 0.7))))
    mods = tuple(Modification(k + 1, item=i + 3, delta=0.05) for k, i in enumerate(range(n_items - 2)))
    threshold = int(rng.integers(0, sum(costs) + 2))
    model = RiskModel(items, tuple(transitions), (XorGroup((1, 2)),), mods, threshold, name=f"random{seed}")
    validate_model(model)
    return model

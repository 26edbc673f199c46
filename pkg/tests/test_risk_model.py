import json
import math

import pytest

import settings
from conftest import random_model, single_item
from errors import BudgetExceededError, ModelSyntaxError, ModelValidationError
from risk_model import (ScenarioDraw, apply_modification, chain_model, classical_sensitivity, exact_exceedance,
                        exceedance_estimate, exceedance_table, grid_position, loss_distribution, monte_carlo,
                        monte_carlo_loss_counts, parse_model,
                        plant_dominant_parameter, propagate, recursive_exceedance, recursive_loss_distribution,
                        scenario_count, trigger_distribution, wilson_interval)

FIG1_EXCEEDANCE = {0: 0.0513, 1: 0.07445, 2: 0.0596, 3: 0.0659, 4: 0.05904, 5: 0.06175}


def _file(**overrides):
    body = {
        "items": [{"id": 1, "p": 0.5, "cost": 1}, {"id": 2, "p": 0.5, "cost": 2}],
        "transitions": [{"from": 1, "to": 2, "p": 0.3}],
        "threshold": 2,
    }
    body.update(overrides)
    return json.dumps(body)


# --- Parsing and validation ---

def test_fig1_parses(fig1):
    assert fig1.by_id[2].intrinsic_p == 0.2
    assert fig1.transition((2, 3)).p == 0.5
    assert fig1.transition((2, 4)).p == 0.4
    assert fig1.threshold == 12
    assert fig1.total_cost == 13
    assert fig1.search_width == 3


def test_syntax_error_reports_position():
    with pytest.raises(ModelSyntaxError) as err:
        parse_model('{"items": [\n  {"id": 1,, "p": 0.5}]}')
    assert err.value.line == 2
    assert err.value.column is not None


@pytest.mark.parametrize("overrides, reason", [
    ({"transitions": [{"from": 1, "to": 2, "p": 0.3}, {"from": 2, "to": 1, "p": 0.3}]}, "cycle"),
    ({"xor_groups": [[1, 2]], "items": [{"id": 1, "p": 0.5}, {"id": 2, "p": 0.4}], "transitions": []}, "xor-sum"),
    ({"transitions": [{"from": 1, "to": 3, "p": 0.3}]}, "dangling-id"),
    ({"items": [{"id": 1, "p": 1.5}, {"id": 2, "p": 0.5}]}, "probability-range"),
    ({"items": [{"id": 1, "p": 0.5}, {"id": 1, "p": 0.5}], "transitions": []}, "duplicate-id"),
    ({"transitions": [{"from": 1, "to": 1, "p": 0.3}]}, "self-loop"),
    ({"items": [{"id": 1, "p": 0.5, "cost": -1}, {"id": 2, "p": 0.5}]}, "negative-cost"),
    ({"modifications": [{"index": 0, "target": {"item": 1}, "delta": 0.1}]}, "modification-index"),
    ({"modifications": [{"index": 1, "target": {"item": 9}, "delta": 0.1}]}, "modification-target"),
    ({"modifications": [{"index": 1, "target": {"item": 1}, "delta": 0.6}]}, "modification-range"),
    ({"threshold": -1}, "schema"),
])
def test_validation_reasons(overrides, reason):
    with pytest.raises(ModelValidationError) as err:
        parse_model(_file(**overrides))
    assert err.value.reason == reason


# --- Propagation ---

def test_worked_scenario(fig1):
    draw = ScenarioDraw({1: False, 2: True, 3: False, 4: False}, {(2, 3): False, (2, 4): True})
    triggered, loss = propagate(fig1, draw)
    assert triggered == {2, 4}
    assert loss == 9


def test_everything_fired(fig1):
    draw = ScenarioDraw({1: False, 2: True, 3: True, 4: True}, {(2, 3): True, (2, 4): True})
    _, loss = propagate(fig1, draw)
    assert loss == 13


def test_only_xor_member_fires(fig1):
    draw = ScenarioDraw({1: True, 2: False, 3: False, 4: False})
    triggered, loss = propagate(fig1, draw)
    assert triggered == {1}
    assert loss == 0


def test_draw_must_pick_one_xor_member(fig1):
    with pytest.raises(ValueError):
        propagate(fig1, ScenarioDraw({1: True, 2: True, 3: False, 4: False}))


# --- Exact evaluation ---

@pytest.mark.parametrize("index, expected", FIG1_EXCEEDANCE.items())
def test_fig1_exceedance(fig1, index, expected):
    assert exact_exceedance(fig1, index) == pytest.approx(expected, abs=1e-12)


def test_unused_register_settings_mean_no_modification(fig1):
    assert exact_exceedance(fig1, 6) == pytest.approx(exact_exceedance(fig1, 0))
    assert exact_exceedance(fig1, 7) == pytest.approx(exact_exceedance(fig1, 0))


def test_crisis_modification_shifts_xor_pair(fig1):
    crisis = apply_modification(fig1, 1)
    assert crisis.by_id[1].intrinsic_p == pytest.approx(0.7)
    assert crisis.by_id[2].intrinsic_p == pytest.approx(0.3)


def test_zero_threshold_always_breached(fig1):
    model = parse_model(_file(threshold=0))
    assert exact_exceedance(model) == pytest.approx(1.0)


def test_loss_distribution_sums_to_one(fig1):
    dist = loss_distribution(fig1)
    assert dist.sum() == pytest.approx(1.0)
    assert dist[12:].sum() == pytest.approx(0.0513)


def test_trigger_distribution_sums_to_one(fig1):
    dist = trigger_distribution(fig1)
    assert dist.sum() == pytest.approx(1.0)
    # RI1 and RI2 never fire together
    assert dist[0b11::4].sum() == pytest.approx(0.0, abs=1e-15)


def test_exceedance_table_lists_every_setting(fig1):
    assert set(exceedance_table(fig1)) == {0, 1, 2, 3, 4, 5}


@pytest.mark.parametrize("seed", range(8))
def test_recursive_evaluator_agrees(seed):
    model = random_model(seed)
    for index in (0, 1, 2):
        enumerated = loss_distribution(model, index)
        recursive = recursive_loss_distribution(model, index)
        for loss, p in recursive.items():
            assert enumerated[loss] == pytest.approx(p, abs=1e-12)
        assert recursive_exceedance(model, index) == pytest.approx(exact_exceedance(model, index), abs=1e-12)


@pytest.mark.parametrize("seed", range(6))
def test_raising_probabilities_never_lowers_exceedance(seed):
    model = random_model(seed)
    for index in (1, 2):
        assert exact_exceedance(model, index) >= exact_exceedance(model, 0) - 1e-12


def test_enumeration_guard(monkeypatch, chain7):
    monkeypatch.setattr(settings, "ENUMERATION_LIMIT", 16)
    assert scenario_count(chain7) > 16
    with pytest.raises(BudgetExceededError):
        exact_exceedance(chain7)


# --- Monte Carlo ---

def test_monte_carlo_matches_exact(fig1):
    estimate, stderr = monte_carlo(fig1, 0, 1_000_000, seed=7)
    assert abs(estimate - 0.0513) <= 4 * stderr


def test_monte_carlo_converges_over_seeds(fig1):
    misses = 0
    for seed in range(50):
        estimate, stderr = monte_carlo(fig1, 1, 20_000, seed=seed)
        misses += abs(estimate - 0.07445) > 4 * stderr
    assert misses == 0


def test_monte_carlo_single_shot(fig1):
    estimate, _ = monte_carlo(fig1, 0, 1, seed=3)
    assert estimate in (0.0, 1.0)


def test_monte_carlo_is_deterministic(fig1):
    assert monte_carlo(fig1, 2, 100_000, seed=11) == monte_carlo(fig1, 2, 100_000, seed=11)


def test_monte_carlo_independent_of_workers(fig1, monkeypatch):
    monkeypatch.setattr(settings, "MC_SHARD_SIZE", 1000)
    monkeypatch.setattr(settings, "WORKERS", 1)
    serial = monte_carlo(fig1, 0, 25_000, seed=5)
    monkeypatch.setattr(settings, "WORKERS", 6)
    assert monte_carlo(fig1, 0, 25_000, seed=5) == serial


def test_monte_carlo_rejects_zero_shots(fig1):
    with pytest.raises(ValueError):
        monte_carlo(fig1, 0, 0, seed=1)


def test_monte_carlo_loss_counts_never_enumerate(fig1, monkeypatch):
    monkeypatch.setattr(settings, "ENUMERATION_LIMIT", 16)
    counts = monte_carlo_loss_counts(fig1, 1, 50_000, seed=4)
    assert len(counts) == fig1.total_cost + 1
    assert counts.sum() == 50_000
    assert exceedance_estimate(counts, fig1.threshold) == monte_carlo(fig1, 1, 50_000, seed=4)
    with pytest.raises(BudgetExceededError):
        loss_distribution(fig1, 1)


# --- Classical sensitivity ---

def test_wilson_interval_contains_estimate():
    low, high = wilson_interval(30, 1000, 0.95)
    assert low < 0.03 < high


def test_classical_sensitivity_finds_crisis(fig1):
    result = classical_sensitivity(fig1, 0.0775, 0.004, confidence=0.70, seed=1)
    assert result.found_index == 1
    assert result.model_evaluations > 0
    assert result.model_evaluations % len(fig1.modifications) == 0


def test_classical_sensitivity_unreachable_target(fig1):
    result = classical_sensitivity(fig1, 0.5, 0.01, seed=1)
    assert result.found_index is None


def test_classical_sensitivity_needs_modifications():
    with pytest.raises(ModelValidationError):
        classical_sensitivity(single_item(0.3), 0.3, 0.01)


# --- Chain family and planting ---

def test_chain_search_widths():
    widths = [chain_model(n).search_width for n in range(2, 8)]
    assert widths == [2, 3, 3, 4, 4, 4]


def test_chain7_file_matches_generator(chain7):
    generated = chain_model(7)
    assert exact_exceedance(chain7) == pytest.approx(exact_exceedance(generated), abs=1e-15)
    assert len(chain7.modifications) == len(generated.modifications) == 13


def test_chain_sizes_out_of_range():
    with pytest.raises(ValueError):
        chain_model(1)
    with pytest.raises(ValueError):
        chain_model(8)


def test_planted_parameter_dominates(chain):
    n_ae = 6
    planted_model, planted = plant_dominant_parameter(chain, n_ae)
    p = exact_exceedance(planted_model, planted.index)
    assert p == pytest.approx(math.sin(math.pi * planted.outcome / 2 ** n_ae) ** 2, abs=1e-9)
    others = [exact_exceedance(planted_model, 0)] + [exact_exceedance(planted_model, m.index)
                                                     for m in planted_model.modifications
                                                     if m.index != planted.index]
    assert max(grid_position(q, n_ae) for q in others) <= planted.outcome - 1


def test_planting_needs_modifications():
    with pytest.raises(ModelValidationError):
        plant_dominant_parameter(single_item(0.4), 6)

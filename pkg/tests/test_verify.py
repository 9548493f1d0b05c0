import json
import math

import numpy as np
import pytest

from qtrunc.propagate import ControlField, basis_state
from qtrunc.verify import (
    check_appendix_bound,
    check_duhamel,
    check_gronwall,
    random_field,
    resonant_field,
    run_suite,
    scale_to_budget,
)


def test_random_field_is_seeded_and_scaled():
    a, b = random_field(4, 2.5, math.pi, 100), random_field(4, 2.5, math.pi, 100)
    np.testing.assert_array_equal(a.samples, b.samples)
    assert a.K == pytest.approx(2.5)
    assert resonant_field_K() == pytest.approx(1.5)


def resonant_field_K():
    from qtrunc.system import builtin_rotor

    return resonant_field(builtin_rotor(), 1, 1.5, math.pi, 100).K


def test_scale_to_budget_zero_field():
    z = np.zeros(5)
    assert np.all(scale_to_budget(z, 0.1, 3.0) == 0)


def test_gronwall_holds(rotor):
    f = random_field(1, 3.0, math.pi, 300)
    rep = check_gronwall(rotor, f, 20, basis_state(rotor, 20, 1))
    assert rep.passed and rep.margin >= 0 and rep.measured <= rep.bound * (1 + 1e-8)


def test_appendix_bound_holds(rotor):
    f = resonant_field(rotor, 1, 3.0, math.pi, 300)
    rep = check_appendix_bound(rotor, f, 20, basis_state(rotor, 20, 1))
    assert rep.passed
    assert max(rep.details["saturation"]) <= 1 + 1e-9


def test_duhamel_holds(rotor):
    f = random_field(2, 3.0, math.pi, 300)
    rep = check_duhamel(rotor, f, 10, basis_state(rotor, 10, 1))
    assert rep.passed and rep.measured <= rep.bound
    assert rep.details["truth_N"] == 20


def test_report_json_is_sorted(rotor):
    f = ControlField.constant(0.2, 1.0, 10)
    doc = check_gronwall(rotor, f, 4, basis_state(rotor, 4, 1)).to_json()
    keys = list(json.loads(doc))
    assert keys == sorted(keys)


def test_small_suite_passes_and_is_sorted():
    cfg = {"seeds": [0, 1], "K_values": [1.0], "steps": 100, "systems": [{"system": "rotor", "N": 10, "checks": ["gronwall", "norm"]}]}
    reports = run_suite(cfg)
    assert len(reports) == 4 and all(r.passed for r in reports)
    assert [r.check for r in reports] == sorted(r.check for r in reports)


def test_understated_certificate_is_caught():
    cfg = {
        "seeds": [],
        "K_values": [3.0],
        "steps": 300,
        "resonant": True,
        "certificate_overrides": {"rotor": {"C": 0.1}},
        "systems": [{"system": "rotor", "N": 20, "checks": ["gronwall"]}],
    }
    assert not run_suite(cfg)[0].passed

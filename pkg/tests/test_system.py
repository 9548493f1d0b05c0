import json
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from qtrunc.errors import CertificateViolation, DegenerateSpectrum, NonTridiagonal, SchemaError
from qtrunc.system import (
    builtin_rotor,
    check_certificate,
    growth_constant,
    growth_ratios,
    load_system,
    resolve_system,
    system_to_dict,
)


def rotor_doc(**cert):
    doc = {
        "name": "rotor",
        "spectrum": {"kind": "rotor", "first_index": 1},
        "coupling": {"kind": "tridiagonal", "super": "closed:rotor"},
        "certificate": {"k": 1, "C": 1.5, "d": 1.0, "verified_up_to": 1000},
    }
    doc["certificate"].update(cert)
    return doc


def test_rotor_builtin(rotor):
    assert rotor.first_index == 1
    assert rotor.energies(3).tolist() == [1.0, 4.0, 9.0]
    assert np.all(rotor.superdiagonal(5) == 0.5)
    cert = rotor.certificate
    assert (cert.k, cert.C, cert.d) == (1, 1.5, 1.0)


def test_oscillator_builtin(oscillator):
    assert oscillator.energies(2).tolist() == [0.5, 1.5]
    b = oscillator.superdiagonal(6)
    assert b[0] == 0.0  # b_{1,0} = sqrt(0)
    assert b[4] == 2.0  # b_{5,4} = sqrt(4)
    assert (oscillator.certificate.k, oscillator.certificate.C) == (2, 8.0)


def test_h1_matrix_is_symmetric_tridiagonal(rotor, oscillator):
    for system in (rotor, oscillator):
        h1 = system.h1(7)
        assert np.array_equal(h1, h1.T)
        assert np.all(np.diag(h1) == 0)
        assert np.count_nonzero(np.triu(h1, 2)) == 0


def test_rotor_growth_at_first_level(rotor):
    # (1/2)(4 - 1) / 1
    assert growth_ratios(rotor, 1, 2)[0] == pytest.approx(1.5)


def test_rotor_growth_constant_matches_brute_force(rotor):
    brute = max(Fraction(1, 2) * ((j + 1) ** 2 - j**2) / j**2 for j in range(1, 1000))
    assert brute == Fraction(3, 2)
    assert growth_constant(rotor, 1, 1000) == pytest.approx(float(brute), rel=1e-15)


def test_rotor_growth_closed_form(rotor):
    j = np.arange(1, 1000)
    np.testing.assert_allclose(growth_ratios(rotor, 1, 1000), (2 * j + 1) / (2 * j**2), rtol=1e-14)
    assert np.argmax(growth_ratios(rotor, 1, 1000)) == 0


def test_oscillator_growth_constant_below_certificate(oscillator):
    n = np.arange(0, 999)
    brute = max(np.sqrt(n) * ((n + 1.5) ** 2 - (n + 0.5) ** 2) / (n + 0.5) ** 2)
    c = growth_constant(oscillator, 2, 1000)
    assert c == pytest.approx(brute)
    assert c <= 8


def test_zero_coupling_growth_is_zero():
    doc = {
        "spectrum": {"kind": "table", "energies": [1, 2, 3, 4, 5, 6, 7, 8, 9, 10]},
        "coupling": {"kind": "tridiagonal", "super": [0.0] * 9},
        "certificate": {"k": 1, "C": 1.0, "d": 1.0, "verified_up_to": 10},
    }
    assert growth_constant(load_system(doc), 1, 10) == 0.0


def test_zero_energy_is_degenerate():
    doc = {
        "spectrum": {"kind": "table", "energies": [0, 1, 4]},
        "coupling": {"kind": "tridiagonal", "super": [0.5, 0.5]},
        "certificate": {"k": 1, "C": 10.0, "d": 1.0, "verified_up_to": 3},
    }
    with pytest.raises(DegenerateSpectrum):
        load_system(doc)


def test_banded_coupling_is_not_tridiagonal():
    doc = {
        "spectrum": {"kind": "table", "energies": [1, 2, 3, 4]},
        "coupling": {"kind": "banded", "diagonals": [[0.1, 0.1, 0.1], [0.05, 0.05]]},
        "certificate": {"k": 1, "C": 1.0, "d": 1.0, "verified_up_to": 4},
    }
    system = load_system(doc)
    assert system.h1(4)[2, 0] == 0.05
    with pytest.raises(NonTridiagonal):
        growth_constant(system, 1, 4)


def test_load_rotor_round_trip():
    assert load_system(rotor_doc()) == builtin_rotor()
    assert load_system(json.dumps(system_to_dict(builtin_rotor()))) == builtin_rotor()


def test_load_from_file(tmp_path):
    path = tmp_path / "rotor.json"
    path.write_text(json.dumps(rotor_doc()))
    assert resolve_system(str(path)) == builtin_rotor()
    assert resolve_system("oscillator").name == "oscillator"


def test_decreasing_energies_rejected():
    doc = {
        "spectrum": {"kind": "table", "energies": [1, 4, 3]},
        "coupling": {"kind": "tridiagonal", "super": [0.5, 0.5]},
        "certificate": {"k": 1, "C": 5.0, "d": 1.0, "verified_up_to": 3},
    }
    with pytest.raises(SchemaError):
        load_system(doc)


def test_understated_growth_constant_rejected():
    with pytest.raises(CertificateViolation) as info:
        load_system(rotor_doc(C=1.0))
    assert info.value.level == 1


def test_understated_domination_rejected():
    with pytest.raises(CertificateViolation):
        load_system(rotor_doc(d=0.5))


@pytest.mark.parametrize(
    "mutate",
    [
        lambda d: d.pop("certificate"),
        lambda d: d["spectrum"].update(kind="sphere"),
        lambda d: d["coupling"].update(super="closed:morse"),
        lambda d: d["certificate"].update(k="one"),
        lambda d: d["spectrum"].update(first_index=0),
    ],
)
def test_schema_errors(mutate):
    doc = rotor_doc()
    mutate(doc)
    with pytest.raises(SchemaError):
        load_system(doc)


def test_builtin_certificates_hold(rotor, oscillator):
    check_certificate(rotor)
    check_certificate(oscillator)


@given(st.lists(st.floats(min_value=0.01, max_value=1e3), min_size=3, max_size=30))
def test_tabulated_spectra_are_monotone_or_rejected(energies):
    doc = {
        "spectrum": {"kind": "table", "energies": energies},
        "coupling": {"kind": "tridiagonal", "super": [0.0] * (len(energies) - 1)},
        "certificate": {"k": 1, "C": 1.0, "d": 1.0, "verified_up_to": len(energies)},
    }
    if all(a <= b for a, b in zip(energies, energies[1:])):
        e = load_system(doc).energies(len(energies))
        assert np.all(np.diff(e) >= 0)
    else:
        with pytest.raises(SchemaError):
            load_system(doc)


@given(st.floats(min_value=0, max_value=1e12))
def test_index_above_is_exact(threshold):
    rotor = builtin_rotor()
    j = rotor.spectrum.index_above(threshold)
    assert j * j > threshold
    assert j == 1 or (j - 1) ** 2 <= threshold

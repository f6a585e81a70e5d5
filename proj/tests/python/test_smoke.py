import math

import numpy as np
import pytest

import siwforge as sf


def test_equivalent_width_and_cutoff():
    x = sf.reference_cross_section()
    g = sf.equivalent_width(x)
    assert g.w_eq == pytest.approx(10.7368e-3, abs=1e-7)
    assert sf.cutoff_frequency(g, 1) == pytest.approx(9.41e9, abs=0.02e9)
    back = sf.siw_width_from_equivalent(g, x.via_diameter, x.pitch)
    assert back.w_siw == pytest.approx(x.w_siw, rel=1e-12)


def test_synthesis_and_errors():
    sub = sf.Substrate(2.2, 0.8e-3)
    x = sf.synthesize_rsiw(sf.Band(10e9, 15e9), sub, 0.5e-3, 1e-3)
    assert x.w_siw == pytest.approx(11e-3, abs=0.01e-3)
    with pytest.raises(sf.BandTooWideError):
        sf.synthesize_rsiw(sf.Band(10e9, 20e9), sub, 0.5e-3, 1e-3)
    with pytest.raises(sf.PhysicsError):
        sf.synthesize_rsiw(sf.Band(10e9, 20e9), sub, 0.5e-3, 1e-3)
    with pytest.raises(sf.DomainError):
        sf.RsiwCrossSection(11e-3, 1e-3, 0.5e-3, sub)


def test_ideal_matrices():
    s = np.asarray(sf.ideal_circulator_matrix(0.0))
    assert np.abs(s @ s.conj().T - np.eye(3)).max() < 1e-14
    assert np.abs(s - s.T).max() > 0.5
    c = np.asarray(sf.ideal_coupler_matrix())
    assert np.abs(c @ c.conj().T - np.eye(4)).max() < 1e-14
    assert sf.ferrite_radius(12.5e9, 13.7) == pytest.approx(1.897e-3, abs=0.01e-3)


def test_blueprint_json_round_trip():
    bp = sf.fixture("divider")
    assert bp.kind == "divider"
    assert bp.port_count == 3
    doc = bp.to_json()
    back = sf.DeviceBlueprint.from_json(doc)
    assert back.via_count == bp.via_count
    assert back.hash() == bp.hash()
    with pytest.raises(sf.ParseError):
        sf.DeviceBlueprint.from_json("{")


def test_straight_guide_solve():
    r = sf.solve(sf.fixture("straight"), 12e9)
    s11, s21 = r["s_column"]
    assert 20 * math.log10(abs(s21)) > -0.05
    assert 20 * math.log10(abs(s11)) < -30
    assert r["ez"].ndim == 2
    assert r["cell_size"] == pytest.approx(0.125e-3)


def test_sweep_and_touchstone():
    out = sf.sweep(sf.fixture("straight"), 11e9, 13e9, 2, threads=1)
    s = out["s"]
    assert s.shape == (2, 2, 2)
    assert np.abs(s - s.transpose(0, 2, 1)).max() < 0.02
    text = sf.write_touchstone(out["frequencies"], s, "MA", "GHz")
    back = sf.read_touchstone(text, 2)
    assert np.abs(back["s"] - s).max() < 1e-9
    with pytest.raises(sf.ModeCutoffError):
        sf.sweep(sf.fixture("straight"), 8e9, 9e9, 2)
    with pytest.raises(sf.UnsupportedPhysicsError):
        sf.sweep(sf.fixture("circulator"), 11e9, 13e9, 2)

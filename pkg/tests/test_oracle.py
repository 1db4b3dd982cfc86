import json
import math

import numpy as np
import pytest

from qcomb.oracle import (MAX_ORACLE_HALF_WIDTH, coincidence_lines, cross_validate,
                          monte_carlo_statistics, oracle_variance, random_config)
from qcomb.receivers import PROTOCOLS, Protocol
from qcomb.sample import SampleSpec


def _cfg(seed=0, n_half=3, complex_amplitudes=True):
    return random_config(np.random.default_rng(seed), n_half=n_half,
                         complex_amplitudes=complex_amplitudes)


def test_random_config_ranges():
    rng = np.random.default_rng(1)
    for _ in range(20):
        cfg = random_config(rng, max_n_half=8)
        assert 1 <= cfg.n_half <= 8
        assert np.all((cfg.gains_a >= 1) & (cfg.gains_a <= 40))
        assert np.array_equal(cfg.gains_a, cfg.gains_a[::-1])
        assert np.all(np.abs(cfg.sample.theta) <= 0.3)
        assert np.all(cfg.sample.thermal <= 0.1)


def test_real_amplitudes_and_classical():
    cfg = _cfg()
    real = cfg.real_amplitudes()
    assert np.all(real.comb_a.line_amplitudes.imag == 0)
    assert np.allclose(np.abs(real.comb_a.line_amplitudes), np.abs(cfg.comb_a.line_amplitudes))
    assert np.all(cfg.classical().gains_b == 1.0)


def test_heterodyne_cross_validation_passes():
    cfg = _cfg(3)
    het = [p for p in PROTOCOLS if p.name.startswith("het")]
    report = cross_validate(cfg.real_amplitudes(), protocols=het)
    assert report.passed
    assert report.max_relative_deviation <= 1e-9
    assert len(report.entries) == 2 * 2 * cfg.n_half


def test_complex_amplitudes_skip_intra_closed_form():
    report = cross_validate(_cfg(4), protocols=[Protocol.parse("het-intra")])
    assert all(e.closed_form is None and e.passed for e in report.entries)


def test_negative_control_fails():
    cfg = _cfg(5).real_amplitudes()
    het = [p for p in PROTOCOLS if p.name.startswith("het")]
    report = cross_validate(cfg, protocols=het, negative_control=True)
    assert not report.passed
    assert report.max_relative_deviation > 1e-3


def test_division_failures_are_annotated():
    cfg = _cfg(6).real_amplitudes()
    report = cross_validate(cfg, protocols=[Protocol.parse("div-cross")])
    for entry in report.failures():
        assert "coincidence" in entry.note


def test_coincidence_lines():
    het = Protocol.parse("het-cross")
    assert coincidence_lines(het, 5, 2) == ()
    assert coincidence_lines(Protocol.parse("div-cross"), 5, 2) == (-4, 0, 4)
    assert coincidence_lines(Protocol.parse("div-intra"), 5, 2) == (-4, -2, 0, 2, 4)
    assert coincidence_lines(Protocol.parse("div-cross"), 5, 3) == (0,)


def test_report_json_round_trip():
    report = cross_validate(_cfg(7, n_half=2), protocols=PROTOCOLS[:2])
    data = json.loads(report.to_json())
    assert list(data) == ["label", "tolerance_rel", "mc_sigma_limit", "mc_samples", "passed",
                          "max_relative_deviation", "entries"]
    assert len(data["entries"]) == len(report.entries)


def test_half_width_limit():
    cfg = random_config(np.random.default_rng(0), n_half=MAX_ORACLE_HALF_WIDTH + 1)
    with pytest.raises(ValueError):
        cross_validate(cfg)


def test_monte_carlo_reproducible_and_job_independent():
    cfg = _cfg(8).real_amplitudes()
    p = Protocol.parse("div-intra")
    sqz = cfg.squeezing(p.structure)
    args = (p.receiver, cfg.comb_a, cfg.comb_b, *sqz, cfg.sample, 1, 25_000, 42)
    one = monte_carlo_statistics(*args)
    two = monte_carlo_statistics(*args, jobs=3)
    assert one.variance == two.variance and one.mean == two.mean
    assert monte_carlo_statistics(*args[:-1], 43).variance != one.variance


@pytest.mark.parametrize("protocol", PROTOCOLS, ids=lambda p: p.name)
def test_monte_carlo_agrees_with_quadratic_form(protocol):
    cfg = _cfg(9)
    if not protocol.cross_line:
        cfg = cfg.real_amplitudes()
    sqz = cfg.squeezing(protocol.structure)
    quad = oracle_variance(protocol.receiver, cfg.comb_a, cfg.comb_b, *sqz, cfg.sample, -2)
    mc = monte_carlo_statistics(protocol.receiver, cfg.comb_a, cfg.comb_b, *sqz, cfg.sample, -2,
                                50_000, 1)
    assert abs(mc.variance - quad) <= 4 * mc.stderr


def test_quadratic_form_lossless_classical_division():
    # vacuum everywhere: the ratio variance is positive and finite
    cfg = _cfg(10, complex_amplitudes=False).classical()
    cfg = type(cfg)(cfg.comb_a, cfg.comb_b, SampleSpec.transparent(cfg.n_half), cfg.gains_a,
                    cfg.gains_b)
    sqz = cfg.squeezing("classical")
    var = oracle_variance("division", cfg.comb_a, cfg.comb_b, *sqz, cfg.sample, 1)
    assert math.isfinite(var) and var > 0

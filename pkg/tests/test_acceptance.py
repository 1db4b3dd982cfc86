"""The ten acceptance criteria, each at its stated tolerance.

Every test records a one-line PASS/FAIL verdict (see conftest.py), so the
pytest terminal summary ends with one line per criterion.  Running this file
directly prints the same lines without pytest.
"""

import math
import time

import numpy as np
import pytest

from qcomb.comb import ConstraintKind, PowerConstraint, carrier_from_wavelength
from qcomb.oracle import monte_carlo_statistics, oracle_variance, random_config
from qcomb.receivers import PROTOCOLS, Protocol, closed_form_terms
from qcomb.snr import (ProtocolParams, asymptotic_snr, constrained_optimal_snr,
                       conversion_coefficient, global_snr, local_snr, optimize_power_split,
                       phase_noise_snr, single_line_statistics, snr_c_star2)
from qcomb.squeezing import db_to_gain

M = 1001
POWER = 0.015
DURATION = 1.0
CARRIER = carrier_from_wavelength(1563e-9)
G15 = float(db_to_gain(15.0))
SAMPLE = PowerConstraint(ConstraintKind.SAMPLE, POWER)
DETECTOR = PowerConstraint(ConstraintKind.DETECTOR, POWER)


def _report(protocol, constraint, gain, kappa, **kw):
    return constrained_optimal_snr(Protocol.parse(protocol), constraint, gain, kappa, M, DURATION,
                                   CARRIER, **kw)


def _oracle_configs(count, seed):
    rng = np.random.default_rng(seed)
    return [random_config(rng, max_n_half=8, max_gain=40.0, max_phase=0.3, max_thermal=0.1,
                          label=f"random-{i}") for i in range(count)]


def _for_protocol(config, protocol):
    # the intra-line closed forms are stated for real amplitudes only
    return config if protocol.cross_line else config.real_amplitudes()


def test_criterion_01_oracle_equivalence(verdict):
    start = time.perf_counter()
    worst = {p.name: 0.0 for p in PROTOCOLS}
    checked = 0
    for config in _oracle_configs(200, seed=2024):
        for protocol in PROTOCOLS:
            cfg = _for_protocol(config, protocol)
            sqz_a, sqz_b = cfg.squeezing(protocol.structure)
            for m in range(1, cfg.n_half + 1):
                for beat in (m, -m):
                    terms, scale = closed_form_terms(protocol.receiver, protocol.structure,
                                                     cfg.comb_a, cfg.comb_b, sqz_a, sqz_b,
                                                     cfg.sample, beat)
                    closed = float(np.sum(terms) / scale)
                    quad = oracle_variance(protocol.receiver, cfg.comb_a, cfg.comb_b, sqz_a,
                                           sqz_b, cfg.sample, beat)
                    dev = abs(closed - quad) / max(abs(closed), abs(quad))
                    worst[protocol.name] = max(worst[protocol.name], dev)
                    checked += 1
    elapsed = time.perf_counter() - start
    ok = max(worst.values()) <= 1e-9 and elapsed <= 60.0
    detail = ", ".join(f"{k} {v:.1e}" for k, v in worst.items())
    verdict(1, ok, f"max rel. deviation over {checked} comparisons: {detail}; {elapsed:.1f} s")
    assert elapsed <= 60.0
    assert max(worst.values()) <= 1e-9, worst


def test_criterion_02_monte_carlo(verdict):
    start = time.perf_counter()
    worst, failures = 0.0, 0
    rng = np.random.default_rng(7)
    configs = _oracle_configs(200, seed=2024)[:20]
    for i, config in enumerate(configs):
        for p_index, protocol in enumerate(PROTOCOLS):
            cfg = _for_protocol(config, protocol)
            sqz_a, sqz_b = cfg.squeezing(protocol.structure)
            m = int(rng.integers(1, cfg.n_half + 1)) * int(rng.choice([-1, 1]))
            quad = oracle_variance(protocol.receiver, cfg.comb_a, cfg.comb_b, sqz_a, sqz_b,
                                   cfg.sample, m)
            mc = monte_carlo_statistics(protocol.receiver, cfg.comb_a, cfg.comb_b, sqz_a, sqz_b,
                                        cfg.sample, m, 100_000, [i, p_index])
            sigmas = abs(mc.variance - quad) / mc.stderr
            worst = max(worst, sigmas)
            failures += sigmas > 4.0
    cfg = _for_protocol(configs[0], PROTOCOLS[0])
    sqz = cfg.squeezing(PROTOCOLS[0].structure)
    runs = [monte_carlo_statistics(PROTOCOLS[0].receiver, cfg.comb_a, cfg.comb_b, *sqz, cfg.sample,
                                   1, 100_000, 99) for _ in range(2)]
    reproducible = runs[0].variance == runs[1].variance and runs[0].mean == runs[1].mean
    elapsed = time.perf_counter() - start
    ok = failures == 0 and reproducible and elapsed <= 120.0
    verdict(2, ok, f"80 MC runs at K=1e5: max deviation {worst:.2f} SE, {failures} beyond 4 SE; "
                   f"fixed-seed rerun identical: {reproducible}; {elapsed:.1f} s")
    assert failures == 0 and reproducible and elapsed <= 120.0


def test_criterion_03_fifteen_db(verdict):
    advantages = {}
    for constraint in (SAMPLE, DETECTOR):
        for protocol in PROTOCOLS:
            rep = _report(protocol.name, constraint, G15, 1.0)
            advantages[(protocol.name, constraint.kind.value)] = rep.advantage_db
    worst = max(abs(v - 15.0) for v in advantages.values())
    ok = worst <= 0.05
    verdict(3, ok, f"advantage at kappa=1, G=15 dB: max |adv - 15| = {worst:.4f} dB "
                   f"over 4 protocols x 2 constraints")
    assert ok, advantages


def test_criterion_04_factor_two(verdict):
    het = _report("het-intra", SAMPLE, 1.0, 1.0)
    div = _report("div-intra", SAMPLE, 1.0, 1.0)
    ratio = div.local_snr2 / het.local_snr2
    ok = abs(ratio - 0.5) <= 1e-3
    verdict(4, ok, f"classical SNR^2 division / heterodyne = {ratio:.6f}")
    assert ok


def test_criterion_05_global_gap(verdict):
    gaps = {}
    for constraint, target in ((SAMPLE, 10 * math.log10(5)), (DETECTOR, 10 * math.log10(2.5))):
        het = _report("het-intra", constraint, 1.0, 0.0, objective="global")
        div = _report("div-intra", constraint, 1.0, 0.0, objective="global")
        gaps[constraint.kind.value] = (10 * math.log10(het.global_snr2 / div.global_snr2), target)
    ok = all(abs(g - t) <= 0.1 for g, t in gaps.values())
    text = ", ".join(f"{k} {g:.3f} dB (target {t:.3f})" for k, (g, t) in gaps.items())
    verdict(5, ok, f"classical global-SNR gap at kappa=0: {text}")
    assert ok


def test_criterion_06_loss_robustness(verdict):
    start = time.perf_counter()
    drops = {}
    for protocol in PROTOCOLS:
        adv = [_report(protocol.name, SAMPLE, G15, k, split=0.5, lo="matched").advantage_db
               for k in (1.0, 0.0)]
        drops[protocol.name] = adv[0] - adv[1]
    elapsed = time.perf_counter() - start
    robust = [p for p in drops if p != "div-intra"]
    ok = drops["div-intra"] > 10.0 and all(abs(drops[p]) <= 1.5 for p in robust) and elapsed <= 5
    text = ", ".join(f"{k} {v:.3f} dB" for k, v in drops.items())
    verdict(6, ok, f"advantage drop kappa=1 -> 0: {text} (need div-intra > 10, others <= 1.5); "
                   f"{elapsed:.1f} s")
    assert drops["div-intra"] > 10.0
    assert all(abs(drops[p]) <= 1.5 for p in robust), drops


def test_criterion_07_classical_scale(verdict):
    value = snr_c_star2(POWER, DURATION, M, CARRIER)
    ok = abs(value / 1.18e11 - 1.0) <= 0.01
    verdict(7, ok, f"optimal classical SNR^2 scale = {value:.5e}")
    assert ok


def test_criterion_08_phase_noise(verdict):
    worst = 0.0
    for g_a, g_b in ((G15, G15), (3.0, 20.0), (1.0, 40.0)):
        base = ProtocolParams(M, 2.0e8, 5.0e8, g_a, g_b)
        het = Protocol.parse("het-intra")
        at_zero = phase_noise_snr(ProtocolParams(M, 2.0e8, 5.0e8, g_a, g_b, delta=0.0))
        worst = max(worst, abs(at_zero / asymptotic_snr(het, base) - 1.0))
        # a quarter-turn swaps the squeezed and anti-squeezed quadratures: 1/G -> G
        flipped = 1.0 / (M * g_b / 5.0e8 + M * g_a / 2.0e8)
        at_quarter = phase_noise_snr(ProtocolParams(M, 2.0e8, 5.0e8, g_a, g_b, delta=math.pi / 2))
        worst = max(worst, abs(at_quarter / flipped - 1.0))
    ok = worst <= 1e-12
    verdict(8, ok, f"phase-noise form vs kernel substitution: max rel. deviation {worst:.1e}")
    assert ok


def test_criterion_09_local_global_bridge(verdict):
    worst = 0.0
    for name in ("het-intra", "div-intra", "het-cross", "div-cross"):
        protocol = Protocol.parse(name)
        for kappa in np.round(np.arange(0.1, 1.0, 0.1), 10):
            stats, ref = single_line_statistics(protocol, M, 3.0e8, 3.0e8, G15, G15, kappa)
            loc, glo = local_snr(stats), global_snr(stats, ref)
            expected = conversion_coefficient(protocol.receiver, kappa) * loc
            worst = max(worst, abs(glo - expected) / expected)
    ok = worst <= 1e-10
    verdict(9, ok, f"global = c(kappa) x local over kappa 0.1..0.9: max rel. error {worst:.1e}")
    assert ok


def test_criterion_10_optimizer(verdict):
    cases = []
    for gain in (1.0, G15):
        for kappa in (0.1, 0.5, 1.0):
            for name, constraint in (("div-intra", SAMPLE), ("div-intra", DETECTOR),
                                     ("div-cross", SAMPLE), ("div-cross", DETECTOR),
                                     ("het-intra", DETECTOR), ("het-cross", DETECTOR)):
                f, _, _ = optimize_power_split(Protocol.parse(name), constraint, gain, gain, kappa,
                                               M, DURATION, CARRIER)
                cases.append((name, constraint.kind.value, gain, kappa, f))
    bad = [c for c in cases if abs(c[4] - 0.5) > 1e-3]
    worst = max(cases, key=lambda c: abs(c[4] - 0.5))
    ok = not bad
    detail = (f"{len(cases)} cases, {len(bad)} with |f* - 0.5| > 1e-3; worst {worst[0]} "
              f"{worst[1]} G={10 * math.log10(worst[2]):.0f} dB kappa={worst[3]}: f*={worst[4]:.5f}")
    verdict(10, ok, detail)
    assert ok, bad


if __name__ == "__main__":
    import sys

    sys.exit(pytest.main([__file__, "-q", "-s"]))

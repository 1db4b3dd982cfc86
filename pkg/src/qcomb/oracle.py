"""Independent checks of the closed-form variances.

Two paths are provided.  The quadratic form contracts the coefficient
vectors of :mod:`qcomb.receivers` with the full lattice covariance.  The
Monte-Carlo path does not reuse those vectors: it rebuilds the detector
fields from the beam-splitter and channel transfer of each topology, beats
every mean line against the sampled noise, and forms the estimator from the
two simulated detector currents.
"""

from __future__ import annotations

import json
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field, replace

import numpy as np
from scipy import linalg

from .comb import Block, CombSpec, build_mode_lattice
from .receivers import (
    PROTOCOLS,
    NoClosedFormError,
    Protocol,
    ReceiverKind,
    closed_form_terms,
    noise_coefficients,
)
from .sample import SampleSpec
from .squeezing import SqueezingSpec, Structure, build_covariance

MAX_ORACLE_HALF_WIDTH = 12
JITTER_CEILING = 1e-12
SHARD_SIZE = 10_000


class FactorizationError(RuntimeError):
    pass


def variance_quadratic_form(coeffs, cov):
    """Estimator variance w^T Sigma w, real and imaginary parts summed."""
    w = coeffs.quadrature_weights()
    if w.size != cov.dimension:
        raise ValueError(f"coefficient dimension {w.size} does not match covariance {cov.dimension}")
    total = 0.0
    for part in (w.real, w.imag):
        total += float(part @ (cov.matrix @ part))
    return total / coeffs.scale


def oracle_variance(receiver, comb_a, comb_b, sqz_a, sqz_b, sample, m, strong_lo=False, lines=None):
    lattice = build_mode_lattice(comb_a.n_half)
    cov = build_covariance(lattice, sqz_a, sqz_b, sample)
    coeffs = noise_coefficients(receiver, comb_a, comb_b, sample, m, strong_lo=strong_lo,
                                lattice=lattice, lines=lines)
    return variance_quadratic_form(coeffs, cov)


@dataclass(frozen=True)
class OracleConfig:
    """A complete lattice scenario: both combs, the sample and per-line gains.

    Gains are symmetric in n -> -n so that every squeezing structure can be
    built from the same config.
    """

    comb_a: CombSpec
    comb_b: CombSpec
    sample: SampleSpec
    gains_a: np.ndarray
    gains_b: np.ndarray
    label: str = ""

    @property
    def n_half(self):
        return self.comb_a.n_half

    def squeezing(self, structure):
        structure = Structure(structure)
        if structure is Structure.CLASSICAL:
            return SqueezingSpec.classical(self.n_half), SqueezingSpec.classical(self.n_half)
        return SqueezingSpec(structure, self.gains_a), SqueezingSpec(structure, self.gains_b)

    def real_amplitudes(self):
        """Copy with each amplitude replaced by its signed magnitude."""
        def realify(x):
            return np.abs(x) * np.where(np.real(x) < 0, -1.0, 1.0)

        return replace(self,
                       comb_a=self.comb_a.with_amplitudes(realify(self.comb_a.line_amplitudes)),
                       comb_b=self.comb_b.with_amplitudes(realify(self.comb_b.line_amplitudes)))

    def classical(self):
        ones = np.ones_like(self.gains_a)
        return replace(self, gains_a=ones, gains_b=ones)


def random_config(rng, n_half=None, max_n_half=8, complex_amplitudes=True, max_gain=40.0,
                  max_phase=0.3, max_thermal=0.1, label=""):
    """Random scenario over the parameter ranges used by the validation suite."""
    n = int(rng.integers(1, max_n_half + 1)) if n_half is None else n_half
    size = 2 * n + 1

    def amps():
        mag = rng.uniform(0.5, 2.0, size)
        phase = rng.uniform(-np.pi, np.pi, size) if complex_amplitudes else np.where(
            rng.random(size) < 0.2, np.pi, 0.0)
        return mag * np.exp(1j * phase)

    def gains():
        half = rng.uniform(1.0, max_gain, n + 1)
        return np.concatenate([half[:0:-1], half])

    sample = SampleSpec(n, rng.uniform(0.0, 1.0, size), rng.uniform(-max_phase, max_phase, size),
                        rng.uniform(0.0, max_thermal, size))
    return OracleConfig(CombSpec(n, amps()), CombSpec(n, amps()), sample, gains(), gains(), label)


# Monte-Carlo path -----------------------------------------------------------

def _detector_fields(receiver, comb_a, comb_b, sample):
    """Mean lines and per-line noise transfer of the two detector ports.

    Returns, per detector, a list of mean lines (k, amplitude array over n)
    and a dict block -> transfer coefficient array over n.
    """
    amp = np.sqrt(sample.kappa) * np.exp(1j * sample.theta)
    leak = np.sqrt(1.0 - sample.kappa)
    a, b = comb_a.line_amplitudes, comb_b.line_amplitudes
    n = comb_a.indices
    h = 1.0 / math.sqrt(2.0)
    if ReceiverKind(receiver) is ReceiverKind.DIVISION:
        # both combs are mixed, then port 1 crosses the sample
        port1 = ([(n, h * amp * a), (0 * n, h * amp * b)],
                 {Block.A: h * amp, Block.B: h * amp, Block.ENV: leak})
        port2 = ([(n, h * a), (0 * n, -h * b)],
                 {Block.A: h + 0 * amp, Block.B: -h + 0 * amp})
    else:
        # signal crosses the sample, then meets the LO on a balanced splitter
        port1 = ([(n, h * amp * a), (0 * n, h * b)],
                 {Block.A: h * amp, Block.ENV: h * leak, Block.B: h + 0 * amp})
        port2 = ([(n, h * amp * a), (0 * n, -h * b)],
                 {Block.A: h * amp, Block.ENV: h * leak, Block.B: -h + 0 * amp})
    return port1, port2


def _beat(port, lattice, m):
    """Mean current and noise coefficients of one detector at index m."""
    lines, transfer = port
    n_half = lattice.n_half
    n = np.arange(-n_half, n_half + 1)
    c = np.zeros(lattice.n_modes, complex)
    d = np.zeros(lattice.n_modes, complex)
    mean = 0.0j
    for k0, mu in lines:
        for k1, mu1 in lines:
            mean += np.sum(np.conj(mu) * mu1 * (k1 == k0 + m))
        for block, t in transfer.items():
            up, down = k0 + m, k0 - m
            ok = np.abs(up) <= 2 * n_half
            np.add.at(c, lattice.index(block, n[ok], up[ok]), (np.conj(mu) * t)[ok])
            ok = np.abs(down) <= 2 * n_half
            np.add.at(d, lattice.index(block, n[ok], down[ok]), (mu * np.conj(t))[ok])
    return mean, c, d


def _sampler(cov, modes):
    quad = np.empty(2 * modes.size, int)
    quad[0::2], quad[1::2] = 2 * modes, 2 * modes + 1
    sub = cov.submatrix(quad)
    try:
        return linalg.cholesky(sub, lower=True)
    except linalg.LinAlgError:
        try:
            return linalg.cholesky(sub + JITTER_CEILING * np.eye(sub.shape[0]), lower=True)
        except linalg.LinAlgError as exc:
            raise FactorizationError("covariance is not positive definite on the sampled modes") from exc


@dataclass(frozen=True)
class MonteCarloResult:
    mean: complex
    variance: float
    stderr: float
    samples: int


def monte_carlo_statistics(receiver, comb_a, comb_b, sqz_a, sqz_b, sample, m, samples, seed,
                           jobs=1):
    """Sample the Gaussian noise and return estimator mean, variance, std. error.

    Shards of at most ``SHARD_SIZE`` draws use child seeds spawned from
    ``seed``, so results do not depend on ``jobs``.
    """
    if samples < 1000:
        raise ValueError("Monte-Carlo needs at least 10^3 samples")
    receiver = ReceiverKind(receiver)
    lattice = build_mode_lattice(comb_a.n_half)
    cov = build_covariance(lattice, sqz_a, sqz_b, sample)
    port1, port2 = _detector_fields(receiver, comb_a, comb_b, sample)
    mean1, c1, d1 = _beat(port1, lattice, m)
    mean2, c2, d2 = _beat(port2, lattice, m)
    if receiver is ReceiverKind.DIVISION:
        if mean2 == 0:
            raise ZeroDivisionError("ratio undefined")
        centre = -mean1 / mean2
        # first-order expansion of -(I1 + dI1)/(I2 + dI2) around the means
        c, d = -(c1 + centre * c2) / mean2, -(d1 + centre * d2) / mean2
    else:
        centre = mean1 - mean2
        c, d = c1 - c2, d1 - d2
    modes = np.flatnonzero((c != 0) | (d != 0))
    chol = _sampler(cov, modes)
    cs, ds = c[modes], d[modes]

    sizes = [SHARD_SIZE] * (samples // SHARD_SIZE)
    if samples % SHARD_SIZE:
        sizes.append(samples % SHARD_SIZE)
    seeds = np.random.SeedSequence(seed).spawn(len(sizes))

    def shard(args):
        size, ss = args
        rng = np.random.default_rng(ss)
        q = chol @ rng.standard_normal((chol.shape[0], size))
        alpha = 0.5 * (q[0::2] + 1j * q[1::2])
        return cs @ alpha + ds @ np.conj(alpha)

    if jobs > 1:
        with ThreadPoolExecutor(jobs) as pool:
            parts = list(pool.map(shard, zip(sizes, seeds)))
    else:
        parts = [shard(x) for x in zip(sizes, seeds)]
    values = centre + np.concatenate(parts)
    emp_mean = values.mean()
    dev2 = np.abs(values - emp_mean) ** 2
    var = float(dev2.sum() / (samples - 1))
    stderr = float(dev2.std(ddof=1) / math.sqrt(samples))
    return MonteCarloResult(complex(emp_mean), var, stderr, samples)


# Cross validation -----------------------------------------------------------

@dataclass
class OracleEntry:
    protocol: str
    m: int
    closed_form: float | None
    quadratic_form: float
    relative_deviation: float | None
    mc_variance: float | None = None
    mc_stderr: float | None = None
    mc_sigmas: float | None = None
    passed: bool = True
    note: str = ""


@dataclass
class OracleReport:
    tolerance_rel: float
    mc_sigma_limit: float
    mc_samples: int | None
    entries: list = field(default_factory=list)
    label: str = ""

    @property
    def passed(self):
        return all(e.passed for e in self.entries)

    @property
    def max_relative_deviation(self):
        devs = [e.relative_deviation for e in self.entries if e.relative_deviation is not None]
        return max(devs) if devs else 0.0

    def failures(self):
        return [e for e in self.entries if not e.passed]

    def to_dict(self):
        return {
            "label": self.label,
            "tolerance_rel": self.tolerance_rel,
            "mc_sigma_limit": self.mc_sigma_limit,
            "mc_samples": self.mc_samples,
            "passed": self.passed,
            "max_relative_deviation": self.max_relative_deviation,
            "entries": [asdict(e) for e in self.entries],
        }

    def to_json(self, indent=2):
        return json.dumps(self.to_dict(), indent=indent)


def coincidence_lines(protocol, n_half, m):
    """Lines whose noise terms share lattice modes with other terms.

    In the division receiver both combs reach the same detectors, so the
    noise mode at site (n, k) can be hit by the beat with the A line and the
    beat with the B line of row n.  This happens on rows 0 and +-2m, and for
    self-referred pairing also on rows +-m, where a beat partner is the
    unpaired line mode itself.  The heterodyne receiver has none.
    """
    if protocol.receiver is ReceiverKind.HETERODYNE:
        return ()
    rows = {0, 2 * m, -2 * m}
    if protocol.structure is Structure.INTRA_SELF_REFERRED:
        rows |= {m, -m}
    return tuple(sorted(r for r in rows if abs(r) <= n_half))


def restricted_comparison(protocol, config, m, excluded_lines):
    """Closed form and quadratic form with the given lines removed on both sides."""
    n = config.n_half
    mask = np.ones(2 * n + 1, bool)
    for r in excluded_lines:
        mask[r + n] = False
    sqz_a, sqz_b = config.squeezing(protocol.structure)
    terms, scale = closed_form_terms(protocol.receiver, protocol.structure, config.comb_a,
                                     config.comb_b, sqz_a, sqz_b, config.sample, m)
    closed = float(np.sum(terms[mask]) / scale)
    quad = oracle_variance(protocol.receiver, config.comb_a, config.comb_b, sqz_a, sqz_b,
                           config.sample, m, lines=mask)
    return closed, quad


def _relative(a, b):
    scale = max(abs(a), abs(b))
    return 0.0 if scale == 0 else abs(a - b) / scale


def cross_validate(config, tolerance_rel=1e-9, mc_samples=None, seed=0, protocols=PROTOCOLS,
                   lines=None, negative_control=False, mc_sigma_limit=4.0, jobs=1):
    """Compare closed form, quadratic form and (optionally) Monte-Carlo.

    With ``negative_control`` the covariance is built with the intra-line
    pairing while the closed form uses the cross-line formula (and vice
    versa), which must surface as failures.
    """
    if config.n_half > MAX_ORACLE_HALF_WIDTH:
        raise ValueError(f"oracle runs are limited to N <= {MAX_ORACLE_HALF_WIDTH}")
    n = config.n_half
    lines = [k for k in range(-n, n + 1) if k != 0] if lines is None else list(lines)
    report = OracleReport(tolerance_rel, mc_sigma_limit, mc_samples, label=config.label)
    for p_index, protocol in enumerate(protocols):
        formula = protocol
        if negative_control:
            formula = Protocol(protocol.receiver, not protocol.cross_line)
        model_a, model_b = config.squeezing(protocol.structure)
        form_a, form_b = config.squeezing(formula.structure)
        for m in lines:
            note = ""
            try:
                quad = oracle_variance(protocol.receiver, config.comb_a, config.comb_b, model_a,
                                       model_b, config.sample, m)
            except ZeroDivisionError:
                report.entries.append(OracleEntry(protocol.name, m, None, float("nan"), None,
                                                  note="ratio undefined at this index"))
                continue
            try:
                terms, scale = closed_form_terms(formula.receiver, formula.structure, config.comb_a,
                                                 config.comb_b, form_a, form_b, config.sample, m)
                closed = float(np.sum(terms) / scale)
                dev = _relative(closed, quad)
                ok = dev <= tolerance_rel
                if not ok:
                    rows = coincidence_lines(protocol, n, m)
                    if rows and not negative_control:
                        c_r, q_r = restricted_comparison(protocol, config, m, rows)
                        note = (f"deviation confined to coincidence lines {list(rows)}: "
                                f"relative deviation without them {_relative(c_r, q_r):.2e}")
            except NoClosedFormError:
                closed, dev, ok = None, None, True
                note = "no closed form for complex amplitudes"
            entry = OracleEntry(protocol.name, m, closed, quad, dev, passed=ok, note=note)
            if mc_samples:
                mc = monte_carlo_statistics(protocol.receiver, config.comb_a, config.comb_b,
                                            model_a, model_b, config.sample, m, mc_samples,
                                            [seed, p_index, m + n], jobs=jobs)
                entry.mc_variance, entry.mc_stderr = mc.variance, mc.stderr
                entry.mc_sigmas = abs(mc.variance - quad) / mc.stderr
                entry.passed = entry.passed and entry.mc_sigmas <= mc_sigma_limit
            report.entries.append(entry)
    return report

"""Local and global SNRs, asymptotic formulas and power-split optimization.

Everything here works on the single-absorption-line scenario: uniform combs
of M lines, one line m with transmissivity kappa, the rest transparent.
"""

from __future__ import annotations

import functools
import math
import warnings
from dataclasses import asdict, dataclass, field

import numpy as np

from .comb import CombSpec, PowerConstraint, amplitude_from_constraint, photon_energy
from .receivers import PROTOCOLS, Protocol, ReceiverKind, protocol_statistics
from .sample import single_line_sample
from .squeezing import SqueezingSpec, amplification_noise, rotated_pair_variance

GOLDEN = (math.sqrt(5.0) - 1.0) / 2.0
PRE_GRID = 64


class AsymptoticRegimeWarning(UserWarning):
    pass


@dataclass(frozen=True)
class ProtocolParams:
    """Scalar single-line scenario.  ``b2`` may be ``inf`` (strong LO)."""

    n_lines: int
    a2: float
    b2: float
    gain_a: float = 1.0
    gain_b: float = 1.0
    kappa: float = 1.0
    theta: float = 0.0
    delta: float | None = None

    def __post_init__(self):
        if self.n_lines < 3 or self.n_lines % 2 == 0:
            raise ValueError("M must be odd and at least 3")
        if not 0.0 <= self.kappa <= 1.0:
            raise ValueError("kappa must lie in [0, 1]")
        if self.a2 <= 0 or self.b2 <= 0:
            raise ValueError("line powers must be positive")
        if self.gain_a < 1 or self.gain_b < 1:
            raise ValueError("gains must be >= 1")


def conversion_coefficient(receiver, kappa):
    """Factor turning a local SNR^2 into the global (finite-difference) one."""
    if ReceiverKind(receiver) is ReceiverKind.DIVISION:
        return (kappa - 1.0) ** 2 / (4.0 * kappa) if kappa > 0 else math.inf
    return (math.sqrt(kappa) - 1.0) ** 2


def local_snr(stats, receiver=None):
    """Fisher SNR^2 for sqrt(kappa_m): |d mean/d sqrt(kappa)|^2 / variance."""
    if receiver is not None and ReceiverKind(receiver) is not stats.receiver:
        raise ValueError("statistics were computed for a different receiver")
    if stats.variance <= 0:
        raise ZeroDivisionError("zero variance")
    return stats.slope / stats.variance


def global_snr(stats, reference, receiver=None):
    """Finite-difference SNR^2 against the transparent-sample reference."""
    if stats.variance <= 0:
        raise ZeroDivisionError("zero variance")
    return abs(stats.mean - reference.mean) ** 2 / stats.variance


def snr_c_star2(power, duration, n_lines, carrier):
    """Optimal classical SNR^2 scale P T / (M^2 hbar Omega_c)."""
    return power * duration / (n_lines ** 2 * photon_energy(carrier))


def _regime_check(params):
    g = max(params.gain_a, params.gain_b)
    if params.n_lines < 10 * g:
        warnings.warn(f"asymptotic formulas assume M >> G (M={params.n_lines}, G={g:.3g})",
                      AsymptoticRegimeWarning, stacklevel=3)


def asymptotic_snr(protocol: Protocol, params: ProtocolParams):
    """Leading-order local SNR^2 for M >> G."""
    _regime_check(params)
    m, a2, b2, ga, gb, k = (params.n_lines, params.a2, params.b2, params.gain_a,
                            params.gain_b, params.kappa)
    if protocol.receiver is ReceiverKind.HETERODYNE:
        # heterodyne with cross-line entanglement matches intra-line to leading order
        inverse = m / (b2 * gb) + m / (a2 * ga)
        return 1.0 / inverse
    return k / _division_variance(protocol, params)


def _division_variance(protocol, params):
    """Leading-order variance of the ratio estimate, symmetric combs."""
    m, a2, b2, ga, gb, k = (params.n_lines, params.a2, params.b2, params.gain_a,
                            params.gain_b, params.kappa)
    if math.isinf(b2):
        raise ValueError("the division receiver has no strong-LO limit")
    if protocol.cross_line:
        mismatch = a2 / gb + b2 / ga
    else:
        mismatch = a2 * amplification_noise(gb) + b2 * amplification_noise(ga)
    bracket = (3 + k) ** 2 * (a2 / ga + b2 / gb) + (1 - k) ** 2 * mismatch
    return m * bracket / (16.0 * a2 * b2)


def asymptotic_global_snr(protocol: Protocol, params: ProtocolParams):
    """Leading-order global SNR^2 (finite difference against kappa = 1).

    For the division receiver this stays finite at kappa = 0, where the
    local SNR vanishes: the mean ratio moves by (1 - kappa)/2.
    """
    if protocol.receiver is ReceiverKind.HETERODYNE:
        return conversion_coefficient(protocol.receiver, params.kappa) * asymptotic_snr(protocol, params)
    return (1.0 - params.kappa) ** 2 / 4.0 / _division_variance(protocol, params)


def phase_noise_snr(params: ProtocolParams):
    """Heterodyne intra-line SNR^2 with every squeezing kernel rotated by delta."""
    _regime_check(params)
    delta = params.delta or 0.0
    m, a2, b2 = params.n_lines, params.a2, params.b2
    inverse = m * (rotated_pair_variance(params.gain_b, delta) / b2
                   + rotated_pair_variance(params.gain_a, delta) / a2)
    return 1.0 / inverse


def constrained_asymptotic_snr(protocol, constraint_kind, gain, kappa, snr_c2):
    """Leading-order optimal local SNR^2 under a power constraint."""
    kind = PowerConstraint(constraint_kind, 1.0).kind.value
    if protocol.receiver is ReceiverKind.HETERODYNE:
        return gain * snr_c2 if kind == "sample" else 0.5 * gain * snr_c2
    mismatch = 1.0 / gain if protocol.cross_line else amplification_noise(gain)
    return 8.0 * kappa / ((3 + kappa) ** 2 / gain + (1 - kappa) ** 2 * mismatch) * snr_c2


# Exact single-line scenario --------------------------------------------------

def _squeezing(protocol, n_half, gain_a, gain_b):
    if gain_a == 1.0 and gain_b == 1.0:
        return SqueezingSpec.classical(n_half), SqueezingSpec.classical(n_half)
    s = protocol.structure
    return SqueezingSpec.uniform(s, n_half, gain_a), SqueezingSpec.uniform(s, n_half, gain_b)


def single_line_statistics(protocol, n_lines, a2, b2, gain_a, gain_b, kappa, theta=0.0, line=1,
                           thermal=0.0):
    """Exact statistics at beat index ``line`` and at the transparent reference.

    ``b2 = inf`` selects the strong-LO limit (heterodyne only), where the LO
    scale is set to one and only LO-scaled noise terms are kept.
    """
    if n_lines % 2 == 0 or n_lines < 3:
        raise ValueError("M must be odd and at least 3")
    n_half = (n_lines - 1) // 2
    strong_lo = math.isinf(b2)
    if strong_lo and protocol.receiver is not ReceiverKind.HETERODYNE:
        raise ValueError("the division receiver has no strong-LO limit")
    comb_a = CombSpec.uniform(n_half, math.sqrt(a2))
    comb_b = CombSpec.uniform(n_half, 1.0 if strong_lo else math.sqrt(b2))
    sqz_a, sqz_b = _squeezing(protocol, n_half, gain_a, gain_b)
    out = []
    for k, th in ((kappa, theta), (1.0, 0.0)):
        sample = single_line_sample(n_half, line, k, th, thermal)
        out.append(protocol_statistics(protocol, comb_a, comb_b, sqz_a, sqz_b, sample, line,
                                       strong_lo=strong_lo))
    return out[0], out[1]


@dataclass
class SnrReport:
    protocol: str
    constraint: str | None
    kappa: float
    m: int
    gain_a: float
    gain_b: float
    split: float | None
    a2: float
    b2: float
    mean: complex | None
    variance: float | None
    local_snr2: float
    global_snr2: float
    classical_local_snr2: float
    classical_global_snr2: float
    advantage_db: float
    best_classical_protocol: str | None = None
    best_classical_snr2: float | None = None
    advantage_best_db: float | None = None
    objective: str = "local"
    method: str = "exact"
    snr_c_star2: float | None = None
    trace: list = field(default_factory=list)
    note: str = ""

    def snr2(self, objective=None):
        return self.local_snr2 if (objective or self.objective) == "local" else self.global_snr2

    def to_dict(self):
        d = asdict(self)
        if isinstance(self.mean, complex):
            d["mean"] = [self.mean.real, self.mean.imag]
        return d


def _db_ratio(num, den):
    if num == 0 and den == 0:
        return math.nan
    if den == 0:
        return math.inf
    if num == 0:
        return -math.inf
    return 10.0 * math.log10(num / den)


def advantage_db(quantum, classical):
    """SNR advantage in dB from (local, global) pairs.

    Uses the local SNR when both are nonzero and falls back to the global
    SNR (e.g. division at kappa = 0, where the local SNR vanishes).
    """
    (ql, qg), (cl, cg) = quantum, classical
    if ql > 0 and cl > 0:
        return _db_ratio(ql, cl)
    return _db_ratio(qg, cg)


def _pick(objective, local, glob, kappa):
    """Objective value, falling back when it is identically zero at this kappa."""
    if objective == "global" and kappa == 1.0:
        return local
    if objective == "local" and kappa == 0.0 and local == 0.0:
        return glob
    return local if objective == "local" else glob


def exact_point(protocol, n_lines, a2, b2, gain_a, gain_b, kappa, theta=0.0, line=1, thermal=0.0):
    """(stats, local SNR^2, global SNR^2) of one exact evaluation."""
    stats, ref = single_line_statistics(protocol, n_lines, a2, b2, gain_a, gain_b, kappa, theta,
                                        line, thermal)
    return stats, local_snr(stats), global_snr(stats, ref)


def _golden_max(fun, lo, hi, tol):
    a, b = lo, hi
    c = b - GOLDEN * (b - a)
    d = a + GOLDEN * (b - a)
    fc, fd = fun(c), fun(d)
    while b - a > tol:
        if fc >= fd:
            b, d, fd = d, c, fc
            c = b - GOLDEN * (b - a)
            fc = fun(c)
        else:
            a, c, fc = c, d, fd
            d = a + GOLDEN * (b - a)
            fd = fun(d)
    return (c, fc) if fc >= fd else (d, fd)


def optimize_split(objective_fn, signal_only, tol=1e-6):
    """Maximize ``objective_fn(f)`` over the feasible power fractions.

    A 64-point pre-grid picks the bracket, golden-section search refines it.
    Returns (f*, value, trace) where trace lists every evaluation.
    """
    trace = []

    def fun(f):
        v = objective_fn(f)
        trace.append((float(f), float(v)))
        return v

    if signal_only:
        grid = np.arange(1, PRE_GRID + 1) / PRE_GRID
        lo_edge, hi_edge = grid[0] / 2, 1.0
    else:
        grid = (np.arange(PRE_GRID) + 0.5) / PRE_GRID
        lo_edge, hi_edge = 1e-9, 1.0 - 1e-9
    values = [fun(f) for f in grid]
    if not np.all(np.isfinite(values)):
        raise ValueError("objective is not finite on the feasible set")
    i = int(np.argmax(values))
    lo = grid[i - 1] if i > 0 else lo_edge
    hi = grid[i + 1] if i + 1 < grid.size else hi_edge
    f_best, v_best = _golden_max(fun, lo, hi, tol)
    for edge in (lo, hi):
        if edge in (lo_edge, hi_edge) and (v := fun(edge)) > v_best:
            f_best, v_best = edge, v
    return float(f_best), float(v_best), trace


def optimize_power_split(protocol, constraint, gain_a, gain_b, kappa, n_lines, duration, carrier,
                         objective="local", theta=0.0, line=1, tol=1e-6, thermal=0.0):
    """Optimal comb-A power fraction f and the resulting exact SNR^2.

    f is the share of the constrained budget given to comb A.  When only the
    signal is constrained (sample power, heterodyne) the LO is taken in the
    strong limit and f scales the signal power.
    """
    budget = amplitude_from_constraint(constraint, protocol.receiver, n_lines, duration, carrier)

    def value(f):
        a2, b2 = budget.split(f)
        _, loc, glo = exact_point(protocol, n_lines, a2, b2, gain_a, gain_b, kappa, theta, line,
                                  thermal)
        return _pick(objective, loc, glo, kappa)

    return optimize_split(value, budget.signal_only, tol)


def _constraint_label(constraint):
    return None if constraint is None else constraint.kind.value


def _allocation(budget, f, lo):
    if budget.signal_only and lo == "matched":
        return budget.per_line, budget.per_line
    return budget.split(f)


def constrained_optimal_snr(protocol, constraint, gain, kappa, n_lines, duration, carrier,
                            method="exact", objective="local", line=1, gain_b=None, split=None,
                            lo="strong", theta=0.0, thermal=0.0):
    """SNR report under ``constraint``, at the optimal power split by default.

    ``gain`` is the comb-A gain; ``gain_b`` defaults to the same value.  With
    ``split`` given the optimizer is bypassed.  When only the signal power is
    constrained (heterodyne, sample power) ``lo`` picks a strong LO or one
    matched to the signal line power.  The same-receiver classical baseline
    shares the allocation of the quantum run; the best classical receiver is
    evaluated at its own optimum.
    """
    if lo not in ("strong", "matched"):
        raise ValueError("lo must be 'strong' or 'matched'")
    gain_b = gain if gain_b is None else gain_b
    budget = amplitude_from_constraint(constraint, protocol.receiver, n_lines, duration, carrier)
    snr_c2 = snr_c_star2(constraint.budget, duration, n_lines, carrier)
    fixed = split is not None or (budget.signal_only and lo == "matched")
    note = ""

    if method == "asymptotic":
        if fixed:
            f = 1.0 if budget.signal_only else float(split)
        else:
            f = 1.0 if budget.signal_only else 0.5
            if gain != gain_b and not budget.signal_only:
                note = "symmetric split is the asymptotic optimum only for equal gains"
        a2, b2 = _allocation(budget, f, lo)

        def point(p, ga, gb, a2, b2):
            params = ProtocolParams(n_lines, a2, b2, ga, gb, kappa)
            return asymptotic_snr(p, params), asymptotic_global_snr(p, params)

        with warnings.catch_warnings():
            warnings.simplefilter("ignore", AsymptoticRegimeWarning)
            loc, glo = point(protocol, gain, gain_b, a2, b2)
            same = point(protocol, 1.0, 1.0, a2, b2)
            best = {}
            for p in _classical_protocols():
                cb = amplitude_from_constraint(constraint, p.receiver, n_lines, duration, carrier)
                best[p.receiver] = point(p, 1.0, 1.0, *cb.split(1.0 if cb.signal_only else 0.5))
        return _assemble(protocol, constraint, kappa, line, gain, gain_b, f, a2, b2, None, None,
                         (loc, glo), same, best, objective, "asymptotic", snr_c2, [], note)

    if fixed:
        f, trace = (1.0 if budget.signal_only else float(split)), []
    else:
        f, _, trace = optimize_power_split(protocol, constraint, gain, gain_b, kappa, n_lines,
                                           duration, carrier, objective, theta, line, thermal=thermal)
    a2, b2 = _allocation(budget, f, lo)
    stats, loc, glo = exact_point(protocol, n_lines, a2, b2, gain, gain_b, kappa, theta, line, thermal)
    if fixed:
        same = exact_point(protocol, n_lines, a2, b2, 1.0, 1.0, kappa, theta, line, thermal)[1:]
    best = _best_classical(constraint, kappa, n_lines, duration, carrier, objective, theta, line,
                           thermal)
    if not fixed:
        same = best[protocol.receiver]
    return _assemble(protocol, constraint, kappa, line, gain, gain_b, f, a2, b2, stats.mean,
                     stats.variance, (loc, glo), same, best, objective, "exact", snr_c2, trace, note)


def _classical_protocols():
    return [p for p in PROTOCOLS if not p.cross_line]


@functools.lru_cache(maxsize=4096)
def _best_classical(constraint, kappa, n_lines, duration, carrier, objective, theta, line, thermal):
    """(local, global) SNR^2 of each classical receiver at its own optimal split.

    Shared by every protocol and gain at the same scenario point, so scans
    compute it once per point.
    """
    best = {}
    for p in _classical_protocols():
        cb = amplitude_from_constraint(constraint, p.receiver, n_lines, duration, carrier)
        cf, _, _ = optimize_power_split(p, constraint, 1.0, 1.0, kappa, n_lines, duration,
                                        carrier, objective, theta, line, thermal=thermal)
        _, c_loc, c_glo = exact_point(p, n_lines, *cb.split(cf), 1.0, 1.0, kappa, theta, line,
                                      thermal)
        best[p.receiver] = (c_loc, c_glo)
    return best


def _assemble(protocol, constraint, kappa, line, gain_a, gain_b, f, a2, b2, mean, var, snrs, same,
              best, objective, method, snr_c2, trace, note=""):
    loc, glo = snrs
    c_loc, c_glo = same
    adv = advantage_db((loc, glo), (c_loc, c_glo))
    kind_local = objective == "local" and not (kappa == 0.0 and loc == 0.0)
    if objective == "global" and kappa == 1.0:
        kind_local = True
    index = 0 if kind_local else 1
    rec, vals = max(best.items(), key=lambda item: item[1][index])
    best_val = vals[index]
    adv_best = _db_ratio((loc, glo)[index], best_val)
    if protocol.receiver is ReceiverKind.DIVISION and kappa == 0.0:
        note = ("local SNR^2 of the division receiver vanishes at kappa = 0 because its mean "
                "depends on kappa, not sqrt(kappa); advantages use the global SNR")
    best_name = Protocol(rec, False).name.replace("-intra", "-classical")
    return SnrReport(protocol.name, _constraint_label(constraint), kappa, line, gain_a, gain_b, f,
                     a2, b2, mean, var, loc, glo, c_loc, c_glo, adv, best_name, best_val,
                     adv_best, "local" if kind_local else "global", method, snr_c2, trace, note)

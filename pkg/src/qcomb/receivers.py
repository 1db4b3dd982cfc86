"""Detection topologies: mean beat spectra, linearized noise and variances.

Two receivers are modelled.  The heterodyne receiver sends only the signal
comb through the sample and subtracts the two balanced detector currents.
The division receiver mixes both combs first, sends one port through the
sample, and divides the two detector spectra.

All noise quantities are linear in the lattice operators (strong mean-field
regime).  Closed forms sum one squeezing kernel per beat term; the
coefficient vectors feed the covariance oracle.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field

import numpy as np

from .comb import Block, CombSpec, ModeLattice, build_mode_lattice
from .sample import SampleSpec
from .squeezing import SqueezingSpec, Structure, amplification_noise, rotated_pair_variance


class ReceiverKind(enum.Enum):
    HETERODYNE = "heterodyne"
    DIVISION = "division"


class Processing(enum.Enum):
    SUBTRACTION = "subtraction"
    RATIO = "ratio"


class Method(enum.Enum):
    CLOSED_FORM = "closed-form"
    ORACLE_QUADRATIC_FORM = "oracle-quadratic-form"
    MONTE_CARLO = "monte-carlo"


class UnsupportedProcessingError(ValueError):
    pass


class NoClosedFormError(ValueError):
    """Raised when a closed form is asked for outside its stated assumptions."""


def check_processing(receiver, processing):
    """Reject the two receiver/processing pairs that carry no usable signal."""
    receiver, processing = ReceiverKind(receiver), Processing(processing)
    if receiver is ReceiverKind.HETERODYNE and processing is Processing.RATIO:
        raise UnsupportedProcessingError(
            "ratio processing of a heterodyne receiver divides two currents that "
            "carry the same absorption-dependent beat with opposite signs; the ratio "
            "is fixed at -1 and holds no information on the sample"
        )
    if receiver is ReceiverKind.DIVISION and processing is Processing.SUBTRACTION:
        raise UnsupportedProcessingError(
            "subtraction processing of a division receiver is not modelled: the "
            "difference current mixes sample and reference beats without the "
            "self-calibration that motivates this topology"
        )
    return receiver, processing


@dataclass(frozen=True)
class Protocol:
    """A receiver paired with a squeezing family (intra-line or cross-line)."""

    receiver: ReceiverKind
    cross_line: bool

    @property
    def structure(self):
        if self.cross_line:
            return Structure.CROSS_LINE
        if self.receiver is ReceiverKind.DIVISION:
            return Structure.INTRA_SELF_REFERRED
        return Structure.INTRA_CROSS_REFERRED

    @property
    def name(self):
        rec = "div" if self.receiver is ReceiverKind.DIVISION else "het"
        return f"{rec}-{'cross' if self.cross_line else 'intra'}"

    @classmethod
    def parse(cls, name):
        try:
            rec, fam = name.strip().lower().split("-")
            receiver = {"div": ReceiverKind.DIVISION, "het": ReceiverKind.HETERODYNE}[rec]
            cross = {"intra": False, "cross": True}[fam]
        except (ValueError, KeyError):
            raise ValueError(f"unknown protocol {name!r}; expected one of "
                             f"{', '.join(p.name for p in PROTOCOLS)}") from None
        return cls(receiver, cross)

    def __str__(self):
        return self.name


PROTOCOLS = (
    Protocol(ReceiverKind.HETERODYNE, False),
    Protocol(ReceiverKind.HETERODYNE, True),
    Protocol(ReceiverKind.DIVISION, False),
    Protocol(ReceiverKind.DIVISION, True),
)


@dataclass(frozen=True)
class NoiseCoefficients:
    """Linear noise observable sum_j c_j a_j + d_j a_j^dagger over the lattice.

    ``scale`` converts the variance of this raw combination into the
    variance of the estimator (|D|^2/4 for the division ratio, 1 otherwise).
    """

    m: int
    lattice: ModeLattice
    annihilation: np.ndarray
    creation: np.ndarray
    scale: float = 1.0

    def quadrature_weights(self):
        """Complex weights w with observable = w . (x_0, y_0, x_1, y_1, ...)."""
        c, d = self.annihilation, self.creation
        w = np.empty(2 * c.size, dtype=complex)
        w[0::2] = 0.5 * (c + d)
        w[1::2] = 0.5j * (c - d)
        return w

    def support(self):
        return np.flatnonzero((self.annihilation != 0) | (self.creation != 0))


@dataclass(frozen=True)
class PhotocurrentStats:
    """Statistics of one estimator at beat index m.

    ``slope`` is |d mean / d sqrt(kappa_m)|^2, the numerator of the local SNR.
    """

    m: int
    mean: complex
    variance: float
    method: Method
    receiver: ReceiverKind
    slope: float
    extra: dict = field(default_factory=dict)

    def __post_init__(self):
        if not self.variance >= 0:
            raise ValueError(f"negative variance {self.variance}")


def _check_inputs(comb_a, comb_b, sample, m):
    n_half = comb_a.n_half
    if comb_b.n_half != n_half or sample.n_half != n_half:
        raise ValueError("combs and sample must share the same line range")
    if abs(m) > n_half:
        raise ValueError(f"beat index {m} outside [-{n_half}, {n_half}]")
    return n_half


def mean_spectrum(receiver, comb_a: CombSpec, comb_b: CombSpec, sample: SampleSpec, m):
    """Mean detector currents (I_A, I_B) at beat frequency m * rep_offset."""
    n_half = _check_inputs(comb_a, comb_b, sample, m)
    a, b = comb_a.line_amplitudes, comb_b.line_amplitudes
    kap, th = sample.kappa, sample.theta
    p, q = m + n_half, -m + n_half
    if ReceiverKind(receiver) is ReceiverKind.DIVISION:
        ia = 0.5 * (kap[p] * a[p] * np.conj(b[p]) + kap[q] * np.conj(a[q]) * b[q])
        ib = -0.5 * (a[p] * np.conj(b[p]) + np.conj(a[q]) * b[q])
        return complex(ia), complex(ib)
    ia = 0.5 * (np.sqrt(kap[p]) * np.exp(1j * th[p]) * a[p] * np.conj(b[p])
                + np.sqrt(kap[q]) * np.exp(-1j * th[q]) * np.conj(a[q]) * b[q])
    return complex(ia), complex(-ia)


def ratio_denominator(comb_a, comb_b, m):
    n = comb_a.n_half
    a, b = comb_a.line_amplitudes, comb_b.line_amplitudes
    return complex(a[m + n] * np.conj(b[m + n]) + np.conj(a[n - m]) * b[n - m])


def mean_ratio(comb_a, comb_b, sample, m):
    """Model-predicted ratio r_m = -<I_A>/<I_B>."""
    ia, ib = mean_spectrum(ReceiverKind.DIVISION, comb_a, comb_b, sample, m)
    if ib == 0:
        raise ZeroDivisionError("ratio undefined: A_m B_m* + A_-m* B_-m vanishes")
    return -ia / ib


def noise_coefficients(receiver, comb_a, comb_b, sample, m, ratio=None, strong_lo=False,
                       lattice=None, lines=None):
    """Coefficient vectors of the linearized readout noise at beat index m.

    Division: the numerator Delta I_A + r_m Delta I_B of the linearized ratio,
    with ``scale`` = |D|^2/4.  Heterodyne: Delta d_m.  ``strong_lo`` keeps only
    the terms that grow with the LO amplitude.  ``lines`` (boolean mask over
    n = -N..N) restricts the sum to the terms generated by those lines.
    """
    receiver = ReceiverKind(receiver)
    n_half = _check_inputs(comb_a, comb_b, sample, m)
    lattice = lattice or build_mode_lattice(n_half)
    c = np.zeros(lattice.n_modes, dtype=complex)
    d = np.zeros(lattice.n_modes, dtype=complex)
    n = np.arange(-n_half, n_half + 1)
    a, b = comb_a.line_amplitudes, comb_b.line_amplitudes
    kap, th = sample.kappa, sample.theta
    rot = np.exp(1j * th)
    at_m = np.full_like(n, m)
    keep = np.ones(n.size, bool) if lines is None else np.asarray(lines, bool)

    def put(block, k_ann, coeff_ann, k_cre, coeff_cre):
        # np.add.at so terms landing on the same mode accumulate
        ok = keep & (np.abs(k_ann) <= 2 * n_half)
        np.add.at(c, lattice.index(block, n[ok], k_ann[ok]), coeff_ann[ok])
        ok = keep & (np.abs(k_cre) <= 2 * n_half)
        np.add.at(d, lattice.index(block, n[ok], k_cre[ok]), coeff_cre[ok])

    if receiver is ReceiverKind.DIVISION:
        if strong_lo:
            raise ValueError("the strong-LO limit applies to the heterodyne receiver only")
        den = ratio_denominator(comb_a, comb_b, m)
        if den == 0:
            raise ZeroDivisionError("ratio undefined: A_m B_m* + A_-m* B_-m vanishes")
        r = mean_ratio(comb_a, comb_b, sample, m) if ratio is None else ratio
        cp, cm = 0.5 * (kap + r), 0.5 * (kap - r)
        ce = np.sqrt(kap * (1.0 - kap)) / np.sqrt(2.0)
        put(Block.A, n + m, cp * np.conj(a), n - m, cp * a)
        put(Block.A, at_m, cm * np.conj(b), -at_m, cm * b)
        put(Block.B, at_m, cp * np.conj(b), -at_m, cp * b)
        put(Block.B, n + m, cm * np.conj(a), n - m, cm * a)
        put(Block.ENV, n + m, ce * np.conj(rot) * np.conj(a), n - m, ce * rot * a)
        put(Block.ENV, at_m, ce * np.conj(rot) * np.conj(b), -at_m, ce * rot * b)
        return NoiseCoefficients(m, lattice, c, d, abs(den) ** 2 / 4.0)

    sk = np.sqrt(kap)
    if not strong_lo:
        put(Block.B, n + m, sk * np.conj(rot) * np.conj(a), n - m, sk * rot * a)
    put(Block.A, at_m, sk * rot * np.conj(b), -at_m, sk * np.conj(rot) * b)
    se = np.sqrt(1.0 - kap)
    put(Block.ENV, at_m, se * np.conj(b), -at_m, se * b)
    return NoiseCoefficients(m, lattice, c, d, 1.0)


def _gains(spec: SqueezingSpec, structure):
    if spec.structure is Structure.CLASSICAL:
        return np.ones_like(spec.gains)
    if spec.structure is not structure:
        raise ValueError(f"squeezing spec has structure {spec.structure.value}, "
                         f"formula expects {structure.value}")
    return np.asarray(spec.gains)


def _require_real(*arrays):
    for arr in arrays:
        scale = max(np.max(np.abs(arr)), 1.0)
        if np.max(np.abs(np.imag(arr))) > 1e-12 * scale:
            raise NoClosedFormError("this closed form assumes real line amplitudes")
    return [np.real(arr) for arr in arrays]


def _check_structure(receiver, structure):
    structure = Structure(structure)
    if structure is Structure.CLASSICAL:
        return structure
    if receiver is ReceiverKind.DIVISION and structure is Structure.INTRA_CROSS_REFERRED:
        raise ValueError("cross-referred intra-line squeezing is not analyzed for the division receiver")
    if receiver is ReceiverKind.HETERODYNE and structure is Structure.INTRA_SELF_REFERRED:
        raise ValueError("self-referred intra-line squeezing is not analyzed for the heterodyne receiver")
    return structure


def closed_form_terms(receiver, structure, comb_a, comb_b, sqz_a, sqz_b, sample, m,
                      strong_lo=False):
    """Per-line contributions to a closed-form variance.

    Returns ``(terms, scale)`` with variance = terms.sum() / scale.  Pair
    terms linking lines n and -n are booked on line |n|.
    """
    receiver = ReceiverKind(receiver)
    structure = _check_structure(receiver, structure)
    n_half = _check_inputs(comb_a, comb_b, sample, m)
    if structure is Structure.CLASSICAL:
        structure = Protocol(receiver, False).structure
        ga = gb = np.ones(2 * n_half + 1)
    else:
        ga, gb = _gains(sqz_a, structure), _gains(sqz_b, structure)
    kap, th, env = sample.kappa, sample.theta, 1.0 + 2.0 * sample.thermal
    a, b = comb_a.line_amplitudes, comb_b.line_amplitudes

    if receiver is ReceiverKind.DIVISION:
        if strong_lo:
            raise ValueError("the strong-LO limit applies to the heterodyne receiver only")
        den = ratio_denominator(comb_a, comb_b, m)
        if den == 0:
            raise ZeroDivisionError("ratio undefined: A_m B_m* + A_-m* B_-m vanishes")
        r = mean_ratio(comb_a, comb_b, sample, m)
        loss = 2.0 * kap * (1.0 - kap) * (np.abs(a) ** 2 + np.abs(b) ** 2) * env
        if structure is Structure.INTRA_SELF_REFERRED:
            ar, br = _require_real(a, b)
            r = np.real(r)
            a2, b2 = ar ** 2, br ** 2
            terms = ((kap + r) ** 2 * (a2 / ga + b2 / gb)
                     + (kap - r) ** 2 * (a2 * amplification_noise(gb) + b2 * amplification_noise(ga))
                     + loss)
        else:
            kr = kap[::-1]
            ac, am = np.conj(a), a[::-1]
            bc, bm = np.conj(b), b[::-1]

            def twin(x, y, g):
                return np.abs((x + y) / 2) ** 2 / g + np.abs((x - y) / 2) ** 2 * g

            terms = (twin((kap + r) * ac, (kr + r) * am, ga)
                     + twin((kap + r) * bc, (kr + r) * bm, gb)
                     + twin((kap - r) * ac, (kr - r) * am, gb)
                     + twin((kap - r) * bc, (kr - r) * bm, ga)
                     + loss)
        return terms, abs(den) ** 2

    terms = (1.0 - kap) * np.abs(b) ** 2 * env
    if structure is Structure.INTRA_CROSS_REFERRED:
        ar, br = _require_real(a, b)
        terms = terms + kap * br ** 2 * rotated_pair_variance(ga, th)
        if not strong_lo:
            terms = terms + kap * ar ** 2 * rotated_pair_variance(gb, th)
        return terms, 1.0

    # cross-line entanglement: line 0 pairs with itself, lines +-n pair up
    terms = terms.astype(float)
    c0 = n_half
    terms[c0] += kap[c0] * abs(b[c0]) ** 2 * rotated_pair_variance(ga[c0], th[c0] - np.angle(b[c0]))
    if not strong_lo:
        terms[c0] += kap[c0] * abs(a[c0]) ** 2 * rotated_pair_variance(gb[c0], th[c0] + np.angle(a[c0]))
    pos = np.arange(c0 + 1, 2 * n_half + 1)
    neg = 2 * c0 - pos
    sk = np.sqrt(kap)
    x_b = sk[pos] * np.conj(b[pos]) * np.exp(1j * th[pos])
    y_b = sk[neg] * b[neg] * np.exp(-1j * th[neg])
    terms[pos] += 0.5 * (np.abs(x_b - y_b) ** 2 * ga[pos] + np.abs(x_b + y_b) ** 2 / ga[pos])
    if not strong_lo:
        x_a = sk[pos] * np.conj(a[pos]) * np.exp(-1j * th[pos])
        y_a = sk[neg] * a[neg] * np.exp(1j * th[neg])
        terms[pos] += 0.5 * (np.abs(x_a - y_a) ** 2 * gb[pos] + np.abs(x_a + y_a) ** 2 / gb[pos])
    return terms, 1.0


def variance_closed_form(receiver, structure, comb_a, comb_b, sqz_a, sqz_b, sample, m,
                         strong_lo=False):
    """Estimator variance from the per-line closed forms.

    Division: var of the ratio estimate.  Heterodyne: var of the
    differential beat d_m; with ``strong_lo`` only the LO-scaled terms are
    kept, so the result is per unit of the given LO amplitudes.
    ``structure`` CLASSICAL evaluates the intra-line form with unit gains.
    """
    terms, scale = closed_form_terms(receiver, structure, comb_a, comb_b, sqz_a, sqz_b, sample, m,
                                     strong_lo)
    return float(np.sum(terms) / scale)


def _local_slope(receiver, comb_a, comb_b, sample, m):
    n_half = comb_a.n_half
    a, b = comb_a.line_amplitudes, comb_b.line_amplitudes
    p = m + n_half
    if receiver is ReceiverKind.DIVISION:
        c_plus = a[p] * np.conj(b[p]) / ratio_denominator(comb_a, comb_b, m)
        return float(4.0 * sample.kappa[p] * abs(c_plus) ** 2)
    return float(abs(a[p] * np.conj(b[p])) ** 2)


def _statistics(receiver, comb_a, comb_b, sqz_a, sqz_b, structure, sample, m, strong_lo):
    if m == 0:
        raise ValueError("beat index 0 is the filtered DC component")
    extra = {"structure": Structure(structure).value, "strong_lo": strong_lo}
    try:
        var = variance_closed_form(receiver, structure, comb_a, comb_b, sqz_a, sqz_b, sample, m,
                                   strong_lo=strong_lo)
        method = Method.CLOSED_FORM
    except NoClosedFormError:
        from .oracle import oracle_variance

        var = oracle_variance(receiver, comb_a, comb_b, sqz_a, sqz_b, sample, m, strong_lo=strong_lo)
        method = Method.ORACLE_QUADRATIC_FORM
        extra["note"] = "no closed form for complex amplitudes; covariance oracle used"
    return var, method, extra


def ratio_statistics(comb_a, comb_b, sqz_a, sqz_b, structure, sample, m):
    """Mean and variance of the division-receiver ratio estimate at index m."""
    receiver = ReceiverKind.DIVISION
    r = mean_ratio(comb_a, comb_b, sample, m)
    var, method, extra = _statistics(receiver, comb_a, comb_b, sqz_a, sqz_b, structure, sample, m, False)
    den = ratio_denominator(comb_a, comb_b, m)
    n = comb_a.n_half
    extra.update(
        r_m=r,
        c_plus=comb_a.line_amplitudes[m + n] * np.conj(comb_b.line_amplitudes[m + n]) / den,
        c_minus=np.conj(comb_a.line_amplitudes[n - m]) * comb_b.line_amplitudes[n - m] / den,
        denominator=den,
    )
    slope = _local_slope(receiver, comb_a, comb_b, sample, m)
    return PhotocurrentStats(m, r, var, method, receiver, slope, extra)


def differential_statistics(comb_a, comb_b, sqz_a, sqz_b, structure, sample, m, strong_lo=False):
    """Mean and variance of the heterodyne differential beat d_m."""
    receiver = ReceiverKind.HETERODYNE
    ia, ib = mean_spectrum(receiver, comb_a, comb_b, sample, m)
    var, method, extra = _statistics(receiver, comb_a, comb_b, sqz_a, sqz_b, structure, sample, m,
                                     strong_lo)
    extra["d_m"] = ia - ib
    slope = _local_slope(receiver, comb_a, comb_b, sample, m)
    return PhotocurrentStats(m, ia - ib, var, method, receiver, slope, extra)


def protocol_statistics(protocol, comb_a, comb_b, sqz_a, sqz_b, sample, m, strong_lo=False):
    structure = (protocol.structure
                 if sqz_a.structure is not Structure.CLASSICAL or sqz_b.structure is not Structure.CLASSICAL
                 else Structure.CLASSICAL)
    if protocol.receiver is ReceiverKind.DIVISION:
        return ratio_statistics(comb_a, comb_b, sqz_a, sqz_b, structure, sample, m)
    return differential_statistics(comb_a, comb_b, sqz_a, sqz_b, structure, sample, m, strong_lo)

"""Noise statistics and SNRs of dual-comb spectroscopy with squeezed or entangled combs."""

from .comb import CombSpec, ConstraintKind, ModeLattice, PowerConstraint, carrier_from_wavelength
from .oracle import cross_validate, monte_carlo_statistics, oracle_variance
from .receivers import PROTOCOLS, Protocol, ReceiverKind, protocol_statistics
from .sample import SampleSpec, single_line_sample
from .snr import SnrReport, constrained_optimal_snr, global_snr, local_snr
from .squeezing import SqueezingSpec, Structure, build_covariance

__all__ = [
    "CombSpec", "ConstraintKind", "ModeLattice", "PowerConstraint", "carrier_from_wavelength",
    "cross_validate", "monte_carlo_statistics", "oracle_variance",
    "PROTOCOLS", "Protocol", "ReceiverKind", "protocol_statistics",
    "SampleSpec", "single_line_sample",
    "SnrReport", "constrained_optimal_snr", "global_snr", "local_snr",
    "SqueezingSpec", "Structure", "build_covariance",
]

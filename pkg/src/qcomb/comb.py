"""Dual-comb mode lattice, comb specifications and power accounting.

Every comb carries M = 2N+1 sharp lines.  Around each line we keep the
zero-mean noise modes at absolute frequency n*rep_rate + k*rep_offset with
k in [-2N, 2N]; that window holds every sideband a beat note at index
|m| <= N can reach.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field

import numpy as np
from scipy import constants


class CombRole(enum.Enum):
    """Which comb of the pair.  The signal comb probes the sample."""

    SIGNAL = "A"
    LOCAL_OSCILLATOR = "B"


class Block(enum.IntEnum):
    """Lattice blocks in storage order."""

    A = 0
    B = 1
    ENV = 2


def carrier_from_wavelength(wavelength):
    """Angular carrier frequency (rad/s) for a vacuum wavelength in metres."""
    if wavelength <= 0:
        raise ValueError("wavelength must be positive")
    return 2.0 * math.pi * constants.c / wavelength


def photon_energy(carrier):
    return constants.hbar * carrier


def _as_line_array(values, n_lines, name, dtype=float):
    arr = np.array(values, dtype=dtype)
    if arr.ndim == 0:
        arr = np.full(n_lines, arr, dtype=dtype)
    if arr.shape != (n_lines,):
        raise ValueError(f"{name} must have {n_lines} entries, got shape {arr.shape}")
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True)
class CombSpec:
    """One comb: geometry plus complex line amplitudes indexed n = -N..N.

    Amplitudes are dimensionless (square = mean photon number per line over
    the acquisition time).  ``line_amplitudes[n + N]`` is line ``n``.
    """

    n_half: int
    line_amplitudes: np.ndarray
    rep_rate: float = 2.0 * math.pi * 1.0e8
    rep_offset: float | None = None
    carrier: float = field(default_factory=lambda: carrier_from_wavelength(1563e-9))
    duration: float = 1.0
    role: CombRole = CombRole.SIGNAL

    def __post_init__(self):
        if int(self.n_half) != self.n_half or self.n_half < 0:
            raise ValueError("n_half must be a non-negative integer")
        object.__setattr__(self, "n_half", int(self.n_half))
        amps = _as_line_array(self.line_amplitudes, self.n_lines, "line_amplitudes", complex)
        if not np.all(np.isfinite(amps)):
            raise ValueError("line amplitudes must be finite")
        object.__setattr__(self, "line_amplitudes", amps)
        if self.rep_offset is None:
            # largest round offset that keeps the sideband windows disjoint
            object.__setattr__(self, "rep_offset", self.rep_rate / (4 * self.n_half + 2))
        if self.rep_rate <= 0 or self.rep_offset <= 0:
            raise ValueError("rep_rate and rep_offset must be positive")
        if 2 * self.n_half * self.rep_offset >= self.rep_rate:
            raise ValueError("2N * rep_offset must stay below rep_rate (modes would overlap)")
        if self.carrier <= 0:
            raise ValueError("carrier must be positive")
        if self.duration <= 0:
            raise ValueError("duration must be positive")
        if not isinstance(self.role, CombRole):
            object.__setattr__(self, "role", CombRole(self.role))

    @classmethod
    def uniform(cls, n_half, amplitude, **kwargs):
        return cls(n_half, np.full(2 * n_half + 1, amplitude, dtype=complex), **kwargs)

    @property
    def n_lines(self):
        return 2 * self.n_half + 1

    @property
    def indices(self):
        return np.arange(-self.n_half, self.n_half + 1)

    def amplitude(self, n):
        if abs(n) > self.n_half:
            return 0.0 + 0.0j
        return self.line_amplitudes[n + self.n_half]

    @property
    def line_spacing(self):
        if self.role is CombRole.SIGNAL:
            return self.rep_rate + self.rep_offset
        return self.rep_rate

    def line_frequencies(self):
        """Line offsets from the carrier (rad/s)."""
        return self.indices * self.line_spacing

    def with_amplitudes(self, amplitudes):
        return CombSpec(self.n_half, amplitudes, self.rep_rate, self.rep_offset,
                        self.carrier, self.duration, self.role)


@dataclass(frozen=True)
class ModeLattice:
    """Index bookkeeping for the A, B and environment noise-mode blocks.

    Each block is the (2N+1) x (4N+1) grid of sites (n, k), stored row-major
    in (n, k).  Blocks follow each other in the order A, B, environment.
    """

    n_half: int

    @property
    def n_lines(self):
        return 2 * self.n_half + 1

    @property
    def n_sidebands(self):
        return 4 * self.n_half + 1

    @property
    def block_size(self):
        return self.n_lines * self.n_sidebands

    @property
    def n_comb_modes(self):
        return 2 * self.block_size

    @property
    def n_modes(self):
        return 3 * self.block_size

    def contains(self, n, k):
        return abs(n) <= self.n_half and abs(k) <= 2 * self.n_half

    def index(self, block, n, k):
        """Mode index of site (n, k) in ``block``; works elementwise on arrays."""
        n = np.asarray(n)
        k = np.asarray(k)
        if np.any(np.abs(n) > self.n_half) or np.any(np.abs(k) > 2 * self.n_half):
            raise IndexError(f"site ({n}, {k}) outside the lattice")
        idx = int(block) * self.block_size + (n + self.n_half) * self.n_sidebands + (k + 2 * self.n_half)
        return int(idx) if idx.ndim == 0 else idx

    def site(self, index):
        """Inverse of :meth:`index`: returns (block, n, k)."""
        block, rem = divmod(int(index), self.block_size)
        row, col = divmod(rem, self.n_sidebands)
        return Block(block), row - self.n_half, col - 2 * self.n_half

    def sites(self):
        """Arrays (n, k) of every site of one block in storage order."""
        n = np.repeat(np.arange(-self.n_half, self.n_half + 1), self.n_sidebands)
        k = np.tile(np.arange(-2 * self.n_half, 2 * self.n_half + 1), self.n_lines)
        return n, k

    def frequency(self, n, k, rep_rate, rep_offset):
        return n * rep_rate + k * rep_offset


def build_mode_lattice(n_half):
    if int(n_half) != n_half or n_half < 0:
        raise ValueError("n_half must be a non-negative integer")
    return ModeLattice(int(n_half))


class ConstraintKind(enum.Enum):
    SAMPLE = "sample"
    DETECTOR = "detector"


@dataclass(frozen=True)
class PowerConstraint:
    kind: ConstraintKind
    budget: float

    def __post_init__(self):
        if not isinstance(self.kind, ConstraintKind):
            object.__setattr__(self, "kind", ConstraintKind(self.kind))
        if not self.budget > 0:
            raise ValueError("power budget must be positive")


def comb_power(comb: CombSpec):
    """Mean optical power (W) with every photon counted at the carrier energy."""
    photons = float(np.sum(np.abs(comb.line_amplitudes) ** 2))
    return photon_energy(comb.carrier) / comb.duration * photons


@dataclass(frozen=True)
class PowerBudget:
    """Per-line photon budget implied by a power constraint.

    With ``signal_only`` the budget binds |A|^2 alone and the LO is free;
    otherwise it binds the mean (|A|^2 + |B|^2)/2.
    """

    per_line: float
    signal_only: bool

    def split(self, fraction):
        """(|A|^2, |B|^2) for comb-A power fraction ``fraction`` of the budget.

        For a signal-only budget the fraction scales |A|^2 and the LO is
        returned as ``inf`` (strong-LO limit).
        """
        upper_ok = fraction <= 1.0 if self.signal_only else fraction < 1.0
        if not (fraction > 0.0 and upper_ok):
            raise ValueError("power fraction outside the feasible interval")
        if self.signal_only:
            return fraction * self.per_line, math.inf
        return 2.0 * fraction * self.per_line, 2.0 * (1.0 - fraction) * self.per_line


def amplitude_from_constraint(constraint: PowerConstraint, receiver, n_lines, duration, carrier):
    from .receivers import ReceiverKind

    if n_lines <= 0 or duration <= 0 or carrier <= 0:
        raise ValueError("M, T and carrier must be positive")
    per_line = constraint.budget * duration / (n_lines * photon_energy(carrier))
    signal_only = (constraint.kind is ConstraintKind.SAMPLE
                   and ReceiverKind(receiver) is ReceiverKind.HETERODYNE)
    return PowerBudget(per_line, signal_only)


def mean_field_after_sample(comb: CombSpec, sample):
    """Line amplitudes after the phase-loss channel: sqrt(kappa) e^{i theta} X."""
    if sample.n_half != comb.n_half:
        raise ValueError("sample and comb cover different line ranges")
    return np.sqrt(sample.kappa) * np.exp(1j * sample.theta) * comb.line_amplitudes

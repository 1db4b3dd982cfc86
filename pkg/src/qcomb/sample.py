"""Sample model: a per-line phase-loss channel with a thermal environment."""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np
from scipy import constants

PHASE_NOISE_LIMIT = 0.3


class PhaseNoiseWarning(UserWarning):
    pass


def _line_array(values, n_lines, name):
    arr = np.array(values, dtype=float)
    if arr.ndim == 0:
        arr = np.full(n_lines, float(arr))
    if arr.shape != (n_lines,):
        raise ValueError(f"{name} must have {n_lines} entries, got shape {arr.shape}")
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True)
class SampleSpec:
    """Per-line transmissivity, phase and environment occupation, n = -N..N."""

    n_half: int
    kappa: np.ndarray
    theta: np.ndarray = 0.0
    thermal: np.ndarray = 0.0

    def __post_init__(self):
        if int(self.n_half) != self.n_half or self.n_half < 0:
            raise ValueError("n_half must be a non-negative integer")
        m = 2 * int(self.n_half) + 1
        object.__setattr__(self, "n_half", int(self.n_half))
        kappa = _line_array(self.kappa, m, "kappa")
        theta = _line_array(self.theta, m, "theta")
        thermal = _line_array(self.thermal, m, "thermal")
        if np.any(kappa < 0) or np.any(kappa > 1) or not np.all(np.isfinite(kappa)):
            raise ValueError("kappa must lie in [0, 1]")
        if np.any(thermal < 0) or not np.all(np.isfinite(thermal)):
            raise ValueError("thermal occupation must be non-negative")
        if not np.all(np.isfinite(theta)):
            raise ValueError("theta must be finite")
        object.__setattr__(self, "kappa", kappa)
        object.__setattr__(self, "theta", theta)
        object.__setattr__(self, "thermal", thermal)

    @classmethod
    def transparent(cls, n_half, thermal=0.0):
        return cls(n_half, 1.0, 0.0, thermal)

    @property
    def n_lines(self):
        return 2 * self.n_half + 1

    def at(self, n):
        """(kappa, theta, thermal) of line n."""
        i = n + self.n_half
        return self.kappa[i], self.theta[i], self.thermal[i]

    def replace(self, kappa=None, theta=None, thermal=None):
        return SampleSpec(
            self.n_half,
            self.kappa if kappa is None else kappa,
            self.theta if theta is None else theta,
            self.thermal if thermal is None else thermal,
        )


def thermal_occupation(carrier, temperature):
    """Bose-Einstein occupation of the environment at the carrier frequency."""
    if not carrier > 0 or not temperature > 0:
        raise ValueError("carrier and temperature must be positive")
    x = constants.hbar * carrier / (constants.k * temperature)
    if x > 700.0:
        return 0.0
    return 1.0 / math.expm1(x)


def single_line_sample(n_half, line, kappa, theta=0.0, thermal=0.0):
    """Transparent sample except for one absorbing line."""
    if abs(line) > n_half:
        raise ValueError(f"line {line} outside [-{n_half}, {n_half}]")
    m = 2 * n_half + 1
    k = np.ones(m)
    th = np.zeros(m)
    k[line + n_half] = kappa
    th[line + n_half] = theta
    return SampleSpec(n_half, k, th, thermal)


@dataclass(frozen=True)
class PhaseNoiseSpec:
    """Phase uncertainty of width ``bound`` applied to every line.

    ``distribution="uniform"`` treats the bound as a hard half-width.
    ``"gaussian"`` treats it as a standard deviation (draws are then not
    bounded).  The closed-form path ignores the distribution and substitutes
    the bound directly.
    """

    bound: float
    distribution: str = "uniform"

    def __post_init__(self):
        if not self.bound >= 0:
            raise ValueError("phase-noise bound must be non-negative")
        if self.distribution not in ("uniform", "gaussian"):
            raise ValueError("distribution must be 'uniform' or 'gaussian'")
        if self.bound > PHASE_NOISE_LIMIT:
            warnings.warn(
                f"phase-noise bound {self.bound} rad exceeds the small-angle regime "
                f"({PHASE_NOISE_LIMIT} rad)",
                PhaseNoiseWarning,
                stacklevel=2,
            )


def sample_phase_draw(spec: PhaseNoiseSpec, n_half, seed):
    """One frozen realization of per-line phases."""
    rng = np.random.default_rng(seed)
    m = 2 * n_half + 1
    if spec.distribution == "gaussian":
        return rng.normal(0.0, spec.bound, m) if spec.bound > 0 else np.zeros(m)
    return rng.uniform(-spec.bound, spec.bound, m)

"""Two-mode squeezing structures and the Gaussian noise covariance.

Quadratures follow x = a + a^dagger and y = -i(a - a^dagger), so vacuum has
unit variance per quadrature.  The covariance stores quadratures interleaved:
entry 2j is x of mode j and entry 2j+1 is y of mode j.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass

import numpy as np
from scipy import sparse

from .comb import Block, CombRole, ModeLattice


class Structure(enum.Enum):
    CLASSICAL = "classical"
    INTRA_SELF_REFERRED = "intra-self"
    INTRA_CROSS_REFERRED = "intra-cross"
    CROSS_LINE = "cross-line"


def db_to_gain(db):
    return 10.0 ** (np.asarray(db, dtype=float) / 10.0)


def gain_to_db(gain):
    return 10.0 * np.log10(gain)


@dataclass(frozen=True)
class SqueezingSpec:
    """Squeezing structure of one comb plus its per-line linear gains."""

    structure: Structure
    gains: np.ndarray

    def __post_init__(self):
        if not isinstance(self.structure, Structure):
            object.__setattr__(self, "structure", Structure(self.structure))
        gains = np.array(self.gains, dtype=float)
        if gains.ndim != 1 or gains.size % 2 == 0:
            raise ValueError("gains must be a 1-D array over an odd number of lines")
        if not np.all(np.isfinite(gains)) or np.any(gains < 1.0):
            raise ValueError("two-mode gains must be finite and >= 1")
        if self.structure is Structure.CLASSICAL and np.any(gains != 1.0):
            raise ValueError("classical structure requires unit gains")
        if self.structure is Structure.CROSS_LINE and not np.array_equal(gains, gains[::-1]):
            # each TMSV pair spans lines n and -n and has a single gain
            raise ValueError("cross-line entanglement needs gains symmetric in n -> -n")
        gains.setflags(write=False)
        object.__setattr__(self, "gains", gains)

    @classmethod
    def uniform(cls, structure, n_half, gain):
        structure = Structure(structure)
        if structure is Structure.CLASSICAL:
            gain = 1.0
        return cls(structure, np.full(2 * n_half + 1, float(gain)))

    @classmethod
    def classical(cls, n_half):
        return cls(Structure.CLASSICAL, np.ones(2 * n_half + 1))

    @property
    def n_half(self):
        return (self.gains.size - 1) // 2

    def gain(self, n):
        return self.gains[n + self.n_half]


def amplification_noise(gain):
    """Quadrature variance of one half of a TMSV pair, (G + 1/G)/2."""
    g = np.asarray(gain, dtype=float)
    if np.any(g < 1.0):
        raise ValueError("gain must be >= 1")
    out = 0.5 * (g + 1.0 / g)
    return float(out) if out.ndim == 0 else out


def rotated_pair_variance(gain, theta):
    """var(e^{i theta} a1 + e^{-i theta} a2^dagger) for a TMSV pair of gain G."""
    g = np.asarray(gain, dtype=float)
    out = ((g * g + 1.0) - (g * g - 1.0) * np.cos(2.0 * np.asarray(theta))) / (2.0 * g)
    return float(out) if np.ndim(out) == 0 else out


def pair_kernel(alpha, beta, gain):
    """var(alpha a1 + beta a2^dagger) for a TMSV pair.

    Reduces to :func:`rotated_pair_variance` for alpha = e^{i theta},
    beta = e^{-i theta}.
    """
    return (abs(alpha + beta) ** 2 / gain + abs(alpha - beta) ** 2 * gain) / 4.0


@dataclass(frozen=True)
class PairingRule:
    """Maps a lattice site of one comb to its TMSV partner site."""

    structure: Structure
    role: CombRole

    def __post_init__(self):
        if self.structure is Structure.CLASSICAL:
            raise ValueError("no pairing: classical combs carry unpaired vacuum noise")

    def partner_coords(self, n, k):
        n = np.asarray(n)
        k = np.asarray(k)
        s, a_comb = self.structure, self.role is CombRole.SIGNAL
        if s is Structure.CROSS_LINE:
            return -n, -k
        mirror_line = (s is Structure.INTRA_SELF_REFERRED) == a_comb
        if mirror_line:
            return n, 2 * n - k
        return n, -k

    def partner(self, n, k):
        """Partner site of (n, k), or None when the site pairs with itself."""
        pn, pk = self.partner_coords(n, k)
        pn, pk = int(pn), int(pk)
        if (pn, pk) == (n, k):
            return None
        return pn, pk


def pairing_rule(structure, comb_role, receiver=None):
    """Pairing rule for one comb.

    When ``receiver`` is given the intra-line structure must match it:
    self-referred pairs belong to the division receiver and cross-referred
    pairs to the heterodyne receiver.
    """
    structure = Structure(structure)
    rule = PairingRule(structure, CombRole(comb_role))
    if receiver is not None:
        _check_structure_receiver(structure, receiver)
    return rule


def _check_structure_receiver(structure, receiver):
    from .receivers import ReceiverKind

    receiver = ReceiverKind(receiver)
    if structure is Structure.INTRA_SELF_REFERRED and receiver is not ReceiverKind.DIVISION:
        raise ValueError("self-referred intra-line squeezing is matched to the division receiver")
    if structure is Structure.INTRA_CROSS_REFERRED and receiver is not ReceiverKind.HETERODYNE:
        raise ValueError("cross-referred intra-line squeezing is matched to the heterodyne receiver")


@dataclass(frozen=True)
class CovarianceModel:
    lattice: ModeLattice
    matrix: sparse.csr_matrix
    boundary_modes: np.ndarray

    @property
    def dimension(self):
        return self.matrix.shape[0]

    def dense(self):
        return self.matrix.toarray()

    def submatrix(self, quad_idx):
        quad_idx = np.asarray(quad_idx)
        return self.matrix[quad_idx][:, quad_idx].toarray()

    def mode_variance(self, mode):
        """Per-quadrature variance of one mode (x and y are equal here)."""
        return float(self.matrix[2 * mode, 2 * mode])


def _comb_block_entries(lattice, spec, role, block):
    n, k = lattice.sites()
    own = lattice.index(block, n, k)
    var = np.ones(n.size)
    if spec.structure is Structure.CLASSICAL or np.all(spec.gains == 1.0):
        return own, var, np.empty(0, int), np.empty(0, int), np.empty(0), np.empty(0, int)
    rule = PairingRule(spec.structure, role)
    pn, pk = rule.partner_coords(n, k)
    gain = spec.gains[n + lattice.n_half]
    fixed = (pn == n) & (pk == k)
    inside = (np.abs(pn) <= lattice.n_half) & (np.abs(pk) <= 2 * lattice.n_half)
    paired = inside & ~fixed
    boundary = ~inside
    gp = 0.5 * (gain + 1.0 / gain)
    var = np.where(fixed, 1.0, gp)
    partner = np.full(n.size, -1)
    partner[paired] = lattice.index(block, pn[paired], pk[paired])
    lead = paired & (own < partner)
    return own, var, own[lead], partner[lead], gain[lead], own[boundary]


def build_covariance(lattice, sqz_a, sqz_b, sample, receiver=None):
    """Sparse quadrature covariance of the A, B and environment blocks.

    Modes whose partner falls outside the lattice are the traced-out half of
    a TMSV pair (variance G' per quadrature) and are listed in
    ``boundary_modes``.
    """
    for spec in (sqz_a, sqz_b):
        if spec.n_half != lattice.n_half:
            raise ValueError("squeezing spec does not match lattice size")
        if receiver is not None and spec.structure is not Structure.CLASSICAL:
            _check_structure_receiver(spec.structure, receiver)
    if sample.n_half != lattice.n_half:
        raise ValueError("sample spec does not match lattice size")

    rows, cols, vals = [], [], []
    boundary = []
    for spec, role, block in ((sqz_a, CombRole.SIGNAL, Block.A), (sqz_b, CombRole.LOCAL_OSCILLATOR, Block.B)):
        own, var, i, j, g, edge = _comb_block_entries(lattice, spec, role, block)
        for q in (0, 1):
            rows.append(2 * own + q)
            cols.append(2 * own + q)
            vals.append(var)
        s = 0.5 * (g - 1.0 / g)
        # <x_i x_j> = -S and <y_i y_j> = +S squeeze x_i + x_j and y_i - y_j
        for q, sign in ((0, -1.0), (1, 1.0)):
            rows += [2 * i + q, 2 * j + q]
            cols += [2 * j + q, 2 * i + q]
            vals += [sign * s, sign * s]
        boundary.append(edge)

    n, k = lattice.sites()
    env = lattice.index(Block.ENV, n, k)
    env_var = 1.0 + 2.0 * sample.thermal[n + lattice.n_half]
    for q in (0, 1):
        rows.append(2 * env + q)
        cols.append(2 * env + q)
        vals.append(env_var)

    dim = 2 * lattice.n_modes
    mat = sparse.coo_matrix(
        (np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))), shape=(dim, dim)
    ).tocsr()
    edge = np.sort(np.concatenate(boundary)).astype(int)
    edge.setflags(write=False)
    return CovarianceModel(lattice, mat, edge)

"""
Microscopic coupling constants feeding the pair kernel.

Two ingredients per pair: the secular nuclear-nuclear dipolar flip-flop
amplitude ``b`` and the hyperfine z-component difference ``delta = A_k - A_l``.
Hyperfine values come from the input file for molecular spins and from the
electron point-dipole field for solvent spins.

Sign/factor convention, fixed project-wide and matched by the exact-dynamics
oracle: ``b`` is the coefficient of (I+I- + I-I+)/2 in the pair Hamiltonian,

    b = -(mu0/4pi) * gamma_k * gamma_l * hbar / r^3 * (1 - 3 cos^2 theta) / 4

with theta measured against the external field axis.  All returned couplings
are in rad/us; input positions in Angstrom, gammas in rad/(s T).
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterator, Sequence

import numpy as np
from scipy.spatial import cKDTree

from .model import (
    GAMMA_E,
    HBAR,
    MU0_OVER_4PI,
    RAD_PER_S_TO_RAD_PER_US,
    GeometryError,
    InputError,
    SpinSystem,
    ElectronCenter,
    NuclearSpin,
    HyperfineSource,
    lookup_gamma,
)
from .bath import BathConfiguration
from .dephasing import (
    CLASS_CODE,
    CLASS_ORDER,
    ContributionSet,
    PairClass,
    modulation_depth,
)

_ANGSTROM = 1.0e-10  # m

DEFAULT_CUTOFF_R = 8.0       # A, solvent pair distance cutoff
DEFAULT_ALPHA2_FLOOR = 1e-10


def _pair_geometry(pos_a, pos_b, field_axis, what: str):
    """Distance (A) and cos(theta) against the field axis; rejects r = 0."""
    d = np.asarray(pos_b, dtype=float) - np.asarray(pos_a, dtype=float)
    r = np.linalg.norm(d, axis=-1)
    if np.any(r == 0.0):
        raise GeometryError(f"coincident positions in {what}")
    cos = d @ np.asarray(field_axis, dtype=float) / r
    return r, cos


def dipolar_b(pos_k, pos_l, gamma_k, gamma_l, field_axis):
    """
    Secular flip-flop amplitude between two like nuclei, rad/us.

    Vanishes at the magic angle and falls off as 1/r^3.  Accepts single
    3-vectors or (N, 3) stacks (gammas broadcast accordingly).
    """
    if np.any(np.asarray(gamma_k) <= 0) or np.any(np.asarray(gamma_l) <= 0):
        raise InputError("gyromagnetic ratios must be positive")
    r, cos = _pair_geometry(pos_k, pos_l, field_axis, "dipolar_b")
    base = MU0_OVER_4PI * gamma_k * gamma_l * HBAR / (r * _ANGSTROM) ** 3
    return -base * (1.0 - 3.0 * cos * cos) / 4.0 * RAD_PER_S_TO_RAD_PER_US


def point_dipole_azz(e_pos, n_pos, gamma_n, field_axis):
    """
    Hyperfine z-component of a nucleus in the electron's point-dipole
    field, rad/us.  Accepts a single nuclear position or an (N, 3) stack.
    """
    r, cos = _pair_geometry(e_pos, n_pos, field_axis, "point_dipole_azz")
    base = MU0_OVER_4PI * GAMMA_E * gamma_n * HBAR / (r * _ANGSTROM) ** 3
    return base * (3.0 * cos * cos - 1.0) * RAD_PER_S_TO_RAD_PER_US


@dataclass(frozen=True)
class PairCoupling:
    """One homonuclear pair: indices, flip-flop b, hyperfine delta, distance."""

    index_k: int
    index_l: int
    b: float            # rad/us
    delta: float        # rad/us
    r_nn: float         # A
    kind: PairClass

    def __post_init__(self):
        if self.r_nn <= 0:
            raise InputError(f"r_nn must be positive, got {self.r_nn}")
        if self.index_k >= self.index_l:
            raise InputError("pairs are stored with index_k < index_l")


class PairCouplingSet(Sequence[PairCoupling]):
    """Column store of pair couplings in canonical (class, k, l) order."""

    def __init__(self, index_k, index_l, delta, b, r_nn, kind_code, *,
                 presorted: bool = False):
        self.index_k = np.asarray(index_k, dtype=np.int64)
        self.index_l = np.asarray(index_l, dtype=np.int64)
        self.delta = np.asarray(delta, dtype=float)
        self.b = np.asarray(b, dtype=float)
        self.r_nn = np.asarray(r_nn, dtype=float)
        self.kind_code = np.asarray(kind_code, dtype=np.int8)
        if not presorted and len(self):
            order = np.lexsort((self.index_l, self.index_k, self.kind_code))
            for name in ("index_k", "index_l", "delta", "b", "r_nn", "kind_code"):
                setattr(self, name, getattr(self, name)[order])

    def __len__(self) -> int:
        return self.index_k.size

    def __getitem__(self, i):
        if isinstance(i, slice):
            idx = np.arange(len(self))[i]
            return PairCouplingSet(
                self.index_k[idx], self.index_l[idx], self.delta[idx],
                self.b[idx], self.r_nn[idx], self.kind_code[idx],
                presorted=True,
            )
        i = int(i)
        return PairCoupling(
            index_k=int(self.index_k[i]),
            index_l=int(self.index_l[i]),
            b=float(self.b[i]),
            delta=float(self.delta[i]),
            r_nn=float(self.r_nn[i]),
            kind=CLASS_ORDER[self.kind_code[i]],
        )

    def __iter__(self) -> Iterator[PairCoupling]:
        for i in range(len(self)):
            yield self[i]

    def contributions(self) -> ContributionSet:
        return ContributionSet(
            self.index_k, self.index_l, self.delta, self.b, self.r_nn,
            self.kind_code, presorted=True,
        )

    def counts_by_class(self) -> dict[PairClass, int]:
        return {
            kind: int(np.count_nonzero(self.kind_code == code))
            for kind, code in CLASS_CODE.items()
        }


def _solvent_hyperfine(system: SpinSystem, positions: np.ndarray,
                       gamma: float) -> np.ndarray:
    if positions.shape[0] == 0:
        return np.zeros(0)
    return point_dipole_azz(
        system.electron.position, positions, gamma, system.field_axis
    )


def build_pair_couplings(system: SpinSystem,
                         bath: BathConfiguration | None = None,
                         cutoff_r: float = DEFAULT_CUTOFF_R,
                         alpha2_floor: float = DEFAULT_ALPHA2_FLOOR,
                         bath_isotope: str = "1H") -> PairCouplingSet:
    """
    Enumerate all homonuclear spin pairs across the three classes.

    Global spin indexing: molecular spins first (file order), then bath
    spins.  Molecular-molecular pairs are always retained; molecule-solvent
    and solvent-solvent pairs beyond ``cutoff_r`` are dropped, as is any
    pair whose modulation depth falls below ``alpha2_floor``.  Heteronuclear
    pairs are excluded outright.
    """
    if cutoff_r <= 0:
        raise InputError("cutoff_r must be positive")
    if alpha2_floor < 0:
        raise InputError("alpha2_floor must be >= 0")

    axis = system.field_axis
    mol_pos = system.spin_positions()
    n_mol = mol_pos.shape[0]
    mol_gamma = np.array([s.gamma for s in system.molecular_spins])
    mol_iso = [s.isotope for s in system.molecular_spins]
    mol_a = np.array([s.a_zz for s in system.molecular_spins]) \
        * RAD_PER_S_TO_RAD_PER_US

    bath_pos = np.zeros((0, 3)) if bath is None else np.asarray(bath.positions)
    n_bath = bath_pos.shape[0]
    bath_gamma = lookup_gamma(bath_isotope)
    bath_a = _solvent_hyperfine(system, bath_pos, bath_gamma)

    blocks = []  # (k, l, delta, b, r, code)

    def add_block(k, l, pos_k, pos_l, a_k, a_l, g_k, g_l, code):
        k = np.asarray(k, dtype=np.int64)
        l = np.asarray(l, dtype=np.int64)
        if k.size == 0:
            return
        b = dipolar_b(pos_k, pos_l, g_k, g_l, axis)
        r = np.linalg.norm(pos_l - pos_k, axis=-1)
        blocks.append((k, l, a_k - a_l, b, r, np.full(k.size, code, np.int8)))

    # intramolecular: all homonuclear pairs, no distance cutoff
    for isotope in sorted(set(mol_iso)):
        idx = np.array([i for i, iso in enumerate(mol_iso) if iso == isotope])
        if idx.size < 2:
            continue
        a, bb = np.triu_indices(idx.size, k=1)
        k, l = idx[a], idx[bb]
        add_block(k, l, mol_pos[k], mol_pos[l], mol_a[k], mol_a[l],
                  mol_gamma[k], mol_gamma[l],
                  CLASS_CODE[PairClass.INTRAMOLECULAR])

    if n_bath:
        finite_cut = float(cutoff_r) if np.isfinite(cutoff_r) else None
        tree = cKDTree(bath_pos)

        # molecule-solvent: homonuclear only
        ks, ls = [], []
        for i in range(n_mol):
            if mol_iso[i] != bath_isotope:
                continue
            if finite_cut is None:
                nb = np.arange(n_bath)
            else:
                nb = np.asarray(tree.query_ball_point(mol_pos[i], finite_cut),
                                dtype=np.int64)
            if nb.size:
                ks.append(np.full(nb.size, i, np.int64))
                ls.append(np.sort(nb))
        if ks:
            k = np.concatenate(ks)
            l_local = np.concatenate(ls)
            add_block(k, n_mol + l_local, mol_pos[k], bath_pos[l_local],
                      mol_a[k], bath_a[l_local], mol_gamma[k], bath_gamma,
                      CLASS_CODE[PairClass.MOLECULE_SOLVENT])

        # solvent-solvent
        if finite_cut is None:
            a, bb = np.triu_indices(n_bath, k=1)
            pairs = np.column_stack([a, bb]) if a.size else np.zeros((0, 2), int)
        else:
            pairs = tree.query_pairs(finite_cut, output_type="ndarray")
        if pairs.shape[0]:
            k, l = pairs[:, 0].astype(np.int64), pairs[:, 1].astype(np.int64)
            add_block(n_mol + k, n_mol + l, bath_pos[k], bath_pos[l],
                      bath_a[k], bath_a[l], bath_gamma, bath_gamma,
                      CLASS_CODE[PairClass.SOLVENT_SOLVENT])

    if not blocks:
        return PairCouplingSet([], [], [], [], [], [], presorted=True)

    index_k = np.concatenate([blk[0] for blk in blocks])
    index_l = np.concatenate([blk[1] for blk in blocks])
    delta = np.concatenate([blk[2] for blk in blocks])
    b = np.concatenate([blk[3] for blk in blocks])
    r_nn = np.concatenate([blk[4] for blk in blocks])
    code = np.concatenate([blk[5] for blk in blocks])

    keep = modulation_depth(delta, b) >= alpha2_floor
    return PairCouplingSet(index_k[keep], index_l[keep], delta[keep],
                           b[keep], r_nn[keep], code[keep])


def point_dipole_spin_system(electron_pos, positions, isotope: str = "1H",
                             field_axis=(0.0, 0.0, 1.0),
                             element: str = "H") -> SpinSystem:
    """
    Synthetic molecule whose hyperfine z-components are all point-dipole
    values from the electron position (useful when no ab initio hyperfine
    data is available).
    """
    positions = np.asarray(positions, dtype=float)
    gamma = lookup_gamma(isotope)
    a_zz = point_dipole_azz(electron_pos, positions, gamma, field_axis) \
        / RAD_PER_S_TO_RAD_PER_US
    a_zz = np.atleast_1d(a_zz)
    spins = tuple(
        NuclearSpin(position=p, isotope=isotope, a_zz=float(a),
                    a_source=HyperfineSource.POINT_DIPOLE)
        for p, a in zip(positions, a_zz)
    )
    atoms = tuple((element, p) for p in positions)
    return SpinSystem(
        electron=ElectronCenter(position=np.asarray(electron_pos, dtype=float)),
        molecular_spins=spins,
        molecular_atoms=atoms,
        field_axis=np.asarray(field_axis, dtype=float),
    )

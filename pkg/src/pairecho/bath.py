"""
Randomized solvent nuclear-spin baths.

Solvent spins are placed uniformly in a cubic box centered on the electron,
with the count drawn from a Poisson law so the requested density holds in
expectation, then carved by an exclusion radius around every molecular atom.

Reproducibility contract: configuration ``i`` of a bath with seed ``s`` is a
pure function of ``(s, i)``.  Each configuration owns a disjoint block of a
counter-based (Philox) stream, so ensembles are bitwise identical no matter
how configurations are distributed across workers or in what order they are
generated.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterator

import numpy as np
from scipy.spatial import cKDTree

from .model import N_AVOGADRO, InputError, SpinSystem, lookup_gamma

DEFAULT_BOX_EDGE = 60.0        # A
DEFAULT_EXCLUSION_RADIUS = 1.0  # A
DEFAULT_N_CONFIGS = 1000

_CM3_TO_A3 = 1.0e-24


@dataclass(frozen=True)
class BathSpec:
    """Parameters of the random solvent bath."""

    box_edge: float = DEFAULT_BOX_EDGE          # A
    density: float = 0.0                        # spins / A^3
    exclusion_radius: float = DEFAULT_EXCLUSION_RADIUS  # A
    isotope: str = "1H"
    n_configs: int = DEFAULT_N_CONFIGS
    seed: int = 0

    def __post_init__(self):
        if self.box_edge <= 0:
            raise InputError(f"box_edge must be positive, got {self.box_edge}")
        if self.density < 0:
            raise InputError(f"density must be >= 0, got {self.density}")
        if self.exclusion_radius < 0:
            raise InputError("exclusion_radius must be >= 0")
        if self.n_configs < 1:
            raise InputError("n_configs must be >= 1")
        lookup_gamma(self.isotope)  # reject unknown isotopes early

    @property
    def expected_count(self) -> float:
        return self.density * self.box_edge**3


@dataclass(frozen=True)
class BathConfiguration:
    """One realization of solvent spin positions (A)."""

    positions: np.ndarray
    config_index: int

    def __post_init__(self):
        pos = np.asarray(self.positions, dtype=float).reshape(-1, 3).copy()
        pos.flags.writeable = False
        object.__setattr__(self, "positions", pos)

    def __len__(self) -> int:
        return self.positions.shape[0]


def density_from_solvent(mass_density: float, molar_mass: float,
                         spins_per_molecule: int,
                         dilution_factor: float = 1.0) -> float:
    """
    Spin number density in A^-3 from bulk solvent properties.

    mass_density in g/cm^3, molar_mass in g/mol.  ``dilution_factor`` scales
    the result linearly (0.5 models a 50% spin-depleted solvent).
    """
    if mass_density <= 0 or molar_mass <= 0:
        raise InputError("mass_density and molar_mass must be positive")
    if spins_per_molecule < 0:
        raise InputError("spins_per_molecule must be >= 0")
    if not 0.0 < dilution_factor <= 1.0:
        raise InputError("dilution_factor must lie in (0, 1]")
    per_cm3 = mass_density * N_AVOGADRO * spins_per_molecule / molar_mass
    return dilution_factor * per_cm3 * _CM3_TO_A3


def _rng_for_config(seed: int, config_index: int) -> np.random.Generator:
    # each configuration gets its own 2^128-draw block of the Philox stream
    return np.random.Generator(
        np.random.Philox(key=seed, counter=int(config_index) << 128)
    )


def sample_configuration(spec: BathSpec, system: SpinSystem | None,
                         config_index: int) -> BathConfiguration:
    """
    Draw one bath configuration: Poisson count, uniform positions in the
    box around the electron, exclusion carve-out around molecular atoms.
    """
    rng = _rng_for_config(spec.seed, config_index)
    center = np.zeros(3) if system is None else system.electron.position
    n = int(rng.poisson(spec.expected_count))
    half = spec.box_edge / 2.0
    pos = rng.uniform(-half, half, size=(n, 3)) + center
    if system is not None and spec.exclusion_radius > 0 and n > 0:
        atoms = system.atom_positions()
        if atoms.shape[0]:
            d, _ = cKDTree(atoms).query(pos, k=1)
            pos = pos[d >= spec.exclusion_radius]
    return BathConfiguration(positions=pos, config_index=config_index)


def ensemble(spec: BathSpec,
             system: SpinSystem | None) -> Iterator[BathConfiguration]:
    """Yield the spec's configurations in index order 0..n_configs-1."""
    for i in range(spec.n_configs):
        yield sample_configuration(spec, system, i)

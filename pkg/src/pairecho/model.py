"""
Domain types, physical constants, and the unit system.

Internal units
--------------
- distance: Angstrom (A)
- time: microsecond (us)
- couplings / angular frequencies: rad/us
- gyromagnetic ratios: rad/(s T)  (SI, converted at coupling evaluation)

Hyperfine z-components on :class:`NuclearSpin` are stored in rad/s, matching
the input-file convention; pair-building converts them to rad/us.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import Enum
from types import MappingProxyType

import numpy as np

# CODATA recommended values (SI)
MU0_OVER_4PI = 1.0e-7            # T m / A
HBAR = 1.054571817e-34           # J s
GAMMA_E = 1.76085963e11          # rad/(s T), electron gyromagnetic ratio magnitude
N_AVOGADRO = 6.02214076e23       # 1/mol

# unit conversions
RAD_PER_S_TO_RAD_PER_US = 1.0e-6
RAD_PER_US_TO_RAD_PER_S = 1.0e6

# gyromagnetic ratios of the supported spin-1/2 isotopes, rad/(s T)
ISOTOPE_GAMMAS = MappingProxyType({
    "1H": 2.6752218744e8,
    "19F": 2.51815e8,
})


class PairEchoError(Exception):
    """Base class for all package errors."""


class InputError(PairEchoError):
    """Invalid user input (bad file, unknown isotope, schema violation)."""


class UnknownIsotopeError(InputError):
    def __init__(self, isotope: str):
        super().__init__(
            f"isotope {isotope!r} is not registered "
            f"(known: {', '.join(sorted(ISOTOPE_GAMMAS))})"
        )
        self.isotope = isotope


class ParseError(InputError):
    """Malformed structured text; carries the offending line number."""

    def __init__(self, message: str, line: int | None = None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


class GeometryError(PairEchoError):
    """Degenerate geometry (coincident positions)."""


class CapacityError(PairEchoError):
    """Problem size exceeds a hard limit (e.g. oracle Hilbert space)."""


class InsufficientDecayError(PairEchoError):
    """A coherence curve never decays below the required threshold."""

    def __init__(self, threshold: float, minimum: float):
        super().__init__(
            f"curve never decays below {threshold:.6g} "
            f"(minimum value reached: {minimum:.6g})"
        )
        self.threshold = threshold
        self.minimum = minimum


class PipelineError(PairEchoError):
    """Failure inside a named pipeline stage; wraps the original error."""

    def __init__(self, stage: str, cause: Exception):
        super().__init__(f"stage '{stage}': {cause}")
        self.stage = stage
        self.cause = cause


def lookup_gamma(isotope: str) -> float:
    """Gyromagnetic ratio in rad/(s T) for a registered spin-1/2 isotope."""
    try:
        return ISOTOPE_GAMMAS[isotope]
    except KeyError:
        raise UnknownIsotopeError(isotope) from None


def _as_vec3(x, name: str) -> np.ndarray:
    v = np.asarray(x, dtype=float)
    if v.shape != (3,):
        raise InputError(f"{name} must be a 3-vector, got shape {v.shape}")
    if not np.all(np.isfinite(v)):
        raise InputError(f"{name} has non-finite coordinates: {v}")
    v = v.copy()
    v.flags.writeable = False
    return v


class HyperfineSource(Enum):
    FROM_FILE = "from_file"
    POINT_DIPOLE = "point_dipole"


@dataclass(frozen=True)
class NuclearSpin:
    """One spin-1/2 nucleus: position (A), isotope, gamma, hyperfine A_zz (rad/s)."""

    position: np.ndarray
    isotope: str
    a_zz: float
    a_source: HyperfineSource
    gamma: float = field(init=False)

    def __post_init__(self):
        object.__setattr__(self, "position", _as_vec3(self.position, "spin position"))
        object.__setattr__(self, "gamma", lookup_gamma(self.isotope))
        if not math.isfinite(self.a_zz):
            raise InputError(f"a_zz must be finite, got {self.a_zz}")


@dataclass(frozen=True)
class ElectronCenter:
    """Effective point position of the electron spin, A."""

    position: np.ndarray

    def __post_init__(self):
        object.__setattr__(
            self, "position", _as_vec3(self.position, "electron position")
        )


@dataclass(frozen=True)
class SpinSystem:
    """
    The molecule: electron center, nuclear spins, atom geometry, field axis.

    ``molecular_atoms`` is the full list of (element, position) pairs used for
    solvent exclusion; every spin must sit on one of these atoms.
    ``field_axis`` is the unit quantization axis (defines z for all zz
    components); it must already be normalized to 1 within 1e-12.
    """

    electron: ElectronCenter
    molecular_spins: tuple[NuclearSpin, ...]
    molecular_atoms: tuple[tuple[str, np.ndarray], ...]
    field_axis: np.ndarray = field(default_factory=lambda: np.array([0.0, 0.0, 1.0]))

    def __post_init__(self):
        object.__setattr__(self, "molecular_spins", tuple(self.molecular_spins))
        atoms = tuple(
            (el, _as_vec3(pos, f"atom {i} position"))
            for i, (el, pos) in enumerate(self.molecular_atoms)
        )
        object.__setattr__(self, "molecular_atoms", atoms)
        axis = _as_vec3(self.field_axis, "field_axis")
        if abs(np.linalg.norm(axis) - 1.0) > 1e-12:
            raise InputError(
                f"field_axis must have unit norm within 1e-12, "
                f"got |axis| = {np.linalg.norm(axis):.15g}"
            )
        object.__setattr__(self, "field_axis", axis)
        atom_pos = self.atom_positions()
        for i, spin in enumerate(self.molecular_spins):
            if len(atoms) == 0 or not np.any(
                np.all(np.abs(atom_pos - spin.position) <= 1e-9, axis=1)
            ):
                raise InputError(
                    f"molecular spin {i} at {spin.position} does not coincide "
                    "with any molecular atom"
                )

    def atom_positions(self) -> np.ndarray:
        """(n_atoms, 3) array of atom coordinates, A."""
        if not self.molecular_atoms:
            return np.zeros((0, 3))
        return np.array([pos for _, pos in self.molecular_atoms])

    def spin_positions(self) -> np.ndarray:
        """(n_spins, 3) array of nuclear spin coordinates, A."""
        if not self.molecular_spins:
            return np.zeros((0, 3))
        return np.array([s.position for s in self.molecular_spins])

    @property
    def n_spins(self) -> int:
        return len(self.molecular_spins)

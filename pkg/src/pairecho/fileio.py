"""
Input parsing and result serialization.

System file schema (structured text, '#' starts a comment, blank lines
ignored; sections may appear in any order but ``atoms`` must precede
``spins``):

    electron    <x> <y> <z>              # required, Angstrom
    field_axis  <ux> <uy> <uz>           # optional, default 0 0 1
    atoms <N>
    <element> <x> <y> <z>                # N rows, Angstrom
    spins <M> unit=rad_per_s
    <atom_index> <isotope> <a_zz>        # M rows; 0-based atom index

Hyperfine z-components are supplied in rad/s; the unit token in the spins
header is mandatory so MHz values cannot slip in silently.  A non-unit
field_axis is normalized with a warning.

CSV output uses 17 significant digits so values survive a write/read
round trip exactly.
"""

from __future__ import annotations

import hashlib
import json
import warnings
from dataclasses import asdict, dataclass, fields, replace
from pathlib import Path

import numpy as np

from .bath import BathSpec
from .model import (
    RAD_PER_S_TO_RAD_PER_US,
    ElectronCenter,
    HyperfineSource,
    InputError,
    NuclearSpin,
    ParseError,
    SpinSystem,
    UnknownIsotopeError,
)
from .oracle import SmallSpinProblem

FLOAT_FORMAT = "%.17g"


# --- XYZ ---------------------------------------------------------------------

def parse_xyz(text: str) -> list[tuple[str, np.ndarray]]:
    """Parse standard XYZ text into (element, position) pairs, file order."""
    lines = text.splitlines()
    if not lines:
        raise ParseError("empty XYZ document", line=1)
    try:
        count = int(lines[0].strip())
    except ValueError:
        raise ParseError(f"expected atom count, got {lines[0]!r}", line=1) \
            from None
    if count < 0:
        raise ParseError("atom count must be >= 0", line=1)
    atoms = []
    for i in range(count):
        lineno = i + 3  # count line + comment line + 1-based row
        if lineno - 1 >= len(lines):
            raise ParseError(
                f"expected {count} atom rows, found {i}", line=lineno
            )
        row = lines[lineno - 1].split()
        if len(row) < 4:
            raise ParseError(
                f"malformed atom row (need 'element x y z'): "
                f"{lines[lineno - 1]!r}", line=lineno,
            )
        try:
            pos = np.array([float(v) for v in row[1:4]])
        except ValueError:
            raise ParseError(
                f"non-numeric coordinate in {lines[lineno - 1]!r}",
                line=lineno,
            ) from None
        atoms.append((row[0], pos))
    for j in range(count + 2, len(lines)):
        if lines[j].strip():
            raise ParseError("unexpected data after atom rows", line=j + 1)
    return atoms


def format_xyz(atoms, comment: str = "") -> str:
    lines = [str(len(atoms)), comment.replace("\n", " ")]
    for element, pos in atoms:
        lines.append(
            f"{element} " + " ".join(FLOAT_FORMAT % v for v in pos)
        )
    return "\n".join(lines) + "\n"


def write_xyz(path, atoms, comment: str = "") -> None:
    Path(path).write_text(format_xyz(atoms, comment))


# --- system files ------------------------------------------------------------

def _tokens(line: str) -> list[str]:
    return line.split("#", 1)[0].split()


def parse_system(text: str) -> SpinSystem:
    """Parse a system file into a validated :class:`SpinSystem`."""
    lines = text.splitlines()
    electron = None
    field_axis = None
    atoms: list[tuple[str, np.ndarray]] | None = None
    spin_rows: list[tuple[int, str, float, int]] | None = None

    i = 0
    while i < len(lines):
        lineno = i + 1
        toks = _tokens(lines[i])
        i += 1
        if not toks:
            continue
        key = toks[0].lower()
        if key == "electron":
            electron = _parse_vec(toks[1:], lineno, "electron")
        elif key == "field_axis":
            field_axis = _parse_vec(toks[1:], lineno, "field_axis")
        elif key == "atoms":
            if len(toks) != 2:
                raise ParseError("usage: atoms <count>", line=lineno)
            n = _parse_count(toks[1], lineno)
            atoms, i = _parse_atom_rows(lines, i, n)
        elif key == "spins":
            if atoms is None:
                raise ParseError("spins section must follow atoms",
                                 line=lineno)
            if len(toks) != 3 or toks[2] != "unit=rad_per_s":
                raise ParseError(
                    "usage: spins <count> unit=rad_per_s "
                    "(hyperfine values must be given in rad/s)",
                    line=lineno,
                )
            m = _parse_count(toks[1], lineno)
            spin_rows, i = _parse_spin_rows(lines, i, m, len(atoms))
        else:
            raise ParseError(f"unknown directive {toks[0]!r}", line=lineno)

    if electron is None:
        raise ParseError("missing electron position", line=len(lines) + 1)
    if atoms is None:
        atoms = []
    if spin_rows is None:
        spin_rows = []

    if field_axis is None:
        field_axis = np.array([0.0, 0.0, 1.0])
    else:
        norm = np.linalg.norm(field_axis)
        if norm == 0:
            raise InputError("field_axis must be non-zero")
        if abs(norm - 1.0) > 1e-12:
            warnings.warn(
                f"field_axis renormalized from {field_axis.tolist()} "
                f"(norm {norm:.6g})", stacklevel=2,
            )
            field_axis = field_axis / norm

    spins = []
    for atom_index, isotope, a_zz, lineno in spin_rows:
        try:
            spins.append(NuclearSpin(
                position=atoms[atom_index][1], isotope=isotope, a_zz=a_zz,
                a_source=HyperfineSource.FROM_FILE,
            ))
        except UnknownIsotopeError as exc:
            raise ParseError(str(exc), line=lineno) from None

    return SpinSystem(
        electron=ElectronCenter(position=electron),
        molecular_spins=tuple(spins),
        molecular_atoms=tuple(atoms),
        field_axis=field_axis,
    )


def load_system(path) -> SpinSystem:
    return parse_system(Path(path).read_text())


def _parse_vec(toks, lineno, name):
    if len(toks) != 3:
        raise ParseError(f"{name} needs exactly 3 coordinates", line=lineno)
    try:
        return np.array([float(v) for v in toks])
    except ValueError:
        raise ParseError(f"non-numeric {name} coordinate", line=lineno) \
            from None


def _parse_count(tok, lineno):
    try:
        n = int(tok)
    except ValueError:
        raise ParseError(f"expected a count, got {tok!r}", line=lineno) \
            from None
    if n < 0:
        raise ParseError("count must be >= 0", line=lineno)
    return n


def _parse_atom_rows(lines, i, n):
    atoms = []
    while len(atoms) < n:
        if i >= len(lines):
            raise ParseError(
                f"expected {n} atom rows, found {len(atoms)}", line=i + 1
            )
        lineno = i + 1
        toks = _tokens(lines[i])
        i += 1
        if not toks:
            continue
        if len(toks) != 4:
            raise ParseError(
                "atom row must be '<element> <x> <y> <z>'", line=lineno
            )
        try:
            pos = np.array([float(v) for v in toks[1:]])
        except ValueError:
            raise ParseError("non-numeric atom coordinate", line=lineno) \
                from None
        atoms.append((toks[0], pos))
    return atoms, i


def _parse_spin_rows(lines, i, m, n_atoms):
    rows = []
    seen: set[int] = set()
    while len(rows) < m:
        if i >= len(lines):
            raise ParseError(
                f"expected {m} spin rows, found {len(rows)}", line=i + 1
            )
        lineno = i + 1
        toks = _tokens(lines[i])
        i += 1
        if not toks:
            continue
        if len(toks) != 3:
            raise ParseError(
                "spin row must be '<atom_index> <isotope> <a_zz>'",
                line=lineno,
            )
        idx = _parse_count(toks[0], lineno)
        if idx >= n_atoms:
            raise ParseError(
                f"spin references atom index {idx}, but only {n_atoms} "
                "atoms are defined", line=lineno,
            )
        if idx in seen:
            raise ParseError(
                f"atom index {idx} already carries a spin", line=lineno
            )
        seen.add(idx)
        try:
            a_zz = float(toks[2])
        except ValueError:
            raise ParseError("non-numeric a_zz value", line=lineno) from None
        rows.append((idx, toks[1], a_zz, lineno))
    return rows, i


# --- oracle problem files ----------------------------------------------------

def load_problem(path) -> SmallSpinProblem:
    """Oracle problem from JSON: a_zz_rad_per_s list, b_rad_per_s matrix."""
    try:
        doc = json.loads(Path(path).read_text())
    except json.JSONDecodeError as exc:
        raise InputError(f"invalid problem JSON: {exc}") from None
    try:
        a = np.asarray(doc["a_zz_rad_per_s"], dtype=float)
        b = np.asarray(doc["b_rad_per_s"], dtype=float)
    except (KeyError, TypeError, ValueError) as exc:
        raise InputError(
            "problem JSON needs 'a_zz_rad_per_s' (list) and "
            f"'b_rad_per_s' (matrix): {exc}"
        ) from None
    return SmallSpinProblem(
        a_list=a * RAD_PER_S_TO_RAD_PER_US,
        b_matrix=b * RAD_PER_S_TO_RAD_PER_US,
    )


# --- delimited output --------------------------------------------------------

def _format_cell(v) -> str:
    if isinstance(v, (bool, np.bool_)):
        return str(int(v))
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        return FLOAT_FORMAT % v
    return str(v)


def write_csv(path, names: list[str], columns: list) -> None:
    """Write named columns as comma-separated text, full double precision."""
    columns = [np.asarray(c) if not isinstance(c, list) else c
               for c in columns]
    n_rows = len(columns[0]) if columns else 0
    for c in columns:
        if len(c) != n_rows:
            raise InputError("CSV columns must have equal length")
    lines = [",".join(names)]
    for r in range(n_rows):
        lines.append(",".join(_format_cell(c[r]) for c in columns))
    Path(path).write_text("\n".join(lines) + "\n")


def read_csv(path) -> tuple[list[str], dict[str, np.ndarray]]:
    """Read a CSV written by :func:`write_csv`; numeric columns become float."""
    lines = Path(path).read_text().splitlines()
    if not lines:
        raise ParseError("empty CSV file", line=1)
    names = lines[0].split(",")
    raw = [ln.split(",") for ln in lines[1:] if ln.strip()]
    for lineno, row in enumerate(raw, start=2):
        if len(row) != len(names):
            raise ParseError(
                f"expected {len(names)} fields, got {len(row)}", line=lineno
            )
    columns: dict[str, np.ndarray] = {}
    for j, name in enumerate(names):
        vals = [row[j] for row in raw]
        try:
            columns[name] = np.array([float(v) for v in vals])
        except ValueError:
            columns[name] = np.array(vals)
    return names, columns


def sha256_of(path) -> str:
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()


# --- run configuration and manifests ------------------------------------------

@dataclass(frozen=True)
class RunConfig:
    """Every knob of a simulation run; serializable into the manifest."""

    system: str | None = None
    out_dir: str | None = None
    density: float = 0.0            # spins/A^3; 0 = isolated molecule
    box_edge: float = 60.0          # A
    exclusion_radius: float = 1.0   # A
    isotope: str = "1H"
    n_configs: int = 1000
    seed: int = 0
    t_max: float = 100.0            # us
    n_times: int = 1001
    cutoff_r: float = 8.0           # A
    alpha2_floor: float = 1e-10
    classes: tuple[str, ...] | None = None
    t2_method: str = "one_over_e"
    horizon: float | None = None    # us; default t_max
    top_n: int = 10
    bin_width: float = 0.5          # A
    group: tuple[int, ...] | None = None
    factors: tuple[float, ...] = (1.0,)
    config_index: int = 0
    workers: int = 1
    plot: bool = True

    def bath_spec(self) -> BathSpec:
        return BathSpec(
            box_edge=self.box_edge, density=self.density,
            exclusion_radius=self.exclusion_radius, isotope=self.isotope,
            n_configs=self.n_configs, seed=self.seed,
        )

    def time_grid(self) -> np.ndarray:
        if self.t_max <= 0 or self.n_times < 2:
            raise InputError("need t_max > 0 and n_times >= 2")
        return np.linspace(0.0, self.t_max, self.n_times)

    @property
    def ranking_horizon(self) -> float:
        return self.t_max if self.horizon is None else self.horizon

    def as_dict(self) -> dict:
        d = asdict(self)
        for key in ("classes", "factors", "group"):
            if d[key] is not None:
                d[key] = list(d[key])
        return d

    def merged(self, overrides: dict) -> "RunConfig":
        known = {f.name for f in fields(self)}
        unknown = set(overrides) - known
        if unknown:
            raise InputError(
                f"unknown configuration keys: {', '.join(sorted(unknown))}"
            )
        clean = dict(overrides)
        for key in ("classes", "factors", "group"):
            if clean.get(key) is not None:
                clean[key] = tuple(clean[key])
        return replace(self, **clean)


def load_config(path) -> dict:
    """Raw config dict from JSON; accepts a manifest (its run_config)."""
    try:
        doc = json.loads(Path(path).read_text())
    except json.JSONDecodeError as exc:
        raise InputError(f"invalid config JSON: {exc}") from None
    if not isinstance(doc, dict):
        raise InputError("config JSON must be an object")
    if "run_config" in doc:
        doc = doc["run_config"]
    return doc


def write_manifest(out_dir, command: str, config: RunConfig,
                   outputs: list[str], version: str) -> Path:
    """Record every parameter, the seed, code version, and output hashes."""
    out_dir = Path(out_dir)
    manifest = {
        "tool": "pairecho",
        "version": version,
        "command": command,
        "run_config": config.as_dict(),
        "outputs": {
            name: sha256_of(out_dir / name) for name in sorted(outputs)
        },
    }
    path = out_dir / "manifest.json"
    path.write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n")
    return path

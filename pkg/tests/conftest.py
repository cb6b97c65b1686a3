"""Shared builders for synthetic geometries and systems."""

import numpy as np
import pytest

from pairecho.couplings import point_dipole_spin_system

# acceptance criterion result lines, echoed in the terminal summary
ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)

# equilateral proton triangle with the H-H distance of a methyl group
METHYL_HH = 1.78  # A


def methyl_positions(center=(0.0, 0.0, 0.0)) -> np.ndarray:
    radius = METHYL_HH / np.sqrt(3.0)
    angles = np.array([0.0, 2.0 * np.pi / 3.0, 4.0 * np.pi / 3.0])
    pts = np.stack([radius * np.cos(angles), radius * np.sin(angles),
                    np.zeros(3)], axis=1)
    return pts + np.asarray(center, dtype=float)


def tilted_axis() -> np.ndarray:
    # tilted 45 deg, azimuth 30 deg: all three proton pairs then carry
    # comparable hyperfine differences (no accidentally degenerate pair)
    tilt, azimuth = np.pi / 4.0, np.pi / 6.0
    return np.array([
        np.sin(tilt) * np.cos(azimuth),
        np.sin(tilt) * np.sin(azimuth),
        np.cos(tilt),
    ])


def methyl_system(electron_distance: float, axis=None):
    """
    Synthetic molecule: proton triangle in the z = 0 plane, electron on the
    triangle axis at the given electron-proton distance (A), point-dipole
    hyperfine values.
    """
    pts = methyl_positions()
    radius = METHYL_HH / np.sqrt(3.0)
    height = np.sqrt(electron_distance**2 - radius**2)
    axis = tilted_axis() if axis is None else np.asarray(axis, dtype=float)
    return point_dipole_spin_system(
        electron_pos=np.array([0.0, 0.0, height]),
        positions=pts,
        isotope="1H",
        field_axis=axis,
    )


SYSTEM_TEXT = """\
# three protons, explicit hyperfine values
electron 0.0 0.0 5.5
field_axis 0.0 0.0 1.0
atoms 4
C 0.0 0.0 -1.1
H 1.0277 0.0 0.0
H -0.51385 0.89 0.0
H -0.51385 -0.89 0.0
spins 3 unit=rad_per_s
1 1H 2.5e6
2 1H 1.1e6
3 1H 1.8e6
"""


@pytest.fixture
def system_file(tmp_path):
    path = tmp_path / "molecule.sys"
    path.write_text(SYSTEM_TEXT)
    return path

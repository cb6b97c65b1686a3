import numpy as np
import pytest

from pairecho import model
from pairecho.model import (
    ElectronCenter,
    HyperfineSource,
    InputError,
    NuclearSpin,
    SpinSystem,
    UnknownIsotopeError,
    lookup_gamma,
)

# independently transcribed CODATA values
CODATA = {
    "hbar": 1.054571817e-34,
    "gamma_e": 1.76085963e11,
    "gamma_1H": 2.6752218744e8,
    "gamma_19F": 2.51815e8,
    "n_avogadro": 6.02214076e23,
}


def test_lookup_gamma_proton():
    assert lookup_gamma("1H") == pytest.approx(2.6752e8, rel=1e-4)
    assert lookup_gamma("1H") == CODATA["gamma_1H"]


def test_lookup_gamma_fluorine():
    assert lookup_gamma("19F") == pytest.approx(2.5181e8, rel=1e-4)


def test_lookup_gamma_unknown_isotope():
    with pytest.raises(UnknownIsotopeError) as err:
        lookup_gamma("13C")
    assert "13C" in str(err.value)


@pytest.mark.parametrize("name,value", [
    ("HBAR", CODATA["hbar"]),
    ("GAMMA_E", CODATA["gamma_e"]),
    ("MU0_OVER_4PI", 1e-7),
    ("N_AVOGADRO", CODATA["n_avogadro"]),
])
def test_constants_match_codata_to_6_figures(name, value):
    assert getattr(model, name) == pytest.approx(value, rel=1e-6)


def test_unit_round_trip_is_identity():
    rng = np.random.default_rng(1)
    x = rng.uniform(1e-3, 1e9, size=100)
    back = (x * model.RAD_PER_S_TO_RAD_PER_US) * model.RAD_PER_US_TO_RAD_PER_S
    assert np.allclose(back, x, rtol=1e-12, atol=0)


def test_registry_is_immutable():
    with pytest.raises(TypeError):
        model.ISOTOPE_GAMMAS["1H"] = 1.0  # type: ignore[index]


def test_nuclear_spin_rejects_unknown_isotope():
    with pytest.raises(UnknownIsotopeError):
        NuclearSpin(position=[0, 0, 0], isotope="2H", a_zz=0.0,
                    a_source=HyperfineSource.FROM_FILE)


def test_nuclear_spin_rejects_non_finite_hyperfine():
    with pytest.raises(InputError):
        NuclearSpin(position=[0, 0, 0], isotope="1H", a_zz=float("nan"),
                    a_source=HyperfineSource.FROM_FILE)


def test_nuclear_spin_is_frozen():
    spin = NuclearSpin(position=[0, 0, 0], isotope="1H", a_zz=1.0,
                       a_source=HyperfineSource.FROM_FILE)
    with pytest.raises(AttributeError):
        spin.a_zz = 2.0
    with pytest.raises(ValueError):
        spin.position[0] = 5.0
    assert spin.gamma == lookup_gamma("1H")


def _spin_at(pos, a_zz=1e5):
    return NuclearSpin(position=pos, isotope="1H", a_zz=a_zz,
                       a_source=HyperfineSource.FROM_FILE)


def test_spin_system_rejects_non_unit_field_axis():
    with pytest.raises(InputError):
        SpinSystem(
            electron=ElectronCenter(position=[0, 0, 0]),
            molecular_spins=(),
            molecular_atoms=(),
            field_axis=[0.0, 0.0, 2.0],
        )


def test_spin_system_accepts_unit_axis_within_tolerance():
    axis = np.array([1.0, 1.0, 1.0]) / np.sqrt(3.0)
    system = SpinSystem(
        electron=ElectronCenter(position=[0, 0, 0]),
        molecular_spins=(),
        molecular_atoms=(),
        field_axis=axis,
    )
    assert np.linalg.norm(system.field_axis) == pytest.approx(1.0, abs=1e-12)


def test_spin_system_requires_spins_on_atoms():
    with pytest.raises(InputError):
        SpinSystem(
            electron=ElectronCenter(position=[0, 0, 0]),
            molecular_spins=(_spin_at([1.0, 0.0, 0.0]),),
            molecular_atoms=(("H", np.array([0.0, 0.0, 0.0])),),
        )


def test_spin_system_valid_construction():
    system = SpinSystem(
        electron=ElectronCenter(position=[0, 0, 5.0]),
        molecular_spins=(_spin_at([1.0, 0.0, 0.0]),),
        molecular_atoms=(("H", np.array([1.0, 0.0, 0.0])),
                         ("C", np.array([0.0, 0.0, -1.0]))),
    )
    assert system.n_spins == 1
    assert system.atom_positions().shape == (2, 3)


def test_electron_center_rejects_non_finite():
    with pytest.raises(InputError):
        ElectronCenter(position=[0.0, np.inf, 0.0])

import numpy as np
import pytest
from scipy.spatial.transform import Rotation

from pairecho.bath import BathConfiguration
from pairecho.couplings import (
    build_pair_couplings,
    dipolar_b,
    point_dipole_azz,
    point_dipole_spin_system,
)
from pairecho.dephasing import PairClass
from pairecho.model import (
    GAMMA_E,
    HBAR,
    ISOTOPE_GAMMAS,
    MU0_OVER_4PI,
    ElectronCenter,
    GeometryError,
    HyperfineSource,
    InputError,
    NuclearSpin,
    SpinSystem,
)

G_H = ISOTOPE_GAMMAS["1H"]
G_F = ISOTOPE_GAMMAS["19F"]
Z = np.array([0.0, 0.0, 1.0])
MAGIC = np.arccos(1.0 / np.sqrt(3.0))


def base_factor(gamma_a, gamma_b, r_angstrom):
    """Independent hand evaluation of (mu0/4pi) ga gb hbar / r^3, rad/s."""
    return MU0_OVER_4PI * gamma_a * gamma_b * HBAR / (r_angstrom * 1e-10) ** 3


# --- dipolar flip-flop amplitude ----------------------------------------------

def test_dipolar_b_magic_angle_zero():
    r = 3.0
    pos = r * np.array([np.sin(MAGIC), 0.0, np.cos(MAGIC)])
    b = dipolar_b([0, 0, 0], pos, G_H, G_H, Z)
    scale = base_factor(G_H, G_H, r) * 1e-6
    assert abs(b) <= 1e-12 * scale


def test_dipolar_b_hand_value_two_protons():
    # r = 2 A, theta = 0: base ~ 9.43e4 rad/s, b = +base/2 ~ +4.7e4 rad/s
    b = dipolar_b([0, 0, 0], [0, 0, 2.0], G_H, G_H, Z)
    base = base_factor(G_H, G_H, 2.0)
    assert base == pytest.approx(9.43e4, rel=1e-3)
    assert b * 1e6 == pytest.approx(base / 2.0, rel=1e-12)
    assert b * 1e6 == pytest.approx(4.717e4, rel=1e-3)


def test_dipolar_b_inverse_cube():
    p1, p2 = np.array([0.3, -0.2, 0.1]), np.array([1.2, 0.5, 1.9])
    b1 = dipolar_b(p1, p2, G_H, G_H, Z)
    b2 = dipolar_b(p1, p1 + 2.0 * (p2 - p1), G_H, G_H, Z)
    assert b1 / b2 == pytest.approx(8.0, rel=1e-12)


def test_dipolar_b_argument_exchange_symmetry():
    p1, p2 = np.array([0.0, 1.0, 2.0]), np.array([2.0, -1.0, 0.5])
    assert dipolar_b(p1, p2, G_H, G_H, Z) == dipolar_b(p2, p1, G_H, G_H, Z)


def test_dipolar_b_translation_invariance():
    p1, p2 = np.array([0.0, 1.0, 2.0]), np.array([2.0, -1.0, 0.5])
    shift = np.array([10.0, -4.0, 3.0])
    assert dipolar_b(p1, p2, G_H, G_H, Z) == pytest.approx(
        dipolar_b(p1 + shift, p2 + shift, G_H, G_H, Z), rel=1e-12)


def test_couplings_rotation_invariance():
    rng = np.random.default_rng(9)
    for _ in range(20):
        p1, p2 = rng.uniform(-5, 5, (2, 3))
        e = rng.uniform(-5, 5, 3)
        rot = Rotation.random(random_state=int(rng.integers(1 << 30)))
        b0 = dipolar_b(p1, p2, G_H, G_H, Z)
        a0 = point_dipole_azz(e, p1, G_H, Z)
        b1 = dipolar_b(rot.apply(p1), rot.apply(p2), G_H, G_H, rot.apply(Z))
        a1 = point_dipole_azz(rot.apply(e), rot.apply(p1), G_H, rot.apply(Z))
        assert b1 == pytest.approx(b0, rel=1e-12, abs=1e-18)
        assert a1 == pytest.approx(a0, rel=1e-12, abs=1e-18)


def test_dipolar_b_coincident_positions():
    with pytest.raises(GeometryError):
        dipolar_b([1, 2, 3], [1, 2, 3], G_H, G_H, Z)


def test_dipolar_b_rejects_nonpositive_gamma():
    with pytest.raises(InputError):
        dipolar_b([0, 0, 0], [0, 0, 1], -G_H, G_H, Z)


# --- point-dipole hyperfine ---------------------------------------------------

def test_point_dipole_magic_angle_zero():
    r = 5.0
    pos = r * np.array([np.sin(MAGIC), 0.0, np.cos(MAGIC)])
    a = point_dipole_azz([0, 0, 0], pos, G_H, Z)
    scale = base_factor(GAMMA_E, G_H, r) * 1e-6
    assert abs(a) <= 1e-12 * scale


def test_point_dipole_hand_value():
    a = point_dipole_azz([0, 0, 0], [0, 0, 5.0], G_H, Z)
    assert a * 1e6 == pytest.approx(2.0 * base_factor(GAMMA_E, G_H, 5.0),
                                    rel=1e-12)
    assert a * 1e6 == pytest.approx(7.9e6, rel=1e-2)


def test_point_dipole_inverse_cube():
    a1 = point_dipole_azz([0, 0, 0], [0, 0, 4.0], G_H, Z)
    a2 = point_dipole_azz([0, 0, 0], [0, 0, 8.0], G_H, Z)
    assert a1 / a2 == pytest.approx(8.0, rel=1e-12)


def test_point_dipole_coincident_positions():
    with pytest.raises(GeometryError):
        point_dipole_azz([0, 0, 0], [0, 0, 0], G_H, Z)


# --- pair enumeration ----------------------------------------------------------

def _molecule(isotopes_positions, electron=(0, 0, 6.0), a_values=None):
    spins = []
    atoms = []
    for i, (iso, pos) in enumerate(isotopes_positions):
        a = 1e5 * (i + 1) if a_values is None else a_values[i]
        spins.append(NuclearSpin(position=pos, isotope=iso, a_zz=a,
                                 a_source=HyperfineSource.FROM_FILE))
        atoms.append(("X", np.asarray(pos, dtype=float)))
    return SpinSystem(
        electron=ElectronCenter(position=electron),
        molecular_spins=tuple(spins),
        molecular_atoms=tuple(atoms),
    )


def test_empty_bath_three_protons():
    system = _molecule([("1H", [0, 0, 0]), ("1H", [1.5, 0, 0]),
                        ("1H", [0, 1.5, 0])])
    pairs = build_pair_couplings(system, None)
    assert len(pairs) == 3
    assert all(p.kind is PairClass.INTRAMOLECULAR for p in pairs)


def test_heteronuclear_pairs_excluded():
    system = _molecule([("19F", [0, 0, 0])])
    config = BathConfiguration(
        positions=np.array([[2.0, 0, 0], [0, 2.0, 1.0]]), config_index=0)
    pairs = build_pair_couplings(system, config, bath_isotope="1H")
    counts = pairs.counts_by_class()
    assert counts[PairClass.MOLECULE_SOLVENT] == 0
    assert counts[PairClass.SOLVENT_SOLVENT] == 1
    assert counts[PairClass.INTRAMOLECULAR] == 0


def test_solvent_pair_beyond_cutoff_dropped():
    system = _molecule([("1H", [0, 0, 0])])
    config = BathConfiguration(
        positions=np.array([[3.0, 0, 0], [-3.0, 0, 0]]), config_index=0)
    pairs = build_pair_couplings(system, config, cutoff_r=5.0)
    assert pairs.counts_by_class()[PairClass.SOLVENT_SOLVENT] == 0
    assert pairs.counts_by_class()[PairClass.MOLECULE_SOLVENT] == 2


def test_molecular_pairs_survive_any_cutoff():
    system = _molecule([("1H", [0, 0, 0]), ("1H", [30.0, 0, 0])])
    pairs = build_pair_couplings(system, None, cutoff_r=1.0)
    assert len(pairs) == 1


def test_pair_count_matches_brute_force():
    rng = np.random.default_rng(21)
    mol = [("1H", rng.uniform(-3, 3, 3)) for _ in range(4)]
    mol += [("19F", rng.uniform(-3, 3, 3)) for _ in range(3)]
    system = _molecule(mol)
    bath_pos = rng.uniform(-10, 10, (25, 3))
    config = BathConfiguration(positions=bath_pos, config_index=0)
    pairs = build_pair_couplings(system, config, cutoff_r=np.inf,
                                 alpha2_floor=0.0)
    n_h = 4 + 25
    n_f = 3
    assert len(pairs) == n_h * (n_h - 1) // 2 + n_f * (n_f - 1) // 2


def test_canonical_ordering_and_k_below_l():
    rng = np.random.default_rng(22)
    system = _molecule([("1H", rng.uniform(-2, 2, 3)) for _ in range(3)])
    config = BathConfiguration(positions=rng.uniform(-6, 6, (10, 3)),
                               config_index=0)
    pairs = build_pair_couplings(system, config, cutoff_r=np.inf,
                                 alpha2_floor=0.0)
    keys = [(int(c), int(k), int(l)) for c, k, l in
            zip(pairs.kind_code, pairs.index_k, pairs.index_l)]
    assert keys == sorted(keys)
    assert np.all(pairs.index_k < pairs.index_l)


def test_bath_hyperfine_is_point_dipole():
    system = _molecule([("1H", [0.0, 0.0, 0.0])], electron=(0, 0, 6.0))
    config = BathConfiguration(positions=np.array([[0.0, 0.0, 2.0]]),
                               config_index=0)
    pairs = build_pair_couplings(system, config)
    pair = pairs[0]
    a_solvent = point_dipole_azz([0, 0, 6.0], [0, 0, 2.0], G_H, Z)
    a_mol = 1e5 * 1e-6
    assert pair.delta == pytest.approx(a_mol - a_solvent, rel=1e-12)


def test_alpha2_floor_drops_dead_pairs():
    # two protons symmetric about the electron axis: delta = 0, alpha2 = 0
    system = _molecule(
        [("1H", [1.0, 0, 0]), ("1H", [-1.0, 0, 0])],
        electron=(0, 0, 5.0), a_values=[7e4, 7e4],
    )
    assert len(build_pair_couplings(system, None, alpha2_floor=1e-10)) == 0
    assert len(build_pair_couplings(system, None, alpha2_floor=0.0)) == 1


def test_point_dipole_spin_system_builder():
    pts = np.array([[1.0, 0, 0], [0, 1.0, 0]])
    system = point_dipole_spin_system([0, 0, 5.0], pts)
    assert system.n_spins == 2
    expected = point_dipole_azz([0, 0, 5.0], pts[0], G_H, Z) * 1e6
    assert system.molecular_spins[0].a_zz == pytest.approx(expected, rel=1e-12)
    assert system.molecular_spins[0].a_source is HyperfineSource.POINT_DIPOLE


def test_build_pair_couplings_validation():
    system = _molecule([("1H", [0, 0, 0])])
    with pytest.raises(InputError):
        build_pair_couplings(system, None, cutoff_r=-1.0)
    with pytest.raises(InputError):
        build_pair_couplings(system, None, alpha2_floor=-0.5)

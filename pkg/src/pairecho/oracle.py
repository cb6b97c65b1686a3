"""
Exact Hahn-echo dynamics for one electron plus a handful of spin-1/2 nuclei.

Ground truth for the pair-product kernel at desk scale.  The Hamiltonian is

    H = sigma_z^e * sum_k A_k I_z^k  +  sum_{k<l} b_kl (I_x^k I_x^l + I_y^k I_y^l)

where sigma_z^e has eigenvalues +-1, so the nuclei evolve under
H_+- = +-sum_k A_k I_z^k + H_ff conditioned on the electron state.  With this
convention the exact two-nucleus echo is exactly 1 - W(t), the leading-order
form of the pair kernel (the spin-1/2 convention sigma_z/2 would shift both
the modulation frequency and depth away from the kernel's).

The echo protocol: electron starts in (|0> + |1>)/sqrt(2), nuclei maximally
mixed; free evolution for t/2, ideal instantaneous pi pulse on the electron,
free evolution for t/2; the reported signal is |<S_+>(t)| normalized at t=0.

Propagation is by exact eigendecomposition of the two conditioned nuclear
Hamiltonians (dimension <= 64), so there is no time-step error.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from .dephasing import CoherenceCurve, modulation_depth, pair_frequency, \
    validate_time_grid, w_of_t
from .model import CapacityError, InputError

MAX_NUCLEI = 6


@dataclass(frozen=True)
class SmallSpinProblem:
    """Per-nucleus hyperfine z-components and symmetric flip-flop matrix, rad/us."""

    a_list: np.ndarray
    b_matrix: np.ndarray

    def __post_init__(self):
        a = np.asarray(self.a_list, dtype=float)
        b = np.asarray(self.b_matrix, dtype=float)
        if a.ndim != 1 or a.size == 0:
            raise InputError("a_list must be a non-empty 1-d array")
        n = a.size
        if n > MAX_NUCLEI:
            raise CapacityError(
                f"at most {MAX_NUCLEI} nuclei supported, got {n}"
            )
        if b.shape != (n, n):
            raise InputError(f"b_matrix must be {n}x{n}, got {b.shape}")
        if not np.allclose(b, b.T, rtol=0, atol=0):
            raise InputError("b_matrix must be exactly symmetric")
        if np.any(np.diag(b) != 0):
            raise InputError("b_matrix must have zero diagonal")
        a = a.copy()
        b = b.copy()
        a.flags.writeable = False
        b.flags.writeable = False
        object.__setattr__(self, "a_list", a)
        object.__setattr__(self, "b_matrix", b)

    @property
    def n_nuclei(self) -> int:
        return self.a_list.size


def _single_spin_ops(n: int):
    """Embedded I_x, I_y, I_z for each of n spin-1/2 nuclei."""
    sx = 0.5 * np.array([[0, 1], [1, 0]], dtype=complex)
    sy = 0.5 * np.array([[0, -1j], [1j, 0]], dtype=complex)
    sz = 0.5 * np.array([[1, 0], [0, -1]], dtype=complex)
    eye = np.eye(2, dtype=complex)

    def embed(op, k):
        out = np.eye(1, dtype=complex)
        for i in range(n):
            out = np.kron(out, op if i == k else eye)
        return out

    return ([embed(sx, k) for k in range(n)],
            [embed(sy, k) for k in range(n)],
            [embed(sz, k) for k in range(n)])


def conditioned_hamiltonians(problem: SmallSpinProblem):
    """Nuclear Hamiltonians for electron up / down, plus the Hilbert dim."""
    n = problem.n_nuclei
    ix, iy, iz = _single_spin_ops(n)
    dim = 2**n
    h_ff = np.zeros((dim, dim), dtype=complex)
    for k in range(n):
        for l in range(k + 1, n):
            bkl = problem.b_matrix[k, l]
            if bkl != 0.0:
                h_ff += bkl * (ix[k] @ ix[l] + iy[k] @ iy[l])
    h_z = sum(problem.a_list[k] * iz[k] for k in range(n))
    return h_z + h_ff, -h_z + h_ff, dim


def hahn_echo_exact(problem: SmallSpinProblem, times) -> CoherenceCurve:
    """Exact normalized echo amplitude |<S_+>(t)| on the given grid (us)."""
    times = validate_time_grid(times)
    h_plus, h_minus, dim = conditioned_hamiltonians(problem)
    w_p, v_p = np.linalg.eigh(h_plus)
    w_m, v_m = np.linalg.eigh(h_minus)
    values = np.empty(times.size)
    for i, t in enumerate(times):
        tau = 0.5 * t
        u_p = (v_p * np.exp(-1j * w_p * tau)) @ v_p.conj().T
        u_m = (v_m * np.exp(-1j * w_m * tau)) @ v_m.conj().T
        # rho01(t) = U+ U- rho_n U+^dag U-^dag with rho_n = 1/dim
        forward = u_p @ u_m
        backward = u_m @ u_p
        values[i] = abs(np.vdot(backward, forward)) / dim
    values = np.minimum(values / values[0], 1.0)
    return CoherenceCurve(times, values)


class OraclePair(NamedTuple):
    index_k: int
    index_l: int
    delta: float
    b: float
    alpha2: float
    freq: float


@dataclass(frozen=True)
class TCL2Comparison:
    """Exact vs pair-kernel curves and their maximum pointwise deviation."""

    times: np.ndarray
    exact: np.ndarray
    tcl2: np.ndarray
    max_abs_deviation: float
    pairs: tuple[OraclePair, ...]

    @property
    def deviations(self) -> np.ndarray:
        return np.abs(self.exact - self.tcl2)


def tcl2_curve(problem: SmallSpinProblem, times) -> CoherenceCurve:
    """Pair-product kernel applied to every (k, l) of the problem."""
    times = validate_time_grid(times)
    w_sum = np.zeros(times.size)
    for k in range(problem.n_nuclei):
        for l in range(k + 1, problem.n_nuclei):
            delta = problem.a_list[k] - problem.a_list[l]
            w_sum += w_of_t(times, delta, problem.b_matrix[k, l])
    return CoherenceCurve(times, np.exp(-w_sum))


def compare_tcl2(problem: SmallSpinProblem, times) -> TCL2Comparison:
    """Max-abs-deviation report of exact echo vs the pair-product kernel."""
    times = validate_time_grid(times)
    exact = hahn_echo_exact(problem, times).values
    tcl2 = tcl2_curve(problem, times).values
    pairs = []
    for k in range(problem.n_nuclei):
        for l in range(k + 1, problem.n_nuclei):
            delta = float(problem.a_list[k] - problem.a_list[l])
            b = float(problem.b_matrix[k, l])
            pairs.append(OraclePair(
                index_k=k, index_l=l, delta=delta, b=b,
                alpha2=modulation_depth(delta, b),
                freq=pair_frequency(delta, b),
            ))
    return TCL2Comparison(
        times=times,
        exact=exact,
        tcl2=tcl2,
        max_abs_deviation=float(np.max(np.abs(exact - tcl2))),
        pairs=tuple(pairs),
    )

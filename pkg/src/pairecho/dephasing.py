"""
Pair-product electron coherence kernel.

Each homonuclear pair (k, l) of bath or molecular spins, with hyperfine
difference ``delta = A_k - A_l`` and dipolar flip-flop amplitude ``b`` (both
rad/us), contributes a bounded oscillating decay term

    W(t) = alpha2 * sin(t/4 * sqrt(delta^2 + b^2))**4

with modulation depth ``alpha2 = (2*delta*b / (delta^2 + b^2))**2`` and
angular frequency ``freq = sqrt(delta^2 + b^2) / 4``.  The normalized
electron coherence is the product form ``exp(-sum_pairs W(t))``.

The time variable is the total (Hahn-echo) evolution time in us.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum
from typing import TYPE_CHECKING, Iterable, Iterator, Sequence

import numpy as np

from .model import InputError

if TYPE_CHECKING:  # pragma: no cover
    from .couplings import PairCoupling

# pairs are accumulated in canonical order in fixed-size chunks so that the
# floating-point result is independent of worker partitioning
_CHUNK = 2048


class PairClass(Enum):
    INTRAMOLECULAR = "intramolecular"
    MOLECULE_SOLVENT = "molecule_solvent"
    SOLVENT_SOLVENT = "solvent_solvent"


# canonical class ordering used for sorting and accumulation
CLASS_ORDER: tuple[PairClass, ...] = (
    PairClass.INTRAMOLECULAR,
    PairClass.MOLECULE_SOLVENT,
    PairClass.SOLVENT_SOLVENT,
)
CLASS_CODE = {kind: i for i, kind in enumerate(CLASS_ORDER)}


def _maybe_scalar(x, scalar: bool):
    return float(x) if scalar else x


def modulation_depth(delta, b):
    """
    Depth of a pair's coherence modulation, dimensionless in [0, 1].

    Equals 1 when |delta| == |b| != 0 and falls off as the two couplings
    become dissimilar.  The degenerate delta = b = 0 pair cannot modulate
    the echo; its depth is defined as 0.
    """
    scalar = np.isscalar(delta) and np.isscalar(b)
    delta = np.asarray(delta, dtype=float)
    b = np.asarray(b, dtype=float)
    s2 = delta * delta + b * b
    out = np.zeros(np.broadcast(delta, b).shape)
    nz = s2 > 0
    num = 2.0 * np.broadcast_to(delta, out.shape)[nz] * np.broadcast_to(b, out.shape)[nz]
    out[nz] = (num / s2[nz]) ** 2
    return _maybe_scalar(out[()] if out.ndim == 0 else out, scalar)


def pair_frequency(delta, b):
    """Angular frequency of a pair's modulation, rad/us: sqrt(delta^2+b^2)/4."""
    scalar = np.isscalar(delta) and np.isscalar(b)
    freq = 0.25 * np.hypot(np.asarray(delta, dtype=float), np.asarray(b, dtype=float))
    return _maybe_scalar(freq, scalar)


def first_maximum_time(delta, b):
    """Time of the first W maximum, 2*pi/sqrt(delta^2+b^2); inf for a dead pair."""
    scalar = np.isscalar(delta) and np.isscalar(b)
    om = np.hypot(np.asarray(delta, dtype=float), np.asarray(b, dtype=float))
    with np.errstate(divide="ignore"):
        t = np.where(om > 0, 2.0 * np.pi / np.where(om > 0, om, 1.0), np.inf)
    return _maybe_scalar(t[()] if t.ndim == 0 else t, scalar)


def w_of_t(t, delta, b):
    """
    Single-pair echo-decay exponent W(t), dimensionless.

    ``t`` may be a scalar or an array of times (us, >= 0); ``delta`` and
    ``b`` are scalar couplings in rad/us.  0 <= W(t) <= modulation depth.
    """
    scalar = np.isscalar(t)
    t = np.asarray(t, dtype=float)
    if np.any(t < 0):
        raise InputError("w_of_t requires t >= 0")
    a2 = modulation_depth(delta, b)
    s = np.sin(0.25 * t * np.hypot(delta, b))
    return _maybe_scalar(a2 * s**4, scalar)


@dataclass(frozen=True)
class CoherenceCurve:
    """Normalized electron coherence |rho01(t)/rho01(0)| on a time grid (us)."""

    times: np.ndarray
    values: np.ndarray

    def __post_init__(self):
        times = np.asarray(self.times, dtype=float)
        values = np.asarray(self.values, dtype=float)
        if times.ndim != 1 or times.shape != values.shape:
            raise InputError("times and values must be matching 1-d arrays")
        if times.size == 0 or times[0] != 0.0:
            raise InputError("time grid must start at t = 0")
        if np.any(np.diff(times) <= 0):
            raise InputError("time grid must be strictly increasing")
        if values[0] != 1.0:
            raise InputError("coherence must equal 1 at t = 0")
        # product-form curves are strictly positive; exact dynamics may
        # touch zero at a full-depth modulation maximum
        if np.any(values < 0) or np.any(values > 1.0):
            raise InputError("coherence values must lie in [0, 1]")
        times = times.copy()
        values = values.copy()
        times.flags.writeable = False
        values.flags.writeable = False
        object.__setattr__(self, "times", times)
        object.__setattr__(self, "values", values)

    def __len__(self) -> int:
        return self.times.size


def validate_time_grid(times) -> np.ndarray:
    times = np.asarray(times, dtype=float)
    if times.ndim != 1 or times.size == 0 or times[0] != 0.0:
        raise InputError("time grid must be 1-d and start at 0")
    if np.any(np.diff(times) <= 0):
        raise InputError("time grid must be strictly increasing")
    return times


@dataclass(frozen=True)
class PairContribution:
    """One pair's kernel parameters: coupling, depth, frequency, class."""

    coupling: "PairCoupling"
    alpha2: float
    freq: float
    kind: PairClass

    def __post_init__(self):
        if not 0.0 <= self.alpha2 <= 1.0:
            raise InputError(f"alpha2 out of [0, 1]: {self.alpha2}")
        if self.freq < 0.0:
            raise InputError(f"freq must be >= 0: {self.freq}")
        if self.freq == 0.0 and (self.coupling.delta != 0.0 or self.coupling.b != 0.0):
            raise InputError("freq can vanish only for a delta = b = 0 pair")


class ContributionSet(Sequence[PairContribution]):
    """
    Column store of pair contributions, canonically ordered by
    (class, index_k, index_l).  Iterating materializes
    :class:`PairContribution` objects; numerical kernels use the arrays
    directly.
    """

    def __init__(self, index_k, index_l, delta, b, r_nn, kind_code, *,
                 presorted: bool = False):
        self.index_k = np.asarray(index_k, dtype=np.int64)
        self.index_l = np.asarray(index_l, dtype=np.int64)
        self.delta = np.asarray(delta, dtype=float)
        self.b = np.asarray(b, dtype=float)
        self.r_nn = np.asarray(r_nn, dtype=float)
        self.kind_code = np.asarray(kind_code, dtype=np.int8)
        n = self.index_k.size
        for arr in (self.index_l, self.delta, self.b, self.r_nn, self.kind_code):
            if arr.size != n:
                raise InputError("contribution columns must have equal length")
        if not presorted and n:
            order = np.lexsort((self.index_l, self.index_k, self.kind_code))
            for name in ("index_k", "index_l", "delta", "b", "r_nn", "kind_code"):
                setattr(self, name, getattr(self, name)[order])
        self.alpha2 = np.atleast_1d(modulation_depth(self.delta, self.b))
        self.freq = np.atleast_1d(pair_frequency(self.delta, self.b))

    @classmethod
    def empty(cls) -> "ContributionSet":
        z: list = []
        return cls(z, z, z, z, z, z, presorted=True)

    @classmethod
    def concat(cls, sets: Iterable["ContributionSet"]) -> "ContributionSet":
        sets = list(sets)
        if not sets:
            return cls.empty()
        return cls(
            np.concatenate([s.index_k for s in sets]),
            np.concatenate([s.index_l for s in sets]),
            np.concatenate([s.delta for s in sets]),
            np.concatenate([s.b for s in sets]),
            np.concatenate([s.r_nn for s in sets]),
            np.concatenate([s.kind_code for s in sets]),
        )

    def __len__(self) -> int:
        return self.index_k.size

    def __getitem__(self, i):
        if isinstance(i, slice):
            return self.subset(np.arange(len(self))[i])
        from .couplings import PairCoupling

        i = int(i)
        kind = CLASS_ORDER[self.kind_code[i]]
        coupling = PairCoupling(
            index_k=int(self.index_k[i]),
            index_l=int(self.index_l[i]),
            b=float(self.b[i]),
            delta=float(self.delta[i]),
            r_nn=float(self.r_nn[i]),
            kind=kind,
        )
        return PairContribution(
            coupling=coupling,
            alpha2=float(self.alpha2[i]),
            freq=float(self.freq[i]),
            kind=kind,
        )

    def __iter__(self) -> Iterator[PairContribution]:
        for i in range(len(self)):
            yield self[i]

    def subset(self, indices) -> "ContributionSet":
        return ContributionSet(
            self.index_k[indices], self.index_l[indices], self.delta[indices],
            self.b[indices], self.r_nn[indices], self.kind_code[indices],
        )

    def filter_classes(self, classes: Iterable[PairClass]) -> "ContributionSet":
        codes = {CLASS_CODE[c] for c in classes}
        mask = np.isin(self.kind_code, sorted(codes))
        return self.subset(np.flatnonzero(mask))

    def counts_by_class(self) -> dict[PairClass, int]:
        return {
            kind: int(np.count_nonzero(self.kind_code == code))
            for kind, code in CLASS_CODE.items()
        }


def accumulated_w(contribs: ContributionSet, times: np.ndarray) -> np.ndarray:
    """Sum of W(t) over all pairs, chunked in canonical order."""
    total = np.zeros(times.size)
    alpha2 = np.atleast_1d(contribs.alpha2)
    freq = np.atleast_1d(contribs.freq)
    for i in range(0, len(contribs), _CHUNK):
        s = np.sin(freq[i:i + _CHUNK, None] * times[None, :])
        s *= s
        s *= s
        s *= alpha2[i:i + _CHUNK, None]
        total += s.sum(axis=0)
    return total


def accumulated_w_by_class(contribs: ContributionSet,
                           times: np.ndarray) -> np.ndarray:
    """(3, n_times) per-class W sums, rows ordered as CLASS_ORDER."""
    out = np.zeros((len(CLASS_ORDER), times.size))
    for code in range(len(CLASS_ORDER)):
        idx = np.flatnonzero(contribs.kind_code == code)
        if idx.size:
            out[code] = accumulated_w(contribs.subset(idx), times)
    return out


def coherence_curve(contribs: ContributionSet, times,
                    class_filter: Iterable[PairClass] | None = None
                    ) -> CoherenceCurve:
    """
    Product-form coherence exp(-sum W(t)) over the pair set.

    ``class_filter`` restricts the sum to the selected pair classes
    (e.g. a solvent-free run keeps only INTRAMOLECULAR).
    """
    times = validate_time_grid(times)
    if class_filter is not None:
        contribs = contribs.filter_classes(class_filter)
    return CoherenceCurve(times, np.exp(-accumulated_w(contribs, times)))


@dataclass(frozen=True)
class RankedPair:
    """One row of a pair-importance ranking."""

    rank: int
    score: float
    contribution: PairContribution

    @property
    def alpha2(self) -> float:
        return self.contribution.alpha2

    @property
    def freq(self) -> float:
        return self.contribution.freq

    @property
    def kind(self) -> PairClass:
        return self.contribution.kind

    @property
    def r_nn(self) -> float:
        return self.contribution.coupling.r_nn


def rank_pairs(contribs: ContributionSet, horizon: float,
               top_n: int) -> list[RankedPair]:
    """
    Rank pairs by the decay they can cause within ``horizon`` us.

    The score is W evaluated at min(horizon, first W maximum), so a deep
    but very slow pair is ranked by what it achieves inside the horizon.
    Ties break deterministically by (class, index_k, index_l).
    """
    if horizon <= 0:
        raise InputError("ranking horizon must be positive")
    n = len(contribs)
    if n == 0:
        return []
    t_star = np.minimum(horizon, first_maximum_time(contribs.delta, contribs.b))
    s = np.sin(np.atleast_1d(contribs.freq) * t_star)
    score = np.atleast_1d(contribs.alpha2) * s**4
    order = np.lexsort((contribs.index_l, contribs.index_k,
                        contribs.kind_code, -score))
    out = []
    for rank, i in enumerate(order[: max(top_n, 0)], start=1):
        out.append(RankedPair(rank=rank, score=float(score[i]),
                              contribution=contribs[int(i)]))
    return out

"""
Ensemble averaging, decay-time extraction, and derived analyses.

The bath-ensemble pipeline is configuration-parallel: each worker rebuilds
its configurations from (seed, config_index), computes per-class decay
exponents on the shared time grid, and the parent combines results in
config-index order.  The output is bitwise independent of the worker count.
"""

from __future__ import annotations

import multiprocessing
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, replace
from enum import Enum
from typing import Iterable, Sequence

import numpy as np
from scipy.optimize import curve_fit

from .bath import BathSpec, sample_configuration
from .couplings import DEFAULT_ALPHA2_FLOOR, DEFAULT_CUTOFF_R, \
    build_pair_couplings
from .dephasing import CLASS_ORDER, CoherenceCurve, ContributionSet, \
    PairClass, accumulated_w_by_class, validate_time_grid
from .model import InputError, InsufficientDecayError, SpinSystem

ONE_OVER_E = float(np.exp(-1.0))
_STRETCH_THRESHOLD = 0.9
_BETA_BOUNDS = (0.5, 4.0)


class T2Method(Enum):
    ONE_OVER_E = "one_over_e"
    STRETCHED_EXP = "stretched_exp"


@dataclass(frozen=True)
class T2Result:
    """Decay-time estimate in us with fit metadata."""

    t2: float
    method: T2Method
    stretch_beta: float | None = None
    fit_residual: float = 0.0

    def __post_init__(self):
        if self.t2 <= 0:
            raise InputError(f"t2 must be positive, got {self.t2}")
        if self.method is T2Method.STRETCHED_EXP:
            if self.stretch_beta is None or not (
                _BETA_BOUNDS[0] <= self.stretch_beta <= _BETA_BOUNDS[1]
            ):
                raise InputError(
                    f"stretch_beta must lie in {_BETA_BOUNDS}, "
                    f"got {self.stretch_beta}"
                )


def ensemble_average(curves: Iterable[CoherenceCurve]) -> CoherenceCurve:
    """
    Pointwise arithmetic mean of coherence curves sharing one time grid,
    accumulated in the order the stream yields them (config-index order).
    """
    total = None
    times = None
    n = 0
    for curve in curves:
        if times is None:
            times = curve.times
            total = curve.values.copy()
        else:
            if not np.array_equal(curve.times, times):
                raise InputError("ensemble curves must share one time grid")
            total += curve.values
        n += 1
    if n == 0:
        raise InputError("cannot average an empty curve stream")
    return CoherenceCurve(times, total / n)


def _one_over_e_crossing(times: np.ndarray, values: np.ndarray) -> float:
    below = values <= ONE_OVER_E
    if not np.any(below):
        raise InsufficientDecayError(ONE_OVER_E, float(values.min()))
    i = int(np.argmax(below))
    if i == 0:  # cannot happen for a valid curve (values[0] = 1)
        return float(times[0])
    t0, t1 = times[i - 1], times[i]
    v0, v1 = values[i - 1], values[i]
    return float(t0 + (v0 - ONE_OVER_E) * (t1 - t0) / (v0 - v1))


def extract_t2(curve: CoherenceCurve,
               method: T2Method = T2Method.ONE_OVER_E) -> T2Result:
    """
    Decay time of a coherence curve.

    ONE_OVER_E: linear interpolation of the first crossing of exp(-1).
    STRETCHED_EXP: least-squares fit of exp(-(t/T2)**beta), initialized at
    the 1/e estimate (or an end-point extrapolation if the curve stays
    above 1/e) with beta0 = 2.
    """
    times, values = curve.times, curve.values
    if method is T2Method.ONE_OVER_E:
        return T2Result(t2=_one_over_e_crossing(times, values),
                        method=method)

    if float(values.min()) >= _STRETCH_THRESHOLD:
        raise InsufficientDecayError(_STRETCH_THRESHOLD, float(values.min()))
    try:
        t2_0 = _one_over_e_crossing(times, values)
    except InsufficientDecayError:
        # shallow decay: scale from the end point at the initial beta
        t2_0 = float(times[-1] / (-np.log(values[-1])) ** 0.5)

    def stretched(t, t2, beta):
        return np.exp(-((t / t2) ** beta))

    popt, _ = curve_fit(
        stretched, times, values, p0=(t2_0, 2.0),
        bounds=([1e-12, _BETA_BOUNDS[0]], [np.inf, _BETA_BOUNDS[1]]),
        maxfev=10000,
    )
    resid = float(np.sqrt(np.mean((stretched(times, *popt) - values) ** 2)))
    return T2Result(t2=float(popt[0]), method=method,
                    stretch_beta=float(popt[1]), fit_residual=resid)


@dataclass(frozen=True)
class DistanceProfile:
    """Mean modulation depth binned by internuclear distance."""

    bin_centers: np.ndarray
    mean_alpha2: np.ndarray
    counts: np.ndarray
    bin_width: float

    @property
    def total_count(self) -> int:
        return int(self.counts.sum())


def distance_profile(contribs: ContributionSet, group: set[int],
                     bin_width: float = 0.5) -> DistanceProfile:
    """
    Distance-resolved molecule-solvent modulation profile.

    Restricts to MOLECULE_SOLVENT pairs whose molecular member (index_k)
    belongs to ``group``, bins them by r_nn on a grid anchored at zero,
    and reports the per-bin mean depth (NaN for empty bins).
    """
    if not group:
        raise InputError("group must be a non-empty set of spin indices")
    if bin_width <= 0:
        raise InputError("bin_width must be positive")
    ms = contribs.filter_classes([PairClass.MOLECULE_SOLVENT])
    mask = np.isin(ms.index_k, sorted(group))
    r = ms.r_nn[mask]
    a2 = np.atleast_1d(ms.alpha2)[mask]
    if r.size == 0:
        return DistanceProfile(np.zeros(0), np.zeros(0), np.zeros(0, int),
                               bin_width)
    j = np.floor(r / bin_width).astype(int)
    j_min, j_max = int(j.min()), int(j.max())
    nbins = j_max - j_min + 1
    counts = np.bincount(j - j_min, minlength=nbins)
    sums = np.bincount(j - j_min, weights=a2, minlength=nbins)
    with np.errstate(invalid="ignore"):
        mean = np.where(counts > 0, sums / np.maximum(counts, 1), np.nan)
    centers = (np.arange(j_min, j_max + 1) + 0.5) * bin_width
    return DistanceProfile(centers, mean, counts, bin_width)


# --- configuration-parallel ensemble pipeline -------------------------------

_WORKER: dict = {}


def _init_worker(system, spec, times, cutoff_r, alpha2_floor):
    _WORKER.update(system=system, spec=spec, times=times,
                   cutoff_r=cutoff_r, alpha2_floor=alpha2_floor)


def _config_w_by_class(config_index: int) -> np.ndarray:
    return _class_w_for_config(
        _WORKER["system"], _WORKER["spec"], _WORKER["times"],
        _WORKER["cutoff_r"], _WORKER["alpha2_floor"], config_index,
    )


def _class_w_for_config(system, spec, times, cutoff_r, alpha2_floor,
                        config_index) -> np.ndarray:
    config = sample_configuration(spec, system, config_index)
    pairs = build_pair_couplings(system, config, cutoff_r=cutoff_r,
                                 alpha2_floor=alpha2_floor,
                                 bath_isotope=spec.isotope)
    return accumulated_w_by_class(pairs.contributions(), times)


@dataclass(frozen=True)
class EnsembleResult:
    """Ensemble-averaged coherence, total and per pair class."""

    total: CoherenceCurve
    by_class: dict[PairClass, CoherenceCurve]
    n_configs: int


def ensemble_coherence(system: SpinSystem, spec: BathSpec, times,
                       cutoff_r: float = DEFAULT_CUTOFF_R,
                       alpha2_floor: float = DEFAULT_ALPHA2_FLOOR,
                       class_filter: Iterable[PairClass] | None = None,
                       workers: int = 1) -> EnsembleResult:
    """
    Average the coherence over the bath ensemble.

    The total curve multiplies only the classes in ``class_filter`` (all
    three when None); per-class averages are always reported.
    """
    times = validate_time_grid(times)
    if workers < 1:
        raise InputError("workers must be >= 1")
    selected = set(CLASS_ORDER if class_filter is None else class_filter)
    sel_codes = [i for i, kind in enumerate(CLASS_ORDER) if kind in selected]

    indices = range(spec.n_configs)
    if workers == 1 or spec.n_configs == 1:
        per_config = (
            _class_w_for_config(system, spec, times, cutoff_r, alpha2_floor, i)
            for i in indices
        )
        per_config = list(per_config)
    else:
        methods = multiprocessing.get_all_start_methods()
        ctx = multiprocessing.get_context(
            "fork" if "fork" in methods else "spawn"
        )
        with ProcessPoolExecutor(
            max_workers=workers, mp_context=ctx,
            initializer=_init_worker,
            initargs=(system, spec, times, cutoff_r, alpha2_floor),
        ) as pool:
            per_config = list(pool.map(_config_w_by_class, indices,
                                       chunksize=1))

    # fixed-order accumulation: identical result for any worker count
    total_sum = np.zeros(times.size)
    class_sums = np.zeros((len(CLASS_ORDER), times.size))
    for w_by_class in per_config:
        total_sum += np.exp(-w_by_class[sel_codes].sum(axis=0))
        class_sums += np.exp(-w_by_class)
    n = spec.n_configs
    by_class = {
        kind: CoherenceCurve(times, class_sums[code] / n)
        for code, kind in enumerate(CLASS_ORDER)
    }
    return EnsembleResult(
        total=CoherenceCurve(times, total_sum / n),
        by_class=by_class,
        n_configs=n,
    )


def collect_contributions(system: SpinSystem, spec: BathSpec,
                          classes: Iterable[PairClass] | None = None,
                          cutoff_r: float = DEFAULT_CUTOFF_R,
                          alpha2_floor: float = DEFAULT_ALPHA2_FLOOR,
                          n_configs: int | None = None) -> ContributionSet:
    """
    Concatenated pair contributions across bath configurations.

    Bath indices restart per configuration; the result is meant for
    population statistics (profiles), not for identifying single spins.
    """
    n = spec.n_configs if n_configs is None else n_configs
    parts = []
    for i in range(n):
        config = sample_configuration(spec, system, i)
        pairs = build_pair_couplings(system, config, cutoff_r=cutoff_r,
                                     alpha2_floor=alpha2_floor,
                                     bath_isotope=spec.isotope)
        contribs = pairs.contributions()
        if classes is not None:
            contribs = contribs.filter_classes(classes)
        parts.append(contribs)
    return ContributionSet.concat(parts)


def density_sweep(system: SpinSystem, spec: BathSpec, times,
                  factors: Sequence[float],
                  cutoff_r: float = DEFAULT_CUTOFF_R,
                  alpha2_floor: float = DEFAULT_ALPHA2_FLOOR,
                  method: T2Method = T2Method.ONE_OVER_E,
                  workers: int = 1) -> list[tuple[float, T2Result]]:
    """
    T2 versus solvent spin density scaled by each factor in (0, 1],
    with otherwise identical seeds and settings.
    """
    for f in factors:
        if not 0.0 < f <= 1.0:
            raise InputError(f"density factors must lie in (0, 1], got {f}")
    out = []
    for f in factors:
        scaled = replace(spec, density=spec.density * f)
        result = ensemble_coherence(system, scaled, times, cutoff_r,
                                    alpha2_floor, workers=workers)
        out.append((float(f), extract_t2(result.total, method)))
    return out

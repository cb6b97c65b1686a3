"""
Command-line surface: simulate, pairs, profile, bath-sample, oracle, t2, sweep.

Every flag mirrors a :class:`~pairecho.fileio.RunConfig` field; a JSON config
file (or a previous run's manifest) may set any of them, and explicit flags
override the file.  Report-style commands write CSV plus a rendered PNG
figure unless --no-plot is given.

Exit codes: 0 success, 2 input error, 3 numeric/capacity error.
"""

from __future__ import annotations

import functools
import json
import sys
from contextlib import contextmanager
from pathlib import Path

import click
import numpy as np

from . import __version__
from .analysis import (
    T2Method,
    T2Result,
    collect_contributions,
    density_sweep,
    distance_profile,
    ensemble_coherence,
    extract_t2,
)
from .bath import sample_configuration
from .couplings import build_pair_couplings
from .dephasing import CLASS_ORDER, CoherenceCurve, PairClass, rank_pairs
from .fileio import (
    RunConfig,
    load_config,
    load_problem,
    load_system,
    read_csv,
    write_csv,
    write_manifest,
    write_xyz,
)
from .model import (
    InputError,
    InsufficientDecayError,
    PairEchoError,
    PipelineError,
)
from .oracle import compare_tcl2

_INPUT_ERRORS = (InputError,)  # ParseError, UnknownIsotopeError are subclasses

_FLAG_TO_FIELD = {"out": "out_dir", "cutoff": "cutoff_r"}


@contextmanager
def _stage(name: str):
    try:
        yield
    except PairEchoError as exc:
        raise PipelineError(name, exc) from exc


def _exit_code(exc: Exception) -> int:
    if isinstance(exc, PipelineError):
        return _exit_code(exc.cause)
    if isinstance(exc, _INPUT_ERRORS):
        return 2
    return 3


def _guarded(fn):
    @functools.wraps(fn)
    def wrapper(*args, **kwargs):
        try:
            return fn(*args, **kwargs)
        except PairEchoError as exc:
            click.echo(f"error: {exc}", err=True)
            sys.exit(_exit_code(exc))

    return wrapper


# flags parsed per-command from comma-separated strings, not merged raw
_RAW_FLAGS = {"config", "group", "factors"}


def _collect_overrides(ctx: click.Context) -> dict:
    """CLI parameters the user actually set, mapped to RunConfig fields."""
    from click.core import ParameterSource

    overrides = {}
    for name, value in ctx.params.items():
        if name in _RAW_FLAGS:
            continue
        source = ctx.get_parameter_source(name)
        if source in (ParameterSource.COMMANDLINE, ParameterSource.ENVIRONMENT):
            overrides[_FLAG_TO_FIELD.get(name, name)] = value
    return overrides


def _build_config(ctx: click.Context, config_path) -> RunConfig:
    cfg = RunConfig()
    if config_path is not None:
        cfg = cfg.merged(load_config(config_path))
    return cfg.merged(_collect_overrides(ctx))


def _class_filter(cfg: RunConfig):
    if cfg.classes is None:
        return None
    try:
        return {PairClass(c) for c in cfg.classes}
    except ValueError as exc:
        raise InputError(str(exc)) from None


def _t2_method(cfg: RunConfig) -> T2Method:
    try:
        return T2Method(cfg.t2_method)
    except ValueError:
        raise InputError(
            f"unknown t2 method {cfg.t2_method!r} "
            f"(choose from {[m.value for m in T2Method]})"
        ) from None


def _require(cfg: RunConfig, *field_names: str) -> None:
    for name in field_names:
        if getattr(cfg, name) is None:
            raise InputError(f"missing required setting: {name}")


def _out_dir(cfg: RunConfig) -> Path:
    out = Path(cfg.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _t2_payload(result: T2Result | None, error: str | None = None,
                minimum: float | None = None) -> dict:
    if result is None:
        return {"t2_us": None, "error": error, "min_value": minimum}
    return {
        "t2_us": result.t2,
        "method": result.method.value,
        "stretch_beta": result.stretch_beta,
        "fit_residual": result.fit_residual,
    }


def _write_json(path: Path, payload: dict) -> None:
    path.write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n")


def _pairs_table(ranked) -> tuple[list[str], list]:
    names = ["rank", "class", "index_k", "index_l", "r_nn_A",
             "delta_rad_per_us", "b_rad_per_us", "alpha2",
             "freq_rad_per_us", "score"]
    cols = [
        [p.rank for p in ranked],
        [p.kind.value for p in ranked],
        [p.contribution.coupling.index_k for p in ranked],
        [p.contribution.coupling.index_l for p in ranked],
        [p.r_nn for p in ranked],
        [p.contribution.coupling.delta for p in ranked],
        [p.contribution.coupling.b for p in ranked],
        [p.alpha2 for p in ranked],
        [p.freq for p in ranked],
        [p.score for p in ranked],
    ]
    return names, cols


def run_simulate(config: RunConfig) -> dict[str, Path]:
    """
    Full pipeline: parse -> bath ensemble -> couplings -> pair kernel ->
    ensemble average -> T2 -> pair ranking -> serialize.

    Density 0 reproduces the isolated-molecule mode.  A curve too shallow
    for the requested T2 extraction is recorded in t2.json rather than
    failing the run; all other errors propagate with their stage label.
    """
    _require(config, "system", "out_dir")
    with _stage("parse"):
        system = load_system(config.system)
        spec = config.bath_spec()
        times = config.time_grid()
        method = _t2_method(config)
        class_filter = _class_filter(config)

    with _stage("ensemble"):
        result = ensemble_coherence(
            system, spec, times, cutoff_r=config.cutoff_r,
            alpha2_floor=config.alpha2_floor, class_filter=class_filter,
            workers=config.workers,
        )

    t2_result = None
    t2_error = None
    with _stage("t2"):
        try:
            t2_result = extract_t2(result.total, method)
        except InsufficientDecayError as exc:
            t2_error = _t2_payload(None, error="insufficient decay",
                                   minimum=exc.minimum)

    with _stage("rank"):
        ref_config = sample_configuration(spec, system, config.config_index)
        contribs = build_pair_couplings(
            system, ref_config, cutoff_r=config.cutoff_r,
            alpha2_floor=config.alpha2_floor, bath_isotope=spec.isotope,
        ).contributions()
        ranked = rank_pairs(contribs, config.ranking_horizon, config.top_n)

    with _stage("serialize"):
        out = _out_dir(config)
        paths: dict[str, Path] = {}

        curve_cols = [times, result.total.values] + [
            result.by_class[kind].values for kind in CLASS_ORDER
        ]
        write_csv(out / "curves.csv",
                  ["t_us", "total"] + [k.value for k in CLASS_ORDER],
                  curve_cols)
        paths["curves"] = out / "curves.csv"

        _write_json(out / "t2.json",
                    t2_error if t2_result is None else _t2_payload(t2_result))
        paths["t2"] = out / "t2.json"

        names, cols = _pairs_table(ranked)
        write_csv(out / "pairs.csv", names, cols)
        paths["pairs"] = out / "pairs.csv"

        outputs = ["curves.csv", "t2.json", "pairs.csv"]
        if config.plot:
            from . import plots

            curves = {"total": result.total.values}
            curves.update({
                kind.value: result.by_class[kind].values
                for kind in CLASS_ORDER
            })
            paths["figure"] = plots.save_coherence_figure(
                out / "coherence.png", times, curves,
                t2_us=None if t2_result is None else t2_result.t2,
            )
            outputs.append("coherence.png")

        paths["manifest"] = write_manifest(out, "simulate", config, outputs,
                                           __version__)
    return paths


@click.group()
@click.version_option(__version__)
def cli():
    """Electron-spin dephasing from nuclear spin-pair flip-flops."""


def _config_option(f):
    return click.option(
        "--config", type=click.Path(exists=True, dir_okay=False),
        default=None, help="JSON config file (or a previous manifest); "
        "explicit flags override it.",
    )(f)


def _bath_options(f):
    for opt in reversed([
        click.option("--density", type=float, help="solvent spins per A^3"),
        click.option("--box-edge", type=float, help="bath box edge, A"),
        click.option("--exclusion-radius", type=float,
                     help="solvent exclusion radius around atoms, A"),
        click.option("--isotope", type=str, help="solvent isotope label"),
        click.option("--n-configs", type=int, help="bath configurations"),
        click.option("--seed", type=int, help="ensemble RNG seed"),
    ]):
        f = opt(f)
    return f


def _grid_options(f):
    for opt in reversed([
        click.option("--t-max", type=float, help="time grid end, us"),
        click.option("--n-times", type=int, help="time grid points"),
    ]):
        f = opt(f)
    return f


def _pair_options(f):
    for opt in reversed([
        click.option("--cutoff", type=float,
                     help="solvent pair distance cutoff, A"),
        click.option("--alpha2-floor", type=float,
                     help="drop pairs with modulation depth below this"),
    ]):
        f = opt(f)
    return f


@cli.command()
@click.option("--system", type=click.Path(exists=True, dir_okay=False),
              help="system file")
@click.option("--out", type=click.Path(file_okay=False), help="output dir")
@_config_option
@_bath_options
@_grid_options
@_pair_options
@click.option("--classes", multiple=True,
              type=click.Choice([k.value for k in CLASS_ORDER]),
              help="restrict the total curve to these pair classes")
@click.option("--t2-method", type=click.Choice([m.value for m in T2Method]))
@click.option("--horizon", type=float, help="pair ranking horizon, us")
@click.option("--top-n", type=int, help="ranked pairs to keep")
@click.option("--config-index", type=int,
              help="bath configuration used for pair ranking")
@click.option("--workers", type=int, help="parallel workers")
@click.option("--plot/--no-plot", default=True, help="render figures")
@click.pass_context
@_guarded
def simulate(ctx, **_kwargs):
    """Run the full dephasing pipeline and write its artifact bundle."""
    cfg = _build_config(ctx, ctx.params.get("config"))
    if not cfg.classes:
        cfg = cfg.merged({"classes": None})
    paths = run_simulate(cfg)
    click.echo(f"wrote {', '.join(str(p) for p in paths.values())}")


@cli.command()
@click.option("--system", type=click.Path(exists=True, dir_okay=False))
@click.option("--out", type=click.Path(file_okay=False), help="output dir")
@_config_option
@_bath_options
@_pair_options
@click.option("--horizon", type=float, help="ranking horizon, us")
@click.option("--top-n", type=int)
@click.option("--config-index", type=int,
              help="bath configuration to rank against")
@click.pass_context
@_guarded
def pairs(ctx, **_kwargs):
    """Rank spin pairs by their echo-decay contribution."""
    cfg = _build_config(ctx, ctx.params.get("config"))
    _require(cfg, "system", "out_dir")
    system = load_system(cfg.system)
    spec = cfg.bath_spec()
    bath_config = (sample_configuration(spec, system, cfg.config_index)
                   if cfg.density > 0 else None)
    contribs = build_pair_couplings(
        system, bath_config, cutoff_r=cfg.cutoff_r,
        alpha2_floor=cfg.alpha2_floor, bath_isotope=spec.isotope,
    ).contributions()
    ranked = rank_pairs(contribs, cfg.ranking_horizon, cfg.top_n)
    out = _out_dir(cfg)
    names, cols = _pairs_table(ranked)
    write_csv(out / "pairs.csv", names, cols)
    for p in ranked[:10]:
        click.echo(
            f"#{p.rank} {p.kind.value} ({p.contribution.coupling.index_k},"
            f"{p.contribution.coupling.index_l}) r={p.r_nn:.3g} A "
            f"alpha2={p.alpha2:.4g} f={p.freq:.4g} rad/us "
            f"score={p.score:.4g}"
        )
    click.echo(f"wrote {out / 'pairs.csv'}")


@cli.command()
@click.option("--system", type=click.Path(exists=True, dir_okay=False))
@click.option("--out", type=click.Path(file_okay=False))
@_config_option
@_bath_options
@_pair_options
@click.option("--group", type=str,
              help="comma-separated molecular spin indices, e.g. '0,1,2'")
@click.option("--bin-width", type=float, help="profile bin width, A")
@click.option("--plot/--no-plot", default=True)
@click.pass_context
@_guarded
def profile(ctx, **_kwargs):
    """Distance-resolved molecule-solvent modulation-depth profile."""
    params = dict(ctx.params)
    group_raw = params.get("group")
    cfg = _build_config(ctx, params.get("config"))
    if group_raw is not None:
        try:
            cfg = cfg.merged(
                {"group": tuple(int(v) for v in group_raw.split(","))}
            )
        except ValueError:
            raise InputError(f"cannot parse group {group_raw!r}") from None
    _require(cfg, "system", "out_dir", "group")
    system = load_system(cfg.system)
    spec = cfg.bath_spec()
    contribs = collect_contributions(
        system, spec, classes=[PairClass.MOLECULE_SOLVENT],
        cutoff_r=cfg.cutoff_r, alpha2_floor=cfg.alpha2_floor,
    )
    prof = distance_profile(contribs, set(cfg.group), cfg.bin_width)
    out = _out_dir(cfg)
    write_csv(out / "profile.csv",
              ["bin_center_A", "mean_alpha2", "count"],
              [prof.bin_centers, prof.mean_alpha2, prof.counts])
    click.echo(f"{prof.total_count} pairs in "
               f"{int((prof.counts > 0).sum())} populated bins")
    if cfg.plot and prof.total_count:
        from . import plots

        plots.save_profile_figure(out / "profile.png", prof.bin_centers,
                                  prof.mean_alpha2, prof.counts)
    click.echo(f"wrote {out / 'profile.csv'}")


@cli.command(name="bath-sample")
@click.option("--system", type=click.Path(exists=True, dir_okay=False),
              default=None, help="optional system file (for exclusion)")
@click.option("--out", type=click.Path(file_okay=False))
@_config_option
@_bath_options
@click.pass_context
@_guarded
def bath_sample(ctx, **_kwargs):
    """Emit sampled bath configurations as XYZ files."""
    config_path = ctx.params.get("config")
    file_cfg = load_config(config_path) if config_path else {}
    overrides = _collect_overrides(ctx)
    if "n_configs" not in overrides and "n_configs" not in file_cfg:
        overrides["n_configs"] = 1  # sampling for inspection, not ensembles
    cfg = RunConfig().merged(file_cfg).merged(overrides)
    _require(cfg, "out_dir")
    system = load_system(cfg.system) if cfg.system else None
    spec = cfg.bath_spec()
    out = _out_dir(cfg)
    element = cfg.isotope.lstrip("0123456789") or "H"
    for i in range(spec.n_configs):
        config = sample_configuration(spec, system, i)
        atoms = [(element, p) for p in config.positions]
        write_xyz(out / f"bath_{i:04d}.xyz", atoms,
                  comment=f"bath configuration {i} seed {spec.seed} "
                          f"density {spec.density:g}")
    click.echo(f"wrote {spec.n_configs} configuration(s) to {out}")


@cli.command()
@click.option("--problem", type=click.Path(exists=True, dir_okay=False),
              required=True, help="JSON problem file")
@click.option("--out", type=click.Path(file_okay=False), required=True)
@click.option("--t-max", type=float, default=10.0, show_default=True,
              help="time grid end, us")
@click.option("--n-times", type=int, default=501, show_default=True)
@click.option("--plot/--no-plot", default=True)
@_guarded
def oracle(problem, out, t_max, n_times, plot):
    """Exact small-system echo vs the pair kernel; emits (t, exact, tcl2)."""
    prob = load_problem(problem)
    times = np.linspace(0.0, t_max, n_times)
    report = compare_tcl2(prob, times)
    out = Path(out)
    out.mkdir(parents=True, exist_ok=True)
    write_csv(out / "oracle.csv",
              ["t_us", "exact", "tcl2", "deviation"],
              [report.times, report.exact, report.tcl2, report.deviations])
    if plot:
        from . import plots

        plots.save_oracle_figure(out / "oracle.png", report.times,
                                 report.exact, report.tcl2)
    click.echo(f"max |exact - tcl2| = {report.max_abs_deviation:.6g} over "
               f"{len(report.pairs)} pair(s)")
    click.echo(f"wrote {out / 'oracle.csv'}")


@cli.command(name="t2")
@click.option("--curve", type=click.Path(exists=True, dir_okay=False),
              required=True, help="CSV with t_us plus a coherence column")
@click.option("--column", type=str, default="total", show_default=True)
@click.option("--method", type=click.Choice([m.value for m in T2Method]),
              default=T2Method.ONE_OVER_E.value, show_default=True)
@click.option("--out", type=click.Path(file_okay=False), default=None)
@_guarded
def t2_command(curve, column, method, out):
    """Extract a decay time from a previously written coherence CSV."""
    names, cols = read_csv(curve)
    if "t_us" not in cols or column not in cols:
        raise InputError(
            f"curve CSV must contain 't_us' and {column!r} columns "
            f"(found {names})"
        )
    curve_obj = CoherenceCurve(cols["t_us"], cols[column])
    result = extract_t2(curve_obj, T2Method(method))
    payload = _t2_payload(result)
    click.echo(json.dumps(payload, indent=2, sort_keys=True))
    if out is not None:
        out = Path(out)
        out.mkdir(parents=True, exist_ok=True)
        _write_json(out / "t2.json", payload)
        from . import plots

        if result.method is T2Method.STRETCHED_EXP:
            fit = np.exp(-((curve_obj.times / result.t2)
                           ** result.stretch_beta))
            plots.save_t2_fit_figure(
                out / "t2_fit.png", curve_obj.times, curve_obj.values, fit,
                label=f"exp(-(t/{result.t2:.4g})^{result.stretch_beta:.3g})",
            )
        else:
            plots.save_coherence_figure(
                out / "t2_fit.png", curve_obj.times,
                {column: curve_obj.values}, t2_us=result.t2,
            )
        click.echo(f"wrote {out / 't2.json'}")


@cli.command()
@click.option("--system", type=click.Path(exists=True, dir_okay=False))
@click.option("--out", type=click.Path(file_okay=False))
@_config_option
@_bath_options
@_grid_options
@_pair_options
@click.option("--factors", type=str,
              help="comma-separated density factors in (0, 1], "
                   "e.g. '1.0,0.5'")
@click.option("--t2-method", type=click.Choice([m.value for m in T2Method]))
@click.option("--workers", type=int)
@click.option("--plot/--no-plot", default=True)
@click.pass_context
@_guarded
def sweep(ctx, **_kwargs):
    """T2 versus solvent density reduction, otherwise identical settings."""
    params = dict(ctx.params)
    cfg = _build_config(ctx, params.get("config"))
    factors_raw = params.get("factors")
    if factors_raw is not None:
        try:
            cfg = cfg.merged(
                {"factors": tuple(float(v) for v in factors_raw.split(","))}
            )
        except ValueError:
            raise InputError(f"cannot parse factors {factors_raw!r}") \
                from None
    _require(cfg, "system", "out_dir")
    system = load_system(cfg.system)
    with _stage("sweep"):
        results = density_sweep(
            system, cfg.bath_spec(), cfg.time_grid(), cfg.factors,
            cutoff_r=cfg.cutoff_r, alpha2_floor=cfg.alpha2_floor,
            method=_t2_method(cfg), workers=cfg.workers,
        )
    out = _out_dir(cfg)
    write_csv(
        out / "sweep.csv",
        ["factor", "t2_us", "method", "stretch_beta", "fit_residual"],
        [
            [f for f, _ in results],
            [r.t2 for _, r in results],
            [r.method.value for _, r in results],
            [("" if r.stretch_beta is None else r.stretch_beta)
             for _, r in results],
            [r.fit_residual for _, r in results],
        ],
    )
    outputs = ["sweep.csv"]
    if cfg.plot:
        from . import plots

        plots.save_sweep_figure(out / "sweep.png",
                                [f for f, _ in results],
                                [r.t2 for _, r in results])
        outputs.append("sweep.png")
    write_manifest(out, "sweep", cfg, outputs, __version__)
    for f, r in results:
        click.echo(f"factor {f:g}: T2 = {r.t2:.6g} us")
    click.echo(f"wrote {out / 'sweep.csv'}")


def main():
    cli(prog_name="pairecho")


if __name__ == "__main__":
    main()

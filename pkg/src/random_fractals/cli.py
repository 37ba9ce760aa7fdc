"""CLI entrypoint for random_fractals."""

import contextlib
import math
from collections.abc import Iterator
from pathlib import Path
from typing import Any

import numpy as np
import structlog
import typer

from random_fractals import (
    addressing,
    config,
    construction,
    dimension,
    export,
    geometry,
    logging_config,
    models,
    replicas,
    schemas,
    verify,
)
from random_fractals.construction import Semantics
from random_fractals.models import ModelName

logger = structlog.get_logger()

app = typer.Typer(
    help="Random recursive constructions on [0, 1] and their dimensions."
)

_LOG_FORMAT_HELP = (
    "Log output format: 'console' for human-readable output or "
    "'json' for one JSON object per line."
)
_DEFAULT_LOG_FORMAT = logging_config.LogFormat.CONSOLE
_CONFIG_HELP = "JSON experiment configuration; flags override its values."
_SEED_HELP = "Master seed of every random draw."
_MODEL_HELP = "Construction model."
_RATIO_HELP = "Contraction ratio (cantor), or the fixed ratio (homogeneous)."
_ARITY_HELP = "Number of offspring per cell."
_P_HELP = "Fixed exponent p of example1, example2 or orbit_set."
_RATIO_LOW_HELP = "Lower end of the uniform ratio law (homogeneous)."
_RATIO_HIGH_HELP = "Upper end of the uniform ratio law (homogeneous)."
_KEEP_HELP = "Probability that an offspring survives (homogeneous)."
_DEPTH_HELP = "Deepest level of the realization."
_EPS_HELP = "Offspring with diameter below this are not expanded."
_RESOLUTION_HELP = (
    "Keep unexpanded offspring as leaves down to this spacing; "
    "defaults to r_min / 10 for infinitely branching models."
)
_RMIN_HELP = "Smallest radius of the scale grid."
_RMAX_HELP = "Largest radius of the scale grid."
_PPD_HELP = "Radii per decade of the scale grid."
_REPLICAS_HELP = "Number of independent realizations."
_SEMANTICS_HELP = "Construction semantics."
_SURVIVAL_HELP = "Resample until the realization does not die out."
_THREADS_HELP = "Maximal number of replicas running at once."
_OUTPUT_HELP = "Write the result to this file instead of stdout."


@contextlib.contextmanager
def _exit_on_error() -> Iterator[None]:
    """Turn domain errors into a message on stderr and exit code 1."""
    try:
        yield
    except (ValueError, RuntimeError, OSError) as e:
        typer.echo(f"error: {e}", err=True)
        raise typer.Exit(code=1) from e


def _config(path: Path | None, **overrides: Any) -> config.ExperimentConfig:
    base = (
        config.ExperimentConfig() if path is None else config.load_config(path)
    )
    return config.merge_overrides(base, overrides)


def _model(cfg: config.ExperimentConfig) -> construction.ModelSpec:
    return models.build_model(cfg.model)


def _point_resolution(
    cfg: config.ExperimentConfig, model: construction.ModelSpec
) -> float | None:
    if cfg.point_resolution is not None:
        return cfg.point_resolution
    if model.flags.finite_branching:
        return None
    return cfg.scales.r_min / 10.0


def _realization(
    cfg: config.ExperimentConfig,
    model: construction.ModelSpec,
    seed: int | None = None,
) -> construction.Realization:
    seed = cfg.seed if seed is None else seed
    resolution = _point_resolution(cfg, model)
    if cfg.condition_on_survival:
        return construction.sample_surviving_realization(
            model,
            seed,
            cfg.max_depth,
            cfg.eps_trunc,
            cfg.semantics,
            point_resolution=resolution,
        )
    return construction.sample_realization(
        model,
        seed,
        cfg.max_depth,
        cfg.eps_trunc,
        cfg.semantics,
        point_resolution=resolution,
    )


def _fit(
    table: list[geometry.CountRow], available: int
) -> dict[str, dimension.DimensionEstimate]:
    window = dimension.select_fit_window(table, available)
    packing_window = dimension.select_fit_window(
        table, available, count_type=dimension.CountType.PACKING
    )
    return {
        "upper": dimension.estimate_box_dimension(table, window),
        "lower": dimension.estimate_box_dimension(
            table, window, dimension.EstimateMode.LOWER
        ),
        "packing": dimension.estimate_box_dimension(
            table,
            packing_window,
            count_type=dimension.CountType.PACKING,
        ),
    }


@app.callback()
def main(
    *,
    log_format: logging_config.LogFormat = typer.Option(
        _DEFAULT_LOG_FORMAT, help=_LOG_FORMAT_HELP
    ),
) -> None:
    """Random recursive constructions on [0, 1] and their dimensions."""
    logging_config.configure_logging(log_format=log_format)


@app.command()
def solve_alpha(
    *,
    config_path: Path | None = typer.Option(
        None, "--config", help=_CONFIG_HELP
    ),
    seed: int | None = typer.Option(
        None, envvar=config.SEED_ENVVAR, help=_SEED_HELP
    ),
    model: ModelName | None = typer.Option(None, help=_MODEL_HELP),
    ratio: float | None = typer.Option(None, help=_RATIO_HELP),
    arity: int | None = typer.Option(None, help=_ARITY_HELP),
    p: float | None = typer.Option(None, "--p", help=_P_HELP),
    ratio_low: float | None = typer.Option(None, help=_RATIO_LOW_HELP),
    ratio_high: float | None = typer.Option(None, help=_RATIO_HIGH_HELP),
    keep_probability: float | None = typer.Option(None, help=_KEEP_HELP),
    output: Path | None = typer.Option(None, help=_OUTPUT_HELP),
) -> None:
    """Solve E[sum of T_i^alpha] = 1 for the Hausdorff dimension alpha."""
    with _exit_on_error():
        cfg = _config(
            config_path,
            seed=seed,
            name=model,
            ratio=ratio,
            arity=arity,
            p=p,
            ratio_low=ratio_low,
            ratio_high=ratio_high,
            keep_probability=keep_probability,
            output=output,
        )
        curve = dimension.curve_for_model(_model(cfg), seed=cfg.seed)
        solution = dimension.solve_alpha(curve)
        export.write_json(
            schemas.AlphaSolutionSchema.from_solution(solution), cfg.output
        )


@app.command()
def boxdim(
    *,
    config_path: Path | None = typer.Option(
        None, "--config", help=_CONFIG_HELP
    ),
    seed: int | None = typer.Option(
        None, envvar=config.SEED_ENVVAR, help=_SEED_HELP
    ),
    model: ModelName | None = typer.Option(None, help=_MODEL_HELP),
    ratio: float | None = typer.Option(None, help=_RATIO_HELP),
    arity: int | None = typer.Option(None, help=_ARITY_HELP),
    p: float | None = typer.Option(None, "--p", help=_P_HELP),
    ratio_low: float | None = typer.Option(None, help=_RATIO_LOW_HELP),
    ratio_high: float | None = typer.Option(None, help=_RATIO_HIGH_HELP),
    keep_probability: float | None = typer.Option(None, help=_KEEP_HELP),
    depth: int | None = typer.Option(None, help=_DEPTH_HELP),
    eps: float | None = typer.Option(None, help=_EPS_HELP),
    point_resolution: float | None = typer.Option(
        None, help=_RESOLUTION_HELP
    ),
    rmin: float | None = typer.Option(None, help=_RMIN_HELP),
    rmax: float | None = typer.Option(None, help=_RMAX_HELP),
    points_per_decade: int | None = typer.Option(None, help=_PPD_HELP),
    semantics: Semantics | None = typer.Option(None, help=_SEMANTICS_HELP),
    condition_on_survival: bool | None = typer.Option(
        None, help=_SURVIVAL_HELP
    ),
    output: Path | None = typer.Option(
        None,
        help=(
            "Write the JSON summary to this file and the count table next "
            "to it with a .csv suffix, instead of both to stdout."
        ),
    ),
) -> None:
    """Count table (CSV) and box-dimension fits (JSON) of a level union.

    The counted set is the union of the surviving cells at the deepest
    level, or the point set itself for ``orbit_set``.
    """
    with _exit_on_error():
        cfg = _config(
            config_path,
            seed=seed,
            name=model,
            ratio=ratio,
            arity=arity,
            p=p,
            ratio_low=ratio_low,
            ratio_high=ratio_high,
            keep_probability=keep_probability,
            max_depth=depth,
            eps_trunc=eps,
            point_resolution=point_resolution,
            r_min=rmin,
            r_max=rmax,
            points_per_decade=points_per_decade,
            semantics=semantics,
            condition_on_survival=condition_on_survival,
            output=output,
        )
        k_set: geometry.MaybeEmpty
        if cfg.model.name is ModelName.ORBIT_SET:
            cutoff = cfg.model.cutoff or cfg.scales.r_min / 10.0
            # The config rejects orbit_set without p.
            k_set = models.orbit_set(cfg.model.p or math.nan, cutoff)
        else:
            rz = _realization(cfg, _model(cfg))
            k_set = construction.level_union(
                rz, cfg.max_depth, survivors_only=True
            )
        table = geometry.count_table(k_set, cfg.scales.radii())
        fits = _fit(table, len(k_set))
        report = schemas.DimensionReport(
            model=cfg.model.name.value,
            seed=cfg.seed,
            upper=schemas.DimensionEstimateSchema.from_estimate(fits["upper"]),
            lower=schemas.DimensionEstimateSchema.from_estimate(fits["lower"]),
            packing=schemas.DimensionEstimateSchema.from_estimate(
                fits["packing"]
            ),
        )
        if cfg.output is None:
            export.write_count_table_csv(table)
        else:
            export.write_count_table_csv(
                table, cfg.output.with_suffix(".csv")
            )
        export.write_json(report, cfg.output)


@app.command()
def orbit_dim(
    *,
    config_path: Path | None = typer.Option(
        None, "--config", help=_CONFIG_HELP
    ),
    seed: int | None = typer.Option(
        None, envvar=config.SEED_ENVVAR, help=_SEED_HELP
    ),
    model: ModelName | None = typer.Option(None, help=_MODEL_HELP),
    ratio: float | None = typer.Option(None, help=_RATIO_HELP),
    arity: int | None = typer.Option(None, help=_ARITY_HELP),
    p: float | None = typer.Option(None, "--p", help=_P_HELP),
    ratio_low: float | None = typer.Option(None, help=_RATIO_LOW_HELP),
    ratio_high: float | None = typer.Option(None, help=_RATIO_HIGH_HELP),
    keep_probability: float | None = typer.Option(None, help=_KEEP_HELP),
    depth: int | None = typer.Option(None, help=_DEPTH_HELP),
    eps: float | None = typer.Option(None, help=_EPS_HELP),
    rmin: float | None = typer.Option(None, help=_RMIN_HELP),
    rmax: float | None = typer.Option(None, help=_RMAX_HELP),
    points_per_decade: int | None = typer.Option(None, help=_PPD_HELP),
    semantics: Semantics | None = typer.Option(None, help=_SEMANTICS_HELP),
    base: str | None = typer.Option(
        None,
        help=(
            "Address of a single base cell, digits separated by dots; "
            "by default every cell up to --max-base-level."
        ),
    ),
    max_base_level: int = typer.Option(
        0, min=0, help="Deepest level of the base cells."
    ),
    x: float = typer.Option(1.0, help="Reference point in [0, 1]."),
    output: Path | None = typer.Option(None, help=_OUTPUT_HELP),
) -> None:
    """Supremum of first-generation orbit dimensions over base cells.

    Scales are relative to the diameter of each base cell.
    """
    with _exit_on_error():
        cfg = _config(
            config_path,
            seed=seed,
            name=model,
            ratio=ratio,
            arity=arity,
            p=p,
            ratio_low=ratio_low,
            ratio_high=ratio_high,
            keep_probability=keep_probability,
            max_depth=depth,
            eps_trunc=eps,
            r_min=rmin,
            r_max=rmax,
            points_per_decade=points_per_decade,
            semantics=semantics,
            output=output,
        )
        rz = _realization(cfg, _model(cfg))
        bases = (
            max_base_level if base is None else [addressing.parse_address(base)]
        )
        gamma = dimension.estimate_gamma_sup(
            rz, bases, x, cfg.scales.radii()
        )
        report = schemas.OrbitReport(
            model=cfg.model.name.value,
            seed=cfg.seed,
            base=base or "",
            x=x,
            gamma_sup=gamma.value,
            argmax=(
                None
                if gamma.argmax is None
                else addressing.format_address(gamma.argmax)
            ),
            per_base={
                addressing.format_address(a): v
                for a, v in gamma.per_base.items()
            },
            skipped=[addressing.format_address(a) for a in gamma.skipped],
        )
        export.write_json(report, cfg.output)


@app.command()
def generate(
    *,
    config_path: Path | None = typer.Option(
        None, "--config", help=_CONFIG_HELP
    ),
    seed: int | None = typer.Option(
        None, envvar=config.SEED_ENVVAR, help=_SEED_HELP
    ),
    model: ModelName | None = typer.Option(None, help=_MODEL_HELP),
    ratio: float | None = typer.Option(None, help=_RATIO_HELP),
    arity: int | None = typer.Option(None, help=_ARITY_HELP),
    p: float | None = typer.Option(None, "--p", help=_P_HELP),
    ratio_low: float | None = typer.Option(None, help=_RATIO_LOW_HELP),
    ratio_high: float | None = typer.Option(None, help=_RATIO_HIGH_HELP),
    keep_probability: float | None = typer.Option(None, help=_KEEP_HELP),
    depth: int | None = typer.Option(None, help=_DEPTH_HELP),
    eps: float | None = typer.Option(None, help=_EPS_HELP),
    point_resolution: float | None = typer.Option(
        None, help=_RESOLUTION_HELP
    ),
    semantics: Semantics | None = typer.Option(None, help=_SEMANTICS_HELP),
    condition_on_survival: bool | None = typer.Option(
        None, help=_SURVIVAL_HELP
    ),
    output: Path | None = typer.Option(None, help=_OUTPUT_HELP),
) -> None:
    """Sample one realization and export its tree and statistics."""
    with _exit_on_error():
        cfg = _config(
            config_path,
            seed=seed,
            name=model,
            ratio=ratio,
            arity=arity,
            p=p,
            ratio_low=ratio_low,
            ratio_high=ratio_high,
            keep_probability=keep_probability,
            max_depth=depth,
            eps_trunc=eps,
            point_resolution=point_resolution,
            semantics=semantics,
            condition_on_survival=condition_on_survival,
            output=output,
        )
        rz = _realization(cfg, _model(cfg))
        export.write_json(export.realization_export(rz), cfg.output)


@app.command()
def experiment(
    *,
    config_path: Path | None = typer.Option(
        None, "--config", help=_CONFIG_HELP
    ),
    seed: int | None = typer.Option(
        None, envvar=config.SEED_ENVVAR, help=_SEED_HELP
    ),
    model: ModelName | None = typer.Option(None, help=_MODEL_HELP),
    ratio: float | None = typer.Option(None, help=_RATIO_HELP),
    arity: int | None = typer.Option(None, help=_ARITY_HELP),
    p: float | None = typer.Option(None, "--p", help=_P_HELP),
    ratio_low: float | None = typer.Option(None, help=_RATIO_LOW_HELP),
    ratio_high: float | None = typer.Option(None, help=_RATIO_HIGH_HELP),
    keep_probability: float | None = typer.Option(None, help=_KEEP_HELP),
    depth: int | None = typer.Option(None, help=_DEPTH_HELP),
    eps: float | None = typer.Option(None, help=_EPS_HELP),
    point_resolution: float | None = typer.Option(
        None, help=_RESOLUTION_HELP
    ),
    rmin: float | None = typer.Option(None, help=_RMIN_HELP),
    rmax: float | None = typer.Option(None, help=_RMAX_HELP),
    points_per_decade: int | None = typer.Option(None, help=_PPD_HELP),
    replicas_count: int | None = typer.Option(
        None, "--replicas", help=_REPLICAS_HELP
    ),
    semantics: Semantics | None = typer.Option(None, help=_SEMANTICS_HELP),
    condition_on_survival: bool | None = typer.Option(
        None, help=_SURVIVAL_HELP
    ),
    threads: int | None = typer.Option(None, help=_THREADS_HELP),
    output: Path | None = typer.Option(None, help=_OUTPUT_HELP),
) -> None:
    """Solve alpha and fit the box dimension of many realizations.

    Replica i > 0 uses the seed derived from (seed, i); extinct replicas
    are counted and left out of the slopes.
    """
    with _exit_on_error():
        cfg = _config(
            config_path,
            seed=seed,
            name=model,
            ratio=ratio,
            arity=arity,
            p=p,
            ratio_low=ratio_low,
            ratio_high=ratio_high,
            keep_probability=keep_probability,
            max_depth=depth,
            eps_trunc=eps,
            point_resolution=point_resolution,
            r_min=rmin,
            r_max=rmax,
            points_per_decade=points_per_decade,
            replicas=replicas_count,
            semantics=semantics,
            condition_on_survival=condition_on_survival,
            threads=threads,
            output=output,
        )
        model_spec = _model(cfg)
        scales = cfg.scales.radii()
        try:
            alpha = schemas.AlphaSolutionSchema.from_solution(
                dimension.solve_alpha(
                    dimension.curve_for_model(model_spec, seed=cfg.seed)
                )
            )
        except dimension.SubcriticalModelError as e:
            logger.warning("alpha not solved", reason=str(e))
            alpha = None

        def replica(index: int) -> float | None:
            seed_i = (
                cfg.seed
                if index == 0
                else addressing.replica_seed(cfg.seed, index)
            )
            rz = _realization(cfg, model_spec, seed_i)
            if rz.extinct:
                return None
            union = construction.level_union(
                rz, cfg.max_depth, survivors_only=True
            )
            table = geometry.count_table(union, scales)
            try:
                window = dimension.select_fit_window(table, len(union))
            except dimension.InsufficientDataError as e:
                logger.warning("replica skipped", index=index, reason=str(e))
                return math.nan
            return dimension.estimate_box_dimension(table, window).slope

        results = replicas.run_replicas(replica, cfg.replicas, cfg.threads)
        slopes = [s for s in results if s is not None and not math.isnan(s)]
        if not slopes:
            msg = "no replica produced a box-dimension estimate"
            raise dimension.InsufficientDataError(msg)
        report = schemas.ExperimentReport(
            model=cfg.model.name.value,
            seed=cfg.seed,
            replicas=cfg.replicas,
            alpha=alpha,
            slopes=slopes,
            mean_slope=float(np.mean(slopes)),
            extinct=sum(s is None for s in results),
        )
        export.write_json(report, cfg.output)


@app.command(name="verify")
def verify_command(
    *,
    suite: verify.Suite = typer.Option(
        verify.Suite.QUICK, help="Size of the acceptance suite."
    ),
    seed: int = typer.Option(0, envvar=config.SEED_ENVVAR, help=_SEED_HELP),
    threads: int = typer.Option(1, min=1, help=_THREADS_HELP),
    output: Path | None = typer.Option(None, help=_OUTPUT_HELP),
) -> None:
    """Run the acceptance checks; exit with 1 if any of them fails."""
    report = verify.run_suite(suite, seed, threads=threads)
    with _exit_on_error():
        export.write_json(report, output)
    failed = [check.name for check in report.checks if not check.passed]
    if failed:
        typer.echo(f"failed checks: {', '.join(failed)}", err=True)
        raise typer.Exit(code=1)

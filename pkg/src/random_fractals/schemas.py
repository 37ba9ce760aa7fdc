"""JSON schemas of everything the commands write."""

from typing import Literal

from pydantic import BaseModel, Field

from random_fractals import construction, dimension
from random_fractals.construction import Realization, RealizationStats


class NodeRecord(BaseModel):
    address: list[int] = Field(description="Digits from the root down.")
    left: float | None = Field(default=None)
    right: float | None = Field(default=None)
    alive: bool = Field()
    leaf: bool = Field(default=False)
    diameter: float = Field()
    ratio: float | None = Field(default=None)
    offset: float | None = Field(default=None)
    orientation: Literal[1, -1] | None = Field(default=None)


class TruncationRecord(BaseModel):
    level: int = Field()
    omitted: int | None = Field(
        description="Offspring dropped below this level, null if infinite."
    )
    tail_bound_at_one: float = Field(
        description="Bound on the sum of dropped diameters."
    )


class RealizationStatsSchema(BaseModel):
    alive_per_level: list[int] = Field()
    sup_diam_per_level: list[float] = Field()
    truncation: list[TruncationRecord] = Field()

    @classmethod
    def from_stats(cls, stats: RealizationStats) -> "RealizationStatsSchema":
        return cls(
            alive_per_level=list(stats.alive_per_level),
            sup_diam_per_level=list(stats.sup_diam_per_level),
            truncation=[
                TruncationRecord(
                    level=t.level,
                    omitted=t.omitted,
                    tail_bound_at_one=t.tail_bound(1.0),
                )
                for t in stats.truncation
            ],
        )


class RealizationExport(BaseModel):
    model: str = Field()
    parameters: dict[str, float] = Field()
    draws: dict[str, float] = Field(
        description="Realization-wide draws such as the exponent p."
    )
    seed: int = Field()
    depth: int = Field()
    eps_trunc: float = Field()
    semantics: construction.Semantics = Field()
    extinct: bool = Field()
    nodes: list[NodeRecord] = Field()
    stats: RealizationStatsSchema = Field()

    @classmethod
    def from_realization(cls, rz: Realization) -> "RealizationExport":
        nodes = [
            NodeRecord(
                address=list(node.address),
                left=None if node.interval is None else node.interval[0],
                right=None if node.interval is None else node.interval[1],
                alive=node.alive,
                leaf=node.leaf,
                diameter=node.diameter,
                ratio=None if node.local is None else node.local.ratio,
                offset=None if node.local is None else node.local.offset,
                orientation=(
                    None if node.local is None else node.local.orientation
                ),
            )
            for level in rz.levels
            for node in (rz.nodes[a] for a in level)
        ]
        return cls(
            model=rz.model.name,
            parameters=dict(rz.model.parameters),
            draws=dict(rz.globals),
            seed=rz.seed,
            depth=rz.max_depth,
            eps_trunc=rz.eps_trunc,
            semantics=rz.semantics,
            extinct=rz.extinct,
            nodes=nodes,
            stats=RealizationStatsSchema.from_stats(
                construction.realization_stats(rz)
            ),
        )


class AlphaSolutionSchema(BaseModel):
    alpha: float = Field()
    bracket: tuple[float, float] = Field()
    residual: float = Field()
    tail_bound_at_alpha: float = Field()
    mode: dimension.CurveMode = Field()
    n_terms: int = Field(default=0)

    @classmethod
    def from_solution(
        cls, solution: dimension.AlphaSolution
    ) -> "AlphaSolutionSchema":
        return cls(
            alpha=solution.alpha,
            bracket=solution.bracket,
            residual=solution.residual,
            tail_bound_at_alpha=solution.tail_bound_at_alpha,
            mode=solution.mode,
            n_terms=solution.n_terms,
        )


class DimensionEstimateSchema(BaseModel):
    slope: float = Field()
    stderr: float = Field()
    fit_range: tuple[float, float] = Field()
    points_used: int = Field()
    count_type: dimension.CountType = Field()
    r_squared: float = Field()
    mode: dimension.EstimateMode = Field()
    clamped: bool = Field(default=False)
    window_shrunk: bool = Field(default=False)

    @classmethod
    def from_estimate(
        cls, estimate: dimension.DimensionEstimate
    ) -> "DimensionEstimateSchema":
        return cls(
            slope=estimate.slope,
            stderr=estimate.stderr,
            fit_range=estimate.fit_range,
            points_used=estimate.points_used,
            count_type=estimate.count_type,
            r_squared=estimate.r_squared,
            mode=estimate.mode,
            clamped=estimate.clamped,
            window_shrunk=estimate.window_shrunk,
        )


class DimensionReport(BaseModel):
    model: str = Field()
    seed: int = Field()
    upper: DimensionEstimateSchema = Field()
    lower: DimensionEstimateSchema = Field()
    packing: DimensionEstimateSchema | None = Field(default=None)


class OrbitReport(BaseModel):
    model: str = Field()
    seed: int = Field()
    base: str = Field()
    x: float = Field()
    gamma_sup: float = Field()
    argmax: str | None = Field()
    per_base: dict[str, float] = Field()
    skipped: list[str] = Field(default_factory=list)


class ExperimentReport(BaseModel):
    model: str = Field()
    seed: int = Field()
    replicas: int = Field()
    alpha: AlphaSolutionSchema | None = Field(default=None)
    slopes: list[float] = Field()
    mean_slope: float = Field()
    extinct: int = Field(description="Replicas that died out.")


class CheckResult(BaseModel):
    name: str = Field()
    passed: bool = Field()
    measured: dict[str, float | int | str | None] = Field()
    tolerance: str = Field()


class VerifyReport(BaseModel):
    suite: str = Field()
    seed: int = Field()
    passed: bool = Field()
    checks: list[CheckResult] = Field()

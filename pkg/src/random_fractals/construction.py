"""Sampling and inspecting random recursive constructions on [0, 1].

A construction is a random tree of nested closed intervals. Every nonempty
cell J_sigma spawns offspring cells through similarity maps drawn from the
model's offspring law; the random vector of reduction ratios at a node is
drawn from a stream keyed by (seed, address), so the tree does not depend on
the traversal order and both sampling semantics see the same noise.
"""

import math
from collections.abc import Callable, Iterable, Mapping, Sequence
from dataclasses import dataclass, field
from enum import StrEnum
from functools import cached_property
from typing import Final, Literal, Protocol

import numpy as np
import structlog

from random_fractals import addressing, geometry
from random_fractals.addressing import ROOT, Address

logger = structlog.get_logger()

# Interiors overlapping by at most this much still count as disjoint.
OSC_TOLERANCE: Final = 1e-12
# Largest number of derived seeds tried when conditioning on survival.
MAX_SURVIVAL_ATTEMPTS: Final = 1000


class DepthError(ValueError):
    """Raised when a level beyond the stored depth is requested."""


class EmptyCellError(ValueError):
    """Raised when an operation needs a nonempty cell."""


class OffspringError(ValueError):
    """Raised when a model produces offspring violating the construction."""


class UnresolvedStoppingSetError(ValueError):
    """Raised when the stored tree is too shallow for a stopping set."""

    def __init__(self, unresolved: Sequence[Address]) -> None:
        self.unresolved = tuple(unresolved)
        shown = ", ".join(
            addressing.format_address(a) or "<root>" for a in self.unresolved
        )
        super().__init__(f"stopping set unresolved below: {shown}")


class Semantics(StrEnum):
    """How the offspring law is sampled.

    ``recursive`` draws only at nonempty cells; ``fractal`` draws an i.i.d.
    vector at every address up to the maximal depth and discards the empty
    subtrees afterwards.
    """

    RECURSIVE = "recursive"
    FRACTAL = "fractal"


@dataclass(frozen=True, slots=True)
class SimilarityMap:
    """x -> offset + ratio * x (orientation +1) or offset + ratio * (1 - x).

    The image of [0, 1] is ``[offset, offset + ratio]``. Far offspring of
    infinitely branching models may carry a ratio that underflowed to 0.0;
    such maps are constant maps.
    """

    ratio: float
    offset: float
    orientation: Literal[1, -1] = 1

    def __post_init__(self) -> None:
        if not 0.0 <= self.ratio <= 1.0:
            msg = f"similarity ratio must lie in [0, 1], got {self.ratio!r}"
            raise OffspringError(msg)
        if self.orientation not in (1, -1):
            msg = f"orientation must be +1 or -1, got {self.orientation!r}"
            raise OffspringError(msg)

    def __call__(self, x: float) -> float:
        if self.orientation == 1:
            return self.offset + self.ratio * x
        return self.offset + self.ratio * (1.0 - x)

    def apply(self, xs: np.ndarray) -> np.ndarray:
        if self.orientation == 1:
            return self.offset + self.ratio * xs
        return self.offset + self.ratio * (1.0 - xs)

    @property
    def image(self) -> tuple[float, float]:
        return (self.offset, self.offset + self.ratio)

    def compose(self, inner: "SimilarityMap") -> "SimilarityMap":
        """The map x -> self(inner(x))."""
        slope = self.orientation * self.ratio * inner.orientation * inner.ratio
        intercept = self(inner(0.0))
        orientation: Literal[1, -1] = (
            1 if self.orientation == inner.orientation else -1
        )
        offset = intercept if orientation == 1 else intercept + slope
        return SimilarityMap(
            ratio=abs(slope), offset=offset, orientation=orientation
        )


IDENTITY: Final = SimilarityMap(ratio=1.0, offset=0.0)


def _no_tail(_t: float) -> float:
    return 0.0


@dataclass(frozen=True, slots=True)
class Offspring:
    """One offspring slot of a node, in the parent's unit frame.

    ``local`` is None for a child that the offspring law deleted. A leaf is
    kept only as a placement: its subtree is never expanded.
    """

    digit: int
    local: SimilarityMap | None
    leaf: bool = False


@dataclass(frozen=True, slots=True)
class OffspringBatch:
    """Offspring drawn at one node, together with what truncation dropped.

    Attributes:
        children: Kept offspring slots, ordered by digit.
        omitted: Number of offspring dropped by truncation, None when
            infinitely many were dropped.
        omitted_hull: Interval of the parent's unit frame that contains every
            dropped offspring, None when nothing was dropped.
        tail_bound: Upper bound on the sum of (ratio ** t) over the dropped
            offspring, as a function of t.
    """

    children: tuple[Offspring, ...]
    omitted: int | None = 0
    omitted_hull: tuple[float, float] | None = None
    tail_bound: Callable[[float], float] = _no_tail


@dataclass(frozen=True, slots=True)
class Cutoff:
    """Truncation thresholds relative to the parent cell.

    Attributes:
        min_ratio: Offspring with a smaller ratio are not expanded.
        leaf_spacing: When set, offspring below ``min_ratio`` are kept as
            leaves while their placement is at least this far from the
            previously kept placement; the rest is dropped.
    """

    min_ratio: float
    leaf_spacing: float | None = None


@dataclass(frozen=True, slots=True)
class NodeContext:
    address: Address
    rng: np.random.Generator
    globals: Mapping[str, float]

    @property
    def level(self) -> int:
        return len(self.address)


class OffspringGenerator(Protocol):
    """The offspring law of a model.

    Implementations are pure: everything random comes from the stream in the
    node context or from the realization-wide draws in ``globals``.
    """

    def draw_globals(self, rng: np.random.Generator) -> dict[str, float]: ...

    def offspring(self, ctx: NodeContext, cutoff: Cutoff) -> OffspringBatch: ...

    def sample_ratios(self, rng: np.random.Generator) -> np.ndarray: ...

    def log_ratios(self, n_terms: int) -> np.ndarray | None: ...

    def ratio_tail_bound(self, n_terms: int, beta: float) -> float: ...


@dataclass(frozen=True, slots=True)
class ModelFlags:
    deterministic_ratios: bool
    self_similar: bool
    finite_branching: bool
    level_dependent: bool = False
    # Subtrees rooted at this level or deeper are self-similar.
    self_similar_from_level: int | None = None

    def self_similar_below(self, level: int) -> bool:
        if self.self_similar:
            return True
        start = self.self_similar_from_level
        return start is not None and level >= start


@dataclass(frozen=True)
class ModelSpec:
    """A named construction model."""

    name: str
    parameters: Mapping[str, float]
    flags: ModelFlags
    generator: OffspringGenerator

    def draw_globals(self, rng: np.random.Generator) -> dict[str, float]:
        return self.generator.draw_globals(rng)

    def offspring(self, ctx: NodeContext, cutoff: Cutoff) -> OffspringBatch:
        """Offspring at a node, checked against the construction rules."""
        batch = self.generator.offspring(ctx, cutoff)
        for child in batch.children:
            local = child.local
            if local is None:
                continue
            if not child.leaf and not 0.0 < local.ratio < 1.0:
                msg = (
                    f"model {self.name} produced ratio {local.ratio!r} "
                    f"at {ctx.address!r}"
                )
                raise OffspringError(msg)
            lo, hi = local.image
            if lo < -OSC_TOLERANCE or hi > 1.0 + OSC_TOLERANCE:
                msg = f"model {self.name} placed a child outside its parent"
                raise OffspringError(msg)
        return batch


@dataclass(frozen=True, slots=True)
class Truncation:
    omitted: int | None
    omitted_hull: tuple[float, float] | None
    tail_bound: Callable[[float], float]


@dataclass(frozen=True, slots=True)
class Node:
    """A cell of a realization.

    ``local`` maps the parent's cell onto this one, ``cell`` maps [0, 1]
    onto it. Dead nodes are offspring the law deleted; they carry no maps.
    """

    address: Address
    alive: bool
    diameter: float = 0.0
    local: SimilarityMap | None = None
    cell: SimilarityMap | None = None
    interval: tuple[float, float] | None = None
    leaf: bool = False
    truncation: Truncation | None = None

    @property
    def level(self) -> int:
        return len(self.address)


@dataclass(frozen=True)
class Realization:
    """A sampled construction tree truncated at ``max_depth``."""

    model: ModelSpec
    seed: int
    max_depth: int
    eps_trunc: float
    semantics: Semantics
    globals: Mapping[str, float]
    nodes: Mapping[Address, Node]
    levels: tuple[tuple[Address, ...], ...]
    point_resolution: float | None = None

    def node(self, address: Address) -> Node:
        try:
            return self.nodes[address]
        except KeyError:
            msg = f"address {address!r} is not stored in the realization"
            raise DepthError(msg) from None

    def alive_at(self, k: int) -> list[Node]:
        if not 0 <= k <= self.max_depth:
            msg = f"level {k} is outside the stored depth {self.max_depth}"
            raise DepthError(msg)
        return [self.nodes[a] for a in self.levels[k] if self.nodes[a].alive]

    def children(self, address: Address) -> list[Node]:
        return [self.nodes[a] for a in self.children_index.get(address, ())]

    @cached_property
    def children_index(self) -> dict[Address, list[Address]]:
        index: dict[Address, list[Address]] = {}
        for level in self.levels[1:]:
            for a in level:
                index.setdefault(a[:-1], []).append(a)
        return index

    @cached_property
    def survivors(self) -> frozenset[Address]:
        """Addresses whose cell is taken to meet the limit set.

        A node qualifies when it has an alive descendant (or is alive
        itself) at ``max_depth``, or when it is or contains a leaf.
        """
        marked: set[Address] = set()
        for node in self.nodes.values():
            if node.alive and (node.leaf or node.level == self.max_depth):
                marked.update(node.address[:k] for k in range(node.level + 1))
        return frozenset(marked)

    @property
    def extinct(self) -> bool:
        return not self.survivors


def _child_node(parent: Node, child: Offspring) -> Node:
    address = (*parent.address, child.digit)
    if child.local is None or parent.cell is None or parent.interval is None:
        return Node(address=address, alive=False)
    cell = parent.cell.compose(child.local)
    lo, hi = cell.image
    p_lo, p_hi = parent.interval
    interval = (min(max(lo, p_lo), p_hi), max(min(hi, p_hi), p_lo))
    return Node(
        address=address,
        alive=True,
        diameter=parent.diameter * child.local.ratio,
        local=child.local,
        cell=cell,
        interval=interval,
        leaf=child.leaf,
    )


def _cutoff_for(
    diameter: float, eps_trunc: float, point_resolution: float | None
) -> Cutoff:
    if diameter <= 0.0:
        return Cutoff(min_ratio=math.inf)
    spacing = None if point_resolution is None else point_resolution / diameter
    return Cutoff(min_ratio=eps_trunc / diameter, leaf_spacing=spacing)


def sample_realization(
    model: ModelSpec,
    seed: int,
    max_depth: int,
    eps_trunc: float,
    semantics: Semantics = Semantics.RECURSIVE,
    *,
    point_resolution: float | None = None,
) -> Realization:
    """Sample a realization of the construction down to ``max_depth``.

    Args:
        model: The construction model.
        seed: Seed of the realization; every node stream derives from it.
        max_depth: Number of levels below the root to generate.
        eps_trunc: Offspring with absolute diameter below this threshold
            are not expanded.
        semantics: ``recursive`` or ``fractal`` sampling.
        point_resolution: When set, offspring below ``eps_trunc`` whose
            placements are at least this far apart are kept as leaves.

    Returns:
        The realization. Extinct realizations are returned flagged.

    Raises:
        ValueError: If ``max_depth`` is negative or ``eps_trunc`` is not
            positive.
    """
    if max_depth < 0:
        msg = "max_depth must be non-negative"
        raise ValueError(msg)
    if not eps_trunc > 0:
        msg = "eps_trunc must be positive"
        raise ValueError(msg)

    globals_ = model.draw_globals(addressing.realization_rng(seed))
    root = Node(
        address=ROOT,
        alive=True,
        diameter=1.0,
        local=IDENTITY,
        cell=IDENTITY,
        interval=(geometry.AMBIENT_LEFT, geometry.AMBIENT_RIGHT),
    )
    nodes: dict[Address, Node] = {ROOT: root}
    levels: list[tuple[Address, ...]] = [(ROOT,)]
    # Addresses of deleted cells whose i.i.d. draws are still made under
    # fractal semantics; their subtrees are discarded below.
    phantoms: list[Address] = []

    for _ in range(max_depth):
        next_level: list[Address] = []
        for address in levels[-1]:
            parent = nodes[address]
            if not parent.alive or parent.leaf:
                continue
            batch = model.offspring(
                NodeContext(
                    address=address,
                    rng=addressing.node_rng(seed, address),
                    globals=globals_,
                ),
                _cutoff_for(parent.diameter, eps_trunc, point_resolution),
            )
            nodes[address] = _with_truncation(parent, batch)
            for child in batch.children:
                node = _child_node(nodes[address], child)
                nodes[node.address] = node
                next_level.append(node.address)
        if semantics is Semantics.FRACTAL:
            phantoms = _draw_phantoms(
                model, seed, globals_, eps_trunc, phantoms, next_level, nodes
            )
        levels.append(tuple(next_level))

    rz = Realization(
        model=model,
        seed=seed,
        max_depth=max_depth,
        eps_trunc=eps_trunc,
        semantics=semantics,
        globals=globals_,
        nodes=nodes,
        levels=tuple(levels),
        point_resolution=point_resolution,
    )
    if rz.extinct:
        logger.warning(
            "extinct realization", model=model.name, seed=seed, depth=max_depth
        )
    logger.debug(
        "sampled realization",
        model=model.name,
        seed=seed,
        depth=max_depth,
        nodes=len(nodes),
    )
    return rz


def _with_truncation(parent: Node, batch: OffspringBatch) -> Node:
    return Node(
        address=parent.address,
        alive=parent.alive,
        diameter=parent.diameter,
        local=parent.local,
        cell=parent.cell,
        interval=parent.interval,
        leaf=parent.leaf,
        truncation=Truncation(
            omitted=batch.omitted,
            omitted_hull=batch.omitted_hull,
            tail_bound=batch.tail_bound,
        ),
    )


def _draw_phantoms(
    model: ModelSpec,
    seed: int,
    globals_: Mapping[str, float],
    eps_trunc: float,
    phantoms: list[Address],
    next_level: list[Address],
    nodes: Mapping[Address, Node],
) -> list[Address]:
    """Make the draws of deleted cells one level down and return them.

    The draws are made on a unit cell, since a deleted cell has no
    diameter, and nothing drawn here can become alive again.
    """
    parents = phantoms + [a for a in next_level if not nodes[a].alive]
    drawn: list[Address] = []
    for address in parents:
        batch = model.offspring(
            NodeContext(
                address=address,
                rng=addressing.node_rng(seed, address),
                globals=globals_,
            ),
            Cutoff(min_ratio=eps_trunc),
        )
        drawn.extend((*address, child.digit) for child in batch.children)
    return drawn


def level_union(
    rz: Realization, k: int, *, survivors_only: bool = False
) -> geometry.MaybeEmpty:
    """Union of the level-k cells.

    Leaves above level k stand in for their unexpanded subtrees.

    Args:
        rz: The realization.
        k: Level, at most ``rz.max_depth``.
        survivors_only: Keep only cells that meet the limit set, i.e. have
            an alive descendant at the deepest stored level.

    Raises:
        DepthError: If k is outside the stored depth.
    """
    cells = _level_cells(rz, k)
    if survivors_only:
        keep = rz.survivors
        cells = [n for n in cells if n.address in keep]
    return geometry.normalize(n.interval for n in cells if n.interval)


def _level_cells(rz: Realization, k: int) -> list[Node]:
    cells = rz.alive_at(k)
    for j in range(k):
        cells.extend(n for n in rz.alive_at(j) if n.leaf)
    return cells


@dataclass(frozen=True, slots=True)
class Orbit:
    """Images of a reference point under the maps below a base cell.

    Attributes:
        points: The orbit as a compact set of points.
        omitted: Number of images lost to truncation, None if infinite.
        omitted_hulls: Intervals (in the orbit's frame) that contain every
            lost image.
    """

    points: geometry.MaybeEmpty
    omitted: int | None
    omitted_hulls: tuple[tuple[float, float], ...] = field(default=())


def _relative_map(
    rz: Realization, base: Address, sigma: Address
) -> SimilarityMap:
    result = IDENTITY
    for k in range(len(base) + 1, len(sigma) + 1):
        local = rz.nodes[sigma[:k]].local
        if local is None:
            msg = f"cell {sigma[:k]!r} is empty"
            raise EmptyCellError(msg)
        result = result.compose(local)
    return result


def orbit(
    rz: Realization,
    base: Address,
    x: float,
    target: int | Iterable[Address],
    *,
    frame: Literal["absolute", "local"] = "absolute",
    resolution: float | None = None,
    survivors_only: bool = False,
) -> Orbit:
    """The orbit of x within the cell at ``base``.

    Args:
        rz: The realization.
        base: Address of a nonempty cell.
        x: Reference point in the unit frame; it is mapped through the maps
            of each target cell.
        target: A level offset below ``base`` or an antichain of addresses
            extending ``base``.
        frame: ``absolute`` returns points of [0, 1]; ``local`` returns them
            in the unit frame of the base cell.
        resolution: With a level offset of 1, regenerate the offspring of
            the base cell from the model, keeping placements at least this
            far apart in the base cell's frame, instead of reading the
            stored tree.
        survivors_only: Keep only target cells that meet the limit set;
            by default every alive target cell contributes a point.

    Raises:
        EmptyCellError: If the base cell is empty.
        DepthError: If the target reaches below the stored depth.
    """
    base_node = rz.node(base)
    if not base_node.alive or base_node.cell is None:
        msg = "empty cell has no orbit"
        raise EmptyCellError(msg)
    if not 0.0 <= x <= 1.0:
        msg = f"reference point must lie in [0, 1], got {x!r}"
        raise ValueError(msg)

    if resolution is not None and target == 1:
        local_points, omitted, hulls = _regenerated_orbit(
            rz, base_node, x, resolution
        )
    else:
        local_points, omitted, hulls = _stored_orbit(
            rz, base, x, target, survivors_only=survivors_only
        )

    if frame == "absolute":
        cell = base_node.cell
        points = [cell(p) for p in local_points]
        hulls = [tuple(sorted((cell(a), cell(b)))) for a, b in hulls]
    else:
        points = local_points
    return Orbit(
        points=geometry.from_points(points),
        omitted=omitted,
        omitted_hulls=tuple((float(a), float(b)) for a, b in hulls),
    )


def _stored_orbit(
    rz: Realization,
    base: Address,
    x: float,
    target: int | Iterable[Address],
    *,
    survivors_only: bool,
) -> tuple[list[float], int | None, list[tuple[float, float]]]:
    if isinstance(target, int):
        depth = len(base) + target
        if depth > rz.max_depth:
            msg = f"orbit level {depth} exceeds stored depth {rz.max_depth}"
            raise DepthError(msg)
        members = [
            n.address
            for n in rz.alive_at(depth)
            if n.address[: len(base)] == base
        ]
        boundary = depth
    else:
        members = list(target)
        if not addressing.is_antichain(members):
            msg = "orbit target must be an antichain"
            raise ValueError(msg)
        if any(m[: len(base)] != base for m in members):
            msg = "orbit target addresses must extend the base address"
            raise ValueError(msg)
        boundary = max((len(m) for m in members), default=len(base))

    if survivors_only:
        keep = rz.survivors
        members = [sigma for sigma in members if sigma in keep]
    points = [
        _relative_map(rz, base, sigma)(x)
        for sigma in members
        if rz.node(sigma).alive
    ]

    omitted: int | None = 0
    hulls: list[tuple[float, float]] = []
    for node in rz.nodes.values():
        if not node.alive or node.address[: len(base)] != base:
            continue
        if len(node.address) >= boundary:
            continue
        below = _relative_map(rz, base, node.address)
        if node.leaf:
            omitted = None
            hulls.append(below.image)
        elif node.truncation is not None and (
            node.truncation.omitted is None or node.truncation.omitted > 0
        ):
            omitted = (
                None
                if omitted is None or node.truncation.omitted is None
                else omitted + node.truncation.omitted
            )
            if node.truncation.omitted_hull is not None:
                lo, hi = node.truncation.omitted_hull
                hulls.append(tuple(sorted((below(lo), below(hi)))))
    return points, omitted, hulls


def _regenerated_orbit(
    rz: Realization, base_node: Node, x: float, resolution: float
) -> tuple[list[float], int | None, list[tuple[float, float]]]:
    batch = rz.model.offspring(
        NodeContext(
            address=base_node.address,
            rng=addressing.node_rng(rz.seed, base_node.address),
            globals=rz.globals,
        ),
        Cutoff(min_ratio=math.inf, leaf_spacing=resolution),
    )
    points = [c.local(x) for c in batch.children if c.local is not None]
    hulls = [] if batch.omitted_hull is None else [batch.omitted_hull]
    return points, batch.omitted, hulls


def stopping_set(
    rz: Realization, base: Address, q: int, shrink: float = 0.2
) -> frozenset[Address]:
    """First descendants of ``base`` that are small relative to it.

    The result holds every eta with ``|eta| >= |base| + q`` and
    ``l_eta < shrink * l_base`` whose ancestors below depth ``|base| + q``
    are not small; at depth exactly ``|base| + q`` the parent is not
    examined.

    Raises:
        EmptyCellError: If the base cell is empty.
        UnresolvedStoppingSetError: If some branch reaches the stored depth
            (or a leaf) before it becomes small.
    """
    if q < 1:
        msg = "q must be at least 1"
        raise ValueError(msg)
    if not 0.0 < shrink <= 1.0:
        msg = "shrink must lie in (0, 1]"
        raise ValueError(msg)
    base_node = rz.node(base)
    if not base_node.alive:
        msg = "empty cell has no stopping set"
        raise EmptyCellError(msg)

    threshold = shrink * base_node.diameter
    min_depth = len(base) + q
    index = rz.children_index
    members: set[Address] = set()
    unresolved: list[Address] = []
    stack = [base]
    while stack:
        address = stack.pop()
        node = rz.nodes[address]
        if not node.alive:
            continue
        if len(address) >= min_depth and node.diameter < threshold:
            members.add(address)
            continue
        if node.leaf or len(address) == rz.max_depth:
            unresolved.append(address)
            continue
        stack.extend(index.get(address, ()))
    if unresolved:
        raise UnresolvedStoppingSetError(sorted(unresolved))
    result = frozenset(members)
    if not addressing.is_antichain(result):
        msg = "stopping set is not an antichain"
        raise AssertionError(msg)
    return result


@dataclass(frozen=True, slots=True)
class OscReport:
    ok: bool
    worst_overlap: float


def validate_osc(rz: Realization, k: int) -> OscReport:
    """Check that the level-k cells have pairwise disjoint interiors."""
    intervals = sorted(n.interval for n in rz.alive_at(k) if n.interval)
    if len(intervals) < 2:  # noqa: PLR2004
        return OscReport(ok=True, worst_overlap=0.0)
    lefts = np.array([a for a, _ in intervals])
    rights = np.array([b for _, b in intervals])
    reach = np.maximum.accumulate(rights)[:-1]
    overlaps = np.minimum(reach, rights[1:]) - lefts[1:]
    worst = max(float(np.max(overlaps)), 0.0)
    return OscReport(ok=worst <= OSC_TOLERANCE, worst_overlap=worst)


def neighborhood_bound_probe(
    rz: Realization, k: int, z: float, r: float
) -> int:
    """Number of level-k cells meeting B(z, r) whose diameter is >= r/2."""
    lo, hi = z - r, z + r
    return sum(
        1
        for n in rz.alive_at(k)
        if n.interval is not None
        and n.diameter >= r / 2.0
        and n.interval[0] <= hi
        and n.interval[1] >= lo
    )


@dataclass(frozen=True, slots=True)
class LevelTruncation:
    """What truncation dropped from the offspring of one level's cells."""

    level: int
    omitted: int | None
    parents: tuple[tuple[float, Callable[[float], float]], ...] = ()

    def tail_bound(self, t: float) -> float:
        """Bound on the sum of l^t over the dropped cells one level down."""
        return math.fsum(d**t * bound(t) for d, bound in self.parents)


@dataclass(frozen=True, slots=True)
class RealizationStats:
    alive_per_level: tuple[int, ...]
    sup_diam_per_level: tuple[float, ...]
    truncation: tuple[LevelTruncation, ...]


def realization_stats(rz: Realization) -> RealizationStats:
    """Level counts S_k, largest diameters, and truncation per level."""
    alive: list[int] = []
    sup_diam: list[float] = []
    truncation: list[LevelTruncation] = []
    for k in range(rz.max_depth + 1):
        cells = rz.alive_at(k)
        alive.append(len(cells))
        sup_diam.append(max((n.diameter for n in cells), default=0.0))
        omitted: int | None = 0
        parents = []
        for n in cells:
            if n.truncation is None:
                continue
            if n.truncation.omitted is None or omitted is None:
                omitted = None
            else:
                omitted += n.truncation.omitted
            parents.append((n.diameter, n.truncation.tail_bound))
        truncation.append(
            LevelTruncation(level=k, omitted=omitted, parents=tuple(parents))
        )
    return RealizationStats(
        alive_per_level=tuple(alive),
        sup_diam_per_level=tuple(sup_diam),
        truncation=tuple(truncation),
    )


def sample_surviving_realization(
    model: ModelSpec,
    seed: int,
    max_depth: int,
    eps_trunc: float,
    semantics: Semantics = Semantics.RECURSIVE,
    *,
    point_resolution: float | None = None,
    max_attempts: int = MAX_SURVIVAL_ATTEMPTS,
) -> Realization:
    """Rejection-sample a realization that survives to ``max_depth``.

    Attempt i > 0 uses the derived seed (seed, i).

    Raises:
        RuntimeError: If every attempt went extinct.
    """
    for attempt in range(max_attempts):
        attempt_seed = (
            seed
            if attempt == 0
            else addressing.replica_seed(seed, attempt, "survival")
        )
        rz = sample_realization(
            model,
            attempt_seed,
            max_depth,
            eps_trunc,
            semantics,
            point_resolution=point_resolution,
        )
        if not rz.extinct:
            if attempt:
                logger.info(
                    "conditioned on survival", seed=seed, attempts=attempt + 1
                )
            return rz
    msg = f"no surviving realization in {max_attempts} attempts"
    raise RuntimeError(msg)

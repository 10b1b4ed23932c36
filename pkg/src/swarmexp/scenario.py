"""Procedural scenario generators and external point-cloud ingestion.

Random-obstacle maps compose three structural motifs (narrow corridor,
corner loop, multi-room block) and then sprinkle isolated rectangles and
circles until the obstacle area fraction reaches the requested density,
keeping the free space a single 4-connected component throughout.  Maze maps
carve a randomized-Kruskal spanning tree over a coarse cell lattice with
constant-width corridors.  Both are pure functions of their spec.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from scipy import ndimage

from .dynamics import VehicleParams
from .mapcore import MapError, WorldMap

_FOUR_CONN = np.array([[0, 1, 0], [1, 1, 1], [0, 1, 0]], dtype=bool)

# maze corridors must fit two default vehicle footprints side by side
_MIN_CORRIDOR = 2.0 * (2.0 * VehicleParams().footprint_radius)

_MAP_RETRIES = 10
_MAZE_REROLLS = 8


class GenerationError(RuntimeError):
    """Raised when a generator cannot satisfy its spec after bounded retries."""


@dataclass(frozen=True)
class ScenarioSpec:
    kind: str
    seed: int = 0
    size: float = 125.0
    resolution: float = 1.0
    obstacle_density: float = 0.15
    cell_count: int = 10
    corridor_width: float = 5.0

    def __post_init__(self):
        if self.kind not in ("random_obstacle", "maze", "ingested"):
            raise ValueError(f"unknown scenario kind {self.kind!r}")
        if self.size <= 0 or self.resolution <= 0:
            raise ValueError("size and resolution must be positive")
        if self.kind == "random_obstacle" and not 0.0 <= self.obstacle_density < 0.5:
            raise ValueError("obstacle_density must be in [0, 0.5)")
        if self.kind == "maze":
            if self.cell_count < 2:
                raise ValueError("cell_count must be >= 2")
            if self.corridor_width < _MIN_CORRIDOR:
                raise ValueError(
                    f"corridor_width must be >= {_MIN_CORRIDOR} "
                    "(twice the agent footprint diameter)")


def _raster_to_map(occ: np.ndarray, spec: ScenarioSpec, name: str) -> WorldMap:
    """Emit cell-center points from a boolean raster (True = obstacle)."""
    n = occ.shape[0]
    res = spec.resolution
    ys, xs = np.nonzero(~occ)
    free = np.column_stack(((xs + 0.5) * res, (ys + 0.5) * res))
    ys, xs = np.nonzero(occ)
    obst = np.column_stack(((xs + 0.5) * res, (ys + 0.5) * res))
    extent = n * res
    return WorldMap(name, res, (0.0, 0.0, extent, extent), free, obst)


def _free_connected(occ: np.ndarray) -> bool:
    _, count = ndimage.label(~occ, structure=_FOUR_CONN)
    return count == 1


def _paint_wall_h(occ, x0, x1, y):
    occ[y, max(x0, 0):x1 + 1] = True


def _paint_wall_v(occ, x, y0, y1):
    occ[max(y0, 0):y1 + 1, x] = True


def _try_paint(occ, painter, rng) -> bool:
    """Apply painter to a copy; commit iff free space stays one component."""
    trial = occ.copy()
    painter(trial, rng)
    if _free_connected(trial):
        occ[:] = trial
        return True
    return False


def _motif_corridor(occ, rng):
    n = occ.shape[0]
    length = int(rng.integers(n // 5, 2 * n // 5 + 1))
    gap = int(rng.integers(3, 7))
    if rng.integers(2) == 0:
        x0 = int(rng.integers(2, n - length - 2))
        y0 = int(rng.integers(2, n - gap - 4))
        _paint_wall_h(occ, x0, x0 + length, y0)
        _paint_wall_h(occ, x0, x0 + length, y0 + gap + 1)
    else:
        y0 = int(rng.integers(2, n - length - 2))
        x0 = int(rng.integers(2, n - gap - 4))
        _paint_wall_v(occ, x0, y0, y0 + length)
        _paint_wall_v(occ, x0 + gap + 1, y0, y0 + length)


def _motif_corner_loop(occ, rng):
    n = occ.shape[0]
    la = int(rng.integers(n // 6, n // 3 + 1))
    lb = int(rng.integers(n // 6, n // 3 + 1))
    gap = int(rng.integers(3, 7))
    x0 = int(rng.integers(2, n - la - gap - 4))
    y0 = int(rng.integers(2, n - lb - gap - 4))
    # outer L
    _paint_wall_h(occ, x0, x0 + la + gap + 1, y0)
    _paint_wall_v(occ, x0, y0, y0 + lb + gap + 1)
    # inner L, offset by the corridor gap
    _paint_wall_h(occ, x0 + gap + 1, x0 + la + gap + 1, y0 + gap + 1)
    _paint_wall_v(occ, x0 + gap + 1, y0 + gap + 1, y0 + lb + gap + 1)


def _motif_rooms(occ, rng):
    n = occ.shape[0]
    w = int(rng.integers(n // 6, n // 3 + 1))
    h = int(rng.integers(n // 6, n // 3 + 1))
    x0 = int(rng.integers(2, n - w - 2))
    y0 = int(rng.integers(2, n - h - 2))
    _paint_wall_h(occ, x0, x0 + w, y0)
    _paint_wall_h(occ, x0, x0 + w, y0 + h)
    _paint_wall_v(occ, x0, y0, y0 + h)
    _paint_wall_v(occ, x0 + w, y0, y0 + h)
    # interior divider making it multi-room, door included
    if w >= 12:
        xm = x0 + w // 2
        _paint_wall_v(occ, xm, y0, y0 + h)
        dy = int(rng.integers(y0 + 1, y0 + h - 3))
        occ[dy:dy + 3, xm] = False
    # one or two doors through the perimeter
    for _ in range(int(rng.integers(1, 3))):
        side = int(rng.integers(4))
        if side == 0:
            dx = int(rng.integers(x0 + 1, x0 + w - 3))
            occ[y0, dx:dx + 3] = False
        elif side == 1:
            dx = int(rng.integers(x0 + 1, x0 + w - 3))
            occ[y0 + h, dx:dx + 3] = False
        elif side == 2:
            dy = int(rng.integers(y0 + 1, y0 + h - 3))
            occ[dy:dy + 3, x0] = False
        else:
            dy = int(rng.integers(y0 + 1, y0 + h - 3))
            occ[dy:dy + 3, x0 + w] = False


def _sprinkle_obstacles(occ, density: float, rng) -> bool:
    """Add isolated rects/circles until the obstacle fraction reaches density."""
    n = occ.shape[0]
    total = n * n
    tries = 0
    while occ.sum() / total < density:
        tries += 1
        if tries > 50_000:
            return False
        if rng.integers(2) == 0:
            w = int(rng.integers(2, 6))
            h = int(rng.integers(2, 6))
            x0 = int(rng.integers(2, n - w - 2))
            y0 = int(rng.integers(2, n - h - 2))
            region = (slice(y0, y0 + h), slice(x0, x0 + w))
            guard = (slice(max(y0 - 2, 0), y0 + h + 2), slice(max(x0 - 2, 0), x0 + w + 2))
            if occ[guard].any():
                continue
            trial = occ.copy()
            trial[region] = True
        else:
            r = int(rng.integers(1, 4))
            cx = int(rng.integers(r + 2, n - r - 2))
            cy = int(rng.integers(r + 2, n - r - 2))
            guard = (slice(cy - r - 2, cy + r + 3), slice(cx - r - 2, cx + r + 3))
            if occ[guard].any():
                continue
            yy, xx = np.ogrid[-r:r + 1, -r:r + 1]
            disc = xx * xx + yy * yy <= r * r
            trial = occ.copy()
            trial[cy - r:cy + r + 1, cx - r:cx + r + 1] |= disc
        if _free_connected(trial):
            occ[:] = trial
    return True


def gen_random_obstacle(spec: ScenarioSpec) -> WorldMap:
    """Random Obstacle scenario: motifs plus isolated obstacles at a density."""
    if spec.kind != "random_obstacle":
        raise ValueError("spec.kind must be 'random_obstacle'")
    n = int(round(spec.size / spec.resolution))
    if n < 24:
        raise GenerationError("map too small for structural motifs")
    rng = np.random.default_rng(np.random.SeedSequence(spec.seed))
    scale = (n / 125.0) ** 2
    n_motifs = max(1, int(round(2 * scale)))
    for _ in range(_MAP_RETRIES):
        occ = np.zeros((n, n), dtype=bool)
        for painter in (_motif_corridor, _motif_corner_loop, _motif_rooms):
            for _ in range(n_motifs):
                for _ in range(30):
                    if _try_paint(occ, painter, rng):
                        break
        if not _sprinkle_obstacles(occ, spec.obstacle_density, rng):
            continue
        if _free_connected(occ):
            return _raster_to_map(occ, spec, f"random-obstacle-{spec.seed}")
    raise GenerationError(
        f"could not reach density {spec.obstacle_density} with connected free space")


def maze_carve_graph(spec: ScenarioSpec) -> list[tuple[tuple[int, int], tuple[int, int]]]:
    """Carved passages of the maze: a spanning tree over the cell lattice.

    Kruskal on seed-shuffled lattice edges; attempts with single-cell
    dead-end stubs are re-rolled (bounded), keeping the stub-minimal attempt.
    """
    if spec.kind != "maze":
        raise ValueError("spec.kind must be 'maze'")
    c = spec.cell_count
    all_edges = []
    for j in range(c):
        for i in range(c):
            if i + 1 < c:
                all_edges.append(((i, j), (i + 1, j)))
            if j + 1 < c:
                all_edges.append(((i, j), (i, j + 1)))

    best: list | None = None
    best_stubs = math.inf
    for attempt in range(_MAZE_REROLLS):
        rng = np.random.default_rng(np.random.SeedSequence((spec.seed, attempt)))
        order = rng.permutation(len(all_edges))
        parent = list(range(c * c))

        def find(u):
            while parent[u] != u:
                parent[u] = parent[parent[u]]
                u = parent[u]
            return u

        carved = []
        for ei in order:
            a, b = all_edges[int(ei)]
            ra, rb = find(a[1] * c + a[0]), find(b[1] * c + b[0])
            if ra != rb:
                parent[ra] = rb
                carved.append((a, b))
                if len(carved) == c * c - 1:
                    break

        degree = np.zeros(c * c, dtype=np.int64)
        for a, b in carved:
            degree[a[1] * c + a[0]] += 1
            degree[b[1] * c + b[0]] += 1
        adj = {i: [] for i in range(c * c)}
        for a, b in carved:
            ia, ib = a[1] * c + a[0], b[1] * c + b[0]
            adj[ia].append(ib)
            adj[ib].append(ia)
        stubs = sum(1 for v in range(c * c)
                    if degree[v] == 1 and degree[adj[v][0]] >= 3)
        if stubs < best_stubs:
            best, best_stubs = carved, stubs
        if stubs == 0:
            break
    assert best is not None
    return best


def _paint_rect_meters(free: np.ndarray, res: float, x0, x1, y0, y1):
    """Mark free every fine cell whose center falls in [x0,x1] x [y0,y1]."""
    n = free.shape[0]
    ix0 = max(0, int(math.ceil(x0 / res - 0.5)))
    ix1 = min(n - 1, int(math.floor(x1 / res - 0.5)))
    iy0 = max(0, int(math.ceil(y0 / res - 0.5)))
    iy1 = min(n - 1, int(math.floor(y1 / res - 0.5)))
    if ix1 >= ix0 and iy1 >= iy0:
        free[iy0:iy1 + 1, ix0:ix1 + 1] = True


def gen_maze(spec: ScenarioSpec) -> WorldMap:
    """Maze scenario: constant-width corridors along the carved spanning tree."""
    if spec.kind != "maze":
        raise ValueError("spec.kind must be 'maze'")
    pitch = spec.size / spec.cell_count
    if spec.corridor_width + 2 * spec.resolution > pitch:
        raise ValueError(
            f"corridor_width {spec.corridor_width} too large for cell pitch {pitch}")
    n = int(round(spec.size / spec.resolution))
    free = np.zeros((n, n), dtype=bool)
    half = spec.corridor_width / 2.0

    def center(cell):
        return ((cell[0] + 0.5) * pitch, (cell[1] + 0.5) * pitch)

    for j in range(spec.cell_count):
        for i in range(spec.cell_count):
            cx, cy = center((i, j))
            _paint_rect_meters(free, spec.resolution,
                               cx - half, cx + half, cy - half, cy + half)
    for a, b in maze_carve_graph(spec):
        ax, ay = center(a)
        bx, by = center(b)
        _paint_rect_meters(free, spec.resolution,
                           min(ax, bx) - half, max(ax, bx) + half,
                           min(ay, by) - half, max(ay, by) + half)
    return _raster_to_map(~free, spec, f"maze-{spec.seed}")


def ingest_cloud(path, resolution: float, z_band: tuple[float, float],
                 height_threshold: float = 0.3, name: str | None = None) -> WorldMap:
    """Classify an x-y-z point file into a 2D free/obstacle map.

    Points inside the z band are grouped into resolution cells; a cell whose
    z extent exceeds ``height_threshold`` becomes an obstacle, the rest free.
    Free cells outside the largest connected component are dropped.
    """
    if resolution <= 0:
        raise ValueError("resolution must be positive")
    try:
        rows = np.loadtxt(path, usecols=(0, 1, 2), ndmin=2, dtype=np.float64)
    except (ValueError, IndexError) as exc:
        raise MapError(f"cannot parse point file {path}: {exc}") from exc
    if rows.size == 0:
        raise MapError("empty point file")
    lo, hi = z_band
    keep = (rows[:, 2] >= lo) & (rows[:, 2] <= hi)
    rows = rows[keep]
    if len(rows) == 0:
        raise MapError("empty result: z band excludes every point")

    ox = math.floor(rows[:, 0].min() / resolution) * resolution
    oy = math.floor(rows[:, 1].min() / resolution) * resolution
    ix = np.floor((rows[:, 0] - ox) / resolution).astype(np.int64)
    iy = np.floor((rows[:, 1] - oy) / resolution).astype(np.int64)
    nx = int(ix.max()) + 1
    ny = int(iy.max()) + 1

    cid = iy * nx + ix
    order = np.argsort(cid, kind="stable")
    cid_s = cid[order]
    z_s = rows[order, 2]
    starts = np.flatnonzero(np.r_[True, cid_s[1:] != cid_s[:-1]])
    z_min = np.minimum.reduceat(z_s, starts)
    z_max = np.maximum.reduceat(z_s, starts)
    cells = cid_s[starts]
    is_obstacle = (z_max - z_min) > height_threshold

    occ = np.zeros((ny, nx), dtype=bool)
    known = np.zeros((ny, nx), dtype=bool)
    known[cells // nx, cells % nx] = True
    occ[cells[is_obstacle] // nx, cells[is_obstacle] % nx] = True

    free_mask = known & ~occ
    if not free_mask.any():
        raise MapError("empty result: no free cells after classification")
    labels, count = ndimage.label(free_mask, structure=_FOUR_CONN)
    if count > 1:
        sizes = ndimage.sum_labels(np.ones_like(labels), labels, range(1, count + 1))
        free_mask = labels == (int(np.argmax(sizes)) + 1)
        if not free_mask.any():
            raise MapError("empty result after connectivity repair")

    ys, xs = np.nonzero(free_mask)
    free = np.column_stack((ox + (xs + 0.5) * resolution, oy + (ys + 0.5) * resolution))
    ys, xs = np.nonzero(occ)
    obst = np.column_stack((ox + (xs + 0.5) * resolution, oy + (ys + 0.5) * resolution))
    bounds = (ox, oy, ox + nx * resolution, oy + ny * resolution)
    map_name = name or Path(path).stem
    return WorldMap(map_name, resolution, bounds, free, obst)


@dataclass
class ValidationReport:
    component_count: int
    largest_component_fraction: float
    reachable_fraction: float
    min_clearance: float
    max_clearance: float
    footprint_radius: float
    valid: bool

    def to_text(self) -> str:
        lines = [
            f"components {self.component_count}",
            f"largest_component_fraction {self.largest_component_fraction:.6f}",
            f"reachable_fraction {self.reachable_fraction:.6f}",
            f"min_clearance {self.min_clearance:.6f}",
            f"max_clearance {self.max_clearance:.6f}",
            f"footprint_radius {self.footprint_radius:.6f}",
            f"valid {int(self.valid)}",
        ]
        return "\n".join(lines)


def validate_map(wmap: WorldMap, footprint_radius: float) -> ValidationReport:
    """Connectivity / clearance report; valid maps are explorable end to end.

    Clearance is the free-disc diameter at a point: twice the distance to the
    nearest obstacle point or map edge.  A map is valid iff one component
    holds >= 99% of the free points and the largest clearance admits two
    footprints (>= 2 * footprint_radius).
    """
    xmin, ymin, xmax, ymax = wmap.bounds
    res = wmap.resolution
    nx = max(1, int(math.ceil((xmax - xmin) / res)))
    ny = max(1, int(math.ceil((ymax - ymin) / res)))

    fx = np.clip(((wmap.free[:, 0] - xmin) / res).astype(np.int64), 0, nx - 1)
    fy = np.clip(((wmap.free[:, 1] - ymin) / res).astype(np.int64), 0, ny - 1)
    free_raster = np.zeros((ny, nx), dtype=bool)
    free_raster[fy, fx] = True

    labels, count = ndimage.label(free_raster, structure=_FOUR_CONN)
    point_labels = labels[fy, fx]
    sizes = np.bincount(point_labels, minlength=count + 1)
    largest = int(np.argmax(sizes[1:])) + 1 if count else 0
    largest_fraction = sizes[largest] / wmap.n_free if count else 0.0

    if wmap.n_obstacle:
        gx = np.clip(((wmap.obstacle[:, 0] - xmin) / res).astype(np.int64), 0, nx - 1)
        gy = np.clip(((wmap.obstacle[:, 1] - ymin) / res).astype(np.int64), 0, ny - 1)
        obst_raster = np.zeros((ny, nx), dtype=bool)
        obst_raster[gy, gx] = True
        obst_dist = ndimage.distance_transform_edt(~obst_raster) * res
        point_obst = obst_dist[fy, fx]
    else:
        point_obst = np.full(wmap.n_free, np.inf)

    edge = np.minimum.reduce([
        wmap.free[:, 0] - xmin, xmax - wmap.free[:, 0],
        wmap.free[:, 1] - ymin, ymax - wmap.free[:, 1]])
    clearance = 2.0 * np.minimum(point_obst, edge)

    admissible = clearance >= 2.0 * footprint_radius
    adm_raster = np.zeros((ny, nx), dtype=bool)
    adm_raster[fy[admissible], fx[admissible]] = True
    adm_labels, adm_count = ndimage.label(adm_raster, structure=_FOUR_CONN)
    if adm_count:
        adm_point_labels = adm_labels[fy, fx]
        adm_sizes = np.bincount(adm_point_labels[admissible], minlength=adm_count + 1)
        reachable = adm_sizes.max() / wmap.n_free
    else:
        reachable = 0.0

    min_cl = float(clearance.min())
    max_cl = float(clearance.max())
    return ValidationReport(
        component_count=int(count),
        largest_component_fraction=float(largest_fraction),
        reachable_fraction=float(reachable),
        min_clearance=min_cl,
        max_clearance=max_cl,
        footprint_radius=footprint_radius,
        valid=bool(largest_fraction >= 0.99 and max_cl >= 2.0 * footprint_radius),
    )


def build_map(spec_or_path) -> WorldMap:
    """Resolve a ScenarioSpec or .mxm path into a WorldMap."""
    from .mapcore import load_map

    if isinstance(spec_or_path, WorldMap):
        return spec_or_path
    if isinstance(spec_or_path, ScenarioSpec):
        if spec_or_path.kind == "random_obstacle":
            return gen_random_obstacle(spec_or_path)
        if spec_or_path.kind == "maze":
            return gen_maze(spec_or_path)
        raise ValueError("ingested scenarios need an explicit file path")
    return load_map(spec_or_path)

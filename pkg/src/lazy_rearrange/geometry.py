"""Distances, track arithmetic, buffer-region optimizers, collisions and heightmaps."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable, Mapping, Sequence

import numpy as np
from shapely.geometry import Point

from .model import (
    Arrangement,
    Disc,
    Gridded,
    Instance,
    ObjectShape,
    Pose,
    Prism,
    Table,
    _intervals_overlap,
    world_footprint,
)

EPS = 1e-9


def dist_ee(p: Pose, q: Pose) -> float:
    """End-effector travel in the x-y plane; z and yaw are ignored."""
    return math.hypot(p.x - q.x, p.y - q.y)


# ---------------------------------------------------------------------------
# Track around the table boundary


@dataclass(frozen=True)
class Track:
    """Closed base track along the table boundary.

    Arclength starts at the (-width/2, -depth/2) corner and runs counterclockwise.
    """

    width: float
    depth: float

    @classmethod
    def of(cls, table: Table) -> "Track":
        return cls(table.width, table.depth)

    @property
    def perimeter(self) -> float:
        return 2.0 * (self.width + self.depth)

    def point_to_param(self, x: float, y: float) -> float:
        hw, hd = self.width / 2, self.depth / 2
        w, d = self.width, self.depth
        # (distance to edge, arclength of the foot point) per edge, in arclength order
        cands = [
            (y + hd, x + hw),
            (hw - x, w + (y + hd)),
            (hd - y, w + d + (hw - x)),
            (x + hw, 2 * w + d + (hd - y)),
        ]
        best = min(c[0] for c in cands)
        s = min(c[1] % self.perimeter for c in cands if c[0] <= best + 1e-12)
        return s

    def param_to_point(self, s: float) -> tuple[float, float]:
        hw, hd = self.width / 2, self.depth / 2
        w, d = self.width, self.depth
        s = s % self.perimeter
        if s <= w:
            return (-hw + s, -hd)
        if s <= w + d:
            return (hw, -hd + (s - w))
        if s <= 2 * w + d:
            return (hw - (s - w - d), hd)
        return (-hw, hd - (s - 2 * w - d))

    def inward_normal(self, s: float) -> tuple[float, float]:
        w, d = self.width, self.depth
        s = s % self.perimeter
        if s < w:
            return (0.0, 1.0)
        if s < w + d:
            return (-1.0, 0.0)
        if s < 2 * w + d:
            return (0.0, -1.0)
        return (1.0, 0.0)


def track_project(p: Pose, track: Track) -> float:
    """Arclength of the boundary point nearest to the pose's x-y (ties: smallest)."""
    if abs(p.x) > track.width / 2 + EPS or abs(p.y) > track.depth / 2 + EPS:
        raise ValueError(f"point ({p.x}, {p.y}) lies outside the table")
    return track.point_to_param(p.x, p.y)


def _perimeter(track: Track | float) -> float:
    return track.perimeter if isinstance(track, Track) else float(track)


def track_distance(s1: float, s2: float, track: Track | float) -> float:
    per = _perimeter(track)
    d = abs(s1 - s2) % per
    return min(d, per - d)


def opposite_point(s: float, track: Track | float) -> float:
    per = _perimeter(track)
    return (s + per / 2.0) % per


# ---------------------------------------------------------------------------
# Fermat point and buffer regions


def _outer_apex(p, q, away):
    """Apex of the equilateral triangle on segment pq, on the side away from ``away``."""
    mx, my = (p[0] + q[0]) / 2, (p[1] + q[1]) / 2
    k = math.sqrt(3.0) / 2
    nx, ny = -(q[1] - p[1]) * k, (q[0] - p[0]) * k
    side = (away[0] - mx) * nx + (away[1] - my) * ny
    return (mx - nx, my - ny) if side > 0 else (mx + nx, my + ny)


def fermat_point(a, b, c) -> np.ndarray:
    """Point minimizing the summed distance to three points.

    A vertex with an angle of at least 120 degrees is optimal (this covers
    collinear triples); otherwise the Torricelli construction applies: the
    lines joining each vertex to the outer equilateral apex on the opposite
    side meet at the optimum.
    """
    pts = [(float(p[0]), float(p[1])) for p in (a, b, c)]
    for i in range(3):
        for j in range(i + 1, 3):
            if math.hypot(pts[i][0] - pts[j][0], pts[i][1] - pts[j][1]) <= 1e-15:
                return np.array(pts[i])
    for i in range(3):
        o, u, v = pts[i], pts[(i + 1) % 3], pts[(i + 2) % 3]
        ux, uy, vx, vy = u[0] - o[0], u[1] - o[1], v[0] - o[0], v[1] - o[1]
        cos = (ux * vx + uy * vy) / (math.hypot(ux, uy) * math.hypot(vx, vy))
        if cos <= -0.5 + 1e-12:
            return np.array(o)
    pa, pb, pc = pts
    qa = _outer_apex(pb, pc, pa)
    qb = _outer_apex(pc, pa, pb)
    rx, ry = qa[0] - pa[0], qa[1] - pa[1]
    sx, sy = qb[0] - pb[0], qb[1] - pb[1]
    den = rx * sy - ry * sx
    t = ((pb[0] - pa[0]) * sy - (pb[1] - pa[1]) * sx) / den
    return np.array((pa[0] + t * rx, pa[1] + t * ry))


def distance_sum(p, points) -> float:
    return float(np.linalg.norm(np.asarray(points, dtype=float) - np.asarray(p, dtype=float), axis=1).sum())


def _cross(o, a, b) -> float:
    return float((a[0] - o[0]) * (b[1] - o[1]) - (a[1] - o[1]) * (b[0] - o[0]))


def _in_triangle(p, a, b, c, tol=1e-12) -> bool:
    d1, d2, d3 = _cross(a, b, p), _cross(b, c, p), _cross(c, a, p)
    neg = d1 < -tol or d2 < -tol or d3 < -tol
    pos = d1 > tol or d2 > tol or d3 > tol
    return not (neg and pos)


def _segment_intersection(p1, p2, q1, q2):
    r = p2 - p1
    s = q2 - q1
    den = r[0] * s[1] - r[1] * s[0]
    if abs(den) < 1e-15:
        return None
    t = ((q1[0] - p1[0]) * s[1] - (q1[1] - p1[1]) * s[0]) / den
    u = ((q1[0] - p1[0]) * r[1] - (q1[1] - p1[1]) * r[0]) / den
    if -1e-12 <= t <= 1 + 1e-12 and -1e-12 <= u <= 1 + 1e-12:
        return p1 + t * r
    return None


def ee_optimal_buffer_region(v1, v2, v3, v4) -> list[tuple[float, float]]:
    """Minimizers of the summed x-y distance to four visit points.

    Convex quadrilateral: the diagonal intersection. One point inside the
    triangle of the others (or coincident points, collinear sets): the
    minimizing points among the four themselves.
    """
    pts = np.asarray([v1, v2, v3, v4], dtype=float)

    def among_four():
        sums = [distance_sum(p, pts) for p in pts]
        best = min(sums)
        out: list[tuple[float, float]] = []
        for p, s in zip(pts, sums):
            t = (float(p[0]), float(p[1]))
            if s <= best + 1e-12 and t not in out:
                out.append(t)
        return out

    for i in range(4):
        for j in range(i + 1, 4):
            if np.linalg.norm(pts[i] - pts[j]) <= 1e-12:
                return among_four()
    for i in range(4):
        others = [pts[k] for k in range(4) if k != i]
        tri_area = abs(_cross(*others))
        if tri_area > 1e-15 and _in_triangle(pts[i], *others):
            return [(float(pts[i][0]), float(pts[i][1]))]
    spread = np.ptp(pts, axis=0).max()
    if all(abs(_cross(pts[0], pts[1], p)) <= 1e-12 * max(spread, 1.0) ** 2 for p in pts[2:]):
        return among_four()
    for (a, b), (c, d) in (((0, 1), (2, 3)), ((0, 2), (1, 3)), ((0, 3), (1, 2))):
        x = _segment_intersection(pts[a], pts[b], pts[c], pts[d])
        if x is not None:
            return [(float(x[0]), float(x[1]))]
    return among_four()


@dataclass(frozen=True)
class TrackRegion:
    """Union of arclength points and closed counterclockwise arcs ``(start, length)``."""

    points: tuple[float, ...]
    segments: tuple[tuple[float, float], ...]
    perimeter: float
    value: float = float("nan")

    @property
    def measure(self) -> float:
        return min(sum(length for _, length in self.segments), self.perimeter)

    @property
    def covers_track(self) -> bool:
        if not self.segments:
            return False
        cover = np.zeros(4096, dtype=bool)
        grid = np.linspace(0, self.perimeter, 4096, endpoint=False)
        for start, length in self.segments:
            if length >= self.perimeter - 1e-12:
                return True
            cover |= ((grid - start) % self.perimeter) <= length + 1e-12
        return bool(cover.all())

    def contains(self, s: float, tol: float = 1e-9) -> bool:
        per = self.perimeter
        if any(track_distance(s, p, per) <= tol for p in self.points):
            return True
        return any(((s - a) % per) <= length + tol or track_distance(s, a, per) <= tol for a, length in self.segments)


def mb_distance_sum(s: float, arclengths: Iterable[float], track: Track | float) -> float:
    return sum(track_distance(s, b, track) for b in arclengths)


def mb_optimal_buffer_region(arclengths: Sequence[float], track: Track | float) -> TrackRegion:
    """Track points minimizing the summed arc distance to the given base positions.

    The sum is piecewise linear with breakpoints at the positions and their
    opposites, so it is evaluated there; an arc between two consecutive
    minimal breakpoints is minimal throughout.
    """
    per = _perimeter(track)
    raw = [b % per for b in arclengths] + [opposite_point(b, per) for b in arclengths]
    cands: list[float] = []
    for c in sorted(raw):
        if not cands or c - cands[-1] > 1e-12:
            cands.append(c)
    if len(cands) > 1 and cands[0] + per - cands[-1] <= 1e-12:
        cands.pop()
    vals = [mb_distance_sum(c, arclengths, per) for c in cands]
    best = min(vals)
    minimal = [v <= best + 1e-9 for v in vals]
    points = tuple(c for c, m in zip(cands, minimal) if m)
    segments = []
    m = len(cands)
    for k in range(m):
        nxt = (k + 1) % m
        if minimal[k] and minimal[nxt]:
            length = (cands[nxt] - cands[k]) % per
            if m == 1:
                length = per
            segments.append((cands[k], length))
    return TrackRegion(points, tuple(segments), per, best)


# ---------------------------------------------------------------------------
# Collision primitives


def _world_vertices(shape: Prism, pose: Pose) -> np.ndarray:
    c, s = math.cos(pose.theta), math.sin(pose.theta)
    v = np.asarray(shape.vertices)
    return np.column_stack([c * v[:, 0] - s * v[:, 1] + pose.x, s * v[:, 0] + c * v[:, 1] + pose.y])


def convex_polygons_overlap(pa: np.ndarray, pb: np.ndarray, eps: float = EPS) -> bool:
    """Separating-axis test for two convex polygons (touching does not count)."""
    for poly in (pa, pb):
        edges = np.roll(poly, -1, axis=0) - poly
        normals = np.column_stack([-edges[:, 1], edges[:, 0]])
        for n in normals:
            norm = math.hypot(n[0], n[1])
            if norm == 0:
                continue
            n = n / norm
            a, b = pa @ n, pb @ n
            if a.max() <= b.min() + eps or b.max() <= a.min() + eps:
                return False
    return True


def _disc_polygon_overlap(center: tuple[float, float], r: float, poly: np.ndarray) -> bool:
    p = np.asarray(center)
    edges = np.roll(poly, -1, axis=0) - poly
    rel = p - poly
    inside = np.all(edges[:, 0] * rel[:, 1] - edges[:, 1] * rel[:, 0] >= 0)
    if inside:
        return True
    t = np.clip((rel * edges).sum(axis=1) / (edges * edges).sum(axis=1), 0.0, 1.0)
    closest = poly + t[:, None] * edges
    return float(np.min(np.linalg.norm(closest - p, axis=1))) < r - EPS


def footprints_overlap(shape_a: ObjectShape, pose_a: Pose, shape_b: ObjectShape, pose_b: Pose) -> bool:
    """Whether the x-y footprints intersect with positive area."""
    dc = math.hypot(pose_a.x - pose_b.x, pose_a.y - pose_b.y)
    if dc >= shape_a.bounding_radius + shape_b.bounding_radius:
        return False
    a_disc, b_disc = isinstance(shape_a, Disc), isinstance(shape_b, Disc)
    if a_disc and b_disc:
        return dc < shape_a.radius + shape_b.radius - EPS
    if a_disc and isinstance(shape_b, Prism):
        return _disc_polygon_overlap(pose_a.xy, shape_a.radius, _world_vertices(shape_b, pose_b))
    if b_disc and isinstance(shape_a, Prism):
        return _disc_polygon_overlap(pose_b.xy, shape_b.radius, _world_vertices(shape_a, pose_a))
    if isinstance(shape_a, Prism) and isinstance(shape_b, Prism):
        return convex_polygons_overlap(_world_vertices(shape_a, pose_a), _world_vertices(shape_b, pose_b))
    if a_disc:
        return world_footprint(shape_b, pose_b).distance(Point(pose_a.xy)) < shape_a.radius - EPS
    if b_disc:
        return world_footprint(shape_a, pose_a).distance(Point(pose_b.xy)) < shape_b.radius - EPS
    fa, fb = world_footprint(shape_a, pose_a), world_footprint(shape_b, pose_b)
    return fa.intersection(fb).area > 1e-12


def footprints_collide(shape_a: ObjectShape, pose_a: Pose, shape_b: ObjectShape, pose_b: Pose) -> bool:
    """Extruded-footprint collision: x-y overlap and overlapping height intervals."""
    if not _intervals_overlap(pose_a.z, shape_a.height, pose_b.z, shape_b.height):
        return False
    return footprints_overlap(shape_a, pose_a, shape_b, pose_b)


# ---------------------------------------------------------------------------
# Heightmaps


@dataclass
class Heightmap:
    """Top-surface heights on a regular grid; rows run along y, columns along x."""

    origin: tuple[float, float]
    resolution: float
    grid: np.ndarray

    @property
    def shape(self) -> tuple[int, int]:
        return self.grid.shape

    def cell_centers(self) -> tuple[np.ndarray, np.ndarray]:
        rows, cols = self.grid.shape
        xs = self.origin[0] + (np.arange(cols) + 0.5) * self.resolution
        ys = self.origin[1] + (np.arange(rows) + 0.5) * self.resolution
        return np.meshgrid(xs, ys)


def _local_coords(X: np.ndarray, Y: np.ndarray, pose: Pose) -> tuple[np.ndarray, np.ndarray]:
    c, s = math.cos(pose.theta), math.sin(pose.theta)
    dx, dy = X - pose.x, Y - pose.y
    return c * dx + s * dy, -s * dx + c * dy


def coverage(shape: ObjectShape, pose: Pose, X: np.ndarray, Y: np.ndarray, resolution: float) -> np.ndarray:
    """Cells (given by their centers) covered by the footprint at ``pose``."""
    u, v = _local_coords(X, Y, pose)
    covered = ~np.isnan(shape.bottom_depth(u, v))
    if isinstance(shape, Gridded):
        # partial cells count as covered: probe the four corners as well
        h = resolution / 2
        for ox, oy in ((-h, -h), (h, -h), (h, h), (-h, h)):
            cu, cv = _local_coords(X + ox, Y + oy, pose)
            covered |= ~np.isnan(shape.bottom_depth(cu, cv))
    return covered


def synthesize_heightmap(
    arrangement: Arrangement,
    instance: Instance,
    window: tuple[float, float, float, float] | None = None,
    resolution: float = 0.005,
    exclude: Iterable[str] = (),
) -> Heightmap:
    """Per-cell maximum top-surface height over the placed objects (0 where uncovered)."""
    xmin, ymin, xmax, ymax = window if window is not None else instance.table.bounds
    cols = max(int(round((xmax - xmin) / resolution)), 1)
    rows = max(int(round((ymax - ymin) / resolution)), 1)
    hm = Heightmap((xmin, ymin), resolution, np.zeros((rows, cols)))
    X, Y = hm.cell_centers()
    skip = set(exclude)
    for oid, pose in arrangement.placed().items():
        if oid in skip:
            continue
        shape = instance.objects[oid]
        r = shape.bounding_radius
        if pose.x + r < xmin or pose.x - r > xmax or pose.y + r < ymin or pose.y - r > ymax:
            continue
        cov = coverage(shape, pose, X, Y, resolution)
        np.maximum(hm.grid, np.where(cov, pose.z + shape.height, 0.0), out=hm.grid)
    return hm


def object_bottom_grid(shape: ObjectShape, theta: float, size: int = 200, resolution: float = 0.005) -> np.ndarray:
    """Bottom-view depth image of an object centered in a ``size``x``size`` grid (NaN off-footprint)."""
    half = size * resolution / 2
    xs = -half + (np.arange(size) + 0.5) * resolution
    X, Y = np.meshgrid(xs, xs)
    u, v = _local_coords(X, Y, Pose(0.0, 0.0, 0.0, theta))
    return shape.bottom_depth(u, v)


def table_lattice(table: Table, resolution: float) -> np.ndarray:
    """Lattice points at integer multiples of ``resolution`` inside the table, shape (N, 2)."""
    kx = int(math.floor(table.width / 2 / resolution + 1e-9))
    ky = int(math.floor(table.depth / 2 / resolution + 1e-9))
    xs = np.arange(-kx, kx + 1) * resolution
    ys = np.arange(-ky, ky + 1) * resolution
    X, Y = np.meshgrid(xs, ys)
    return np.column_stack([X.ravel(), Y.ravel()])


def placed_xy(poses: Mapping[str, Pose]) -> np.ndarray:
    return np.asarray([p.xy for p in poses.values()], dtype=float).reshape(-1, 2)

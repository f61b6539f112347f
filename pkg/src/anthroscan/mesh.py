"""Triangle meshes, binary occupancy, and surface sampling into point clouds.

Canonical body frame: y-up, subject facing +z, subject height 1.0 model
unit. A reconstructor provider turns a masked subject image into a
watertight mesh; here that provider is a deterministic ellipsoid fitted
to the mask bounding box, standing in for a learned reconstructor.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .detectors import BinaryMask
from .errors import FormatError, NoSubjectError, ParameterError, TopologyError
from .images import RgbImage

DEFAULT_CLOUD_POINTS = 2048
_SURFACE_EPS = 1e-9


@dataclass(frozen=True)
class TriangleMesh:
    vertices: np.ndarray = field(repr=False)  # (V, 3) float64
    faces: np.ndarray = field(repr=False)     # (F, 3) int64

    def __post_init__(self):
        v = np.asarray(self.vertices, dtype=np.float64)
        f = np.asarray(self.faces, dtype=np.int64)
        if v.ndim != 2 or v.shape[1] != 3:
            raise TopologyError(f"vertices must be (V, 3), got {v.shape}")
        if f.ndim != 2 or f.shape[1] != 3:
            raise TopologyError(f"faces must be (F, 3), got {f.shape}")
        if f.size and (f.min() < 0 or f.max() >= len(v)):
            raise TopologyError("face indices out of range")
        object.__setattr__(self, "vertices", v)
        object.__setattr__(self, "faces", f)

    @property
    def n_faces(self) -> int:
        return len(self.faces)

    def triangles(self) -> np.ndarray:
        """(F, 3, 3) corner positions."""
        return self.vertices[self.faces]

    def face_areas(self) -> np.ndarray:
        tri = self.triangles()
        cross = np.cross(tri[:, 1] - tri[:, 0], tri[:, 2] - tri[:, 0])
        return 0.5 * np.linalg.norm(cross, axis=1)

    def remove_degenerate_faces(self, area_eps: float = 1e-14) -> "TriangleMesh":
        keep = self.face_areas() > area_eps
        return TriangleMesh(self.vertices, self.faces[keep])

    def is_watertight(self) -> bool:
        """Every directed edge must be matched by its reverse exactly once."""
        if self.n_faces == 0:
            return False
        edges = {}
        for tri in self.faces:
            for a, b in ((tri[0], tri[1]), (tri[1], tri[2]), (tri[2], tri[0])):
                key = (int(a), int(b))
                edges[key] = edges.get(key, 0) + 1
        for (a, b), count in edges.items():
            if count != 1 or edges.get((b, a), 0) != 1:
                return False
        return True

    def bounding_box(self):
        return self.vertices.min(axis=0), self.vertices.max(axis=0)


@dataclass(frozen=True)
class OccupancyQuery:
    """3-D probe point with its orthogonal projection and camera-axis depth.

    The projection (x, y) and depth z must be consistent with the
    position; build with ``at`` to get that by construction.
    """

    position: np.ndarray = field(repr=False)  # (3,) float64

    def __post_init__(self):
        p = np.asarray(self.position, dtype=np.float64)
        if p.shape != (3,) or not np.all(np.isfinite(p)):
            raise ParameterError(f"query position must be 3 finite reals, got {p}")
        object.__setattr__(self, "position", p)

    @classmethod
    def at(cls, x: float, y: float, z: float) -> "OccupancyQuery":
        return cls(np.array([x, y, z], dtype=np.float64))

    @property
    def projection(self):
        """Orthogonal image-plane projection (x, y)."""
        return float(self.position[0]), float(self.position[1])

    @property
    def depth(self) -> float:
        """Depth along the ray defined by the projection."""
        return float(self.position[2])


@dataclass(frozen=True)
class PointCloud:
    points: np.ndarray = field(repr=False)  # (N, 3) float64
    centroid: np.ndarray = field(default_factory=lambda: np.zeros(3), repr=False)
    scale: float = 1.0
    source: str = ""

    def __post_init__(self):
        pts = np.asarray(self.points, dtype=np.float64)
        if pts.ndim != 2 or pts.shape[1] != 3 or len(pts) < 1:
            raise ParameterError(f"point cloud must be (N>=1, 3), got {pts.shape}")
        object.__setattr__(self, "points", pts)
        object.__setattr__(self, "centroid", np.asarray(self.centroid, dtype=np.float64))

    def __len__(self):
        return len(self.points)


_PROBE_DIRECTIONS = [
    np.array([0.0, 0.0, 1.0]),
    np.array([1.0, 0.0, 0.0]),
    np.array([0.0, 1.0, 0.0]),
    np.array([0.577350269189626, 0.577350269189626, 0.577350269189626]),
    np.array([0.267261241912424, 0.534522483824849, 0.801783725737273]),
    np.array([-0.358568582800318, 0.716858165600636, 0.597381804667197]),
]


def occupancy(mesh: TriangleMesh, point) -> int:
    """1 if the query point is inside the closed surface, else 0.

    Accepts an OccupancyQuery or a raw 3-vector. Parity of crossings
    along a cast ray; points on the surface (within 1e-9) count as
    inside. The ray direction is retried from a fixed deterministic
    sequence whenever a hit is numerically ambiguous.
    """
    if mesh.n_faces == 0:
        raise TopologyError("mesh has no faces")
    if not mesh.is_watertight():
        raise TopologyError("occupancy requires a watertight mesh")
    if isinstance(point, OccupancyQuery):
        point = point.position
    return _occupancy_unchecked(mesh.triangles(), np.asarray(point, dtype=np.float64))


def occupancy_batch(mesh: TriangleMesh, points) -> np.ndarray:
    """Vector of occupancy labels; validates the mesh once."""
    if mesh.n_faces == 0:
        raise TopologyError("mesh has no faces")
    if not mesh.is_watertight():
        raise TopologyError("occupancy requires a watertight mesh")
    tri = mesh.triangles()
    pts = np.atleast_2d(np.asarray(points, dtype=np.float64))
    return np.array([_occupancy_unchecked(tri, p) for p in pts], dtype=np.int64)


def _occupancy_unchecked(tri: np.ndarray, p: np.ndarray) -> int:
    if _on_surface(tri, p):
        return 1
    for d in _PROBE_DIRECTIONS:
        crossings = _count_ray_crossings(tri, p, d)
        if crossings is not None:
            return int(crossings % 2 == 1)
    raise TopologyError("ray parity test failed for every probe direction")


def _on_surface(tri: np.ndarray, p: np.ndarray, eps: float = _SURFACE_EPS) -> bool:
    a, b, c = tri[:, 0], tri[:, 1], tri[:, 2]
    # Closest-point distance via barycentric clamp on each triangle plane.
    ab = b - a
    ac = c - a
    ap = p - a
    d00 = np.einsum("ij,ij->i", ab, ab)
    d01 = np.einsum("ij,ij->i", ab, ac)
    d11 = np.einsum("ij,ij->i", ac, ac)
    d20 = np.einsum("ij,ij->i", ap, ab)
    d21 = np.einsum("ij,ij->i", ap, ac)
    denom = d00 * d11 - d01 * d01
    denom = np.where(denom == 0, 1e-300, denom)
    v = (d11 * d20 - d01 * d21) / denom
    w = (d00 * d21 - d01 * d20) / denom
    v = np.clip(v, 0.0, 1.0)
    w = np.clip(w, 0.0, 1.0 - v)
    closest = a + v[:, None] * ab + w[:, None] * ac
    return bool(np.any(np.linalg.norm(closest - p, axis=1) <= eps))


def _count_ray_crossings(tri: np.ndarray, origin: np.ndarray, direction: np.ndarray):
    """Count t>0 triangle crossings; None when any hit is ambiguous."""
    eps_bary = 1e-10
    v0, v1, v2 = tri[:, 0], tri[:, 1], tri[:, 2]
    e1 = v1 - v0
    e2 = v2 - v0
    pvec = np.cross(np.broadcast_to(direction, e2.shape), e2)
    det = np.einsum("ij,ij->i", e1, pvec)
    parallel = np.abs(det) < 1e-14
    det_safe = np.where(parallel, 1.0, det)
    tvec = origin - v0
    u = np.einsum("ij,ij->i", tvec, pvec) / det_safe
    qvec = np.cross(tvec, e1)
    v = qvec @ direction / det_safe
    t = np.einsum("ij,ij->i", e2, qvec) / det_safe

    inside = (~parallel) & (u > eps_bary) & (v > eps_bary) & (u + v < 1 - eps_bary) & (t > _SURFACE_EPS)
    # Ambiguous: a forward hit sitting on an edge/vertex, or a parallel
    # triangle whose plane contains the origin ray region.
    near_edge = (~parallel) & (t > _SURFACE_EPS) & (
        (np.abs(u) <= eps_bary) | (np.abs(v) <= eps_bary) | (np.abs(1 - u - v) <= eps_bary)
    ) & (u >= -eps_bary) & (v >= -eps_bary) & (u + v <= 1 + eps_bary)
    if np.any(near_edge):
        return None
    return int(np.count_nonzero(inside))


def sample_point_cloud(mesh: TriangleMesh, n: int = DEFAULT_CLOUD_POINTS,
                       seed: int = 0, source: str = "") -> PointCloud:
    """Draw n surface points: faces by area, positions by uniform barycentrics."""
    if n < 1:
        raise ParameterError(f"sample count must be >= 1, got {n}")
    if mesh.n_faces == 0:
        raise TopologyError("cannot sample an empty mesh")
    areas = mesh.face_areas()
    total = areas.sum()
    if total <= 0:
        raise TopologyError("mesh has zero total surface area")
    rng = np.random.default_rng(seed)
    faces = rng.choice(mesh.n_faces, size=n, p=areas / total)
    tri = mesh.triangles()[faces]
    # sqrt trick: uniform density over each triangle.
    r1 = rng.random(n)
    r2 = rng.random(n)
    s = np.sqrt(r1)
    u = 1.0 - s
    v = s * (1.0 - r2)
    w = s * r2
    pts = u[:, None] * tri[:, 0] + v[:, None] * tri[:, 1] + w[:, None] * tri[:, 2]
    return PointCloud(pts, source=source)


def normalize_point_cloud(cloud: PointCloud) -> PointCloud:
    """Centre on the centroid, scale max point norm to 1; metadata recorded."""
    centroid = cloud.points.mean(axis=0)
    centered = cloud.points - centroid
    radius = float(np.linalg.norm(centered, axis=1).max())
    if radius <= 0:
        raise ParameterError("cannot normalize a degenerate cloud (all points identical)")
    # Compose with any prior normalization so denormalize always restores
    # the original frame.
    return PointCloud(centered / radius,
                      centroid=cloud.centroid + cloud.scale * centroid,
                      scale=cloud.scale * radius,
                      source=cloud.source)


def denormalize_point_cloud(cloud: PointCloud) -> PointCloud:
    return PointCloud(cloud.points * cloud.scale + cloud.centroid, source=cloud.source)


# --- mesh construction -------------------------------------------------

def icosphere(subdivisions: int = 2, radius: float = 1.0) -> TriangleMesh:
    """Subdivided icosahedron projected onto a sphere; always watertight."""
    phi = (1.0 + np.sqrt(5.0)) / 2.0
    verts = np.array([
        [-1, phi, 0], [1, phi, 0], [-1, -phi, 0], [1, -phi, 0],
        [0, -1, phi], [0, 1, phi], [0, -1, -phi], [0, 1, -phi],
        [phi, 0, -1], [phi, 0, 1], [-phi, 0, -1], [-phi, 0, 1],
    ], dtype=np.float64)
    verts /= np.linalg.norm(verts, axis=1, keepdims=True)
    faces = [
        (0, 11, 5), (0, 5, 1), (0, 1, 7), (0, 7, 10), (0, 10, 11),
        (1, 5, 9), (5, 11, 4), (11, 10, 2), (10, 7, 6), (7, 1, 8),
        (3, 9, 4), (3, 4, 2), (3, 2, 6), (3, 6, 8), (3, 8, 9),
        (4, 9, 5), (2, 4, 11), (6, 2, 10), (8, 6, 7), (9, 8, 1),
    ]
    verts = [tuple(v) for v in verts]
    for _ in range(subdivisions):
        cache = {}
        vlist = list(verts)

        def midpoint(i, j):
            key = (min(i, j), max(i, j))
            if key not in cache:
                m = np.add(vlist[i], vlist[j]) / 2.0
                m /= np.linalg.norm(m)
                cache[key] = len(vlist)
                vlist.append(tuple(m))
            return cache[key]

        new_faces = []
        for a, b, c in faces:
            ab, bc, ca = midpoint(a, b), midpoint(b, c), midpoint(c, a)
            new_faces += [(a, ab, ca), (b, bc, ab), (c, ca, bc), (ab, bc, ca)]
        verts, faces = vlist, new_faces
    return TriangleMesh(np.asarray(verts) * radius, np.asarray(faces))


def ellipsoid_mesh(semi_x: float, semi_y: float, semi_z: float,
                   subdivisions: int = 2) -> TriangleMesh:
    if min(semi_x, semi_y, semi_z) <= 0:
        raise ParameterError("ellipsoid semi-axes must be positive")
    sphere = icosphere(subdivisions)
    return TriangleMesh(sphere.vertices * np.array([semi_x, semi_y, semi_z]), sphere.faces)


def unit_cube_mesh() -> TriangleMesh:
    """Axis-aligned cube spanning [0, 1]^3, outward-oriented."""
    v = np.array([[x, y, z] for x in (0, 1) for y in (0, 1) for z in (0, 1)],
                 dtype=np.float64)
    faces = np.array([
        (0, 1, 3), (0, 3, 2),      # x = 0
        (4, 6, 7), (4, 7, 5),      # x = 1
        (0, 4, 5), (0, 5, 1),      # y = 0
        (2, 3, 7), (2, 7, 6),      # y = 1
        (0, 2, 6), (0, 6, 4),      # z = 0
        (1, 5, 7), (1, 7, 3),      # z = 1
    ])
    return TriangleMesh(v, faces)


# --- reconstructor providers -------------------------------------------

class EllipsoidReconstructor:
    """Masked subject image -> watertight ellipsoid in the canonical frame.

    The subject spans height 1.0 model unit along y; width follows the
    mask bounding-box aspect, depth is a fixed fraction of width.
    """

    name = "synthetic-ellipsoid"
    depth_ratio = 0.6

    def __init__(self, threshold: int = 8, subdivisions: int = 3):
        self.threshold = threshold
        self.subdivisions = subdivisions

    def reconstruct(self, image: RgbImage, mask: BinaryMask | None = None) -> TriangleMesh:
        if mask is None:
            bits = np.any(image.pixels > self.threshold, axis=2)
            mask = BinaryMask(bits)
        if not mask.any_subject():
            raise NoSubjectError("cannot reconstruct: image has no subject")
        x0, y0, x1, y1 = mask.bounding_box()
        h = y1 - y0 + 1
        w = x1 - x0 + 1
        aspect = w / h
        mesh = ellipsoid_mesh(aspect / 2.0, 0.5, self.depth_ratio * aspect / 2.0,
                              self.subdivisions)
        if not mesh.is_watertight():
            raise TopologyError("reconstructor produced a non-watertight mesh")
        return mesh


class FixtureMeshReconstructor:
    """Returns a stored mesh regardless of input; for golden-path tests."""

    name = "fixture-mesh"

    def __init__(self, mesh_path):
        self.mesh_path = Path(mesh_path)

    def reconstruct(self, image: RgbImage, mask: BinaryMask | None = None) -> TriangleMesh:
        mesh = load_mesh(self.mesh_path)
        if not mesh.is_watertight():
            raise TopologyError(f"fixture mesh {self.mesh_path} is not watertight")
        return mesh


# --- ASCII I/O ----------------------------------------------------------

def save_mesh(mesh: TriangleMesh, path) -> None:
    """Write OFF (vertex list + face list)."""
    lines = ["OFF", f"{len(mesh.vertices)} {len(mesh.faces)} 0"]
    lines += [f"{v[0]:.17g} {v[1]:.17g} {v[2]:.17g}" for v in mesh.vertices]
    lines += [f"3 {f[0]} {f[1]} {f[2]}" for f in mesh.faces]
    Path(path).write_text("\n".join(lines) + "\n")


def load_mesh(path) -> TriangleMesh:
    try:
        tokens = Path(path).read_text().split()
    except OSError as exc:
        raise FormatError(f"cannot read mesh {path}: {exc}") from exc
    if not tokens or tokens[0] != "OFF":
        raise FormatError(f"{path}: expected OFF header")
    try:
        nv, nf = int(tokens[1]), int(tokens[2])
        pos = 4
        verts = np.array(tokens[pos:pos + 3 * nv], dtype=np.float64).reshape(nv, 3)
        pos += 3 * nv
        faces = []
        for _ in range(nf):
            arity = int(tokens[pos])
            if arity != 3:
                raise FormatError(f"{path}: only triangle faces supported, got arity {arity}")
            faces.append([int(t) for t in tokens[pos + 1:pos + 4]])
            pos += 4
    except (IndexError, ValueError) as exc:
        raise FormatError(f"{path}: truncated or malformed OFF file: {exc}") from exc
    return TriangleMesh(verts, np.asarray(faces, dtype=np.int64))


def save_point_cloud(cloud: PointCloud, path) -> None:
    """Whitespace-delimited XYZ lines."""
    lines = [f"{p[0]:.17g} {p[1]:.17g} {p[2]:.17g}" for p in cloud.points]
    Path(path).write_text("\n".join(lines) + "\n")


def load_point_cloud(path) -> PointCloud:
    try:
        rows = [line.split() for line in Path(path).read_text().splitlines() if line.strip()]
        pts = np.array(rows, dtype=np.float64)
    except (OSError, ValueError) as exc:
        raise FormatError(f"cannot read point cloud {path}: {exc}") from exc
    if pts.ndim != 2 or pts.shape[1] != 3:
        raise FormatError(f"{path}: expected 3 columns per line")
    return PointCloud(pts)

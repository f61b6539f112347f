import numpy as np
import pytest
from scipy import stats

from anthroscan.errors import FormatError, NoSubjectError, ParameterError, TopologyError
from anthroscan.mesh import (EllipsoidReconstructor, PointCloud, TriangleMesh,
                             denormalize_point_cloud, ellipsoid_mesh, icosphere,
                             load_mesh, load_point_cloud, normalize_point_cloud,
                             occupancy, occupancy_batch, sample_point_cloud,
                             save_mesh, save_point_cloud, unit_cube_mesh)

from oracles import winding_inside


class TestMeshBasics:
    def test_cube_is_watertight(self):
        assert unit_cube_mesh().is_watertight()

    def test_icosphere_watertight_and_unit(self):
        sph = icosphere(2)
        assert sph.is_watertight()
        assert sph.n_faces == 320
        radii = np.linalg.norm(sph.vertices, axis=1)
        np.testing.assert_allclose(radii, 1.0, atol=1e-12)

    def test_open_mesh_not_watertight(self):
        cube = unit_cube_mesh()
        open_mesh = TriangleMesh(cube.vertices, cube.faces[:-1])
        assert not open_mesh.is_watertight()

    def test_bad_face_indices(self):
        with pytest.raises(TopologyError):
            TriangleMesh(np.zeros((3, 3)), np.array([[0, 1, 5]]))

    def test_degenerate_face_cleanup(self):
        verts = np.array([[0, 0, 0], [1, 0, 0], [0, 1, 0], [2, 0, 0]], dtype=float)
        faces = np.array([[0, 1, 2], [0, 1, 3]])  # second face has zero area
        cleaned = TriangleMesh(verts, faces).remove_degenerate_faces()
        assert cleaned.n_faces == 1


class TestOccupancy:
    def test_cube_interior_and_exterior(self):
        cube = unit_cube_mesh()
        assert occupancy(cube, (0.5, 0.5, 0.5)) == 1
        assert occupancy(cube, (2.0, 0.0, 0.0)) == 0
        assert occupancy(cube, (-0.01, 0.5, 0.5)) == 0

    def test_boundary_counts_as_inside(self):
        cube = unit_cube_mesh()
        assert occupancy(cube, (0.0, 0.5, 0.5)) == 1
        assert occupancy(cube, (1.0, 1.0, 1.0)) == 1

    def test_accepts_occupancy_query(self):
        from anthroscan.mesh import OccupancyQuery
        cube = unit_cube_mesh()
        q = OccupancyQuery.at(0.5, 0.5, 0.5)
        assert q.projection == (0.5, 0.5)
        assert q.depth == 0.5
        assert occupancy(cube, q) == 1
        assert occupancy(cube, OccupancyQuery.at(2.0, 0.0, 0.0)) == 0
        with pytest.raises(ParameterError):
            OccupancyQuery(np.array([1.0, np.nan, 0.0]))

    def test_non_watertight_rejected(self):
        cube = unit_cube_mesh()
        open_mesh = TriangleMesh(cube.vertices, cube.faces[:-1])
        with pytest.raises(TopologyError):
            occupancy(open_mesh, (0.5, 0.5, 0.5))

    def test_matches_winding_oracle_on_sphere(self):
        sph = icosphere(2)
        rng = np.random.default_rng(99)
        pts = rng.uniform(-1.4, 1.4, (300, 3))
        labels = occupancy_batch(sph, pts)
        expected = [winding_inside(sph.vertices, sph.faces, p) for p in pts]
        np.testing.assert_array_equal(labels.astype(bool), expected)

    def test_matches_winding_oracle_on_ellipsoid(self):
        mesh = ellipsoid_mesh(0.4, 0.9, 0.25, subdivisions=1)
        rng = np.random.default_rng(5)
        pts = rng.uniform(-1.0, 1.0, (200, 3))
        labels = occupancy_batch(mesh, pts)
        expected = [winding_inside(mesh.vertices, mesh.faces, p) for p in pts]
        np.testing.assert_array_equal(labels.astype(bool), expected)


class TestSampling:
    def test_single_triangle_containment(self):
        tri = TriangleMesh(np.array([[0, 0, 0], [4, 0, 0], [0, 3, 0]], dtype=float),
                           np.array([[0, 1, 2]]))
        cloud = sample_point_cloud(tri, 100, seed=1)
        # solve barycentric coordinates explicitly
        a, b, c = tri.vertices
        m = np.column_stack([(b - a)[:2], (c - a)[:2]])
        for p in cloud.points:
            uv = np.linalg.solve(m, (p - a)[:2])
            assert uv.min() >= -1e-12
            assert uv.sum() <= 1 + 1e-12
            assert abs(p[2]) < 1e-15

    def test_points_lie_on_face_planes(self):
        sph = icosphere(1)
        cloud = sample_point_cloud(sph, 500, seed=3)
        # every sample within 1e-9 of some face plane patch
        tri = sph.triangles()
        normals = np.cross(tri[:, 1] - tri[:, 0], tri[:, 2] - tri[:, 0])
        normals /= np.linalg.norm(normals, axis=1, keepdims=True)
        d = np.einsum("fj,fj->f", normals, tri[:, 0])
        dist = np.abs(cloud.points @ normals.T - d)
        assert np.all(dist.min(axis=1) < 1e-9)

    def test_area_weighted_face_counts(self):
        # two triangles, areas 1 and 3
        verts = np.array([[0, 0, 0], [2, 0, 0], [0, 1, 0],
                          [10, 0, 0], [16, 0, 0], [10, 1, 0]], dtype=float)
        faces = np.array([[0, 1, 2], [3, 4, 5]])
        mesh = TriangleMesh(verts, faces)
        counts = np.zeros(2)
        for seed in range(20):
            cloud = sample_point_cloud(mesh, 10000, seed=seed)
            counts[0] += (cloud.points[:, 0] < 5).sum()
            counts[1] += (cloud.points[:, 0] >= 5).sum()
        total = counts.sum()
        assert total == 200000
        result = stats.chisquare(counts, f_exp=[total * 0.25, total * 0.75])
        assert result.pvalue > 0.01

    def test_deterministic_per_seed(self):
        sph = icosphere(1)
        a = sample_point_cloud(sph, 256, seed=7)
        b = sample_point_cloud(sph, 256, seed=7)
        np.testing.assert_array_equal(a.points, b.points)
        c = sample_point_cloud(sph, 256, seed=8)
        assert not np.array_equal(a.points, c.points)

    def test_empty_mesh_rejected(self):
        empty = TriangleMesh(np.zeros((0, 3)), np.zeros((0, 3), dtype=int))
        with pytest.raises(TopologyError):
            sample_point_cloud(empty, 10, seed=0)
        with pytest.raises(ParameterError):
            sample_point_cloud(icosphere(0), 0, seed=0)


class TestNormalization:
    def test_two_point_symmetry(self):
        cloud = PointCloud(np.array([[0, 0, 0], [2, 0, 0]], dtype=float))
        out = normalize_point_cloud(cloud)
        np.testing.assert_allclose(out.points, [[-1, 0, 0], [1, 0, 0]], atol=1e-12)
        np.testing.assert_allclose(out.centroid, [1, 0, 0], atol=1e-12)
        assert out.scale == pytest.approx(1.0)

    def test_already_normalized_fixed_point(self):
        pts = np.array([[1, 0, 0], [-1, 0, 0], [0, 0.5, 0], [0, -0.5, 0]], dtype=float)
        out = normalize_point_cloud(PointCloud(pts))
        np.testing.assert_allclose(out.points, pts, atol=1e-12)
        assert out.scale == pytest.approx(1.0)

    def test_invariants_hold(self):
        rng = np.random.default_rng(0)
        cloud = PointCloud(rng.normal(3.0, 2.0, (400, 3)))
        out = normalize_point_cloud(cloud)
        assert np.abs(out.points.mean(axis=0)).max() < 1e-6
        assert np.linalg.norm(out.points, axis=1).max() == pytest.approx(1.0, abs=1e-6)

    def test_idempotent(self):
        rng = np.random.default_rng(1)
        cloud = PointCloud(rng.normal(0, 5, (100, 3)))
        once = normalize_point_cloud(cloud)
        twice = normalize_point_cloud(once)
        np.testing.assert_allclose(once.points, twice.points, atol=1e-9)

    def test_denormalize_round_trip(self):
        rng = np.random.default_rng(2)
        cloud = PointCloud(rng.normal(-4, 3, (50, 3)))
        back = denormalize_point_cloud(normalize_point_cloud(cloud))
        np.testing.assert_allclose(back.points, cloud.points, atol=1e-9)

    def test_degenerate_cloud_rejected(self):
        with pytest.raises(ParameterError):
            normalize_point_cloud(PointCloud(np.ones((5, 3))))

    def test_rotation_equivariance(self):
        theta = 0.7
        rot = np.array([[np.cos(theta), -np.sin(theta), 0],
                        [np.sin(theta), np.cos(theta), 0],
                        [0, 0, 1.0]])
        sph = ellipsoid_mesh(0.5, 1.0, 0.3, subdivisions=1)
        rotated = TriangleMesh(sph.vertices @ rot.T, sph.faces)
        a = normalize_point_cloud(sample_point_cloud(sph, 512, seed=4))
        b = normalize_point_cloud(sample_point_cloud(rotated, 512, seed=4))
        # same seed -> same face/barycentric draws -> rotated point sets
        dists = np.linalg.norm(b.points - a.points @ rot.T, axis=1)
        assert dists.max() < 1e-6


class TestReconstructor:
    def test_ellipsoid_aspect_tracks_mask(self, person_image):
        from anthroscan.detectors import threshold_mask
        mask = threshold_mask(person_image)
        x0, y0, x1, y1 = mask.bounding_box()
        mask_aspect = (x1 - x0 + 1) / (y1 - y0 + 1)
        mesh = EllipsoidReconstructor().reconstruct(person_image)
        assert mesh.is_watertight()
        lo, hi = mesh.bounding_box()
        mesh_aspect = (hi[0] - lo[0]) / (hi[1] - lo[1])
        assert mesh_aspect == pytest.approx(mask_aspect, rel=0.05)

    def test_blank_image_rejected(self, blank_image):
        with pytest.raises(NoSubjectError):
            EllipsoidReconstructor().reconstruct(blank_image)


class TestMeshIO:
    def test_mesh_round_trip(self, tmp_path):
        mesh = icosphere(1)
        path = tmp_path / "mesh.off"
        save_mesh(mesh, path)
        loaded = load_mesh(path)
        np.testing.assert_allclose(loaded.vertices, mesh.vertices, atol=1e-15)
        np.testing.assert_array_equal(loaded.faces, mesh.faces)

    def test_truncated_mesh_rejected(self, tmp_path):
        mesh = unit_cube_mesh()
        path = tmp_path / "mesh.off"
        save_mesh(mesh, path)
        clipped = path.read_text()[:40]
        path.write_text(clipped)
        with pytest.raises(FormatError):
            load_mesh(path)

    def test_bad_header_rejected(self, tmp_path):
        path = tmp_path / "mesh.off"
        path.write_text("PLY\n1 2 3\n")
        with pytest.raises(FormatError, match="OFF"):
            load_mesh(path)

    def test_point_cloud_round_trip(self, tmp_path):
        rng = np.random.default_rng(8)
        cloud = PointCloud(rng.normal(0, 1, (64, 3)))
        path = tmp_path / "cloud.xyz"
        save_point_cloud(cloud, path)
        loaded = load_point_cloud(path)
        np.testing.assert_allclose(loaded.points, cloud.points, atol=1e-15)

import numpy as np
import pytest

from oracles import sphere_sdf
from sdfgen._mc_table import TRIANGLES
from sdfgen.grid import SdfGrid
from sdfgen.mesh import TriMesh, icosphere
from sdfgen.surface import IsoSurfaceConfig, extract_surface, laplace_smooth, marching_cubes, trilinear


def analytic(n, fn):
    g = SdfGrid.canonical(np.zeros((n, n, n)))
    return g.with_values(fn(g.points()))


@pytest.fixture(scope="module")
def sphere_mesh():
    return marching_cubes(analytic(64, lambda p: sphere_sdf(p, 0.4)))


def edge_use_counts(mesh):
    e = np.sort(np.concatenate([mesh.triangles[:, [0, 1]], mesh.triangles[:, [1, 2]],
                                mesh.triangles[:, [2, 0]]]), axis=1)
    return np.unique(e, axis=0, return_counts=True)[1]


def test_table_complement_symmetry():
    assert (TRIANGLES[0] == -1).all() and (TRIANGLES[255] == -1).all()
    counts = (TRIANGLES >= 0).sum(axis=1)
    np.testing.assert_array_equal(counts % 3, 0)
    assert counts.max() == 15


def test_no_crossing_gives_empty_mesh():
    m = marching_cubes(SdfGrid.canonical(np.full((8, 8, 8), -1.0)))
    assert m.n_triangles == 0 and m.n_vertices == 0


def test_sphere_closed_manifold(sphere_mesh):
    m = sphere_mesh
    assert m.euler_characteristic() == 2
    assert np.all(edge_use_counts(m) == 2)
    assert m.area() == pytest.approx(4 * np.pi * 0.16, rel=0.02)


def test_sphere_normals_point_outward(sphere_mesh):
    c = sphere_mesh.corners()
    n = np.cross(c[:, 1] - c[:, 0], c[:, 2] - c[:, 0])
    assert np.all(np.einsum("ij,ij->i", n, c.mean(axis=1)) > 0)


def test_vertices_on_level_set(sphere_mesh):
    g = analytic(64, lambda p: sphere_sdf(p, 0.4))
    assert np.abs(trilinear(g, sphere_mesh.vertices)).max() < 1e-6


def test_plane_level_set():
    m = marching_cubes(analytic(9, lambda p: p[..., 0] - 0.01))
    assert m.n_triangles > 0
    assert np.abs(m.vertices[:, 0] - 0.01).max() < 1e-6
    assert np.all(edge_use_counts(m) <= 2)


@pytest.mark.parametrize("seed", range(5))
def test_random_fields_are_manifold(seed):
    r = np.random.default_rng(seed)
    g = SdfGrid.canonical(r.normal(size=(10, 10, 10)))
    m = marching_cubes(g)
    t = m.triangles
    assert not np.any((t[:, 0] == t[:, 1]) | (t[:, 1] == t[:, 2]) | (t[:, 0] == t[:, 2]))
    assert np.all(edge_use_counts(m) <= 2)
    assert np.abs(trilinear(g, m.vertices)).max() < 1e-6


def test_iso_value_shift():
    g = analytic(32, lambda p: sphere_sdf(p, 0.4))
    m = marching_cubes(g, iso=0.1)
    r = np.linalg.norm(m.vertices, axis=1)
    assert np.abs(r - 0.3).max() < 0.01


def test_trilinear_exact_on_linear_fields(rng):
    g = analytic(7, lambda p: 2 * p[..., 0] - p[..., 1] + 0.5 * p[..., 2] + 0.1)
    pts = rng.uniform(-0.5, 0.5, (100, 3))
    np.testing.assert_allclose(trilinear(g, pts), 2 * pts[:, 0] - pts[:, 1] + 0.5 * pts[:, 2] + 0.1, atol=1e-12)


def test_smoothing_zero_iterations_identity(sphere_mesh):
    assert laplace_smooth(sphere_mesh, 0) is sphere_mesh


def test_planar_grid_interior_fixed():
    n = 5
    x, y = np.meshgrid(np.arange(n, dtype=float), np.arange(n, dtype=float), indexing="ij")
    verts = np.stack([x.ravel(), y.ravel(), np.zeros(n * n)], axis=1)
    tris = []
    for i in range(n - 1):
        for j in range(n - 1):
            a, b, c, d = i * n + j, (i + 1) * n + j, (i + 1) * n + j + 1, i * n + j + 1
            tris += [[a, b, c], [a, c, d]]
    m = TriMesh(verts, tris)
    # interior valence 6: four axis neighbours plus two opposite diagonals, centroid = vertex
    out = laplace_smooth(m, 1, 0.5)
    centre = 2 * n + 2
    np.testing.assert_allclose(out.vertices[centre], m.vertices[centre], atol=1e-12)


def test_smoothing_reduces_radial_noise(rng):
    s = icosphere(0.4, 3)
    noisy = TriMesh(s.vertices + rng.normal(scale=0.01, size=s.vertices.shape), s.triangles)
    out = laplace_smooth(noisy, 10, 0.5)

    def rms(m):
        r = np.linalg.norm(m.vertices, axis=1)
        return np.sqrt(np.mean((r - r.mean()) ** 2))

    assert rms(out) < rms(noisy)
    np.testing.assert_array_equal(out.triangles, noisy.triangles)


def test_smoothing_shrinks_closed_surface(sphere_mesh):
    areas = [laplace_smooth(sphere_mesh, k, 0.5).area() for k in range(4)]
    assert all(b <= a for a, b in zip(areas, areas[1:]))


def test_smoothing_keeps_isolated_vertices():
    m = TriMesh([[0, 0, 0], [1, 0, 0], [0, 1, 0], [5, 5, 5]], [[0, 1, 2]])
    np.testing.assert_array_equal(laplace_smooth(m, 3).vertices[3], [5, 5, 5])


def test_config_validation():
    with pytest.raises(ValueError):
        IsoSurfaceConfig(smoothing_iterations=-1)
    with pytest.raises(ValueError):
        IsoSurfaceConfig(smoothing_lambda=0.0)


def test_extract_surface_applies_smoothing():
    g = analytic(32, lambda p: sphere_sdf(p, 0.4))
    raw = extract_surface(g, IsoSurfaceConfig(smoothing_iterations=0))
    smooth = extract_surface(g, IsoSurfaceConfig(smoothing_iterations=5))
    assert smooth.n_triangles == raw.n_triangles and smooth.area() < raw.area()

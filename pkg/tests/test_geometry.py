import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from poreident.exceptions import FormatError, MeshQualityError, OutOfDomainError, OverlapError
from poreident.geometry import (
    GeometryConfig,
    Tag,
    build_geometry,
    build_ladder,
    mesh_to_text,
    min_obstacle_gap,
    read_mesh,
    refine,
    triangulate,
    write_mesh,
)


# --- geometry ------------------------------------------------------------------

def test_default_outline_has_ten_arcs_and_turning_number_one(default_config):
    dom = build_geometry(default_config)
    assert dom.n_arcs == 10
    assert dom.turning_number() == 1
    assert dom.signed_area() > 0


def test_obstacles_alternate_walls(default_config):
    c = default_config.obstacle_centers()
    assert np.allclose(c[:, 0], 2.0 + 1.5 * np.arange(10))
    assert np.array_equal(c[:, 1], np.tile([0.0, 1.0], 5))


def test_empty_config_is_rectangle_with_four_sides(rect_config):
    dom = build_geometry(rect_config)
    assert len(dom.vertices) == 4
    assert sorted(dom.labels.tolist()) == sorted([Tag.SYMMETRY, Tag.OUTLET, Tag.SYMMETRY, Tag.INLET])
    assert dom.signed_area() == pytest.approx(17.5)


def test_min_gap_matches_center_distance_minus_diameter(default_config):
    # staggered centers are 1.5 apart in x1 and 1 apart in x2
    assert min_obstacle_gap(default_config) == pytest.approx(math.sqrt(1.5**2 + 1.0) - 0.8, abs=1e-12)
    assert min_obstacle_gap(default_config) == pytest.approx(1.0028, abs=1e-4)


def test_overlap_and_out_of_domain_errors():
    with pytest.raises(OverlapError):
        build_geometry(GeometryConfig(obstacle_radius=1.1))
    with pytest.raises(OverlapError):
        # staggered disks of radius 0.9 at pitch 0.3 intersect
        build_geometry(GeometryConfig(obstacle_pitch=0.3, obstacle_radius=0.9))
    with pytest.raises(OutOfDomainError):
        build_geometry(GeometryConfig(first_center_x1=0.3))
    with pytest.raises(OutOfDomainError):
        build_geometry(GeometryConfig(obstacle_count=12))


def test_pitch_invariant_boundary():
    # alternating walls: non-overlap requires pitch^2 >= (2r)^2 - height^2
    r, h = 0.8, 1.0
    p_min = math.sqrt((2 * r) ** 2 - h**2)
    GeometryConfig(obstacle_radius=r, obstacle_pitch=p_min * 1.01, obstacle_count=4).validate()
    with pytest.raises(OverlapError):
        GeometryConfig(obstacle_radius=r, obstacle_pitch=p_min * 0.99, obstacle_count=4).validate()


def test_label_lengths(default_config):
    dom = build_geometry(default_config)
    assert dom.label_length(Tag.INLET) == pytest.approx(1.0)
    assert dom.label_length(Tag.OUTLET) == pytest.approx(1.0)


# --- triangulation ---------------------------------------------------------------

def _check_invariants(mesh, config):
    mesh.check()
    assert np.all(mesh.signed_areas() > 0)
    # boundary edges covered by facets exactly once
    edges = mesh.edges
    tri_edges = mesh.triangle_edges.ravel()
    counts = np.bincount(tri_edges, minlength=len(edges))
    assert counts.max() <= 2
    bnd = {tuple(sorted(e)) for e in edges[counts == 1]}
    fac = [tuple(sorted(f)) for f in mesh.facets]
    assert len(fac) == len(set(fac))
    assert bnd == set(fac)
    assert set(np.unique(mesh.facet_labels)) <= {int(t) for t in Tag}
    assert mesh.area() == pytest.approx(config.area, rel=1e-3)
    assert mesh.boundary_length(Tag.INLET) == pytest.approx(config.height, rel=1e-12)
    assert mesh.boundary_length(Tag.OUTLET) == pytest.approx(config.height, rel=1e-12)


def test_coarse_mesh_invariants(coarse_mesh, default_config):
    _check_invariants(coarse_mesh, default_config)
    assert coarse_mesh.min_angle_deg() >= 15.0
    assert coarse_mesh.edge_lengths().max() <= 2 * coarse_mesh.h_target
    assert coarse_mesh.surface_radial_error() <= 1e-12


def test_basic_mesh_matches_reference_counts(basic_mesh, default_config):
    # reference basic grid: 18743 nodes, 35958 triangles
    _check_invariants(basic_mesh, default_config)
    assert abs(basic_mesh.n_vertices - 18743) / 18743 < 0.05
    assert abs(basic_mesh.n_triangles - 35958) / 35958 < 0.2


def test_rectangle_triangle_count_lower_bound(rect_config):
    h = rect_config.height / 2
    mesh = triangulate(build_geometry(rect_config), h)
    assert mesh.n_triangles >= 2 * (rect_config.length / h) * (rect_config.height / h)


def test_halving_h_quadruples_triangles(default_config):
    dom = build_geometry(default_config)
    # working range of the ladder; at much coarser h the fixed arc chords dominate the count
    a = triangulate(dom, 0.0825).n_triangles
    b = triangulate(dom, 0.04125).n_triangles
    assert 0.75 * 4 <= b / a <= 1.25 * 4


def test_h_target_must_be_below_radius(default_config):
    with pytest.raises(ValueError):
        triangulate(build_geometry(default_config), 0.5)


def test_coarse_h_still_meets_angle_bound(default_config):
    mesh = triangulate(build_geometry(default_config), 0.38)
    assert mesh.min_angle_deg() >= 15.0


def test_quality_error_threshold(monkeypatch, default_config):
    import poreident.geometry as g

    monkeypatch.setattr(g, "MIN_ANGLE_DEG", 89.0)
    with pytest.raises(MeshQualityError):
        triangulate(build_geometry(default_config), 0.2)


def test_deterministic_bytes(default_config):
    dom = build_geometry(default_config)
    assert mesh_to_text(triangulate(dom, 0.15)) == mesh_to_text(triangulate(dom, 0.15))


@settings(max_examples=8, deadline=None)
@given(
    radius=st.floats(0.2, 0.45),
    pitch=st.floats(1.2, 2.0),
    count=st.integers(0, 6),
    h=st.floats(0.1, 0.18),
)
def test_mesh_invariants_property(radius, pitch, count, h):
    cfg = GeometryConfig(obstacle_radius=radius, obstacle_pitch=pitch, obstacle_count=count, length=14.0)
    mesh = triangulate(build_geometry(cfg), h)
    _check_invariants(mesh, cfg)
    assert mesh.surface_radial_error() <= 1e-12


# --- refinement ------------------------------------------------------------------

def test_refine_counts_and_projection(small_mesh, default_config):
    fine = refine(small_mesh)
    assert fine.n_triangles == 4 * small_mesh.n_triangles
    assert fine.n_vertices == small_mesh.n_vertices + small_mesh.n_edges
    assert fine.surface_radial_error() <= 1e-12
    _check_invariants(fine, default_config)
    # tags inherited: each facet splits into two with the same label
    for tag in Tag:
        assert (fine.facet_labels == tag).sum() == 2 * (small_mesh.facet_labels == tag).sum()


def test_ladder_counts(coarse_mesh, basic_mesh):
    # coarse grid of about 8754 triangles, two refinements reach the ~140k fine grid
    assert abs(coarse_mesh.n_triangles - 8754) / 8754 < 0.05
    assert basic_mesh.n_triangles == 4 * coarse_mesh.n_triangles
    assert 16 * coarse_mesh.n_triangles == pytest.approx(142460, rel=0.05)


def test_build_ladder_vertex_counts_increase(default_config):
    ladder = build_ladder(default_config, 0.2, levels=3)
    counts = [m.n_vertices for m in ladder.meshes]
    assert counts == sorted(counts) and len(set(counts)) == 3


# --- text I/O ---------------------------------------------------------------------

def test_round_trip_is_exact(basic_mesh, tmp_path):
    path = tmp_path / "basic.mesh"
    write_mesh(basic_mesh, path)
    back = read_mesh(path)
    assert back == basic_mesh
    assert np.array_equal(back.vertices, basic_mesh.vertices)
    assert back.vertices.tobytes() == basic_mesh.vertices.tobytes()
    assert back.checksum() == basic_mesh.checksum()


def test_unknown_label_rejected(small_mesh, tmp_path):
    text = mesh_to_text(small_mesh).replace(" OUTLET", " DRAIN", 1)
    p = tmp_path / "bad.mesh"
    p.write_text(text)
    with pytest.raises(FormatError):
        read_mesh(p)


def test_empty_triangles_rejected(tmp_path):
    p = tmp_path / "empty.mesh"
    p.write_text("MESH 1\nH_TARGET 0.1\nCIRCLES 0\nVERTICES 3\n0 0\n1 0\n0 1\nTRIANGLES 0\nFACETS 0\nEND\n")
    with pytest.raises(FormatError):
        read_mesh(p)


def test_truncated_file_rejected(small_mesh, tmp_path):
    p = tmp_path / "trunc.mesh"
    p.write_text(mesh_to_text(small_mesh)[:-200])
    with pytest.raises(FormatError):
        read_mesh(p)

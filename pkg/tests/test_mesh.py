import numpy as np
import pytest

from piezofem.errors import DegenerateCell, ParseError, TopologyError
from piezofem.mesh import (
    ELECTRODE,
    GROUND,
    REMAINING,
    build_dofmap,
    generate_rect,
    load_mesh,
    mesh_size,
    save_mesh,
)


def signed_area(mesh, cell):
    a, b, c = mesh.nodes[cell]
    return 0.5 * (
        (b[0] - a[0]) * (c[1] - a[1]) - (b[1] - a[1]) * (c[0] - a[0])
    )


@pytest.mark.parametrize("nx,ny", [(1, 1), (2, 2), (3, 2), (5, 4)])
def test_generate_rect_counts(nx, ny):
    mesh = generate_rect(nx, ny)
    assert mesh.n_nodes == (nx + 1) * (ny + 1)
    assert mesh.n_cells == 2 * nx * ny
    assert len(mesh.facets) == 2 * (nx + ny)
    # Euler relation for a triangulated disc: V - E + T = 1, with the
    # edge count recovered from interior/boundary incidence.
    edges = set()
    for cell in mesh.cells:
        for i in range(3):
            edges.add(frozenset((cell[i], cell[(i + 1) % 3])))
    assert mesh.n_nodes - len(edges) + mesh.n_cells == 1


def test_generate_rect_geometry_and_orientation():
    mesh = generate_rect(3, 2, lx=3.0, ly=1.0)
    assert mesh.nodes[:, 0].max() == 3.0
    assert mesh.nodes[:, 1].max() == 1.0
    for cell in mesh.cells:
        assert signed_area(mesh, cell) > 0.0
    total = sum(signed_area(mesh, cell) for cell in mesh.cells)
    assert total == pytest.approx(3.0, rel=1e-14)


def test_default_tagging_top_electrode_bottom_ground():
    mesh = generate_rect(2, 2)
    for tag, want_y in ((ELECTRODE, 1.0), (GROUND, 0.0)):
        facets = mesh.facets_with_tag(tag)
        assert len(facets) == 2
        for facet in facets:
            assert np.all(mesh.nodes[facet, 1] == want_y)
    assert len(mesh.facets_with_tag(REMAINING)) == 4


def test_custom_tagging_rule():
    mesh = generate_rect(
        2, 2,
        tagging_rule={"top": REMAINING, "bottom": REMAINING,
                      "left": GROUND, "right": ELECTRODE},
    )
    for facet in mesh.facets_with_tag(ELECTRODE):
        assert np.all(mesh.nodes[facet, 0] == 1.0)
    for facet in mesh.facets_with_tag(GROUND):
        assert np.all(mesh.nodes[facet, 0] == 0.0)


def test_mesh_size_is_longest_edge():
    assert mesh_size(generate_rect(1, 1)) == pytest.approx(
        np.sqrt(2.0), rel=1e-15
    )
    assert mesh_size(generate_rect(4, 4)) == pytest.approx(
        np.sqrt(2.0) / 4.0, rel=1e-15
    )


def test_dofmap_two_triangle_mesh():
    # Every node of the 1x1 rectangle lies on the electrode or ground
    # edge, so no free potential unknowns remain.
    mesh = generate_rect(1, 1)
    dm = build_dofmap(mesh)
    assert dm.n_u == 8
    assert dm.n_phi == 4
    assert len(dm.free_phi) == 0
    assert sorted(dm.electrode_nodes) == [2, 3]
    assert sorted(dm.ground_nodes) == [0, 1]


def test_dofmap_interior_free_nodes():
    dm = build_dofmap(generate_rect(2, 2))
    assert dm.n_u == 18
    assert sorted(dm.free_phi) == [3, 4, 5]  # the middle row
    assert len(dm.constrained_phi) == 6


def test_roundtrip_is_bit_exact(tmp_path):
    mesh = generate_rect(3, 2, lx=np.pi, ly=np.e)
    path = tmp_path / "m.mesh"
    save_mesh(mesh, str(path))
    back = load_mesh(str(path))
    assert back.dim == mesh.dim
    assert np.array_equal(back.nodes, mesh.nodes)  # bit-exact via repr
    assert np.array_equal(back.cells, mesh.cells)
    assert np.array_equal(back.facets, mesh.facets)
    assert back.facet_tags == mesh.facet_tags


def test_loader_flips_negative_cells(tmp_path):
    path = tmp_path / "cw.mesh"
    path.write_text(
        "dim 2\n"
        "node 0 0.0 0.0\n"
        "node 1 1.0 0.0\n"
        "node 2 1.0 1.0\n"
        "node 3 0.0 1.0\n"
        "cell 0 0 2 1\n"          # clockwise on purpose
        "cell 1 0 3 2\n"          # clockwise on purpose
        "facet ground 0 1\n"
        "facet remaining 1 2\n"
        "facet electrode 2 3\n"
        "facet remaining 3 0\n"
    )
    mesh = load_mesh(str(path))
    for cell in mesh.cells:
        assert signed_area(mesh, cell) > 0.0


@pytest.mark.parametrize(
    "body,message_part",
    [
        ("dim 2\nnode 0 0.0\n", ":2"),
        ("dim 2\nnode 1 0.0 0.0\n", "dense"),
        ("dim 2\nwidget 0\n", "widget"),
        ("node 0 0.0 0.0\ndim 2\n", "dim"),
    ],
)
def test_parse_errors_carry_location(tmp_path, body, message_part):
    path = tmp_path / "bad.mesh"
    path.write_text(body)
    with pytest.raises(ParseError) as err:
        load_mesh(str(path))
    assert "bad.mesh" in str(err.value)
    assert message_part in str(err.value)


def test_unsupported_dimension_rejected(tmp_path):
    from piezofem.errors import InvalidDimension

    path = tmp_path / "bad.mesh"
    path.write_text("dim 4\n")
    with pytest.raises(InvalidDimension):
        load_mesh(str(path))


def _square_lines(facet_lines):
    return (
        "dim 2\n"
        "node 0 0.0 0.0\n"
        "node 1 1.0 0.0\n"
        "node 2 1.0 1.0\n"
        "node 3 0.0 1.0\n"
        "cell 0 0 1 2\n"
        "cell 1 0 2 3\n"
        + facet_lines
    )


def test_interior_facet_rejected(tmp_path):
    path = tmp_path / "interior.mesh"
    path.write_text(_square_lines(
        "facet ground 0 1\nfacet remaining 1 2\nfacet electrode 2 3\n"
        "facet remaining 3 0\nfacet remaining 0 2\n"   # diagonal
    ))
    with pytest.raises(TopologyError):
        load_mesh(str(path))


def test_uncovered_boundary_rejected(tmp_path):
    path = tmp_path / "gap.mesh"
    path.write_text(_square_lines(
        "facet ground 0 1\nfacet remaining 1 2\nfacet electrode 2 3\n"
    ))
    with pytest.raises(TopologyError):
        load_mesh(str(path))


def test_electrode_ground_contact_rejected(tmp_path):
    path = tmp_path / "short.mesh"
    path.write_text(_square_lines(
        "facet ground 0 1\nfacet electrode 1 2\nfacet remaining 2 3\n"
        "facet remaining 3 0\n"
    ))
    with pytest.raises(TopologyError) as err:
        load_mesh(str(path))
    assert "1" in str(err.value)   # the shared node


def test_missing_electrode_rejected(tmp_path):
    path = tmp_path / "noelec.mesh"
    path.write_text(_square_lines(
        "facet ground 0 1\nfacet remaining 1 2\nfacet remaining 2 3\n"
        "facet remaining 3 0\n"
    ))
    with pytest.raises(TopologyError):
        load_mesh(str(path))


def test_degenerate_cell_rejected(tmp_path):
    path = tmp_path / "flat.mesh"
    path.write_text(
        "dim 2\n"
        "node 0 0.0 0.0\n"
        "node 1 1.0 0.0\n"
        "node 2 2.0 1e-18\n"
        "node 3 0.0 1.0\n"
        "cell 0 0 1 2\n"
        "cell 1 0 2 3\n"
        "facet ground 0 1\nfacet remaining 1 2\nfacet electrode 2 3\n"
        "facet remaining 3 0\n"
    )
    with pytest.raises(DegenerateCell):
        load_mesh(str(path))


def test_comments_and_blank_lines_ignored(tmp_path):
    path = tmp_path / "c.mesh"
    path.write_text(_square_lines(
        "# boundary follows\n\n"
        "facet ground 0 1\nfacet remaining 1 2   # right side\n"
        "facet electrode 2 3\nfacet remaining 3 0\n"
    ))
    mesh = load_mesh(str(path))
    assert mesh.n_cells == 2

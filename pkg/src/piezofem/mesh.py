"""Simplicial meshes with tagged electrode boundaries.

Meshes are 2D triangulations or 3D tetrahedralizations with every
boundary facet carrying exactly one of three tags:

* ``electrode``: the driven electrode, potential equals the drive signal,
* ``ground``: the grounded electrode, potential equals zero,
* ``remaining``: charge-free surface (natural boundary condition).

The text format is line oriented, ``#`` starts a comment, IDs are
0-based and dense::

    dim 2
    node 0 0.0 0.0
    node 1 1.0 0.0
    ...
    cell 0 0 1 3
    ...
    facet ground 0 1
    facet electrode 2 3

Validation enforces: positive cell volumes after consistent orientation
(cells listed with negative volume are silently reoriented), every
tagged facet is a facet of exactly one cell, the tagged facets cover the
topological boundary exactly, both electrode tags are present, and no
node carries both electrode and ground constraints.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import DegenerateCell, InvalidDimension, ParseError, TopologyError

__all__ = [
    "ELECTRODE",
    "GROUND",
    "REMAINING",
    "Mesh",
    "DofMap",
    "load_mesh",
    "save_mesh",
    "generate_rect",
    "build_dofmap",
    "mesh_size",
]

ELECTRODE = "electrode"
GROUND = "ground"
REMAINING = "remaining"

_TAGS = (ELECTRODE, GROUND, REMAINING)

# A cell whose measure falls below this fraction of (longest edge)^dim is
# rejected as degenerate.
_DEGENERATE_RTOL = 1.0e-14


@dataclass
class Mesh:
    """A validated simplicial mesh with tagged boundary facets."""

    dim: int
    nodes: np.ndarray          # (n_nodes, dim) float
    cells: np.ndarray          # (n_cells, dim + 1) int
    facets: np.ndarray         # (n_facets, dim) int
    facet_tags: list[str] = field(default_factory=list)

    @property
    def n_nodes(self) -> int:
        return self.nodes.shape[0]

    @property
    def n_cells(self) -> int:
        return self.cells.shape[0]

    def facets_with_tag(self, tag: str) -> list[tuple[int, ...]]:
        return [
            tuple(f) for f, t in zip(self.facets, self.facet_tags) if t == tag
        ]


@dataclass
class DofMap:
    """Global degree-of-freedom layout for one mesh.

    Displacement DOFs are node-major interleaved: component ``c`` of node
    ``i`` lives at index ``dim * i + c``. Potential DOFs coincide with
    node indices. ``constrained_phi`` collects every node lying on an
    electrode or ground facet; the complement is ``free_phi``.
    """

    n_u: int
    n_phi: int
    constrained_phi: np.ndarray
    free_phi: np.ndarray
    electrode_nodes: np.ndarray
    ground_nodes: np.ndarray


def _signed_measure(points: np.ndarray) -> float:
    """Signed area (2D) or signed volume (3D) of one simplex."""
    edges = points[1:] - points[0]
    if points.shape[0] == 3:
        return 0.5 * float(np.linalg.det(edges))
    return float(np.linalg.det(edges)) / 6.0


def _longest_edge(points: np.ndarray) -> float:
    n = points.shape[0]
    h = 0.0
    for i in range(n):
        for j in range(i + 1, n):
            h = max(h, float(np.linalg.norm(points[i] - points[j])))
    return h


def _orient_and_check(mesh: Mesh) -> None:
    """Flip negative cells in place; reject degenerate ones."""
    for k in range(mesh.n_cells):
        pts = mesh.nodes[mesh.cells[k]]
        vol = _signed_measure(pts)
        h = _longest_edge(pts)
        if abs(vol) <= _DEGENERATE_RTOL * h**mesh.dim:
            raise DegenerateCell(
                f"cell {k} has measure {vol:.3e} below the degeneracy "
                f"floor for edge length {h:.3e}"
            )
        if vol < 0.0:
            mesh.cells[k, -2], mesh.cells[k, -1] = (
                mesh.cells[k, -1],
                mesh.cells[k, -2],
            )


def _boundary_facets(mesh: Mesh) -> dict[frozenset, int]:
    """Map each topological boundary facet to its count of parent cells."""
    counts: dict[frozenset, int] = {}
    n_local = mesh.dim + 1
    for cell in mesh.cells:
        for drop in range(n_local):
            face = frozenset(int(cell[i]) for i in range(n_local) if i != drop)
            counts[face] = counts.get(face, 0) + 1
    return {f: c for f, c in counts.items() if c == 1}


def _validate(mesh: Mesh) -> Mesh:
    if mesh.dim not in (2, 3):
        raise InvalidDimension(f"dim must be 2 or 3, got {mesh.dim}")
    if mesh.nodes.shape[1] != mesh.dim:
        raise TopologyError(
            f"node coordinates have {mesh.nodes.shape[1]} components "
            f"for dim {mesh.dim}"
        )
    if mesh.cells.shape[1] != mesh.dim + 1:
        raise TopologyError(
            f"cells have {mesh.cells.shape[1]} nodes for dim {mesh.dim}"
        )
    if mesh.cells.min(initial=0) < 0 or (
        mesh.n_cells and mesh.cells.max() >= mesh.n_nodes
    ):
        raise TopologyError("cell references a node id out of range")
    if mesh.facets.size and (
        mesh.facets.min() < 0 or mesh.facets.max() >= mesh.n_nodes
    ):
        raise TopologyError("facet references a node id out of range")

    _orient_and_check(mesh)

    boundary = _boundary_facets(mesh)
    tagged: dict[frozenset, str] = {}
    for f, tag in zip(mesh.facets, mesh.facet_tags):
        key = frozenset(int(i) for i in f)
        if len(key) != mesh.dim:
            raise TopologyError(f"facet {tuple(f)} has repeated nodes")
        if key in tagged:
            raise TopologyError(f"facet {tuple(f)} is tagged twice")
        if key not in boundary:
            raise TopologyError(
                f"facet {tuple(f)} is not a boundary facet of exactly "
                f"one cell"
            )
        tagged[key] = tag
    missing = set(boundary) - set(tagged)
    if missing:
        example = tuple(sorted(next(iter(missing))))
        raise TopologyError(
            f"{len(missing)} boundary facet(s) untagged, e.g. {example}"
        )

    electrode = {n for f, t in tagged.items() if t == ELECTRODE for n in f}
    ground = {n for f, t in tagged.items() if t == GROUND for n in f}
    if not electrode:
        raise TopologyError("no electrode facets tagged")
    if not ground:
        raise TopologyError("no ground facets tagged")
    overlap = electrode & ground
    if overlap:
        raise TopologyError(
            f"node(s) {sorted(overlap)} lie on both electrode and ground"
        )
    return mesh


def load_mesh(path) -> Mesh:
    """Parse and validate a mesh file. See the module docstring for the
    format. Raises :class:`ParseError` on malformed lines and
    :class:`TopologyError` / :class:`DegenerateCell` on invalid meshes.
    """
    dim = None
    nodes: dict[int, list[float]] = {}
    cells: dict[int, list[int]] = {}
    facets: list[list[int]] = []
    tags: list[str] = []

    with open(path) as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            parts = line.split()
            kind = parts[0]
            try:
                if kind == "dim":
                    if len(parts) != 2:
                        raise ValueError
                    dim = int(parts[1])
                elif kind == "node":
                    if dim is None:
                        raise ParseError(
                            f"{path}:{lineno}: node before dim line"
                        )
                    if len(parts) != 2 + dim:
                        raise ValueError
                    nodes[int(parts[1])] = [float(v) for v in parts[2:]]
                elif kind == "cell":
                    if dim is None:
                        raise ParseError(
                            f"{path}:{lineno}: cell before dim line"
                        )
                    if len(parts) != 3 + dim:
                        raise ValueError
                    cells[int(parts[1])] = [int(v) for v in parts[2:]]
                elif kind == "facet":
                    if dim is None:
                        raise ParseError(
                            f"{path}:{lineno}: facet before dim line"
                        )
                    tag = parts[1]
                    if tag not in _TAGS:
                        raise ParseError(
                            f"{path}:{lineno}: unknown facet tag {tag!r}"
                        )
                    if len(parts) != 2 + dim:
                        raise ValueError
                    facets.append([int(v) for v in parts[2:]])
                    tags.append(tag)
                else:
                    raise ParseError(
                        f"{path}:{lineno}: unknown line kind {kind!r}"
                    )
            except ParseError:
                raise
            except ValueError:
                raise ParseError(
                    f"{path}:{lineno}: malformed {kind} line: {line!r}"
                ) from None

    if dim is None:
        raise ParseError(f"{path}: missing dim line")
    if dim not in (2, 3):
        raise InvalidDimension(f"{path}: dim must be 2 or 3, got {dim}")
    for label, table in (("node", nodes), ("cell", cells)):
        ids = sorted(table)
        if ids != list(range(len(ids))):
            raise ParseError(f"{path}: {label} ids are not dense from 0")
    if not nodes:
        raise ParseError(f"{path}: mesh has no nodes")
    if not cells:
        raise ParseError(f"{path}: mesh has no cells")

    mesh = Mesh(
        dim=dim,
        nodes=np.array([nodes[i] for i in range(len(nodes))], dtype=float),
        cells=np.array([cells[i] for i in range(len(cells))], dtype=np.int64),
        facets=(
            np.array(facets, dtype=np.int64)
            if facets
            else np.empty((0, dim), dtype=np.int64)
        ),
        facet_tags=tags,
    )
    return _validate(mesh)


def save_mesh(mesh: Mesh, path) -> None:
    """Write *mesh* in the text format; floats use shortest round-trip
    representation so a reload reproduces the coordinates bit-exactly.
    """
    with open(path, "w") as fh:
        fh.write(f"dim {mesh.dim}\n")
        for i, xyz in enumerate(mesh.nodes):
            coords = " ".join(repr(float(v)) for v in xyz)
            fh.write(f"node {i} {coords}\n")
        for i, cell in enumerate(mesh.cells):
            conn = " ".join(str(int(v)) for v in cell)
            fh.write(f"cell {i} {conn}\n")
        for facet, tag in zip(mesh.facets, mesh.facet_tags):
            conn = " ".join(str(int(v)) for v in facet)
            fh.write(f"facet {tag} {conn}\n")


def generate_rect(
    nx: int,
    ny: int,
    lx: float = 1.0,
    ly: float = 1.0,
    tagging_rule: dict[str, str] | None = None,
) -> Mesh:
    """Structured triangulation of the rectangle [0, lx] x [0, ly].

    Each of the ``nx * ny`` quads is split along its lower-left to
    upper-right diagonal, giving ``2 * nx * ny`` counterclockwise
    triangles and ``2 * (nx + ny)`` boundary facets.

    ``tagging_rule`` maps the sides ``top``, ``bottom``, ``left``,
    ``right`` to boundary tags; the default drives the top edge against
    a grounded bottom edge with charge-free sides.
    """
    if nx < 1 or ny < 1:
        raise InvalidDimension(f"nx and ny must be >= 1, got {nx}, {ny}")
    if not (lx > 0.0 and ly > 0.0):
        raise InvalidDimension(f"lx and ly must be > 0, got {lx}, {ly}")
    rule = {
        "top": ELECTRODE,
        "bottom": GROUND,
        "left": REMAINING,
        "right": REMAINING,
    }
    if tagging_rule:
        unknown = set(tagging_rule) - set(rule)
        if unknown:
            raise InvalidDimension(
                f"unknown tagging_rule side(s) {sorted(unknown)}"
            )
        bad = {t for t in tagging_rule.values() if t not in _TAGS}
        if bad:
            raise InvalidDimension(f"unknown tag(s) {sorted(bad)}")
        rule.update(tagging_rule)

    def nid(i: int, j: int) -> int:
        return j * (nx + 1) + i

    nodes = np.array(
        [
            [lx * i / nx, ly * j / ny]
            for j in range(ny + 1)
            for i in range(nx + 1)
        ],
        dtype=float,
    )
    cells = []
    for j in range(ny):
        for i in range(nx):
            a, b = nid(i, j), nid(i + 1, j)
            c, d = nid(i + 1, j + 1), nid(i, j + 1)
            cells.append([a, b, c])
            cells.append([a, c, d])
    facets, tags = [], []
    for i in range(nx):
        facets.append([nid(i, 0), nid(i + 1, 0)])
        tags.append(rule["bottom"])
        facets.append([nid(i, ny), nid(i + 1, ny)])
        tags.append(rule["top"])
    for j in range(ny):
        facets.append([nid(0, j), nid(0, j + 1)])
        tags.append(rule["left"])
        facets.append([nid(nx, j), nid(nx, j + 1)])
        tags.append(rule["right"])

    mesh = Mesh(
        dim=2,
        nodes=nodes,
        cells=np.array(cells, dtype=np.int64),
        facets=np.array(facets, dtype=np.int64),
        facet_tags=tags,
    )
    return _validate(mesh)


def build_dofmap(mesh: Mesh) -> DofMap:
    """Derive the DOF layout and the constrained potential node sets."""
    electrode: set[int] = set()
    ground: set[int] = set()
    for facet, tag in zip(mesh.facets, mesh.facet_tags):
        if tag == ELECTRODE:
            electrode.update(int(i) for i in facet)
        elif tag == GROUND:
            ground.update(int(i) for i in facet)
    constrained = np.array(sorted(electrode | ground), dtype=np.int64)
    mask = np.ones(mesh.n_nodes, dtype=bool)
    mask[constrained] = False
    free = np.nonzero(mask)[0].astype(np.int64)
    return DofMap(
        n_u=mesh.dim * mesh.n_nodes,
        n_phi=mesh.n_nodes,
        constrained_phi=constrained,
        free_phi=free,
        electrode_nodes=np.array(sorted(electrode), dtype=np.int64),
        ground_nodes=np.array(sorted(ground), dtype=np.int64),
    )


def mesh_size(mesh: Mesh) -> float:
    """Longest edge over all cells (the mesh parameter h)."""
    h = 0.0
    for cell in mesh.cells:
        h = max(h, _longest_edge(mesh.nodes[cell]))
    return h

"""Triangulations with fixed facet frames and quadratically curved boundaries.

Each facet is stored as a vertex pair oriented counter-clockwise with respect
to its first adjacent element, so the fixed facet normal ``N_F`` is that
element's outward normal.  Curved facets carry one control point (the image
of the edge midpoint) and every element is evaluated through the quadratic
isoparametric map with nodes ``v0, v1, v2, m0, m1, m2``.  For straight edges
``m_e`` is the chord midpoint and the map reduces to the affine one.
"""
import json
from dataclasses import dataclass, field

import numpy as np

from .elements.reference import REF_EDGES, geometry_shape


class DegenerateGeometryError(ValueError):
    """Non-positive Jacobian determinant of an element map."""


class InvalidMeshInput(ValueError):
    pass


@dataclass(frozen=True, eq=False)
class Triangulation:
    vertices: np.ndarray
    triangles: np.ndarray
    facets: np.ndarray
    facet_elements: np.ndarray
    element_facets: np.ndarray
    element_signs: np.ndarray
    boundary_markers: dict
    curved_edges: dict = field(default_factory=dict)
    curves: dict = field(default_factory=dict)
    points: dict = field(default_factory=dict)

    @property
    def n_elements(self):
        return len(self.triangles)

    @property
    def n_facets(self):
        return len(self.facets)

    @property
    def n_vertices(self):
        return len(self.vertices)

    @property
    def is_curved(self):
        return bool(self.curved_edges)

    @property
    def boundary_facets(self):
        return np.flatnonzero(self.facet_elements[:, 1] < 0)

    @property
    def interior_facets(self):
        return np.flatnonzero(self.facet_elements[:, 1] >= 0)

    def facet_marker(self, f):
        for name, ids in self.boundary_markers.items():
            if f in ids:
                return name
        return None

    def element_nodes(self):
        """Quadratic geometry nodes, shape ``(n_elements, 6, 2)``."""
        v = self.vertices[self.triangles]
        nodes = np.empty((self.n_elements, 6, 2))
        nodes[:, :3] = v
        for e, (a, b) in enumerate(REF_EDGES):
            nodes[:, 3 + e] = 0.5 * (v[:, a] + v[:, b])
        for f, ctrl in self.curved_edges.items():
            for t in self.facet_elements[f]:
                if t < 0:
                    continue
                e = int(np.flatnonzero(self.element_facets[t] == f)[0])
                nodes[t, 3 + e] = ctrl
        return nodes

    def element_is_curved(self):
        flags = np.zeros(self.n_elements, dtype=bool)
        for f in self.curved_edges:
            flags[self.facet_elements[f][self.facet_elements[f] >= 0]] = True
        return flags

    def element_h(self):
        """Longest chord of each element."""
        v = self.vertices[self.triangles]
        edges = v[:, [2, 0, 1]] - v[:, [1, 2, 0]]
        return np.linalg.norm(edges, axis=2).max(axis=1)

    def mesh_size(self):
        return float(self.element_h().max())

    def with_points(self, **points):
        merged = dict(self.points)
        merged.update(points)
        return Triangulation(
            self.vertices, self.triangles, self.facets, self.facet_elements, self.element_facets,
            self.element_signs, self.boundary_markers, self.curved_edges, self.curves, merged,
        )


def make_triangulation(vertices, triangles, facet_markers=None, curved_edges=None, curves=None, points=None):
    """Build a :class:`Triangulation` from raw arrays.

    Parameters
    ----------
    vertices : (nv, 2) array
    triangles : (nt, 3) int array, counter-clockwise
    facet_markers : dict name -> iterable of vertex pairs
    curved_edges : dict vertex pair -> control point
    curves : dict marker name -> (center, radius) for reprojection on refinement
    points : dict name -> vertex id
    """
    vertices = np.asarray(vertices, dtype=float)
    triangles = np.asarray(triangles, dtype=np.int64).reshape(-1, 3)
    if vertices.ndim != 2 or vertices.shape[1] != 2:
        raise InvalidMeshInput("vertices must have shape (n, 2)")
    if triangles.size and (triangles.min() < 0 or triangles.max() >= len(vertices)):
        raise InvalidMeshInput("triangle references a missing vertex")
    v = vertices[triangles]
    det = (v[:, 1, 0] - v[:, 0, 0]) * (v[:, 2, 1] - v[:, 0, 1]) - (v[:, 2, 0] - v[:, 0, 0]) * (v[:, 1, 1] - v[:, 0, 1])
    if np.any(det <= 0):
        raise DegenerateGeometryError(f"element {int(np.argmax(det <= 0))} is not positively oriented")

    lookup = {}
    facets, adj = [], []
    elem_f = np.empty((len(triangles), 3), dtype=np.int64)
    elem_s = np.empty((len(triangles), 3), dtype=np.int64)
    for t, tri in enumerate(triangles):
        for e, (a, b) in enumerate(REF_EDGES):
            i, j = int(tri[a]), int(tri[b])
            key = (min(i, j), max(i, j))
            if key in lookup:
                f = lookup[key]
                if adj[f][1] >= 0:
                    raise InvalidMeshInput(f"facet {key} shared by more than two elements")
                adj[f][1] = t
                elem_f[t, e], elem_s[t, e] = f, -1
            else:
                f = lookup[key] = len(facets)
                facets.append((i, j))
                adj.append([t, -1])
                elem_f[t, e], elem_s[t, e] = f, 1
    facets = np.array(facets, dtype=np.int64).reshape(-1, 2)
    adj = np.array(adj, dtype=np.int64).reshape(-1, 2)

    markers = {}
    for name, pairs in (facet_markers or {}).items():
        ids = []
        for i, j in pairs:
            key = (min(i, j), max(i, j))
            if key not in lookup:
                raise InvalidMeshInput(f"marker {name!r} references edge {key} which is not a facet")
            f = lookup[key]
            if adj[f, 1] >= 0:
                raise InvalidMeshInput(f"marker {name!r} references interior facet {key}")
            ids.append(f)
        markers[name] = np.array(sorted(ids), dtype=np.int64)
    curved = {}
    for (i, j), ctrl in (curved_edges or {}).items():
        key = (min(i, j), max(i, j))
        if key not in lookup:
            raise InvalidMeshInput(f"curved edge {key} is not a facet")
        curved[lookup[key]] = np.asarray(ctrl, dtype=float)
    mesh = Triangulation(
        vertices, triangles, facets, adj, elem_f, elem_s, markers, curved,
        {k: (np.asarray(c, dtype=float), float(r)) for k, (c, r) in (curves or {}).items()},
        dict(points or {}),
    )
    if curved:
        # pointwise positivity check on curved elements
        from .elements.quadrature import triangle_rule

        pts = triangle_rule(4).points
        for t in np.flatnonzero(mesh.element_is_curved()):
            geometry_at(mesh, t, pts)
    return mesh


def _arc_point(center, radius, p, q):
    mid = 0.5 * (p + q) - center
    return center + radius * mid / np.linalg.norm(mid)


def build_quarter_annulus(r_in=0.5, r_out=1.0, level=0, curve_order=2, n_radial=2, n_angular=6):
    """Quarter annulus in the first quadrant.

    The base mesh is a polar grid with ``n_radial x n_angular`` cells, each
    split into two triangles (mesh size about 0.25 for the default radii);
    ``level`` uniform refinements follow.  Markers: ``inner``, ``outer``,
    ``sym_x`` (on the x-axis) and ``sym_y`` (on the y-axis).
    """
    if not (0 < r_in < r_out):
        raise InvalidMeshInput("radii must satisfy 0 < r_in < r_out")
    if level < 0 or curve_order not in (1, 2):
        raise InvalidMeshInput("level must be >= 0 and curve_order in {1, 2}")
    radii = np.linspace(r_in, r_out, n_radial + 1)
    angles = np.linspace(0.0, 0.5 * np.pi, n_angular + 1)
    idx = lambda i, j: i * (n_angular + 1) + j  # noqa: E731
    verts = np.array([[r * np.cos(a), r * np.sin(a)] for r in radii for a in angles])
    verts[np.abs(verts) < 1e-15] = 0.0
    tris = []
    for i in range(n_radial):
        for j in range(n_angular):
            a, b, c, d = idx(i, j), idx(i + 1, j), idx(i + 1, j + 1), idx(i, j + 1)
            tris += [(a, b, c), (a, c, d)]
    markers = {
        "inner": [(idx(0, j), idx(0, j + 1)) for j in range(n_angular)],
        "outer": [(idx(n_radial, j), idx(n_radial, j + 1)) for j in range(n_angular)],
        "sym_x": [(idx(i, 0), idx(i + 1, 0)) for i in range(n_radial)],
        "sym_y": [(idx(i, n_angular), idx(i + 1, n_angular)) for i in range(n_radial)],
    }
    curves = {"inner": ((0.0, 0.0), r_in), "outer": ((0.0, 0.0), r_out)}
    curved = {}
    if curve_order == 2:
        for name in ("inner", "outer"):
            c, r = np.zeros(2), curves[name][1]
            for i, j in markers[name]:
                curved[(i, j)] = _arc_point(c, r, verts[i], verts[j])
    mesh = make_triangulation(verts, tris, markers, curved, curves)
    for _ in range(level):
        mesh = uniform_refine(mesh)
    return mesh


def build_cook_mesh(n, scale=1.0, diagonal="down"):
    """Structured Cook membrane mesh with ``2 n^2`` triangles.

    The unit square is mapped bilinearly onto the trapezoid with corners
    ``(0,0), (48,44), (48,60), (0,44)`` (mm, multiplied by ``scale``).
    With ``diagonal="up"`` every cell is split along the diagonal running
    toward increasing ``x + y``; ``"down"`` uses the other diagonal.
    Vertex ``A = (48, 60) * scale`` is tagged in ``mesh.points``.
    """
    if int(n) != n or n < 1:
        raise InvalidMeshInput("n must be a positive integer")
    if diagonal not in ("up", "down"):
        raise InvalidMeshInput("diagonal must be 'up' or 'down'")
    n = int(n)
    s = np.linspace(0.0, 1.0, n + 1)
    xi, eta = np.meshgrid(s, s, indexing="ij")
    x = 48.0 * xi
    y = 44.0 * xi + eta * (44.0 + (60.0 - 44.0 - 44.0) * xi)
    verts = scale * np.column_stack([x.ravel(), y.ravel()])
    idx = lambda i, j: i * (n + 1) + j  # noqa: E731
    tris = []
    for i in range(n):
        for j in range(n):
            a, b, c, d = idx(i, j), idx(i + 1, j), idx(i + 1, j + 1), idx(i, j + 1)
            tris += [(a, b, c), (a, c, d)] if diagonal == "up" else [(a, b, d), (b, c, d)]
    markers = {
        "left": [(idx(0, j), idx(0, j + 1)) for j in range(n)],
        "right": [(idx(n, j), idx(n, j + 1)) for j in range(n)],
        "bottom": [(idx(i, 0), idx(i + 1, 0)) for i in range(n)],
        "top": [(idx(i, n), idx(i + 1, n)) for i in range(n)],
    }
    return make_triangulation(verts, tris, markers, points={"A": idx(n, n)})


def build_unit_square(n=2):
    """Unit square split into ``2 n^2`` triangles.

    Markers: ``left``, ``right``, ``bottom``, ``top`` and their union
    ``boundary``.
    """
    if int(n) != n or n < 1:
        raise InvalidMeshInput("n must be a positive integer")
    n = int(n)
    s = np.linspace(0.0, 1.0, n + 1)
    verts = np.array([[a, b] for a in s for b in s])
    idx = lambda i, j: i * (n + 1) + j  # noqa: E731
    tris = []
    for i in range(n):
        for j in range(n):
            a, b, c, d = idx(i, j), idx(i + 1, j), idx(i + 1, j + 1), idx(i, j + 1)
            tris += [(a, b, c), (a, c, d)]
    sides = {
        "left": [(idx(0, j), idx(0, j + 1)) for j in range(n)],
        "right": [(idx(n, j), idx(n, j + 1)) for j in range(n)],
        "bottom": [(idx(j, 0), idx(j + 1, 0)) for j in range(n)],
        "top": [(idx(j, n), idx(j + 1, n)) for j in range(n)],
    }
    sides["boundary"] = [pair for name in ("left", "right", "bottom", "top") for pair in sides[name]]
    return make_triangulation(verts, tris, sides)


def uniform_refine(mesh):
    """Split every triangle into four; boundary markers are inherited and new
    vertices / control points on marked curves are projected onto the exact
    circle stored in ``mesh.curves``."""
    verts = list(map(np.asarray, mesh.vertices))
    mid = np.empty(mesh.n_facets, dtype=np.int64)
    marker_of = {}
    for name, ids in mesh.boundary_markers.items():
        for f in ids:
            marker_of[int(f)] = name
    for f, (i, j) in enumerate(mesh.facets):
        p = 0.5 * (mesh.vertices[i] + mesh.vertices[j])
        name = marker_of.get(f)
        if f in mesh.curved_edges:
            p = mesh.curved_edges[f]
        if name in mesh.curves:
            c, r = mesh.curves[name]
            p = _arc_point(c, r, mesh.vertices[i], mesh.vertices[j])
        mid[f] = len(verts)
        verts.append(p)
    verts = np.array(verts)
    tris = []
    for t, tri in enumerate(mesh.triangles):
        m0, m1, m2 = mid[mesh.element_facets[t]]
        v0, v1, v2 = tri
        tris += [(v0, m2, m1), (m2, v1, m0), (m1, m0, v2), (m0, m1, m2)]
    markers = {}
    curved = {}
    for name, ids in mesh.boundary_markers.items():
        pairs = []
        for f in ids:
            i, j = mesh.facets[f]
            pairs += [(i, mid[f]), (mid[f], j)]
            if f in mesh.curved_edges:
                c, r = mesh.curves[name]
                curved[(i, mid[f])] = _arc_point(c, r, verts[i], verts[mid[f]])
                curved[(mid[f], j)] = _arc_point(c, r, verts[mid[f]], verts[j])
        markers[name] = pairs
    points = dict(mesh.points)
    return make_triangulation(verts, tris, markers, curved, mesh.curves, points)


def element_geometry(mesh, points, elements=None, second=False):
    """Batched map evaluation.

    Returns ``X (ne, np, 2)``, ``G (ne, np, 2, 2)`` with ``G[i, j] = dX_i/dx_j``,
    ``det (ne, np)`` and optionally ``dG (ne, np, 2, 2, 2)`` where
    ``dG[..., m] = dG/dx_m``.
    """
    nodes = mesh.element_nodes()
    if elements is not None:
        nodes = nodes[elements]
    vals, grads, hess = geometry_shape(points)
    X = np.einsum("enc,pn->epc", nodes, vals)
    G = np.einsum("enc,pnd->epcd", nodes, grads)
    det = G[..., 0, 0] * G[..., 1, 1] - G[..., 0, 1] * G[..., 1, 0]
    if second:
        dG = np.einsum("enc,pndm->epcdm", nodes, hess)
        return X, G, det, dG
    return X, G, det


def geometry_at(mesh, element, ref_points):
    """Physical points, Jacobians and determinants on one element."""
    X, G, det = element_geometry(mesh, np.atleast_2d(ref_points), elements=[element])
    if np.any(det[0] <= 0):
        raise DegenerateGeometryError(f"non-positive Jacobian determinant on element {element}")
    return X[0], G[0], det[0]


def facet_frame(mesh, facet):
    """Unit normal, unit tangent (normal rotated by +90 degrees) and the
    signs of the adjacent elements relative to the fixed facet normal.

    The frame is evaluated at the facet midpoint (exact for straight facets).
    """
    t0 = mesh.facet_elements[facet, 0]
    e = int(np.flatnonzero(mesh.element_facets[t0] == facet)[0])
    a, b = REF_EDGES[e]
    from .elements.reference import REF_VERTICES

    s_mid = 0.5 * (REF_VERTICES[a] + REF_VERTICES[b])
    _, G, _ = geometry_at(mesh, t0, s_mid)
    tangent = G[0] @ (REF_VERTICES[b] - REF_VERTICES[a])
    normal = np.array([tangent[1], -tangent[0]])
    normal /= np.linalg.norm(normal)
    tan = np.array([-normal[1], normal[0]])
    signs = [1] + ([-1] if mesh.facet_elements[facet, 1] >= 0 else [])
    return normal, tan, signs


def mesh_to_json(mesh):
    pts = {name: [mesh.facets[f].tolist() for f in ids] for name, ids in mesh.boundary_markers.items()}
    doc = {
        "dim": 2,
        "vertices": mesh.vertices.tolist(),
        "triangles": mesh.triangles.tolist(),
        "facet_markers": pts,
        "curved_edges": [
            {"edge": mesh.facets[f].tolist(), "control": np.asarray(c).tolist()} for f, c in mesh.curved_edges.items()
        ],
    }
    if mesh.curves:
        doc["curves"] = {k: {"center": np.asarray(c).tolist(), "radius": r} for k, (c, r) in mesh.curves.items()}
    if mesh.points:
        doc["points"] = {k: int(v) for k, v in mesh.points.items()}
    return json.dumps(doc)


def mesh_from_json(text):
    doc = json.loads(text)
    if doc.get("dim", 2) != 2:
        raise InvalidMeshInput("only 2D meshes are supported")
    curved = {tuple(item["edge"]): item["control"] for item in doc.get("curved_edges", [])}
    curves = {k: (v["center"], v["radius"]) for k, v in doc.get("curves", {}).items()}
    return make_triangulation(
        doc["vertices"], doc["triangles"], doc.get("facet_markers", {}), curved, curves, doc.get("points", {})
    )


def facet_geometry(mesh, facet, s):
    """Points and unnormalized tangents ``dX/ds`` along a facet.

    ``s in [0, 1]`` runs in the fixed facet orientation; the unnormalized
    normal ``(dX/ds)_y, -(dX/ds)_x`` then equals ``|dX/ds| N_F``.
    """
    from .elements.reference import edge_points, edge_vectors

    t0 = mesh.facet_elements[facet, 0]
    e = int(np.flatnonzero(mesh.element_facets[t0] == facet)[0])
    X, G, _ = element_geometry(mesh, edge_points(e, s), elements=[t0])
    tang = np.einsum("pij,j->pi", G[0], edge_vectors(e)[0])
    return X[0], tang

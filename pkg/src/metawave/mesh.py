"""Conforming triangular meshes of rectangles with oriented edges."""
import numpy as np


class Mesh:
    """Immutable conforming triangulation.

    Attributes
    ----------
    vertices : (nv, 2) float array
    cells : (nc, 3) int array, counterclockwise
    edges : (ne, 2) int array, each row sorted (low vertex -> high vertex)
    cell_edges : (nc, 3) int array; local edge e is opposite local vertex e
    cell_edge_signs : (nc, 3) array of +1/-1; +1 when the global edge normal
        (tangent rotated clockwise) is the outward normal of the cell
    cell_edge_flips : (nc, 3) bool array; True when the local edge direction
        (lower -> higher local vertex) runs against the global direction
    edge_cells : (ne, 2) int array of adjacent cells, -1 for the missing side
    boundary_labels : dict edge index -> label (empty until classified)
    """

    def __init__(self, vertices, cells):
        vertices = np.asarray(vertices, dtype=float)
        cells = np.asarray(cells, dtype=np.int64)
        if vertices.ndim != 2 or vertices.shape[1] != 2:
            raise ValueError("vertices must have shape (nv, 2)")
        if cells.ndim != 2 or cells.shape[1] != 3:
            raise ValueError("cells must have shape (nc, 3)")
        self.vertices = vertices
        self.cells = cells
        if np.any(self.signed_areas() <= 0.0):
            bad = np.flatnonzero(self.signed_areas() <= 0.0)
            raise ValueError(f"cells with non-positive signed area: {bad[:10].tolist()}")
        self._build_edges()
        self.boundary_labels = {}
        for arr in (self.vertices, self.cells, self.edges, self.cell_edges,
                    self.cell_edge_signs, self.cell_edge_flips, self.edge_cells):
            arr.setflags(write=False)

    def _build_edges(self):
        loc = np.array([[1, 2], [0, 2], [0, 1]])
        pairs = self.cells[:, loc]  # (nc, 3, 2) local orientation
        lo = pairs.min(axis=2)
        hi = pairs.max(axis=2)
        key = np.stack([lo, hi], axis=-1).reshape(-1, 2)
        edges, inv, counts = np.unique(key, axis=0, return_inverse=True, return_counts=True)
        inv = inv.reshape(-1)
        if np.any(counts > 2):
            raise ValueError("non-manifold mesh: an edge is shared by more than two cells")
        nc = len(self.cells)
        self.edges = edges
        self.cell_edges = inv.reshape(nc, 3)
        self.cell_edge_flips = pairs[:, :, 0] > pairs[:, :, 1]

        ev = self.vertices[edges]
        tang = ev[:, 1] - ev[:, 0]
        normal = np.column_stack([tang[:, 1], -tang[:, 0]])
        mid = ev.mean(axis=1)
        cent = self.centroids()
        out = mid[self.cell_edges] - cent[:, None, :]
        dots = np.einsum("cek,cek->ce", out, normal[self.cell_edges])
        self.cell_edge_signs = np.where(dots > 0, 1, -1).astype(np.int8)

        edge_cells = -np.ones((len(edges), 2), dtype=np.int64)
        order = np.argsort(inv, kind="stable")
        cell_of = order // 3
        sorted_edges = inv[order]
        first = np.ones(len(sorted_edges), dtype=bool)
        first[1:] = sorted_edges[1:] != sorted_edges[:-1]
        edge_cells[sorted_edges[first], 0] = cell_of[first]
        edge_cells[sorted_edges[~first], 1] = cell_of[~first]
        self.edge_cells = edge_cells

    # -- geometry -----------------------------------------------------------
    @property
    def n_cells(self):
        return len(self.cells)

    @property
    def n_vertices(self):
        return len(self.vertices)

    @property
    def n_edges(self):
        return len(self.edges)

    def signed_areas(self):
        p = self.vertices[self.cells]
        d1 = p[:, 1] - p[:, 0]
        d2 = p[:, 2] - p[:, 0]
        return 0.5 * (d1[:, 0] * d2[:, 1] - d1[:, 1] * d2[:, 0])

    def centroids(self):
        return self.vertices[self.cells].mean(axis=1)

    def jacobians(self):
        """Affine map x = J xhat + x0 per cell: returns (J, detJ, x0)."""
        p = self.vertices[self.cells]
        J = np.stack([p[:, 1] - p[:, 0], p[:, 2] - p[:, 0]], axis=-1)
        det = J[:, 0, 0] * J[:, 1, 1] - J[:, 0, 1] * J[:, 1, 0]
        return J, det, p[:, 0]

    def map_points(self, ref_pts):
        """Reference points (npts, 2) -> physical points (nc, npts, 2)."""
        J, _, x0 = self.jacobians()
        return x0[:, None, :] + np.einsum("cij,pj->cpi", J, ref_pts)

    def edge_lengths(self):
        ev = self.vertices[self.edges]
        return np.linalg.norm(ev[:, 1] - ev[:, 0], axis=1)

    def edge_normals(self):
        """Unit global normals (tangent low -> high rotated clockwise)."""
        ev = self.vertices[self.edges]
        tang = ev[:, 1] - ev[:, 0]
        n = np.column_stack([tang[:, 1], -tang[:, 0]])
        return n / np.linalg.norm(n, axis=1)[:, None]

    def diameters(self):
        p = self.vertices[self.cells]
        d = [np.linalg.norm(p[:, i] - p[:, j], axis=1) for i, j in ((0, 1), (1, 2), (0, 2))]
        return np.max(d, axis=0)

    @property
    def h_max(self):
        return float(self.diameters().max())

    @property
    def boundary_edges(self):
        return np.flatnonzero(self.edge_cells[:, 1] < 0)

    @property
    def interior_edges(self):
        return np.flatnonzero(self.edge_cells[:, 1] >= 0)

    def find_cell(self, point, tol=1e-12):
        """Index of a cell containing ``point`` (first match), or -1."""
        J, det, x0 = self.jacobians()
        Jinv = np.linalg.inv(J)
        ref = np.einsum("cij,cj->ci", Jinv, np.asarray(point, float) - x0)
        lam = np.column_stack([1 - ref.sum(axis=1), ref])
        hit = np.flatnonzero(np.all(lam >= -tol, axis=1))
        return int(hit[0]) if hit.size else -1

    # -- labelling ----------------------------------------------------------
    def classify_boundary(self, parts):
        """Tag every boundary edge with exactly one label.

        ``parts`` is a sequence of (label, predicate) where predicate(x, y)
        is evaluated at both endpoints and the midpoint of each edge.
        Returns a new Mesh sharing arrays with this one.
        """
        labels = {}
        errors = []
        ev = self.vertices[self.edges]
        for e in self.boundary_edges:
            pts = np.vstack([ev[e], ev[e].mean(axis=0)])
            hits = [lab for lab, pred in parts
                    if all(bool(pred(x, y)) for x, y in pts)]
            if len(hits) != 1:
                kind = "uncovered" if not hits else f"covered by {hits}"
                errors.append(f"edge {e} {ev[e].tolist()} {kind}")
            else:
                labels[int(e)] = hits[0]
        if errors:
            raise ValueError("boundary classification failed:\n" + "\n".join(errors[:20]))
        new = object.__new__(Mesh)
        new.__dict__.update(self.__dict__)
        new.boundary_labels = labels
        return new

    def edges_with_label(self, label):
        return np.array(sorted(e for e, lab in self.boundary_labels.items() if lab == label),
                        dtype=np.int64)

    def cell_regions(self, regions, default="PIM"):
        """Label cells by axis-aligned boxes.

        ``regions`` maps label -> (xmin, xmax, ymin, ymax).  A cell belongs to a
        box when its centroid does; all three vertices must agree, otherwise
        the mesh does not resolve the region and ValueError is raised.
        """
        labels = np.full(self.n_cells, default, dtype=object)
        cent = self.centroids()
        verts = self.vertices[self.cells]
        tol = 1e-12
        for lab, (x0, x1, y0, y1) in regions.items():
            inside_c = ((cent[:, 0] > x0) & (cent[:, 0] < x1)
                        & (cent[:, 1] > y0) & (cent[:, 1] < y1))
            inside_v = ((verts[..., 0] >= x0 - tol) & (verts[..., 0] <= x1 + tol)
                        & (verts[..., 1] >= y0 - tol) & (verts[..., 1] <= y1 + tol))
            bad = np.flatnonzero(inside_c & ~inside_v.all(axis=1))
            if bad.size:
                raise ValueError(f"region {lab!r} cuts cells {bad[:10].tolist()}")
            labels[inside_c] = lab
        return labels

    def dump(self, path):
        """Plain-text node/element file: counts line, vertex rows, cell rows."""
        with open(path, "w") as fh:
            fh.write(f"{self.n_vertices} {self.n_cells}\n")
            for x, y in self.vertices:
                fh.write(f"{x:.17g} {y:.17g}\n")
            for a, b, c in self.cells:
                fh.write(f"{a} {b} {c}\n")

    def __repr__(self):
        return f"Mesh(nv={self.n_vertices}, nc={self.n_cells}, ne={self.n_edges})"


def build_structured(domain, N):
    """Bisection mesh of an axis-aligned rectangle.

    ``domain`` is (xmin, xmax, ymin, ymax).  Each of the N x N squares is split
    by its lower-left to upper-right diagonal.
    """
    if not isinstance(N, (int, np.integer)) or N < 1:
        raise ValueError(f"N must be a positive integer, got {N!r}")
    x0, x1, y0, y1 = map(float, domain)
    if not (x1 > x0 and y1 > y0):
        raise ValueError(f"degenerate domain {domain!r}")
    xs = np.linspace(x0, x1, N + 1)
    ys = np.linspace(y0, y1, N + 1)
    X, Y = np.meshgrid(xs, ys, indexing="xy")
    verts = np.column_stack([X.ravel(), Y.ravel()])
    i, j = np.meshgrid(np.arange(N), np.arange(N), indexing="xy")
    ll = (j * (N + 1) + i).ravel()
    lr = ll + 1
    ul = ll + N + 1
    ur = ul + 1
    lower = np.column_stack([ll, lr, ur])
    upper = np.column_stack([ll, ur, ul])
    cells = np.empty((2 * N * N, 3), dtype=np.int64)
    cells[0::2] = lower
    cells[1::2] = upper
    return Mesh(verts, cells)


def unit_square(N):
    return build_structured((0.0, 1.0, 0.0, 1.0), N)

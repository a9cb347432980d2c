"""Sparse undirected graphs, spectral operator actions, and dataset ingestion.

The graph stores a symmetric weighted adjacency once; the normalized
operators are applied matrix-free:

* ``S = D^{-1/2} W D^{-1/2}``  (normalized adjacency),
* ``N = I - S``                (normalized Laplacian),
* ``S_loop = (D+I)^{-1/2} (W+I) (D+I)^{-1/2}``  (self-loop normalized adjacency).

Isolated nodes use the convention ``d^{-1/2} = 0``, so ``S`` maps them to 0
and ``N`` acts as the identity on them.
"""

import csv

import numpy as np
import scipy.sparse as sp

from .validation import check_finite, check_matrix

_DEGREE_RTOL = 1e-12


class Graph:
    """Immutable undirected weighted graph backed by a CSR adjacency.

    Parameters
    ----------
    adjacency : scipy.sparse matrix, shape (n, n)
        Symmetric nonnegative weights, zero diagonal.
    node_ids : list of str, optional
        Original external node identifiers, index-aligned with rows.
        Kept so predictions can be reported against the input ids.
    """

    def __init__(self, adjacency, node_ids=None):
        adj = sp.csr_matrix(adjacency, dtype=float)
        if adj.shape[0] != adj.shape[1]:
            raise ValueError(f"adjacency must be square, got shape {adj.shape}")
        if adj.nnz and adj.data.min() < 0:
            raise ValueError("edge weights must be nonnegative")
        if abs(adj - adj.T).max() > 1e-12 * max(1.0, abs(adj).max()):
            raise ValueError("adjacency must be symmetric")
        if adj.diagonal().any():
            raise ValueError("adjacency must not contain self-loops")
        adj.eliminate_zeros()
        self.adjacency = adj
        self.n = adj.shape[0]
        self.degrees = np.asarray(adj.sum(axis=1)).ravel()
        if node_ids is not None and len(node_ids) != self.n:
            raise ValueError("node_ids length must match node count")
        self.node_ids = list(node_ids) if node_ids is not None else None
        with np.errstate(divide="ignore"):
            inv_sqrt = 1.0 / np.sqrt(self.degrees)
        inv_sqrt[self.degrees == 0] = 0.0
        self._inv_sqrt_deg = inv_sqrt
        self._inv_sqrt_deg_loop = 1.0 / np.sqrt(self.degrees + 1.0)

    @property
    def num_edges(self):
        """Number of undirected edges."""
        return self.adjacency.nnz // 2

    def edge_array(self):
        """Edges as an (m, 3) array of (u, v, weight) with u < v."""
        coo = sp.triu(self.adjacency, k=1).tocoo()
        return np.column_stack([coo.row, coo.col, coo.data])

    def induced_subgraph(self, nodes):
        """Subgraph on the given (strictly increasing) node indices."""
        nodes = np.asarray(nodes, dtype=np.int64)
        sub = self.adjacency[nodes][:, nodes]
        ids = [self.node_ids[u] for u in nodes] if self.node_ids else None
        return Graph(sub, node_ids=ids)

    def __repr__(self):
        return f"Graph(n={self.n}, edges={self.num_edges})"


def graph_from_edges(n, sources, targets, weights=None, node_ids=None):
    """Build a graph from undirected edge endpoints.

    Duplicate edges (in either orientation) merge by summing weights.
    """
    src = np.asarray(sources, dtype=np.int64)
    dst = np.asarray(targets, dtype=np.int64)
    if src.shape != dst.shape:
        raise ValueError("sources and targets must have equal length")
    if weights is None:
        w = np.ones(src.shape[0])
    else:
        w = np.asarray(weights, dtype=float)
    if np.any(src == dst):
        raise ValueError("self-loops are not supported")
    rows = np.concatenate([src, dst])
    cols = np.concatenate([dst, src])
    data = np.concatenate([w, w])
    adj = sp.coo_matrix((data, (rows, cols)), shape=(n, n)).tocsr()
    adj.sum_duplicates()
    return Graph(adj, node_ids=node_ids)


def _check_values(g, v, name="v"):
    arr = np.asarray(v, dtype=float)
    if arr.shape[0] != g.n:
        raise ValueError(f"{name} must have {g.n} rows, got {arr.shape[0]}")
    return arr


def apply_normalized_adjacency(g, v):
    """Apply ``S = D^{-1/2} W D^{-1/2}`` to a vector or per-column matrix."""
    arr = _check_values(g, v)
    scale = g._inv_sqrt_deg if arr.ndim == 1 else g._inv_sqrt_deg[:, None]
    return scale * (g.adjacency @ (scale * arr))


def apply_normalized_laplacian(g, v):
    """Apply ``N = I - S``."""
    arr = _check_values(g, v)
    return arr - apply_normalized_adjacency(g, arr)


def apply_selfloop_adjacency(g, v):
    """Apply ``(D+I)^{-1/2} (W+I) (D+I)^{-1/2}``."""
    arr = _check_values(g, v)
    scale = g._inv_sqrt_deg_loop if arr.ndim == 1 else g._inv_sqrt_deg_loop[:, None]
    scaled = scale * arr
    return scale * (g.adjacency @ scaled + scaled)


def normalized_adjacency_dense(g):
    """Dense ``S``; intended for desk-scale graphs only."""
    scale = g._inv_sqrt_deg
    return scale[:, None] * g.adjacency.toarray() * scale[None, :]


def normalized_laplacian_dense(g):
    """Dense ``N = I - S``, exactly symmetric."""
    s = normalized_adjacency_dense(g)
    n_mat = np.eye(g.n) - s
    return (n_mat + n_mat.T) / 2.0


def laplacian_quadratic_form(g, v):
    """Edge-sum form of ``v^T N v``.

    Equals ``sum_{(u,w) in E} w_uw (v_u / sqrt(d_u) - v_w / sqrt(d_w))^2``.
    """
    arr = _check_values(g, v)
    scaled = g._inv_sqrt_deg * arr
    coo = sp.triu(g.adjacency, k=1).tocoo()
    return float(np.sum(coo.data * (scaled[coo.row] - scaled[coo.col]) ** 2))


def watts_strogatz(n, avg_degree, rewire_prob, seed):
    """Small-world ring-lattice graph with random rewiring.

    Each node connects to ``avg_degree / 2`` neighbors on each side of a
    ring; each edge is independently rewired with probability
    ``rewire_prob``, moving its far endpoint to a uniformly random target
    that is neither the origin node nor a current neighbor. The number of
    edges is preserved exactly and every node keeps the ``avg_degree / 2``
    edges it originates. Output is deterministic given the seed but not
    guaranteed connected.
    """
    if avg_degree % 2 != 0:
        raise ValueError("avg_degree must be even")
    if avg_degree >= n:
        raise ValueError("avg_degree must be smaller than the node count")
    if not 0.0 <= rewire_prob <= 1.0:
        raise ValueError("rewire_prob must lie in [0, 1]")
    rng = np.random.default_rng(seed)
    neighbors = [set() for _ in range(n)]
    for offset in range(1, avg_degree // 2 + 1):
        for u in range(n):
            v = (u + offset) % n
            neighbors[u].add(v)
            neighbors[v].add(u)
    for offset in range(1, avg_degree // 2 + 1):
        for u in range(n):
            v = (u + offset) % n
            if rng.random() >= rewire_prob:
                continue
            if len(neighbors[u]) >= n - 1:
                continue  # u already adjacent to everyone else
            w = int(rng.integers(n))
            while w == u or w in neighbors[u]:
                w = int(rng.integers(n))
            neighbors[u].discard(v)
            neighbors[v].discard(u)
            neighbors[u].add(w)
            neighbors[w].add(u)
    src, dst = [], []
    for u in range(n):
        for v in neighbors[u]:
            if u < v:
                src.append(u)
                dst.append(v)
    return graph_from_edges(n, src, dst)


class AttributeMatrix:
    """Per-node attribute values: feature columns followed by the outcome.

    The values form an ``n x (p+1)`` matrix whose first ``p`` columns are
    features and whose last column is the outcome.
    """

    def __init__(self, values, columns=None):
        vals = check_matrix(values, name="values")
        check_finite(vals, "attribute values")
        if vals.shape[1] < 1:
            raise ValueError("attribute matrix needs at least one column")
        if columns is not None and len(columns) != vals.shape[1]:
            raise ValueError("column names must match the number of columns")
        self.values = vals
        self.columns = list(columns) if columns is not None else None

    @property
    def n(self):
        return self.values.shape[0]

    @property
    def p(self):
        """Number of feature columns (total columns minus the outcome)."""
        return self.values.shape[1] - 1

    @property
    def features(self):
        return self.values[:, :-1]

    @property
    def outcome(self):
        return self.values[:, -1]

    def centered(self):
        """Copy with every column shifted to zero mean."""
        return AttributeMatrix(self.values - self.values.mean(axis=0), self.columns)

    def with_outcome_column(self, name):
        """Reorder columns so the named column becomes the outcome."""
        if self.columns is None:
            raise ValueError("attribute matrix has no column names")
        if name not in self.columns:
            raise ValueError(f"unknown outcome column {name!r}")
        idx = self.columns.index(name)
        order = [i for i in range(len(self.columns)) if i != idx] + [idx]
        return AttributeMatrix(self.values[:, order], [self.columns[i] for i in order])

    def __repr__(self):
        return f"AttributeMatrix(n={self.n}, p={self.p})"


def load_edge_list(path):
    """Read an undirected graph from a CSV of ``src,dst[,weight]`` rows.

    Node ids may be arbitrary strings; they are mapped to dense indices in
    first-appearance order and kept on ``Graph.node_ids``. Duplicate edges
    merge by summing weights; the weight defaults to 1.
    """
    id_map = {}
    src, dst, wts = [], [], []

    def intern(token):
        if token not in id_map:
            id_map[token] = len(id_map)
        return id_map[token]

    with open(path, newline="", encoding="utf-8") as fh:
        for lineno, row in enumerate(csv.reader(fh), start=1):
            if not row or (len(row) == 1 and not row[0].strip()):
                continue
            if len(row) not in (2, 3):
                raise ValueError(f"{path}:{lineno}: expected 2 or 3 fields, got {len(row)}")
            a, b = row[0].strip(), row[1].strip()
            if a == b:
                raise ValueError(f"{path}:{lineno}: self-loop on node {a!r}")
            if len(row) == 3:
                try:
                    w = float(row[2])
                except ValueError:
                    raise ValueError(f"{path}:{lineno}: non-numeric weight {row[2]!r}") from None
            else:
                w = 1.0
            src.append(intern(a))
            dst.append(intern(b))
            wts.append(w)
    if not src:
        raise ValueError(f"{path}: no edges found")
    node_ids = list(id_map)
    return graph_from_edges(len(node_ids), src, dst, wts, node_ids=node_ids)


def load_attributes(path, g):
    """Read node attributes from a headered CSV of ``node_id,attr,...`` rows.

    Every node of the graph must appear exactly once and every cell must be
    numeric; columns are centered to zero mean. Rows are reordered to match
    the graph's node indexing.
    """
    if g.node_ids is None:
        id_map = {str(u): u for u in range(g.n)}
    else:
        id_map = {tok: u for u, tok in enumerate(g.node_ids)}
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise ValueError(f"{path}: empty attribute file") from None
        columns = [c.strip() for c in header[1:]]
        if not columns:
            raise ValueError(f"{path}: attribute file has no attribute columns")
        values = np.full((g.n, len(columns)), np.nan)
        seen = np.zeros(g.n, dtype=bool)
        for lineno, row in enumerate(reader, start=2):
            if not row or (len(row) == 1 and not row[0].strip()):
                continue
            if len(row) != len(columns) + 1:
                raise ValueError(
                    f"{path}:{lineno}: expected {len(columns) + 1} fields, got {len(row)}"
                )
            token = row[0].strip()
            if token not in id_map:
                raise ValueError(f"{path}:{lineno}: unknown node id {token!r}")
            u = id_map[token]
            for j, cell in enumerate(row[1:]):
                cell = cell.strip()
                if not cell:
                    raise ValueError(f"{path}:{lineno}: missing value in column {columns[j]!r}")
                try:
                    values[u, j] = float(cell)
                except ValueError:
                    raise ValueError(
                        f"{path}:{lineno}: non-numeric value {cell!r} in column {columns[j]!r}"
                    ) from None
            seen[u] = True
    if not seen.all():
        missing = int(np.flatnonzero(~seen)[0])
        label = g.node_ids[missing] if g.node_ids else str(missing)
        raise ValueError(f"{path}: no attribute row for node {label!r}")
    return AttributeMatrix(values, columns).centered()

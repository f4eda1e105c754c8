"""
Random geometric graphs and Metropolis-type weight matrices.

A graph is generated once per experiment and then only read, so
``WeightedGraph`` is a frozen dataclass holding dense numpy arrays.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from functools import cached_property
from pathlib import Path

import numpy as np


GRAPH_STREAM = 1


class GraphGenerationError(RuntimeError):
    pass


class WeightError(RuntimeError):
    pass


@dataclass(frozen=True)
class WeightedGraph:
    """Undirected simple graph on ``n`` nodes with optional weight matrix.

    Attributes
    ----------
    n : int
        Number of nodes.
    coords : ndarray, shape (n, 2)
        Node positions in the unit square.
    edges : ndarray, shape (m, 2)
        Edge list with ``i < j`` on every row, sorted lexicographically.
    W : ndarray, shape (n, n) or None
        Symmetric stochastic weight matrix, ``None`` until weights are set.
    attempts : int
        Number of coordinate draws used by the generator (1 = first try).
    seed : int or None
        Seed the graph was generated from.
    """

    n: int
    coords: np.ndarray
    edges: np.ndarray
    W: np.ndarray | None = None
    attempts: int = 1
    seed: int | None = None
    radius: float | None = None
    _adj: np.ndarray = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        edges = np.asarray(self.edges, dtype=np.int64).reshape(-1, 2)
        if np.any(edges[:, 0] == edges[:, 1]):
            raise ValueError("self-loops are not allowed")
        edges = np.sort(edges, axis=1)
        edges = np.unique(edges, axis=0)
        if edges.size and (edges.min() < 0 or edges.max() >= self.n):
            raise ValueError("edge index out of range")
        adj = np.zeros((self.n, self.n), dtype=bool)
        adj[edges[:, 0], edges[:, 1]] = True
        adj[edges[:, 1], edges[:, 0]] = True
        object.__setattr__(self, "edges", edges)
        object.__setattr__(self, "_adj", adj)

    @property
    def m(self) -> int:
        return len(self.edges)

    @property
    def adjacency(self) -> np.ndarray:
        return self._adj

    @property
    def degrees(self) -> np.ndarray:
        return self._adj.sum(axis=1)

    def neighbors(self, i: int) -> np.ndarray:
        """Neighbors of ``i`` in ascending index order."""
        return np.flatnonzero(self._adj[i])

    @property
    def w_min(self) -> float:
        return float(np.min(np.diag(self._require_W())))

    @property
    def w_max(self) -> float:
        return float(np.max(np.diag(self._require_W())))

    def _require_W(self) -> np.ndarray:
        if self.W is None:
            raise WeightError("weight matrix not set; call metropolis_weights first")
        return self.W

    @cached_property
    def neighbor_table(self) -> tuple[np.ndarray, np.ndarray]:
        """Padded neighbor indices and weights, ascending neighbor order.

        Row ``i`` lists the neighbors of ``i`` followed by padding entries
        that point at ``i`` itself with weight zero, so that
        ``sum_k w[i, k] * (x_i - x[idx[i, k]])`` is the neighbor sum.
        """
        W = self._require_W()
        dmax = int(self.degrees.max()) if self.n else 0
        idx = np.repeat(np.arange(self.n)[:, None], max(dmax, 1), axis=1)
        w = np.zeros(idx.shape)
        for i in range(self.n):
            nb = self.neighbors(i)
            idx[i, :len(nb)] = nb
            w[i, :len(nb)] = W[i, nb]
        return idx, w

    def summary(self) -> dict:
        out = {"n": self.n, "m": self.m, "attempts": self.attempts,
               "seed": self.seed, "radius": self.radius,
               "max_degree": int(self.degrees.max()) if self.n else 0}
        if self.W is not None:
            out["w_min"] = self.w_min
            out["w_max"] = self.w_max
        return out


def default_radius(n: int) -> float:
    """Connectivity-threshold radius ``sqrt(ln n / n)``."""
    return float(np.sqrt(np.log(n) / n))


def _rgg_edges(coords: np.ndarray, radius: float) -> np.ndarray:
    diff = coords[:, None, :] - coords[None, :, :]
    dist = np.sqrt((diff ** 2).sum(axis=-1))
    i, j = np.nonzero(np.triu(dist <= radius, k=1))
    return np.column_stack([i, j])


def generate_rgg(n: int, radius: float, seed: int, max_attempts: int = 1000) -> WeightedGraph:
    """Draw a connected random geometric graph in the unit square.

    Coordinates are i.i.d. uniform; ``{i, j}`` is an edge iff the Euclidean
    distance is at most ``radius``. Disconnected draws are discarded and the
    coordinates redrawn from the sub-seed ``(seed, attempt)``, recorded as
    ``attempts`` on the result.
    """
    if n < 2:
        raise ValueError("n must be >= 2")
    # radius 0 is accepted and simply never connects; it ends in the retry cap
    if not 0 <= radius <= np.sqrt(2):
        raise ValueError("radius must lie in [0, sqrt(2)]")
    for attempt in range(max_attempts):
        rng = np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(GRAPH_STREAM, attempt)))
        coords = rng.uniform(0.0, 1.0, size=(n, 2))
        g = WeightedGraph(n=n, coords=coords, edges=_rgg_edges(coords, radius),
                          attempts=attempt + 1, seed=seed, radius=radius)
        if is_connected(g):
            return g
    raise GraphGenerationError(
        f"could not generate connected graph (n={n}, radius={radius}, "
        f"{max_attempts} attempts)")


def is_connected(g: WeightedGraph) -> bool:
    seen = np.zeros(g.n, dtype=bool)
    seen[0] = True
    stack = [0]
    adj = g.adjacency
    while stack:
        i = stack.pop()
        new = np.flatnonzero(adj[i] & ~seen)
        seen[new] = True
        stack.extend(new.tolist())
    return bool(seen.all())


def metropolis_weights(g: WeightedGraph) -> WeightedGraph:
    """Return a copy of ``g`` with ``w_ij = 1 / (2 (1 + max(d_i, d_j)))``.

    Off-edge entries are zero and the diagonal absorbs the remainder so
    every row sums to one.
    """
    if not is_connected(g):
        raise WeightError("metropolis weights require a connected graph")
    d = g.degrees
    W = np.zeros((g.n, g.n))
    i, j = g.edges[:, 0], g.edges[:, 1]
    w = 1.0 / (2.0 * (1.0 + np.maximum(d[i], d[j])))
    W[i, j] = w
    W[j, i] = w
    np.fill_diagonal(W, 1.0 - W.sum(axis=1))
    diag = np.diag(W)
    if np.any(diag <= 0) or np.any(diag >= 1):
        raise WeightError("diagonal weight outside (0, 1)")
    return replace(g, W=W)


def spectral_diagnostics(g: WeightedGraph) -> dict:
    """Eigenvalues of ``W`` (descending) and the second-largest modulus."""
    W = g._require_W()
    try:
        lam = np.linalg.eigvalsh(W)[::-1]
    except np.linalg.LinAlgError as exc:
        raise WeightError(f"eigen-solver failed: {exc}") from exc
    second = float(np.max(np.abs(lam[1:]))) if g.n > 1 else 0.0
    return {"eigenvalues": lam, "lambda_1": float(lam[0]), "second_modulus": second,
            "ok": bool(abs(lam[0] - 1.0) <= 1e-9 and second < 1.0)}


def write_edge_list(g: WeightedGraph, path: str | Path) -> None:
    """Write ``i j w_ij`` lines (0-based, 17 significant digits)."""
    W = g._require_W()
    lines = [f"{i} {j} {W[i, j]:.17g}" for i, j in g.edges]
    Path(path).write_text("\n".join(lines) + ("\n" if lines else ""))


def read_edge_list(path: str | Path, n: int) -> WeightedGraph:
    """Rebuild a weighted graph (without coordinates) from an edge-list file."""
    rows = [ln.split() for ln in Path(path).read_text().splitlines() if ln.strip()]
    edges = np.array([[int(r[0]), int(r[1])] for r in rows], dtype=np.int64).reshape(-1, 2)
    W = np.zeros((n, n))
    for (i, j), r in zip(edges, rows):
        W[i, j] = W[j, i] = float(r[2])
    np.fill_diagonal(W, 1.0 - W.sum(axis=1))
    return WeightedGraph(n=n, coords=np.full((n, 2), np.nan), edges=edges, W=W)

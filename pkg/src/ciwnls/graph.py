"""Inter-agent communication graphs: Laplacian spectrum and random geometric generation.

Agents are indexed 0..N-1 in the Python API.  The JSON interchange format
uses 1-based agent indices; conversion happens only in `graph_to_json` /
`graph_from_json`.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

# lambda_2 above this counts as connected; separates true zero modes from
# eigensolver round-off at desk scale
CONNECTIVITY_TOL = 1e-8

RGG_MAX_REDRAWS = 10_000


class InvalidGraphError(ValueError):
    """Raised for self-loops, duplicate edges, or out-of-range endpoints."""


class GraphGenerationError(RuntimeError):
    """Raised when the random geometric generator exhausts its redraw budget."""

    def __init__(self, attempts: int, n_agents: int, radius: float):
        self.attempts = attempts
        super().__init__(
            f"no connected geometric graph with n_agents={n_agents}, "
            f"radius={radius} after {attempts} redraws"
        )


@dataclass(frozen=True)
class NetworkGraph:
    """Undirected simple graph with cached Laplacian and Fiedler value.

    Immutable after construction; safe to share across concurrent trials.
    """

    n_agents: int
    edges: frozenset[tuple[int, int]]          # pairs (n, l) with n < l, 0-based
    degrees: np.ndarray = field(repr=False)    # (N,) int
    laplacian: np.ndarray = field(repr=False)  # (N, N) float, L = D - A
    fiedler: float
    coords: np.ndarray | None = field(default=None, repr=False)  # (N, 2) for RGGs

    def neighbor_lists(self) -> list[np.ndarray]:
        """Sorted neighbor index array for every agent."""
        nbrs: list[list[int]] = [[] for _ in range(self.n_agents)]
        for (n, l) in self.edges:
            nbrs[n].append(l)
            nbrs[l].append(n)
        return [np.array(sorted(v), dtype=int) for v in nbrs]

    @property
    def is_connected(self) -> bool:
        return self.fiedler > CONNECTIVITY_TOL


def build_graph(n_agents: int, edges, coords=None) -> NetworkGraph:
    """Build a NetworkGraph from an edge set, computing L = D - A and lambda_2.

    edges: iterable of agent pairs (0-based).  Self-loops, duplicates and
    out-of-range endpoints raise InvalidGraphError.
    """
    if n_agents < 1:
        raise InvalidGraphError(f"n_agents must be positive, got {n_agents}")
    canon: set[tuple[int, int]] = set()
    for (n, l) in edges:
        n, l = int(n), int(l)
        if n == l:
            raise InvalidGraphError(f"self-loop at agent {n}")
        if not (0 <= n < n_agents and 0 <= l < n_agents):
            raise InvalidGraphError(f"edge ({n},{l}) out of range for N={n_agents}")
        key = (n, l) if n < l else (l, n)
        if key in canon:
            raise InvalidGraphError(f"duplicate edge {key}")
        canon.add(key)

    adj = np.zeros((n_agents, n_agents))
    for (n, l) in canon:
        adj[n, l] = adj[l, n] = 1.0
    degrees = adj.sum(axis=1).astype(int)
    laplacian = np.diag(degrees.astype(float)) - adj
    fiedler = _fiedler_of_laplacian(laplacian)
    return NetworkGraph(
        n_agents=n_agents,
        edges=frozenset(canon),
        degrees=degrees,
        laplacian=laplacian,
        fiedler=fiedler,
        coords=None if coords is None else np.asarray(coords, dtype=float),
    )


def _fiedler_of_laplacian(laplacian: np.ndarray) -> float:
    # full symmetric eigendecomposition: N is desk-scale, determinism matters
    if laplacian.shape[0] < 2:
        return 0.0
    eigvals = np.linalg.eigvalsh(laplacian)
    return float(max(eigvals[1], 0.0))


def fiedler_value(graph: NetworkGraph) -> float:
    """Second-smallest Laplacian eigenvalue (clamped at 0)."""
    return graph.fiedler


def neighbors(graph: NetworkGraph, n: int) -> set[int]:
    """Neighborhood of agent n (0-based)."""
    if not (0 <= n < graph.n_agents):
        raise IndexError(f"agent index {n} out of range for N={graph.n_agents}")
    out = set()
    for (a, b) in graph.edges:
        if a == n:
            out.add(b)
        elif b == n:
            out.add(a)
    return out


def generate_random_geometric(
    n_agents: int,
    radius: float,
    rng: np.random.Generator,
    max_redraws: int = RGG_MAX_REDRAWS,
) -> NetworkGraph:
    """Connected random geometric graph on the unit square.

    Samples n_agents points uniformly on [0,1]^2, links pairs at Euclidean
    distance <= radius, and redraws the whole deployment until the graph is
    connected (lambda_2 > CONNECTIVITY_TOL).  Deterministic for a fixed rng
    state.  Raises GraphGenerationError when the redraw budget runs out.
    """
    if radius <= 0:
        raise InvalidGraphError(f"radius must be positive, got {radius}")
    for attempt in range(1, max_redraws + 1):
        pts = rng.uniform(0.0, 1.0, size=(n_agents, 2))
        diff = pts[:, None, :] - pts[None, :, :]
        dist = np.sqrt((diff**2).sum(axis=2))
        edges = [
            (i, j)
            for i in range(n_agents)
            for j in range(i + 1, n_agents)
            if dist[i, j] <= radius
        ]
        g = build_graph(n_agents, edges, coords=pts)
        if g.is_connected or n_agents == 1:
            return g
    raise GraphGenerationError(max_redraws, n_agents, radius)


def graph_to_json(graph: NetworkGraph) -> str:
    """Serialize to the interchange format (1-based indices, n < l pairs)."""
    obj = {
        "n_agents": graph.n_agents,
        "edges": sorted([n + 1, l + 1] for (n, l) in graph.edges),
    }
    if graph.coords is not None:
        obj["coords"] = [[float(x), float(y)] for (x, y) in graph.coords]
    return json.dumps(obj, indent=2)


def graph_from_json(text: str) -> NetworkGraph:
    """Parse the interchange format produced by graph_to_json."""
    obj = json.loads(text)
    edges = [(int(n) - 1, int(l) - 1) for (n, l) in obj["edges"]]
    return build_graph(int(obj["n_agents"]), edges, coords=obj.get("coords"))

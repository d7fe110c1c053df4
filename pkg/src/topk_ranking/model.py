"""
BTL Model Module

Ground-truth score vectors, Erdős–Rényi comparison graphs and simulated
pairwise-comparison data under the Bradley-Terry-Luce model.

Usage:
    from topk_ranking.model import uniform_scores, generate_er_graph, sample_comparisons

    scores = uniform_scores(200, seed=1)
    graph = generate_er_graph(200, 0.25, seed=2)
    data = sample_comparisons(graph, scores, L=20, seed=3)

Seeds are anything numpy.random.default_rng accepts (int, SeedSequence,
Generator). One root SeedSequence per experiment is split with
`spawn_seeds` so every trial draws from its own stream.
"""

import logging
import numbers
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, List, Optional, Sequence, Tuple, Union

import numpy as np
from scipy.sparse import coo_matrix
from scipy.sparse.csgraph import connected_components

from topk_ranking.errors import (
    DataFormatError,
    DimensionMismatch,
    InvalidArgument,
    NonPositiveScore,
    TooFewItems,
    check_k,
)

logger = logging.getLogger(__name__)

SeedLike = Union[None, int, np.random.SeedSequence, np.random.Generator]


def _frozen(array: np.ndarray) -> np.ndarray:
    array.setflags(write=False)
    return array


def spawn_seeds(root: Union[int, np.random.SeedSequence], count: int) -> List[np.random.SeedSequence]:
    """Split a root seed into `count` independent child seeds."""
    if not isinstance(root, np.random.SeedSequence):
        root = np.random.SeedSequence(root)
    return root.spawn(count)


# ---------------------------------------------------------------------------
# Scores
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class ScoreVector:
    """Latent preference scores w (theta = log w is derived)."""

    w: np.ndarray

    def __post_init__(self):
        w = np.array(self.w, dtype=float).reshape(-1)
        if w.size < 2:
            raise TooFewItems(f"Need at least 2 items, got {w.size}", {"n": int(w.size)})
        if not np.all(np.isfinite(w)) or np.any(w <= 0):
            bad = [int(i) for i in np.flatnonzero(~(w > 0) | ~np.isfinite(w))]
            raise NonPositiveScore(f"Scores must be finite and > 0; offending indices {bad[:10]}", {"indices": bad})
        object.__setattr__(self, "w", _frozen(w))

    @property
    def n(self) -> int:
        return int(self.w.size)

    @property
    def theta(self) -> np.ndarray:
        return np.log(self.w)

    @property
    def w_min(self) -> float:
        return float(self.w.min())

    @property
    def w_max(self) -> float:
        return float(self.w.max())

    @property
    def theta_min(self) -> float:
        return float(np.log(self.w_min))

    @property
    def theta_max(self) -> float:
        return float(np.log(self.w_max))

    @property
    def kappa(self) -> float:
        """Condition number w_max / w_min."""
        return self.w_max / self.w_min

    @property
    def theta_bar(self) -> float:
        return float(self.theta.mean())

    @property
    def pi_star(self) -> np.ndarray:
        """Normalized score vector w / sum(w)."""
        return self.w / self.w.sum()

    @property
    def centered_exp_theta(self) -> np.ndarray:
        """exp(theta - mean(theta)), the MLE comparison target."""
        return np.exp(self.theta - self.theta_bar)

    def sorted_desc(self) -> np.ndarray:
        return np.sort(self.w)[::-1]

    def true_topk(self, K: int) -> frozenset:
        """Indices of the K largest scores (ties go to the smaller index)."""
        check_k(K, self.n)
        return frozenset(int(i) for i in descending_order(self.w)[:K])


def descending_order(values: np.ndarray) -> np.ndarray:
    """Permutation sorting values descending, ties by ascending index."""
    values = np.asarray(values, dtype=float)
    return np.lexsort((np.arange(values.size), -values))


def make_scores(w: Sequence[float]) -> ScoreVector:
    """Build a ScoreVector from explicit positive scores."""
    return ScoreVector(np.asarray(w, dtype=float))


def uniform_scores(n: int, seed: SeedLike = None, low: float = 0.5, high: float = 1.0) -> ScoreVector:
    """Scores drawn independently and uniformly on [low, high]."""
    if not 0 < low <= high:
        raise InvalidArgument(f"Need 0 < low <= high, got low={low}, high={high}")
    rng = np.random.default_rng(seed)
    return ScoreVector(rng.uniform(low, high, size=n))


def two_level_scores(n: int, K: int, delta: float) -> ScoreVector:
    """w_i = 1 for the first K items and 1 - delta for the rest."""
    check_k(K, n)
    if not 0 <= delta < 1:
        raise InvalidArgument(f"delta must lie in [0, 1), got {delta}")
    w = np.full(n, 1.0 - delta)
    w[:K] = 1.0
    return ScoreVector(w)


# ---------------------------------------------------------------------------
# Graph
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class ComparisonGraph:
    """Undirected comparison graph stored as a sorted (i < j) edge list."""

    n: int
    edges: np.ndarray
    adjacency: Tuple[Tuple[int, ...], ...] = field(init=False, repr=False, compare=False)
    degrees: np.ndarray = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        if self.n < 2:
            raise TooFewItems(f"Need at least 2 items, got {self.n}", {"n": self.n})
        edges = np.asarray(self.edges, dtype=np.int64).reshape(-1, 2)
        if edges.size:
            if edges.min() < 0 or edges.max() >= self.n:
                raise InvalidArgument(f"Edge endpoints must lie in [0, {self.n})")
            if np.any(edges[:, 0] == edges[:, 1]):
                raise InvalidArgument("Self-loops are not allowed")
            edges = np.sort(edges, axis=1)
            edges = edges[np.lexsort((edges[:, 1], edges[:, 0]))]
            if np.any(np.all(edges[1:] == edges[:-1], axis=1)):
                raise InvalidArgument("Duplicate edges are not allowed")

        neighbors: List[List[int]] = [[] for _ in range(self.n)]
        for i, j in edges:
            neighbors[i].append(int(j))
            neighbors[j].append(int(i))
        degrees = np.array([len(nb) for nb in neighbors], dtype=np.int64)

        object.__setattr__(self, "edges", _frozen(edges))
        object.__setattr__(self, "adjacency", tuple(tuple(sorted(nb)) for nb in neighbors))
        object.__setattr__(self, "degrees", _frozen(degrees))

    @classmethod
    def from_edges(cls, n: int, edges: Iterable[Tuple[int, int]]) -> "ComparisonGraph":
        return cls(n, np.array(list(edges), dtype=np.int64).reshape(-1, 2))

    @property
    def num_edges(self) -> int:
        return int(self.edges.shape[0])

    @property
    def d_min(self) -> int:
        return int(self.degrees.min())

    @property
    def d_max(self) -> int:
        return int(self.degrees.max())

    @property
    def edge_density(self) -> float:
        """Observed edge probability 2|E| / (n(n-1))."""
        return 2.0 * self.num_edges / (self.n * (self.n - 1))

    def adjacency_matrix(self) -> np.ndarray:
        A = np.zeros((self.n, self.n))
        if self.num_edges:
            A[self.edges[:, 0], self.edges[:, 1]] = 1.0
            A[self.edges[:, 1], self.edges[:, 0]] = 1.0
        return A

    def num_components(self) -> int:
        rows, cols = self.edges[:, 0], self.edges[:, 1]
        sparse = coo_matrix((np.ones(rows.size), (rows, cols)), shape=(self.n, self.n))
        count, _ = connected_components(sparse, directed=False)
        return int(count)

    def is_connected(self) -> bool:
        return self.num_components() == 1


def complete_graph(n: int) -> ComparisonGraph:
    rows, cols = np.triu_indices(n, 1)
    return ComparisonGraph(n, np.column_stack((rows, cols)))


def generate_er_graph(n: int, p: float, seed: SeedLike = None) -> ComparisonGraph:
    """Erdős–Rényi G(n, p): every pair included independently with probability p."""
    if not isinstance(n, numbers.Integral) or n < 2:
        raise TooFewItems(f"Need n >= 2, got {n}", {"n": n})
    if not 0.0 <= p <= 1.0:
        raise InvalidArgument(f"p must lie in [0, 1], got {p}")
    rng = np.random.default_rng(seed)
    rows, cols = np.triu_indices(n, 1)
    keep = rng.random(rows.size) < p
    graph = ComparisonGraph(int(n), np.column_stack((rows[keep], cols[keep])))
    logger.debug(f"Generated G({n}, {p}) with {graph.num_edges} edges")
    return graph


def degree_event_holds(graph: ComparisonGraph, p: float) -> bool:
    """Degree concentration event np/2 <= d_min <= d_max <= 3np/2."""
    np_ = graph.n * p
    return np_ / 2 <= graph.d_min and graph.d_max <= 1.5 * np_


# ---------------------------------------------------------------------------
# Comparison data
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class ComparisonData:
    """
    Sufficient statistics of the comparisons on a graph.

    `y` is aligned with `graph.edges`: for edge (i, j) with i < j, y[e] is
    y_{i,j}, the fraction of comparisons won by j. y_{j,i} = 1 - y_{i,j}.
    `wins` holds the integer counts behind y when the data were sampled
    (L is then the per-edge comparison count); population data have
    L = None and wins = None.
    """

    graph: ComparisonGraph
    y: np.ndarray
    L: Optional[int] = None
    wins: Optional[np.ndarray] = None

    def __post_init__(self):
        y = np.array(self.y, dtype=float).reshape(-1)
        if y.size != self.graph.num_edges:
            raise DimensionMismatch(
                f"Expected {self.graph.num_edges} edge frequencies, got {y.size}",
                {"expected": self.graph.num_edges, "got": int(y.size)},
            )
        if np.any((y < 0) | (y > 1)) or not np.all(np.isfinite(y)):
            raise InvalidArgument("Frequencies must lie in [0, 1]")
        if self.wins is not None:
            if self.L is None or self.L < 1:
                raise InvalidArgument(f"L must be a positive integer when counts are given, got {self.L}")
            wins = np.array(self.wins, dtype=np.int64).reshape(-1)
            if wins.size != y.size or np.any((wins < 0) | (wins > self.L)):
                raise InvalidArgument("Win counts must be aligned with edges and lie in [0, L]")
            object.__setattr__(self, "wins", _frozen(wins))
        object.__setattr__(self, "y", _frozen(y))

    @property
    def n(self) -> int:
        return self.graph.n

    def frequency(self, i: int, j: int) -> float:
        """y_{i,j}: fraction of the (i, j) comparisons won by j."""
        a, b = (i, j) if i < j else (j, i)
        hits = np.flatnonzero((self.graph.edges[:, 0] == a) & (self.graph.edges[:, 1] == b))
        if hits.size == 0:
            raise InvalidArgument(f"({i}, {j}) is not an edge")
        value = float(self.y[hits[0]])
        return value if i < j else 1.0 - value

    def frequency_matrix(self) -> np.ndarray:
        """Dense Y with Y[i, j] = y_{i,j} on edges and zero elsewhere."""
        Y = np.zeros((self.n, self.n))
        if self.graph.num_edges:
            i, j = self.graph.edges[:, 0], self.graph.edges[:, 1]
            Y[i, j] = self.y
            Y[j, i] = 1.0 - self.y
        return Y


def _edge_probabilities(graph: ComparisonGraph, scores: ScoreVector) -> np.ndarray:
    if graph.n != scores.n:
        raise DimensionMismatch(
            f"Graph has {graph.n} items but scores have {scores.n}",
            {"graph_n": graph.n, "scores_n": scores.n},
        )
    i, j = graph.edges[:, 0], graph.edges[:, 1]
    return scores.w[j] / (scores.w[i] + scores.w[j])


def sample_comparisons(graph: ComparisonGraph, scores: ScoreVector, L: int, seed: SeedLike = None) -> ComparisonData:
    """
    Draw L independent BTL comparisons on every edge.

    Edges are visited in sorted order from a single generator, so the result
    is a pure function of (graph, scores, L, seed).
    """
    if not isinstance(L, numbers.Integral) or L < 1:
        raise InvalidArgument(f"L must be a positive integer, got {L!r}")
    probabilities = _edge_probabilities(graph, scores)
    rng = np.random.default_rng(seed)
    wins = rng.binomial(int(L), probabilities)
    return ComparisonData(graph, wins / L, L=int(L), wins=wins)


def population_frequencies(graph: ComparisonGraph, scores: ScoreVector) -> ComparisonData:
    """The L -> infinity limit y_{i,j} = w_j / (w_i + w_j)."""
    return ComparisonData(graph, _edge_probabilities(graph, scores))


# ---------------------------------------------------------------------------
# Serialization
# ---------------------------------------------------------------------------


def dumps_comparisons(data: ComparisonData) -> str:
    """
    Text form: header `n L`, then one line per directed pair `i j y_ij count`.

    `count` is the number of the L comparisons won by j, so y_ij = count / L
    is recovered exactly.
    """
    if data.wins is None or data.L is None:
        raise InvalidArgument("Only sampled data (with integer counts) can be serialized")
    lines = [f"{data.n} {data.L}"]
    for (i, j), wins in zip(data.graph.edges, data.wins):
        lines.append(f"{i} {j} {float(wins) / data.L!r} {wins}")
        lines.append(f"{j} {i} {float(data.L - wins) / data.L!r} {data.L - wins}")
    return "\n".join(lines) + "\n"


def loads_comparisons(text: str) -> ComparisonData:
    """Parse the format written by dumps_comparisons."""
    rows = [line.split() for line in text.splitlines() if line.strip() and not line.lstrip().startswith("#")]
    if not rows or len(rows[0]) != 2:
        raise DataFormatError("Missing `n L` header")
    try:
        n, L = int(rows[0][0]), int(rows[0][1])
    except ValueError as e:
        raise DataFormatError(f"Bad header: {e}")
    if L < 1:
        raise DataFormatError(f"L must be positive, got {L}")

    counts = {}
    for lineno, row in enumerate(rows[1:], start=2):
        if len(row) != 4:
            raise DataFormatError(f"Line {lineno}: expected `i j y_ij count`, got {' '.join(row)!r}")
        try:
            i, j, count = int(row[0]), int(row[1]), int(row[3])
        except ValueError as e:
            raise DataFormatError(f"Line {lineno}: {e}")
        if not (0 <= i < n and 0 <= j < n) or i == j:
            raise DataFormatError(f"Line {lineno}: bad pair ({i}, {j}) for n={n}")
        if not 0 <= count <= L:
            raise DataFormatError(f"Line {lineno}: count {count} outside [0, {L}]")
        if (i, j) in counts:
            raise DataFormatError(f"Line {lineno}: duplicate pair ({i}, {j})")
        counts[(i, j)] = count

    edges = sorted({(min(i, j), max(i, j)) for i, j in counts})
    wins = []
    for i, j in edges:
        forward, backward = counts.get((i, j)), counts.get((j, i))
        if forward is None or backward is None:
            raise DataFormatError(f"Pair ({i}, {j}) is missing one orientation")
        if forward + backward != L:
            raise DataFormatError(f"Counts on ({i}, {j}) sum to {forward + backward}, expected {L}")
        wins.append(forward)

    graph = ComparisonGraph.from_edges(n, edges)
    wins_arr = np.array(wins, dtype=np.int64)
    return ComparisonData(graph, wins_arr / L, L=L, wins=wins_arr)


def save_comparisons(data: ComparisonData, path: Union[str, Path]):
    Path(path).write_text(dumps_comparisons(data))
    logger.info(f"Wrote {data.graph.num_edges} edges (L={data.L}) to {path}")


def load_comparisons(path: Union[str, Path]) -> ComparisonData:
    try:
        text = Path(path).read_text()
    except OSError as e:
        raise DataFormatError(f"Cannot read comparison file {path}: {e}")
    return loads_comparisons(text)

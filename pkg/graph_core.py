"""
Core graph types for the Induced Ramsey Workbench
Dense bitmap graphs, bipartite pairs, blowups, edge colorings and embeddings
"""

from collections import deque
from dataclasses import dataclass, field
from fractions import Fraction
from functools import cached_property
from typing import (
    Callable,
    Dict,
    Iterable,
    Iterator,
    List,
    Mapping,
    Optional,
    Sequence,
    Tuple,
    Union,
)

import networkx as nx

from errors import BudgetExceededError, InvalidInputError
from models import (
    BlowupModel,
    BlowupVerdict,
    ColoringModel,
    GraphModel,
    parse_rational,
)
from settings import BLOWUP_SEARCH_CAP, get_logger

logger = get_logger("graph_core")

Edge = Tuple[int, int]
Number = Union[int, float, str, Fraction]
GadgetProvider = Callable[[int, int, int, int], Sequence[int]]


# Bit helpers
def iter_bits(mask: int) -> Iterator[int]:
    """Indices of set bits, ascending"""
    while mask:
        low = mask & -mask
        yield low.bit_length() - 1
        mask ^= low


def popcount(mask: int) -> int:
    return mask.bit_count()


def lowest_bit(mask: int) -> int:
    """Index of the lowest set bit; -1 for an empty mask"""
    return (mask & -mask).bit_length() - 1


def mask_of(vertices: Iterable[int]) -> int:
    mask = 0
    for v in vertices:
        mask |= 1 << v
    return mask


def to_fraction(value: Number) -> Fraction:
    """Exact rational from an int, decimal float, string or Fraction"""
    try:
        return parse_rational(value)
    except ValueError as e:
        raise InvalidInputError(str(e)) from e


def edge_key(u: int, v: int) -> str:
    a, b = (u, v) if u < v else (v, u)
    return f"{a}-{b}"


def parse_edge_key(key: str) -> Edge:
    try:
        left, right = key.split("-")
        u, v = int(left), int(right)
    except ValueError as e:
        raise InvalidInputError(f"bad edge key {key!r}, expected 'u-v'") from e
    return (u, v) if u < v else (v, u)


class Graph:
    """Simple undirected graph on 0..n-1 with one adjacency bitmap per vertex"""

    __slots__ = ("n", "adj", "edge_count")

    def __init__(self, n: int, adj: Sequence[int]):
        # Trusted constructor; build_graph and from_adjacency validate
        self.n = n
        self.adj: Tuple[int, ...] = tuple(adj)
        self.edge_count = sum(row.bit_count() for row in self.adj) // 2

    @classmethod
    def from_adjacency(cls, adj: Sequence[int]) -> "Graph":
        n = len(adj)
        full = (1 << n) - 1
        for v, row in enumerate(adj):
            if row < 0 or row & ~full:
                raise InvalidInputError(f"adjacency row {v} references a vertex >= {n}")
            if row >> v & 1:
                raise InvalidInputError(f"self-loop at vertex {v}", {"pair": [v, v]})
            for u in iter_bits(row):
                if not adj[u] >> v & 1:
                    raise InvalidInputError(
                        f"adjacency is not symmetric on {u}-{v}", {"pair": [u, v]}
                    )
        return cls(n, adj)

    @property
    def vertex_mask(self) -> int:
        return (1 << self.n) - 1

    def neighbors(self, v: int) -> int:
        return self.adj[v]

    def has_edge(self, u: int, v: int) -> bool:
        return bool(self.adj[u] >> v & 1)

    def degree(self, v: int) -> int:
        return self.adj[v].bit_count()

    @property
    def max_degree(self) -> int:
        return max((row.bit_count() for row in self.adj), default=0)

    def degree_into(self, v: int, mask: int) -> int:
        return (self.adj[v] & mask).bit_count()

    def edges(self) -> List[Edge]:
        """Edges (u, v) with u < v in lexicographic order"""
        out = []
        for u, row in enumerate(self.adj):
            for v in iter_bits(row >> (u + 1)):
                out.append((u, u + 1 + v))
        return out

    def with_edges(self, edges: Iterable[Edge]) -> "Graph":
        """Spanning subgraph keeping only the given edges of this graph"""
        adj = [0] * self.n
        for u, v in edges:
            if not self.has_edge(u, v):
                raise InvalidInputError(f"{u}-{v} is not an edge of the graph")
            adj[u] |= 1 << v
            adj[v] |= 1 << u
        return Graph(self.n, adj)

    def to_networkx(self) -> nx.Graph:
        g = nx.Graph()
        g.add_nodes_from(range(self.n))
        g.add_edges_from(self.edges())
        return g

    @classmethod
    def from_networkx(cls, g: nx.Graph) -> "Graph":
        index = {node: i for i, node in enumerate(sorted(g.nodes()))}
        return build_graph(len(index), [(index[u], index[v]) for u, v in g.edges()])

    def __eq__(self, other: object) -> bool:
        return isinstance(other, Graph) and self.n == other.n and self.adj == other.adj

    def __hash__(self) -> int:
        return hash((self.n, self.adj))

    def __repr__(self) -> str:
        return f"Graph(n={self.n}, edges={self.edge_count})"


def build_graph(n: int, edges: Iterable[Sequence[int]]) -> Graph:
    """Graph on 0..n-1; duplicate pairs collapse, loops and bad endpoints fail"""
    if isinstance(n, bool) or not isinstance(n, int) or n < 0:
        raise InvalidInputError(
            f"vertex count must be a non-negative integer, got {n!r}"
        )
    adj = [0] * n
    for pair in edges:
        if len(pair) != 2:
            raise InvalidInputError(f"edge must be a pair, got {list(pair)!r}")
        u, v = int(pair[0]), int(pair[1])
        if not (0 <= u < n and 0 <= v < n):
            raise InvalidInputError(
                f"edge ({u},{v}) has an endpoint out of range 0..{n - 1}",
                {"pair": [u, v]},
            )
        if u == v:
            raise InvalidInputError(f"self-loop ({u},{v})", {"pair": [u, v]})
        adj[u] |= 1 << v
        adj[v] |= 1 << u
    return Graph(n, adj)


def empty_graph(n: int) -> Graph:
    return Graph(n, [0] * n)


def complete_graph(n: int) -> Graph:
    full = (1 << n) - 1
    return Graph(n, [full & ~(1 << v) for v in range(n)])


def path_graph(n: int) -> Graph:
    return build_graph(n, [(i, i + 1) for i in range(n - 1)])


def cycle_graph(n: int) -> Graph:
    return build_graph(n, [(i, (i + 1) % n) for i in range(n)])


def star_graph(leaves: int) -> Graph:
    """K_{1,leaves} with centre 0"""
    return build_graph(leaves + 1, [(0, i) for i in range(1, leaves + 1)])


def complete_bipartite_graph(a: int, b: int) -> Graph:
    return build_graph(a + b, [(i, a + j) for i in range(a) for j in range(b)])


def induced_subgraph(
    g: Graph, vertices: Iterable[int]
) -> Tuple[Graph, Tuple[int, ...]]:
    """
    Subgraph induced on `vertices`, relabelled 0..k-1 in ascending order

    Returns:
        The induced graph and the relabelling (new index -> original vertex)
    """
    chosen = sorted(set(vertices))
    for v in chosen:
        if not 0 <= v < g.n:
            raise InvalidInputError(f"vertex {v} out of range 0..{g.n - 1}")
    position = {v: i for i, v in enumerate(chosen)}
    mask = mask_of(chosen)
    adj = []
    for v in chosen:
        row = 0
        for u in iter_bits(g.adj[v] & mask):
            row |= 1 << position[u]
        adj.append(row)
    return Graph(len(chosen), adj), tuple(chosen)


def relabel(g: Graph, vertices: Sequence[int]) -> Graph:
    """Induced subgraph on `vertices` where vertex i is vertices[i] (order kept)"""
    position = {v: i for i, v in enumerate(vertices)}
    if len(position) != len(vertices):
        raise InvalidInputError("relabelling repeats a vertex")
    mask = mask_of(vertices)
    adj = []
    for v in vertices:
        adj.append(mask_of(position[u] for u in iter_bits(g.adj[v] & mask)))
    return Graph(len(vertices), adj)


def restrict(g: Graph, keep: int) -> Graph:
    """G[keep] on the original labels; vertices outside the mask become isolated"""
    return Graph(
        g.n, [row & keep if keep >> v & 1 else 0 for v, row in enumerate(g.adj)]
    )


def bipartition(g: Graph) -> Tuple[Tuple[int, ...], Tuple[int, ...]]:
    """BFS 2-colouring; side 0 holds the smallest vertex of every component"""
    side = [-1] * g.n
    for root in range(g.n):
        if side[root] != -1:
            continue
        side[root] = 0
        queue = deque([root])
        while queue:
            v = queue.popleft()
            for u in iter_bits(g.adj[v]):
                if side[u] == -1:
                    side[u] = 1 - side[v]
                    queue.append(u)
                elif side[u] == side[v]:
                    raise InvalidInputError(
                        f"graph is not bipartite: odd cycle through {u}-{v}"
                    )
    return (
        tuple(v for v in range(g.n) if side[v] == 0),
        tuple(v for v in range(g.n) if side[v] == 1),
    )


def bfs_order(g: Graph, start: int = 0) -> List[int]:
    """Breadth-first order from `start`, then from each lowest unvisited vertex"""
    seen = [False] * g.n
    order: List[int] = []
    roots = ([start] if g.n else []) + list(range(g.n))
    for root in roots:
        if seen[root]:
            continue
        seen[root] = True
        queue = deque([root])
        while queue:
            v = queue.popleft()
            order.append(v)
            for u in iter_bits(g.adj[v]):
                if not seen[u]:
                    seen[u] = True
                    queue.append(u)
    return order


def is_induced_copy(
    host: Graph,
    pattern: Graph,
    mapping: Sequence[int],
    coloring: Optional["EdgeColoring"] = None,
    color: Optional[int] = None,
) -> bool:
    """
    True iff `mapping` embeds `pattern` into `host` as an induced subgraph

    With a coloring, every image edge must carry `color`; if `color` is None the
    image edges must merely share one color.
    """
    if len(mapping) != pattern.n:
        return False
    if any(not 0 <= x < host.n for x in mapping):
        return False
    if len(set(mapping)) != pattern.n:
        return False

    image = mask_of(mapping)
    seen_colors = set()
    for u in range(pattern.n):
        expected = mask_of(mapping[v] for v in iter_bits(pattern.adj[u]))
        if host.adj[mapping[u]] & image != expected:
            return False
        if coloring is not None:
            for v in iter_bits(pattern.adj[u] >> (u + 1)):
                seen_colors.add(coloring.color(mapping[u], mapping[u + 1 + v]))

    if coloring is not None:
        if color is not None and seen_colors - {color}:
            return False
        if len(seen_colors) > 1:
            return False
    return True


@dataclass(frozen=True)
class BipartitePair:
    """Sides X and Y of a host graph; rows/cols are local biadjacency bitmaps"""

    host: Graph
    X: Tuple[int, ...]
    Y: Tuple[int, ...]

    def __post_init__(self):
        object.__setattr__(self, "X", tuple(self.X))
        object.__setattr__(self, "Y", tuple(self.Y))
        for v in self.X + self.Y:
            if not 0 <= v < self.host.n:
                raise InvalidInputError(f"vertex {v} out of range 0..{self.host.n - 1}")
        if len(set(self.X)) != len(self.X) or len(set(self.Y)) != len(self.Y):
            raise InvalidInputError("bipartite sides must not repeat vertices")
        if set(self.X) & set(self.Y):
            raise InvalidInputError("bipartite sides must be disjoint")

    @classmethod
    def from_rows(cls, rows: Sequence[int], b: int) -> "BipartitePair":
        """Pair on a fresh host: X = 0..a-1, Y = a..a+b-1, rows[i] over Y positions"""
        a = len(rows)
        limit = 1 << b
        adj = [0] * (a + b)
        for i, row in enumerate(rows):
            if row < 0 or row >= limit:
                raise InvalidInputError(f"row {i} does not fit {b} columns")
            adj[i] = row << a
            for j in iter_bits(row):
                adj[a + j] |= 1 << i
        return cls(Graph(a + b, adj), tuple(range(a)), tuple(range(a, a + b)))

    @cached_property
    def x_mask(self) -> int:
        return mask_of(self.X)

    @cached_property
    def y_mask(self) -> int:
        return mask_of(self.Y)

    @cached_property
    def rows(self) -> Tuple[int, ...]:
        pos = {y: j for j, y in enumerate(self.Y)}
        out = []
        for x in self.X:
            row = 0
            for y in iter_bits(self.host.adj[x] & self.y_mask):
                row |= 1 << pos[y]
            out.append(row)
        return tuple(out)

    @cached_property
    def cols(self) -> Tuple[int, ...]:
        cols = [0] * len(self.Y)
        for i, row in enumerate(self.rows):
            for j in iter_bits(row):
                cols[j] |= 1 << i
        return tuple(cols)

    @cached_property
    def edge_count(self) -> int:
        return sum(row.bit_count() for row in self.rows)

    def swapped(self) -> "BipartitePair":
        return BipartitePair(self.host, self.Y, self.X)

    def restrict(self, xs: Iterable[int], ys: Iterable[int]) -> "BipartitePair":
        return BipartitePair(self.host, tuple(sorted(xs)), tuple(sorted(ys)))


class EdgeColoring:
    """Total q-coloring of a graph's edge set"""

    __slots__ = ("graph", "q", "colors", "color_adj")

    def __init__(self, graph: Graph, colors: Mapping[Edge, int], q: int):
        if q < 1:
            raise InvalidInputError(f"color count must be positive, got {q}")
        normalized: Dict[Edge, int] = {}
        for (u, v), c in colors.items():
            key = (u, v) if u < v else (v, u)
            if not graph.has_edge(*key):
                raise InvalidInputError(f"colored pair {key} is not an edge")
            if not 0 <= c < q:
                raise InvalidInputError(f"color {c} on {key} is outside 0..{q - 1}")
            normalized[key] = int(c)
        if len(normalized) != graph.edge_count:
            missing = [e for e in graph.edges() if e not in normalized][:5]
            raise InvalidInputError(f"coloring is not total, uncolored edges {missing}")

        self.graph = graph
        self.q = q
        self.colors = normalized
        adj = [[0] * graph.n for _ in range(q)]
        for (u, v), c in normalized.items():
            adj[c][u] |= 1 << v
            adj[c][v] |= 1 << u
        self.color_adj: Tuple[Tuple[int, ...], ...] = tuple(tuple(a) for a in adj)

    @classmethod
    def from_sequence(
        cls, graph: Graph, values: Sequence[int], q: int
    ) -> "EdgeColoring":
        """Colors listed in graph.edges() order"""
        edges = graph.edges()
        if len(values) != len(edges):
            raise InvalidInputError(f"expected {len(edges)} colors, got {len(values)}")
        return cls(graph, dict(zip(edges, values)), q)

    def color(self, u: int, v: int) -> int:
        return self.colors[(u, v) if u < v else (v, u)]

    def as_sequence(self) -> Tuple[int, ...]:
        return tuple(self.colors[e] for e in self.graph.edges())

    def class_graph(self, c: int) -> Graph:
        return Graph(self.graph.n, self.color_adj[c])

    def class_pair(self, pair: BipartitePair, c: int) -> BipartitePair:
        return BipartitePair(self.class_graph(c), pair.X, pair.Y)

    def __eq__(self, other: object) -> bool:
        return (
            isinstance(other, EdgeColoring)
            and self.q == other.q
            and self.graph == other.graph
            and self.colors == other.colors
        )

    def __repr__(self) -> str:
        return f"EdgeColoring(q={self.q}, edges={len(self.colors)})"


@dataclass(frozen=True)
class Blowup:
    """Host graph with a homomorphism phi onto a base graph"""

    base: Graph
    host: Graph
    phi: Tuple[int, ...]
    parts: Tuple[Tuple[int, ...], ...]
    blocks: Mapping[Edge, Tuple[int, ...]] = field(default_factory=dict)

    @property
    def part_sizes(self) -> Tuple[int, ...]:
        return tuple(len(p) for p in self.parts)

    def part_mask(self, v: int) -> int:
        return mask_of(self.parts[v])

    def pair(self, u: int, v: int) -> BipartitePair:
        return BipartitePair(self.host, self.parts[u], self.parts[v])


def construct_blowup(
    base: Graph, part_sizes: Sequence[int], gadget_provider: GadgetProvider
) -> Blowup:
    """
    Install one biadjacency block per base edge between consecutive vertex parts

    The provider is called as provider(u, v, |X_u|, |X_v|) for every base edge
    u < v and returns |X_u| row bitmasks over the |X_v| columns.
    """
    if len(part_sizes) != base.n:
        raise InvalidInputError(
            f"expected {base.n} part sizes, got {len(part_sizes)}"
        )
    if any(s < 0 for s in part_sizes):
        raise InvalidInputError("part sizes must be non-negative")

    offsets = [0]
    for size in part_sizes:
        offsets.append(offsets[-1] + size)
    total = offsets[-1]
    parts = tuple(tuple(range(offsets[v], offsets[v + 1])) for v in range(base.n))
    phi = tuple(v for v in range(base.n) for _ in range(part_sizes[v]))

    adj = [0] * total
    blocks: Dict[Edge, Tuple[int, ...]] = {}
    for u, v in base.edges():
        a, b = part_sizes[u], part_sizes[v]
        rows = tuple(int(r) for r in gadget_provider(u, v, a, b))
        if len(rows) != a or any(r < 0 or r >> b for r in rows):
            raise InvalidInputError(
                f"dimension mismatch on edge {u}-{v}: expected {a}x{b} block",
                {"edge": [u, v], "rows": len(rows)},
            )
        blocks[(u, v)] = rows
        for i, row in enumerate(rows):
            x = offsets[u] + i
            for j in iter_bits(row):
                y = offsets[v] + j
                adj[x] |= 1 << y
                adj[y] |= 1 << x

    logger.debug(
        "blowup of %r with parts %s built: %d host edges",
        base,
        part_sizes,
        sum(r.bit_count() for r in adj) // 2,
    )
    return Blowup(base, Graph(total, adj), phi, parts, blocks)


def complete_block(u: int, v: int, a: int, b: int) -> List[int]:
    """Gadget provider installing complete bipartite blocks"""
    return [(1 << b) - 1] * a


def empty_block(u: int, v: int, a: int, b: int) -> List[int]:
    """Gadget provider installing empty blocks"""
    return [0] * a


def verify_blowup(b: Blowup, s: int) -> BlowupVerdict:
    """Check the three blowup invariants with part bound s"""
    violations: List[str] = []
    offending: List[List[int]] = []
    host, base = b.host, b.base

    if len(b.phi) != host.n:
        violations.append(f"phi covers {len(b.phi)} of {host.n} host vertices")
        return BlowupVerdict(ok=False, s=s, violations=violations, offending_edges=[])
    if any(not 0 <= v < base.n for v in b.phi):
        violations.append("phi maps outside the base vertex range")
        return BlowupVerdict(ok=False, s=s, violations=violations, offending_edges=[])

    fibers = [tuple(x for x in range(host.n) if b.phi[x] == v) for v in range(base.n)]
    if len(b.parts) != base.n or any(
        tuple(sorted(p)) != fibers[v] for v, p in enumerate(b.parts)
    ):
        violations.append("parts disagree with phi")

    for v, fiber in enumerate(fibers):
        if len(fiber) > s:
            violations.append(f"part too large: |phi^-1({v})| = {len(fiber)} > {s}")

    part_masks = [mask_of(f) for f in fibers]
    allowed = [0] * base.n
    for v in range(base.n):
        for u in iter_bits(base.adj[v]):
            allowed[v] |= part_masks[u]

    for x in range(host.n):
        v = b.phi[x]
        forward = host.adj[x] >> (x + 1) << (x + 1)
        for y in iter_bits(forward & part_masks[v]):
            violations.append(f"intra-part edge {x}-{y} inside part {v}")
            offending.append([x, y])
        for y in iter_bits(forward & ~allowed[v] & ~part_masks[v]):
            violations.append(f"edge {x}-{y} maps to non-edge {v}-{b.phi[y]}")
            offending.append([x, y])

    return BlowupVerdict(
        ok=not violations, s=s, violations=violations, offending_edges=offending
    )


def is_blowup_of(
    hprime: Graph, h: Graph, w: int, surjective: bool = False
) -> Optional[Tuple[int, ...]]:
    """
    Homomorphism hprime -> h with fibers of size <= w, found by backtracking

    Fibers are independent automatically because h has no loops. Returns None
    when no such map exists.
    """
    if hprime.n > BLOWUP_SEARCH_CAP:
        raise BudgetExceededError(
            "blowup search cap (pattern vertices)", hprime.n, BLOWUP_SEARCH_CAP
        )
    if w < 1:
        return None
    if surjective and h.n * w < hprime.n:
        return None

    order = bfs_order(hprime)
    position = {v: i for i, v in enumerate(order)}
    earlier = [
        [u for u in iter_bits(hprime.adj[v]) if position[u] < position[v]]
        for v in order
    ]
    phi = [-1] * hprime.n
    load = [0] * h.n
    all_targets = h.vertex_mask

    def extend(depth: int) -> bool:
        if depth == len(order):
            return not surjective or all(load)
        if surjective and sum(1 for c in load if c == 0) > len(order) - depth:
            return False
        x = order[depth]
        candidates = all_targets
        for y in earlier[depth]:
            candidates &= h.adj[phi[y]]
        for t in iter_bits(candidates):
            if load[t] >= w:
                continue
            phi[x] = t
            load[t] += 1
            if extend(depth + 1):
                return True
            load[t] -= 1
            phi[x] = -1
        return False

    return tuple(phi) if extend(0) else None


def complete_blowup(h: Graph, w: int) -> Tuple[Graph, Tuple[int, ...]]:
    """Complete w-blowup: vertex (v, i) is v*w+i, (u,i)~(v,j) iff uv in E(h)"""
    edges = [
        (u * w + i, v * w + j) for u, v in h.edges() for i in range(w) for j in range(w)
    ]
    return build_graph(h.n * w, edges), tuple(v for v in range(h.n) for _ in range(w))


def check_blowup_map(
    hprime: Graph, h: Graph, phi: Sequence[int], w: int
) -> bool:
    """Verify a declared blowup map without searching"""
    if len(phi) != hprime.n or any(not 0 <= t < h.n for t in phi):
        return False
    if any(phi.count(t) > w for t in set(phi)):
        return False
    return all(h.has_edge(phi[u], phi[v]) for u, v in hprime.edges())


@dataclass(frozen=True)
class Embedding:
    """Injective map pattern -> host claimed to be an induced (monochromatic) copy"""

    pattern: Graph
    host: Graph
    mapping: Tuple[int, ...]
    claimed_color: Optional[int] = None

    def verify(self, coloring: Optional[EdgeColoring] = None) -> bool:
        return is_induced_copy(
            self.host,
            self.pattern,
            self.mapping,
            coloring,
            self.claimed_color if coloring is not None else None,
        )


# JSON conversion
def graph_to_model(g: Graph) -> GraphModel:
    return GraphModel(n=g.n, edges=[[u, v] for u, v in g.edges()])


def graph_from_model(m: GraphModel) -> Graph:
    return build_graph(m.n, m.edges)


def blowup_to_model(b: Blowup) -> BlowupModel:
    return BlowupModel(
        base=graph_to_model(b.base),
        part_sizes=list(b.part_sizes),
        blocks={
            edge_key(u, v): list(rows) for (u, v), rows in sorted(b.blocks.items())
        },
    )


def blowup_from_model(m: BlowupModel) -> Blowup:
    base = graph_from_model(m.base)
    blocks = {parse_edge_key(k): rows for k, rows in m.blocks.items()}
    missing = [e for e in base.edges() if e not in blocks]
    if missing:
        raise InvalidInputError(f"blowup has no block for base edges {missing[:5]}")
    extra = [e for e in blocks if not base.has_edge(*e)]
    if extra:
        raise InvalidInputError(f"blocks given for non-edges {extra[:5]}")
    return construct_blowup(base, m.part_sizes, lambda u, v, a, b: blocks[(u, v)])


def coloring_to_model(c: EdgeColoring) -> ColoringModel:
    return ColoringModel(
        q=c.q, colors={edge_key(u, v): col for (u, v), col in sorted(c.colors.items())}
    )


def coloring_from_model(graph: Graph, m: ColoringModel) -> EdgeColoring:
    return EdgeColoring(graph, {parse_edge_key(k): c for k, c in m.colors.items()}, m.q)

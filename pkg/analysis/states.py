"""
Constructors for the state families analysed by the toolkit,
plus the textual state-spec grammar used by the command line.
"""

import itertools
import json
import logging
import math
import re
from dataclasses import dataclass, field
import numpy as np
import networkx as nx
from quantum_core import (
    SIGMA_X,
    SIGMA_Z,
    QuditRegister,
    StateVector,
    DensityOperator,
    DimensionBudgetExceeded,
    InvalidState,
    as_density,
    density_operator,
    local_operator,
    state_vector,
    cyclic_shift,
)

# Largest fully connected Bell network that fits the dense budget
MAX_FCBELL_PARTIES = 5

# Printed coefficients of the 4-site, d=4 translationally invariant state
PSI4_TERMS = [
    (0.3039, ["0112", "1120", "1201", "2011"]),
    (0.2566, ["0202", "2020"]),
    (-0.3033, ["1313", "3131"]),
    (0.4783, ["1111"]),
    (0.2563, ["3333"]),
]


class InvalidAmplitude(ValueError):
    """Requested amplitudes cannot form a normalized state."""


class ParameterOutOfRange(ValueError):
    """A family parameter lies outside the constructor's validity range."""


class ParseError(ValueError):
    """A state spec does not follow the grammar."""

    def __init__(self, message: str, position: int):
        super().__init__(f"{message} (at position {position})")
        self.position = position


@dataclass
class StateSpec:
    """A parsed state spec: family tag, its parameters and a display label."""
    family: str
    params: dict = field(default_factory=dict)
    text: str = ""
    notes: list = field(default_factory=list)

    @property
    def label(self) -> str:
        """Short name used in tables and reports."""
        return self.text or self.family


def _basis_index(digits, dims) -> int:
    return int(np.ravel_multi_index(tuple(digits), tuple(dims)))


def _from_terms(terms, dims) -> StateVector:
    """Builds a normalized state from (coefficient, digits) pairs."""
    amplitudes = np.zeros(int(np.prod(dims)), dtype=complex)
    for coeff, digits in terms:
        amplitudes[_basis_index(digits, dims)] += coeff
    return state_vector(amplitudes, dims)


def graph_state(graph: nx.Graph) -> StateVector:
    """
    Applies controlled-Z along every edge to |+> on every vertex.
    Vertices must be labelled 0..n-1; vertex v is site v.
    """
    n = graph.number_of_nodes()
    if n < 1:
        raise ParameterOutOfRange("A graph state needs at least one vertex.")
    if sorted(graph.nodes) != list(range(n)):
        raise ParameterOutOfRange("Graph vertices must be labelled 0..n-1.")
    if nx.number_of_selfloops(graph):
        raise ParameterOutOfRange("Graph states do not allow self-loops.")
    indices = np.arange(2 ** n)
    bits = [(indices >> (n - 1 - site)) & 1 for site in range(n)]
    parity = np.zeros(2 ** n, dtype=int)
    for u, v in graph.edges:
        parity += bits[u] & bits[v]
    amplitudes = np.where(parity % 2, -1.0, 1.0) / math.sqrt(2 ** n)
    return StateVector(QuditRegister((2,) * n), amplitudes)


def stabilizer(graph: nx.Graph, vertex: int) -> np.ndarray:
    """X on the vertex times Z on each of its neighbours."""
    dims = (2,) * graph.number_of_nodes()
    op = local_operator(SIGMA_X, vertex, dims)
    for neighbour in graph.neighbors(vertex):
        op = op @ local_operator(SIGMA_Z, neighbour, dims)
    return op


def stabilizer_check(graph: nx.Graph, psi: StateVector, tol: float = 1e-12) -> bool:
    """True when every stabilizer generator leaves psi unchanged."""
    return all(np.max(np.abs(stabilizer(graph, v) @ psi.amplitudes - psi.amplitudes)) <= tol
               for v in graph.nodes)


def linear_graph(n: int) -> nx.Graph:
    """Open chain 0-1-...-(n-1)."""
    return nx.path_graph(n)


def ring_graph(n: int) -> nx.Graph:
    """Closed chain; for n = 2 this is a single edge."""
    return nx.cycle_graph(n) if n > 2 else nx.path_graph(n)


def grid_graph(rows: int, cols: int, periodic: bool = False) -> nx.Graph:
    """
    2D grid with row-major site numbering; periodic wraps both axes.
    """
    grid = nx.grid_2d_graph(rows, cols, periodic=periodic)
    mapping = {(r, c): r * cols + c for r, c in grid.nodes}
    relabelled = nx.relabel_nodes(grid, mapping)
    ordered = nx.Graph()
    ordered.add_nodes_from(range(rows * cols))
    ordered.add_edges_from((u, v) for u, v in relabelled.edges if u != v)
    return ordered


def linear_cluster(n: int) -> StateVector:
    """Cluster state on an open chain."""
    return graph_state(linear_graph(n))


def ring_cluster(n: int) -> StateVector:
    """Cluster state on a closed chain."""
    return graph_state(ring_graph(n))


def grid_cluster(rows: int, cols: int, periodic: bool = False) -> StateVector:
    """Cluster state on a rows x cols grid."""
    return graph_state(grid_graph(rows, cols, periodic))


def dicke_state(n: int, m: int) -> StateVector:
    """
    Uniform superposition of all C(n, m) computational strings of weight m.
    """
    if n < 1 or not 0 <= m <= n:
        raise ParameterOutOfRange(f"Dicke state needs 0 <= m <= n, got n={n}, m={m}")
    dims = (2,) * n
    amplitudes = np.zeros(2 ** n, dtype=complex)
    for ones in itertools.combinations(range(n), m):
        digits = [1 if site in ones else 0 for site in range(n)]
        amplitudes[_basis_index(digits, dims)] = 1
    return state_vector(amplitudes, dims)


def w_state(n: int) -> StateVector:
    """W state, the weight-one Dicke state."""
    if n < 2:
        raise ParameterOutOfRange(f"W state needs n >= 2, got {n}")
    return dicke_state(n, 1)


def translational_state(n: int, m: int) -> StateVector:
    """
    Uniform superposition over the n cyclic shifts of |0...01...1> with m ones.
    """
    if not 1 <= m <= n - 1:
        raise ParameterOutOfRange(f"Translational state needs 1 <= m <= n-1, got n={n}, m={m}")
    reference = [0] * (n - m) + [1] * m
    shifts = {tuple(reference[-k:] + reference[:-k]) if k else tuple(reference)
              for k in range(n)}
    if len(shifts) != n:
        raise ParameterOutOfRange("Reference string is periodic; shifts are not distinct.")
    return _from_terms([(1.0, digits) for digits in sorted(shifts)], (2,) * n)


def psi_seed_strings(n: int) -> list:
    """
    Seed strings of the maximal-persistency family: for every cyclic distance r,
    symbol 2r-1 on site n-1-r and symbol 2r on site n-1.
    """
    seeds = []
    for r in range(1, (n - 1) // 2 + 1):
        digits = [0] * n
        digits[n - 1 - r] = 2 * r - 1
        digits[n - 1] = 2 * r
        seeds.append(digits)
    return seeds


def psi_term_count(n: int) -> int:
    """Number of weight-b terms, n(n-1)/2."""
    return n * (n - 1) // 2


def psi_max_persistency(n: int, b: float) -> StateVector:
    """
    a|0...0> + b sym[seed strings] on n sites of dimension n (n odd),
    with a = sqrt(1 - D b^2) and D = n(n-1)/2.
    """
    if n < 3 or n % 2 == 0:
        raise ParameterOutOfRange(f"Maximal-persistency family needs odd n >= 3, got {n}")
    count = psi_term_count(n)
    a_squared = 1 - count * b * b
    if a_squared < 0 or b < 0:
        raise InvalidAmplitude(f"b={b} gives 1 - D b^2 = {a_squared}")
    dims = (n,) * n
    terms = [(math.sqrt(a_squared), [0] * n)]
    for seed in psi_seed_strings(n):
        for k in range(n):
            terms.append((b, seed[-k:] + seed[:-k] if k else list(seed)))
    amplitudes = np.zeros(n ** n, dtype=complex)
    for coeff, digits in terms:
        amplitudes[_basis_index(digits, dims)] += coeff
    return StateVector(QuditRegister(dims), amplitudes / np.linalg.norm(amplitudes))


def default_psi_b(n: int) -> float:
    """Small-b default for the maximal-persistency family."""
    return 0.1 / math.sqrt(psi_term_count(n))


def theta_from_b(b: float, n: int = 3) -> float:
    """
    Angle of the entangled two-site component, tan(theta) = b / a.
    For n = 3 this inverts b^2 = sin^2(theta) / (2 sin^2(theta) + 1).
    """
    a = math.sqrt(1 - psi_term_count(n) * b * b)
    return math.atan2(b, a)


def b_from_theta(theta: float) -> float:
    """b^2 = sin^2(theta) / (2 sin^2(theta) + 1)."""
    s2 = math.sin(theta) ** 2
    return math.sqrt(s2 / (2 * s2 + 1))


def psi4_appendix() -> StateVector:
    """Translationally invariant 4-site d=4 state from printed coefficients."""
    terms = [(coeff, [int(c) for c in digits])
             for coeff, strings in PSI4_TERMS for digits in strings]
    return _from_terms(terms, (4,) * 4)


def ghz_state(n: int, d: int = 2) -> StateVector:
    """(1/sqrt(d)) sum_j |j>^n."""
    if n < 2 or d < 2:
        raise ParameterOutOfRange(f"GHZ state needs n >= 2 and d >= 2, got n={n}, d={d}")
    return _from_terms([(1.0, [j] * n) for j in range(d)], (d,) * n)


def bell_state() -> StateVector:
    """|phi+> = (|00> + |11>)/sqrt(2)."""
    return ghz_state(2, 2)


def fully_connected_bell(n: int) -> StateVector:
    """
    Every pair of parties shares a Bell pair; party i holds one qubit
    per partner, ordered by partner index, giving local dimension 2^(n-1).
    """
    if n < 2:
        raise ParameterOutOfRange(f"Fully connected Bell state needs n >= 2, got {n}")
    if n > MAX_FCBELL_PARTIES:
        raise DimensionBudgetExceeded(
            f"Fully connected Bell state on {n} parties needs local dimension 2^{n - 1}")
    pairs = list(itertools.combinations(range(n), 2))
    dims = (2 ** (n - 1),) * n
    amplitudes = np.zeros(int(np.prod(dims)), dtype=complex)
    for bits in itertools.product((0, 1), repeat=len(pairs)):
        shared = dict(zip(pairs, bits))
        digits = []
        for party in range(n):
            local = 0
            for partner in (p for p in range(n) if p != party):
                local = 2 * local + shared[tuple(sorted((party, partner)))]
            digits.append(local)
        amplitudes[_basis_index(digits, dims)] = 1
    return state_vector(amplitudes, dims)


def biseparable_example() -> DensityOperator:
    """
    Equal mixture of three flagged Bell pairs on three 6-level sites:
    |0>_A phi+_01 on BC, |2>_B phi+_23 on AC, |4>_C phi+_45 on AB.
    """
    dims = (6, 6, 6)
    components = [
        [(0, 0, 0), (0, 1, 1)],
        [(2, 2, 2), (3, 2, 3)],
        [(4, 4, 4), (5, 5, 4)],
    ]
    matrix = np.zeros((216, 216), dtype=complex)
    for strings in components:
        psi = _from_terms([(1.0, digits) for digits in strings], dims).amplitudes
        matrix += np.outer(psi, psi.conj()) / 3
    return density_operator(matrix, dims)


def w_residue(p: float) -> DensityOperator:
    """p |W_2><W_2| + (1 - p) |00><00|."""
    if not 0 <= p <= 1:
        raise ParameterOutOfRange(f"Mixing weight p={p} outside [0, 1]")
    w2 = as_density(w_state(2)).matrix
    zero = np.zeros((4, 4), dtype=complex)
    zero[0, 0] = 1
    return density_operator(p * w2 + (1 - p) * zero, (2, 2))


# Required and optional ':'-separated fields per family
_FAMILY_FIELDS = {
    "ghz": (("n",), ("d",)),
    "w": (("n",), ()),
    "dicke": (("n", "m"), ()),
    "ti": (("n", "m"), ()),
    "linear": (("n",), ()),
    "ring": (("n",), ()),
    "grid": (("shape",), ("periodic",)),
    "psi": (("n",), ("b",)),
    "psi4": ((), ()),
    "bisep3": ((), ()),
    "fcbell": (("n",), ()),
}

_FIELD_PATTERNS = {
    "n": r"\d+",
    "d": r"\d+",
    "m": r"\d+",
    "shape": r"(\d+)x(\d+)",
    "periodic": r"periodic",
    "b": r"b=((?:\d+\.?\d*|\.\d+)(?:e[-+]?\d+)?)",
}


def _tokens(text: str) -> list:
    """Splits on ':' keeping the offset of every token."""
    tokens, offset = [], 0
    for token in text.split(":"):
        tokens.append((token, offset))
        offset += len(token) + 1
    return tokens


def _read_field(name: str, token: str, offset: int, params: dict) -> None:
    match = re.fullmatch(_FIELD_PATTERNS[name], token)
    if not match:
        raise ParseError(f"Expected field '{name}', got '{token}'", offset)
    if name == "shape":
        params["rows"], params["cols"] = int(match.group(1)), int(match.group(2))
    elif name == "periodic":
        params["periodic"] = True
    elif name == "b":
        params["b"] = float(match.group(1))
    else:
        params[name] = int(token)


def parse_state_spec(text: str) -> StateSpec:
    """
    Parses a state spec such as "w:6", "grid:2x3:periodic" or "psi:3:b=0.4518".
    Matching is case-insensitive except for file paths.
    """
    stripped = text.strip()
    if stripped.lower().startswith("file:"):
        if len(stripped) == 5:
            raise ParseError("Missing path after 'file:'", 5)
        return StateSpec("file", {"path": stripped[5:]}, stripped)

    lowered = stripped.lower()
    tokens = _tokens(lowered)
    family = tokens[0][0]
    if family not in _FAMILY_FIELDS:
        raise ParseError(f"Unknown state family '{family}'", 0)
    required, optional = _FAMILY_FIELDS[family]
    fields = tokens[1:]
    if len(fields) < len(required):
        raise ParseError(f"'{family}' needs {len(required)} field(s)", len(lowered))
    if len(fields) > len(required) + len(optional):
        extra = fields[len(required) + len(optional)]
        raise ParseError(f"Unexpected field '{extra[0]}'", extra[1])

    params = {}
    for name, (token, offset) in zip(required + optional, fields):
        _read_field(name, token, offset, params)
    spec = StateSpec(family, params, lowered)
    _validate_params(spec)
    return spec


def _validate_params(spec: StateSpec) -> None:
    """Raises ParameterOutOfRange when a family's validity range is broken."""
    p = spec.params
    checks = {
        "ghz": p.get("n", 0) >= 2 and p.get("d", 2) >= 2,
        "w": p.get("n", 0) >= 2,
        "dicke": p.get("n", 0) >= 1 and 0 <= p.get("m", -1) <= p.get("n", 0),
        "ti": 1 <= p.get("m", 0) <= p.get("n", 0) - 1,
        "linear": p.get("n", 0) >= 1,
        "ring": p.get("n", 0) >= 2,
        "grid": p.get("rows", 0) >= 1 and p.get("cols", 0) >= 1,
        "psi": p.get("n", 0) >= 3 and p.get("n", 0) % 2 == 1,
        "fcbell": 2 <= p.get("n", 0),
    }
    if not checks.get(spec.family, True):
        raise ParameterOutOfRange(f"Parameters {p} out of range for family '{spec.family}'")


def graph_for_spec(spec: StateSpec):
    """The graph behind a cluster-state spec, or None for other families."""
    p = spec.params
    if spec.family == "linear":
        return linear_graph(p["n"])
    if spec.family == "ring":
        return ring_graph(p["n"])
    if spec.family == "grid":
        return grid_graph(p["rows"], p["cols"], p.get("periodic", False))
    return None


def build_state(spec: StateSpec):
    """
    Dispatches a parsed spec to its constructor.
    Returns a StateVector, or a DensityOperator for mixed families.
    """
    p = spec.params
    graph = graph_for_spec(spec)
    if graph is not None:
        if spec.family == "grid":
            spec.notes.append("grid sites numbered row-major")
        return graph_state(graph)
    if spec.family == "psi" and "b" not in p:
        p["b"] = default_psi_b(p["n"])
        spec.notes.append(f"non-paper default b={p['b']:.6g}")
        logging.warning("No b given for %s, using non-paper default b=%s", spec.text, p["b"])
    builders = {
        "ghz": lambda: ghz_state(p["n"], p.get("d", 2)),
        "w": lambda: w_state(p["n"]),
        "dicke": lambda: dicke_state(p["n"], p["m"]),
        "ti": lambda: translational_state(p["n"], p["m"]),
        "psi": lambda: psi_max_persistency(p["n"], p["b"]),
        "psi4": psi4_appendix,
        "bisep3": biseparable_example,
        "fcbell": lambda: fully_connected_bell(p["n"]),
        "file": lambda: load_state(p["path"]),
    }
    return builders[spec.family]()


def state_from_text(text: str):
    """Parses and builds in one step."""
    return build_state(parse_state_spec(text))


def _pairs(values) -> list:
    return [[float(np.real(v)), float(np.imag(v))] for v in values]


def state_to_json(state) -> dict:
    """JSON document for a pure or mixed state."""
    if isinstance(state, StateVector):
        return {"dims": list(state.dims), "amplitudes": _pairs(state.amplitudes)}
    return {"dims": list(state.dims), "matrix": [_pairs(row) for row in state.matrix]}


def state_from_json(document: dict):
    """Inverse of state_to_json."""
    dims = tuple(document["dims"])
    if "amplitudes" in document:
        amplitudes = np.array([complex(re_, im) for re_, im in document["amplitudes"]])
        return StateVector(QuditRegister(dims), amplitudes)
    if "matrix" in document:
        matrix = np.array([[complex(re_, im) for re_, im in row] for row in document["matrix"]])
        return density_operator(matrix, dims)
    raise InvalidState("State document needs 'amplitudes' or 'matrix'.")


def load_state(path: str):
    """Reads a state document from a JSON file."""
    try:
        with open(path, "r", encoding="utf-8") as handle:
            document = json.load(handle)
    except (OSError, json.JSONDecodeError) as e:
        logging.error("Could not read state file %s: %s", path, e)
        raise
    return state_from_json(document)


def is_translation_invariant(psi: StateVector, tol: float = 1e-12) -> bool:
    """True when every cyclic shift leaves psi unchanged."""
    return all(np.max(np.abs(cyclic_shift(psi, k).amplitudes - psi.amplitudes)) <= tol
               for k in range(1, psi.n))

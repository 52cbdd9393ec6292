"""
Bell-nonlocality machinery with two dichotomic settings per party.

Functionals and behaviors are expressed in correlator coordinates: a tensor
with one axis of length 3 per party, index 0 for "party not involved" and
1 + x for setting x. Entry [0, ..., 0] is the constant term.
"""

import functools
import itertools
import logging
import math
from dataclasses import dataclass
import numpy as np
from scipy.optimize import linprog, nnls
from quantum_core import (
    PAULIS,
    DensityOperator,
    DimensionMismatch,
    as_density,
    embed_on_subspace,
    hermitian_eig,
    reduced_state,
)

SETTINGS = 2
MAX_LP_PARTIES = 6
CERTIFY_MARGIN = 1e-9
LP_RESIDUAL_TOL = 1e-9
SEESAW_TOL = 1e-10
TSIRELSON = 2 * math.sqrt(2)
GME_BISEPARABLE_BOUND = 4 + TSIRELSON
# Deterministic outcomes (a_0, a_1) of the four local strategies
STRATEGIES = np.array([[1, 1], [1, -1], [-1, 1], [-1, -1]])
_LP_OPTIONS = {"primal_feasibility_tolerance": 1e-10, "dual_feasibility_tolerance": 1e-10}


class ScenarioTooLarge(RuntimeError):
    """Exact local-polytope methods are limited to MAX_LP_PARTIES parties."""


class NotTwoQubits(ValueError):
    """The Horodecki criterion needs a two-qubit state."""


@dataclass(frozen=True, eq=False)
class DichotomicObservable:
    """Hermitian observable with spectrum in {+1, -1} on a d-level site."""
    matrix: np.ndarray

    def __post_init__(self):
        matrix = np.asarray(self.matrix, dtype=complex)
        d = matrix.shape[0]
        if matrix.shape != (d, d):
            raise ValueError(f"Observable must be square, got {matrix.shape}")
        if np.max(np.abs(matrix - matrix.conj().T)) > 1e-10:
            raise ValueError("Observable is not Hermitian.")
        if np.max(np.abs(matrix @ matrix - np.eye(d))) > 1e-10:
            raise ValueError("Observable does not square to the identity.")
        matrix.setflags(write=False)
        object.__setattr__(self, "matrix", matrix)

    @property
    def d(self) -> int:
        """Local dimension."""
        return self.matrix.shape[0]


def bloch_observable(vector, d: int = 2, subspace=(0, 1)) -> DichotomicObservable:
    """
    n.sigma on a designated two-level subspace, +1 on its complement.
    """
    vector = np.asarray(vector, dtype=float)
    vector = vector / np.linalg.norm(vector)
    block = sum(v * pauli for v, pauli in zip(vector, PAULIS))
    return DichotomicObservable(embed_on_subspace(block, d, subspace))


def sign_observable(operator, nontrivial: bool = True) -> DichotomicObservable:
    """
    Optimal dichotomic response to a Hermitian operator: +1 on its
    nonnegative eigenspace, -1 on the negative one.

    With `nontrivial`, a response of +-I is replaced by the best one with
    both outcomes present: the eigenvector of smallest |eigenvalue| takes
    the other sign. For a qubit this is the Bloch observable along the
    traceless part of the operator.
    """
    values, vectors = hermitian_eig(operator)
    signs = np.where(values >= -1e-13, 1.0, -1.0)
    if nontrivial and signs.size > 1 and abs(signs.sum()) == signs.size:
        signs[np.argmin(np.abs(values))] *= -1
    matrix = (vectors * signs) @ vectors.conj().T
    return DichotomicObservable((matrix + matrix.conj().T) / 2)


def random_observable(d: int, rng, subspace=None) -> DichotomicObservable:
    """Uniform Bloch vector on a (possibly random) two-level subspace."""
    if subspace is None:
        subspace = (0, 1) if d == 2 else tuple(sorted(rng.choice(d, 2, replace=False)))
    return bloch_observable(rng.normal(size=3), d, subspace)


@dataclass(frozen=True)
class MeasurementScenario:
    """Two dichotomic settings per party."""
    observables: tuple

    def __post_init__(self):
        observables = tuple(tuple(party) for party in self.observables)
        for party in observables:
            if len(party) != SETTINGS:
                raise ValueError(f"Every party needs {SETTINGS} settings.")
            if party[0].d != party[1].d:
                raise DimensionMismatch("Settings of one party act on different dimensions.")
        object.__setattr__(self, "observables", observables)

    @property
    def k(self) -> int:
        """Number of parties."""
        return len(self.observables)

    @property
    def dims(self) -> tuple:
        """Local dimension of every party."""
        return tuple(party[0].d for party in self.observables)

    def correlation_ops(self) -> list:
        """Per party, the stack [I, O_0, O_1] of shape (3, d, d)."""
        return [np.stack([np.eye(party[0].d), party[0].matrix, party[1].matrix])
                for party in self.observables]

    def check(self, rho: DensityOperator) -> None:
        """Raises DimensionMismatch unless the scenario fits the register."""
        if self.dims != rho.dims:
            raise DimensionMismatch(f"Scenario dims {self.dims} vs state dims {rho.dims}")


def standard_scenario(dims) -> MeasurementScenario:
    """sigma_z and sigma_x on levels {0, 1} of every party."""
    return MeasurementScenario(tuple(
        (bloch_observable([0, 0, 1], d), bloch_observable([1, 0, 0], d)) for d in dims))


def psi_theta_settings(theta: float, dims=(2, 2), subspace_a=(0, 1),
                       subspace_b=(0, 1)) -> MeasurementScenario:
    """
    A0 = sigma_z, A1 = sigma_x, B0 = sigma_z, B1 = cos(beta) sigma_z - sin(beta) sigma_x
    with tan(beta) = sin(2 theta), each on its party's qubit subspace.
    """
    beta = math.atan(math.sin(2 * theta))
    d_a, d_b = dims
    return MeasurementScenario((
        (bloch_observable([0, 0, 1], d_a, subspace_a), bloch_observable([1, 0, 0], d_a, subspace_a)),
        (bloch_observable([0, 0, 1], d_b, subspace_b),
         bloch_observable([-math.sin(beta), 0, math.cos(beta)], d_b, subspace_b)),
    ))


def random_scenario(dims, rng, randomize_subspace: bool = True) -> MeasurementScenario:
    """Random Bloch vectors; subspaces of qudits drawn at random unless disabled."""
    return MeasurementScenario(tuple(
        tuple(random_observable(d, rng, None if randomize_subspace else (0, 1))
              for _ in range(SETTINGS)) for d in dims))


@functools.lru_cache(maxsize=None)
def vertex_matrix(k: int) -> np.ndarray:
    """
    Correlator tensors of all 4^k deterministic strategies, one per row.
    """
    single = np.column_stack([np.ones(4), STRATEGIES]).astype(float)
    matrix = np.ones((1, 1))
    for _ in range(k):
        matrix = np.kron(matrix, single)
    matrix.setflags(write=False)
    return matrix


def vertex_strategies(index: int, k: int) -> list:
    """Strategy number (row of STRATEGIES) of each party for vertex `index`."""
    return [int(s) for s in np.unravel_index(index, (4,) * k)]


@dataclass(frozen=True, eq=False)
class BellFunctional:
    """
    Linear functional on correlators with its local (deterministic) bound.
    The bound is recomputed on construction; a supplied value must agree.
    """
    coefficients: np.ndarray
    local_bound: float = None

    def __post_init__(self):
        coefficients = np.asarray(self.coefficients, dtype=float)
        if coefficients.shape != (3,) * coefficients.ndim:
            raise ValueError(f"Coefficients need shape (3,)*k, got {coefficients.shape}")
        coefficients.setflags(write=False)
        object.__setattr__(self, "coefficients", coefficients)
        if coefficients.ndim > MAX_LP_PARTIES:
            bound = self.local_bound
        else:
            bound = float(np.max(vertex_matrix(coefficients.ndim) @ coefficients.reshape(-1)))
        if self.local_bound is not None and abs(self.local_bound - bound) > 1e-9:
            raise ValueError(f"Stored local bound {self.local_bound} differs from {bound}")
        object.__setattr__(self, "local_bound", bound)

    @property
    def parties(self) -> int:
        """Number of parties."""
        return self.coefficients.ndim

    def deterministic_values(self) -> np.ndarray:
        """Value of the functional at every deterministic strategy."""
        return vertex_matrix(self.parties) @ self.coefficients.reshape(-1)

    def value(self, correlators: np.ndarray) -> float:
        """Functional evaluated on a correlator tensor."""
        return float(np.sum(self.coefficients * correlators))


def functional_from_terms(parties: int, terms, local_bound: float = None) -> BellFunctional:
    """
    Builds a functional from (subset, settings, coeff) terms; an empty
    subset is the constant term.
    """
    coefficients = np.zeros((3,) * parties)
    for subset, settings, coeff in terms:
        index = [0] * parties
        for party, setting in zip(subset, settings):
            index[party] = 1 + setting
        coefficients[tuple(index)] += coeff
    return BellFunctional(coefficients, local_bound)


def functional_to_json(f: BellFunctional) -> dict:
    """JSON form with one entry per nonzero coefficient."""
    terms = []
    for index in zip(*np.nonzero(f.coefficients)):
        subset = [party for party, s in enumerate(index) if s]
        terms.append({"subset": subset,
                      "settings": [int(index[p]) - 1 for p in subset],
                      "coeff": float(f.coefficients[index])})
    return {"parties": f.parties, "settings": SETTINGS, "terms": terms,
            "local_bound": f.local_bound}


def functional_from_json(document: dict) -> BellFunctional:
    """Inverse of functional_to_json; the stored bound is re-verified."""
    if document.get("settings", SETTINGS) != SETTINGS:
        raise ValueError("Only two settings per party are supported.")
    terms = [(t["subset"], t["settings"], t["coeff"]) for t in document["terms"]]
    return functional_from_terms(document["parties"], terms, document.get("local_bound"))


def chsh_functional(parties: int = 2, pair=(0, 1)) -> BellFunctional:
    """A0B0 + A0B1 + A1B0 - A1B1 on the given pair."""
    terms = [(pair, (x, y), -1.0 if x and y else 1.0) for x in (0, 1) for y in (0, 1)]
    return functional_from_terms(parties, terms)


def tripartite_functional() -> BellFunctional:
    """(1 + A) CHSH_BC + 2 (1 - A), with A the first setting of party 0."""
    terms = [((), (), 2.0), ((0,), (0,), -2.0)]
    for x in (0, 1):
        for y in (0, 1):
            sign = -1.0 if x and y else 1.0
            terms.append(((1, 2), (x, y), sign))
            terms.append(((0, 1, 2), (0, x, y), sign))
    return functional_from_terms(3, terms, 4.0)


def heralded_chsh(parties: int, pair=(0, 1), heralds=()) -> BellFunctional:
    """
    prod_j (1 + A_j) CHSH_pair + 2 (2^h - prod_j (1 + A_j)) over the h herald
    parties, each using its first setting. Local bound 2^(h+1); no heralds
    is plain CHSH.
    """
    heralds = tuple(sorted(heralds))
    if set(heralds) & set(pair):
        raise ValueError(f"Herald parties {heralds} overlap the CHSH pair {pair}")
    h = len(heralds)
    terms = [((), (), 2.0 ** (h + 1) - 2.0)]
    for size in range(h + 1):
        for subset in itertools.combinations(heralds, size):
            if subset:
                terms.append((subset, (0,) * size, -2.0))
            for x in (0, 1):
                for y in (0, 1):
                    sign = -1.0 if x and y else 1.0
                    terms.append((subset + tuple(pair), (0,) * size + (x, y), sign))
    return functional_from_terms(parties, terms, 2.0 ** (h + 1))


def mermin_functional(parties: int = 3, triple=(0, 1, 2)) -> BellFunctional:
    """A0B0C1 + A0B1C0 + A1B0C0 - A1B1C1 on the given triple; local bound 2."""
    terms = [(triple, (0, 0, 1), 1.0), (triple, (0, 1, 0), 1.0),
             (triple, (1, 0, 0), 1.0), (triple, (1, 1, 1), -1.0)]
    return functional_from_terms(parties, terms, 2.0)


@functools.lru_cache(maxsize=None)
def facet_library(k: int) -> tuple:
    """
    Known facet families tried before the LP loop: every pair's CHSH,
    plain and heralded by all other parties (and by a single party from
    four parties on), and Mermin on every triple.
    """
    _check_parties(k)
    library = []
    for pair in itertools.combinations(range(k), 2):
        others = tuple(p for p in range(k) if p not in pair)
        library.append(heralded_chsh(k, pair))
        if others:
            library.append(heralded_chsh(k, pair, others))
        if len(others) > 1:
            library.append(heralded_chsh(k, pair, others[:1]))
    for triple in itertools.combinations(range(k), 3):
        library.append(mermin_functional(k, triple))
    return tuple(library)


@dataclass(frozen=True, eq=False)
class BehaviorTable:
    """p(a_1..a_k | x_1..x_k); outcome index 0 is +1, index 1 is -1."""
    probs: np.ndarray

    @property
    def k(self) -> int:
        """Number of parties."""
        return self.probs.ndim // 2

    def correlators(self) -> np.ndarray:
        """Correlator tensor; parties not involved read setting 0."""
        k = self.k
        signs = np.array([1.0, -1.0])
        # lift[a, x, s]: contribution of outcome a under setting x to coordinate s
        lift = np.zeros((2, 2, 3))
        lift[:, 0, 0] = 1
        lift[:, 0, 1] = signs
        lift[:, 1, 2] = signs
        operands = [self.probs, list(range(2 * k))]
        for party in range(k):
            operands += [lift, [party, k + party, 2 * k + party]]
        return np.einsum(*operands, list(range(2 * k, 3 * k)), optimize=True)


def check_behavior(table: BehaviorTable, tol: float = 1e-9) -> None:
    """
    Raises ValueError unless every conditional distribution is normalized,
    nonnegative and the table is no-signalling.
    """
    k = table.k
    outcome_axes = tuple(range(k))
    sums = table.probs.sum(axis=outcome_axes)
    if np.max(np.abs(sums - 1)) > 1e-10:
        raise ValueError("Conditional distributions do not sum to one.")
    if np.min(table.probs) < -1e-12:
        raise ValueError("Negative probability in behavior.")
    for party in range(k):
        marginal = table.probs.sum(axis=party)
        setting_axis = k - 1 + party
        spread = np.max(np.abs(np.diff(marginal, axis=setting_axis)))
        if spread > tol:
            raise ValueError(f"Signalling from party {party} (deviation {spread})")


def behavior(rho: DensityOperator, scenario: MeasurementScenario) -> BehaviorTable:
    """Outcome probabilities from projectors (I +/- O_x)/2."""
    rho = as_density(rho)
    scenario.check(rho)
    k = rho.n
    tensor = rho.matrix.reshape(rho.dims + rho.dims)
    operands = [tensor, list(range(2 * k))]
    for party, (obs0, obs1) in enumerate(scenario.observables):
        identity = np.eye(obs0.d)
        projectors = np.array([[(identity + sign * obs.matrix) / 2 for obs in (obs0, obs1)]
                               for sign in (1, -1)])
        # projectors[a, x, c, r] contracted as tr(rho P)
        operands += [projectors, [2 * k + party, 3 * k + party, k + party, party]]
    probs = np.einsum(*operands, list(range(2 * k, 4 * k)), optimize=True).real
    return BehaviorTable(probs)


def correlator_tensor(rho: DensityOperator, scenario: MeasurementScenario) -> np.ndarray:
    """tr(rho (x) Op_{s_i}) for every choice s_i in {I, O_0, O_1}."""
    rho = as_density(rho)
    scenario.check(rho)
    k = rho.n
    operands = [rho.matrix.reshape(rho.dims + rho.dims), list(range(2 * k))]
    for party, ops in enumerate(scenario.correlation_ops()):
        operands += [ops, [2 * k + party, k + party, party]]
    return np.einsum(*operands, list(range(2 * k, 3 * k)), optimize=True).real


def functional_value(rho: DensityOperator, f: BellFunctional,
                     scenario: MeasurementScenario) -> float:
    """S = tr(B rho) for the functional's Bell operator in this scenario."""
    if f.parties != scenario.k:
        raise DimensionMismatch(f"Functional has {f.parties} parties, scenario {scenario.k}")
    return f.value(correlator_tensor(rho, scenario))


def bell_operator(f: BellFunctional, scenario: MeasurementScenario) -> np.ndarray:
    """The Hermitian operator B with S = tr(B rho)."""
    ops = scenario.correlation_ops()
    total = int(np.prod(scenario.dims))
    operator = np.zeros((total, total), dtype=complex)
    for index in zip(*np.nonzero(f.coefficients)):
        term = np.ones((1, 1))
        for party, s in enumerate(index):
            term = np.kron(term, ops[party][s])
        operator += f.coefficients[index] * term
    return operator


def chsh_value(rho2: DensityOperator, a0: DichotomicObservable, a1: DichotomicObservable,
               b0: DichotomicObservable, b1: DichotomicObservable) -> float:
    """<A0B0> + <A0B1> + <A1B0> - <A1B1>."""
    return functional_value(rho2, chsh_functional(), MeasurementScenario(((a0, a1), (b0, b1))))


def correlation_matrix(rho2: DensityOperator) -> np.ndarray:
    """T_ij = tr(rho sigma_i (x) sigma_j)."""
    rho2 = as_density(rho2)
    if rho2.dims != (2, 2):
        raise NotTwoQubits(f"Expected a two-qubit state, got dims {rho2.dims}")
    return np.array([[np.trace(rho2.matrix @ np.kron(si, sj)).real for sj in PAULIS]
                     for si in PAULIS])


@dataclass
class HorodeckiResult:
    """Maximal CHSH value with observables attaining it."""
    value: float
    scenario: MeasurementScenario


def horodecki_chsh_max(rho2: DensityOperator) -> HorodeckiResult:
    """
    Exact maximal CHSH value 2 sqrt(t1 + t2) over qubit observables,
    with optimal settings built from the singular vectors of T.
    """
    t = correlation_matrix(rho2)
    u, s, vt = np.linalg.svd(t)
    theta = math.atan2(s[1], s[0])
    b0 = math.cos(theta) * vt[0] + math.sin(theta) * vt[1]
    b1 = math.cos(theta) * vt[0] - math.sin(theta) * vt[1]
    scenario = MeasurementScenario((
        (bloch_observable(u[:, 0]), bloch_observable(u[:, 1])),
        (bloch_observable(b0), bloch_observable(b1)),
    ))
    eigenvalues = np.sort(np.linalg.eigvalsh(t.T @ t))[::-1]
    value = 2 * math.sqrt(max(0.0, eigenvalues[0] + eigenvalues[1]))
    return HorodeckiResult(value, scenario)


def tripartite_I(rho3: DensityOperator, a: DichotomicObservable, b, c) -> float:
    """
    (1 + A) CHSH_BC + 2 (1 - A); classical bound 4.
    b and c are pairs of observables.
    """
    if as_density(rho3).n != 3:
        raise DimensionMismatch("The tripartite expression needs three sites.")
    scenario = MeasurementScenario(((a, a), tuple(b), tuple(c)))
    return functional_value(rho3, tripartite_functional(), scenario)


@dataclass
class GMEWitnessResult:
    """Three-CHSH witness with its certification flags."""
    value: float
    chsh_values: tuple

    @property
    def gme_certified(self) -> bool:
        """Exceeds the biseparable bound 4 + 2 sqrt(2)."""
        return self.value > GME_BISEPARABLE_BOUND + CERTIFY_MARGIN

    @property
    def persistency_evidence(self) -> bool:
        """Every pairwise CHSH exceeds 2."""
        return all(v > 2 + CERTIFY_MARGIN for v in self.chsh_values)


# Pairs tested by the three CHSH terms, with the setting group each party uses
GME_PAIRS = (((0, 0), (1, 0)), ((0, 1), (2, 0)), ((1, 1), (2, 1)))


def gme_witness_S(rho3: DensityOperator, settings: dict) -> GMEWitnessResult:
    """
    CHSH_AB + CHSH_A'C + CHSH_B'C', each on its two-party marginal.
    `settings[(party, group)]` holds the two observables of that role.
    """
    rho3 = as_density(rho3)
    if rho3.n != 3:
        raise DimensionMismatch("The GME witness needs three sites.")
    values = []
    for (p, gp), (q, gq) in GME_PAIRS:
        marginal = reduced_state(rho3, [p, q])
        scenario = MeasurementScenario((settings[(p, gp)], settings[(q, gq)]))
        values.append(functional_value(marginal, chsh_functional(), scenario))
    return GMEWitnessResult(sum(values), tuple(values))


def gme_witness_optimize(rho3: DensityOperator, restarts: int, seed: int) -> tuple:
    """
    Maximizes each CHSH term of the witness independently by see-saw.
    Returns the witness result and the settings used.
    """
    rho3 = as_density(rho3)
    settings = {}
    for index, ((p, gp), (q, gq)) in enumerate(GME_PAIRS):
        marginal = reduced_state(rho3, [p, q])
        result = seesaw_maximize(marginal, chsh_functional(), restarts, seed + index)
        settings[(p, gp)], settings[(q, gq)] = result.scenario.observables
    return gme_witness_S(rho3, settings), settings


@dataclass
class LocalDecomposition:
    """Convex weights over deterministic strategies reproducing a behavior."""
    weights: np.ndarray
    residual: float

    def strategies(self, k: int) -> list:
        """(weight, per-party strategy) pairs with nonzero weight."""
        return [(float(w), vertex_strategies(i, k))
                for i, w in enumerate(self.weights) if w > 0]


@dataclass
class NonlocalWitness:
    """Separating hyperplane: violation = S - L > 0."""
    functional: BellFunctional
    violation: float


def _check_parties(k: int) -> None:
    if k > MAX_LP_PARTIES:
        raise ScenarioTooLarge(f"{k} parties exceed the LP limit of {MAX_LP_PARTIES}")


def most_violated_functional(correlators: np.ndarray) -> NonlocalWitness:
    """
    LP with the local bound fixed to 1: maximize g.t subject to g.v <= 1 for
    every deterministic vertex and no constant term. The uniform mixture of
    vertices is the zero tensor, an interior point, so the LP is bounded and
    its optimum is a supporting hyperplane of the polytope in the direction
    of t, nonzero for local behaviors too. The violation is recomputed
    exactly and is negative when the behavior is strictly local.
    """
    k = correlators.ndim
    _check_parties(k)
    vertices = vertex_matrix(k)
    target = correlators.reshape(-1)
    m = target.size
    bounds = [(0.0, 0.0)] + [(None, None)] * (m - 1)
    result = linprog(-target, A_ub=vertices, b_ub=np.ones(vertices.shape[0]), bounds=bounds,
                     method="highs", options=_LP_OPTIONS)
    if not result.success:
        logging.error("Witness LP failed: %s", result.message)
        raise RuntimeError(f"Witness LP failed: {result.message}")
    functional = BellFunctional(result.x.reshape((3,) * k))
    violation = functional.value(correlators) - functional.local_bound
    return NonlocalWitness(functional, violation)


def local_decomposition(correlators: np.ndarray) -> LocalDecomposition:
    """
    Best convex combination of deterministic vertices (L1 residual LP),
    polished by nonnegative least squares on the LP support.
    """
    k = correlators.ndim
    _check_parties(k)
    vertices = vertex_matrix(k)
    target = correlators.reshape(-1)
    n_vertices, m = vertices.shape
    a_eq = np.hstack([vertices.T, np.eye(m), -np.eye(m)])
    cost = np.concatenate([np.zeros(n_vertices), np.ones(2 * m)])
    result = linprog(cost, A_eq=a_eq, b_eq=target, bounds=(0, None),
                     method="highs", options=_LP_OPTIONS)
    if not result.success:
        raise RuntimeError(f"Decomposition LP failed: {result.message}")
    weights = np.clip(result.x[:n_vertices], 0, None)
    support = np.flatnonzero(weights > 1e-12)
    if support.size:
        polished, _ = nnls(vertices[support].T, target)
        weights = np.zeros(n_vertices)
        weights[support] = polished
    residual = float(np.max(np.abs(vertices.T @ weights - target)))
    return LocalDecomposition(weights, residual)


def local_polytope_membership(table: BehaviorTable):
    """
    Exact membership in the local polytope: a NonlocalWitness when some
    functional separates the behavior by more than CERTIFY_MARGIN,
    otherwise a LocalDecomposition.
    """
    correlators = table.correlators()
    _check_parties(correlators.ndim)
    witness = most_violated_functional(correlators)
    if witness.violation > CERTIFY_MARGIN:
        return witness
    decomposition = local_decomposition(correlators)
    if decomposition.residual > LP_RESIDUAL_TOL:
        logging.warning("Local decomposition residual %.3g above %.0e",
                        decomposition.residual, LP_RESIDUAL_TOL)
    return decomposition


def conditional_operators(rho: DensityOperator, f: BellFunctional,
                          scenario: MeasurementScenario, party: int) -> np.ndarray:
    """
    M[s] with S = tr(M[0]) + tr(O_0 M[1]) + tr(O_1 M[2]) when every
    other party's observables are held fixed.
    """
    k = rho.n
    operands = [rho.matrix.reshape(rho.dims + rho.dims), list(range(2 * k))]
    for other, ops in enumerate(scenario.correlation_ops()):
        if other != party:
            operands += [ops, [2 * k + other, k + other, other]]
    operands += [f.coefficients, list(range(2 * k, 3 * k))]
    return np.einsum(*operands, [2 * k + party, party, k + party], optimize=True)


@dataclass
class SeesawResult:
    """Best value found and the scenario attaining it."""
    value: float
    scenario: MeasurementScenario
    restart: int = 0


def _seesaw_run(rho: DensityOperator, f: BellFunctional, scenario: MeasurementScenario,
                sweeps: int) -> SeesawResult:
    value = functional_value(rho, f, scenario)
    best = SeesawResult(value, scenario)
    observables = [list(party) for party in scenario.observables]
    for _ in range(sweeps):
        for party in range(rho.n):
            current = MeasurementScenario(tuple(tuple(p) for p in observables))
            blocks = conditional_operators(rho, f, current, party)
            for setting in (0, 1):
                block = blocks[1 + setting]
                # a vanishing block leaves the setting free; keep it
                if np.max(np.abs(block)) > 1e-14:
                    observables[party][setting] = sign_observable(block)
        scenario = MeasurementScenario(tuple(tuple(p) for p in observables))
        new_value = functional_value(rho, f, scenario)
        if new_value > best.value:
            best = SeesawResult(new_value, scenario)
        if new_value - value < SEESAW_TOL:
            break
        value = new_value
    return best


def seesaw_maximize(rho, f: BellFunctional, restarts: int, seed: int,
                    sweeps: int = 500, initial: MeasurementScenario = None) -> SeesawResult:
    """
    Alternating optimization of one party's observables at a time.
    The first restart starts from `initial` when given; the best run wins,
    ties going to the lowest restart index.
    """
    rho = as_density(rho)
    if f.parties != rho.n:
        raise DimensionMismatch(f"Functional has {f.parties} parties, state {rho.n}")
    rng = np.random.default_rng(seed)
    best = None
    for restart in range(restarts):
        if restart == 0 and initial is not None:
            start = initial
        else:
            start = random_scenario(rho.dims, rng, randomize_subspace=restart > 0)
        result = _seesaw_run(rho, f, start, sweeps)
        result.restart = restart
        if best is None or result.value > best.value:
            best = result
    return best


@dataclass
class CertifiedNonlocal:
    """Re-checkable certificate: recomputed S exceeds L by the margin."""
    scenario: MeasurementScenario
    functional: BellFunctional
    value: float
    local_bound: float

    @property
    def gap(self) -> float:
        """S - L."""
        return self.value - self.local_bound

    def verify(self, rho: DensityOperator) -> bool:
        """Recomputes S from the state and L by enumeration."""
        recomputed = BellFunctional(self.functional.coefficients)
        value = functional_value(rho, recomputed, self.scenario)
        return value > recomputed.local_bound + CERTIFY_MARGIN


@dataclass
class NotFound:
    """No certificate within budget; not a proof of locality."""
    best_gap: float
    attempts: int


def certify(rho: DensityOperator, f: BellFunctional, scenario: MeasurementScenario):
    """CertifiedNonlocal when the functional is violated, else None."""
    value = functional_value(rho, f, scenario)
    if value > f.local_bound + CERTIFY_MARGIN:
        return CertifiedNonlocal(scenario, f, value, f.local_bound)
    return None


def _initial_scenarios(rho: DensityOperator, rng, restarts: int):
    """Horodecki settings for qubit pairs, the standard scenario, then random ones."""
    if rho.dims == (2, 2):
        yield horodecki_chsh_max(rho).scenario
    yield standard_scenario(rho.dims)
    for _ in range(restarts):
        yield random_scenario(rho.dims, rng)


def _relative_gap(value: float, local_bound: float) -> float:
    """(S - L) / |L|, comparable across functionals of different scale."""
    return (value - local_bound) / max(abs(local_bound), 1e-12)


def nonlocality_search(rho, restarts: int, seed: int, rounds: int = 6,
                       sweeps: int = 200, incumbent: CertifiedNonlocal = None):
    """
    Scenario -> behavior -> LP witness -> see-saw on the witness -> repeat,
    until a certificate is found or the budget is exhausted.
    An incumbent certificate is tried first, then see-saw on every
    functional of the facet library. NotFound.best_gap is relative to the
    local bound of the functional that came closest.
    """
    rho = as_density(rho)
    _check_parties(rho.n)
    if rho.n < 2:
        return NotFound(-math.inf, 0)
    if incumbent is not None:
        found = certify(rho, incumbent.functional, incumbent.scenario)
        if found:
            return found
        refined = seesaw_maximize(rho, incumbent.functional, 1, seed, sweeps,
                                  initial=incumbent.scenario)
        found = certify(rho, incumbent.functional, refined.scenario)
        if found:
            return found
    best_gap, attempts = -math.inf, 0
    library_start = next(_initial_scenarios(rho, None, 0))
    for index, functional in enumerate(facet_library(rho.n)):
        refined = seesaw_maximize(rho, functional, min(2, max(restarts, 1)), seed + index,
                                  sweeps, initial=library_start)
        found = certify(rho, functional, refined.scenario)
        if found:
            logging.info("Certified nonlocal by library functional %s, gap %.3g",
                         index, found.gap)
            return found
        best_gap = max(best_gap, _relative_gap(refined.value, functional.local_bound))
    rng = np.random.default_rng(seed)
    for attempt, scenario in enumerate(_initial_scenarios(rho, rng, restarts)):
        if attempt >= restarts:
            break
        attempts += 1
        previous = -math.inf
        for _ in range(rounds):
            correlators = correlator_tensor(rho, scenario)
            witness = most_violated_functional(correlators)
            found = certify(rho, witness.functional, scenario)
            if found:
                logging.info("Certified nonlocal after %s attempt(s), gap %.3g",
                             attempts, found.gap)
                return found
            refined = seesaw_maximize(rho, witness.functional, 1, seed + attempt, sweeps,
                                      initial=scenario)
            found = certify(rho, witness.functional, refined.scenario)
            if found:
                logging.info("Certified nonlocal after see-saw, gap %.3g", found.gap)
                return found
            gap = _relative_gap(refined.value, witness.functional.local_bound)
            best_gap = max(best_gap, gap)
            if gap <= previous + 1e-12:
                break
            previous = gap
            scenario = refined.scenario
    return NotFound(best_gap, attempts)


def _matrix_json(matrix: np.ndarray) -> list:
    return [[[float(v.real), float(v.imag)] for v in row] for row in matrix]


def _matrix_from_json(rows) -> np.ndarray:
    return np.array([[complex(re_, im) for re_, im in row] for row in rows])


def scenario_to_json(scenario: MeasurementScenario) -> list:
    """Per party, the two observable matrices as [re, im] pairs."""
    return [[_matrix_json(obs.matrix) for obs in party] for party in scenario.observables]


def scenario_from_json(document) -> MeasurementScenario:
    """Inverse of scenario_to_json; every observable is re-validated."""
    return MeasurementScenario(tuple(
        tuple(DichotomicObservable(_matrix_from_json(rows)) for rows in party)
        for party in document))


def certificate_to_json(cert: CertifiedNonlocal) -> dict:
    """Functional, bound and scenario: everything verify() needs."""
    return {"functional": functional_to_json(cert.functional),
            "scenario": scenario_to_json(cert.scenario),
            "value": cert.value,
            "local_bound": cert.local_bound,
            "gap": cert.gap}


def certificate_from_json(document: dict) -> CertifiedNonlocal:
    """Inverse of certificate_to_json; the local bound is re-enumerated."""
    functional = functional_from_json(document["functional"])
    scenario = scenario_from_json(document["scenario"])
    if scenario.k != functional.parties:
        raise DimensionMismatch(
            f"Scenario has {scenario.k} parties, functional {functional.parties}")
    return CertifiedNonlocal(scenario, functional, float(document["value"]),
                             functional.local_bound)

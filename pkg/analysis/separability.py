"""
Three-valued entanglement status for reduced states: certified entangled,
certified fully separable with an explicit decomposition, or unknown.
"""

import itertools
import logging
from dataclasses import dataclass, field
import numpy as np
from scipy.optimize import nnls
from quantum_core import (
    DensityOperator,
    StateVector,
    as_density,
    density_operator,
    hermitian_eig,
    partial_transpose,
    reduced_state,
    trace_distance,
)
from bell import (
    CertifiedNonlocal,
    MAX_LP_PARTIES,
    certificate_from_json,
    certificate_to_json,
    nonlocality_search,
)

NPT_TOL = -1e-9
EIGEN_CUTOFF = 1e-10
SCHMIDT_TOL = 1e-9
DEGENERACY_TOL = 1e-9
PROJECTION_ITERATIONS = 50
FIT_MAX_DIMENSION = 64
FIT_TOL = 1e-7
# Cheap Bell search run when every other certifier is inconclusive
BELL_FALLBACK_RESTARTS = 4

ENTANGLED = "entangled"
SEPARABLE = "separable"
UNKNOWN = "unknown"


@dataclass
class NPTWitness:
    """Bipartition whose partial transpose has a negative eigenvalue."""
    bipartition: tuple
    min_eig: float


@dataclass
class SubsystemWitness:
    """
    Entanglement witness of the reduced state on `sites`; entanglement of a
    reduced state implies entanglement of the whole.
    """
    sites: tuple
    witness: object


@dataclass
class SeparableDecomposition:
    """Convex mixture of fully product pure states."""
    weights: list
    product_states: list

    def matrix(self) -> np.ndarray:
        """Reconstructed density matrix."""
        total = None
        for weight, factors in zip(self.weights, self.product_states):
            vector = factors[0]
            for factor in factors[1:]:
                vector = np.kron(vector, factor)
            term = weight * np.outer(vector, vector.conj())
            total = term if total is None else total + term
        return total


@dataclass
class EntanglementStatus:
    """Verdict with the certificate that justifies it."""
    verdict: str
    witness: object = None
    decomposition: SeparableDecomposition = None
    notes: list = field(default_factory=list)


def bipartitions(n: int) -> list:
    """
    Every split of n sites into two nonempty parts, listed by the smaller
    side: by size, then lexicographically.
    """
    splits = []
    for size in range(1, n // 2 + 1):
        for subset in itertools.combinations(range(n), size):
            if 2 * size == n and 0 not in subset:
                continue
            splits.append(subset)
    return splits


def npt_any_bipartition(rho: DensityOperator):
    """First bipartition with a negative partial transpose, or None."""
    rho = as_density(rho)
    for subset in bipartitions(rho.n):
        min_eig = float(np.linalg.eigvalsh(partial_transpose(rho, subset))[0])
        if min_eig <= NPT_TOL:
            logging.debug("NPT across %s with eigenvalue %.3g", subset, min_eig)
            return NPTWitness(subset, min_eig)
    return None


def pure_partial_transpose_min(psi: StateVector, subset) -> float:
    """
    Smallest eigenvalue of the partial transpose of |psi><psi| across
    `subset`: -s_0 s_1 for the two largest Schmidt coefficients.
    """
    rest = [i for i in range(psi.n) if i not in subset]
    rows = int(np.prod([psi.dims[i] for i in subset]))
    flat = np.transpose(psi.tensor(), list(subset) + rest).reshape(rows, -1)
    schmidt = np.linalg.svd(flat, compute_uv=False)
    if schmidt.size < 2:
        return 0.0
    return float(-schmidt[0] * schmidt[1])


def pure_npt_witness(psi: StateVector):
    """NPT witness of a pure state from its Schmidt coefficients, or None."""
    for subset in bipartitions(psi.n):
        min_eig = pure_partial_transpose_min(psi, subset)
        if min_eig <= NPT_TOL:
            return NPTWitness(subset, min_eig)
    return None


def product_factors(vector, dims, tol: float = SCHMIDT_TOL):
    """
    Per-site vectors whose Kronecker product is `vector`, or None when
    some single-site cut has Schmidt rank above one.
    """
    tensor = np.asarray(vector).reshape(dims)
    factors = []
    for site in range(len(dims)):
        flat = np.moveaxis(tensor, site, 0).reshape(dims[site], -1)
        u, s, _ = np.linalg.svd(flat, full_matrices=False)
        if s.size > 1 and np.max(s[1:]) > tol:
            return None
        factors.append(u[:, 0])
    product = factors[0]
    for factor in factors[1:]:
        product = np.kron(product, factor)
    overlap = np.vdot(product, np.asarray(vector).reshape(-1))
    factors[0] = factors[0] * overlap / abs(overlap)
    return factors


def _closest_product(vector, dims, rng) -> np.ndarray:
    """Alternating rank-one approximation of a normalized vector."""
    tensor = np.asarray(vector).reshape(dims)
    factors = []
    for d in dims:
        start = rng.normal(size=d) + 1j * rng.normal(size=d)
        factors.append(start / np.linalg.norm(start))
    for _ in range(10):
        for site in range(len(dims)):
            contracted = np.moveaxis(tensor, site, 0)
            for other in reversed([o for o in range(len(dims)) if o != site]):
                position = other + 1 if other < site else other
                contracted = np.tensordot(contracted, factors[other].conj(),
                                          axes=([position], [0]))
            norm = np.linalg.norm(contracted)
            if norm > 0:
                factors[site] = contracted / norm
    product = factors[0]
    for factor in factors[1:]:
        product = np.kron(product, factor)
    return product


def _product_basis(space: np.ndarray, dims, rng):
    """
    Orthonormal product basis of the span of the columns of `space`, found
    by alternating projections, or None.
    """
    found = []
    basis_order = np.argsort(-np.sum(np.abs(space) ** 2, axis=1))
    for _ in range(space.shape[1]):
        remaining = space
        if found:
            used = np.column_stack(found)
            deflated = space - used @ (used.conj().T @ space)
            u, s, _ = np.linalg.svd(deflated, full_matrices=False)
            remaining = u[:, s > 1e-8]
        candidate = None
        for index in basis_order:
            start = remaining @ remaining[index].conj()
            if np.linalg.norm(start) < 1e-6:
                continue
            vector = start / np.linalg.norm(start)
            for _ in range(PROJECTION_ITERATIONS):
                product = _closest_product(vector, dims, rng)
                projected = remaining @ (remaining.conj().T @ product)
                if np.linalg.norm(projected - product) <= SCHMIDT_TOL:
                    candidate = product
                    break
                vector = projected / np.linalg.norm(projected)
            if candidate is not None:
                break
        if candidate is None:
            return None
        found.append(candidate)
    return found


def product_eigenbasis_certify(rho: DensityOperator, seed: int = 0):
    """
    Separable decomposition from the eigen-mixture of rho when every
    eigenspace with positive eigenvalue has an orthonormal product basis.
    """
    rho = as_density(rho)
    values, vectors = hermitian_eig(rho.matrix)
    rng = np.random.default_rng(seed)
    weights, states = [], []
    start = 0
    while start < len(values) and values[start] > EIGEN_CUTOFF:
        stop = start + 1
        while stop < len(values) and abs(values[stop] - values[start]) <= DEGENERACY_TOL:
            stop += 1
        space = vectors[:, start:stop]
        if space.shape[1] == 1:
            basis = [space[:, 0]]
        else:
            basis = _product_basis(space, rho.dims, rng)
            if basis is None:
                return None
        for vector in basis:
            factors = product_factors(vector, rho.dims)
            if factors is None:
                return None
            weights.append(float(np.mean(values[start:stop])))
            states.append(factors)
        start = stop
    total = sum(weights)
    return SeparableDecomposition([w / total for w in weights], states)


def _random_product(dims, rng) -> list:
    factors = []
    for d in dims:
        vector = rng.normal(size=d) + 1j * rng.normal(size=d)
        factors.append(vector / np.linalg.norm(vector))
    return factors


def _hermitian_coordinates(matrix: np.ndarray) -> np.ndarray:
    """Real coordinates of a Hermitian matrix: diagonal, then real and imaginary upper parts."""
    upper = np.triu_indices(matrix.shape[0], 1)
    return np.concatenate([matrix.diagonal().real,
                           np.sqrt(2) * matrix[upper].real,
                           np.sqrt(2) * matrix[upper].imag])


def separable_fit(rho: DensityOperator, budget: int, seed: int = 0):
    """
    Nonnegative least-squares fit of rho by sampled product states
    (computational basis products first, then random ones).
    """
    rho = as_density(rho)
    total = rho.register.total
    if total > FIT_MAX_DIMENSION:
        logging.info("Skipping separable fit for dimension %s", total)
        return None
    rng = np.random.default_rng(seed)
    candidates = []
    for digits in itertools.product(*[range(d) for d in rho.dims]):
        candidates.append([np.eye(d)[j].astype(complex) for d, j in zip(rho.dims, digits)])
    candidates += [_random_product(rho.dims, rng) for _ in range(budget)]

    columns = []
    for factors in candidates:
        vector = factors[0]
        for factor in factors[1:]:
            vector = np.kron(vector, factor)
        columns.append(_hermitian_coordinates(np.outer(vector, vector.conj())))
    design = np.column_stack(columns)
    weights, _ = nnls(design, _hermitian_coordinates(rho.matrix))
    support = np.flatnonzero(weights > 0)
    if not support.size:
        return None
    decomposition = SeparableDecomposition(
        list(weights[support] / weights[support].sum()),
        [candidates[i] for i in support])
    if not verify_decomposition(rho, decomposition):
        return None
    return decomposition


def _pure_product_distance(psi: StateVector, factors) -> float:
    """Trace distance between |psi> and the product of `factors`."""
    tensor = psi.tensor()
    for factor in reversed(factors):
        tensor = tensor @ np.asarray(factor).conj()
    fidelity = min(1.0, abs(complex(tensor)) ** 2)
    return float(np.sqrt(1 - fidelity))


def verify_decomposition(rho, decomposition: SeparableDecomposition) -> bool:
    """
    Weights form a distribution and the mixture reproduces rho. A pure
    state is compared with a single product term by overlap.
    """
    weights = np.asarray(decomposition.weights)
    if np.any(weights < 0) or abs(weights.sum() - 1) > 1e-10:
        return False
    if isinstance(rho, StateVector) and len(decomposition.weights) == 1:
        factors = decomposition.product_states[0]
        if [len(f) for f in factors] != list(rho.dims):
            return False
        return _pure_product_distance(rho, factors) <= FIT_TOL
    rho = as_density(rho)
    reconstructed = decomposition.matrix()
    if reconstructed.shape != rho.matrix.shape:
        return False
    reconstructed = (reconstructed + reconstructed.conj().T) / 2
    reconstructed = reconstructed / np.trace(reconstructed).real
    distance = trace_distance(rho, density_operator(reconstructed, rho.dims))
    return distance <= FIT_TOL


def verify_witness(rho, witness) -> bool:
    """Recomputes an NPT, Bell or subsystem certificate from scratch."""
    if isinstance(witness, SubsystemWitness):
        return verify_witness(reduced_state(rho, witness.sites), witness.witness)
    if isinstance(witness, NPTWitness):
        if isinstance(rho, StateVector):
            return pure_partial_transpose_min(rho, witness.bipartition) <= NPT_TOL
        min_eig = np.linalg.eigvalsh(partial_transpose(as_density(rho), witness.bipartition))[0]
        return min_eig <= NPT_TOL
    if isinstance(witness, CertifiedNonlocal):
        return witness.verify(as_density(rho))
    return False


def pure_status(psi: StateVector) -> EntanglementStatus:
    """
    Exact status of a pure state: NPT across some cut, or a product.
    Never builds the density matrix.
    """
    witness = pure_npt_witness(psi)
    if witness is not None:
        return EntanglementStatus(ENTANGLED, witness=witness)
    factors = product_factors(psi.amplitudes, psi.dims)
    if factors is not None:
        return EntanglementStatus(SEPARABLE, decomposition=SeparableDecomposition([1.0], [factors]))
    logging.warning("Pure state neither NPT nor product within tolerance")
    return EntanglementStatus(UNKNOWN)


def entanglement_status(rho, fit_samples: int = 2000, seed: int = 0,
                        bell_fallback: bool = True) -> EntanglementStatus:
    """
    NPT scan, then product eigenbasis, then separable fit, then a cheap
    Bell search; Unknown when none of them decides. Pure states are
    decided exactly from their Schmidt coefficients.
    """
    if isinstance(rho, StateVector):
        return pure_status(rho)
    rho = as_density(rho)
    if rho.n == 1:
        values, vectors = hermitian_eig(rho.matrix)
        keep = values > EIGEN_CUTOFF
        return EntanglementStatus(SEPARABLE, decomposition=SeparableDecomposition(
            list(values[keep] / values[keep].sum()), [[v] for v in vectors[:, keep].T]))

    witness = npt_any_bipartition(rho)
    if witness is not None:
        return EntanglementStatus(ENTANGLED, witness=witness)

    decomposition = product_eigenbasis_certify(rho, seed)
    if decomposition is not None and verify_decomposition(rho, decomposition):
        return EntanglementStatus(SEPARABLE, decomposition=decomposition)

    decomposition = separable_fit(rho, fit_samples, seed)
    if decomposition is not None:
        return EntanglementStatus(SEPARABLE, decomposition=decomposition)

    if bell_fallback and rho.n <= MAX_LP_PARTIES:
        found = nonlocality_search(rho, BELL_FALLBACK_RESTARTS, seed, rounds=3, sweeps=50)
        if isinstance(found, CertifiedNonlocal):
            return EntanglementStatus(ENTANGLED, witness=found, notes=["bell certificate"])

    logging.warning("Entanglement status of a %s-site state left unknown", rho.n)
    return EntanglementStatus(UNKNOWN)


def verify_status(rho, status: EntanglementStatus) -> bool:
    """Re-verifies the certificate a status carries."""
    if status.verdict == ENTANGLED:
        return verify_witness(rho, status.witness)
    if status.verdict == SEPARABLE:
        return verify_decomposition(rho, status.decomposition)
    return True


def _vector_json(vector) -> list:
    return [[float(v.real), float(v.imag)] for v in vector]


def _witness_to_json(witness) -> dict:
    if isinstance(witness, NPTWitness):
        return {"bipartition": list(witness.bipartition), "min_eig": witness.min_eig}
    if isinstance(witness, SubsystemWitness):
        return {"sites": list(witness.sites), "subsystem": _witness_to_json(witness.witness)}
    return {"bell": certificate_to_json(witness)}


def _witness_from_json(document: dict):
    if "bipartition" in document:
        return NPTWitness(tuple(document["bipartition"]), document["min_eig"])
    if "subsystem" in document:
        return SubsystemWitness(tuple(document["sites"]), _witness_from_json(document["subsystem"]))
    if "bell" in document:
        return certificate_from_json(document["bell"])
    raise ValueError(f"Unrecognized witness document with keys {sorted(document)}")


def status_to_json(status: EntanglementStatus) -> dict:
    """Certificate document carrying everything verify_status needs."""
    if status.verdict == SEPARABLE:
        return {"verdict": SEPARABLE,
                "weights": [float(w) for w in status.decomposition.weights],
                "product_states": [[_vector_json(f) for f in factors]
                                   for factors in status.decomposition.product_states]}
    if status.verdict == ENTANGLED:
        document = {"verdict": ENTANGLED}
        document.update(_witness_to_json(status.witness))
        return document
    return {"verdict": UNKNOWN}


def status_from_json(document: dict) -> EntanglementStatus:
    """Inverse of status_to_json."""
    verdict = document["verdict"]
    if verdict == SEPARABLE:
        states = [[np.array([complex(re_, im) for re_, im in f]) for f in factors]
                  for factors in document["product_states"]]
        return EntanglementStatus(SEPARABLE, decomposition=SeparableDecomposition(
            list(document["weights"]), states))
    if verdict == ENTANGLED:
        return EntanglementStatus(ENTANGLED, witness=_witness_from_json(document))
    return EntanglementStatus(UNKNOWN)

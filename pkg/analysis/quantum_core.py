"""
Dense linear algebra over registers of qudits: state types, tensor products,
partial trace and transpose, local filtering, white noise and distances.
Site indices are 0-based and always refer to the original register.
"""

import itertools
import logging
from dataclasses import dataclass
import numpy as np
from scipy import linalg

# Largest total dimension allowed for a density operator
MAX_DENSITY_DIMENSION = 2 ** 14
# Largest total dimension allowed for a pure state (fcbell:5 and Psi_7 fit)
MAX_VECTOR_DIMENSION = 2 ** 20

NORM_TOL = 1e-12
HERMITIAN_TOL = 1e-10
TRACE_TOL = 1e-10
PSD_TOL = -1e-9

SIGMA_X = np.array([[0, 1], [1, 0]], dtype=complex)
SIGMA_Y = np.array([[0, -1j], [1j, 0]], dtype=complex)
SIGMA_Z = np.array([[1, 0], [0, -1]], dtype=complex)
PAULIS = (SIGMA_X, SIGMA_Y, SIGMA_Z)


class InvalidState(ValueError):
    """A state or operator breaks its defining invariants."""


class DimensionMismatch(ValueError):
    """Operands live on incompatible registers."""


class DimensionBudgetExceeded(ValueError):
    """A register is larger than the dense representation allows."""


class TracedAllSites(ValueError):
    """A partial trace would leave no site behind."""


class NotHermitian(ValueError):
    """A matrix expected to be Hermitian is not."""


class ZeroSuccessProbability(ValueError):
    """A local filter annihilates the state."""


@dataclass(frozen=True)
class QuditRegister:
    """Per-site local dimensions of a register."""
    dims: tuple

    def __post_init__(self):
        object.__setattr__(self, "dims", tuple(int(d) for d in self.dims))
        if not self.dims:
            raise InvalidState("A register needs at least one site.")
        if any(d < 2 for d in self.dims):
            raise InvalidState(f"Local dimensions must be at least 2: {self.dims}")

    @property
    def n(self) -> int:
        """Number of sites."""
        return len(self.dims)

    @property
    def total(self) -> int:
        """Total Hilbert space dimension."""
        return int(np.prod(self.dims))

    def drop(self, sites) -> "QuditRegister":
        """Register left after removing the given sites."""
        return QuditRegister(tuple(d for i, d in enumerate(self.dims) if i not in set(sites)))


@dataclass(frozen=True, eq=False)
class StateVector:
    """A normalized pure state on a register."""
    register: QuditRegister
    amplitudes: np.ndarray

    def __post_init__(self):
        amplitudes = np.asarray(self.amplitudes, dtype=complex).reshape(-1)
        if amplitudes.size != self.register.total:
            raise DimensionMismatch(
                f"{amplitudes.size} amplitudes for a register of dimension {self.register.total}")
        if amplitudes.size > MAX_VECTOR_DIMENSION:
            raise DimensionBudgetExceeded(
                f"Pure state dimension {amplitudes.size} exceeds {MAX_VECTOR_DIMENSION}")
        norm = np.linalg.norm(amplitudes)
        if abs(norm - 1) > NORM_TOL:
            raise InvalidState(f"State vector norm is {norm}, expected 1")
        amplitudes.setflags(write=False)
        object.__setattr__(self, "amplitudes", amplitudes)

    @property
    def dims(self) -> tuple:
        """Local dimensions."""
        return self.register.dims

    @property
    def n(self) -> int:
        """Number of sites."""
        return self.register.n

    def tensor(self) -> np.ndarray:
        """Amplitudes reshaped with one axis per site."""
        return self.amplitudes.reshape(self.dims)


@dataclass(frozen=True, eq=False)
class DensityOperator:
    """A density operator on a register, validated on construction."""
    register: QuditRegister
    matrix: np.ndarray

    def __post_init__(self):
        matrix = np.asarray(self.matrix, dtype=complex)
        total = self.register.total
        if matrix.shape != (total, total):
            raise DimensionMismatch(
                f"Matrix of shape {matrix.shape} for a register of dimension {total}")
        if total > MAX_DENSITY_DIMENSION:
            raise DimensionBudgetExceeded(
                f"Density operator dimension {total} exceeds {MAX_DENSITY_DIMENSION}")
        asymmetry = np.max(np.abs(matrix - matrix.conj().T))
        if asymmetry > HERMITIAN_TOL:
            raise InvalidState(f"Density operator is not Hermitian (deviation {asymmetry})")
        trace = np.trace(matrix).real
        if abs(trace - 1) > TRACE_TOL:
            raise InvalidState(f"Density operator trace is {trace}, expected 1")
        min_eig = np.linalg.eigvalsh(matrix)[0]
        if min_eig < PSD_TOL:
            raise InvalidState(f"Density operator has negative eigenvalue {min_eig}")
        matrix.setflags(write=False)
        object.__setattr__(self, "matrix", matrix)

    @property
    def dims(self) -> tuple:
        """Local dimensions."""
        return self.register.dims

    @property
    def n(self) -> int:
        """Number of sites."""
        return self.register.n


def state_vector(amplitudes, dims) -> StateVector:
    """
    Builds a StateVector from raw amplitudes, normalizing them first.
    """
    amplitudes = np.asarray(amplitudes, dtype=complex).reshape(-1)
    norm = np.linalg.norm(amplitudes)
    if norm == 0:
        raise InvalidState("Cannot normalize the zero vector.")
    return StateVector(QuditRegister(tuple(dims)), amplitudes / norm)


def density_operator(matrix, dims) -> DensityOperator:
    """Wraps a matrix as a DensityOperator on the given dims."""
    return DensityOperator(QuditRegister(tuple(dims)), np.asarray(matrix, dtype=complex))


def basis_state(digits, dims) -> StateVector:
    """Computational basis state |digits> on the given dims."""
    amplitudes = np.zeros(int(np.prod(dims)), dtype=complex)
    amplitudes[np.ravel_multi_index(tuple(digits), tuple(dims))] = 1
    return StateVector(QuditRegister(tuple(dims)), amplitudes)


def check_density_budget(total: int) -> None:
    """Raises DimensionBudgetExceeded before a too-large matrix is allocated."""
    if total > MAX_DENSITY_DIMENSION:
        raise DimensionBudgetExceeded(
            f"Density operator dimension {total} exceeds {MAX_DENSITY_DIMENSION}")


def as_density(state) -> DensityOperator:
    """
    Returns the density operator of a state.
    Density operators are returned unchanged.
    """
    if isinstance(state, DensityOperator):
        return state
    check_density_budget(state.register.total)
    psi = state.amplitudes
    return DensityOperator(state.register, np.outer(psi, psi.conj()))


def maximally_mixed(dims) -> DensityOperator:
    """I/D on the given dims."""
    total = int(np.prod(dims))
    return density_operator(np.eye(total) / total, dims)


def tensor_product(a, b):
    """
    Kronecker product of two states of the same kind, with a on the left.
    """
    register = QuditRegister(a.dims + b.dims)
    if isinstance(a, StateVector) and isinstance(b, StateVector):
        return StateVector(register, np.kron(a.amplitudes, b.amplitudes))
    if isinstance(a, DensityOperator) and isinstance(b, DensityOperator):
        return DensityOperator(register, np.kron(a.matrix, b.matrix))
    raise TypeError("tensor_product needs two StateVectors or two DensityOperators")


def _check_sites(sites, n: int) -> list:
    sites = sorted(set(int(s) for s in sites))
    if any(s < 0 or s >= n for s in sites):
        raise ValueError(f"Site indices {sites} outside 0..{n - 1}")
    return sites


def _reduce_vector(state: StateVector, traced: list) -> np.ndarray:
    keep = [i for i in range(state.n) if i not in traced]
    tensor = np.transpose(state.tensor(), keep + traced)
    kept_dim = int(np.prod([state.dims[i] for i in keep]))
    check_density_budget(kept_dim)
    flat = tensor.reshape(kept_dim, -1)
    return flat @ flat.conj().T


def _reduce_matrix(rho: DensityOperator, traced: list) -> np.ndarray:
    n = rho.n
    tensor = rho.matrix.reshape(rho.dims + rho.dims)
    rows = list(range(n))
    cols = [i if i in traced else n + i for i in range(n)]
    keep = [i for i in range(n) if i not in traced]
    out = keep + [n + i for i in keep]
    reduced = np.einsum(tensor, rows + cols, out)
    kept_dim = int(np.prod([rho.dims[i] for i in keep]))
    return reduced.reshape(kept_dim, kept_dim)


def partial_trace(state, traced_sites) -> DensityOperator:
    """
    Traces out the given sites. Remaining sites keep their relative order.
    Pure states are contracted directly, without building the full density matrix.
    """
    traced = _check_sites(traced_sites, state.n)
    if len(traced) == state.n:
        raise TracedAllSites(f"Cannot trace out every site of a {state.n}-site register")
    if not traced:
        return as_density(state)
    if isinstance(state, StateVector):
        matrix = _reduce_vector(state, traced)
    else:
        matrix = _reduce_matrix(state, traced)
    matrix = (matrix + matrix.conj().T) / 2
    return DensityOperator(state.register.drop(traced), matrix)


def reduced_state(state, kept_sites) -> DensityOperator:
    """Reduced state on the kept sites, everything else traced out."""
    kept = _check_sites(kept_sites, state.n)
    return partial_trace(state, [i for i in range(state.n) if i not in kept])


def partial_transpose(rho: DensityOperator, subset) -> np.ndarray:
    """
    Transposes the tensor factors in subset and returns the Hermitian matrix.
    """
    subset = _check_sites(subset, rho.n)
    if not subset or len(subset) == rho.n:
        raise ValueError("Partial transpose needs a nonempty proper subset of sites.")
    n = rho.n
    tensor = rho.matrix.reshape(rho.dims + rho.dims)
    axes = list(range(2 * n))
    for site in subset:
        axes[site], axes[n + site] = axes[n + site], axes[site]
    return np.transpose(tensor, axes).reshape(rho.matrix.shape)


def hermitian_eig(m) -> tuple:
    """
    Eigendecomposition of a Hermitian matrix, eigenvalues in descending order.
    """
    m = np.asarray(m, dtype=complex)
    scale = max(1.0, np.max(np.abs(m))) if m.size else 1.0
    if m.ndim != 2 or m.shape[0] != m.shape[1]:
        raise NotHermitian(f"Expected a square matrix, got shape {m.shape}")
    if np.max(np.abs(m - m.conj().T)) > 1e-8 * scale:
        raise NotHermitian("Matrix is not Hermitian within tolerance.")
    values, vectors = linalg.eigh((m + m.conj().T) / 2)
    return values[::-1], vectors[:, ::-1]


def operator_norm(m) -> float:
    """Largest absolute eigenvalue of a Hermitian matrix."""
    values, _ = hermitian_eig(m)
    return float(np.max(np.abs(values)))


def embed_on_subspace(block, d: int, subspace=(0, 1), complement: float = 1.0) -> np.ndarray:
    """
    Places a 2x2 block on span{|subspace[0]>, |subspace[1]>} of a d-level site,
    with `complement` times the identity on the orthogonal levels.
    """
    if len(set(subspace)) != 2 or max(subspace) >= d:
        raise ValueError(f"Invalid qubit subspace {subspace} for local dimension {d}")
    full = complement * np.eye(d, dtype=complex)
    idx = np.array(subspace)
    full[np.ix_(idx, idx)] = np.asarray(block, dtype=complex)
    return full


def local_operator(op, site: int, dims) -> np.ndarray:
    """Kronecker embedding of a single-site operator into the full register."""
    left = int(np.prod(dims[:site]))
    right = int(np.prod(dims[site + 1:]))
    return np.kron(np.kron(np.eye(left), op), np.eye(right))


def apply_local_filter(rho: DensityOperator, site: int, filt, subspace=(0, 1)) -> tuple:
    """
    Applies the local filter F (a 2x2 matrix on a qubit subspace of the site,
    identity elsewhere) and returns the renormalized state with the
    success probability tr(F rho F^dagger).
    """
    filt = np.asarray(filt, dtype=complex)
    if np.linalg.svd(filt, compute_uv=False)[0] > 1 + 1e-12:
        raise ValueError("Filter singular values must not exceed 1.")
    full = local_operator(embed_on_subspace(filt, rho.dims[site], subspace), site, rho.dims)
    filtered = full @ rho.matrix @ full.conj().T
    probability = float(np.trace(filtered).real)
    if probability < 1e-14:
        raise ZeroSuccessProbability(f"Filter on site {site} annihilates the state.")
    filtered = filtered / probability
    filtered = (filtered + filtered.conj().T) / 2
    return DensityOperator(rho.register, filtered), probability


def apply_diagonal_filters(rho: DensityOperator, epsilons) -> tuple:
    """
    Applies diag(eps_i, 1) on every site in turn.
    Returns the filtered state and the overall success probability.
    """
    probability = 1.0
    for site, eps in enumerate(epsilons):
        rho, step = apply_local_filter(rho, site, np.diag([eps, 1.0]))
        probability *= step
    return rho, probability


def mix_with_white_noise(psi, w: float) -> DensityOperator:
    """w |psi><psi| + (1 - w) I / D."""
    if not 0 <= w <= 1:
        raise ValueError(f"Visibility w={w} outside [0, 1]")
    rho = as_density(psi)
    total = rho.register.total
    return DensityOperator(rho.register, w * rho.matrix + (1 - w) * np.eye(total) / total)


def trace_distance(rho: DensityOperator, sigma: DensityOperator) -> float:
    """Half the trace norm of rho - sigma."""
    if rho.dims != sigma.dims:
        raise DimensionMismatch(f"Registers differ: {rho.dims} vs {sigma.dims}")
    values = np.linalg.eigvalsh(rho.matrix - sigma.matrix)
    return float(min(1.0, 0.5 * np.sum(np.abs(values))))


def permute_sites(state, perm):
    """
    Reorders sites so that new site i is old site perm[i].
    """
    perm = list(perm)
    dims = tuple(state.dims[p] for p in perm)
    register = QuditRegister(dims)
    if isinstance(state, StateVector):
        return StateVector(register, np.transpose(state.tensor(), perm).reshape(-1))
    n = state.n
    tensor = state.matrix.reshape(state.dims + state.dims)
    moved = np.transpose(tensor, perm + [n + p for p in perm])
    return DensityOperator(register, moved.reshape(state.matrix.shape))


def cyclic_shift(state, steps: int = 1):
    """Moves every site forward by `steps` positions around the ring."""
    n = state.n
    return permute_sites(state, [(i - steps) % n for i in range(n)])


def symmetrize(rho: DensityOperator) -> DensityOperator:
    """
    Average of rho over all site permutations. Requires equal local dimensions.
    """
    if len(set(rho.dims)) != 1:
        raise DimensionMismatch("Symmetrization needs equal local dimensions.")
    perms = list(itertools.permutations(range(rho.n)))
    total = sum(permute_sites(rho, perm).matrix for perm in perms)
    logging.debug("Symmetrized over %s permutations", len(perms))
    return DensityOperator(rho.register, total / len(perms))


def expectation(rho: DensityOperator, operator) -> float:
    """Real part of tr(rho O)."""
    return float(np.real(np.einsum("ij,ji->", rho.matrix, operator)))


def random_density(dims, rng, rank: int = None) -> DensityOperator:
    """
    Random density operator from a Ginibre matrix of the given rank
    (full rank by default).
    """
    total = int(np.prod(dims))
    rank = rank or total
    ginibre = rng.normal(size=(total, rank)) + 1j * rng.normal(size=(total, rank))
    matrix = ginibre @ ginibre.conj().T
    return density_operator(matrix / np.trace(matrix).real, dims)


def random_pure(dims, rng) -> StateVector:
    """Haar-random pure state."""
    total = int(np.prod(dims))
    return state_vector(rng.normal(size=total) + 1j * rng.normal(size=total), dims)

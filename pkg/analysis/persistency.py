"""
Persistency of entanglement and nonlocality, hidden nonlocality under local
filtering, the strength of persistency against white noise, the closed-form
cluster bounds and the asymmetry bound.
"""

import itertools
import logging
import math
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
import numpy as np
from scipy.optimize import minimize_scalar
from quantum_core import (
    MAX_DENSITY_DIMENSION,
    DensityOperator,
    DimensionBudgetExceeded,
    StateVector,
    ZeroSuccessProbability,
    apply_diagonal_filters,
    as_density,
    operator_norm,
    reduced_state,
)
from bell import (
    CertifiedNonlocal,
    MAX_LP_PARTIES,
    certificate_from_json,
    certificate_to_json,
    certify,
    correlator_tensor,
    horodecki_chsh_max,
    most_violated_functional,
    nonlocality_search,
    seesaw_maximize,
    standard_scenario,
)
from separability import (
    ENTANGLED,
    SEPARABLE,
    UNKNOWN,
    EntanglementStatus,
    SubsystemWitness,
    entanglement_status,
    status_from_json,
    status_to_json,
    verify_status,
    verify_witness,
)
from utilities import Budget, sub_seed

MAX_SITES = 8
# Smallest epsilon tried by the filter line search
EPS_MIN = 1e-3
FILTER_XTOL = 1e-4
FILTER_CYCLES = 3
FILTER_SEESAW_SWEEPS = 20


class TooManySites(ValueError):
    """Subset enumeration is limited to MAX_SITES sites."""


class ZeroOperator(ValueError):
    """Bell operator with vanishing norm."""


@dataclass
class EntanglementPersistency:
    """P_E interval with the evidence for each end."""
    lo: int
    hi: int
    sep_subset: tuple = None
    ent_witnesses: dict = field(default_factory=dict)
    statuses: dict = field(default_factory=dict)

    @property
    def exact(self) -> bool:
        """Interval closed."""
        return self.lo == self.hi


@dataclass
class NonlocalityPersistency:
    """Certified lower bound on P_NL (or P*_NL) with per-subset certificates."""
    lb: int
    certs: dict = field(default_factory=dict)
    notes: list = field(default_factory=list)


@dataclass
class FilteredCertificate:
    """Bell certificate on the reduced state after diag(eps, 1) filters."""
    certificate: CertifiedNonlocal
    epsilons: tuple
    probability: float

    def verify(self, rho: DensityOperator) -> bool:
        """Re-applies the filters to rho and re-checks the certificate."""
        filtered, _ = apply_diagonal_filters(as_density(rho), self.epsilons)
        return self.certificate.verify(filtered)


@dataclass
class StrengthResult:
    """
    Noise threshold w* with its bisection bracket. w and bracket are None
    when some residue could not be certified nonlocal even without noise;
    those residues are listed in `unresolved`.
    """
    w: float
    bracket: tuple
    k_remove: int
    thresholds: dict = field(default_factory=dict)
    unresolved: list = field(default_factory=list)

    @property
    def resolved(self) -> bool:
        """Every residue has a certified threshold."""
        return not self.unresolved


@dataclass
class PersistencyReport:
    """Everything computed for one state."""
    spec: str
    n: int
    pe: EntanglementPersistency = None
    pnl: NonlocalityPersistency = None
    pnl_star: NonlocalityPersistency = None
    strength: StrengthResult = None
    budget: Budget = None
    seed: int = 0
    elapsed_ms: float = None
    notes: list = field(default_factory=list)


def removal_subsets(n: int, size: int) -> list:
    """Sites to trace out, in lexicographic order."""
    return list(itertools.combinations(range(n), size))


def residue(state, removed):
    """
    Reduced state after tracing out the removed sites. With nothing removed
    a pure state is returned as it is, so it can exceed the density budget.
    """
    if not removed and isinstance(state, StateVector):
        return state
    return reduced_state(state, [i for i in range(state.n) if i not in removed])


def _parallel_map(func, items, jobs: int) -> list:
    if jobs <= 1:
        return [func(item) for item in items]
    with ThreadPoolExecutor(max_workers=jobs) as executor:
        return list(executor.map(func, items))


def _residue_seed(seed: int, removed) -> int:
    """Seed of one residue, fixed by its removed sites alone."""
    return sub_seed(seed, sum(1 << i for i in removed))


def _implied_status(state, removed, status_of) -> EntanglementStatus:
    """
    Status of a residue too large for a density matrix, from its largest
    sub-residues that fit: the first entangled one certifies it.
    """
    kept = [i for i in range(state.n) if i not in removed]
    for extra in range(1, len(kept) - 1):
        fitting = [dropped for dropped in itertools.combinations(kept, extra)
                   if math.prod(state.dims[i] for i in kept if i not in dropped)
                   <= MAX_DENSITY_DIMENSION]
        for dropped in fitting:
            sub_removed = tuple(sorted(tuple(removed) + dropped))
            status = status_of(sub_removed)
            if status.verdict == ENTANGLED:
                sites = tuple(kept.index(i) for i in kept if i not in dropped)
                return EntanglementStatus(
                    ENTANGLED, witness=SubsystemWitness(sites, status.witness),
                    notes=[f"implied by residue without {sub_removed}"])
        if fitting:
            break
    logging.warning("Residue without %s exceeds the density budget and no sub-residue "
                    "certifies it", removed)
    return EntanglementStatus(UNKNOWN, notes=["exceeds density budget"])


def persistency_entanglement(state, budget: Budget, seed: int = 0,
                             jobs: int = 1) -> EntanglementPersistency:
    """
    Walks removal sizes upwards until some residue is certified separable.
    lo is the largest k with every residue after k-1 removals certified
    entangled; hi the smallest k with some residue certified separable.
    Residues above the density budget are decided from their sub-residues.
    """
    n = state.n
    if n > MAX_SITES:
        raise TooManySites(f"{n} sites exceed the limit of {MAX_SITES}")
    result = EntanglementPersistency(lo=1, hi=max(1, n - 1))
    cache = {}

    def status_of(removed):
        if removed not in cache:
            cache[removed] = entanglement_status(residue(state, removed), budget.fit_samples,
                                                 _residue_seed(seed, removed))
        return cache[removed]

    def classify(removed):
        try:
            return status_of(removed)
        except DimensionBudgetExceeded:
            return _implied_status(state, removed, status_of)

    for size in range(n - 1):
        subsets = removal_subsets(n, size)
        statuses = _parallel_map(classify, subsets, jobs)
        for removed, status in zip(subsets, statuses):
            result.statuses[removed] = status
            logging.info("Residue without %s: %s", removed, status.verdict)
        if all(status.verdict == ENTANGLED for status in statuses):
            result.lo = size + 1
            result.ent_witnesses.update(
                {removed: status for removed, status in zip(subsets, statuses)})
        separable = [removed for removed, status in zip(subsets, statuses)
                     if status.verdict == SEPARABLE]
        if separable:
            result.hi = size
            result.sep_subset = separable[0]
            break
    if result.sep_subset is None and n > 1:
        result.sep_subset = tuple(range(n - 1))
    result.lo = min(result.lo, result.hi)
    if not result.exact:
        logging.warning("P_E interval left open: [%s, %s]", result.lo, result.hi)
    return result


def _search_level(state, size: int, seed: int, jobs: int, finder) -> dict:
    """
    Runs `finder` on every residue of one removal size.
    The first residue is searched alone; its certificate warm-starts the rest.
    """
    subsets = removal_subsets(state.n, size)
    first = finder(residue(state, subsets[0]), sub_seed(seed, 0), None)
    incumbent = first.certificate if isinstance(first, FilteredCertificate) else first
    if not isinstance(incumbent, CertifiedNonlocal):
        return {subsets[0]: first}

    def run(job):
        index, removed = job
        return finder(residue(state, removed), sub_seed(seed, index), incumbent)

    found = _parallel_map(run, list(enumerate(subsets))[1:], jobs)
    return dict(zip(subsets, [first] + found))


def first_search_size(dims) -> int:
    """
    Smallest removal size whose residues all have at most MAX_LP_PARTIES
    parties and fit the density budget.
    """
    n = len(dims)
    largest = sorted(dims, reverse=True)
    for size in range(max(0, n - MAX_LP_PARTIES), n - 1):
        if math.prod(largest[:n - size]) <= MAX_DENSITY_DIMENSION:
            return size
    return n - 1


def _nonlocality_levels(state, seed: int, jobs: int, finder) -> NonlocalityPersistency:
    n = state.n
    first_size = first_search_size(state.dims)
    result = NonlocalityPersistency(lb=1)
    if n - first_size < 2:
        return result
    for size in range(first_size, n - 1):
        outcomes = _search_level(state, size, sub_seed(seed, size), jobs, finder)
        certified = {removed: cert for removed, cert in outcomes.items()
                     if isinstance(cert, (CertifiedNonlocal, FilteredCertificate))}
        if len(certified) < math.comb(n, size):
            logging.info("Removal size %s: %s of %s residues certified nonlocal",
                         size, len(certified), math.comb(n, size))
            break
        result.certs.update(certified)
        result.lb = size + 1
    if first_size and result.lb > first_size:
        result.notes.append(f"removal sizes below {first_size} implied by smaller residues")
    return result


def persistency_nonlocality(state, budget: Budget, seed: int = 0,
                            jobs: int = 1) -> NonlocalityPersistency:
    """
    Certified lower bound k* on P_NL. Residues with more than MAX_LP_PARTIES
    parties are not searched; they inherit nonlocality from their certified
    sub-residues.
    """
    if state.n > MAX_SITES:
        raise TooManySites(f"{state.n} sites exceed the limit of {MAX_SITES}")
    def finder(rho, job_seed, incumbent):
        return nonlocality_search(rho, budget.restarts, job_seed,
                                  sweeps=budget.sweeps, incumbent=incumbent)

    return _nonlocality_levels(state, seed, jobs, finder)


def _filter_objective(rho: DensityOperator, epsilons, functional, scenario):
    """Best value of the functional on the filtered state; -inf when the filter kills it."""
    try:
        filtered, _ = apply_diagonal_filters(rho, epsilons)
    except ZeroSuccessProbability:
        return -math.inf
    if rho.dims == (2, 2):
        return horodecki_chsh_max(filtered).value
    refined = seesaw_maximize(filtered, functional, 1, 0, FILTER_SEESAW_SWEEPS,
                              initial=scenario)
    return refined.value - functional.local_bound


def filtered_search(rho: DensityOperator, budget: Budget, seed: int):
    """
    Coordinate-wise bounded golden-section search over diag(eps_i, 1) filters,
    alternating with see-saw on the current LP witness.
    """
    rho = as_density(rho)
    epsilons = [1.0] * rho.n
    scenario = horodecki_chsh_max(rho).scenario if rho.dims == (2, 2) else standard_scenario(rho.dims)
    for cycle in range(FILTER_CYCLES):
        filtered, _ = apply_diagonal_filters(rho, epsilons)
        functional = most_violated_functional(correlator_tensor(filtered, scenario)).functional
        for site in range(rho.n):
            def objective(eps, site=site):
                trial = list(epsilons)
                trial[site] = eps
                return -_filter_objective(rho, trial, functional, scenario)

            best = minimize_scalar(objective, bounds=(EPS_MIN, 1.0), method="bounded",
                                   options={"xatol": FILTER_XTOL})
            if -best.fun > -objective(epsilons[site]):
                epsilons[site] = float(best.x)
        filtered, probability = apply_diagonal_filters(rho, epsilons)
        if filtered.dims == (2, 2):
            scenario = horodecki_chsh_max(filtered).scenario
        else:
            scenario = seesaw_maximize(filtered, functional, 1, sub_seed(seed, cycle),
                                       budget.sweeps, initial=scenario).scenario
        functional = most_violated_functional(correlator_tensor(filtered, scenario)).functional
        found = certify(filtered, functional, scenario)
        if found:
            logging.info("Filtered certificate with eps=%s, success probability %.3g",
                         epsilons, probability)
            return FilteredCertificate(found, tuple(epsilons), probability)
    filtered, probability = apply_diagonal_filters(rho, epsilons)
    found = nonlocality_search(filtered, budget.restarts, seed, sweeps=budget.sweeps)
    if isinstance(found, CertifiedNonlocal):
        return FilteredCertificate(found, tuple(epsilons), probability)
    return found


def persistency_hidden(state, budget: Budget, seed: int = 0, jobs: int = 1) -> NonlocalityPersistency:
    """
    Lower bound on P*_NL: residues may be filtered before the Bell test.
    Unfiltered certificates count with identity filters.
    """
    if state.n > MAX_SITES:
        raise TooManySites(f"{state.n} sites exceed the limit of {MAX_SITES}")

    def finder(rho, job_seed, incumbent):
        found = nonlocality_search(rho, budget.restarts, job_seed,
                                   sweeps=budget.sweeps, incumbent=incumbent)
        if isinstance(found, CertifiedNonlocal):
            return FilteredCertificate(found, (1.0,) * rho.n, 1.0)
        return filtered_search(rho, budget, job_seed)

    return _nonlocality_levels(state, seed, jobs, finder)


def noisy_residue(rho: DensityOperator, w: float) -> DensityOperator:
    """w rho + (1 - w) I / D on a residue."""
    total = rho.register.total
    return DensityOperator(rho.register, w * rho.matrix + (1 - w) * np.eye(total) / total)


def _certified_at(rho, w, budget, seed, incumbent):
    found = nonlocality_search(noisy_residue(rho, w), budget.restarts, seed,
                               sweeps=budget.sweeps, incumbent=incumbent)
    return found if isinstance(found, CertifiedNonlocal) else None


def _orbit_fingerprint(rho: DensityOperator, digits: int = 6) -> tuple:
    """Spectrum of a residue with the sorted spectra of its one-site marginals."""
    def rounded(values):
        return tuple(float(v) + 0.0 for v in np.round(values, digits))

    marginals = sorted(rounded(np.linalg.eigvalsh(reduced_state(rho, [site]).matrix))
                       for site in range(rho.n))
    return rounded(np.linalg.eigvalsh(rho.matrix)), tuple(marginals)


def residue_orbits(state, k_remove: int) -> list:
    """
    Removal subsets grouped by residues related by a symmetry of the state,
    recognized by equal spectra. Groups keep lexicographic order.
    """
    orbits = {}
    for removed in removal_subsets(state.n, k_remove):
        fingerprint = _orbit_fingerprint(as_density(residue(state, removed)))
        orbits.setdefault(fingerprint, []).append(removed)
    return list(orbits.values())


def _bisect_threshold(rho, cap: float, incumbent, budget: Budget, seed: int, tol: float) -> tuple:
    """Bracket (lo, hi) of the visibility threshold below a certified cap."""
    lo, hi = 0.0, cap
    while hi - lo > tol:
        mid = (lo + hi) / 2
        found = _certified_at(rho, mid, budget, seed, incumbent)
        if found is None:
            lo = mid
        else:
            hi, incumbent = mid, found
    return lo, hi


def strength(state, k_remove: int, budget: Budget, seed: int = 0, tol: float = None) -> StrengthResult:
    """
    Bisection on the white-noise visibility for every residue after k_remove
    removals; w* is the largest per-residue threshold.

    Residues related by a symmetry share one threshold, the lowest certified
    among them: later members are only bisected below the best bracket so far.
    An orbit certified nonlocal at the current maximum cannot raise it and is
    skipped. Residues not certified even without noise leave w* unresolved.
    """
    tol = budget.tol if tol is None else tol
    if not 0 <= k_remove <= state.n - 2:
        raise ValueError(f"k_remove={k_remove} must leave at least two sites of {state.n}")
    result = StrengthResult(w=0.0, bracket=(0.0, 0.0), k_remove=k_remove)
    for orbit in residue_orbits(state, k_remove):
        if result.bracket[1] > 0:
            first = orbit[0]
            rho = as_density(residue(state, first))
            if _certified_at(rho, result.bracket[1], budget, _residue_seed(seed, first), None):
                result.thresholds.update({removed: None for removed in orbit})
                continue
        best = None
        for removed in orbit:
            rho = as_density(residue(state, removed))
            job_seed = _residue_seed(seed, removed)
            cap = 1.0 if best is None else best[1]
            incumbent = _certified_at(rho, cap, budget, job_seed, None)
            if incumbent is None:
                continue
            lo, hi = _bisect_threshold(rho, cap, incumbent, budget, job_seed, tol)
            if best is None or hi < best[1]:
                best = (lo, hi)
        if best is None:
            logging.warning("Residues without %s not certified even without noise", orbit)
            result.unresolved.extend(orbit)
            continue
        logging.info("Residues without %s: threshold in [%.4f, %.4f]", orbit, *best)
        result.thresholds.update({removed: best for removed in orbit})
        if best[1] > result.bracket[1]:
            result.w, result.bracket = best[1], best
    if result.unresolved:
        logging.warning("Strength unresolved: %s residue(s) without a certificate",
                        len(result.unresolved))
        result.w, result.bracket = None, None
    return result


def cluster_bounds(n: int, topology: str) -> tuple:
    """Closed-form (P_NL lower bound, P_E upper bound) for ring and linear clusters."""
    if n < 2:
        raise ValueError(f"Cluster bounds need at least 2 sites, got {n}")
    lower = (n - 1) // 4 + 1
    if topology == "ring":
        return lower, 2 * math.ceil(n / 5)
    if topology == "linear":
        return lower, 2 * math.ceil((n - 6) / 5) + 2
    raise ValueError(f"Unknown topology {topology!r}; expected 'ring' or 'linear'")


def asymmetry_bound(s_value: float, l_value: float, bell_operator) -> float:
    """
    Lower bound (S - L) / (2 ||B||) on the trace distance to the nearest
    permutation-symmetric state, clamped at zero.
    """
    if not (math.isfinite(s_value) and math.isfinite(l_value)):
        raise ValueError("S and L must be finite")
    norm = operator_norm(bell_operator)
    if norm < 1e-14:
        raise ZeroOperator("Bell operator norm vanishes")
    return max(0.0, (s_value - l_value) / (2 * norm))


def chsh_psi_closed_form(theta: float) -> float:
    """
    CHSH value of the two-party residue of the three-party maximal-persistency
    state at the explicit settings.
    """
    s2 = math.sin(theta) ** 2
    value = (1 + 4 * s2 + math.sqrt(1 + math.sin(2 * theta) ** 2)) / (1 + 2 * s2)
    variant = (1 + 4 * s2 + math.sqrt(1 + s2)) / (1 + 2 * s2)
    logging.info("CHSH closed form %.4f; variant with sin^2(theta) under the root gives %.4f",
                 value, variant)
    return value


def filtered_chsh_closed_form(p: float, eps: float) -> float:
    """Maximal CHSH of the filtered W residue: 2 sqrt(2) p / ((1 - p) eps^2 + p)."""
    if not (0 < p <= 1 and 0 < eps <= 1):
        raise ValueError(f"Need 0 < p <= 1 and 0 < eps <= 1, got p={p}, eps={eps}")
    return 2 * math.sqrt(2) * p / ((1 - p) * eps ** 2 + p)


def _check_bound_order(report: PersistencyReport) -> None:
    """Raises RuntimeError when a certified lower bound exceeds the P_E upper bound."""
    if report.pe is None:
        return
    for name, part in (("P_NL", report.pnl), ("P*_NL", report.pnl_star)):
        if part is not None and part.lb > report.pe.hi:
            logging.error("%s lower bound %s exceeds P_E upper bound %s",
                          name, part.lb, report.pe.hi)
            raise RuntimeError("Inconsistent persistency bounds")


def analyze(state, spec_text: str, budget: Budget, seed: int = 0, analyses=("pe", "pnl", "pnl_star"),
            k_remove: int = None, jobs: int = 1) -> PersistencyReport:
    """
    Runs the requested analyses and enforces the ordering of the bounds.
    Strength defaults to k_remove = P_NL - 1.
    """
    start = time.perf_counter()
    report = PersistencyReport(spec=spec_text, n=state.n, budget=budget, seed=seed)
    if "pe" in analyses:
        report.pe = persistency_entanglement(state, budget, sub_seed(seed, 1), jobs)
    if "pnl" in analyses or ("strength" in analyses and k_remove is None):
        report.pnl = persistency_nonlocality(state, budget, sub_seed(seed, 2), jobs)
    if "pnl_star" in analyses:
        report.pnl_star = persistency_hidden(state, budget, sub_seed(seed, 3), jobs)
        if report.pnl is not None and report.pnl.lb > report.pnl_star.lb:
            report.pnl_star.lb = report.pnl.lb
            report.pnl_star.certs.update(report.pnl.certs)
    if "strength" in analyses:
        k = report.pnl.lb - 1 if k_remove is None else k_remove
        report.strength = strength(state, k, budget, sub_seed(seed, 4))
    _check_bound_order(report)
    report.elapsed_ms = (time.perf_counter() - start) * 1000
    return report


def _verify_pe_status(state, removed, status) -> bool:
    kept = [i for i in range(state.n) if i not in removed]
    if isinstance(status.witness, SubsystemWitness):
        sites = [kept[i] for i in status.witness.sites]
        return verify_witness(reduced_state(state, sites), status.witness.witness)
    return verify_status(residue(state, removed), status)


def verify_report(state, report: PersistencyReport) -> bool:
    """Re-verifies every certificate against freshly recomputed residues."""
    checks = []
    if report.pe is not None:
        for removed, status in report.pe.statuses.items():
            if status.verdict != UNKNOWN:
                checks.append(_verify_pe_status(state, removed, status))
    for part in (report.pnl, report.pnl_star):
        if part is not None:
            for removed, cert in part.certs.items():
                checks.append(cert.verify(residue(state, removed)))
    return all(checks)


def cert_to_json(cert) -> dict:
    """Plain or filtered Bell certificate with everything verify() needs."""
    if isinstance(cert, FilteredCertificate):
        document = certificate_to_json(cert.certificate)
        document.update({"epsilons": list(cert.epsilons), "probability": cert.probability})
        return document
    return certificate_to_json(cert)


def cert_from_json(document: dict):
    """Inverse of cert_to_json."""
    certificate = certificate_from_json(document)
    if "epsilons" in document:
        return FilteredCertificate(certificate, tuple(document["epsilons"]),
                                   float(document["probability"]))
    return certificate


def _subset_key(removed) -> str:
    return ",".join(str(i) for i in removed) or "-"


def _subset_from_key(key: str) -> tuple:
    return () if key == "-" else tuple(int(i) for i in key.split(","))


def report_to_json(report: PersistencyReport, include_timing: bool = False) -> dict:
    """
    Stable JSON document of a report. Timing is left out unless asked for,
    so identical inputs give identical documents.
    """
    document = {"spec": report.spec, "n": report.n, "p_e_measurement": "n/a"}
    if report.pe is not None:
        sep_subset = report.pe.sep_subset
        sep_status = report.pe.statuses.get(sep_subset)
        document["pe"] = {
            "lo": report.pe.lo,
            "hi": report.pe.hi,
            "sep_subset": list(sep_subset) if sep_subset is not None else None,
            "sep_certificate": (status_to_json(sep_status)
                                if sep_status is not None and sep_status.verdict == SEPARABLE
                                else None),
            "ent_witnesses": {_subset_key(k): status_to_json(v)
                              for k, v in report.pe.ent_witnesses.items()},
        }
    for key, part in (("pnl", report.pnl), ("pnl_star", report.pnl_star)):
        if part is not None:
            document[key] = {"lb": part.lb,
                             "certs": {_subset_key(k): cert_to_json(v) for k, v in part.certs.items()}}
            if part.notes:
                document[key]["notes"] = list(part.notes)
    if report.strength is not None:
        result = report.strength
        document["strength"] = {"w": result.w,
                                "bracket": list(result.bracket) if result.resolved else None,
                                "k_remove": result.k_remove,
                                "status": "ok" if result.resolved else "unresolved",
                                "unresolved": [_subset_key(k) for k in result.unresolved]}
    if report.budget is not None:
        document["budget"] = vars(report.budget).copy()
    document["seed"] = report.seed
    document["elapsed_ms"] = round(report.elapsed_ms, 1) if include_timing and report.elapsed_ms else None
    if report.notes:
        document["notes"] = list(report.notes)
    return document


def report_from_json(document: dict) -> PersistencyReport:
    """
    Restores the certificates of a report document so verify_report can
    re-check them. Witness statuses and the separable certificate become
    the P_E statuses.
    """
    report = PersistencyReport(spec=document["spec"], n=document["n"],
                               seed=document.get("seed", 0), notes=list(document.get("notes", [])))
    if document.get("budget"):
        report.budget = Budget(**document["budget"])
    pe = document.get("pe")
    if pe:
        sep_subset = tuple(pe["sep_subset"]) if pe.get("sep_subset") is not None else None
        witnesses = {_subset_from_key(k): status_from_json(v)
                     for k, v in pe["ent_witnesses"].items()}
        report.pe = EntanglementPersistency(lo=pe["lo"], hi=pe["hi"], sep_subset=sep_subset,
                                            ent_witnesses=witnesses, statuses=dict(witnesses))
        if pe.get("sep_certificate") is not None:
            report.pe.statuses[sep_subset] = status_from_json(pe["sep_certificate"])
    for key in ("pnl", "pnl_star"):
        part = document.get(key)
        if part:
            restored = NonlocalityPersistency(
                lb=part["lb"], certs={_subset_from_key(k): cert_from_json(v)
                                      for k, v in part["certs"].items()},
                notes=list(part.get("notes", [])))
            setattr(report, key, restored)
    result = document.get("strength")
    if result:
        report.strength = StrengthResult(
            w=result["w"], bracket=tuple(result["bracket"]) if result["bracket"] else None,
            k_remove=result["k_remove"],
            unresolved=[_subset_from_key(k) for k in result.get("unresolved", [])])
    return report

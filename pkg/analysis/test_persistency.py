"""Tests for the persistency analyses."""

import json
import math
import numpy as np
import pytest
from unittest.mock import patch
from quantum_core import (
    apply_diagonal_filters,
    as_density,
    basis_state,
    random_density,
    reduced_state,
    symmetrize,
    tensor_product,
    trace_distance,
)
from states import (
    bell_state,
    dicke_state,
    ghz_state,
    linear_cluster,
    psi_max_persistency,
    ring_cluster,
    translational_state,
    w_residue,
    w_state,
)
from bell import (
    TSIRELSON,
    bell_operator,
    certify,
    chsh_functional,
    functional_value,
    horodecki_chsh_max,
    random_scenario,
)
from separability import ENTANGLED, SubsystemWitness
from persistency import (
    EntanglementPersistency,
    FilteredCertificate,
    NonlocalityPersistency,
    PersistencyReport,
    TooManySites,
    ZeroOperator,
    analyze,
    asymmetry_bound,
    chsh_psi_closed_form,
    cluster_bounds,
    filtered_chsh_closed_form,
    first_search_size,
    noisy_residue,
    persistency_entanglement,
    persistency_hidden,
    persistency_nonlocality,
    removal_subsets,
    report_from_json,
    report_to_json,
    residue_orbits,
    strength,
    verify_report,
)
from utilities import Budget


@pytest.fixture
def budget():
    return Budget(restarts=6, sweeps=100, fit_samples=800, tol=1e-3)


@pytest.mark.parametrize("n,topology,expected", [
    (6, "ring", (2, 4)),
    (6, "linear", (2, 2)),
    (4, "ring", (1, 2)),
    (4, "linear", (1, 2)),
    (9, "ring", (3, 4)),
])
def test_cluster_bounds(n, topology, expected):
    """Closed-form brackets for chains."""
    assert cluster_bounds(n, topology) == expected


@pytest.mark.parametrize("n,topology", [(1, "ring"), (5, "star")])
def test_cluster_bounds_invalid(n, topology):
    """Too few sites or an unknown topology."""
    with pytest.raises(ValueError):
        cluster_bounds(n, topology)


def test_asymmetry_bound_chsh():
    """Optimal CHSH operator: (2 sqrt 2 - 2) / (2 * 2 sqrt 2)."""
    rho = as_density(bell_state())
    operator = bell_operator(chsh_functional(), horodecki_chsh_max(rho).scenario)
    bound = asymmetry_bound(TSIRELSON, 2.0, operator)
    assert math.isclose(bound, 0.1464, abs_tol=1e-4)


@pytest.mark.parametrize("s_value", [2.0, 1.5])
def test_asymmetry_bound_clamped(s_value):
    """No violation means no bound."""
    assert asymmetry_bound(s_value, 2.0, np.eye(4)) == 0.0


def test_asymmetry_bound_zero_operator():
    """A vanishing operator has no meaningful bound."""
    with pytest.raises(ZeroOperator):
        asymmetry_bound(3.0, 2.0, np.zeros((4, 4)))


def test_asymmetry_bound_below_symmetrization_distance():
    """The bound never exceeds the distance to the symmetrized state."""
    rng = np.random.default_rng(21)
    for _ in range(10):
        rho = random_density((2, 2), rng)
        scenario = random_scenario(rho.dims, rng)
        f = chsh_functional()
        s_value = functional_value(rho, f, scenario)
        l_value = functional_value(symmetrize(rho), f, scenario)
        bound = asymmetry_bound(s_value, l_value, bell_operator(f, scenario))
        assert bound <= trace_distance(rho, symmetrize(rho)) + 1e-12


def test_chsh_psi_closed_form():
    """2.2247 at theta = 0.6278."""
    assert math.isclose(chsh_psi_closed_form(0.6278), 2.2247, abs_tol=1e-3)


@pytest.mark.parametrize("p", np.linspace(0.3, 1.0, 10))
def test_filtered_chsh_closed_form(p):
    """The formula matches the exact optimum of the filtered W residue."""
    for eps in np.linspace(0.05, 0.6, 10):
        filtered, _ = apply_diagonal_filters(w_residue(p), [eps, eps])
        exact = horodecki_chsh_max(filtered).value
        assert abs(exact - filtered_chsh_closed_form(p, eps)) <= 1e-9


def test_filtered_chsh_closed_form_value():
    """rho(2/7) with eps = 0.05."""
    expected = 2 * math.sqrt(2) * (2 / 7) / ((5 / 7) * 0.0025 + 2 / 7)
    assert math.isclose(filtered_chsh_closed_form(2 / 7, 0.05), expected)
    assert filtered_chsh_closed_form(2 / 7, 0.05) > 2


def test_filtered_chsh_closed_form_range():
    """Both parameters must be positive and at most one."""
    with pytest.raises(ValueError):
        filtered_chsh_closed_form(0.5, 0.0)


def test_removal_subsets_order():
    """Lexicographic subsets."""
    assert removal_subsets(4, 2) == [(0, 1), (0, 2), (0, 3), (1, 2), (1, 3), (2, 3)]


@pytest.mark.parametrize("n", [3, 4, 5])
def test_pe_w_state(n, budget):
    """W states lose entanglement only with the last pair: N - 1."""
    result = persistency_entanglement(w_state(n), budget, seed=1)
    assert (result.lo, result.hi) == (n - 1, n - 1)


@pytest.mark.slow
@pytest.mark.parametrize("n", [6, 7])
def test_pe_w_state_large(n, budget):
    """Exact for the larger W states too."""
    result = persistency_entanglement(w_state(n), budget, seed=1)
    assert (result.lo, result.hi) == (n - 1, n - 1)


@pytest.mark.parametrize("n", [3, 4])
def test_pe_ghz(n, budget):
    """GHZ entanglement vanishes with one lost party."""
    result = persistency_entanglement(ghz_state(n), budget, seed=1)
    assert (result.lo, result.hi) == (1, 1)


def test_pe_linear_cluster_four(budget):
    """Two removals separate the four-site chain."""
    result = persistency_entanglement(linear_cluster(4), budget, seed=2)
    assert (result.lo, result.hi) == (2, 2)
    assert len(result.sep_subset) == 2


@pytest.mark.slow
def test_pe_linear_cluster_six(budget):
    """Table value for the six-site chain."""
    result = persistency_entanglement(linear_cluster(6), budget, seed=2)
    assert result.hi == 2


def test_pe_ancilla_does_not_raise_lower_bound(budget):
    """Appending an uncorrelated ancilla keeps the lower bound."""
    original = persistency_entanglement(w_state(3), budget, seed=1)
    extended = persistency_entanglement(tensor_product(w_state(3), basis_state([0], (2,))),
                                        budget, seed=1)
    assert extended.lo <= original.lo


def test_pe_too_many_sites(budget):
    """Subset enumeration stops at eight sites."""
    with pytest.raises(TooManySites):
        persistency_entanglement(w_state(9), budget)


def test_pnl_psi_three(budget):
    """Every single-removal residue of the three-site state violates CHSH."""
    result = persistency_nonlocality(psi_max_persistency(3, 0.4518), budget, seed=3)
    assert result.lb == 2
    for removed, cert in result.certs.items():
        remaining = [i for i in range(3) if i not in removed]
        assert cert.verify(reduced_state(psi_max_persistency(3, 0.4518), remaining))


@pytest.mark.parametrize("state,expected", [
    (ghz_state(3), 1),
    (w_state(3), 1),
])
def test_pnl_lower_bounds(state, expected, budget):
    """Residues that are separable or CHSH-local stop the count."""
    assert persistency_nonlocality(state, budget, seed=4).lb == expected


@pytest.mark.slow
def test_pnl_ring_six(budget):
    """Table value for the six-site ring."""
    assert persistency_nonlocality(ring_cluster(6), budget, seed=5).lb >= 3


@pytest.mark.slow
@pytest.mark.parametrize("n", [4, 5, 6])
@pytest.mark.parametrize("topology,builder", [("ring", ring_cluster), ("linear", linear_cluster)])
def test_cluster_bounds_contain_computed_values(n, topology, builder, budget):
    """The certified P_NL lies above the closed-form lower bound, the P_E upper end below the upper one."""
    lower, upper = cluster_bounds(n, topology)
    state = builder(n)
    assert lower <= persistency_nonlocality(state, budget, seed=6).lb
    assert persistency_entanglement(state, budget, seed=6).hi <= upper


@pytest.mark.parametrize("n", [3, 4])
def test_hidden_w_state(n, budget):
    """Filtering makes the CHSH-local W pair residue violate CHSH."""
    state = w_state(n)
    result = persistency_hidden(state, budget, seed=7)
    assert result.lb == n - 1
    pair = tuple(range(n - 2))
    cert = result.certs[pair]
    assert isinstance(cert, FilteredCertificate)
    residue_state = w_residue(2 / n)
    assert cert.verify(residue_state)
    filtered, _ = apply_diagonal_filters(residue_state, cert.epsilons)
    assert horodecki_chsh_max(filtered).value > 2


@pytest.mark.slow
@pytest.mark.parametrize("n", [5, 6, 7])
def test_hidden_w_state_large(n, budget):
    """N - 1 for the larger W states."""
    assert persistency_hidden(w_state(n), budget, seed=7).lb == n - 1


def test_hidden_not_below_plain(budget):
    """Identity filters recover every plain certificate."""
    state = ghz_state(3)
    assert persistency_hidden(state, budget, seed=8).lb >= \
        persistency_nonlocality(state, budget, seed=8).lb


def test_strength_bell_pair(budget):
    """A Bell pair stays nonlocal down to w = 1/sqrt(2)."""
    result = strength(bell_state(), 0, budget, seed=9)
    assert abs(result.w - 1 / math.sqrt(2)) <= 2e-3
    low, high = result.bracket
    assert high - low <= budget.tol
    assert low - 2e-3 <= 1 / math.sqrt(2) <= high + 1e-9


def test_strength_incumbent_is_affine_in_w():
    """The witness value grows linearly with the visibility."""
    rho = as_density(bell_state())
    cert = certify(rho, chsh_functional(), horodecki_chsh_max(rho).scenario)
    values = [functional_value(noisy_residue(rho, w), cert.functional, cert.scenario)
              for w in (0.70, 0.75, 0.80)]
    assert values[0] < values[1] < values[2]
    assert math.isclose(values[1] - values[0], values[2] - values[1], abs_tol=1e-12)


def test_strength_needs_two_remaining_sites(budget):
    """k_remove must leave a pair."""
    with pytest.raises(ValueError):
        strength(w_state(3), 2, budget)


@pytest.mark.slow
@pytest.mark.parametrize("state,k_remove,expected", [
    (w_state(3), 0, 0.644),
    (linear_cluster(4), 1, 0.707),
    (w_state(4), 1, 0.989),
    (dicke_state(4, 2), 0, 0.471),
])
def test_strength_table_values(state, k_remove, expected, budget):
    """Strength against white noise close to the published values."""
    result = strength(state, k_remove, budget, seed=10)
    assert abs(result.w - expected) <= 0.02


def test_analyze_report_json(budget):
    """Stable field names and bound ordering."""
    state = ghz_state(3)
    report = analyze(state, "ghz:3", budget, seed=11, analyses=("pe", "pnl", "pnl_star"))
    document = report_to_json(report)
    assert set(document) >= {"spec", "n", "pe", "pnl", "pnl_star", "budget", "seed", "elapsed_ms"}
    assert document["pe"]["lo"] == document["pe"]["hi"] == 1
    assert document["pnl"]["lb"] <= document["pnl_star"]["lb"] <= document["pe"]["hi"]
    assert document["p_e_measurement"] == "n/a"
    assert document["elapsed_ms"] is None
    assert verify_report(state, report)


def test_analyze_is_deterministic(budget):
    """Same state, budget and seed give identical documents."""
    first = report_to_json(analyze(w_state(3), "w:3", budget, seed=5))
    second = report_to_json(analyze(w_state(3), "w:3", budget, seed=5))
    assert json.dumps(first, sort_keys=True) == json.dumps(second, sort_keys=True)


def test_analyze_strength_defaults_to_pnl(budget):
    """Strength uses k_remove = P_NL - 1 when not given."""
    report = analyze(bell_state(), "bell", budget, seed=12, analyses=("strength",))
    assert report.strength.k_remove == report.pnl.lb - 1 == 0


def test_filtered_w_pair_residue_close_to_tsirelson():
    """Strong filters push the W3 pair residue well past the local bound."""
    filtered, probability = apply_diagonal_filters(w_residue(2 / 3), (0.05, 0.05))
    assert horodecki_chsh_max(filtered).value >= 2.5
    assert math.isclose(horodecki_chsh_max(filtered).value,
                        filtered_chsh_closed_form(2 / 3, 0.05), abs_tol=1e-9)
    assert 0 < probability < 1


def test_residue_orbits_linear_cluster():
    """End sites and inner sites of the chain form separate orbits."""
    orbits = residue_orbits(linear_cluster(4), 1)
    assert [(0,), (3,)] in orbits
    assert [(1,), (2,)] in orbits
    assert len(orbits) == 2


def test_strength_shares_threshold_across_orbit(budget):
    """Symmetric residues report the same threshold."""
    result = strength(linear_cluster(4), 1, budget, seed=13)
    assert result.thresholds[(0,)] == result.thresholds[(3,)]
    assert result.thresholds[(1,)] == result.thresholds[(2,)]


def test_strength_unresolved_without_certificate(budget):
    """A residue never certified leaves w unresolved instead of 1.0."""
    with patch("persistency._certified_at", return_value=None):
        result = strength(bell_state(), 0, budget, seed=14)
    assert result.w is None
    assert result.bracket is None
    assert result.unresolved == [()]
    assert not result.resolved
    document = report_to_json(PersistencyReport(spec="bell", n=2, strength=result))
    assert document["strength"]["status"] == "unresolved"
    assert document["strength"]["w"] is None
    assert document["strength"]["unresolved"] == ["-"]


@pytest.mark.parametrize("pnl_lb,pnl_star_lb", [(2, 2), (1, 2)])
def test_analyze_rejects_lower_bound_above_pe(pnl_lb, pnl_star_lb, budget, caplog):
    """Any certified lower bound above the P_E upper end is an error."""
    pe = EntanglementPersistency(lo=1, hi=1, sep_subset=(0,))
    with patch("persistency.persistency_entanglement", return_value=pe), \
            patch("persistency.persistency_nonlocality",
                  return_value=NonlocalityPersistency(lb=pnl_lb)), \
            patch("persistency.persistency_hidden",
                  return_value=NonlocalityPersistency(lb=pnl_star_lb)):
        with pytest.raises(RuntimeError, match="Inconsistent persistency bounds"):
            analyze(ghz_state(3), "ghz:3", budget, seed=15)
    assert "exceeds P_E upper bound" in caplog.text


def test_report_json_round_trip_verifies(budget):
    """A report read back from JSON still verifies against the state."""
    state = ghz_state(3)
    report = analyze(state, "ghz:3", budget, seed=16)
    document = json.loads(json.dumps(report_to_json(report)))
    restored = report_from_json(document)
    assert restored.pe.hi == report.pe.hi
    assert restored.pnl.lb == report.pnl.lb
    assert set(restored.pnl_star.certs) == set(report.pnl_star.certs)
    assert verify_report(state, restored)


def test_report_json_round_trip_strength(budget):
    """Strength fields survive the JSON round trip."""
    report = analyze(bell_state(), "bell", budget, seed=17, analyses=("pnl", "strength"))
    restored = report_from_json(json.loads(json.dumps(report_to_json(report))))
    assert restored.strength.resolved
    assert restored.strength.w == report.strength.w
    assert restored.strength.bracket == tuple(report.strength.bracket)


def test_first_search_size():
    """Searches start where every residue fits the LP and the density budget."""
    assert first_search_size((2,) * 4) == 0
    assert first_search_size((2,) * 8) == 2
    assert first_search_size((7,) * 7) == 3


@pytest.mark.slow
def test_pe_psi_seven_stays_within_budget(budget):
    """One-site removals of the seven-site state are certified from smaller residues."""
    state = psi_max_persistency(7, 0.01)
    result = persistency_entanglement(state, budget, seed=18)
    assert result.lo >= 2
    status = result.statuses[(0,)]
    assert status.verdict == ENTANGLED
    assert isinstance(status.witness, SubsystemWitness)
    assert verify_report(state, PersistencyReport(spec="psi:7", n=7, pe=result))


@pytest.mark.slow
@pytest.mark.parametrize("state,k_remove,expected", [
    (translational_state(4, 2), 1, 0.707),
    (w_state(5), 1, 0.860),
    (dicke_state(5, 2), 1, 0.907),
    (translational_state(5, 2), 2, 0.772),
    (linear_cluster(5), 1, 0.667),
    (ring_cluster(5), 1, 0.577),
])
def test_strength_table_values_five_sites(state, k_remove, expected, budget):
    """Strength of the larger table states close to the published values."""
    result = strength(state, k_remove, budget, seed=19)
    assert result.resolved
    assert abs(result.w - expected) <= 0.02

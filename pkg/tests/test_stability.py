import numpy as np
import pytest

from benflow import DiscreteSpace
from benflow.convex import Quadratic
from benflow.flow import SolveOptions
from benflow.graphs import linear_graph, plateau_graph, point_graph
from benflow.models import DiffusionLaw
from benflow.representation import fb_family, fenchel_representative, midpoint_convexity_violation
from benflow.stability import (NonConvergentFamilyError, OperatorSequence, constant_sequence,
                               data_perturbation_sequence, estimate_limit_integrand, graph_limit_check,
                               oscillation_family, pairing_convergence_diagnostic, quadratic_law_sequence,
                               run_stability_experiment, sine_moments)

BOX = np.linspace(-3.0, 3.0, 61)
V, S = np.meshgrid(BOX, BOX, indexing="ij")


# -- pi-tilde diagnostic -----------------------------------------------------------------

def test_sine_moments_orthogonality():
    sp = DiscreteSpace(63)
    m = sine_moments(sp, sp.sample(lambda x: np.sin(3 * np.pi * x)))
    expected = np.zeros(10)
    expected[2] = 0.5
    np.testing.assert_allclose(m, expected, atol=1e-14)


def test_constant_sequence_is_pi_tilde():
    sp = DiscreteSpace(31)
    v = sp.sample(lambda x: x * (1 - x))
    diag = pairing_convergence_diagnostic(sp, [v] * 4, [2 * v] * 4, v, 2 * v)
    assert diag.pi_tilde_convergent
    assert diag.verdict == "pi-tilde-convergent"


def test_oscillation_is_weak_but_not_pi_tilde():
    sp = DiscreteSpace(255)
    ns = (16, 32, 64, 127)
    seq_v, seq_s = oscillation_family(sp, ns)
    diag = pairing_convergence_diagnostic(sp, seq_v, seq_s, sp.zeros(), sp.zeros(), ns=ns)
    assert diag.weakly_convergent
    assert not diag.pi_tilde_convergent
    np.testing.assert_allclose(diag.pairings, 0.5, atol=1e-2)
    assert diag.to_dict()["verdict"] == "weakly convergent, not pi-tilde-convergent"


def test_oscillation_family_index_guard():
    with pytest.raises(ValueError):
        oscillation_family(DiscreteSpace(15), (8, 16))


def test_strong_perturbation_is_pi_tilde():
    sp = DiscreteSpace(31)
    v = sp.sample(lambda x: np.sin(np.pi * x))
    w = sp.sample(lambda x: x)
    ns = (4, 8, 16, 32, 64)
    seq = [v + w / n for n in ns]
    diag = pairing_convergence_diagnostic(sp, seq, seq, v, v, ns=ns)
    assert diag.pi_tilde_convergent


def test_diverging_sequence_not_weak():
    sp = DiscreteSpace(31)
    v = sp.sample(lambda x: np.sin(np.pi * x))
    diag = pairing_convergence_diagnostic(sp, [v * n for n in (1, 2, 3)], [v] * 3, sp.zeros(), v)
    assert diag.verdict == "not weakly convergent"


def test_diagnostic_rejects_mismatched_sequences():
    sp = DiscreteSpace(7)
    with pytest.raises(ValueError):
        pairing_convergence_diagnostic(sp, [sp.zeros()], [], sp.zeros(), sp.zeros())


# -- stability experiments ---------------------------------------------------------------

@pytest.mark.slow
def test_quadratic_law_sequence():
    sp = DiscreteSpace(31)
    rep = run_stability_experiment(quadratic_law_sequence(sp), SolveOptions())
    e = np.asarray(rep.errors)
    assert rep.passed
    assert e[-1] < e[0] <= 0.1 * rep.limit_norm
    assert rep.bounded and rep.limit_solves_limit_problem


def test_constant_sequence_fixed_point():
    sp = DiscreteSpace(15)
    seq = constant_sequence(sp, DiffusionLaw("constant", 1.0), (4, 8), T=0.1, K=16)
    rep = run_stability_experiment(seq, SolveOptions(), jobs=2)
    assert max(rep.errors) <= 1e-8
    assert rep.passed
    rows = list(rep.csv_rows())
    assert [r[0] for r in rows] == [4, 8]


def test_data_perturbation_rate():
    sp = DiscreteSpace(15)
    seq = data_perturbation_sequence(sp, indices=(4, 8, 16, 32), K=16)
    rep = run_stability_experiment(seq, SolveOptions(tol_null=1e-12))
    e = np.asarray(rep.errors)
    np.testing.assert_allclose(e[1:] / e[:-1], 0.5, atol=0.05)
    assert np.all(e * np.array(rep.indices) <= 2 * e[0] * 4)


def test_nonconverged_solve_aborts():
    sp = DiscreteSpace(15)
    seq = constant_sequence(sp, DiffusionLaw("quadratic", 1.0), (4, 8), K=8)
    rep = run_stability_experiment(seq, SolveOptions(tol_null=1e-30, max_iter=2, max_outer=1))
    assert rep.aborted and not rep.passed
    assert "not converged" in rep.message


def test_sequence_validation():
    sp = DiscreteSpace(7)
    law = DiffusionLaw("constant", 1.0)
    with pytest.raises(ValueError):
        OperatorSequence(sp, (4,), lambda n: law, lambda n: (np.zeros(7), 0.0), law, (np.zeros(7), 0.0))
    with pytest.raises(ValueError):
        OperatorSequence(sp, (8, 4), lambda n: law, lambda n: (np.zeros(7), 0.0), law, (np.zeros(7), 0.0))


# -- graph limits ------------------------------------------------------------------------

def test_linear_graphs_converge():
    ns = (1, 2, 4, 8, 16, 32)
    graphs = [linear_graph(1 + 1 / n) for n in ns]
    d = graph_limit_check(graphs, linear_graph(1.0), [(1.0, 1 + 1 / n) for n in ns], (1.0, 1.0))
    assert d.passed and d.liminf_inclusion


def test_point_graphs_constant_witness():
    graphs = [point_graph() for _ in range(4)]
    d = graph_limit_check(graphs, point_graph(), [(0.0, 0.0)] * 4, (0.0, 0.0))
    assert d.passed


def test_plateau_edge_witness():
    ns = (1, 2, 4, 8, 16)
    graphs = [plateau_graph(1 + 1 / n) for n in ns]
    d = graph_limit_check(graphs, plateau_graph(1.0), [(1 + 1 / n, 0.0) for n in ns], (1.0, 0.0))
    assert d.passed


def test_witness_off_limit_fails():
    graphs = [linear_graph(2.0)] * 3
    d = graph_limit_check(graphs, linear_graph(1.0), [(1.0, 2.0)] * 3, (1.0, 2.0))
    assert not d.passed


# -- Gamma-limit estimation --------------------------------------------------------------

def test_constant_family_fixed_point():
    f = fenchel_representative(Quadratic(2.0))
    est = estimate_limit_integrand([f] * 3, BOX, BOX)
    assert np.array_equal(est.values, f(V, S))


def test_quadratic_family_limit():
    # 1/(1 + 1/n) is not polynomial in 1/n, so extrapolation needs six members for 1e-6
    ns = (4, 8, 16, 32, 64, 128)
    fam = [fenchel_representative(Quadratic(1 + 1 / n)) for n in ns]
    est = estimate_limit_integrand(fam, BOX, BOX, ns=ns)
    np.testing.assert_allclose(est.values, 0.5 * V**2 + 0.5 * S**2, atol=1e-6)


def test_fb_family_limit():
    ns = (4, 8, 16, 32)
    est = estimate_limit_integrand([fb_family(1.0, 0.5 + 1 / n) for n in ns], BOX, BOX, ns=ns)
    np.testing.assert_allclose(est.values, fb_family(1.0, 0.5)(V, S), atol=1e-6)
    assert np.min(est.gap) >= -1e-6
    assert est.convex_inputs
    for vals in est.weighted.values():
        assert len(vals["members"]) == 4


def test_limit_preserves_convexity():
    ns = (4, 8, 16, 32)
    fam = [fb_family(1.0 + 1 / n, 0.5 + 1 / n) for n in ns]
    pts = np.column_stack([V.ravel(), S.ravel()])
    assert all(midpoint_convexity_violation(f, pts) <= 1e-9 for f in fam)
    est = estimate_limit_integrand(fam, BOX, BOX, ns=ns)
    mid = 0.5 * (est.values[:-1:2, :-1:2] + est.values[2::2, 2::2])
    assert np.all(est.values[1::2, 1::2] <= mid + 1e-9)


def test_oscillating_family_rejected():
    ns = (1, 2, 3, 4, 5)
    fam = [fb_family(1.0, 0.75 + 0.25 * (-1) ** n) for n in ns]
    with pytest.raises(NonConvergentFamilyError):
        estimate_limit_integrand(fam, BOX, BOX, ns=ns)


def test_bounds_flag_violations():
    ns = (1, 2)
    est = estimate_limit_integrand([fb_family(1.0, 0.5 + 1 / n) for n in ns], BOX, BOX, ns=ns,
                                   bounds=(0.4, 0.6, 0.0))
    assert not est.equi_bounded

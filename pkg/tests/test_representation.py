import csv
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from benflow import DiscreteSpace, laplacian_apply
from benflow.convex import Abs, PowerP, Quadratic, zero
from benflow.graphs import identity_graph, linear_graph, plateau_graph, point_graph, sign_graph
from benflow.models import DiffusionLaw, kirchhoff_transform
from benflow.representation import (CoercivityError, ParamMonotoneFamily, Representative,
                                    certify_representative, dump_representative_csv,
                                    elliptic_representative, fb_family, fenchel_representative,
                                    fitzpatrick_eval, fitzpatrick_representative, inf_convolution,
                                    midpoint_convexity_violation, nodal_fenchel_representative,
                                    semimono_representative, shift_by_linear)

BOX = np.linspace(-3.0, 3.0, 101)
V, S = np.meshgrid(BOX, BOX, indexing="ij")
COARSE = np.linspace(-3.0, 3.0, 25)
VC, SC = np.meshgrid(COARSE, COARSE, indexing="ij")
PAIRS = np.column_stack([VC.ravel(), SC.ravel()])


def quad_family():
    return ParamMonotoneFamily.linear(lambda z: 1.0 + z * z, "1 + z^2")


def brute_fitzpatrick(graph, v, vstar, n=20001, tail=40.0):
    pts = graph.sample(n_per_piece=n, tail_length=tail)
    w, z = pts[:, 0], pts[:, 1]
    return float(np.max(vstar * w - z * (w - v)))


# -- examples ----------------------------------------------------------------------------

def test_fitzpatrick_examples():
    assert fitzpatrick_eval(identity_graph(), 1.0, 3.0) == pytest.approx(4.0)
    assert fitzpatrick_eval(identity_graph(), 1.0, 1.0) == pytest.approx(1.0)
    assert fitzpatrick_eval(sign_graph(), 0.0, 0.5) == pytest.approx(0.0, abs=1e-15)
    assert brute_fitzpatrick(sign_graph(), 0.0, 0.5) == pytest.approx(0.0, abs=1e-12)


def test_fitzpatrick_infinite_with_witness():
    val, direction = fitzpatrick_eval(sign_graph(), 0.0, 2.0, return_witness=True)
    assert math.isinf(val)
    assert direction is not None
    assert fitzpatrick_eval(sign_graph(), 0.0, 0.5, return_witness=True)[1] is None


@pytest.mark.parametrize("graph", [sign_graph(), plateau_graph(1.0), linear_graph(2.0),
                                   kirchhoff_transform(DiffusionLaw("affine", 1.0), 41)],
                         ids=["sign", "plateau", "linear", "kirchhoff"])
@pytest.mark.parametrize("v,vstar", [(0.3, 0.4), (-1.2, -0.7), (2.0, -0.5), (0.6, 0.1)])
def test_fitzpatrick_against_dense_sampling(graph, v, vstar):
    exact = fitzpatrick_eval(graph, v, vstar)
    if math.isfinite(exact):
        assert exact == pytest.approx(brute_fitzpatrick(graph, v, vstar), abs=1e-6)


def test_fenchel_examples():
    q = fenchel_representative(Quadratic(1.0))
    assert q(1.0, 1.0) == pytest.approx(1.0)
    a = fenchel_representative(Abs())
    assert a(0.0, 0.5) == 0.0
    assert math.isinf(a(1.0, 2.0))


def test_fb_examples():
    assert fb_family(1.0, 0.5)(1.0, 1.0) == pytest.approx(1.0)
    f = fb_family(1.0, 1.0)
    assert f(1.0, 1.0) == pytest.approx(2.0)
    assert not f.contains(1.0, 1.0)
    assert f.contains(0.0, 0.0)
    assert fb_family(1.0, 0.5)(2.0, 4.0) == pytest.approx(10.0)
    with pytest.raises(ValueError):
        fb_family(1.0, 0.4)


def test_shift_examples():
    f = fenchel_representative(Quadratic(1.0))
    g = shift_by_linear(f, 1.0)
    assert g(1.0, 2.0) == pytest.approx(2.0)
    assert g(1.0, 1.0) == pytest.approx(1.5)
    g0 = shift_by_linear(f, 0.0)
    np.testing.assert_allclose(g0(V, S), f(V, S))
    with pytest.raises(ValueError):
        shift_by_linear(f, -1.0)


def test_inf_convolution_examples():
    q = fenchel_representative(Quadratic(1.0))
    h = inf_convolution(q, q)
    assert h(1.0, 2.0) == pytest.approx(2.0, abs=1e-9)
    assert h(1.0, 0.0) == pytest.approx(1.0, abs=1e-9)
    np.testing.assert_allclose(h(VC, SC), VC**2 + SC**2 / 4, atol=1e-9)
    neutral = inf_convolution(q, fenchel_representative(zero()))
    np.testing.assert_allclose(neutral(VC, SC), q(VC, SC), atol=1e-9)


def test_inf_convolution_boundary_raises():
    q = fenchel_representative(Quadratic(1.0))
    # the minimiser z* = v*/2 = 25 lies beyond the default search box [-10, 10]
    with pytest.raises(CoercivityError):
        inf_convolution(q, q)(1.0, 50.0)


def test_semimono_examples():
    f = semimono_representative(quad_family())
    assert f(1.0, 2.0) == pytest.approx(2.0)
    assert f(0.0, 0.0) == 0.0
    assert f(1.0, 0.0) == pytest.approx(0.5)
    assert not f.convex


def test_family_rejects_nonpositive_coefficient():
    fam = ParamMonotoneFamily.linear(lambda z: z)
    with pytest.raises(ValueError):
        fam.graph(-1.0)


def test_elliptic_examples():
    sp = DiscreteSpace(63)
    rep = elliptic_representative(sp, fenchel_representative(Quadratic(1.0)))
    v = sp.sample(lambda x: np.sin(np.pi * x))
    vstar = laplacian_apply(sp, v)
    assert rep(v, vstar) == pytest.approx(rep.pairing(v, vstar), abs=1e-8)
    assert rep.pairing(v, vstar) == pytest.approx(np.pi**2 / 2, rel=1e-3)
    assert rep.gap(v, vstar) <= 1e-8
    assert rep(sp.zeros(), sp.zeros()) == 0.0
    assert rep(v, sp.zeros()) == pytest.approx(np.pi**2 / 4, rel=1e-3)


def test_elliptic_flux_constant_matters_for_nonlinear_law():
    sp = DiscreteSpace(31)
    rep = elliptic_representative(sp, z_dependent=quad_family())
    v = sp.sample(lambda x: np.sin(np.pi * x) + 0.5 * x)
    k = 1.0 + sp.cell_average(v) ** 2
    vstar = sp.grad_T(k * sp.grad(v))
    assert abs(rep.gap(v, vstar)) <= 1e-10
    assert rep.gap(v, 1.1 * vstar) > 1e-6


def test_elliptic_gradient_matches_finite_difference():
    sp = DiscreteSpace(7)
    rep = elliptic_representative(sp, fenchel_representative(PowerP(3.0)))
    rng = np.random.default_rng(3)
    v, s = rng.standard_normal(sp.M), 10 * rng.standard_normal(sp.M)
    gv, gs = rep.grad(v, s)
    h = 1e-3  # values are O(1e3); smaller steps drown in roundoff
    for i in range(sp.M):
        e = np.zeros(sp.M)
        e[i] = h
        assert gv[i] == pytest.approx((rep(v + e, s) - rep(v - e, s)) / (2 * h), rel=1e-5, abs=1e-7)
        assert gs[i] == pytest.approx((rep(v, s + e) - rep(v, s - e)) / (2 * h), rel=1e-5, abs=1e-7)


def test_elliptic_nonsmooth_uses_search():
    sp = DiscreteSpace(15)
    rep = elliptic_representative(sp, fenchel_representative(Abs()))
    assert rep.grad is None
    v = sp.sample(lambda x: x * (1 - x))
    # -d/dx sign(v') is a point mass at the kink; a smooth v* off that graph has positive gap
    assert rep.gap(v, np.ones(sp.M)) > 0


def test_nodal_fenchel():
    sp = DiscreteSpace(9)
    rep = nodal_fenchel_representative(sp, Quadratic(2.0))
    v = np.linspace(-1, 1, 9)
    assert rep.gap(v, 2.0 * v) == pytest.approx(0.0, abs=1e-14)
    assert rep.gap(v, v) > 0


def test_grid_shift_rejects_indefinite_matrix():
    sp = DiscreteSpace(3)
    rep = elliptic_representative(sp, fenchel_representative(Quadratic(1.0)))
    with pytest.raises(ValueError, match="positive"):
        shift_by_linear(rep, -np.eye(3))


def test_unknown_kind_rejected():
    with pytest.raises(ValueError):
        Representative(func=lambda v, s: 0.0, kind="mystery", convex=True)


# -- certification ----------------------------------------------------------------------

def test_certify_fitzpatrick_identity_minimal():
    rep = certify_representative(fitzpatrick_representative(identity_graph()), identity_graph(),
                                 compare=fenchel_representative(Quadratic(1.0)))
    assert rep.passed, rep.failures
    assert rep.minimality_violation <= 1e-9


def test_certify_fb_fails_off_origin():
    rep = certify_representative(fb_family(1.0, 0.75), identity_graph())
    assert not rep.passed
    assert any("graph" in f for f in rep.failures)
    assert certify_representative(fb_family(1.0, 0.75), point_graph()).passed


def test_certify_fenchel_abs_sign():
    rep = certify_representative(fenchel_representative(Abs()), sign_graph())
    assert rep.passed, rep.failures
    assert rep.max_gap_on_graph <= 1e-12


def test_certify_semimono_family():
    rep = certify_representative(semimono_representative(quad_family()), quad_family(), COARSE)
    assert rep.passed, rep.failures


# -- invariants --------------------------------------------------------------------------

SCALAR_REPS = {
    "fitz identity": fitzpatrick_representative(identity_graph()),
    "fitz sign": fitzpatrick_representative(sign_graph()),
    "fitz plateau": fitzpatrick_representative(plateau_graph(1.0)),
    "fitz kirchhoff": fitzpatrick_representative(kirchhoff_transform(DiffusionLaw("affine", 1.0))),
    "fenchel quad": fenchel_representative(Quadratic(1.5)),
    "fenchel abs": fenchel_representative(Abs()),
    "fenchel power": fenchel_representative(PowerP(3.0)),
    "fb": fb_family(2.0, 0.8),
    "shift": shift_by_linear(fenchel_representative(Abs()), 0.5),
    "semimono": semimono_representative(quad_family()),
}


@pytest.mark.parametrize("name", list(SCALAR_REPS))
def test_gap_nonnegative_on_box(name):
    f = SCALAR_REPS[name]
    assert np.min(f.gap(V, S)) >= -1e-9


def test_inf_convolution_gap_and_convexity():
    h = inf_convolution(fenchel_representative(Quadratic(1.0)), fenchel_representative(Abs()))
    assert np.min(h.gap(VC, SC)) >= -1e-9
    assert midpoint_convexity_violation(h, PAIRS, n=300) <= 1e-9
    # graph of identity + sign at v = 1 is {2}
    assert h.gap(1.0, 2.0) == pytest.approx(0.0, abs=1e-9)


@settings(max_examples=100, deadline=None)
@given(v=st.floats(-50, 50), vstar=st.floats(-50, 50))
def test_fitzpatrick_identity_closed_form(v, vstar):
    assert fitzpatrick_eval(identity_graph(), v, vstar) == pytest.approx((v + vstar) ** 2 / 4, abs=1e-10,
                                                                          rel=1e-12)


@pytest.mark.parametrize("phi,graph", [(Quadratic(1.0), identity_graph()), (Abs(), sign_graph())])
def test_fitzpatrick_minimality(phi, graph):
    fen = np.asarray(fenchel_representative(phi)(V, S))
    fitz = fitzpatrick_eval(graph, V, S)
    fin = np.isfinite(fen)
    assert np.max(fitz[fin] - fen[fin]) <= 1e-9


@settings(max_examples=50, deadline=None)
@given(v=st.floats(-3, 3), L=st.floats(0, 5), a=st.floats(0.1, 5))
def test_shift_zero_gap_on_shifted_graph(v, L, a):
    g = shift_by_linear(fenchel_representative(Quadratic(a)), L)
    assert abs(g.gap(v, a * v + L * v)) <= 1e-9 * (1 + v * v * (a + L))


@pytest.mark.parametrize("name", ["fitz identity", "fitz sign", "fenchel quad", "fb", "shift"])
def test_convex_representatives_are_midpoint_convex(name):
    assert midpoint_convexity_violation(SCALAR_REPS[name], PAIRS) <= 1e-9


def test_dump_csv(tmp_path):
    path = tmp_path / "rep.csv"
    dump_representative_csv(fb_family(1.0, 0.5), [0.0, 1.0], [0.0, 2.0], path)
    rows = list(csv.reader(open(path)))
    assert rows[0] == ["v", "vstar", "f", "gap"]
    assert len(rows) == 5
    assert float(rows[-1][2]) == pytest.approx(2.5)

from __future__ import annotations

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from numpy.testing import assert_allclose

from conftest import CURVED_POINT, flat
from weylcalc.connection import frame_at
from weylcalc.curvature import (
    DimensionError,
    _gg_low,
    concircular_tensor,
    conformal_tensor,
    curvature_properties,
    curvatures,
    projective_tensor,
    relation_residuals,
    ricci_and_scalar,
    riemann,
    s_tensor,
)
from weylcalc.fuzz import fuzz_manifold, s_concircular_witness
from weylcalc.tensor import max_abs

# Values below were produced by a symbolic computation (exact rational input,
# 30-digit evaluation) of the curved fixture at CURVED_POINT.
ORACLE_GAMMA_BAR = [
    [[0.01, -0.2225, -0.04285714285714286], [-0.1775, -0.3872, 0.0], [0.3504761904761905, 0.0, -0.0832]],
    [[0.1628440366972477, 0.3552293577981651, 0.0], [0.28522935779816516, -0.2225, -0.04285714285714286], [0.0, 0.3504761904761905, 0.35284403669724773]],
    [[-0.336996336996337, 0.0, 0.08], [0.0, -0.36732600732600734, -0.3698076923076923], [0.01, -0.4148076923076923, -0.04285714285714286]],
]
ORACLE_S_IJ = [
    [0.04676466993760572, -0.20041032110091744, 0.3048666666666667],
    [0.14958967889908256, 0.09684049023199023, 0.4473862637362637],
    [0.17153333333333334, 0.14738626373626373, -0.0740664493956604],
]
ORACLE_RICCI = [
    [0.9308724251793392, 0.16639225476358505, 0.27661904761904765],
    [-0.13360774523641497, 1.8928099064632313, -0.017777472527472526],
    [-0.35195238095238096, -0.017777472527472526, 1.0139984601270289],
]
ORACLE_RICCI_BAR = [
    [1.0420285117023984, -0.0340180663373324, 0.5814857142857143],
    [0.015981933662667605, 2.0598370407733655, 0.4296087912087912],
    [-0.18041904761904762, 0.1296087912087912, 1.0068990839802399],
]


@pytest.fixture
def cv(curved3):
    return curvatures(frame_at(curved3, CURVED_POINT))


class TestAgainstSymbolicOracle:
    def test_connection(self, cv):
        assert_allclose(cv.frame.gamma_bar, ORACLE_GAMMA_BAR, atol=1e-14)

    def test_riemann_components(self, cv):
        assert cv.bar.R_up[0, 1, 0, 1] == pytest.approx(-1.0701702123709986, abs=1e-13)
        assert cv.bar.R_up[2, 1, 2, 0] == pytest.approx(-0.11598193366266761, abs=1e-13)
        assert cv.sym.R_up[1, 2, 1, 2] == pytest.approx(-0.925937450952717, abs=1e-13)

    def test_deformation_tensor(self, cv):
        assert_allclose(cv.S_ij, ORACLE_S_IJ, atol=1e-14)

    def test_ricci_and_scalars(self, cv):
        assert_allclose(cv.sym.ricci, ORACLE_RICCI, atol=1e-13)
        assert_allclose(cv.bar.ricci, ORACLE_RICCI_BAR, atol=1e-13)
        assert cv.sym.scalar == pytest.approx(3.6423937944985187, abs=1e-13)
        assert cv.bar.scalar == pytest.approx(3.899959460840332, abs=1e-13)


class TestRiemann:
    def test_flat_is_zero(self):
        fr = frame_at(flat(3), (0.1, 0.2, 0.3))
        assert max_abs(riemann(fr)) == 0.0
        assert max_abs(riemann(fr, "ssnm")) == 0.0

    def test_antisymmetric_in_last_pair(self, cv):
        for R in (cv.sym.R_up, cv.bar.R_up):
            assert max_abs(R + np.swapaxes(R, 2, 3)) <= 1e-15

    def test_unknown_connection(self, cv):
        with pytest.raises(ValueError):
            riemann(cv.frame, "levi")

    def test_tensor_wrappers(self, cv):
        R = riemann(cv.frame, "ssnm")
        assert R.variance == "ulll"
        ric, scalar = ricci_and_scalar(R, cv.frame.metric, cv.frame.metric_inv)
        assert_allclose(ric.c, cv.bar.ricci, atol=0)
        assert scalar == cv.bar.scalar
        assert_allclose(s_tensor(cv.frame).c, cv.S_ij, atol=0)


class TestDeformationTensor:
    def test_zero_form(self):
        assert max_abs(s_tensor(frame_at(flat(2), (0.1, 0.2)))) == 0.0

    @pytest.mark.parametrize("x, beta", [(0.0, 0.5), (0.3, 0.5 / 1.3**2), (-0.4, 0.5 / 0.6**2)])
    def test_witness_is_proportional(self, x, beta):
        S = s_tensor(frame_at(s_concircular_witness((1.0, 0.0)), (x, 0.25))).c
        assert_allclose(S, beta * np.eye(2), atol=1e-15)

    def test_linear_form_is_not_proportional(self):
        # S = (y, 0): S_12 = d_2 S_1 = 1, S_11 = -y^2/2, S_22 = y^2/2
        S = s_tensor(frame_at(flat(2, S=["y", "0"]), (0.3, 0.2))).c
        assert_allclose(S, [[-0.02, 1.0], [0.0, 0.02]], atol=1e-15)

    def test_quadratic_form_is_not_proportional(self):
        # S = (x^2, 0): S_11 = 2x - x^4/2, S_22 = x^4/2, off-diagonal zero
        S = s_tensor(frame_at(flat(2, S=["x^2", "0"]), (0.3, 0.2))).c
        assert_allclose(S, [[0.59595, 0.0], [0.0, 0.00405]], atol=1e-15)


class TestRelations:
    def test_flat_ricci_and_scalar(self):
        cv = curvatures(frame_at(flat(2), (0.0, 0.0)))
        assert max_abs(cv.sym.ricci) == 0.0 and cv.sym.scalar == 0.0

    def test_identities_on_fixture(self, cv):
        res = relation_residuals(cv)
        for key in (
            "riemann_relation",
            "riemann_relation_lowered",
            "ricci_relation",
            "scalar_relation",
            "concircular_relation_up",
            "concircular_relation_low",
            "concircular_relation_ricci",
            "concircular_contraction",
            "conformal_invariance",
            "projective_relation_trace_sign",
        ):
            assert max_abs(res[key]) <= 1e-12, key

    def test_printed_projective_relation_misses_a_trace_term(self, cv):
        # With K_ij = nS_ij + S_ji + (n+1)S g_ij the relation is off by exactly
        # -2S/(n-1) (g_mk g_ij - g_mj g_ik).
        n = cv.frame.n
        expected = -2 * cv.S_trace / (n - 1) * _gg_low(cv.frame.g)
        assert_allclose(relation_residuals(cv)["projective_relation"], expected, atol=1e-12)
        assert max_abs(expected) > 1e-3

    @settings(max_examples=20)
    @given(st.integers(0, 10_000), st.sampled_from([2, 3, 4]), st.lists(st.floats(-0.5, 0.5), min_size=4, max_size=4))
    def test_dual_pipeline_on_fuzzed_manifolds(self, seed, n, p):
        res = relation_residuals(curvatures(frame_at(fuzz_manifold(seed, n), p[:n])))
        assert max_abs(res["riemann_relation"]) <= 1e-9
        assert max_abs(res["ricci_relation"]) <= 1e-9
        assert max_abs(res["scalar_relation"]) <= 1e-9


class TestProperties:
    def test_all_hold_except_cyclic_lemma(self, cv):
        props = curvature_properties(cv)
        for key, arr in props.items():
            if key != "lemma_d":
                assert max_abs(arr) <= 1e-12, key

    def test_cyclic_lemma_carries_the_bracket_terms(self, cv):
        props = curvature_properties(cv)
        # Zbar's cyclic sum equals the property (d) right-hand side, which is
        # nonzero unless S is closed.
        assert max_abs(props["lemma_d"]) > 0.1
        assert max_abs(props["lemma_d_closed"]) <= 1e-12

    def test_cyclic_lemma_holds_for_closed_form(self):
        cv = curvatures(frame_at(s_concircular_witness((0.6, -0.3, 0.4)), (0.2, 0.1, -0.3)))
        assert max_abs(curvature_properties(cv)["lemma_d"]) <= 1e-12

    def test_riemannian_limit(self):
        m = fuzz_manifold(7, 3, weyl=False)
        m = m.replace(S=m.T)  # T = S = 0
        props = curvature_properties(curvatures(frame_at(m, (0.1, -0.2, 0.3))))
        assert max_abs(props["d"]) <= 1e-12  # first Bianchi identity
        assert max_abs(props["b"]) <= 1e-12

    def test_half_bracket_is_the_consistent_choice(self, cv):
        # property (c) with a unit bracket factor would be off by a factor 2
        chain = cv.sym.trace_first
        n = cv.frame.n
        assert max_abs(chain - 2 * n * cv.BT.T) <= 1e-12
        assert max_abs(chain - 4 * n * cv.BT.T) > 1e-2


class TestDerivedTensors:
    def test_conformal_needs_three_dimensions(self):
        cv = curvatures(frame_at(flat(2), (0.0, 0.0)))
        assert cv.sym.conformal is None
        with pytest.raises(DimensionError):
            conformal_tensor(cv.sym, cv.frame.g)

    def test_conformal_vanishes_in_three_dimensions(self, cv):
        assert max_abs(conformal_tensor(cv.sym, cv.frame.g)) <= 1e-12
        assert max_abs(conformal_tensor(cv.bar, cv.frame.g)) <= 1e-12

    @pytest.mark.parametrize("seed", [0, 1, 2])
    def test_conformal_invariance(self, seed):
        cv = curvatures(frame_at(fuzz_manifold(seed, 4), (0.1, -0.2, 0.3, 0.05)))
        C = conformal_tensor(cv.sym, cv.frame.g)
        Cb = conformal_tensor(cv.bar, cv.frame.metric)
        assert max_abs(Cb - C) <= 1e-12
        assert max_abs(C) > 1e-3

    def test_concircular_of_flat(self):
        cv = curvatures(frame_at(flat(3), (0.0, 0.1, 0.0)))
        up, low, ric = concircular_tensor(cv.bar, cv.frame.g)
        assert max_abs(up) == max_abs(low) == max_abs(ric) == 0.0

    def test_concircular_is_trace_adjusted(self, cv):
        _, _, ric = concircular_tensor(cv.bar, cv.frame.g)
        assert abs(np.einsum("ij,ij->", cv.frame.g_inv, ric.c)) <= 1e-12

    def test_projective_without_connection_form(self, curved3):
        m = curved3.replace(S=tuple(curved3.T[0] * 0 for _ in range(3)))
        cv = curvatures(frame_at(m, CURVED_POINT))
        assert_allclose(cv.bar.projective, cv.sym.projective, atol=1e-14)
        assert_allclose(projective_tensor(cv.bar, cv.frame.g, cv.BS).c, cv.bar.projective, atol=0)

    def test_projective_of_flat(self):
        cv = curvatures(frame_at(flat(3), (0.2, 0.0, 0.0)))
        assert max_abs(cv.bar.projective) == 0.0

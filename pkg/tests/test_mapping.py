from __future__ import annotations

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from numpy.testing import assert_allclose

from conftest import CURVED_POINT, XYZ, flat
from weylcalc.connection import frame_at
from weylcalc.curvature import curvatures, pattern_up
from weylcalc.fuzz import fuzz_manifold, fuzz_mapping
from weylcalc.mapping import (
    ConformalMapping,
    NotConcircularError,
    apply_mapping,
    concircular_invariance_residual,
    is_concircular,
    mapping_frame,
    mapping_residuals,
)
from weylcalc.tensor import max_abs

POINTS = [CURVED_POINT, (-0.4, 0.35, 0.1), (0.0, 0.2, -0.45)]


def _residuals(m, mp, p):
    return mapping_residuals(curvatures(frame_at(m, p)), curvatures(frame_at(apply_mapping(m, mp), p)), mp)


class TestIdentityMapping:
    def test_zero_mapping(self, curved3):
        mp = ConformalMapping.build(XYZ, ["0"] * 3, ["0"] * 3)
        assert_allclose(frame_at(apply_mapping(curved3, mp), CURVED_POINT).gamma_bar, frame_at(curved3, CURVED_POINT).gamma_bar, atol=0)
        mf = mapping_frame(curved3, mp, CURVED_POINT)
        assert max_abs(mf.W_ij) == max_abs(mf.P_ij) == max_abs(mf.Q_ij) == 0.0
        ok, phis = is_concircular(curved3, mp, POINTS)
        assert ok and phis == [0.0, 0.0, 0.0]
        assert concircular_invariance_residual(curved3, mp, POINTS) == 0.0

    def test_dimension_mismatch(self, curved3):
        with pytest.raises(ValueError):
            apply_mapping(curved3, ConformalMapping.build(["x", "y"], ["x", "0"], ["0", "0"]))


class TestTransformationLaws:
    @pytest.mark.parametrize(
        "key",
        ["weyl_connection_change", "weyl_curvature_change", "ssnm_connection_change", "ssnm_curvature_change_derived", "deformation_definitions"],
    )
    def test_law_holds(self, curved3, general_mapping, key):
        for p in POINTS:
            assert max_abs(_residuals(curved3, general_mapping, p)[key]) <= 1e-12

    def test_printed_curvature_law_gap(self, curved3, general_mapping):
        # The printed law carries 2 delta^h_i P_[j S_k] and omits the terms
        # pattern(S_i U_j - (S.U) g_ij) with U = P - Q.
        fr = frame_at(curved3, CURVED_POINT)
        res = _residuals(curved3, general_mapping, CURVED_POINT)["ssnm_curvature_change"]
        mf = mapping_frame(curved3, general_mapping, CURVED_POINT)
        S, U, g, gi = fr.S, mf.P - mf.Q, fr.g, fr.g_inv
        wedge = 0.5 * (np.outer(mf.P, S) - np.outer(S, mf.P))
        gap = 2 * np.einsum("hi,jk->hijk", np.eye(3), wedge) + pattern_up(np.outer(S, U) - (S @ gi @ U) * g, g, gi)
        assert_allclose(res, -gap, atol=1e-12)
        assert max_abs(gap) > 1e-2

    def test_deformation_tensors_by_construction(self, curved3, general_mapping):
        mf = mapping_frame(curved3, general_mapping, CURVED_POINT)
        S = frame_at(curved3, CURVED_POINT).S
        assert max_abs(mf.P_under - (mf.P_ij - np.outer(mf.P, S))) <= 1e-12
        assert max_abs(mf.W_ij - (mf.P_under - mf.Q_under + np.outer(mf.P, mf.Q) + np.outer(mf.Q, mf.P))) <= 1e-12

    @settings(max_examples=15)
    @given(st.integers(0, 10_000), st.sampled_from([2, 3, 4]), st.lists(st.floats(-0.5, 0.5), min_size=4, max_size=4))
    def test_laws_on_fuzzed_mappings(self, seed, n, p):
        res = _residuals(fuzz_manifold(seed, n), fuzz_mapping(seed, n), p[:n])
        for key in ("weyl_connection_change", "weyl_curvature_change", "ssnm_connection_change", "ssnm_curvature_change_derived"):
            assert max_abs(res[key]) <= 1e-9

    def test_composition_with_inverse(self, curved3, general_mapping):
        back = apply_mapping(apply_mapping(curved3, general_mapping), general_mapping.inverse())
        for p in POINTS:
            assert max_abs(frame_at(back, p).gamma_bar - frame_at(curved3, p).gamma_bar) <= 1e-12


class TestConcircular:
    def test_equal_forms_give_proportional_deformation(self, curved3):
        mp = fuzz_mapping(3, 3, equal=True)
        for p in POINTS:
            mf = mapping_frame(curved3, mp, p)
            g, gi = frame_at(curved3, p).g, frame_at(curved3, p).g_inv
            assert max_abs(mf.W_ij - (mf.P @ gi @ mf.P) * g) <= 1e-12
        ok, phis = is_concircular(curved3, mp, POINTS)
        assert ok
        assert phis[0] == pytest.approx(mapping_frame(curved3, mp, POINTS[0]).PQ, abs=1e-12)

    def test_closed_form_invariance(self, curved3):
        mp = fuzz_mapping(3, 3, equal=True, closed=True)
        worst = concircular_invariance_residual(curved3, mp, POINTS, detail=True)
        assert all(v <= 1e-12 for v in worst.values()), worst

    def test_non_closed_form_misses_the_bracket_term(self, curved3):
        # With Q = P the curvature shifts by 2(phi - P.Q) (gg) plus 2 delta^h_i nabla_[j P_k];
        # the latter vanishes only for closed P.
        mp = fuzz_mapping(3, 3, equal=True)
        res = _residuals(curved3, mp, CURVED_POINT)
        mf = mapping_frame(curved3, mp, CURVED_POINT)
        assert_allclose(res["concircular_curvature_change"], 2 * np.einsum("hi,jk->hijk", np.eye(3), mf.BP), atol=1e-12)
        assert max_abs(mf.BP) > 1e-2
        assert max_abs(res["concircular_scalar_change"]) <= 1e-12

    def test_constant_form_is_not_concircular(self):
        m = flat(2)
        mp = ConformalMapping.build(m.coords, ["0.3", "0"], ["0", "0"])
        mf = mapping_frame(m, mp, (0.1, -0.2))
        assert_allclose(mf.W_ij, [[-0.045, 0.0], [0.0, 0.045]], atol=1e-16)
        ok, _ = is_concircular(m, mp, [(0.1, -0.2)])
        assert not ok
        with pytest.raises(NotConcircularError):
            concircular_invariance_residual(m, mp, [(0.1, -0.2)])

    def test_needs_points(self, curved3, general_mapping):
        with pytest.raises(ValueError):
            is_concircular(curved3, general_mapping, [])

from __future__ import annotations

import itertools
import json

import numpy as np
import pytest
from numpy.testing import assert_allclose

from conftest import CURVED_POINT, flat
from weylcalc.connection import frame_at
from weylcalc.curvature import curvatures, relation_residuals
from weylcalc.fuzz import fuzz_manifold, fuzz_mapping, negative_witness, s_concircular_witness
from weylcalc.tensor import max_abs
from weylcalc.verify import (
    IDENTITIES,
    SamplingError,
    SuiteConfig,
    VerificationReport,
    classify,
    run_suite,
    s_concircular_residual,
    sample_points,
    theorem_check,
)

ORIGIN2 = [(0.0, 0.0)]


class TestSConcircular:
    def test_zero_form(self):
        res, betas = s_concircular_residual(flat(2), [(0.1, 0.2), (-0.3, 0.4)])
        assert res == 0.0 and betas == [0.0, 0.0]

    def test_witness(self):
        res, betas = s_concircular_residual(s_concircular_witness((1.0, 0.0)), [(0.0, 0.0), (0.3, -0.1)])
        assert res <= 1e-9
        assert betas[0] == pytest.approx(0.5, abs=1e-15)
        assert betas[1] == pytest.approx(0.5 / 1.3**2, abs=1e-15)

    def test_linear_form(self):
        # off-diagonal S_12 = 1 against beta_hat g_12 = 0
        res, betas = s_concircular_residual(flat(2, S=["y", "0"]), [(0.3, 0.2)])
        assert res == pytest.approx(1.0, abs=1e-15)
        assert betas[0] == pytest.approx(0.0, abs=1e-15)

    def test_quadratic_form(self):
        res, _ = s_concircular_residual(flat(2, S=["x^2", "0"]), [(0.3, 0.2)])
        assert res == pytest.approx(0.29595, abs=1e-14)

    def test_needs_points(self):
        with pytest.raises(ValueError):
            s_concircular_residual(flat(2), [])


class TestClassify:
    @pytest.mark.parametrize(
        "d_s, d_z, cell",
        [
            (0.0, 0.0, "forward"),
            (1e-9, 1e-9, "forward"),
            (0.1, 0.2, "contrapositive"),
            (0.0, 0.1, "violation"),
            (0.1, 0.0, "violation"),
            (1e-6, 0.1, "indeterminate"),
            (1e-6, 1e-6, "indeterminate"),
        ],
    )
    def test_cells(self, d_s, d_z, cell):
        assert classify(d_s, d_z) == cell


class TestTheorem:
    def test_witness_forward(self):
        m = s_concircular_witness((0.6, -0.3, 0.4))
        rec = theorem_check(m, sample_points([(-0.5, 0.5)] * 3, 20, 0))
        assert rec.cell == "forward"
        assert rec.D_S <= 1e-9 and rec.D_Z <= 1e-9
        assert rec.beta_consistency_residual <= 1e-9

    def test_non_proportional_contrapositive(self):
        m = flat(3, T=["0", "x/10", "0"], S=["y", "0", "0"])
        rec = theorem_check(m, sample_points([(-0.5, 0.5)] * 3, 20, 0))
        assert rec.cell == "contrapositive"
        assert rec.D_S > 1e-3 and rec.D_Z > 1e-3
        assert rec.beta_consistency_residual is None

    def test_zero_form(self):
        rec = theorem_check(fuzz_manifold(1, 3).replace(S=flat(3).S), [(0.1, 0.2, 0.3)])
        assert rec.D_S == 0.0 and rec.D_Z <= 1e-12

    @pytest.mark.parametrize("seed", range(4))
    def test_two_dimensional_concircular_tensors_coincide(self, seed):
        # in n = 2, Zbar - Z vanishes for any S_ij, so D_Z carries no information
        m = negative_witness(seed, 2)
        cv = curvatures(frame_at(m, (0.1, -0.2)))
        assert max_abs(cv.bar.concircular_low - cv.sym.concircular_low) <= 1e-12
        rec = theorem_check(m, [(0.1, -0.2)])
        assert rec.cell == "violation"
        assert "n=2" in rec.note


class TestRunSuite:
    def test_flat_manifold_passes_exactly(self):
        rep = run_suite(flat(3), SuiteConfig(points=50))
        assert rep.passed
        for r in rep.identities:
            assert r.max_residual is None or r.max_residual <= 1e-12

    def test_report_is_complete(self, curved3, general_mapping):
        rep = run_suite(curved3, SuiteConfig(points=5, mapping=general_mapping))
        assert [r.name for r in rep.identities] == [name for name, _, _ in IDENTITIES]
        for r in rep.identities:
            if r.verdict == "n/a":
                assert r.max_residual is None and r.note
            else:
                assert r.verdict == ("pass" if r.max_residual <= r.tolerance else "fail")
                assert len(r.residuals) == 5

    def test_applicability(self, curved3):
        rep = run_suite(curved3, SuiteConfig(points=3))
        assert rep.identity("weyl_connection_change").verdict == "n/a"
        assert rep.identity("gauge_compatibility").verdict == "n/a"
        rep2 = run_suite(flat(2), SuiteConfig(points=3))
        assert "n=2" in rep2.identity("conformal_invariance").note

    def test_deterministic_and_thread_independent(self, curved3, general_mapping):
        cfg = SuiteConfig(points=20, seed=9, mapping=general_mapping, gauge=None)
        a = run_suite(curved3, cfg).to_json()
        b = run_suite(curved3, cfg).to_json()
        c = run_suite(curved3, SuiteConfig(points=20, seed=9, mapping=general_mapping, threads=4)).to_json()
        assert a == b == c

    def test_seed_changes_sample(self, curved3):
        a = run_suite(curved3, SuiteConfig(points=3, seed=1))
        b = run_suite(curved3, SuiteConfig(points=3, seed=2))
        assert a.meta["sample"] != b.meta["sample"]

    def test_json_round_trip(self, curved3, general_mapping):
        rep = run_suite(curved3, SuiteConfig(points=4, mapping=general_mapping))
        text = rep.to_json()
        again = VerificationReport.from_json(text)
        assert again == rep
        assert again.to_json() == text
        data = json.loads(text)
        assert set(data) >= {"meta", "identities", "theorem"}
        assert set(data["meta"]) >= {"spec_name", "seed", "points", "box", "tolerance", "gap", "version"}
        assert set(data["identities"][0]) >= {"name", "paper_ref", "max_residual", "tolerance", "verdict", "worst_point"}
        assert set(data["theorem"]) >= {"D_S", "D_Z", "cell", "beta_consistency_residual"}

    def test_domain_errors_are_resampled(self):
        m = flat(2, S=["ln(x)", "0"])
        rep = run_suite(m, SuiteConfig(points=20))
        assert len(rep.meta["sample"]) == 20
        assert all(p[0] > 0 for p in rep.meta["sample"])
        assert rep.resampled and all("logarithm" in e["error"] for e in rep.resampled)

    def test_retry_cap(self):
        m = flat(2, S=["ln(x)", "0"])
        with pytest.raises(SamplingError, match="10 retries"):
            run_suite(m, SuiteConfig(points=2, box=[(-1.0, -0.5), (0.0, 1.0)]))

    @pytest.mark.parametrize("kw", [{"points": 0}, {"tol": 1e-6, "gap": 1e-4}, {"box": [(0.5, 0.5), (0, 1)]}, {"box": [(0, 1)]}])
    def test_invalid_config(self, kw):
        with pytest.raises(ValueError):
            run_suite(flat(2), SuiteConfig(**kw))

    def test_halved_box_keeps_verdicts(self, curved3, general_mapping):
        full = run_suite(curved3, SuiteConfig(points=30, mapping=general_mapping))
        half = run_suite(curved3, SuiteConfig(points=30, mapping=general_mapping, box=[(-0.25, 0.25)] * 3))
        assert [r.verdict for r in full.identities] == [r.verdict for r in half.identities]
        assert full.theorem.cell == half.theorem.cell

    def test_summary_lists_every_identity(self, curved3):
        rep = run_suite(curved3, SuiteConfig(points=3))
        text = rep.summary()
        for name, ref, _ in IDENTITIES:
            assert name in text
        assert text.splitlines()[-1].startswith("FAIL")

    def test_printed_forms_are_flagged(self, curved3):
        rep = run_suite(curved3, SuiteConfig(points=5, mapping=fuzz_mapping(3, 3, equal=True)))
        for name, alt in [("projective_relation", "projective_relation_trace_sign"), ("lemma_d", "lemma_d_closed")]:
            assert rep.identity(name).verdict == "fail"
            assert rep.identity(alt).verdict == "pass"
            assert rep.identity(name).note.startswith("convention mismatch") and alt in rep.identity(name).note
        assert "gradient" in rep.identity("concircular_invariance").note
        assert rep.identity("ricci_relation").note == ""

    def test_gradient_mapping_has_no_concircular_failures(self, curved3):
        rep = run_suite(curved3, SuiteConfig(points=5, mapping=fuzz_mapping(3, 3, equal=True, closed=True)))
        for name in ("concircular_curvature_change", "concircular_ricci_change", "concircular_invariance"):
            assert rep.identity(name).verdict == "pass", name


def _riemann_loops(G, dG):
    n = G.shape[0]
    R = np.zeros((n,) * 4)
    for h, i, j, k in itertools.product(range(n), repeat=4):
        R[h, i, j, k] = dG[h, i, k, j] - dG[h, i, j, k] + sum(G[h, r, j] * G[r, i, k] - G[h, r, k] * G[r, i, j] for r in range(n))
    return R


class TestFaultInjection:
    def test_riemann_relation_residual_is_the_quadratic_shift(self, curved3):
        comp = (1, 0, 2)
        clean = frame_at(curved3, CURVED_POINT)
        bad = frame_at(curved3.with_fault(comp), CURVED_POINT)
        # a constant shift of one component only enters through the quadratic terms
        expected = _riemann_loops(bad.gamma_bar, clean.dgamma_bar) - _riemann_loops(clean.gamma_bar, clean.dgamma_bar)
        res = relation_residuals(curvatures(bad))["riemann_relation"]
        assert_allclose(res, expected, atol=1e-13)
        assert 1e-4 < max_abs(res) < 1e-2

    def test_report_names_failures(self, curved3):
        cfg = SuiteConfig(points=10)
        base = set(run_suite(curved3, cfg).failures)
        rep = run_suite(curved3.with_fault((1, 0, 2)), cfg)
        new = set(rep.failures) - base
        assert {"riemann_relation", "torsion", "ssnm_connection_definition"} <= new
        assert rep.meta["digest"]["fault"] == [[1, 0, 2]]

    @pytest.mark.parametrize("n", [2, 3])
    def test_every_component_is_detected(self, n):
        m = fuzz_manifold(11, n)
        cfg = SuiteConfig(points=3, mapping=fuzz_mapping(11, n))
        base = set(run_suite(m, cfg).failures)
        for comp in itertools.product(range(n), repeat=3):
            assert set(run_suite(m.with_fault(comp), cfg).failures) - base, comp

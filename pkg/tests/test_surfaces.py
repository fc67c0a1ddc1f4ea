import numpy as np
import pytest
from hypothesis import given, strategies as st

from finslerkit import (CustomMetric, DomainError, EllipsoidNorm, FrozenMetric, GraphImmersion,
                        ImmersionError, Immersion3, InducedMetric, PaperPhi0, RandersNorm,
                        RotationMetric, Sum2Norm, classify_sff, euclidean_defect,
                        flatness_defect, graph_surface, monochromatic_defect,
                        mono_theorem_report, second_fundamental_form)
from finslerkit.surfaces import (DEFINITE, DEGENERATE_RANK1, INDEFINITE, SFF2, ZERO,
                                 ReparametrizedImmersion)
from finslerkit.suites import GAUSS_CORPUS

import oracles

SUM2 = Sum2Norm(np.eye(3), [1.0, 2.0, 3.0])
SUM2_F = oracles.sum_norm(np.eye(3), np.diag([1.0, 2, 3]))
# phi0 defect to the Euclidean norm; the paraboloid over sum2 carries phi0 at (0.5, 0)
PHI0_EUCLID_DEFECT = 0.0036862520


def _sff(eigs, hess_norm=None):
    eigs = np.asarray(eigs, dtype=float)
    hn = float(np.abs(eigs).max()) if hess_norm is None else hess_norm
    return SFF2(np.diag(eigs), np.array([0.0, 0, 1]), np.sort(eigs), hn)


class TestSFF:
    def test_paraboloid_origin(self):
        s = second_fundamental_form(graph_surface("paraboloid"), (0, 0))
        assert np.allclose(s.matrix, 2 * np.eye(2)) and np.allclose(s.conormal, [0, 0, 1])
        assert classify_sff(s) == DEFINITE

    @pytest.mark.parametrize("name,p,cls", [
        ("saddle", (0, 0), INDEFINITE), ("twisted", (0.3, 0.1), INDEFINITE),
        ("cylinder", (0.2, -0.4), DEGENERATE_RANK1), ("tilted_cylinder", (0.5, 0.5), DEGENERATE_RANK1),
        ("plane", (1, 2), ZERO), ("elliptic", (0.1, 0.2), DEFINITE),
        ("monkey_saddle", (0, 0), ZERO), ("cubic_cylinder", (0.3, 0.0), DEGENERATE_RANK1),
    ])
    def test_catalog_classes(self, name, p, cls):
        assert classify_sff(second_fundamental_form(graph_surface(name), p)) == cls

    def test_gauss_corpus(self):
        for name, p, cls in GAUSS_CORPUS:
            assert classify_sff(second_fundamental_form(graph_surface(name), p)) == cls, name

    def test_graph_sff_matches_hessian_over_slope(self):
        f = graph_surface("wavy")
        p = np.array([0.3, -0.2])
        grad = np.array([f.height_derivative(p, 1, 0), f.height_derivative(p, 0, 1)])
        s = second_fundamental_form(f, p)
        assert np.allclose(s.matrix, f.height_hessian(p) / np.sqrt(1 + grad @ grad), atol=1e-13)

    def test_classify_thresholds(self):
        assert classify_sff(_sff([2.0, 1e-12])) == DEGENERATE_RANK1
        assert classify_sff(_sff([2.0, -1e-12])) == DEGENERATE_RANK1
        assert classify_sff(_sff([2.0, 1e-3])) == DEFINITE
        assert classify_sff(_sff([0.0, 0.0], hess_norm=0.0)) == ZERO
        assert classify_sff(_sff([1e-12, 0.0], hess_norm=1.0)) == ZERO
        with pytest.raises(DomainError):
            classify_sff(_sff([1.0, 1.0]), scale_tol=0)

    @pytest.mark.parametrize("eps", [1e-6, 1e-3, 1.0, 1e3])
    def test_scaled_cylinder(self, eps):
        f = GraphImmersion({(2, 0): eps})
        assert classify_sff(second_fundamental_form(f, (0.1, 0.2))) == DEGENERATE_RANK1

    @given(st.floats(1e-4, 1e4), st.sampled_from(["paraboloid", "saddle", "cylinder", "elliptic"]))
    def test_height_scaling_invariance(self, c, name):
        base = graph_surface(name)
        f = GraphImmersion({k: c * v for k, v in base.coefficients.items()})
        p = (0.0, 0.0)
        assert classify_sff(second_fundamental_form(f, p)) == \
            classify_sff(second_fundamental_form(base, p))

    @given(st.lists(st.floats(-2, 2), min_size=4, max_size=4),
           st.sampled_from(["paraboloid", "saddle", "cylinder", "elliptic", "twisted"]))
    def test_chart_invariance(self, a, name):
        A = np.reshape(a, (2, 2))
        if abs(np.linalg.det(A)) < 0.1:
            A = A + np.eye(2) * 1.5
        base = graph_surface(name)
        g = ReparametrizedImmersion(base, A)
        x = np.array([0.1, -0.05])
        s0 = second_fundamental_form(base, A @ x)
        s1 = second_fundamental_form(g, x)
        # same conormal line, S transforms as a bilinear form
        assert abs(abs(s0.conormal @ s1.conormal) - 1) < 1e-12
        sign = np.sign(s0.conormal @ s1.conormal)
        assert np.allclose(sign * A.T @ s0.matrix @ A, s1.matrix, atol=1e-10)
        assert classify_sff(s0) == classify_sff(s1)

    def test_rank_deficient(self):
        f = Immersion3(lambda x: np.array([x[0], x[0], x[0] ** 2]),
                       jac=lambda x: np.array([[1.0, 0], [1, 0], [2 * x[0], 0]]))
        with pytest.raises(ImmersionError):
            second_fundamental_form(f, (0.1, 0.2))
        with pytest.raises(ImmersionError):
            InducedMetric(f, SUM2).at((0.1, 0.2))

    def test_fd_fallback_immersion(self):
        f = Immersion3(lambda x: np.array([x[0], x[1], x[0] ** 2 + x[1] ** 2]))
        s = second_fundamental_form(f, (0.0, 0.0))
        assert np.allclose(s.matrix, 2 * np.eye(2), atol=1e-5)


def _induced_phi(f, x, v):
    x = np.asarray(x, dtype=float)
    h = 1e-6
    J = np.column_stack([(f.map(x + h * e) - f.map(x - h * e)) / (2 * h) for e in np.eye(2)])
    return float(SUM2_F(J @ v))


class TestMetrics:
    def test_induced_values(self):
        m = InducedMetric(graph_surface("paraboloid"), SUM2)
        x, v = np.array([0.2, -0.1]), np.array([0.3, 0.5])
        w = np.array([v[0], v[1], 2 * x @ v])
        assert m.eval(x, v) == pytest.approx(float(SUM2_F(w)), rel=1e-13)

    def test_frozen_and_rotation(self):
        phi0 = PaperPhi0()
        assert FrozenMetric(phi0).eval((5, -3), (1, 0)) == pytest.approx(2.0)
        r = RotationMetric(phi0)
        assert r.eval((0, 0), (1, 0)) == pytest.approx(2.0)
        assert r.eval((0, np.pi / 2), (1, 0)) == pytest.approx(1 + np.sqrt(2))
        assert r.eval((0.7, 0.3), (1, 0)) == pytest.approx(r.eval((-4, 0.3), (1, 0)))

    @pytest.mark.parametrize("metric", [
        InducedMetric(graph_surface("wavy"), SUM2),
        InducedMetric(graph_surface("elliptic"), RandersNorm(np.diag([1, 2, 3]), [0.1, 0, 0.3])),
        RotationMetric(PaperPhi0()),
    ], ids=["induced-sum2", "induced-randers", "rotation"])
    def test_derivatives_vs_fd(self, metric, rng):
        for _ in range(5):
            x = rng.uniform(-0.5, 0.5, 2)
            v = rng.normal(size=2)
            ref = CustomMetric(metric.eval, step=1e-5)
            assert np.allclose(metric.dv(x, v), ref.dv(x, v), atol=1e-7)
            assert np.allclose(metric.dx(x, v), ref.dx(x, v), atol=1e-7)
            assert np.allclose(metric.dxv(x, v), ref.dxv(x, v), atol=1e-5)
            assert np.allclose(metric.dvv(x, v), ref.dvv(x, v), atol=1e-5)
            assert np.allclose(metric.dxx(x, v), ref.dxx(x, v), atol=1e-5)

    def test_induced_dx_independent_oracle(self):
        f = graph_surface("wavy")
        m = InducedMetric(f, SUM2)
        x, v = np.array([0.2, 0.3]), np.array([0.4, -0.7])
        h = 1e-5
        fd = [(_induced_phi(f, x + h * e, v) - _induced_phi(f, x - h * e, v)) / (2 * h)
              for e in np.eye(2)]
        assert np.allclose(m.dx(x, v), fd, atol=1e-6)

    def test_jet_batched_matches_single(self, rng):
        m = RotationMetric(PaperPhi0())
        X, V = rng.normal(size=(4, 2)), rng.normal(size=(4, 2))
        phi, dv, dx, dvv, dxv = m.jet(X, V)
        for k in range(4):
            assert phi[k] == pytest.approx(m.eval(X[k], V[k]))
            assert np.allclose(dv[k], m.dv(X[k], V[k]))
            assert np.allclose(dxv[k], m.dxv(X[k], V[k]))

    def test_generic_jet(self, rng):
        m = InducedMetric(graph_surface("saddle"), SUM2)
        X, V = rng.normal(size=(3, 2)) * 0.3, rng.normal(size=(3, 2))
        phi, dv, dx, dvv, dxv = m.jet(X, V)
        assert np.allclose(dx[1], m.dx(X[1], V[1]))
        assert np.allclose(dvv[2], m.dvv(X[2], V[2]))


class TestDiagnostics:
    def test_mono_defect_paraboloid(self):
        m = InducedMetric(graph_surface("paraboloid"), SUM2)
        d, arg = monochromatic_defect(m, [(0, 0), (0.5, 0)])
        assert d == pytest.approx(PHI0_EUCLID_DEFECT, rel=1e-5) and arg == (0, 1)

    def test_mono_defect_frozen_is_zero(self):
        m = FrozenMetric(PaperPhi0())
        assert monochromatic_defect(m, [(0, 0), (1, 2), (-3, 4)])[0] < 1e-12

    def test_rotation_metric_is_monochromatic(self):
        m = RotationMetric(PaperPhi0())
        assert monochromatic_defect(m, [(0, 0), (0.2, 0.7), (1, 2.1)])[0] < 1e-8

    def test_mono_needs_two_points(self):
        with pytest.raises(DomainError):
            monochromatic_defect(FrozenMetric(PaperPhi0()), [(0, 0)])

    def test_euclidean_defect(self):
        assert euclidean_defect(FrozenMetric(PaperPhi0()), (0, 0)) == \
            pytest.approx(PHI0_EUCLID_DEFECT, rel=1e-6)
        m = InducedMetric(graph_surface("saddle"), EllipsoidNorm(np.eye(3)))
        assert euclidean_defect(m, (0.3, 0.4)) < 1e-10

    def test_flatness(self):
        assert flatness_defect(FrozenMetric(PaperPhi0()), (0, 0)) == (0.0, 0.0)
        F1, _ = flatness_defect(RotationMetric(PaperPhi0()), (0, 0))
        assert F1 >= 0.4
        F1, F2 = flatness_defect(InducedMetric(graph_surface("paraboloid"), SUM2), (0, 0))
        assert F1 < 1e-10 and F2 > 0
        with pytest.raises(DomainError):
            flatness_defect(FrozenMetric(PaperPhi0()), (0, 0), n_dirs=8)

    def test_custom_metric_translation_flag(self):
        m = CustomMetric(lambda x, v: float(np.hypot(*v)) * (1 + x[1] ** 2),
                         x_translation_invariant=True)
        assert m.x_translation_invariant
        assert np.allclose(m.dx((3, 0.5), (1, 0)), [0, 1.0], atol=1e-7)


class TestMonoReport:
    def test_paraboloid_sum2(self):
        rep = mono_theorem_report(graph_surface("paraboloid"), SUM2,
                                  [(0, 0), (0.2, 0), (0, 0.2), (0.1, 0.1)])
        assert [r.sff_class for r in rep.records] == [DEFINITE] * 4
        assert rep.records[0].mono_defect == 0
        assert rep.records[1].mono_defect == pytest.approx(2.136e-3, rel=1e-2)
        assert not rep.monochromatic and rep.violations == []

    def test_cylinder_euclidean(self):
        rep = mono_theorem_report(graph_surface("cylinder"), EllipsoidNorm(np.eye(3)),
                                  [(0, 0), (0.3, 0.1), (-0.2, 0.5)])
        assert rep.monochromatic and rep.violations == []
        assert all(r.sff_class == DEGENERATE_RANK1 for r in rep.records)

    def test_plane_sum2(self):
        rep = mono_theorem_report(graph_surface("plane"), SUM2, [(0, 0), (1, 1)])
        assert rep.monochromatic and rep.violations == []
        assert all(r.sff_class == ZERO for r in rep.records)

    def test_as_dict(self):
        rep = mono_theorem_report(graph_surface("plane"), SUM2, [(0, 0)])
        d = rep.as_dict()
        assert d["monochromatic"] and len(d["records"]) == 1

import math

import numpy as np
import numpy.testing as npt
import pytest

from quatnn.activations import QUATERNION_KINDS, ActivationKind, AngleConvention, apply
from quatnn.ghr import GhrDerivative, UnsupportedKindError, analytic_ghr, numeric_ghr
from quatnn.quaternion import DegenerateQuaternionError, Quaternion, conj, norm

PSI = AngleConvention.PSI
NINE = sorted(QUATERNION_KINDS, key=lambda k: k.value)


def sample_points(rng, n):
    """Non-degenerate probes: |w| <= 1.5, imaginary norm in [0.1, 1.5]."""
    w = rng.uniform(-1.5, 1.5, size=n)
    dirs = rng.normal(size=(n, 3))
    dirs /= np.linalg.norm(dirs, axis=1, keepdims=True)
    v = rng.uniform(0.1, 1.5, size=n)
    return [Quaternion(w[i], *(v[i] * dirs[i])) for i in range(n)]


class TestNumericGhr:
    def test_identity_map(self):
        got = numeric_ghr(lambda q: q, Quaternion(0.3, 0.7, -0.2, 1.1))
        npt.assert_allclose(got.value.components(), (1, 0, 0, 0), atol=1e-9)

    def test_conjugation_map(self):
        # partials of conj combine to 1/4 (1 - 1 - 1 - 1) = -1/2
        got = numeric_ghr(conj, Quaternion(0.5, -0.4, 0.9, 0.1))
        npt.assert_allclose(got.value.components(), (-0.5, 0, 0, 0), atol=1e-9)

    def test_norm_activation_value(self):
        f = lambda q: apply(ActivationKind.NORM, PSI, q)
        got = numeric_ghr(f, Quaternion(1, 1, 1, 1))
        npt.assert_allclose(got.value.components(), (0.375, 0, 0, 0), atol=1e-7)

    def test_rejects_bad_step(self):
        with pytest.raises(ValueError):
            numeric_ghr(lambda q: q, Quaternion(1, 1, 0, 0), h=0.0)


class TestAnalyticValues:
    def test_norm_at_ones(self):
        got = analytic_ghr(ActivationKind.NORM, Quaternion(1, 1, 1, 1))
        npt.assert_allclose(got.value.components(), (0.375, 0, 0, 0), atol=1e-15)

    def test_magnitude_tanh_near_real_axis(self):
        q = Quaternion(1, 0.01, 0, 0)
        got = analytic_ghr(ActivationKind.MAGNITUDE_TANH, q)
        qn = norm(q)
        expect = 3 * math.tanh(qn) / (4 * qn) + (1 - math.tanh(qn) ** 2) / 4
        npt.assert_allclose(got.value.components(), (expect, 0, 0, 0), atol=1e-15)
        assert got.value.w == pytest.approx(0.676, abs=5e-3)

    def test_cardioid_fixed_by_oracle(self):
        q = Quaternion(2, 0.5, 0, 0)
        got = analytic_ghr(ActivationKind.CARDIOID, q)
        oracle = numeric_ghr(lambda p: apply(ActivationKind.CARDIOID, PSI, p), q)
        npt.assert_allclose(got.value.components(), oracle.value.components(), atol=1e-8)
        # closed form: 1/2 [1 + 3 w / (4 n) + z / (4 n)]
        qn = norm(q)
        expect = (0.5 * (1 + 3 * q.w / (4 * qn) + q.w / (4 * qn)),
                  0.5 * q.x / (4 * qn), 0, 0)
        npt.assert_allclose(got.value.components(), expect, atol=1e-15)


class TestOracleGate:
    """Every analytic rule must agree with central differences."""

    @pytest.mark.parametrize("kind", NINE)
    def test_analytic_matches_numeric(self, kind):
        rng = np.random.default_rng(41)
        f = lambda q: apply(kind, PSI, q)
        for q in sample_points(rng, 1000):
            ana = analytic_ghr(kind, q).value
            num = numeric_ghr(f, q).value
            err = (ana - num).norm() / max(1.0, ana.norm())
            assert err <= 1e-5, (kind, q, err)


class TestQualitativeClaims:
    def test_phase_kinds_sensitive_everywhere(self):
        # minimum derivative magnitude stays clearly positive off the real axis
        from quatnn.activations import PHASE_KINDS

        res = 41
        for kind in sorted(PHASE_KINDS, key=lambda k: k.value):
            mags = []
            for im in np.linspace(0.2, 1.5, res):
                for re in np.linspace(-1.5, 1.5, res):
                    z = Quaternion(re, *(im * np.full(3, 1 / math.sqrt(3))))
                    mags.append(analytic_ghr(kind, z).magnitude())
            assert min(mags) > 0.05, kind

    def test_magnitude_tanh_saturates(self):
        direction = np.full(3, 1 / math.sqrt(3))
        near = Quaternion(0.3, *(0.4 * direction))   # norm 0.5
        far = Quaternion(3.0, *(4.0 * direction))    # norm 5.0
        assert norm(near) == pytest.approx(0.5)
        assert norm(far) == pytest.approx(5.0)
        d_near = analytic_ghr(ActivationKind.MAGNITUDE_TANH, near).magnitude()
        d_far = analytic_ghr(ActivationKind.MAGNITUDE_TANH, far).magnitude()
        assert d_far < d_near

    def test_phase_grid_bounded(self):
        from quatnn.activations import PHASE_KINDS

        # dominant term of every phase-class rule is 2||z|| / (4 ||Im z||),
        # largest at the scan corner; 1.2x headroom for the remaining terms
        bound = 1.2 * 2 * math.hypot(1.5, 0.1) / (4 * 0.1)
        for kind in sorted(PHASE_KINDS, key=lambda k: k.value):
            mags = []
            for im in np.linspace(0.1, 1.5, 29):
                for re in np.linspace(-1.5, 1.5, 29):
                    z = Quaternion(re, im, 0, 0)
                    mags.append(analytic_ghr(kind, z).magnitude())
            mags = np.array(mags)
            assert np.isfinite(mags).all()
            assert mags.min() >= 0.0
            assert mags.max() <= bound, kind


class TestErrorPaths:
    def test_split_kinds_unsupported(self):
        with pytest.raises(UnsupportedKindError):
            analytic_ghr(ActivationKind.SPLIT_RELU, Quaternion(1, 1, 0, 0))

    def test_theta_unsupported(self):
        with pytest.raises(UnsupportedKindError):
            analytic_ghr(ActivationKind.NORM, Quaternion(1, 1, 0, 0),
                         conv=AngleConvention.THETA)

    def test_degenerate_rejected(self):
        with pytest.raises(DegenerateQuaternionError):
            analytic_ghr(ActivationKind.NORM, Quaternion(1, 0, 0, 0))
        with pytest.raises(DegenerateQuaternionError):
            analytic_ghr(ActivationKind.PHASE_SIN, Quaternion.zero())

    def test_numeric_works_for_theta_forward(self):
        f = lambda q: apply(ActivationKind.PHASE_SIN, AngleConvention.THETA, q)
        got = numeric_ghr(f, Quaternion(0.5, 0.5, 0.3, -0.2))
        assert got.value.is_finite()


class TestDerivativeGrid:
    def test_norm_value_and_mask(self):
        from quatnn.viz import MeshSpec

        spec = MeshSpec(re_range=(0.0, 2.0), im_range=(0.0, 2.0), resolution=3)
        from quatnn.ghr import derivative_grid

        rows = derivative_grid(ActivationKind.NORM, spec)
        assert len(rows) == 9
        table = {(re, im): mag for re, im, mag in rows}
        assert table[(0.0, 0.0)] is None          # fully degenerate corner
        assert table[(2.0, 0.0)] is None          # real axis is masked too
        # ||z|| = 2 -> 3 / (4 * 2) = 0.375
        assert table[(0.0, 2.0)] == pytest.approx(0.375, abs=1e-12)
        got = table[(2.0, 2.0)]
        assert got == pytest.approx(3 / (4 * math.hypot(2, 2)), abs=1e-12)

    def test_y_major_order(self):
        from quatnn.viz import MeshSpec
        from quatnn.ghr import derivative_grid

        spec = MeshSpec(re_range=(-1.0, 1.0), im_range=(0.0, 1.0), resolution=2)
        rows = derivative_grid(ActivationKind.NORM, spec)
        assert [(re, im) for re, im, _ in rows] == [
            (-1.0, 0.0), (1.0, 0.0), (-1.0, 1.0), (1.0, 1.0)]

import math

import numpy as np
import numpy.testing as npt
import pytest

from quatnn.activations import (
    MAGNITUDE_KINDS,
    PHASE_KINDS,
    QUATERNION_KINDS,
    SPLIT_KINDS,
    TANH_PI,
    TANHSHRINK_PI,
    ActivationKind,
    AngleConvention,
    apply,
    apply_tensor,
    output_phase,
    phase_transfer,
)
from quatnn.quaternion import DegenerateQuaternionError, Quaternion, QTensor

PSI = AngleConvention.PSI
THETA = AngleConvention.THETA
ALL_KINDS = list(ActivationKind)


def sample_planes(rng, n, norm_lo=0.1, norm_hi=10.0, im_lo=1e-3):
    """Random quaternions with prescribed norm range and imaginary norm floor."""
    comps = rng.normal(size=(4, n))
    im = np.sqrt((comps[1:] ** 2).sum(axis=0))
    comps[1:, im < 1e-2] += 0.1  # keep the imaginary floor after rescaling
    norms = np.sqrt((comps ** 2).sum(axis=0))
    target = rng.uniform(norm_lo, norm_hi, size=n)
    comps *= target / norms
    keep = np.sqrt((comps[1:] ** 2).sum(axis=0)) >= im_lo
    return comps[:, keep]


def polar_oracle(kind, conv, q):
    """Activation via the explicit polar path, written from the definitions."""
    qn = math.hypot(*q.components())
    v = math.hypot(q.x, q.y, q.z)
    psi = math.atan2(v, q.w)
    ang = 2.0 * psi if conv is THETA else psi
    if kind in MAGNITUDE_KINDS:
        if kind is ActivationKind.NORM:
            lam = 1.0 / qn
        elif kind is ActivationKind.MAGNITUDE_TANH:
            lam = math.tanh(qn) / qn
        else:
            lam = 0.5 * (1.0 + math.cos(ang))
        return Quaternion(lam * q.w, lam * q.x, lam * q.y, lam * q.z)
    g = phase_transfer(kind, ang, _MATH)
    s = qn * math.sin(g) / v
    return Quaternion(qn * math.cos(g), s * q.x, s * q.y, s * q.z)


class _MATH:
    tanh = math.tanh
    sin = math.sin


class TestScalarExamples:
    def test_cardioid_reduces_to_relu_on_real_axis(self):
        assert apply(ActivationKind.CARDIOID, PSI, Quaternion(-2, 0, 0, 0)) == Quaternion.zero()
        assert apply(ActivationKind.CARDIOID, PSI, Quaternion(2, 0, 0, 0)) == Quaternion(2, 0, 0, 0)

    def test_cardioid_relu_1000_points(self):
        rng = np.random.default_rng(21)
        for w in rng.uniform(-5, 5, size=1000):
            got = apply(ActivationKind.CARDIOID, PSI, Quaternion(w, 0, 0, 0))
            assert got == Quaternion(max(0.0, w), 0, 0, 0)

    def test_norm_345(self):
        got = apply(ActivationKind.NORM, PSI, Quaternion(3, 0, 4, 0))
        npt.assert_allclose(got.components(), (0.6, 0, 0.8, 0), atol=1e-15)

    def test_split_relu(self):
        got = apply(ActivationKind.SPLIT_RELU, PSI, Quaternion(-1, 2, -3, 4))
        assert got == Quaternion(0, 2, 0, 4)

    def test_phase_sin_pure_imaginary(self):
        got = apply(ActivationKind.PHASE_SIN, PSI, Quaternion(0, 2, 0, 0))
        expect = (2 * math.cos(1), 2 * math.sin(1), 0, 0)
        npt.assert_allclose(got.components(), expect, atol=1e-14)
        npt.assert_allclose(got.components()[:2], (1.0806, 1.6829), atol=5e-5)

    def test_scaled_phase_sin_pure_imaginary(self):
        got = apply(ActivationKind.SCALED_PHASE_SIN, PSI, Quaternion(0, 2, 0, 0))
        npt.assert_allclose(got.components(), (-2, 0, 0, 0), atol=1e-14)

    def test_magnitude_tanh_real(self):
        got = apply(ActivationKind.MAGNITUDE_TANH, PSI, Quaternion(2, 0, 0, 0))
        npt.assert_allclose(got.components(), (math.tanh(2), 0, 0, 0), atol=1e-15)
        assert got.w == pytest.approx(0.9640, abs=5e-5)

    def test_phase_tanh_unit_i(self):
        got = apply(ActivationKind.PHASE_TANH, PSI, Quaternion(0, 1, 0, 0))
        g = math.tanh(math.pi / 2)
        npt.assert_allclose(got.components(), (math.cos(g), math.sin(g), 0, 0), atol=1e-14)
        npt.assert_allclose(got.components()[:2], (0.60808, 0.79387), atol=5e-5)


class TestOutputPhase:
    def test_paper_constants(self):
        assert output_phase(ActivationKind.PHASE_TANH, PSI, math.pi) == pytest.approx(0.9963, abs=5e-5)
        assert output_phase(ActivationKind.PHASE_TANHSHRINK, PSI, math.pi) == pytest.approx(2.1453, abs=5e-5)
        assert output_phase(ActivationKind.SCALED_PHASE_TANH, PSI, math.pi) == pytest.approx(math.pi, abs=1e-15)
        assert abs(math.cos(TANH_PI)) == pytest.approx(0.543, abs=5e-4)

    def test_scaled_endpoints(self):
        assert output_phase(ActivationKind.SCALED_PHASE_TANHSHRINK, PSI, math.pi) == pytest.approx(math.pi)
        assert output_phase(ActivationKind.SCALED_PHASE_SIN, PSI, math.pi / 2) == pytest.approx(math.pi)
        assert output_phase(ActivationKind.PHASE_SIN, PSI, math.pi / 2) == pytest.approx(1.0)

    def test_magnitude_class_is_identity(self):
        for kind in MAGNITUDE_KINDS:
            assert output_phase(kind, PSI, 0.7) == 0.7

    def test_split_rejected(self):
        with pytest.raises(ValueError):
            output_phase(ActivationKind.SPLIT_RELU, PSI, 0.5)

    def test_shrink_constant_consistency(self):
        assert TANHSHRINK_PI == pytest.approx(math.pi - math.tanh(math.pi), abs=0)


class TestMagnitudeClassInvariants:
    """Ratio preservation: output is a nonnegative scalar multiple of the input."""

    @pytest.mark.parametrize("kind", sorted(MAGNITUDE_KINDS, key=lambda k: k.value))
    def test_phase_and_ratio_preserved(self, kind):
        rng = np.random.default_rng(22)
        w, x, y, z = sample_planes(rng, 10_000)
        t = QTensor(w, x, y, z)
        out = apply_tensor(kind, PSI, t)
        psi_in = np.arctan2(t.imag_norms(), t.w)
        psi_out = np.arctan2(out.imag_norms(), out.w)
        lam = out.norms() / t.norms()
        assert (lam >= 0).all()
        live = lam > 1e-12  # cardioid collapses near the negative real axis
        npt.assert_allclose(psi_out[live], psi_in[live], atol=1e-9)
        for pin, pout in zip(t.planes(), out.planes()):
            err = np.abs(pout - lam * pin)
            assert (err[live] <= 1e-9 * np.maximum(1.0, out.norms()[live])).all()

    def test_norm_maps_to_unit(self):
        rng = np.random.default_rng(23)
        t = QTensor(*sample_planes(rng, 10_000))
        out = apply_tensor(ActivationKind.NORM, PSI, t)
        npt.assert_allclose(out.norms(), 1.0, atol=1e-9)

    def test_axis_unchanged(self):
        rng = np.random.default_rng(24)
        t = QTensor(*sample_planes(rng, 2_000))
        for kind in MAGNITUDE_KINDS:
            out = apply_tensor(kind, PSI, t)
            lam = out.norms() / t.norms()
            live = lam > 1e-12
            vin = t.imag_norms()
            vout = out.imag_norms()
            for cin, cout in zip(t.planes()[1:], out.planes()[1:]):
                npt.assert_allclose((cout / vout)[live], (cin / vin)[live], atol=1e-9)


class TestPhaseClassInvariants:
    """Magnitude preservation under both angle conventions."""

    @pytest.mark.parametrize("kind", sorted(PHASE_KINDS, key=lambda k: k.value))
    @pytest.mark.parametrize("conv", [PSI, THETA])
    def test_norm_preserved(self, kind, conv):
        rng = np.random.default_rng(25)
        t = QTensor(*sample_planes(rng, 10_000))
        out = apply_tensor(kind, conv, t)
        npt.assert_allclose(out.norms(), t.norms(), rtol=1e-9)

    @pytest.mark.parametrize("kind", sorted(PHASE_KINDS, key=lambda k: k.value))
    def test_axis_preserved_psi(self, kind):
        rng = np.random.default_rng(26)
        t = QTensor(*sample_planes(rng, 2_000))
        out = apply_tensor(kind, PSI, t)
        vin = t.imag_norms()
        vout = out.imag_norms()
        live = vout > 1e-6
        for cin, cout in zip(t.planes()[1:], out.planes()[1:]):
            npt.assert_allclose((cout / vout)[live], (cin / vin)[live], atol=1e-9)

    def test_scaled_phase_sin_output_phase(self):
        rng = np.random.default_rng(27)
        t = QTensor(*sample_planes(rng, 10_000))
        out = apply_tensor(ActivationKind.SCALED_PHASE_SIN, PSI, t)
        expect = math.pi * t.imag_norms() / t.norms()
        psi_out = np.arctan2(out.imag_norms(), out.w)
        npt.assert_allclose(psi_out, expect, atol=1e-9)


class TestPhaseSinDualForm:
    def test_trig_eliminated_equals_polar_form(self):
        # Eq. forms compared over signed real parts; the arcsin folding
        # identity is what makes the simplification valid for Re < 0.
        rng = np.random.default_rng(28)
        comps = rng.uniform(-3, 3, size=(10_000, 4))
        comps[:5000, 0] = -np.abs(comps[:5000, 0])  # force negative real parts
        for kind in (ActivationKind.PHASE_SIN, ActivationKind.SCALED_PHASE_SIN):
            worst = 0.0
            for row in comps:
                q = Quaternion(*row)
                if q.imag_norm() <= 1e-3:
                    continue
                got = apply(kind, PSI, q)
                expect = polar_oracle(kind, PSI, q)
                worst = max(worst, max(abs(a - b) for a, b in
                                       zip(got.components(), expect.components())))
            assert worst <= 1e-12


class TestSplitClass:
    def test_componentwise_exact(self):
        rng = np.random.default_rng(29)
        for row in rng.normal(size=(200, 4)):
            q = Quaternion(*row)
            r = apply(ActivationKind.SPLIT_RELU, PSI, q)
            assert r.components() == tuple(max(0.0, c) for c in q.components())
            t = apply(ActivationKind.SPLIT_TANH, PSI, q)
            assert t.components() == tuple(float(np.tanh(c)) for c in q.components())


class TestThetaConvention:
    """theta = 2 psi substituted into every formula, constants untouched."""

    @pytest.mark.parametrize("kind", sorted(QUATERNION_KINDS, key=lambda k: k.value))
    def test_matches_polar_oracle(self, kind):
        rng = np.random.default_rng(30)
        for row in rng.normal(size=(500, 4)):
            q = Quaternion(*row)
            if q.imag_norm() <= 1e-3 or q.norm() <= 1e-3:
                continue
            got = apply(kind, THETA, q)
            expect = polar_oracle(kind, THETA, q)
            npt.assert_allclose(got.components(), expect.components(),
                                atol=1e-12 * max(1.0, q.norm()))

    def test_cardioid_theta_loses_relu(self):
        # with the rotation angle, cos(2 psi) = 1 on the whole real axis
        got = apply(ActivationKind.CARDIOID, THETA, Quaternion(-2, 0, 0, 0))
        npt.assert_allclose(got.components(), (-2, 0, 0, 0), atol=1e-15)


class TestDegenerateHandling:
    @pytest.mark.parametrize("kind", sorted(PHASE_KINDS, key=lambda k: k.value))
    def test_negative_real_axis_limit(self, kind):
        # imaginary output collapses to zero, real output keeps the formula value
        got = apply(kind, PSI, Quaternion(-1.5, 0, 0, 0))
        g = phase_transfer(kind, math.pi, _MATH)
        npt.assert_allclose(got.components(), (1.5 * math.cos(g), 0, 0, 0), atol=1e-14)

    def test_phase_tanh_magnitude_drop_constant(self):
        got = apply(ActivationKind.PHASE_TANH, PSI, Quaternion(-1.0, 0, 0, 0))
        assert got.w == pytest.approx(0.543, abs=5e-4)

    @pytest.mark.parametrize("kind", [ActivationKind.NORM] + sorted(PHASE_KINDS, key=lambda k: k.value))
    def test_strict_raises_at_zero(self, kind):
        with pytest.raises(DegenerateQuaternionError):
            apply(kind, PSI, Quaternion.zero(), strict=True)

    def test_lenient_total_and_finite(self):
        corners = [Quaternion.zero(), Quaternion(-3, 0, 0, 0), Quaternion(1e-200, 0, 0, 0),
                   Quaternion(0, 1e-200, 0, 0), Quaternion(-1e6, 1e-9, 0, 0),
                   Quaternion(1e100, -1e100, 1e100, -1e100)]
        rng = np.random.default_rng(31)
        extra = [Quaternion(*row) for row in rng.uniform(-1e6, 1e6, size=(500, 4))]
        for kind in ALL_KINDS:
            for conv in (PSI, THETA):
                for q in corners + extra:
                    out = apply(kind, conv, q)
                    assert out.is_finite(), (kind, conv, q)


class TestApplyTensor:
    def test_matches_scalar_loop(self):
        rng = np.random.default_rng(32)
        t = QTensor(*rng.normal(size=(4, 2, 2)))
        for kind in ALL_KINDS:
            for conv in (PSI, THETA):
                out = apply_tensor(kind, conv, t)
                assert out.shape == t.shape
                for i in range(2):
                    for j in range(2):
                        expect = apply(kind, conv, t.item((i, j)))
                        npt.assert_allclose(out.item((i, j)).components(),
                                            expect.components(), rtol=1e-12, atol=1e-15)

    def test_norm_fixed_point_on_unit_tensor(self):
        rng = np.random.default_rng(33)
        comps = rng.normal(size=(4, 3, 3))
        comps /= np.sqrt((comps ** 2).sum(axis=0))
        t = QTensor(*comps)
        out = apply_tensor(ActivationKind.NORM, PSI, t)
        for pin, pout in zip(t.planes(), out.planes()):
            npt.assert_allclose(pout, pin, atol=1e-12)

    def test_split_tanh_zeros(self):
        t = QTensor.zeros((4, 4))
        out = apply_tensor(ActivationKind.SPLIT_TANH, PSI, t)
        assert out == t

    def test_strict_reports_offending_index(self):
        t = QTensor.zeros((2, 3))
        with pytest.raises(DegenerateQuaternionError, match=r"\(0, 0\)"):
            apply_tensor(ActivationKind.NORM, PSI, t, strict=True)

    def test_float32_supported(self):
        rng = np.random.default_rng(34)
        t = QTensor(*rng.normal(size=(4, 8)).astype(np.float32))
        out = apply_tensor(ActivationKind.PHASE_SIN, PSI, t)
        assert out.dtype == np.float32
        npt.assert_allclose(out.norms(), t.norms(), rtol=1e-5)


class TestNames:
    def test_canonical_round_trip(self):
        for kind in ALL_KINDS:
            assert ActivationKind.from_name(kind.value) is kind
        assert AngleConvention.from_name("psi") is PSI
        assert AngleConvention.from_name("theta") is THETA

    def test_unknown_rejected(self):
        with pytest.raises(ValueError):
            ActivationKind.from_name("gelu")
        with pytest.raises(ValueError):
            AngleConvention.from_name("phi")

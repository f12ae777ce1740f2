import math

import gmpy2
import numpy as np
import pytest
from gmpy2 import mpfr

from expsum.hp import PrecisionContext
from expsum.kernels import KernelSpec, make_exponential, make_gaussian, localize
from expsum.soe import build_expansion
from expsum.vpexp import (
    VpExpansion,
    default_quad_tol,
    fourier_coeffs,
    transform_kernel,
    vp_eval,
    vp_weights,
)


def clenshaw_resummed(a, n, u):
    """Independent route: evaluate the resummed cosine series in its
    shifted-Chebyshev form by Clenshaw's recurrence."""
    pi = gmpy2.const_pi()
    atil = [a[0] / pi]
    for m in range(1, 2 * n):
        if m <= n:
            atil.append(2 * a[m] / pi)
        else:
            atil.append(mpfr(2 * (2 * n - m)) / (n * pi) * a[m])
    x = 2 * u - 1
    b1 = mpfr(0)
    b2 = mpfr(0)
    for m in range(len(atil) - 1, 0, -1):
        b1, b2 = atil[m] + 2 * x * b1 - b2, b1
    return atil[0] + x * b1 - b2


class TestTransform:
    def test_constant_kernel(self):
        one = KernelSpec("const", lambda x: mpfr(1))
        with PrecisionContext(128):
            K = transform_kernel(one, 1.0)
            for r in (0.0, 1.0, 3.0):
                assert float(K(mpfr(r))) == 1.0

    def test_exponential_becomes_half_angle_cosine(self):
        k = make_exponential(1.0)
        with PrecisionContext(128):
            K = transform_kernel(k, 1.0)
            for r in (0.3, 1.1, 2.5):
                expect = (1 + math.cos(r)) / 2
                assert float(K(mpfr(r))) == pytest.approx(expect, rel=1e-30)
            K2 = transform_kernel(k, 2.0)
            r = 1.3
            assert float(K2(mpfr(r))) == pytest.approx(((1 + math.cos(r)) / 2) ** 2, rel=1e-30)

    def test_endpoint_maps(self):
        k = make_gaussian(1.0)
        with PrecisionContext(128):
            K = transform_kernel(k, 5.0)
            assert float(K(mpfr(0))) == 1.0  # f(0+)
            assert float(K(mpfr(math.pi) - mpfr("1e-12"))) < 1e-200  # -> f(inf)


class TestFourierCoeffs:
    def test_constant(self):
        one = KernelSpec("const", lambda x: mpfr(1))
        with PrecisionContext(192):
            K = transform_kernel(one, 1.0)
            a = fourier_coeffs(K, 3, mpfr("1e-35"))
            assert float(abs(a[0] - gmpy2.const_pi())) < 1e-35
            assert all(float(abs(x)) < 1e-33 for x in a[1:])

    def test_pure_cosine(self):
        with PrecisionContext(192):
            K = lambda r: gmpy2.cos(r)
            a = fourier_coeffs(K, 3, mpfr("1e-35"))
            assert float(abs(a[1] - gmpy2.const_pi() / 2)) < 1e-35
            assert float(abs(a[0])) < 1e-33
            assert float(abs(a[2])) < 1e-33

    def test_finite_cosine_polynomial(self):
        with PrecisionContext(192):
            K = lambda r: (1 + gmpy2.cos(r)) / 2
            a = fourier_coeffs(K, 2, mpfr("1e-35"))
            pi = gmpy2.const_pi()
            assert float(abs(a[0] - pi / 2)) < 1e-34
            assert float(abs(a[1] - pi / 4)) < 1e-34
            assert float(abs(a[2])) < 1e-33
            assert float(abs(a[3])) < 1e-33


class TestVpWeights:
    @pytest.mark.parametrize("k_mode", [1, 2, 4])
    def test_exactness_on_single_exponentials(self, k_mode):
        # f(x) = exp(-k x / n_c) pulls back to a degree-k cosine
        # polynomial; resummation recovers the k-th unit weight for k <= n
        n = 4
        with PrecisionContext(192):
            ker = KernelSpec("exp-k", lambda x, km=k_mode: gmpy2.exp(-mpfr(km) * x))
            K = transform_kernel(ker, 1.0)
            a = fourier_coeffs(K, n, mpfr("1e-40"))
            w = vp_weights(a, n)
            for j, wj in enumerate(w):
                target = 1.0 if j == k_mode else 0.0
                assert float(abs(wj - target)) < 1e-36, (j, float(wj))

    def test_constant_kernel_weights(self):
        n = 3
        with PrecisionContext(192):
            one = KernelSpec("const", lambda x: mpfr(1))
            K = transform_kernel(one, 1.0)
            a = fourier_coeffs(K, n, mpfr("1e-40"))
            w = vp_weights(a, n)
            assert float(abs(w[0] - 1)) < 1e-36
            assert all(float(abs(x)) < 1e-34 for x in w[1:])

    def test_dual_representation_identity(self):
        # weight form and Clenshaw-evaluated Chebyshev form agree far
        # below the quadrature tolerance (they are algebraically equal)
        n = 10
        k = make_gaussian(1.0)
        with PrecisionContext(256):
            K = transform_kernel(k, 3.0)
            a = fourier_coeffs(K, n, mpfr("1e-45"))
            w = vp_weights(a, n)
            vp = VpExpansion(n, 3.0, w, a, 1e-45)
            for xv in (0.01, 0.5, 2.0, 10.0, 50.0):
                u = gmpy2.exp(-mpfr(xv) / 3)
                direct = vp_eval(vp, mpfr(xv))
                cheb = clenshaw_resummed(a, n, u)
                assert float(abs(direct - cheb)) < 1e-30


class TestConvergence:
    def test_gaussian_error_drops_geometrically(self):
        # fitted per-unit-n reduction ratio below 1/2
        k = make_gaussian(1.0)
        errs = []
        ns = [8, 12, 16]
        with PrecisionContext(192):
            for n in ns:
                vp = build_expansion(k, n, mpfr(n) / 4, default_quad_tol(1e-10, n))
                e = max(
                    abs(float(vp_eval(vp, mpfr(x)) - k.evaluate(mpfr(x))))
                    for x in (1e-4, 0.1, 0.7, 2.0, 9.0, 40.0)
                )
                errs.append(e)
        ratio = (errs[-1] / errs[0]) ** (1.0 / (ns[-1] - ns[0]))
        assert ratio < 0.5

    @pytest.mark.parametrize("power,eta", [(2, 1), (4, 3)])
    def test_spliced_kernel_algebraic_order(self, power, eta):
        # a taper with eta matched derivatives converges at O(n^-(eta+1));
        # the fitted slope lands within +-0.5 of that
        one = KernelSpec("const", lambda x: mpfr(1))
        k = localize(one, 2.0, 1.0, power=power)
        errs = []
        ns = [16, 32, 64]
        with PrecisionContext(192):
            for n in ns:
                vp = build_expansion(k, n, mpfr(12), default_quad_tol(1e-10, n))
                e = max(
                    abs(float(vp_eval(vp, mpfr(x)) - k.evaluate(mpfr(x))))
                    for x in np.linspace(0.05, 8.0, 41)
                )
                errs.append(e)
        slope = np.polyfit(np.log(ns), np.log(errs), 1)[0]
        assert -(eta + 1) - 0.5 <= slope <= -(eta + 1) + 0.5

    def test_max_exponent_formula(self):
        vp = VpExpansion(4, 2.0, [mpfr(0)] * 8, [mpfr(0)] * 8, 1e-10)
        assert float(vp.max_exponent) == pytest.approx(7 / 2.0)

import math

import gmpy2
import numpy as np
import pytest
from gmpy2 import mpfr

from expsum.errors import DomainViolation, EndpointSingularity
from expsum.hp import PrecisionContext
from expsum.kernels import (
    GeneralizedTaylor,
    KernelSpec,
    from_registry,
    localize,
    make_ewald_far,
    make_exponential,
    make_gaussian,
    make_helmholtz,
    make_matern,
    make_poly_exp,
    make_power,
    registry_names,
)


# --- independent oracles (series / closed forms), kept free of the
# --- package's own special-function routes


def erf_series(x, terms=200):
    """erf by its Maclaurin series (|x| modest)."""
    acc = 0.0
    term = x
    for k in range(terms):
        acc += term / (2 * k + 1)
        term *= -x * x / (k + 1)
        if abs(term) < 1e-20:
            break
    return 2 / math.sqrt(math.pi) * acc


def matern_half_integer(nu, x):
    """Closed forms for nu = 1/2, 3/2, 5/2."""
    if x == 0:
        return 1.0
    s = math.sqrt(2 * nu) * abs(x)
    if nu == 0.5:
        return math.exp(-s)
    if nu == 1.5:
        return (1 + s) * math.exp(-s)
    if nu == 2.5:
        return (1 + s + s * s / 3) * math.exp(-s)
    raise ValueError


def hankel1_0_series(z, terms=60):
    """H0^(1)(z) = J0(z) + i Y0(z) via ascending series (z not large)."""
    j0 = 0.0
    for k in range(terms):
        j0 += (-1) ** k * (z / 2) ** (2 * k) / math.factorial(k) ** 2
    euler = 0.57721566490153286060651209008240243
    y0 = (2 / math.pi) * (math.log(z / 2) + euler) * j0
    hsum = 0.0
    acc = 0.0
    for k in range(1, terms):
        hsum += 1.0 / k
        acc += (-1) ** (k + 1) * hsum * (z / 2) ** (2 * k) / math.factorial(k) ** 2
    y0 += (2 / math.pi) * acc
    return complex(j0, y0)


class TestGaussian:
    def test_limit_at_zero(self):
        k = make_gaussian(1.0)
        assert float(k.evaluate(0)) == 1.0

    def test_point_values(self):
        k = make_gaussian(1.0)
        assert float(k.evaluate(2.0)) == pytest.approx(math.exp(-1), rel=1e-15)
        assert float(k.evaluate(10.0)) == pytest.approx(math.exp(-25), rel=1e-14)

    def test_rejects_bad_delta(self):
        with pytest.raises(ValueError):
            make_gaussian(0.0)


class TestMatern:
    @pytest.mark.parametrize("nu", [0.5, 1.5, 2.5])
    def test_half_integer_closed_forms(self, nu):
        k = make_matern(nu)
        for x in (0.05, 0.3, 1.0, 2.7, 8.0):
            assert float(k.evaluate(x)) == pytest.approx(
                matern_half_integer(nu, x), rel=1e-13
            )

    @pytest.mark.parametrize("nu", [0.5, 1.0, 1.5, 3.7])
    def test_limit_one_at_zero(self, nu):
        k = make_matern(nu)
        assert float(k.evaluate(0)) == 1.0
        assert float(k.evaluate(1e-8)) == pytest.approx(1.0, abs=1e-6)


class TestPower:
    def test_point_values(self):
        k = make_power(0.5)
        assert float(k.evaluate(4.0)) == pytest.approx(0.5, rel=1e-15)
        k9 = make_power(0.9)
        assert float(k9.evaluate(1.0)) == pytest.approx(1.0, rel=1e-15)
        k1 = make_power(0.1)
        assert float(k1.evaluate(1e-6)) == pytest.approx(10 ** (0.9 * 6), rel=1e-12)

    def test_singularity_metadata(self):
        k = make_power(0.3)
        assert k.is_singular
        assert k.singular_exponent == pytest.approx(0.7)
        assert k.taylor is not None
        assert k.taylor.alpha == pytest.approx(0.7)
        assert k.taylor.order == 0

    def test_taylor_is_exact_for_power(self):
        k = make_power(0.5)
        with PrecisionContext(128):
            for tau in (1e-4, 0.01, 0.5):
                assert float(
                    abs(k.taylor.evaluate(tau) - k.evaluate(tau))
                ) == pytest.approx(0.0, abs=1e-30)


class TestEwald:
    def test_limit_at_zero(self):
        k = make_ewald_far(1.0)
        assert float(k.evaluate(0)) == pytest.approx(2 / math.sqrt(math.pi), rel=1e-14)
        assert float(k.evaluate(1e-10)) == pytest.approx(
            2 / math.sqrt(math.pi), rel=1e-12
        )

    def test_against_series_oracle(self):
        k = make_ewald_far(1.0)
        for x in (0.1, 0.5, 1.0, 2.0):
            assert float(k.evaluate(x)) == pytest.approx(
                erf_series(x) / x, rel=1e-12
            )

    def test_large_argument(self):
        k = make_ewald_far(2.0)
        assert float(k.evaluate(3.0)) == pytest.approx(1 / 3, rel=1e-14)


class TestHelmholtz:
    def test_3d_modulus(self):
        k = make_helmholtz(3, 50.0, 0.05)
        v = k.evaluate(1.0)
        assert abs(complex(v.real, v.imag)) == pytest.approx(
            1 / (4 * math.pi), rel=1e-13
        )

    def test_3d_low_frequency_matches_coulomb(self):
        k = make_helmholtz(3, 1e-9, 0.05)
        v = k.evaluate(2.0)
        assert float(v.real) == pytest.approx(1 / (8 * math.pi), rel=1e-8)

    def test_2d_against_series_oracle(self):
        k = make_helmholtz(2, 50.0, 0.05)
        v = k.evaluate(0.05)  # k*x = 2.5: ascending series is solid
        ref = 0.25j * hankel1_0_series(2.5)
        got = complex(float(v.real), float(v.imag))
        assert abs(got - ref) < 1e-12 * abs(ref)

    def test_domain_violation(self):
        k = make_helmholtz(3, 50.0, 0.05)
        with pytest.raises(DomainViolation):
            k.evaluate(0.01)


class TestLocalize:
    def test_unchanged_inside(self):
        base = make_power(0.5)
        k = localize(base, 5.0, 1.0)
        assert float(k.evaluate(3.0)) == pytest.approx(1 / math.sqrt(3), rel=1e-15)

    def test_continuity_at_cutoff(self):
        one = KernelSpec("const", lambda x: mpfr(1))
        k = localize(one, 5.0, 1.0)
        assert float(k.evaluate(5.0)) == 1.0
        assert float(k.evaluate(5.0 + 1e-12)) == pytest.approx(1.0, abs=1e-10)

    def test_taper_value(self):
        one = KernelSpec("const", lambda x: mpfr(1))
        k = localize(one, 5.0, 1.0)
        assert float(k.evaluate(6.0)) == pytest.approx(math.exp(-1), rel=1e-14)
        k4 = localize(one, 5.0, 1.0, power=4)
        assert float(k4.evaluate(6.5)) == pytest.approx(math.exp(-1.5**4), rel=1e-12)

    def test_metadata_preserved(self):
        k = localize(make_power(0.5), 5.0, 1.0)
        assert k.is_singular and k.taylor is not None
        assert k.localization == (5.0, 1.0)


class TestGeneralizedTaylor:
    def test_remainder_bounded_by_next_order(self):
        # synthetic kernel tau^(-1/2) + tau + 2 tau^2 truncated at M=1:
        # the remainder over tau^(M+1) stays bounded on a shrinking grid
        full = KernelSpec(
            "synthetic",
            lambda x: x ** mpfr("-0.5") + x + 2 * x * x,
            is_singular=True,
            singular_exponent=0.5,
            taylor=GeneralizedTaylor(1.0, 0.5, poly=(1.0,)),
        )
        with PrecisionContext(128):
            sup = 0.0
            for tau in np.logspace(-6, -1, 40):
                r = abs(float(full.evaluate(tau) - full.taylor.evaluate(tau)))
                sup = max(sup, r / tau ** (full.taylor.order + 1))
            assert sup == pytest.approx(2.0, rel=1e-8)

    def test_alpha_range_enforced(self):
        with pytest.raises(ValueError):
            GeneralizedTaylor(1.0, 1.2)


class TestRegistry:
    def test_known_names(self):
        assert set(registry_names()) >= {"exp", "gaussian", "matern", "power", "ewald", "helmholtz"}

    def test_parse_with_params(self):
        k = from_registry("gaussian:delta=2")
        assert float(k.evaluate(2.0)) == pytest.approx(math.exp(-0.5), rel=1e-14)
        k2 = from_registry("power:alpha=0.3")
        assert k2.singular_exponent == pytest.approx(0.7)
        k3 = from_registry("ewald:lambda=2")
        assert "lambda=2" in k3.label

    def test_unknown_name_raises(self):
        with pytest.raises(KeyError):
            from_registry("zeta")

    def test_unknown_param_raises(self):
        with pytest.raises(KeyError):
            from_registry("gaussian:width=1")


class TestOracleSweep:
    def test_all_builtin_kernels_match_high_precision_route(self):
        # every kernel evaluated at 53-bit context agrees with its own
        # 128-bit evaluation to near double precision on a log grid
        kernels = [
            make_exponential(1.0),
            make_gaussian(1.0),
            make_matern(1.5),
            make_power(0.5),
            make_ewald_far(2.0),
            make_poly_exp([0, 0, 0, 4, -1]),
        ]
        grid = np.logspace(-4, 1, 1000)
        for k in kernels:
            lo = []
            hi = []
            with gmpy2.context(precision=64):
                lo = [float(k.evaluate(float(x))) for x in grid]
            with PrecisionContext(128):
                hi = [float(k.evaluate(float(x))) for x in grid]
            scale = max(abs(v) for v in hi)
            worst = max(abs(a - b) for a, b in zip(lo, hi))
            assert worst <= 1e-14 * scale, k.label


class TestSingularGuard:
    def test_transform_requires_shift(self):
        from expsum.vpexp import transform_kernel

        with pytest.raises(EndpointSingularity):
            transform_kernel(make_power(0.5), 1.0)

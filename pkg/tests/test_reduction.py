import gmpy2
import numpy as np
import pytest
from gmpy2 import mpfr

from expsum.errors import TailTooFat
from expsum.hp import PrecisionContext
from expsum.kernels import make_exponential, make_gaussian
from expsum.reduction import balanced_truncate, transfer_gap
from expsum.soe import build_expansion, vpmr_build_full
from expsum.vpexp import VpExpansion, default_quad_tol


def one_pole_expansion(n=8, pole=1):
    w = [mpfr(0)] * (2 * n)
    w[pole] = mpfr(1)
    return VpExpansion(n, 1.0, w, [mpfr(0)] * (2 * n), 1e-30, label="unit")


class TestOnePole:
    def test_single_hankel_value_and_exact_terms(self):
        ctx = PrecisionContext(128)
        soe = balanced_truncate(one_pole_expansion(), 1e-10, ctx)
        assert soe.P == 2
        assert soe.hankel_spectrum[0] == pytest.approx(0.5, rel=1e-20)
        m, s = soe.terms[1]
        assert complex(m) == pytest.approx(1.0 + 0j, abs=1e-25)
        assert complex(s) == pytest.approx(1.0 + 0j, abs=1e-25)
        assert complex(soe.terms[0][0]) == pytest.approx(0, abs=1e-25)

    def test_gap_tiny(self):
        ctx = PrecisionContext(128)
        vp = one_pole_expansion()
        soe = balanced_truncate(vp, 1e-10, ctx)
        assert transfer_gap(vp, soe) < 1e-30


class TestNoReduction:
    def test_huge_eps_keeps_nothing_but_constant(self):
        vp = one_pole_expansion()
        soe = balanced_truncate(vp, 1e6, PrecisionContext(128))
        assert soe.P == 1

    def test_gap_zero_when_full_order_kept(self):
        # keep every state: the two pole sums agree to rounding
        ctx = PrecisionContext(192)
        k = make_exponential(1.0)
        with ctx:
            vp = build_expansion(k, 4, mpfr(1), default_quad_tol(1e-20, 4))
        soe = balanced_truncate(vp, 1e-38, ctx)
        assert transfer_gap(vp, soe) < 1e-25

    def test_exact_rank_one_meets_any_eps(self):
        # the single nonzero weight carries the whole transfer function,
        # so the revealed rank-1 model certifies arbitrarily small eps
        soe = balanced_truncate(one_pole_expansion(), 1e-60, PrecisionContext(128))
        assert soe.P == 2

    def test_precision_loss_below_noise_floor(self):
        from expsum.errors import PrecisionLoss

        k = make_gaussian(1.0)
        with PrecisionContext(96):
            vp = build_expansion(k, 12, mpfr(3), default_quad_tol(1e-8, 12))
        with pytest.raises(PrecisionLoss):
            balanced_truncate(vp, 1e-28, PrecisionContext(96))


class TestGaussianBuild:
    @pytest.fixture(scope="class")
    def build(self):
        k = make_gaussian(1.0)
        return vpmr_build_full(k, 16, 4.0, 1e-6, PrecisionContext(192), domain=(0, 100))

    def test_stability(self, build):
        _, soe = build
        assert min(complex(s).real for _, s in soe.terms[1:]) >= 0

    def test_tail_below_eps(self, build):
        _, soe = build
        assert soe.hankel_tail <= 1e-6

    def test_hankel_sandwich(self, build):
        vp, soe = build
        gap = transfer_gap(vp, soe)
        sig = soe.hankel_spectrum
        R = soe.P - 1
        assert gap <= soe.hankel_tail
        assert gap >= sig[R] * 0.5  # sampled sup can sit slightly под the true sup

    def test_monotone_spectrum(self, build):
        _, soe = build
        sig = soe.hankel_spectrum
        assert all(sig[i] >= sig[i + 1] for i in range(len(sig) - 1))

    def test_realness_after_rounding(self, build):
        _, soe = build
        for x in (0.1, 1.0, 7.0, 40.0):
            v = soe.eval_f64(x)
            assert abs(v.imag) <= 1e-12 * max(abs(v.real), 1e-300)

    def test_conjugate_pairing(self, build):
        _, soe = build
        terms = [(complex(m), complex(s)) for m, s in soe.terms[1:]]
        unmatched = [t for t in terms if abs(t[1].imag) > 1e-18]
        while unmatched:
            m, s = unmatched.pop()
            mate = min(
                range(len(unmatched)),
                key=lambda i: abs(unmatched[i][1] - s.conjugate()),
            )
            m2, s2 = unmatched.pop(mate)
            assert s2 == pytest.approx(s.conjugate(), rel=1e-12)
            assert m2 == pytest.approx(m.conjugate(), rel=1e-12)

    def test_max_exponent_within_cap_regime(self, build):
        _, soe = build
        cap = 31 / 4.0
        assert soe.max_exponent <= 1.5 * cap
        assert soe.max_exponent >= cap / 4

    def test_end_to_end_error_budget(self, build):
        # reduced-vs-kernel error stays within expansion error plus tail
        from expsum.soe import max_error
        from expsum.vpexp import vp_eval

        vp, soe = build
        k = make_gaussian(1.0)
        pts = np.logspace(-4, 2, 60)
        with PrecisionContext(192):
            vp_err = max(
                abs(float(vp_eval(vp, mpfr(float(x))) - k.evaluate(mpfr(float(x)))))
                for x in pts
            )
        soe_err = max_error(soe, k, 1e-4, 100, 4000, seed=2)
        assert soe_err <= vp_err + soe.hankel_tail + 1e-12

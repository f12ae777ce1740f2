import math

import numpy as np
import pytest

from expsum.errors import ParseError, SchemaMismatch
from expsum.hp import PrecisionContext
from expsum.kernels import make_exponential, make_gaussian
from expsum.reduction import SoeApproximation
from expsum.soe import (
    max_error,
    monitoring_points,
    read_soe,
    soe_document,
    soe_eval,
    vpmr_build,
    write_soe,
)


@pytest.fixture(scope="module")
def exp_soe():
    return vpmr_build(
        make_exponential(1.0), 8, 1.0, 1e-10, PrecisionContext(128), domain=(0, 100)
    )


class TestBuildFacade:
    def test_one_pole_collapse(self, exp_soe):
        assert exp_soe.P == 2
        e = max_error(exp_soe, make_exponential(1.0), 1e-5, 100, 20000, seed=3)
        assert e < 1e-10

    def test_determinism(self):
        k = make_exponential(1.0)
        a = vpmr_build(k, 6, 1.0, 1e-8, PrecisionContext(128), domain=(0, 50))
        b = vpmr_build(k, 6, 1.0, 1e-8, PrecisionContext(128), domain=(0, 50))
        assert soe_document(a) == soe_document(b)


class TestEval:
    def test_constant_term(self):
        soe = SoeApproximation([(1.0, 0.0)], 1e-10, 0.0, [1.0])
        for x in (0.0, 1.0, 55.0):
            assert soe_eval(soe, x) == pytest.approx(1.0)

    def test_sum_of_weights_at_zero(self):
        soe = SoeApproximation([(2.0, 1.0), (-1.0, 2.0)], 1e-10, 0.0, [1.0])
        assert soe_eval(soe, 0.0) == pytest.approx(1.0)

    def test_vectorized_matches_scalar(self, exp_soe):
        xs = np.array([0.1, 1.0, 3.0])
        vec = soe_eval(exp_soe, xs)
        for x, v in zip(xs, vec):
            assert v == pytest.approx(soe_eval(exp_soe, float(x)), rel=1e-14)

    def test_double_eval_matches_extended(self, exp_soe):
        for x in (0.01, 0.5, 2.0, 20.0):
            hp_val = complex(exp_soe.eval_hp(x))
            assert soe_eval(exp_soe, x).real == pytest.approx(
                hp_val.real, rel=1e-13, abs=1e-300
            )


class TestMaxError:
    def test_zero_for_exact_representation(self, exp_soe):
        assert max_error(exp_soe, make_exponential(1.0), 0.1, 10, 2000, seed=1) < 1e-13

    def test_deterministic_seeding(self):
        a = monitoring_points(1e-5, 100, 1000, seed=42)
        b = monitoring_points(1e-5, 100, 1000, seed=42)
        assert np.array_equal(a, b)
        c = monitoring_points(1e-5, 100, 1000, seed=43)
        assert not np.array_equal(a, c)

    def test_invariant_under_term_reordering(self, exp_soe):
        shuffled = SoeApproximation(
            list(reversed(exp_soe.terms)),
            exp_soe.eps,
            exp_soe.hankel_tail,
            exp_soe.hankel_spectrum,
            exp_soe.meta,
        )
        k = make_exponential(1.0)
        assert max_error(exp_soe, k, 1e-3, 50, 5000, seed=9) == pytest.approx(
            max_error(shuffled, k, 1e-3, 50, 5000, seed=9), rel=1e-9, abs=1e-16
        )

    def test_sampling_stability(self, exp_soe):
        # doubling the monitoring count moves the estimate by < 10x
        k = make_exponential(2.0)  # wrong kernel: nonzero error field
        e1 = max_error(exp_soe, k, 1e-3, 10, 5000, seed=5)
        e2 = max_error(exp_soe, k, 1e-3, 10, 10000, seed=5)
        assert e1 / 10 < e2 < e1 * 10


class TestSoeFile:
    def test_round_trip_bytes_identical(self, exp_soe, tmp_path):
        p1 = tmp_path / "a.soe"
        p2 = tmp_path / "b.soe"
        write_soe(exp_soe, p1)
        again = read_soe(p1, PrecisionContext(128))
        write_soe(again, p2)
        assert p1.read_bytes() == p2.read_bytes()

    def test_round_trip_double_exact(self, exp_soe, tmp_path):
        p = tmp_path / "a.soe"
        write_soe(exp_soe, p)
        again = read_soe(p, PrecisionContext(128))
        w1, s1 = exp_soe.arrays()
        w2, s2 = again.arrays()
        assert np.array_equal(w1, w2)
        assert np.array_equal(s1, s2)

    def test_error_preserved_through_roundtrip(self, tmp_path):
        k = make_gaussian(1.0)
        soe = vpmr_build(k, 12, 3.0, 1e-5, PrecisionContext(160), domain=(0, 100))
        e_before = max_error(soe, k, 1e-4, 100, 20000, seed=7)
        p = tmp_path / "g.soe"
        write_soe(soe, p)
        again = read_soe(p, PrecisionContext(160))
        e_after = max_error(again, k, 1e-4, 100, 20000, seed=7)
        assert abs(e_after - e_before) < 1e-14

    def test_unstable_exponent_rejected(self, exp_soe, tmp_path):
        import json

        p = tmp_path / "bad.soe"
        payload = json.loads(soe_document(exp_soe))
        payload["terms"][1]["s"][0] = "-" + payload["terms"][1]["s"][0]
        p.write_text(json.dumps(payload))
        with pytest.raises(ParseError):
            read_soe(p, PrecisionContext(128))

    def test_schema_mismatch(self, tmp_path):
        p = tmp_path / "x.soe"
        p.write_text('{"schema": "other/9", "terms": []}')
        with pytest.raises(SchemaMismatch):
            read_soe(p)

    def test_parse_error_on_garbage(self, tmp_path):
        p = tmp_path / "x.soe"
        p.write_text("not json at all")
        with pytest.raises(ParseError):
            read_soe(p)

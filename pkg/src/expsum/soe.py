"""End-to-end builds, double-precision evaluation, error measurement,
and the .soe file round trip."""

import json

import gmpy2
import numpy as np
from gmpy2 import mpc, mpfr

from .errors import ParseError, SchemaMismatch
from .hp import PrecisionContext, decimal_str
from .reduction import SoeApproximation, balanced_truncate
from .vpexp import VpExpansion, default_quad_tol, fourier_coeffs, transform_kernel, vp_weights

SCHEMA = "expsum-soe/1"

DEFAULT_DOMAIN_SMOOTH = (0.0, 100.0)
DEFAULT_DOMAIN_SINGULAR = (0.05, 10.0)


def build_expansion(kernel, n, n_c, quad_tol, shift=0.0):
    """Fourier stage only: transformed kernel -> cosine moments -> weights."""
    K = transform_kernel(kernel, n_c, shift=shift)
    feature = None
    if shift > 0:
        # the shifted kernel's variation near x=shift compresses into a
        # boundary layer of this tau-width under the pullback
        feature = 2.0 * float(gmpy2.sqrt(mpfr(shift) / mpfr(n_c)))
    a = fourier_coeffs(K, n, quad_tol, feature_scale=feature)
    w = vp_weights(a, n)
    return VpExpansion(n, n_c, w, a, quad_tol, label=kernel.label)


def vpmr_build(kernel, n, n_c, eps, ctx=None, domain=None, quad_tol=None):
    """Full pipeline: expansion, then balanced truncation, on `domain`."""
    return vpmr_build_full(kernel, n, n_c, eps, ctx, domain, quad_tol)[1]


def vpmr_build_full(kernel, n, n_c, eps, ctx=None, domain=None, quad_tol=None):
    """Like vpmr_build but also returns the intermediate expansion.

    For a domain starting at lo > 0 the expansion is built for the
    shifted kernel f(lo + u) and the reduced weights are mapped back by
    exp(s_l * lo), so the result approximates f itself on [lo, hi].
    """
    ctx = ctx or PrecisionContext()
    if domain is None:
        domain = (
            DEFAULT_DOMAIN_SINGULAR
            if kernel.is_singular or kernel.domain
            else DEFAULT_DOMAIN_SMOOTH
        )
    lo, hi = float(domain[0]), float(domain[1])
    if lo < 0 or hi <= lo:
        raise ValueError("need 0 <= lo < hi")
    with ctx:
        if quad_tol is None:
            quad_tol = default_quad_tol(eps, n)
        vp = build_expansion(kernel, n, n_c, quad_tol, shift=lo)
        soe = balanced_truncate(vp, eps, ctx)
        if lo > 0:
            shift = mpfr(lo)
            terms = [(m * gmpy2.exp(s * shift), s) for m, s in soe.terms]
            soe = SoeApproximation(
                terms, soe.eps, soe.hankel_tail, soe.hankel_spectrum, soe.meta
            )
        soe.meta["domain"] = (lo, hi)
        soe.meta["kernel"] = kernel.label
    return vp, soe


def soe_eval(soe, x):
    """Double-precision value sum m_l exp(-s_l x) (complex)."""
    w, s = soe.arrays()
    x = np.asarray(x, dtype=float)
    if x.ndim == 0:
        return complex(np.sum(w * np.exp(-s * float(x))))
    return np.exp(-np.outer(x, s)) @ w


def monitoring_points(lo, hi, count, seed):
    """Log-uniform sample of [lo, hi]; deterministic for a fixed seed."""
    rng = np.random.default_rng(seed)
    return np.exp(rng.uniform(np.log(lo), np.log(hi), size=count))


def max_error(soe, kernel, lo, hi, count=100000, seed=0):
    """Max |soe - kernel| over seeded log-uniform monitoring points."""
    pts = monitoring_points(lo, hi, count, seed)
    vals = soe_eval(soe, pts)
    with gmpy2.context(precision=64):
        if kernel.is_complex:
            ref = np.array([complex(kernel.evaluate(x)) for x in pts])
        else:
            ref = np.array([float(kernel.evaluate(x)) for x in pts])
    return float(np.max(np.abs(vals - ref)))


def write_soe(soe, path):
    """Serialize to the UTF-8 .soe document (decimal strings throughout)."""
    doc = soe_document(soe)
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(doc)
    return path


def soe_document(soe):
    meta = soe.meta
    domain = meta.get("domain", (0.0, 0.0))
    payload = {
        "schema": SCHEMA,
        "kernel": meta.get("kernel", ""),
        "n": meta.get("n", 0),
        "n_c": meta.get("n_c", ""),
        "eps": "%.17e" % soe.eps,
        "precision_bits": meta.get("precision_bits", 0),
        "domain": ["%.17e" % domain[0], "%.17e" % domain[1]],
        "hankel_tail": "%.17e" % soe.hankel_tail,
        "terms": [
            {
                "m": [decimal_str(m.real), decimal_str(m.imag)],
                "s": [decimal_str(s.real), decimal_str(s.imag)],
            }
            for m, s in soe.terms
        ],
    }
    return json.dumps(payload, indent=1) + "\n"


def read_soe(path, ctx=None):
    """Parse a .soe document back into an SoeApproximation.

    Terms are re-read at build precision; files with any Re(s) < 0 are
    rejected.
    """
    ctx = ctx or PrecisionContext()
    try:
        with open(path, "r", encoding="utf-8") as fh:
            payload = json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        raise ParseError(str(exc)) from exc
    if not isinstance(payload, dict) or payload.get("schema") != SCHEMA:
        raise SchemaMismatch(
            "expected %r, found %r" % (SCHEMA, payload.get("schema"))
        )
    try:
        with ctx:
            terms = []
            for entry in payload["terms"]:
                m = mpc(mpfr(entry["m"][0]), mpfr(entry["m"][1]))
                s = mpc(mpfr(entry["s"][0]), mpfr(entry["s"][1]))
                terms.append((m, s))
            eps = float(payload["eps"])
            tail = float(payload["hankel_tail"])
            meta = {
                "kernel": payload["kernel"],
                "n": payload["n"],
                "n_c": payload["n_c"],
                "precision_bits": payload["precision_bits"],
                "domain": (float(payload["domain"][0]), float(payload["domain"][1])),
            }
    except (KeyError, IndexError, ValueError, TypeError) as exc:
        raise ParseError("malformed .soe payload: %s" % exc) from exc
    for _, s in terms[1:]:
        if s.real < 0:
            raise ParseError("unstable exponent %s in file" % s)
    return SoeApproximation(terms, eps, tail, [], meta=meta)

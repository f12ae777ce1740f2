"""Semi-analytic exponential expansion of a kernel.

The kernel is pulled back through x = -n_c log((1+cos r)/2), expanded in
cosine modes on [0, pi], and resummed with tent-weighted partial sums
(mean of the upper half of the partial Fourier sums). Rewriting the
shifted-Chebyshev form in powers of u = exp(-x/n_c) yields weights w_j
of exponentials exp(-j x / n_c), j = 0 .. 2n-1.
"""

import math

import gmpy2
from gmpy2 import mpc, mpfr

from .errors import EndpointSingularity
from .quadrature import composite_gauss

# headroom (bits per expansion mode) for the alternating combinatorial
# sums: the mode-to-weight map amplifies absolute errors by up to
# (3 + 2*sqrt(2))^m = 2^(2.543 m), so both the cosine moments and the
# weight arithmetic carry proportional extra mantissa bits
_CANCEL_BITS_PER_ORDER = 2.6


class VpExpansion:
    """Expansion f(x) ~ sum_j w_j exp(-j x / n_c), j = 0 .. 2n-1."""

    def __init__(self, n, n_c, w, fourier_a, quad_tol, label=""):
        self.n = int(n)
        self.n_c = mpfr(n_c)
        self.w = list(w)
        self.fourier_a = list(fourier_a)
        self.quad_tol = quad_tol
        self.label = label
        if len(self.w) != 2 * self.n:
            raise ValueError("expected 2n weights")

    @property
    def max_exponent(self):
        return (2 * self.n - 1) / self.n_c

    @property
    def is_real(self):
        return not any(isinstance(x, mpc) for x in self.w)

    def __repr__(self):
        return "VpExpansion(n=%d, n_c=%s)" % (self.n, float(self.n_c))


def transform_kernel(kernel, n_c, shift=0.0):
    """Transformed kernel K(r) = f(shift + x(r)) on [0, pi].

    `shift` > 0 moves the build window right so kernels singular at the
    origin stay finite; the resulting weights are mapped back by the
    build facade. Raises EndpointSingularity for a singular kernel with
    no shift.
    """
    if getattr(kernel, "is_singular", False) and shift <= 0:
        raise EndpointSingularity(
            "%s is singular at 0; build on a shifted domain" % kernel.label
        )
    n_c = mpfr(n_c)
    if n_c <= 0:
        raise ValueError("n_c must be positive")
    shift = mpfr(shift)
    evaluate = kernel.evaluate if hasattr(kernel, "evaluate") else kernel

    def K(r):
        r = mpfr(r)
        # (1 + cos r)/2 = cos^2(r/2): half-angle form avoids cancellation
        # as r approaches pi
        ch = gmpy2.cos(r / 2)
        if ch <= 0:
            raise ValueError("transform evaluated at r=pi")
        x = -2 * n_c * gmpy2.log(ch)
        return evaluate(shift + x)

    return K


def fourier_coeffs(K, n, tol, feature_scale=None):
    """Cosine moments a_j = int_0^pi K(tau) cos(j tau) dtau, j = 0..2n-1.

    The requested tolerance applies to the resulting weights, so moment
    j is integrated to tol / 2^(2.543 j) at correspondingly elevated
    precision: composite Gauss-Legendre with panels capped at one
    oscillation period, graded toward 0 when the kernel has a boundary
    layer of width `feature_scale` there. Returned moments keep their
    elevated precision; round-off happens once, after the weights.
    """
    base_bits = gmpy2.get_context().precision
    base_digits = max(8, int(-gmpy2.log10(abs(mpfr(tol)))) + 2)
    out = []
    for j in range(2 * n):
        bits_j = base_bits + int(_CANCEL_BITS_PER_ORDER * j) + 48
        digits_j = base_digits + int(0.766 * j) + 4
        degree = digits_j // 2 + 24
        with gmpy2.context(precision=bits_j):
            pi = gmpy2.const_pi()
            breaks = {mpfr(0), pi}
            # uniform base grid resolves the kernel's own transition
            # region even for low-oscillation modes
            for k in range(1, 16):
                breaks.add(pi * k / 16)
            for k in range(1, j):
                breaks.add(pi * k / j)
            if feature_scale:
                depth = max(3, int(math.log2(16 * math.pi / max(feature_scale, 1e-12))) + 1)
                for i in range(1, depth):
                    breaks.add(pi * mpfr(2) ** (-i))
            breaks = sorted(breaks)
            if j == 0:
                fn = K
            else:
                jm = mpfr(j)

                def fn(t, _j=jm):
                    return K(t) * gmpy2.cos(_j * t)

            out.append(composite_gauss(fn, breaks, degree))
    return out


def vp_weights(a, n):
    """Exponential weights w_0..w_{2n-1} from the cosine moments.

    The tent-weighted resummation keeps mode j with factor 1 for j <= n
    and (2n-j)/n beyond; expanding cos(j r) = T_j(2u - 1) in powers of u
    gives the alternating combinatorial sums evaluated here. Intermediate
    terms reach ~(3+2*sqrt(2))^(2n), so the arithmetic runs with
    proportional extra mantissa bits and rounds once at the end.
    """
    if len(a) < 2 * n:
        raise ValueError("need 2n cosine moments")
    base_bits = gmpy2.get_context().precision
    boost = base_bits + int(_CANCEL_BITS_PER_ORDER * (2 * n - 1)) + 64
    with gmpy2.context(precision=boost):
        pi = gmpy2.const_pi()
        N = 2 * n
        complex_input = any(isinstance(x, mpc) for x in a)
        # mode coefficients of the resummed cosine series
        atil = [a[0] / pi]
        for m in range(1, N):
            if m <= n:
                atil.append(2 * a[m] / pi)
            else:
                atil.append(mpfr(2 * (2 * n - m)) / (n * pi) * a[m])
        zero = mpc(0) if complex_input else mpfr(0)
        w = [zero] * N
        s = atil[0]
        for m in range(1, N):
            s = s + atil[m] if m % 2 == 0 else s - atil[m]
        w[0] = s
        for k in range(1, N):
            s = zero
            # binomial recursion in m: C(m+1+k, m+1-k) = C(m+k, m-k)*(m+1+k)/(m+1-k)
            binom = gmpy2.mpz(1)
            for m in range(k, N):
                if m > k:
                    binom = binom * (m + k) // (m - k)
                term = atil[m] * mpfr(binom) * mpfr(m) / (m + k)
                s = s - term if (m - k) % 2 else s + term
            w[k] = s * mpfr(4) ** k
    # the weights keep their elevated precision: they cancel against each
    # other at evaluation, so rounding them independently here would put
    # uncorrelated noise of size max|w| * 2^-bits into the represented
    # function
    return w


def vp_eval(expansion, x):
    """Evaluate sum_j w_j exp(-j x / n_c) exactly-in-effect.

    The raw weights alternate and grow combinatorially, cancelling down
    to kernel scale at evaluation; the Horner loop therefore runs with
    log2(max|w|) extra mantissa bits and rounds once at the end.
    """
    x = mpfr(x)
    if x < 0:
        raise ValueError("x must be nonnegative")
    wmax = max(abs(mpfr(w) if not isinstance(w, mpc) else abs(w)) for w in expansion.w)
    boost = gmpy2.get_context().precision + 32
    if wmax > 1:
        boost += int(gmpy2.log2(wmax)) + 1
    with gmpy2.context(precision=boost):
        u = gmpy2.exp(-x / expansion.n_c)
        acc = expansion.w[-1]
        for w in reversed(expansion.w[:-1]):
            acc = acc * u + w
    if isinstance(acc, mpc):
        return mpc(acc)
    return mpfr(acc)


def default_quad_tol(eps, n):
    """Coefficient-integral tolerance: 2n integrals contribute additively."""
    return mpfr(eps) / (100 * n)

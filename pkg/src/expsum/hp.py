"""Configurable-precision scalar arithmetic on top of gmpy2.

All construction-time math (expansion coefficients, Gramians,
factorizations) runs on gmpy2 mpfr/mpc scalars under an explicit
precision context; runtime evaluation converts once to doubles.
mpmath is bridged in only for special functions MPFR lacks.
"""

import math

import gmpy2
import mpmath
from gmpy2 import mpc, mpfr

DEFAULT_BITS = 256
MIN_BITS = 64


class PrecisionContext:
    """Working precision for hp operations, in mantissa bits.

    Use as a context manager; operations inherit the precision from the
    ambient gmpy2 context, which this manager swaps in thread-locally.

    >>> with PrecisionContext(128):
    ...     y = gmpy2.sqrt(mpfr(2))
    """

    def __init__(self, mantissa_bits=DEFAULT_BITS):
        if mantissa_bits < MIN_BITS:
            raise ValueError("mantissa_bits must be >= %d" % MIN_BITS)
        self.mantissa_bits = int(mantissa_bits)
        self._stack = []

    def __enter__(self):
        mgr = gmpy2.context(precision=self.mantissa_bits)
        mgr.__enter__()
        self._stack.append(mgr)
        return self

    def __exit__(self, *exc):
        return self._stack.pop().__exit__(*exc)

    def eps(self):
        """Unit roundoff 2^(1-mantissa_bits)."""
        return mpfr(2) ** (1 - self.mantissa_bits)

    def __repr__(self):
        return "PrecisionContext(mantissa_bits=%d)" % self.mantissa_bits

    def __eq__(self, other):
        return (
            isinstance(other, PrecisionContext)
            and other.mantissa_bits == self.mantissa_bits
        )


def working_bits():
    """Mantissa bits of the ambient gmpy2 context."""
    return gmpy2.get_context().precision


def hp_pi():
    return gmpy2.const_pi()


def to_mpfr(x):
    """Coerce float/int/str/mpfr to mpfr at ambient precision."""
    return mpfr(x)


def to_mpc(x):
    if isinstance(x, complex):
        return mpc(x.real, x.imag)
    return mpc(x)


def mpmath_to_gmpy(x):
    """Exact transfer of an mpmath mpf/mpc into gmpy2 at ambient precision."""
    if isinstance(x, mpmath.mpc):
        return mpc(mpmath_to_gmpy(x.real), mpmath_to_gmpy(x.imag))
    sign, man, exp, _ = x._mpf_ if isinstance(x, mpmath.mpf) else mpmath.mpf(x)._mpf_
    if man == 0:
        # covers zero and the special values, which we do not expect here
        return mpfr(float(x))
    m = mpfr(int(man) if not sign else -int(man))
    return gmpy2.mul_2exp(m, exp) if exp >= 0 else gmpy2.div_2exp(m, -exp)


def gmpy_to_mpmath(x):
    """Transfer a gmpy2 mpfr/mpc into mpmath without precision loss."""
    if isinstance(x, mpc):
        return mpmath.mpc(gmpy_to_mpmath(x.real), gmpy_to_mpmath(x.imag))
    x = mpfr(x)
    if not gmpy2.is_finite(x):
        return mpmath.mpf(float(x))
    man, exp = x.as_mantissa_exp()
    prec = max(mpmath.mp.prec, x.precision)
    return mpmath.make_mpf(mpmath.libmp.from_man_exp(int(man), int(exp), prec, "n"))


def as_complex(x):
    """Round an mpfr/mpc down to a Python complex."""
    if isinstance(x, mpc):
        return complex(float(x.real), float(x.imag))
    return complex(float(x), 0.0)


def as_float(x):
    return float(x)


def decimal_str(x, digits=45):
    """Fixed-count significant-digit decimal string (round-trip safe ≥ 40)."""
    if isinstance(x, mpc):
        raise TypeError("decimal_str takes a real scalar")
    m = gmpy_to_mpmath(mpfr(x))
    return mpmath.nstr(
        m, digits, strip_zeros=False, min_fixed=1, max_fixed=0, show_zero_exponent=True
    )


def hp_binomial(n, k):
    """Exact binomial as mpfr (arbitrary-size integer path, no factorials)."""
    return mpfr(math.comb(n, k))

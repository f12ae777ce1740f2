"""Radial kernel definitions: evaluation, singularity metadata, localization.

Kernels evaluate on gmpy2 scalars at the ambient precision so the same
object serves both the extended-precision build stage and (under a
53-bit context) double-precision error measurement. Special functions
MPFR lacks are bridged through mpmath at matching precision.
"""

import math

import gmpy2
import mpmath
from gmpy2 import mpc, mpfr

from .errors import BesselOverflow, DomainViolation, MissingTaylor
from .hp import gmpy_to_mpmath, mpmath_to_gmpy


class GeneralizedTaylor:
    """Local expansion a0*tau^(-alpha) + a1*tau + a2*tau^2 + ... near 0.

    The leading term captures a weak algebraic singularity (alpha in
    [0,1)); `envelope` bounds the tau-range on which the truncation is
    trusted. For pure power kernels the expansion is exact everywhere.
    """

    def __init__(self, a0, alpha, poly=(), envelope=0.1):
        if not 0 <= alpha < 1:
            raise ValueError("alpha must lie in [0, 1)")
        self.a0 = a0
        self.alpha = alpha
        self.poly = tuple(poly)
        self.order = len(self.poly)
        self.envelope = envelope

    def evaluate(self, tau):
        tau = mpfr(tau)
        if self.alpha == 0:
            lead = mpfr(self.a0)
        else:
            lead = mpfr(self.a0) * tau ** mpfr(-self.alpha)
        acc = lead
        p = mpfr(1)
        for c in self.poly:
            p *= tau
            acc += mpfr(c) * p
        return acc

    def __repr__(self):
        return "GeneralizedTaylor(a0=%s, alpha=%s, order=%d)" % (
            self.a0,
            self.alpha,
            self.order,
        )


class KernelSpec:
    """Evaluable kernel with singularity and localization metadata."""

    def __init__(
        self,
        label,
        evaluate,
        is_singular=False,
        singular_exponent=0.0,
        taylor=None,
        localization=None,
        domain=None,
        is_complex=False,
    ):
        if is_singular:
            if taylor is None:
                raise MissingTaylor(label)
            if abs(taylor.alpha - singular_exponent) > 1e-15:
                raise ValueError("taylor leading exponent must equal -singular_exponent")
        self.label = label
        self._evaluate = evaluate
        self.is_singular = is_singular
        self.singular_exponent = singular_exponent
        self.taylor = taylor
        self.localization = localization
        self.domain = domain
        self.is_complex = is_complex

    def evaluate(self, x):
        if self.domain is not None and float(x) < self.domain[0]:
            raise DomainViolation(
                "%s defined on [%g, %g], got x=%g"
                % (self.label, self.domain[0], self.domain[1], float(x))
            )
        return self._evaluate(mpfr(x))

    __call__ = evaluate

    def limit_at_zero(self):
        """f(0+) where finite; singular kernels have none."""
        if self.is_singular:
            return None
        return self._evaluate(mpfr(0))

    def __repr__(self):
        return "KernelSpec(%r)" % self.label


def make_exponential(rate=1.0):
    rate = float(rate)
    if rate <= 0:
        raise ValueError("rate must be positive")

    def ev(x):
        return gmpy2.exp(-mpfr(rate) * x)

    return KernelSpec("exp:rate=%g" % rate, ev)


def make_gaussian(delta=1.0):
    delta = float(delta)
    if delta <= 0:
        raise ValueError("delta must be positive")

    def ev(x):
        return gmpy2.exp(-x * x / (4 * mpfr(delta)))

    return KernelSpec("gaussian:delta=%g" % delta, ev)


def make_matern(nu=1.5):
    """Matern covariance kernel, normalized so the x->0 limit is 1."""
    nu = float(nu)
    if nu <= 0:
        raise ValueError("nu must be positive")

    def ev(x):
        x = mpfr(x)
        if x == 0:
            return mpfr(1)
        prec = gmpy2.get_context().precision
        with mpmath.workprec(prec + 16):
            z = mpmath.sqrt(2 * mpmath.mpf(nu)) * gmpy_to_mpmath(abs(x))
            kv = mpmath.besselk(nu, z)
            val = (
                z ** mpmath.mpf(nu)
                * kv
                / (mpmath.mpf(2) ** (nu - 1) * mpmath.gamma(nu))
            )
            if not mpmath.isfinite(val):
                raise BesselOverflow("matern at x=%g, nu=%g" % (float(x), nu))
            return mpmath_to_gmpy(val)

    return KernelSpec("matern:nu=%g" % nu, ev)


def make_power(alpha=0.5, scale=1.0):
    """Weakly singular power kernel scale * x^(alpha-1), 0 < alpha < 1."""
    alpha = float(alpha)
    if not 0 < alpha < 1:
        raise ValueError("alpha must lie in (0, 1)")
    scale = float(scale)

    def ev(x):
        x = mpfr(x)
        return mpfr(scale) * x ** (mpfr(alpha) - 1)

    taylor = GeneralizedTaylor(scale, 1 - alpha, poly=(), envelope=math.inf)
    label = "power:alpha=%g" % alpha if scale == 1.0 else "power:alpha=%g,scale=%.17g" % (alpha, scale)
    return KernelSpec(
        label,
        ev,
        is_singular=True,
        singular_exponent=1 - alpha,
        taylor=taylor,
    )


def make_ewald_far(lam=1.0):
    """Far-field Ewald kernel erf(lam*x)/x; removable singularity at 0."""
    lam = float(lam)
    if lam <= 0:
        raise ValueError("lambda must be positive")

    def ev(x):
        x = mpfr(x)
        L = mpfr(lam)
        z = L * x
        if abs(z) < mpfr("1e-8"):
            # erf(z)/x = (2L/sqrt(pi)) (1 - z^2/3 + z^4/10 - z^6/42 + ...)
            z2 = z * z
            series = 1 - z2 / 3 + z2 * z2 / 10 - z2 * z2 * z2 / 42
            return 2 * L / gmpy2.sqrt(gmpy2.const_pi()) * series
        return gmpy2.erf(z) / x

    return KernelSpec("ewald:lambda=%g" % lam, ev)


def make_helmholtz(dim=3, k=50.0, delta=0.05):
    """Green's function of the Helmholtz operator in 2D or 3D, complex valued."""
    k = float(k)
    delta = float(delta)
    if dim not in (2, 3):
        raise ValueError("dim must be 2 or 3")
    if k <= 0 or delta <= 0:
        raise ValueError("k and delta must be positive")

    if dim == 3:

        def ev(x):
            x = mpfr(x)
            return gmpy2.exp(mpc(0, k) * x) / (4 * gmpy2.const_pi() * x)

    else:

        def ev(x):
            x = mpfr(x)
            prec = gmpy2.get_context().precision
            with mpmath.workprec(prec + 16):
                h = mpmath.hankel1(0, mpmath.mpf(k) * gmpy_to_mpmath(x))
                val = mpmath.mpc(0, 1) / 4 * h
                return mpmath_to_gmpy(val)

    return KernelSpec(
        "helmholtz:dim=%d,k=%g,delta=%g" % (dim, k, delta),
        ev,
        domain=(delta, 10.0),
        is_complex=True,
    )


def make_poly_exp(coeffs):
    """Kernel p(x) * exp(-x) with p given by monomial coefficients c0..cd."""
    coeffs = tuple(float(c) for c in coeffs)

    def ev(x):
        x = mpfr(x)
        p = mpfr(0)
        for c in reversed(coeffs):
            p = p * x + mpfr(c)
        return p * gmpy2.exp(-x)

    label = "polyexp:" + ",".join(
        "c%d=%g" % (i, c) for i, c in enumerate(coeffs) if c != 0
    )
    return KernelSpec(label, ev)


def localize(kernel, cutoff, width, power=2):
    """Splice a decaying taper after `cutoff`: unchanged on (0, cutoff],
    multiplied by exp(-((x-cutoff)/width)^power) beyond.

    The splice is value-matched with power-1 vanishing derivatives at the
    cutoff; `power` (even, default 2 = Gaussian taper) is the accuracy
    knob for expansion convergence order on slowly decaying kernels.
    """
    cutoff = float(cutoff)
    width = float(width)
    power = int(power)
    if width <= 0:
        raise ValueError("width must be positive")
    if power < 2 or power % 2:
        raise ValueError("power must be a positive even integer")
    base = kernel._evaluate

    def ev(x):
        x = mpfr(x)
        v = base(x)
        if x <= cutoff:
            return v
        t = (x - mpfr(cutoff)) / mpfr(width)
        return v * gmpy2.exp(-(t**power))

    label = kernel.label + "|taper:cutoff=%g,width=%g" % (cutoff, width)
    if power != 2:
        label += ",power=%d" % power
    return KernelSpec(
        label,
        ev,
        is_singular=kernel.is_singular,
        singular_exponent=kernel.singular_exponent,
        taylor=kernel.taylor,
        localization=(cutoff, width),
        domain=kernel.domain,
        is_complex=kernel.is_complex,
    )


_FACTORIES = {
    "exp": (make_exponential, {"rate": 1.0}),
    "gaussian": (make_gaussian, {"delta": 1.0}),
    "matern": (make_matern, {"nu": 1.5}),
    "power": (make_power, {"alpha": 0.5, "scale": 1.0}),
    "ewald": (make_ewald_far, {"lambda": 1.0}),
    "helmholtz": (make_helmholtz, {"dim": 3, "k": 50.0, "delta": 0.05}),
}


def from_registry(spec_string):
    """Build a kernel from 'name' or 'name:key=val,key=val' syntax.

    >>> from_registry('gaussian:delta=1').label
    'gaussian:delta=1'
    """
    name, _, paramstr = spec_string.partition(":")
    name = name.strip().lower()
    if name not in _FACTORIES:
        raise KeyError(
            "unknown kernel %r (have: %s)" % (name, ", ".join(sorted(_FACTORIES)))
        )
    factory, defaults = _FACTORIES[name]
    params = dict(defaults)
    if paramstr:
        for item in paramstr.split(","):
            key, _, val = item.partition("=")
            key = key.strip()
            if key not in params:
                raise KeyError("kernel %r has no parameter %r" % (name, key))
            params[key] = float(val)
    if name == "helmholtz":
        params["dim"] = int(params["dim"])
    kwargs = {("lam" if k == "lambda" else k): v for k, v in params.items()}
    return factory(**kwargs)


def registry_names():
    return sorted(_FACTORIES)

"""Implicit Runge-Kutta tableaus and stability functions.

Only stiffly accurate L-stable methods are useful here: each expansion
term contributes a scalar ODE whose exponent may sit anywhere inside the
stability region, and the final quadrature reads the step output off the
last stage.
"""

from fractions import Fraction

import numpy as np

from .errors import ExpsumError


class SingularResolvent(ExpsumError):
    """(I - zA) not invertible at the requested z."""


class ButcherTableau:
    """Coefficients (A, b, c) with order metadata.

    Stores exact Fractions; `arrays()` yields float copies for runtime.
    """

    def __init__(self, name, a, b, c, order, stage_order):
        self.name = name
        self.a = [[Fraction(x) for x in row] for row in a]
        self.b = [Fraction(x) for x in b]
        self.c = [Fraction(x) for x in c]
        self.order = order
        self.stage_order = stage_order
        self.stages = len(self.b)
        if len(self.a) != self.stages or any(len(r) != self.stages for r in self.a):
            raise ValueError("A must be S x S")
        if len(self.c) != self.stages:
            raise ValueError("c must have S entries")

    @property
    def stiffly_accurate(self):
        return self.a[-1] == self.b and self.c[-1] == 1

    def arrays(self):
        A = np.array([[float(x) for x in row] for row in self.a])
        b = np.array([float(x) for x in self.b])
        c = np.array([float(x) for x in self.c])
        return A, b, c

    def __repr__(self):
        return "ButcherTableau(%s, S=%d, p=%d, q=%d)" % (
            self.name,
            self.stages,
            self.order,
            self.stage_order,
        )


def lobatto_iiic():
    """Three-stage Lobatto IIIC: order 4, stage order 2, L-stable,
    stiffly accurate."""
    a = [
        [Fraction(1, 6), Fraction(-1, 3), Fraction(1, 6)],
        [Fraction(1, 6), Fraction(5, 12), Fraction(-1, 12)],
        [Fraction(1, 6), Fraction(2, 3), Fraction(1, 6)],
    ]
    b = [Fraction(1, 6), Fraction(2, 3), Fraction(1, 6)]
    c = [Fraction(0), Fraction(1, 2), Fraction(1)]
    return ButcherTableau("lobatto-iiic", a, b, c, order=4, stage_order=2)


def stability_fn(tab, z):
    """r(z) = 1 + z b^T (I - z A)^{-1} 1, by linear solve."""
    A, b, _ = tab.arrays()
    S = tab.stages
    z = complex(z)
    M = np.eye(S) - z * A
    try:
        x = np.linalg.solve(M, np.ones(S))
    except np.linalg.LinAlgError as exc:
        raise SingularResolvent(str(exc)) from exc
    cond = np.linalg.cond(M)
    if not np.isfinite(cond) or cond > 1e14:
        raise SingularResolvent("resolvent nearly singular at z=%s" % z)
    return 1 + z * (b @ x)


def stability_fn_det(tab, z):
    """Rational determinant form det(I - zA + z 1 b^T) / det(I - zA)."""
    A, b, _ = tab.arrays()
    S = tab.stages
    z = complex(z)
    num = np.linalg.det(np.eye(S) - z * A + z * np.outer(np.ones(S), b))
    den = np.linalg.det(np.eye(S) - z * A)
    if den == 0:
        raise SingularResolvent("determinant zero at z=%s" % z)
    return num / den


def step_weights(tab, z):
    """(r(z), psi(z)) with psi = b^T (I - z A)^{-1} for one exponent."""
    A, b, _ = tab.arrays()
    S = tab.stages
    M = np.eye(S) - complex(z) * A
    psi = np.linalg.solve(M.T, b.astype(complex))
    r = 1 + complex(z) * (psi @ np.ones(S))
    return r, psi

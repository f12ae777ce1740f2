"""Fast convolution quadrature driven by an exponential-sum kernel.

Each term of the sum turns the convolution into a scalar linear ODE, so
one implicit RK step per term advances the whole history in O(P) work.
Weakly singular kernels are split: a local piece over [0, t0] handled by
closed-form moment integrals against a polynomial interpolant, plus the
smooth remainder handled by the recurrence.
"""

import math

import numpy as np

from .errors import MissingTaylor, SeriesDivergence, StiffnessGuard
from .tableau import step_weights

_SH_SLACK = 1 + 1e-9


class ConvolutionState:
    """Per-term recurrence state Y_l with cached r(z_l), psi_l."""

    def __init__(self, weights, exponents, h, tab):
        self.h = float(h)
        self.tab = tab
        self.w = np.asarray(weights, dtype=complex)
        self.s = np.asarray(exponents, dtype=complex)
        max_sh = float(np.max(np.abs(self.s)) * self.h)
        if max_sh > _SH_SLACK:
            raise StiffnessGuard(max_sh)
        P = len(self.w)
        S = tab.stages
        self.r = np.empty(P, dtype=complex)
        self.psi = np.empty((P, S), dtype=complex)
        for l in range(P):
            self.r[l], self.psi[l] = step_weights(tab, -self.s[l] * self.h)
        self.Y = np.zeros(P, dtype=complex)
        self.n = 0

    @classmethod
    def from_soe(cls, soe, h, tab, shift=0.0):
        w, s = soe.arrays()
        if shift:
            w = w * np.exp(-s * shift)
        return cls(w, s, h, tab)

    def step(self, g_stages):
        """Advance one step given g at the stage abscissae t_n + c_i h."""
        self.Y = self.r * self.Y + self.h * (self.psi @ np.asarray(g_stages, dtype=complex))
        self.n += 1

    def value(self):
        return complex(np.sum(self.w * self.Y))


def _stage_times(t_end, h, c):
    steps = int(round(t_end / h))
    if abs(steps * h - t_end) > 1e-9 * max(1.0, t_end):
        raise ValueError("t_end must be a multiple of h")
    base = np.arange(steps) * h
    return steps, [base + float(ci) * h for ci in c]


def _eval_grid(g, times):
    try:
        vals = np.asarray(g(times), dtype=complex)
        if vals.shape != times.shape:
            raise TypeError
        return vals
    except (TypeError, ValueError):
        return np.array([complex(g(float(t))) for t in times])


def convolve_smooth(soe, g, t_end, h, tab):
    """(t, y) arrays for y(t) = int_0^t f(t-tau) g(tau) dtau at t = h..t_end.

    f is represented by `soe`; g is a callable (vectorized or scalar).
    Work is O(P) per step. Raises StiffnessGuard if max|s*h| > 1.
    """
    state = ConvolutionState.from_soe(soe, h, tab)
    _, c_times = _stage_times(t_end, h, tab.arrays()[2])
    stage_vals = np.column_stack([_eval_grid(g, ct) for ct in c_times])
    steps = stage_vals.shape[0]
    out = np.empty(steps, dtype=complex)
    for j in range(steps):
        state.step(stage_vals[j])
        out[j] = state.value()
    t = (np.arange(steps) + 1) * h
    return t, out


def _lagrange_monomial(nodes):
    """Monomial coefficients (ascending) of each Lagrange basis poly."""
    k = len(nodes)
    out = []
    for i in range(k):
        coeffs = np.array([1.0])
        denom = 1.0
        for j in range(k):
            if j == i:
                continue
            coeffs = np.convolve(coeffs, np.array([-nodes[j], 1.0]))
            denom *= nodes[i] - nodes[j]
        out.append(coeffs / denom)
    return out


def _interval_moments(taylor, A, B, qmax):
    """Closed-form moments int_A^B f_M(tau) tau^q dtau, q = 0..qmax-1."""
    alpha = taylor.alpha
    out = np.empty(qmax)
    for q in range(qmax):
        p = q + 1 - alpha
        m = taylor.a0 * (B**p - A**p) / p
        for k, ak in enumerate(taylor.poly, start=1):
            m += ak * (B ** (q + k + 1) - A ** (q + k + 1)) / (q + k + 1)
        out[q] = m
    return out


def local_piece_weights(taylor, h, n0, max_back, m=4):
    """Grid weights of the local integral over [0, n0 h].

    Returns W with int_0^{n0 h} f_M(tau) G(t - tau) dtau ~ sum_i W[i] *
    g(t - i h), where each h-segment carries an m-point product rule on a
    grid stencil bracketing it. `max_back` caps how far back (in grid
    steps) references may reach; it must be at least min(3, ...) and at
    least n0 for the rule to bracket every segment. W[0] multiplies the
    value at t itself (this is kappa for the equation solvers, and it
    scales like h^(1-alpha)).
    """
    width = min(m, max_back + 1)
    W = np.zeros(max_back + 1)
    for l in range(n0):
        lo = max(0, min(l - 1, max_back - (width - 1)))
        stencil = list(range(lo, lo + width))
        taus = [s * h for s in stencil]
        basis = _lagrange_monomial(taus)
        mom = _interval_moments(taylor, l * h, (l + 1) * h, len(taus))
        for s, cs in zip(stencil, basis):
            W[s] += float(np.dot(cs, mom[: len(cs)]))
    return W


def split_offset(t0_base, h):
    """Smallest on-grid splitting point n0*h at or above t0_base."""
    n0 = max(1, int(math.ceil(t0_base / h - 1e-9)))
    return n0, n0 * h


def convolve_singular(kernel, soe, g, t_end, h, tab, t0=0.05, interp_points=4):
    """(t, y) for a weakly singular kernel via local/remainder splitting.

    y(t) = int_0^t0' f(tau) g(t - tau) dtau + int_0^(t-t0') f(t-tau) g(tau) dtau
    with t0' the first grid multiple at or above t0 (one exponential sum,
    built from t0 up, serves every step size this way). The local piece
    is a segment-wise product rule pairing the kernel's expansion with a
    grid interpolant of g; the remainder runs the standard recurrence
    shifted by t0'. Output grid: t = t0' + h, ..., t_end.
    """
    if not kernel.is_singular or kernel.taylor is None:
        raise MissingTaylor(kernel.label)
    n0, t0g = split_offset(t0, h)
    dom = soe.meta.get("domain")
    if dom and t0g < dom[0] - 1e-12:
        raise ValueError(
            "splitting point %g below the expansion's valid domain %g"
            % (t0g, dom[0])
        )
    if kernel.taylor.envelope < t0g:
        raise ValueError("t0=%g outside the local expansion envelope" % t0g)
    full_back = n0 + interp_points - 2
    weight_cache = {}

    def weights_for(t_index):
        mb = min(full_back, t_index)
        if mb not in weight_cache:
            weight_cache[mb] = local_piece_weights(
                kernel.taylor, h, n0, mb, interp_points
            )
        return weight_cache[mb]

    state = ConvolutionState.from_soe(soe, h, tab, shift=t0g)
    steps, c_times = _stage_times(t_end - t0g, h, tab.arrays()[2])
    stage_vals = np.column_stack([_eval_grid(g, ct) for ct in c_times])
    t_out = t0g + (np.arange(steps) + 1) * h
    out = np.empty(steps, dtype=complex)
    for j in range(steps):
        state.step(stage_vals[j])
        t = t_out[j]
        W = weights_for(n0 + j + 1)
        local = 0.0 + 0.0j
        for i, Wi in enumerate(W):
            if Wi != 0.0:
                local += Wi * complex(g(t - i * h))
        out[j] = state.value() + local
    return t_out, out


def rl_exact(alpha, t):
    """Closed form of (1/Gamma(alpha)) int_0^t (t-tau)^(alpha-1) cos(tau) dtau.

    Hypergeometric series in -t^2/4, summed to stagnation at 1e-15
    relative; the ratio-form recurrence keeps each term cheap.
    """
    if not 0 < alpha < 1:
        if abs(alpha - 1.0) < 1e-14:
            return math.sin(t)
        raise ValueError("alpha must lie in (0, 1)")
    t = float(t)
    if t == 0:
        return 0.0
    b1 = (1 + alpha) / 2
    b2 = 1 + alpha / 2
    tau = -t * t / 4
    term = 1.0
    acc = 1.0
    for ell in range(100000):
        term *= tau / ((b1 + ell) * (b2 + ell))
        acc += term
        if abs(term) < 1e-15 * max(1.0, abs(acc)):
            break
    else:
        raise SeriesDivergence("hypergeometric series did not stagnate")
    pref = (
        2 ** (1 - alpha)
        * math.sqrt(math.pi)
        * t**alpha
        / (alpha * math.gamma(alpha / 2) * math.gamma((1 + alpha) / 2))
    )
    return pref * acc

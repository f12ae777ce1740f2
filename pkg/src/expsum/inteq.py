"""Solvers for linear convolution equations and nonlinear Volterra
equations, driven by the exponential-sum recurrence.

Per step the history enters through one O(P) recurrence update; internal
RK stages are re-expressed through integer-grid values by a four-point
interpolation, leaving a single scalar (linear or Newton) solve per step.
Weakly singular kernels contribute a segment-wise local term over
[0, t0] whose product-rule weights are closed-form; the coefficient
kappa of the current unknown in that term scales like h^(1-alpha).

Startup and the first few steps reference grid values ahead of the
solver front (the interpolation windows are one-sided there), so the
march runs in a few warm-up passes: early steps are re-solved with full
windows once provisional forward values exist.
"""

from dataclasses import dataclass, field

import numpy as np

from .convolve import ConvolutionState, local_piece_weights, split_offset
from .errors import (
    MissingTaylor,
    NearSingularJacobian,
    NearSingularStep,
    NewtonDiverged,
    StiffnessGuard,
)
from .tableau import lobatto_iiic

_WARMUP_PASSES = 3


@dataclass
class LinearConvProblem:
    """(1 - varpi) g(t) + source(t) = int_0^t kernel(t - tau) g(tau) dtau."""

    kernel: object
    source: object
    g0: float
    t_end: float
    h: float
    varpi: float = 0.0
    t0: float = 0.05
    interp_points: int = 4


@dataclass
class VolterraProblem:
    """u(t) = inhomogeneity(t) + int_0^t kernel(t-tau) g(tau, u(tau)) dtau."""

    kernel: object
    inhomogeneity: object
    g: object
    u0: float
    t_end: float
    h: float
    dg_du: object = None
    t0: float = 0.05
    interp_points: int = 4
    newton_tol: float = 1e-12
    newton_max: int = 50


@dataclass
class SolveStats:
    kappa: float = 0.0
    newton_iterations: list = field(default_factory=list)
    newton_monotone: int = 0
    newton_steps: int = 0


def internal_stage_weights(tab, m=4):
    """Lagrange weights mapping integer values g(t_{j-l+2}), l=1..m, to
    the stage abscissa t_j + c_i h. Exact for polynomials of degree < m."""
    _, _, c = tab.arrays()
    offsets = [2 - l for l in range(1, m + 1)]  # +1, 0, -1, -2 for m=4
    out = np.zeros((len(c), m))
    for i, ci in enumerate(c):
        for l in range(m):
            w = 1.0
            for k in range(m):
                if k == l:
                    continue
                w *= (ci - offsets[k]) / (offsets[l] - offsets[k])
            out[i, l] = w
    return out


def _window_weights(c_i, node_indices, j):
    """Lagrange weights for the abscissa t_j + c_i h over grid nodes."""
    out = []
    for l, nl in enumerate(node_indices):
        w = 1.0
        for k, nk in enumerate(node_indices):
            if k == l:
                continue
            w *= (j + c_i - nk) / (nl - nk)
        out.append(w)
    return out


class _StageMap:
    """Interpolation windows for RK stage values on the integer grid.

    The nominal window for stage (j, i) is {j+1, j, j-1, j-2}. Near the
    left end the window shifts to {0..m-1} when forward values may be
    referenced (warm-up), else clamps to {0..j+1}.
    """

    def __init__(self, tab, m):
        _, _, self.c = tab.arrays()
        self.m = m
        self.nominal = internal_stage_weights(tab, m)

    def window(self, j, i, allow_forward):
        if j - self.m + 2 >= 0:
            return [j + 1 - l for l in range(self.m)], self.nominal[i]
        if allow_forward:
            idx = list(range(self.m))
        else:
            idx = list(range(max(j + 2, 2)))
        return idx, _window_weights(self.c[i], idx, j)


class _LocalWeights:
    """Cached composite weights for the [0, t0] local piece."""

    def __init__(self, taylor, h, n0, m):
        self.taylor = taylor
        self.h = h
        self.n0 = n0
        self.m = m
        self.full_back = n0 + m - 2
        self._cache = {}

    def at(self, t_index):
        mb = min(self.full_back, t_index)
        if mb not in self._cache:
            self._cache[mb] = local_piece_weights(
                self.taylor, self.h, self.n0, mb, self.m
            )
        return self._cache[mb]

    @property
    def kappa(self):
        return float(self.at(self.full_back)[0])


def _stiffness_check(soe, h):
    _, s = soe.arrays()
    max_sh = float(np.max(np.abs(s)) * h)
    if max_sh > 1 + 1e-9:
        raise StiffnessGuard(max_sh)


def _startup_weights(taylor, h, k, m):
    """Composite weights for the pure-local equation at t = k h."""
    return local_piece_weights(taylor, h, k, k, m)


def _newton_scalar(F, x0, tol, cap, stats, dF=None):
    """Damped scalar Newton; numeric central-difference derivative unless
    an analytic one is supplied."""
    x = x0
    fx = F(x)
    monotone = True
    for it in range(cap):
        if abs(fx) <= tol:
            stats.newton_iterations.append(it)
            stats.newton_steps += 1
            if monotone:
                stats.newton_monotone += 1
            return x
        if dF is not None:
            d = dF(x)
        else:
            step = max(1e-7, 1e-7 * abs(x))
            d = (F(x + step) - F(x - step)) / (2 * step)
        if abs(d) < 1e-300:
            raise NearSingularJacobian("derivative ~ 0 at x=%g" % x)
        dx = fx / d
        lam = 1.0
        fn = fx
        for _ in range(40):
            xn = x - lam * dx
            fn = F(xn)
            if abs(fn) < abs(fx):
                break
            lam /= 2
        else:
            raise NewtonDiverged("no descent at x=%g (|F|=%.2e)" % (x, abs(fx)))
        if it > 0 and abs(fn) >= abs(fx):
            monotone = False
        x, fx = xn, fn
    raise NewtonDiverged("iteration cap; |F|=%.2e" % abs(fx))


class _March:
    """Shared driver: warm-up passes plus the final full march.

    solve_step(N, values, prev, state, allow_forward) must solve grid
    index N, store it in values[N], and advance the recurrence state.
    make_state() builds a fresh per-pass recurrence state (or None).
    """

    def __init__(self, n_grid, warm_until, init_value):
        self.n_grid = n_grid
        self.warm_until = min(warm_until, n_grid)
        self.init_value = init_value

    def run(self, make_state, solve_step, first_index=1, preset=None):
        prev = None
        values = None
        for p in range(_WARMUP_PASSES):
            final = p == _WARMUP_PASSES - 1
            upto = self.n_grid if final else self.warm_until
            values = np.empty(self.n_grid + 1)
            values[0] = self.init_value
            if preset is not None:
                k = len(preset)
                values[1 : k + 1] = preset
            state = make_state()
            for N in range(first_index, upto + 1):
                solve_step(N, values, prev, state, allow_forward=prev is not None)
            if final:
                return values
            if prev is None:
                fill = values[upto] if upto >= 1 else self.init_value
                prev = np.full(self.n_grid + 1, fill)
            prev[: upto + 1] = values[: upto + 1]
        return values


def solve_linear(prob, soe, tab=None):
    """March the linear convolution equation; returns (t, g, stats).

    Smooth kernels use the plain recurrence from t = 0; singular kernels
    solve a startup region [0, t0'] from the local expansion alone and
    march the split equation with the expansion shifted past t0'.
    """
    tab = tab or lobatto_iiic()
    h = float(prob.h)
    N_out = int(round(prob.t_end / h))
    if abs(N_out * h - prob.t_end) > 1e-9 * max(1.0, prob.t_end):
        raise ValueError("t_end must be a multiple of h")
    _stiffness_check(soe, h)
    stats = SolveStats()
    if prob.kernel.is_singular:
        g = _march_linear_singular(prob, soe, tab, stats, N_out)
    else:
        g = _march_linear_smooth(prob, soe, tab, stats, N_out)
    t = np.arange(1, N_out + 1) * h
    return t, g[1:], stats


def _stage_split(smap, j, N_unknown, values, prev, allow_forward):
    """Assemble known stage content and the unknown's stage coefficient."""
    S = len(smap.c)
    known = np.zeros(S, dtype=complex)
    unknown = np.zeros(S)
    for i in range(S):
        idx, wts = smap.window(j, i, allow_forward)
        for ii, wt in zip(idx, wts):
            if ii == N_unknown:
                unknown[i] += wt
            elif ii < N_unknown:
                known[i] += wt * values[ii]
            else:
                known[i] += wt * prev[ii]
    return known, unknown


def _march_linear_smooth(prob, soe, tab, stats, N_out):
    h = float(prob.h)
    varpi = float(prob.varpi)
    H = prob.source
    smap = _StageMap(tab, prob.interp_points)
    march = _March(N_out, prob.interp_points + 1, prob.g0)

    def make_state():
        return ConvolutionState.from_soe(soe, h, tab)

    def solve_step(N, values, prev, state, allow_forward):
        j = N - 1
        known, unknown = _stage_split(smap, j, N, values, prev, allow_forward)
        hist = complex(np.sum(state.w * (state.r * state.Y)))
        rhs = hist + h * complex(np.sum(state.w * (state.psi @ known)))
        coeff = h * complex(np.sum(state.w * (state.psi @ unknown.astype(complex))))
        denom = (1 - varpi) - coeff.real
        if abs(denom) < 1e-10:
            raise NearSingularStep("|1 - varpi - c| = %.2e" % abs(denom))
        values[N] = (rhs.real - H(N * h)) / denom
        state.step(known + unknown * values[N])

    g = march.run(make_state, solve_step)
    return g


def _march_linear_singular(prob, soe, tab, stats, N_out):
    h = float(prob.h)
    varpi = float(prob.varpi)
    H = prob.source
    kernel = prob.kernel
    m = prob.interp_points
    if kernel.taylor is None:
        raise MissingTaylor(kernel.label)
    n0, t0g = split_offset(prob.t0, h)
    if kernel.taylor.envelope < (max(n0, m - 1) + 1) * h:
        raise ValueError("local expansion envelope too small for this step size")
    smap = _StageMap(tab, m)
    local = _LocalWeights(kernel.taylor, h, n0, m)
    stats.kappa = float(local.at(local.full_back)[0])
    start_count = min(max(n0, m - 1), N_out)

    # startup region: the equation collapses to the local expansion alone
    # (its composite weights reference backward values only)
    def startup_pass(values):
        for k in range(1, start_count + 1):
            V = _startup_weights(kernel.taylor, h, k, m)
            acc = 0.0
            for i in range(1, len(V)):
                acc += V[i] * values[k - i]
            denom = (1 - varpi) - V[0]
            if abs(denom) < 1e-10:
                raise NearSingularStep("startup node %d" % k)
            values[k] = (acc - H(k * h)) / denom

    march = _March(N_out, n0 + m + 1, prob.g0)

    def make_state():
        return ConvolutionState.from_soe(soe, h, tab, shift=t0g)

    def solve_step(Nabs, values, prev, state, allow_forward):
        if Nabs <= start_count:
            if Nabs == 1:
                startup_pass(values)
            if Nabs > n0:
                # recurrence must still traverse the startup-covered span
                j = Nabs - n0 - 1
                known, unknown = _stage_split(
                    smap, j, Nabs, values, prev, allow_forward
                )
                state.step(known + unknown * values[Nabs])
            return
        j = Nabs - n0 - 1
        known, unknown = _stage_split(smap, j, Nabs, values, prev, allow_forward)
        hist = complex(np.sum(state.w * (state.r * state.Y)))
        rhs = hist + h * complex(np.sum(state.w * (state.psi @ known)))
        coeff = h * complex(np.sum(state.w * (state.psi @ unknown.astype(complex))))
        W = local.at(Nabs)
        q = 0.0
        for i in range(1, len(W)):
            q += W[i] * values[Nabs - i]
        denom = (1 - varpi) - coeff.real - W[0]
        if abs(denom) < 1e-10:
            raise NearSingularStep("|1 - varpi - kappa| = %.2e" % abs(denom))
        values[Nabs] = (rhs.real + q - H(Nabs * h)) / denom
        state.step(known + unknown * values[Nabs])

    g = march.run(make_state, solve_step, first_index=1)
    return g


def solve_volterra(prob, soe, tab=None):
    """March the nonlinear Volterra equation; returns (t, u, stats)."""
    tab = tab or lobatto_iiic()
    h = float(prob.h)
    N_out = int(round(prob.t_end / h))
    if abs(N_out * h - prob.t_end) > 1e-9 * max(1.0, prob.t_end):
        raise ValueError("t_end must be a multiple of h")
    _stiffness_check(soe, h)
    stats = SolveStats()
    if prob.kernel.is_singular:
        u = _march_volterra_singular(prob, soe, tab, stats, N_out)
    else:
        u = _march_volterra_smooth(prob, soe, tab, stats, N_out)
    t = np.arange(1, N_out + 1) * h
    return t, u[1:], stats


def _march_volterra_smooth(prob, soe, tab, stats, N_out):
    h = float(prob.h)
    g = prob.g
    a = prob.inhomogeneity
    smap = _StageMap(tab, prob.interp_points)
    c = smap.c
    march = _March(N_out, prob.interp_points + 1, prob.u0)

    def make_state():
        return ConvolutionState.from_soe(soe, h, tab)

    def solve_step(N, values, prev, state, allow_forward):
        j = N - 1
        tj = j * h
        windows = [smap.window(j, i, allow_forward) for i in range(tab.stages)]
        hist = complex(np.sum(state.w * (state.r * state.Y)))

        def stages_of(uN):
            st = np.empty(tab.stages, dtype=complex)
            for i, (idx, wts) in enumerate(windows):
                ui = 0.0
                for ii, wt in zip(idx, wts):
                    if ii == N:
                        ui += wt * uN
                    elif ii < N:
                        ui += wt * values[ii]
                    else:
                        ui += wt * prev[ii]
                st[i] = g(tj + c[i] * h, ui)
            return st

        def F(uN):
            conv = hist + h * complex(np.sum(state.w * (state.psi @ stages_of(uN))))
            return uN - a(N * h) - conv.real

        values[N] = _newton_scalar(
            F, values[N - 1], prob.newton_tol, prob.newton_max, stats
        )
        state.step(stages_of(values[N]))

    u = march.run(make_state, solve_step)
    return u


def _march_volterra_singular(prob, soe, tab, stats, N_out):
    h = float(prob.h)
    g = prob.g
    a = prob.inhomogeneity
    kernel = prob.kernel
    m = prob.interp_points
    if kernel.taylor is None:
        raise MissingTaylor(kernel.label)
    n0, t0g = split_offset(prob.t0, h)
    if kernel.taylor.envelope < (max(n0, m - 1) + 1) * h:
        raise ValueError("local expansion envelope too small for this step size")
    smap = _StageMap(tab, m)
    c = smap.c
    local = _LocalWeights(kernel.taylor, h, n0, m)
    stats.kappa = float(local.at(local.full_back)[0])
    start_count = min(max(n0, m - 1), N_out)

    def startup_pass(values):
        for k in range(1, start_count + 1):
            V = _startup_weights(kernel.taylor, h, k, m)

            def F(uk):
                acc = V[0] * g(k * h, uk)
                for i in range(1, len(V)):
                    acc += V[i] * g((k - i) * h, values[k - i])
                return uk - a(k * h) - acc

            values[k] = _newton_scalar(
                F, values[k - 1], prob.newton_tol, prob.newton_max, stats
            )

    march = _March(N_out, n0 + m + 1, prob.u0)

    def make_state():
        return ConvolutionState.from_soe(soe, h, tab, shift=t0g)

    def solve_step(Nabs, values, prev, state, allow_forward):
        if Nabs <= start_count:
            if Nabs == 1:
                startup_pass(values)
            if Nabs > n0:
                j = Nabs - n0 - 1
                windows = [smap.window(j, i, allow_forward) for i in range(tab.stages)]
                st = np.empty(tab.stages, dtype=complex)
                for i, (idx, wts) in enumerate(windows):
                    ui = 0.0
                    for ii, wt in zip(idx, wts):
                        ui += wt * (values[ii] if ii < Nabs or prev is None else prev[ii])
                    st[i] = g(j * h + c[i] * h, ui)
                state.step(st)
            return
        j = Nabs - n0 - 1
        tj = j * h
        tN = Nabs * h
        windows = [smap.window(j, i, allow_forward) for i in range(tab.stages)]
        hist = complex(np.sum(state.w * (state.r * state.Y)))
        W = local.at(Nabs)
        loc_known = 0.0
        for i in range(1, len(W)):
            loc_known += W[i] * g(tN - i * h, values[Nabs - i])

        def stages_of(uN):
            st = np.empty(tab.stages, dtype=complex)
            for i, (idx, wts) in enumerate(windows):
                ui = 0.0
                for ii, wt in zip(idx, wts):
                    if ii == Nabs:
                        ui += wt * uN
                    elif ii < Nabs:
                        ui += wt * values[ii]
                    else:
                        ui += wt * prev[ii]
                st[i] = g(tj + c[i] * h, ui)
            return st

        def F(uN):
            conv = hist + h * complex(np.sum(state.w * (state.psi @ stages_of(uN))))
            return uN - a(tN) - conv.real - W[0] * g(tN, uN) - loc_known

        values[Nabs] = _newton_scalar(
            F, values[Nabs - 1], prob.newton_tol, prob.newton_max, stats
        )
        state.step(stages_of(values[Nabs]))

    u = march.run(make_state, solve_step, first_index=1)
    return u

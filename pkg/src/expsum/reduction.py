"""Near-minimal exponential sums by balanced truncation.

The expansion's Laplace transform is a sum of poles, i.e. the transfer
function of a diagonal linear system. Balancing its controllability and
observability Gramians (square-root method: Cholesky factors, one SVD)
and truncating small Hankel values compresses 2n-1 exponentials down to
P-1, with the constant term carried through unchanged.
"""

import math

import gmpy2
import numpy as np
from gmpy2 import mpc, mpfr

from .errors import DefectiveMatrix, PrecisionLoss, TailTooFat
from .hp import PrecisionContext, decimal_str
from .linalg import HpMatrix, eig, lyapunov_diag, pivoted_cholesky, solve, svd

# Hankel values under 2^(RANK_GUARD - bits) are numerical noise; using
# them would destabilize the inverse square root in the transform
_RANK_GUARD_BITS = 40

_PAIRING_RTOL = mpfr("1e-20")


class SoeApproximation:
    """Reduced sum of exponentials sum_l m_l exp(-s_l x).

    terms[0] is the constant (m_0, 0); the remaining exponents have
    strictly positive real part. P counts all stored terms including the
    constant.
    """

    def __init__(
        self,
        terms,
        eps,
        hankel_tail,
        hankel_spectrum,
        meta=None,
    ):
        self.terms = [(mpc(m), mpc(s)) for m, s in terms]
        self.eps = float(eps)
        self.hankel_tail = float(hankel_tail)
        self.hankel_spectrum = [float(s) for s in hankel_spectrum]
        self.meta = dict(meta or {})
        self._f64 = None
        for m, s in self.terms[1:]:
            if s.real < 0:
                raise ValueError("unstable exponent %s" % s)

    @property
    def P(self):
        return len(self.terms)

    @property
    def max_exponent(self):
        return max(abs(complex(s)) for _, s in self.terms)

    def arrays(self):
        """(weights, exponents) as complex128 arrays, rounded once."""
        if self._f64 is None:
            w = np.array([complex(m) for m, _ in self.terms])
            s = np.array([complex(sv) for _, sv in self.terms])
            self._f64 = (w, s)
        return self._f64

    def eval_f64(self, x):
        w, s = self.arrays()
        return complex(np.sum(w * np.exp(-s * np.asarray(x))))

    def eval_hp(self, x):
        x = mpfr(x)
        acc = mpc(0)
        for m, s in self.terms:
            acc += m * gmpy2.exp(-s * x)
        return acc

    def __repr__(self):
        return "SoeApproximation(P=%d, eps=%g, tail=%.3e)" % (
            self.P,
            self.eps,
            self.hankel_tail,
        )


def _symmetrize_conjugate_pairs(ms, ss):
    """Pair eigen-terms into exact conjugates so real kernels stay real
    after rounding to doubles."""
    count = len(ss)
    used = [False] * count
    out = []
    for i in range(count):
        if used[i]:
            continue
        si, mi = ss[i], ms[i]
        scale = max(abs(si), mpfr(1))
        if abs(si.imag) <= _PAIRING_RTOL * scale:
            out.append((mpc(mi.real), mpc(si.real)))
            used[i] = True
            continue
        best = None
        for j in range(i + 1, count):
            if used[j]:
                continue
            d = abs(si - ss[j].conjugate())
            if d <= _PAIRING_RTOL * scale and (best is None or d < best[1]):
                best = (j, d)
        if best is None:
            out.append((mi, si))
            used[i] = True
            continue
        j = best[0]
        s_avg = (si + ss[j].conjugate()) / 2
        m_avg = (mi + ms[j].conjugate()) / 2
        out.append((m_avg, s_avg))
        out.append((m_avg.conjugate(), s_avg.conjugate()))
        used[i] = used[j] = True
    return out


def balanced_truncate(vp, eps, ctx=None):
    """Compress a VpExpansion to the fewest exponentials meeting eps.

    Steps: realize the pole sum as (A, B, C) with A = -diag(j/n_c);
    Gramians entrywise; Cholesky factors S, L; SVD of S^T L for the
    Hankel values; transform T = S U Sigma^(-1/2); truncate where twice
    the tail sum first dips under eps; eigendecompose the reduced block.
    """
    ctx = ctx or PrecisionContext()
    eps = float(eps)
    if eps <= 0:
        raise ValueError("eps must be positive")
    if not vp.is_real:
        raise ValueError("balanced truncation expects real expansion weights")
    # the Gramian scale is set by the largest expansion weight while the
    # Hankel values of interest live near eps: the factorizations carry
    # log2(max|w|) extra bits so that spread stays resolvable
    wmax = max(abs(mpfr(x)) for x in vp.w)
    work_bits = ctx.mantissa_bits + 64
    if wmax > 1:
        work_bits += int(gmpy2.log2(wmax)) + 1
    with gmpy2.context(precision=work_bits):
        n2 = 2 * vp.n
        dim = n2 - 1
        n_c = mpfr(vp.n_c)
        w = [mpfr(x) for x in vp.w]
        a_diag = [-mpfr(j) / n_c for j in range(1, n2)]
        b = [gmpy2.sqrt(abs(x)) for x in w[1:]]
        c = [(bv if x >= 0 else -bv) for x, bv in zip(w[1:], b)]
        P_gram, Q_gram = lyapunov_diag(a_diag, b, c)
        # rank-revealed Gramian factors: directions this far below the
        # top of the spectrum cannot carry Hankel values above any
        # realistic eps and would only poison the factorization
        chol_floor = dim * mpfr(2) ** (64 - work_bits)
        S = pivoted_cholesky(P_gram, chol_floor)
        L = pivoted_cholesky(Q_gram, chol_floor)
        M = S.transpose().matmul(L)
        U, sigma, V = svd(M)
        nsig = len(sigma)
        noise_floor = mpfr(2) ** (_RANK_GUARD_BITS - ctx.mantissa_bits)
        scale = sigma[0] if sigma and sigma[0] > 0 else mpfr(1)
        rank_cap = sum(1 for s in sigma if s > noise_floor * scale)
        tails = [mpfr(0)] * (nsig + 1)
        acc = mpfr(0)
        for i in range(nsig - 1, -1, -1):
            acc += sigma[i]
            tails[i] = acc
        # R may equal the revealed rank (the rank cut is itself a strict
        # reduction); failing within trustworthy values is a precision
        # problem, while needing every one of the 2n-1 original states
        # means eps is below what the expansion supports
        R = None
        for r in range(min(rank_cap, nsig) + 1):
            if 2 * tails[r] <= eps:
                R = r
                break
        if R is None:
            raise PrecisionLoss(
                "truncation would need Hankel values below the noise "
                "floor at %d bits (reliable tail 2*sum=%g > eps=%g)"
                % (ctx.mantissa_bits, float(2 * tails[rank_cap]), eps)
            )
        if R >= dim:
            raise TailTooFat(
                "eps=%g admits no reduction of the %d-state expansion"
                % (eps, dim)
            )
        if R == 0:
            terms = [(mpc(w[0]), mpc(0))]
            return SoeApproximation(
                terms,
                eps,
                2 * tails[0],
                sigma,
                meta=_meta(vp, ctx, 1),
            )
        # a cut inside a cluster of near-equal Hankel values can yield a
        # (marginally) unstable reduced block; retrying one index to the
        # right keeps the 2*tail <= eps certificate and clears the cluster
        last_err = None
        for R_try in range(R, min(R + 7, rank_cap + 1)):
            try:
                pairs = _project_and_diagonalize(
                    S, L, U, V, sigma, a_diag, b, c, dim, R_try, noise_floor
                )
            except _UnstableReduction as exc:
                last_err = exc
                continue
            terms = [(mpc(w[0]), mpc(0))] + pairs
            return SoeApproximation(
                terms,
                eps,
                2 * tails[R_try],
                sigma,
                meta=_meta(vp, ctx, R_try + 1),
            )
        raise ValueError(
            "balanced truncation produced unstable poles for orders %d..%d: %s"
            % (R, min(R + 6, rank_cap), last_err)
        )


class _UnstableReduction(Exception):
    pass


def _project_and_diagonalize(S, L, U, V, sigma, a_diag, b, c, dim, R, noise_floor):
    if R == 0:
        return []
    inv_sqrt = [1 / gmpy2.sqrt(sigma[i]) for i in range(R)]
    # T = S U_R Sigma_R^(-1/2), W = L V_R Sigma_R^(-1/2); W^T T = I_R
    rp = S.cols
    rq = L.cols
    T = [
        [
            sum(S.data[i][k] * U.data[k][j] for k in range(rp)) * inv_sqrt[j]
            for j in range(R)
        ]
        for i in range(dim)
    ]
    Wm = [
        [
            sum(L.data[i][k] * V.data[k][j] for k in range(rq)) * inv_sqrt[j]
            for j in range(R)
        ]
        for i in range(dim)
    ]
    A_hat = HpMatrix(
        [
            [
                sum(Wm[k][i] * a_diag[k] * T[k][j] for k in range(dim))
                for j in range(R)
            ]
            for i in range(R)
        ]
    )
    B_hat = [sum(Wm[k][i] * b[k] for k in range(dim)) for i in range(R)]
    C_hat = [sum(c[k] * T[k][i] for k in range(dim)) for i in range(R)]
    lam, X = eig(A_hat)
    beta = solve(X, [mpc(x) for x in B_hat])
    gamma = [sum(mpc(C_hat[i]) * X.data[i][l] for i in range(R)) for l in range(R)]
    ms = [gamma[l] * beta[l] for l in range(R)]
    ss = [-lam[l] for l in range(R)]
    for s in ss:
        if s.real < -abs(s) * mpfr("1e-30") - noise_floor:
            raise _UnstableReduction("pole %s" % s)
    # a nearly defective reduced block (kernel content resonating with a
    # pole cluster) diagonalizes into giant cancelling residues that are
    # useless after rounding to doubles
    residue_mass = sum(abs(m) for m in ms)
    if sigma and residue_mass > sigma[0] * mpfr("1e12"):
        raise DefectiveMatrix(
            "residue mass %.3e vs Hankel scale %.3e: reduced block is "
            "nearly defective; move the exponent cap (2n-1)/n_c away from "
            "the kernel's decay rates" % (float(residue_mass), float(sigma[0]))
        )
    pairs = _symmetrize_conjugate_pairs(ms, ss)
    return [(m, mpc(max(s.real, mpfr(0)), s.imag)) for m, s in pairs]


def _meta(vp, ctx, P):
    return {
        "n": vp.n,
        "n_c": decimal_str(vp.n_c),
        "kernel": vp.label,
        "precision_bits": ctx.mantissa_bits,
        "P": P,
    }


def transfer_gap(vp, reduced, samples=200):
    """Max sampled deviation of the two pole sums along the imaginary axis.

    Sampled at z = i*omega for log-spaced omega in [1e-3, 1e3] plus
    omega = 0; constant terms are excluded on both sides. Returns a float.
    The raw pole sum cancels from weight magnitude down to the gap, so
    the evaluation borrows the build's elevated precision.
    """
    wmax = max(abs(mpfr(x)) for x in vp.w)
    base = max(
        gmpy2.get_context().precision,
        int(reduced.meta.get("precision_bits", 0) or 0),
        256,
    )
    boost = base + 64
    if wmax > 1:
        boost += int(gmpy2.log2(wmax)) + 1
    with gmpy2.context(precision=boost):
        return _transfer_gap_inner(vp, reduced, samples)


def _transfer_gap_inner(vp, reduced, samples):
    n_c = mpfr(vp.n_c)
    ws = [mpfr(x) for x in vp.w]
    omegas = [mpfr(0)]
    lo, hi = mpfr("0.001"), mpfr(1000)
    step = gmpy2.exp(gmpy2.log(hi / lo) / (samples - 1))
    om = lo
    for _ in range(samples):
        omegas.append(om)
        om *= step
    worst = mpfr(0)
    for om in omegas:
        z = mpc(0, om)
        full = mpc(0)
        for j in range(1, 2 * vp.n):
            full += ws[j] / (z + mpfr(j) / n_c)
        red = mpc(0)
        for m, s in reduced.terms[1:]:
            red += m / (z + s)
        d = abs(full - red)
        if d > worst:
            worst = d
    return float(worst)

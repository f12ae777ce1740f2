"""Dense configurable-precision linear algebra on gmpy2 scalars.

Matrices are stored row-major as lists of lists of mpfr/mpc. Shapes stay
small (a few hundred) but the entries need hundreds of mantissa bits, so
everything here is written for low per-operation overhead rather than
asymptotic cleverness.
"""

import gmpy2
from gmpy2 import mpc, mpfr

from .errors import (
    DefectiveMatrix,
    NoConvergence,
    NotPositiveDefinite,
    ZeroExponentPair,
)


class HpMatrix:
    """Dense matrix of high-precision scalars.

    The symmetric/diagonal flags are advisory hints set by constructors
    that can guarantee them; operations never mutate entries in place.
    """

    __slots__ = ("rows", "cols", "data", "symmetric", "diagonal")

    def __init__(self, data, symmetric=False, diagonal=False):
        self.data = data
        self.rows = len(data)
        self.cols = len(data[0]) if data else 0
        for r in data:
            if len(r) != self.cols:
                raise ValueError("ragged rows")
        self.symmetric = symmetric
        self.diagonal = diagonal

    @classmethod
    def zeros(cls, rows, cols):
        z = mpfr(0)
        return cls([[z] * cols for _ in range(rows)])

    @classmethod
    def identity(cls, n):
        z, one = mpfr(0), mpfr(1)
        return cls(
            [[one if i == j else z for j in range(n)] for i in range(n)],
            symmetric=True,
            diagonal=True,
        )

    @classmethod
    def from_rows(cls, rows, **flags):
        data = [[x if isinstance(x, (mpfr, mpc)) else mpfr(x) for x in r] for r in rows]
        return cls(data, **flags)

    def __getitem__(self, ij):
        i, j = ij
        return self.data[i][j]

    def row(self, i):
        return list(self.data[i])

    def col(self, j):
        return [r[j] for r in self.data]

    def transpose(self):
        return HpMatrix(
            [[self.data[i][j] for i in range(self.rows)] for j in range(self.cols)],
            symmetric=self.symmetric,
            diagonal=self.diagonal,
        )

    def matmul(self, other):
        if self.cols != other.rows:
            raise ValueError("shape mismatch")
        bt = [other.col(j) for j in range(other.cols)]
        out = []
        for i in range(self.rows):
            ai = self.data[i]
            out.append([_dot(ai, bj) for bj in bt])
        return HpMatrix(out)

    def matvec(self, v):
        return [_dot(r, v) for r in self.data]

    def max_abs(self):
        m = mpfr(0)
        for r in self.data:
            for x in r:
                a = abs(x)
                if a > m:
                    m = a
        return m

    def to_float_rows(self):
        return [[float(x) for x in r] for r in self.data]

    def __repr__(self):
        return "HpMatrix(%dx%d)" % (self.rows, self.cols)


def _dot(a, b):
    s = a[0] * b[0]
    for k in range(1, len(a)):
        s += a[k] * b[k]
    return s


def cholesky(m):
    """Lower-triangular L with L L^T = m for symmetric positive definite m.

    Raises NotPositiveDefinite on a nonpositive pivot, which in this
    package signals degenerate expansion weights or too few mantissa bits
    for the Gramian's condition number.
    """
    n = m.rows
    if m.cols != n:
        raise ValueError("cholesky needs a square matrix")
    a = m.data
    zero = mpfr(0)
    L = [[zero] * n for _ in range(n)]
    for i in range(n):
        Li = L[i]
        ai = a[i]
        for j in range(i + 1):
            Lj = L[j]
            s = ai[j]
            for k in range(j):
                s -= Li[k] * Lj[k]
            if i == j:
                if s <= 0:
                    raise NotPositiveDefinite(i, s)
                Li[j] = gmpy2.sqrt(s)
            else:
                Li[j] = s / Lj[j]
    return HpMatrix(L)


def pivoted_cholesky(m, rel_floor):
    """Partial Cholesky with diagonal pivoting: m ~ S S^T with S n-by-r.

    Stops once the largest remaining diagonal falls below rel_floor times
    the initial maximum, returning the rank-revealed factor. The residual
    is positive semidefinite with trace below n * rel_floor * max_diag.
    Raises NotPositiveDefinite if a selected pivot is nonpositive.
    """
    n = m.rows
    d = [m.data[i][i] for i in range(n)]
    d0 = max(d) if d else mpfr(0)
    if d0 <= 0:
        raise NotPositiveDefinite(0, d0)
    floor = rel_floor * d0
    cols = []
    for _ in range(n):
        p = max(range(n), key=lambda i: d[i])
        if d[p] <= floor:
            break
        if d[p] <= 0:
            raise NotPositiveDefinite(p, d[p])
        col = [m.data[i][p] for i in range(n)]
        for s in cols:
            sp = s[p]
            if sp == 0:
                continue
            for i in range(n):
                col[i] -= s[i] * sp
        piv = gmpy2.sqrt(d[p])
        col = [x / piv for x in col]
        col[p] = piv
        for i in range(n):
            d[i] -= col[i] * col[i]
        d[p] = mpfr(0)
        cols.append(col)
    return HpMatrix([[cols[k][i] for k in range(len(cols))] for i in range(n)])


def lyapunov_diag(a_diag, b, c):
    """Gramians of a diagonal stable system, solved entrywise.

    For A = diag(a) with a_i < 0, the solutions of A P + P A^T = -b b^T
    and A^T Q + Q A = -c^T c are P_ij = b_i b_j / (-a_i - a_j) and
    Q_ij = c_i c_j / (-a_i - a_j).
    """
    n = len(a_diag)
    if len(b) != n or len(c) != n:
        raise ValueError("length mismatch")
    a = [mpfr(x) for x in a_diag]
    for x in a:
        if x >= 0:
            raise ValueError("a_diag entries must be strictly negative")
    P = []
    Q = []
    for i in range(n):
        Pi = []
        Qi = []
        ai = a[i]
        bi = b[i]
        ci = c[i]
        for j in range(n):
            d = -ai - a[j]
            if d == 0:
                raise ZeroExponentPair("a[%d] + a[%d] == 0" % (i, j))
            Pi.append(bi * b[j] / d)
            Qi.append(ci * c[j] / d)
        P.append(Pi)
        Q.append(Qi)
    return HpMatrix(P, symmetric=True), HpMatrix(Q, symmetric=True)


def svd(m, max_sweeps=60):
    """One-sided Jacobi SVD: m = U diag(sigma) V^T, sigma descending.

    Square or tall real input. Convergence is declared when every column
    pair is numerically orthogonal at working precision.
    """
    nrow = m.rows
    n = m.cols
    if nrow < n:
        U, s, V = svd(m.transpose(), max_sweeps)
        return V, s, U
    cols = [[m.data[i][j] for i in range(nrow)] for j in range(n)]
    one, zero = mpfr(1), mpfr(0)
    V = [[one if i == j else zero for i in range(n)] for j in range(n)]
    tol = mpfr(2) ** (8 - gmpy2.get_context().precision)
    sq = [_dot(cj, cj) for cj in cols]
    converged = False
    for _ in range(max_sweeps):
        rotated = False
        for p in range(n - 1):
            cp = cols[p]
            vp = V[p]
            for q in range(p + 1, n):
                cq = cols[q]
                app = sq[p]
                aqq = sq[q]
                apq = _dot(cp, cq)
                if app == 0 or aqq == 0:
                    continue
                if abs(apq) <= tol * gmpy2.sqrt(app * aqq):
                    continue
                rotated = True
                tau = (aqq - app) / (2 * apq)
                t = (one if tau >= 0 else -one) / (
                    abs(tau) + gmpy2.sqrt(1 + tau * tau)
                )
                cth = 1 / gmpy2.sqrt(1 + t * t)
                sth = cth * t
                for i in range(nrow):
                    x = cp[i]
                    y = cq[i]
                    cp[i] = cth * x - sth * y
                    cq[i] = sth * x + cth * y
                vq = V[q]
                for i in range(n):
                    x = vp[i]
                    y = vq[i]
                    vp[i] = cth * x - sth * y
                    vq[i] = sth * x + cth * y
                sq[p] = app - t * apq
                sq[q] = aqq + t * apq
        sq = [_dot(cj, cj) for cj in cols]
        if not rotated:
            converged = True
            break
    if not converged:
        raise NoConvergence("jacobi svd: %d sweeps exhausted" % max_sweeps)
    sig = [gmpy2.sqrt(s) for s in sq]
    order = sorted(range(n), key=lambda j: sig[j], reverse=True)
    sigma = [sig[j] for j in order]
    Umat = [
        [(cols[j][i] / sig[j]) if sig[j] > 0 else zero for j in order]
        for i in range(nrow)
    ]
    Vmat = [[V[j][i] for j in order] for i in range(n)]
    return HpMatrix(Umat), sigma, HpMatrix(Vmat)


def solve(m, rhs):
    """Gaussian elimination with partial pivoting; rhs is a column list."""
    n = m.rows
    a = [list(r) for r in m.data]
    x = list(rhs)
    for i in range(n):
        piv = max(range(i, n), key=lambda r: abs(a[r][i]))
        if abs(a[piv][i]) == 0:
            raise ZeroDivisionError("singular system")
        if piv != i:
            a[i], a[piv] = a[piv], a[i]
            x[i], x[piv] = x[piv], x[i]
        ai = a[i]
        inv = 1 / ai[i]
        for r in range(i + 1, n):
            ar = a[r]
            f = ar[i] * inv
            if f == 0:
                continue
            for k in range(i + 1, n):
                ar[k] -= f * ai[k]
            x[r] -= f * x[i]
    for i in range(n - 1, -1, -1):
        s = x[i]
        ai = a[i]
        for k in range(i + 1, n):
            s -= ai[k] * x[k]
        x[i] = s / ai[i]
    return x


def _householder_hessenberg(a, n):
    """In-place reduction to upper Hessenberg form (complex entries).

    Returns the accumulated unitary similarity Zh with A = Zh H Zh^H.
    """
    one = mpfr(1)
    Zh = [[mpc(one if i == j else 0) for j in range(n)] for i in range(n)]
    for k in range(n - 2):
        # build reflector for column k below the subdiagonal
        scale = mpfr(0)
        for i in range(k + 1, n):
            scale += abs(a[i][k].real) + abs(a[i][k].imag)
        if scale == 0:
            continue
        v = [a[i][k] / scale for i in range(k + 1, n)]
        alpha = gmpy2.sqrt(sum(gmpy2.norm(x) for x in v))
        if alpha == 0:
            continue
        x0 = v[0]
        if x0 != 0:
            phase = x0 / abs(x0)
        else:
            phase = mpc(1)
        v[0] += phase * alpha
        vnorm2 = sum(gmpy2.norm(x) for x in v)
        if vnorm2 == 0:
            continue
        # apply P = I - 2 v v^H / |v|^2 from both sides
        m = n - k - 1
        for j in range(k, n):
            s = mpc(0)
            for i in range(m):
                s += v[i].conjugate() * a[k + 1 + i][j]
            s = 2 * s / vnorm2
            for i in range(m):
                a[k + 1 + i][j] -= s * v[i]
        vbar = [x.conjugate() for x in v]
        for i in range(n):
            ai = a[i]
            s = mpc(0)
            for j in range(m):
                s += ai[k + 1 + j] * v[j]
            s = 2 * s / vnorm2
            for j in range(m):
                ai[k + 1 + j] -= s * vbar[j]
        for i in range(n):
            zi = Zh[i]
            s = mpc(0)
            for j in range(m):
                s += zi[k + 1 + j] * v[j]
            s = 2 * s / vnorm2
            for j in range(m):
                zi[k + 1 + j] -= s * vbar[j]
    for i in range(2, n):
        for j in range(i - 1):
            a[i][j] = mpc(0)
    return Zh


def _qr_hessenberg(a, n, Z, max_iter_per_eig=80):
    """Explicit shifted QR on an upper Hessenberg matrix (Givens based).

    Per step: subtract the Wilkinson shift, factor with a left sweep of
    Givens rotations, multiply back on the right, restore the shift.
    Extends the incoming unitary accumulator Z so that the final
    triangular factor T = Z^H A Z supports eigenvector back-substitution.
    """
    one = mpfr(1)
    tol = mpfr(2) ** (4 - gmpy2.get_context().precision)
    hi = n - 1
    iters = 0
    while hi > 0:
        # deflate: active block [lo, hi] ends at the first tiny subdiagonal
        k = hi
        while k > 0:
            denom = abs(a[k - 1][k - 1]) + abs(a[k][k])
            if denom == 0:
                denom = mpfr(1)
            if abs(a[k][k - 1]) <= tol * denom:
                a[k][k - 1] = mpc(0)
                break
            k -= 1
        if k == hi:
            hi -= 1
            iters = 0
            continue
        lo = k
        iters += 1
        if iters > max_iter_per_eig:
            raise NoConvergence("qr iteration stalled at block %d..%d" % (lo, hi))
        # Wilkinson shift: trailing 2x2 eigenvalue closest to a[hi][hi]
        h00 = a[hi - 1][hi - 1]
        h01 = a[hi - 1][hi]
        h10 = a[hi][hi - 1]
        h11 = a[hi][hi]
        tr = h00 + h11
        det = h00 * h11 - h01 * h10
        disc = gmpy2.sqrt(tr * tr - 4 * det)
        m1 = (tr + disc) / 2
        m2 = (tr - disc) / 2
        mu = m1 if abs(m1 - h11) < abs(m2 - h11) else m2
        if iters % 15 == 0:
            mu = mu + abs(a[hi][hi - 1]) * mpfr("0.73519")
        for i in range(lo, hi + 1):
            a[i][i] -= mu
        rots = []
        for i in range(lo, hi):
            x = a[i][i]
            y = a[i + 1][i]
            rho = gmpy2.sqrt(gmpy2.norm(x) + gmpy2.norm(y))
            if rho == 0:
                c, s = one, mpc(0)
            elif abs(x) == 0:
                c, s = mpfr(0), y / abs(y)
            else:
                c = abs(x) / rho
                s = (abs(x) / x) * (y / rho)
            rots.append((c, s))
            sbar = s.conjugate()
            ri = a[i]
            rj = a[i + 1]
            for col in range(i, n):
                x1 = ri[col]
                x2 = rj[col]
                ri[col] = c * x1 + sbar * x2
                rj[col] = c * x2 - s * x1
        for idx, (c, s) in enumerate(rots):
            i = lo + idx
            sbar = s.conjugate()
            top = min(i + 1, hi)
            for row in range(0, top + 1):
                ar = a[row]
                x1 = ar[i]
                x2 = ar[i + 1]
                ar[i] = c * x1 + s * x2
                ar[i + 1] = c * x2 - sbar * x1
            for row in range(n):
                zr = Z[row]
                x1 = zr[i]
                x2 = zr[i + 1]
                zr[i] = c * x1 + s * x2
                zr[i + 1] = c * x2 - sbar * x1
        for i in range(lo, hi + 1):
            a[i][i] += mu
    return Z


def _eigvecs_from_schur(t, z, n):
    """Right eigenvectors of the original matrix from T (upper triangular)."""
    tol_small = mpfr(2) ** (-gmpy2.get_context().precision // 2)
    vecs = []
    for k in range(n):
        lam = t[k][k]
        y = [mpc(0)] * n
        y[k] = mpc(1)
        for i in range(k - 1, -1, -1):
            s = mpc(0)
            for j in range(i + 1, k + 1):
                s += t[i][j] * y[j]
            d = t[i][i] - lam
            if abs(d) == 0:
                d = mpc(tol_small)
            y[i] = -s / d
        # back to original basis
        v = []
        for row in range(n):
            zr = z[row]
            s = mpc(0)
            for j in range(k + 1):
                s += zr[j] * y[j]
            v.append(s)
        nv = gmpy2.sqrt(sum(gmpy2.norm(x) for x in v))
        vecs.append([x / nv for x in v])
    return vecs


def eig(m, residual_check=True):
    """Eigendecomposition m X = X diag(values) for a square matrix.

    Householder reduction to Hessenberg form followed by shifted QR with
    accumulated transforms; eigenvectors by triangular back-substitution.
    Returns (values, X) with X an HpMatrix whose columns are eigenvectors.
    """
    n = m.rows
    if m.cols != n:
        raise ValueError("eig needs a square matrix")
    if n == 0:
        return [], HpMatrix([[]])
    a = [[mpc(x) for x in row] for row in m.data]
    if n == 1:
        return [a[0][0]], HpMatrix([[mpc(1)]])
    Z = _householder_hessenberg(a, n)
    Z = _qr_hessenberg(a, n, Z)
    values = [a[k][k] for k in range(n)]
    vecs = _eigvecs_from_schur(a, Z, n)
    X = HpMatrix([[vecs[k][i] for k in range(n)] for i in range(n)])
    if residual_check:
        scale = m.max_abs()
        if scale > 0:
            worst = mpfr(0)
            mx = [m.matvec(X.col(k)) for k in range(n)]
            for k in range(n):
                vk = X.col(k)
                for i in range(n):
                    r = abs(mx[k][i] - values[k] * vk[i])
                    if r > worst:
                        worst = r
            bound = scale * n * (mpfr(2) ** (24 - gmpy2.get_context().precision))
            if worst > max(bound, mpfr("1e-20") * scale):
                raise DefectiveMatrix(
                    "eigen residual %.3e above tolerance %.3e"
                    % (float(worst), float(max(bound, mpfr("1e-20") * scale)))
                )
    return values, X

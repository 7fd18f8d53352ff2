"""Geometry of St(3, 2): tangent projection, exponential map and its derivative.

Single-matrix functions take and return plain ``(3, 2)`` arrays. The
``batch_*`` functions act on stacks of shape ``(n, 3, 2)`` and are what the
assembly code calls once per cell; they run either as numba loops or as
vectorized numpy depending on :data:`isoplate._accel.USE_NUMBA`.
"""

from math import factorial

import numpy as np

from ._accel import USE_NUMBA, njit

__all__ = [
    "StiefelPoint",
    "StiefelError",
    "STIEFEL_TOL",
    "tangent_project",
    "sym_bracket",
    "matrix_exp",
    "expm_frechet",
    "exp_map",
    "dexp_map",
    "is_stiefel",
    "batch_tangent_project",
    "batch_sym_bracket",
    "batch_exp_map",
    "batch_dexp_jacobian",
    "batch_matrix_exp",
    "random_stiefel",
    "property_suite",
]

STIEFEL_TOL = 1e-10

# Diagonal [6/6] Pade coefficients of exp.
_PADE6 = np.array(
    [
        factorial(12 - j) * factorial(6) / (factorial(12) * factorial(j) * factorial(6 - j))
        for j in range(7)
    ]
)
# Scale until the 1-norm is below this. Higham's backward-error bound for m=6
# is ~0.54; staying under 0.5 keeps the truncation error far below rounding.
_THETA6 = 0.5


class StiefelError(ValueError):
    """Raised when a matrix is not on St(3, 2) to the validation tolerance."""


def is_stiefel(U, tol=STIEFEL_TOL) -> bool:
    U = np.asarray(U, dtype=float)
    if U.shape != (3, 2) or not np.all(np.isfinite(U)):
        return False
    return bool(np.abs(U.T @ U - np.eye(2)).max() <= tol)


class StiefelPoint:
    """A 3x2 matrix with orthonormal columns.

    Construction validates ``U^T U = I`` to ``tol`` and raises
    :class:`StiefelError` otherwise. Nothing is re-orthonormalized.
    """

    __slots__ = ("entries",)

    def __init__(self, entries, tol=STIEFEL_TOL):
        U = np.array(entries, dtype=float)
        if U.shape != (3, 2):
            raise StiefelError(f"expected a 3x2 matrix, got shape {U.shape}")
        if not np.all(np.isfinite(U)):
            raise StiefelError("non-finite entries")
        defect = np.abs(U.T @ U - np.eye(2)).max()
        if defect > tol:
            raise StiefelError(f"|U^T U - I| = {defect:.3e} exceeds {tol:.1e}")
        U.setflags(write=False)
        self.entries = U

    @classmethod
    def canonical(cls):
        return cls(np.eye(3, 2))

    def __array__(self, dtype=None, copy=None):
        return self.entries if dtype is None else self.entries.astype(dtype)

    def __repr__(self):
        return f"StiefelPoint({self.entries.tolist()})"


# ---------------------------------------------------------------------------
# scalar kernels (numba-compilable; also callable as plain python)


@njit
def _mm(A, B):
    n, m = A.shape
    p = B.shape[1]
    C = np.zeros((n, p))
    for i in range(n):
        for k in range(m):
            a = A[i, k]
            if a != 0.0:
                for j in range(p):
                    C[i, j] += a * B[k, j]
    return C


@njit
def _mmt(A, B):
    # A @ B.T
    n, m = A.shape
    p = B.shape[0]
    C = np.zeros((n, p))
    for i in range(n):
        for j in range(p):
            acc = 0.0
            for k in range(m):
                acc += A[i, k] * B[j, k]
            C[i, j] = acc
    return C


@njit
def _mtm(A, B):
    # A.T @ B
    m, n = A.shape
    p = B.shape[1]
    C = np.zeros((n, p))
    for i in range(n):
        for j in range(p):
            acc = 0.0
            for k in range(m):
                acc += A[k, i] * B[k, j]
            C[i, j] = acc
    return C


@njit
def _solve(M, R):
    # Gaussian elimination with partial pivoting, M and R overwritten
    n = M.shape[0]
    p = R.shape[1]
    for c in range(n):
        piv = c
        big = abs(M[c, c])
        for r in range(c + 1, n):
            if abs(M[r, c]) > big:
                big = abs(M[r, c])
                piv = r
        if piv != c:
            for j in range(n):
                tmp = M[c, j]
                M[c, j] = M[piv, j]
                M[piv, j] = tmp
            for j in range(p):
                tmp = R[c, j]
                R[c, j] = R[piv, j]
                R[piv, j] = tmp
        inv = 1.0 / M[c, c]
        for r in range(c + 1, n):
            f = M[r, c] * inv
            if f != 0.0:
                for j in range(c + 1, n):
                    M[r, j] -= f * M[c, j]
                for j in range(p):
                    R[r, j] -= f * R[c, j]
    for c in range(n - 1, -1, -1):
        inv = 1.0 / M[c, c]
        for j in range(p):
            acc = R[c, j]
            for k in range(c + 1, n):
                acc -= M[c, k] * R[k, j]
            R[c, j] = acc * inv
    return R


@njit
def _expm_pade(X):
    n = X.shape[0]
    norm = 0.0
    for j in range(n):
        col = 0.0
        for i in range(n):
            col += abs(X[i, j])
        norm = max(norm, col)
    s = 0
    while norm > _THETA6:
        norm *= 0.5
        s += 1
    Xs = X * (0.5**s)
    X2 = _mm(Xs, Xs)
    X4 = _mm(X2, X2)
    X6 = _mm(X4, X2)
    c = _PADE6
    odd = _mm(Xs, c[3] * X2 + c[5] * X4)
    even = c[2] * X2 + c[4] * X4 + c[6] * X6
    for i in range(n):
        even[i, i] += c[0]
    odd += c[1] * Xs
    F = _solve(even - odd, even + odd)
    for _ in range(s):
        F = _mm(F, F)
    return F


@njit
def _expm_skew3(X):
    # Rodrigues: exp([k]x) = I + a K + b K^2
    k1 = X[2, 1]
    k2 = X[0, 2]
    k3 = X[1, 0]
    th2 = k1 * k1 + k2 * k2 + k3 * k3
    th = np.sqrt(th2)
    if th < 1e-3:
        a = 1.0 - th2 / 6.0 + th2 * th2 / 120.0
        b = 0.5 - th2 / 24.0 + th2 * th2 / 720.0
    else:
        a = np.sin(th) / th
        sh = np.sin(0.5 * th)
        b = 2.0 * sh * sh / th2
    out = a * X + b * _mm(X, X)
    for i in range(3):
        out[i, i] += 1.0
    return out


@njit
def _expm_skew2(X):
    th = X[0, 1]
    c = np.cos(th)
    s = np.sin(th)
    out = np.empty((2, 2))
    out[0, 0] = c
    out[0, 1] = s
    out[1, 0] = -s
    out[1, 1] = c
    return out


@njit
def _is_exact_skew(X):
    n = X.shape[0]
    for i in range(n):
        for j in range(i, n):
            if X[i, j] + X[j, i] != 0.0:
                return False
    return True


@njit
def _expm(X):
    n = X.shape[0]
    if n == 3 and _is_exact_skew(X):
        return _expm_skew3(X)
    if n == 2 and _is_exact_skew(X):
        return _expm_skew2(X)
    return _expm_pade(X)


@njit
def _expm_frechet(X, D):
    # exp([[X, D], [0, X]]) = [[exp X, L(X, D)], [0, exp X]]
    n = X.shape[0]
    big = np.zeros((2 * n, 2 * n))
    big[:n, :n] = X
    big[n:, n:] = X
    big[:n, n:] = D
    F = _expm_pade(big)
    return F[:n, :n].copy(), F[:n, n:].copy()


@njit
def _generators(U, W, tau):
    A = tau * (_mmt(W, U) - _mmt(U, W))
    E = -tau * _mtm(U, W)
    return A, E


@njit
def _exp_map(U, W, tau):
    A, E = _generators(U, W, tau)
    return _mm(_mm(_expm(A), U), _expm(E))


@njit
def _dexp_dir(U, A, E, eA, eE, G, tau):
    dA, dE = _generators(U, G, tau)
    LA = _expm_frechet(A, dA)[1]
    LE = _expm_frechet(E, dE)[1]
    return _mm(_mm(LA, U), eE) + _mm(_mm(eA, U), LE)


@njit
def _dexp_map(U, W, tau, G):
    A, E = _generators(U, W, tau)
    return _dexp_dir(U, A, E, _expm_pade(A), _expm_pade(E), G, tau)


@njit
def _dexp_jacobian(U, W, tau):
    # column j = vec(dExp[e_j]) with e_j the row-major unit 3x2 matrices
    A, E = _generators(U, W, tau)
    eA = _expm_pade(A)
    eE = _expm_pade(E)
    J = np.empty((6, 6))
    for j in range(6):
        G = np.zeros((3, 2))
        G[j // 2, j % 2] = 1.0
        D = _dexp_dir(U, A, E, eA, eE, G, tau)
        for i in range(6):
            J[i, j] = D[i // 2, i % 2]
    return J


# ---------------------------------------------------------------------------
# allocation-free batch kernels. The scalar kernels above allocate a fresh
# array per product, which dominates the cost for 3x3 inputs; the batch loops
# below write into work buffers allocated once per call.


@njit
def _mm_into(A, B, C):
    # C = A @ B, C must not alias A or B
    n, m = A.shape
    p = B.shape[1]
    for i in range(n):
        for j in range(p):
            acc = 0.0
            for k in range(m):
                acc += A[i, k] * B[k, j]
            C[i, j] = acc


@njit
def _add_into(A, B, C):
    for i in range(A.shape[0]):
        for j in range(A.shape[1]):
            C[i, j] = A[i, j] + B[i, j]


@njit
def _lu_inplace(Q, piv):
    n = Q.shape[0]
    for c in range(n):
        p = c
        big = abs(Q[c, c])
        for r in range(c + 1, n):
            if abs(Q[r, c]) > big:
                big = abs(Q[r, c])
                p = r
        piv[c] = p
        if p != c:
            for j in range(n):
                tmp = Q[c, j]
                Q[c, j] = Q[p, j]
                Q[p, j] = tmp
        for r in range(c + 1, n):
            Q[r, c] /= Q[c, c]
            f = Q[r, c]
            for j in range(c + 1, n):
                Q[r, j] -= f * Q[c, j]


@njit
def _lu_solve_inplace(Q, piv, B):
    n = Q.shape[0]
    p = B.shape[1]
    for c in range(n):
        if piv[c] != c:
            for j in range(p):
                tmp = B[c, j]
                B[c, j] = B[piv[c], j]
                B[piv[c], j] = tmp
    for c in range(n):
        for r in range(c + 1, n):
            f = Q[r, c]
            for j in range(p):
                B[r, j] -= f * B[c, j]
    for c in range(n - 1, -1, -1):
        for j in range(p):
            acc = B[c, j]
            for k in range(c + 1, n):
                acc -= Q[c, k] * B[k, j]
            B[c, j] = acc / Q[c, c]


@njit
def _pade_setup(X, wk, piv):
    # wk[0..3] = Xs, Xs^2, Xs^4, Xs^6; wk[4] = odd inner factor; wk[5] = LU of
    # the denominator; wk[6] = r(Xs). Returns the number of squarings.
    n = X.shape[0]
    c = _PADE6
    norm = 0.0
    for j in range(n):
        col = 0.0
        for i in range(n):
            col += abs(X[i, j])
        norm = max(norm, col)
    s = 0
    while norm > _THETA6:
        norm *= 0.5
        s += 1
    sc = 0.5**s
    Xs, X2, X4, X6, inner, Q, R, T = wk[0], wk[1], wk[2], wk[3], wk[4], wk[5], wk[6], wk[7]
    for i in range(n):
        for j in range(n):
            Xs[i, j] = X[i, j] * sc
    _mm_into(Xs, Xs, X2)
    _mm_into(X2, X2, X4)
    _mm_into(X4, X2, X6)
    for i in range(n):
        for j in range(n):
            inner[i, j] = c[3] * X2[i, j] + c[5] * X4[i, j]
        inner[i, i] += c[1]
    _mm_into(Xs, inner, T)
    for i in range(n):
        for j in range(n):
            ev = c[2] * X2[i, j] + c[4] * X4[i, j] + c[6] * X6[i, j]
            if i == j:
                ev += c[0]
            Q[i, j] = ev - T[i, j]
            R[i, j] = ev + T[i, j]
    _lu_inplace(Q, piv)
    _lu_solve_inplace(Q, piv, R)
    return s


@njit
def _expm_into(X, F, wk, piv):
    n = X.shape[0]
    if n == 3 and _is_exact_skew(X):
        k1 = X[2, 1]
        k2 = X[0, 2]
        k3 = X[1, 0]
        th2 = k1 * k1 + k2 * k2 + k3 * k3
        th = np.sqrt(th2)
        if th < 1e-3:
            a = 1.0 - th2 / 6.0 + th2 * th2 / 120.0
            b = 0.5 - th2 / 24.0 + th2 * th2 / 720.0
        else:
            a = np.sin(th) / th
            sh = np.sin(0.5 * th)
            b = 2.0 * sh * sh / th2
        X2 = wk[1]
        _mm_into(X, X, X2)
        for i in range(3):
            for j in range(3):
                F[i, j] = a * X[i, j] + b * X2[i, j]
            F[i, i] += 1.0
        return
    if n == 2 and _is_exact_skew(X):
        c = np.cos(X[0, 1])
        sn = np.sin(X[0, 1])
        F[0, 0] = c
        F[0, 1] = sn
        F[1, 0] = -sn
        F[1, 1] = c
        return
    s = _pade_setup(X, wk, piv)
    R, T = wk[6], wk[7]
    for _ in range(s):
        _mm_into(R, R, T)
        R[:, :] = T
    F[:, :] = R


@njit
def _frechet_many_into(X, D, F, L, wk, piv):
    # F = exp(X), L[d] = L(X, D[d]). Powers, denominator LU and squarings are
    # shared; each direction carries the differentiated recurrences only.
    # Scaling depends on X alone.
    n = X.shape[0]
    c = _PADE6
    s = _pade_setup(X, wk, piv)
    sc = 0.5**s
    Xs, X2, X4, inner, Q, R = wk[0], wk[1], wk[2], wk[4], wk[5], wk[6]
    Ds, M2, M4, M6, T1, T2 = wk[8], wk[9], wk[10], wk[11], wk[12], wk[13]
    for d in range(D.shape[0]):
        for i in range(n):
            for j in range(n):
                Ds[i, j] = D[d, i, j] * sc
        _mm_into(Xs, Ds, T1)
        _mm_into(Ds, Xs, T2)
        _add_into(T1, T2, M2)
        _mm_into(X2, M2, T1)
        _mm_into(M2, X2, T2)
        _add_into(T1, T2, M4)
        _mm_into(X4, M2, T1)
        _mm_into(M4, X2, T2)
        _add_into(T1, T2, M6)
        # LU_ = Ds inner + Xs (c3 M2 + c5 M4), LV = c2 M2 + c4 M4 + c6 M6
        for i in range(n):
            for j in range(n):
                T2[i, j] = c[3] * M2[i, j] + c[5] * M4[i, j]
        _mm_into(Xs, T2, T1)
        _mm_into(Ds, inner, T2)
        Ld = L[d]
        for i in range(n):
            for j in range(n):
                lu = T1[i, j] + T2[i, j]
                lv = c[2] * M2[i, j] + c[4] * M4[i, j] + c[6] * M6[i, j]
                Ld[i, j] = lv + lu  # L_p
                M6[i, j] = lv - lu  # L_q, M6 no longer needed
        # q L_r = L_p - L_q r
        _mm_into(M6, R, T1)
        for i in range(n):
            for j in range(n):
                Ld[i, j] -= T1[i, j]
        _lu_solve_inplace(Q, piv, Ld)
    for _ in range(s):
        for d in range(D.shape[0]):
            _mm_into(R, L[d], T1)
            _mm_into(L[d], R, T2)
            _add_into(T1, T2, L[d])
        _mm_into(R, R, T1)
        R[:, :] = T1
    F[:, :] = R


@njit
def _generators_into(U, W, tau, A, E):
    for p in range(3):
        for q in range(3):
            A[p, q] = W[p, 0] * U[q, 0] + W[p, 1] * U[q, 1]
    for p in range(3):
        for q in range(p, 3):
            a = tau * (A[p, q] - A[q, p])
            A[p, q] = a
            A[q, p] = -a
    for p in range(2):
        for q in range(2):
            E[p, q] = -tau * (U[0, p] * W[0, q] + U[1, p] * W[1, q] + U[2, p] * W[2, q])


@njit
def _batch_exp_map_nb(U, W, tau):
    n = U.shape[0]
    out = np.empty((n, 3, 2))
    wk3 = np.empty((8, 3, 3))
    wk2 = np.empty((8, 2, 2))
    piv = np.empty(3, dtype=np.int64)
    A = np.empty((3, 3))
    E = np.empty((2, 2))
    eA = np.empty((3, 3))
    eE = np.empty((2, 2))
    T = np.empty((3, 2))
    for t in range(n):
        _generators_into(U[t], W[t], tau, A, E)
        _expm_into(A, eA, wk3, piv)
        _expm_into(E, eE, wk2, piv)
        _mm_into(eA, U[t], T)
        _mm_into(T, eE, out[t])
    return out


@njit
def _batch_dexp_jacobian_nb(U, W, tau):
    n = U.shape[0]
    out = np.empty((n, 6, 6))
    wk3 = np.empty((14, 3, 3))
    wk2 = np.empty((14, 2, 2))
    piv = np.empty(3, dtype=np.int64)
    A = np.empty((3, 3))
    E = np.empty((2, 2))
    eA = np.empty((3, 3))
    eE = np.empty((2, 2))
    dA = np.empty((6, 3, 3))
    dE = np.empty((6, 2, 2))
    LA = np.empty((6, 3, 3))
    LE = np.empty((6, 2, 2))
    eAU = np.empty((3, 2))
    UeE = np.empty((3, 2))
    T1 = np.empty((3, 2))
    T2 = np.empty((3, 2))
    for t in range(n):
        Ut = U[t]
        _generators_into(Ut, W[t], tau, A, E)
        # generators of the unit directions e_j, j = 2 r + c
        dA[:] = 0.0
        dE[:] = 0.0
        for j in range(6):
            r = j // 2
            c = j % 2
            for q in range(3):
                dA[j, r, q] += tau * Ut[q, c]
                dA[j, q, r] -= tau * Ut[q, c]
            for p in range(2):
                dE[j, p, c] = -tau * Ut[r, p]
        _frechet_many_into(A, dA, eA, LA, wk3, piv)
        _frechet_many_into(E, dE, eE, LE, wk2, piv)
        _mm_into(eA, Ut, eAU)
        _mm_into(Ut, eE, UeE)
        for j in range(6):
            _mm_into(LA[j], UeE, T1)
            _mm_into(eAU, LE[j], T2)
            for i in range(6):
                out[t, i, j] = T1[i // 2, i % 2] + T2[i // 2, i % 2]
    return out


# ---------------------------------------------------------------------------
# single-matrix API


def _as32(M):
    if isinstance(M, StiefelPoint):
        return M.entries
    return np.asarray(M, dtype=float)


def tangent_project(U, W):
    """Orthogonal projection of ``W`` onto the tangent space at ``U``.

    Returns ``W - U sym(U^T W)``.
    """
    U, W = _as32(U), _as32(W)
    S = U.T @ W
    return W - U @ (0.5 * (S + S.T))


def sym_bracket(U, M):
    """``U^T M + M^T U`` (symmetric 2x2); zero iff ``M`` is tangent at ``U``."""
    U, M = _as32(U), _as32(M)
    S = U.T @ M
    return S + S.T


def matrix_exp(X):
    """Matrix exponential of a small square matrix.

    Exactly skew-symmetric 2x2 and 3x3 inputs use the closed-form rotation;
    anything else goes through scaling and squaring with a [6/6] Pade
    approximant.
    """
    X = np.ascontiguousarray(X, dtype=float)
    if X.ndim != 2 or X.shape[0] != X.shape[1]:
        raise ValueError(f"matrix_exp needs a square matrix, got shape {X.shape}")
    if USE_NUMBA:
        return _expm(X)
    return batch_matrix_exp(X[None])[0]


def expm_frechet(X, D):
    """Return ``(exp(X), L(X, D))`` with ``L`` the Frechet derivative of exp."""
    X = np.ascontiguousarray(X, dtype=float)
    D = np.ascontiguousarray(D, dtype=float)
    if USE_NUMBA:
        return _expm_frechet(X, D)
    eX, L = _np_frechet(X[None], D[None])
    return eX[0], L[0]


def exp_map(U, W, tau=1.0):
    """Stiefel exponential ``exp(t(W U^T - U W^T)) U exp(-t U^T W)``.

    ``W`` need not be tangent at ``U``; the formula is evaluated as is. Only
    tangent ``W`` is guaranteed to land back on the manifold.
    """
    U = np.ascontiguousarray(_as32(U))
    W = np.ascontiguousarray(_as32(W))
    if USE_NUMBA:
        return _exp_map(U, W, float(tau))
    return _np_batch_exp_map(U[None], W[None], float(tau))[0]


def dexp_map(U, W, tau, G):
    """Directional derivative of ``mu -> exp_map(U, mu, tau)`` at ``W`` along ``G``."""
    U = np.ascontiguousarray(_as32(U))
    W = np.ascontiguousarray(_as32(W))
    G = np.ascontiguousarray(_as32(G))
    if USE_NUMBA:
        return _dexp_map(U, W, float(tau), G)
    J = _np_batch_dexp_jacobian(U[None], W[None], float(tau))[0]
    return (J @ G.ravel()).reshape(3, 2)


# ---------------------------------------------------------------------------
# batched versions, one matrix per mesh cell


def batch_tangent_project(U, W):
    S = np.einsum("nki,nkj->nij", U, W)
    return W - np.einsum("nik,nkj->nij", U, 0.5 * (S + S.transpose(0, 2, 1)))


def batch_sym_bracket(U, M):
    S = np.einsum("nki,nkj->nij", U, M)
    return S + S.transpose(0, 2, 1)


def _np_expm_pade(X):
    n, k, _ = X.shape
    norms = np.abs(X).sum(axis=1).max(axis=1)
    s = np.zeros(n, dtype=int)
    pos = norms > _THETA6
    s[pos] = np.ceil(np.log2(norms[pos] / _THETA6)).astype(int)
    Xs = X * (0.5 ** s)[:, None, None]
    eye = np.eye(k)
    X2 = Xs @ Xs
    X4 = X2 @ X2
    X6 = X4 @ X2
    c = _PADE6
    odd = Xs @ (c[1] * eye + c[3] * X2 + c[5] * X4)
    even = c[0] * eye + c[2] * X2 + c[4] * X4 + c[6] * X6
    F = np.linalg.solve(even - odd, even + odd)
    for i in range(int(s.max(initial=0))):
        m = s > i
        F[m] = F[m] @ F[m]
    return F


def _np_expm_skew3(X):
    k = np.stack([X[:, 2, 1], X[:, 0, 2], X[:, 1, 0]], axis=1)
    th2 = np.einsum("ni,ni->n", k, k)
    th = np.sqrt(th2)
    small = th < 1e-3
    with np.errstate(divide="ignore", invalid="ignore"):
        a = np.where(small, 1.0 - th2 / 6.0 + th2**2 / 120.0, np.sin(th) / th)
        b = np.where(small, 0.5 - th2 / 24.0 + th2**2 / 720.0, 2.0 * np.sin(0.5 * th) ** 2 / th2)
    return np.eye(3) + a[:, None, None] * X + b[:, None, None] * (X @ X)


def _np_expm_skew2(X):
    th = X[:, 0, 1]
    c, s = np.cos(th), np.sin(th)
    return np.stack([np.stack([c, s], -1), np.stack([-s, c], -1)], 1)


def batch_matrix_exp(X):
    """Exponential of a stack ``(n, k, k)``; same algorithm as :func:`matrix_exp`."""
    X = np.asarray(X, dtype=float)
    k = X.shape[-1]
    out = np.empty_like(X)
    skew = np.all(X + X.transpose(0, 2, 1) == 0.0, axis=(1, 2)) if k in (2, 3) else np.zeros(len(X), bool)
    if skew.any():
        out[skew] = _np_expm_skew3(X[skew]) if k == 3 else _np_expm_skew2(X[skew])
    if (~skew).any():
        out[~skew] = _np_expm_pade(X[~skew])
    return out


def _np_frechet(X, D):
    n, k, _ = X.shape
    big = np.zeros((n, 2 * k, 2 * k))
    big[:, :k, :k] = X
    big[:, k:, k:] = X
    big[:, :k, k:] = D
    F = _np_expm_pade(big)
    return F[:, :k, :k], F[:, :k, k:]


def _np_batch_exp_map(U, W, tau):
    Ut = U.transpose(0, 2, 1)
    A = tau * (W @ Ut - U @ W.transpose(0, 2, 1))
    E = -tau * (Ut @ W)
    return batch_matrix_exp(A) @ U @ batch_matrix_exp(E)


def _np_batch_dexp_jacobian(U, W, tau):
    n = U.shape[0]
    Ut = U.transpose(0, 2, 1)
    A = tau * (W @ Ut - U @ W.transpose(0, 2, 1))
    E = -tau * (Ut @ W)
    J = np.empty((n, 6, 6))
    for j in range(6):
        G = np.zeros((3, 2))
        G[j // 2, j % 2] = 1.0
        dA = tau * (G @ Ut - U @ G.T)
        dE = -tau * (Ut @ G)
        eA, LA = _np_frechet(A, dA)
        eE, LE = _np_frechet(E, dE)
        J[:, :, j] = (LA @ U @ eE + eA @ U @ LE).reshape(n, 6)
    return J


def batch_exp_map(U, W, tau):
    """``exp_map`` over stacks ``U, W`` of shape ``(n, 3, 2)``."""
    U = np.ascontiguousarray(U, dtype=float)
    W = np.ascontiguousarray(W, dtype=float)
    if USE_NUMBA:
        return _batch_exp_map_nb(U, W, float(tau))
    return _np_batch_exp_map(U, W, float(tau))


def batch_dexp_jacobian(U, W, tau):
    """Per-cell 6x6 Jacobians of ``mu -> exp_map(U, mu, tau)`` at ``mu = W``.

    Entry ``[t, i, j]`` is the derivative of row-major entry ``i`` of the output
    with respect to row-major entry ``j`` of ``mu``.
    """
    U = np.ascontiguousarray(U, dtype=float)
    W = np.ascontiguousarray(W, dtype=float)
    if USE_NUMBA:
        return _batch_dexp_jacobian_nb(U, W, float(tau))
    return _np_batch_dexp_jacobian(U, W, float(tau))


# ---------------------------------------------------------------------------
# property suite (also driven by the ``stiefel-check`` command)


def random_stiefel(rng, n=None):
    """Random point(s) of St(3, 2) from the QR factor of a Gaussian matrix."""
    shape = (3, 2) if n is None else (n, 3, 2)
    Q, R = np.linalg.qr(rng.standard_normal(shape))
    d = np.sign(np.diagonal(R, axis1=-2, axis2=-1))
    return Q * d[..., None, :]


def series_exp(X, max_terms=200):
    """Truncated Taylor series of exp, summed until terms drop below rounding."""
    X = np.asarray(X, dtype=float)
    out = np.eye(len(X))
    term = np.eye(len(X))
    for k in range(1, max_terms):
        term = term @ X / k
        out = out + term
        if np.abs(term).max() < 1e-18 * max(1.0, np.abs(out).max()):
            break
    return out


def property_suite(seed: int = 0, samples: int = 100):
    """Run the geometric property checks; returns a list of (name, passed, detail)."""
    rng = np.random.default_rng(seed)
    results = []

    def record(name, worst, bound):
        results.append((name, bool(worst <= bound), f"worst {worst:.2e} (bound {bound:.0e})"))

    Us = random_stiefel(rng, samples)
    Ms = rng.standard_normal((samples, 3, 2))

    worst_tan = worst_idem = 0.0
    for U, M in zip(Us, Ms):
        R = tangent_project(U, M)
        worst_tan = max(worst_tan, np.abs(sym_bracket(U, R)).max())
        worst_idem = max(worst_idem, np.abs(tangent_project(U, R) - R).max())
    record("projection lands in the tangent space", worst_tan, 1e-13)
    record("projection is idempotent", worst_idem, 1e-13)

    worst_orth = 0.0
    for U, M in zip(Us, Ms):
        W = tangent_project(U, M)
        for tau in (0.0, 0.1, 1.0, 10.0):
            V = exp_map(U, W, tau)
            worst_orth = max(worst_orth, np.abs(V.T @ V - np.eye(2)).max())
    record("exp_map stays on St(3,2) for tau in [0, 10]", worst_orth, 1e-12)

    ratios = []
    for U, M in zip(Us[:20], Ms[:20]):
        W = tangent_project(U, M)
        W /= np.linalg.norm(W)

        def defect(t):
            return np.linalg.norm(exp_map(U, W, t) - (U + t * W - 0.5 * t * t * U @ W.T @ W))

        ratios.append(defect(1e-2) / defect(5e-3))
    lo, hi = min(ratios), max(ratios)
    results.append(("third-order Taylor ratio in [6.5, 9.5]", bool(lo >= 6.5 and hi <= 9.5),
                    f"ratios in [{lo:.3f}, {hi:.3f}]"))

    worst_fd = 0.0
    h = 1e-5
    for U in Us:
        W = rng.uniform(-1, 1, (3, 2))
        W *= rng.uniform(0, 2) / np.linalg.norm(W)
        G = rng.uniform(-1, 1, (3, 2))
        G *= rng.uniform(0.1, 2) / np.linalg.norm(G)
        tau = rng.uniform(0.1, 2.0)
        d = dexp_map(U, W, tau, G)
        fd = (exp_map(U, W + h * G, tau) - exp_map(U, W - h * G, tau)) / (2 * h)
        worst_fd = max(worst_fd, np.linalg.norm(d - fd) / max(np.linalg.norm(fd), 1e-300))
    record("dexp_map matches central differences", worst_fd, 1e-6)

    worst_lin = 0.0
    for U in Us[:20]:
        W, G1, G2 = rng.standard_normal((3, 3, 2))
        lhs = dexp_map(U, W, 0.7, G1 + G2)
        worst_lin = max(worst_lin, np.abs(lhs - dexp_map(U, W, 0.7, G1) - dexp_map(U, W, 0.7, G2)).max())
    record("dexp_map is linear in the direction", worst_lin, 1e-12)

    worst_zero = 0.0
    for U, M in zip(Us[:20], Ms[:20]):
        G = tangent_project(U, M)
        worst_zero = max(worst_zero, np.abs(dexp_map(U, np.zeros((3, 2)), 0.3, G) - 0.3 * G).max())
    record("dexp_map at zero is tau times identity on tangents", worst_zero, 1e-13)

    worst_exp = worst_rot = 0.0
    for n in (2, 3, 4, 6):
        for _ in range(samples // 4):
            X = rng.standard_normal((n, n))
            ref = series_exp(X)
            worst_exp = max(worst_exp, np.linalg.norm(matrix_exp(X) - ref) / np.linalg.norm(ref))
            if n <= 3:
                K = X - X.T
                Q = matrix_exp(K)
                worst_rot = max(worst_rot, np.abs(Q.T @ Q - np.eye(n)).max(), abs(np.linalg.det(Q) - 1.0))
    record("matrix_exp matches the series oracle", worst_exp, 1e-13)
    record("matrix_exp of skew input is a rotation", worst_rot, 1e-13)
    return results

"""Exact rational and integer linear algebra on small dense matrices.

Matrices are lists of rows; entries are ``int`` or ``fractions.Fraction``.
Everything here is deterministic and free of floating point.
"""

from fractions import Fraction
from functools import reduce
from math import gcd, lcm


def to_fraction(x):
    if isinstance(x, Fraction):
        return x
    if isinstance(x, int):
        return Fraction(x)
    if isinstance(x, str):
        return Fraction(x.strip())
    if isinstance(x, float):
        return Fraction(x)
    return Fraction(x)


def rref(rows):
    """Reduced row echelon form.

    Returns ``(R, pivots)`` with ``R`` a list of Fraction rows.
    """
    A = [[to_fraction(x) for x in r] for r in rows]
    if not A:
        return A, []
    ncols = len(A[0])
    pivots = []
    r = 0
    for c in range(ncols):
        piv = None
        for i in range(r, len(A)):
            if A[i][c] != 0:
                piv = i
                break
        if piv is None:
            continue
        A[r], A[piv] = A[piv], A[r]
        p = A[r][c]
        A[r] = [x / p for x in A[r]]
        for i in range(len(A)):
            if i != r and A[i][c] != 0:
                f = A[i][c]
                A[i] = [a - f * b for a, b in zip(A[i], A[r])]
        pivots.append(c)
        r += 1
        if r == len(A):
            break
    return A, pivots


def rank(rows):
    if not rows:
        return 0
    return len(rref(rows)[1])


def nullspace(rows, ncols=None):
    """Basis of the right nullspace ``{x : A x = 0}`` as Fraction vectors."""
    if not rows:
        n = ncols or 0
        return [[Fraction(int(i == j)) for j in range(n)] for i in range(n)]
    R, piv = rref(rows)
    n = len(R[0])
    free = [c for c in range(n) if c not in piv]
    basis = []
    for f in free:
        v = [Fraction(0)] * n
        v[f] = Fraction(1)
        for i, p in enumerate(piv):
            v[p] = -R[i][f]
        basis.append(v)
    return basis


def primitive(v):
    """Scale a rational vector to the primitive integer vector on its ray."""
    v = [to_fraction(x) for x in v]
    den = reduce(lcm, (x.denominator for x in v), 1)
    ints = [int(x * den) for x in v]
    g = reduce(gcd, ints, 0)
    if g == 0:
        return tuple(ints)
    return tuple(x // g for x in ints)


def common_denominator(values):
    return reduce(lcm, (to_fraction(x).denominator for x in values), 1)


def transpose(A):
    return [list(r) for r in zip(*A)]


def matmul(A, B):
    Bt = list(zip(*B))
    return [[sum(a * b for a, b in zip(row, col)) for col in Bt] for row in A]


def det(A):
    """Determinant by fraction-free Bareiss elimination (ints) or Fractions."""
    n = len(A)
    if n == 0:
        return 1
    M = [list(r) for r in A]
    if all(isinstance(x, int) for r in M for x in r):
        sign = 1
        prev = 1
        for k in range(n - 1):
            if M[k][k] == 0:
                for i in range(k + 1, n):
                    if M[i][k] != 0:
                        M[k], M[i] = M[i], M[k]
                        sign = -sign
                        break
                else:
                    return 0
            for i in range(k + 1, n):
                for j in range(k + 1, n):
                    M[i][j] = (M[i][j] * M[k][k] - M[i][k] * M[k][j]) // prev
            prev = M[k][k]
        return sign * M[n - 1][n - 1]
    M = [[to_fraction(x) for x in r] for r in M]
    d = Fraction(1)
    for k in range(n):
        piv = next((i for i in range(k, n) if M[i][k] != 0), None)
        if piv is None:
            return Fraction(0)
        if piv != k:
            M[k], M[piv] = M[piv], M[k]
            d = -d
        d *= M[k][k]
        for i in range(k + 1, n):
            f = M[i][k] / M[k][k]
            if f:
                M[i] = [a - f * b for a, b in zip(M[i], M[k])]
    return d


def solve(A, b):
    """Solve a square nonsingular rational system ``A x = b`` (b a vector or matrix)."""
    n = len(A)
    vec = not isinstance(b[0], (list, tuple))
    B = [[bi] for bi in b] if vec else [list(r) for r in b]
    aug = [list(A[i]) + list(B[i]) for i in range(n)]
    R, piv = rref(aug)
    if piv[:n] != list(range(n)):
        raise ZeroDivisionError("singular system")
    X = [r[n:] for r in R[:n]]
    return [x[0] for x in X] if vec else X


def inverse(A):
    n = len(A)
    eye = [[int(i == j) for j in range(n)] for i in range(n)]
    return solve(A, eye)


def _ext_gcd(a, b):
    x0, x1, y0, y1 = 1, 0, 0, 1
    while b:
        q, a, b = a // b, b, a % b
        x0, x1 = x1, x0 - q * x1
        y0, y1 = y1, y0 - q * y1
    return a, x0, y0


def hnf_rows(A):
    """Row-style Hermite normal form of an integer matrix.

    Returns ``(H, U)`` with ``U`` unimodular and ``H = U A``; the nonzero rows
    of ``H`` are a basis of the row lattice, in echelon form with positive
    pivots and reduced entries above each pivot.
    """
    H = [list(map(int, r)) for r in A]
    m = len(H)
    ncols = len(H[0]) if m else 0
    U = [[int(i == j) for j in range(m)] for i in range(m)]
    r = 0
    for c in range(ncols):
        if r == m:
            break
        # gcd-combine column c over rows r..m-1
        for i in range(r + 1, m):
            if H[i][c] == 0:
                continue
            a, b = H[r][c], H[i][c]
            g, x, y = _ext_gcd(a, b)
            p, q = a // g, b // g
            Hr, Hi = H[r], H[i]
            H[r] = [x * u + y * v for u, v in zip(Hr, Hi)]
            H[i] = [-q * u + p * v for u, v in zip(Hr, Hi)]
            Ur, Ui = U[r], U[i]
            U[r] = [x * u + y * v for u, v in zip(Ur, Ui)]
            U[i] = [-q * u + p * v for u, v in zip(Ur, Ui)]
        if H[r][c] == 0:
            continue
        if H[r][c] < 0:
            H[r] = [-x for x in H[r]]
            U[r] = [-x for x in U[r]]
        for i in range(r):
            f = H[i][c] // H[r][c]
            if f:
                H[i] = [u - f * v for u, v in zip(H[i], H[r])]
                U[i] = [u - f * v for u, v in zip(U[i], U[r])]
        r += 1
    return H, U


def row_lattice_basis(A):
    """Basis (rows) of the integer row lattice of ``A``."""
    H, _ = hnf_rows(A)
    return [row for row in H if any(row)]


def smith(A):
    """Smith normal form with transforms.

    Returns ``(S, P, Q)`` with ``P``, ``Q`` unimodular and ``S = P A Q``
    diagonal, each diagonal entry dividing the next.
    """
    S = [list(map(int, r)) for r in A]
    m = len(S)
    n = len(S[0]) if m else 0
    P = [[int(i == j) for j in range(m)] for i in range(m)]
    Q = [[int(i == j) for j in range(n)] for i in range(n)]

    def swap_rows(i, j):
        S[i], S[j] = S[j], S[i]
        P[i], P[j] = P[j], P[i]

    def swap_cols(i, j):
        for row in S:
            row[i], row[j] = row[j], row[i]
        for row in Q:
            row[i], row[j] = row[j], row[i]

    t = 0
    while t < min(m, n):
        nz = [(abs(S[i][j]), i, j) for i in range(t, m) for j in range(t, n) if S[i][j]]
        if not nz:
            break
        _, i0, j0 = min(nz)
        swap_rows(t, i0)
        swap_cols(t, j0)
        done = False
        while not done:
            done = True
            for i in range(t + 1, m):
                if S[i][t]:
                    f = S[i][t] // S[t][t]
                    S[i] = [u - f * v for u, v in zip(S[i], S[t])]
                    P[i] = [u - f * v for u, v in zip(P[i], P[t])]
                    if S[i][t]:
                        swap_rows(t, i)
                        done = False
            for j in range(t + 1, n):
                if S[t][j]:
                    f = S[t][j] // S[t][t]
                    for row in S:
                        row[j] -= f * row[t]
                    for row in Q:
                        row[j] -= f * row[t]
                    if S[t][j]:
                        swap_cols(t, j)
                        done = False
            if done:
                # divisibility condition
                bad = next(((i, j) for i in range(t + 1, m) for j in range(t + 1, n)
                            if S[i][j] % S[t][t]), None)
                if bad is not None:
                    i, _ = bad
                    S[t] = [u + v for u, v in zip(S[t], S[i])]
                    P[t] = [u + v for u, v in zip(P[t], P[i])]
                    done = False
        if S[t][t] < 0:
            S[t] = [-x for x in S[t]]
            P[t] = [-x for x in P[t]]
        t += 1
    return S, P, Q


def integer_inverse(U):
    """Inverse of a unimodular integer matrix, as ints."""
    inv = inverse(U)
    out = [[int(x) for x in r] for r in inv]
    assert all(Fraction(x) == y for r, s in zip(out, inv) for x, y in zip(r, s))
    return out


def column_hnf(A):
    """Column-style HNF: ``A V`` lower echelon, with ``V`` unimodular."""
    H, U = hnf_rows(transpose(A))
    return transpose(H), transpose(U)

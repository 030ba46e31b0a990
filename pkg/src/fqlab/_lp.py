"""Tiny exact simplex (phase I only) over the rationals.

Decides feasibility of ``{x >= 0 : A x = b}`` with Bland's anti-cycling rule.
Used for certificate cross-checks, so clarity beats speed.
"""

from fractions import Fraction


def feasible_point(A, b):
    """Return a nonnegative rational solution of ``A x = b``, or ``None``."""
    m = len(A)
    if m == 0:
        return []
    n = len(A[0])
    rows = []
    for i in range(m):
        r = [Fraction(x) for x in A[i]]
        bi = Fraction(b[i])
        if bi < 0:
            r = [-x for x in r]
            bi = -bi
        rows.append(r + [Fraction(int(k == i)) for k in range(m)] + [bi])
    width = n + m
    basis = [n + i for i in range(m)]
    # phase I objective: minimise sum of artificials -> reduced costs
    cost = [Fraction(0)] * (width + 1)
    for r in rows:
        for j in range(width + 1):
            cost[j] -= r[j]
    for i in range(m):
        cost[n + i] += 1
    while True:
        enter = next((j for j in range(width) if cost[j] < 0), None)
        if enter is None:
            break
        best = None
        for i, r in enumerate(rows):
            if r[enter] > 0:
                ratio = r[-1] / r[enter]
                if best is None or ratio < best[0] or (ratio == best[0] and basis[i] < basis[best[1]]):
                    best = (ratio, i)
        if best is None:  # unbounded below cannot happen for phase I
            break
        _, p = best
        piv = rows[p][enter]
        rows[p] = [x / piv for x in rows[p]]
        for i in range(m):
            if i != p and rows[i][enter] != 0:
                f = rows[i][enter]
                rows[i] = [a - f * c for a, c in zip(rows[i], rows[p])]
        f = cost[enter]
        cost = [a - f * c for a, c in zip(cost, rows[p])]
        basis[p] = enter
    if -cost[-1] != 0:
        return None
    x = [Fraction(0)] * n
    for i, j in enumerate(basis):
        if j < n:
            x[j] = rows[i][-1]
    return x


def nonzero_cone_point(A_ge, A_eq, dim):
    """Find ``y != 0`` with ``A_ge y >= 0`` and ``A_eq y = 0``, or ``None``.

    Splits ``y = u - w`` with ``u, w >= 0`` and normalises ``sum(u + w) = 1``;
    a nonzero cone point exists iff the normalised system is feasible with
    ``u - w != 0``.  Nonzero-ness is enforced by trying each coordinate sign
    ``y_i >= 1`` or ``y_i <= -1`` in turn (cones are scale invariant).
    """
    A_ge = [list(r) for r in A_ge]
    A_eq = [list(r) for r in A_eq]
    for i in range(dim):
        for sign in (1, -1):
            # variables: u (dim), w (dim), slack s (len A_ge), t >= 0 for y_i*sign - 1 = t
            nv = 2 * dim + len(A_ge) + 1
            rows, rhs = [], []
            for k, r in enumerate(A_ge):
                row = [Fraction(0)] * nv
                for j in range(dim):
                    row[j] = Fraction(r[j])
                    row[dim + j] = -Fraction(r[j])
                row[2 * dim + k] = Fraction(-1)
                rows.append(row)
                rhs.append(0)
            for r in A_eq:
                row = [Fraction(0)] * nv
                for j in range(dim):
                    row[j] = Fraction(r[j])
                    row[dim + j] = -Fraction(r[j])
                rows.append(row)
                rhs.append(0)
            row = [Fraction(0)] * nv
            row[i] = Fraction(sign)
            row[dim + i] = Fraction(-sign)
            row[-1] = Fraction(-1)
            rows.append(row)
            rhs.append(1)
            x = feasible_point(rows, rhs)
            if x is not None:
                return [x[j] - x[dim + j] for j in range(dim)]
    return None

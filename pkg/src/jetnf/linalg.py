"""Exact linear algebra over the rationals.

Small dense matrices only (dimensions here never exceed a few hundred rows):
plain Gaussian elimination with Fraction entries for solving/inversion, and
fraction-free Bareiss elimination over Python ints for ranks, so that rank
decisions never touch a denominator.
"""

from fractions import Fraction


def mat_vec(m, v):
    return [sum((row[j] * v[j] for j in range(len(v))), Fraction(0)) for row in m]


def mat_mul(a, b):
    cols = len(b[0])
    return [
        [sum((a[i][k] * b[k][j] for k in range(len(b))), Fraction(0)) for j in range(cols)]
        for i in range(len(a))
    ]


def mat_inverse(m):
    """Invert a square Fraction matrix; returns None if singular."""
    n = len(m)
    aug = [[Fraction(m[i][j]) for j in range(n)] + [Fraction(int(i == j)) for j in range(n)]
           for i in range(n)]
    for col in range(n):
        piv = next((r for r in range(col, n) if aug[r][col] != 0), None)
        if piv is None:
            return None
        aug[col], aug[piv] = aug[piv], aug[col]
        inv = Fraction(1, 1) / aug[col][col]
        aug[col] = [x * inv for x in aug[col]]
        for r in range(n):
            if r != col and aug[r][col] != 0:
                f = aug[r][col]
                aug[r] = [x - f * y for x, y in zip(aug[r], aug[col])]
    return [row[n:] for row in aug]


def mat_det(m):
    n = len(m)
    a = [[Fraction(x) for x in row] for row in m]
    det = Fraction(1)
    for col in range(n):
        piv = next((r for r in range(col, n) if a[r][col] != 0), None)
        if piv is None:
            return Fraction(0)
        if piv != col:
            a[col], a[piv] = a[piv], a[col]
            det = -det
        det *= a[col][col]
        inv = Fraction(1, 1) / a[col][col]
        for r in range(col + 1, n):
            if a[r][col] != 0:
                f = a[r][col] * inv
                a[r] = [x - f * y for x, y in zip(a[r], a[col])]
    return det


def rank_fraction_free(rows):
    """Rank of a rational matrix by Bareiss elimination over the integers.

    Each row is scaled by its denominator lcm first; all pivoting and
    elimination then happen in exact integer arithmetic.
    """
    m = []
    for row in rows:
        row = [Fraction(x) for x in row]
        den = 1
        for x in row:
            den = den * x.denominator // _gcd(den, x.denominator)
        m.append([int(x * den) for x in row])
    if not m or not m[0]:
        return 0
    nrows, ncols = len(m), len(m[0])
    rank = 0
    prev = 1
    row = 0
    for col in range(ncols):
        piv = next((r for r in range(row, nrows) if m[r][col] != 0), None)
        if piv is None:
            continue
        m[row], m[piv] = m[piv], m[row]
        for r in range(row + 1, nrows):
            for c in range(col + 1, ncols):
                m[r][c] = (m[row][col] * m[r][c] - m[r][col] * m[row][c]) // prev
            m[r][col] = 0
        prev = m[row][col]
        rank += 1
        row += 1
        if row == nrows:
            break
    return rank


def _gcd(a, b):
    while b:
        a, b = b, a % b
    return a


def kernel_vector(m):
    """One nonzero rational kernel vector of a square singular matrix, or None."""
    n = len(m)
    a = [[Fraction(x) for x in row] for row in m]
    pivots = []
    row = 0
    for col in range(n):
        piv = next((r for r in range(row, n) if a[r][col] != 0), None)
        if piv is None:
            continue
        a[row], a[piv] = a[piv], a[row]
        inv = Fraction(1, 1) / a[row][col]
        a[row] = [x * inv for x in a[row]]
        for r in range(n):
            if r != row and a[r][col] != 0:
                f = a[r][col]
                a[r] = [x - f * y for x, y in zip(a[r], a[row])]
        pivots.append(col)
        row += 1
    free = [c for c in range(n) if c not in pivots]
    if not free:
        return None
    c0 = free[0]
    v = [Fraction(0)] * n
    v[c0] = Fraction(1)
    for r, col in enumerate(pivots):
        v[col] = -a[r][c0]
    return v


def complete_basis(first_columns, dim):
    """Complete the given independent columns to a basis with standard vectors.

    Returns a dim x dim invertible matrix whose leading columns are the given
    ones, padded greedily with standard basis vectors.
    """
    cols = [list(c) for c in first_columns]
    for j in range(dim):
        if len(cols) == dim:
            break
        e = [Fraction(int(i == j)) for i in range(dim)]
        cand = cols + [e]
        mat = [[cand[c][r] for c in range(len(cand))] for r in range(dim)]
        if rank_fraction_free(mat) == len(cand):
            cols.append(e)
    if len(cols) != dim:
        return None
    return [[cols[c][r] for c in range(dim)] for r in range(dim)]


def symplectic_basis(b):
    """Columns u1,w1,...,un,wn with B(u_i,w_i)=1 and all other pairings zero.

    ``b`` is an invertible antisymmetric Fraction matrix of even size; the
    returned matrix M satisfies M^T B M = standard interleaved form.  Plain
    symplectic Gram-Schmidt over Q.
    """
    dim = len(b)

    def pair(u, w):
        return sum((u[i] * sum((b[i][j] * w[j] for j in range(dim)), Fraction(0))
                    for i in range(dim)), Fraction(0))

    pool = [[Fraction(int(i == j)) for i in range(dim)] for j in range(dim)]
    cols = []
    while pool:
        u = pool.pop(0)
        k = next((i for i, w in enumerate(pool) if pair(u, w) != 0), None)
        if k is None:
            return None
        w = pool.pop(k)
        s = pair(u, w)
        w = [x / s for x in w]
        reduced = []
        for v in pool:
            cuv = pair(v, w)
            cvu = pair(v, u)
            reduced.append([v[i] - cuv * u[i] + cvu * w[i] for i in range(dim)])
        pool = reduced
        cols.append(u)
        cols.append(w)
    return [[cols[c][r] for c in range(dim)] for r in range(dim)]

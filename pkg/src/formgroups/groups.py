"""Matrices over form rings, the hyperbolic forms, and group membership.

The quadratic group at half-rank n preserves psi = [[0, lam*I],[I, 0]];
the Hermitian group preserves psi_h = [[A, lam*I],[I, 0]] where A embeds
the diagonal data (a_1..a_r, 0..0).  Membership in the quadratic flavor
additionally requires the diagonal entries of conj(gamma)^t alpha and
conj(delta)^t beta to lie in Lambda; the Hermitian flavor is defined by
the form equation alone.

Coordinate convention: index n+i is the hyperbolic partner of index i
(rho(i) = n+i), for 1 <= i <= n.
"""

from __future__ import annotations

from dataclasses import dataclass

from .rings import FiniteRing, PolyRing, RingError
from .formparams import FormRing, FormParameterError, induce_poly_parameter


class MembershipError(ValueError):
    pass


# ---------------------------------------------------------------------------
# generic matrices over the ring protocol


class Matrix:
    """A square or rectangular matrix over a FiniteRing or PolyRing.

    Rows are tuples of ring elements (ints for finite rings, PolyElement
    for polynomial rings); instances are immutable.
    """

    __slots__ = ("ring", "rows", "nrows", "ncols")

    def __init__(self, ring, rows):
        self.ring = ring
        self.rows = tuple(tuple(r) for r in rows)
        self.nrows = len(self.rows)
        self.ncols = len(self.rows[0]) if self.rows else 0

    @staticmethod
    def identity(ring, n):
        z, o = ring.zero, ring.one
        return Matrix(ring, [[o if i == j else z for j in range(n)] for i in range(n)])

    @staticmethod
    def zero(ring, n, m=None):
        m = n if m is None else m
        z = ring.zero
        return Matrix(ring, [[z] * m for _ in range(n)])

    def __eq__(self, other):
        return isinstance(other, Matrix) and self.rows == other.rows

    def __hash__(self):
        return hash(self.rows)

    def __repr__(self):
        return "Matrix(%s, %d x %d)" % (self.ring.label, self.nrows, self.ncols)

    def entry(self, i, j):
        return self.rows[i][j]

    def mul(self, other):
        R = self.ring
        add, mul, zero = R.add, R.mul, R.zero
        if self.ncols != other.nrows:
            raise MembershipError("shape mismatch")
        cols = list(zip(*other.rows))
        out = []
        for row in self.rows:
            new = []
            for col in cols:
                acc = zero
                for a, b in zip(row, col):
                    if a != zero and b != zero:
                        acc = add(acc, mul(a, b))
                new.append(acc)
            out.append(new)
        return Matrix(R, out)

    def __mul__(self, other):
        return self.mul(other)

    def add(self, other):
        R = self.ring
        return Matrix(R, [[R.add(a, b) for a, b in zip(r1, r2)]
                          for r1, r2 in zip(self.rows, other.rows)])

    def sub(self, other):
        R = self.ring
        return Matrix(R, [[R.sub(a, b) for a, b in zip(r1, r2)]
                          for r1, r2 in zip(self.rows, other.rows)])

    def scale(self, c):
        R = self.ring
        return Matrix(R, [[R.mul(c, a) for a in row] for row in self.rows])

    def transpose(self):
        return Matrix(self.ring, list(zip(*self.rows)))

    def apply(self, vec):
        """Matrix times column vector (a tuple of ring elements)."""
        R = self.ring
        out = []
        for row in self.rows:
            acc = R.zero
            for a, b in zip(row, vec):
                acc = R.add(acc, R.mul(a, b))
            out.append(acc)
        return tuple(out)

    def is_identity(self):
        R = self.ring
        return self == Matrix.identity(R, self.nrows)

    def det(self):
        """Exact determinant; finite rings go factorwise through integer
        Bareiss elimination, polynomial rings by expansion."""
        R = self.ring
        if self.nrows != self.ncols:
            raise MembershipError("determinant of a non-square matrix")
        if isinstance(R, PolyRing):
            return _det_expansion(self)
        dets = []
        for f, m in enumerate(R.moduli):
            lifted = [[R.decode(a)[f] for a in row] for row in self.rows]
            dets.append(_int_det(lifted) % m)
        return R.encode(dets)

    def inv(self):
        """Exact inverse over a finite ring (factorwise Gaussian elimination
        over Z/p^k with unit pivots)."""
        R = self.ring
        if isinstance(R, PolyRing):
            raise MembershipError("polynomial matrix inversion is not provided")
        n = self.nrows
        comps = []
        for f, m in enumerate(R.moduli):
            a = [[R.decode(x)[f] for x in row] for row in self.rows]
            comps.append(_modular_inverse(a, m))
        rows = []
        for i in range(n):
            row = []
            for j in range(n):
                row.append(R.encode(tuple(c[i][j] for c in comps)))
            rows.append(row)
        return Matrix(R, rows)

    def is_invertible(self):
        return self.ring.is_unit(self.det()) if not isinstance(self.ring, PolyRing) \
            else self.ring.is_unit(self.det())

    def congruent_mod_ideal(self, other, ideal):
        """Entrywise difference lies in the given element set (finite rings)."""
        R = self.ring
        return all(
            R.sub(a, b) in ideal
            for r1, r2 in zip(self.rows, other.rows)
            for a, b in zip(r1, r2)
        )

    def congruent_identity_mod_power(self, var, power):
        """Over R[X]/R[X,T]: self == I modulo (var^power)."""
        R = self.ring
        if not isinstance(R, PolyRing):
            raise MembershipError("variable congruence needs a polynomial ring")
        ident = Matrix.identity(R, self.nrows)
        diff = self.sub(ident)
        return all(p.divisible_by(var, power) for row in diff.rows for p in row)


def _int_det(a):
    """Fraction-free Bareiss determinant over the integers."""
    a = [row[:] for row in a]
    n = len(a)
    sign = 1
    prev = 1
    for k in range(n - 1):
        if a[k][k] == 0:
            pivot = next((i for i in range(k + 1, n) if a[i][k] != 0), None)
            if pivot is None:
                return 0
            a[k], a[pivot] = a[pivot], a[k]
            sign = -sign
        for i in range(k + 1, n):
            for j in range(k + 1, n):
                a[i][j] = (a[i][j] * a[k][k] - a[i][k] * a[k][j]) // prev
            a[i][k] = 0
        prev = a[k][k]
    return sign * a[-1][-1] if n else 1


def _modular_inverse(a, m):
    """Inverse of a matrix over Z/p^k (any Z/m; pivots must be units mod m)."""
    n = len(a)
    a = [row[:] + [1 if i == j else 0 for j in range(n)] for i, row in enumerate(a)]
    import math as _math
    for col in range(n):
        pivot = next(
            (i for i in range(col, n) if _math.gcd(a[i][col], m) == 1), None)
        if pivot is None:
            raise MembershipError("matrix not invertible mod %d" % m)
        a[col], a[pivot] = a[pivot], a[col]
        inv = pow(a[col][col], -1, m)
        a[col] = [(x * inv) % m for x in a[col]]
        for i in range(n):
            if i != col and a[i][col]:
                f = a[i][col]
                a[i] = [(x - f * y) % m for x, y in zip(a[i], a[col])]
    return [row[n:] for row in a]


def _det_expansion(mat):
    """Cofactor-expansion determinant (polynomial entries, small sizes)."""
    R = mat.ring
    n = mat.nrows
    if n == 1:
        return mat.rows[0][0]
    acc = R.zero
    sub_rows = mat.rows[1:]
    for j in range(n):
        c = mat.rows[0][j]
        if c == R.zero:
            continue
        minor = Matrix(R, [row[:j] + row[j + 1:] for row in sub_rows])
        term = R.mul(c, _det_expansion(minor))
        acc = R.add(acc, term) if j % 2 == 0 else R.sub(acc, term)
    return acc


def conjugate_transpose(mat):
    """Entrywise involution followed by transpose (the bar operation)."""
    R = mat.ring
    return Matrix(R, [[R.invol(mat.rows[j][i]) for j in range(mat.nrows)]
                      for i in range(mat.ncols)])


# ---------------------------------------------------------------------------
# group descriptors


@dataclass(frozen=True)
class GroupDescriptor:
    """Ambient group data: flavor, half-rank, form ring, Hermitian diagonal.

    The blanket assumptions (2n >= 6 quadratic, n > r Hermitian with
    a_1 = 0 and a_i in Lambda_min) are enforced here; `allow_small` admits
    2n = 4 for the vector-level lemmas that need it.
    """

    flavor: str  # "quadratic" | "hermitian"
    n: int
    form: FormRing
    a_data: tuple = ()
    allow_small: bool = False

    def __post_init__(self):
        from .formparams import lambda_min as _lmin
        if self.flavor not in ("quadratic", "hermitian"):
            raise MembershipError("unknown flavor %r" % self.flavor)
        if self.flavor == "quadratic":
            if self.a_data:
                raise MembershipError("quadratic descriptors carry no diagonal data")
            if 2 * self.n < 6 and not self.allow_small:
                raise MembershipError("blanket assumption 2n >= 6 violated")
            if self.n < 2:
                raise MembershipError("need n >= 2")
        else:
            r = len(self.a_data)
            if self.n <= r:
                raise MembershipError("hermitian flavor needs n > r")
            if r < 1:
                raise MembershipError("hermitian flavor needs r >= 1")
            if self.a_data[0] != self.form.ring.zero:
                raise MembershipError("blanket assumption a_1 = 0 violated")
            lmin = _lmin(self.form.ring, self.form.lam)
            for a in self.a_data:
                if a not in lmin:
                    raise MembershipError("a_i must lie in Lambda_min")
        # mechanical validation of the form-matrix convention: all generator
        # families must pass membership; done lazily by the generators module.

    @property
    def r(self):
        return len(self.a_data)

    @property
    def ring(self):
        return self.form.ring

    @property
    def lam(self):
        return self.form.lam

    @property
    def dim(self):
        return 2 * self.n

    def rho(self, i):
        """Hyperbolic partner: rho(i) = n + i for 1 <= i <= n (1-based)."""
        return self.n + i

    def with_ring(self, form, a_data=None):
        return GroupDescriptor(self.flavor, self.n,
                               form,
                               self.a_data if a_data is None else tuple(a_data),
                               self.allow_small)

    def poly_ring(self, nvars=1):
        return PolyRing(self.ring, nvars)

    def spec(self):
        gens = ",".join(str(g) for g in self.form.param.generators)
        parts = [
            "flavor=%s" % ("quad" if self.flavor == "quadratic" else "herm"),
            "n=%d" % self.n,
            "ring=%s" % self.ring.label,
            "lambda=%d" % self.lam,
            "gens=%s" % gens,
        ]
        if self.a_data:
            parts.append("a=%s" % ",".join(str(a) for a in self.a_data))
        return ";".join(parts)


def form_matrix(desc, ring=None):
    """psi for the descriptor over the base ring or a polynomial extension.

    Quadratic: [[0, lam I],[I, 0]].  Hermitian: the top-left block is the
    n x n diagonal [a_1..a_r, 0..0]; validated mechanically by requiring
    every generator family to pass membership (generators module).
    """
    R = ring or desc.ring
    n = desc.n
    lift = (lambda c: R.lift(c)) if isinstance(R, PolyRing) else (lambda c: c)
    z, o = R.zero, R.one
    lam = lift(desc.lam)
    rows = [[z] * (2 * n) for _ in range(2 * n)]
    for i in range(n):
        rows[i][n + i] = lam
        rows[n + i][i] = o
    for i, a in enumerate(desc.a_data):
        rows[i][i] = lift(a)
    return Matrix(R, rows)


def membership_diagnostic(sigma, desc):
    """Empty string when sigma belongs to the group; else the first failure.

    Quadratic: form equation plus the diagonal-entry reading of the
    condition conj(gamma) alpha, conj(delta) beta in Lambda.  Hermitian:
    the form equation alone.
    """
    R = sigma.ring
    n = desc.n
    if sigma.nrows != 2 * n or sigma.ncols != 2 * n:
        return "wrong size: expected %d" % (2 * n)
    psi = form_matrix(desc, R if isinstance(R, PolyRing) else None)
    bar = conjugate_transpose(sigma)
    if bar.mul(psi).mul(sigma) != psi:
        return "form equation conj(sigma)^t psi sigma = psi fails"
    if not isinstance(R, PolyRing):
        if not R.is_unit(sigma.det()):
            raise MembershipError("singular matrix passed to membership test")
    if desc.flavor == "quadratic":
        alpha, beta, gamma, delta = block_partition(sigma, desc)
        ga = conjugate_transpose(gamma).mul(alpha)
        db = conjugate_transpose(delta).mul(beta)
        if isinstance(R, PolyRing):
            pred = induce_poly_parameter(desc.form, R)
            member = lambda p: p in pred
        else:
            members = desc.form.members
            member = lambda a: a in members
        for name, mat in (("conj(gamma)alpha", ga), ("conj(delta)beta", db)):
            for i in range(n):
                if not member(mat.rows[i][i]):
                    return "%s diagonal entry %d outside Lambda" % (name, i + 1)
    return ""


def is_member(sigma, desc):
    return membership_diagnostic(sigma, desc) == ""


@dataclass(frozen=True)
class GroupMatrix:
    """A matrix checked against its descriptor at construction."""

    desc: GroupDescriptor
    mat: Matrix

    def __post_init__(self):
        diag = membership_diagnostic(self.mat, self.desc)
        if diag:
            raise MembershipError(diag)

    def __mul__(self, other):
        return GroupMatrix(self.desc, self.mat.mul(other.mat))

    def inv(self):
        return GroupMatrix(self.desc, self.mat.inv())


def block_partition(sigma, desc):
    """(alpha, beta, gamma, delta): the four n x n blocks."""
    n = desc.n
    R = sigma.ring

    def block(r0, c0):
        return Matrix(R, [row[c0:c0 + n] for row in sigma.rows[r0:r0 + n]])

    return block(0, 0), block(0, n), block(n, 0), block(n, n)


def fine_partition(sigma, desc):
    """Hermitian fine partition: each block split at row/column r.

    Returns a dict keyed by e.g. "alpha11", "beta12", ... (16 pieces).
    """
    if desc.flavor != "hermitian":
        raise MembershipError("fine partition needs the hermitian flavor")
    n, r = desc.n, desc.r
    R = sigma.ring
    names = {"alpha": (0, 0), "beta": (0, n), "gamma": (n, 0), "delta": (n, n)}
    out = {}
    for name, (r0, c0) in names.items():
        cuts = [(0, r), (r, n)]
        for bi, (ra, rb) in enumerate(cuts, start=1):
            for bj, (ca, cb) in enumerate(cuts, start=1):
                rows = [row[c0 + ca:c0 + cb] for row in sigma.rows[r0 + ra:r0 + rb]]
                out["%s%d%d" % (name, bi, bj)] = Matrix(R, rows)
    return out


def reassemble_partition(blocks, desc):
    n = desc.n
    a, b, g, d = blocks
    R = a.ring
    rows = []
    for i in range(n):
        rows.append(list(a.rows[i]) + list(b.rows[i]))
    for i in range(n):
        rows.append(list(g.rows[i]) + list(d.rows[i]))
    return Matrix(R, rows)


def column_in_C(col, desc):
    """Paper-style set C: columns zeta with sum conj(z_i) a_i z_i in Lambda_min.

    Vacuously R^r under the blanket assumption a_i in Lambda_min; kept as a
    checkable predicate for the fine-partition property.
    """
    from .formparams import lambda_min as _lmin
    R = desc.ring
    acc = R.zero
    for z, a in zip(col, desc.a_data):
        acc = R.add(acc, R.mul(R.invol(z), R.mul(a, z)))
    return acc in _lmin(R, desc.lam)


def stabilize(sigma, desc):
    """Embed a member of the size-2n group into the size-(2n+2) group.

    Blocks alpha, beta, gamma, delta are each padded by one diagonal 1; the
    result is a member at half-rank n+1 and generators map to generators.
    """
    n = desc.n
    R = sigma.ring
    big = GroupDescriptor(desc.flavor, n + 1, desc.form, desc.a_data, desc.allow_small)
    z, o = R.zero, R.one
    N = 2 * (n + 1)
    rows = [[z] * N for _ in range(N)]

    def src(i):
        # new index i (0-based) -> old index or None for the padded slots
        if i < n:
            return i
        if i == n:
            return None
        if i < 2 * n + 1:
            return i - 1
        return None

    for i in range(N):
        for j in range(N):
            si, sj = src(i), src(j)
            if si is None or sj is None:
                rows[i][j] = o if i == j else z
            else:
                rows[i][j] = sigma.rows[si][sj]
    return Matrix(R, rows), big


def tilde(v, desc, ring=None):
    """Row vector conj(v)^t psi."""
    R = ring or desc.ring
    psi = form_matrix(desc, R if isinstance(R, PolyRing) else None)
    bar = tuple(R.invol(x) for x in v)
    out = []
    for j in range(2 * desc.n):
        acc = R.zero
        for i, b in enumerate(bar):
            acc = R.add(acc, R.mul(b, psi.rows[i][j]))
        out.append(acc)
    return tuple(out)


def inner(v, w, desc, ring=None):
    """<v, w> = tilde(v) . w."""
    R = ring or desc.ring
    tv = tilde(v, desc, ring)
    acc = R.zero
    for a, b in zip(tv, w):
        acc = R.add(acc, R.mul(a, b))
    return acc


def build_M(v, w, desc, ring=None):
    """M(v, w) = v . tilde(w) - conj(lam) conj(w) . tilde(v)."""
    R = ring or desc.ring
    lam = desc.lam
    if isinstance(R, PolyRing):
        lam = R.lift(lam)
    lam_bar = R.invol(lam)
    tw = tilde(w, desc, ring)
    tv = tilde(v, desc, ring)
    wbar = tuple(R.invol(x) for x in w)
    rows = []
    for i in range(2 * desc.n):
        row = []
        for j in range(2 * desc.n):
            t1 = R.mul(v[i], tw[j])
            t2 = R.mul(lam_bar, R.mul(wbar[i], tv[j]))
            row.append(R.sub(t1, t2))
        rows.append(row)
    return Matrix(R, rows)


def quadratic_value(v, desc, ring=None):
    """f(v, v) for the defining sesquilinear form: sum conj(v_i) (A v)_i
    + sum conj(v_i) lam? -- concretely conj(x)^t A-part x + conj(x).y with
    the (a_i) data on the x-block; vanishing mod Lambda is the isotropy
    test used before reductions."""
    R = ring or desc.ring
    n = desc.n
    acc = R.zero
    for i in range(n):
        acc = R.add(acc, R.mul(R.invol(v[i]), v[n + i]))
    for i, a in enumerate(desc.a_data):
        if isinstance(R, PolyRing):
            a = R.lift(a)
        acc = R.add(acc, R.mul(R.invol(v[i]), R.mul(a, v[i])))
    return acc


def gl_embedding(g, double_desc, base_ring):
    """GL(n, R) -> GQ(2n, R+R^o, Lambda): g goes to the pair (g, g^{-1}).

    Entry (i, j) of the image has base components (g_ij, delta_ij) on the
    alpha block and (delta_ij, (g^{-t})_ij) on the delta block; beta and
    gamma vanish, so membership is immediate and the map is multiplicative.
    """
    R = double_desc.ring  # hyperbolic double of base_ring
    n = double_desc.n
    if g.nrows != n:
        raise MembershipError("GL matrix must have size n")
    ginv = g.inv()
    k = len(base_ring.moduli)

    def pair(x, y):
        return R.encode(base_ring.decode(x) + base_ring.decode(y))

    z, o = base_ring.zero, base_ring.one
    rows = [[R.zero] * (2 * n) for _ in range(2 * n)]
    for i in range(n):
        for j in range(n):
            rows[i][j] = pair(g.rows[i][j], o if i == j else z)
            rows[n + i][n + j] = pair(o if i == j else z, ginv.rows[j][i])
    return Matrix(R, rows)


def gl_embedding_inverse(sigma, double_desc, base_ring):
    """Recover g from the embedded member (first components of alpha)."""
    n = double_desc.n
    R = double_desc.ring
    k = len(base_ring.moduli)
    rows = []
    for i in range(n):
        row = []
        for j in range(n):
            comps = R.decode(sigma.rows[i][j])[:k]
            row.append(base_ring.encode(comps))
        rows.append(row)
    return Matrix(base_ring, rows)


def matrix_to_json(mat, desc=None):
    obj = {"ring": mat.ring.label, "rows": [list(r) for r in mat.rows]}
    if desc is not None:
        obj["group"] = desc.spec()
    return obj


def basis_vector(desc, index, ring=None):
    """e_index (1-based) of length 2n."""
    R = ring or desc.ring
    v = [R.zero] * (2 * desc.n)
    v[index - 1] = R.one
    return tuple(v)

"""Constructive reduction theorems and the closure oracle.

Everything here returns witness words that are re-verified by exact
evaluation before being handed back: transitive action on isotropic
unimodular vectors (semilocal rings), diagonalization modulo an ideal in
the radical, dilation of localized factorizations, the local-global
patching of polynomial members, conjugation of elementary words into
elementary words, and a breadth-first closure oracle for membership
experiments.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field

from .rings import (
    FiniteRing, PolyRing, PolyElement, RingError,
    localize_at_element, localize_at_maximal, enumerate_maximal_ideals,
    jacobson_radical, quotient_map, substitute,
)
from .formparams import (
    FormRing, induce_quotient_parameter, induce_localized_parameter,
)
from .groups import (
    GroupDescriptor, Matrix, MembershipError, membership_diagnostic,
    is_member, basis_vector, quadratic_value, inner, build_M, form_matrix,
)
from .generators import (
    GeneratorSymbol, GeneratorWord, SymbolError, IdentityError,
    make_symbol, gen_matrix, gen_inverse, split_vector,
    normal_form_congruent_X, factor_I_plus_M, substitute_word,
    VECTOR_FAMILIES, solve_trace_equation, _lift,
)


class ReductionError(RuntimeError):
    """Certified failure: a precondition or construction step is
    unattainable for the instance, never a silently wrong answer."""


# ---------------------------------------------------------------------------
# small data carriers


@dataclass(frozen=True)
class UnimodularCertificate:
    vector: tuple
    dual: tuple

    def check(self, ring):
        acc = ring.zero
        for v, u in zip(self.vector, self.dual):
            acc = ring.add(acc, ring.mul(v, u))
        return acc == ring.one


@dataclass
class ReductionResult:
    vector: tuple
    word: GeneratorWord
    direction: str = "to-last-basis-vector"

    def verify(self, desc):
        target = basis_vector(desc, 2 * desc.n, self.word.ring)
        return self.word.apply(self.vector) == target


@dataclass
class PatchReport:
    status: str  # "success" | "hypothesis-violated" | "unknown" | "failed"
    ideals: list = field(default_factory=list)
    dilation: list = field(default_factory=list)
    assembled: GeneratorWord = None
    detail: str = ""


@dataclass
class MembershipOracle:
    mode: str                   # "bfs-closure" | "word-witness"
    closure: set = None         # packed matrix keys
    size: int = 0
    complete: bool = False
    cap: int = 0

    def contains(self, mat):
        """True / False / None (inconclusive)."""
        key = _pack(mat)
        if self.closure is not None and key in self.closure:
            return True
        if self.complete:
            return False
        return None


def _pack(mat):
    return tuple(x for row in mat.rows for x in row)


# ---------------------------------------------------------------------------
# unimodularity


def unimodular_certificate(ring, vec):
    """A dual vector with sum v_i u_i = 1, or None (gcd combination,
    solved factorwise)."""
    dual = _solve_combo(ring, ring.one, list(vec))
    if dual is None:
        return None
    cert = UnimodularCertificate(tuple(vec), tuple(dual))
    if not cert.check(ring):
        return None
    return cert


def is_isotropic(vec, desc):
    """Vanishing form value: <v, v> = 0, and in the quadratic flavor the
    quadratic value f(v, v) must lie in Lambda."""
    R = desc.ring
    if inner(vec, vec, desc) != R.zero:
        return False
    if desc.flavor == "quadratic":
        return quadratic_value(vec, desc) in desc.form.members
    return True


# ---------------------------------------------------------------------------
# semisimple helpers (Bass / Swan lemmas)


def _is_semisimple(ring):
    rad, _ = jacobson_radical(ring)
    return rad == frozenset({ring.zero})


def _idempotent_for_ideal(ring, ideal):
    for e in ring.idempotents():
        if ring.ideal([e]) == ideal:
            return e
    raise ReductionError("ideal is not generated by an idempotent "
                         "(ring not semisimple?)")


def find_unit_in_coset(ring, a, ideal_gens):
    """(i, u, e) with a + i = u e, e an idempotent generating Ra + I.

    Requires a semisimple ring; when Ra + I = R this is Bass's lemma and
    e = 1.  Exhaustive scan at desk scale.
    """
    if not _is_semisimple(ring):
        raise ReductionError("find_unit_in_coset needs a semisimple ring; "
                             "pass the radical quotient")
    ideal = ring.ideal(ideal_gens) if not isinstance(ideal_gens, frozenset) \
        else ideal_gens
    J = ring.additive_closure(set(ring.ideal([a])) | set(ideal))
    e = _idempotent_for_ideal(ring, frozenset(J))
    for i in sorted(ideal):
        cand = ring.add(a, i)
        for u in sorted(ring.units):
            if ring.mul(u, e) == cand:
                return i, u, e
    raise ReductionError("no unit multiple found in the coset")


def _solve_combo(ring, target, xs):
    """Coefficients c with sum c_i xs_i = target, factorwise via gcd chains."""
    k = len(ring.moduli)
    per_factor = []
    for f, m in enumerate(ring.moduli):
        t = ring.decode(target)[f]
        vals = [ring.decode(x)[f] for x in xs]
        coeffs = _solve_combo_mod(vals, t, m)
        if coeffs is None:
            return None
        per_factor.append(coeffs)
    out = []
    for i in range(len(xs)):
        out.append(ring.encode(tuple(per_factor[f][i] for f in range(k))))
    return out


def _solve_combo_mod(vals, t, m):
    """Solve sum c_i vals_i = t mod m by an extended-gcd sweep."""
    if m == 1:
        return [0] * len(vals)
    g = 0
    for v in vals:
        g = math.gcd(g, v)
    g = math.gcd(g, m)
    if t % g != 0:
        return None
    # accumulate gcd with Bezout bookkeeping
    coeffs = [0] * len(vals)
    cur_g = m
    cur_coeffs = [0] * len(vals)
    for i, v in enumerate(vals):
        gg, x, y = _xgcd(cur_g, v)
        cur_coeffs = [(c * x) % m for c in cur_coeffs]
        cur_coeffs[i] = y % m
        cur_g = gg
    scale = t // cur_g
    return [(c * scale) % m for c in cur_coeffs]


def _xgcd(a, b):
    if b == 0:
        return a, 1, 0
    g, x, y = _xgcd(b, a % b)
    return g, y, x - (a // b) * y


# ---------------------------------------------------------------------------
# vector moves (words acting on column vectors from the left)


def _sym(desc, ring, fam, i, j=None, payload=None, zeta=None):
    if zeta is not None:
        return make_symbol(desc, ring, fam, i, zeta=zeta)
    return make_symbol(desc, ring, fam, i, j, payload=payload)


def _eps_family(desc):
    return "qe" if desc.flavor == "quadratic" else "he"


def _r_family(desc):
    return "qr" if desc.flavor == "quadratic" else "hr"


def _l_family(desc):
    return "ql" if desc.flavor == "quadratic" else "hl"


def whitehead_scaling(desc, ring, i, j, u):
    """A word of eps-family symbols evaluating to the block-diagonal member
    scaling coordinate j by u^{-1} and i by u (GL Whitehead trick at rows
    i < j), verified by evaluation."""
    R = ring
    eps = _eps_family(desc)
    uinv = R.inv(u)
    one = R.one

    def rot(a):  # [[0, a],[-a^{-1}, 0]] in the (i, j) GL block
        return [
            (_sym(desc, R, eps, i, j, payload=a), 1),
            (_sym(desc, R, eps, j, i, payload=R.neg(R.inv(a))), 1),
            (_sym(desc, R, eps, i, j, payload=a), 1),
        ]

    syms = rot(u) + [(s, -e) for s, e in reversed(rot(one))]
    w = GeneratorWord(desc, R, syms)
    # verify the diagonal action
    m = w.eval()
    n = desc.n
    expect = [R.one] * (2 * n)
    expect[i - 1] = u
    expect[j - 1] = uinv
    expect[n + i - 1] = R.inv(R.invol(u))
    expect[n + j - 1] = R.invol(u)
    for a in range(2 * n):
        for b in range(2 * n):
            want = expect[a] if a == b else R.zero
            if m.rows[a][b] != want:
                raise IdentityError("whitehead scaling word is wrong")
    return w


def column_reduce_semisimple(vec, desc, pivot=None):
    """Carry the x-block of vec to (0, ..., 0, e) by verified elementary
    moves over a semisimple ring; returns (word, e).

    The ideal generated by the x-entries equals Re afterwards; Hermitian
    low rows are cleared through the column family.
    """
    R = desc.ring
    if not _is_semisimple(R):
        raise ReductionError("column reduction needs a semisimple ring")
    n, r = desc.n, desc.r
    pivot = pivot or n
    eps = _eps_family(desc)
    word = GeneratorWord(desc, R)
    cur = tuple(vec)

    def apply_syms(syms):
        nonlocal word, cur
        w = GeneratorWord(desc, R, syms)
        cur = w.apply(cur)
        word = w.concat(word)

    ideal = R.ideal([cur[i] for i in range(n)])
    e = _idempotent_for_ideal(R, ideal)
    # stage 1: x_pivot + (combination of the others) = u e (Bass's lemma)
    others = frozenset(R.ideal([cur[i] for i in range(n) if i != pivot - 1]))
    i_elt, u, e2 = find_unit_in_coset(R, cur[pivot - 1], others)
    if e2 != e:
        raise ReductionError("idempotent generator mismatch")
    combo = _solve_combo(R, i_elt, [cur[i] for i in range(n) if i != pivot - 1])
    if combo is None:
        raise ReductionError("coset element is not a combination")
    syms = []
    idx = 0
    for i in range(1, n + 1):
        if i == pivot:
            continue
        c = combo[idx]
        idx += 1
        if c != R.zero:
            syms.append((_sym(desc, R, eps, pivot, i, payload=c), 1))
    if syms:
        apply_syms(syms)
    if cur[pivot - 1] != R.mul(u, e):
        raise ReductionError("pivot normalization drifted")
    # stage 2: scale the pivot by u^{-1} via the Whitehead word (the spare
    # row picks up a unit factor, which stays inside the ideal)
    if u != R.one:
        lo = 1 if desc.flavor == "quadratic" else r + 1
        other = next((t for t in range(lo, n + 1) if t != pivot), None)
        if other is None:
            raise ReductionError("no spare row for unit normalization")
        apply_syms(list(whitehead_scaling(desc, R, other, pivot, u).syms))
        if cur[pivot - 1] != e:
            raise ReductionError("unit normalization failed")
    # stage 3: clear the other x rows (all lie in Re)
    syms = []
    zeta = [R.zero] * r
    for i in range(1, n + 1):
        if i == pivot:
            continue
        x = cur[i - 1]
        if x == R.zero:
            continue
        c = next((c for c in R.elements() if R.mul(c, e) == x), None)
        if c is None:
            raise ReductionError("entry escaped the pivot ideal")
        if desc.flavor == "hermitian" and i <= r:
            zeta[i - 1] = R.neg(c)
        else:
            syms.append((_sym(desc, R, eps, i, pivot, payload=R.neg(c)), 1))
    if any(z != R.zero for z in zeta):
        syms.append((_sym(desc, R, "hm", pivot, zeta=tuple(zeta)), 1))
    if syms:
        apply_syms(syms)
    for i in range(1, n + 1):
        want = e if i == pivot else R.zero
        if cur[i - 1] != want:
            raise ReductionError("column reduction incomplete")
    return word, e, cur


def improve_to_unit(vec, desc):
    """Swan's maximal-ideal ascent: a verified word making coordinate n
    equal to 1 over a semisimple ring; the ideal of x-entries strictly
    grows each escape round."""
    R = desc.ring
    n, r = desc.n, desc.r
    word = GeneratorWord(desc, R)
    cur = tuple(vec)
    if unimodular_certificate(R, cur) is None:
        raise ReductionError("vector is not unimodular")
    seen_sizes = []
    for _ in range(len(R.idempotents()) + 2):
        w1, e, cur = column_reduce_semisimple(cur, desc)
        word = w1.concat(word)
        if e == R.one:
            return word, cur
        ideal = R.ideal([e])
        seen_sizes.append(len(ideal))
        if len(seen_sizes) >= 2 and seen_sizes[-1] <= seen_sizes[-2]:
            raise ReductionError("escape failed to enlarge the ideal")
        # find a y-coordinate outside Re
        i0 = next((i for i in range(1, n + 1) if cur[n + i - 1] not in ideal),
                  None)
        if i0 is None:
            raise ReductionError("unimodular vector trapped in a proper ideal")
        if desc.flavor == "quadratic" or i0 >= r + 1:
            fam = _r_family(desc)
            lo = 1 if desc.flavor == "quadratic" else r + 1
            j = next(j for j in range(lo, n + 1) if j != i0)
            mv = GeneratorWord(desc, R,
                               ((_sym(desc, R, fam, j, i0, payload=R.one), 1),))
        else:
            # Hermitian escape for a low y-coordinate through the column
            # family; needs the indicator column to be admissible
            i = next(i for i in range(r + 1, n + 1))
            zeta = tuple(R.one if k == i0 else R.zero for k in range(1, r + 1))
            try:
                mv = GeneratorWord(desc, R,
                                   ((_sym(desc, R, "hrv", i, zeta=zeta), 1),))
            except SymbolError as ex:
                raise ReductionError(
                    "hermitian escape unavailable: %s" % ex) from None
        cur = mv.apply(cur)
        word = mv.concat(word)
    raise ReductionError("ascent did not terminate")


def _descriptor_mod_radical(desc):
    rad, hom = jacobson_radical(desc.ring)
    form_q = induce_quotient_parameter(desc.form, hom)
    a_q = tuple(hom(a) for a in desc.a_data)
    return GroupDescriptor(desc.flavor, desc.n, form_q, a_q,
                           desc.allow_small), hom


def _lift_word(word_bar, desc, hom):
    """Lift a word over R/J back to R, payload by payload (least admissible
    preimage); symbol validity is re-checked on the lifted side."""
    R = desc.ring
    syms = []
    for s, e in word_bar.syms:
        if s.family in VECTOR_FAMILIES:
            zeta = tuple(hom.section(z) for z in s.zeta)
            try:
                syms.append((make_symbol(desc, R, s.family, s.i, zeta=zeta), e))
            except SymbolError as ex:
                raise ReductionError("zeta lift not admissible: %s" % ex)
        else:
            p = hom.section(s.payload)
            if s.i == s.j and s.family in ("qr", "ql", "hr", "hl"):
                p = _lift_into(desc, hom, s.payload, s.family)
            syms.append((make_symbol(desc, R, s.family, s.i, s.j, payload=p), e))
    return GeneratorWord(desc, R, syms)


def _lift_into(desc, hom, target, family):
    R = desc.ring
    lam = desc.lam
    for a in R.elements():
        if hom(a) != target:
            continue
        if family in ("qr", "hr"):
            ok = (a in desc.form.members if desc.flavor == "quadratic"
                  else a == R.neg(R.mul(lam, R.invol(a))))
        else:
            ok = (R.invol(a) in desc.form.members if desc.flavor == "quadratic"
                  else R.invol(a) == R.neg(R.mul(lam, a)))
        if ok:
            return a
    raise ReductionError("no admissible diagonal lift")


def reduce_isotropic_unimodular(vec, desc):
    """A verified word carrying an isotropic unimodular vector to e_{2n}.

    Pipeline: quotient by the radical, Swan ascent there, lift, normalize
    the pivot to 1, clear the second block, kill its last entry through the
    isotropy condition, clear the first block, then hop e_n to e_{2n}.
    """
    R = desc.ring
    n, r = desc.n, desc.r
    cert = unimodular_certificate(R, vec)
    if cert is None:
        raise ReductionError("vector is not unimodular")
    if not is_isotropic(vec, desc):
        raise ReductionError("vector is not isotropic")
    word = GeneratorWord(desc, R)
    cur = tuple(vec)

    def push(w):
        nonlocal word, cur
        cur = w.apply(cur)
        word = w.concat(word)

    desc_bar, hom = _descriptor_mod_radical(desc)
    vec_bar = tuple(hom(x) for x in cur)
    word_bar, _ = improve_to_unit(vec_bar, desc_bar)
    push(_lift_word(word_bar, desc, hom))
    if not R.is_unit(cur[n - 1]):
        raise ReductionError("pivot is not a unit after the radical ascent")
    if cur[n - 1] != R.one:
        if n - 1 < 1 or (desc.flavor == "hermitian" and n - 1 <= r):
            raise ReductionError("no spare row for unit normalization")
        push(whitehead_scaling(desc, R, n - 1, n, cur[n - 1]))
        if cur[n - 1] != R.one:
            raise ReductionError("unit normalization failed")
    lfam = _l_family(desc)
    eps = _eps_family(desc)
    rfam = _r_family(desc)
    for _ in range(2 * r + 2):
        # clear y_1..y_{n-1}
        syms = []
        for i in range(1, n):
            y = cur[n + i - 1]
            if y != R.zero:
                syms.append((_sym(desc, R, lfam, i, n, payload=R.neg(y)), 1))
        if syms:
            push(GeneratorWord(desc, R, syms))
        # kill y_n; isotropy puts it in the admissible diagonal set
        yn = cur[2 * n - 1]
        if yn != R.zero:
            try:
                push(GeneratorWord(
                    desc, R, ((_sym(desc, R, lfam, n, n, payload=R.neg(yn)), 1),)))
            except SymbolError as ex:
                raise ReductionError(
                    "final-entry payload fails the diagonal constraint "
                    "(Lambda too small): %s" % ex) from None
        # clear x_1..x_{n-1}
        syms = []
        zeta = [R.zero] * r
        for i in range(1, n):
            x = cur[i - 1]
            if x == R.zero:
                continue
            if desc.flavor == "hermitian" and i <= r:
                zeta[i - 1] = R.neg(x)
            else:
                syms.append((_sym(desc, R, eps, i, n, payload=R.neg(x)), 1))
        if any(z != R.zero for z in zeta):
            try:
                syms.append((_sym(desc, R, "hm", n, zeta=tuple(zeta)), 1))
            except SymbolError as ex:
                raise ReductionError("low-row clearing not admissible: %s" % ex)
        if syms:
            push(GeneratorWord(desc, R, syms))
        if cur == basis_vector(desc, n):
            break
    if cur != basis_vector(desc, n):
        raise ReductionError("clearing loop did not converge")
    # e_n -> e_{2n}
    try:
        push(GeneratorWord(desc, R,
                           ((_sym(desc, R, lfam, n, n, payload=R.one), 1),)))
        push(GeneratorWord(desc, R,
                           ((_sym(desc, R, rfam, n, n, payload=R.neg(R.one)), 1),)))
    except SymbolError as ex:
        raise ReductionError(
            "final hop needs 1 and -1 admissible on the diagonal: %s" % ex)
    if cur != basis_vector(desc, 2 * n):
        raise ReductionError("reduction did not reach e_{2n}")
    result = ReductionResult(tuple(vec), word)
    if not result.verify(desc):
        raise ReductionError("reduction verification failed")
    return result


# ---------------------------------------------------------------------------
# diagonalization modulo an ideal in the radical


def _diag_conjugate(desc, R, word_syms, D):
    """Conjugate each symbol by the diagonal member D (payload rescaling),
    verified symbol by symbol."""
    n = desc.n
    d = [D.rows[i][i] for i in range(2 * n)]
    Dinv = D.inv()
    out = []
    for s, e in word_syms:
        m = gen_matrix(desc, s, R) if e == 1 else None
        if s.family in VECTOR_FAMILIES:
            i = s.i
            if s.family == "hm":
                scale = d[i - 1]
                zeta = tuple(R.mul(R.inv(d[k]), R.mul(z, scale))
                             for k, z in enumerate(s.zeta))
                zf = R.mul(s.zeta_f, R.mul(scale, scale))
            else:
                scale = d[n + i - 1]
                zeta = tuple(R.mul(R.inv(d[k]), R.mul(z, scale))
                             for k, z in enumerate(s.zeta))
                zf = R.mul(s.zeta_f, R.mul(scale, scale))
            ns = make_symbol(desc, R, s.family, i, zeta=zeta, zeta_f=zf)
        else:
            u, v = _primary(desc, s)
            a = R.mul(R.mul(R.inv(d[u - 1]), s.payload), d[v - 1])
            ns = make_symbol(desc, R, s.family, s.i, s.j, payload=a)
        check = Dinv.mul(gen_matrix(desc, s, R)).mul(D)
        if check != gen_matrix(desc, ns, R):
            raise IdentityError("diagonal conjugation drifted")
        out.append((ns, e))
    return out


def _primary(desc, s):
    n = desc.n
    if s.family in ("qe", "he"):
        return s.i, s.j
    if s.family in ("qr", "hr"):
        return s.i, n + s.j
    return n + s.i, s.j


def diagonalize_mod_radical(beta, desc, ideal):
    """(theta word, D): beta . eval(theta) = D, D a unit diagonal congruent
    to 1 mod the ideal; every theta symbol congruent to I mod the ideal.

    Requires the Hermitian flavor with trivial involution, beta in the
    group with determinant 1, beta = I mod ideal, ideal inside J(R).
    """
    R = desc.ring
    n, r = desc.n, desc.r
    if desc.flavor != "hermitian" or not R.has_trivial_involution():
        raise ReductionError("diagonalization needs hermitian, trivial involution")
    rad, _ = jacobson_radical(R)
    ideal = frozenset(ideal)
    if not ideal <= rad:
        raise ReductionError("ideal not inside the Jacobson radical")
    diag = membership_diagnostic(beta, desc)
    if diag:
        raise ReductionError("beta not a member: %s" % diag)
    if beta.det() != R.one:
        raise ReductionError("beta must have determinant 1")
    ident = Matrix.identity(R, 2 * n)
    if not beta.congruent_mod_ideal(ident, ideal):
        raise ReductionError("beta not congruent to I mod the ideal")
    state = _SweepState(desc, R, beta)
    max_rounds = 8 * len(R.moduli) * max(R.moduli)
    for p in range(n, r, -1):
        for _ in range(max_rounds):
            if _pivot_clean(desc, R, state.cur, p):
                break
            _pivot_pass(desc, R, state, p, ideal)
        if not _pivot_clean(desc, R, state.cur, p):
            raise ReductionError("pivot %d failed to clear" % p)
    # remaining low block: pairs 1..r; entries (n+k, j) via hl, the top-right
    # block is handled with paired column/row composites
    for _ in range(max_rounds):
        if _low_block_clean(desc, R, state.cur) and \
           all(_pivot_clean(desc, R, state.cur, p) for p in range(n, r, -1)):
            break
        _low_block_pass(desc, R, state, ideal)
        for p in range(n, r, -1):
            for _ in range(max_rounds):
                if _pivot_clean(desc, R, state.cur, p):
                    break
                _pivot_pass(desc, R, state, p, ideal)
    if not _low_block_clean(desc, R, state.cur):
        raise ReductionError("low hyperbolic block failed to clear")
    cur = state.cur
    left, right = state.left, state.right
    D = cur
    for i in range(2 * n):
        for j in range(2 * n):
            if i != j and D.rows[i][j] != R.zero:
                raise ReductionError("result not diagonal")
        if not R.is_unit(D.rows[i][i]) or R.sub(D.rows[i][i], R.one) not in ideal:
            raise ReductionError("diagonal entry not a unit congruent to 1")
    # beta theta = D with theta = alpha . D^{-1} gamma D; the left list is
    # in application order, so the gamma word is its reversal
    gamma = GeneratorWord(desc, R, list(reversed(left)))
    alpha = GeneratorWord(desc, R, right)
    conj = _diag_conjugate(desc, R, gamma.syms, D)
    theta = alpha.concat(GeneratorWord(desc, R, conj))
    prod = beta.mul(theta.eval())
    if prod != D:
        raise ReductionError("diagonalization verification failed")
    for s, e in theta.syms:
        m = gen_matrix(desc, s, R)
        if not m.congruent_mod_ideal(ident, ideal):
            raise ReductionError("theta symbol not congruent to I mod ideal")
    return theta, D


def _entry_sym_right(desc, R, u, v, a):
    """A symbol g with g's column action adding a times col u into col v
    (primary entry (u, v)); None when no family covers the position."""
    from .generators import _position_symbol
    return _position_symbol(desc, R, u, v, a)


def _pivot_clean(desc, R, cur, p):
    n = desc.n
    for t in (p, n + p):
        for u in range(1, 2 * n + 1):
            if u != t and (cur.rows[u - 1][t - 1] != R.zero
                           or cur.rows[t - 1][u - 1] != R.zero):
                return False
    return True


class _SweepState:
    """Mutable state for the two-sided diagonalization sweep."""

    def __init__(self, desc, R, mat):
        self.desc = desc
        self.R = R
        self.cur = mat
        self.left = []
        self.right = []

    def lmul(self, sym):
        self.left.append((sym, 1))
        self.cur = gen_matrix(self.desc, sym, self.R).mul(self.cur)

    def rmul(self, sym):
        self.right.append((sym, 1))
        self.cur = self.cur.mul(gen_matrix(self.desc, sym, self.R))


def _vector_move_for(desc, R, u, v, c, p):
    """An hm_p / hrv_p symbol with an indicator column whose primary entry
    sits at (u, v), for the low rows a single ring-element family misses."""
    n, r = desc.n, desc.r

    def indicator(k, val):
        return tuple(val if t == k else R.zero for t in range(1, r + 1))

    try:
        if v == p and 1 <= u <= r:
            return make_symbol(desc, R, "hm", p, zeta=indicator(u, c))
        if v == n + p and 1 <= u <= r:
            return make_symbol(desc, R, "hrv", p, zeta=indicator(u, c))
        if u == n + p and n + 1 <= v <= n + r:
            # entry -conj(zeta_k) at (n+p, n+k) of hm_p
            k = v - n
            return make_symbol(desc, R, "hm", p,
                               zeta=indicator(k, R.neg(R.invol(c))))
        if u == p and n + 1 <= v <= n + r:
            # entry -lam conj(zeta_k) at (p, n+k) of hrv_p
            k = v - n
            lam = desc.lam
            val = R.neg(R.mul(R.inv(lam), R.invol(c)))
            return make_symbol(desc, R, "hrv", p,
                               zeta=indicator(k, R.invol(val)))
    except SymbolError:
        return None
    return None


def _pivot_pass(desc, R, state, p, ideal):
    """One clearing sweep of the pivot pair (p, n+p); entries are re-read
    from the live matrix so mirror entries closed by an earlier move are
    not re-targeted."""
    for (u, v, side) in _pivot_targets(desc, p):
        a = state.cur.rows[u - 1][v - 1]
        if a == R.zero:
            continue
        if side == "col":
            # right op adds col u (pivot entry at (u, u)) into col v
            piv = state.cur.rows[u - 1][u - 1]
            if not R.is_unit(piv):
                raise ReductionError("pivot entry not a unit")
            c = R.neg(R.mul(a, R.inv(piv)))
            s = _entry_sym_right(desc, R, u, v, c)
            if s is None:
                s = _vector_move_for(desc, R, u, v, c, p)
            if s is not None:
                state.rmul(s)
        else:
            # left op adds row v (pivot entry at (v, v)) into row u
            piv = state.cur.rows[v - 1][v - 1]
            if not R.is_unit(piv):
                raise ReductionError("pivot entry not a unit")
            c = R.neg(R.mul(a, R.inv(piv)))
            s = _entry_sym_right(desc, R, u, v, c)
            if s is None:
                s = _vector_move_for(desc, R, u, v, c, p)
            if s is not None:
                state.lmul(s)


def _pivot_targets(desc, p):
    n, r = desc.n, desc.r
    out = []
    for u in range(1, 2 * n + 1):
        if u != n + p:
            out.append((u, n + p, "col"))
    for u in range(1, 2 * n + 1):
        if u != n + p:
            out.append((n + p, u, "row"))
    for u in range(1, 2 * n + 1):
        if u != p:
            out.append((u, p, "col"))
    for u in range(1, 2 * n + 1):
        if u != p:
            out.append((p, u, "row"))
    return out


def _low_block_clean(desc, R, cur):
    n, r = desc.n, desc.r
    idx = list(range(1, r + 1)) + list(range(n + 1, n + r + 1))
    for u in idx:
        for v in idx:
            if u != v and cur.rows[u - 1][v - 1] != R.zero:
                return False
    return True


def _low_block_pass(desc, R, state, ideal):
    n, r = desc.n, desc.r
    for k in range(1, r + 1):
        for j in range(1, r + 1):
            # (n+k, j): direct hl move
            a = state.cur.rows[n + k - 1][j - 1]
            if a != R.zero:
                c = R.neg(R.mul(a, R.inv(state.cur.rows[j - 1][j - 1])))
                state.rmul(make_symbol(desc, R, "hl", k, j, payload=c))
            # (k, n+j): composite through the auxiliary pair
            b = state.cur.rows[k - 1][n + j - 1]
            if b != R.zero:
                _composite_clear(desc, R, state, k, n + j, ideal)


def _composite_clear(desc, R, state, u, v, ideal):
    """Clear the (u, v) entry of the low hyperbolic block: no single family
    covers it, so route the correction through the auxiliary index n via a
    verified hm/hrv pair whose second-order product lands on (u, v)."""
    n, r = desc.n, desc.r
    if not (u <= r and n + 1 <= v <= n + r):
        raise ReductionError("no clearing move for entry (%d, %d)" % (u, v))
    k, j = u, v - n
    before = state.cur.rows[u - 1][v - 1]
    fac = _factor_in_ideal(R, before, ideal)
    if fac is None:
        raise ReductionError("entry %r not a product of ideal elements" % before)
    a, b = fac
    # both sign choices and orders are attempted; the move is kept only if
    # it strictly deepens the entry's ideal depth
    for sa in sorted(R.units):
        for order in (0, 1):
            z1 = tuple(R.mul(sa, a) if t == k else R.zero
                       for t in range(1, r + 1))
            z2 = tuple(b if t == j else R.zero for t in range(1, r + 1))
            try:
                c1 = make_symbol(desc, R, "hm", n, zeta=z1)
                c2 = make_symbol(desc, R, "hrv", n, zeta=z2)
            except SymbolError:
                continue
            pair = (c1, c2) if order == 0 else (c2, c1)
            m = gen_matrix(desc, pair[0], R).mul(gen_matrix(desc, pair[1], R))
            trial = state.cur.mul(m)
            if _ideal_depth(R, trial.rows[u - 1][v - 1], ideal) > \
               _ideal_depth(R, before, ideal):
                state.rmul(pair[0])
                state.rmul(pair[1])
                return
    raise ReductionError("composite clearing made no progress at (%d, %d)"
                         % (u, v))


def _ideal_depth(R, x, ideal):
    """Largest t <= 8 with x in ideal^t (ideal powers as element sets)."""
    if x == R.zero:
        return 99
    power = frozenset(ideal)
    t = 0
    while t < 8:
        if x not in power:
            return t
        t += 1
        power = R.additive_closure(
            {R.mul(a, b) for a in power for b in ideal})
    return t


def _factor_in_ideal(R, x, ideal):
    for a in sorted(ideal):
        for b in sorted(ideal):
            if R.mul(a, b) == x:
                return a, b
    return None


# ---------------------------------------------------------------------------
# dilation and the local-global patch


@dataclass
class DilationResult:
    b: int
    power: int
    conductor: int
    word: GeneratorWord
    detail: str = ""


def dilate(desc, loc, ws, cap=16):
    """Globalize a localized factorization: from a word over R_s[X] with
    evaluation I at X=0, produce b in the s-power cycle and a word over
    R[X] with evaluation I at X=0 whose localization equals the input
    evaluated at (image of b) X.  All equalities are verified exactly.
    """
    R = desc.ring
    Rs = loc.target
    s = loc.inverted
    # least power of s that is idempotent (the cycle entry point)
    b = s
    power = 1
    while R.mul(b, b) != b:
        b = R.mul(b, s)
        power += 1
        if power > R.size + 1:
            raise ReductionError("no idempotent power of s")
    # injectivity conductor for the localization on s^k multiples
    conductor = None
    for k in range(1, cap + 1):
        sk = R.one
        for _ in range(k):
            sk = R.mul(sk, s)
        mult = {R.mul(sk, r) for r in R.elements()}
        if all(loc(x) != Rs.zero or x == R.zero for x in mult):
            conductor = k
            break
    if conductor is None:
        raise ReductionError("no injectivity conductor within cap %d" % cap)
    u = loc(b)
    if not Rs.is_unit(u):
        raise ReductionError("image of the dilation coefficient not a unit")
    ws_b = substitute_word(ws, "X->cX", u)
    nf = normal_form_congruent_X(ws_b)
    # lift with payloads placed inside the idempotent slice eR of R
    target_poly = PolyRing(R, 1)
    lifted_syms = []
    for eps, core in nf:
        seg = []
        for sym, e in eps.syms:
            seg.append((_lift_symbol(desc, loc, sym, target_poly), e))
        core_l = _lift_symbol(desc, loc, core, target_poly)
        lifted_syms.extend(seg)
        lifted_syms.append((core_l, 1))
        for sym, e in reversed(seg):
            lifted_syms.append((sym, -e))
    W = GeneratorWord(desc, target_poly, lifted_syms)
    # certification 1: evaluation at X=0 is the identity over R
    from .generators import _eval_at_zero
    if not _eval_at_zero(W).is_identity():
        raise ReductionError("dilated word is not I at X = 0")
    # certification 2: the localization image matches the dilated input
    target = _map_matrix_coeffs(ws_b.eval(), lambda c: c, Rs)
    got = _map_matrix_coeffs(W.eval(), loc, Rs)
    if got != target:
        raise ReductionError("dilated word fails the localization equality")
    return DilationResult(b, power, conductor, W)


def _lift_symbol(desc, loc, sym, target_poly):
    """Lift a symbol over R_s[X] to R[X], payload coefficients landing in
    the idempotent slice eR (so the localization fixes them)."""
    R = desc.ring
    e = loc.idempotent

    def lift_elt(y):
        a = loc.hom.section(y)
        return R.mul(e, a)  # place the lift inside eR

    def lift_poly(p):
        coeffs = {}
        for exps, c in p.terms:
            v = lift_elt(c)
            if v != R.zero:
                coeffs[exps] = v
        return target_poly._make(coeffs)

    if sym.family in VECTOR_FAMILIES:
        zeta = tuple(lift_poly(z) for z in sym.zeta)
        zf = lift_poly(sym.zeta_f)
        try:
            return make_symbol(desc, target_poly, sym.family, sym.i,
                               zeta=zeta, zeta_f=zf)
        except SymbolError:
            return make_symbol(desc, target_poly, sym.family, sym.i, zeta=zeta)
    return make_symbol(desc, target_poly, sym.family, sym.i, sym.j,
                       payload=lift_poly(sym.payload))


def _map_matrix_coeffs(mat, hom, target_base):
    ring = mat.ring
    if isinstance(ring, PolyRing):
        target = PolyRing(target_base, ring.nvars)
        rows = [[ring.map_coeffs(p, hom, target) for p in row]
                for row in mat.rows]
        return Matrix(target, rows)
    rows = [[hom(x) for x in row] for row in mat.rows]
    return Matrix(target_base, rows)


def _localize_descriptor(desc, loc):
    form_loc = induce_localized_parameter(desc.form, loc)
    a_loc = tuple(loc(a) for a in desc.a_data)
    return GroupDescriptor(desc.flavor, desc.n, form_loc, a_loc,
                           desc.allow_small)


def local_global_patch(alpha, desc, witnesses=None, alpha_word=None, cap=16):
    """Assemble a global elementary word for alpha(X) from localized
    factorizations at every maximal ideal (Quillen--Suslin patching).

    alpha is a Matrix over R[X], a member with alpha(0) = I; witnesses maps
    each maximal ideal (frozenset) to a word over the local factor, or is
    None, in which case a supplied alpha_word is projected per ideal.
    Returns a PatchReport whose assembled word is verified to evaluate to
    alpha exactly.
    """
    R = desc.ring
    P = alpha.ring
    report = PatchReport(status="failed")
    diag = membership_diagnostic(alpha, desc)
    if diag:
        report.detail = "alpha not a member: %s" % diag
        return report
    base0 = tuple(R.zero for _ in range(1))
    ev0 = Matrix(R, [[P.eval_at(p, (R.zero,)) for p in row]
                     for row in alpha.rows])
    if not ev0.is_identity():
        report.detail = "alpha(0) is not the identity"
        return report
    ideals = enumerate_maximal_ideals(R)
    pieces = []
    for m in ideals:
        loc = localize_at_maximal(R, m)
        desc_m = _localize_descriptor(desc, loc)
        Pm = PolyRing(loc.target, 1)
        alpha_m = _map_matrix_coeffs(alpha, loc, loc.target)
        wm = None
        if witnesses is not None and frozenset(m) in witnesses:
            wm = witnesses[frozenset(m)]
        elif alpha_word is not None:
            wm = _project_word(alpha_word, desc_m, loc, Pm)
        if wm is None:
            report.status = "unknown"
            report.detail = "no localized factorization available"
            return report
        if wm.eval() != alpha_m:
            report.status = "hypothesis-violated"
            report.detail = "localized witness does not evaluate to alpha_m"
            return report
        dil = dilate(desc, loc, wm, cap=cap)
        pieces.append((m, loc, dil))
        report.ideals.append(sorted(m))
        report.dilation.append({"b": dil.b, "l": dil.power,
                                "conductor": dil.conductor,
                                "length": len(dil.word)})
    # the b_i are the orthogonal primitive idempotents, so they sum to 1 and
    # the telescoped product collapses to prod_i alpha(b_i X)
    total = R.zero
    for _, _, dil in pieces:
        total = R.add(total, dil.b)
    if total != R.one:
        report.detail = "cover coefficients do not sum to 1"
        return report
    assembled = GeneratorWord(desc, P)
    prod = Matrix.identity(P, 2 * desc.n)
    for m, loc, dil in pieces:
        piece_eval = dil.word.eval()
        expected = _substitute_matrix(alpha, dil.b)
        if piece_eval != expected:
            report.detail = "telescoping factor differs from alpha(b_i X)"
            return report
        assembled = assembled.concat(dil.word)
        prod = prod.mul(piece_eval)
    if prod != alpha:
        report.detail = "assembled product does not reproduce alpha"
        return report
    report.status = "success"
    report.assembled = assembled
    return report


def _substitute_matrix(mat, c):
    P = mat.ring
    rows = [[substitute(p, "X->cX", c) for p in row] for row in mat.rows]
    return Matrix(P, rows)


def _project_word(word_glob, desc_m, loc, Pm):
    from .generators import make_symbol as mk

    def proj(p):
        return word_glob.ring.map_coeffs(p, loc, Pm)

    syms = []
    for s, e in word_glob.syms:
        if s.family in VECTOR_FAMILIES:
            syms.append((mk(desc_m, Pm, s.family, s.i,
                            zeta=tuple(proj(z) for z in s.zeta),
                            zeta_f=proj(s.zeta_f)), e))
        else:
            syms.append((mk(desc_m, Pm, s.family, s.i, s.j,
                            payload=proj(s.payload)), e))
    return GeneratorWord(desc_m, Pm, syms)


# ---------------------------------------------------------------------------
# normality: conjugating elementary words into elementary words


def _m_form_atoms(desc, word_in):
    """Rewrite a word as a product of symbols g = I + M(v0, w0) with the
    witnessing vectors attached; vector-family symbols are split into
    unit-component pieces first so the v0 stay unimodular."""
    R = desc.ring
    n = desc.n
    lam = desc.lam
    atoms = []
    queue = []
    for s, e in word_in.syms:
        if e == 1:
            queue.append(s)
        else:
            queue.extend(t for t, _ in gen_inverse(desc, s, R).syms)
    changed = True
    flat = []
    for s in queue:
        if s.family in VECTOR_FAMILIES and not _vector_atom_ok(desc, s):
            flat.extend(_split_vector_units(desc, s))
        else:
            flat.append(s)
    for s in flat:
        pair = _m_pair(desc, s)
        if pair is None:
            raise ReductionError(
                "symbol %s is not of the I + M(v, w) shape over this ring"
                % s.describe())
        v0, w0 = pair
        target = gen_matrix(desc, s, R)
        got = Matrix.identity(R, 2 * n).add(build_M(v0, w0, desc))
        if got != target:
            raise ReductionError("M-form witness failed for %s" % s.describe())
        atoms.append((s, v0, w0))
    return atoms


def _vector_atom_ok(desc, s):
    R = desc.ring
    v0, w0 = _m_pair_vector(desc, s)
    got = Matrix.identity(R, 2 * desc.n).add(build_M(v0, w0, desc))
    return (got == gen_matrix(desc, s, R)
            and unimodular_certificate(R, v0) is not None)


def _split_vector_units(desc, s):
    """Split a vector symbol into pieces whose zeta entries are단 single
    unit components (sums of units per entry), via the splitting identity."""
    R = desc.ring
    out = []
    remaining = s
    # peel one unit component at a time
    def unit_decomp(z):
        if z == R.zero:
            return []
        for count in (1, 2, 3):
            for combo in itertools.product(sorted(R.units), repeat=count):
                acc = R.zero
                for u in combo:
                    acc = R.add(acc, u)
                if acc == z:
                    return list(combo)
        raise ReductionError("element %r is not a short sum of units" % z)

    pieces = []
    for k, z in enumerate(remaining.zeta):
        for u in unit_decomp(z):
            zeta = tuple(u if t == k else R.zero
                         for t in range(len(remaining.zeta)))
            pieces.append(zeta)
    # recombine with corrections: theta(z1) theta(z2) = theta(z1+z2) corr, so
    # theta(total) = theta(z1) theta(z2) corr^{-1} ... applied iteratively
    syms = []
    if not pieces:
        return []
    acc = pieces[0]
    syms.append(make_symbol(desc, R, s.family, s.i, zeta=acc))
    for nxt in pieces[1:]:
        lhs, rhs = split_vector(desc, R, s.family, s.i, acc, nxt)
        # theta(acc) theta(nxt) = theta(acc+nxt) corr  =>
        # theta(acc+nxt) = theta(acc) theta(nxt) corr^{-1}
        corr = rhs.syms[-1][0]
        syms.append(make_symbol(desc, R, s.family, s.i, zeta=nxt))
        from dataclasses import replace as _replace
        syms.append(_replace(corr, payload=R.neg(corr.payload)))
        acc = tuple(R.add(a, b) for a, b in zip(acc, nxt))
    # final adjustment: stored zeta_f of s versus canonical chain
    prod = Matrix.identity(R, 2 * desc.n)
    for t in syms:
        prod = prod.mul(gen_matrix(desc, t, R))
    target = gen_matrix(desc, s, R)
    if prod != target:
        resid = prod.inv().mul(target)
        fixed = False
        for fam in ("hl", "hr"):
            for payload in R.elements():
                try:
                    cand = make_symbol(desc, R, fam, s.i, s.i, payload=payload)
                except SymbolError:
                    continue
                if gen_matrix(desc, cand, R) == resid:
                    syms.append(cand)
                    fixed = True
                    break
            if fixed:
                break
        if not fixed:
            raise ReductionError("unit splitting residual not a diagonal symbol")
    return syms


def _m_pair(desc, s):
    R = desc.ring
    n = desc.n
    lam = desc.lam
    if s.family in VECTOR_FAMILIES:
        return _m_pair_vector(desc, s)
    i, j, a = s.i, s.j, s.payload
    e = lambda k: basis_vector(desc, k)
    def scaled(k, c):
        v = [R.zero] * (2 * n)
        v[k - 1] = c
        return tuple(v)
    if s.family in ("qe", "he"):
        return e(i), scaled(n + j, a)
    if s.family in ("qr", "hr"):
        if i != j:
            return e(i), scaled(j, R.mul(R.invol(lam), a))
        # I + a e_{i, n+i} = I + M(e_i, e_i d) with (lam - 1) d = a
        for d in R.elements():
            if R.mul(R.sub(lam, R.one), d) == a:
                return e(i), scaled(i, d)
        return None
    if s.family in ("ql", "hl"):
        if i != j:
            return e(n + i), scaled(n + j, a)
        for d in R.elements():
            cand = scaled(n + i, d)
            got = Matrix.identity(R, 2 * n).add(build_M(e(n + i), cand, desc))
            if got == gen_matrix(desc, s, R):
                return e(n + i), cand
        return None
    return None


def _m_pair_vector(desc, s):
    R = desc.ring
    n = desc.n
    v = [R.zero] * (2 * n)
    for k, z in enumerate(s.zeta, start=1):
        ak = desc.a_data[k - 1]
        v[k - 1] = z
        v[n + k - 1] = R.neg(R.mul(ak, z))
    if s.family == "hm":
        w = basis_vector(desc, n + s.i)
    else:
        w = None
        for c in sorted(R.units):
            cand = [R.zero] * (2 * n)
            cand[s.i - 1] = c
            got = Matrix.identity(R, 2 * n).add(
                build_M(tuple(v), tuple(cand), desc))
            if got == gen_matrix(desc, s, R):
                w = tuple(cand)
                break
        if w is None:
            return None
        return tuple(v), w
    return tuple(v), tuple(w)


def conjugate_into_E(beta, alpha_word, desc, cap=16):
    """A verified word evaluating to beta . eval(alpha_word) . beta^{-1}.

    Follows the normality pipeline: each generator becomes I + M(v, w)
    with v = beta v0 unimodular isotropic; gamma(X) = I + X M(v, w) is
    factored locally (reduction + key5 factorization) and patched globally,
    then evaluated at X = 1.
    """
    R = desc.ring
    n = desc.n
    if not R.has_trivial_involution():
        raise ReductionError(
            "conjugation pipeline implemented for trivial involution")
    diag = membership_diagnostic(beta, desc)
    if diag:
        raise ReductionError("beta not a member: %s" % diag)
    beta_inv = beta.inv()
    atoms = _m_form_atoms(desc, alpha_word)
    out = GeneratorWord(desc, R)
    for s, v0, w0 in atoms:
        v = beta.apply(v0)
        w = beta.apply(w0)
        target = beta.mul(gen_matrix(desc, s, R)).mul(beta_inv)
        got = Matrix.identity(R, 2 * n).add(build_M(v, w, desc))
        if got != target:
            raise ReductionError("conjugated M-form drifted (involution?)")
        word_piece = _factor_via_patch(desc, v, w, cap=cap)
        if word_piece.eval() != target:
            raise ReductionError("atom factorization failed verification")
        out = out.concat(word_piece)
    expect = beta.mul(alpha_word.eval()).mul(beta_inv)
    if out.eval() != expect:
        raise ReductionError("conjugation result failed verification")
    return out


def _factor_via_patch(desc, v, w, cap=16):
    """Factor I + M(v, w) through gamma(X) = I + X M(v, w), local key5
    factorizations, the patch, and evaluation at X = 1."""
    R = desc.ring
    n = desc.n
    P = PolyRing(R, 1)
    if unimodular_certificate(R, v) is None:
        raise ReductionError("conjugated vector not unimodular")
    if inner(v, w, desc) != R.zero:
        raise ReductionError("conjugated pairing does not vanish")
    gamma = Matrix.identity(P, 2 * n).add(
        _scale_poly_matrix(build_M(v, w, desc), P))
    witnesses = {}
    for m in enumerate_maximal_ideals(R):
        loc = localize_at_maximal(R, m)
        desc_m = _localize_descriptor(desc, loc)
        Rm = loc.target
        Pm = PolyRing(Rm, 1)
        vm = tuple(loc(x) for x in v)
        wm = tuple(loc(x) for x in w)
        red = reduce_isotropic_unimodular(vm, desc_m)
        eps = red.word.inverse()  # v_m = eval(eps) e_{2n}
        eps_poly = _word_to_poly(desc_m, eps, Pm)
        wX = tuple(Pm.monomial(c, 1) if c != Rm.zero else Pm.zero for c in wm)
        piece = factor_I_plus_M(desc_m, eps_poly, wX, ring=Pm)
        witnesses[frozenset(m)] = piece
    report = local_global_patch(gamma, desc, witnesses=witnesses, cap=cap)
    if report.status != "success":
        raise ReductionError("patch failed: %s %s" % (report.status,
                                                      report.detail))
    word1 = substitute_word(report.assembled, "X->const", R.one)
    # X -> 1 collapses to constants: rebuild over the base ring
    out = _word_to_base(desc, word1)
    return out


def _scale_poly_matrix(mat, P):
    rows = [[P.monomial(c, 1) if c != mat.ring.zero else P.zero
             for c in row] for row in mat.rows]
    return Matrix(P, rows)


def _word_to_poly(desc, word_in, P):
    def lift(c):
        return P.constant(c)
    return word_in.substitute_payloads(lift, P)


def _word_to_base(desc, word_in):
    R = desc.ring
    P = word_in.ring

    def drop(p):
        return p.constant_coeff()

    syms = []
    for s, e in word_in.syms:
        if s.family in VECTOR_FAMILIES:
            syms.append((make_symbol(desc, R, s.family, s.i,
                                     zeta=tuple(drop(z) for z in s.zeta),
                                     zeta_f=drop(s.zeta_f)), e))
        else:
            syms.append((make_symbol(desc, R, s.family, s.i, s.j,
                                     payload=drop(s.payload)), e))
    return GeneratorWord(desc, R, syms)


# ---------------------------------------------------------------------------
# breadth-first closure oracle


def bfs_closure(desc, cap_elements=2_000_000, generators=None):
    """Exact closure of the elementary generator set under multiplication.

    Single-factor residue rings go through a vectorized numpy search;
    otherwise a plain breadth-first walk.  Returns a MembershipOracle; when
    the cap is exceeded the oracle is marked incomplete (inconclusive
    answers instead of false negatives).
    """
    from .generators import all_symbols
    R = desc.ring
    n = desc.n
    if generators is None:
        syms = all_symbols(desc)
        gens = []
        seen = set()
        for s in syms:
            m = gen_matrix(desc, s, R)
            k = _pack(m)
            if k not in seen:
                seen.add(k)
                gens.append(m)
            mi = gen_inverse(desc, s, R).eval()
            k = _pack(mi)
            if k not in seen:
                seen.add(k)
                gens.append(mi)
    else:
        gens = generators
    if len(R.moduli) == 1:
        return _bfs_numpy(desc, gens, cap_elements)
    return _bfs_python(desc, gens, cap_elements)


def _bfs_python(desc, gens, cap):
    R = desc.ring
    ident = Matrix.identity(R, 2 * desc.n)
    seen = {_pack(ident)}
    frontier = [ident]
    while frontier:
        nxt = []
        for m in frontier:
            for g in gens:
                prod = m.mul(g)
                key = _pack(prod)
                if key not in seen:
                    if len(seen) >= cap:
                        return MembershipOracle("bfs-closure", seen, len(seen),
                                                False, cap)
                    seen.add(key)
                    nxt.append(prod)
        frontier = nxt
    return MembershipOracle("bfs-closure", seen, len(seen), True, cap)


def _bfs_numpy(desc, gens, cap):
    import numpy as np
    R = desc.ring
    m = R.moduli[0]
    d = 2 * desc.n
    garr = np.array([[ [g.rows[i][j] for j in range(d)] for i in range(d)]
                     for g in gens], dtype=np.int64)
    ident = np.eye(d, dtype=np.int64)[None, :, :]
    weights = (m ** np.arange(d * d, dtype=np.uint64)).reshape(d, d) \
        if d * d * math.log2(m) <= 63 else None

    def keys(batch):
        if weights is not None:
            return (batch.astype(np.uint64) * weights[None]).reshape(
                batch.shape[0], -1).sum(axis=1)
        flat = np.ascontiguousarray(batch.reshape(batch.shape[0], -1)
                                    .astype(np.uint8))
        return flat.view([('', np.uint8)] * flat.shape[1]).reshape(-1)

    seen = set(keys(ident).tolist()) if weights is not None else None
    seen_bytes = None
    if weights is None:
        seen_bytes = {batch.tobytes() for batch in ident.astype(np.uint8)}
    frontier = ident
    total = 1
    complete = True
    while frontier.shape[0]:
        prods = np.einsum("nij,gjk->ngik", frontier, garr) % m
        prods = prods.reshape(-1, d, d)
        if weights is not None:
            kk = keys(prods)
            order = np.argsort(kk, kind="stable")
            kk = kk[order]
            prods = prods[order]
            uniq = np.ones(len(kk), dtype=bool)
            uniq[1:] = kk[1:] != kk[:-1]
            kk = kk[uniq]
            prods = prods[uniq]
            fresh = np.array([k not in seen for k in kk.tolist()])
            newk = kk[fresh]
            frontier = prods[fresh]
            for k in newk.tolist():
                seen.add(k)
            total += len(newk)
        else:
            fresh_rows = []
            for row in prods.astype(np.uint8):
                b = row.tobytes()
                if b not in seen_bytes:
                    seen_bytes.add(b)
                    fresh_rows.append(row)
            frontier = np.array(fresh_rows, dtype=np.int64) \
                if fresh_rows else np.zeros((0, d, d), dtype=np.int64)
            total += len(fresh_rows)
        if total > cap:
            complete = False
            break
    store = seen if weights is not None else seen_bytes
    oracle = MembershipOracle("bfs-closure", None, total, complete, cap)
    oracle.closure = store
    oracle._numpy_meta = (m, d, weights)
    return oracle


def oracle_contains(oracle, mat):
    meta = getattr(oracle, "_numpy_meta", None)
    if meta is None:
        return oracle.contains(mat)
    import numpy as np
    m, d, weights = meta
    arr = np.array([[mat.rows[i][j] for j in range(d)] for i in range(d)],
                   dtype=np.int64)
    if weights is not None:
        key = int((arr.astype(np.uint64) * weights).sum())
    else:
        key = arr.astype(np.uint8).tobytes()
    if key in oracle.closure:
        return True
    return False if oracle.complete else None


def symplectic_group_order(n, q):
    """|Sp(2n, q)| = q^(n^2) prod_{i=1..n} (q^(2i) - 1): the independent
    cross-check for the closure size."""
    order = q ** (n * n)
    for i in range(1, n + 1):
        order *= q ** (2 * i) - 1
    return order


def commutator_containment_check(desc, s, l, samples, seed, oracle,
                                 word_len=4):
    """Spot check: commutators of localized generators with members
    congruent to I mod s^l land in the elementary closure.

    Returns a dict with pass / fail / unknown counts; report-only.
    """
    import random
    from .generators import all_symbols
    R = desc.ring
    rnd = random.Random(seed)
    loc = localize_at_element(R, s)
    sl = R.one
    for _ in range(l):
        sl = R.mul(sl, s)
    ideal = sorted(R.ideal([sl]))
    syms = all_symbols(desc)
    passc = failc = unknown = 0
    details = []
    for case in range(samples):
        # sigma: a word with payloads in s^l R
        wsyms = []
        for _ in range(word_len):
            t = rnd.choice(syms)
            if t.family in VECTOR_FAMILIES:
                zeta = tuple(R.mul(sl, z) for z in t.zeta)
                try:
                    wsyms.append((make_symbol(desc, R, t.family, t.i,
                                              zeta=zeta), 1))
                except SymbolError:
                    continue
            else:
                p = R.mul(sl, t.payload)
                try:
                    wsyms.append((make_symbol(desc, R, t.family, t.i, t.j,
                                              payload=p), 1))
                except SymbolError:
                    continue
        sigma = GeneratorWord(desc, R, wsyms).eval()
        # theta(a/s): pull a / s back through the localization
        t = rnd.choice([x for x in syms if x.family not in VECTOR_FAMILIES
                        and x.i != x.j])
        a_over_s = None
        target = loc.target
        av = rnd.randrange(target.size)
        sv = loc(s)
        val = target.mul(av, target.inv(sv))
        pull = loc.hom.section(val)
        theta = gen_matrix(desc, make_symbol(desc, R, t.family, t.i, t.j,
                                             payload=pull), R)
        comm = theta.mul(sigma).mul(theta.inv()).mul(sigma.inv())
        res = oracle_contains(oracle, comm)
        if res is True:
            passc += 1
        elif res is False:
            failc += 1
            details.append({"case": case, "verdict": "fail"})
        else:
            unknown += 1
    return {"pass": passc, "fail": failc, "unknown": unknown,
            "details": details}

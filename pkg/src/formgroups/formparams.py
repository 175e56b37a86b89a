"""Form parameters and form rings.

A form parameter for (R, -, lam) is an additive subgroup L with
Lmin = {a - lam*conj(a)} <= L <= Lmax = {a : a = -lam*conj(a)}, closed
under a -> conj(x) a x.  Finite-ring parameters are stored extensionally
as frozensets; the induced parameter on R[X] is a membership predicate
computed degree slice by degree slice, since each slice is a finite
additive group.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field

from .rings import FiniteRing, PolyRing, RingError


class FormParameterError(ValueError):
    pass


def lambda_min(ring, lam):
    """{a - lam*conj(a) : a in R} (an additive, conjugation-closed subgroup)."""
    image = {ring.sub(a, ring.mul(lam, ring.invol(a))) for a in ring.elements()}
    return ring.additive_closure(image)


def lambda_max(ring, lam):
    """{a : a = -lam*conj(a)}."""
    return frozenset(
        a for a in ring.elements()
        if a == ring.neg(ring.mul(lam, ring.invol(a)))
    )


def _check_lambda(ring, lam):
    if ring.mul(lam, ring.invol(lam)) != ring.one:
        raise FormParameterError("lambda * conj(lambda) != 1")


@dataclass(frozen=True)
class FormParameter:
    """An extensional form parameter on a finite ring."""

    ring: FiniteRing
    lam: int
    members: frozenset
    generators: tuple = ()

    def __contains__(self, a):
        return a in self.members

    def verify(self):
        ring = self.ring
        lmin = lambda_min(ring, self.lam)
        lmax = lambda_max(ring, self.lam)
        if not lmin <= self.members:
            raise FormParameterError("Lambda_min not contained")
        if not self.members <= lmax:
            bad = next(iter(self.members - lmax))
            raise FormParameterError("element %d escapes Lambda_max" % bad)
        for a in self.members:
            for b in self.members:
                if ring.add(a, b) not in self.members:
                    raise FormParameterError("not additively closed")
            for x in ring.elements():
                if ring.mul(ring.invol(x), ring.mul(a, x)) not in self.members:
                    raise FormParameterError("not conjugation closed")
        return True


def build_form_parameter(ring, lam, generators=()):
    """Smallest form parameter containing Lambda_min and the generators.

    Closure under addition and a -> conj(x) a x; errors if the closure
    escapes Lambda_max, naming the offending element.
    """
    _check_lambda(ring, lam)
    lmax = lambda_max(ring, lam)
    current = set(lambda_min(ring, lam))
    frontier = list(set(generators) - current)
    for g in generators:
        if g not in lmax:
            raise FormParameterError(
                "invalid form parameter: generator %d is outside Lambda_max" % g)
    current |= set(generators)
    # alternate additive and conjugation closure until stable
    while True:
        grew = False
        snapshot = list(current)
        for a in snapshot:
            for b in snapshot:
                s = ring.add(a, b)
                if s not in current:
                    current.add(s)
                    grew = True
            for x in ring.elements():
                c = ring.mul(ring.invol(x), ring.mul(a, x))
                if c not in current:
                    current.add(c)
                    grew = True
        if not grew:
            break
    for a in current:
        if a not in lmax:
            raise FormParameterError(
                "invalid form parameter: closure reaches %d outside Lambda_max" % a)
    return FormParameter(ring, lam, frozenset(current), tuple(sorted(set(generators))))


@dataclass(frozen=True)
class FormRing:
    """A finite ring together with a validated form parameter."""

    ring: FiniteRing
    lam: int
    param: FormParameter

    def __post_init__(self):
        _check_lambda(self.ring, self.lam)
        if self.param.ring is not self.ring and self.param.ring != self.ring:
            raise FormParameterError("parameter belongs to a different ring")
        self.param.verify()

    @property
    def members(self):
        return self.param.members

    def spec(self):
        gens = ",".join(str(g) for g in self.param.generators)
        return "%s:lambda=%d:gens=%s" % (self.ring.label, self.lam, gens)


def form_ring(ring, lam, generators=()):
    return FormRing(ring, lam, build_form_parameter(ring, lam, generators))


def form_ring_max(ring, lam):
    """The form ring with the largest parameter Lambda = Lambda_max."""
    lmax = lambda_max(ring, lam)
    return FormRing(ring, lam, FormParameter(ring, lam, lmax, tuple(sorted(lmax))))


def form_ring_min(ring, lam):
    return form_ring(ring, lam, ())


class PolyFormParameter:
    """Membership predicate for Lambda[X] (or Lambda[X, T]), the smallest
    form parameter on the polynomial ring containing Lambda.

    The closure of {conj(x) a x : a in Lambda, x in R[X]} plus the minimal
    parameter of R[X] decomposes coefficientwise: writing cross(a; c, d) =
    conj(c) a d + conj(d) a c and pure(a; c) = conj(c) a c, a polynomial
    lies in Lambda[X] iff its constant coefficient lies in Lambda, each
    coefficient at an exponent 2e' (all components even) lies in the
    additive closure of Lambda_min, crosses and pures, and every other
    coefficient lies in the closure of Lambda_min and crosses.  (Taking x
    a single monomial isolates pure terms; subtracting them from a
    two-monomial x isolates crosses, so the slices are independent.)
    """

    def __init__(self, form: FormRing, poly_ring: PolyRing):
        if poly_ring.base != form.ring:
            raise FormParameterError("polynomial ring over the wrong base")
        self.form = form
        self.poly = poly_ring
        ring = form.ring
        lmin = lambda_min(ring, form.lam)
        crosses = set(lmin)
        pures = set()
        for a in form.members:
            for c in ring.elements():
                pures.add(ring.mul(ring.invol(c), ring.mul(a, c)))
                for d in ring.elements():
                    crosses.add(ring.add(
                        ring.mul(ring.invol(c), ring.mul(a, d)),
                        ring.mul(ring.invol(d), ring.mul(a, c))))
        self._odd = ring.additive_closure(crosses)
        self._even = ring.additive_closure(crosses | pures)
        self._const = form.members

    def slice_for(self, exps):
        if all(e == 0 for e in exps):
            return self._const
        if all(e % 2 == 0 for e in exps):
            return self._even
        return self._odd

    def __contains__(self, p):
        if p.ring.base != self.form.ring:
            raise FormParameterError("element of a different polynomial ring")
        return all(c in self.slice_for(e) for e, c in p.terms)


def induce_poly_parameter(form: FormRing, poly_ring: PolyRing = None):
    if poly_ring is None:
        poly_ring = PolyRing(form.ring, 1)
    return PolyFormParameter(form, poly_ring)


def induce_localized_parameter(form: FormRing, loc):
    """Lambda_s: the image of Lambda under the localization map, closed up."""
    target = loc.target
    lam_t = loc(form.lam)
    image = {loc(a) for a in form.members}
    closed = set(target.additive_closure(image))
    while True:
        extra = {
            target.mul(target.invol(x), target.mul(a, x))
            for a in closed for x in target.elements()
        } - closed
        if not extra:
            break
        closed = set(target.additive_closure(closed | extra))
    param = FormParameter(target, lam_t, frozenset(closed),
                          tuple(sorted({loc(g) for g in form.param.generators})))
    return FormRing(target, lam_t, param)


def induce_quotient_parameter(form: FormRing, hom):
    """The form ring on R/I induced by a quotient map (image parameter)."""
    target = hom.target
    lam_t = hom(form.lam)
    image = {hom(a) for a in form.members}
    closed = set(target.additive_closure(image))
    while True:
        extra = {
            target.mul(target.invol(x), target.mul(a, x))
            for a in closed for x in target.elements()
        } - closed
        if not extra:
            break
        closed = set(target.additive_closure(closed | extra))
    param = FormParameter(target, lam_t, frozenset(closed),
                          tuple(sorted({hom(g) for g in form.param.generators})))
    return FormRing(target, lam_t, param)

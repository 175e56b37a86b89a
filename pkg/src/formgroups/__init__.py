"""Exact computational workbench for form rings and their unitary groups.

Layers: rings (finite rings, polynomials, localization), formparams (form
parameters), groups (matrices, forms, membership), generators (elementary
generator words and identities), reduction (constructive theorems and the
closure oracle), cli (reporting front end).
"""

from .rings import (
    FiniteRing,
    PolyRing,
    PolyElement,
    RingError,
    make_zmod,
    make_hyperbolic_double,
    make_product,
    localize_at_element,
    localize_at_maximal,
    enumerate_maximal_ideals,
    jacobson_radical,
    quotient_map,
    substitute,
    parse_ring_spec,
)
from .formparams import (
    FormParameterError,
    FormParameter,
    FormRing,
    lambda_min,
    lambda_max,
    build_form_parameter,
    induce_poly_parameter,
    induce_localized_parameter,
)
from .groups import (
    GroupDescriptor,
    GroupMatrix,
    Matrix,
    MembershipError,
    conjugate_transpose,
    form_matrix,
    is_member,
    membership_diagnostic,
    block_partition,
    fine_partition,
    stabilize,
    tilde,
    inner,
    build_M,
    gl_embedding,
    gl_embedding_inverse,
)
from .generators import (
    GeneratorSymbol,
    GeneratorWord,
    SymbolError,
    gen_matrix,
    gen_inverse,
    split,
    commutator_witness,
    conjugation_split,
    interleave_identity,
    normal_form_congruent_X,
    factor_I_plus_M,
)
from .reduction import (
    ReductionError,
    UnimodularCertificate,
    ReductionResult,
    PatchReport,
    MembershipOracle,
    find_unit_in_coset,
    column_reduce_semisimple,
    improve_to_unit,
    reduce_isotropic_unimodular,
    diagonalize_mod_radical,
    dilate,
    local_global_patch,
    conjugate_into_E,
    bfs_closure,
    commutator_containment_check,
)

__all__ = [name for name in dir() if not name.startswith("_")]

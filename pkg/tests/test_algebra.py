import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from localpauli import algebra as ga
from localpauli.algebra import Multivector, Signature
from localpauli.exceptions import GradeOutOfRange, SignatureMismatch, SingularElement

from conftest import all_signatures
from oracles import all_words, dict_product, from_dict, to_dict, word_product, word_to_mask

SIGS = all_signatures(6)
SMALL_SIGS = all_signatures(4)


@st.composite
def sig_and_vectors(draw, count=1, sigs=SMALL_SIGS):
    sig = draw(st.sampled_from(sigs))
    seed = draw(st.integers(0, 2**32 - 1))
    rng = np.random.default_rng(seed)
    return (sig, *[ga.random_multivector(sig, rng) for _ in range(count)])


def mv(sig, **blades):
    out = sig.zero()
    for name, value in blades.items():
        key = name.lstrip("e")
        out = out + value * sig.blade(*[int(c) for c in key]) if key else out + value
    return out


# ---------------------------------------------------------------------------
# blade products


@pytest.mark.parametrize("p,q", [(p, n - p) for n in range(1, 6) for p in range(n + 1)])
def test_blade_table_matches_swap_counter(p, q):
    sig = Signature(p, q)
    metric = [1] * p + [-1] * q
    for A in all_words(sig.n):
        for B in all_words(sig.n):
            s, C = word_product(A, B, metric)
            assert ga.blade_product(word_to_mask(A), word_to_mask(B), sig) == (s, word_to_mask(C))


def test_blade_product_examples():
    assert ga.blade_product(0b1, 0b1, Signature(2, 0)) == (1, 0)
    assert ga.blade_product(0b10, 0b01, Signature(2, 0)) == (-1, 0b11)
    assert ga.blade_product(0b10, 0b10, Signature(1, 1)) == (-1, 0)
    assert ga.blade_product(0b111, 0b111, Signature(3, 0)) == (-1, 0)


def test_generators_anticommute_exactly():
    for sig in all_signatures(6, ("R",)):
        gens = sig.generators()
        for a, ga_ in enumerate(gens):
            for b, gb in enumerate(gens):
                lhs = ga_ * gb + gb * ga_
                expected = 2 * sig.eta[a, b] * sig.identity()
                assert np.array_equal(lhs.coeffs, expected.coeffs)


# ---------------------------------------------------------------------------
# products and projections


def test_product_examples():
    sig = Signature(2, 0)
    x = mv(sig, e=0.5, e1=-2.0, e12=3.0)
    assert sig.identity() * x == x
    v = mv(sig, e1=1.0, e2=1.0)
    assert v * v == 2 * sig.identity()
    B = sig.blade(1, 2)
    assert B * B == -sig.identity()


def test_product_matches_dictionary_oracle(rng):
    for sig in all_signatures(4):
        metric = [1] * sig.p + [-1] * sig.q
        a, b = ga.random_multivector(sig, rng), ga.random_multivector(sig, rng)
        expected = from_dict(dict_product(to_dict(a.coeffs, sig.n), to_dict(b.coeffs, sig.n), metric), sig.n, sig.dtype)
        np.testing.assert_allclose((a * b).coeffs, expected, atol=1e-12)


def test_signature_mismatch():
    with pytest.raises(SignatureMismatch):
        Signature(2, 0).blade(1) * Signature(1, 1).blade(1)
    with pytest.raises(SignatureMismatch):
        ga.commutator(Signature(2, 0).blade(1), Signature(0, 2).blade(1))


def test_signature_validation():
    with pytest.raises(ValueError):
        Signature(0, 0)
    with pytest.raises(ValueError):
        Signature(5, 4)
    with pytest.raises(ValueError):
        Signature(2, 0, "Q")
    assert Signature(1, 2).eta.tolist() == [[1, 0, 0], [0, -1, 0], [0, 0, -1]]


def test_grade_project_examples():
    sig = Signature(2, 0)
    assert ga.grade_project(mv(sig, e=1.0, e12=3.0), 2) == mv(sig, e12=3.0)
    assert ga.grade_project(sig.blade(1), 0) == sig.zero()
    with pytest.raises(GradeOutOfRange):
        ga.grade_project(sig.blade(1), 3)


@given(sig_and_vectors())
def test_grade_parts_partition(args):
    sig, a = args
    parts = [ga.grade_project(a, k) for k in range(sig.n + 1)]
    total = sum(parts[1:], parts[0])
    assert total == a
    for k, part in enumerate(parts):
        assert ga.grade_project(part, k) == part


def test_trace_examples():
    sig = Signature(2, 0)
    assert ga.trace(sig.identity()) == 1
    assert ga.trace(mv(sig, e1=1.0, e=5.0)) == 5
    assert ga.trace(sig.blade(1, 2) * sig.blade(1, 2)) == -1


# ---------------------------------------------------------------------------
# involutions


def test_reverse_examples():
    sig = Signature(2, 0)
    assert ga.reverse(sig.blade(1, 2)) == -sig.blade(1, 2)
    for g in sig.generators():
        assert ga.reverse(g) == g


@given(sig_and_vectors(count=2))
def test_reverse_is_anti_automorphism(args):
    sig, x, y = args
    lhs = ga.reverse(x * y)
    rhs = ga.reverse(y) * ga.reverse(x)
    assert lhs.allclose(rhs, 1e-12 * max(1.0, ga.norm(x) * ga.norm(y)))
    assert ga.reverse(ga.reverse(x)) == x
    assert ga.grade_involute(ga.grade_involute(x)) == x


@given(sig_and_vectors(count=2))
def test_grade_involute_is_automorphism(args):
    sig, x, y = args
    lhs = ga.grade_involute(x * y)
    rhs = ga.grade_involute(x) * ga.grade_involute(y)
    assert lhs.allclose(rhs, 1e-12 * max(1.0, ga.norm(x) * ga.norm(y)))


def test_blade_inverse_examples():
    assert ga.blade_inverse(0, Signature(2, 0)) == Signature(2, 0).identity()
    assert ga.blade_inverse(0b11, Signature(2, 0)) == -Signature(2, 0).blade(1, 2)
    assert ga.blade_inverse(0b10, Signature(1, 1)) == -Signature(1, 1).blade(2)


@pytest.mark.parametrize("sig", all_signatures(5, ("R",)), ids=str)
def test_blade_inverse_formula(sig):
    for mask in range(sig.dim):
        k = ga.grade_of(mask)
        expected = (-1) ** (k * (k - 1) // 2) * math.prod(int(sig.metric[i]) for i in range(sig.n) if mask >> i & 1)
        assert ga.blade_inverse_sign(mask, sig) == expected
        e = Multivector(sig, np.eye(sig.dim)[mask])
        assert e * ga.blade_inverse(mask, sig) == sig.identity()


def test_hermitian_examples():
    sig = Signature(1, 1)
    for a, g in enumerate(sig.generators()):
        assert ga.hermitian_conjugate(g) == sig.eta[a, a] * g
    csig = Signature(0, 1, "C")
    x = 1j * csig.blade(1)
    assert ga.hermitian_conjugate(x) == 1j * csig.blade(1)


@given(sig_and_vectors(count=2, sigs=all_signatures(4)))
def test_hermitian_properties(args):
    sig, x, y = args
    tol = 1e-12 * max(1.0, ga.norm(x) * ga.norm(y))
    assert ga.hermitian_conjugate(x * y).allclose(ga.hermitian_conjugate(y) * ga.hermitian_conjugate(x), tol)
    assert ga.hermitian_conjugate(ga.hermitian_conjugate(x)) == x
    if sig.is_complex:
        # antilinear
        assert ga.hermitian_conjugate(1j * x).allclose(-1j * ga.hermitian_conjugate(x), tol)


# ---------------------------------------------------------------------------
# norm, inverse, exp


def test_norm_examples():
    assert ga.norm(Signature(2, 0).zero()) == 0
    assert ga.norm(Signature(2, 0).blade(1, 2)) == 1
    assert ga.norm(mv(Signature(1, 0), e=3.0, e1=4.0)) == 5


@given(sig_and_vectors(sigs=all_signatures(6)))
def test_norm_is_coefficient_length(args):
    sig, a = args
    assert abs(ga.norm(a) ** 2 - float(np.sum(np.abs(a.coeffs) ** 2))) <= 1e-12 * max(1.0, ga.norm(a) ** 2)


def test_inverse_examples():
    sig = Signature(2, 0)
    assert ga.inverse(sig.identity()) == sig.identity()
    with pytest.raises(SingularElement):
        ga.inverse(mv(Signature(1, 0), e=1.0, e1=1.0))
    th = 0.37
    got = ga.inverse(mv(sig, e=math.cos(th), e12=math.sin(th)))
    assert got.allclose(mv(sig, e=math.cos(th), e12=-math.sin(th)), 1e-14)


def test_singular_element_details():
    with pytest.raises(SingularElement) as info:
        ga.inverse(mv(Signature(1, 0), e=1.0, e1=1.0))
    assert info.value.to_dict()["error"] == "singular_element"


def test_exp_examples():
    sig = Signature(2, 0)
    assert ga.exp(sig.zero()) == sig.identity()
    for phi in (0.3, 2.0, 7.5, -40.0):
        got = ga.exp(-(phi / 2) * sig.blade(1, 2))
        assert got.allclose(mv(sig, e=math.cos(phi / 2), e12=-math.sin(phi / 2)), 1e-12 * max(1, abs(phi)))
    sig = Signature(1, 1)
    for phi in (0.3, 2.0, 7.5):
        got = ga.exp(-(phi / 2) * sig.blade(1, 2))
        want = mv(sig, e=math.cosh(phi / 2), e12=-math.sinh(phi / 2))
        assert got.allclose(want, 1e-12 * ga.norm(want))


def test_exp_matches_matrix_exponential(rng):
    from oracles import matrix_exp

    for sig in all_signatures(4):
        a = ga.random_multivector(sig, rng, 0.8)
        L = ga.left_matrix(a.coeffs, sig)
        expected = matrix_exp(L)[:, 0]
        np.testing.assert_allclose(ga.exp(a).coeffs, expected, atol=1e-11)


def test_exp_batch_does_not_depend_on_neighbours(rng):
    sig = Signature(3, 0)
    a = ga.random_multivector(sig, rng).coeffs
    big = ga.random_multivector(sig, rng, 40.0).coeffs
    alone = ga.exp_array(a[None], sig)[0]
    mixed = ga.exp_array(np.stack([big, a, big]), sig)[1]
    assert np.array_equal(alone, mixed)


def test_commutator_examples(rng):
    sig = Signature(2, 0)
    a = ga.random_multivector(sig, rng)
    assert ga.commutator(a, a) == sig.zero()
    assert ga.commutator(sig.blade(1, 2), sig.blade(1)) == -2 * sig.blade(2)
    assert ga.commutator(sig.identity(), a) == sig.zero()


@pytest.mark.parametrize("sig", all_signatures(5, ("R",)), ids=str)
def test_center_is_grade0_or_top(sig):
    for mask in range(sig.dim):
        e = Multivector(sig, np.eye(sig.dim)[mask])
        central = ga.is_central(e)
        expected = mask == 0 or (sig.n % 2 == 1 and mask == sig.dim - 1)
        assert central == expected


def test_multivector_is_immutable():
    x = Signature(2, 0).blade(1)
    with pytest.raises(AttributeError):
        x.coeffs = None
    with pytest.raises(ValueError):
        x.coeffs[0] = 1.0


def test_multivector_indexing_and_repr():
    sig = Signature(3, 0)
    x = mv(sig, e=2.0, e13=-1.5)
    assert x["13"] == -1.5 and x[""] == 2.0 and x[0b101] == -1.5
    assert "e13" in repr(x)
    with pytest.raises(ValueError):
        Multivector(sig, [1.0, 2.0])
    with pytest.raises(ValueError):
        Multivector(sig, np.full(8, 1j))


def test_complex_promotion():
    r = Signature(2, 0).blade(1)
    c = Signature(2, 0, "C").blade(2)
    assert (r * c).sig.is_complex
    with pytest.raises(ValueError):
        r * 1j

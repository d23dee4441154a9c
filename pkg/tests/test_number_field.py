import math

import pytest
from hypothesis import given
from hypothesis import strategies as st

from hilbert_escape.number_field import (
    ConfigurationError,
    EnumerationCapError,
    FieldSpec,
    RingElement,
    embed,
    enumerate_box,
    field_norm,
    fundamental_unit,
    parse_field,
)

ALL_FIELDS = ([FieldSpec("rational")]
              + [FieldSpec("real-quadratic", d) for d in (2, 3, 5, 13)]
              + [FieldSpec("imaginary-quadratic", d) for d in (1, 2, 3, 7, 11)])
QUADRATIC = ALL_FIELDS[1:]
coord = st.integers(-10 ** 6, 10 ** 6)


def test_embeddings_of_generators():
    assert [float(z) for z in embed(FieldSpec("rational"), RingElement(7, 0))] == [7.0]
    s = embed(FieldSpec("real-quadratic", 5), RingElement(0, 1))
    assert float(s[0]) == pytest.approx(1.6180339887498949)
    assert float(s[1]) == pytest.approx(-0.6180339887498949)
    (z,) = embed(FieldSpec("imaginary-quadratic", 1), RingElement(0, 1))
    assert complex(z) == pytest.approx(1j)


def test_norm_examples():
    assert field_norm(FieldSpec("real-quadratic", 5), RingElement(0, 1)) == -1
    assert field_norm(FieldSpec("imaginary-quadratic", 1), RingElement(1, 1)) == 2
    assert field_norm(FieldSpec("real-quadratic", 2), RingElement(3, 2)) == 1


@pytest.mark.parametrize("d, unit, reg", [(2, (1, 1), 0.881373587), (3, (2, 1), 1.316957897),
                                          (5, (0, 1), 0.481211825), (13, (1, 1), 1.194763217)])
def test_fundamental_units(d, unit, reg):
    F = FieldSpec("real-quadratic", d)
    assert fundamental_unit(F) == RingElement(*unit)
    assert F.regulator == pytest.approx(reg, abs=1e-8)


def test_no_unit_without_rank():
    assert fundamental_unit(FieldSpec("rational")) is None
    assert fundamental_unit(FieldSpec("imaginary-quadratic", 7)) is None


def test_enumerate_box_examples():
    Q = FieldSpec("rational")
    assert sorted(e.x for e in enumerate_box(Q, [1.5])) == [-1, 0, 1]
    # |omega| = 1.618 > 1.1, so only 0 and +-1 survive
    assert len(enumerate_box(FieldSpec("real-quadratic", 5), [1.1, 1.1])) == 3
    assert len(enumerate_box(FieldSpec("imaginary-quadratic", 1), [1.0])) == 5


def test_enumerate_box_matches_scan():
    F = FieldSpec("real-quadratic", 13)
    bounds = [4.0, 2.5]
    got = {(e.x, e.y) for e in enumerate_box(F, bounds)}
    w = (1 + math.sqrt(13)) / 2, (1 - math.sqrt(13)) / 2
    want = {(x, y) for x in range(-30, 31) for y in range(-30, 31)
            if abs(x + y * w[0]) <= 4.0 and abs(x + y * w[1]) <= 2.5}
    assert got == want


def test_enumerate_box_cap():
    with pytest.raises(EnumerationCapError):
        enumerate_box(FieldSpec("real-quadratic", 2), [1e4, 1e4], cap=1000)
    with pytest.raises(ValueError):
        enumerate_box(FieldSpec("rational"), [0.0])


def test_allow_list_and_parse():
    with pytest.raises(ConfigurationError):
        FieldSpec("real-quadratic", 7)
    with pytest.raises(ConfigurationError):
        FieldSpec("cubic", 2)
    assert parse_field("Q(sqrt5)") == FieldSpec("real-quadratic", 5)
    assert parse_field("Q(i)") == FieldSpec("imaginary-quadratic", 1)
    assert parse_field("Q(sqrt-3)") == FieldSpec("imaginary-quadratic", 3)
    for F in ALL_FIELDS:
        assert parse_field(str(F)) == F


@pytest.mark.parametrize("F", QUADRATIC, ids=str)
@given(x1=coord, y1=coord, x2=coord, y2=coord)
def test_norm_multiplicative(F, x1, y1, x2, y2):
    a, b = RingElement(x1, y1), RingElement(x2, y2)
    assert F.norm(F.mul(a, b)) == F.norm(a) * F.norm(b)


@pytest.mark.parametrize("F", QUADRATIC, ids=str)
@given(x=coord, y=coord)
def test_embedding_consistency(F, x, y):
    lam = RingElement(x, y)
    n = F.norm(lam)
    sig = embed(F, lam)
    prod = sig[0] * sig[1] if F.kind == "real-quadratic" else abs(sig[0]) ** 2
    assert abs(float(prod) - n) <= 1e-9 * max(1, abs(n))


@pytest.mark.parametrize("F", QUADRATIC, ids=str)
@given(x1=st.integers(-500, 500), y1=st.integers(-500, 500),
       x2=st.integers(-500, 500), y2=st.integers(-500, 500))
def test_euclidean_division_and_gcd(F, x1, y1, x2, y2):
    a, b = RingElement(x1, y1), RingElement(x2, y2)
    if b.is_zero():
        return
    q, rem = F.divmod(a, b)
    assert a == F.mul(q, b) + rem
    assert abs(F.norm(rem)) < abs(F.norm(b))
    g, s, t = F.xgcd(a, b)
    assert F.mul(s, a) + F.mul(t, b) == g
    assert F.exact_div(a, g) is not None and F.exact_div(b, g) is not None

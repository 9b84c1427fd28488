import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from dacr.coding import (F257, F65537, BN254_FR, CodeParams, DecodeFailure, InsufficientData, InvalidInput,
                         bytes_to_column, column_to_bytes, decode2d, domain, encode2d, rs_decode_row,
                         rs_encode_row)


def naive_eval(coeffs, x, p):
    return sum(c * pow(x, i, p) for i, c in enumerate(coeffs)) % p


def naive_interp(xs, ys, p):
    """Lagrange interpolation coefficients, computed the slow way as an oracle."""
    k = len(xs)
    out = [0] * k
    for j in range(k):
        num, den = [1], 1
        for m in range(k):
            if m == j:
                continue
            num = [(a - xs[m] * b) % p for a, b in zip([0] + num, num + [0])]
            den = den * (xs[j] - xs[m]) % p
        scale = ys[j] * pow(den, -1, p) % p
        out = [(o + scale * c) % p for o, c in zip(out, num)]
    return out


@pytest.mark.parametrize("field", [F257, F65537])
def test_root_of_unity_order(field):
    w = field.root_of_unity(16)
    assert pow(w, 16, field.p) == 1 and pow(w, 8, field.p) != 1


def test_wire_width_exceeds_payload_width():
    assert F65537.bytes_per_element == 2 and F65537.element_wire_bytes == 3
    assert F257.bytes_per_element == 1 and F257.element_wire_bytes == 2


@pytest.mark.parametrize("k", [1, 4, 7])
def test_encode_matches_naive_polynomial(k, rng):
    p = F65537.p
    row = rng.integers(0, p, k).tolist()
    pts = domain(F65537, 3 * k).tolist()
    coeffs = naive_interp(pts[:k], row, p)
    want = [naive_eval(coeffs, x, p) for x in pts]
    assert rs_encode_row(row).tolist() == want


def test_decode_from_any_k_points(rng):
    k = 5
    prm = CodeParams(k)
    row = F65537.random(rng, k)
    code = rs_encode_row(row)
    for _ in range(20):
        idx = rng.choice(3 * k, size=k, replace=False)
        assert np.array_equal(rs_decode_row([(i, code[i]) for i in idx], prm), row)


def test_decode_errors():
    prm = CodeParams(3)
    code = rs_encode_row([1, 2, 3])
    with pytest.raises(InsufficientData):
        rs_decode_row([(0, code[0])], prm)
    with pytest.raises(InvalidInput):
        rs_decode_row([(0, 1), (0, 1), (1, 1)], prm)
    bad = [(i, int(code[i])) for i in range(5)]
    bad[4] = (4, (bad[4][1] + 1) % F65537.p)
    with pytest.raises(DecodeFailure):
        rs_decode_row(bad, prm)


def test_too_large_for_field():
    with pytest.raises(InvalidInput):
        CodeParams(200, field=F257)


@settings(max_examples=40, deadline=None)
@given(k=st.integers(1, 9), d=st.integers(1, 4), seed=st.integers(0, 2**32 - 1), data=st.data())
def test_2d_roundtrip(k, d, seed, data):
    rng = np.random.default_rng(seed)
    prm = CodeParams(k, d)
    cols = [F65537.random(rng, d) for _ in range(k)]
    m = encode2d(cols, prm)
    assert m.shape == (d, 3 * k)
    assert np.array_equal(m[:, :k], np.stack(cols, axis=1))
    idx = data.draw(st.lists(st.integers(0, 3 * k - 1), min_size=k, max_size=3 * k, unique=True))
    assert np.array_equal(decode2d({i: m[:, i] for i in idx}, prm), m[:, :k])


@settings(max_examples=30, deadline=None)
@given(k=st.integers(1, 6), seed=st.integers(0, 2**32 - 1))
def test_encoding_is_linear(k, seed):
    rng = np.random.default_rng(seed)
    a, b = F65537.random(rng, k), F65537.random(rng, k)
    p = F65537.p
    lhs = rs_encode_row((a + 3 * b) % p)
    rhs = (rs_encode_row(a) + 3 * rs_encode_row(b)) % p
    assert np.array_equal(lhs, rhs)


def test_big_field_roundtrip(rng):
    prm = CodeParams(3, 2, BN254_FR)
    cols = [BN254_FR.random(rng, 2) for _ in range(3)]
    m = encode2d(cols, prm)
    out = decode2d({i: m[:, i] for i in (2, 5, 7)}, prm)
    assert [[int(v) for v in r] for r in out] == [[int(v) for v in r] for r in m[:, :3]]


@given(st.binary(max_size=30))
def test_bytes_roundtrip(data):
    col = bytes_to_column(data, 16, F65537)
    assert column_to_bytes(col, len(data), F65537) == data


def test_excluded_columns_are_zero():
    prm = CodeParams(3, 2)
    m = encode2d([None, [1, 2], None], prm)
    assert not m[:, 0].any() and not m[:, 2].any()


def test_decode_every_subset_n4(rng):
    import itertools
    prm = CodeParams(4)
    row = F65537.random(rng, 4)
    code = rs_encode_row(row)
    for idx in itertools.combinations(range(12), 4):
        assert np.array_equal(rs_decode_row([(i, code[i]) for i in idx], prm), row)


def test_single_column_parity_matches_rows(rng):
    prm = CodeParams(4, 3)
    col = F65537.random(rng, 3)
    m = encode2d([None, col, None, None], prm)
    for r in range(3):
        assert np.array_equal(m[r], rs_encode_row([0, col[r], 0, 0]))

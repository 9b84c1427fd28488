"""Prime fields and systematic Reed-Solomon coding at rate 1/3.

Indices are 0-based: chunk ``i`` of an instance with ``n`` systematic
columns lives at evaluation point ``omega**i`` for ``i in range(3n)``,
where ``omega`` has power-of-two order covering ``3n``.  The first ``n``
chunks are the data itself.
"""
from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property, lru_cache, reduce

import numpy as np


class CodingError(ValueError):
    """Base class for coding failures."""


class InvalidInput(CodingError):
    pass


class InsufficientData(CodingError):
    pass


class DecodeFailure(CodingError):
    pass


@dataclass(frozen=True)
class PrimeField:
    p: int
    generator: int  # generator of the multiplicative group
    name: str = ""

    @cached_property
    def two_adicity(self) -> int:
        s, m = 0, self.p - 1
        while m % 2 == 0:
            s, m = s + 1, m // 2
        return s

    @cached_property
    def dtype(self):
        # int64 is safe as long as a single product fits; sums are reduced per step
        return np.int64 if self.p < 2**31 else object

    @property
    def bytes_per_element(self) -> int:
        """Payload bytes one element can carry."""
        return (self.p.bit_length() - 1) // 8

    @property
    def element_wire_bytes(self) -> int:
        """Bytes needed to ship an arbitrary element."""
        return (self.p.bit_length() + 7) // 8

    def root_of_unity(self, order: int) -> int:
        if order & (order - 1) or order > 2**self.two_adicity:
            raise InvalidInput(f"no root of unity of order {order} in F_{self.p}")
        return pow(self.generator, (self.p - 1) // order, self.p)

    def array(self, values) -> np.ndarray:
        if self.dtype is object:
            a = np.array([int(v) % self.p for v in np.ravel(values)], dtype=object)
            return a.reshape(np.shape(values))
        return np.asarray(values, dtype=np.int64) % self.p

    def zeros(self, shape) -> np.ndarray:
        if self.dtype is object:
            z = np.empty(shape, dtype=object)
            z.fill(0)
            return z
        return np.zeros(shape, dtype=np.int64)

    def random(self, rng: np.random.Generator, shape) -> np.ndarray:
        if self.dtype is object:
            n = int(np.prod(shape))
            vals = [int.from_bytes(rng.bytes(40), "big") % self.p for _ in range(n)]
            return np.array(vals, dtype=object).reshape(shape)
        return rng.integers(0, self.p, size=shape, dtype=np.int64)

    def inv(self, a: int) -> int:
        a %= self.p
        if a == 0:
            raise ZeroDivisionError("inverse of zero")
        return pow(a, self.p - 2, self.p)

    def inv_array(self, a: np.ndarray) -> np.ndarray:
        if self.dtype is object:
            return np.array([pow(int(x), self.p - 2, self.p) for x in np.ravel(a)],
                            dtype=object).reshape(a.shape)
        # vectorised square-and-multiply; operands < 2^31 so products fit in int64
        base, e = a % self.p, self.p - 2
        out = np.ones_like(base)
        while e:
            if e & 1:
                out = out * base % self.p
            base = base * base % self.p
            e >>= 1
        return out

    def matmul(self, a: np.ndarray, b: np.ndarray) -> np.ndarray:
        p = self.p
        if self.dtype is object:
            return np.dot(a, b) % p
        inner = a.shape[-1]
        if (p - 1) ** 2 * max(inner, 1) < 2**63:
            return (a @ b) % p
        # split the inner dimension so partial sums never overflow
        step = max(1, (2**63 - 1) // (p - 1) ** 2)
        acc = np.zeros((a.shape[0], b.shape[-1]) if b.ndim > 1 else a.shape[0], dtype=np.int64)
        for s in range(0, inner, step):
            acc = (acc + a[..., s:s + step] @ b[s:s + step]) % p
        return acc

    def prod(self, a: np.ndarray, axis: int) -> np.ndarray:
        """Product along an axis, reduced mod p after every step."""
        a = np.moveaxis(a, axis, 0)
        return reduce(lambda x, y: x * y % self.p, a[1:], a[0] % self.p)

    def mat_inv(self, m: np.ndarray) -> np.ndarray:
        """Gauss-Jordan inverse mod p."""
        k = m.shape[0]
        a = np.concatenate([self.array(m), self.array(np.eye(k, dtype=np.int64))], axis=1)
        for col in range(k):
            piv = next((r for r in range(col, k) if a[r, col] % self.p), None)
            if piv is None:
                raise DecodeFailure("singular matrix")
            if piv != col:
                a[[col, piv]] = a[[piv, col]]
            a[col] = a[col] * self.inv(int(a[col, col])) % self.p
            for r in range(k):
                if r != col and a[r, col]:
                    a[r] = (a[r] - a[r, col] * a[col]) % self.p
        return a[:, k:]


F257 = PrimeField(257, 3, "F257")
F65537 = PrimeField(65537, 3, "F65537")
# scalar field of the bn254 pairing curve, 2-adicity 28
BN254_FR = PrimeField(
    21888242871839275222246405745257275088548364400416034343698204186575808495617, 5, "BN254_Fr")


def next_pow2(x: int) -> int:
    return 1 << max(0, (x - 1).bit_length())


@lru_cache(maxsize=None)
def domain(field: PrimeField, size: int) -> np.ndarray:
    """First ``size`` powers of a root of unity whose order is the next power of two."""
    w = field.root_of_unity(next_pow2(size))
    pts, x = [], 1
    for _ in range(size):
        pts.append(x)
        x = x * w % field.p
    out = field.array(pts)
    out.setflags(write=False)
    return out


def lagrange_matrix(field: PrimeField, xs, ys) -> np.ndarray:
    """M[j, i] = L_i(ys[j]) for the Lagrange basis on nodes ``xs``."""
    p = field.p
    xs, ys = field.array(xs), field.array(ys)
    k = len(xs)
    diff = (xs[:, None] - xs[None, :]) % p
    diff[np.arange(k), np.arange(k)] = 1
    w = field.inv_array(field.prod(diff, axis=1))
    d = (ys[:, None] - xs[None, :]) % p
    hit = d == 0
    d_safe = d.copy()
    d_safe[hit] = 1
    ell = field.prod(d, axis=1)
    m = ell[:, None] * w[None, :] % p * field.inv_array(d_safe) % p
    rows = np.nonzero(hit.any(axis=1))[0]
    for j in rows:
        m[j, :] = 0
        m[j, int(np.argmax(hit[j]))] = 1
    return m


@dataclass(frozen=True)
class CodeParams:
    k: int             # systematic chunks (= n)
    d: int = 1         # rows per column
    field: PrimeField = F65537

    @property
    def h(self) -> int:
        return 2 * self.k

    @property
    def total(self) -> int:
        return 3 * self.k

    def __post_init__(self):
        if self.k < 1 or self.d < 1:
            raise InvalidInput("k and d must be positive")
        if next_pow2(self.total) > 2**self.field.two_adicity:
            raise InvalidInput(f"3k={self.total} exceeds the root-of-unity order of {self.field.name}")


@lru_cache(maxsize=None)
def _extension_matrix(field: PrimeField, k: int) -> np.ndarray:
    pts = domain(field, 3 * k)
    m = lagrange_matrix(field, pts[:k], pts[k:])
    m.setflags(write=False)
    return m


def encoding_matrix(field: PrimeField, k: int) -> np.ndarray:
    """(3k x k) generator matrix, identity on top."""
    return np.concatenate([field.array(np.eye(k, dtype=np.int64)), _extension_matrix(field, k)])


def rs_encode_row(row, field: PrimeField = F65537) -> np.ndarray:
    row = field.array(row)
    if row.ndim != 1 or len(row) == 0:
        raise InvalidInput("row must be a non-empty vector")
    ext = field.matmul(_extension_matrix(field, len(row)), row)
    return np.concatenate([row, ext])


@lru_cache(maxsize=4096)
def _decode_matrix(field: PrimeField, k: int, idx: tuple) -> np.ndarray:
    pts = domain(field, 3 * k)
    m = lagrange_matrix(field, pts[list(idx)], pts[:k])
    m.setflags(write=False)
    return m


def _check_indices(indices, k):
    if len(set(indices)) != len(indices):
        raise InvalidInput("duplicate indices")
    if any(i < 0 or i >= 3 * k for i in indices):
        raise InvalidInput("index out of range")
    if len(indices) < k:
        raise InsufficientData(f"need {k} points, got {len(indices)}")


def rs_decode_row(points, params: CodeParams) -> np.ndarray:
    """Recover the systematic row from at least ``k`` (index, value) pairs."""
    points = sorted((int(i), v) for i, v in points)
    idx = [i for i, _ in points]
    _check_indices(idx, params.k)
    vals = params.field.array([v for _, v in points])
    row = params.field.matmul(_decode_matrix(params.field, params.k, tuple(idx[:params.k])), vals[:params.k])
    if len(idx) > params.k and not np.array_equal(rs_encode_row(row, params.field)[idx], vals):
        raise DecodeFailure("points are not on a single degree-(k-1) polynomial")
    return row


def encode2d(columns, params: CodeParams) -> np.ndarray:
    """Row-wise extension of a d x n matrix; returns d x 3n, chunk i is column i.

    ``None`` entries stand for excluded replicas and are encoded as zero.
    """
    f = params.field
    if len(columns) != params.k:
        raise InvalidInput(f"expected {params.k} columns, got {len(columns)}")
    data = f.zeros((params.d, params.k))
    for i, col in enumerate(columns):
        if col is None:
            continue
        col = f.array(col)
        if col.shape != (params.d,):
            raise InvalidInput(f"column {i} has shape {col.shape}, expected ({params.d},)")
        data[:, i] = col
    ext = f.matmul(data, _extension_matrix(f, params.k).T)
    return np.concatenate([data, ext], axis=1)


def decode2d(chunks: dict, params: CodeParams) -> np.ndarray:
    """Rebuild the d x n systematic matrix from ``{index: column}`` with >= k entries."""
    f = params.field
    idx = sorted(chunks)
    _check_indices(idx, params.k)
    sel = idx[:params.k]
    stacked = np.stack([f.array(chunks[i]) for i in idx], axis=1)  # d x |idx|
    data = f.matmul(stacked[:, :params.k], _decode_matrix(f, params.k, tuple(sel)).T)
    if len(idx) > params.k:
        full = f.matmul(data, encoding_matrix(f, params.k).T)
        if not np.array_equal(full[:, idx], stacked):
            raise DecodeFailure("chunks are inconsistent")
    return data


# -- byte packing ---------------------------------------------------------

def bytes_to_column(data: bytes, d: int, field: PrimeField) -> np.ndarray:
    """Pack bytes big-endian into d field elements, zero-padded on the right."""
    w = field.bytes_per_element
    if len(data) > d * w:
        raise InvalidInput(f"{len(data)} bytes do not fit in {d} rows")
    padded = data.ljust(d * w, b"\0")
    if w == 1:
        return field.array(np.frombuffer(padded, dtype=np.uint8))
    if w == 2:
        return field.array(np.frombuffer(padded, dtype=">u2"))
    return field.array([int.from_bytes(padded[i:i + w], "big") for i in range(0, d * w, w)])


def column_to_bytes(col, byte_len: int, field: PrimeField) -> bytes:
    w = field.bytes_per_element
    if w == 2 and field.dtype is not object:
        out = np.asarray(col).astype(">u2").tobytes()
    else:
        out = b"".join(int(v).to_bytes(w, "big") for v in col)
    return out[:byte_len]

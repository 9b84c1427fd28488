"""Linear polynomial commitments over columns, plus list extension and the final digest.

A column of ``d`` values is read as the evaluations of a degree < d
polynomial on the first ``d`` powers of a root of unity (the row domain).
Two backends share one interface:

* ``TransparentPCS`` - the "commitment" is the coefficient vector itself.
  Insecure, exactly linear, cheap; the simulator default.
* ``KZGPCS`` - Kate commitments on bn254 with a seed-derived setup.
  Needs the optional ``py_ecc`` dependency and is slow (pure Python pairings).
"""
from __future__ import annotations

import hashlib
import struct
from functools import cached_property

import numpy as np

from .coding import (BN254_FR, F65537, InvalidInput, PrimeField, domain,
                     encoding_matrix)


class VectorCommitment:
    """Group element of the transparent backend: a coefficient vector mod p."""

    __slots__ = ("v", "_key")

    def __init__(self, v: np.ndarray):
        self.v = v
        self.v.setflags(write=False)
        self._key = None

    @property
    def key(self) -> bytes:
        if self._key is None:
            self._key = b"".join(int(x).to_bytes(8, "big") for x in self.v) if self.v.dtype == object \
                else self.v.astype(">i8").tobytes()
        return self._key

    def __eq__(self, other):
        return isinstance(other, VectorCommitment) and self.key == other.key

    def __hash__(self):
        return hash(self.key)

    def __repr__(self):
        return f"VectorCommitment({hashlib.sha256(self.key).hexdigest()[:12]})"


class PCS:
    """Shared column-level logic; subclasses provide the group operations."""

    def __init__(self, field: PrimeField, d: int, points=None):
        self.field = field
        self.d = d
        # evaluation points; the first d carry the data, later ones (if any) are extension points
        self.points = domain(field, d) if points is None else points

    # backend hooks --------------------------------------------------------
    def _commit_coeffs(self, coeffs):
        raise NotImplementedError

    def lincomb(self, m: np.ndarray, comms: list) -> list:
        """Rows of ``m`` applied to ``comms`` in the group."""
        raise NotImplementedError

    @property
    def identity(self):
        raise NotImplementedError

    def to_bytes(self, c) -> bytes:
        raise NotImplementedError

    def wire_bytes(self, c) -> bytes:
        """32-byte form used for byte accounting on the wire."""
        raise NotImplementedError

    def _witness(self, coeffs, x):
        raise NotImplementedError

    def _check(self, c, x, value, w) -> bool:
        raise NotImplementedError

    # column helpers -------------------------------------------------------
    @cached_property
    def _interp(self) -> np.ndarray:
        """Evaluations -> coefficients on the row domain."""
        van = self.field.array([[pow(int(x), j, self.field.p) for j in range(self.d)] for x in self.points[:self.d]])
        return self.field.mat_inv(van)

    def coefficients(self, column) -> np.ndarray:
        col = self.field.array(column)
        if col.ndim != 1 or len(col) > self.d:
            raise InvalidInput(f"column of length {len(col)} exceeds degree bound {self.d}")
        if len(col) < self.d:
            col = np.concatenate([col, self.field.zeros(self.d - len(col))])
        return self.field.matmul(self._interp, col)

    def commit(self, column):
        return self._commit_coeffs(self.coefficients(column))

    def is_identity(self, c) -> bool:
        return c == self.identity

    def create_witness(self, column, index: int):
        if not 0 <= index < len(self.points):
            raise InvalidInput("index outside the evaluation domain")
        coeffs = self.coefficients(column)
        value, _ = _quotient(coeffs, int(self.points[index]), self.field.p)
        return value, self._witness(coeffs, int(self.points[index]))

    def verify_eval(self, c, index: int, value: int, w) -> bool:
        if not 0 <= index < len(self.points):
            return False
        try:
            return bool(self._check(c, int(self.points[index]), int(value) % self.field.p, w))
        except (TypeError, ValueError, AttributeError):
            return False

    def extend_eval(self, per_column: list) -> list:
        """Group-linear RS extension of n commitments to 3n."""
        n = len(per_column)
        if n == 0:
            raise InvalidInput("empty commitment list")
        return list(per_column) + list(self._memo_entry(per_column)[0])

    def _memo_entry(self, per_column) -> list:
        # every replica extends the same list; memoize on identity, then on the canonical bytes
        ids = self.__dict__.setdefault("_ext_ids", {})
        got = ids.get(id(per_column))
        if got is not None and got[0] is per_column:
            return got[1]
        key = b"".join(map(self.to_bytes, per_column))
        memo = self.__dict__.setdefault("_ext_memo", {})
        hit = memo.get(key)
        if hit is None:
            if len(memo) > 256:
                memo.clear()
            n = len(per_column)
            hit = memo[key] = [tuple(self.lincomb(encoding_matrix(self.field, n)[n:], per_column)), None]
        if isinstance(per_column, tuple):
            if len(ids) > 256:
                ids.clear()
            ids[id(per_column)] = (per_column, hit)
        return hit

    def final_commit_of(self, per_column: list) -> bytes:
        """``final_commit(extend_eval(per_column))``, memoized."""
        if not per_column:
            raise InvalidInput("empty commitment list")
        hit = self._memo_entry(per_column)
        if hit[1] is None:
            hit[1] = self.final_commit(list(per_column) + list(hit[0]))
        return hit[1]

    def final_commit(self, extended: list) -> bytes:
        """SHA-256 over length-prefixed canonical encodings, in index order."""
        h = hashlib.sha256(b"dacr/final-commit")
        h.update(struct.pack(">I", len(extended)))
        for c in extended:
            b = self.to_bytes(c)
            h.update(struct.pack(">I", len(b)))
            h.update(b)
        return h.digest()


def _quotient(coeffs, x: int, p: int):
    """Synthetic division of phi(X) - phi(x) by (X - x); returns (phi(x), q)."""
    q = [0] * (len(coeffs) - 1)
    acc = 0
    for i in range(len(coeffs) - 1, -1, -1):
        acc = (acc * x + int(coeffs[i])) % p
        if i:
            q[i - 1] = acc
    return acc, q


class TransparentPCS(PCS):
    name = "transparent"

    def __init__(self, field: PrimeField = F65537, d: int = 8, points=None):
        super().__init__(field, d, points)
        self._id = VectorCommitment(field.zeros(d))

    def _commit_coeffs(self, coeffs):
        return VectorCommitment(coeffs.copy())

    @property
    def identity(self):
        return self._id

    def lincomb(self, m, comms):
        stacked = np.stack([c.v for c in comms])
        return [VectorCommitment(r) for r in self.field.matmul(m, stacked)]

    def to_bytes(self, c):
        return c.key

    def wire_bytes(self, c):
        return hashlib.sha256(c.key).digest()

    def _witness(self, coeffs, x):
        _, q = _quotient(coeffs, x, self.field.p)
        return tuple(q)

    def _check(self, c, x, value, w):
        v, q = _quotient(c.v, x, self.field.p)
        return v == value and tuple(int(a) for a in w) == tuple(q)


class KZGPCS(PCS):
    """Kate commitments on bn254 (G1 commitments, G2 verification key)."""

    name = "kzg"

    def __init__(self, d: int = 4, seed: int = 0):
        from py_ecc import optimized_bn128 as bn
        super().__init__(BN254_FR, d)
        self.bn = bn
        self.seed = seed
        # test-only toxic waste, derived from the seed so golden vectors are stable
        tau = int.from_bytes(hashlib.sha256(b"dacr/kzg-setup" + seed.to_bytes(8, "big")).digest(), "big") % BN254_FR.p
        self.g1_powers = []
        acc = 1
        for _ in range(d):
            self.g1_powers.append(bn.multiply(bn.G1, acc))
            acc = acc * tau % BN254_FR.p
        self.g2_tau = bn.multiply(bn.G2, tau)

    def setup_bytes(self) -> bytes:
        return b"".join(self.to_bytes(g) for g in self.g1_powers)

    @property
    def identity(self):
        return self.bn.Z1

    def is_identity(self, c):
        return self.bn.is_inf(c)

    def _norm(self, pt):
        # affine with z = 1 so plain tuple equality is canonical
        bn = self.bn
        if bn.is_inf(pt):
            return bn.Z1
        x, y = bn.normalize(pt)
        return (x, y, bn.FQ.one())

    def _msm(self, scalars, points):
        bn = self.bn
        acc = bn.Z1
        for s, pt in zip(scalars, points):
            s = int(s) % BN254_FR.p
            if s:
                acc = bn.add(acc, bn.multiply(pt, s))
        return self._norm(acc)

    def _commit_coeffs(self, coeffs):
        return self._msm(coeffs, self.g1_powers)

    def lincomb(self, m, comms):
        return [self._msm(row, comms) for row in m]

    def to_bytes(self, c):
        bn = self.bn
        if bn.is_inf(c):
            return bytes(64)
        x, y = bn.normalize(c)
        return int(x).to_bytes(32, "big") + int(y).to_bytes(32, "big")

    def wire_bytes(self, c):
        # compressed: x coordinate with the y parity in the top bit
        bn = self.bn
        if bn.is_inf(c):
            return bytes(32)
        x, y = bn.normalize(c)
        return (int(x) | ((int(y) & 1) << 255)).to_bytes(32, "big")

    def _witness(self, coeffs, x):
        _, q = _quotient(coeffs, x, BN254_FR.p)
        return self._msm(q, self.g1_powers)

    def _check(self, c, x, value, w):
        bn = self.bn
        if not (bn.is_on_curve(c, bn.b) and bn.is_on_curve(w, bn.b)):
            return False
        lhs_pt = bn.add(c, bn.neg(bn.multiply(bn.G1, value))) if value else c
        rhs_g2 = bn.add(self.g2_tau, bn.neg(bn.multiply(bn.G2, x))) if x else self.g2_tau
        # e(C - [v]G1, G2) == e(W, [tau - x]G2)
        return bn.pairing(bn.G2, lhs_pt) == bn.pairing(rhs_g2, w)
